//! Flat-file outputs: CSV tables, JSON summaries and standalone SVG plots.
//! Every artifact carries the configuration hash and master seed.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

/// A rectangular table of already formatted cells. The provenance columns
/// `config_hash` and `seed` are prepended on write.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Self { columns: columns.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self, prov: &Provenance) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["config_hash", "seed"].into_iter().chain(self.columns.iter().map(String::as_str)))?;
        let seed = prov.seed.to_string();
        for row in &self.rows {
            w.write_record([prov.config_hash.as_str(), seed.as_str()].into_iter().chain(row.iter().map(String::as_str)))?;
        }
        Ok(String::from_utf8(w.into_inner()?)?)
    }

    /// Parses CSV written by [`Table::to_csv`], returning the provenance of
    /// the first row (if any) and the table without provenance columns.
    pub fn from_csv(text: &str) -> Result<(Option<Provenance>, Table)> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        anyhow::ensure!(header.len() >= 2 && header[0] == "config_hash" && header[1] == "seed", "missing provenance columns");
        let mut table = Table::new(header[2..].iter().cloned());
        let mut prov = None;
        for rec in r.records() {
            let rec = rec?;
            if prov.is_none() {
                prov = Some(Provenance { config_hash: rec[0].to_string(), seed: rec[1].parse()? });
            }
            table.push(rec.iter().skip(2).map(str::to_string).collect());
        }
        Ok((prov, table))
    }

    pub fn write_csv(&self, path: &Path, prov: &Provenance) -> Result<()> {
        fs::write(path, self.to_csv(prov)?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Writes `{"provenance": ..., "result": ...}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, prov: &Provenance, result: &T) -> Result<()> {
    let doc = serde_json::json!({ "provenance": prov, "result": result });
    let text = serde_json::to_string_pretty(&doc)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinePlot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

impl LinePlot {
    fn transform(&self, (x, y): (f64, f64)) -> Option<(f64, f64)> {
        let x = if self.log_x { x.log10() } else { x };
        let y = if self.log_y { y.log10() } else { y };
        (x.is_finite() && y.is_finite()).then_some((x, y))
    }

    /// Renders a self-contained SVG with one `<polyline>` per series.
    /// Points that cannot be shown on a log axis are skipped.
    pub fn to_svg(&self, prov: &Provenance) -> String {
        let pts: Vec<Vec<(f64, f64)>> =
            self.series.iter().map(|s| s.points.iter().filter_map(|&p| self.transform(p)).collect()).collect();
        let all: Vec<&(f64, f64)> = pts.iter().flatten().collect();
        let bounds = |f: fn(&(f64, f64)) -> f64| {
            let lo = all.iter().map(|p| f(p)).fold(f64::INFINITY, f64::min);
            let hi = all.iter().map(|p| f(p)).fold(f64::NEG_INFINITY, f64::max);
            if !lo.is_finite() {
                (0.0, 1.0)
            } else if hi - lo <= 0.0 {
                (lo - 0.5, hi + 0.5)
            } else {
                (lo, hi)
            }
        };
        let (x0, x1) = bounds(|p| p.0);
        let (y0, y1) = bounds(|p| p.1);
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
        let axis = |v: f64, log: bool| if log { format!("1e{v:.2}") } else { format!("{v:.4}") };

        let mut svg = String::new();
        let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
        let _ = writeln!(svg, "<desc>config_hash={} seed={}</desc>", prov.config_hash, prov.seed);
        let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(svg, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(&self.title));
        let _ = writeln!(
            svg,
            r#"<path d="M{m} {t} L{m} {b} L{r} {b}" stroke="black" fill="none"/>"#,
            m = MARGIN,
            t = MARGIN,
            b = HEIGHT - MARGIN,
            r = WIDTH - MARGIN
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle" font-size="12">{}</text>"#, WIDTH / 2.0, HEIGHT - 15.0, escape(&self.x_label));
        let _ = writeln!(svg, r#"<text x="15" y="{}" font-size="12" transform="rotate(-90 15 {})" text-anchor="middle">{}</text>"#, HEIGHT / 2.0, HEIGHT / 2.0, escape(&self.y_label));
        for (v, anchor_x) in [(x0, MARGIN), (x1, WIDTH - MARGIN)] {
            let _ = writeln!(svg, r#"<text x="{anchor_x}" y="{}" text-anchor="middle" font-size="10">{}</text>"#, HEIGHT - MARGIN + 14.0, axis(v, self.log_x));
        }
        for (v, anchor_y) in [(y0, HEIGHT - MARGIN), (y1, MARGIN)] {
            let _ = writeln!(svg, r#"<text x="{}" y="{anchor_y}" text-anchor="end" font-size="10">{}</text>"#, MARGIN - 4.0, axis(v, self.log_y));
        }
        for (i, (series, p)) in self.series.iter().zip(&pts).enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let coords: Vec<String> = p.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            let _ = writeln!(svg, r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"><title>{}</title></polyline>"#, coords.join(" "), escape(&series.name));
            let _ = writeln!(svg, r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#, WIDTH - MARGIN - 116.0, MARGIN + 14.0 * i as f64, escape(&series.name));
        }
        svg.push_str("</svg>\n");
        svg
    }

    pub fn write_svg(&self, path: &Path, prov: &Provenance) -> Result<()> {
        fs::write(path, self.to_svg(prov)).with_context(|| format!("writing {}", path.display()))
    }
}

/// Shortest decimal representation that parses back to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}
