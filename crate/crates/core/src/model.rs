//! Finite-support data model: distributions over atoms, samples of atom ids,
//! finite dictionaries evaluated on the support, predictor weights and losses.
//!
//! Every function of the input is stored as its table of values over the
//! support atoms, so population expectations are exact finite sums and the
//! empirical code path reads the same tables through sampled atom ids.

use std::fmt;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Tolerance on the total mass of a probability vector.
pub const PROB_SUM_TOL: f64 = 1e-12;

/// One support point of the joint law of `(X, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub y: f64,
}

/// Finite-support joint law of `(X, Y)` with `|Y| <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteDistribution {
    atoms: Vec<Atom>,
    probs: Vec<f64>,
    b: f64,
}

fn validate_probs(probs: &[f64]) -> Result<()> {
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution(
            "probabilities must be finite and nonnegative".into(),
        ));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > PROB_SUM_TOL {
        return Err(Error::InvalidDistribution(format!(
            "probabilities sum to {total}, not 1"
        )));
    }
    Ok(())
}

impl DiscreteDistribution {
    pub fn new(atoms: Vec<Atom>, probs: Vec<f64>, b: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::InvalidDistribution("support is empty".into()));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidDistribution(format!("bound b = {b} must be positive")));
        }
        if probs.len() != atoms.len() {
            return Err(Error::DimensionMismatch { expected: atoms.len(), got: probs.len() });
        }
        validate_probs(&probs)?;
        let dim = atoms[0].x.len();
        for (a, atom) in atoms.iter().enumerate() {
            if atom.x.len() != dim {
                return Err(Error::InvalidDistribution(format!(
                    "atom {a} has feature dimension {}, expected {dim}",
                    atom.x.len()
                )));
            }
            if !atom.y.is_finite() || atom.y.abs() > b {
                return Err(Error::InvalidDistribution(format!(
                    "atom {a} has |y| = {} > b = {b}",
                    atom.y.abs()
                )));
            }
        }
        Ok(Self { atoms, probs, b })
    }

    /// Builds a distribution from responses only; every atom gets the
    /// one-dimensional feature equal to its id.
    pub fn from_responses(ys: &[f64], probs: Vec<f64>, b: f64) -> Result<Self> {
        let atoms = ys
            .iter()
            .enumerate()
            .map(|(a, &y)| Atom { x: vec![a as f64], y })
            .collect();
        Self::new(atoms, probs, b)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, id: usize) -> &Atom {
        &self.atoms[id]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn support_size(&self) -> usize {
        self.atoms.len()
    }

    pub fn feature_dim(&self) -> usize {
        self.atoms[0].x.len()
    }

    pub fn responses(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.y).collect()
    }

    /// Exact expectation of an atom-indexed function.
    pub fn expect(&self, h: &[f64]) -> Result<f64> {
        check_len(self.support_size(), h.len())?;
        Ok(self.probs.iter().zip(h).map(|(p, v)| p * v).sum())
    }

    /// The empirical measure `P_n` of `sample`, as a distribution over the
    /// same atoms (unsampled atoms get mass zero).
    pub fn empirical(&self, sample: &Sample) -> Result<Self> {
        sample.check_against(self)?;
        let mut counts = vec![0usize; self.support_size()];
        for &i in sample.indices() {
            counts[i] += 1;
        }
        let n = sample.n() as f64;
        let probs = counts.into_iter().map(|c| c as f64 / n).collect();
        Ok(Self { atoms: self.atoms.clone(), probs, b: self.b })
    }

    pub fn sampler(&self) -> AtomSampler {
        AtomSampler::new(&self.probs).expect("validated probabilities")
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Draws atom ids i.i.d. from a probability vector.
#[derive(Debug, Clone)]
pub struct AtomSampler {
    index: WeightedIndex<f64>,
}

impl AtomSampler {
    pub fn new(probs: &[f64]) -> Result<Self> {
        validate_probs(probs)?;
        let index = WeightedIndex::new(probs)
            .map_err(|e| Error::InvalidDistribution(e.to_string()))?;
        Ok(Self { index })
    }

    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<usize> {
        (0..n).map(|_| self.index.sample(rng)).collect()
    }

    pub fn draw_one<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        self.index.sample(rng)
    }
}

/// An i.i.d. sample, stored as atom ids of its owning distribution.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    indices: Vec<usize>,
}

impl Sample {
    pub fn new(indices: Vec<usize>, dist: &DiscreteDistribution) -> Result<Self> {
        let s = Self { indices };
        s.check_against(dist)?;
        Ok(s)
    }

    /// Wraps ids without a distribution at hand; only emptiness is checked.
    pub fn from_indices(indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptySample);
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn n(&self) -> usize {
        self.indices.len()
    }

    pub(crate) fn check_support(&self, support: usize) -> Result<()> {
        if self.indices.is_empty() {
            return Err(Error::EmptySample);
        }
        match self.indices.iter().find(|&&i| i >= support) {
            Some(&index) => Err(Error::IndexOutOfRange { index, len: support }),
            None => Ok(()),
        }
    }

    pub fn check_against(&self, dist: &DiscreteDistribution) -> Result<()> {
        self.check_support(dist.support_size())
    }
}

/// Draws `n` atom ids i.i.d. from `dist`; a pure function of its arguments.
pub fn draw_sample(dist: &DiscreteDistribution, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sampler = AtomSampler::new(dist.probs())?;
    let mut rng = rng::stream(seed, "sample", 0);
    Ok(Sample { indices: sampler.draw(n, &mut rng) })
}

/// A finite reference class stored as an `m x s` table, row `j` holding
/// `g_j` evaluated at every support atom.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    values: Vec<Vec<f64>>,
    b: f64,
}

impl Dictionary {
    pub fn new(values: Vec<Vec<f64>>, b: f64) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidDictionary("dictionary has no functions".into()));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidDictionary(format!("bound b = {b} must be positive")));
        }
        let s = values[0].len();
        if s == 0 {
            return Err(Error::InvalidDictionary("rows are empty".into()));
        }
        for (j, row) in values.iter().enumerate() {
            if row.len() != s {
                return Err(Error::DimensionMismatch { expected: s, got: row.len() });
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite() || v.abs() > b) {
                return Err(Error::InvalidDictionary(format!(
                    "row {j} has value {v} outside [-{b}, {b}]"
                )));
            }
        }
        Ok(Self { values, b })
    }

    /// Checks that the table has one column per atom of `dist`.
    pub fn check_support(&self, dist: &DiscreteDistribution) -> Result<()> {
        check_len(dist.support_size(), self.support_size())
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn support_size(&self) -> usize {
        self.values[0].len()
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.values
    }

    /// Value table of `f_w = sum_j w_j g_j` over the support (no clipping).
    pub fn evaluate(&self, w: &PredictorWeights) -> Result<Vec<f64>> {
        check_len(self.m(), w.weights().len())?;
        let mut out = vec![0.0; self.support_size()];
        for (row, &wj) in self.values.iter().zip(w.weights()) {
            if wj != 0.0 {
                for (o, v) in out.iter_mut().zip(row) {
                    *o += wj * v;
                }
            }
        }
        Ok(out)
    }
}

/// Coefficients of a predictor over a dictionary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorWeights {
    weights: Vec<f64>,
    sparsity: usize,
}

impl PredictorWeights {
    pub fn new(weights: Vec<f64>) -> Self {
        let sparsity = weights.iter().filter(|w| **w != 0.0).count();
        Self { weights, sparsity }
    }

    pub fn zeros(m: usize) -> Self {
        Self::new(vec![0.0; m])
    }

    pub fn unit(m: usize, j: usize) -> Self {
        let mut w = vec![0.0; m];
        w[j] = 1.0;
        Self::new(w)
    }

    /// `a * e_i + c * e_j`; coincident indices are merged.
    pub fn pair(m: usize, i: usize, a: f64, j: usize, c: f64) -> Self {
        let mut w = vec![0.0; m];
        w[i] += a;
        w[j] += c;
        Self::new(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Number of nonzero coefficients.
    pub fn sparsity(&self) -> usize {
        self.sparsity
    }
}

/// `f_w(x_a) = sum_j w_j g_j(x_a)`.
pub fn predict(dict: &Dictionary, w: &PredictorWeights, atom_id: usize) -> Result<f64> {
    check_len(dict.m(), w.weights().len())?;
    if atom_id >= dict.support_size() {
        return Err(Error::IndexOutOfRange { index: atom_id, len: dict.support_size() });
    }
    Ok(dict
        .values
        .iter()
        .zip(w.weights())
        .map(|(row, wj)| wj * row[atom_id])
        .sum())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Squared,
    Custom,
}

type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A loss `l(yhat, y)` together with its Lipschitz constant `C_b` and
/// strong-convexity modulus in the first argument on `[-b, b]`.
#[derive(Clone)]
pub struct LossSpec {
    kind: LossKind,
    eval: ScalarFn,
    grad: ScalarFn,
    lipschitz: f64,
    strong_convexity: f64,
}

impl fmt::Debug for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LossSpec")
            .field("kind", &self.kind)
            .field("lipschitz", &self.lipschitz)
            .field("strong_convexity", &self.strong_convexity)
            .finish()
    }
}

impl LossSpec {
    /// `(yhat - y)^2` on `[-b, b]`: `C_b = 4b`, modulus 2.
    pub fn squared(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("bound b = {b} must be positive")));
        }
        Ok(Self {
            kind: LossKind::Squared,
            eval: Arc::new(|yhat, y| (yhat - y) * (yhat - y)),
            grad: Arc::new(|yhat, y| 2.0 * (yhat - y)),
            lipschitz: 4.0 * b,
            strong_convexity: 2.0,
        })
    }

    /// `log cosh(yhat - y)`: Lipschitz `tanh(2b)`, modulus `sech^2(2b)`.
    pub fn log_cosh(b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidParameter(format!("bound b = {b} must be positive")));
        }
        let t = (2.0 * b).tanh();
        Self::custom(
            b,
            |yhat, y| {
                // log cosh u = |u| + log1p(e^{-2|u|}) - ln 2, stable for large |u|
                let u = (yhat - y).abs();
                u + (-2.0 * u).exp().ln_1p() - std::f64::consts::LN_2
            },
            |yhat, y| (yhat - y).tanh(),
            t,
            1.0 - t * t,
        )
    }

    /// A user-supplied convex loss. Requires `strong_convexity * b <= lipschitz`.
    pub fn custom<E, G>(b: f64, eval: E, grad: G, lipschitz: f64, strong_convexity: f64) -> Result<Self>
    where
        E: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        if !(lipschitz > 0.0 && strong_convexity > 0.0) {
            return Err(Error::InvalidParameter(
                "Lipschitz constant and strong-convexity modulus must be positive".into(),
            ));
        }
        if strong_convexity * b > lipschitz * (1.0 + 1e-12) {
            return Err(Error::InvalidParameter(format!(
                "strong convexity {strong_convexity} times b = {b} exceeds Lipschitz constant {lipschitz}"
            )));
        }
        Ok(Self {
            kind: LossKind::Custom,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            lipschitz,
            strong_convexity,
        })
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn value(&self, yhat: f64, y: f64) -> f64 {
        (self.eval)(yhat, y)
    }

    /// Derivative in `yhat`.
    pub fn grad(&self, yhat: f64, y: f64) -> f64 {
        (self.grad)(yhat, y)
    }

    /// `C_b`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    /// `C_b' = C_b + gamma * b`.
    pub fn shifted_lipschitz(&self, gamma: f64, b: f64) -> f64 {
        self.lipschitz + gamma * b
    }
}

pub fn loss_value(spec: &LossSpec, yhat: f64, y: f64) -> f64 {
    spec.value(yhat, y)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct InstanceDoc {
    atoms: Vec<Atom>,
    probs: Vec<f64>,
    b: f64,
    dictionary: Vec<Vec<f64>>,
}

/// A distribution together with a dictionary evaluated on its support.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub dist: DiscreteDistribution,
    pub dict: Dictionary,
}

impl Instance {
    pub fn new(dist: DiscreteDistribution, dict: Dictionary) -> Result<Self> {
        dict.check_support(&dist)?;
        Ok(Self { dist, dict })
    }

    /// Parses `{"atoms": [{"x": [...], "y": ...}], "probs": [...], "b": ..., "dictionary": [[...]]}`.
    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_value(serde_json::from_str(text)?)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        let doc: InstanceDoc = serde_json::from_value(value)?;
        let dist = DiscreteDistribution::new(doc.atoms, doc.probs, doc.b)?;
        let dict = Dictionary::new(doc.dictionary, doc.b)?;
        Self::new(dist, dict)
    }

    pub fn to_value(&self) -> serde_json::Value {
        let doc = InstanceDoc {
            atoms: self.dist.atoms.clone(),
            probs: self.dist.probs.clone(),
            b: self.dist.b,
            dictionary: self.dict.values.clone(),
        };
        serde_json::to_value(doc).expect("instance serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("instance serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_atoms() -> DiscreteDistribution {
        DiscreteDistribution::from_responses(&[-1.0, 1.0], vec![0.5, 0.5], 1.0).unwrap()
    }

    #[test]
    fn rejects_unnormalized_probs() {
        let err = DiscreteDistribution::from_responses(&[0.0, 0.0], vec![0.5, 0.6], 1.0);
        assert!(matches!(err, Err(Error::InvalidDistribution(_))));
        assert!(AtomSampler::new(&[0.3, 0.3]).is_err());
    }

    #[test]
    fn rejects_out_of_range_response() {
        assert!(DiscreteDistribution::from_responses(&[1.5], vec![1.0], 1.0).is_err());
    }

    #[test]
    fn single_atom_sample_is_constant() {
        let d = DiscreteDistribution::from_responses(&[0.3], vec![1.0], 1.0).unwrap();
        assert_eq!(draw_sample(&d, 5, 9).unwrap().indices(), &[0, 0, 0, 0, 0]);
    }

    #[test]
    fn two_atom_frequency_within_four_sigma() {
        let s = draw_sample(&two_atoms(), 10_000, 1).unwrap();
        let zeros = s.indices().iter().filter(|&&i| i == 0).count() as f64 / 1e4;
        // 4 * sqrt(0.25 / 1e4) = 0.02
        assert!((zeros - 0.5).abs() <= 0.02, "frequency {zeros}");
    }

    #[test]
    fn sampling_is_deterministic() {
        let d = two_atoms();
        assert_eq!(draw_sample(&d, 257, 3).unwrap(), draw_sample(&d, 257, 3).unwrap());
        assert_ne!(draw_sample(&d, 257, 3).unwrap(), draw_sample(&d, 257, 4).unwrap());
        assert!(matches!(draw_sample(&d, 0, 3), Err(Error::EmptySample)));
    }

    #[test]
    fn predict_cases() {
        let dict = Dictionary::new(vec![vec![1.0, 0.2], vec![-1.0, 0.4]], 1.0).unwrap();
        assert_eq!(predict(&dict, &PredictorWeights::unit(2, 1), 1).unwrap(), 0.4);
        assert_eq!(predict(&dict, &PredictorWeights::zeros(2), 0).unwrap(), 0.0);
        let mid = PredictorWeights::new(vec![0.5, 0.5]);
        assert_eq!(predict(&dict, &mid, 0).unwrap(), 0.0);
        assert!(matches!(
            predict(&dict, &PredictorWeights::zeros(3), 0),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(dict.evaluate(&mid).unwrap(), vec![0.0, 0.5 * 0.2 + 0.5 * 0.4]);
    }

    #[test]
    fn pair_weights_track_sparsity() {
        assert_eq!(PredictorWeights::pair(4, 1, 0.5, 3, 0.5).sparsity(), 2);
        let merged = PredictorWeights::pair(4, 2, 0.5, 2, 0.5);
        assert_eq!(merged.sparsity(), 1);
        assert_eq!(merged.weights()[2], 1.0);
        assert_eq!(PredictorWeights::pair(4, 1, 1.0, 3, 0.0).sparsity(), 1);
    }

    #[test]
    fn squared_loss_values_and_constants() {
        let l = LossSpec::squared(1.0).unwrap();
        assert_eq!(loss_value(&l, 1.0, 0.5), 0.25);
        assert_eq!(loss_value(&l, 0.3, 0.3), 0.0);
        assert_eq!(l.lipschitz(), 4.0);
        assert_eq!(l.strong_convexity(), 2.0);
        assert!(l.strong_convexity() * 1.0 <= l.lipschitz());
        for k in 0..=200 {
            let y = -1.0 + k as f64 / 100.0;
            let diff = (l.value(0.9, y) - l.value(0.1, y)).abs();
            assert!(diff <= 4.0 * 0.8 + 1e-15);
        }
    }

    #[test]
    fn custom_loss_consistency_is_enforced() {
        assert!(LossSpec::custom(1.0, |a, b| (a - b).abs(), |_, _| 1.0, 1.0, 2.0).is_err());
        let lc = LossSpec::log_cosh(1.0).unwrap();
        assert_eq!(lc.kind(), LossKind::Custom);
        assert!((lc.value(0.7, -0.2) - (0.9f64).cosh().ln()).abs() < 1e-14);
        assert!(lc.value(50.0, -50.0).is_finite());
    }

    #[test]
    fn instance_json_round_trip() {
        let text = r#"{"probs":[0.25,0.75],"b":1.0,
            "atoms":[{"y":0.5,"x":[0.0,1.0]},{"x":[1.0,0.0],"y":-0.5}],
            "dictionary":[[0.1,0.2],[0.3,-0.4]]}"#;
        let inst = Instance::from_json(text).unwrap();
        assert_eq!(inst.dist.feature_dim(), 2);
        assert_eq!(inst.dict.m(), 2);
        let again = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, again);
        let bad = r#"{"probs":[1.0],"b":1.0,"atoms":[{"y":0.5,"x":[0.0]}],"dictionary":[[0.1,0.2]]}"#;
        assert!(Instance::from_json(bad).is_err());
    }
}
