//! Acceptance suite: every check at its full size with the default
//! configuration. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use offset_risk::checks::{run_check, VerifyConfig, CHECK_IDS};

const SEED: u64 = 20_240_601;

fn main() -> ExitCode {
    let cfg = VerifyConfig::default();
    let mut failed = 0;
    for (i, id) in CHECK_IDS.iter().enumerate() {
        let start = Instant::now();
        match run_check(id, &cfg, SEED) {
            Ok(c) => {
                if !c.passed {
                    failed += 1;
                }
                println!(
                    "criterion {:>2} [{}] {id} ({:.1}s): {}",
                    i + 1,
                    if c.passed { "PASS" } else { "FAIL" },
                    start.elapsed().as_secs_f64(),
                    c.detail
                );
            }
            Err(e) => {
                failed += 1;
                println!("criterion {:>2} [FAIL] {id}: error: {e:#}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", CHECK_IDS.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
