//! Running the randomized identity checks from library code.

use polyfm::verify::{run_all, VerifyOptions};

fn main() {
    let results = run_all(&VerifyOptions { trials: 100, ..VerifyOptions::default() });
    for r in &results {
        println!("{} {:<50} {} checks", if r.passed { "ok  " } else { "FAIL" }, r.name, r.checks);
    }
    assert!(results.iter().all(|r| r.passed));
}
