//! The full oracle suite with default settings.

use smoothgnn::verify::{run_verify, VerifyOptions};

fn main() -> smoothgnn::Result<()> {
    let report = run_verify(&VerifyOptions::default())?;
    for c in &report.checks {
        println!(
            "{:<32} {} max error {:.2e}",
            c.name,
            if c.passed { "ok  " } else { "FAIL" },
            c.max_error
        );
    }
    println!(
        "{:.2}s, all passed: {}",
        report.elapsed_secs,
        report.all_passed()
    );
    Ok(())
}
