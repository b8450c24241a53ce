//! Run the full property suite and print one line per check.

use dprm_lab::verify::{run_all, VerifyOptions};

fn main() {
    let report = run_all(&VerifyOptions::default());
    for check in &report.checks {
        println!(
            "{} {:<32} residual {:.3e}  {}",
            if check.passed() { "PASS" } else { "FAIL" },
            check.check,
            check.residual,
            check.detail
        );
    }
    println!("\n{} passed, {} failed", report.passed, report.failed);
    std::process::exit(if report.all_passed() { 0 } else { 1 });
}
