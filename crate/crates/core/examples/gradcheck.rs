//! Checks analytic gradients of both models against central differences.
//!
//! ```text
//! cargo run --example gradcheck
//! ```

use hsgd::gradcheck::{run_suite, DEFAULT_STEP, DEFAULT_TOLERANCE};

fn main() -> hsgd::Result<()> {
    let report = run_suite(100, 0, DEFAULT_STEP, DEFAULT_TOLERANCE)?;
    for (i, inst) in report.instances.iter().enumerate().take(8) {
        println!(
            "{i:>3} {:<19} d={} h={:<2} c={} rows={} max_rel_err={:.2e} excluded={}",
            inst.spec.kind.to_string(),
            inst.spec.input_dim,
            inst.spec.hidden_dim,
            inst.spec.num_classes,
            inst.batch_size,
            inst.max_rel_err,
            inst.excluded
        );
    }
    println!("...");
    println!(
        "{} instances, {} coordinates checked, {} excluded near a ReLU kink",
        report.instances.len(),
        report.checked(),
        report.excluded()
    );
    println!("max relative error {:.3e} (tolerance {:.0e}): {}", report.max_rel_err(), report.tolerance, if report.passed() { "ok" } else { "FAILED" });
    Ok(())
}
