// The built-in oracle comparisons, as run by `voxplan check`.

use std::error::Error;

use voxplan::check::{check_circle_curvature, check_gradients, run_checks, CheckOptions, LossKind};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (ok, detail) = check_circle_curvature();
    println!("curvature identity: {ok} ({detail})");

    // a corrupted gradient is caught and named
    let (ok, detail) = check_gradients(0, Some(LossKind::Acc));
    println!("with injected fault: {ok} ({detail})");

    let report = run_checks(&CheckOptions::default());
    for r in &report.results {
        println!("{r}");
    }
    println!("all passed: {}", report.passed());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
