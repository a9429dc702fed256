// Scenario in, bundle out: plan, optimize, retime, render, write, reload
// and tabulate.

use std::error::Error;

use voxplan::pipeline::{load_bundle, run};
use voxplan::report::Report;
use voxplan::scenario;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let bundle = run(&scenario::sink())?;
    let dir = std::env::temp_dir().join("voxplan-bundle-example");
    let manifest = bundle.write(&dir)?;
    println!("bundle with {} files at {}", manifest.files.len(), dir.display());

    let loaded = load_bundle(&dir)?;
    let report = Report::from_bundle(&loaded);
    print!("{}", report.to_text().lines().take(14).collect::<Vec<_>>().join("\n"));
    println!();
    println!("grasp at frame {}, release at frame {}", bundle.grasp_frame, bundle.release_frame);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
