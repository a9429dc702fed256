// Scenario templates and their TOML form.

use std::error::Error;

use voxplan::scenario::Scenario;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sink = Scenario::template("sink", 0)?;
    let text = sink.to_toml_string()?;
    println!("{}", text.lines().take(12).collect::<Vec<_>>().join("\n"));
    assert_eq!(Scenario::from_toml_str(&text)?, sink);

    for seed in 0..3 {
        let r = Scenario::template("random", seed)?;
        r.validate()?;
        let grid = r.build_grid(std::path::Path::new("."))?;
        println!(
            "random seed {seed}: {} primitives, {} occupied voxels",
            r.scene.spec.primitives.len(),
            grid.occupied_count()
        );
    }

    let mut bad = Scenario::template("empty", 0)?;
    bad.planner.learning_rate = -1.0;
    println!("negative learning rate: {}", bad.validate().unwrap_err());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
