// Gradient-based smoothing of the A* path with a collision hinge. The
// carry path over the sink rim starts too close and ends up lifted.

use std::error::Error;

use voxplan::distance_field::compute_edt;
use voxplan::grid_planner::{plan_three_stage, Keypoints, Stage};
use voxplan::optimizer::optimize_trajectory;
use voxplan::scenario;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sc = scenario::sink();
    let grid = sc.build_grid(std::path::Path::new("."))?;
    let field = compute_edt(&grid);
    let (initial, _) = plan_three_stage(&grid, &Keypoints::from_spec(&sc.scene.spec), sc.planner.clearance_voxels)?;
    let (opt, report) = optimize_trajectory(&initial, &field, &sc.planner)?;

    println!("d_safe {:.4} m", sc.planner.d_safe_m);
    for s in &report.stages {
        let before = &initial.sub(s.stage).points;
        let after = &opt.sub(s.stage).points;
        let clear = |pts: &[voxplan::Vec3]| {
            pts[1..pts.len() - 1].iter().map(|p| field.sample(p)).fold(f64::INFINITY, f64::min)
        };
        println!(
            "{:<11} loss {:>8.3} -> {:>8.3} (best at iter {}), min clearance {:.4} -> {:.4} m",
            s.stage.as_str(),
            s.before.total,
            s.after.total,
            s.best_iteration,
            clear(before),
            clear(after)
        );
    }
    let top = |t: &voxplan::grid_planner::Trajectory| {
        t.sub(Stage::Manipulate).points.iter().map(|p| p.z).fold(f64::MIN, f64::max)
    };
    println!("carry path peak z {:.4} -> {:.4} m", top(&initial), top(&opt));

    // heavier smoothing, lighter collision weight
    let mut soft = sc.planner.clone();
    soft.w_col = 1.0;
    soft.w_acc = 5.0;
    let (_, r) = optimize_trajectory(&initial, &field, &soft)?;
    println!("w_col 1, w_acc 5: total {:.3} -> {:.3}", r.before.total, r.after.total);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
