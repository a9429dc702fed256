// A* over the voxel lattice for the approach, manipulate and back-idle
// stages of the sink scene.

use std::error::Error;

use voxplan::grid_planner::{plan_segment, plan_three_stage, Keypoints};
use voxplan::scenario;
use voxplan::scene::Cell;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let sc = scenario::sink();
    let grid = sc.build_grid(std::path::Path::new("."))?;
    println!("grid {:?}, {} occupied voxels", grid.dims(), grid.occupied_count());

    let keypoints = Keypoints::from_spec(&sc.scene.spec);
    let (traj, info) = plan_three_stage(&grid, &keypoints, sc.planner.clearance_voxels)?;
    for (sub, i) in traj.subs.iter().zip(&info) {
        let top = sub.points.iter().map(|p| p.z).fold(f64::MIN, f64::max);
        println!(
            "{:<11} {:>3} waypoints, {:.3} m, highest z {top:.3}",
            sub.stage.as_str(),
            sub.points.len(),
            i.cost_m
        );
    }
    traj.validate()?;

    // a single segment, with and without obstacle dilation
    let (a, b) = (Cell::new(10, 32, 12), Cell::new(50, 32, 12));
    for clearance in [0, 2] {
        let path = plan_segment(&grid, a, b, clearance)?;
        println!("segment, clearance {clearance}: {} cells, {:.3} m", path.cells.len(), path.cost);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
