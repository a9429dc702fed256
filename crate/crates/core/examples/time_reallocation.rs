// Redistribute a fixed frame budget along the path: frames per stage by
// arc length, spacing within a stage by a velocity profile.

use std::error::Error;

use voxplan::grid_planner::{Stage, SubTrajectory, Trajectory};
use voxplan::time_alloc::{allocate_counts, index_time_resample, reallocate, speeds, VelocityProfile};
use voxplan::Vec3;

fn line(stage: Stage, a: Vec3, b: Vec3, n: usize) -> SubTrajectory {
    SubTrajectory {
        stage,
        points: (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect(),
    }
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let (p0, p1, p2) = (Vec3::new(0.0, 0.0, 0.5), Vec3::new(0.2, 0.0, 0.5), Vec3::new(0.8, 0.0, 0.5));
    let traj = Trajectory {
        subs: [
            line(Stage::Approach, p0, p1, 5),
            line(Stage::Manipulate, p1, p2, 40),
            line(Stage::BackIdle, p2, p0, 9),
        ],
    };
    println!("largest remainder over 51 frames: {:?}", allocate_counts([0.2, 0.6, 0.8], 51)?);

    let uniform_index = index_time_resample(&traj.concatenated(), 25);
    let fmt = |v: &[f64]| v.iter().map(|s| format!("{s:.3}")).collect::<Vec<_>>().join(" ");
    println!("index-time speeds: {}", fmt(&speeds(&uniform_index)));

    for profile in [VelocityProfile::Sine, VelocityProfile::Uniform] {
        let r = reallocate(&traj, 25, profile)?;
        println!("{} counts {:?}", profile.as_str(), r.counts);
        for s in Stage::ALL {
            let span = r.timed.stage_span(s).ok_or("missing stage")?;
            let pts: Vec<Vec3> = span.map(|k| r.timed.frames[k].position).collect();
            println!("  {:<11} {}", s.as_str(), fmt(&speeds(&pts)));
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
