// Bin a point cloud into an occupancy grid, then compare with the same
// scene rasterized from primitives.

use std::error::Error;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voxplan::scene::{parse_point_cloud, synth_scene, voxelize, GridBounds, PointCloud, Primitive, SceneSpec, Shape};
use voxplan::Vec3;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    // points scattered over the surface of a box
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (lo, hi) = (Vec3::new(0.3, 0.3, 0.0), Vec3::new(0.7, 0.6, 0.25));
    let mut points = Vec::new();
    for _ in 0..20_000 {
        let mut p = Vec3::from_fn(|a, _| rng.gen_range(lo[a]..hi[a]));
        let face = rng.gen_range(0..6);
        p[face / 2] = if face % 2 == 0 { lo[face / 2] } else { hi[face / 2] };
        points.push(p);
    }
    points.push(Vec3::new(5.0, 5.0, 5.0)); // stray point outside the grid
    let cloud = PointCloud::new(points);

    let dims = [64; 3];
    let bounds = GridBounds::new(Vec3::zeros(), 1.0 / 64.0)?;
    let (grid, summary) = voxelize(&cloud, dims, bounds)?;
    println!(
        "cloud: {} points, {} inside, {} outside; {} occupied voxels",
        cloud.len(),
        summary.inside,
        summary.outside,
        grid.occupied_count()
    );

    // the same box as a primitive fills its interior too
    let spec = SceneSpec {
        primitives: vec![Primitive {
            name: "crate".into(),
            shape: Shape::Box {
                center: (lo + hi) / 2.0,
                size: hi - lo,
            },
        }],
        effector_start: Vec3::new(0.1, 0.1, 0.8),
        object: Vec3::new(0.1, 0.9, 0.1),
        target: Vec3::new(0.9, 0.9, 0.1),
        grasp_offset: None,
        object_extent: Vec3::repeat(0.05),
    };
    let solid = synth_scene(&spec, dims, bounds)?;
    println!("primitive box: {} occupied voxels", solid.occupied_count());

    // text input: xyz lines, comments allowed
    let small = parse_point_cloud("# two points\n0.1 0.1 0.1\n0.9 0.9 0.9\n", "inline")?;
    println!("parsed {} points, aabb {:?}", small.len(), small.aabb());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
