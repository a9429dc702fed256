// Per-frame guidance masks: the object and gripper as projected spheres,
// with the gripper label switching at grasp and release.

use std::error::Error;

use voxplan::pipeline;
use voxplan::projection::{project_sphere, read_masks, write_masks, CameraModel, Projection, GRIPPER_CLOSED};
use voxplan::scenario;
use voxplan::Vec3;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let cam = CameraModel::look_at(
        [300.0, 300.0, 159.5, 119.5],
        (320, 240),
        Vec3::new(0.5, -0.7, 0.9),
        Vec3::new(0.5, 0.5, 0.3),
        Vec3::z(),
    )?;
    match project_sphere(&cam, &Vec3::new(0.5, 0.5, 0.3), 0.05) {
        Projection::Circle { u, v, r_px } => println!("sphere at the look-at point: ({u:.1}, {v:.1}) r {r_px:.2} px"),
        other => println!("not drawn: {other:?}"),
    }

    let b = pipeline::run(&scenario::sink())?;
    let closed: Vec<usize> = b
        .masks
        .iter()
        .enumerate()
        .filter(|(_, m)| m.pixels.contains(&GRIPPER_CLOSED))
        .map(|(k, _)| k)
        .collect();
    println!(
        "{} masks, gripper closed on frames {}..={}",
        b.masks.len(),
        closed.first().ok_or("never closed")?,
        closed.last().ok_or("never closed")?
    );

    let dir = std::env::temp_dir().join("voxplan-masks-example");
    let manifest = write_masks(&dir, &b.masks, &b.camera, &b.object, &b.gripper)?;
    let (_, back) = read_masks(&dir)?;
    assert_eq!(back, b.masks);
    println!("wrote {} PGM files to {}", manifest.files.len(), dir.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
