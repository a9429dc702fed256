// Exact Euclidean distance transform and its trilinear sampling.

use std::error::Error;

use voxplan::distance_field::compute_edt;
use voxplan::scene::{Cell, GridBounds, OccupancyGrid};
use voxplan::Vec3;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let bounds = GridBounds::new(Vec3::zeros(), 0.1)?;
    let mut grid = OccupancyGrid::empty([10; 3], bounds)?;
    grid.set(Cell::new(5, 5, 5), true);
    let field = compute_edt(&grid);

    // exact at voxel centers: sqrt of an integer number of voxels
    for c in [Cell::new(5, 5, 5), Cell::new(6, 5, 5), Cell::new(8, 9, 5), Cell::new(0, 0, 0)] {
        println!("{c:?}: {:.4} m ({} voxels²)", field.at(c), field.squared_voxels(c));
    }

    // between centers the field is trilinear and its gradient is exact
    let p = Vec3::new(0.83, 0.52, 0.55);
    let s = field.sample_full(&p);
    println!("sample at {p:?}: {:.4} m, gradient {:?}, clamped {}", s.value, s.gradient, s.clamped);

    let empty = compute_edt(&OccupancyGrid::empty([10; 3], bounds)?);
    println!("empty grid sentinel: {:.4} m (grid diagonal)", empty.sentinel());

    let dir = std::env::temp_dir().join("voxplan-edt-example");
    std::fs::create_dir_all(&dir)?;
    let (raw, header) = field.write_raw(dir.join("edt"))?;
    println!("wrote {} and {}", raw.display(), header.display());
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
