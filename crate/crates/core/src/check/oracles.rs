//! Slow, obviously-correct reference computations. Nothing here calls into
//! the production code paths it is used to verify.

use std::collections::BinaryHeap;
use std::cmp::Reverse;

use crate::projection::CameraModel;
use crate::scene::{Cell, GridBounds, OccupancyGrid};
use crate::Vec3;

/// Squared center-to-center voxel distance to the nearest occupied voxel,
/// by exhaustive search. `None` when the grid has no occupied voxel.
pub fn brute_force_squared_edt(grid: &OccupancyGrid) -> Vec<Option<u32>> {
    let occupied: Vec<Cell> = grid.cells().filter(|&c| grid.is_occupied(c)).collect();
    grid.cells()
        .map(|c| {
            occupied
                .iter()
                .map(|o| {
                    let dx = c.x as i64 - o.x as i64;
                    let dy = c.y as i64 - o.y as i64;
                    let dz = c.z as i64 - o.z as i64;
                    (dx * dx + dy * dy + dz * dz) as u32
                })
                .min()
        })
        .collect()
}

/// Trilinear interpolation written as an explicit weighted sum over the 8
/// lattice corners, with per-axis clamping to the center lattice.
pub fn trilinear(values: &[f64], dims: [usize; 3], bounds: &GridBounds, p: &Vec3) -> f64 {
    let mut lo = [0usize; 3];
    let mut hi = [0usize; 3];
    let mut w = [0.0; 3];
    for a in 0..3 {
        let g = ((p[a] - bounds.min_corner[a]) / bounds.voxel_size - 0.5)
            .clamp(0.0, (dims[a] - 1) as f64);
        lo[a] = g.floor() as usize;
        hi[a] = (lo[a] + 1).min(dims[a] - 1);
        w[a] = g - lo[a] as f64;
    }
    let mut acc = 0.0;
    for corner in 0..8 {
        let mut weight = 1.0;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            if corner >> a & 1 == 1 {
                idx[a] = hi[a];
                weight *= w[a];
            } else {
                idx[a] = lo[a];
                weight *= 1.0 - w[a];
            }
        }
        acc += weight * values[idx[0] + dims[0] * (idx[1] + dims[1] * idx[2])];
    }
    acc
}

/// Central finite-difference gradient of a scalar field.
pub fn central_difference(f: impl Fn(&Vec3) -> f64, p: &Vec3, h: f64) -> Vec3 {
    Vec3::from_fn(|a, _| {
        let mut plus = *p;
        let mut minus = *p;
        plus[a] += h;
        minus[a] -= h;
        (f(&plus) - f(&minus)) / (2.0 * h)
    })
}

/// Central finite-difference gradient of a function of a waypoint sequence.
pub fn waypoint_gradient(f: impl Fn(&[Vec3]) -> f64, points: &[Vec3], h: f64) -> Vec<Vec3> {
    let mut work = points.to_vec();
    (0..points.len())
        .map(|i| {
            Vec3::from_fn(|a, _| {
                let orig = work[i][a];
                work[i][a] = orig + h;
                let fp = f(&work);
                work[i][a] = orig - h;
                let fm = f(&work);
                work[i][a] = orig;
                (fp - fm) / (2.0 * h)
            })
        })
        .collect()
}

/// Largest componentwise relative error between two gradient sequences,
/// normalized by the largest gradient magnitude (floored at `floor`).
pub fn max_relative_error(analytic: &[Vec3], numeric: &[Vec3], floor: f64) -> f64 {
    let scale = numeric
        .iter()
        .chain(analytic)
        .map(|g| g.amax())
        .fold(floor, f64::max);
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).amax() / scale)
        .fold(0.0, f64::max)
}

/// Dijkstra over the 26-connected free voxels with Euclidean step costs in
/// voxel units. Returns the path cost in voxels.
pub fn dijkstra_cost(free: &dyn Fn(Cell) -> bool, dims: [usize; 3], start: Cell, goal: Cell) -> Option<f64> {
    if !free(start) || !free(goal) {
        return None;
    }
    let n = dims[0] * dims[1] * dims[2];
    let idx = |c: Cell| c.x + dims[0] * (c.y + dims[1] * c.z);
    let mut dist = vec![f64::INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[idx(start)] = 0.0;
    // Costs are ordered through their bit patterns, valid for non-negative floats.
    heap.push(Reverse((0u64, start.x, start.y, start.z)));
    while let Some(Reverse((bits, x, y, z))) = heap.pop() {
        let d = f64::from_bits(bits);
        let c = Cell::new(x, y, z);
        if d > dist[idx(c)] {
            continue;
        }
        if c == goal {
            return Some(d);
        }
        for dx in -1i64..=1 {
            for dy in -1i64..=1 {
                for dz in -1i64..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let (nx, ny, nz) = (x as i64 + dx, y as i64 + dy, z as i64 + dz);
                    if nx < 0 || ny < 0 || nz < 0 {
                        continue;
                    }
                    let nc = Cell::new(nx as usize, ny as usize, nz as usize);
                    if nc.x >= dims[0] || nc.y >= dims[1] || nc.z >= dims[2] || !free(nc) {
                        continue;
                    }
                    let step = ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    let nd = d + step;
                    if nd < dist[idx(nc)] {
                        dist[idx(nc)] = nd;
                        heap.push(Reverse((nd.to_bits(), nc.x, nc.y, nc.z)));
                    }
                }
            }
        }
    }
    None
}

/// Per-pixel ray casting: a pixel is covered iff the ray through its center
/// (integer pixel coordinates) hits the sphere in front of the camera.
pub fn ray_sphere_mask(cam: &CameraModel, center_world: &Vec3, radius: f64) -> Vec<bool> {
    let c = cam.to_camera(center_world);
    let mut mask = vec![false; cam.width * cam.height];
    for j in 0..cam.height {
        for i in 0..cam.width {
            let d = Vec3::new((i as f64 - cam.cx) / cam.fx, (j as f64 - cam.cy) / cam.fy, 1.0);
            let t = d.dot(&c) / d.norm_squared();
            if t <= 0.0 {
                continue;
            }
            let closest = d * t;
            if (closest - c).norm_squared() <= radius * radius {
                mask[j * cam.width + i] = true;
            }
        }
    }
    mask
}

/// Pixels whose centers fall inside a 2D circle.
pub fn circle_mask(width: usize, height: usize, u: f64, v: f64, r: f64) -> Vec<bool> {
    let mut mask = vec![false; width * height];
    for j in 0..height {
        for i in 0..width {
            let (du, dv) = (i as f64 - u, j as f64 - v);
            mask[j * width + i] = du * du + dv * dv <= r * r;
        }
    }
    mask
}

pub fn iou(a: &[bool], b: &[bool]) -> f64 {
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Pinhole projection written out coordinate by coordinate. `None` when
/// the sphere is not entirely in front of the camera.
pub fn project_circle(cam: &CameraModel, center_world: &Vec3, radius: f64) -> Option<(f64, f64, f64)> {
    let r = &cam.rotation;
    let mut c = [0.0; 3];
    for (i, ci) in c.iter_mut().enumerate() {
        *ci = r[(i, 0)] * center_world.x + r[(i, 1)] * center_world.y + r[(i, 2)] * center_world.z + cam.translation[i];
    }
    if c[2] <= radius {
        return None;
    }
    Some((cam.fx * c[0] / c[2] + cam.cx, cam.fy * c[1] / c[2] + cam.cy, cam.fx * radius / c[2]))
}

/// Label image of an object sphere overlaid by a gripper sphere, decided
/// independently for every pixel.
pub fn two_actor_mask(
    cam: &CameraModel,
    object: (&Vec3, f64),
    gripper: (&Vec3, f64),
    gripper_label: u8,
) -> Vec<u8> {
    let inside = |circle: Option<(f64, f64, f64)>, i: usize, j: usize| match circle {
        Some((u, v, r)) => {
            let (du, dv) = (i as f64 - u, j as f64 - v);
            du * du + dv * dv <= r * r
        }
        None => false,
    };
    let oc = project_circle(cam, object.0, object.1);
    let gc = project_circle(cam, gripper.0, gripper.1);
    let mut out = vec![0u8; cam.width * cam.height];
    for j in 0..cam.height {
        for i in 0..cam.width {
            out[j * cam.width + i] = if inside(gc, i, j) {
                gripper_label
            } else if inside(oc, i, j) {
                128
            } else {
                0
            };
        }
    }
    out
}
