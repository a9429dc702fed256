//! Exact Euclidean distance transform of an occupancy grid, with trilinear
//! sampling and analytic gradients for the collision objective.
//!
//! Distances are measured between voxel centers and are unsigned: zero on
//! occupied voxels, positive elsewhere.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::scene::{Cell, GridBounds, OccupancyGrid};
use crate::Vec3;

/// Squared voxel distance stored for voxels with no occupied voxel at all.
pub const NO_OBSTACLE: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct DistanceField {
    dims: [usize; 3],
    bounds: GridBounds,
    squared: Vec<u32>,
    distance: Vec<f64>,
}

/// Value of a trilinear sample plus whether the query point had to be
/// clamped into the grid volume.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sample {
    pub value: f64,
    pub gradient: Vec3,
    pub clamped: bool,
}

/// Squared distance transform of a 1D function in place (lower envelope of
/// parabolas). `f64::INFINITY` marks "no site".
fn edt_1d(f: &mut [f64], sites: &mut Vec<usize>, bounds: &mut Vec<f64>, out: &mut [f64]) {
    let n = f.len();
    sites.clear();
    bounds.clear();
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        let qf = q as f64;
        loop {
            let Some(&p) = sites.last() else {
                sites.push(q);
                bounds.push(f64::NEG_INFINITY);
                break;
            };
            let pf = p as f64;
            let s = ((f[q] + qf * qf) - (f[p] + pf * pf)) / (2.0 * (qf - pf));
            if s <= *bounds.last().unwrap() {
                sites.pop();
                bounds.pop();
            } else {
                sites.push(q);
                bounds.push(s);
                break;
            }
        }
    }
    if sites.is_empty() {
        out.iter_mut().for_each(|v| *v = f64::INFINITY);
        return;
    }
    let mut k = 0;
    for (q, slot) in out.iter_mut().enumerate() {
        while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
            k += 1;
        }
        let d = q as f64 - sites[k] as f64;
        *slot = d * d + f[sites[k]];
    }
}

impl DistanceField {
    /// Separable three-pass exact squared EDT, converted to meters.
    pub fn compute(grid: &OccupancyGrid) -> Self {
        let dims = grid.dims();
        let [nx, ny, nz] = dims;
        let mut sq: Vec<f64> = grid
            .occupied()
            .iter()
            .map(|&o| if o { 0.0 } else { f64::INFINITY })
            .collect();

        let longest = nx.max(ny).max(nz);
        let mut line = vec![0.0; longest];
        let mut out = vec![0.0; longest];
        let mut sites = Vec::with_capacity(longest);
        let mut env = Vec::with_capacity(longest);

        let strides = [1, nx, nx * ny];
        for axis in 0..3 {
            let n = dims[axis];
            let stride = strides[axis];
            let (oa, ob) = match axis {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            for b in 0..dims[ob] {
                for a in 0..dims[oa] {
                    let base = a * strides[oa] + b * strides[ob];
                    for i in 0..n {
                        line[i] = sq[base + i * stride];
                    }
                    edt_1d(&mut line[..n], &mut sites, &mut env, &mut out[..n]);
                    for i in 0..n {
                        sq[base + i * stride] = out[i];
                    }
                }
            }
        }

        let s = grid.voxel_size();
        let sentinel = DistanceField::sentinel_for(dims, s);
        let squared: Vec<u32> = sq
            .iter()
            .map(|&v| if v.is_finite() { v as u32 } else { NO_OBSTACLE })
            .collect();
        let distance = squared
            .iter()
            .map(|&v| {
                if v == NO_OBSTACLE {
                    sentinel
                } else {
                    (v as f64).sqrt() * s
                }
            })
            .collect();
        DistanceField {
            dims,
            bounds: *grid.bounds(),
            squared,
            distance,
        }
    }

    fn sentinel_for(dims: [usize; 3], voxel_size: f64) -> f64 {
        let d = Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64);
        d.norm() * voxel_size
    }

    /// Distance reported everywhere in an obstacle-free grid: the length of
    /// the grid diagonal.
    pub fn sentinel(&self) -> f64 {
        DistanceField::sentinel_for(self.dims, self.bounds.voxel_size)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    fn index(&self, c: Cell) -> usize {
        c.x + self.dims[0] * (c.y + self.dims[1] * c.z)
    }

    /// Distance in meters at a voxel center.
    pub fn at(&self, c: Cell) -> f64 {
        self.distance[self.index(c)]
    }

    /// Squared distance in voxel units, or [`NO_OBSTACLE`].
    pub fn squared_voxels(&self, c: Cell) -> u32 {
        self.squared[self.index(c)]
    }

    pub fn values(&self) -> &[f64] {
        &self.distance
    }

    /// Overrides stored distances; the squared table is left untouched.
    pub fn from_values(dims: [usize; 3], bounds: GridBounds, distance: Vec<f64>) -> Self {
        assert_eq!(distance.len(), dims[0] * dims[1] * dims[2]);
        DistanceField {
            dims,
            bounds,
            squared: vec![NO_OBSTACLE; distance.len()],
            distance,
        }
    }

    /// Trilinear interpolation of the voxel-center values, with the exact
    /// gradient of the interpolant inside the enclosing cell. Points outside
    /// the center lattice are clamped to its boundary; `clamped` is set only
    /// when the point lies outside the grid volume itself.
    pub fn sample_full(&self, p: &Vec3) -> Sample {
        let s = self.bounds.voxel_size;
        let rel = (p - self.bounds.min_corner) / s;
        let mut base = [0usize; 3];
        let mut t = [0.0; 3];
        let mut active = [true; 3];
        let mut clamped = false;
        for a in 0..3 {
            let n = self.dims[a];
            if rel[a] < 0.0 || rel[a] > n as f64 || !rel[a].is_finite() {
                clamped = true;
            }
            let g = rel[a] - 0.5;
            let hi = (n - 1) as f64;
            if n == 1 || !(g > 0.0) || g >= hi {
                active[a] = false;
                base[a] = if n > 1 && g >= hi { n - 2 } else { 0 };
                t[a] = if n > 1 && g >= hi { 1.0 } else { 0.0 };
                continue;
            }
            let i = (g.floor() as usize).min(n - 2);
            base[a] = i;
            t[a] = g - i as f64;
        }

        let corner = |dx: usize, dy: usize, dz: usize| -> f64 {
            let c = Cell::new(
                (base[0] + dx).min(self.dims[0] - 1),
                (base[1] + dy).min(self.dims[1] - 1),
                (base[2] + dz).min(self.dims[2] - 1),
            );
            self.at(c)
        };
        let c000 = corner(0, 0, 0);
        let c100 = corner(1, 0, 0);
        let c010 = corner(0, 1, 0);
        let c110 = corner(1, 1, 0);
        let c001 = corner(0, 0, 1);
        let c101 = corner(1, 0, 1);
        let c011 = corner(0, 1, 1);
        let c111 = corner(1, 1, 1);
        let [tx, ty, tz] = t;

        // Interpolate along x, then y, then z.
        let c00 = c000 + tx * (c100 - c000);
        let c10 = c010 + tx * (c110 - c010);
        let c01 = c001 + tx * (c101 - c001);
        let c11 = c011 + tx * (c111 - c011);
        let c0 = c00 + ty * (c10 - c00);
        let c1 = c01 + ty * (c11 - c01);
        let value = c0 + tz * (c1 - c0);

        let dx0 = (c100 - c000) + ty * ((c110 - c010) - (c100 - c000));
        let dx1 = (c101 - c001) + ty * ((c111 - c011) - (c101 - c001));
        let ddx = dx0 + tz * (dx1 - dx0);
        let ddy = (c10 - c00) + tz * ((c11 - c01) - (c10 - c00));
        let ddz = c1 - c0;
        let mut gradient = Vec3::new(ddx, ddy, ddz) / s;
        for a in 0..3 {
            if !active[a] {
                gradient[a] = 0.0;
            }
        }
        Sample {
            value,
            gradient,
            clamped,
        }
    }

    pub fn sample(&self, p: &Vec3) -> f64 {
        self.sample_full(p).value
    }

    /// Gradient of the trilinear interpolant, per meter.
    pub fn gradient(&self, p: &Vec3) -> Vec3 {
        self.sample_full(p).gradient
    }

    /// Writes `<stem>.raw` (little-endian f32 meters, x fastest) and a small
    /// text header `<stem>.hdr` for offline inspection.
    pub fn write_raw(&self, stem: impl AsRef<Path>) -> std::io::Result<(PathBuf, PathBuf)> {
        let stem = stem.as_ref();
        let raw = stem.with_extension("raw");
        let hdr = stem.with_extension("hdr");
        let mut bytes = Vec::with_capacity(self.distance.len() * 4);
        for &d in &self.distance {
            bytes.extend_from_slice(&(d as f32).to_le_bytes());
        }
        fs::write(&raw, bytes)?;
        let m = self.bounds.min_corner;
        let mut f = fs::File::create(&hdr)?;
        writeln!(f, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        writeln!(f, "min_corner_m {} {} {}", m.x, m.y, m.z)?;
        writeln!(f, "voxel_size_m {}", self.bounds.voxel_size)?;
        writeln!(f, "layout f32le x_fastest")?;
        Ok((raw, hdr))
    }
}

pub fn compute_edt(grid: &OccupancyGrid) -> DistanceField {
    DistanceField::compute(grid)
}
