//! Point-cloud ingestion, parametric test scenes and voxelization into
//! occupancy grids.
//!
//! Cells are half-open boxes `[min, min + voxel_size)` along each axis, so
//! every point inside the grid volume belongs to exactly one voxel.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec3;

/// Default lattice resolution per axis.
pub const DEFAULT_DIMS: [usize; 3] = [64, 64, 64];

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("degenerate bounds: {0}")]
    DegenerateBounds(String),
    #[error("grid dimensions must be positive, got {0:?}")]
    InvalidDims([usize; 3]),
    #[error("point ({:.4}, {:.4}, {:.4}) lies outside the grid", .0[0], .0[1], .0[2])]
    OutOfBounds([f64; 3]),
    #[error("{which} keypoint ({:.4}, {:.4}, {:.4}) falls in an occupied voxel", point[0], point[1], point[2])]
    KeypointOccupied { which: String, point: [f64; 3] },
}

/// Ordered 3D points in the world frame, meters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Axis-aligned min/max corners, `None` for an empty cloud.
    pub fn aabb(&self) -> Option<(Vec3, Vec3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        }))
    }
}

/// Placement and scale of the voxel lattice in the world.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBounds {
    #[serde(rename = "min_corner_m")]
    pub min_corner: Vec3,
    #[serde(rename = "voxel_size_m")]
    pub voxel_size: f64,
}

impl GridBounds {
    pub fn new(min_corner: Vec3, voxel_size: f64) -> Result<Self, SceneError> {
        let bounds = GridBounds {
            min_corner,
            voxel_size,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<(), SceneError> {
        if !(self.voxel_size.is_finite() && self.voxel_size > 0.0) {
            return Err(SceneError::DegenerateBounds(format!(
                "voxel size must be positive and finite, got {}",
                self.voxel_size
            )));
        }
        if !self.min_corner.iter().all(|c| c.is_finite()) {
            return Err(SceneError::DegenerateBounds(
                "min corner is not finite".into(),
            ));
        }
        Ok(())
    }

    /// Bounds fitted to a cloud: its bounding box inflated by one voxel on
    /// every side, with a cubic voxel chosen so the inflated box fits in `dims`.
    pub fn fit(cloud: &PointCloud, dims: [usize; 3]) -> Result<Self, SceneError> {
        if dims.iter().any(|&n| n < 3) {
            return Err(SceneError::DegenerateBounds(
                "fitting bounds needs at least 3 voxels per axis".into(),
            ));
        }
        let (lo, hi) = cloud
            .aabb()
            .ok_or_else(|| SceneError::DegenerateBounds("empty point cloud".into()))?;
        let extent = hi - lo;
        let voxel_size = (0..3)
            .map(|a| extent[a] / (dims[a] - 2) as f64)
            .fold(0.0, f64::max);
        if voxel_size <= 0.0 {
            return Err(SceneError::DegenerateBounds(
                "point cloud has zero extent".into(),
            ));
        }
        // Nudge up by one ulp-scale step so max-face points stay strictly inside.
        let voxel_size = voxel_size * (1.0 + 1e-12);
        GridBounds::new(lo.add_scalar(-voxel_size), voxel_size)
    }

    pub fn max_corner(&self, dims: [usize; 3]) -> Vec3 {
        self.min_corner
            + Vec3::new(dims[0] as f64, dims[1] as f64, dims[2] as f64) * self.voxel_size
    }
}

/// Integer voxel coordinates. Ordering is lexicographic in (x, y, z).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Cell {
    pub x: usize,
    pub y: usize,
    pub z: usize,
}

impl Cell {
    pub const fn new(x: usize, y: usize, z: usize) -> Self {
        Cell { x, y, z }
    }

    pub fn as_array(self) -> [usize; 3] {
        [self.x, self.y, self.z]
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl From<[usize; 3]> for Cell {
    fn from(a: [usize; 3]) -> Self {
        Cell::new(a[0], a[1], a[2])
    }
}

/// Boolean voxel lattice with a world-frame placement.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGrid {
    dims: [usize; 3],
    bounds: GridBounds,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn empty(dims: [usize; 3], bounds: GridBounds) -> Result<Self, SceneError> {
        if dims.contains(&0) {
            return Err(SceneError::InvalidDims(dims));
        }
        bounds.validate()?;
        Ok(OccupancyGrid {
            dims,
            bounds,
            occupied: vec![false; dims[0] * dims[1] * dims[2]],
        })
    }

    /// Builds a grid from a per-voxel predicate.
    pub fn from_fn(
        dims: [usize; 3],
        bounds: GridBounds,
        mut f: impl FnMut(Cell) -> bool,
    ) -> Result<Self, SceneError> {
        let mut grid = OccupancyGrid::empty(dims, bounds)?;
        for i in 0..grid.occupied.len() {
            grid.occupied[i] = f(grid.cell_of(i));
        }
        Ok(grid)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bounds(&self) -> &GridBounds {
        &self.bounds
    }

    pub fn voxel_size(&self) -> f64 {
        self.bounds.voxel_size
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn contains(&self, c: Cell) -> bool {
        c.x < self.dims[0] && c.y < self.dims[1] && c.z < self.dims[2]
    }

    /// Linear index, x fastest.
    pub fn index(&self, c: Cell) -> usize {
        debug_assert!(self.contains(c));
        c.x + self.dims[0] * (c.y + self.dims[1] * c.z)
    }

    pub fn cell_of(&self, index: usize) -> Cell {
        let x = index % self.dims[0];
        let rest = index / self.dims[0];
        Cell::new(x, rest % self.dims[1], rest / self.dims[1])
    }

    pub fn is_occupied(&self, c: Cell) -> bool {
        self.occupied[self.index(c)]
    }

    pub fn set(&mut self, c: Cell, value: bool) {
        let i = self.index(c);
        self.occupied[i] = value;
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).map(move |i| self.cell_of(i))
    }

    /// Containing cell of a world point under the half-open convention.
    pub fn world_to_grid(&self, p: &Vec3) -> Result<Cell, SceneError> {
        let rel = (p - self.bounds.min_corner) / self.bounds.voxel_size;
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let f = rel[a].floor();
            if !(f >= 0.0 && f < self.dims[a] as f64) {
                return Err(SceneError::OutOfBounds([p.x, p.y, p.z]));
            }
            idx[a] = f as usize;
        }
        Ok(idx.into())
    }

    /// World-frame center of a cell.
    pub fn grid_to_world(&self, c: Cell) -> Result<Vec3, SceneError> {
        if !self.contains(c) {
            return Err(SceneError::OutOfBounds([c.x as f64, c.y as f64, c.z as f64]));
        }
        Ok(self.cell_center(c))
    }

    pub(crate) fn cell_center(&self, c: Cell) -> Vec3 {
        let s = self.bounds.voxel_size;
        self.bounds.min_corner
            + Vec3::new(
                (c.x as f64 + 0.5) * s,
                (c.y as f64 + 0.5) * s,
                (c.z as f64 + 0.5) * s,
            )
    }
}

/// Counts reported by [`voxelize`].
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoxelizeSummary {
    pub inside: usize,
    pub outside: usize,
}

/// Bins points into half-open voxels. Points outside the grid volume are
/// counted in the summary and otherwise ignored.
pub fn voxelize(
    cloud: &PointCloud,
    dims: [usize; 3],
    bounds: GridBounds,
) -> Result<(OccupancyGrid, VoxelizeSummary), SceneError> {
    let mut grid = OccupancyGrid::empty(dims, bounds)?;
    let mut summary = VoxelizeSummary::default();
    for p in &cloud.points {
        match grid.world_to_grid(p) {
            Ok(c) => {
                grid.set(c, true);
                summary.inside += 1;
            }
            Err(_) => summary.outside += 1,
        }
    }
    Ok((grid, summary))
}

/// Solid shapes used by synthetic scenes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Axis-aligned box; `size` holds full edge lengths.
    Box {
        #[serde(rename = "center_m")]
        center: Vec3,
        #[serde(rename = "size_m")]
        size: Vec3,
    },
    Sphere {
        #[serde(rename = "center_m")]
        center: Vec3,
        #[serde(rename = "radius_m")]
        radius: f64,
    },
    /// Solid half-space `{p : n̂·p <= offset}`.
    HalfSpace {
        normal: Vec3,
        #[serde(rename = "offset_m")]
        offset: f64,
    },
}

impl Shape {
    pub fn contains(&self, p: &Vec3) -> bool {
        match self {
            Shape::Box { center, size } => {
                let d = (p - center).abs();
                (0..3).all(|a| d[a] <= 0.5 * size[a])
            }
            Shape::Sphere { center, radius } => (p - center).norm() <= *radius,
            Shape::HalfSpace { normal, offset } => {
                normal.normalize().dot(p) <= *offset
            }
        }
    }

    fn validate(&self, name: &str) -> Result<(), SceneError> {
        let ok = match self {
            Shape::Box { center, size } => {
                center.iter().all(|c| c.is_finite())
                    && size.iter().all(|s| s.is_finite() && *s >= 0.0)
            }
            Shape::Sphere { center, radius } => {
                center.iter().all(|c| c.is_finite()) && radius.is_finite() && *radius >= 0.0
            }
            Shape::HalfSpace { normal, offset } => {
                normal.iter().all(|c| c.is_finite()) && normal.norm() > 0.0 && offset.is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(SceneError::DegenerateBounds(format!(
                "primitive '{name}' has invalid geometry"
            )))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub name: String,
    #[serde(flatten)]
    pub shape: Shape,
}

/// Parametric pick-and-place scene: obstacles plus the three keypoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    #[serde(rename = "effector_start_m")]
    pub effector_start: Vec3,
    #[serde(rename = "object_m")]
    pub object: Vec3,
    #[serde(rename = "target_m")]
    pub target: Vec3,
    /// Affordance point relative to the object center. When set, the gripper
    /// travels to `object + grasp_offset` instead of the object center.
    #[serde(rename = "grasp_offset_m", default, skip_serializing_if = "Option::is_none")]
    pub grasp_offset: Option<Vec3>,
    /// Bounding-box edge lengths of the manipulated object.
    #[serde(rename = "object_extent_m")]
    pub object_extent: Vec3,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
}

impl SceneSpec {
    pub fn grasp_offset(&self) -> Vec3 {
        self.grasp_offset.unwrap_or_else(Vec3::zeros)
    }

    /// Where the gripper picks the object up.
    pub fn grasp_point(&self) -> Vec3 {
        self.object + self.grasp_offset()
    }

    pub fn is_occupied(&self, p: &Vec3) -> bool {
        self.primitives.iter().any(|prim| prim.shape.contains(p))
    }

    /// Named keypoints the planner must reach, in visiting order.
    pub fn keypoints(&self) -> Vec<(&'static str, Vec3)> {
        let mut out = vec![("effector", self.effector_start), ("object", self.object)];
        if self.grasp_offset.is_some() {
            out.push(("grasp", self.grasp_point()));
        }
        out.push(("target", self.target));
        out
    }
}

/// Rasterizes a scene spec: a voxel is occupied iff its center lies inside
/// any primitive. Fails if a keypoint lands outside the grid or in an
/// occupied voxel.
pub fn synth_scene(
    spec: &SceneSpec,
    dims: [usize; 3],
    bounds: GridBounds,
) -> Result<OccupancyGrid, SceneError> {
    for prim in &spec.primitives {
        prim.shape.validate(&prim.name)?;
    }
    let mut grid = OccupancyGrid::empty(dims, bounds)?;
    for i in 0..grid.len() {
        let center = grid.cell_center(grid.cell_of(i));
        grid.occupied[i] = spec.is_occupied(&center);
    }
    check_keypoints(&grid, spec)?;
    Ok(grid)
}

/// Verifies every keypoint of `spec` maps to a free voxel of `grid`.
pub fn check_keypoints(grid: &OccupancyGrid, spec: &SceneSpec) -> Result<(), SceneError> {
    for (which, p) in spec.keypoints() {
        let cell = grid.world_to_grid(&p)?;
        if grid.is_occupied(cell) {
            return Err(SceneError::KeypointOccupied {
                which: which.to_string(),
                point: [p.x, p.y, p.z],
            });
        }
    }
    Ok(())
}

/// Reads an ASCII XYZ or ASCII PLY point cloud. Format is chosen by the
/// `ply` magic on the first line. Non-finite points are dropped.
pub fn load_point_cloud(path: impl AsRef<Path>) -> Result<PointCloud, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_point_cloud(&text, &path.display().to_string())
}

pub fn parse_point_cloud(text: &str, origin: &str) -> Result<PointCloud, SceneError> {
    let first = text.lines().next().map(str::trim);
    if first == Some("ply") {
        parse_ply(text, origin)
    } else {
        parse_xyz(text, origin)
    }
}

fn parse_err(origin: &str, line: usize, message: impl Into<String>) -> SceneError {
    SceneError::Parse {
        path: origin.to_string(),
        line,
        message: message.into(),
    }
}

fn parse_triple<'a>(
    mut fields: impl Iterator<Item = &'a str>,
    origin: &str,
    line: usize,
) -> Result<Vec3, SceneError> {
    let mut xyz = [0.0; 3];
    for v in xyz.iter_mut() {
        let tok = fields
            .next()
            .ok_or_else(|| parse_err(origin, line, "expected three coordinates"))?;
        *v = tok
            .parse()
            .map_err(|_| parse_err(origin, line, format!("invalid number '{tok}'")))?;
    }
    Ok(Vec3::new(xyz[0], xyz[1], xyz[2]))
}

fn parse_xyz(text: &str, origin: &str) -> Result<PointCloud, SceneError> {
    let mut points = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let p = parse_triple(&mut fields, origin, i + 1)?;
        if fields.next().is_some() {
            return Err(parse_err(origin, i + 1, "expected exactly three coordinates"));
        }
        if p.iter().all(|c| c.is_finite()) {
            points.push(p);
        }
    }
    Ok(PointCloud { points })
}

struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<String>,
}

fn parse_ply(text: &str, origin: &str) -> Result<PointCloud, SceneError> {
    let mut lines = text.lines().enumerate();
    lines.next(); // magic
    let mut elements: Vec<PlyElement> = Vec::new();
    let mut saw_format = false;
    loop {
        let (i, line) = lines
            .next()
            .ok_or_else(|| parse_err(origin, 0, "missing end_header"))?;
        let lineno = i + 1;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => {
                if tok.next() != Some("ascii") {
                    return Err(parse_err(origin, lineno, "only ASCII PLY is supported"));
                }
                saw_format = true;
            }
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok
                    .next()
                    .ok_or_else(|| parse_err(origin, lineno, "element without name"))?;
                let count = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(origin, lineno, "element without valid count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(origin, lineno, "property before element"))?;
                let rest: Vec<&str> = tok.collect();
                let name = match rest.as_slice() {
                    ["list", _, _, name] => name,
                    [_, name] => name,
                    _ => return Err(parse_err(origin, lineno, "malformed property")),
                };
                el.properties.push(name.to_string());
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(origin, lineno, format!("unknown header keyword '{other}'")))
            }
        }
    }
    if !saw_format {
        return Err(parse_err(origin, 1, "missing format line"));
    }

    let mut points = Vec::new();
    for el in &elements {
        let axes = if el.name == "vertex" {
            let find = |n: &str| el.properties.iter().position(|p| p == n);
            match (find("x"), find("y"), find("z")) {
                (Some(x), Some(y), Some(z)) => Some([x, y, z]),
                _ => return Err(parse_err(origin, 0, "vertex element lacks x/y/z properties")),
            }
        } else {
            None
        };
        for _ in 0..el.count {
            let (i, line) = lines
                .next()
                .ok_or_else(|| parse_err(origin, 0, format!("truncated '{}' data", el.name)))?;
            let Some(axes) = axes else { continue };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < el.properties.len() {
                return Err(parse_err(origin, i + 1, "too few values for vertex"));
            }
            let p = parse_triple(axes.iter().map(|&a| fields[a]), origin, i + 1)?;
            if p.iter().all(|c| c.is_finite()) {
                points.push(p);
            }
        }
    }
    Ok(PointCloud { points })
}

fn write_text(path: &Path, body: &str) -> Result<(), SceneError> {
    let io = |source| SceneError::Io {
        path: path.to_owned(),
        source,
    };
    let mut f = fs::File::create(path).map_err(io)?;
    f.write_all(body.as_bytes()).map_err(io)
}

/// Writes one `x y z` line per point, shortest round-trip float formatting.
pub fn write_xyz(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<(), SceneError> {
    let mut body = String::new();
    for p in &cloud.points {
        body.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    write_text(path.as_ref(), &body)
}

pub fn write_ply(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<(), SceneError> {
    let mut body = format!(
        "ply\nformat ascii 1.0\nelement vertex {}\nproperty double x\nproperty double y\nproperty double z\nend_header\n",
        cloud.len()
    );
    for p in &cloud.points {
        body.push_str(&format!("{} {} {}\n", p.x, p.y, p.z));
    }
    write_text(path.as_ref(), &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_bounds(n: usize) -> GridBounds {
        GridBounds::new(Vec3::zeros(), 1.0 / n as f64).unwrap()
    }

    #[test]
    fn xyz_two_points() {
        let cloud = parse_point_cloud("0 0 0\n1 2 3\n", "mem").unwrap();
        assert_eq!(cloud.points, vec![Vec3::zeros(), Vec3::new(1.0, 2.0, 3.0)]);
    }

    #[test]
    fn empty_file_is_empty_cloud() {
        assert!(parse_point_cloud("", "mem").unwrap().is_empty());
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let err = parse_point_cloud("0 0 0\n1 two 3\n", "mem").unwrap_err();
        match err {
            SceneError::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ply_with_extra_properties_and_faces() {
        let text = "ply\nformat ascii 1.0\ncomment test\nelement vertex 2\nproperty float nx\nproperty float x\nproperty float y\nproperty float z\nelement face 1\nproperty list uchar int vertex_indices\nend_header\n9 1 2 3\n9 4 5 6\n3 0 1 1\n";
        let cloud = parse_point_cloud(text, "mem").unwrap();
        assert_eq!(cloud.points, vec![Vec3::new(1.0, 2.0, 3.0), Vec3::new(4.0, 5.0, 6.0)]);
    }

    #[test]
    fn binary_ply_is_rejected() {
        let text = "ply\nformat binary_little_endian 1.0\nend_header\n";
        assert!(matches!(
            parse_point_cloud(text, "mem"),
            Err(SceneError::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn ply_round_trip_500_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cloud = PointCloud::new(
            (0..500)
                .map(|_| Vec3::new(rng.gen_range(-5.0..5.0), rng.gen(), rng.gen_range(0.0..1e-3)))
                .collect(),
        );
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.ply");
        write_ply(&path, &cloud).unwrap();
        assert_eq!(load_point_cloud(&path).unwrap(), cloud);
        let path = dir.path().join("c.xyz");
        write_xyz(&path, &cloud).unwrap();
        assert_eq!(load_point_cloud(&path).unwrap(), cloud);
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_point_cloud("/nonexistent/cloud.xyz"),
            Err(SceneError::Io { .. })
        ));
    }

    #[test]
    fn zero_voxel_size_is_degenerate() {
        assert!(matches!(
            GridBounds::new(Vec3::zeros(), 0.0),
            Err(SceneError::DegenerateBounds(_))
        ));
        let bad = GridBounds {
            min_corner: Vec3::zeros(),
            voxel_size: -1.0,
        };
        assert!(voxelize(&PointCloud::default(), [4, 4, 4], bad).is_err());
    }

    #[test]
    fn empty_cloud_gives_free_grid() {
        let (grid, summary) = voxelize(&PointCloud::default(), DEFAULT_DIMS, unit_bounds(64)).unwrap();
        assert_eq!(grid.occupied_count(), 0);
        assert_eq!(summary, VoxelizeSummary::default());
    }

    #[test]
    fn point_at_min_corner_hits_origin_voxel() {
        let bounds = GridBounds::new(Vec3::new(-1.0, 2.0, 0.5), 0.1).unwrap();
        let cloud = PointCloud::new(vec![bounds.min_corner]);
        let (grid, _) = voxelize(&cloud, [8, 8, 8], bounds).unwrap();
        assert_eq!(grid.occupied_count(), 1);
        assert!(grid.is_occupied(Cell::new(0, 0, 0)));
    }

    #[test]
    fn max_face_point_belongs_to_next_voxel() {
        let grid = OccupancyGrid::empty([4, 4, 4], unit_bounds(4)).unwrap();
        assert_eq!(grid.world_to_grid(&Vec3::new(0.25, 0.0, 0.0)).unwrap(), Cell::new(1, 0, 0));
        // max face of the whole grid is outside
        assert!(grid.world_to_grid(&Vec3::new(1.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn random_points_match_brute_force_binning() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let bounds = GridBounds::new(Vec3::new(-0.3, 0.1, 2.0), 0.05).unwrap();
        let dims = [10, 7, 12];
        let cloud = PointCloud::new(
            (0..1000)
                .map(|_| {
                    Vec3::new(
                        rng.gen_range(-0.3..0.2),
                        rng.gen_range(0.1..0.45),
                        rng.gen_range(2.0..2.6),
                    )
                })
                .collect(),
        );
        let (grid, summary) = voxelize(&cloud, dims, bounds).unwrap();
        assert_eq!(summary.inside + summary.outside, 1000);

        // Oracle: test every voxel box against every point.
        for c in grid.cells() {
            let lo = bounds.min_corner
                + Vec3::new(c.x as f64, c.y as f64, c.z as f64) * bounds.voxel_size;
            let hi = lo.add_scalar(bounds.voxel_size);
            let expected = cloud
                .points
                .iter()
                .any(|p| (0..3).all(|a| p[a] >= lo[a] && p[a] < hi[a]));
            assert_eq!(grid.is_occupied(c), expected, "voxel {c}");
        }
    }

    #[test]
    fn out_of_bounds_points_are_counted() {
        let cloud = PointCloud::new(vec![Vec3::new(0.5, 0.5, 0.5), Vec3::new(2.0, 0.0, 0.0), Vec3::new(-0.1, 0.0, 0.0)]);
        let (grid, summary) = voxelize(&cloud, [4, 4, 4], unit_bounds(4)).unwrap();
        assert_eq!(summary, VoxelizeSummary { inside: 1, outside: 2 });
        assert_eq!(grid.occupied_count(), 1);
    }

    #[test]
    fn coordinate_conventions() {
        let bounds = GridBounds::new(Vec3::new(1.0, -2.0, 0.0), 0.2).unwrap();
        let grid = OccupancyGrid::empty([5, 5, 5], bounds).unwrap();
        assert_eq!(grid.world_to_grid(&bounds.min_corner).unwrap(), Cell::new(0, 0, 0));
        assert_eq!(
            grid.grid_to_world(Cell::new(0, 0, 0)).unwrap(),
            bounds.min_corner.add_scalar(0.1)
        );
        assert!(grid.grid_to_world(Cell::new(5, 0, 0)).is_err());
    }

    #[test]
    fn random_cells_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let bounds = GridBounds::new(Vec3::new(-0.37, 1.3, 0.01), 0.013).unwrap();
        let grid = OccupancyGrid::empty(DEFAULT_DIMS, bounds).unwrap();
        for _ in 0..100 {
            let c = Cell::new(rng.gen_range(0..64), rng.gen_range(0..64), rng.gen_range(0..64));
            assert_eq!(grid.world_to_grid(&grid.grid_to_world(c).unwrap()).unwrap(), c);
        }
    }

    #[test]
    fn fitted_bounds_cover_cloud() {
        let cloud = PointCloud::new(vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(2.0, 0.5, 0.25)]);
        let bounds = GridBounds::fit(&cloud, DEFAULT_DIMS).unwrap();
        let (_, summary) = voxelize(&cloud, DEFAULT_DIMS, bounds).unwrap();
        assert_eq!(summary.outside, 0);
        assert!(GridBounds::fit(&PointCloud::default(), DEFAULT_DIMS).is_err());
    }

    fn keypoints_spec(primitives: Vec<Primitive>) -> SceneSpec {
        SceneSpec {
            effector_start: Vec3::new(0.2, 0.5, 0.8),
            object: Vec3::new(0.25, 0.5, 0.2),
            target: Vec3::new(0.75, 0.5, 0.2),
            grasp_offset: None,
            object_extent: Vec3::new(0.05, 0.05, 0.05),
            primitives,
        }
    }

    #[test]
    fn table_plane_fills_bottom_layers() {
        let spec = keypoints_spec(vec![Primitive {
            name: "table".into(),
            shape: Shape::HalfSpace {
                normal: Vec3::z(),
                offset: 0.1,
            },
        }]);
        let grid = synth_scene(&spec, DEFAULT_DIMS, unit_bounds(64)).unwrap();
        // Voxel centers (k + 0.5)/64 <= 0.1 for k = 0..=5.
        let layers = (0.1 * 64.0 - 0.5_f64).floor() as usize + 1;
        assert_eq!(layers, 6);
        for c in grid.cells() {
            assert_eq!(grid.is_occupied(c), c.z < layers, "{c}");
        }
    }

    #[test]
    fn rim_box_matches_point_in_box_oracle() {
        let (lo, hi) = (Vec3::new(0.46, 0.0, 0.1), Vec3::new(0.54, 1.0, 0.3));
        let spec = keypoints_spec(vec![Primitive {
            name: "rim".into(),
            shape: Shape::Box {
                center: (lo + hi) / 2.0,
                size: hi - lo,
            },
        }]);
        let grid = synth_scene(&spec, [32, 32, 32], unit_bounds(32)).unwrap();
        let mut n = 0;
        for c in grid.cells() {
            let p = grid.grid_to_world(c).unwrap();
            let inside = (0..3).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= hi[a] + 1e-12);
            assert_eq!(grid.is_occupied(c), inside);
            n += inside as usize;
        }
        assert!(n > 0);
    }

    #[test]
    fn empty_spec_is_free() {
        let grid = synth_scene(&keypoints_spec(vec![]), DEFAULT_DIMS, unit_bounds(64)).unwrap();
        assert_eq!(grid.occupied_count(), 0);
    }

    #[test]
    fn keypoint_inside_primitive_is_rejected() {
        let spec = keypoints_spec(vec![Primitive {
            name: "crate".into(),
            shape: Shape::Sphere {
                center: Vec3::new(0.25, 0.5, 0.2),
                radius: 0.1,
            },
        }]);
        match synth_scene(&spec, [16, 16, 16], unit_bounds(16)) {
            Err(SceneError::KeypointOccupied { which, .. }) => assert_eq!(which, "object"),
            other => panic!("unexpected {other:?}"),
        }
    }

    fn cloud_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
        prop::collection::vec((-0.2..1.2f64, -0.2..1.2f64, -0.2..1.2f64), 0..200)
    }

    proptest! {
        #[test]
        fn voxelize_is_idempotent_and_monotone(a in cloud_strategy(), b in cloud_strategy()) {
            let to_cloud = |v: &[(f64, f64, f64)]| PointCloud::new(v.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect());
            let bounds = unit_bounds(8);
            let ca = to_cloud(&a);
            let (ga, _) = voxelize(&ca, [8, 8, 8], bounds).unwrap();
            let mut doubled = ca.clone();
            doubled.points.extend(ca.points.iter().copied());
            let (gd, _) = voxelize(&doubled, [8, 8, 8], bounds).unwrap();
            prop_assert_eq!(&ga, &gd);

            let mut union = ca.clone();
            union.points.extend(to_cloud(&b).points);
            let (gu, _) = voxelize(&union, [8, 8, 8], bounds).unwrap();
            for c in ga.cells() {
                prop_assert!(!ga.is_occupied(c) || gu.is_occupied(c));
            }
        }

        #[test]
        fn inside_points_land_in_their_voxel(x in 0.0..1.0f64, y in 0.0..1.0f64, z in 0.0..1.0f64) {
            let grid = OccupancyGrid::empty([7, 7, 7], unit_bounds(7)).unwrap();
            let p = Vec3::new(x, y, z);
            let c = grid.world_to_grid(&p).unwrap();
            let center = grid.grid_to_world(c).unwrap();
            let half = grid.voxel_size() / 2.0;
            for a in 0..3 {
                prop_assert!(p[a] >= center[a] - half - 1e-12 && p[a] < center[a] + half + 1e-12);
            }
        }
    }
}
