//! Three-stage A* initialization on the occupancy grid.
//!
//! Each stage is searched on a 26-connected lattice with Euclidean step
//! costs and the Euclidean heuristic. Obstacles are first dilated by an
//! integer Chebyshev clearance; if that swallows a keypoint the stage is
//! re-planned without dilation and flagged.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scene::{Cell, OccupancyGrid, SceneError, SceneSpec};
use crate::Vec3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Approach,
    Manipulate,
    BackIdle,
}

impl Stage {
    pub const ALL: [Stage; 3] = [Stage::Approach, Stage::Manipulate, Stage::BackIdle];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Approach => "approach",
            Stage::Manipulate => "manipulate",
            Stage::BackIdle => "back_idle",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum SegmentError {
    #[error("no path from {start} to {goal}")]
    NoPath { start: Cell, goal: Cell },
    #[error("start voxel {0} is occupied")]
    StartOccupied(Cell),
    #[error("goal voxel {0} is occupied")]
    GoalOccupied(Cell),
    #[error(transparent)]
    Scene(#[from] SceneError),
}

#[derive(Debug, Error)]
#[error("{stage} stage: {source}")]
pub struct PlanError {
    pub stage: Stage,
    #[source]
    pub source: SegmentError,
}

/// One planned stage: ordered world-frame waypoints.
#[derive(Clone, Debug, PartialEq)]
pub struct SubTrajectory {
    pub stage: Stage,
    pub points: Vec<Vec3>,
}

impl SubTrajectory {
    pub fn first(&self) -> Vec3 {
        self.points[0]
    }

    pub fn last(&self) -> Vec3 {
        *self.points.last().unwrap()
    }
}

/// Approach, manipulate and back-idle sub-trajectories. Junction points are
/// stored in both neighbouring sub-trajectories and emitted once when
/// concatenated.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub subs: [SubTrajectory; 3],
}

#[derive(Debug, Error)]
pub enum TrajectoryInvariantError {
    #[error("sub-trajectory {index} has stage {found}, expected {expected}")]
    StageOrder { index: usize, found: Stage, expected: Stage },
    #[error("{0} sub-trajectory is empty")]
    Empty(Stage),
    #[error("junction between {0} and {1} does not match")]
    Junction(Stage, Stage),
    #[error("trajectory does not return to the effector start")]
    NotClosed,
    #[error("non-finite waypoint in {0} sub-trajectory")]
    NonFinite(Stage),
}

impl Trajectory {
    pub fn sub(&self, stage: Stage) -> &SubTrajectory {
        &self.subs[stage.index()]
    }

    /// Checks stage order and the shared-junction invariants.
    pub fn validate(&self) -> Result<(), TrajectoryInvariantError> {
        for (i, (sub, expected)) in self.subs.iter().zip(Stage::ALL).enumerate() {
            if sub.stage != expected {
                return Err(TrajectoryInvariantError::StageOrder {
                    index: i,
                    found: sub.stage,
                    expected,
                });
            }
            if sub.points.is_empty() {
                return Err(TrajectoryInvariantError::Empty(sub.stage));
            }
            if sub.points.iter().any(|p| !p.iter().all(|c| c.is_finite())) {
                return Err(TrajectoryInvariantError::NonFinite(sub.stage));
            }
        }
        for w in self.subs.windows(2) {
            if w[0].last() != w[1].first() {
                return Err(TrajectoryInvariantError::Junction(w[0].stage, w[1].stage));
            }
        }
        if self.subs[0].first() != self.subs[2].last() {
            return Err(TrajectoryInvariantError::NotClosed);
        }
        Ok(())
    }

    /// P1 ∥ P2 ∥ P3 with each junction point emitted once.
    pub fn concatenated(&self) -> Vec<Vec3> {
        let mut out = self.subs[0].points.clone();
        for sub in &self.subs[1..] {
            out.extend_from_slice(&sub.points[1..]);
        }
        out
    }

    pub fn waypoint_count(&self) -> usize {
        self.subs.iter().map(|s| s.points.len()).sum::<usize>() - 2
    }
}

/// Voxel path returned by [`plan_segment`].
#[derive(Clone, Debug, PartialEq)]
pub struct SegmentPath {
    pub cells: Vec<Cell>,
    /// Path length in meters.
    pub cost: f64,
    /// Clearance requested but dropped to 0 because a keypoint sat inside
    /// the dilated obstacles.
    pub clearance_relaxed: bool,
}

/// Obstacles grown by `radius` voxels in Chebyshev distance.
pub fn dilate(grid: &OccupancyGrid, radius: usize) -> OccupancyGrid {
    if radius == 0 {
        return grid.clone();
    }
    let dims = grid.dims();
    let mut cur: Vec<bool> = grid.occupied().to_vec();
    let strides = [1, dims[0], dims[0] * dims[1]];
    for axis in 0..3 {
        let n = dims[axis];
        let mut next = vec![false; cur.len()];
        for i in 0..cur.len() {
            if !cur[i] {
                continue;
            }
            let along = (i / strides[axis]) % n;
            let lo = along.saturating_sub(radius);
            let hi = (along + radius).min(n - 1);
            let base = i - along * strides[axis];
            for k in lo..=hi {
                next[base + k * strides[axis]] = true;
            }
        }
        cur = next;
    }
    OccupancyGrid::from_fn(dims, *grid.bounds(), |c| {
        cur[c.x + dims[0] * (c.y + dims[1] * c.z)]
    })
    .expect("dims already validated")
}

#[derive(Clone, Copy, PartialEq)]
struct OpenNode {
    f: f64,
    h: f64,
    cell: Cell,
}

impl Eq for OpenNode {}

impl Ord for OpenNode {
    // BinaryHeap is a max-heap: invert so the smallest (f, h, cell) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.cell.cmp(&self.cell))
    }
}

impl PartialOrd for OpenNode {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn euclid(a: Cell, b: Cell) -> f64 {
    let dx = a.x as f64 - b.x as f64;
    let dy = a.y as f64 - b.y as f64;
    let dz = a.z as f64 - b.z as f64;
    (dx * dx + dy * dy + dz * dz).sqrt()
}

const STEP_COST: [f64; 4] = [0.0, 1.0, std::f64::consts::SQRT_2, 1.732_050_807_568_877_2];

/// A* on free voxels of `blocked` (true = blocked). Costs in voxel units.
fn astar(blocked: &OccupancyGrid, start: Cell, goal: Cell) -> Option<(Vec<Cell>, f64)> {
    let dims = blocked.dims();
    let n = blocked.len();
    let mut g = vec![f64::INFINITY; n];
    let mut parent = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();

    let si = blocked.index(start);
    g[si] = 0.0;
    let h0 = euclid(start, goal);
    open.push(OpenNode {
        f: h0,
        h: h0,
        cell: start,
    });

    while let Some(node) = open.pop() {
        let ci = blocked.index(node.cell);
        if closed[ci] {
            continue;
        }
        closed[ci] = true;
        if node.cell == goal {
            let mut cells = vec![goal];
            let mut i = ci;
            while parent[i] != u32::MAX {
                i = parent[i] as usize;
                cells.push(blocked.cell_of(i));
            }
            cells.reverse();
            return Some((cells, g[ci]));
        }
        let c = node.cell;
        for dz in -1i64..=1 {
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let moved = (dx != 0) as usize + (dy != 0) as usize + (dz != 0) as usize;
                    if moved == 0 {
                        continue;
                    }
                    let (x, y, z) = (c.x as i64 + dx, c.y as i64 + dy, c.z as i64 + dz);
                    if x < 0
                        || y < 0
                        || z < 0
                        || x >= dims[0] as i64
                        || y >= dims[1] as i64
                        || z >= dims[2] as i64
                    {
                        continue;
                    }
                    let nc = Cell::new(x as usize, y as usize, z as usize);
                    let ni = blocked.index(nc);
                    if closed[ni] || blocked.is_occupied(nc) {
                        continue;
                    }
                    let tentative = g[ci] + STEP_COST[moved];
                    if tentative < g[ni] {
                        g[ni] = tentative;
                        parent[ni] = ci as u32;
                        let h = euclid(nc, goal);
                        open.push(OpenNode {
                            f: tentative + h,
                            h,
                            cell: nc,
                        });
                    }
                }
            }
        }
    }
    None
}

/// Minimal-cost 26-connected voxel path from `start` to `goal`.
pub fn plan_segment(
    grid: &OccupancyGrid,
    start: Cell,
    goal: Cell,
    clearance_voxels: usize,
) -> Result<SegmentPath, SegmentError> {
    for c in [start, goal] {
        if !grid.contains(c) {
            return Err(SceneError::OutOfBounds([c.x as f64, c.y as f64, c.z as f64]).into());
        }
    }
    if grid.is_occupied(start) {
        return Err(SegmentError::StartOccupied(start));
    }
    if grid.is_occupied(goal) {
        return Err(SegmentError::GoalOccupied(goal));
    }

    let mut clearance_relaxed = false;
    let inflated;
    let blocked = if clearance_voxels > 0 {
        inflated = dilate(grid, clearance_voxels);
        if inflated.is_occupied(start) || inflated.is_occupied(goal) {
            clearance_relaxed = true;
            grid
        } else {
            &inflated
        }
    } else {
        grid
    };

    let (cells, cost) = astar(blocked, start, goal).ok_or(SegmentError::NoPath { start, goal })?;
    Ok(SegmentPath {
        cells,
        cost: cost * grid.voxel_size(),
        clearance_relaxed,
    })
}

/// World-space keypoints of a pick-and-place task.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Keypoints {
    pub effector: Vec3,
    pub object: Vec3,
    pub target: Vec3,
    pub grasp_offset: Option<Vec3>,
}

impl Keypoints {
    pub fn from_spec(spec: &SceneSpec) -> Self {
        Keypoints {
            effector: spec.effector_start,
            object: spec.object,
            target: spec.target,
            grasp_offset: spec.grasp_offset,
        }
    }

    /// Where the gripper closes: the object center, or the affordance point.
    pub fn grasp(&self) -> Vec3 {
        self.object + self.grasp_offset.unwrap_or_else(Vec3::zeros)
    }

    /// Start and goal of each stage.
    pub fn stage_endpoints(&self) -> [(Vec3, Vec3); 3] {
        [
            (self.effector, self.grasp()),
            (self.grasp(), self.target),
            (self.target, self.effector),
        ]
    }
}

/// Per-stage search metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePlanInfo {
    pub stage: Stage,
    pub voxels: usize,
    pub cost_m: f64,
    pub clearance_relaxed: bool,
}

fn to_sub(grid: &OccupancyGrid, stage: Stage, path: &SegmentPath, start: Vec3, goal: Vec3) -> SubTrajectory {
    let points = if path.cells.len() == 1 {
        if start == goal {
            vec![start]
        } else {
            vec![start, goal]
        }
    } else {
        let mut pts: Vec<Vec3> = path.cells.iter().map(|&c| grid.cell_center(c)).collect();
        pts[0] = start;
        *pts.last_mut().unwrap() = goal;
        pts
    };
    SubTrajectory { stage, points }
}

/// Runs A* for the approach, manipulate and back-idle stages and assembles
/// the initial trajectory. The exact world keypoints replace the snapped
/// voxel centers at both ends of each stage.
pub fn plan_three_stage(
    grid: &OccupancyGrid,
    keypoints: &Keypoints,
    clearance_voxels: usize,
) -> Result<(Trajectory, [StagePlanInfo; 3]), PlanError> {
    let endpoints = keypoints.stage_endpoints();
    let plan_one = |stage: Stage| -> Result<(SubTrajectory, StagePlanInfo), PlanError> {
        let tag = |source| PlanError { stage, source };
        let (start, goal) = endpoints[stage.index()];
        let sc = grid.world_to_grid(&start).map_err(|e| tag(e.into()))?;
        let gc = grid.world_to_grid(&goal).map_err(|e| tag(e.into()))?;
        let path = plan_segment(grid, sc, gc, clearance_voxels).map_err(tag)?;
        let info = StagePlanInfo {
            stage,
            voxels: path.cells.len(),
            cost_m: path.cost,
            clearance_relaxed: path.clearance_relaxed,
        };
        Ok((to_sub(grid, stage, &path, start, goal), info))
    };

    // Each stage is independent; results are placed by stage index.
    let results: Vec<_> = std::thread::scope(|s| {
        let handles: Vec<_> = Stage::ALL
            .iter()
            .map(|&stage| s.spawn(move || plan_one(stage)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("planner thread panicked")).collect()
    });
    let mut subs = Vec::with_capacity(3);
    let mut infos = Vec::with_capacity(3);
    for r in results {
        let (sub, info) = r?;
        subs.push(sub);
        infos.push(info);
    }
    let subs: [SubTrajectory; 3] = subs.try_into().unwrap();
    let infos: [StagePlanInfo; 3] = infos.try_into().unwrap();
    let traj = Trajectory { subs };
    debug_assert!(traj.validate().is_ok());
    Ok((traj, infos))
}
