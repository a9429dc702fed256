//! Self-test harness: runs the production code against the reference
//! implementations in [`oracles`] on seeded instances.

pub mod oracles;

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distance_field::{compute_edt, NO_OBSTACLE};
use crate::grid_planner::{plan_segment, Stage};
use crate::optimizer::{loss_acc, loss_col, loss_curv, loss_length};
use crate::pipeline::{run, RunBundle};
use crate::projection::{project_sphere, CameraModel, GuidanceMask, Projection, GRIPPER_CLOSED, GRIPPER_OPEN, PALETTE};
use crate::scenario;
use crate::scene::{Cell, GridBounds, OccupancyGrid};
use crate::time_alloc::{arc_length, speeds, GripperState};
use crate::Vec3;

/// Loss whose analytic gradient the fault hook corrupts.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossKind {
    Len,
    Acc,
    Curv,
    Col,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Len, LossKind::Acc, LossKind::Curv, LossKind::Col];

    pub fn as_str(self) -> &'static str {
        match self {
            LossKind::Len => "len",
            LossKind::Acc => "acc",
            LossKind::Curv => "curv",
            LossKind::Col => "col",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L_{}", self.as_str())
    }
}

impl FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown loss '{s}' (expected len, acc, curv or col)"))
    }
}

#[derive(Clone, Debug, Default)]
pub struct CheckOptions {
    pub seed: u64,
    /// Test hook: scale this loss's analytic gradient before comparing.
    pub fault: Option<LossKind>,
}

#[derive(Clone, Debug)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed: Duration,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}. {}: {} ({:.2} s)",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.elapsed.as_secs_f64()
        )
    }
}

#[derive(Clone, Debug)]
pub struct CheckReport {
    pub results: Vec<CriterionResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }
}

fn timed(id: u8, name: &'static str, f: impl FnOnce() -> (bool, String)) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = f();
    CriterionResult {
        id,
        name,
        passed,
        detail,
        elapsed: start.elapsed(),
    }
}

/// Runs every oracle comparison. The sink scenario is run once and shared
/// by the behavioral checks.
pub fn run_checks(opts: &CheckOptions) -> CheckReport {
    let mut results = vec![
        timed(1, "EDT exactness", || check_edt(opts.seed)),
        timed(2, "A* optimality", || check_astar(opts.seed)),
        timed(3, "gradient correctness", || check_gradients(opts.seed, opts.fault)),
        timed(4, "circle curvature", check_circle_curvature),
    ];
    let start = Instant::now();
    let bundle = run(&scenario::sink());
    let shared = start.elapsed();
    match bundle {
        Ok(b) => {
            let mut r5 = timed(5, "sink obstacle avoidance", || check_sink(&b));
            r5.elapsed += shared;
            results.push(r5);
            results.push(timed(6, "sine time reallocation", || check_reallocation(&b)));
            results.push(timed(7, "projection fidelity", || check_projection(opts.seed)));
            results.push(timed(8, "mask contract", || check_masks(&b)));
        }
        Err(e) => {
            for (id, name) in [(5, "sink obstacle avoidance"), (6, "sine time reallocation"), (8, "mask contract")] {
                results.push(CriterionResult {
                    id,
                    name,
                    passed: false,
                    detail: format!("sink pipeline failed: {e}"),
                    elapsed: shared,
                });
            }
            results.push(timed(7, "projection fidelity", || check_projection(opts.seed)));
            results.sort_by_key(|r| r.id);
        }
    }
    CheckReport { results }
}

fn random_grid(rng: &mut ChaCha8Rng, dims: [usize; 3], fill: f64, voxel: f64) -> OccupancyGrid {
    let bounds = GridBounds::new(Vec3::zeros(), voxel).unwrap();
    OccupancyGrid::from_fn(dims, bounds, |_| rng.gen_bool(fill)).unwrap()
}

/// 100 random grids up to 16³ against brute force, in squared voxels.
pub fn check_edt(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xed7);
    let mut mismatches = 0;
    let mut voxels = 0;
    for _ in 0..100 {
        let dims = [0; 3].map(|_| rng.gen_range(1..=16));
        let fill = rng.gen_range(0.0..0.5);
        let grid = random_grid(&mut rng, dims, fill, 1.0);
        let field = compute_edt(&grid);
        let oracle = oracles::brute_force_squared_edt(&grid);
        for (i, want) in oracle.iter().enumerate() {
            let got = field.squared_voxels(grid.cell_of(i));
            if got != want.unwrap_or(NO_OBSTACLE) {
                mismatches += 1;
            }
        }
        voxels += grid.len();
    }
    (mismatches == 0, format!("{mismatches} mismatching voxels of {voxels}"))
}

/// 50 random 10³ grids at 30% fill: A* cost against Dijkstra, paths free
/// and 26-connected.
pub fn check_astar(seed: u64) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xa57a);
    let mut worst = 0.0f64;
    let mut failures = Vec::new();
    let mut solved = 0;
    for trial in 0..50 {
        let mut grid = random_grid(&mut rng, [10; 3], 0.3, 1.0);
        let mut cell = || Cell::new(rng.gen_range(0..10), rng.gen_range(0..10), rng.gen_range(0..10));
        let (s, g) = (cell(), cell());
        grid.set(s, false);
        grid.set(g, false);
        let oracle = oracles::dijkstra_cost(&|c| !grid.is_occupied(c), [10; 3], s, g);
        match (plan_segment(&grid, s, g, 0), oracle) {
            (Ok(path), Some(want)) => {
                solved += 1;
                worst = worst.max((path.cost - want).abs());
                let free = path.cells.iter().all(|&c| !grid.is_occupied(c));
                let connected = path.cells.windows(2).all(|w| {
                    let d = [0, 1, 2].map(|a| w[0].as_array()[a].abs_diff(w[1].as_array()[a]));
                    d.iter().all(|&x| x <= 1) && d.contains(&1)
                });
                let ends = path.cells.first() == Some(&s) && path.cells.last() == Some(&g);
                if !(free && connected && ends) || (path.cost - want).abs() > 1e-9 {
                    failures.push(trial);
                }
            }
            (Err(_), None) => {}
            _ => failures.push(trial),
        }
    }
    (
        failures.is_empty(),
        format!("{solved} solvable, max |cost − oracle| {worst:.2e}, failing trials {failures:?}"),
    )
}

/// Analytic against central-difference gradients on 100 random 20-point
/// trajectories per loss.
pub fn check_gradients(seed: u64, fault: Option<LossKind>) -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x96ad);
    let voxel = 1.0 / 16.0;
    let grid = random_grid(&mut rng, [16; 3], 0.08, voxel);
    let field = compute_edt(&grid);
    let d_safe = 0.15;
    let eps = 1e-6;
    let mut worst = [0.0f64; 4];
    for _ in 0..100 {
        let pts: Vec<Vec3> = (0..20)
            .map(|_| Vec3::from_fn(|_, _| rng.gen_range(0.5 * voxel..1.0 - 0.5 * voxel)))
            .collect();
        for (k, kind) in LossKind::ALL.into_iter().enumerate() {
            let f = |p: &[Vec3]| match kind {
                LossKind::Len => loss_length(p),
                LossKind::Acc => loss_acc(p),
                LossKind::Curv => loss_curv(p, eps),
                LossKind::Col => loss_col(p, &field, d_safe),
            };
            let (_, mut analytic) = f(&pts);
            if fault == Some(kind) {
                for g in &mut analytic {
                    *g *= 1.01;
                }
            }
            let h = if kind == LossKind::Col { 1e-7 } else { 1e-6 };
            let numeric = oracles::waypoint_gradient(|p| f(p).0, &pts, h);
            worst[k] = worst[k].max(oracles::max_relative_error(&analytic, &numeric, 1e-12));
        }
    }
    let tol = [1e-4, 1e-4, 1e-4, 1e-3];
    let failing: Vec<String> = LossKind::ALL
        .iter()
        .zip(worst.iter().zip(tol))
        .filter(|(_, (w, t))| !(**w < *t))
        .map(|(k, _)| k.to_string())
        .collect();
    let summary = LossKind::ALL
        .iter()
        .zip(worst)
        .map(|(k, w)| format!("{k} {w:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    if failing.is_empty() {
        (true, format!("max relative error {summary}"))
    } else {
        (false, format!("gradient mismatch in {}: {summary}", failing.join(", ")))
    }
}

/// Curvature loss on sampled circles against ½(N − 2)/R².
pub fn check_circle_curvature() -> (bool, String) {
    let n = 50;
    let theta = 0.02;
    let mut worst = 0.0f64;
    for r in [0.5, 1.0, 2.0] {
        let pts: Vec<Vec3> = (0..n)
            .map(|i| {
                let a = i as f64 * theta;
                Vec3::new(r * a.cos(), r * a.sin(), 0.0)
            })
            .collect();
        let want = 0.5 * (n - 2) as f64 / (r * r);
        let (got, _) = loss_curv(&pts, 1e-6);
        worst = worst.max((got - want).abs() / want);
    }
    (worst < 0.02, format!("max relative error {worst:.2e}"))
}

fn interior(points: &[Vec3]) -> &[Vec3] {
    &points[1..points.len() - 1]
}

/// Sink template: the initial carry path violates d_safe, the optimized
/// one clears it by lifting over the rim.
pub fn check_sink(b: &RunBundle) -> (bool, String) {
    let sc = &b.scenario;
    let grid = match sc.build_grid(std::path::Path::new(".")) {
        Ok(g) => g,
        Err(e) => return (false, e.to_string()),
    };
    let field = compute_edt(&grid);
    let sample = |p: &Vec3| oracles::trilinear(field.values(), grid.dims(), grid.bounds(), p);
    let min_clear = |pts: &[Vec3]| interior(pts).iter().map(sample).fold(f64::INFINITY, f64::min);
    let d_safe = sc.planner.d_safe_m;
    let p0 = &b.initial.sub(Stage::Manipulate).points;
    let p1 = &b.optimized.sub(Stage::Manipulate).points;
    let before = min_clear(p0);
    let after = b
        .optimized
        .subs
        .iter()
        .map(|s| min_clear(&s.points))
        .fold(f64::INFINITY, f64::min);
    let same = |a: Vec3, o: Vec3| a.iter().zip(o.iter()).all(|(x, y)| x.to_bits() == y.to_bits());
    let endpoints = b
        .initial
        .subs
        .iter()
        .zip(&b.optimized.subs)
        .all(|(a, o)| same(a.first(), o.first()) && same(a.last(), o.last()));
    let (l0, l1) = (b.losses.before.total, b.losses.after.total);
    let max_z = |pts: &[Vec3]| pts.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
    let (z0, z1) = (max_z(p0), max_z(p1));
    let ok = before < d_safe && after >= d_safe - 1e-6 && endpoints && l1 < l0 && z1 > z0;
    (
        ok,
        format!(
            "P2 clearance {before:.4} -> {after:.4} m (d_safe {d_safe:.4}), objective {l0:.3} -> {l1:.3}, \
             P2 max z {z0:.4} -> {z1:.4}, endpoints fixed: {endpoints}"
        ),
    )
}

/// Sine profile per stage, frame shares and arc-length preservation.
pub fn check_reallocation(b: &RunBundle) -> (bool, String) {
    let timed = &b.timed_optimized.timed;
    let mut worst = 0.0f64;
    let mut counts = [0usize; 3];
    for st in Stage::ALL {
        let Some(span) = timed.stage_span(st) else {
            return (false, format!("no {st} frames"));
        };
        let pts: Vec<Vec3> = span.map(|k| timed.frames[k].position).collect();
        counts[st.index()] = pts.len();
        let sp = speeds(&pts);
        let m = sp.len() as f64;
        let peak = sp.iter().copied().fold(0.0, f64::max);
        for (k, s) in sp.iter().enumerate() {
            let want = (std::f64::consts::PI * (k as f64 + 0.5) / m).sin();
            worst = worst.max((s / peak - want).abs());
        }
    }
    let lengths = Stage::ALL.map(|s| arc_length(&b.optimized.sub(s).points));
    let total: f64 = lengths.iter().sum();
    let pool = timed.len() + 2;
    let share_ok = (0..3).all(|i| (counts[i] as f64 - pool as f64 * lengths[i] / total).abs() <= 1.0);
    let frames_len = arc_length(&timed.positions());
    let drift = (frames_len - total).abs() / total;
    (
        worst < 0.05 && share_ok && drift < 0.01,
        format!(
            "max |speed − sine| {worst:.4}, stage frames {counts:?} for shares {:?}, arc length drift {:.3}%",
            lengths.map(|l| (pool as f64 * l / total * 100.0).round() / 100.0),
            drift * 100.0
        ),
    )
}

/// The default scenario camera with the identity pose.
fn projection_camera() -> CameraModel {
    let c = scenario::sink().camera;
    CameraModel::new([c.fx_px, c.fy_px, c.cx_px, c.cy_px], (c.width_px, c.height_px), Matrix3::identity(), Vec3::zeros())
        .expect("default camera is valid")
}

/// 200 random spheres with Z > 4R: pooled IoU of the rasterized circles
/// against per-pixel ray casting, plus the exact on-axis case.
pub fn check_projection(seed: u64) -> (bool, String) {
    let cam = projection_camera();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e0);
    let (mut inter, mut union) = (0usize, 0usize);
    let mut ious = Vec::with_capacity(200);
    for _ in 0..200 {
        let r = rng.gen_range(0.05..0.3);
        let z = r * rng.gen_range(4.0..20.0f64).max(4.0 + 1e-9);
        let u = rng.gen_range(0.0..(cam.width - 1) as f64);
        let v = rng.gen_range(0.0..(cam.height - 1) as f64);
        let center = cam.unproject(u, v, z);
        let mut mask = GuidanceMask::blank(cam.width, cam.height);
        mask.draw_sphere(&cam, &center, r, 255);
        let raster: Vec<bool> = mask.pixels.iter().map(|&p| p != 0).collect();
        let oracle = oracles::ray_sphere_mask(&cam, &center, r);
        inter += raster.iter().zip(&oracle).filter(|(a, b)| **a && **b).count();
        union += raster.iter().zip(&oracle).filter(|(a, b)| **a || **b).count();
        ious.push(oracles::iou(&raster, &oracle));
    }
    let pooled = inter as f64 / union as f64;
    let mean = ious.iter().sum::<f64>() / ious.len() as f64;
    let min = ious.iter().copied().fold(1.0, f64::min);

    let on_axis = CameraModel::new([500.0, 500.0, 320.0, 240.0], (640, 480), Matrix3::identity(), Vec3::zeros()).unwrap();
    let exact = project_sphere(&on_axis, &Vec3::new(0.0, 0.0, 2.0), 0.1)
        == Projection::Circle {
            u: 320.0,
            v: 240.0,
            r_px: 25.0,
        };
    (
        pooled >= 0.95 && exact,
        format!("pooled IoU {pooled:.4} (mean {mean:.4}, min {min:.4}), on-axis exact: {exact}"),
    )
}

/// Sink masks: palette closure, gripper transitions at the junction
/// frames, blank first frame, and a per-pixel two-actor oracle.
pub fn check_masks(b: &RunBundle) -> (bool, String) {
    let masks = &b.masks;
    let timed = &b.timed_optimized.timed;
    let spec = &b.scenario.scene.spec;
    let palette = masks.iter().all(|m| m.pixels.iter().all(|p| PALETTE.contains(p)));
    let first = masks[0].keep_first_frame && masks[0].pixels.iter().all(|&p| p == 0);

    let grasp = timed.stage_start(Stage::Manipulate);
    let release = timed.stage_start(Stage::BackIdle);
    let mut labels = Vec::new();
    for (k, m) in masks.iter().enumerate().skip(1) {
        let open = m.pixels.contains(&GRIPPER_OPEN);
        let closed = m.pixels.contains(&GRIPPER_CLOSED);
        match (open, closed) {
            (true, false) => labels.push((k, GripperState::Open)),
            (false, true) => labels.push((k, GripperState::Closed)),
            (false, false) => {}
            (true, true) => return (false, format!("frame {k} shows both gripper states")),
        }
    }
    let transitions: Vec<(usize, GripperState)> = labels
        .windows(2)
        .filter(|w| w[0].1 != w[1].1)
        .map(|w| (w[1].0, w[1].1))
        .collect();
    let transitions_ok = transitions.len() == 2
        && Some(transitions[0].0) == grasp
        && transitions[0].1 == GripperState::Closed
        && Some(transitions[1].0) == release
        && transitions[1].1 == GripperState::Open;

    let (Some(g), Some(r)) = (grasp, release) else {
        return (false, "missing stage junctions".into());
    };
    let offset = spec.grasp_offset();
    let mut mismatched = 0;
    for (k, m) in masks.iter().enumerate().skip(1) {
        let effector = timed.frames[k].position;
        let object = if k < g {
            spec.object
        } else {
            timed.frames[k.min(r)].position - offset
        };
        let label = if (g..r).contains(&k) { GRIPPER_CLOSED } else { GRIPPER_OPEN };
        let want = oracles::two_actor_mask(&b.camera, (&object, b.object.radius), (&effector, b.gripper.radius), label);
        mismatched += want.iter().zip(&m.pixels).filter(|(a, b)| a != b).count();
    }
    let foreground: usize = masks.iter().map(|m| m.pixels.iter().filter(|&&p| p != 0).count()).sum();
    (
        palette && first && transitions_ok && mismatched == 0,
        format!(
            "{} frames, palette closed: {palette}, frame 0 blank+kept: {first}, transitions {transitions:?} \
             (junctions {g}, {r}), {mismatched} pixel mismatches over {foreground} foreground pixels",
            masks.len()
        ),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loss_names_parse() {
        for k in LossKind::ALL {
            assert_eq!(k.as_str().parse::<LossKind>().unwrap(), k);
        }
        assert!("jerk".parse::<LossKind>().is_err());
    }

    #[test]
    fn injected_fault_is_named() {
        let (ok, detail) = check_gradients(0, Some(LossKind::Curv));
        assert!(!ok);
        assert!(detail.contains("L_curv"), "{detail}");
        assert!(!detail.contains("mismatch in L_len"));
    }

    #[test]
    fn oracle_projection_agrees_with_production() {
        let cam = scenario::sink().camera.model().unwrap();
        let p = Vec3::new(0.4, 0.6, 0.3);
        let Projection::Circle { u, v, r_px } = project_sphere(&cam, &p, 0.05) else { panic!() };
        let (ou, ov, or) = oracles::project_circle(&cam, &p, 0.05).unwrap();
        assert!((u - ou).abs() < 1e-9 && (v - ov).abs() < 1e-9 && (r_px - or).abs() < 1e-12);
    }
}
