//! One deterministic run: scene, distance field, A*, optimization, time
//! reallocation and mask rendering, with each handoff re-validated.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::distance_field::{compute_edt, DistanceField};
use crate::grid_planner::{plan_three_stage, Keypoints, SegmentError, Stage, StagePlanInfo, Trajectory};
use crate::optimizer::{optimize_trajectory, LossReport, OptimizeError};
use crate::projection::{
    object_depth_offset, render_guidance_masks, write_masks, CameraModel, GuidanceMask,
    SphereActor,
};
use crate::scenario::{Scenario, ScenarioError};
use crate::scene::GridBounds;
use crate::time_alloc::{
    assemble, index_time_resample, reallocate, speeds, GripperState, Reallocation, TimeAllocError,
    TimedTrajectory,
};
use crate::Vec3;

/// Where in the chain a run failed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PipelineStage {
    Scenario,
    Scene,
    DistanceField,
    Plan(Stage),
    Optimize(Stage),
    TimeAlloc,
    Render,
    Bundle,
}

impl fmt::Display for PipelineStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineStage::Scenario => f.write_str("scenario"),
            PipelineStage::Scene => f.write_str("scene"),
            PipelineStage::DistanceField => f.write_str("edt"),
            PipelineStage::Plan(s) => write!(f, "plan.{s}"),
            PipelineStage::Optimize(s) => write!(f, "optimize.{s}"),
            PipelineStage::TimeAlloc => f.write_str("time_alloc"),
            PipelineStage::Render => f.write_str("render"),
            PipelineStage::Bundle => f.write_str("bundle"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorKind {
    Parse,
    InvalidInput,
    NoPath,
    NonFinite,
    Render,
    Invariant,
    Io,
}

impl ErrorKind {
    pub fn code(self) -> &'static str {
        match self {
            ErrorKind::Parse => "parse",
            ErrorKind::InvalidInput => "invalid_input",
            ErrorKind::NoPath => "no_path",
            ErrorKind::NonFinite => "non_finite",
            ErrorKind::Render => "render",
            ErrorKind::Invariant => "invariant",
            ErrorKind::Io => "io",
        }
    }

    /// Process exit status for the command-line front end.
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Parse | ErrorKind::InvalidInput => 2,
            ErrorKind::NoPath => 3,
            ErrorKind::NonFinite => 4,
            ErrorKind::Render => 5,
            ErrorKind::Invariant | ErrorKind::Io => 1,
        }
    }
}

#[derive(Debug, Error)]
#[error("error:{stage}:{}: {message}", kind.code())]
pub struct PipelineError {
    pub stage: PipelineStage,
    pub kind: ErrorKind,
    pub message: String,
}

impl PipelineError {
    pub fn new(stage: PipelineStage, kind: ErrorKind, message: impl fmt::Display) -> Self {
        PipelineError {
            stage,
            kind,
            message: message.to_string(),
        }
    }
}

impl From<ScenarioError> for PipelineError {
    fn from(e: ScenarioError) -> Self {
        let kind = match e {
            ScenarioError::Parse(_) => ErrorKind::Parse,
            ScenarioError::Io { .. } | ScenarioError::Serialize(_) => ErrorKind::Io,
            _ => ErrorKind::InvalidInput,
        };
        let stage = match e {
            ScenarioError::Scene(_) => PipelineStage::Scene,
            _ => PipelineStage::Scenario,
        };
        PipelineError::new(stage, kind, e)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClearanceStats {
    pub min_m: f64,
    pub mean_m: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageClearance {
    pub stage: Stage,
    pub before: ClearanceStats,
    pub after: ClearanceStats,
}

/// Distance-field samples over the interior waypoints (all waypoints when
/// there is no interior).
pub fn clearance_stats(points: &[Vec3], field: &DistanceField) -> ClearanceStats {
    let pts = if points.len() > 2 { &points[1..points.len() - 1] } else { points };
    let d: Vec<f64> = pts.iter().map(|p| field.sample(p)).collect();
    ClearanceStats {
        min_m: d.iter().copied().fold(f64::INFINITY, f64::min),
        mean_m: d.iter().sum::<f64>() / d.len() as f64,
    }
}

/// Everything a run produces, in memory.
#[derive(Clone, Debug)]
pub struct RunBundle {
    pub scenario: Scenario,
    pub camera: CameraModel,
    pub grid_dims: [usize; 3],
    pub grid_bounds: GridBounds,
    pub occupied_voxels: usize,
    pub sentinel_m: f64,
    pub plan: [StagePlanInfo; 3],
    pub initial: Trajectory,
    pub optimized: Trajectory,
    /// Initial A* path reallocated with its own frame shares.
    pub timed_initial: Reallocation,
    pub timed_optimized: Reallocation,
    /// Initial path resampled with the optimized frame shares, giving each
    /// optimized frame its pre-optimization counterpart.
    pub pre_optimization: TimedTrajectory,
    pub losses: LossReport,
    pub clearance: [StageClearance; 3],
    /// Per-step displacement of the optimized path played back one
    /// waypoint per time step.
    pub speeds_before: Vec<f64>,
    pub speeds_after: Vec<f64>,
    pub grasp_frame: usize,
    pub release_frame: usize,
    pub object: SphereActor,
    pub gripper: SphereActor,
    /// Largest disagreement between the effector-based depth estimate and
    /// the true object depth change.
    pub depth_check_m: f64,
    pub masks: Vec<GuidanceMask>,
}

pub fn run(scenario: &Scenario) -> Result<RunBundle, PipelineError> {
    run_in(scenario, Path::new("."))
}

/// Runs a scenario; relative point-cloud paths resolve against `base_dir`.
pub fn run_in(scenario: &Scenario, base_dir: &Path) -> Result<RunBundle, PipelineError> {
    use PipelineStage as S;
    let invariant = |stage, m: String| PipelineError::new(stage, ErrorKind::Invariant, m);

    scenario.validate()?;
    let camera = scenario
        .camera
        .model()
        .map_err(|e| PipelineError::new(S::Scenario, ErrorKind::InvalidInput, e))?;

    let grid = scenario.build_grid(base_dir)?;
    let field = compute_edt(&grid);
    if field.dims() != grid.dims() || field.values().iter().any(|d| !(*d >= 0.0)) {
        return Err(invariant(S::DistanceField, "distance field does not match the grid".into()));
    }

    let spec = &scenario.scene.spec;
    let config = &scenario.planner;
    let keypoints = Keypoints::from_spec(spec);
    let (initial, plan) = plan_three_stage(&grid, &keypoints, config.clearance_voxels).map_err(|e| {
        let kind = match e.source {
            SegmentError::Scene(_) => ErrorKind::InvalidInput,
            _ => ErrorKind::NoPath,
        };
        PipelineError::new(S::Plan(e.stage), kind, &e.source)
    })?;
    initial
        .validate()
        .map_err(|e| invariant(S::Plan(Stage::Approach), e.to_string()))?;

    let (optimized, losses) = optimize_trajectory(&initial, &field, config).map_err(|e| match e {
        OptimizeError::NonFiniteLoss { stage, .. } => PipelineError::new(S::Optimize(stage), ErrorKind::NonFinite, &e),
        OptimizeError::InvalidConfig(_) => PipelineError::new(S::Scenario, ErrorKind::InvalidInput, &e),
    })?;
    optimized
        .validate()
        .map_err(|e| invariant(S::Optimize(Stage::Approach), e.to_string()))?;
    for (a, b) in initial.subs.iter().zip(&optimized.subs) {
        if a.first() != b.first() || a.last() != b.last() || a.points.len() != b.points.len() {
            return Err(invariant(S::Optimize(a.stage), "optimizer moved an endpoint".into()));
        }
    }

    let frames = scenario.timing.total_frames;
    let profile = scenario.timing.profile;
    let time_err = |e: TimeAllocError| PipelineError::new(S::TimeAlloc, ErrorKind::InvalidInput, e);
    let timed_initial = reallocate(&initial, frames, profile).map_err(time_err)?;
    let timed_optimized = reallocate(&optimized, frames, profile).map_err(time_err)?;
    let pre_optimization = assemble(&initial, timed_optimized.counts, profile).map_err(time_err)?;
    for t in [&timed_initial.timed, &timed_optimized.timed, &pre_optimization] {
        t.validate().map_err(|m| invariant(S::TimeAlloc, m))?;
        if t.len() != frames {
            return Err(invariant(S::TimeAlloc, format!("expected {frames} frames, got {}", t.len())));
        }
    }

    let clearance = Stage::ALL.map(|stage| StageClearance {
        stage,
        before: clearance_stats(&initial.sub(stage).points, &field),
        after: clearance_stats(&optimized.sub(stage).points, &field),
    });
    let speeds_before = speeds(&index_time_resample(&optimized.concatenated(), frames));
    let speeds_after = timed_optimized.timed.speeds();

    let timed = &timed_optimized.timed;
    let positions = timed.positions();
    let grasp_frame = timed
        .stage_start(Stage::Manipulate)
        .ok_or_else(|| invariant(S::TimeAlloc, "no manipulate frames".into()))?;
    let release_frame = timed
        .stage_start(Stage::BackIdle)
        .ok_or_else(|| invariant(S::TimeAlloc, "no back-idle frames".into()))?;
    let offset = spec.grasp_offset();
    let object_centers: Vec<Vec3> = (0..positions.len())
        .map(|k| {
            if k < grasp_frame {
                spec.object
            } else {
                positions[k.min(release_frame)] - offset
            }
        })
        .collect();
    let estimated = object_depth_offset(&camera, &positions, grasp_frame, Some(release_frame));
    let rest_depth = camera.depth(&spec.object);
    let depth_check_m = object_centers
        .iter()
        .zip(&estimated)
        .map(|(c, e)| (camera.depth(c) - rest_depth - e).abs())
        .fold(0.0, f64::max);

    let render_err = |e| PipelineError::new(S::Render, ErrorKind::Render, e);
    let object = SphereActor::object(&spec.object_extent, object_centers).map_err(render_err)?;
    let object = match scenario.actors.object_radius_m {
        Some(r) => SphereActor { radius: r, ..object },
        None => object,
    };
    let gripper = SphereActor::gripper(scenario.actors.gripper_radius_m, positions).map_err(render_err)?;
    let masks = render_guidance_masks(timed, &object, &gripper, &camera).map_err(render_err)?;
    if masks.len() != frames || !masks.iter().all(|m| m.only_palette_values()) {
        return Err(invariant(S::Render, "mask set violates the palette or frame count".into()));
    }

    Ok(RunBundle {
        scenario: scenario.clone(),
        camera,
        grid_dims: grid.dims(),
        grid_bounds: *grid.bounds(),
        occupied_voxels: grid.occupied_count(),
        sentinel_m: field.sentinel(),
        plan,
        initial,
        optimized,
        timed_initial,
        timed_optimized,
        pre_optimization,
        losses,
        clearance,
        speeds_before,
        speeds_after,
        grasp_frame,
        release_frame,
        object,
        gripper,
        depth_check_m,
        masks,
    })
}

/// One line of `trajectory_*.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame: usize,
    pub stage: Stage,
    pub gripper: GripperState,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_x: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_y: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pre_z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMetrics {
    pub dims: [usize; 3],
    pub min_corner_m: Vec3,
    pub voxel_size_m: f64,
    pub occupied_voxels: usize,
    pub sentinel_m: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingMetrics {
    pub total_frames: usize,
    pub profile: String,
    /// Frames per stage counting both ends; junctions are shared.
    pub stage_frames: [usize; 3],
    pub stage_lengths_m: [f64; 3],
    pub arc_length_path_m: f64,
    pub arc_length_frames_m: f64,
    pub grasp_frame: usize,
    pub release_frame: usize,
}

/// Contents of `metrics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub scenario: String,
    pub grid: GridMetrics,
    pub d_safe_m: f64,
    pub plan: Vec<StagePlanInfo>,
    pub losses: LossReport,
    pub clearance: Vec<StageClearance>,
    pub timing: TimingMetrics,
    pub object_depth_check_m: f64,
}

/// One row of `speeds.csv`. `step` k joins frames k and k+1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpeedRow {
    pub step: usize,
    pub stage: Stage,
    pub speed_before_m: f64,
    pub speed_after_m: f64,
    /// After-reallocation speed divided by its stage maximum.
    pub speed_after_normalized: f64,
}

/// Bundle index: the files written and the frame count they agree on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub format: u32,
    pub scenario: String,
    pub frame_count: usize,
    pub files: Vec<String>,
}

pub const BUNDLE_FORMAT: u32 = 1;

impl RunBundle {
    pub fn metrics(&self) -> Metrics {
        let g = self.timed_optimized.timed.positions();
        Metrics {
            scenario: self.scenario.name.clone(),
            grid: GridMetrics {
                dims: self.grid_dims,
                min_corner_m: self.grid_bounds.min_corner,
                voxel_size_m: self.grid_bounds.voxel_size,
                occupied_voxels: self.occupied_voxels,
                sentinel_m: self.sentinel_m,
            },
            d_safe_m: self.scenario.planner.d_safe_m,
            plan: self.plan.to_vec(),
            losses: self.losses.clone(),
            clearance: self.clearance.to_vec(),
            timing: TimingMetrics {
                total_frames: self.scenario.timing.total_frames,
                profile: self.scenario.timing.profile.as_str().into(),
                stage_frames: self.timed_optimized.counts,
                stage_lengths_m: self.timed_optimized.lengths,
                arc_length_path_m: self.timed_optimized.lengths.iter().sum(),
                arc_length_frames_m: crate::time_alloc::arc_length(&g),
                grasp_frame: self.grasp_frame,
                release_frame: self.release_frame,
            },
            object_depth_check_m: self.depth_check_m,
        }
    }

    pub fn speed_rows(&self) -> Vec<SpeedRow> {
        let frames = &self.timed_optimized.timed.frames;
        let mut stage_max = [0.0f64; 3];
        for (k, s) in self.speeds_after.iter().enumerate() {
            let i = frames[k].stage.index();
            stage_max[i] = stage_max[i].max(*s);
        }
        self.speeds_after
            .iter()
            .enumerate()
            .map(|(k, &after)| {
                let stage = frames[k].stage;
                let peak = stage_max[stage.index()];
                SpeedRow {
                    step: k,
                    stage,
                    speed_before_m: self.speeds_before[k],
                    speed_after_m: after,
                    speed_after_normalized: if peak > 0.0 { after / peak } else { 0.0 },
                }
            })
            .collect()
    }

    pub fn frame_records(timed: &TimedTrajectory, pre: Option<&TimedTrajectory>) -> Vec<FrameRecord> {
        timed
            .frames
            .iter()
            .enumerate()
            .map(|(k, f)| {
                let p = pre.map(|t| t.frames[k].position);
                FrameRecord {
                    frame: f.index,
                    stage: f.stage,
                    gripper: f.gripper,
                    x: f.position.x,
                    y: f.position.y,
                    z: f.position.z,
                    pre_x: p.map(|p| p.x),
                    pre_y: p.map(|p| p.y),
                    pre_z: p.map(|p| p.z),
                }
            })
            .collect()
    }

    /// Writes the bundle directory. Every file is a pure function of the
    /// bundle contents, so identical runs give identical bytes.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<BundleManifest, PipelineError> {
        let dir = dir.as_ref();
        let io = |e: &dyn fmt::Display| PipelineError::new(PipelineStage::Bundle, ErrorKind::Io, e);
        fs::create_dir_all(dir).map_err(|e| io(&e))?;
        let put = |name: &str, bytes: &[u8]| fs::write(dir.join(name), bytes).map_err(|e| io(&e));

        put("scenario.toml", self.scenario.to_toml_string().map_err(|e| io(&e))?.as_bytes())?;
        let jsonl = |records: Vec<FrameRecord>| -> Result<String, PipelineError> {
            let mut out = String::new();
            for r in records {
                out += &serde_json::to_string(&r).map_err(|e| io(&e))?;
                out.push('\n');
            }
            Ok(out)
        };
        put(
            "trajectory_initial.jsonl",
            jsonl(Self::frame_records(&self.timed_initial.timed, None))?.as_bytes(),
        )?;
        put(
            "trajectory_optimized.jsonl",
            jsonl(Self::frame_records(&self.timed_optimized.timed, Some(&self.pre_optimization)))?.as_bytes(),
        )?;
        let metrics = serde_json::to_string_pretty(&self.metrics()).map_err(|e| io(&e))? + "\n";
        put("metrics.json", metrics.as_bytes())?;

        let mut w = csv::Writer::from_writer(Vec::new());
        for row in self.speed_rows() {
            w.serialize(row).map_err(|e| io(&e))?;
        }
        put("speeds.csv", &w.into_inner().map_err(|e| io(&e))?)?;

        write_masks(dir.join("masks"), &self.masks, &self.camera, &self.object, &self.gripper)
            .map_err(|e| PipelineError::new(PipelineStage::Render, ErrorKind::Render, e))?;

        let manifest = BundleManifest {
            format: BUNDLE_FORMAT,
            scenario: self.scenario.name.clone(),
            frame_count: self.masks.len(),
            files: [
                "scenario.toml",
                "trajectory_initial.jsonl",
                "trajectory_optimized.jsonl",
                "metrics.json",
                "speeds.csv",
                "masks/manifest.json",
            ]
            .map(String::from)
            .to_vec(),
        };
        put(
            "manifest.json",
            (serde_json::to_string_pretty(&manifest).map_err(|e| io(&e))? + "\n").as_bytes(),
        )?;
        Ok(manifest)
    }
}

/// Bundle read back from disk, as consumed by reports.
#[derive(Clone, Debug, PartialEq)]
pub struct LoadedBundle {
    pub dir: PathBuf,
    pub manifest: BundleManifest,
    pub metrics: Metrics,
    pub speeds: Vec<SpeedRow>,
    pub initial: Vec<FrameRecord>,
    pub optimized: Vec<FrameRecord>,
}

#[derive(Debug, Error)]
#[error("corrupt bundle {path}: {message}")]
pub struct BundleError {
    pub path: PathBuf,
    pub message: String,
}

/// Reads a bundle directory and cross-checks its frame counts.
pub fn load_bundle(dir: impl AsRef<Path>) -> Result<LoadedBundle, BundleError> {
    let dir = dir.as_ref();
    let fail = |file: &str, m: &dyn fmt::Display| BundleError {
        path: dir.join(file),
        message: m.to_string(),
    };
    let read = |file: &str| fs::read_to_string(dir.join(file)).map_err(|e| fail(file, &e));

    let manifest: BundleManifest =
        serde_json::from_str(&read("manifest.json")?).map_err(|e| fail("manifest.json", &e))?;
    if manifest.format != BUNDLE_FORMAT {
        return Err(fail("manifest.json", &format!("unsupported format {}", manifest.format)));
    }
    for f in &manifest.files {
        if !dir.join(f).is_file() {
            return Err(fail(f, &"listed in the manifest but missing"));
        }
    }
    let metrics: Metrics = serde_json::from_str(&read("metrics.json")?).map_err(|e| fail("metrics.json", &e))?;
    let mut speeds = Vec::new();
    let text = read("speeds.csv")?;
    for row in csv::Reader::from_reader(text.as_bytes()).deserialize() {
        speeds.push(row.map_err(|e| fail("speeds.csv", &e))?);
    }
    let records = |file: &str| -> Result<Vec<FrameRecord>, BundleError> {
        read(file)?
            .lines()
            .map(|l| serde_json::from_str(l).map_err(|e| fail(file, &e)))
            .collect()
    };
    let initial = records("trajectory_initial.jsonl")?;
    let optimized = records("trajectory_optimized.jsonl")?;

    let n = manifest.frame_count;
    if initial.len() != n || optimized.len() != n || speeds.len() + 1 != n || metrics.timing.total_frames != n {
        return Err(fail("manifest.json", &"frame counts disagree between bundle files"));
    }
    Ok(LoadedBundle {
        dir: dir.to_path_buf(),
        manifest,
        metrics,
        speeds,
        initial,
        optimized,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    #[test]
    fn empty_scene_runs_straight() {
        let sc = scenario::empty();
        let b = run(&sc).unwrap();
        for c in &b.clearance {
            assert_eq!(c.before.min_m, b.sentinel_m);
            assert_eq!(c.after.min_m, b.sentinel_m);
        }
        // no obstacle and a straight-line optimum: the path barely moves
        for (a, o) in b.initial.subs.iter().zip(&b.optimized.subs) {
            let l0 = crate::time_alloc::arc_length(&a.points);
            let l1 = crate::time_alloc::arc_length(&o.points);
            assert!(l1 <= l0 + 1e-12);
            let chord = (o.last() - o.first()).norm();
            assert!(l1 < 1.05 * chord, "{l1} vs chord {chord}");
        }
        assert_eq!(b.masks.len(), 49);
        assert!(b.depth_check_m < 1e-9);
    }

    #[test]
    fn sink_scene_clears_the_rim() {
        let sc = scenario::sink();
        let b = run(&sc).unwrap();
        let d_safe = sc.planner.d_safe_m;
        let m = &b.clearance[Stage::Manipulate.index()];
        assert!(m.before.min_m < d_safe);
        assert!(m.after.min_m >= d_safe - 1e-6);
        assert!(b.depth_check_m < 1e-9);
        assert_eq!(b.speeds_before.len(), 48);
        assert_eq!(b.speed_rows().len(), 48);
    }

    #[test]
    fn bundle_round_trips() {
        let b = run(&scenario::sink()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let manifest = b.write(dir.path()).unwrap();
        let loaded = load_bundle(dir.path()).unwrap();
        assert_eq!(loaded.manifest, manifest);
        assert_eq!(loaded.metrics, b.metrics());
        assert_eq!(loaded.speeds, b.speed_rows());
        assert_eq!(loaded.optimized[5].pre_x, Some(b.pre_optimization.frames[5].position.x));
        assert_eq!(loaded.initial[0].pre_x, None);
    }

    #[test]
    fn sealed_object_is_a_no_path_error() {
        let mut sc = scenario::empty();
        let o = sc.scene.spec.object;
        let (h, t) = (0.06, 0.02);
        for a in 0..3 {
            for sign in [-1.0, 1.0] {
                let mut center = o;
                center[a] += sign * h;
                let mut size = Vec3::repeat(2.0 * h + t);
                size[a] = t;
                sc.scene.spec.primitives.push(crate::scene::Primitive {
                    name: format!("wall{a}{sign}"),
                    shape: crate::scene::Shape::Box { center, size },
                });
            }
        }
        let e = run(&sc).unwrap_err();
        assert_eq!(e.kind, ErrorKind::NoPath);
        assert_eq!(e.stage, PipelineStage::Plan(Stage::Approach));
        assert_eq!(e.kind.exit_code(), 3);
        assert!(e.to_string().starts_with("error:plan."));
    }

    #[test]
    fn keypoint_in_obstacle_is_invalid_input() {
        let mut sc = scenario::sink();
        sc.scene.spec.target = Vec3::new(0.5, 0.5, 0.2);
        let e = run(&sc).unwrap_err();
        assert_eq!(e.stage, PipelineStage::Scene);
        assert_eq!(e.kind.exit_code(), 2);
    }
}
