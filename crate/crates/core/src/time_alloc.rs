//! Path-aware time reallocation: frames are shared out between stages in
//! proportion to arc length, then each stage is resampled so that the
//! spacing between consecutive frames follows a velocity profile.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid_planner::{Stage, Trajectory};
use crate::Vec3;

/// Minimum frame budget: two frames per stage.
pub const MIN_TOTAL_FRAMES: usize = 6;

#[derive(Debug, Error, PartialEq)]
pub enum TimeAllocError {
    #[error("insufficient frames: stage shares {shares:?} of {total} leave fewer than 2 frames for a stage")]
    InsufficientFrames { total: usize, shares: [usize; 3] },
    #[error("invalid stage lengths {0:?}")]
    InvalidLengths([f64; 3]),
    #[error("cannot resample a zero-length path into {0} points")]
    DegeneratePath(usize),
    #[error("resample needs at least 2 output points, got {0}")]
    TooFewPoints(usize),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VelocityProfile {
    /// Speed ∝ sin(πu): zero at both ends, peak mid-stage.
    #[default]
    Sine,
    Uniform,
}

impl VelocityProfile {
    /// Cumulative arc fraction covered at normalized time `u ∈ [0, 1]`.
    pub fn fraction(self, u: f64) -> f64 {
        match self {
            VelocityProfile::Sine => 0.5 * (1.0 - (PI * u).cos()),
            VelocityProfile::Uniform => u,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            VelocityProfile::Sine => "sine",
            VelocityProfile::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for VelocityProfile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sine" => Ok(VelocityProfile::Sine),
            "uniform" => Ok(VelocityProfile::Uniform),
            other => Err(format!("unknown velocity profile '{other}'")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GripperState {
    Open,
    Closed,
}

impl GripperState {
    pub fn for_stage(stage: Stage) -> Self {
        match stage {
            Stage::Manipulate => GripperState::Closed,
            Stage::Approach | Stage::BackIdle => GripperState::Open,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimedFrame {
    pub index: usize,
    pub position: Vec3,
    pub stage: Stage,
    pub gripper: GripperState,
}

/// Per-frame end-effector states. A junction frame belongs to the stage
/// that starts there, so the gripper closes on the first manipulate frame
/// and opens on the first back-idle frame.
#[derive(Clone, Debug, PartialEq)]
pub struct TimedTrajectory {
    pub frames: Vec<TimedFrame>,
}

impl TimedTrajectory {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn positions(&self) -> Vec<Vec3> {
        self.frames.iter().map(|f| f.position).collect()
    }

    /// First frame of `stage`, if present.
    pub fn stage_start(&self, stage: Stage) -> Option<usize> {
        self.frames.iter().position(|f| f.stage == stage)
    }

    /// Frame indices of a stage including the junction frame that ends it.
    pub fn stage_span(&self, stage: Stage) -> Option<std::ops::RangeInclusive<usize>> {
        let start = self.stage_start(stage)?;
        let end = match stage {
            Stage::Approach => self.stage_start(Stage::Manipulate)?,
            Stage::Manipulate => self.stage_start(Stage::BackIdle)?,
            Stage::BackIdle => self.frames.len() - 1,
        };
        Some(start..=end)
    }

    /// Frame-to-frame displacement magnitudes.
    pub fn speeds(&self) -> Vec<f64> {
        speeds(&self.positions())
    }

    pub fn validate(&self) -> Result<(), String> {
        for (k, f) in self.frames.iter().enumerate() {
            if f.index != k {
                return Err(format!("frame {k} carries index {}", f.index));
            }
            if f.gripper != GripperState::for_stage(f.stage) {
                return Err(format!("frame {k}: gripper state does not match stage"));
            }
            if !f.position.iter().all(|c| c.is_finite()) {
                return Err(format!("frame {k}: non-finite position"));
            }
        }
        for w in self.frames.windows(2) {
            if w[1].stage < w[0].stage {
                return Err("stages out of order".into());
            }
        }
        Ok(())
    }
}

pub fn speeds(points: &[Vec3]) -> Vec<f64> {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).collect()
}

/// Polyline length; 0 for fewer than two points.
pub fn arc_length(points: &[Vec3]) -> f64 {
    points.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
}

/// Splits `total_frames` between the three stages in proportion to their
/// lengths using largest-remainder rounding; ties go to the earlier stage.
pub fn allocate_counts(lengths: [f64; 3], total_frames: usize) -> Result<[usize; 3], TimeAllocError> {
    let sum: f64 = lengths.iter().sum();
    if lengths.iter().any(|l| !l.is_finite() || *l < 0.0) || !(sum > 0.0) {
        return Err(TimeAllocError::InvalidLengths(lengths));
    }
    let exact: Vec<f64> = lengths.iter().map(|l| total_frames as f64 * l / sum).collect();
    let mut counts = [0usize; 3];
    for i in 0..3 {
        counts[i] = exact[i].floor() as usize;
    }
    if counts.iter().any(|&c| c < 2) {
        return Err(TimeAllocError::InsufficientFrames {
            total: total_frames,
            shares: counts,
        });
    }
    let assigned: usize = counts.iter().sum();
    let mut order = [0usize, 1, 2];
    // stable sort keeps stage order among equal remainders
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in order.iter().take(total_frames.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    Ok(counts)
}

/// Repositions `count` points along the polyline so that point `k` sits at
/// arc length `L·s(k/(count−1))`. Endpoints are copied exactly.
pub fn resample(points: &[Vec3], count: usize, profile: VelocityProfile) -> Result<Vec<Vec3>, TimeAllocError> {
    if count < 2 {
        return Err(TimeAllocError::TooFewPoints(count));
    }
    let total = arc_length(points);
    if !(total > 0.0) {
        return Err(TimeAllocError::DegeneratePath(count));
    }
    let first = points[0];
    let last = *points.last().unwrap();

    let mut out = Vec::with_capacity(count);
    out.push(first);
    let mut seg = 0;
    let mut seg_start = 0.0;
    let mut seg_len = (points[1] - points[0]).norm();
    for k in 1..count - 1 {
        let target = total * profile.fraction(k as f64 / (count - 1) as f64);
        while seg + 2 < points.len() && seg_start + seg_len < target {
            seg_start += seg_len;
            seg += 1;
            seg_len = (points[seg + 1] - points[seg]).norm();
        }
        let t = if seg_len > 0.0 {
            ((target - seg_start) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        out.push(points[seg] + (points[seg + 1] - points[seg]) * t);
    }
    out.push(last);
    Ok(out)
}

/// Positions at `count` equally spaced fractional waypoint indices, i.e. the
/// path played back at one waypoint per time step.
pub fn index_time_resample(points: &[Vec3], count: usize) -> Vec<Vec3> {
    if points.len() == 1 || count < 2 {
        return vec![points[0]; count];
    }
    let n = points.len() - 1;
    (0..count)
        .map(|k| {
            let x = k as f64 * n as f64 / (count - 1) as f64;
            let i = (x.floor() as usize).min(n - 1);
            let t = x - i as f64;
            points[i] + (points[i + 1] - points[i]) * t
        })
        .collect()
}

/// Per-stage arc lengths, frame counts (before junction sharing) and the
/// assembled timed trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Reallocation {
    pub timed: TimedTrajectory,
    pub lengths: [f64; 3],
    pub counts: [usize; 3],
}

/// Allocates frames per stage, resamples each stage with `profile`, and
/// joins the stages emitting each junction frame once. Stage counts include
/// both of their endpoints, so they sum to `total_frames + 2`.
pub fn reallocate(
    traj: &Trajectory,
    total_frames: usize,
    profile: VelocityProfile,
) -> Result<Reallocation, TimeAllocError> {
    if total_frames < MIN_TOTAL_FRAMES {
        return Err(TimeAllocError::InsufficientFrames {
            total: total_frames,
            shares: [0; 3],
        });
    }
    let lengths = [0, 1, 2].map(|i| arc_length(&traj.subs[i].points));
    let counts = allocate_counts(lengths, total_frames + 2)?;
    Ok(Reallocation {
        timed: assemble(traj, counts, profile)?,
        lengths,
        counts,
    })
}

/// Resamples each stage to the given per-stage counts (junctions included
/// in both neighbours) and joins them, emitting each junction frame once.
pub fn assemble(
    traj: &Trajectory,
    counts: [usize; 3],
    profile: VelocityProfile,
) -> Result<TimedTrajectory, TimeAllocError> {
    let mut frames = Vec::with_capacity(counts.iter().sum::<usize>());
    for (i, sub) in traj.subs.iter().enumerate() {
        let pts = resample(&sub.points, counts[i], profile)?;
        let take = if i == 2 { pts.len() } else { pts.len() - 1 };
        for p in &pts[..take] {
            frames.push(TimedFrame {
                index: frames.len(),
                position: *p,
                stage: sub.stage,
                gripper: GripperState::for_stage(sub.stage),
            });
        }
    }
    Ok(TimedTrajectory { frames })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_planner::SubTrajectory;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn arc_length_examples() {
        assert_eq!(arc_length(&[Vec3::zeros()]), 0.0);
        assert!((arc_length(&[Vec3::zeros(), Vec3::new(0.0, 0.3, 0.0)]) - 0.3).abs() < 1e-15);
        let square = [Vec3::zeros(), Vec3::x(), Vec3::new(1.0, 1.0, 0.0), Vec3::y()];
        assert_eq!(arc_length(&square), 3.0);
    }

    #[test]
    fn arc_length_matches_pairwise_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts: Vec<Vec3> = (0..50).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect();
        let mut oracle = 0.0;
        for i in 0..49 {
            let d = pts[i + 1] - pts[i];
            oracle += (d.x * d.x + d.y * d.y + d.z * d.z).sqrt();
        }
        assert!((arc_length(&pts) - oracle).abs() < 1e-12);
    }

    #[test]
    fn allocation_examples() {
        assert_eq!(allocate_counts([2.0, 1.0, 1.0], 40).unwrap(), [20, 10, 10]);
        assert_eq!(allocate_counts([1.0, 1.0, 1.0], 10).unwrap(), [4, 3, 3]);
        assert!(matches!(
            allocate_counts([1.0, 0.0, 1.0], 40),
            Err(TimeAllocError::InsufficientFrames { .. })
        ));
        assert!(allocate_counts([0.0, 0.0, 0.0], 40).is_err());
    }

    #[test]
    fn random_allocations_track_exact_shares() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let lengths = [rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0), rng.gen_range(0.1..3.0)];
            let total = rng.gen_range(90..500);
            let counts = allocate_counts(lengths, total).unwrap();
            assert_eq!(counts.iter().sum::<usize>(), total);
            let sum: f64 = lengths.iter().sum();
            for i in 0..3 {
                let exact = total as f64 * lengths[i] / sum;
                assert!((counts[i] as f64 - exact).abs() < 1.0);
            }
        }
    }

    #[test]
    fn sine_on_straight_segment() {
        let l = 2.5;
        let pts = [Vec3::new(1.0, 1.0, 1.0), Vec3::new(1.0 + l, 1.0, 1.0)];
        let n = 21;
        let out = resample(&pts, n, VelocityProfile::Sine).unwrap();
        for (k, p) in out.iter().enumerate() {
            let expected = l * (1.0 - (PI * k as f64 / (n - 1) as f64).cos()) / 2.0;
            assert!((p.x - 1.0 - expected).abs() < 1e-12);
        }
        assert!((out[10].x - 1.0 - l / 2.0).abs() < 1e-12);
        assert_eq!(out[0], pts[0]);
        assert_eq!(out[n - 1], pts[1]);
    }

    #[test]
    fn uniform_on_polyline_straight_path() {
        let pts: Vec<Vec3> = [0.0, 0.1, 0.15, 0.7, 1.3].iter().map(|&t| Vec3::new(t, -t, 2.0 * t)).collect();
        let out = resample(&pts, 17, VelocityProfile::Uniform).unwrap();
        let s = speeds(&out);
        for v in &s {
            assert!((v - s[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_paths_are_rejected() {
        let p = Vec3::new(0.2, 0.2, 0.2);
        assert_eq!(resample(&[p, p], 5, VelocityProfile::Sine), Err(TimeAllocError::DegeneratePath(5)));
        assert_eq!(resample(&[p, p], 1, VelocityProfile::Sine), Err(TimeAllocError::TooFewPoints(1)));
    }

    #[test]
    fn smooth_path_follows_sine_speeds() {
        // helix
        let pts: Vec<Vec3> = (0..400)
            .map(|i| {
                let t = i as f64 / 399.0 * 3.0;
                Vec3::new(t.cos(), t.sin(), 0.3 * t)
            })
            .collect();
        for n in [30, 49, 80] {
            let out = resample(&pts, n, VelocityProfile::Sine).unwrap();
            let s = speeds(&out);
            let max = s.iter().cloned().fold(0.0, f64::max);
            for (k, v) in s.iter().enumerate() {
                let target = (PI * (k as f64 + 0.5) / (n - 1) as f64).sin();
                assert!((v / max - target).abs() < 0.05, "n={n} k={k}");
            }
        }
    }

    fn line_traj() -> Trajectory {
        let seg = |a: Vec3, b: Vec3, n: usize| -> Vec<Vec3> {
            (0..n).map(|i| a + (b - a) * (i as f64 / (n - 1) as f64)).collect()
        };
        let e = Vec3::new(0.0, 0.0, 1.0);
        let o = Vec3::new(1.0, 0.0, 0.0);
        let t = Vec3::new(1.0, 2.0, 0.0);
        Trajectory {
            subs: [
                SubTrajectory { stage: Stage::Approach, points: seg(e, o, 9) },
                SubTrajectory { stage: Stage::Manipulate, points: seg(o, t, 12) },
                SubTrajectory { stage: Stage::BackIdle, points: seg(t, e, 7) },
            ],
        }
    }

    #[test]
    fn reallocate_uniform_line_plan() {
        let traj = line_traj();
        let r = reallocate(&traj, 49, VelocityProfile::Uniform).unwrap();
        assert_eq!(r.timed.len(), 49);
        r.timed.validate().unwrap();
        for stage in Stage::ALL {
            let span = r.timed.stage_span(stage).unwrap();
            let pos: Vec<Vec3> = span.map(|k| r.timed.frames[k].position).collect();
            let s = speeds(&pos);
            for v in &s {
                assert!((v - s[0]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn gripper_timeline_and_junctions() {
        let traj = line_traj();
        let r = reallocate(&traj, 49, VelocityProfile::Sine).unwrap();
        let f = &r.timed.frames;
        assert_eq!(f[0].position, traj.subs[0].first());
        assert_eq!(f[48].position, traj.subs[2].last());
        let m = r.timed.stage_start(Stage::Manipulate).unwrap();
        let b = r.timed.stage_start(Stage::BackIdle).unwrap();
        assert_eq!(f[m].position, traj.subs[1].first());
        assert_eq!(f[b].position, traj.subs[2].first());
        assert_eq!(m, r.counts[0] - 1);
        assert_eq!(b, r.counts[0] + r.counts[1] - 2);
        let transitions: Vec<_> = f
            .windows(2)
            .filter(|w| w[0].gripper != w[1].gripper)
            .map(|w| (w[1].index, w[1].gripper))
            .collect();
        assert_eq!(transitions, vec![(m, GripperState::Closed), (b, GripperState::Open)]);
        let total = arc_length(&traj.concatenated());
        assert!((arc_length(&r.timed.positions()) - total).abs() / total < 0.01);
    }

    #[test]
    fn too_few_frames() {
        assert!(reallocate(&line_traj(), 5, VelocityProfile::Sine).is_err());
    }

    proptest! {
        #[test]
        fn profile_endpoints_and_monotone(u in 0.0..1.0f64, w in 0.0..1.0f64) {
            for p in [VelocityProfile::Sine, VelocityProfile::Uniform] {
                prop_assert_eq!(p.fraction(0.0), 0.0);
                prop_assert!((p.fraction(1.0) - 1.0).abs() < 1e-15);
                let (a, b) = if u < w { (u, w) } else { (w, u) };
                prop_assert!(p.fraction(a) <= p.fraction(b));
            }
        }

        #[test]
        fn resampled_positions_strictly_advance(seed in any::<u64>(), n in 2usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts = vec![Vec3::zeros()];
            for _ in 0..10 {
                let last = *pts.last().unwrap();
                pts.push(last + Vec3::new(rng.gen_range(0.01..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            }
            let out = resample(&pts, n, VelocityProfile::Sine).unwrap();
            prop_assert_eq!(out[0], pts[0]);
            prop_assert_eq!(out[n - 1], pts[10]);
            // x is strictly increasing along this path, so it orders arc position
            for w in out.windows(2) {
                prop_assert!(w[1].x > w[0].x);
            }
            prop_assert!(arc_length(&out) <= arc_length(&pts) + 1e-12);
        }
    }
}
