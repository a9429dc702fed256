//! Scenario files: everything one pipeline run needs, as human-editable
//! TOML with the unit in every dimensional key name.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimizer::PlannerConfig;
use crate::projection::{CameraModel, ProjectionError};
use crate::scene::{
    load_point_cloud, synth_scene, voxelize, GridBounds, OccupancyGrid, Primitive, SceneError,
    SceneSpec, Shape, DEFAULT_DIMS,
};
use crate::time_alloc::{VelocityProfile, MIN_TOTAL_FRAMES};
use crate::Vec3;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("cannot serialize scenario: {0}")]
    Serialize(#[from] toml::ser::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Camera(#[from] ProjectionError),
    #[error("unknown template '{0}' (expected sink, empty or random)")]
    UnknownTemplate(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSection {
    pub dims: [usize; 3],
    pub min_corner_m: Vec3,
    pub voxel_size_m: f64,
}

impl GridSection {
    pub fn bounds(&self) -> Result<GridBounds, SceneError> {
        GridBounds::new(self.min_corner_m, self.voxel_size_m)
    }
}

/// Keypoints, object extent and obstacles. Obstacles come from the listed
/// primitives and, optionally, an XYZ/PLY point cloud; both are merged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSection {
    /// Resolved against the scenario file's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point_cloud: Option<PathBuf>,
    #[serde(flatten)]
    pub spec: SceneSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TimingSection {
    pub total_frames: usize,
    pub profile: VelocityProfile,
}

impl Default for TimingSection {
    fn default() -> Self {
        TimingSection {
            total_frames: 49,
            profile: VelocityProfile::Sine,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CameraPose {
    LookAt { eye_m: Vec3, target_m: Vec3, up: Vec3 },
    /// World-to-camera transform; rows of the rotation map world axes onto
    /// camera X (right), Y (down), Z (forward).
    Extrinsic {
        rotation_rows: [[f64; 3]; 3],
        translation_m: Vec3,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraSection {
    pub width_px: usize,
    pub height_px: usize,
    pub fx_px: f64,
    pub fy_px: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub pose: CameraPose,
}

impl CameraSection {
    pub fn model(&self) -> Result<CameraModel, ProjectionError> {
        let intrinsics = [self.fx_px, self.fy_px, self.cx_px, self.cy_px];
        let size = (self.width_px, self.height_px);
        match &self.pose {
            CameraPose::LookAt { eye_m, target_m, up } => {
                CameraModel::look_at(intrinsics, size, *eye_m, *target_m, *up)
            }
            CameraPose::Extrinsic {
                rotation_rows,
                translation_m,
            } => {
                let r = Matrix3::from_fn(|i, j| rotation_rows[i][j]);
                CameraModel::new(intrinsics, size, r, *translation_m)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActorSection {
    pub gripper_radius_m: f64,
    /// Overrides the longest-edge rule for the object sphere.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub object_radius_m: Option<f64>,
}

impl Default for ActorSection {
    fn default() -> Self {
        ActorSection {
            gripper_radius_m: 0.03,
            object_radius_m: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    /// Seed the scenario was generated from, if any. The planner ignores it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Required unless a point cloud is given, in which case the bounds are
    /// fitted to the cloud at 64³ when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSection>,
    pub scene: SceneSection,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub timing: TimingSection,
    pub camera: CameraSection,
    #[serde(default)]
    pub actors: ActorSection,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self, ScenarioError> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml_string(&self) -> Result<String, ScenarioError> {
        Ok(toml::to_string(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Scenario::from_toml_str(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ScenarioError> {
        let path = path.as_ref();
        fs::write(path, self.to_toml_string()?).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    /// Checks everything that does not need the occupancy grid.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        if self.timing.total_frames < MIN_TOTAL_FRAMES {
            return invalid(format!(
                "total_frames must be at least {MIN_TOTAL_FRAMES}, got {}",
                self.timing.total_frames
            ));
        }
        self.planner
            .validate()
            .map_err(|e| ScenarioError::Invalid(e.to_string()))?;
        if !(self.actors.gripper_radius_m > 0.0 && self.actors.gripper_radius_m.is_finite()) {
            return invalid("gripper_radius_m must be positive".into());
        }
        if let Some(r) = self.actors.object_radius_m {
            if !(r > 0.0 && r.is_finite()) {
                return invalid("object_radius_m must be positive".into());
            }
        }
        let spec = &self.scene.spec;
        let e = &spec.object_extent;
        if !e.iter().all(|c| c.is_finite() && *c >= 0.0) || e.max() <= 0.0 {
            return invalid("object_extent_m must be non-negative with a positive edge".into());
        }
        match &self.grid {
            Some(g) => {
                if g.dims.contains(&0) {
                    return Err(SceneError::InvalidDims(g.dims).into());
                }
                let bounds = g.bounds()?;
                let max = bounds.max_corner(g.dims);
                for (which, p) in spec.keypoints() {
                    if !(0..3).all(|a| p[a] >= bounds.min_corner[a] && p[a] < max[a]) {
                        return invalid(format!("keypoint '{which}' {p:?} lies outside the grid"));
                    }
                }
            }
            None if self.scene.point_cloud.is_none() => {
                return invalid("a [grid] section is required without a point cloud".into());
            }
            None => {}
        }
        self.camera.model()?;
        Ok(())
    }

    pub fn object_radius(&self) -> f64 {
        self.actors
            .object_radius_m
            .unwrap_or_else(|| self.scene.spec.object_extent.max())
    }

    /// Builds the occupancy grid. Point-cloud paths are resolved against
    /// `base_dir`.
    pub fn build_grid(&self, base_dir: &Path) -> Result<OccupancyGrid, ScenarioError> {
        let spec = &self.scene.spec;
        let cloud = match &self.scene.point_cloud {
            Some(p) => Some(load_point_cloud(base_dir.join(p))?),
            None => None,
        };
        let (dims, bounds) = match (&self.grid, &cloud) {
            (Some(g), _) => (g.dims, g.bounds()?),
            (None, Some(c)) => (DEFAULT_DIMS, GridBounds::fit(c, DEFAULT_DIMS)?),
            (None, None) => {
                return Err(ScenarioError::Invalid("a [grid] section is required without a point cloud".into()))
            }
        };
        let mut grid = synth_scene(spec, dims, bounds)?;
        if let Some(c) = &cloud {
            let (cloud_grid, _) = voxelize(c, dims, bounds)?;
            for i in 0..grid.len() {
                if cloud_grid.occupied()[i] {
                    grid.set(grid.cell_of(i), true);
                }
            }
            crate::scene::check_keypoints(&grid, spec)?;
        }
        Ok(grid)
    }

    pub fn template(name: &str, seed: u64) -> Result<Scenario, ScenarioError> {
        match name {
            "sink" => Ok(sink()),
            "empty" => Ok(empty()),
            "random" => Ok(random(seed)),
            other => Err(ScenarioError::UnknownTemplate(other.into())),
        }
    }
}

fn unit_cube_grid() -> GridSection {
    GridSection {
        dims: DEFAULT_DIMS,
        min_corner_m: Vec3::zeros(),
        voxel_size_m: 1.0 / 64.0,
    }
}

fn default_camera() -> CameraSection {
    CameraSection {
        width_px: 320,
        height_px: 240,
        fx_px: 300.0,
        fy_px: 300.0,
        cx_px: 159.5,
        cy_px: 119.5,
        pose: CameraPose::LookAt {
            eye_m: Vec3::new(0.5, -0.7, 0.9),
            target_m: Vec3::new(0.5, 0.5, 0.3),
            up: Vec3::z(),
        },
    }
}

fn table() -> Primitive {
    Primitive {
        name: "table".into(),
        shape: Shape::HalfSpace {
            normal: Vec3::z(),
            offset: 0.1,
        },
    }
}

fn base(name: &str, primitives: Vec<Primitive>) -> Scenario {
    let mut planner = PlannerConfig::for_voxel_size(1.0 / 64.0);
    planner.clearance_voxels = 0;
    Scenario {
        name: name.into(),
        seed: None,
        grid: Some(unit_cube_grid()),
        scene: SceneSection {
            point_cloud: None,
            spec: SceneSpec {
                effector_start: Vec3::new(0.2, 0.35, 0.6),
                object: Vec3::new(0.25, 0.5, 0.16),
                target: Vec3::new(0.75, 0.5, 0.16),
                grasp_offset: None,
                object_extent: Vec3::new(0.05, 0.05, 0.05),
                primitives,
            },
        },
        planner,
        timing: TimingSection::default(),
        camera: default_camera(),
        actors: ActorSection::default(),
    }
}

/// Tabletop with a raised rim between the object and the target. With no
/// A* clearance the initial carry path hugs the rim.
pub fn sink() -> Scenario {
    let rim = Primitive {
        name: "rim".into(),
        shape: Shape::Box {
            center: Vec3::new(0.5, 0.5, 0.2),
            size: Vec3::new(0.08, 1.0, 0.2),
        },
    };
    base("sink", vec![table(), rim])
}

/// No obstacles at all.
pub fn empty() -> Scenario {
    base("empty", Vec::new())
}

/// Table plus a few random boxes that keep clear of the keypoints.
pub fn random(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sc = base("random", vec![table()]);
    sc.seed = Some(seed);
    let mut kp = || Vec3::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.15..0.7));
    let (e, o, t) = (kp(), kp(), kp());
    sc.scene.spec.effector_start = e;
    sc.scene.spec.object = o;
    sc.scene.spec.target = t;
    let keep_clear = 0.08;
    let mut boxes = 0;
    while boxes < rng.gen_range(2..6) {
        let center = Vec3::new(rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.9), rng.gen_range(0.1..0.6));
        let size = Vec3::new(rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.3), rng.gen_range(0.05..0.4));
        let near = [e, o, t].iter().any(|p| {
            let d = (p - center).abs() - size * 0.5;
            d.max() < keep_clear
        });
        if near {
            continue;
        }
        sc.scene.spec.primitives.push(Primitive {
            name: format!("box{boxes}"),
            shape: Shape::Box { center, size },
        });
        boxes += 1;
    }
    sc
}
