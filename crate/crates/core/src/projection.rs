//! Pinhole projection of sphere actors and per-frame guidance masks.
//!
//! Camera frame follows the usual vision convention: +Z forward, +X right,
//! +Y down. Pixel `(i, j)` has its center at integer coordinates `(i, j)`.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time_alloc::{GripperState, TimedTrajectory};
use crate::Vec3;

pub const BACKGROUND: u8 = 0;
pub const OBJECT: u8 = 128;
pub const GRIPPER_OPEN: u8 = 200;
pub const GRIPPER_CLOSED: u8 = 255;
pub const PALETTE: [u8; 4] = [BACKGROUND, OBJECT, GRIPPER_OPEN, GRIPPER_CLOSED];

#[derive(Debug, Error)]
pub enum ProjectionError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("{what}: expected {expected} frames, got {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("invalid actor: {0}")]
    InvalidActor(String),
    #[error("malformed PGM: {0}")]
    Pgm(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Pinhole intrinsics plus a world-to-camera rigid transform.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraModel {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
    /// Rows map world axes onto camera X, Y, Z.
    pub rotation: Matrix3<f64>,
    pub translation: Vec3,
}

impl CameraModel {
    pub fn new(
        intrinsics: [f64; 4],
        size: (usize, usize),
        rotation: Matrix3<f64>,
        translation: Vec3,
    ) -> Result<Self, ProjectionError> {
        let [fx, fy, cx, cy] = intrinsics;
        let cam = CameraModel {
            fx,
            fy,
            cx,
            cy,
            width: size.0,
            height: size.1,
            rotation,
            translation,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`, with `up` pointing roughly to the
    /// top of the image.
    pub fn look_at(
        intrinsics: [f64; 4],
        size: (usize, usize),
        eye: Vec3,
        target: Vec3,
        up: Vec3,
    ) -> Result<Self, ProjectionError> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| ProjectionError::InvalidCamera("eye and target coincide".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| ProjectionError::InvalidCamera("up is parallel to the view direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye);
        CameraModel::new(intrinsics, size, rotation, translation)
    }

    pub fn validate(&self) -> Result<(), ProjectionError> {
        let bad = |m: &str| Err(ProjectionError::InvalidCamera(m.into()));
        if !(self.fx > 0.0 && self.fy > 0.0 && self.fx.is_finite() && self.fy.is_finite()) {
            return bad("focal lengths must be positive");
        }
        if !(self.cx.is_finite() && self.cy.is_finite()) {
            return bad("principal point must be finite");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be positive");
        }
        let err = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        if !(err < 1e-9) {
            return bad("rotation is not orthonormal");
        }
        if self.rotation.determinant() < 0.0 {
            return bad("rotation is a reflection");
        }
        if !self.translation.iter().all(|c| c.is_finite()) {
            return bad("translation must be finite");
        }
        Ok(())
    }

    pub fn to_camera(&self, world: &Vec3) -> Vec3 {
        self.rotation * world + self.translation
    }

    /// Camera-frame point at depth `z` seen through pixel coordinates `(u, v)`.
    pub fn unproject(&self, u: f64, v: f64, z: f64) -> Vec3 {
        Vec3::new((u - self.cx) * z / self.fx, (v - self.cy) * z / self.fy, z)
    }

    pub fn depth(&self, world: &Vec3) -> f64 {
        self.to_camera(world).z
    }
}

/// Image-plane circle of a projected sphere.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Projection {
    Circle { u: f64, v: f64, r_px: f64 },
    Behind,
}

/// `u = fx·X/Z + cx`, `v = fy·Y/Z + cy`, `r = fx·R/Z`; `Behind` when the
/// sphere is not entirely in front of the camera (`Z <= R`).
pub fn project_sphere(cam: &CameraModel, center: &Vec3, radius: f64) -> Projection {
    let p = cam.to_camera(center);
    if p.z <= radius {
        return Projection::Behind;
    }
    Projection::Circle {
        u: cam.fx * p.x / p.z + cam.cx,
        v: cam.fy * p.y / p.z + cam.cy,
        r_px: cam.fx * radius / p.z,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorRole {
    Object,
    Gripper,
}

/// A sphere with one world-space center per frame.
#[derive(Clone, Debug, PartialEq)]
pub struct SphereActor {
    pub role: ActorRole,
    pub radius: f64,
    pub centers: Vec<Vec3>,
}

impl SphereActor {
    /// Object sphere whose radius is the longest bounding-box edge.
    pub fn object(extent: &Vec3, centers: Vec<Vec3>) -> Result<Self, ProjectionError> {
        SphereActor::new(ActorRole::Object, extent.max(), centers)
    }

    pub fn gripper(radius: f64, centers: Vec<Vec3>) -> Result<Self, ProjectionError> {
        SphereActor::new(ActorRole::Gripper, radius, centers)
    }

    fn new(role: ActorRole, radius: f64, centers: Vec<Vec3>) -> Result<Self, ProjectionError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ProjectionError::InvalidActor(format!("{role:?} radius must be positive, got {radius}")));
        }
        Ok(SphereActor { role, radius, centers })
    }
}

/// Depth change of the held object per frame, estimated from the
/// end-effector: zero before `grasp_frame`, then the effector's depth change
/// relative to the grasp frame, frozen after `release_frame`.
pub fn object_depth_offset(
    cam: &CameraModel,
    effector_frames: &[Vec3],
    grasp_frame: usize,
    release_frame: Option<usize>,
) -> Vec<f64> {
    let Some(grasp) = effector_frames.get(grasp_frame) else {
        return vec![0.0; effector_frames.len()];
    };
    let base = cam.depth(grasp);
    let release = release_frame.unwrap_or(usize::MAX).min(effector_frames.len().saturating_sub(1));
    effector_frames
        .iter()
        .enumerate()
        .map(|(k, p)| {
            if k < grasp_frame {
                0.0
            } else {
                cam.depth(if k > release { &effector_frames[release] } else { p }) - base
            }
        })
        .collect()
}

/// One 8-bit label image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GuidanceMask {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
    /// Set on frame 0: the original first frame is kept unedited.
    pub keep_first_frame: bool,
}

impl GuidanceMask {
    pub fn blank(width: usize, height: usize) -> Self {
        GuidanceMask {
            width,
            height,
            pixels: vec![BACKGROUND; width * height],
            keep_first_frame: false,
        }
    }

    pub fn get(&self, i: usize, j: usize) -> u8 {
        self.pixels[j * self.width + i]
    }

    /// Fills pixels whose centers lie within the circle, clipped to the image.
    pub fn fill_circle(&mut self, u: f64, v: f64, r: f64, value: u8) {
        if !(r >= 0.0) || !u.is_finite() || !v.is_finite() {
            return;
        }
        let i0 = (u - r).ceil().max(0.0);
        let i1 = (u + r).floor().min(self.width as f64 - 1.0);
        let j0 = (v - r).ceil().max(0.0);
        let j1 = (v + r).floor().min(self.height as f64 - 1.0);
        if i0 > i1 || j0 > j1 {
            return;
        }
        let r2 = r * r;
        for j in j0 as usize..=j1 as usize {
            let dv = j as f64 - v;
            for i in i0 as usize..=i1 as usize {
                let du = i as f64 - u;
                if du * du + dv * dv <= r2 {
                    self.pixels[j * self.width + i] = value;
                }
            }
        }
    }

    pub fn draw_sphere(&mut self, cam: &CameraModel, center: &Vec3, radius: f64, value: u8) {
        if let Projection::Circle { u, v, r_px } = project_sphere(cam, center, radius) {
            self.fill_circle(u, v, r_px, value);
        }
    }

    pub fn only_palette_values(&self) -> bool {
        self.pixels.iter().all(|p| PALETTE.contains(p))
    }

    /// Binary PGM (P5, maxval 255).
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), ProjectionError> {
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_pgm())?;
        Ok(())
    }

    pub fn from_pgm(bytes: &[u8]) -> Result<Self, ProjectionError> {
        let bad = |m: &str| ProjectionError::Pgm(m.into());
        let mut fields = Vec::new();
        let mut pos = 0;
        while fields.len() < 4 {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
                continue;
            }
            let start = pos;
            while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if start == pos {
                return Err(bad("truncated header"));
            }
            fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad("non-ascii header"))?);
        }
        if fields[0] != "P5" {
            return Err(bad("not a P5 file"));
        }
        let parse = |s: &str| s.parse::<usize>().map_err(|_| bad("bad header number"));
        let (width, height, maxval) = (parse(fields[1])?, parse(fields[2])?, parse(fields[3])?);
        if maxval != 255 {
            return Err(bad("only 8-bit PGM is supported"));
        }
        let data = &bytes[pos + 1..];
        if data.len() != width * height {
            return Err(bad("pixel data length does not match header"));
        }
        Ok(GuidanceMask {
            width,
            height,
            pixels: data.to_vec(),
            keep_first_frame: false,
        })
    }
}

/// Renders one mask per frame. Frame 0 is left blank and flagged to keep
/// the original first frame; later frames draw the object circle, then the
/// gripper circle on top with its open/closed label.
pub fn render_guidance_masks(
    timed: &TimedTrajectory,
    object: &SphereActor,
    gripper: &SphereActor,
    cam: &CameraModel,
) -> Result<Vec<GuidanceMask>, ProjectionError> {
    cam.validate()?;
    let n = timed.len();
    for (what, actor) in [("object actor", object), ("gripper actor", gripper)] {
        if actor.centers.len() != n {
            return Err(ProjectionError::DimensionMismatch {
                what,
                expected: n,
                found: actor.centers.len(),
            });
        }
    }
    let masks = timed
        .frames
        .iter()
        .enumerate()
        .map(|(k, frame)| {
            let mut mask = GuidanceMask::blank(cam.width, cam.height);
            if k == 0 {
                mask.keep_first_frame = true;
                return mask;
            }
            mask.draw_sphere(cam, &object.centers[k], object.radius, OBJECT);
            let label = match frame.gripper {
                GripperState::Open => GRIPPER_OPEN,
                GripperState::Closed => GRIPPER_CLOSED,
            };
            mask.draw_sphere(cam, &gripper.centers[k], gripper.radius, label);
            mask
        })
        .collect();
    Ok(masks)
}

/// Camera parameters as written to mask manifests.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CameraRecord {
    pub fx_px: f64,
    pub fy_px: f64,
    pub cx_px: f64,
    pub cy_px: f64,
    pub width_px: usize,
    pub height_px: usize,
    pub rotation_rows: [[f64; 3]; 3],
    pub translation_m: Vec3,
}

impl From<&CameraModel> for CameraRecord {
    fn from(cam: &CameraModel) -> Self {
        CameraRecord {
            fx_px: cam.fx,
            fy_px: cam.fy,
            cx_px: cam.cx,
            cy_px: cam.cy,
            width_px: cam.width,
            height_px: cam.height,
            rotation_rows: [0, 1, 2].map(|i| [0, 1, 2].map(|j| cam.rotation[(i, j)])),
            translation_m: cam.translation,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PaletteRecord {
    pub background: u8,
    pub object: u8,
    pub gripper_open: u8,
    pub gripper_closed: u8,
}

impl Default for PaletteRecord {
    fn default() -> Self {
        PaletteRecord {
            background: BACKGROUND,
            object: OBJECT,
            gripper_open: GRIPPER_OPEN,
            gripper_closed: GRIPPER_CLOSED,
        }
    }
}

/// Index written next to the per-frame PGM files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskManifest {
    pub frame_count: usize,
    pub files: Vec<String>,
    /// Frames whose original image is kept unedited.
    pub keep_first_frame: Vec<usize>,
    pub palette: PaletteRecord,
    pub camera: CameraRecord,
    pub object_radius_m: f64,
    pub gripper_radius_m: f64,
    /// The object is drawn at its rest position before the grasp and
    /// after the release.
    pub object_drawn_at_rest: bool,
}

pub fn mask_file_name(frame: usize) -> String {
    format!("frame_{frame:04}.pgm")
}

/// Writes `frame_XXXX.pgm` for every mask plus `manifest.json` into `dir`.
pub fn write_masks(
    dir: impl AsRef<Path>,
    masks: &[GuidanceMask],
    cam: &CameraModel,
    object: &SphereActor,
    gripper: &SphereActor,
) -> Result<MaskManifest, ProjectionError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = Vec::with_capacity(masks.len());
    for (k, m) in masks.iter().enumerate() {
        if m.width != cam.width || m.height != cam.height {
            return Err(ProjectionError::DimensionMismatch {
                what: "mask size",
                expected: cam.width * cam.height,
                found: m.width * m.height,
            });
        }
        let name = mask_file_name(k);
        m.write_pgm(dir.join(&name))?;
        files.push(name);
    }
    let manifest = MaskManifest {
        frame_count: masks.len(),
        files,
        keep_first_frame: masks
            .iter()
            .enumerate()
            .filter(|(_, m)| m.keep_first_frame)
            .map(|(k, _)| k)
            .collect(),
        palette: PaletteRecord::default(),
        camera: cam.into(),
        object_radius_m: object.radius,
        gripper_radius_m: gripper.radius,
        object_drawn_at_rest: true,
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(io::Error::from)?;
    fs::write(dir.join("manifest.json"), json + "\n")?;
    Ok(manifest)
}

/// Reads a mask directory written by [`write_masks`].
pub fn read_masks(dir: impl AsRef<Path>) -> Result<(MaskManifest, Vec<GuidanceMask>), ProjectionError> {
    let dir = dir.as_ref();
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: MaskManifest =
        serde_json::from_str(&text).map_err(|e| ProjectionError::Pgm(format!("manifest: {e}")))?;
    let mut masks = Vec::with_capacity(manifest.frame_count);
    for (k, name) in manifest.files.iter().enumerate() {
        let mut m = GuidanceMask::from_pgm(&fs::read(dir.join(name))?)?;
        m.keep_first_frame = manifest.keep_first_frame.contains(&k);
        masks.push(m);
    }
    Ok((manifest, masks))
}
