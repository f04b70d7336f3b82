//! On-disk scene format produced by upstream perception models.
//!
//! A scene is a JSON manifest plus raw little-endian blobs (see
//! [`crate::tensor`]). Supported tensors:
//!
//! | field        | dtype      | shape       | meaning                               |
//! |--------------|------------|-------------|---------------------------------------|
//! | `depths`     | f32        | `[T, H, W]` | camera-frame depth                    |
//! | `tracks`     | f32        | `[N, T, 2]` | tracked pixel coordinates `(u, v)`    |
//! | `visibility` | u8         | `[N, T]`    | 1 = visible, 0 = occluded/out of view |
//! | `masks`      | u8 or u16  | `[T, H, W]` | semantic class id, 0 = unlabeled      |
//!
//! Additional track sets (for multi-seed tracking) go in `extra_track_sets`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraModel, Extrinsic, Intrinsics, Pose};
use crate::tensor::{self, element_count, BlobError, DType, TensorDescriptor, TensorError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepthUnits {
    #[default]
    Meters,
    Relative,
}

fn default_extension() -> String {
    "png".to_string()
}

fn default_digits() -> usize {
    6
}

/// Location of pre-extracted video frames, named `<prefix><index>.<extension>`
/// where `index` is the zero-padded source-video frame index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameSource {
    pub dir: String,
    #[serde(default)]
    pub prefix: String,
    #[serde(default = "default_digits")]
    pub digits: usize,
    #[serde(default = "default_extension")]
    pub extension: String,
}

impl FrameSource {
    pub fn file_name(&self, source_frame: usize) -> String {
        format!(
            "{}{:0width$}.{}",
            self.prefix,
            source_frame,
            self.extension,
            width = self.digits
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackSetDescriptor {
    pub init_timestep: usize,
    pub tracks: TensorDescriptor,
    pub visibility: TensorDescriptor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneManifest {
    pub scene_id: String,
    pub num_timesteps: usize,
    /// Source-video frames per timestep.
    pub frame_stride: usize,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub intrinsics: Intrinsics,
    /// Camera-to-world pose per timestep; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extrinsics: Option<Vec<Extrinsic>>,
    #[serde(default)]
    pub depth_units: DepthUnits,
    pub depths: TensorDescriptor,
    pub tracks: TensorDescriptor,
    pub visibility: TensorDescriptor,
    /// Seed frame of the primary track set; the middle frame when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_init_timestep: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra_track_sets: Vec<TrackSetDescriptor>,
    pub masks: TensorDescriptor,
    pub classes: BTreeMap<u16, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameSource>,
}

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("{field}: missing file {path}")]
    MissingFile { field: String, path: PathBuf },
    #[error("{field}: {message}")]
    SchemaViolation { field: String, message: String },
    #[error("{field}: shape mismatch, expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        field: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl SceneError {
    /// The manifest field the error is about.
    pub fn field(&self) -> &str {
        match self {
            SceneError::MissingFile { field, .. }
            | SceneError::SchemaViolation { field, .. }
            | SceneError::ShapeMismatch { field, .. } => field,
            SceneError::Io { .. } => "",
        }
    }

    fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        SceneError::SchemaViolation {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<BlobError> for SceneError {
    fn from(e: BlobError) -> Self {
        match e {
            BlobError::MissingFile { field, path } => SceneError::MissingFile { field, path },
            BlobError::Tensor { field, source } => match source {
                TensorError::DType { .. } | TensorError::ByteLength { .. } | TensorError::ShapeOverflow(_) => {
                    SceneError::schema(field, source.to_string())
                }
            },
            BlobError::Io { path, source, .. } => SceneError::Io { path, source },
        }
    }
}

fn expect_shape(field: &str, desc: &TensorDescriptor, expected: &[usize]) -> Result<(), SceneError> {
    if desc.shape != expected {
        return Err(SceneError::ShapeMismatch {
            field: field.to_string(),
            expected: expected.to_vec(),
            found: desc.shape.clone(),
        });
    }
    if desc.num_elements().is_none() {
        return Err(SceneError::schema(field, "shape overflows"));
    }
    Ok(())
}

fn expect_dtype(field: &str, desc: &TensorDescriptor, allowed: &[DType]) -> Result<(), SceneError> {
    if !allowed.contains(&desc.dtype) {
        return Err(SceneError::schema(
            field,
            format!("dtype {} not allowed here (allowed: {:?})", desc.dtype, allowed),
        ));
    }
    Ok(())
}

fn check_track_set(
    prefix: &str,
    tracks: &TensorDescriptor,
    visibility: &TensorDescriptor,
    num_timesteps: usize,
) -> Result<usize, SceneError> {
    let tracks_field = format!("{prefix}tracks");
    let vis_field = format!("{prefix}visibility");
    expect_dtype(&tracks_field, tracks, &[DType::F32])?;
    expect_dtype(&vis_field, visibility, &[DType::U8])?;
    let n = match tracks.shape.as_slice() {
        [n, _, _] => *n,
        _ => {
            return Err(SceneError::ShapeMismatch {
                field: tracks_field,
                expected: vec![0, num_timesteps, 2],
                found: tracks.shape.clone(),
            })
        }
    };
    expect_shape(&tracks_field, tracks, &[n, num_timesteps, 2])?;
    expect_shape(&vis_field, visibility, &[n, num_timesteps])?;
    Ok(n)
}

impl SceneManifest {
    /// Parses and structurally validates a manifest (no blob access).
    pub fn from_json_str(text: &str) -> Result<Self, SceneError> {
        let manifest: SceneManifest =
            serde_json::from_str(text).map_err(|e| SceneError::schema("manifest", e.to_string()))?;
        manifest.check_structure()?;
        Ok(manifest)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn primary_init_timestep(&self) -> usize {
        self.track_init_timestep.unwrap_or(self.num_timesteps / 2)
    }

    pub fn check_structure(&self) -> Result<(), SceneError> {
        let t = self.num_timesteps;
        if t < 2 {
            return Err(SceneError::schema("num_timesteps", format!("need at least 2 timesteps, got {t}")));
        }
        if self.frame_stride < 1 {
            return Err(SceneError::schema("frame_stride", "must be at least 1"));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return Err(SceneError::schema("fps", "must be positive"));
        }
        if self.width == 0 || self.height == 0 {
            return Err(SceneError::schema("width", "image dimensions must be nonzero"));
        }
        if element_count(&[t, self.height, self.width]).is_none() {
            return Err(SceneError::schema("width", "image dimensions overflow"));
        }
        let k = &self.intrinsics;
        if !(k.fx.is_finite() && k.fx > 0.0 && k.fy.is_finite() && k.fy > 0.0) {
            return Err(SceneError::schema("intrinsics", "fx and fy must be positive"));
        }
        if !(k.cx.is_finite() && k.cy.is_finite()) {
            return Err(SceneError::schema("intrinsics", "cx and cy must be finite"));
        }
        if let Some(ext) = &self.extrinsics {
            if ext.len() != t {
                return Err(SceneError::ShapeMismatch {
                    field: "extrinsics".into(),
                    expected: vec![t],
                    found: vec![ext.len()],
                });
            }
            for (i, e) in ext.iter().enumerate() {
                let finite = e.rotation.iter().flatten().chain(e.translation.iter()).all(|v| v.is_finite());
                if !finite || !Pose::from(e).is_proper_rigid() {
                    return Err(SceneError::schema(
                        format!("extrinsics[{i}]"),
                        "rotation must be orthonormal (RᵀR = I within 1e-6) with positive determinant",
                    ));
                }
            }
        }

        let hw = [t, self.height, self.width];
        expect_dtype("depths", &self.depths, &[DType::F32])?;
        expect_shape("depths", &self.depths, &hw)?;
        expect_dtype("masks", &self.masks, &[DType::U8, DType::U16])?;
        expect_shape("masks", &self.masks, &hw)?;

        check_track_set("", &self.tracks, &self.visibility, t)?;
        if let Some(init) = self.track_init_timestep {
            if init >= t {
                return Err(SceneError::schema("track_init_timestep", format!("{init} is not below T = {t}")));
            }
        }
        for (i, set) in self.extra_track_sets.iter().enumerate() {
            let prefix = format!("extra_track_sets[{i}].");
            check_track_set(&prefix, &set.tracks, &set.visibility, t)?;
            if set.init_timestep >= t {
                return Err(SceneError::schema(
                    format!("{prefix}init_timestep"),
                    format!("{} is not below T = {t}", set.init_timestep),
                ));
            }
        }

        if let Some(frames) = &self.frames {
            if frames.dir.is_empty() || frames.extension.is_empty() || frames.digits > 12 {
                return Err(SceneError::schema("frames", "dir and extension must be nonempty, digits ≤ 12"));
            }
        }
        Ok(())
    }

    pub fn camera(&self) -> CameraModel {
        let poses = match &self.extrinsics {
            Some(ext) => ext.iter().map(Pose::from).collect(),
            None => vec![Pose::identity(); self.num_timesteps],
        };
        CameraModel::new(self.intrinsics, poses)
    }
}

/// One tracker run: `N` points over all `T` timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackSet {
    pub init_timestep: usize,
    pub num_points: usize,
    pub num_timesteps: usize,
    /// `N × T × 2` pixel coordinates.
    pub coords: Vec<f32>,
    /// `N × T`.
    pub visible: Vec<bool>,
}

impl TrackSet {
    #[inline]
    pub fn coord(&self, n: usize, t: usize) -> [f64; 2] {
        let i = (n * self.num_timesteps + t) * 2;
        [self.coords[i] as f64, self.coords[i + 1] as f64]
    }

    #[inline]
    pub fn is_visible(&self, n: usize, t: usize) -> bool {
        self.visible[n * self.num_timesteps + t]
    }
}

/// A fully materialized scene. Immutable once loaded.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneBundle {
    pub manifest: SceneManifest,
    /// Directory the manifest's relative paths resolve against.
    pub base_dir: PathBuf,
    pub camera: CameraModel,
    /// `T × H × W` depths.
    pub depths: Vec<f32>,
    /// Primary set first, then `extra_track_sets` in manifest order.
    pub track_sets: Vec<TrackSet>,
    /// `T × H × W` class ids.
    pub masks: Vec<u16>,
}

impl SceneBundle {
    pub fn num_timesteps(&self) -> usize {
        self.manifest.num_timesteps
    }

    pub fn width(&self) -> usize {
        self.manifest.width
    }

    pub fn height(&self) -> usize {
        self.manifest.height
    }

    pub fn frame_len(&self) -> usize {
        self.manifest.width * self.manifest.height
    }

    pub fn depth_frame(&self, t: usize) -> &[f32] {
        let n = self.frame_len();
        &self.depths[t * n..(t + 1) * n]
    }

    pub fn mask_frame(&self, t: usize) -> &[u16] {
        let n = self.frame_len();
        &self.masks[t * n..(t + 1) * n]
    }

    #[inline]
    pub fn depth_at(&self, t: usize, x: usize, y: usize) -> f32 {
        self.depths[(t * self.manifest.height + y) * self.manifest.width + x]
    }

    #[inline]
    pub fn class_at(&self, t: usize, x: usize, y: usize) -> u16 {
        self.masks[(t * self.manifest.height + y) * self.manifest.width + x]
    }

    pub fn primary_tracks(&self) -> &TrackSet {
        &self.track_sets[0]
    }

    pub fn class_name(&self, id: u16) -> Option<&str> {
        self.manifest.classes.get(&id).map(String::as_str)
    }

    /// Absolute frame directory, if the manifest names one.
    pub fn frames_dir(&self) -> Option<PathBuf> {
        self.manifest.frames.as_ref().map(|f| self.base_dir.join(&f.dir))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// Top-level manifest field, e.g. `depths`.
    pub field: String,
    /// Element location within the field, if any.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    /// Conditions that are accepted but worth surfacing, e.g. non-metric depth.
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_VIOLATIONS_PER_FIELD: usize = 20;

struct Collector<'a> {
    report: &'a mut ValidationReport,
    field: &'static str,
    count: usize,
}

impl<'a> Collector<'a> {
    fn new(report: &'a mut ValidationReport, field: &'static str) -> Self {
        Self { report, field, count: 0 }
    }

    fn push(&mut self, location: Option<String>, message: String) {
        self.count += 1;
        if self.count <= MAX_VIOLATIONS_PER_FIELD {
            self.report.violations.push(Violation {
                field: self.field.to_string(),
                location,
                message,
            });
        }
    }

    fn finish(self) {
        if self.count > MAX_VIOLATIONS_PER_FIELD {
            self.report.violations.push(Violation {
                field: self.field.to_string(),
                location: None,
                message: format!("{} further violations suppressed", self.count - MAX_VIOLATIONS_PER_FIELD),
            });
        }
    }
}

/// Checks every bundle invariant. Pure: never mutates, never fails.
pub fn validate_bundle(bundle: &SceneBundle) -> ValidationReport {
    let mut report = ValidationReport::default();
    let m = &bundle.manifest;
    let (t_n, h, w) = (m.num_timesteps, m.height, m.width);
    let frame = w * h;

    if let Err(e) = m.check_structure() {
        report.violations.push(Violation {
            field: e.field().to_string(),
            location: None,
            message: e.to_string(),
        });
    }

    {
        let mut c = Collector::new(&mut report, "camera");
        let k = &bundle.camera.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0) {
            c.push(None, "fx and fy must be positive".into());
        }
        if bundle.camera.poses.len() != t_n {
            c.push(None, format!("{} poses for {t_n} timesteps", bundle.camera.poses.len()));
        }
        for (i, pose) in bundle.camera.poses.iter().enumerate() {
            if !pose.is_proper_rigid() {
                c.push(Some(format!("[t={i}]")), "rotation is not orthonormal".into());
            }
        }
        c.finish();
    }

    {
        let mut c = Collector::new(&mut report, "depths");
        if bundle.depths.len() != t_n * frame {
            c.push(None, format!("{} values, expected {}", bundle.depths.len(), t_n * frame));
        } else {
            for (i, &d) in bundle.depths.iter().enumerate() {
                if !(d.is_finite() && d >= 0.0) {
                    let (t, rem) = (i / frame, i % frame);
                    c.push(
                        Some(format!("[t={t}, v={}, u={}]", rem / w, rem % w)),
                        format!("depth {d} is negative or non-finite"),
                    );
                }
            }
        }
        c.finish();
    }

    {
        let mut c = Collector::new(&mut report, "tracks");
        for (s, set) in bundle.track_sets.iter().enumerate() {
            let n = set.num_points;
            if set.coords.len() != n * t_n * 2 || set.visible.len() != n * t_n || set.num_timesteps != t_n {
                c.push(Some(format!("[set={s}]")), "track arrays do not match N × T".into());
                continue;
            }
            if set.init_timestep >= t_n {
                c.push(Some(format!("[set={s}]")), "init timestep out of range".into());
            }
            for p in 0..n {
                for t in 0..t_n {
                    let [u, v] = set.coord(p, t);
                    if !(u.is_finite() && v.is_finite()) {
                        c.push(Some(format!("[set={s}, n={p}, t={t}]")), "non-finite coordinate".into());
                    } else if set.is_visible(p, t) && !(u >= 0.0 && u < w as f64 && v >= 0.0 && v < h as f64) {
                        c.push(
                            Some(format!("[set={s}, n={p}, t={t}]")),
                            format!("visible track at ({u}, {v}) lies outside the {w}×{h} image"),
                        );
                    }
                }
            }
        }
        if bundle.track_sets.is_empty() {
            c.push(None, "no track sets".into());
        }
        c.finish();
    }

    {
        let mut c = Collector::new(&mut report, "masks");
        if bundle.masks.len() != t_n * frame {
            c.push(None, format!("{} values, expected {}", bundle.masks.len(), t_n * frame));
        } else {
            let present: BTreeSet<u16> = bundle.masks.iter().copied().collect();
            for id in present {
                if id != 0 && !m.classes.contains_key(&id) {
                    c.push(Some(format!("[class={id}]")), format!("class id {id} is missing from the class table"));
                }
                if m.masks.dtype == DType::U8 && id > u8::MAX as u16 {
                    c.push(Some(format!("[class={id}]")), "class id does not fit the u8 mask dtype".into());
                }
            }
        }
        c.finish();
    }

    if m.depth_units == DepthUnits::Relative {
        report
            .warnings
            .push("depths are non-metric (relative); distances are in arbitrary units".into());
    }
    report
}

fn read_track_set(
    base: &Path,
    prefix: &str,
    tracks: &TensorDescriptor,
    visibility: &TensorDescriptor,
    init_timestep: usize,
    num_timesteps: usize,
) -> Result<TrackSet, SceneError> {
    let coords: Vec<f32> = tensor::read_tensor(base, tracks, &format!("{prefix}tracks"))?;
    let vis_raw: Vec<u8> = tensor::read_tensor(base, visibility, &format!("{prefix}visibility"))?;
    if let Some(bad) = vis_raw.iter().find(|&&v| v > 1) {
        return Err(SceneError::schema(
            format!("{prefix}visibility"),
            format!("visibility values must be 0 or 1, found {bad}"),
        ));
    }
    Ok(TrackSet {
        init_timestep,
        num_points: tracks.shape[0],
        num_timesteps,
        coords,
        visible: vis_raw.into_iter().map(|v| v == 1).collect(),
    })
}

/// Loads, decodes and validates a scene. Any invariant violation is an error.
pub fn load_scene(manifest_path: &Path) -> Result<SceneBundle, SceneError> {
    let text = match fs::read_to_string(manifest_path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(SceneError::MissingFile {
                field: "manifest".into(),
                path: manifest_path.to_path_buf(),
            })
        }
        Err(source) => {
            return Err(SceneError::Io {
                path: manifest_path.to_path_buf(),
                source,
            })
        }
    };
    let manifest = SceneManifest::from_json_str(&text)?;
    let base = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let t_n = manifest.num_timesteps;

    let depths: Vec<f32> = tensor::read_tensor(&base, &manifest.depths, "depths")?;
    let masks: Vec<u16> = match manifest.masks.dtype {
        DType::U8 => tensor::read_tensor::<u8>(&base, &manifest.masks, "masks")?
            .into_iter()
            .map(u16::from)
            .collect(),
        _ => tensor::read_tensor::<u16>(&base, &manifest.masks, "masks")?,
    };
    let mut track_sets = vec![read_track_set(
        &base,
        "",
        &manifest.tracks,
        &manifest.visibility,
        manifest.primary_init_timestep(),
        t_n,
    )?];
    for (i, set) in manifest.extra_track_sets.iter().enumerate() {
        track_sets.push(read_track_set(
            &base,
            &format!("extra_track_sets[{i}]."),
            &set.tracks,
            &set.visibility,
            set.init_timestep,
            t_n,
        )?);
    }

    let bundle = SceneBundle {
        camera: manifest.camera(),
        manifest,
        base_dir: base,
        depths,
        track_sets,
        masks,
    };
    let report = validate_bundle(&bundle);
    if let Some(v) = report.violations.first() {
        let message = match &v.location {
            Some(loc) => format!("{loc}: {}", v.message),
            None => v.message.clone(),
        };
        return Err(SceneError::SchemaViolation {
            field: v.field.clone(),
            message,
        });
    }
    for w in &report.warnings {
        log::warn!("{}: {w}", bundle.manifest.scene_id);
    }
    Ok(bundle)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SceneError + '_ {
    move |source| SceneError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes the bundle as `manifest.json` plus blobs into `dir`; returns the manifest path.
pub fn write_bundle(bundle: &SceneBundle, dir: &Path) -> Result<PathBuf, SceneError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut manifest = bundle.manifest.clone();
    let t_n = manifest.num_timesteps;
    let hw = vec![t_n, manifest.height, manifest.width];

    manifest.depths = tensor::write_tensor(dir, "depths.bin", &bundle.depths, hw.clone())?;
    manifest.masks = if manifest.masks.dtype == DType::U8 {
        let narrow: Vec<u8> = bundle.masks.iter().map(|&v| v as u8).collect();
        tensor::write_tensor(dir, "masks.bin", &narrow, hw)?
    } else {
        tensor::write_tensor(dir, "masks.bin", &bundle.masks, hw)?
    };

    let write_set = |set: &TrackSet, suffix: &str| -> Result<(TensorDescriptor, TensorDescriptor), SceneError> {
        let vis: Vec<u8> = set.visible.iter().map(|&v| v as u8).collect();
        Ok((
            tensor::write_tensor(
                dir,
                &format!("tracks{suffix}.bin"),
                &set.coords,
                vec![set.num_points, t_n, 2],
            )?,
            tensor::write_tensor(dir, &format!("visibility{suffix}.bin"), &vis, vec![set.num_points, t_n])?,
        ))
    };
    let primary = bundle
        .track_sets
        .first()
        .ok_or_else(|| SceneError::schema("tracks", "bundle has no track sets"))?;
    let (tracks, visibility) = write_set(primary, "")?;
    manifest.tracks = tracks;
    manifest.visibility = visibility;
    manifest.track_init_timestep = Some(primary.init_timestep);
    manifest.extra_track_sets = bundle.track_sets[1..]
        .iter()
        .enumerate()
        .map(|(i, set)| {
            let (tracks, visibility) = write_set(set, &format!("_{}", i + 1))?;
            Ok(TrackSetDescriptor {
                init_timestep: set.init_timestep,
                tracks,
                visibility,
            })
        })
        .collect::<Result<_, SceneError>>()?;

    if let Some(frames) = &mut manifest.frames {
        let resolved = bundle.base_dir.join(&frames.dir);
        let resolved = if resolved.is_absolute() {
            resolved
        } else {
            std::env::current_dir().map_err(io_err(dir))?.join(resolved)
        };
        frames.dir = resolved.to_string_lossy().into_owned();
    }

    let path = dir.join("manifest.json");
    fs::write(&path, manifest.to_json_string()).map_err(io_err(&path))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;

    pub(crate) fn tiny_bundle() -> SceneBundle {
        let (t, h, w, n) = (3usize, 4usize, 5usize, 2usize);
        let hw = vec![t, h, w];
        let manifest = SceneManifest {
            scene_id: "tiny".into(),
            num_timesteps: t,
            frame_stride: 4,
            fps: 25.0,
            width: w,
            height: h,
            intrinsics: Intrinsics {
                fx: 10.0,
                fy: 10.0,
                cx: 2.0,
                cy: 1.5,
            },
            extrinsics: None,
            depth_units: DepthUnits::Meters,
            depths: TensorDescriptor::new("depths.bin", DType::F32, hw.clone()),
            tracks: TensorDescriptor::new("tracks.bin", DType::F32, vec![n, t, 2]),
            visibility: TensorDescriptor::new("visibility.bin", DType::U8, vec![n, t]),
            track_init_timestep: Some(1),
            extra_track_sets: vec![],
            masks: TensorDescriptor::new("masks.bin", DType::U8, hw),
            classes: BTreeMap::from([(1, "liver".to_string())]),
            frames: None,
        };
        SceneBundle {
            camera: manifest.camera(),
            manifest,
            base_dir: PathBuf::from("."),
            depths: vec![1.0; t * h * w],
            track_sets: vec![TrackSet {
                init_timestep: 1,
                num_points: n,
                num_timesteps: t,
                coords: vec![1.0; n * t * 2],
                visible: vec![true; n * t],
            }],
            masks: vec![1; t * h * w],
        }
    }

    #[test]
    fn pristine_bundle_has_empty_report() {
        assert_eq!(validate_bundle(&tiny_bundle()), ValidationReport::default());
    }

    #[test]
    fn negative_depth_names_the_pixel() {
        let mut b = tiny_bundle();
        b.depths[20 + 5 + 3] = -1.0;
        let r = validate_bundle(&b);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "depths");
        assert_eq!(r.violations[0].location.as_deref(), Some("[t=1, v=1, u=3]"));
    }

    #[test]
    fn unknown_mask_class_is_one_violation() {
        let mut b = tiny_bundle();
        b.masks[3] = 7;
        b.masks[9] = 7;
        let r = validate_bundle(&b);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "masks");
    }

    #[test]
    fn visible_track_outside_image_is_a_violation() {
        let mut b = tiny_bundle();
        b.track_sets[0].coords[0] = 8.0;
        let r = validate_bundle(&b);
        assert_eq!(r.violations.len(), 1);
        assert_eq!(r.violations[0].field, "tracks");
        b.track_sets[0].visible[0] = false;
        assert!(validate_bundle(&b).is_clean());
    }

    #[test]
    fn relative_depth_is_a_warning_only() {
        let mut b = tiny_bundle();
        b.manifest.depth_units = DepthUnits::Relative;
        let r = validate_bundle(&b);
        assert!(r.is_clean());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn validation_is_pure() {
        let mut b = tiny_bundle();
        b.depths[0] = f32::NAN;
        assert_eq!(validate_bundle(&b), validate_bundle(&b));
    }

    #[test]
    fn manifest_with_short_depth_tensor_is_a_shape_mismatch() {
        let mut m = tiny_bundle().manifest;
        m.depths.shape[0] = 2;
        let err = SceneManifest::from_json_str(&serde_json::to_string(&m).unwrap()).unwrap_err();
        assert!(matches!(err, SceneError::ShapeMismatch { .. }));
        assert_eq!(err.field(), "depths");
    }

    #[test]
    fn frame_file_names_are_zero_padded() {
        let f = FrameSource {
            dir: "frames".into(),
            prefix: "f_".into(),
            digits: 5,
            extension: "jpg".into(),
        };
        assert_eq!(f.file_name(36), "f_00036.jpg");
    }
}
