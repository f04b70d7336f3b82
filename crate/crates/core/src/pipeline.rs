//! End-to-end build: lift → densify → semantics, persisted next to a
//! scene document that records the configuration fingerprint.
//!
//! Stage outputs can be cached by content hash so that ablation sweeps
//! only recompute the stages whose inputs changed.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::camera::{CameraModel, Extrinsic, Intrinsics, Pose};
use crate::densification::{self, DensePointCloud, DensifyConfig, DensifyError};
use crate::evaluation::SceneInfo;
use crate::lifting::{self, ControlPointCloud, LiftConfig, LiftError, LiftReport};
use crate::scene_io::{load_scene, FrameSource, SceneBundle, SceneError};
use crate::semantics::{self, Connectivity, InstanceTable, MergeConfig, SemanticsError};
use crate::tensor::ArchiveError;
use crate::toolkit::{Scene4D, SceneParts, DEFAULT_DIRECTION_EPSILON};

/// A timestep given directly or relative to the clip.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameSpec {
    Index(usize),
    Named(NamedFrame),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NamedFrame {
    First,
    Mid,
    Last,
}

impl FrameSpec {
    pub fn resolve(&self, num_timesteps: usize) -> usize {
        match self {
            FrameSpec::Index(t) => *t,
            FrameSpec::Named(NamedFrame::First) => 0,
            FrameSpec::Named(NamedFrame::Mid) => num_timesteps / 2,
            FrameSpec::Named(NamedFrame::Last) => num_timesteps.saturating_sub(1),
        }
    }

    /// Parses `"0,mid,last"`.
    pub fn parse_list(s: &str) -> Result<Vec<FrameSpec>, String> {
        s.split(',').map(|p| p.trim().parse()).collect()
    }
}

impl std::str::FromStr for FrameSpec {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "first" => FrameSpec::Named(NamedFrame::First),
            "mid" | "middle" => FrameSpec::Named(NamedFrame::Mid),
            "last" => FrameSpec::Named(NamedFrame::Last),
            _ => FrameSpec::Index(s.parse().map_err(|_| format!("bad frame {s:?}"))?),
        })
    }
}

impl fmt::Display for FrameSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FrameSpec::Index(t) => write!(f, "{t}"),
            FrameSpec::Named(NamedFrame::First) => f.write_str("first"),
            FrameSpec::Named(NamedFrame::Mid) => f.write_str("mid"),
            FrameSpec::Named(NamedFrame::Last) => f.write_str("last"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SemanticsConfig {
    pub seed_frames: Vec<FrameSpec>,
    /// Defaults to the control cloud's init timestep.
    pub t_ref: Option<FrameSpec>,
    /// Defaults to twice the median control spacing at `t_ref`.
    pub radius: Option<f64>,
    pub tau: f64,
    pub min_component_pixels: usize,
    pub connectivity: Connectivity,
    pub presence_fraction: f64,
}

impl Default for SemanticsConfig {
    fn default() -> Self {
        Self {
            seed_frames: vec![
                FrameSpec::Named(NamedFrame::First),
                FrameSpec::Named(NamedFrame::Mid),
                FrameSpec::Named(NamedFrame::Last),
            ],
            t_ref: None,
            radius: None,
            tau: 0.6,
            min_component_pixels: 4,
            connectivity: Connectivity::Four,
            presence_fraction: 0.2,
        }
    }
}

impl SemanticsConfig {
    pub fn resolve(&self, controls: &ControlPointCloud) -> MergeConfig {
        let t_n = controls.num_timesteps;
        let mut seeds: Vec<usize> = self.seed_frames.iter().map(|f| f.resolve(t_n)).collect();
        seeds.sort_unstable();
        seeds.dedup();
        let t_ref = self.t_ref.map_or(controls.init_timestep, |f| f.resolve(t_n));
        MergeConfig {
            seed_frames: seeds,
            t_ref,
            radius: self
                .radius
                .unwrap_or_else(|| semantics::default_radius(controls, t_ref.min(t_n.saturating_sub(1)))),
            tau: self.tau,
            min_component_pixels: self.min_component_pixels,
            connectivity: self.connectivity,
            presence_fraction: self.presence_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub direction_epsilon: f64,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            direction_epsilon: DEFAULT_DIRECTION_EPSILON,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    /// Pixel error for unparseable spatial answers; the image diagonal when absent.
    pub spatial_penalty_px: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub lift: LiftConfig,
    pub densify: DensifyConfig,
    pub semantics: SemanticsConfig,
    pub toolkit: ToolkitConfig,
    pub evaluation: EvalConfig,
}

impl PipelineConfig {
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn fingerprint(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }

    pub fn from_json_str(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// The configurations compared in an ablation sweep.
pub fn ablation_configs(base: &PipelineConfig) -> Vec<(&'static str, PipelineConfig)> {
    let mut no_jump = base.clone();
    no_jump.lift.enable_jump_filter = false;
    let mut no_maint = base.clone();
    no_maint.lift.enable_depth_maintenance = false;
    let mut multi = base.clone();
    multi.lift.multi_frame = true;
    vec![
        ("full", base.clone()),
        ("no_jump_filter", no_jump),
        ("no_depth_maintenance", no_maint),
        ("multi_frame_init", multi),
    ]
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("load: {0}")]
    Load(#[from] SceneError),
    #[error("lift: {0}")]
    Lift(#[from] LiftError),
    #[error("densify: {0}")]
    Densify(#[from] DensifyError),
    #[error("semantics: {0}")]
    Semantics(#[from] SemanticsError),
    #[error("artifact {stage}: {source}")]
    Artifact {
        stage: &'static str,
        #[source]
        source: ArchiveError,
    },
    #[error("scene: {0}")]
    Scene(String),
    #[error("io {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn artifact(stage: &'static str) -> impl FnOnce(ArchiveError) -> PipelineError {
    move |source| PipelineError::Artifact { stage, source }
}

/// Content hash of everything a build reads from the bundle.
pub fn bundle_digest(bundle: &SceneBundle) -> String {
    let mut h = Sha256::new();
    let mut manifest = bundle.manifest.clone();
    manifest.frames = None;
    h.update(manifest.to_json_string().as_bytes());
    for z in &bundle.depths {
        h.update(z.to_le_bytes());
    }
    for c in &bundle.masks {
        h.update(c.to_le_bytes());
    }
    for set in &bundle.track_sets {
        h.update((set.init_timestep as u64).to_le_bytes());
        for c in &set.coords {
            h.update(c.to_le_bytes());
        }
        h.update(set.visible.iter().map(|&v| v as u8).collect::<Vec<u8>>());
    }
    hex::encode(h.finalize())
}

fn stage_key(parent: &str, stage: &str, config: &impl Serialize) -> String {
    let mut h = Sha256::new();
    h.update(parent.as_bytes());
    h.update(b"\0");
    h.update(stage.as_bytes());
    h.update(b"\0");
    h.update(serde_json::to_vec(config).expect("stage config serializes"));
    hex::encode(h.finalize())
}

/// Directory of stage outputs keyed by content hash.
#[derive(Debug, Clone)]
pub struct StageCache {
    root: PathBuf,
}

impl StageCache {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    fn entry(&self, key: &str) -> PathBuf {
        self.root.join(key)
    }
}

/// In-memory build result.
#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub controls: ControlPointCloud,
    pub lift_report: Option<LiftReport>,
    pub dense: DensePointCloud,
    pub instances: InstanceTable,
    pub merge_config: MergeConfig,
    pub stage_keys: StageKeys,
    /// Stages served from the cache.
    pub cached: Vec<&'static str>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageKeys {
    pub lift: String,
    pub densify: String,
    pub semantics: String,
}

/// Densification config after filling in defaults derived from the semantics stage.
pub fn effective_densify(config: &PipelineConfig, controls: &ControlPointCloud) -> DensifyConfig {
    let mut d = config.densify.clone();
    if d.seed_frames.is_none() {
        d.seed_frames = Some(config.semantics.resolve(controls).seed_frames);
    }
    d
}

/// Dense cloud for `controls`, with class ids attached.
pub fn densify_stage(
    bundle: &SceneBundle,
    controls: &ControlPointCloud,
    lift: &LiftConfig,
    densify: &DensifyConfig,
) -> Result<DensePointCloud, PipelineError> {
    let frames = densification::resolve_seed_frames(densify, controls);
    let masks = if lift.enable_gradient_filter {
        densification::gradient_masks(bundle, &frames, lift.gradient_percentile)
    } else {
        BTreeMap::new()
    };
    let assignments = densification::assign_pixels(bundle, controls, &masks, densify)?;
    Ok(densification::attach_semantics(
        densification::densify(&assignments, controls),
        bundle,
    ))
}

/// Runs the three stages on an in-memory bundle.
pub fn run_stages(
    bundle: &SceneBundle,
    config: &PipelineConfig,
    cache: Option<&StageCache>,
) -> Result<BuildOutput, PipelineError> {
    let digest = bundle_digest(bundle);
    let mut cached = Vec::new();

    let lift_key = stage_key(&digest, "lift", &config.lift);
    let cached_controls = match cache {
        Some(c) => try_load(&c.entry(&lift_key).join("controls.json"), ControlPointCloud::load),
        None => None,
    };
    let (controls, lift_report) = match cached_controls {
        Some(ctrl) => {
            cached.push("lift");
            (ctrl, None)
        }
        None => {
            let (ctrl, report) = lifting::lift_tracks_with_report(bundle, &config.lift)?;
            for set in &report.track_sets {
                for w in &set.warnings {
                    log::warn!("{w}");
                }
            }
            if let Some(c) = cache {
                let dir = c.entry(&lift_key);
                std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                ctrl.save(&dir, "controls").map_err(artifact("lift"))?;
            }
            (ctrl, Some(report))
        }
    };

    let densify_cfg = effective_densify(config, &controls);
    let densify_key = stage_key(&lift_key, "densify", &(&densify_cfg, config.lift.enable_gradient_filter, config.lift.gradient_percentile));
    let cached_dense = match cache {
        Some(c) => try_load(&c.entry(&densify_key).join("dense.json"), DensePointCloud::load),
        None => None,
    };
    let dense = match cached_dense {
        Some(d) => {
            cached.push("densify");
            d
        }
        None => {
            let d = densify_stage(bundle, &controls, &config.lift, &densify_cfg)?;
            if let Some(c) = cache {
                let dir = c.entry(&densify_key);
                std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                d.save(&dir, "dense").map_err(artifact("densify"))?;
            }
            d
        }
    };

    let merge = config.semantics.resolve(&controls);
    let sem_key = stage_key(&densify_key, "semantics", &merge);
    let cached_table = match cache {
        Some(c) => try_load(&c.entry(&sem_key).join("instances.json"), InstanceTable::load),
        None => None,
    };
    let instances = match cached_table {
        Some(t) => {
            cached.push("semantics");
            t
        }
        None => {
            let t = semantics::build_instances(bundle, &dense, &controls, &merge)?;
            if let Some(c) = cache {
                let dir = c.entry(&sem_key);
                std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
                t.save(&dir, "instances").map_err(artifact("semantics"))?;
            }
            t
        }
    };

    Ok(BuildOutput {
        controls,
        lift_report,
        dense,
        instances,
        merge_config: merge,
        stage_keys: StageKeys {
            lift: lift_key,
            densify: densify_key,
            semantics: sem_key,
        },
        cached,
    })
}

fn try_load<T>(path: &Path, load: impl FnOnce(&Path) -> Result<T, ArchiveError>) -> Option<T> {
    if !path.is_file() {
        return None;
    }
    match load(path) {
        Ok(v) => Some(v),
        Err(e) => {
            log::warn!("ignoring unreadable cache entry {}: {e}", path.display());
            None
        }
    }
}

/// Top-level document of a built scene directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDoc {
    pub kind: String,
    pub version: u32,
    pub scene_id: String,
    pub fingerprint: String,
    pub bundle_digest: String,
    pub config: PipelineConfig,
    pub num_timesteps: usize,
    pub width: usize,
    pub height: usize,
    pub frame_stride: usize,
    pub intrinsics: Intrinsics,
    pub extrinsics: Vec<Extrinsic>,
    pub classes: BTreeMap<u16, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frames: Option<FrameSource>,
    pub stages: StageKeys,
    pub artifacts: Artifacts,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifacts {
    pub controls: String,
    pub dense: String,
    pub instances: String,
}

impl SceneDoc {
    pub const KIND: &'static str = "scene4d";
    pub const FILE: &'static str = "scene.json";

    pub fn camera(&self) -> CameraModel {
        CameraModel::new(self.intrinsics, self.extrinsics.iter().map(Pose::from).collect())
    }

    pub fn scene_info(&self) -> SceneInfo {
        SceneInfo {
            num_timesteps: self.num_timesteps,
            width: self.width,
            height: self.height,
            camera: self.camera(),
            spatial_penalty: self.config.evaluation.spatial_penalty_px,
        }
    }
}

/// Assembles the tool-facing scene from a build.
pub fn assemble(bundle: &SceneBundle, out: &BuildOutput) -> Result<Scene4D, PipelineError> {
    let frames = bundle.manifest.frames.as_ref().map(|f| FrameSource {
        dir: bundle.base_dir.join(&f.dir).to_string_lossy().into_owned(),
        ..f.clone()
    });
    Scene4D::from_parts(SceneParts {
        scene_id: bundle.manifest.scene_id.clone(),
        width: bundle.width(),
        height: bundle.height(),
        frame_stride: bundle.manifest.frame_stride,
        camera: bundle.camera.clone(),
        controls: out.controls.clone(),
        dense: out.dense.clone(),
        instances: out.instances.clone(),
        classes: bundle.manifest.classes.clone(),
        frames,
    })
    .map_err(|e| PipelineError::Scene(e.to_string()))
}

/// Builds the scene at `manifest` into `out_dir`. Rerunning with the same
/// inputs and config rewrites byte-identical files.
pub fn build(
    manifest: &Path,
    config: &PipelineConfig,
    out_dir: &Path,
    cache: Option<&StageCache>,
) -> Result<(Scene4D, SceneDoc, BuildOutput), PipelineError> {
    let bundle = load_scene(manifest)?;
    build_bundle(&bundle, config, out_dir, cache)
}

pub fn build_bundle(
    bundle: &SceneBundle,
    config: &PipelineConfig,
    out_dir: &Path,
    cache: Option<&StageCache>,
) -> Result<(Scene4D, SceneDoc, BuildOutput), PipelineError> {
    let out = run_stages(bundle, config, cache)?;
    let scene = assemble(bundle, &out)?;
    std::fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    out.controls.save(out_dir, "controls").map_err(artifact("lift"))?;
    out.dense.save(out_dir, "dense").map_err(artifact("densify"))?;
    out.instances.save(out_dir, "instances").map_err(artifact("semantics"))?;
    let doc = SceneDoc {
        kind: SceneDoc::KIND.into(),
        version: 1,
        scene_id: scene.scene_id().to_string(),
        fingerprint: config.fingerprint(),
        bundle_digest: bundle_digest(bundle),
        config: config.clone(),
        num_timesteps: scene.num_timesteps(),
        width: scene.width(),
        height: scene.height(),
        frame_stride: scene.frame_stride(),
        intrinsics: scene.camera().intrinsics,
        extrinsics: scene.camera().poses.iter().map(Extrinsic::from).collect(),
        classes: scene.classes().clone(),
        frames: scene.frames().cloned(),
        stages: out.stage_keys.clone(),
        artifacts: Artifacts {
            controls: "controls.json".into(),
            dense: "dense.json".into(),
            instances: "instances.json".into(),
        },
    };
    let path = out_dir.join(SceneDoc::FILE);
    let mut text = serde_json::to_string_pretty(&doc).expect("scene doc serializes");
    text.push('\n');
    std::fs::write(&path, text).map_err(io_err(&path))?;
    Ok((scene, doc, out))
}

/// Loads a built scene directory (or its `scene.json`).
pub fn load_scene4d(path: &Path) -> Result<(Scene4D, SceneDoc), PipelineError> {
    let doc_path = if path.is_dir() { path.join(SceneDoc::FILE) } else { path.to_path_buf() };
    let dir = doc_path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let text = std::fs::read_to_string(&doc_path).map_err(io_err(&doc_path))?;
    let doc: SceneDoc = serde_json::from_str(&text).map_err(|e| PipelineError::Scene(format!("{}: {e}", doc_path.display())))?;
    if doc.kind != SceneDoc::KIND {
        return Err(PipelineError::Scene(format!("{} is not a scene document", doc_path.display())));
    }
    let controls = ControlPointCloud::load(&dir.join(&doc.artifacts.controls)).map_err(artifact("lift"))?;
    let dense = DensePointCloud::load(&dir.join(&doc.artifacts.dense)).map_err(artifact("densify"))?;
    let instances = InstanceTable::load(&dir.join(&doc.artifacts.instances)).map_err(artifact("semantics"))?;
    let scene = Scene4D::from_parts(SceneParts {
        scene_id: doc.scene_id.clone(),
        width: doc.width,
        height: doc.height,
        frame_stride: doc.frame_stride,
        camera: doc.camera(),
        controls,
        dense,
        instances,
        classes: doc.classes.clone(),
        frames: doc.frames.clone(),
    })
    .map_err(|e| PipelineError::Scene(e.to_string()))?;
    Ok((scene, doc))
}

/// Every built scene directly under `root` (directories holding `scene.json`), by scene id.
pub fn load_scene_dir(root: &Path) -> Result<BTreeMap<String, (Scene4D, SceneDoc)>, PipelineError> {
    let mut out = BTreeMap::new();
    if root.join(SceneDoc::FILE).is_file() {
        let (s, d) = load_scene4d(root)?;
        out.insert(s.scene_id().to_string(), (s, d));
        return Ok(out);
    }
    let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
        .map_err(io_err(root))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(SceneDoc::FILE).is_file())
        .collect();
    entries.sort();
    for dir in entries {
        let (s, d) = load_scene4d(&dir)?;
        out.insert(s.scene_id().to_string(), (s, d));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fingerprint_tracks_every_field() {
        let base = PipelineConfig::default();
        let mut other = base.clone();
        assert_eq!(base.fingerprint(), other.fingerprint());
        other.semantics.tau = 0.61;
        assert_ne!(base.fingerprint(), other.fingerprint());
        let mut other = base.clone();
        other.toolkit.direction_epsilon = 0.3;
        assert_ne!(base.fingerprint(), other.fingerprint());
    }

    #[test]
    fn config_json_round_trip() {
        let mut c = PipelineConfig::default();
        c.semantics.seed_frames = FrameSpec::parse_list("0,mid,last").unwrap();
        c.semantics.t_ref = Some(FrameSpec::Index(7));
        let back = PipelineConfig::from_json_str(&c.canonical_json()).unwrap();
        assert_eq!(back, c);
        assert!(PipelineConfig::from_json_str(r#"{"lift":{"bogus":1}}"#).is_err());
    }

    #[test]
    fn frame_specs_resolve() {
        let specs = FrameSpec::parse_list("first, mid ,last,3").unwrap();
        let got: Vec<usize> = specs.iter().map(|f| f.resolve(20)).collect();
        assert_eq!(got, vec![0, 10, 19, 3]);
        assert!(FrameSpec::parse_list("soon").is_err());
    }

    #[test]
    fn ablations_differ_from_full() {
        let configs = ablation_configs(&PipelineConfig::default());
        assert_eq!(configs.len(), 4);
        let prints: std::collections::BTreeSet<String> = configs.iter().map(|(_, c)| c.fingerprint()).collect();
        assert_eq!(prints.len(), 4);
    }
}
