//! Spatiotemporal queries over a built scene.
//!
//! World axes follow the first camera: +x right, +y down, +z away from the
//! camera. Queries at timesteps where an instance is absent still answer
//! (from maintained positions) but are marked stale.

use std::collections::BTreeMap;
use std::path::PathBuf;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::densification::DensePointCloud;
use crate::knn::{RadiusIndex, SpatialHashGrid};
use crate::lifting::ControlPointCloud;
use crate::scene_io::FrameSource;
use crate::semantics::{coverage, Instance, InstanceTable};

pub const DEFAULT_DIRECTION_EPSILON: f64 = 0.25;

/// Below this L∞ displacement (meters) an instance counts as not moving.
pub const ZERO_MOTION: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ToolError {
    #[error("unknown instance {0}")]
    UnknownInstance(u32),
    #[error("bad interval: t0 = {t0} must be below t1 = {t1}")]
    BadInterval { t0: usize, t1: usize },
    #[error("timestep {t} out of range (T = {num_timesteps})")]
    OutOfRange { t: usize, num_timesteps: usize },
    #[error("frame unavailable: {0}")]
    FrameUnavailable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl ToolError {
    /// Stable machine-readable code.
    pub fn code(&self) -> &'static str {
        match self {
            ToolError::UnknownInstance(_) => "unknown_instance",
            ToolError::BadInterval { .. } => "bad_interval",
            ToolError::OutOfRange { .. } => "out_of_range",
            ToolError::FrameUnavailable(_) => "frame_unavailable",
            ToolError::InvalidArgument(_) => "invalid_arguments",
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("inconsistent scene: {0}")]
pub struct SceneMismatch(pub String);

/// A value plus whether it relies on positions of an absent instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stamped<T> {
    pub value: T,
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSummary {
    pub id: u32,
    pub class_id: u16,
    pub class_name: String,
    pub member_count: usize,
    /// Member mean at the reference timestep.
    pub centroid: [f64; 3],
    /// Axis-aligned bounding box size at the reference timestep.
    pub extent: [f64; 3],
    pub first_present: Option<usize>,
    pub last_present: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: usize,
    pub centroid: [f64; 3],
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub t: usize,
    pub source_frame: usize,
    pub path: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionResult {
    pub direction: [i8; 3],
    pub displacement: [f64; 3],
}

/// Read-only scene representation the tools operate on.
#[derive(Debug, Clone)]
pub struct Scene4D {
    scene_id: String,
    width: usize,
    height: usize,
    frame_stride: usize,
    camera: CameraModel,
    controls: ControlPointCloud,
    dense: DensePointCloud,
    instances: InstanceTable,
    classes: BTreeMap<u16, String>,
    frames: Option<FrameSource>,
}

#[derive(Debug, Clone)]
pub struct SceneParts {
    pub scene_id: String,
    pub width: usize,
    pub height: usize,
    pub frame_stride: usize,
    pub camera: CameraModel,
    pub controls: ControlPointCloud,
    pub dense: DensePointCloud,
    pub instances: InstanceTable,
    pub classes: BTreeMap<u16, String>,
    pub frames: Option<FrameSource>,
}

impl Scene4D {
    /// All parts must agree on T; instances must be disjoint and in range.
    pub fn from_parts(p: SceneParts) -> Result<Self, SceneMismatch> {
        let t_n = p.controls.num_timesteps;
        if p.dense.num_timesteps != t_n || p.camera.num_timesteps() != t_n {
            return Err(SceneMismatch(format!(
                "controls T = {t_n}, dense T = {}, camera T = {}",
                p.dense.num_timesteps,
                p.camera.num_timesteps()
            )));
        }
        if p.instances.t_ref >= t_n {
            return Err(SceneMismatch(format!("t_ref {} out of range", p.instances.t_ref)));
        }
        p.instances.check(p.dense.num_points, t_n).map_err(SceneMismatch)?;
        if p.dense.neighbors.iter().any(|&c| c as usize >= p.controls.num_points) {
            return Err(SceneMismatch("dense neighbor index out of range".into()));
        }
        Ok(Self {
            scene_id: p.scene_id,
            width: p.width,
            height: p.height,
            frame_stride: p.frame_stride.max(1),
            camera: p.camera,
            controls: p.controls,
            dense: p.dense,
            instances: p.instances,
            classes: p.classes,
            frames: p.frames,
        })
    }

    pub fn into_parts(self) -> SceneParts {
        SceneParts {
            scene_id: self.scene_id,
            width: self.width,
            height: self.height,
            frame_stride: self.frame_stride,
            camera: self.camera,
            controls: self.controls,
            dense: self.dense,
            instances: self.instances,
            classes: self.classes,
            frames: self.frames,
        }
    }

    pub fn scene_id(&self) -> &str {
        &self.scene_id
    }
    pub fn num_timesteps(&self) -> usize {
        self.controls.num_timesteps
    }
    pub fn width(&self) -> usize {
        self.width
    }
    pub fn height(&self) -> usize {
        self.height
    }
    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }
    pub fn controls(&self) -> &ControlPointCloud {
        &self.controls
    }
    pub fn dense(&self) -> &DensePointCloud {
        &self.dense
    }
    pub fn instances(&self) -> &InstanceTable {
        &self.instances
    }
    pub fn classes(&self) -> &BTreeMap<u16, String> {
        &self.classes
    }
    pub fn frames(&self) -> Option<&FrameSource> {
        self.frames.as_ref()
    }
    pub fn frame_stride(&self) -> usize {
        self.frame_stride
    }

    /// Containment radius shared with the merge stage.
    pub fn radius(&self) -> f64 {
        self.instances.radius
    }

    pub fn instance(&self, id: u32) -> Result<&Instance, ToolError> {
        self.instances.get(id).ok_or(ToolError::UnknownInstance(id))
    }

    fn check_t(&self, t: usize) -> Result<(), ToolError> {
        if t >= self.num_timesteps() {
            return Err(ToolError::OutOfRange {
                t,
                num_timesteps: self.num_timesteps(),
            });
        }
        Ok(())
    }

    fn check_interval(&self, t0: usize, t1: usize) -> Result<(), ToolError> {
        self.check_t(t0)?;
        self.check_t(t1)?;
        if t0 >= t1 {
            return Err(ToolError::BadInterval { t0, t1 });
        }
        Ok(())
    }

    /// Whether the instance is present at `t`; instances without presence
    /// data count as present.
    pub fn is_present(&self, inst: &Instance, t: usize) -> bool {
        inst.presence.get(t).copied().unwrap_or(true)
    }

    pub fn member_positions(&self, inst: &Instance, t: usize) -> Vec<Point3<f64>> {
        inst.members.iter().map(|&m| *self.dense.position(m as usize, t)).collect()
    }

    pub fn centroid(&self, inst: &Instance, t: usize) -> Point3<f64> {
        centroid(&self.member_positions(inst, t)).unwrap_or_else(Point3::origin)
    }

    fn pair(&self, a: u32, b: u32, t: usize) -> Result<(&Instance, &Instance, bool), ToolError> {
        let (ia, ib) = (self.instance(a)?, self.instance(b)?);
        self.check_t(t)?;
        let stale = !(self.is_present(ia, t) && self.is_present(ib, t));
        Ok((ia, ib, stale))
    }

    pub fn scene_summary(&self) -> Vec<InstanceSummary> {
        let t_ref = self.instances.t_ref;
        self.instances
            .instances
            .iter()
            .map(|inst| {
                let pts = self.member_positions(inst, t_ref);
                let c = centroid(&pts).unwrap_or_else(Point3::origin);
                let (lo, hi) = aabb(&pts);
                InstanceSummary {
                    id: inst.id,
                    class_id: inst.class_id,
                    class_name: self
                        .classes
                        .get(&inst.class_id)
                        .cloned()
                        .unwrap_or_else(|| format!("class_{}", inst.class_id)),
                    member_count: inst.members.len(),
                    centroid: [c.x, c.y, c.z],
                    extent: [hi.x - lo.x, hi.y - lo.y, hi.z - lo.z],
                    first_present: inst.first_present(),
                    last_present: inst.last_present(),
                }
            })
            .collect()
    }

    /// Smallest member-to-member distance at `t`.
    pub fn min_distance(&self, a: u32, b: u32, t: usize) -> Result<Stamped<f64>, ToolError> {
        let (ia, ib, stale) = self.pair(a, b, t)?;
        let value = min_set_distance(&self.member_positions(ia, t), &self.member_positions(ib, t));
        Ok(Stamped { value, stale })
    }

    pub fn min_distance_series(&self, a: u32, b: u32) -> Result<Vec<Stamped<f64>>, ToolError> {
        (0..self.num_timesteps()).map(|t| self.min_distance(a, b, t)).collect()
    }

    /// Mean of the two directed coverages at the containment radius.
    pub fn overlap_score(&self, a: u32, b: u32, t: usize) -> Result<Stamped<f64>, ToolError> {
        let (ia, ib, stale) = self.pair(a, b, t)?;
        let (pa, pb) = (self.member_positions(ia, t), self.member_positions(ib, t));
        let r = self.radius();
        let value = 0.5 * (coverage(&pa, &pb, r) + coverage(&pb, &pa, r));
        Ok(Stamped { value, stale })
    }

    /// Centroid of all points of either instance within the radius of the
    /// other; `None` without overlap.
    pub fn overlap_position(&self, a: u32, b: u32, t: usize) -> Result<Stamped<Option<[f64; 3]>>, ToolError> {
        let (ia, ib, stale) = self.pair(a, b, t)?;
        let (pa, pb) = (self.member_positions(ia, t), self.member_positions(ib, t));
        let r = self.radius();
        let (ra, rb) = (RadiusIndex::new(&pa, r), RadiusIndex::new(&pb, r));
        let near: Vec<Point3<f64>> = pa
            .iter()
            .filter(|p| rb.any_within(p))
            .chain(pb.iter().filter(|p| ra.any_within(p)))
            .copied()
            .collect();
        let value = centroid(&near).map(|c| [c.x, c.y, c.z]);
        Ok(Stamped { value, stale })
    }

    /// `(c_a(t1) − c_b(t1)) − (c_a(t0) − c_b(t0))`.
    pub fn relative_motion(&self, a: u32, b: u32, t0: usize, t1: usize) -> Result<Stamped<[f64; 3]>, ToolError> {
        let (ia, ib) = (self.instance(a)?, self.instance(b)?);
        self.check_interval(t0, t1)?;
        let d = (self.centroid(ia, t1) - self.centroid(ib, t1)) - (self.centroid(ia, t0) - self.centroid(ib, t0));
        let stale = [t0, t1]
            .iter()
            .any(|&t| !(self.is_present(ia, t) && self.is_present(ib, t)));
        Ok(Stamped {
            value: [d.x, d.y, d.z],
            stale,
        })
    }

    /// Centroid at `0, stride, 2·stride, …`.
    pub fn trajectory(&self, a: u32, stride: usize) -> Result<Vec<TrajectorySample>, ToolError> {
        let inst = self.instance(a)?;
        if stride == 0 {
            return Err(ToolError::InvalidArgument("stride must be at least 1".into()));
        }
        Ok((0..self.num_timesteps())
            .step_by(stride)
            .map(|t| {
                let c = self.centroid(inst, t);
                TrajectorySample {
                    t,
                    centroid: [c.x, c.y, c.z],
                    present: self.is_present(inst, t),
                }
            })
            .collect())
    }

    /// Per axis: `sign(d_i)` when `|d_i| ≥ ε·‖d‖∞`, else 0, where `d` is the
    /// centroid displacement over `[t0, t1]`.
    pub fn dominant_direction(
        &self,
        a: u32,
        t0: usize,
        t1: usize,
        epsilon: f64,
    ) -> Result<Stamped<DirectionResult>, ToolError> {
        let inst = self.instance(a)?;
        self.check_interval(t0, t1)?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ToolError::InvalidArgument("epsilon must lie in [0, 1]".into()));
        }
        let d = self.centroid(inst, t1) - self.centroid(inst, t0);
        Ok(Stamped {
            value: DirectionResult {
                direction: discretize_direction(&d, epsilon),
                displacement: [d.x, d.y, d.z],
            },
            stale: !(self.is_present(inst, t0) && self.is_present(inst, t1)),
        })
    }

    /// Frame image for timestep `t` (source-video frame `t × frame_stride`).
    pub fn fetch_frame(&self, t: usize) -> Result<FrameRef, ToolError> {
        self.check_t(t)?;
        let src = self
            .frames
            .as_ref()
            .ok_or_else(|| ToolError::FrameUnavailable("scene has no frame directory".into()))?;
        let source_frame = t * self.frame_stride;
        let path = PathBuf::from(&src.dir).join(src.file_name(source_frame));
        if !path.is_file() {
            return Err(ToolError::FrameUnavailable(format!("{} does not exist", path.display())));
        }
        Ok(FrameRef { t, source_frame, path })
    }
}

pub fn discretize_direction(d: &Vector3<f64>, epsilon: f64) -> [i8; 3] {
    let inf = d.amax();
    if inf < ZERO_MOTION {
        return [0, 0, 0];
    }
    let axis = |v: f64| -> i8 {
        if v.abs() >= epsilon * inf {
            if v > 0.0 {
                1
            } else {
                -1
            }
        } else {
            0
        }
    };
    [axis(d.x), axis(d.y), axis(d.z)]
}

pub fn centroid(points: &[Point3<f64>]) -> Option<Point3<f64>> {
    if points.is_empty() {
        return None;
    }
    let sum: Vector3<f64> = points.iter().map(|p| p.coords).sum();
    Some(Point3::from(sum / points.len() as f64))
}

fn aabb(points: &[Point3<f64>]) -> (Point3<f64>, Point3<f64>) {
    if points.is_empty() {
        return (Point3::origin(), Point3::origin());
    }
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    (lo, hi)
}

/// Exact closest-pair distance between two point sets; infinite if either is empty.
pub fn min_set_distance(a: &[Point3<f64>], b: &[Point3<f64>]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    let (query, indexed) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let members: Vec<usize> = (0..indexed.len()).collect();
    let grid = SpatialHashGrid::with_auto_cell(indexed, &members);
    query
        .iter()
        .map(|q| grid.knn(q, 1)[0].dist_sq)
        .fold(f64::INFINITY, f64::min)
        .sqrt()
}
