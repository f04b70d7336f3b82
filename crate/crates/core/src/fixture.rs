//! Analytic synthetic scenes: a fronto-parallel background plane plus
//! axis-aligned boxes translating rigidly in front of a moving pinhole
//! camera. Depth, masks, tracks and visibility are ray-cast exactly, so
//! every downstream quantity has a closed-form ground truth.

use std::collections::BTreeMap;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraModel, Extrinsic, Intrinsics, Pose};
use crate::scene_io::{self, DepthUnits, FrameSource, SceneBundle, SceneError, SceneManifest, TrackSet};
use crate::tensor::{DType, TensorDescriptor};

#[derive(Debug, Error)]
pub enum FixtureError {
    #[error("invalid recipe: {0}")]
    RecipeInvalid(String),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error("writing frame {path}: {message}")]
    Frame { path: PathBuf, message: String },
}

/// World plane `z = depth + velocity.z · t`; its texture slides with the
/// in-plane velocity components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneSpec {
    pub depth: f64,
    #[serde(default)]
    pub velocity: [f64; 3],
    pub class_id: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub center: [f64; 3],
    pub half_extents: [f64; 3],
    #[serde(default)]
    pub velocity: [f64; 3],
    /// Timestep after which the box rests.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop_at: Option<usize>,
    pub class_id: u16,
}

/// A track whose 2D position alternates between two pixels every step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumperSpec {
    pub pixel_a: [f64; 2],
    pub pixel_b: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub scene_id: String,
    pub width: usize,
    pub height: usize,
    pub num_timesteps: usize,
    pub intrinsics: Intrinsics,
    /// Camera translation per step (world frame).
    #[serde(default)]
    pub camera_velocity: [f64; 3],
    /// Camera rotation about world +y per step, radians.
    #[serde(default)]
    pub camera_yaw_per_step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneSpec>,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
    pub track_stride: usize,
    #[serde(default)]
    pub track_margin: usize,
    /// Defaults to `T / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub track_init_timestep: Option<usize>,
    /// Init timesteps of additional tracker runs.
    #[serde(default)]
    pub extra_track_inits: Vec<usize>,
    #[serde(default)]
    pub jumpers: Vec<JumperSpec>,
    pub classes: BTreeMap<u16, String>,
    #[serde(default)]
    pub render_frames: bool,
}

/// Surface a ray hit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// 0 is the plane when present, boxes follow in recipe order.
    pub object: usize,
    pub point: Point3<f64>,
    /// Camera-frame z of the hit.
    pub depth: f64,
}

/// A material point followed by one synthetic track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub object: usize,
    /// Position with the object's offset at t = 0 removed.
    pub local: Point3<f64>,
}

enum Shape<'a> {
    Plane(&'a PlaneSpec),
    Box(&'a BoxSpec),
}

impl Recipe {
    pub fn from_json_str(text: &str) -> Result<Self, FixtureError> {
        let r: Recipe = serde_json::from_str(text).map_err(|e| FixtureError::RecipeInvalid(e.to_string()))?;
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<(), FixtureError> {
        let bad = |m: String| Err(FixtureError::RecipeInvalid(m));
        if self.scene_id.is_empty() {
            return bad("scene_id is empty".into());
        }
        if self.num_timesteps < 2 {
            return bad("num_timesteps must be at least 2".into());
        }
        if self.width < 2 || self.height < 2 {
            return bad("image must be at least 2×2".into());
        }
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0 && k.cx.is_finite() && k.cy.is_finite()) {
            return bad("focal lengths must be positive".into());
        }
        if self.track_stride == 0 {
            return bad("track_stride must be at least 1".into());
        }
        if 2 * self.track_margin >= self.width.min(self.height) {
            return bad("track_margin leaves no pixels".into());
        }
        let init = self.init_timestep();
        if init >= self.num_timesteps || self.extra_track_inits.iter().any(|&t| t >= self.num_timesteps) {
            return bad("track init timestep out of range".into());
        }
        if self.plane.is_none() && self.boxes.is_empty() {
            return bad("recipe has no surfaces".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.camera_velocity) || !self.camera_yaw_per_step.is_finite() {
            return bad("camera motion must be finite".into());
        }
        let mut classes = Vec::new();
        if let Some(p) = &self.plane {
            if !(p.depth.is_finite() && finite(&p.velocity)) {
                return bad("plane parameters must be finite".into());
            }
            classes.push(p.class_id);
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(finite(&b.center) && finite(&b.velocity)) || b.half_extents.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
                return bad(format!("box {i} needs finite motion and positive half extents"));
            }
            classes.push(b.class_id);
        }
        for c in classes {
            if c == 0 || !self.classes.contains_key(&c) {
                return bad(format!("class {c} is missing from the class table or is 0"));
            }
        }
        for j in &self.jumpers {
            let inside = |p: &[f64; 2]| {
                p[0] >= 0.0 && p[1] >= 0.0 && p[0] <= (self.width - 1) as f64 && p[1] <= (self.height - 1) as f64
            };
            if !(inside(&j.pixel_a) && inside(&j.pixel_b)) {
                return bad("jumper pixels must lie inside the image".into());
            }
        }
        Ok(())
    }

    pub fn init_timestep(&self) -> usize {
        self.track_init_timestep.unwrap_or(self.num_timesteps / 2)
    }

    fn shapes(&self) -> Vec<Shape<'_>> {
        self.plane
            .iter()
            .map(Shape::Plane)
            .chain(self.boxes.iter().map(Shape::Box))
            .collect()
    }

    pub fn num_objects(&self) -> usize {
        self.plane.is_some() as usize + self.boxes.len()
    }

    /// Object index of box `i`.
    pub fn box_object(&self, i: usize) -> usize {
        self.plane.is_some() as usize + i
    }

    pub fn object_class(&self, object: usize) -> u16 {
        match &self.shapes()[object] {
            Shape::Plane(p) => p.class_id,
            Shape::Box(b) => b.class_id,
        }
    }

    /// Rigid translation of `object` at `t` relative to t = 0.
    pub fn object_offset(&self, object: usize, t: usize) -> Vector3<f64> {
        match &self.shapes()[object] {
            Shape::Plane(p) => Vector3::from(p.velocity) * t as f64,
            Shape::Box(b) => Vector3::from(b.velocity) * b.stop_at.map_or(t, |s| t.min(s)) as f64,
        }
    }

    pub fn box_center(&self, i: usize, t: usize) -> Point3<f64> {
        Point3::from(self.boxes[i].center) + self.object_offset(self.box_object(i), t)
    }

    pub fn pose(&self, t: usize) -> Pose {
        Pose {
            rotation: *Rotation3::from_axis_angle(&Vector3::y_axis(), self.camera_yaw_per_step * t as f64).matrix(),
            translation: Vector3::from(self.camera_velocity) * t as f64,
        }
    }

    pub fn camera(&self) -> CameraModel {
        CameraModel::new(self.intrinsics, (0..self.num_timesteps).map(|t| self.pose(t)).collect())
    }

    /// Nearest surface along the ray through pixel `(u, v)` at `t`.
    pub fn cast(&self, t: usize, u: f64, v: f64) -> Option<Hit> {
        let k = &self.intrinsics;
        let pose = self.pose(t);
        let d_cam = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        let dir = pose.rotation * d_cam;
        let origin = Point3::from(pose.translation);
        let mut best: Option<(f64, usize)> = None;
        for (object, shape) in self.shapes().iter().enumerate() {
            let s = match shape {
                Shape::Plane(p) => {
                    let z = p.depth + p.velocity[2] * t as f64;
                    if dir.z.abs() < 1e-12 {
                        continue;
                    }
                    (z - origin.z) / dir.z
                }
                Shape::Box(b) => {
                    let c = Point3::from(b.center) + self.object_offset(object, t);
                    match slab(&origin, &dir, &c, &b.half_extents) {
                        Some(s) => s,
                        None => continue,
                    }
                }
            };
            if s > 1e-9 && best.is_none_or(|(bs, _)| s < bs) {
                best = Some((s, object));
            }
        }
        best.map(|(s, object)| Hit {
            object,
            point: origin + dir * s,
            depth: s,
        })
    }

    fn track_set(&self, init: usize) -> (Vec<TrackPoint>, TrackSet) {
        let (w, h, m) = (self.width, self.height, self.track_margin);
        let mut points = Vec::new();
        for y in (m..h - m).step_by(self.track_stride) {
            for x in (m..w - m).step_by(self.track_stride) {
                if let Some(hit) = self.cast(init, x as f64, y as f64) {
                    points.push(TrackPoint {
                        object: hit.object,
                        local: hit.point - self.object_offset(hit.object, init),
                    });
                }
            }
        }
        let t_n = self.num_timesteps;
        let camera = self.camera();
        let mut coords = Vec::with_capacity(points.len() * t_n * 2);
        let mut visible = Vec::with_capacity(points.len() * t_n);
        for tp in &points {
            let mut last = [0.0f32; 2];
            for t in 0..t_n {
                let p = tp.local + self.object_offset(tp.object, t);
                let (uv, vis) = match camera.project(&p, t) {
                    Ok(proj) => {
                        let inside = proj.u >= 0.0
                            && proj.v >= 0.0
                            && proj.u <= (w - 1) as f64
                            && proj.v <= (h - 1) as f64;
                        let seen = inside
                            && self.cast(t, proj.u, proj.v).is_some_and(|hit| {
                                hit.object == tp.object && (hit.depth - proj.z).abs() <= 1e-6 * proj.z.max(1.0)
                            });
                        ([proj.u as f32, proj.v as f32], seen)
                    }
                    Err(_) => (last, false),
                };
                last = uv;
                coords.extend_from_slice(&uv);
                visible.push(vis);
            }
        }
        let set = TrackSet {
            init_timestep: init,
            num_points: points.len(),
            num_timesteps: t_n,
            coords,
            visible,
        };
        (points, set)
    }

    /// Renders the scene. The primary track set holds the grid tracks
    /// followed by the jumpers.
    pub fn generate(&self) -> Result<Fixture, FixtureError> {
        self.validate()?;
        let (w, h, t_n) = (self.width, self.height, self.num_timesteps);
        let mut depths = vec![0.0f32; t_n * h * w];
        let mut masks = vec![0u16; t_n * h * w];
        for t in 0..t_n {
            for y in 0..h {
                for x in 0..w {
                    if let Some(hit) = self.cast(t, x as f64, y as f64) {
                        let i = (t * h + y) * w + x;
                        depths[i] = hit.depth as f32;
                        masks[i] = self.object_class(hit.object);
                    }
                }
            }
        }
        let (points, mut primary) = self.track_set(self.init_timestep());
        let jumper_indices: Vec<usize> = (0..self.jumpers.len()).map(|j| points.len() + j).collect();
        for j in &self.jumpers {
            for t in 0..t_n {
                let p = if t % 2 == 0 { j.pixel_a } else { j.pixel_b };
                primary.coords.extend_from_slice(&[p[0] as f32, p[1] as f32]);
                primary.visible.push(true);
            }
            primary.num_points += 1;
        }
        let mut track_sets = vec![primary];
        let mut extra_points = Vec::new();
        for &init in &self.extra_track_inits {
            let (pts, set) = self.track_set(init);
            extra_points.push(pts);
            track_sets.push(set);
        }

        let manifest = self.manifest(&track_sets);
        let bundle = SceneBundle {
            camera: manifest.camera(),
            manifest,
            base_dir: PathBuf::from("."),
            depths,
            track_sets,
            masks,
        };
        Ok(Fixture {
            recipe: self.clone(),
            bundle,
            track_points: points,
            extra_track_points: extra_points,
            jumper_indices,
        })
    }

    fn manifest(&self, sets: &[TrackSet]) -> SceneManifest {
        let t_n = self.num_timesteps;
        let hw = vec![t_n, self.height, self.width];
        let desc = |path: &str, dtype, shape| TensorDescriptor::new(path, dtype, shape);
        let n = sets[0].num_points;
        SceneManifest {
            scene_id: self.scene_id.clone(),
            num_timesteps: t_n,
            frame_stride: 1,
            fps: 1.0,
            width: self.width,
            height: self.height,
            intrinsics: self.intrinsics,
            extrinsics: Some((0..t_n).map(|t| Extrinsic::from(&self.pose(t))).collect()),
            depth_units: DepthUnits::Meters,
            depths: desc("depths.bin", DType::F32, hw.clone()),
            tracks: desc("tracks.bin", DType::F32, vec![n, t_n, 2]),
            visibility: desc("visibility.bin", DType::U8, vec![n, t_n]),
            track_init_timestep: Some(sets[0].init_timestep),
            extra_track_sets: sets[1..]
                .iter()
                .enumerate()
                .map(|(i, s)| scene_io::TrackSetDescriptor {
                    init_timestep: s.init_timestep,
                    tracks: desc(&format!("tracks_{}.bin", i + 1), DType::F32, vec![s.num_points, t_n, 2]),
                    visibility: desc(&format!("visibility_{}.bin", i + 1), DType::U8, vec![s.num_points, t_n]),
                })
                .collect(),
            masks: desc("masks.bin", DType::U16, hw),
            classes: self.classes.clone(),
            frames: self.render_frames.then(|| FrameSource {
                dir: "frames".into(),
                prefix: "frame_".into(),
                digits: 6,
                extension: "png".into(),
            }),
        }
    }
}

/// Entry parameter of a ray into an axis-aligned box, if it hits from outside.
fn slab(origin: &Point3<f64>, dir: &Vector3<f64>, center: &Point3<f64>, half: &[f64; 3]) -> Option<f64> {
    let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
    for a in 0..3 {
        let (lo, hi) = (center[a] - half[a], center[a] + half[a]);
        if dir[a].abs() < 1e-15 {
            if origin[a] < lo || origin[a] > hi {
                return None;
            }
            continue;
        }
        let (mut n, mut f) = ((lo - origin[a]) / dir[a], (hi - origin[a]) / dir[a]);
        if n > f {
            std::mem::swap(&mut n, &mut f);
        }
        t0 = t0.max(n);
        t1 = t1.min(f);
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// A rendered scene with its analytic ground truth.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub recipe: Recipe,
    pub bundle: SceneBundle,
    /// Material points of the primary grid tracks, in track order.
    pub track_points: Vec<TrackPoint>,
    pub extra_track_points: Vec<Vec<TrackPoint>>,
    /// Primary-set indices of the injected jumpers.
    pub jumper_indices: Vec<usize>,
}

impl Fixture {
    /// True world position of primary track `n` at `t`.
    pub fn track_position(&self, n: usize, t: usize) -> Point3<f64> {
        let tp = &self.track_points[n];
        tp.local + self.recipe.object_offset(tp.object, t)
    }

    /// True trajectory of the surface point seen at pixel `(x, y)` at `t_obs`.
    pub fn surface_trajectory(&self, t_obs: usize, x: f64, y: f64) -> Option<Vec<Point3<f64>>> {
        let hit = self.recipe.cast(t_obs, x, y)?;
        let base = self.recipe.object_offset(hit.object, t_obs);
        Some(
            (0..self.recipe.num_timesteps)
                .map(|t| hit.point + self.recipe.object_offset(hit.object, t) - base)
                .collect(),
        )
    }

    /// Closest distance between the AABBs of boxes `i` and `j` at `t`.
    pub fn box_gap(&self, i: usize, j: usize, t: usize) -> f64 {
        let (ci, cj) = (self.recipe.box_center(i, t), self.recipe.box_center(j, t));
        let (hi, hj) = (self.recipe.boxes[i].half_extents, self.recipe.boxes[j].half_extents);
        let gap: Vector3<f64> = Vector3::from_fn(|a, _| ((ci[a] - cj[a]).abs() - hi[a] - hj[a]).max(0.0));
        gap.norm()
    }

    /// Writes the bundle (and PNG frames when requested); returns the manifest path.
    pub fn write(&self, dir: &Path) -> Result<PathBuf, FixtureError> {
        std::fs::create_dir_all(dir).map_err(|e| SceneError::Io {
            path: dir.to_path_buf(),
            source: e,
        })?;
        let mut bundle = self.bundle.clone();
        bundle.base_dir = dir.to_path_buf();
        if let Some(frames) = &bundle.manifest.frames {
            let frame_dir = dir.join(&frames.dir);
            std::fs::create_dir_all(&frame_dir).map_err(|e| SceneError::Io {
                path: frame_dir.clone(),
                source: e,
            })?;
            for t in 0..self.recipe.num_timesteps {
                let path = frame_dir.join(frames.file_name(t * bundle.manifest.frame_stride));
                self.write_frame(&path, t)?;
            }
        }
        Ok(scene_io::write_bundle(&bundle, dir)?)
    }

    /// Class color modulated by depth.
    pub fn render_rgb(&self, t: usize) -> Vec<u8> {
        let b = &self.bundle;
        let (far, near) = b.depth_frame(t).iter().filter(|&&z| z > 0.0).fold((0.0f32, f32::MAX), |(f, n), &z| {
            (f.max(z), n.min(z))
        });
        let span = (far - near).max(1e-6);
        let mut rgb = Vec::with_capacity(b.frame_len() * 3);
        for (z, c) in b.depth_frame(t).iter().zip(b.mask_frame(t)) {
            let base = crate::ply::class_color(*c);
            let shade = if *z > 0.0 { 1.0 - 0.5 * (z - near) / span } else { 0.2 };
            rgb.extend(base.iter().map(|&v| (v as f32 * shade).round() as u8));
        }
        rgb
    }

    fn write_frame(&self, path: &Path, t: usize) -> Result<(), FixtureError> {
        let err = |message: String| FixtureError::Frame {
            path: path.to_path_buf(),
            message,
        };
        let file = std::fs::File::create(path).map_err(|e| err(e.to_string()))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), self.recipe.width as u32, self.recipe.height as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().map_err(|e| err(e.to_string()))?;
        w.write_image_data(&self.render_rgb(t)).map_err(|e| err(e.to_string()))?;
        w.finish().map_err(|e| err(e.to_string()))
    }
}

/// Desk-scale camera: 160×128 pixels with a 60-ish degree field of view.
pub fn desk_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 140.0,
        fy: 140.0,
        cx: 79.5,
        cy: 63.5,
    }
}

fn desk_classes() -> BTreeMap<u16, String> {
    BTreeMap::from([(1, "tissue".to_string()), (2, "tool".to_string()), (3, "gauze".to_string())])
}

fn desk(scene_id: &str) -> Recipe {
    Recipe {
        scene_id: scene_id.into(),
        width: 160,
        height: 128,
        num_timesteps: 20,
        intrinsics: desk_intrinsics(),
        camera_velocity: [0.0; 3],
        camera_yaw_per_step: 0.0,
        plane: None,
        boxes: Vec::new(),
        track_stride: 8,
        track_margin: 4,
        track_init_timestep: None,
        extra_track_inits: Vec::new(),
        jumpers: Vec::new(),
        classes: desk_classes(),
        render_frames: false,
    }
}

/// Named recipes used by tests, examples and the CLI.
pub mod presets {
    use super::*;

    pub const NAMES: [&str; 7] = [
        "static_plane",
        "rigid_motion",
        "occluding_box",
        "jumper",
        "two_objects",
        "contact",
        "approaching_boxes",
    ];

    pub fn by_name(name: &str) -> Option<Recipe> {
        Some(match name {
            "static_plane" => static_plane(),
            "rigid_motion" => rigid_motion(),
            "occluding_box" => occluding_box(),
            "jumper" => jumper(),
            "two_objects" => two_objects(),
            "contact" => contact(),
            "approaching_boxes" => approaching_boxes(),
            _ => return None,
        })
    }

    pub fn static_plane() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 1.5,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            ..desk("static_plane")
        }
    }

    /// Plane sliding and receding under a translating camera; nothing is
    /// ever occluded and every track stays in view.
    pub fn rigid_motion() -> Recipe {
        Recipe {
            camera_velocity: [-0.002, 0.001, 0.0],
            plane: Some(PlaneSpec {
                depth: 1.2,
                velocity: [0.004, 0.002, 0.01],
                class_id: 1,
            }),
            track_margin: 24,
            ..desk("rigid_motion")
        }
    }

    /// Static plane with a box sweeping across it from left to right.
    pub fn occluding_box() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 2.0,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            boxes: vec![BoxSpec {
                center: [-0.9, 0.0, 1.0],
                half_extents: [0.15, 0.2, 0.05],
                velocity: [0.09, 0.0, 0.0],
                stop_at: None,
                class_id: 2,
            }],
            track_init_timestep: Some(0),
            ..desk("occluding_box")
        }
    }

    /// Static plane and box, 100+ steady tracks and one track flipping
    /// between a box pixel and a plane pixel.
    pub fn jumper() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 2.0,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            boxes: vec![BoxSpec {
                center: [0.0, 0.0, 1.0],
                half_extents: [0.15, 0.15, 0.05],
                velocity: [0.0; 3],
                stop_at: None,
                class_id: 2,
            }],
            track_stride: 12,
            jumpers: vec![JumperSpec {
                pixel_a: [80.0, 64.0],
                pixel_b: [20.0, 20.0],
            }],
            ..desk("jumper")
        }
    }

    /// Tissue plane and one tool box translating in x and y.
    pub fn two_objects() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 1.6,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            boxes: vec![BoxSpec {
                center: [-0.2, -0.05, 1.0],
                half_extents: [0.12, 0.08, 0.05],
                velocity: [0.02, 0.005, 0.0],
                stop_at: None,
                class_id: 2,
            }],
            ..desk("two_objects")
        }
    }

    /// A tool box moving right and toward the tissue plane until it touches
    /// it at t = 10, then resting in contact; a gauze pad sits near the camera.
    pub fn contact() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 1.5,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            boxes: vec![BoxSpec {
                center: [-0.15, 0.05, 1.5 - 0.04 - 0.3],
                half_extents: [0.12, 0.1, 0.04],
                velocity: [0.015, 0.0, 0.03],
                stop_at: Some(10),
                class_id: 2,
            },
            // Static gauze pad near the camera. It widens the depth range so
            // the tool's steady approach stays under the jump threshold.
            BoxSpec {
                center: [0.35, -0.25, 0.7],
                half_extents: [0.04, 0.04, 0.02],
                velocity: [0.0; 3],
                stop_at: None,
                class_id: 3,
            }],
            render_frames: true,
            ..desk("contact")
        }
    }

    /// Two tool boxes closing in along x at 0.01 m per step each, gap 0.5 m at t = 0.
    pub fn approaching_boxes() -> Recipe {
        Recipe {
            plane: Some(PlaneSpec {
                depth: 2.0,
                velocity: [0.0; 3],
                class_id: 1,
            }),
            boxes: vec![
                BoxSpec {
                    center: [-0.35, 0.0, 1.2],
                    half_extents: [0.1, 0.1, 0.05],
                    velocity: [0.01, 0.0, 0.0],
                    stop_at: None,
                    class_id: 2,
                },
                BoxSpec {
                    center: [0.35, 0.0, 1.2],
                    half_extents: [0.1, 0.1, 0.05],
                    velocity: [-0.01, 0.0, 0.0],
                    stop_at: None,
                    class_id: 3,
                },
            ],
            ..desk("approaching_boxes")
        }
    }
}
