//! Dense 4D points: image pixels anchored in 3D and advected by the motion
//! of their nearest control points.
//!
//! A pixel sampled at its observation timestep `t_obs` is unprojected with
//! its own depth, then matched to its K nearest alive control points *in 3D*
//! (matching in 2D would pair foreground pixels with background controls).
//! Its trajectory is its anchor plus the inverse-distance-weighted
//! displacement of those controls relative to `t_obs`.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraError;
use crate::knn::{Neighbor, SpatialHashGrid};
use crate::lifting::{depth_gradient_mask, ControlPointCloud};
use crate::scene_io::SceneBundle;
use crate::tensor::{expect_shape, Archive, ArchiveError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensifyConfig {
    pub k: usize,
    pub pixel_stride: usize,
    pub idw_power: f64,
    /// Observation timesteps to seed pixels from; the control cloud's seed
    /// frame when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed_frames: Option<Vec<usize>>,
}

impl Default for DensifyConfig {
    fn default() -> Self {
        Self {
            k: 8,
            pixel_stride: 4,
            idw_power: 2.0,
            seed_frames: None,
        }
    }
}

impl DensifyConfig {
    pub fn validate(&self) -> Result<(), DensifyError> {
        if self.k < 1 {
            return Err(DensifyError::InvalidConfig("k must be at least 1".into()));
        }
        if self.pixel_stride < 1 {
            return Err(DensifyError::InvalidConfig("pixel_stride must be at least 1".into()));
        }
        if !(self.idw_power > 0.0 && self.idw_power.is_finite()) {
            return Err(DensifyError::InvalidConfig("idw_power must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensifyError {
    #[error("control cloud has no alive points")]
    NoAliveControls,
    #[error("seed frame {t} is out of range (T = {num_timesteps})")]
    SeedFrameOutOfRange { t: usize, num_timesteps: usize },
    #[error("control cloud covers {controls} timesteps but the scene has {scene}")]
    TimestepMismatch { controls: usize, scene: usize },
    #[error("invalid densify config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// One seeded pixel and its control neighbors.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseAssignment {
    pub t_obs: usize,
    pub pixel: [u32; 2],
    /// World position of the pixel's own unprojection at `t_obs`.
    pub anchor: Point3<f64>,
    /// Control indices, nearest first.
    pub neighbors: Vec<u32>,
    /// Interpolation weights aligned with `neighbors`; nonnegative, sum to 1.
    pub weights: Vec<f64>,
}

/// Normalized inverse-distance weights for neighbors sorted nearest first.
/// A neighbor closer than 1e-9 takes the whole weight.
pub fn idw_weights(neighbors: &[Neighbor], power: f64) -> Vec<f64> {
    if neighbors.is_empty() {
        return Vec::new();
    }
    if neighbors[0].distance() < 1e-9 {
        let mut w = vec![0.0; neighbors.len()];
        w[0] = 1.0;
        return w;
    }
    let raw: Vec<f64> = neighbors.iter().map(|n| n.distance().powf(-power)).collect();
    let sum: f64 = raw.iter().sum();
    raw.iter().map(|w| w / sum).collect()
}

/// Per-frame pixel masks for the given frames (true = usable).
pub fn gradient_masks(bundle: &SceneBundle, frames: &[usize], percentile: f64) -> BTreeMap<usize, Vec<bool>> {
    frames
        .iter()
        .map(|&t| {
            (
                t,
                depth_gradient_mask(bundle.depth_frame(t), bundle.width(), bundle.height(), percentile),
            )
        })
        .collect()
}

pub fn resolve_seed_frames(config: &DensifyConfig, controls: &ControlPointCloud) -> Vec<usize> {
    let mut frames = config
        .seed_frames
        .clone()
        .unwrap_or_else(|| vec![controls.init_timestep]);
    frames.sort_unstable();
    frames.dedup();
    frames
}

/// Seeds pixels on the stride grid (minus masked-out pixels and pixels
/// without depth) at each seed frame and assigns their 3D nearest alive
/// controls. Frames missing from `masks` keep every pixel.
pub fn assign_pixels(
    bundle: &SceneBundle,
    controls: &ControlPointCloud,
    masks: &BTreeMap<usize, Vec<bool>>,
    config: &DensifyConfig,
) -> Result<Vec<DenseAssignment>, DensifyError> {
    config.validate()?;
    let t_n = bundle.num_timesteps();
    if controls.num_timesteps != t_n {
        return Err(DensifyError::TimestepMismatch {
            controls: controls.num_timesteps,
            scene: t_n,
        });
    }
    let alive = controls.alive_indices();
    if alive.is_empty() {
        return Err(DensifyError::NoAliveControls);
    }
    let (w, h) = (bundle.width(), bundle.height());
    let mut out = Vec::new();
    for t_obs in resolve_seed_frames(config, controls) {
        if t_obs >= t_n {
            return Err(DensifyError::SeedFrameOutOfRange { t: t_obs, num_timesteps: t_n });
        }
        let at_t: Vec<Point3<f64>> = (0..controls.num_points).map(|n| *controls.position(n, t_obs)).collect();
        let grid = SpatialHashGrid::with_auto_cell(&at_t, &alive);
        let mask = masks.get(&t_obs);
        let pixels: Vec<(usize, usize)> = (0..h)
            .step_by(config.pixel_stride)
            .flat_map(|y| (0..w).step_by(config.pixel_stride).map(move |x| (x, y)))
            .filter(|&(x, y)| mask.is_none_or(|m| m[y * w + x]) && bundle.depth_at(t_obs, x, y) > 0.0)
            .collect();
        let frame: Vec<DenseAssignment> = pixels
            .par_iter()
            .map(|&(x, y)| {
                let z = bundle.depth_at(t_obs, x, y) as f64;
                let anchor = bundle.camera.unproject(x as f64, y as f64, z, t_obs)?;
                let nn = grid.knn(&anchor, config.k);
                Ok(DenseAssignment {
                    t_obs,
                    pixel: [x as u32, y as u32],
                    anchor,
                    weights: idw_weights(&nn, config.idw_power),
                    neighbors: nn.iter().map(|n| n.index as u32).collect(),
                })
            })
            .collect::<Result<_, DensifyError>>()?;
        out.extend(frame);
    }
    Ok(out)
}

/// Dense points with full trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct DensePointCloud {
    pub num_points: usize,
    pub num_timesteps: usize,
    pub t_obs: Vec<usize>,
    pub pixels: Vec<[u32; 2]>,
    /// `M × T` world positions.
    pub positions: Vec<Point3<f64>>,
    /// Neighbors per point (the same for every point).
    pub k: usize,
    /// `M × k` control indices.
    pub neighbors: Vec<u32>,
    /// `M × k` weights.
    pub weights: Vec<f64>,
    /// Class id at `(pixel, t_obs)`; 0 = unlabeled.
    pub class_ids: Vec<u16>,
}

impl DensePointCloud {
    #[inline]
    pub fn position(&self, m: usize, t: usize) -> &Point3<f64> {
        &self.positions[m * self.num_timesteps + t]
    }

    pub fn trajectory(&self, m: usize) -> &[Point3<f64>] {
        &self.positions[m * self.num_timesteps..(m + 1) * self.num_timesteps]
    }

    pub fn neighbors_of(&self, m: usize) -> &[u32] {
        &self.neighbors[m * self.k..(m + 1) * self.k]
    }

    pub fn weights_of(&self, m: usize) -> &[f64] {
        &self.weights[m * self.k..(m + 1) * self.k]
    }

    pub fn is_unlabeled(&self, m: usize) -> bool {
        self.class_ids[m] == 0
    }

    /// Dense point id by `(t_obs, x, y)`.
    pub fn pixel_lookup(&self) -> HashMap<(usize, u32, u32), usize> {
        (0..self.num_points)
            .map(|m| ((self.t_obs[m], self.pixels[m][0], self.pixels[m][1]), m))
            .collect()
    }

    pub const KIND: &'static str = "dense_point_cloud";

    pub fn save(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf, ArchiveError> {
        let (m, t, k) = (self.num_points, self.num_timesteps, self.k);
        let mut a = Archive::new(
            Self::KIND,
            serde_json::json!({ "num_points": m, "num_timesteps": t, "k": k }),
        );
        let t_obs: Vec<u32> = self.t_obs.iter().map(|&v| v as u32).collect();
        a.put(dir, stem, "t_obs", &t_obs, vec![m])?;
        let px: Vec<u32> = self.pixels.iter().flatten().copied().collect();
        a.put(dir, stem, "pixels", &px, vec![m, 2])?;
        let flat: Vec<f64> = self.positions.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        a.put(dir, stem, "positions", &flat, vec![m, t, 3])?;
        a.put(dir, stem, "neighbors", &self.neighbors, vec![m, k])?;
        a.put(dir, stem, "weights", &self.weights, vec![m, k])?;
        a.put(dir, stem, "class_ids", &self.class_ids, vec![m])?;
        a.save(dir, stem)
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        let a = Archive::load(path, Self::KIND)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let m = a.meta_usize("num_points")?;
        let t = a.meta_usize("num_timesteps")?;
        let k = a.meta_usize("k")?;
        let (t_obs, s) = a.get::<u32>(dir, "t_obs")?;
        expect_shape("t_obs", &s, &[m])?;
        let (px, s) = a.get::<u32>(dir, "pixels")?;
        expect_shape("pixels", &s, &[m, 2])?;
        let (flat, s) = a.get::<f64>(dir, "positions")?;
        expect_shape("positions", &s, &[m, t, 3])?;
        let (neighbors, s) = a.get::<u32>(dir, "neighbors")?;
        expect_shape("neighbors", &s, &[m, k])?;
        let (weights, s) = a.get::<f64>(dir, "weights")?;
        expect_shape("weights", &s, &[m, k])?;
        let (class_ids, s) = a.get::<u16>(dir, "class_ids")?;
        expect_shape("class_ids", &s, &[m])?;
        if t_obs.iter().any(|&v| v as usize >= t) {
            return Err(ArchiveError::Invalid {
                field: "t_obs".into(),
                message: "observation timestep out of range".into(),
            });
        }
        Ok(Self {
            num_points: m,
            num_timesteps: t,
            t_obs: t_obs.into_iter().map(|v| v as usize).collect(),
            pixels: px.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            positions: flat.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(),
            k,
            neighbors,
            weights,
            class_ids,
        })
    }
}

/// `position(t) = anchor + Σ_k w_k · (control_k(t) − control_k(t_obs))`.
pub fn densify(assignments: &[DenseAssignment], controls: &ControlPointCloud) -> DensePointCloud {
    let t_n = controls.num_timesteps;
    let k = assignments.iter().map(|a| a.neighbors.len()).max().unwrap_or(0);
    let positions: Vec<Point3<f64>> = assignments
        .par_iter()
        .flat_map_iter(|a| {
            (0..t_n).map(move |t| {
                let mut disp = Vector3::zeros();
                for (&c, &w) in a.neighbors.iter().zip(&a.weights) {
                    let c = c as usize;
                    disp += w * (controls.position(c, t) - controls.position(c, a.t_obs));
                }
                a.anchor + disp
            })
        })
        .collect();
    let mut neighbors = Vec::with_capacity(assignments.len() * k);
    let mut weights = Vec::with_capacity(assignments.len() * k);
    for a in assignments {
        neighbors.extend_from_slice(&a.neighbors);
        weights.extend_from_slice(&a.weights);
        // Pad with zero-weight copies of the nearest neighbor.
        for _ in a.neighbors.len()..k {
            neighbors.push(a.neighbors[0]);
            weights.push(0.0);
        }
    }
    DensePointCloud {
        num_points: assignments.len(),
        num_timesteps: t_n,
        t_obs: assignments.iter().map(|a| a.t_obs).collect(),
        pixels: assignments.iter().map(|a| a.pixel).collect(),
        positions,
        k,
        neighbors,
        weights,
        class_ids: vec![0; assignments.len()],
    }
}

/// Labels each dense point with the mask class at its pixel and `t_obs`.
pub fn attach_semantics(mut dense: DensePointCloud, bundle: &SceneBundle) -> DensePointCloud {
    dense.class_ids = (0..dense.num_points)
        .map(|m| {
            let [x, y] = dense.pixels[m];
            bundle.class_at(dense.t_obs[m], x as usize, y as usize)
        })
        .collect();
    dense
}
