//! Lifting 2D point tracks to a sparse 4D control cloud.
//!
//! Each tracked pixel is unprojected with the depth sampled under it. Two
//! robustness passes follow: depth maintenance holds occluded points at their
//! last observed depth instead of adopting the occluder's, and jump filtering
//! drops points whose observed depth alternates abruptly between layers.

use std::path::Path;

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::{CameraError, CameraModel};
use crate::scene_io::{SceneBundle, TrackSet};
use crate::stats;
use crate::tensor::{expect_shape, Archive, ArchiveError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LiftConfig {
    /// κ: a step is a jump when |Δz| exceeds κ × median step.
    pub jump_threshold_factor: f64,
    /// Absolute floor on the jump threshold, as a fraction of the scene depth range.
    pub jump_floor_fraction: f64,
    /// Pixels whose depth-gradient magnitude exceeds this percentile are edge pixels.
    pub gradient_percentile: f64,
    pub enable_jump_filter: bool,
    pub enable_depth_maintenance: bool,
    pub enable_gradient_filter: bool,
    /// Lift every track set in the scene and concatenate them.
    pub multi_frame: bool,
}

impl Default for LiftConfig {
    fn default() -> Self {
        Self {
            jump_threshold_factor: 5.0,
            jump_floor_fraction: 0.05,
            gradient_percentile: 95.0,
            enable_jump_filter: true,
            enable_depth_maintenance: true,
            enable_gradient_filter: true,
            multi_frame: false,
        }
    }
}

impl LiftConfig {
    /// Every robustness mechanism disabled: plain per-frame unprojection.
    pub fn naive() -> Self {
        Self {
            enable_jump_filter: false,
            enable_depth_maintenance: false,
            enable_gradient_filter: false,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LiftError> {
        if !(self.jump_threshold_factor > 0.0) {
            return Err(LiftError::InvalidConfig("jump_threshold_factor must be positive".into()));
        }
        if !(self.jump_floor_fraction >= 0.0) {
            return Err(LiftError::InvalidConfig("jump_floor_fraction must be non-negative".into()));
        }
        if !(self.gradient_percentile > 0.0 && self.gradient_percentile < 100.0) {
            return Err(LiftError::InvalidConfig("gradient_percentile must lie in (0, 100)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiftError {
    #[error("track {point} has non-positive depth {z} at visible timestep {t}")]
    NonPositiveDepth { point: usize, t: usize, z: f64 },
    #[error("only {pairs} visible step pairs; need at least 10 for jump statistics")]
    DegenerateStatistics { pairs: usize },
    #[error("control clouds disagree on the number of timesteps ({expected} vs {found})")]
    TimestepMismatch { expected: usize, found: usize },
    #[error("invalid lift config: {0}")]
    InvalidConfig(String),
    #[error("scene has no track sets")]
    NoTracks,
    #[error(transparent)]
    Camera(#[from] CameraError),
}

/// Tracked points lifted to world coordinates at every timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPointCloud {
    pub num_points: usize,
    pub num_timesteps: usize,
    /// `N × T` world positions.
    pub positions: Vec<Point3<f64>>,
    /// `N × T` camera-frame depth used for each position (NaN if none).
    pub depths: Vec<f64>,
    /// `N × T` tracker visibility.
    pub visibility: Vec<bool>,
    /// `N`; false once a filter removed the point.
    pub alive: Vec<bool>,
    /// Seed frame of the (first) track set.
    pub init_timestep: usize,
    /// Seed frame of the track set each point came from.
    pub point_init: Vec<usize>,
}

impl ControlPointCloud {
    #[inline]
    pub fn index(&self, n: usize, t: usize) -> usize {
        n * self.num_timesteps + t
    }

    #[inline]
    pub fn position(&self, n: usize, t: usize) -> &Point3<f64> {
        &self.positions[self.index(n, t)]
    }

    #[inline]
    pub fn depth(&self, n: usize, t: usize) -> f64 {
        self.depths[self.index(n, t)]
    }

    #[inline]
    pub fn is_visible(&self, n: usize, t: usize) -> bool {
        self.visibility[self.index(n, t)]
    }

    pub fn alive_indices(&self) -> Vec<usize> {
        (0..self.num_points).filter(|&n| self.alive[n]).collect()
    }

    pub fn num_alive(&self) -> usize {
        self.alive.iter().filter(|&&a| a).count()
    }

    pub fn validate(&self) -> Result<(), ArchiveError> {
        let nt = self.num_points * self.num_timesteps;
        let ok = self.positions.len() == nt
            && self.depths.len() == nt
            && self.visibility.len() == nt
            && self.alive.len() == self.num_points
            && self.point_init.len() == self.num_points
            && (self.num_points == 0 || self.init_timestep < self.num_timesteps)
            && self.point_init.iter().all(|&t| t < self.num_timesteps);
        if !ok {
            return Err(ArchiveError::Invalid {
                field: "controls".into(),
                message: "inconsistent array lengths or seed frames".into(),
            });
        }
        for n in (0..self.num_points).filter(|&n| self.alive[n]) {
            for t in 0..self.num_timesteps {
                let p = self.position(n, t);
                if !(p.x.is_finite() && p.y.is_finite() && p.z.is_finite()) {
                    return Err(ArchiveError::Invalid {
                        field: "controls.positions".into(),
                        message: format!("alive point {n} has a non-finite position at t={t}"),
                    });
                }
            }
        }
        Ok(())
    }

    pub const KIND: &'static str = "control_point_cloud";

    pub fn save(&self, dir: &Path, stem: &str) -> Result<std::path::PathBuf, ArchiveError> {
        let (n, t) = (self.num_points, self.num_timesteps);
        let mut a = Archive::new(
            Self::KIND,
            serde_json::json!({
                "num_points": n,
                "num_timesteps": t,
                "init_timestep": self.init_timestep,
            }),
        );
        let flat: Vec<f64> = self.positions.iter().flat_map(|p| [p.x, p.y, p.z]).collect();
        a.put(dir, stem, "positions", &flat, vec![n, t, 3])?;
        a.put(dir, stem, "depths", &self.depths, vec![n, t])?;
        let vis: Vec<u8> = self.visibility.iter().map(|&v| v as u8).collect();
        a.put(dir, stem, "visibility", &vis, vec![n, t])?;
        let alive: Vec<u8> = self.alive.iter().map(|&v| v as u8).collect();
        a.put(dir, stem, "alive", &alive, vec![n])?;
        let init: Vec<u32> = self.point_init.iter().map(|&v| v as u32).collect();
        a.put(dir, stem, "point_init", &init, vec![n])?;
        a.save(dir, stem)
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        let a = Archive::load(path, Self::KIND)?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let n = a.meta_usize("num_points")?;
        let t = a.meta_usize("num_timesteps")?;
        let (flat, shape) = a.get::<f64>(dir, "positions")?;
        expect_shape("positions", &shape, &[n, t, 3])?;
        let (depths, shape) = a.get::<f64>(dir, "depths")?;
        expect_shape("depths", &shape, &[n, t])?;
        let (vis, shape) = a.get::<u8>(dir, "visibility")?;
        expect_shape("visibility", &shape, &[n, t])?;
        let (alive, shape) = a.get::<u8>(dir, "alive")?;
        expect_shape("alive", &shape, &[n])?;
        let (init, shape) = a.get::<u32>(dir, "point_init")?;
        expect_shape("point_init", &shape, &[n])?;
        let cloud = ControlPointCloud {
            num_points: n,
            num_timesteps: t,
            positions: flat.chunks_exact(3).map(|c| Point3::new(c[0], c[1], c[2])).collect(),
            depths,
            visibility: vis.into_iter().map(|v| v != 0).collect(),
            alive: alive.into_iter().map(|v| v != 0).collect(),
            init_timestep: a.meta_usize("init_timestep")?,
            point_init: init.into_iter().map(|v| v as usize).collect(),
        };
        cloud.validate()?;
        Ok(cloud)
    }
}

/// Summary of one jump-filter pass.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JumpFilterReport {
    pub threshold: f64,
    pub median_step: f64,
    pub depth_range: f64,
    pub step_pairs: usize,
    pub removed: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrackSetReport {
    pub init_timestep: usize,
    pub num_points: usize,
    /// Points with no usable depth at any timestep.
    pub without_depth: usize,
    pub jump_filter: Option<JumpFilterReport>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LiftReport {
    pub track_sets: Vec<TrackSetReport>,
}

/// Excluded (false) where the depth-gradient magnitude exceeds the
/// `percentile`-th percentile of the frame.
///
/// Per axis the gradient is the larger of the forward and backward
/// differences in absolute value; border pixels use the one available side.
/// Unlike a central difference this also flags the peak of a one-pixel
/// spike, whose central difference is zero. A pixel is excluded when its
/// magnitude is nonzero and reaches the percentile, so ties at the
/// percentile count as edges while flat regions never do.
pub fn depth_gradient_mask(depth: &[f32], width: usize, height: usize, percentile: f64) -> Vec<bool> {
    let mags = gradient_magnitudes(depth, width, height);
    let threshold = match stats::percentile(&mags, percentile) {
        Some(t) => t,
        None => return vec![true; depth.len()],
    };
    mags.iter().map(|&m| !(m > 0.0 && m >= threshold)).collect()
}

fn gradient_magnitudes(depth: &[f32], width: usize, height: usize) -> Vec<f64> {
    let at = |x: usize, y: usize| depth[y * width + x] as f64;
    let axis = |center: f64, prev: Option<f64>, next: Option<f64>| -> f64 {
        let b = prev.map(|p| (center - p).abs()).unwrap_or(0.0);
        let f = next.map(|n| (n - center).abs()).unwrap_or(0.0);
        b.max(f)
    };
    let mut out = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let c = at(x, y);
            let gx = axis(
                c,
                (x > 0).then(|| at(x - 1, y)),
                (x + 1 < width).then(|| at(x + 1, y)),
            );
            let gy = axis(
                c,
                (y > 0).then(|| at(x, y - 1)),
                (y + 1 < height).then(|| at(x, y + 1)),
            );
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Depth lookup at subpixel track positions.
struct DepthSampler<'a> {
    bundle: &'a SceneBundle,
    /// Per-frame edge masks when gradient filtering is on.
    edge_masks: Option<Vec<Vec<bool>>>,
}

impl<'a> DepthSampler<'a> {
    fn new(bundle: &'a SceneBundle, config: &LiftConfig) -> Self {
        let edge_masks = config.enable_gradient_filter.then(|| {
            (0..bundle.num_timesteps())
                .into_par_iter()
                .map(|t| {
                    depth_gradient_mask(
                        bundle.depth_frame(t),
                        bundle.width(),
                        bundle.height(),
                        config.gradient_percentile,
                    )
                })
                .collect()
        });
        Self { bundle, edge_masks }
    }

    fn nearest_pixel(&self, u: f64, v: f64) -> (usize, usize) {
        let w = self.bundle.width();
        let h = self.bundle.height();
        let x = u.round().clamp(0.0, (w - 1) as f64) as usize;
        let y = v.round().clamp(0.0, (h - 1) as f64) as usize;
        (x, y)
    }

    /// Bilinear depth, except at edge pixels (and next to invalid depth)
    /// where the nearest pixel is used so depths never blend across layers.
    fn sample(&self, t: usize, u: f64, v: f64) -> f64 {
        let b = self.bundle;
        let (w, h) = (b.width(), b.height());
        let (nx, ny) = self.nearest_pixel(u, v);
        if let Some(masks) = &self.edge_masks {
            if !masks[t][ny * w + nx] {
                return b.depth_at(t, nx, ny) as f64;
            }
        }
        let uc = u.clamp(0.0, (w - 1) as f64);
        let vc = v.clamp(0.0, (h - 1) as f64);
        let x0 = uc.floor() as usize;
        let y0 = vc.floor() as usize;
        let x1 = (x0 + 1).min(w - 1);
        let y1 = (y0 + 1).min(h - 1);
        let fx = uc - x0 as f64;
        let fy = vc - y0 as f64;
        let d00 = b.depth_at(t, x0, y0) as f64;
        let d10 = b.depth_at(t, x1, y0) as f64;
        let d01 = b.depth_at(t, x0, y1) as f64;
        let d11 = b.depth_at(t, x1, y1) as f64;
        if !(d00 > 0.0 && d10 > 0.0 && d01 > 0.0 && d11 > 0.0) {
            return b.depth_at(t, nx, ny) as f64;
        }
        let top = d00 + (d10 - d00) * fx;
        let bottom = d01 + (d11 - d01) * fx;
        top + (bottom - top) * fy
    }
}

/// Fills unknown entries of one point's depth row outward from `init`:
/// timesteps at or after `init` take the most recent known depth before
/// them, earlier timesteps take the next known depth after them. Entries
/// with nothing on their preferred side fall back to the other side.
fn fill_row(depths: &mut [f64], known: &[bool], init: usize) {
    let n = depths.len();
    let mut prev: Vec<Option<f64>> = vec![None; n];
    let mut last = None;
    for t in 0..n {
        if known[t] {
            last = Some(depths[t]);
        }
        prev[t] = last;
    }
    let mut next: Vec<Option<f64>> = vec![None; n];
    let mut upcoming = None;
    for t in (0..n).rev() {
        if known[t] {
            upcoming = Some(depths[t]);
        }
        next[t] = upcoming;
    }
    for t in 0..n {
        if known[t] {
            continue;
        }
        let filled = if t >= init { prev[t].or(next[t]) } else { next[t].or(prev[t]) };
        depths[t] = filled.unwrap_or(f64::NAN);
    }
}

fn unproject_row(
    camera: &CameraModel,
    tracks: &TrackSet,
    n: usize,
    depths: &[f64],
    out: &mut [Point3<f64>],
) -> Result<(), CameraError> {
    for (t, (&z, slot)) in depths.iter().zip(out.iter_mut()).enumerate() {
        *slot = if z > 0.0 {
            let [u, v] = tracks.coord(n, t);
            camera.unproject(u, v, z, t)?
        } else {
            Point3::new(f64::NAN, f64::NAN, f64::NAN)
        };
    }
    Ok(())
}

/// Holds every invisible sample at the depth of the nearest visible one in
/// fill order (see `fill_row`), keeping its own 2D track position. Visible
/// samples are untouched. A point never visible is marked not alive.
pub fn maintain_depth(cloud: &ControlPointCloud, camera: &CameraModel, tracks: &TrackSet) -> ControlPointCloud {
    let mut out = cloud.clone();
    let t_n = cloud.num_timesteps;
    out.positions
        .par_chunks_mut(t_n)
        .zip(out.depths.par_chunks_mut(t_n))
        .zip(out.alive.par_iter_mut())
        .enumerate()
        .for_each(|(n, ((pos, depth), alive))| {
            let vis = &cloud.visibility[n * t_n..(n + 1) * t_n];
            if !vis.iter().any(|&v| v) {
                *alive = false;
                return;
            }
            fill_row(depth, vis, cloud.point_init[n]);
            for t in (0..t_n).filter(|&t| !vis[t]) {
                let [u, v] = tracks.coord(n, t);
                pos[t] = camera
                    .unproject(u, v, depth[t], t)
                    .unwrap_or(Point3::new(f64::NAN, f64::NAN, f64::NAN));
            }
        });
    out
}

/// Removes points with at least one visible-to-visible depth step above
/// `max(factor × median step, floor_fraction × depth range)`.
pub fn filter_jumps(
    cloud: &ControlPointCloud,
    factor: f64,
    floor_fraction: f64,
) -> Result<(ControlPointCloud, JumpFilterReport), LiftError> {
    let t_n = cloud.num_timesteps;
    let mut steps = Vec::new();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in cloud.alive_indices() {
        for t in 0..t_n {
            if cloud.is_visible(n, t) {
                let z = cloud.depth(n, t);
                lo = lo.min(z);
                hi = hi.max(z);
                if t + 1 < t_n && cloud.is_visible(n, t + 1) {
                    steps.push((cloud.depth(n, t + 1) - z).abs());
                }
            }
        }
    }
    if steps.len() < 10 {
        return Err(LiftError::DegenerateStatistics { pairs: steps.len() });
    }
    let median_step = stats::median(&steps).unwrap_or(0.0);
    let depth_range = if hi >= lo { hi - lo } else { 0.0 };
    let threshold = (factor * median_step).max(floor_fraction * depth_range);

    let mut out = cloud.clone();
    let mut removed = Vec::new();
    for n in cloud.alive_indices() {
        let jumps = (0..t_n.saturating_sub(1)).any(|t| {
            cloud.is_visible(n, t)
                && cloud.is_visible(n, t + 1)
                && (cloud.depth(n, t + 1) - cloud.depth(n, t)).abs() > threshold
        });
        if jumps {
            out.alive[n] = false;
            removed.push(n);
        }
    }
    Ok((
        out,
        JumpFilterReport {
            threshold,
            median_step,
            depth_range,
            step_pairs: steps.len(),
            removed,
        },
    ))
}

fn lift_track_set(
    bundle: &SceneBundle,
    tracks: &TrackSet,
    sampler: &DepthSampler<'_>,
    config: &LiftConfig,
) -> Result<(ControlPointCloud, TrackSetReport), LiftError> {
    let t_n = bundle.num_timesteps();
    let n_pts = tracks.num_points;
    let camera = &bundle.camera;
    let maintain = config.enable_depth_maintenance;

    // Per point: sampled depth row, plus whether each entry was observed.
    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..n_pts)
        .into_par_iter()
        .map(|n| {
            let mut depth = vec![f64::NAN; t_n];
            let mut known = vec![false; t_n];
            for t in 0..t_n {
                let visible = tracks.is_visible(n, t);
                if !visible && maintain {
                    continue;
                }
                let [u, v] = tracks.coord(n, t);
                let z = sampler.sample(t, u, v);
                if visible && !(z > 0.0) {
                    return Err(LiftError::NonPositiveDepth { point: n, t, z });
                }
                if z > 0.0 {
                    depth[t] = z;
                    known[t] = true;
                }
            }
            Ok((depth, known))
        })
        .collect::<Result<_, _>>()?;

    let mut cloud = ControlPointCloud {
        num_points: n_pts,
        num_timesteps: t_n,
        positions: vec![Point3::origin(); n_pts * t_n],
        depths: rows.iter().flat_map(|(d, _)| d.iter().copied()).collect(),
        visibility: tracks.visible.clone(),
        alive: vec![true; n_pts],
        init_timestep: tracks.init_timestep,
        point_init: vec![tracks.init_timestep; n_pts],
    };

    let mut report = TrackSetReport {
        init_timestep: tracks.init_timestep,
        num_points: n_pts,
        ..Default::default()
    };

    // Samples without usable depth (only possible for invisible samples in
    // the naive path) borrow a neighbor's depth so the point stays finite.
    for (n, (_, known)) in rows.iter().enumerate() {
        if !known.iter().any(|&k| k) {
            cloud.alive[n] = false;
            report.without_depth += 1;
        } else if !maintain && known.iter().any(|&k| !k) {
            let row = &mut cloud.depths[n * t_n..(n + 1) * t_n];
            fill_row(row, known, tracks.init_timestep);
        }
    }

    let alive = cloud.alive.clone();
    cloud
        .positions
        .par_chunks_mut(t_n)
        .zip(cloud.depths.par_chunks(t_n))
        .enumerate()
        .try_for_each(|(n, (pos, depth))| {
            if alive[n] {
                unproject_row(camera, tracks, n, depth, pos)
            } else {
                pos.fill(Point3::new(f64::NAN, f64::NAN, f64::NAN));
                Ok(())
            }
        })?;

    if maintain {
        cloud = maintain_depth(&cloud, camera, tracks);
    }

    if config.enable_jump_filter {
        match filter_jumps(&cloud, config.jump_threshold_factor, config.jump_floor_fraction) {
            Ok((filtered, jr)) => {
                cloud = filtered;
                report.jump_filter = Some(jr);
            }
            Err(e @ LiftError::DegenerateStatistics { .. }) => {
                log::warn!("jump filter skipped: {e}");
                report.warnings.push(e.to_string());
            }
            Err(e) => return Err(e),
        }
    }
    Ok((cloud, report))
}

/// Concatenates clouds over the same timesteps, keeping each point's seed frame.
pub fn merge_track_sets(clouds: &[ControlPointCloud]) -> Result<ControlPointCloud, LiftError> {
    let first = clouds.first().ok_or(LiftError::NoTracks)?;
    let mut out = first.clone();
    for c in &clouds[1..] {
        if c.num_timesteps != out.num_timesteps {
            return Err(LiftError::TimestepMismatch {
                expected: out.num_timesteps,
                found: c.num_timesteps,
            });
        }
        out.num_points += c.num_points;
        out.positions.extend_from_slice(&c.positions);
        out.depths.extend_from_slice(&c.depths);
        out.visibility.extend_from_slice(&c.visibility);
        out.alive.extend_from_slice(&c.alive);
        out.point_init.extend_from_slice(&c.point_init);
    }
    Ok(out)
}

pub fn lift_tracks_with_report(
    bundle: &SceneBundle,
    config: &LiftConfig,
) -> Result<(ControlPointCloud, LiftReport), LiftError> {
    config.validate()?;
    if bundle.track_sets.is_empty() {
        return Err(LiftError::NoTracks);
    }
    let sampler = DepthSampler::new(bundle, config);
    let sets: &[TrackSet] = if config.multi_frame {
        &bundle.track_sets
    } else {
        &bundle.track_sets[..1]
    };
    let mut clouds = Vec::with_capacity(sets.len());
    let mut report = LiftReport::default();
    for set in sets {
        let (cloud, r) = lift_track_set(bundle, set, &sampler, config)?;
        clouds.push(cloud);
        report.track_sets.push(r);
    }
    Ok((merge_track_sets(&clouds)?, report))
}

/// Lifts the scene's tracks into a control cloud (see [`LiftConfig`]).
pub fn lift_tracks(bundle: &SceneBundle, config: &LiftConfig) -> Result<ControlPointCloud, LiftError> {
    lift_tracks_with_report(bundle, config).map(|(cloud, _)| cloud)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud_from_depths(rows: &[Vec<f64>], vis: &[Vec<bool>], init: usize) -> ControlPointCloud {
        let n = rows.len();
        let t = rows[0].len();
        ControlPointCloud {
            num_points: n,
            num_timesteps: t,
            positions: rows
                .iter()
                .flat_map(|r| r.iter().map(|&z| Point3::new(0.0, 0.0, z)))
                .collect(),
            depths: rows.iter().flatten().copied().collect(),
            visibility: vis.iter().flatten().copied().collect(),
            alive: vec![true; n],
            init_timestep: init,
            point_init: vec![init; n],
        }
    }

    #[test]
    fn fill_holds_last_observation_forward() {
        let mut d = vec![1.0, 1.0, 1.0, 1.0, 1.0, 0.3, 0.3, 0.3, 1.1, 1.1];
        let known = [true, true, true, true, true, false, false, false, true, true];
        fill_row(&mut d, &known, 0);
        assert_eq!(d, vec![1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.1, 1.1]);
    }

    #[test]
    fn fill_runs_backward_before_the_seed_frame() {
        let mut d = vec![0.3, 0.3, 2.0, 2.0, 5.0];
        let known = [false, false, true, true, true];
        fill_row(&mut d, &known, 4);
        assert_eq!(&d[..2], &[2.0, 2.0]);
        // Seed frame invisible: nothing before it observed either side falls back.
        let mut d = vec![9.0, 9.0, 9.0, 4.0];
        fill_row(&mut d, &[false, false, false, true], 1);
        assert_eq!(d, vec![4.0, 4.0, 4.0, 4.0]);
    }

    #[test]
    fn spike_and_neighbors_are_edge_pixels() {
        let (w, h) = (16, 16);
        let mut depth = vec![1.0f32; w * h];
        depth[8 * w + 8] = 3.0;
        let mask = depth_gradient_mask(&depth, w, h, 99.0);
        let excluded: Vec<(usize, usize)> = (0..w * h).filter(|&i| !mask[i]).map(|i| (i % w, i / w)).collect();
        assert_eq!(excluded, vec![(8, 7), (7, 8), (8, 8), (9, 8), (8, 9)]);
    }

    #[test]
    fn constant_frame_excludes_nothing() {
        let mask = depth_gradient_mask(&vec![2.5f32; 40 * 30], 40, 30, 95.0);
        assert!(mask.iter().all(|&m| m));
    }

    #[test]
    fn step_edge_band_is_at_most_two_pixels_wide() {
        let (w, h) = (64, 20);
        let depth: Vec<f32> = (0..w * h).map(|i| if i % w < 30 { 0.5 } else { 2.0 }).collect();
        let mask = depth_gradient_mask(&depth, w, h, 95.0);
        for y in 0..h {
            let cols: Vec<usize> = (0..w).filter(|&x| !mask[y * w + x]).collect();
            assert_eq!(cols, vec![29, 30], "row {y}");
        }
    }

    #[test]
    fn jump_filter_needs_ten_pairs() {
        let c = cloud_from_depths(&vec![vec![1.0; 4]; 3], &vec![vec![true; 4]; 3], 0);
        assert_eq!(
            filter_jumps(&c, 5.0, 0.05).unwrap_err(),
            LiftError::DegenerateStatistics { pairs: 9 }
        );
    }

    #[test]
    fn static_cloud_loses_nothing() {
        let c = cloud_from_depths(&vec![vec![1.0; 10]; 5], &vec![vec![true; 10]; 5], 0);
        let (out, r) = filter_jumps(&c, 5.0, 0.05).unwrap();
        assert!(r.removed.is_empty());
        assert_eq!(out, c);
    }

    #[test]
    fn alternating_point_is_removed() {
        let mut rows = vec![vec![1.0; 10]; 6];
        rows[3] = (0..10).map(|t| if t % 2 == 0 { 0.5 } else { 2.0 }).collect();
        let c = cloud_from_depths(&rows, &vec![vec![true; 10]; 6], 0);
        let (out, r) = filter_jumps(&c, 5.0, 0.05).unwrap();
        assert_eq!(r.removed, vec![3]);
        assert!(!out.alive[3]);
    }

    #[test]
    fn merge_checks_timesteps() {
        let a = cloud_from_depths(&[vec![1.0; 10]], &[vec![true; 10]], 0);
        let b = cloud_from_depths(&[vec![1.0; 12]], &[vec![true; 12]], 0);
        assert_eq!(
            merge_track_sets(&[a.clone(), b]).unwrap_err(),
            LiftError::TimestepMismatch { expected: 10, found: 12 }
        );
        assert_eq!(merge_track_sets(std::slice::from_ref(&a)).unwrap(), a);
    }

    #[test]
    fn merge_preserves_order_and_seed_frames() {
        let a = cloud_from_depths(&vec![vec![1.0; 10]; 100], &vec![vec![true; 10]; 100], 5);
        let b = cloud_from_depths(&vec![vec![2.0; 10]; 50], &vec![vec![true; 10]; 50], 0);
        let m = merge_track_sets(&[a.clone(), b]).unwrap();
        assert_eq!(m.num_points, 150);
        assert_eq!(m.position(99, 3), a.position(99, 3));
        assert_eq!(m.point_init[99], 5);
        assert_eq!(m.point_init[100], 0);
        assert_eq!(m.init_timestep, 5);
    }

    #[test]
    fn config_bounds() {
        let mut c = LiftConfig::default();
        c.gradient_percentile = 100.0;
        assert!(c.validate().is_err());
        c = LiftConfig {
            jump_threshold_factor: 0.0,
            ..LiftConfig::default()
        };
        assert!(c.validate().is_err());
    }
}
