//! Time-persistent semantic instances.
//!
//! Per-frame semantic masks are split into connected components at a few
//! seed frames. Each component's dense points are carried to a reference
//! timestep, where same-class components from different seed frames are
//! merged when one is contained in the other. Components without a partner
//! survive on their own, so objects may appear or disappear over the clip.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use nalgebra::Point3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::densification::DensePointCloud;
use crate::knn::{median_knn_distance, RadiusIndex};
use crate::lifting::ControlPointCloud;
use crate::scene_io::SceneBundle;
use crate::tensor::{self, ArchiveError};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("instance has no member points")]
    EmptyMembership,
    #[error("containment needs two nonempty point sets")]
    EmptySet,
    #[error("invalid merge config: {0}")]
    InvalidConfig(String),
}

/// A connected single-class region of one seed frame's mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameInstance {
    pub seed_frame: usize,
    pub class_id: u16,
    /// Linear pixel indices (`y * W + x`), ascending.
    pub pixels: Vec<u32>,
    /// Dense point ids seeded on those pixels at `seed_frame`, ascending.
    pub members: Vec<u32>,
}

/// Labels same-class regions of a mask frame; class 0 is ignored and
/// components below `min_pixels` are dropped. Ordered by (class, first pixel).
pub fn connected_components(
    mask: &[u16],
    width: usize,
    height: usize,
    seed_frame: usize,
    min_pixels: usize,
    connectivity: Connectivity,
) -> Vec<FrameInstance> {
    assert_eq!(mask.len(), width * height, "mask size");
    let mut uf = UnionFind::new(mask.len());
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let c = mask[i];
            if c == 0 {
                continue;
            }
            if x > 0 && mask[i - 1] == c {
                uf.union(i, i - 1);
            }
            if y > 0 {
                let up = i - width;
                if mask[up] == c {
                    uf.union(i, up);
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && mask[up - 1] == c {
                        uf.union(i, up - 1);
                    }
                    if x + 1 < width && mask[up + 1] == c {
                        uf.union(i, up + 1);
                    }
                }
            }
        }
    }
    let mut out: Vec<FrameInstance> = uf
        .groups()
        .into_iter()
        .filter(|g| mask[g[0]] != 0 && g.len() >= min_pixels.max(1))
        .map(|g| FrameInstance {
            seed_frame,
            class_id: mask[g[0]],
            pixels: g.into_iter().map(|i| i as u32).collect(),
            members: Vec::new(),
        })
        .collect();
    out.sort_by_key(|f| (f.class_id, f.pixels[0]));
    out
}

/// Fills `members` with the dense points seeded on each instance's pixels.
pub fn attach_members(instances: &mut [FrameInstance], dense: &DensePointCloud, width: usize) {
    let lookup = dense.pixel_lookup();
    for inst in instances {
        inst.members = inst
            .pixels
            .iter()
            .filter_map(|&p| {
                let (x, y) = (p % width as u32, p / width as u32);
                lookup.get(&(inst.seed_frame, x, y)).map(|&m| m as u32)
            })
            .collect();
        inst.members.sort_unstable();
    }
}

/// Member positions at `t_ref`.
pub fn lift_to_ref(
    instance: &FrameInstance,
    dense: &DensePointCloud,
    t_ref: usize,
) -> Result<Vec<Point3<f64>>, SemanticsError> {
    if instance.members.is_empty() {
        return Err(SemanticsError::EmptyMembership);
    }
    Ok(instance
        .members
        .iter()
        .map(|&m| *dense.position(m as usize, t_ref))
        .collect())
}

/// Fraction of the smaller set (ties: `a`) lying within `r` of the other set.
pub fn containment_score(a: &[Point3<f64>], b: &[Point3<f64>], r: f64) -> Result<f64, SemanticsError> {
    if a.is_empty() || b.is_empty() {
        return Err(SemanticsError::EmptySet);
    }
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    Ok(coverage(small, large, r))
}

/// Fraction of `a` within `r` (inclusive) of some point of `b`.
pub fn coverage(a: &[Point3<f64>], b: &[Point3<f64>], r: f64) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let index = RadiusIndex::new(b, r);
    let hits = a.iter().filter(|p| index.any_within(p)).count();
    hits as f64 / a.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeConfig {
    pub seed_frames: Vec<usize>,
    pub t_ref: usize,
    /// Containment radius in meters.
    pub radius: f64,
    /// Merge when containment ≥ tau.
    pub tau: f64,
    pub min_component_pixels: usize,
    pub connectivity: Connectivity,
    /// Present when at least this fraction of the member points' control neighbors are visible.
    pub presence_fraction: f64,
}

impl MergeConfig {
    pub fn validate(&self, num_timesteps: usize) -> Result<(), SemanticsError> {
        let bad = |m: String| Err(SemanticsError::InvalidConfig(m));
        if self.t_ref >= num_timesteps {
            return bad(format!("t_ref {} not below T = {num_timesteps}", self.t_ref));
        }
        if let Some(&f) = self.seed_frames.iter().find(|&&f| f >= num_timesteps) {
            return bad(format!("seed frame {f} not below T = {num_timesteps}"));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return bad("radius must be positive".into());
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return bad("tau must lie in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&self.presence_fraction) {
            return bad("presence_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Twice the median nearest-neighbor spacing of alive controls at `t_ref`.
pub fn default_radius(controls: &ControlPointCloud, t_ref: usize) -> f64 {
    let pts: Vec<Point3<f64>> = (0..controls.num_points).map(|n| *controls.position(n, t_ref)).collect();
    2.0 * median_knn_distance(&pts, &controls.alive_indices(), 1)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contributor {
    pub seed_frame: usize,
    pub class_id: u16,
    pub pixel_count: usize,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub id: u32,
    pub class_id: u16,
    /// Dense point ids, ascending.
    pub members: Vec<u32>,
    pub contributors: Vec<Contributor>,
    /// Per-timestep presence; empty until computed.
    pub presence: Vec<bool>,
}

impl Instance {
    pub fn first_present(&self) -> Option<usize> {
        self.presence.iter().position(|&p| p)
    }

    pub fn last_present(&self) -> Option<usize> {
        self.presence.iter().rposition(|&p| p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTable {
    pub t_ref: usize,
    pub radius: f64,
    pub instances: Vec<Instance>,
}

/// Merges same-class frame instances from different seed frames whose
/// containment at `t_ref` reaches `tau`, via union-find. Instances are
/// ordered, and numbered, by their smallest member id.
pub fn merge_instances(
    frame_instances: &[FrameInstance],
    dense: &DensePointCloud,
    config: &MergeConfig,
) -> Result<InstanceTable, SemanticsError> {
    config.validate(dense.num_timesteps)?;
    let candidates: Vec<&FrameInstance> = frame_instances.iter().filter(|f| !f.members.is_empty()).collect();
    let dropped = frame_instances.len() - candidates.len();
    if dropped > 0 {
        log::debug!("{dropped} frame instances have no dense points and are skipped");
    }
    let lifted: Vec<Vec<Point3<f64>>> = candidates
        .par_iter()
        .map(|f| lift_to_ref(f, dense, config.t_ref))
        .collect::<Result<_, _>>()?;

    let pairs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|i| ((i + 1)..candidates.len()).map(move |j| (i, j)))
        .filter(|&(i, j)| {
            candidates[i].seed_frame != candidates[j].seed_frame && candidates[i].class_id == candidates[j].class_id
        })
        .collect();
    let decisions: Vec<bool> = pairs
        .par_iter()
        .map(|&(i, j)| {
            containment_score(&lifted[i], &lifted[j], config.radius).map(|s| s >= config.tau)
        })
        .collect::<Result<_, _>>()?;

    let merges: Vec<(usize, usize)> = pairs
        .into_iter()
        .zip(decisions)
        .filter_map(|(p, merge)| merge.then_some(p))
        .collect();
    let groups = group_by_merges(candidates.len(), &merges);

    let mut instances: Vec<Instance> = groups
        .into_iter()
        .map(|g| {
            let mut members: Vec<u32> = g.iter().flat_map(|&i| candidates[i].members.iter().copied()).collect();
            members.sort_unstable();
            members.dedup();
            let mut parts: Vec<&FrameInstance> = g.iter().map(|&i| candidates[i]).collect();
            parts.sort_by_key(|f| (f.seed_frame, f.members[0]));
            Instance {
                id: 0,
                class_id: parts[0].class_id,
                members,
                contributors: parts
                    .iter()
                    .map(|f| Contributor {
                        seed_frame: f.seed_frame,
                        class_id: f.class_id,
                        pixel_count: f.pixels.len(),
                        member_count: f.members.len(),
                    })
                    .collect(),
                presence: Vec::new(),
            }
        })
        .collect();
    instances.sort_by_key(|inst| inst.members[0]);
    for (id, inst) in instances.iter_mut().enumerate() {
        inst.id = id as u32;
    }
    Ok(InstanceTable {
        t_ref: config.t_ref,
        radius: config.radius,
        instances,
    })
}

/// Connected components of the merge graph over `n` nodes.
pub fn group_by_merges(n: usize, merges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(n);
    for &(a, b) in merges {
        uf.union(a, b);
    }
    uf.groups()
}

/// Present at `t` iff at least `fraction` of the distinct control points
/// supporting the members (nonzero weight) are visible at `t`.
pub fn presence_over_time(
    members: &[u32],
    dense: &DensePointCloud,
    controls: &ControlPointCloud,
    fraction: f64,
) -> Vec<bool> {
    let support: BTreeSet<u32> = members
        .iter()
        .flat_map(|&m| {
            let m = m as usize;
            dense
                .neighbors_of(m)
                .iter()
                .zip(dense.weights_of(m))
                .filter(|(_, &w)| w > 0.0)
                .map(|(&c, _)| c)
        })
        .collect();
    (0..controls.num_timesteps)
        .map(|t| {
            if support.is_empty() {
                return false;
            }
            let visible = support.iter().filter(|&&c| controls.is_visible(c as usize, t)).count();
            visible as f64 >= fraction * support.len() as f64
        })
        .collect()
}

impl InstanceTable {
    pub fn compute_presence(&mut self, dense: &DensePointCloud, controls: &ControlPointCloud, fraction: f64) {
        for inst in &mut self.instances {
            inst.presence = presence_over_time(&inst.members, dense, controls, fraction);
        }
    }

    pub fn get(&self, id: u32) -> Option<&Instance> {
        self.instances.get(id as usize).filter(|i| i.id == id)
    }

    /// Disjoint, nonempty, ids consecutive, members below `num_dense`.
    pub fn check(&self, num_dense: usize, num_timesteps: usize) -> Result<(), String> {
        let mut seen = vec![false; num_dense];
        for (i, inst) in self.instances.iter().enumerate() {
            if inst.id as usize != i {
                return Err(format!("instance {i} carries id {}", inst.id));
            }
            if inst.members.is_empty() {
                return Err(format!("instance {i} has no members"));
            }
            if !inst.presence.is_empty() && inst.presence.len() != num_timesteps {
                return Err(format!("instance {i} presence has the wrong length"));
            }
            for &m in &inst.members {
                let m = m as usize;
                if m >= num_dense {
                    return Err(format!("instance {i} member {m} out of range"));
                }
                if std::mem::replace(&mut seen[m], true) {
                    return Err(format!("dense point {m} belongs to two instances"));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, dir: &Path, stem: &str) -> Result<PathBuf, ArchiveError> {
        let members: Vec<u32> = self.instances.iter().flat_map(|i| i.members.iter().copied()).collect();
        let desc = tensor::write_tensor(dir, &format!("{stem}.members.bin"), &members, vec![members.len()])?;
        let doc = InstanceTableDoc {
            kind: Self::KIND.into(),
            version: 1,
            t_ref: self.t_ref,
            radius: self.radius,
            members: desc,
            instances: self
                .instances
                .iter()
                .map(|i| InstanceDoc {
                    id: i.id,
                    class_id: i.class_id,
                    member_count: i.members.len(),
                    contributors: i.contributors.clone(),
                    presence: i.presence.iter().map(|&p| if p { '1' } else { '0' }).collect(),
                })
                .collect(),
        };
        let path = dir.join(format!("{stem}.json"));
        let mut text = serde_json::to_string_pretty(&doc).expect("instance table serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|source| ArchiveError::Io {
            path: path.clone(),
            source,
        })?;
        Ok(path)
    }

    pub const KIND: &'static str = "instance_table";

    pub fn from_json_and_members(text: &str, members: &[u32]) -> Result<Self, ArchiveError> {
        let doc: InstanceTableDoc = serde_json::from_str(text).map_err(|source| ArchiveError::Json {
            path: PathBuf::from("<instances>"),
            source,
        })?;
        Self::from_doc(doc, members)
    }

    fn from_doc(doc: InstanceTableDoc, members: &[u32]) -> Result<Self, ArchiveError> {
        let invalid = |m: &str| ArchiveError::Invalid {
            field: "instances".into(),
            message: m.into(),
        };
        if doc.kind != Self::KIND {
            return Err(invalid("wrong kind"));
        }
        let mut offset = 0usize;
        let mut instances = Vec::with_capacity(doc.instances.len());
        for i in doc.instances {
            let end = offset
                .checked_add(i.member_count)
                .filter(|&e| e <= members.len())
                .ok_or_else(|| invalid("member counts exceed the member blob"))?;
            let presence = i
                .presence
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(invalid("presence bitmap must contain only 0 and 1")),
                })
                .collect::<Result<_, _>>()?;
            instances.push(Instance {
                id: i.id,
                class_id: i.class_id,
                members: members[offset..end].to_vec(),
                contributors: i.contributors,
                presence,
            });
            offset = end;
        }
        if offset != members.len() {
            return Err(invalid("member blob has trailing entries"));
        }
        Ok(Self {
            t_ref: doc.t_ref,
            radius: doc.radius,
            instances,
        })
    }

    pub fn load(path: &Path) -> Result<Self, ArchiveError> {
        let text = std::fs::read_to_string(path).map_err(|source| ArchiveError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let doc: InstanceTableDoc = serde_json::from_str(&text).map_err(|source| ArchiveError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let members: Vec<u32> = tensor::read_tensor(dir, &doc.members, "members")?;
        Self::from_doc(doc, &members)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceTableDoc {
    kind: String,
    version: u32,
    t_ref: usize,
    radius: f64,
    members: tensor::TensorDescriptor,
    instances: Vec<InstanceDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    id: u32,
    class_id: u16,
    member_count: usize,
    contributors: Vec<Contributor>,
    presence: String,
}

/// Components at every seed frame, with dense members attached.
pub fn frame_instances(bundle: &SceneBundle, dense: &DensePointCloud, config: &MergeConfig) -> Vec<FrameInstance> {
    let mut seeds = config.seed_frames.clone();
    seeds.sort_unstable();
    seeds.dedup();
    let mut out: Vec<FrameInstance> = seeds
        .iter()
        .flat_map(|&t| {
            connected_components(
                bundle.mask_frame(t),
                bundle.width(),
                bundle.height(),
                t,
                config.min_component_pixels,
                config.connectivity,
            )
        })
        .collect();
    attach_members(&mut out, dense, bundle.width());
    out
}

/// Components, merging and presence in one pass.
pub fn build_instances(
    bundle: &SceneBundle,
    dense: &DensePointCloud,
    controls: &ControlPointCloud,
    config: &MergeConfig,
) -> Result<InstanceTable, SemanticsError> {
    let parts = frame_instances(bundle, dense, config);
    let mut table = merge_instances(&parts, dense, config)?;
    table.compute_presence(dense, controls, config.presence_fraction);
    Ok(table)
}
