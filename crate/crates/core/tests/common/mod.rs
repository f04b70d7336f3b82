#![allow(dead_code)]

use std::collections::BTreeMap;

use nalgebra::Point3;
use sem4d_core::camera::{CameraModel, Intrinsics};
use sem4d_core::densification::DensePointCloud;
use sem4d_core::lifting::ControlPointCloud;
use sem4d_core::semantics::{Instance, InstanceTable};
use sem4d_core::toolkit::{Scene4D, SceneParts};

pub fn intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 140.0,
        fy: 140.0,
        cx: 79.5,
        cy: 63.5,
    }
}

/// One always-visible control point; each dense point follows the given
/// per-timestep positions.
pub fn scene_from_tracks(objects: &[(u16, Vec<Vec<Point3<f64>>>)], num_timesteps: usize, radius: f64) -> Scene4D {
    let mut positions = Vec::new();
    let mut instances = Vec::new();
    let mut next = 0u32;
    for (id, (class, tracks)) in objects.iter().enumerate() {
        let members: Vec<u32> = (next..next + tracks.len() as u32).collect();
        next += tracks.len() as u32;
        for tr in tracks {
            assert_eq!(tr.len(), num_timesteps);
            positions.extend_from_slice(tr);
        }
        instances.push(Instance {
            id: id as u32,
            class_id: *class,
            members,
            contributors: Vec::new(),
            presence: vec![true; num_timesteps],
        });
    }
    let m = next as usize;
    let dense = DensePointCloud {
        num_points: m,
        num_timesteps,
        t_obs: vec![0; m],
        pixels: (0..m).map(|i| [i as u32, 0]).collect(),
        positions,
        k: 1,
        neighbors: vec![0; m],
        weights: vec![1.0; m],
        class_ids: vec![1; m],
    };
    let controls = ControlPointCloud {
        num_points: 1,
        num_timesteps,
        positions: vec![Point3::new(0.0, 0.0, 1.0); num_timesteps],
        depths: vec![1.0; num_timesteps],
        visibility: vec![true; num_timesteps],
        alive: vec![true],
        init_timestep: 0,
        point_init: vec![0],
    };
    Scene4D::from_parts(SceneParts {
        scene_id: "synthetic".into(),
        width: 160,
        height: 128,
        frame_stride: 1,
        camera: CameraModel::static_identity(intrinsics(), num_timesteps),
        controls,
        dense,
        instances: InstanceTable {
            t_ref: 0,
            radius,
            instances,
        },
        classes: BTreeMap::from([(1, "tissue".into()), (2, "tool".into())]),
        frames: None,
    })
    .unwrap()
}

/// Static point sets.
pub fn static_scene(sets: &[(u16, Vec<Point3<f64>>)], num_timesteps: usize, radius: f64) -> Scene4D {
    let objects: Vec<(u16, Vec<Vec<Point3<f64>>>)> = sets
        .iter()
        .map(|(c, pts)| (*c, pts.iter().map(|p| vec![*p; num_timesteps]).collect()))
        .collect();
    scene_from_tracks(&objects, num_timesteps, radius)
}

/// Regular grid of points filling an axis-aligned box, corners included.
pub fn box_grid(center: [f64; 3], size: [f64; 3], n: usize) -> Vec<Point3<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let f = |a: usize, s: usize| if n == 1 { 0.0 } else { a as f64 / (n - 1) as f64 - 0.5 } * size[s];
                out.push(Point3::new(center[0] + f(i, 0), center[1] + f(j, 1), center[2] + f(k, 2)));
            }
        }
    }
    out
}
