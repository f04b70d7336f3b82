#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::Point3;
use sem4d_core::camera::{CameraModel, Intrinsics};
use sem4d_core::densification::DensePointCloud;
use sem4d_core::fixture::{presets, Fixture};
use sem4d_core::lifting::ControlPointCloud;
use sem4d_core::pipeline::{self, PipelineConfig, SceneDoc};
use sem4d_core::semantics::{Instance, InstanceTable};
use sem4d_core::toolkit::{Scene4D, SceneParts};

/// Two static 3×3 grids sharing the point (0.1, 0, 1), over 4 timesteps.
pub fn touching_scene() -> Scene4D {
    let t_n = 4;
    let grid = |x0: f64| -> Vec<Point3<f64>> {
        (0..3)
            .flat_map(|i| (0..3).map(move |j| Point3::new(x0 + 0.05 * i as f64, 0.05 * j as f64, 1.0)))
            .collect()
    };
    let pts: Vec<Point3<f64>> = grid(0.0).into_iter().chain(grid(0.1)).collect();
    let m = pts.len();
    let dense = DensePointCloud {
        num_points: m,
        num_timesteps: t_n,
        t_obs: vec![0; m],
        pixels: (0..m).map(|i| [i as u32, 0]).collect(),
        positions: pts.iter().flat_map(|p| vec![*p; t_n]).collect(),
        k: 1,
        neighbors: vec![0; m],
        weights: vec![1.0; m],
        class_ids: vec![1; m],
    };
    let controls = ControlPointCloud {
        num_points: 1,
        num_timesteps: t_n,
        positions: vec![Point3::new(0.0, 0.0, 1.0); t_n],
        depths: vec![1.0; t_n],
        visibility: vec![true; t_n],
        alive: vec![true],
        init_timestep: 0,
        point_init: vec![0],
    };
    let instance = |id: u32, class_id: u16, members: std::ops::Range<u32>| Instance {
        id,
        class_id,
        members: members.collect(),
        contributors: Vec::new(),
        presence: vec![true; t_n],
    };
    Scene4D::from_parts(SceneParts {
        scene_id: "touching".into(),
        width: 160,
        height: 128,
        frame_stride: 1,
        camera: CameraModel::static_identity(
            Intrinsics {
                fx: 140.0,
                fy: 140.0,
                cx: 79.5,
                cy: 63.5,
            },
            t_n,
        ),
        controls,
        dense,
        instances: InstanceTable {
            t_ref: 0,
            radius: 0.02,
            instances: vec![instance(0, 2, 0..9), instance(1, 1, 9..18)],
        },
        classes: BTreeMap::from([(1, "tissue".into()), (2, "tool".into())]),
        frames: None,
    })
    .unwrap()
}

/// Writes and builds the contact fixture under `dir`.
pub fn contact_scene(dir: &Path) -> (Scene4D, SceneDoc, Fixture) {
    let fx = presets::contact().generate().unwrap();
    let manifest = fx.write(&dir.join("bundle")).unwrap();
    let (scene, doc, _) = pipeline::build(&manifest, &PipelineConfig::default(), &dir.join("scenes/contact"), None).unwrap();
    (scene, doc, fx)
}
