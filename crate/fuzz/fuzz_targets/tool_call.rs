#![no_main]

use std::collections::BTreeMap;
use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use nalgebra::Point3;
use sem4d_core::camera::{CameraModel, Intrinsics};
use sem4d_core::densification::DensePointCloud;
use sem4d_core::lifting::ControlPointCloud;
use sem4d_core::semantics::{Instance, InstanceTable};
use sem4d_core::toolkit::{Scene4D, SceneParts};
use sem4d_gateway::tools::{execute, DispatchOptions};
use sem4d_gateway::ToolCall;

/// Two 2×2 patches, one moving in x, over 3 timesteps.
fn scene() -> &'static Scene4D {
    static SCENE: OnceLock<Scene4D> = OnceLock::new();
    SCENE.get_or_init(|| {
        let t_n = 3;
        let base = [[0.0, 0.0], [0.05, 0.0], [0.0, 0.05], [0.05, 0.05]];
        let mut positions = Vec::new();
        for obj in 0..2 {
            for [x, y] in base {
                for t in 0..t_n {
                    let dx = if obj == 0 { 0.02 * t as f64 } else { 0.1 };
                    positions.push(Point3::new(x + dx, y, 1.0));
                }
            }
        }
        let m = 8;
        let instance = |id: u32, class_id: u16, members: std::ops::Range<u32>| Instance {
            id,
            class_id,
            members: members.collect(),
            contributors: Vec::new(),
            presence: vec![true, true, false],
        };
        Scene4D::from_parts(SceneParts {
            scene_id: "fuzz".into(),
            width: 32,
            height: 32,
            frame_stride: 1,
            camera: CameraModel::static_identity(
                Intrinsics {
                    fx: 30.0,
                    fy: 30.0,
                    cx: 15.5,
                    cy: 15.5,
                },
                t_n,
            ),
            controls: ControlPointCloud {
                num_points: 1,
                num_timesteps: t_n,
                positions: vec![Point3::new(0.0, 0.0, 1.0); t_n],
                depths: vec![1.0; t_n],
                visibility: vec![true; t_n],
                alive: vec![true],
                init_timestep: 0,
                point_init: vec![0],
            },
            dense: DensePointCloud {
                num_points: m,
                num_timesteps: t_n,
                t_obs: vec![0; m],
                pixels: (0..m).map(|i| [i as u32, 0]).collect(),
                positions,
                k: 1,
                neighbors: vec![0; m],
                weights: vec![1.0; m],
                class_ids: vec![2, 2, 2, 2, 1, 1, 1, 1],
            },
            instances: InstanceTable {
                t_ref: 0,
                radius: 0.03,
                instances: vec![instance(0, 2, 0..4), instance(1, 1, 4..8)],
            },
            classes: BTreeMap::from([(1, "tissue".into()), (2, "tool".into())]),
            frames: None,
        })
        .expect("fuzz scene is consistent")
    })
}

fuzz_target!(|data: &[u8]| {
    let Ok(call) = serde_json::from_slice::<ToolCall>(data) else { return };
    let result = execute(scene(), &call, &DispatchOptions::default());
    let text = serde_json::to_string(&result).expect("results serialize");
    assert!(!text.contains("NaN"));
});
