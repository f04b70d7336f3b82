//! Benchmark queries with analytic answers for the contact preset.
//!
//! Each query carries a scripted tool plan for the mock endpoint, so the
//! whole agent loop can be scored without a model.

use anyhow::{bail, Context, Result};
use serde_json::json;

use sem4d_core::evaluation::{GroundTruth, QueryFixture};
use sem4d_core::fixture::Fixture;
use sem4d_core::toolkit::{discretize_direction, Scene4D, DEFAULT_DIRECTION_EPSILON};

/// Extra distance over the box thickness below which the scripted plan
/// reports contact. Only the front and side faces are observed, so the
/// measured distance never drops below the box depth.
pub const CONTACT_MARGIN: f64 = 0.01;

/// Distance used by the "close to the tissue" queries.
pub const NEAR_DISTANCE: f64 = 0.2;

/// Analytic contact geometry of box 0 against the plane.
#[derive(Debug, Clone, PartialEq)]
pub struct ContactGeometry {
    pub plane_depth: f64,
    pub box_depth: f64,
    /// First timestep at which the back face reaches the plane.
    pub touch_t: usize,
    /// World point at the center of the contact patch.
    pub contact_point: [f64; 3],
    /// Per timestep: distance from the back face to the plane, clamped at 0.
    pub gap: Vec<f64>,
}

impl ContactGeometry {
    pub fn from_fixture(fx: &Fixture) -> Result<Self> {
        let r = &fx.recipe;
        let plane = r.plane.as_ref().context("recipe has no tissue plane")?;
        let bx = r.boxes.first().context("recipe has no box")?;
        if plane.velocity != [0.0; 3] || r.camera_velocity != [0.0; 3] || r.camera_yaw_per_step != 0.0 {
            bail!("contact queries need a static plane and camera");
        }
        let hz = bx.half_extents[2];
        let back = |t: usize| r.box_center(0, t).z + hz;
        let touch_t = (0..r.num_timesteps)
            .find(|&t| back(t) >= plane.depth - 1e-9)
            .context("box never reaches the plane")?;
        if bx.stop_at.is_none_or(|s| s > touch_t) {
            bail!("box must come to rest on contact");
        }
        let c = r.box_center(0, touch_t);
        let gap = (0..r.num_timesteps).map(|t| (plane.depth - back(t)).max(0.0)).collect();
        Ok(Self {
            plane_depth: plane.depth,
            box_depth: 2.0 * hz,
            touch_t,
            contact_point: [c.x, c.y, plane.depth],
            gap,
        })
    }

    /// Discretized box displacement over `[t0, t1]`.
    pub fn direction(fx: &Fixture, t0: usize, t1: usize) -> [i8; 3] {
        let d = fx.recipe.box_center(0, t1) - fx.recipe.box_center(0, t0);
        discretize_direction(&d, DEFAULT_DIRECTION_EPSILON)
    }

    fn first_within(&self, d: f64) -> Option<usize> {
        self.gap.iter().position(|&g| g <= d + 1e-9)
    }

    fn runs_within(&self, d: f64) -> Vec<[usize; 2]> {
        let mut runs: Vec<[usize; 2]> = Vec::new();
        for (t, &g) in self.gap.iter().enumerate() {
            if g > d + 1e-9 {
                continue;
            }
            match runs.last_mut() {
                Some(r) if r[1] + 1 == t => r[1] = t,
                _ => runs.push([t, t]),
            }
        }
        runs
    }
}

fn instance_of_class(scene: &Scene4D, class_id: u16) -> Result<u32> {
    let ids: Vec<u32> = scene
        .instances()
        .instances
        .iter()
        .filter(|i| i.class_id == class_id)
        .map(|i| i.id)
        .collect();
    match ids.as_slice() {
        [id] => Ok(*id),
        [] => bail!("scene has no instance of class {class_id}"),
        _ => bail!("scene has {} instances of class {class_id}", ids.len()),
    }
}

/// Spatial, point-in-time, interval and directional queries about the tool
/// touching the tissue, with ground truth from the recipe.
pub fn contact_queries(fx: &Fixture, scene: &Scene4D) -> Result<Vec<QueryFixture>> {
    let geo = ContactGeometry::from_fixture(fx)?;
    let r = &fx.recipe;
    let t_n = r.num_timesteps;
    let tool_class = r.boxes[0].class_id;
    let tissue_class = r.plane.as_ref().map(|p| p.class_id).unwrap_or(0);
    let tool = instance_of_class(scene, tool_class)?;
    let tissue = instance_of_class(scene, tissue_class)?;
    let contact_d = geo.box_depth + CONTACT_MARGIN;
    let scene_id = scene.scene_id().to_string();
    let camera = &fx.bundle.camera;
    let mut out = Vec::new();
    let mut push = |query: String, ground_truth: GroundTruth, script: serde_json::Value| {
        out.push(QueryFixture {
            scene_id: scene_id.clone(),
            query,
            ground_truth,
            mock_script: Some(script),
        })
    };

    let p = geo.contact_point;
    let point = {
        let mut c = r.box_center(0, geo.touch_t);
        c.x = p[0];
        c.y = p[1];
        c.z = p[2];
        c
    };
    let mut spatial_ts: Vec<usize> = [geo.touch_t, geo.touch_t + 3, geo.touch_t + 6, t_n - 1]
        .into_iter()
        .filter(|&t| t < t_n)
        .collect();
    spatial_ts.dedup();
    for t in spatial_ts {
        let proj = camera.project(&point, t).context("contact point is behind the camera")?;
        push(
            format!("Where does the tool touch the tissue at timestep {t}?"),
            GroundTruth::Spatial {
                pixel: [proj.u, proj.v],
                t,
            },
            json!([
                {"action": "tool_call", "tool": "summary"},
                {"action": "tool_call", "tool": "overlap_position", "arguments": {"a": tool, "b": tissue, "t": t}},
                {"action": "answer_from_tool_result", "pointer": "/position"}
            ]),
        );
    }

    let series_plan = |reduce: serde_json::Value| {
        json!([
            {"action": "tool_call", "tool": "min_distance", "arguments": {"a": tool, "b": tissue}},
            {"action": "answer_from_tool_result", "pointer": "/series", "reduce": reduce}
        ])
    };
    let near_first = geo.first_within(NEAR_DISTANCE).context("box never comes near the plane")?;
    let cases = [
        ("first touch the tissue", geo.touch_t, contact_d),
        ("first come within 20 cm of the tissue", near_first, NEAR_DISTANCE),
    ];
    for (what, t, d) in cases {
        push(
            format!("At which timestep does the tool {what}?"),
            GroundTruth::TemporalPit { t },
            series_plan(json!({"kind": "first_below", "key": "meters", "threshold": d})),
        );
    }
    let cases = [
        ("touching the tissue", geo.runs_within(0.0), contact_d),
        ("within 20 cm of the tissue", geo.runs_within(NEAR_DISTANCE), NEAR_DISTANCE),
    ];
    for (what, intervals, d) in cases {
        push(
            format!("During which timesteps is the tool {what}?"),
            GroundTruth::TemporalInterval { intervals },
            series_plan(json!({"kind": "runs_below", "key": "meters", "threshold": d})),
        );
    }

    let touch = geo.touch_t;
    for (t0, t1) in [(0, touch), (0, touch / 2), (touch / 2, touch)] {
        if t0 >= t1 {
            continue;
        }
        push(
            format!("In which direction does the tool move between timesteps {t0} and {t1}?"),
            GroundTruth::Directional {
                direction: ContactGeometry::direction(fx, t0, t1),
            },
            json!([
                {"action": "tool_call", "tool": "dominant_direction", "arguments": {"a": tool, "t0": t0, "t1": t1}},
                {"action": "answer_from_tool_result", "pointer": "/direction"}
            ]),
        );
    }
    Ok(out)
}
