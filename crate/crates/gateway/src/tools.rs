//! Tool registry and dispatch over a [`Scene4D`].
//!
//! Every toolkit query has exactly one schema entry. Payload floats are
//! rounded to [`DEFAULT_DECIMALS`] unless the call passes `"precise": true`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use sem4d_core::toolkit::{Scene4D, ToolError, DEFAULT_DIRECTION_EPSILON};

pub const DEFAULT_DECIMALS: i32 = 4;

/// Stated in every prompt and in the schemas that take positions.
pub const AXIS_CONVENTION: &str =
    "World frame of the first camera, meters: +x right, +y down, +z away from the camera.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamType {
    Integer,
    Number,
    Boolean,
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamSpec {
    pub name: &'static str,
    #[serde(rename = "type")]
    pub ty: ParamType,
    pub required: bool,
    pub description: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct ToolSchema {
    pub name: &'static str,
    pub description: &'static str,
    pub parameters: Vec<ParamSpec>,
    pub returns: &'static str,
}

impl ToolSchema {
    /// JSON Schema object for the chat-completions `parameters` field.
    pub fn parameters_json_schema(&self) -> Value {
        let mut props = Map::new();
        for p in &self.parameters {
            props.insert(p.name.into(), json!({"type": p.ty, "description": p.description}));
        }
        props.insert(
            "precise".into(),
            json!({"type": "boolean", "description": "Return full-precision floats."}),
        );
        let required: Vec<&str> = self.parameters.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({"type": "object", "properties": props, "required": required, "additionalProperties": false})
    }
}

const fn param(name: &'static str, ty: ParamType, required: bool, description: &'static str) -> ParamSpec {
    ParamSpec {
        name,
        ty,
        required,
        description,
    }
}

const A: ParamSpec = param("a", ParamType::Integer, true, "Instance id.");
const B: ParamSpec = param("b", ParamType::Integer, true, "Second instance id.");
const T: ParamSpec = param("t", ParamType::Integer, true, "Timestep.");
const T0: ParamSpec = param("t0", ParamType::Integer, true, "Start timestep.");
const T1: ParamSpec = param("t1", ParamType::Integer, true, "End timestep, above t0.");

pub const FETCH_FRAME: &str = "fetch_frame";

/// The fixed registry, in a stable order.
pub fn registry() -> Vec<ToolSchema> {
    vec![
        ToolSchema {
            name: "summary",
            description: "List every persistent instance with class, centroid and extent at the reference timestep, and presence span.",
            parameters: vec![],
            returns: "{scene_id, num_timesteps, t_ref, axes, instances: [{id, class, class_id, member_count, centroid, extent, first_present, last_present}]}",
        },
        ToolSchema {
            name: "min_distance",
            description: "Minimum Euclidean distance in meters between the points of two instances, at one timestep or for every timestep when t is omitted.",
            parameters: vec![A, B, param("t", ParamType::Integer, false, "Timestep; omit for the full series.")],
            returns: "{t, meters, stale} or {series: [{t, meters, stale}]}",
        },
        ToolSchema {
            name: "overlap_score",
            description: "Overlap in [0, 1] between two instances at a timestep: mean fraction of each instance's points near the other.",
            parameters: vec![A, B, T],
            returns: "{t, score, stale}",
        },
        ToolSchema {
            name: "overlap_position",
            description: "3D centroid of the points where two instances overlap at a timestep, or null without overlap.",
            parameters: vec![A, B, T],
            returns: "{t, position: [x, y, z] | null, stale}",
        },
        ToolSchema {
            name: "relative_motion",
            description: "Change of the centroid offset a minus b between t0 and t1, in meters.",
            parameters: vec![A, B, T0, T1],
            returns: "{t0, t1, vector: [dx, dy, dz], stale}",
        },
        ToolSchema {
            name: "trajectory",
            description: "Centroid of an instance at every stride-th timestep, with a presence flag.",
            parameters: vec![A, param("stride", ParamType::Integer, false, "Sampling stride, default 1.")],
            returns: "{id, samples: [{t, centroid: [x, y, z], present}]}",
        },
        ToolSchema {
            name: "dominant_direction",
            description: "Discrete motion direction of an instance between t0 and t1: each axis is -1, 0 or 1.",
            parameters: vec![
                A,
                T0,
                T1,
                param("epsilon", ParamType::Number, false, "Dead zone relative to the largest axis, default 0.25."),
            ],
            returns: "{t0, t1, direction: [dx, dy, dz], displacement: [x, y, z], stale}",
        },
        ToolSchema {
            name: FETCH_FRAME,
            description: "Fetch the video frame at a timestep; the image is attached to the conversation.",
            parameters: vec![T],
            returns: "{t, source_frame, path}",
        },
    ]
}

/// `{session_id?, tool, arguments}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session_id: Option<String>,
    pub tool: String,
    #[serde(default = "empty_object")]
    pub arguments: Value,
}

fn empty_object() -> Value {
    Value::Object(Map::new())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolFailure {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum ToolResult {
    Ok { payload: Value },
    Error { error: ToolFailure },
}

impl ToolResult {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        ToolResult::Error {
            error: ToolFailure {
                code: code.into(),
                message: message.into(),
            },
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, ToolResult::Ok { .. })
    }

    pub fn payload(&self) -> Option<&Value> {
        match self {
            ToolResult::Ok { payload } => Some(payload),
            ToolResult::Error { .. } => None,
        }
    }

    pub fn error_code(&self) -> Option<&str> {
        match self {
            ToolResult::Ok { .. } => None,
            ToolResult::Error { error } => Some(&error.code),
        }
    }
}

impl From<ToolError> for ToolResult {
    fn from(e: ToolError) -> Self {
        ToolResult::error(e.code(), e.to_string())
    }
}

/// Per-caller dispatch settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispatchOptions {
    pub frame_fetching: bool,
    pub direction_epsilon: f64,
}

impl Default for DispatchOptions {
    fn default() -> Self {
        Self {
            frame_fetching: true,
            direction_epsilon: DEFAULT_DIRECTION_EPSILON,
        }
    }
}

/// Rounds every float in `v` to `decimals` places. Integers are untouched.
pub fn round_floats(v: &mut Value, decimals: i32) {
    match v {
        Value::Number(n) if !n.is_i64() && !n.is_u64() => {
            if let Some(f) = n.as_f64() {
                let s = 10f64.powi(decimals);
                let r = (f * s).round() / s;
                // Negative zero prints as "-0.0"; normalize for byte stability.
                let r = if r == 0.0 { 0.0 } else { r };
                if let Some(num) = serde_json::Number::from_f64(r) {
                    *n = num;
                }
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_floats(x, decimals)),
        Value::Object(map) => map.values_mut().for_each(|x| round_floats(x, decimals)),
        _ => {}
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NoArgs {
    #[serde(default)]
    precise: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairArgs {
    a: u32,
    b: u32,
    t: Option<usize>,
    #[serde(default)]
    precise: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MotionArgs {
    a: u32,
    b: u32,
    t0: usize,
    t1: usize,
    #[serde(default)]
    precise: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryArgs {
    a: u32,
    #[serde(default = "one")]
    stride: usize,
    #[serde(default)]
    precise: bool,
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DirectionArgs {
    a: u32,
    t0: usize,
    t1: usize,
    epsilon: Option<f64>,
    #[serde(default)]
    precise: bool,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FrameArgs {
    t: usize,
    #[serde(default)]
    precise: bool,
}

fn parse_args<T: DeserializeOwned>(args: &Value) -> Result<T, ToolResult> {
    // A null argument object is treated as empty.
    let args = if args.is_null() { empty_object() } else { args.clone() };
    serde_json::from_value(args).map_err(|e| ToolResult::error("invalid_arguments", e.to_string()))
}

fn require_t(t: Option<usize>, tool: &str) -> Result<usize, ToolResult> {
    t.ok_or_else(|| ToolResult::error("invalid_arguments", format!("{tool} requires t")))
}

fn finish(mut payload: Value, precise: bool) -> ToolResult {
    if !precise {
        round_floats(&mut payload, DEFAULT_DECIMALS);
    }
    ToolResult::Ok { payload }
}

/// Summary payload shared by the `summary` tool and the prompt.
pub fn summary_payload(scene: &Scene4D) -> Value {
    json!({
        "scene_id": scene.scene_id(),
        "num_timesteps": scene.num_timesteps(),
        "t_ref": scene.instances().t_ref,
        "axes": AXIS_CONVENTION,
        "instances": scene.scene_summary().iter().map(|s| json!({
            "id": s.id,
            "class": s.class_name,
            "class_id": s.class_id,
            "member_count": s.member_count,
            "centroid": s.centroid,
            "extent": s.extent,
            "first_present": s.first_present,
            "last_present": s.last_present,
        })).collect::<Vec<_>>(),
    })
}

/// Executes one call. Never panics on bad input: every failure is a
/// [`ToolResult::Error`].
pub fn execute(scene: &Scene4D, call: &ToolCall, opts: &DispatchOptions) -> ToolResult {
    match dispatch(scene, call, opts) {
        Ok(r) | Err(r) => r,
    }
}

fn dispatch(scene: &Scene4D, call: &ToolCall, opts: &DispatchOptions) -> Result<ToolResult, ToolResult> {
    let args = &call.arguments;
    if !(args.is_object() || args.is_null()) {
        return Err(ToolResult::error("invalid_arguments", "arguments must be a JSON object"));
    }
    let result = match call.tool.as_str() {
        "summary" => {
            let a: NoArgs = parse_args(args)?;
            finish(summary_payload(scene), a.precise)
        }
        "min_distance" => {
            let a: PairArgs = parse_args(args)?;
            let payload = match a.t {
                Some(t) => {
                    let d = scene.min_distance(a.a, a.b, t)?;
                    json!({"t": t, "meters": d.value, "stale": d.stale})
                }
                None => {
                    let series = scene.min_distance_series(a.a, a.b)?;
                    json!({"series": series.iter().enumerate().map(|(t, d)| json!({
                        "t": t, "meters": d.value, "stale": d.stale
                    })).collect::<Vec<_>>()})
                }
            };
            finish(payload, a.precise)
        }
        "overlap_score" => {
            let a: PairArgs = parse_args(args)?;
            let t = require_t(a.t, "overlap_score")?;
            let s = scene.overlap_score(a.a, a.b, t)?;
            finish(json!({"t": t, "score": s.value, "stale": s.stale}), a.precise)
        }
        "overlap_position" => {
            let a: PairArgs = parse_args(args)?;
            let t = require_t(a.t, "overlap_position")?;
            let p = scene.overlap_position(a.a, a.b, t)?;
            finish(json!({"t": t, "position": p.value, "stale": p.stale}), a.precise)
        }
        "relative_motion" => {
            let a: MotionArgs = parse_args(args)?;
            let m = scene.relative_motion(a.a, a.b, a.t0, a.t1)?;
            finish(
                json!({"t0": a.t0, "t1": a.t1, "vector": m.value, "stale": m.stale}),
                a.precise,
            )
        }
        "trajectory" => {
            let a: TrajectoryArgs = parse_args(args)?;
            let samples = scene.trajectory(a.a, a.stride)?;
            finish(json!({"id": a.a, "samples": samples}), a.precise)
        }
        "dominant_direction" => {
            let a: DirectionArgs = parse_args(args)?;
            let eps = a.epsilon.unwrap_or(opts.direction_epsilon);
            let d = scene.dominant_direction(a.a, a.t0, a.t1, eps)?;
            finish(
                json!({
                    "t0": a.t0, "t1": a.t1,
                    "direction": d.value.direction,
                    "displacement": d.value.displacement,
                    "stale": d.stale,
                }),
                a.precise,
            )
        }
        FETCH_FRAME => {
            if !opts.frame_fetching {
                return Err(ToolResult::error("tool_disabled", "frame fetching is disabled for this session"));
            }
            let a: FrameArgs = parse_args(args)?;
            let f = scene.fetch_frame(a.t)?;
            finish(
                json!({"t": f.t, "source_frame": f.source_frame, "path": f.path.to_string_lossy()}),
                a.precise,
            )
        }
        other => return Err(ToolResult::error("unknown_tool", format!("no tool named {other:?}"))),
    };
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names_are_unique() {
        let reg = registry();
        let mut names: Vec<&str> = reg.iter().map(|s| s.name).collect();
        assert_eq!(names.len(), 8);
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), 8);
    }

    #[test]
    fn rounding_keeps_integers_and_normalizes_zero() {
        let mut v = json!({"a": 1.234567, "b": [3, -0.00001], "c": {"d": 2.5e-5}});
        round_floats(&mut v, 4);
        assert_eq!(v.to_string(), r#"{"a":1.2346,"b":[3,0.0],"c":{"d":0.0}}"#);
    }

    #[test]
    fn schema_lists_required_params() {
        let s = registry().into_iter().find(|s| s.name == "min_distance").unwrap();
        let js = s.parameters_json_schema();
        assert_eq!(js["required"], json!(["a", "b"]));
        assert_eq!(js["properties"]["t"]["type"], "integer");
    }
}
