//! One agent session: prompt, tool loop, answer parsing.

use std::collections::BTreeMap;

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use sem4d_core::evaluation::{Prediction, QueryType};
use sem4d_core::toolkit::{Scene4D, DEFAULT_DIRECTION_EPSILON};

use crate::answer::{answer_format, parse_answer};
use crate::llm::{ChatMessage, ChatRequest, Content, ContentPart, ImageUrl, LlmClient, ToolDef};
use crate::tools::{execute, registry, summary_payload, DispatchOptions, ToolCall, ToolResult, AXIS_CONVENTION, FETCH_FRAME};
use crate::GatewayError;

pub const PROMPT_VERSION: &str = "system_v1";
const SYSTEM_PROMPT_V1: &str = include_str!("../assets/prompts/system_v1.txt");

pub const DEFAULT_STEP_BUDGET: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Maximum number of model requests.
    pub step_budget: usize,
    pub frame_fetching: bool,
    pub direction_epsilon: f64,
    pub temperature: Option<f64>,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            step_budget: DEFAULT_STEP_BUDGET,
            frame_fetching: false,
            direction_epsilon: DEFAULT_DIRECTION_EPSILON,
            temperature: Some(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    FinalAnswer,
    BudgetExhausted,
}

/// A tool invocation as executed, in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordedCall {
    pub step: usize,
    pub call_id: String,
    pub call: ToolCall,
    pub result: ToolResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentAnswer {
    pub query_type: QueryType,
    /// `None` exactly when parsing failed.
    pub prediction: Option<Prediction>,
    pub parsed: bool,
    pub stop_reason: StopReason,
    pub final_text: String,
    pub prompt_version: String,
    pub messages: Vec<ChatMessage>,
    pub tool_calls: Vec<RecordedCall>,
}

/// The system prompt for one scene and query type.
pub fn system_prompt(scene: &Scene4D, query_type: QueryType, frame_fetching: bool) -> String {
    let summary = serde_json::to_string_pretty(&summary_payload(scene)["instances"]).expect("summary serializes");
    let frame_note = if frame_fetching {
        "You may also fetch video frames with fetch_frame; the image is attached after the tool result."
    } else {
        ""
    };
    let fill: BTreeMap<&str, String> = BTreeMap::from([
        ("num_timesteps", scene.num_timesteps().to_string()),
        ("last_timestep", scene.num_timesteps().saturating_sub(1).to_string()),
        ("axes", AXIS_CONVENTION.to_string()),
        ("t_ref", scene.instances().t_ref.to_string()),
        ("summary", summary),
        ("frame_note", frame_note.to_string()),
        ("answer_format", answer_format(query_type).to_string()),
    ]);
    let mut out = SYSTEM_PROMPT_V1.to_string();
    for (k, v) in fill {
        out = out.replace(&format!("{{{k}}}"), &v);
    }
    out
}

/// First user message. Also the key the scripted mock endpoint matches on.
pub fn user_message(scene_id: &str, query: &str, query_type: QueryType) -> String {
    format!("Scene {scene_id}, {query_type} question: {query}")
}

fn tool_defs(frame_fetching: bool) -> Vec<ToolDef> {
    registry()
        .iter()
        .filter(|s| frame_fetching || s.name != FETCH_FRAME)
        .map(ToolDef::from)
        .collect()
}

fn frame_message(path: &str, t: u64) -> Result<ChatMessage, std::io::Error> {
    let bytes = std::fs::read(path)?;
    let url = format!(
        "data:image/png;base64,{}",
        base64::engine::general_purpose::STANDARD.encode(bytes)
    );
    Ok(ChatMessage {
        role: "user".into(),
        content: Some(Content::Parts(vec![
            ContentPart::Text {
                text: format!("Frame at timestep {t}:"),
            },
            ContentPart::ImageUrl {
                image_url: ImageUrl { url },
            },
        ])),
        tool_calls: Vec::new(),
        tool_call_id: None,
    })
}

/// Runs the request/tool loop until the model answers without tool calls or
/// the step budget is spent. Tool failures go back to the model as results;
/// only transport failures end the session with an error.
pub async fn run_session(
    client: &LlmClient,
    scene: &Scene4D,
    query: &str,
    query_type: QueryType,
    config: &SessionConfig,
) -> Result<AgentAnswer, GatewayError> {
    let opts = DispatchOptions {
        frame_fetching: config.frame_fetching,
        direction_epsilon: config.direction_epsilon,
    };
    let mut messages = vec![
        ChatMessage::system(system_prompt(scene, query_type, config.frame_fetching)),
        ChatMessage::user(user_message(scene.scene_id(), query, query_type)),
    ];
    let tools = tool_defs(config.frame_fetching);
    let mut recorded = Vec::new();

    for step in 0..config.step_budget {
        let request = ChatRequest {
            model: client.config().model.clone(),
            messages: messages.clone(),
            tools: tools.clone(),
            temperature: config.temperature,
        };
        let response = client.complete(&request).await?;
        let message = response
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::Protocol("completion has no choices".into()))?
            .message;
        let calls = message.tool_calls.clone();
        messages.push(message);

        if calls.is_empty() {
            let final_text = messages.last().map(ChatMessage::text).unwrap_or_default();
            let prediction = parse_answer(&final_text, query_type);
            return Ok(AgentAnswer {
                query_type,
                parsed: prediction.is_some(),
                prediction,
                stop_reason: StopReason::FinalAnswer,
                final_text,
                prompt_version: PROMPT_VERSION.into(),
                messages,
                tool_calls: recorded,
            });
        }

        let mut images = Vec::new();
        for tc in calls {
            let arguments = if tc.function.arguments.trim().is_empty() {
                Ok(Value::Object(Default::default()))
            } else {
                serde_json::from_str::<Value>(&tc.function.arguments)
            };
            let (arguments, parse_error) = match arguments {
                Ok(v) => (v, None),
                Err(e) => (Value::Null, Some(e)),
            };
            let call = ToolCall {
                session_id: None,
                tool: tc.function.name.clone(),
                arguments,
            };
            let result = match parse_error {
                None => execute(scene, &call, &opts),
                Some(e) => ToolResult::error("invalid_arguments", format!("arguments are not JSON: {e}")),
            };
            if call.tool == FETCH_FRAME {
                if let Some(p) = result.payload() {
                    if let (Some(path), Some(t)) = (p["path"].as_str(), p["t"].as_u64()) {
                        match frame_message(path, t) {
                            Ok(m) => images.push(m),
                            Err(e) => log::warn!("frame {path} could not be attached: {e}"),
                        }
                    }
                }
            }
            let text = serde_json::to_string(&result).expect("tool result serializes");
            messages.push(ChatMessage::tool(&tc.id, text));
            recorded.push(RecordedCall {
                step,
                call_id: tc.id,
                call,
                result,
            });
        }
        messages.extend(images);
    }

    log::warn!("step budget of {} exhausted", config.step_budget);
    Ok(AgentAnswer {
        query_type,
        prediction: None,
        parsed: false,
        stop_reason: StopReason::BudgetExhausted,
        final_text: String::new(),
        prompt_version: PROMPT_VERSION.into(),
        messages,
        tool_calls: recorded,
    })
}
