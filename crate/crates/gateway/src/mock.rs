//! Deterministic scripted chat-completions endpoint for tests and offline
//! benchmarks.
//!
//! The script is chosen by the first user message of the conversation. The
//! step to play is the number of assistant messages already in it, so the
//! server keeps no per-session state.

use std::collections::BTreeMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::routing::post;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::oneshot;

use crate::llm::{ChatMessage, ChatRequest, ChatResponse, Choice, FunctionCall, ToolCallMessage};
use crate::tools::ToolResult;
use crate::GatewayError;

/// Post-processing of a value taken from a tool result.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reduce {
    /// Emit the value unchanged.
    #[default]
    Identity,
    /// Over `[{t, <key>: number}]`: `[t]` of the first entry with `key ≤ threshold`.
    FirstBelow { key: String, threshold: f64 },
    /// Over `[{t, <key>: number}]`: maximal runs with `key ≤ threshold` as `[[start, end], …]`.
    RunsBelow { key: String, threshold: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case")]
pub enum MockStep {
    ToolCall {
        tool: String,
        #[serde(default)]
        arguments: Value,
    },
    Final {
        text: String,
    },
    /// Answers from the most recent tool result: `pointer` is a JSON pointer
    /// into it, and `{answer}` in `template` is replaced by the reduced value.
    AnswerFromToolResult {
        pointer: String,
        #[serde(default)]
        reduce: Reduce,
        #[serde(default = "default_template")]
        template: String,
    },
}

fn default_template() -> String {
    "Final answer: {answer}".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MockScript {
    pub steps: Vec<MockStep>,
}

/// Reply when no script matches or the script is exhausted.
pub const NO_SCRIPT_REPLY: &str = "I cannot answer this question.";

#[derive(Debug, Clone, Default)]
pub struct MockLlm {
    scripts: BTreeMap<String, MockScript>,
    fallback: Option<MockScript>,
}

impl MockLlm {
    pub fn new() -> Self {
        Self::default()
    }

    /// Script played when the first user message equals `key`.
    pub fn with_script(mut self, key: impl Into<String>, script: MockScript) -> Self {
        self.scripts.insert(key.into(), script);
        self
    }

    /// Script played for unmatched conversations.
    pub fn with_fallback(mut self, script: MockScript) -> Self {
        self.fallback = Some(script);
        self
    }

    pub fn len(&self) -> usize {
        self.scripts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scripts.is_empty()
    }

    /// The reply for one request. Pure in the request.
    pub fn respond(&self, req: &ChatRequest) -> ChatMessage {
        let key = req.messages.iter().find(|m| m.role == "user").map(ChatMessage::text);
        let script = key.and_then(|k| self.scripts.get(&k)).or(self.fallback.as_ref());
        let step = req.messages.iter().filter(|m| m.role == "assistant").count();
        let Some(action) = script.and_then(|s| s.steps.get(step)) else {
            return ChatMessage::assistant(NO_SCRIPT_REPLY);
        };
        match action {
            MockStep::ToolCall { tool, arguments } => {
                let arguments = if arguments.is_null() { json!({}) } else { arguments.clone() };
                ChatMessage {
                    role: "assistant".into(),
                    content: None,
                    tool_calls: vec![ToolCallMessage {
                        id: format!("call_{step}"),
                        kind: "function".into(),
                        function: FunctionCall {
                            name: tool.clone(),
                            arguments: arguments.to_string(),
                        },
                    }],
                    tool_call_id: None,
                }
            }
            MockStep::Final { text } => ChatMessage::assistant(text.clone()),
            MockStep::AnswerFromToolResult {
                pointer,
                reduce,
                template,
            } => {
                let answer = last_tool_result(req)
                    .and_then(|r| r.payload().and_then(|p| p.pointer(pointer)).cloned())
                    .and_then(|v| apply_reduce(&v, reduce));
                match answer {
                    Some(v) => ChatMessage::assistant(template.replace("{answer}", &v.to_string())),
                    None => ChatMessage::assistant(NO_SCRIPT_REPLY),
                }
            }
        }
    }
}

fn last_tool_result(req: &ChatRequest) -> Option<ToolResult> {
    let m = req.messages.iter().rev().find(|m| m.role == "tool")?;
    serde_json::from_str(&m.text()).ok()
}

fn series(v: &Value, key: &str) -> Option<Vec<(i64, f64)>> {
    v.as_array()?
        .iter()
        .map(|e| Some((e.get("t")?.as_i64()?, e.get(key)?.as_f64()?)))
        .collect()
}

fn apply_reduce(v: &Value, reduce: &Reduce) -> Option<Value> {
    match reduce {
        Reduce::Identity => Some(v.clone()),
        Reduce::FirstBelow { key, threshold } => {
            let s = series(v, key)?;
            s.iter().find(|(_, x)| x <= threshold).map(|(t, _)| json!([t]))
        }
        Reduce::RunsBelow { key, threshold } => {
            let s = series(v, key)?;
            let mut runs: Vec<[i64; 2]> = Vec::new();
            for (t, x) in s {
                if x > *threshold {
                    continue;
                }
                match runs.last_mut() {
                    Some(r) if r[1] + 1 == t => r[1] = t,
                    _ => runs.push([t, t]),
                }
            }
            (!runs.is_empty()).then(|| json!(runs))
        }
    }
}

#[derive(Clone)]
struct MockState {
    llm: Arc<MockLlm>,
    log: Arc<Mutex<Vec<ChatRequest>>>,
}

async fn completions(State(state): State<MockState>, Json(req): Json<ChatRequest>) -> Json<ChatResponse> {
    let message = state.llm.respond(&req);
    let finish = if message.tool_calls.is_empty() { "stop" } else { "tool_calls" };
    state.log.lock().expect("log lock").push(req);
    Json(ChatResponse {
        id: "mock".into(),
        choices: vec![Choice {
            index: 0,
            message,
            finish_reason: Some(finish.into()),
        }],
    })
}

/// A running mock endpoint. Stops when dropped.
pub struct MockServer {
    addr: SocketAddr,
    log: Arc<Mutex<Vec<ChatRequest>>>,
    shutdown: Option<oneshot::Sender<()>>,
}

impl MockServer {
    /// Binds to an ephemeral localhost port on the current tokio runtime.
    pub async fn spawn(llm: MockLlm) -> Result<Self, GatewayError> {
        let log = Arc::new(Mutex::new(Vec::new()));
        let state = MockState {
            llm: Arc::new(llm),
            log: log.clone(),
        };
        let app = Router::new()
            .route("/v1/chat/completions", post(completions))
            .route("/chat/completions", post(completions))
            .with_state(state);
        let bind = "127.0.0.1:0";
        let listener = tokio::net::TcpListener::bind(bind).await.map_err(|source| GatewayError::Bind {
            addr: bind.into(),
            source,
        })?;
        let addr = listener.local_addr().map_err(|source| GatewayError::Bind {
            addr: bind.into(),
            source,
        })?;
        let (tx, rx) = oneshot::channel::<()>();
        tokio::spawn(async move {
            let _ = axum::serve(listener, app)
                .with_graceful_shutdown(async {
                    let _ = rx.await;
                })
                .await;
        });
        Ok(Self {
            addr,
            log,
            shutdown: Some(tx),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    /// Base URL for [`crate::llm::LlmConfig`].
    pub fn url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    /// Every request received so far.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.log.lock().expect("log lock").clone()
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(messages: Vec<ChatMessage>) -> ChatRequest {
        ChatRequest {
            model: "m".into(),
            messages,
            tools: vec![],
            temperature: None,
        }
    }

    #[test]
    fn script_json_shape() {
        let s: MockScript = serde_json::from_value(json!([
            {"action": "tool_call", "tool": "trajectory", "arguments": {"a": 0}},
            {"action": "answer_from_tool_result", "pointer": "/series",
             "reduce": {"kind": "first_below", "key": "meters", "threshold": 0.1}},
            {"action": "final", "text": "[1, 0, 0]"}
        ]))
        .unwrap();
        assert_eq!(s.steps.len(), 3);
        assert!(matches!(&s.steps[1], MockStep::AnswerFromToolResult { template, .. } if template == "Final answer: {answer}"));
    }

    #[test]
    fn steps_follow_assistant_count() {
        let llm = MockLlm::new().with_script(
            "q",
            MockScript {
                steps: vec![
                    MockStep::ToolCall {
                        tool: "summary".into(),
                        arguments: Value::Null,
                    },
                    MockStep::AnswerFromToolResult {
                        pointer: "/series".into(),
                        reduce: Reduce::RunsBelow {
                            key: "meters".into(),
                            threshold: 0.5,
                        },
                        template: "{answer}".into(),
                    },
                ],
            },
        );
        let first = llm.respond(&request(vec![ChatMessage::user("q")]));
        assert_eq!(first.tool_calls[0].function.name, "summary");
        assert_eq!(first.tool_calls[0].function.arguments, "{}");
        let result = ToolResult::Ok {
            payload: json!({"series": [
                {"t": 0, "meters": 1.0}, {"t": 1, "meters": 0.2}, {"t": 2, "meters": 0.1},
                {"t": 3, "meters": 0.9}, {"t": 4, "meters": 0.4}
            ]}),
        };
        let second = llm.respond(&request(vec![
            ChatMessage::user("q"),
            first,
            ChatMessage::tool("call_0", serde_json::to_string(&result).unwrap()),
        ]));
        assert_eq!(second.text(), "[[1,2],[4,4]]");
        let unknown = llm.respond(&request(vec![ChatMessage::user("other")]));
        assert_eq!(unknown.text(), NO_SCRIPT_REPLY);
    }
}
