//! Tool-calling access to built scenes: an HTTP tool server, agent sessions
//! against a chat-completions endpoint, and answer parsing.

pub mod answer;
pub mod bench;
pub mod llm;
pub mod mock;
pub mod server;
pub mod session;
pub mod tools;

use thiserror::Error;

pub use answer::parse_answer;
pub use session::{run_session, AgentAnswer, SessionConfig, StopReason};
pub use tools::{execute, registry, ToolCall, ToolResult, ToolSchema};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("model endpoint unreachable: {0}")]
    EndpointUnreachable(String),
    #[error("model endpoint returned HTTP {status}: {body}")]
    EndpointStatus { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: String,
        #[source]
        source: std::io::Error,
    },
    #[error("scene error: {0}")]
    Scene(String),
    #[error(transparent)]
    Eval(#[from] sem4d_core::evaluation::EvalError),
}
