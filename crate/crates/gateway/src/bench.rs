//! Benchmark runs that answer every fixture with an agent session.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use sem4d_core::evaluation::{run_benchmark, BenchmarkReport, QueryFixture, SceneInfo};
use sem4d_core::pipeline::SceneDoc;
use sem4d_core::toolkit::Scene4D;

use crate::llm::LlmClient;
use crate::mock::{MockLlm, MockScript};
use crate::session::{run_session, user_message, AgentAnswer, SessionConfig};
use crate::GatewayError;

/// A scene plus what scoring needs to know about it.
#[derive(Debug, Clone)]
pub struct BenchScene {
    pub scene: Scene4D,
    pub info: SceneInfo,
    pub direction_epsilon: f64,
    /// Fingerprint of the config the scene was built with.
    pub fingerprint: String,
}

impl From<(Scene4D, SceneDoc)> for BenchScene {
    fn from((scene, doc): (Scene4D, SceneDoc)) -> Self {
        BenchScene {
            info: doc.scene_info(),
            direction_epsilon: doc.config.toolkit.direction_epsilon,
            fingerprint: doc.fingerprint,
            scene,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBenchmark {
    pub report: BenchmarkReport,
    /// One answer per fixture, in fixture order.
    pub answers: Vec<AgentAnswer>,
}

/// A mock endpoint playing each fixture's `mock_script`.
pub fn mock_from_fixtures(fixtures: &[QueryFixture]) -> Result<MockLlm, GatewayError> {
    let mut llm = MockLlm::new();
    for (i, f) in fixtures.iter().enumerate() {
        let Some(raw) = &f.mock_script else { continue };
        let script: MockScript = serde_json::from_value(raw.clone())
            .map_err(|e| GatewayError::Config(format!("fixture {i}: bad mock_script: {e}")))?;
        llm = llm.with_script(user_message(&f.scene_id, &f.query, f.query_type()), script);
    }
    Ok(llm)
}

/// Runs one session per fixture, in order, then scores them.
pub async fn run_agent_benchmark(
    fixtures: &[QueryFixture],
    scenes: &BTreeMap<String, BenchScene>,
    client: &LlmClient,
    config: &SessionConfig,
    fingerprint: &str,
) -> Result<AgentBenchmark, GatewayError> {
    let infos: BTreeMap<String, SceneInfo> = scenes.iter().map(|(k, s)| (k.clone(), s.info.clone())).collect();
    // Reject missing or inconsistent scenes before spending any model calls.
    run_benchmark(fixtures, &infos, fingerprint, |_, _| None)?;

    let mut answers = Vec::with_capacity(fixtures.len());
    for (i, f) in fixtures.iter().enumerate() {
        let bs = &scenes[&f.scene_id];
        let cfg = SessionConfig {
            direction_epsilon: bs.direction_epsilon,
            ..config.clone()
        };
        let answer = run_session(client, &bs.scene, &f.query, f.query_type(), &cfg).await?;
        log::info!(
            "fixture {i} ({}): {} tool calls, parsed = {}",
            f.query_type(),
            answer.tool_calls.len(),
            answer.parsed
        );
        answers.push(answer);
    }
    let mut report = run_benchmark(fixtures, &infos, fingerprint, |i, _| answers[i].prediction.clone())?;
    report.notes.push(format!(
        "agent sessions: step budget {}, frame fetching {}",
        config.step_budget,
        if config.frame_fetching { "on" } else { "off" }
    ));
    Ok(AgentBenchmark { report, answers })
}
