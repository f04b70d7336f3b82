mod common;

use common::touching_scene;
use proptest::prelude::*;
use sem4d_core::evaluation::{Prediction, QueryType};
use sem4d_gateway::tools::{execute, registry, DispatchOptions};
use sem4d_gateway::{parse_answer, ToolCall};
use serde_json::{json, Value};

fn query_type() -> impl Strategy<Value = QueryType> {
    prop::sample::select(QueryType::ALL.to_vec())
}

fn arg_value() -> impl Strategy<Value = Value> {
    prop_oneof![
        (0i64..6).prop_map(|i| json!(i)),
        (-3i64..30).prop_map(|i| json!(i)),
        any::<f64>().prop_map(|f| json!(f)),
        any::<bool>().prop_map(|b| json!(b)),
        "[a-z]{0,4}".prop_map(|s| json!(s)),
        Just(Value::Null),
    ]
}

fn tool_call() -> impl Strategy<Value = ToolCall> {
    let names: Vec<String> = registry().iter().map(|s| s.name.to_string()).chain(["nope".to_string()]).collect();
    let keys = prop::sample::select(vec!["a", "b", "t", "t0", "t1", "stride", "epsilon", "precise", "zzz"]);
    (
        prop::sample::select(names),
        prop::collection::btree_map(keys, arg_value(), 0..6),
    )
        .prop_map(|(tool, args)| ToolCall {
            session_id: None,
            tool,
            arguments: Value::Object(args.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
        })
}

proptest! {
    #[test]
    fn parsing_is_total_and_pure(text in ".{0,200}", q in query_type()) {
        let a = parse_answer(&text, q);
        prop_assert_eq!(&a, &parse_answer(&text, q));
        if let Some(p) = a {
            prop_assert!(p.fits(q));
        }
    }

    #[test]
    fn rendered_answers_parse_back(
        prefix in "[a-zA-Z ,.:]{0,40}",
        d in [-1i8..=1, -1i8..=1, -1i8..=1],
        p in [-10.0..10.0f64, -10.0..10.0f64, 0.0..10.0f64],
        t in 0i64..500,
        iv in prop::collection::vec((0i64..50, 0i64..10), 1..5),
    ) {
        let intervals: Vec<[i64; 2]> = iv.iter().map(|&(a, l)| [a, a + l]).collect();
        prop_assert_eq!(
            parse_answer(&format!("{prefix} {}", json!(d)), QueryType::Directional),
            Some(Prediction::Direction(d))
        );
        prop_assert_eq!(
            parse_answer(&format!("{prefix}\n```json\n{}\n```", json!(p)), QueryType::Spatial),
            Some(Prediction::Point(p))
        );
        prop_assert_eq!(parse_answer(&format!("{prefix} [{t}]"), QueryType::TemporalPit), Some(Prediction::Timestep(t)));
        prop_assert_eq!(
            parse_answer(&format!("{prefix} {}", json!(intervals)), QueryType::TemporalInterval),
            Some(Prediction::Intervals(intervals))
        );
    }

    #[test]
    fn every_call_yields_a_result(calls in prop::collection::vec(tool_call(), 1..20)) {
        let scene = touching_scene();
        let opts = DispatchOptions::default();
        for call in &calls {
            let r = execute(&scene, call, &opts);
            // Results always serialize and are pure in the call.
            let text = serde_json::to_string(&r).unwrap();
            prop_assert_eq!(text, serde_json::to_string(&execute(&scene, call, &opts)).unwrap());
            if call.tool == "nope" {
                prop_assert_eq!(r.error_code(), Some("unknown_tool"));
            }
        }
    }
}
