//! Extraction of structured answers from model text.
//!
//! Candidates are fenced code blocks and outermost bracketed spans that parse
//! as JSON. The last candidate, by start offset, that conforms to the query
//! type wins. Anything else is a parse failure.

use serde_json::Value;

use sem4d_core::evaluation::{Prediction, QueryType};

/// Instruction appended to every question; the parser accepts exactly this.
pub fn answer_format(q: QueryType) -> &'static str {
    match q {
        QueryType::Spatial => "a 3D point in meters in the world frame, as a JSON array [x, y, z]",
        QueryType::TemporalPit => "a single timestep, as a JSON array [t]",
        QueryType::TemporalInterval => {
            "a list of inclusive timestep ranges, as a JSON array [[start, end], ...]"
        }
        QueryType::Directional => "a discrete direction with each axis -1, 0 or 1, as a JSON array [dx, dy, dz]",
    }
}

/// Candidate JSON values with their start offsets, in text order.
fn candidates(text: &str) -> Vec<(usize, Value)> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();

    // Fenced blocks: ``` optionally followed by a language tag on the same line.
    let mut pos = 0;
    while let Some(open) = text[pos..].find("```") {
        let start = pos + open + 3;
        let body_start = text[start..].find('\n').map_or(text.len(), |i| start + i + 1);
        let Some(close) = text[body_start.min(text.len())..].find("```") else {
            break;
        };
        let body_end = body_start + close;
        if let Ok(v) = serde_json::from_str::<Value>(text[body_start..body_end].trim()) {
            out.push((pos + open, v));
        }
        pos = body_end + 3;
    }

    // Outermost bracketed spans; descend into spans that do not parse.
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'[' {
            if let Some(end) = matching_bracket(bytes, i) {
                if let Ok(v) = serde_json::from_str::<Value>(&text[i..=end]) {
                    out.push((i, v));
                    i = end + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    out.sort_by_key(|(p, _)| *p);
    out
}

/// Index of the `]` closing the `[` at `open`, skipping JSON strings.
fn matching_bracket(bytes: &[u8], open: usize) -> Option<usize> {
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (j, &c) in bytes.iter().enumerate().skip(open) {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                b'\\' => escaped = true,
                b'"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            b'"' => in_string = true,
            b'[' => depth += 1,
            b']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(j);
                }
            }
            _ => {}
        }
    }
    None
}

fn as_integer(v: &Value) -> Option<i64> {
    if let Some(i) = v.as_i64() {
        return Some(i);
    }
    let f = v.as_f64()?;
    (f.fract() == 0.0 && f.abs() < 9.0e15).then_some(f as i64)
}

fn conform(v: &Value, q: QueryType) -> Option<Prediction> {
    match q {
        QueryType::Spatial => {
            let a = v.as_array().filter(|a| a.len() == 3)?;
            let mut p = [0.0; 3];
            for (slot, x) in p.iter_mut().zip(a) {
                *slot = x.as_f64().filter(|f| f.is_finite())?;
            }
            Some(Prediction::Point(p))
        }
        QueryType::TemporalPit => {
            let t = match v {
                Value::Array(a) if a.len() == 1 => as_integer(&a[0])?,
                Value::Number(_) => as_integer(v)?,
                _ => return None,
            };
            Some(Prediction::Timestep(t))
        }
        QueryType::TemporalInterval => {
            let a = v.as_array().filter(|a| !a.is_empty())?;
            let pair = |x: &Value| -> Option<[i64; 2]> {
                let p = x.as_array().filter(|p| p.len() == 2)?;
                let (s, e) = (as_integer(&p[0])?, as_integer(&p[1])?);
                (s <= e).then_some([s, e])
            };
            // A single flat pair is one interval.
            if a.len() == 2 && a.iter().all(|x| x.is_number()) {
                return pair(v).map(|p| Prediction::Intervals(vec![p]));
            }
            a.iter().map(pair).collect::<Option<Vec<_>>>().map(Prediction::Intervals)
        }
        QueryType::Directional => {
            let a = v.as_array().filter(|a| a.len() == 3)?;
            let mut d = [0i8; 3];
            for (slot, x) in d.iter_mut().zip(a) {
                let i = as_integer(x)?;
                if !(-1..=1).contains(&i) {
                    return None;
                }
                *slot = i as i8;
            }
            Some(Prediction::Direction(d))
        }
    }
}

/// Last conforming answer block in `text`, or `None` on parse failure.
pub fn parse_answer(text: &str, q: QueryType) -> Option<Prediction> {
    candidates(text).iter().rev().find_map(|(_, v)| conform(v, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directional_final_answer() {
        assert_eq!(
            parse_answer("reasoning [0.1, 2] ... final answer: [1, 0, -1]", QueryType::Directional),
            Some(Prediction::Direction([1, 0, -1]))
        );
    }

    #[test]
    fn interval_lists() {
        assert_eq!(
            parse_answer("[[2,5],[8,9]]", QueryType::TemporalInterval),
            Some(Prediction::Intervals(vec![[2, 5], [8, 9]]))
        );
        assert_eq!(
            parse_answer("from 3 to 6: [3, 6]", QueryType::TemporalInterval),
            Some(Prediction::Intervals(vec![[3, 6]]))
        );
        assert_eq!(parse_answer("[[5, 2]]", QueryType::TemporalInterval), None);
    }

    #[test]
    fn prose_is_a_failure() {
        assert_eq!(parse_answer("the tool moves left", QueryType::Directional), None);
        assert_eq!(parse_answer("", QueryType::Spatial), None);
        assert_eq!(parse_answer("[2, 0, 0]", QueryType::Directional), None);
    }

    #[test]
    fn last_conforming_block_wins() {
        let text = "First guess [0.0, 0.0, 1.0].\n```json\n[0.01, 0.00, 0.02]\n```\nnot [1, 2]";
        assert_eq!(parse_answer(text, QueryType::Spatial), Some(Prediction::Point([0.01, 0.0, 0.02])));
        assert_eq!(parse_answer("t = [7] then [9.0]", QueryType::TemporalPit), Some(Prediction::Timestep(9)));
        assert_eq!(parse_answer("```\n12\n```", QueryType::TemporalPit), Some(Prediction::Timestep(12)));
    }

    #[test]
    fn brackets_inside_strings_do_not_confuse_matching() {
        assert_eq!(
            parse_answer(r#"["a]", 1] then [1, 1, 0]"#, QueryType::Directional),
            Some(Prediction::Direction([1, 1, 0]))
        );
        assert_eq!(parse_answer("[[[", QueryType::Spatial), None);
    }
}
