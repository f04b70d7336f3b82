//! Grounding metrics, query fixtures and benchmark reports.
//!
//! Unparseable answers are scored with fixed penalties: the clip length for
//! point-in-time queries, IoU 0 for intervals, 2 for directions and the
//! image diagonal for spatial queries.

use std::collections::BTreeMap;
use std::fmt;
use std::io::BufRead;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::CameraModel;
use crate::stats::{mean, sample_std};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryType {
    Spatial,
    TemporalPit,
    TemporalInterval,
    Directional,
}

impl QueryType {
    pub const ALL: [QueryType; 4] = [
        QueryType::Spatial,
        QueryType::TemporalPit,
        QueryType::TemporalInterval,
        QueryType::Directional,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            QueryType::Spatial => "spatial",
            QueryType::TemporalPit => "temporal-pit",
            QueryType::TemporalInterval => "temporal-interval",
            QueryType::Directional => "directional",
        }
    }

    /// Whether a larger score is better.
    pub fn higher_is_better(&self) -> bool {
        matches!(self, QueryType::TemporalInterval)
    }
}

impl fmt::Display for QueryType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for QueryType {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        QueryType::ALL
            .into_iter()
            .find(|q| q.as_str() == s)
            .ok_or_else(|| format!("unknown query type {s:?}"))
    }
}

/// A parsed answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Prediction {
    Point([f64; 3]),
    Pixel([f64; 2]),
    Timestep(i64),
    Intervals(Vec<[i64; 2]>),
    Direction([i8; 3]),
}

impl Prediction {
    pub fn fits(&self, q: QueryType) -> bool {
        matches!(
            (self, q),
            (Prediction::Point(_) | Prediction::Pixel(_), QueryType::Spatial)
                | (Prediction::Timestep(_), QueryType::TemporalPit)
                | (Prediction::Intervals(_), QueryType::TemporalInterval)
                | (Prediction::Direction(_), QueryType::Directional)
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Spatial { pixel: [f64; 2], t: usize },
    TemporalPit { t: usize },
    TemporalInterval { intervals: Vec<[usize; 2]> },
    /// 0 marks an axis that is not scored.
    Directional { direction: [i8; 3] },
}

impl GroundTruth {
    pub fn query_type(&self) -> QueryType {
        match self {
            GroundTruth::Spatial { .. } => QueryType::Spatial,
            GroundTruth::TemporalPit { .. } => QueryType::TemporalPit,
            GroundTruth::TemporalInterval { .. } => QueryType::TemporalInterval,
            GroundTruth::Directional { .. } => QueryType::Directional,
        }
    }

    /// The prediction a perfect answer would carry.
    pub fn as_prediction(&self) -> Prediction {
        match self {
            GroundTruth::Spatial { pixel, .. } => Prediction::Pixel(*pixel),
            GroundTruth::TemporalPit { t } => Prediction::Timestep(*t as i64),
            GroundTruth::TemporalInterval { intervals } => {
                Prediction::Intervals(intervals.iter().map(|&[a, b]| [a as i64, b as i64]).collect())
            }
            GroundTruth::Directional { direction } => Prediction::Direction(*direction),
        }
    }
}

/// One annotated query. Serialized as one JSON object per line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFixture", into = "RawFixture")]
pub struct QueryFixture {
    pub scene_id: String,
    pub query: String,
    pub ground_truth: GroundTruth,
    /// Opaque scripted replies for a mock model endpoint.
    pub mock_script: Option<serde_json::Value>,
}

impl QueryFixture {
    pub fn query_type(&self) -> QueryType {
        self.ground_truth.query_type()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFixture {
    scene_id: String,
    query: String,
    #[serde(rename = "type")]
    query_type: QueryType,
    ground_truth: RawTruth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mock_script: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTruth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pixel: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    intervals: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    direction: Option<[i8; 3]>,
}

impl TryFrom<RawFixture> for QueryFixture {
    type Error = String;

    fn try_from(r: RawFixture) -> Result<Self, String> {
        let g = r.ground_truth;
        let need = |name: &str| format!("{} ground truth needs `{name}`", r.query_type);
        let ground_truth = match r.query_type {
            QueryType::Spatial => GroundTruth::Spatial {
                pixel: g.pixel.ok_or_else(|| need("pixel"))?,
                t: g.t.ok_or_else(|| need("t"))?,
            },
            QueryType::TemporalPit => GroundTruth::TemporalPit {
                t: g.t.ok_or_else(|| need("t"))?,
            },
            QueryType::TemporalInterval => {
                let mut iv = g.intervals.ok_or_else(|| need("intervals"))?;
                if iv.is_empty() {
                    return Err("interval ground truth must be nonempty".into());
                }
                if iv.iter().any(|&[a, b]| a > b) {
                    return Err("interval start exceeds end".into());
                }
                iv.sort_unstable();
                if iv.windows(2).any(|w| w[1][0] <= w[0][1]) {
                    return Err("ground-truth intervals overlap".into());
                }
                GroundTruth::TemporalInterval { intervals: iv }
            }
            QueryType::Directional => {
                let d = g.direction.ok_or_else(|| need("direction"))?;
                if d.iter().any(|v| !(-1..=1).contains(v)) {
                    return Err("direction components must be -1, 0 or 1".into());
                }
                if d == [0, 0, 0] {
                    return Err("direction ground truth masks every axis".into());
                }
                GroundTruth::Directional { direction: d }
            }
        };
        if let GroundTruth::Spatial { pixel, .. } = &ground_truth {
            if pixel.iter().any(|v| !v.is_finite()) {
                return Err("pixel must be finite".into());
            }
        }
        Ok(QueryFixture {
            scene_id: r.scene_id,
            query: r.query,
            ground_truth,
            mock_script: r.mock_script,
        })
    }
}

impl From<QueryFixture> for RawFixture {
    fn from(f: QueryFixture) -> Self {
        let query_type = f.query_type();
        let mut g = RawTruth::default();
        match f.ground_truth {
            GroundTruth::Spatial { pixel, t } => {
                g.pixel = Some(pixel);
                g.t = Some(t);
            }
            GroundTruth::TemporalPit { t } => g.t = Some(t),
            GroundTruth::TemporalInterval { intervals } => g.intervals = Some(intervals),
            GroundTruth::Directional { direction } => g.direction = Some(direction),
        }
        RawFixture {
            scene_id: f.scene_id,
            query: f.query,
            query_type,
            ground_truth: g,
            mock_script: f.mock_script,
        }
    }
}

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("fixture line {line}: {message}")]
    Fixture { line: usize, message: String },
    #[error("fixture {index} references unknown scene {scene_id:?}")]
    MissingScene { index: usize, scene_id: String },
    #[error("fixture {index}: {message}")]
    OutOfScene { index: usize, message: String },
    #[error("direction ground truth masks every axis")]
    AllAxesMasked,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Reads JSON-lines fixtures; blank lines and `#` comments are skipped.
pub fn read_fixtures<R: BufRead>(reader: R) -> Result<Vec<QueryFixture>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let f = serde_json::from_str(trimmed).map_err(|e| EvalError::Fixture {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(f);
    }
    Ok(out)
}

pub fn write_fixtures(fixtures: &[QueryFixture]) -> String {
    fixtures
        .iter()
        .map(|f| serde_json::to_string(f).expect("fixture serializes") + "\n")
        .collect()
}

/// Pixel distance after projecting a 3D prediction at `t`. Predictions
/// behind the camera score `diagonal`.
pub fn spatial_error(pred: &Prediction, gt: [f64; 2], camera: &CameraModel, t: usize, diagonal: f64) -> f64 {
    let (u, v) = match pred {
        Prediction::Pixel([u, v]) => (*u, *v),
        Prediction::Point(p) => match camera.project(&Point3::new(p[0], p[1], p[2]), t) {
            Ok(proj) => (proj.u, proj.v),
            Err(_) => return diagonal,
        },
        _ => return diagonal,
    };
    let e = ((u - gt[0]).powi(2) + (v - gt[1]).powi(2)).sqrt();
    if e.is_finite() {
        e
    } else {
        diagonal
    }
}

/// `|clamp(pred, 0, T−1) − gt|`; `T` on failure.
pub fn pit_error(pred: Option<i64>, gt: usize, num_timesteps: usize) -> f64 {
    match pred {
        None => num_timesteps as f64,
        Some(p) => {
            let p = p.clamp(0, num_timesteps.saturating_sub(1) as i64);
            (p - gt as i64).unsigned_abs() as f64
        }
    }
}

/// Sorted disjoint inclusive ranges covering the same timesteps; reversed
/// intervals are empty.
pub fn normalize_intervals(intervals: &[[i64; 2]]) -> Vec<[i64; 2]> {
    let mut iv: Vec<[i64; 2]> = intervals.iter().copied().filter(|[a, b]| a <= b).collect();
    iv.sort_unstable();
    let mut out: Vec<[i64; 2]> = Vec::with_capacity(iv.len());
    for [a, b] in iv {
        match out.last_mut() {
            Some(last) if a <= last[1].saturating_add(1) => last[1] = last[1].max(b),
            _ => out.push([a, b]),
        }
    }
    out
}

fn covered_count(iv: &[[i64; 2]]) -> u128 {
    iv.iter().map(|[a, b]| (b - a) as u128 + 1).sum()
}

/// IoU of the timestep sets covered by two inclusive interval lists; 0 on failure.
pub fn interval_iou(pred: Option<&[[i64; 2]]>, gt: &[[i64; 2]]) -> f64 {
    let Some(pred) = pred else { return 0.0 };
    let (p, g) = (normalize_intervals(pred), normalize_intervals(gt));
    let (mut i, mut j, mut inter) = (0, 0, 0u128);
    while i < p.len() && j < g.len() {
        let lo = p[i][0].max(g[j][0]);
        let hi = p[i][1].min(g[j][1]);
        if lo <= hi {
            inter += (hi - lo) as u128 + 1;
        }
        if p[i][1] < g[j][1] {
            i += 1;
        } else {
            j += 1;
        }
    }
    let union = covered_count(&p) + covered_count(&g) - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Mean absolute difference over the axes where `gt` is nonzero; 2 on failure.
pub fn direction_error(pred: Option<[i8; 3]>, gt: [i8; 3]) -> Result<f64, EvalError> {
    let axes: Vec<usize> = (0..3).filter(|&a| gt[a] != 0).collect();
    if axes.is_empty() {
        return Err(EvalError::AllAxesMasked);
    }
    let Some(pred) = pred else { return Ok(2.0) };
    let sum: f64 = axes.iter().map(|&a| (pred[a] as f64 - gt[a] as f64).abs()).sum();
    Ok(sum / axes.len() as f64)
}

/// What scoring needs to know about a scene.
#[derive(Debug, Clone)]
pub struct SceneInfo {
    pub num_timesteps: usize,
    pub width: usize,
    pub height: usize,
    pub camera: CameraModel,
    /// Pixel error for unparseable spatial answers; the image diagonal when absent.
    pub spatial_penalty: Option<f64>,
}

impl SceneInfo {
    pub fn diagonal(&self) -> f64 {
        (self.width as f64).hypot(self.height as f64)
    }

    pub fn penalty(&self) -> f64 {
        self.spatial_penalty.unwrap_or_else(|| self.diagonal())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredQuery {
    pub index: usize,
    pub scene_id: String,
    pub query_type: QueryType,
    pub score: f64,
    pub parse_failure: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prediction: Option<Prediction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryStats {
    pub n: usize,
    pub mean: f64,
    /// Sample (n − 1) standard deviation.
    pub std: f64,
    pub parse_failures: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub fingerprint: String,
    pub rows: Vec<ScoredQuery>,
    pub categories: BTreeMap<QueryType, CategoryStats>,
    pub parse_failures: usize,
    pub notes: Vec<String>,
}

impl BenchmarkReport {
    pub fn from_rows(fingerprint: String, rows: Vec<ScoredQuery>) -> Self {
        let categories = QueryType::ALL
            .into_iter()
            .filter_map(|q| {
                let scores: Vec<f64> = rows.iter().filter(|r| r.query_type == q).map(|r| r.score).collect();
                (!scores.is_empty()).then(|| {
                    (
                        q,
                        CategoryStats {
                            n: scores.len(),
                            mean: mean(&scores).unwrap_or(0.0),
                            std: sample_std(&scores),
                            parse_failures: rows.iter().filter(|r| r.query_type == q && r.parse_failure).count(),
                        },
                    )
                })
            })
            .collect();
        Self {
            fingerprint,
            parse_failures: rows.iter().filter(|r| r.parse_failure).count(),
            rows,
            categories,
            notes: vec![
                "point-in-time predictions are clamped to [0, T) before scoring".into(),
                "unparseable spatial answers and points behind the camera score the image diagonal".into(),
                "intervals are inclusive timestep ranges".into(),
            ],
        }
    }

    /// One row of `mean ± std` per metric, in a fixed column order.
    pub fn table(&self) -> String {
        let headers = [
            (QueryType::Spatial, "Spatial L2 px (lower)"),
            (QueryType::TemporalPit, "PIT |dt| (lower)"),
            (QueryType::TemporalInterval, "Interval IoU (higher)"),
            (QueryType::Directional, "Direction L1 (lower)"),
        ];
        let cells: Vec<String> = headers
            .iter()
            .map(|(q, _)| match self.categories.get(q) {
                Some(c) => format!("{:.2} ± {:.2} (n={})", c.mean, c.std, c.n),
                None => "n/a".into(),
            })
            .collect();
        let widths: Vec<usize> = headers
            .iter()
            .zip(&cells)
            .map(|((_, h), c)| h.chars().count().max(c.chars().count()))
            .collect();
        let line = |items: Vec<&str>| -> String {
            items
                .iter()
                .zip(&widths)
                .map(|(s, w)| format!("{s:<w$}", w = *w))
                .collect::<Vec<_>>()
                .join(" | ")
        };
        let mut out = String::new();
        out += &line(headers.iter().map(|(_, h)| *h).collect());
        out.push('\n');
        out += &widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-|-");
        out.push('\n');
        out += &line(cells.iter().map(String::as_str).collect());
        out.push('\n');
        out += &format!("parse failures: {}\nconfig: {}\n", self.parse_failures, self.fingerprint);
        out
    }
}

/// Scores one prediction; `None` (or a prediction of the wrong kind) is a
/// parse failure.
pub fn score(fixture: &QueryFixture, pred: Option<&Prediction>, scene: &SceneInfo) -> (f64, bool) {
    let pred = pred.filter(|p| p.fits(fixture.query_type()));
    let failed = pred.is_none();
    let s = match (&fixture.ground_truth, pred) {
        (GroundTruth::Spatial { pixel, t }, Some(p)) => spatial_error(p, *pixel, &scene.camera, *t, scene.penalty()),
        (GroundTruth::Spatial { .. }, None) => scene.penalty(),
        (GroundTruth::TemporalPit { t }, p) => {
            let p = p.and_then(|p| match p {
                Prediction::Timestep(v) => Some(*v),
                _ => None,
            });
            pit_error(p, *t, scene.num_timesteps)
        }
        (GroundTruth::TemporalInterval { intervals }, p) => {
            let gt: Vec<[i64; 2]> = intervals.iter().map(|&[a, b]| [a as i64, b as i64]).collect();
            let p = p.and_then(|p| match p {
                Prediction::Intervals(v) => Some(v.as_slice()),
                _ => None,
            });
            interval_iou(p, &gt)
        }
        (GroundTruth::Directional { direction }, p) => {
            let p = p.and_then(|p| match p {
                Prediction::Direction(d) => Some(*d),
                _ => None,
            });
            direction_error(p, *direction).unwrap_or(2.0)
        }
    };
    (s, failed)
}

fn check_against_scene(index: usize, f: &QueryFixture, s: &SceneInfo) -> Result<(), EvalError> {
    let t_n = s.num_timesteps;
    let bad = |message: String| Err(EvalError::OutOfScene { index, message });
    match &f.ground_truth {
        GroundTruth::Spatial { pixel, t } => {
            if *t >= t_n {
                return bad(format!("timestep {t} out of range"));
            }
            if pixel[0] < 0.0 || pixel[1] < 0.0 || pixel[0] > (s.width - 1) as f64 || pixel[1] > (s.height - 1) as f64 {
                return bad("ground-truth pixel outside the image".into());
            }
        }
        GroundTruth::TemporalPit { t } if *t >= t_n => return bad(format!("timestep {t} out of range")),
        GroundTruth::TemporalInterval { intervals } if intervals.iter().any(|iv| iv[1] >= t_n) => {
            return bad("interval exceeds the clip".into())
        }
        _ => {}
    }
    Ok(())
}

/// Runs `runner` on every fixture in order and aggregates the scores.
pub fn run_benchmark<F>(
    fixtures: &[QueryFixture],
    scenes: &BTreeMap<String, SceneInfo>,
    fingerprint: &str,
    mut runner: F,
) -> Result<BenchmarkReport, EvalError>
where
    F: FnMut(usize, &QueryFixture) -> Option<Prediction>,
{
    for (index, f) in fixtures.iter().enumerate() {
        let s = scenes.get(&f.scene_id).ok_or_else(|| EvalError::MissingScene {
            index,
            scene_id: f.scene_id.clone(),
        })?;
        check_against_scene(index, f, s)?;
    }
    let rows = fixtures
        .iter()
        .enumerate()
        .map(|(index, f)| {
            let pred = runner(index, f);
            let (score, parse_failure) = score(f, pred.as_ref(), &scenes[&f.scene_id]);
            ScoredQuery {
                index,
                scene_id: f.scene_id.clone(),
                query_type: f.query_type(),
                score,
                parse_failure,
                prediction: pred,
            }
        })
        .collect();
    Ok(BenchmarkReport::from_rows(fingerprint.to_string(), rows))
}
