//! The `sem4d` command line: fixtures, staged builds, tool queries, the tool
//! server, agent sessions, benchmarks and ablation sweeps.

pub mod queries;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Map, Value};

use sem4d_core::densification::DensePointCloud;
use sem4d_core::evaluation::{read_fixtures, run_benchmark, write_fixtures, BenchmarkReport, QueryFixture, QueryType};
use sem4d_core::fixture::{presets, Recipe};
use sem4d_core::lifting::{lift_tracks_with_report, ControlPointCloud, LiftReport};
use sem4d_core::pipeline::{self, PipelineConfig, StageCache};
use sem4d_core::ply::{write_ply, PlyFormat};
use sem4d_core::scene_io::{load_scene, validate_bundle};
use sem4d_core::semantics::build_instances;
use sem4d_gateway::bench::{mock_from_fixtures, run_agent_benchmark, AgentBenchmark, BenchScene};
use sem4d_gateway::llm::{LlmClient, LlmConfig};
use sem4d_gateway::mock::MockServer;
use sem4d_gateway::server::{self, SceneStore};
use sem4d_gateway::session::{SessionConfig, DEFAULT_STEP_BUDGET};
use sem4d_gateway::tools::{execute, DispatchOptions};
use sem4d_gateway::{run_session, ToolCall};

#[derive(Debug, Parser)]
#[command(name = "sem4d", version, about = "Build semantic 4D scenes and query them with spatio-temporal tools")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a scene bundle and print the validation report.
    Validate {
        manifest: PathBuf,
    },
    /// Generate a synthetic scene with analytic ground truth.
    Fixture(FixtureArgs),
    /// Lift 2D tracks to a control point cloud.
    Lift {
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Densify a control point cloud.
    Densify {
        manifest: PathBuf,
        #[arg(long)]
        controls: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group dense points into semantic instances.
    Semantics {
        manifest: PathBuf,
        #[arg(long)]
        controls: PathBuf,
        #[arg(long)]
        dense: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run every stage and write a scene directory.
    Build {
        manifest: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        /// Directory for per-stage results keyed by input and config hashes.
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Run one tool against a built scene.
    Query(QueryArgs),
    /// Serve the tools over HTTP.
    Serve {
        /// A scene directory, or a directory of them.
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8080)]
        port: u16,
    },
    /// Answer one question with an agent session.
    Ask {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        scene: String,
        #[arg(long = "type", value_parser = parse_query_type)]
        query_type: QueryType,
        #[arg(long)]
        query: String,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Score a fixture file.
    Bench {
        #[arg(long)]
        fixtures: PathBuf,
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long, value_enum, default_value_t = Runner::Mock)]
        runner: Runner,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Build under each ablation and compare.
    Ablate {
        #[arg(long, required = true)]
        manifest: Vec<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Runner::Mock)]
        runner: Runner,
        #[command(flatten)]
        session: SessionArgs,
    },
    /// Write the dense cloud at one timestep as PLY.
    ExportPly {
        scene: PathBuf,
        #[arg(long)]
        t: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Binary)]
        format: Format,
    },
    /// Print the effective configuration and its fingerprint.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

#[derive(Debug, Args)]
pub struct FixtureArgs {
    /// Preset name or recipe JSON file.
    #[arg(required_unless_present = "list")]
    pub recipe: Option<String>,
    #[arg(long, required_unless_present = "list")]
    pub out: Option<PathBuf>,
    /// List the presets and exit.
    #[arg(long)]
    pub list: bool,
    /// Only write the input bundle.
    #[arg(long)]
    pub no_build: bool,
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    pub scene: PathBuf,
    /// Tool name; `min-distance` and `min_distance` are equivalent.
    pub tool: String,
    #[arg(long)]
    pub a: Option<u32>,
    #[arg(long)]
    pub b: Option<u32>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub t0: Option<usize>,
    #[arg(long)]
    pub t1: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Skip rounding of the payload.
    #[arg(long)]
    pub precise: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ConfigArgs {
    /// Pipeline configuration JSON; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub no_jump_filter: bool,
    #[arg(long)]
    pub no_depth_maintenance: bool,
    #[arg(long)]
    pub no_gradient_filter: bool,
    /// Lift every extra track set as well as the primary one.
    #[arg(long)]
    pub multi_frame: bool,
}

impl ConfigArgs {
    pub fn load(&self) -> Result<PipelineConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                PipelineConfig::from_json_str(&text).with_context(|| format!("parsing {}", p.display()))?
            }
            None => PipelineConfig::default(),
        };
        c.lift.enable_jump_filter &= !self.no_jump_filter;
        c.lift.enable_depth_maintenance &= !self.no_depth_maintenance;
        c.lift.enable_gradient_filter &= !self.no_gradient_filter;
        c.lift.multi_frame |= self.multi_frame;
        Ok(c)
    }
}

#[derive(Debug, Clone, Args)]
pub struct SessionArgs {
    /// Offer the frame tool and attach fetched frames.
    #[arg(long)]
    pub frames: bool,
    #[arg(long, default_value_t = DEFAULT_STEP_BUDGET)]
    pub budget: usize,
}

impl SessionArgs {
    fn config(&self) -> SessionConfig {
        SessionConfig {
            step_budget: self.budget,
            frame_fetching: self.frames,
            ..SessionConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Runner {
    /// The endpoint named by SEM4D_LLM_URL.
    Agent,
    /// A local endpoint replaying each fixture's script.
    Mock,
    /// Ground truth as the answer; checks the scoring path.
    Oracle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ascii,
    Binary,
}

fn parse_query_type(s: &str) -> Result<QueryType, String> {
    s.parse().map_err(|e| format!("{e}"))
}

pub fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Validate { manifest } => validate(&manifest),
        Command::Fixture(args) => fixture(&args),
        Command::Lift { manifest, config, out } => lift(&manifest, &config.load()?, &out),
        Command::Densify {
            manifest,
            controls,
            config,
            out,
        } => densify(&manifest, &controls, &config.load()?, &out),
        Command::Semantics {
            manifest,
            controls,
            dense,
            config,
            out,
        } => semantics(&manifest, &controls, &dense, &config.load()?, &out),
        Command::Build {
            manifest,
            config,
            out,
            cache,
        } => build(&manifest, &config.load()?, &out, cache.as_deref()),
        Command::Query(args) => query(&args),
        Command::Serve { scenes, host, port } => serve(&scenes, &host, port),
        Command::Ask {
            scenes,
            scene,
            query_type,
            query,
            session,
        } => ask(&scenes, &scene, query_type, &query, &session.config()),
        Command::Bench {
            fixtures,
            scenes,
            runner,
            out,
            session,
        } => bench(&fixtures, &scenes, runner, out.as_deref(), &session.config()),
        Command::Ablate {
            manifest,
            config,
            out,
            fixtures,
            runner,
            session,
        } => ablate(&manifest, &config.load()?, &out, fixtures.as_deref(), runner, &session.config()),
        Command::ExportPly { scene, t, out, format } => export_ply(&scene, t, &out, format),
        Command::Config { config } => {
            let c = config.load()?;
            print_json(&json!({"fingerprint": c.fingerprint(), "config": c}))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn print_json<T: Serialize>(v: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, v)?;
    writeln!(out)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    Ok(tokio::runtime::Builder::new_multi_thread().enable_all().build()?)
}

fn validate(manifest: &Path) -> Result<ExitCode> {
    let bundle = load_scene(manifest)?;
    let report = validate_bundle(&bundle);
    print_json(&report)?;
    Ok(if report.is_clean() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn fixture(args: &FixtureArgs) -> Result<ExitCode> {
    if args.list {
        for name in presets::NAMES {
            println!("{name}");
        }
        return Ok(ExitCode::SUCCESS);
    }
    let (Some(name), Some(out)) = (&args.recipe, &args.out) else {
        bail!("a recipe and --out are required");
    };
    let recipe = match presets::by_name(name) {
        Some(r) => r,
        None => {
            let text = std::fs::read_to_string(name)
                .with_context(|| format!("{name} is neither a preset ({}) nor a readable file", presets::NAMES.join(", ")))?;
            Recipe::from_json_str(&text)?
        }
    };
    let fx = recipe.generate()?;
    let manifest = fx.write(&out.join("bundle"))?;
    let mut summary = Map::new();
    summary.insert("manifest".into(), json!(manifest));
    if !args.no_build {
        let dir = out.join("scenes").join(&fx.recipe.scene_id);
        let (scene, doc, _) = pipeline::build(&manifest, &args.config.load()?, &dir, None)?;
        summary.insert("scene".into(), json!(dir));
        summary.insert("fingerprint".into(), json!(doc.fingerprint));
        match queries::ContactGeometry::from_fixture(&fx) {
            Ok(_) => {
                let qs = queries::contact_queries(&fx, &scene)?;
                let path = out.join("queries.jsonl");
                std::fs::write(&path, write_fixtures(&qs))?;
                summary.insert("queries".into(), json!(path));
                summary.insert("num_queries".into(), json!(qs.len()));
            }
            Err(e) => log::info!("no benchmark queries for {}: {e}", fx.recipe.scene_id),
        }
    }
    print_json(&summary)?;
    Ok(ExitCode::SUCCESS)
}

fn lift(manifest: &Path, config: &PipelineConfig, out: &Path) -> Result<ExitCode> {
    let bundle = load_scene(manifest)?;
    let (controls, report) = lift_tracks_with_report(&bundle, &config.lift)?;
    std::fs::create_dir_all(out)?;
    let path = controls.save(out, "controls")?;
    write_json(&out.join("lift_report.json"), &report)?;
    print_json(&json!({
        "controls": path,
        "num_points": controls.num_points,
        "alive": controls.alive.iter().filter(|a| **a).count(),
        "removed_by_jump_filter": jump_removed(&report),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn jump_removed(report: &LiftReport) -> usize {
    report
        .track_sets
        .iter()
        .filter_map(|s| s.jump_filter.as_ref())
        .map(|j| j.removed.len())
        .sum()
}

fn densify(manifest: &Path, controls: &Path, config: &PipelineConfig, out: &Path) -> Result<ExitCode> {
    let bundle = load_scene(manifest)?;
    let controls = ControlPointCloud::load(controls)?;
    let dcfg = pipeline::effective_densify(config, &controls);
    let dense = pipeline::densify_stage(&bundle, &controls, &config.lift, &dcfg)?;
    std::fs::create_dir_all(out)?;
    let path = dense.save(out, "dense")?;
    print_json(&json!({"dense": path, "num_points": dense.num_points}))?;
    Ok(ExitCode::SUCCESS)
}

fn semantics(manifest: &Path, controls: &Path, dense: &Path, config: &PipelineConfig, out: &Path) -> Result<ExitCode> {
    let bundle = load_scene(manifest)?;
    let controls = ControlPointCloud::load(controls)?;
    let dense = DensePointCloud::load(dense)?;
    let merge = config.semantics.resolve(&controls);
    let table = build_instances(&bundle, &dense, &controls, &merge)?;
    std::fs::create_dir_all(out)?;
    let path = table.save(out, "instances")?;
    print_json(&json!({"instances": path, "num_instances": table.instances.len(), "radius": table.radius}))?;
    Ok(ExitCode::SUCCESS)
}

fn build(manifest: &Path, config: &PipelineConfig, out: &Path, cache: Option<&Path>) -> Result<ExitCode> {
    let cache = cache.map(StageCache::new);
    let (scene, doc, built) = pipeline::build(manifest, config, out, cache.as_ref())?;
    print_json(&json!({
        "scene_id": doc.scene_id,
        "out": out,
        "fingerprint": doc.fingerprint,
        "cached_stages": built.cached,
        "controls_alive": built.controls.alive.iter().filter(|a| **a).count(),
        "dense_points": built.dense.num_points,
        "instances": scene.scene_summary(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn query(args: &QueryArgs) -> Result<ExitCode> {
    let (scene, doc) = pipeline::load_scene4d(&args.scene)?;
    let mut arguments = Map::new();
    let mut put = |k: &str, v: Option<Value>| {
        if let Some(v) = v {
            arguments.insert(k.to_string(), v);
        }
    };
    put("a", args.a.map(Value::from));
    put("b", args.b.map(Value::from));
    put("t", args.t.map(Value::from));
    put("t0", args.t0.map(Value::from));
    put("t1", args.t1.map(Value::from));
    put("stride", args.stride.map(Value::from));
    put("epsilon", args.epsilon.map(Value::from));
    put("precise", args.precise.then_some(Value::Bool(true)));
    let call = ToolCall {
        session_id: None,
        tool: args.tool.replace('-', "_"),
        arguments: Value::Object(arguments),
    };
    let opts = DispatchOptions {
        frame_fetching: true,
        direction_epsilon: doc.config.toolkit.direction_epsilon,
    };
    let result = execute(&scene, &call, &opts);
    print_json(&result)?;
    Ok(if result.is_ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(scenes: &Path, host: &str, port: u16) -> Result<ExitCode> {
    let store = SceneStore::load_dir(scenes)?;
    if store.is_empty() {
        bail!("no built scenes under {}", scenes.display());
    }
    runtime()?.block_on(async {
        let running = server::spawn(store, &format!("{host}:{port}")).await?;
        println!("{}", running.url());
        tokio::select! {
            _ = running.wait() => {}
            _ = tokio::signal::ctrl_c() => log::info!("interrupted"),
        }
        Ok(ExitCode::SUCCESS)
    })
}

fn load_bench_scenes(root: &Path) -> Result<BTreeMap<String, BenchScene>> {
    let scenes: BTreeMap<String, BenchScene> = pipeline::load_scene_dir(root)?
        .into_iter()
        .map(|(k, v)| (k, BenchScene::from(v)))
        .collect();
    if scenes.is_empty() {
        bail!("no built scenes under {}", root.display());
    }
    Ok(scenes)
}

fn ask(scenes: &Path, id: &str, q: QueryType, text: &str, cfg: &SessionConfig) -> Result<ExitCode> {
    let scenes = load_bench_scenes(scenes)?;
    let bs = scenes.get(id).ok_or_else(|| anyhow!("unknown scene {id}"))?;
    let client = LlmClient::new(LlmConfig::from_env()?)?;
    let cfg = SessionConfig {
        direction_epsilon: bs.direction_epsilon,
        ..cfg.clone()
    };
    let answer = runtime()?.block_on(run_session(&client, &bs.scene, text, q, &cfg))?;
    print_json(&answer)?;
    Ok(if answer.parsed { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn read_fixture_file(path: &Path) -> Result<Vec<QueryFixture>> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(read_fixtures(BufReader::new(f))?)
}

/// Scores `fixtures` with `runner`; the agent runners also return their transcripts.
pub fn score_fixtures(
    fixtures: &[QueryFixture],
    scenes: &BTreeMap<String, BenchScene>,
    fingerprint: &str,
    runner: Runner,
    cfg: &SessionConfig,
) -> Result<AgentBenchmark> {
    match runner {
        Runner::Oracle => {
            let infos = scenes.iter().map(|(k, s)| (k.clone(), s.info.clone())).collect();
            let mut report = run_benchmark(fixtures, &infos, fingerprint, |_, f| Some(f.ground_truth.as_prediction()))?;
            report.notes.push("oracle runner: ground truth as the answer".into());
            Ok(AgentBenchmark {
                report,
                answers: Vec::new(),
            })
        }
        Runner::Mock => runtime()?.block_on(async {
            let server = MockServer::spawn(mock_from_fixtures(fixtures)?).await?;
            let client = LlmClient::new(LlmConfig::new(server.url()))?;
            let mut out = run_agent_benchmark(fixtures, scenes, &client, cfg, fingerprint).await?;
            out.report.notes.push("mock runner: scripted replies".into());
            Ok(out)
        }),
        Runner::Agent => {
            let client = LlmClient::new(LlmConfig::from_env()?)?;
            Ok(runtime()?.block_on(run_agent_benchmark(fixtures, scenes, &client, cfg, fingerprint))?)
        }
    }
}

fn bench(fixtures: &Path, scene_root: &Path, runner: Runner, out: Option<&Path>, cfg: &SessionConfig) -> Result<ExitCode> {
    let fixtures = read_fixture_file(fixtures)?;
    let scenes = load_bench_scenes(scene_root)?;
    let mut fps: Vec<String> = scenes
        .values()
        .map(|s| s.fingerprint.clone())
        .collect();
    fps.sort_unstable();
    fps.dedup();
    // Scenes built under different configs report every fingerprint.
    let fingerprint = fps.join("+");
    let result = score_fixtures(&fixtures, &scenes, &fingerprint, runner, cfg)?;
    if let Some(path) = out {
        write_json(path, &result)?;
    }
    print!("{}", result.report.table());
    Ok(ExitCode::SUCCESS)
}

#[derive(Debug, Serialize)]
struct AblationRun {
    name: String,
    fingerprint: String,
    controls_alive: usize,
    removed_by_jump_filter: usize,
    dense_points: usize,
    instances: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<BenchmarkReport>,
}

fn ablate(
    manifests: &[PathBuf],
    base: &PipelineConfig,
    out: &Path,
    fixtures: Option<&Path>,
    runner: Runner,
    cfg: &SessionConfig,
) -> Result<ExitCode> {
    let fixtures = fixtures.map(read_fixture_file).transpose()?;
    let bundles = manifests
        .iter()
        .map(|m| load_scene(m).with_context(|| format!("loading {}", m.display())))
        .collect::<Result<Vec<_>>>()?;
    let mut runs = Vec::new();
    for (name, config) in pipeline::ablation_configs(base) {
        let dir = out.join(name);
        let mut scenes = BTreeMap::new();
        let (mut alive, mut removed, mut dense, mut instances) = (0, 0, 0, 0);
        for bundle in &bundles {
            let scene_dir = dir.join(&bundle.manifest.scene_id);
            let (scene, doc, built) = pipeline::build_bundle(bundle, &config, &scene_dir, None)?;
            alive += built.controls.alive.iter().filter(|a| **a).count();
            removed += built.lift_report.as_ref().map_or(0, jump_removed);
            dense += built.dense.num_points;
            instances += built.instances.instances.len();
            scenes.insert(doc.scene_id.clone(), BenchScene::from((scene, doc)));
        }
        let report = match &fixtures {
            Some(f) => Some(score_fixtures(f, &scenes, &config.fingerprint(), runner, cfg)?.report),
            None => None,
        };
        log::info!("ablation {name}: {alive} controls alive, {instances} instances");
        runs.push(AblationRun {
            name: name.to_string(),
            fingerprint: config.fingerprint(),
            controls_alive: alive,
            removed_by_jump_filter: removed,
            dense_points: dense,
            instances,
            report,
        });
    }
    write_json(&out.join("ablation.json"), &json!({"base_fingerprint": base.fingerprint(), "runs": runs}))?;
    print!("{}", ablation_table(&runs));
    Ok(ExitCode::SUCCESS)
}

fn ablation_table(runs: &[AblationRun]) -> String {
    let mut s = format!(
        "{:<22} {:>8} {:>8} {:>8} {:>9}",
        "config", "alive", "jumps", "dense", "instances"
    );
    let with_scores = runs.iter().any(|r| r.report.is_some());
    if with_scores {
        for q in QueryType::ALL {
            s.push_str(&format!(" {:>20}", q.as_str()));
        }
    }
    s.push('\n');
    for r in runs {
        s.push_str(&format!(
            "{:<22} {:>8} {:>8} {:>8} {:>9}",
            r.name, r.controls_alive, r.removed_by_jump_filter, r.dense_points, r.instances
        ));
        if let Some(rep) = &r.report {
            for q in QueryType::ALL {
                let cell = rep
                    .categories
                    .get(&q)
                    .map_or("-".to_string(), |c| format!("{:.3} ± {:.3}", c.mean, c.std));
                s.push_str(&format!(" {cell:>20}"));
            }
        }
        s.push('\n');
    }
    s
}

fn export_ply(scene: &Path, t: usize, out: &Path, format: Format) -> Result<ExitCode> {
    let (scene, _) = pipeline::load_scene4d(scene)?;
    if t >= scene.num_timesteps() {
        bail!("t = {t} is out of range (T = {})", scene.num_timesteps());
    }
    let format = match format {
        Format::Ascii => PlyFormat::Ascii,
        Format::Binary => PlyFormat::BinaryLittleEndian,
    };
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_ply(&mut w, scene.dense(), t, format)?;
    w.flush()?;
    print_json(&json!({"ply": out, "points": scene.dense().num_points, "t": t}))?;
    Ok(ExitCode::SUCCESS)
}
