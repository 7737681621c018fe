//! `dynqa`: generate datasets, estimate states from noisy observations,
//! answer and score questions, and re-simulate scenes.

use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use dynqa_core::dataset::{
    answer_dataset, estimate_dataset, evaluate_answers, generate_dataset, read_json, read_jsonl, resimulate,
    write_jsonl, AnswerRecord, CiThresholds, Dataset, EstimateOptions, Estimates, GenerateOptions, ParserMode, Preset,
    StateSource,
};
use dynqa_core::estimator::NoiseModel;
use dynqa_core::generator::{build_annotation, GeneratorConfig};
use dynqa_core::parser::ParseGrammar;
use dynqa_core::physics::{SceneConfig, WorldState};
use dynqa_core::questions::TemplateSet;
use dynqa_core::Modification;

const EXIT_THRESHOLD: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_INTERNAL: u8 = 3;

#[derive(Parser)]
#[command(name = "dynqa", version, about = "Dynamic-scene question answering over simulated vehicles")]
struct Cli {
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, env = "DYNQA_WORKERS", default_value_t = 0)]
    workers: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate scenes and questions into a dataset directory.
    Generate(GenerateArgs),
    /// Synthesize noisy observations and track every scene.
    Estimate(EstimateArgs),
    /// Answer every question of a dataset.
    Answer(AnswerArgs),
    /// Score answers and print the report.
    Eval(EvalArgs),
    /// Re-run one scene with a modification and diff the outcome.
    Resimulate(ResimArgs),
    /// Parse question text (JSONL of {"text": ...}) into programs.
    Parse(ParseArgs),
    /// Simulate a world state JSON into a scene annotation.
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "desk")]
    preset: Preset,
    /// Single `test` split of this many scenes instead of the preset.
    #[arg(long)]
    scenes: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Generator configuration as JSON; missing fields take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    min_objects: Option<usize>,
    #[arg(long)]
    max_objects: Option<usize>,
    #[arg(long)]
    no_balance: bool,
    /// Overall accuracy floor recorded for `eval --ci`.
    #[arg(long)]
    min_overall: Option<f64>,
    /// Per-type accuracy floor, `type=value`; repeatable.
    #[arg(long = "min-type", value_parser = parse_type_floor)]
    min_type: Vec<(String, f64)>,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Position noise standard deviation, m.
    #[arg(long, default_value_t = 0.3)]
    sigma_obs: f64,
    /// Yaw noise standard deviation, rad.
    #[arg(long, default_value_t = 0.05)]
    sigma_rot: f64,
    /// Per-frame dropout probability.
    #[arg(long, default_value_t = 0.2)]
    dropout: f64,
    #[arg(long, default_value_t = 0)]
    noise_seed: u64,
    /// Observation-only baseline.
    #[arg(long)]
    no_physics_prior: bool,
    #[arg(long)]
    prior_variance: Option<f64>,
}

#[derive(Args)]
struct AnswerArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// `gt` or `estimated`.
    #[arg(long, default_value = "gt", value_parser = ["gt", "estimated"])]
    states: String,
    /// Estimates directory, required with `--states estimated`.
    #[arg(long)]
    estimates: Option<PathBuf>,
    #[arg(long, default_value = "stored")]
    parser: ParserMode,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    answers: PathBuf,
    /// Write the report as JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Exit with status 1 when below the manifest's thresholds.
    #[arg(long)]
    ci: bool,
    #[arg(long)]
    min_overall: Option<f64>,
    #[arg(long = "min-type", value_parser = parse_type_floor)]
    min_type: Vec<(String, f64)>,
}

#[derive(Args)]
struct ResimArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    scene: String,
    #[arg(long)]
    object: u32,
    /// `velocity=static|slow|fast`, `accelerating=true|false` or `floating=true|false`.
    #[arg(long)]
    modification: Modification,
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 1 if any line fails.
    #[arg(long)]
    strict: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    world: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = "scene")]
    scene_id: String,
    #[arg(long)]
    gravity: Option<f64>,
    #[arg(long)]
    frames: Option<usize>,
    #[arg(long)]
    restitution: Option<f64>,
}

fn parse_type_floor(s: &str) -> Result<(String, f64), String> {
    let (t, v) = s.split_once('=').ok_or_else(|| format!("expected type=value, got {s:?}"))?;
    let v: f64 = v.parse().map_err(|e| format!("{v:?}: {e}"))?;
    Ok((t.trim().to_string(), v))
}

enum Failure {
    Usage(anyhow::Error),
    Threshold(Vec<String>),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Internal(e)
    }
}

impl From<dynqa_core::dataset::DatasetError> for Failure {
    fn from(e: dynqa_core::dataset::DatasetError) -> Self {
        Failure::Internal(e.into())
    }
}

fn usage(msg: impl std::fmt::Display) -> Failure {
    Failure::Usage(anyhow::anyhow!("{msg}"))
}

fn generate(args: GenerateArgs, workers: usize) -> Result<(), Failure> {
    let mut options = GenerateOptions::preset(args.preset, args.seed);
    if let Some(n) = args.scenes {
        options.splits = vec![("test".into(), n)];
    }
    if let Some(path) = &args.config {
        options.generator = read_json::<GeneratorConfig>(path).map_err(usage)?;
    }
    if let Some(n) = args.min_objects {
        options.generator.min_objects = n;
    }
    if let Some(n) = args.max_objects {
        options.generator.max_objects = n;
    }
    options.generator.validate().map_err(usage)?;
    options.balance = !args.no_balance;
    options.ci = CiThresholds { min_overall: args.min_overall, min_per_type: args.min_type.into_iter().collect() };
    options.workers = workers;
    let m = generate_dataset(&args.out, &options)?;
    let scenes: usize = m.splits.iter().map(|s| s.scenes.len()).sum();
    println!("wrote {scenes} scenes to {}", args.out.display());
    for (t, n) in &m.question_counts {
        println!("  {t:<15} {n}");
    }
    Ok(())
}

fn estimate(args: EstimateArgs, workers: usize) -> Result<(), Failure> {
    let noise = NoiseModel { sigma_obs: args.sigma_obs, sigma_rot: args.sigma_rot, p_drop: args.dropout, seed: args.noise_seed };
    noise.validate().map_err(usage)?;
    let mut options = EstimateOptions::new(noise, !args.no_physics_prior);
    if let Some(v) = args.prior_variance {
        options.estimator.prior_variance = v;
    }
    options.estimator.validate().map_err(usage)?;
    options.workers = workers;
    let dataset = Dataset::open(&args.dataset)?;
    let m = estimate_dataset(&dataset, &args.out, &options)?;
    match m.mean_rmse {
        Some(r) => println!("mean position rmse {r:.4} m"),
        None => println!("mean position rmse n/a"),
    }
    let c = m.collisions;
    println!(
        "collision f1 {:.4} (tp {} fp {} fn {})",
        m.collision_f1, c.true_positive, c.false_positive, c.false_negative
    );
    for id in &m.failed_scenes {
        eprintln!("tracking failed: {id}");
    }
    Ok(())
}

fn answer(args: AnswerArgs, workers: usize) -> Result<(), Failure> {
    let dataset = Dataset::open(&args.dataset)?;
    let questions = dataset.questions()?;
    let estimates = match (args.states.as_str(), &args.estimates) {
        ("estimated", Some(dir)) => Some(Estimates::open(dir)?),
        ("estimated", None) => return Err(usage("--states estimated needs --estimates DIR")),
        _ => None,
    };
    let states = estimates.as_ref().map_or(StateSource::GroundTruth, StateSource::Estimated);
    let answers = answer_dataset(&dataset, &questions, states, args.parser, workers)?;
    write_jsonl(&args.out, &answers)?;
    let failed = answers.iter().filter(|a| a.error.is_some()).count();
    println!("answered {} questions ({failed} with errors)", answers.len());
    Ok(())
}

fn eval(args: EvalArgs) -> Result<(), Failure> {
    let dataset = Dataset::open(&args.dataset)?;
    let questions = dataset.questions()?;
    let answers: Vec<AnswerRecord> = read_jsonl(&args.answers)?;
    let report = evaluate_answers(&questions, &answers).map_err(usage)?;
    print!("{report}");
    if let Some(path) = &args.report {
        let json = serde_json::to_string_pretty(&report).context("serialize report")?;
        std::fs::write(path, json + "\n").with_context(|| format!("write {}", path.display()))?;
    }
    if !args.ci {
        return Ok(());
    }
    let mut ci = dataset.manifest.ci.clone();
    if args.min_overall.is_some() {
        ci.min_overall = args.min_overall;
    }
    ci.min_per_type.extend(args.min_type);
    let failures = report.failures(&ci);
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Threshold(failures))
    }
}

fn fmt_events(events: &[dynqa_core::CollisionEvent]) -> String {
    if events.is_empty() {
        return "none".into();
    }
    events
        .iter()
        .map(|e| format!("{}-{}@{}", e.pair.first(), e.pair.second(), e.frame))
        .collect::<Vec<_>>()
        .join(" ")
}

fn resim(args: ResimArgs) -> Result<(), Failure> {
    let dataset = Dataset::open(&args.dataset)?;
    if !dataset.scene_ids().any(|id| id == args.scene) {
        return Err(usage(format!("no scene {} in {}", args.scene, args.dataset.display())));
    }
    let scene = dataset.scene(&args.scene)?;
    let report = resimulate(&scene, args.object, args.modification).map_err(usage)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report).context("serialize report")?);
        return Ok(());
    }
    println!("scene {} object {} {}", report.scene_id, report.object, report.modification);
    println!("base:           {}", fmt_events(&report.base_events));
    println!("counterfactual: {}", fmt_events(&report.counterfactual_events));
    println!("added:          {}", fmt_events(&report.added));
    println!("removed:        {}", fmt_events(&report.removed));
    println!("divergence (max position gap, first frame):");
    for d in &report.divergence {
        let first = d.first_frame.map_or("-".to_string(), |f| f.to_string());
        println!("  object {:<3} {:>9.4} m  {first}", d.id, d.max_position_diff);
    }
    Ok(())
}

#[derive(serde::Deserialize)]
struct TextLine {
    text: String,
}

fn parse(args: ParseArgs) -> Result<(), Failure> {
    let templates = TemplateSet::builtin();
    let grammar = ParseGrammar::new(&templates);
    let file = std::fs::File::open(&args.input).with_context(|| format!("open {}", args.input.display()))?;
    let mut out: Box<dyn Write> = match &args.out {
        Some(p) => Box::new(std::fs::File::create(p).with_context(|| format!("create {}", p.display()))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut failed = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.context("read input")?;
        if line.trim().is_empty() {
            continue;
        }
        let record = match serde_json::from_str::<TextLine>(&line) {
            Ok(t) => match grammar.parse(&t.text) {
                Ok(program) => serde_json::json!({ "line": i + 1, "program": program }),
                Err(e) => serde_json::json!({ "line": i + 1, "error": e.to_string() }),
            },
            Err(e) => serde_json::json!({ "line": i + 1, "error": format!("bad input line: {e}") }),
        };
        if record.get("error").is_some() {
            failed.push(format!("line {}: {}", i + 1, record["error"].as_str().unwrap_or_default()));
        }
        writeln!(out, "{record}").context("write output")?;
    }
    out.flush().context("write output")?;
    if args.strict && !failed.is_empty() {
        return Err(Failure::Threshold(failed));
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let world: WorldState = read_json(&args.world).map_err(usage)?;
    let mut config = SceneConfig::default();
    if let Some(g) = args.gravity {
        config.gravity = g;
    }
    if let Some(n) = args.frames {
        config.n_frames = n;
    }
    if let Some(e) = args.restitution {
        config.restitution = e;
    }
    let generator = GeneratorConfig { counterfactuals: 0, scene: config.clone(), ..Default::default() };
    let scene = build_annotation(&args.scene_id, &world, &config, &generator).map_err(usage)?;
    let json = serde_json::to_string_pretty(&scene).context("serialize scene")?;
    write_file(&args.out, &(json + "\n"))?;
    println!("{} frames, {} collisions", scene.n_frames(), scene.collisions.len());
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<(), Failure> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("create {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Generate(a) => generate(a, cli.workers),
        Command::Estimate(a) => estimate(a, cli.workers),
        Command::Answer(a) => answer(a, cli.workers),
        Command::Eval(a) => eval(a),
        Command::Resimulate(a) => resim(a),
        Command::Parse(a) => parse(a),
        Command::Simulate(a) => simulate(a),
    }
}

// A closed stdout (`dynqa ... | head`) ends the process quietly instead of panicking.
fn quiet_broken_pipe() {
    let default = std::panic::take_hook();
    std::panic::set_hook(Box::new(move |info| {
        let msg = info
            .payload()
            .downcast_ref::<String>()
            .map(String::as_str)
            .or_else(|| info.payload().downcast_ref::<&str>().copied())
            .unwrap_or("");
        if msg.contains("Broken pipe") {
            std::process::exit(0);
        }
        default(info);
    }));
}

fn main() -> ExitCode {
    quiet_broken_pipe();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Threshold(lines)) => {
            for l in lines {
                eprintln!("below threshold: {l}");
            }
            ExitCode::from(EXIT_THRESHOLD)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
