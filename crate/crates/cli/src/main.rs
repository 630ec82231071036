//! `gstkit`: design, simulate, fit, gauge-fix and score gate set experiments.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use gstkit::dataset::{DEFAULT_TEST_REPETITIONS, DEFAULT_TRAIN_REPETITIONS};
use gstkit::scoring::DEFAULT_EPSILON;
use gstkit::targets::{ideal_targets, noisy_targets, rotate_spam};
use gstkit::{
    gauge_optimize, germ_power_design, lgst_estimate, mle_estimate, run_demo, score,
    score_comparison, short_design, simulate_counts, standard_gate_set, test_design, DataSet,
    DemoConfig, ExperimentDesign, FiducialSet, GateSet, GaugeOptions, MleOptions, Role, Sequence,
};

#[derive(Parser)]
#[command(name = "gstkit", version, about = "Gate set tomography for a qubit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write an experiment design as JSON lines.
    Design(DesignArgs),
    /// Write a target or noisy qubit gate set.
    Targets(TargetArgs),
    /// Draw binomial counts for every sequence of a design.
    Simulate(SimulateArgs),
    /// Estimate a gate set from data.
    Fit(FitArgs),
    /// Gauge-fix an estimate against a target.
    GaugeOpt(GaugeArgs),
    /// Score estimates on held-out test data.
    Score(ScoreArgs),
    /// Run the full synthetic pipeline end to end.
    Demo(DemoArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DesignKind {
    /// SPAM plus fiducial, fiducial-pair and sandwich sequences.
    Lgst,
    /// The LGST design plus fiducial-wrapped germ powers.
    Germ,
    /// Partial sequences of repeated and random base sequences.
    Test,
}

#[derive(clap::Args)]
struct DesignArgs {
    #[arg(long, value_enum)]
    kind: DesignKind,
    /// Gate labels, comma separated.
    #[arg(long, default_value = "G1,G2,G3,G4")]
    gates: String,
    /// Fiducials, comma separated; gates within a fiducial joined by ':'.
    /// Defaults to one single-gate fiducial per gate.
    #[arg(long)]
    fiducials: Option<String>,
    #[arg(long, default_value = "2,4,8,16,32,64,128")]
    powers: String,
    /// Also emit a copy of every experiment with this gate appended.
    #[arg(long)]
    append: Option<String>,
    #[arg(long, default_value_t = 100)]
    length: usize,
    #[arg(long, default_value_t = 5)]
    num_random: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct TargetArgs {
    #[arg(long, default_value_t = 0.0)]
    over_rotation: f64,
    #[arg(long, default_value_t = 0.0)]
    depolarization: f64,
    /// Rotate preparation and measurement about y by this angle (radians).
    #[arg(long, default_value_t = 0.0)]
    spam_rotation: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct SimulateArgs {
    /// Gate set to simulate; the ideal targets when omitted.
    #[arg(long)]
    gateset: Option<PathBuf>,
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = DEFAULT_TRAIN_REPETITIONS)]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Standard,
    Lgst,
    Mle,
}

#[derive(clap::Args)]
struct FitArgs {
    #[arg(long, value_enum)]
    method: Method,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    design: PathBuf,
    /// Reference frame assumed by standard tomography; ideal targets when omitted.
    #[arg(long)]
    frame: Option<PathBuf>,
    /// Starting point for the likelihood fit; the LGST estimate when omitted.
    #[arg(long)]
    start: Option<PathBuf>,
    /// Gate labels to estimate; taken from the design when omitted.
    #[arg(long)]
    gates: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to write LGST diagnostics or the fit report.
    #[arg(long)]
    diagnostics: Option<PathBuf>,
    #[arg(long, default_value_t = gstkit::mle::DEFAULT_FLOOR)]
    floor: f64,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, default_value_t = gstkit::mle::DEFAULT_MAX_ITER)]
    max_iter: usize,
    #[arg(long, default_value_t = gstkit::mle::DEFAULT_DELTA)]
    delta: f64,
}

#[derive(clap::Args)]
struct GaugeArgs {
    #[arg(long)]
    estimate: PathBuf,
    /// Target gate set; ideal targets when omitted.
    #[arg(long)]
    target: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    spam_weight: f64,
    #[arg(long, default_value_t = 0)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(clap::Args)]
struct ScoreArgs {
    /// `name=path` of an estimate; repeatable.
    #[arg(long = "estimate", required = true)]
    estimates: Vec<String>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    design: PathBuf,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Full per-sequence reports as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Per-length curves as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(clap::Args)]
struct DemoArgs {
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value = "demo-out")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    over_rotation: f64,
    #[arg(long, default_value_t = 0.005)]
    depolarization: f64,
    #[arg(long, default_value_t = 0.0)]
    spam_rotation: f64,
    #[arg(long, default_value_t = DEFAULT_TRAIN_REPETITIONS)]
    n_train: u64,
    #[arg(long, default_value_t = DEFAULT_TEST_REPETITIONS)]
    n_test: u64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_owned)
        .collect()
}

fn parse_fiducials(raw: &str) -> Result<FiducialSet> {
    let seqs = raw
        .split(',')
        .map(|s| match s.trim() {
            "{}" => Sequence::empty(),
            s => Sequence::from_key(s),
        })
        .collect();
    Ok(FiducialSet::new(seqs)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_gate_set(path: &Path) -> Result<GateSet> {
    GateSet::load(path).with_context(|| format!("reading gate set {}", path.display()))
}

fn load_or_targets(path: Option<&PathBuf>) -> Result<GateSet> {
    path.map_or_else(|| Ok(ideal_targets()), |p| load_gate_set(p))
}

fn load_design(path: &Path) -> Result<ExperimentDesign> {
    ExperimentDesign::load(path).with_context(|| format!("reading design {}", path.display()))
}

fn load_data(path: &Path) -> Result<DataSet> {
    DataSet::load(path).with_context(|| format!("reading dataset {}", path.display()))
}

/// Gate labels with sandwich experiments in the design.
fn design_gates(design: &ExperimentDesign) -> Vec<String> {
    let mut labels: Vec<String> = design
        .with_role(Role::Sandwich)
        .filter(|e| !e.is_appended())
        .filter_map(|e| e.meta.get("gate").cloned())
        .collect();
    labels.sort();
    labels.dedup();
    labels
}

fn design(args: DesignArgs) -> Result<()> {
    let gates = split_list(&args.gates);
    let fids = match &args.fiducials {
        Some(raw) => parse_fiducials(raw)?,
        None => FiducialSet::from_labels(&gates)?,
    };
    let design = match args.kind {
        DesignKind::Lgst => short_design(&gates, &fids)?,
        DesignKind::Germ => {
            let powers = split_list(&args.powers)
                .iter()
                .map(|p| {
                    p.parse::<usize>()
                        .with_context(|| format!("bad power `{p}`"))
                })
                .collect::<Result<Vec<_>>>()?;
            germ_power_design(&gates, &fids, &powers, args.append.as_deref())?
        }
        DesignKind::Test => test_design(&gates, args.length, args.num_random, args.seed)?,
    };
    log::info!("design has {} experiments", design.len());
    write_output(args.out.as_deref(), &design.to_jsonl())
}

fn targets(args: TargetArgs) -> Result<()> {
    let mut gs = noisy_targets(args.over_rotation, args.depolarization);
    if args.spam_rotation != 0.0 {
        gs = rotate_spam(&gs, [0.0, 1.0, 0.0], args.spam_rotation);
    }
    write_output(args.out.as_deref(), &(gs.to_json() + "\n"))
}

fn simulate(args: SimulateArgs) -> Result<()> {
    let gs = load_or_targets(args.gateset.as_ref())?;
    let design = load_design(&args.design)?;
    let ds = simulate_counts(&gs, &design, args.n, args.seed)?;
    write_output(args.out.as_deref(), &ds.to_jsonl())
}

fn fit(args: FitArgs) -> Result<()> {
    let design = load_design(&args.design)?;
    let data = load_data(&args.data)?.restrict(&design)?;
    let gates = match &args.gates {
        Some(raw) => split_list(raw),
        None => design_gates(&design),
    };
    if gates.is_empty() {
        bail!("no gate labels given and the design has no sandwich experiments");
    }
    let (estimate, diagnostics) = match args.method {
        Method::Standard => {
            let frame = load_or_targets(args.frame.as_ref())?;
            (standard_gate_set(&data, &design, &frame, &gates)?, None)
        }
        Method::Lgst => {
            let (gs, inter) = lgst_estimate(&data, &design, &gates)?;
            (gs, Some(to_json(&inter.diagnostics())?))
        }
        Method::Mle => {
            let start = match &args.start {
                Some(p) => load_gate_set(p)?,
                None => lgst_estimate(&data, &design, &gates)?.0,
            };
            let opts = MleOptions {
                floor: args.floor,
                tol: args.tol,
                max_iter: args.max_iter,
                delta: args.delta,
            };
            let (gs, report) = mle_estimate(&start, &data, &opts)?;
            (gs, Some(to_json(&report)?))
        }
    };
    if let (Some(path), Some(text)) = (&args.diagnostics, &diagnostics) {
        write_output(Some(path), text)?;
    }
    write_output(args.out.as_deref(), &(estimate.to_json() + "\n"))
}

fn gauge_opt(args: GaugeArgs) -> Result<()> {
    let estimate = load_gate_set(&args.estimate)?;
    let target = load_or_targets(args.target.as_ref())?;
    let opts = GaugeOptions {
        spam_weight: args.spam_weight,
        restarts: args.restarts,
        seed: args.seed,
        ..GaugeOptions::default()
    };
    let fit = gauge_optimize(&estimate, &target, &opts)?;
    let report = to_json(&fit.report())?;
    match &args.report {
        Some(p) => write_output(Some(p), &report)?,
        None => eprint!("{report}"),
    }
    write_output(args.out.as_deref(), &(fit.gate_set.to_json() + "\n"))
}

fn score_cmd(args: ScoreArgs) -> Result<()> {
    let design = load_design(&args.design)?;
    let data = load_data(&args.data)?;
    let mut estimates = BTreeMap::new();
    for spec in &args.estimates {
        let (name, path) = spec
            .split_once('=')
            .with_context(|| format!("estimate `{spec}` is not of the form name=path"))?;
        estimates.insert(name.to_owned(), load_gate_set(Path::new(path))?);
    }
    let table = score_comparison(&estimates, &data, &design, args.epsilon)?;
    if let Some(out) = &args.out {
        let mut reports = BTreeMap::new();
        for (name, gs) in &estimates {
            reports.insert(name.clone(), score(gs, &data, &design, args.epsilon)?);
        }
        write_output(Some(out), &to_json(&reports)?)?;
    }
    if let Some(csv) = &args.csv {
        write_output(Some(csv), &table.to_csv())?;
    }
    print!("{}", table.to_text());
    Ok(())
}

fn demo(args: DemoArgs) -> Result<()> {
    let config = DemoConfig {
        seed: args.seed,
        over_rotation: args.over_rotation,
        depolarization: args.depolarization,
        spam_rotation: args.spam_rotation,
        n_train: args.n_train,
        n_test: args.n_test,
        epsilon: args.epsilon,
        ..DemoConfig::default()
    };
    let out = run_demo(&config)?;
    let dir = &args.out_dir;
    let file = |name: &str| Some(dir.join(name));
    write_output(file("truth.json").as_deref(), &(out.truth.to_json() + "\n"))?;
    write_output(
        file("design-short.jsonl").as_deref(),
        &out.short_design.to_jsonl(),
    )?;
    write_output(
        file("design-long.jsonl").as_deref(),
        &out.long_design.to_jsonl(),
    )?;
    write_output(
        file("design-test.jsonl").as_deref(),
        &out.test_design.to_jsonl(),
    )?;
    write_output(file("train.jsonl").as_deref(), &out.train_data.to_jsonl())?;
    write_output(file("test.jsonl").as_deref(), &out.test_data.to_jsonl())?;
    for (name, gs) in &out.estimates {
        let path = dir.join("estimates").join(format!("{name}.json"));
        write_output(Some(&path), &(gs.to_json() + "\n"))?;
    }
    write_output(file("scores.csv").as_deref(), &out.scores.to_csv())?;
    write_output(file("scores.txt").as_deref(), &out.scores.to_text())?;
    write_output(file("summary.json").as_deref(), &to_json(&out.summary())?)?;
    print!("{}", out.scores.to_text());
    println!("reports written to {}", dir.display());
    Ok(())
}

fn configure_threads() -> Result<()> {
    if let Ok(raw) = std::env::var("GSTKIT_THREADS") {
        let n: usize = raw
            .parse()
            .with_context(|| format!("GSTKIT_THREADS must be a positive integer, got `{raw}`"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    match cli.command {
        Command::Design(a) => design(a),
        Command::Targets(a) => targets(a),
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::GaugeOpt(a) => gauge_opt(a),
        Command::Score(a) => score_cmd(a),
        Command::Demo(a) => demo(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
