mod config;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use ebioc::cost::CostKind;
use ebioc::data::{gen_expert_demos, gen_expert_scenes, gen_scenarios, ingest_tracks, split, ScenarioSpec, ThetaPreset, Track};
use ebioc::eval::{corner_suite, evaluate, EvalReport};
use ebioc::features::{FeatureVector, N_FEATURES};
use ebioc::io::{read_jsonl_file, read_scenes, write_jsonl_file, Checkpoint, Record, CHECKPOINT_VERSION};
use ebioc::learning::{check_combination, predict, train_scenes, TrainConfig};
use ebioc::multiagent::predict_scenes;
use ebioc::rng::derive;
use ebioc::sampler::SolverKind;
use ebioc::types::{Demonstration, JointScene, Trajectory};
use log::info;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{load, EvalConfig, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ebioc", version, about = "Energy-based inverse optimal control pipelines")]
struct Cli {
    /// Master seed; every random stream is derived from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CostArg {
    Linear,
    Mlp,
    Cnn,
}

impl From<CostArg> for CostKind {
    fn from(c: CostArg) -> Self {
        match c {
            CostArg::Linear => CostKind::Linear,
            CostArg::Mlp => CostKind::Mlp,
            CostArg::Cnn => CostKind::Cnn,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SolverArg {
    Langevin,
    Gd,
    Ilqr,
}

impl From<SolverArg> for SolverKind {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::Langevin => SolverKind::Langevin,
            SolverArg::Gd => SolverKind::Gd,
            SolverArg::Ilqr => SolverKind::Ilqr,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Sweep {
    Steps,
    Stepsize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CoopSweep {
    On,
    Off,
    Both,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate scenarios and expert demonstrations under a known cost.
    GenData(GenDataArgs),
    /// Fit controls to position-only tracks.
    InferControls(InferArgs),
    /// Learn a cost from demonstrations.
    Train(TrainArgs),
    /// Synthesize trajectories from a checkpoint.
    Sample(SampleArgs),
    /// Score predictions against ground truth.
    Eval(EvalArgs),
    /// Run the scripted corner-case suite.
    Corner(CornerArgs),
    /// Sweep sampler step count or step size.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct GenDataArgs {
    /// Scenario ranges (TOML); overrides the `scenario` table of --config.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Preset name (lane_keeper, goal_seeker, defensive) or a JSON file with the weights.
    #[arg(long, default_value = "lane_keeper")]
    theta_star: String,
    #[arg(long)]
    out: PathBuf,
    /// Fraction kept in --out; the rest goes to --test-out.
    #[arg(long, requires = "test_out")]
    split: Option<f64>,
    #[arg(long)]
    test_out: Option<PathBuf>,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    tracks: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Per-track fit errors and rejections (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    cost: CostArg,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long, value_enum, default_value = "off")]
    coop: Toggle,
    #[arg(long, value_enum, default_value = "off")]
    multiagent: Toggle,
    #[arg(long)]
    out: PathBuf,
    /// Per-epoch training trace (JSONL).
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Samples per agent; defaults to `eval.samples`.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, value_delimiter = ',')]
    horizons: Option<Vec<f64>>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    report: PathBuf,
    /// Also write the horizon table as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct CornerArgs {
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long, value_enum)]
    solver: Option<SolverArg>,
    #[arg(long)]
    report: PathBuf,
    /// Control traces over solver iterations (CSV).
    #[arg(long)]
    trace_csv: Option<PathBuf>,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, value_enum)]
    sweep: Sweep,
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<f64>,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    cost: CostArg,
    #[arg(long, value_enum, default_value = "off")]
    coop: CoopSweep,
    #[arg(long)]
    out: PathBuf,
}

/// Training settings echoed into the checkpoint.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainEcho {
    cost: CostKind,
    coop: bool,
    multiagent: bool,
    seed: u64,
    train: TrainConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Prediction {
    samples: Vec<Trajectory>,
}

#[derive(Debug, Serialize)]
struct EvalOutput<'a> {
    config: &'a EvalConfig,
    report: &'a EvalReport,
}

#[derive(Debug, Serialize)]
struct IngestSummary<'a> {
    fit_rmse: &'a [f64],
    rejected: &'a [ebioc::data::Rejection],
}

fn write_json<T: Serialize>(v: &T, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn config_hash<T: Serialize>(v: &T) -> Result<String> {
    Ok(hex::encode(Sha256::digest(serde_json::to_vec(v)?)))
}

fn theta_star(arg: &str) -> Result<FeatureVector> {
    if let Ok(p) = arg.parse::<ThetaPreset>() {
        return Ok(p.theta());
    }
    let text = std::fs::read_to_string(arg).with_context(|| format!("'{arg}' is neither a preset nor a readable file"))?;
    let v: Vec<f64> = serde_json::from_str(&text)?;
    v.try_into().map_err(|v: Vec<f64>| anyhow::anyhow!("theta file has {} weights, expected {N_FEATURES}", v.len()))
}

fn flatten(scenes: &[JointScene]) -> Vec<Demonstration> {
    scenes.iter().flat_map(|s| s.agents.iter().cloned()).collect()
}

fn gen_data(a: &GenDataArgs, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let spec: ScenarioSpec = match &a.spec {
        Some(p) => load(Some(p))?,
        None => cfg.scenario.clone(),
    };
    let theta = theta_star(&a.theta_star)?;
    let scenarios = gen_scenarios(&spec, derive(seed, "data", &[0]))?;
    let records: Vec<Record> = if spec.agents > 1 {
        gen_expert_scenes(&scenarios, theta, &cfg.expert, derive(seed, "data", &[1]))?.into_iter().map(Record::Scene).collect()
    } else {
        gen_expert_demos(&scenarios, theta, &cfg.expert, derive(seed, "data", &[1]))?.into_iter().map(Record::Demo).collect()
    };
    info!("generated {} of {} scenes", records.len(), scenarios.len());
    match (a.split, &a.test_out) {
        (Some(r), Some(test_out)) => {
            let (train, test) = split(&records, r, derive(seed, "split", &[]))?;
            write_jsonl_file(&train, &a.out)?;
            write_jsonl_file(&test, test_out)?;
            info!("split {} train / {} test", train.len(), test.len());
        }
        _ => write_jsonl_file(&records, &a.out)?,
    }
    Ok(())
}

fn infer_controls(a: &InferArgs, cfg: &ExperimentConfig) -> Result<()> {
    let tracks: Vec<Track> = read_jsonl_file(&a.tracks)?;
    let rep = ingest_tracks(&tracks, &cfg.ingest)?;
    write_jsonl_file(&rep.demos, &a.out)?;
    if let Some(p) = &a.report {
        write_json(&IngestSummary { fit_rmse: &rep.fit_rmse, rejected: &rep.rejected }, p)?;
    }
    let mean = rep.fit_rmse.iter().sum::<f64>() / rep.fit_rmse.len().max(1) as f64;
    info!("ingested {} tracks, rejected {}, mean fit rmse {mean:.4} m", rep.demos.len(), rep.rejected.len());
    Ok(())
}

fn train(a: &TrainArgs, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let kind = CostKind::from(a.cost);
    let mut tcfg = cfg.train.clone();
    if let Some(s) = a.solver {
        tcfg.sampler.kind = s.into();
    }
    tcfg.seed = derive(seed, "train", &[]);
    check_combination(kind, tcfg.sampler.kind, 1)?;
    let mut scenes = read_scenes(&a.data)?;
    if !a.multiagent.on() {
        scenes = flatten(&scenes).into_iter().map(|d| JointScene::new(vec![d])).collect::<ebioc::Result<_>>()?;
    }
    let out = train_scenes(&scenes, kind, &tcfg, a.coop.on())?;
    if let Some(p) = &a.log {
        out.trace.write_jsonl(BufWriter::new(File::create(p)?))?;
    }
    let echo = TrainEcho { cost: kind, coop: a.coop.on(), multiagent: a.multiagent.on(), seed, train: tcfg };
    let ck = Checkpoint {
        version: CHECKPOINT_VERSION,
        cost: out.cost,
        generator: out.generator,
        config_hash: config_hash(&echo)?,
        config: serde_json::to_value(&echo)?,
    };
    ck.save(&a.out)?;
    if let Some(last) = out.trace.epochs.last() {
        info!(
            "trained {} epochs on {} scenes: max moment gap {:.4}, train rmse {:.3} m",
            out.trace.epochs.len(),
            scenes.len(),
            last.max_moment_gap,
            last.rmse_avg
        );
    }
    Ok(())
}

fn sample(a: &SampleArgs, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let echo: TrainEcho = serde_json::from_value(ck.config.clone()).context("checkpoint configuration")?;
    let mut sampler = echo.train.sampler.clone();
    if let Some(s) = a.solver {
        sampler.kind = s.into();
    }
    if let Some(l) = a.steps {
        sampler.steps = l;
    }
    check_combination(ck.cost.model.kind(), sampler.kind, 1)?;
    let m = a.samples.unwrap_or(cfg.eval.samples);
    let scenes = read_scenes(&a.data)?;
    let s = derive(seed, "sample", &[]);
    let per_agent: Vec<Vec<Trajectory>> = if echo.multiagent {
        predict_scenes(&ck.cost, ck.generator.as_ref(), &scenes, &sampler, &echo.train.dynamics, m, s)?.into_iter().flatten().collect()
    } else {
        predict(&ck.cost, ck.generator.as_ref(), &flatten(&scenes), &sampler, &echo.train.dynamics, m, s)?
    };
    let preds: Vec<Prediction> = per_agent.into_iter().map(|samples| Prediction { samples }).collect();
    write_jsonl_file(&preds, &a.out)?;
    info!("wrote {} x {m} samples", preds.len());
    Ok(())
}

fn eval(a: &EvalArgs, cfg: &ExperimentConfig) -> Result<()> {
    let mut ecfg = cfg.eval.clone();
    if let Some(h) = &a.horizons {
        ecfg.horizons = h.clone();
    }
    if let Some(r) = a.radius {
        ecfg.missing_radius = r;
    }
    let preds: Vec<Prediction> = read_jsonl_file(&a.pred)?;
    let gt = flatten(&read_scenes(&a.gt)?);
    if preds.len() != gt.len() {
        bail!("{} predictions for {} ground-truth agents", preds.len(), gt.len());
    }
    let Some(first) = gt.first() else { bail!("empty ground truth") };
    let samples: Vec<Vec<Trajectory>> = preds.into_iter().map(|p| p.samples).collect();
    let gts: Vec<Trajectory> = gt.iter().map(|d| d.expert.clone()).collect();
    let rep = evaluate(&samples, &gts, &ecfg.horizons, first.env.dt, ecfg.missing_radius)?;
    write_json(&EvalOutput { config: &ecfg, report: &rep }, &a.report)?;
    if let Some(p) = &a.csv {
        rep.write_csv(BufWriter::new(File::create(p)?))?;
    }
    for r in &rep.rows {
        info!("{:.1}s  avg {:.3} m  min {:.3} m", r.horizon_s, r.avg_rmse, r.min_rmse);
    }
    info!("missing rate {:.3}", rep.missing_rate);
    Ok(())
}

fn corner(a: &CornerArgs, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let ck = Checkpoint::load(&a.ckpt)?;
    let mut ccfg = cfg.corner.clone();
    if let Some(s) = a.solver {
        ccfg.sampler.kind = s.into();
    }
    check_combination(ck.cost.model.kind(), ccfg.sampler.kind, 1)?;
    let rep = corner_suite(&ck.cost, &ccfg, derive(seed, "corner", &[]))?;
    write_json(&rep, &a.report)?;
    if let Some(p) = &a.trace_csv {
        rep.write_trace_csv(BufWriter::new(File::create(p)?))?;
    }
    for r in &rep.results {
        match &r.error {
            Some(e) => info!("{:<16} FAILED TO SOLVE: {e}", r.name),
            None => info!("{:<16} {}", r.name, if r.passed { "pass" } else { "fail" }),
        }
    }
    info!("{}/{} corner cases pass", rep.passed, rep.total);
    Ok(())
}

fn ablate(a: &AblateArgs, cfg: &ExperimentConfig, seed: u64) -> Result<()> {
    let kind = CostKind::from(a.cost);
    let train_set = flatten(&read_scenes(&a.data)?);
    let test_set = flatten(&read_scenes(&a.test)?);
    let Some(first) = test_set.first() else { bail!("empty test set") };
    let gts: Vec<Trajectory> = test_set.iter().map(|d| d.expert.clone()).collect();
    let variants: &[bool] = match a.coop {
        CoopSweep::On => &[true],
        CoopSweep::Off => &[false],
        CoopSweep::Both => &[false, true],
    };
    let mut w = BufWriter::new(File::create(&a.out)?);
    writeln!(w, "sweep,value,generator,horizon,avg_rmse,min_rmse,missing_rate")?;
    let name = match a.sweep {
        Sweep::Steps => "steps",
        Sweep::Stepsize => "stepsize",
    };
    let scenes = train_set.iter().map(|d| JointScene::new(vec![d.clone()])).collect::<ebioc::Result<Vec<_>>>()?;
    for &v in &a.values {
        let mut tcfg = cfg.train.clone();
        tcfg.seed = derive(seed, "train", &[]);
        match a.sweep {
            Sweep::Steps => {
                if v < 1.0 || v.fract() != 0.0 {
                    bail!("step count {v} is not a positive integer");
                }
                tcfg.sampler.steps = v as usize;
            }
            Sweep::Stepsize => tcfg.sampler.step_size = v,
        }
        check_combination(kind, tcfg.sampler.kind, 1)?;
        for &coop in variants {
            let out = train_scenes(&scenes, kind, &tcfg, coop)?;
            let pred = predict(&out.cost, out.generator.as_ref(), &test_set, &tcfg.sampler, &tcfg.dynamics, cfg.eval.samples, derive(seed, "sample", &[]))?;
            let rep = evaluate(&pred, &gts, &cfg.eval.horizons, first.env.dt, cfg.eval.missing_radius)?;
            for r in &rep.rows {
                writeln!(w, "{name},{v},{},{},{},{},{}", if coop { "on" } else { "off" }, r.horizon_s, r.avg_rmse, r.min_rmse, rep.missing_rate)?;
            }
            let mean = rep.rows.iter().map(|r| r.avg_rmse).sum::<f64>() / rep.rows.len().max(1) as f64;
            info!("{name}={v} generator={coop}: mean avg rmse {mean:.3} m, missing {:.3}", rep.missing_rate);
        }
    }
    w.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.workers > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(cli.workers).build_global()?;
    }
    let cfg: ExperimentConfig = load(cli.config.as_deref())?;
    match &cli.cmd {
        Cmd::GenData(a) => gen_data(a, &cfg, cli.seed),
        Cmd::InferControls(a) => infer_controls(a, &cfg),
        Cmd::Train(a) => train(a, &cfg, cli.seed),
        Cmd::Sample(a) => sample(a, &cfg, cli.seed),
        Cmd::Eval(a) => eval(a, &cfg),
        Cmd::Corner(a) => corner(a, &cfg, cli.seed),
        Cmd::Ablate(a) => ablate(a, &cfg, cli.seed),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).format_timestamp(None).init();
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
