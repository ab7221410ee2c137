//! Command-line front end.
//!
//! Exit codes: 0 success, 1 other failure, 2 configuration error,
//! 3 missing input, 4 shape or compatibility error.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiment::{run_cells, score, scenario_cells, ablation_cells, train_single, Protocol};
use crate::metrics::Level;
use crate::network::NetworkParams;
use crate::ordinal::{LabelEncoding, OrdinalLevel};
use crate::predict::{frame_pairs, trace_rows};
use crate::synth::{load_csv, save_csv, Dataset};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_INPUT: i32 = 3;
pub const EXIT_INCOMPATIBLE: i32 = 4;

pub const SOURCE_CSV: &str = "source.csv";
pub const TARGET_CSV: &str = "target.csv";
pub const CHECKPOINT: &str = "checkpoint.txt";
pub const HISTORY_JSON: &str = "history.json";
pub const TRACE_CSV: &str = "trace.csv";
pub const ABLATION_CSV: &str = "ablation.csv";

#[derive(Debug, Parser)]
#[command(name = "wsdaor", version, about = "Weakly supervised domain adaptation with ordinal regression")]
pub struct Cli {
    /// Experiment configuration (TOML); defaults are used when omitted.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Seed for data generation, initialization and sampling.
    #[arg(long, global = true, value_name = "N")]
    pub seed: Option<u64>,
    /// Output directory (overrides `run.output`).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Metric level for reported scores.
    #[arg(long, global = true, value_enum, default_value = "frame")]
    pub level: LevelArg,
    /// Suppress progress messages.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LevelArg {
    Frame,
    Sequence,
}

impl From<LevelArg> for Level {
    fn from(l: LevelArg) -> Self {
        match l {
            LevelArg::Frame => Level::Frame,
            LevelArg::Sequence => Level::Sequence,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate source and target datasets as CSV.
    Generate,
    /// Train one model and write its checkpoint and loss history.
    Train {
        /// Dataset directory (overrides `run.dataset`).
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Score a checkpoint on the target sequences of a dataset.
    Evaluate {
        /// Checkpoint to score; defaults to the one in the output directory.
        #[arg(long, value_name = "PATH")]
        checkpoint: Option<PathBuf>,
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
    },
    /// Leave-one-subject-out comparison of pooling and encoding variants.
    Ablate {
        #[arg(long, value_name = "DIR")]
        data: Option<PathBuf>,
        /// Also compare the training scenarios.
        #[arg(long)]
        scenarios: bool,
    },
    /// Print the soft code of an ordinal label as JSON.
    Encode {
        #[arg(long)]
        label: usize,
        #[arg(long, default_value_t = crate::ordinal::DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long = "levels", short = 'k', default_value_t = crate::ordinal::DEFAULT_LEVELS)]
        levels: usize,
        /// Scale the code to sum to one.
        #[arg(long)]
        normalize: bool,
        /// Emit a one-hot code instead.
        #[arg(long, conflicts_with = "normalize")]
        one_hot: bool,
    },
}

/// Exit code for an error, per the contract in the module docs.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        Error::MissingInput(_) => EXIT_MISSING_INPUT,
        Error::ShapeMismatch { .. }
        | Error::BadTensor { .. }
        | Error::Incompatible(_)
        | Error::Checkpoint(_)
        | Error::Dataset(_)
        | Error::Csv(_) => EXIT_INCOMPATIBLE,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

struct Ctx {
    cfg: ExperimentConfig,
    level: Level,
    quiet: bool,
}

impl Ctx {
    fn say(&self, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("{}", msg.as_ref());
        }
    }

    fn out(&self) -> Result<&Path> {
        let dir = self.cfg.run.output.as_path();
        fs::create_dir_all(dir)?;
        Ok(dir)
    }

    fn data_dir<'a>(&'a self, flag: &'a Option<PathBuf>) -> &'a Path {
        flag.as_deref().unwrap_or_else(|| self.cfg.dataset_dir())
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(out) = &cli.out {
        cfg.run.output = out.clone();
    }
    Ok(cfg)
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Command::Encode {
        label,
        sigma,
        levels,
        normalize,
        one_hot,
    } = cli.command
    {
        return encode(label, sigma, levels, normalize, one_hot);
    }
    let ctx = Ctx {
        cfg: load_config(cli)?,
        level: cli.level.into(),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Generate => generate(&ctx),
        Command::Train { data } => train(&ctx, data),
        Command::Evaluate { checkpoint, data } => evaluate(&ctx, checkpoint, data, ctx.level),
        Command::Ablate { data, scenarios } => ablate(&ctx, data, *scenarios),
        Command::Encode { .. } => unreachable!("handled above"),
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Writes `<command>-manifest.json`; the timestamp lives only here.
fn write_manifest(ctx: &Ctx, command: &str, extra: serde_json::Value) -> Result<PathBuf> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let manifest = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": ctx.cfg.train.seed,
        "created_unix": created,
        "config": ctx.cfg,
        "details": extra,
    });
    let path = ctx.out()?.join(format!("{command}-manifest.json"));
    write_json(&path, &manifest)?;
    Ok(path)
}

pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    Ok(Dataset {
        source: load_csv(&dir.join(SOURCE_CSV))?,
        target: load_csv(&dir.join(TARGET_CSV))?,
    })
}

fn generate(ctx: &Ctx) -> Result<()> {
    let data = Dataset::generate(&ctx.cfg.domain).map_err(config_error("domain"))?;
    let out = ctx.out()?;
    save_csv(&out.join(SOURCE_CSV), &data.source)?;
    save_csv(&out.join(TARGET_CSV), &data.target)?;
    let rows = |s: &[crate::milbags::Sequence]| s.iter().map(|q| q.len()).sum::<usize>();
    write_manifest(
        ctx,
        "generate",
        json!({
            "files": [SOURCE_CSV, TARGET_CSV],
            "source_rows": rows(&data.source),
            "target_rows": rows(&data.target),
        }),
    )?;
    ctx.say(format!(
        "wrote {} source and {} target frames to {}",
        rows(&data.source),
        rows(&data.target),
        out.display()
    ));
    Ok(())
}

fn config_error(section: &'static str) -> impl Fn(Error) -> Error {
    move |e| match e {
        Error::InvalidArgument(m) => Error::Config(format!("[{section}] {m}")),
        other => other,
    }
}

fn train(ctx: &Ctx, data: &Option<PathBuf>) -> Result<()> {
    let dataset = load_dataset(ctx.data_dir(data))?;
    let cfg = &ctx.cfg;
    ctx.say(format!(
        "training {} model for {} epochs",
        cfg.experiment.da_mode.name(),
        cfg.train.epochs
    ));
    let (model, fold) = train_single(&cfg.experiment, &cfg.network, &cfg.train, &dataset)?;
    let out = ctx.out()?;
    fs::write(out.join(CHECKPOINT), model.params.to_checkpoint())?;
    write_json(&out.join(HISTORY_JSON), &model.history)?;
    write_manifest(
        ctx,
        "train",
        json!({
            "files": [CHECKPOINT, HISTORY_JSON],
            "train_subjects": fold.train,
            "validation_subject": fold.validation,
            "best_epoch": model.best_epoch,
            "epochs_run": model.history.len(),
        }),
    )?;
    if !ctx.quiet {
        let validation: Vec<_> = dataset
            .target
            .iter()
            .filter(|q| q.subject == fold.validation)
            .cloned()
            .collect();
        let (frame, sequence) = score(&model.params, &validation, &cfg.experiment)?;
        let report = if ctx.level == Level::Frame { frame } else { sequence };
        ctx.say(format!(
            "best epoch {} of {}; validation {} pcc {}; checkpoint in {}",
            model.best_epoch,
            model.history.len(),
            level_name(ctx.level),
            fmt_opt(report.pcc),
            out.display()
        ));
    }
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<NetworkParams> {
    let text = fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    NetworkParams::from_checkpoint(&text)
}

fn check_compatible(params: &NetworkParams, cfg: &ExperimentConfig, dataset: &Dataset) -> Result<()> {
    let net = &params.config;
    if net.levels != cfg.network.levels {
        return Err(Error::Incompatible(format!(
            "checkpoint has {} levels, config has {}",
            net.levels, cfg.network.levels
        )));
    }
    if net.input_dim != cfg.network.input_dim {
        return Err(Error::Incompatible(format!(
            "checkpoint expects {} input features, config has {}",
            net.input_dim, cfg.network.input_dim
        )));
    }
    if let Some(dim) = dataset.feature_dim() {
        params.check_input_dim(dim)?;
    }
    Ok(())
}

fn evaluate(ctx: &Ctx, checkpoint: &Option<PathBuf>, data: &Option<PathBuf>, level: Level) -> Result<()> {
    let ckpt = checkpoint
        .clone()
        .unwrap_or_else(|| ctx.cfg.run.output.join(CHECKPOINT));
    let params = load_checkpoint(&ckpt)?;
    let dataset = load_dataset(ctx.data_dir(data))?;
    check_compatible(&params, &ctx.cfg, &dataset)?;
    let report = evaluate_checkpoint(&params, &dataset, &ctx.cfg.experiment, level)?;
    let out = ctx.out()?;
    let metrics_file = format!("metrics-{}.json", level_name(level));
    write_json(&out.join(&metrics_file), &report)?;
    let mut w = csv::Writer::from_path(out.join(TRACE_CSV))?;
    for row in trace_rows(&frame_pairs(&params, &dataset.target)?) {
        w.serialize(row)?;
    }
    w.flush()?;
    write_manifest(
        ctx,
        "evaluate",
        json!({
            "files": [metrics_file, TRACE_CSV],
            "checkpoint": ckpt,
            "level": level_name(level),
        }),
    )?;
    ctx.say(format!(
        "{} level: pcc {} icc {} mae {:.4}",
        level_name(level),
        fmt_opt(report.pcc),
        fmt_opt(report.icc),
        report.mae
    ));
    Ok(())
}

/// Metrics of a checkpoint on every target sequence of `dataset`.
pub fn evaluate_checkpoint(
    params: &NetworkParams,
    dataset: &Dataset,
    protocol: &Protocol,
    level: Level,
) -> Result<crate::metrics::MetricsReport> {
    let (frame, sequence) = score(params, &dataset.target, protocol)?;
    Ok(match level {
        Level::Frame => frame,
        Level::Sequence => sequence,
    })
}

fn level_name(level: Level) -> &'static str {
    match level {
        Level::Frame => "frame",
        Level::Sequence => "sequence",
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

fn ablate(ctx: &Ctx, data: &Option<PathBuf>, scenarios: bool) -> Result<()> {
    let dataset = load_dataset(ctx.data_dir(data))?;
    let cfg = &ctx.cfg;
    let mut cells = ablation_cells(&cfg.experiment);
    if scenarios || cfg.run.scenarios {
        cells.extend(scenario_cells(&cfg.experiment));
    }
    ctx.say(format!("running {} cells", cells.len()));
    let rows = run_cells(&cells, &cfg.network, &cfg.train, &dataset)?;
    let out = ctx.out()?;
    let mut w = csv::Writer::from_path(out.join(ABLATION_CSV))?;
    for row in &rows {
        w.serialize(row)?;
        let pcc = if ctx.level == Level::Frame { row.frame_pcc } else { row.sequence_pcc };
        ctx.say(format!("{:<20} {} pcc {}", row.cell, level_name(ctx.level), fmt_opt(pcc)));
    }
    w.flush()?;
    let seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    assert!(seeds.windows(2).all(|w| w[0] == w[1]));
    write_manifest(
        ctx,
        "ablate",
        json!({
            "files": [ABLATION_CSV],
            "cells": cells.iter().map(|c| c.name.clone()).collect::<Vec<_>>(),
            "shared_seed": seeds.first(),
        }),
    )?;
    Ok(())
}

fn encode(label: usize, sigma: f64, levels: usize, normalize: bool, one_hot: bool) -> Result<()> {
    let encoding = if one_hot {
        LabelEncoding::OneHot
    } else if normalize {
        LabelEncoding::GaussianNormalized { sigma }
    } else {
        LabelEncoding::Gaussian { sigma }
    };
    let level = OrdinalLevel::new(label, levels).map_err(config_error("encode"))?;
    let code = encoding.encode(level).map_err(config_error("encode"))?;
    println!("{}", serde_json::to_string(&code)?);
    Ok(())
}
