//! Command-line front end.
//!
//! Every run resolves a [`RunConfig`] (flags over config file over defaults),
//! writes its artifacts atomically, and leaves a JSON manifest holding the
//! resolved config, SHA-256 digests of inputs and artifacts, command results,
//! and timings. Failures print one JSON line to stderr; the exit code is 1 for
//! domain errors and 2 for usage or configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::artifact::{sha256_hex, write_atomic};
use crate::config::{Command, RunConfig};
use crate::data::{load_subsets, parse_table, render_table, Delimiter, Table};
use crate::error::{Error, Result};
use crate::evaluation::{evaluate, long_table, BinningPolicy};
use crate::orderer::{execute_plan, plan_order, ImputationPlan, PlanMode};
use crate::regressors::RegressorSpec;
use crate::roundrobin::{self, OrderDirection};
use crate::synth::{self, BlockTemplate, Mechanism, MissingnessConfig};

pub const EXIT_DOMAIN: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "rrimpute", version, about = "Round-robin imputation of numeric tables")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Impute one table with a single regression strategy.
    Impute {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        rr: RoundArgs,
    },
    /// Impute a wide table subset by subset, following an ordering plan.
    ImputePlan {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        rr: RoundArgs,
        #[arg(long)]
        subsets: Option<PathBuf>,
        /// Precomputed plan (JSON); derived from the subsets when omitted.
        #[arg(long)]
        plan: Option<PathBuf>,
        #[arg(long)]
        mode: Option<PlanMode>,
    },
    /// Order subsets for imputation and print or write the plan.
    Order {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        subsets: Option<PathBuf>,
        #[arg(long)]
        mode: Option<PlanMode>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare strategies by held-out relative error and KL divergence.
    Evaluate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, short)]
        input: Option<PathBuf>,
        /// Report path (JSON).
        #[arg(long, alias = "output", short)]
        out: Option<PathBuf>,
        /// Comma-separated strategy names.
        #[arg(long, value_delimiter = ',')]
        regressors: Option<Vec<String>>,
        /// Hyperparameter sweep `strategy:key=v1,v2`, added to the compared
        /// models; repeat to combine keys.
        #[arg(long = "grid")]
        grid: Vec<String>,
        #[arg(long, conflicts_with = "full_loo")]
        sample_per_variable: Option<usize>,
        /// Hold out every observed cell.
        #[arg(long)]
        full_loo: bool,
        /// `auto` or a fixed bin count.
        #[arg(long)]
        bins: Option<String>,
        /// Seed count for the stability analysis of tree models.
        #[arg(long)]
        seeds: Option<usize>,
        /// Long-format table of relative points.
        #[arg(long)]
        long_table: Option<PathBuf>,
        #[command(flatten)]
        rr: RoundArgs,
    },
    /// Generate a synthetic table and optionally mask it.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        /// Output directory.
        #[arg(long, alias = "output", short)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        latent_rank: Option<usize>,
        #[arg(long)]
        noise_sd: Option<f64>,
        #[arg(long)]
        offset: Option<f64>,
        /// `mcar`, `mar`, `block`, or `none`.
        #[arg(long)]
        mechanism: Option<String>,
        #[arg(long)]
        rate: Option<f64>,
        /// MAR driver column indices.
        #[arg(long, value_delimiter = ',')]
        drivers: Option<Vec<usize>>,
        #[arg(long)]
        slope: Option<f64>,
        /// BLOCK availability template (JSON).
        #[arg(long)]
        template: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// TOML config, or JSON config or run manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// Run manifest path.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `comma` or `tab`.
    #[arg(long)]
    delimiter: Option<String>,
    #[arg(long)]
    missing_token: Option<String>,
    /// Column holding participant identifiers.
    #[arg(long)]
    id_column: Option<String>,
}

#[derive(Debug, Args)]
struct IoArgs {
    #[arg(long, short)]
    input: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ModelArgs {
    #[arg(long)]
    regressor: Option<String>,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "param", value_parser = parse_pair)]
    params: Vec<(String, String)>,
}

#[derive(Debug, Args)]
struct RoundArgs {
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    order: Option<OrderDirection>,
    /// Comma-separated variables never used as predictors.
    #[arg(long, value_delimiter = ',')]
    exclude_predictors: Option<Vec<String>>,
}

fn parse_pair(s: &str) -> std::result::Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return 0;
        }
        Err(e) => {
            let message = e.to_string();
            let first = message.lines().next().unwrap_or("usage error");
            report_error("usage", first.trim_start_matches("error: "));
            return EXIT_USAGE;
        }
    };
    match resolve(cli).and_then(run) {
        Ok(()) => 0,
        Err(e) => {
            report_error(e.kind(), &e.to_string());
            match e {
                Error::Config(_) => EXIT_USAGE,
                _ => EXIT_DOMAIN,
            }
        }
    }
}

fn report_error(kind: &str, message: &str) {
    let line = serde_json::json!({ "error": kind, "message": message.replace('\n', " ") });
    eprintln!("{line}");
}

fn resolve(cli: Cli) -> Result<RunConfig> {
    let (command, common) = match &cli.command {
        Cmd::Impute { common, .. } => (Command::Impute, common),
        Cmd::ImputePlan { common, .. } => (Command::ImputePlan, common),
        Cmd::Order { common, .. } => (Command::Order, common),
        Cmd::Evaluate { common, .. } => (Command::Evaluate, common),
        Cmd::Simulate { common, .. } => (Command::Simulate, common),
    };
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.command = command;
    set(&mut cfg.seed, common.seed);
    if common.jobs.is_some() {
        cfg.jobs = common.jobs;
    }
    if common.manifest.is_some() {
        cfg.manifest = common.manifest.clone();
    }
    if let Some(d) = &common.delimiter {
        cfg.table.delimiter = match d.as_str() {
            "comma" | "," => Delimiter::Comma,
            "tab" | "\\t" => Delimiter::Tab,
            other => return Err(Error::Config(format!("unknown delimiter `{other}`"))),
        };
    }
    set(&mut cfg.table.missing_token, common.missing_token.clone());
    if common.id_column.is_some() {
        cfg.table.id_column = common.id_column.clone();
    }

    match cli.command {
        Cmd::Impute { io, model, rr, .. } => {
            apply_io(&mut cfg, io);
            apply_model(&mut cfg, model)?;
            apply_rounds(&mut cfg, rr);
        }
        Cmd::ImputePlan { io, model, rr, subsets, plan, mode, .. } => {
            apply_io(&mut cfg, io);
            apply_model(&mut cfg, model)?;
            apply_rounds(&mut cfg, rr);
            some(&mut cfg.plan.subsets, subsets);
            some(&mut cfg.plan.plan, plan);
            set(&mut cfg.plan.mode, mode);
        }
        Cmd::Order { subsets, mode, output, .. } => {
            some(&mut cfg.plan.subsets, subsets);
            set(&mut cfg.plan.mode, mode);
            some(&mut cfg.output, output);
        }
        Cmd::Evaluate {
            input,
            out,
            regressors,
            grid,
            sample_per_variable,
            full_loo,
            bins,
            seeds,
            long_table,
            rr,
            ..
        } => {
            some(&mut cfg.input, input);
            some(&mut cfg.output, out);
            if let Some(names) = regressors {
                cfg.evaluation.regressors =
                    names.iter().map(|n| RegressorSpec::named(n)).collect::<Result<_>>()?;
            }
            cfg.add_grid(&grid)?;
            if full_loo {
                cfg.evaluation.sample_per_variable = None;
            } else if sample_per_variable.is_some() {
                cfg.evaluation.sample_per_variable = sample_per_variable;
            }
            if let Some(b) = bins {
                cfg.evaluation.bins =
                    match b.as_str() {
                        "auto" => BinningPolicy::Auto,
                        n => BinningPolicy::Fixed(n.parse().map_err(|_| {
                            Error::Config(format!("bins must be `auto` or a count, got `{n}`"))
                        })?),
                    };
            }
            if seeds.is_some() {
                cfg.evaluation.seeds = seeds;
            }
            some(&mut cfg.evaluation.long_table, long_table);
            apply_rounds(&mut cfg, rr);
        }
        Cmd::Simulate {
            out_dir,
            n,
            p,
            latent_rank,
            noise_sd,
            offset,
            mechanism,
            rate,
            drivers,
            slope,
            template,
            ..
        } => {
            some(&mut cfg.output, out_dir);
            let s = &mut cfg.simulate.synth;
            set(&mut s.n, n);
            set(&mut s.p, p);
            set(&mut s.latent_rank, latent_rank);
            set(&mut s.noise_sd, noise_sd);
            set(&mut s.offset, offset);
            if let Some(m) = mechanism {
                let rate = rate.ok_or_else(|| Error::Config("--mechanism needs --rate".into()))?;
                let mechanism = match m.as_str() {
                    "none" => None,
                    "mcar" => Some(Mechanism::Mcar { rate }),
                    "mar" => Some(Mechanism::Mar {
                        rate,
                        drivers: drivers.ok_or_else(|| Error::Config("mar needs --drivers".into()))?,
                        slope: slope.unwrap_or(1.5),
                    }),
                    "block" => {
                        let path = template.ok_or_else(|| Error::Config("block needs --template".into()))?;
                        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                        let template: BlockTemplate = serde_json::from_str(&text)
                            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
                        Some(Mechanism::Block { rate, template })
                    }
                    other => return Err(Error::Config(format!("unknown mechanism `{other}`"))),
                };
                cfg.simulate.missingness =
                    mechanism.map(|mechanism| MissingnessConfig { mechanism, seed: 0 });
            } else if rate.is_some() || drivers.is_some() || template.is_some() || slope.is_some() {
                return Err(Error::Config("missingness flags need --mechanism".into()));
            }
        }
    }
    cfg.finish()
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn some<T>(slot: &mut Option<T>, value: Option<T>) {
    if value.is_some() {
        *slot = value;
    }
}

fn apply_io(cfg: &mut RunConfig, io: IoArgs) {
    some(&mut cfg.input, io.input);
    some(&mut cfg.output, io.output);
}

fn apply_model(cfg: &mut RunConfig, model: ModelArgs) -> Result<()> {
    let pairs: BTreeMap<String, String> = model.params.into_iter().collect();
    cfg.regressor = match model.regressor {
        Some(name) => RegressorSpec::from_pairs(&name, &pairs, cfg.seed)?,
        None => cfg.regressor.with_params(&pairs)?,
    };
    Ok(())
}

fn apply_rounds(cfg: &mut RunConfig, rr: RoundArgs) {
    set(&mut cfg.roundrobin.max_rounds, rr.max_rounds);
    set(&mut cfg.roundrobin.tol, rr.tol);
    set(&mut cfg.roundrobin.order, rr.order);
    set(&mut cfg.exclude_predictors, rr.exclude_predictors);
}

#[derive(Debug, Serialize)]
struct FileDigest {
    path: PathBuf,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Timings {
    started_unix_ms: u128,
    elapsed_ms: f64,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a RunConfig,
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
    result: serde_json::Value,
    /// The only member that differs between identical runs.
    timings: Timings,
}

/// Collects inputs and artifacts of one run.
#[derive(Default)]
struct Ledger {
    inputs: Vec<FileDigest>,
    artifacts: Vec<FileDigest>,
}

impl Ledger {
    fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        self.inputs.push(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(&bytes) });
        Ok(bytes)
    }

    fn write(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        write_atomic(path, bytes)?;
        self.artifacts.push(FileDigest { path: path.to_path_buf(), sha256: sha256_hex(bytes) });
        Ok(())
    }
}

fn required<'a>(value: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    value.as_deref().ok_or_else(|| Error::Config(format!("missing required --{flag}")))
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

fn run(cfg: RunConfig) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    let started = SystemTime::now();
    let clock = Instant::now();
    let mut ledger = Ledger::default();
    let result = pool.install(|| execute(&cfg, &mut ledger))?;
    let manifest = Manifest {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command: cfg.command.name(),
        config: &cfg,
        inputs: ledger.inputs,
        artifacts: ledger.artifacts,
        result,
        timings: Timings {
            started_unix_ms: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        },
    };
    if let Some(path) = cfg.manifest_path() {
        write_atomic(&path, &pretty(&manifest)?)?;
    }
    Ok(())
}

fn load_input(cfg: &RunConfig, ledger: &mut Ledger) -> Result<Table> {
    let path = required(&cfg.input, "input")?;
    let bytes = ledger.read(path)?;
    let text = String::from_utf8(bytes)
        .map_err(|_| Error::Schema(format!("{} is not valid UTF-8", path.display())))?;
    let mut table = parse_table(&text, &cfg.table)?;
    cfg.annotate(&mut table)?;
    Ok(table)
}

fn execute(cfg: &RunConfig, ledger: &mut Ledger) -> Result<serde_json::Value> {
    match cfg.command {
        Command::Impute => {
            let table = load_input(cfg, ledger)?;
            let output = required(&cfg.output, "output")?;
            let out = roundrobin::run(&table.data, &cfg.regressor, &table.vars, &cfg.roundrobin)?;
            let imputed = Table { data: out.imputed, ..table };
            ledger.write(output, &render_table(&imputed, &cfg.table)?)?;
            let order: Vec<&str> = out.order.iter().map(|&j| imputed.vars[j].name.as_str()).collect();
            Ok(serde_json::json!({
                "rounds_used": out.rounds_used,
                "per_round_delta": out.per_round_delta,
                "order": order,
                "seed": out.seed,
            }))
        }
        Command::ImputePlan => {
            let table = load_input(cfg, ledger)?;
            let output = required(&cfg.output, "output")?;
            let subsets = read_subsets(cfg, ledger)?;
            let plan: ImputationPlan = match &cfg.plan.plan {
                Some(path) => {
                    let bytes = ledger.read(path)?;
                    serde_json::from_slice(&bytes)?
                }
                None => plan_order(&subsets, cfg.plan.mode)?,
            };
            let outcome = execute_plan(&plan, &table, &subsets, &cfg.regressor, &cfg.roundrobin)?;
            ledger.write(output, &render_table(&outcome.table, &cfg.table)?)?;
            Ok(serde_json::json!({ "plan": plan, "steps": outcome.steps }))
        }
        Command::Order => {
            let subsets = read_subsets(cfg, ledger)?;
            let plan = plan_order(&subsets, cfg.plan.mode)?;
            let bytes = pretty(&plan)?;
            match &cfg.output {
                Some(path) => ledger.write(path, &bytes)?,
                None => print!("{}", String::from_utf8_lossy(&bytes)),
            }
            Ok(serde_json::json!({ "steps": plan.steps.len(), "score": plan.score }))
        }
        Command::Evaluate => {
            let table = load_input(cfg, ledger)?;
            let output = required(&cfg.output, "out")?;
            let report = evaluate(&table, &cfg.evaluation.regressors, &cfg.eval_settings())?;
            ledger.write(output, &pretty(&report)?)?;
            let long_path = cfg.evaluation.long_table.clone().unwrap_or_else(|| {
                let ext = match cfg.table.delimiter {
                    Delimiter::Comma => "plane.csv",
                    Delimiter::Tab => "plane.tsv",
                };
                output.with_extension(ext)
            });
            ledger.write(&long_path, &long_table(&report, cfg.table.delimiter.byte())?)?;
            let summary: BTreeMap<&str, _> =
                report.models.iter().map(|m| (m.model.as_str(), &m.summary)).collect();
            Ok(serde_json::to_value(summary)?)
        }
        Command::Simulate => {
            let dir = required(&cfg.output, "out-dir")?;
            let (complete, generator) = synth::generate(&cfg.simulate.synth)?;
            let format = &cfg.table;
            ledger.write(
                &dir.join(table_name("complete", format.delimiter)),
                &render_table(&complete, format)?,
            )?;
            let masked = match &cfg.simulate.missingness {
                Some(m) => Some(synth::apply_missingness(&complete.data, m)?),
                None => None,
            };
            if let Some(masked) = &masked {
                let table = Table { data: masked.data.clone(), ..complete.clone() };
                ledger.write(
                    &dir.join(table_name("masked", format.delimiter)),
                    &render_table(&table, format)?,
                )?;
            }
            let truth = serde_json::json!({
                "generator": generator,
                "missingness": cfg.simulate.missingness,
                "attempts": masked.as_ref().map(|m| m.attempts),
                "removed": masked.as_ref().map(|m| &m.removed),
            });
            ledger.write(&dir.join("ground_truth.json"), &pretty(&truth)?)?;
            Ok(serde_json::json!({
                "missing_cells": masked.as_ref().map_or(0, |m| m.removed.len()),
                "attempts": masked.as_ref().map(|m| m.attempts),
            }))
        }
    }
}

fn table_name(stem: &str, delimiter: Delimiter) -> String {
    match delimiter {
        Delimiter::Comma => format!("{stem}.csv"),
        Delimiter::Tab => format!("{stem}.tsv"),
    }
}

fn read_subsets(cfg: &RunConfig, ledger: &mut Ledger) -> Result<Vec<crate::data::SubsetSpec>> {
    let path = required(&cfg.plan.subsets, "subsets")?;
    ledger.read(path)?;
    load_subsets(path)
}
