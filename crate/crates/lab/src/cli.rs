//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use gamblers_core::catalog::{Catalog, CatalogError};
use gamblers_core::diagonalization::{build_delta, GapSpec};
use gamblers_core::finite::FiniteMartingale;
use gamblers_core::fireworks::{
    fireworks_run, generic_martingale, Enumerator, FireworksParams, MartingaleOrder, PrefixOrder,
};
use gamblers_core::martingale::{assess_success, play_bits, Budget, EvalOutcome};
use gamblers_core::{BitString, Rat, StrategyProgram};
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

use crate::config::{load_catalog, ConfigError, RequirementsFile, SeparationConfig};
use crate::output::{emit, record, Format};
use crate::separation::{separation_experiment, SeparationError};
use crate::verify::{expand_selection, run_suite, Scale, SUITES};

#[derive(Debug, Parser)]
#[command(
    name = "gamblers",
    version,
    about = "Exact martingale games, diagonal sequences and randomized gamblers"
)]
pub struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Jsonl, global = true)]
    pub format: Format,
    /// Output file; stdout when absent.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Master seed; 0 by default, or the config's seed for `separation`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Catalog file, or the experiment config for `separation`.
    #[arg(long, global = true, visible_alias = "catalog")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run invariant suites; exit 2 if any fails.
    Verify {
        /// Suites or module names to run (repeatable); all when absent.
        #[arg(long = "suite")]
        suites: Vec<String>,
        #[arg(long, value_enum, default_value_t = Scale::Quick)]
        scale: Scale,
    },
    /// Build a prefix of Δ.
    Delta {
        #[command(subcommand)]
        action: DeltaAction,
    },
    /// Run the fireworks protocol.
    Fireworks {
        #[command(subcommand)]
        action: FireworksAction,
    },
    /// Play a strategy against a sequence and emit its capital trajectory.
    Duel(DuelArgs),
    /// Run the separation experiment.
    Separation,
}

#[derive(Debug, Subcommand)]
pub enum DeltaAction {
    Build {
        #[arg(long)]
        depth: usize,
        /// Gap function: `const:N`, `linear:A,B` or `table:T0,T1,…`.
        #[arg(long, default_value = "linear:4,8")]
        gap: GapSpec,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderKind {
    Martingale,
    Prefix,
}

#[derive(Debug, Subcommand)]
pub enum FireworksAction {
    Run {
        #[arg(long)]
        requirements: PathBuf,
        #[arg(long, value_enum, default_value_t = OrderKind::Martingale)]
        order: OrderKind,
        #[arg(long, default_value_t = 64)]
        rounds: usize,
    },
}

#[derive(Debug, Args)]
pub struct DuelArgs {
    /// Catalog strategy id.
    #[arg(long, conflicts_with = "fireworks_seed", required_unless_present = "fireworks_seed")]
    pub strategy: Option<String>,
    /// Use the generic martingale of this fireworks run instead.
    #[arg(long, requires = "requirements")]
    pub fireworks_seed: Option<u64>,
    #[arg(long)]
    pub requirements: Option<PathBuf>,
    #[arg(long, default_value_t = 64)]
    pub rounds: usize,
    /// Catalog sequence id.
    #[arg(long, conflicts_with = "delta", required_unless_present = "delta")]
    pub sequence: Option<String>,
    /// JSONL file holding a `delta` record.
    #[arg(long)]
    pub delta: Option<PathBuf>,
    #[arg(long)]
    pub depth: usize,
    /// Step budget for the whole play.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Capital threshold for the success summary.
    #[arg(long, default_value = "2")]
    pub target: Rat,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failure(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Failure(_) => 2,
        }
    }
}

impl From<CatalogError> for CliError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::Unknown(_) => CliError::Usage(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Catalog(c) => c.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<SeparationError> for CliError {
    fn from(e: SeparationError) -> Self {
        match e {
            SeparationError::Config(c) => c.into(),
            other => CliError::Failure(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failure(e.to_string())
    }
}

/// Outcome of a command: records to emit and whether an invariant failed.
struct Output {
    records: Vec<Value>,
    failed: Option<String>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let out = match &cli.command {
        Command::Verify { suites, scale } => verify(&cli, suites, *scale)?,
        Command::Delta {
            action: DeltaAction::Build { depth, gap },
        } => delta(&cli, *depth, gap)?,
        Command::Fireworks {
            action:
                FireworksAction::Run {
                    requirements,
                    order,
                    rounds,
                },
        } => fireworks(&cli, requirements, *order, *rounds)?,
        Command::Duel(args) => duel(&cli, args)?,
        Command::Separation => separation(&cli)?,
    };
    emit(&out.records, cli.format, cli.out.as_deref())?;
    match out.failed {
        Some(msg) => Err(CliError::Failure(msg)),
        None => Ok(()),
    }
}

fn catalog(cli: &Cli) -> Result<Catalog, CliError> {
    Ok(load_catalog(cli.config.as_deref())?)
}

fn verify(cli: &Cli, suites: &[String], scale: Scale) -> Result<Output, CliError> {
    let catalog = catalog(cli)?;
    let names: Vec<String> = if suites.is_empty() {
        SUITES.iter().map(|s| s.to_string()).collect()
    } else {
        expand_selection(suites)
    };
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for name in &names {
        let r = run_suite(name, &catalog, scale, cli.seed.unwrap_or(0)).map_err(|e| CliError::Usage(e.to_string()))?;
        if !r.passed {
            failed.push(r.suite.clone());
        }
        records.push(record("suite", &r));
    }
    Ok(Output {
        records,
        failed: (!failed.is_empty()).then(|| format!("failed suites: {}", failed.join(", "))),
    })
}

fn delta(cli: &Cli, depth: usize, gap: &GapSpec) -> Result<Output, CliError> {
    let catalog = catalog(cli)?;
    let d = build_delta(gap, &catalog.strategies, depth).map_err(|e| CliError::Failure(e.to_string()))?;
    #[derive(Serialize)]
    struct DeltaLine<'a> {
        length: usize,
        bits: String,
        gap: String,
        family: &'a [(String, Rat)],
        registry: &'a [String],
    }
    let mut records: Vec<Value> = d.stages.iter().map(|s| record("stage", s)).collect();
    records.push(record(
        "delta",
        &DeltaLine {
            length: d.bits.len(),
            bits: d.bits.to_string(),
            gap: gap.to_string(),
            family: &d.family,
            registry: &d.registry_ids,
        },
    ));
    Ok(Output { records, failed: None })
}

fn run_records<C: Serialize>(
    run: &gamblers_core::fireworks::FireworksRun<C>,
    length: impl Fn(&C) -> usize,
) -> Vec<Value> {
    #[derive(Serialize)]
    struct Link<'a, C> {
        round: usize,
        step: gamblers_core::fireworks::ChainStep,
        length: usize,
        condition: &'a C,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        seed: u64,
        counters: &'a [u64],
        statuses: &'a [gamblers_core::fireworks::RequirementStatus],
        all_met: bool,
        final_length: usize,
    }
    let mut records: Vec<Value> = run
        .chain
        .iter()
        .map(|l| {
            record(
                "link",
                &Link {
                    round: l.round,
                    step: l.step,
                    length: length(&l.condition),
                    condition: &l.condition,
                },
            )
        })
        .collect();
    records.push(record(
        "run",
        &Summary {
            seed: run.seed,
            counters: &run.counters,
            statuses: &run.statuses,
            all_met: run.all_met(),
            final_length: length(run.final_condition()),
        },
    ));
    records
}

fn martingale_run(
    cli: &Cli,
    requirements: &Path,
    rounds: usize,
    seed: u64,
) -> Result<gamblers_core::fireworks::FireworksRun<FiniteMartingale>, CliError> {
    let file = RequirementsFile::load(requirements)?;
    let catalog = catalog(cli)?;
    let reqs = file.martingale_requirements(&catalog)?;
    let refs: Vec<&dyn Enumerator<FiniteMartingale>> = reqs.iter().map(|b| b.as_ref()).collect();
    let params = FireworksParams {
        thresholds: file.thresholds(),
        rounds,
        budget_growth: file.budget_growth,
    };
    fireworks_run(&MartingaleOrder, &refs, &params, seed).map_err(|e| CliError::Usage(e.to_string()))
}

fn fireworks(cli: &Cli, requirements: &Path, order: OrderKind, rounds: usize) -> Result<Output, CliError> {
    let records = match order {
        OrderKind::Martingale => run_records(
            &martingale_run(cli, requirements, rounds, cli.seed.unwrap_or(0))?,
            |c| c.length(),
        ),
        OrderKind::Prefix => {
            let file = RequirementsFile::load(requirements)?;
            let reqs = file.prefix_requirements()?;
            let refs: Vec<&dyn Enumerator<BitString>> = reqs.iter().map(|b| b.as_ref()).collect();
            let params = FireworksParams {
                thresholds: file.thresholds(),
                rounds,
                budget_growth: file.budget_growth,
            };
            let run = fireworks_run(&PrefixOrder, &refs, &params, cli.seed.unwrap_or(0))
                .map_err(|e| CliError::Usage(e.to_string()))?;
            run_records(&run, |c| c.len())
        }
    };
    Ok(Output { records, failed: None })
}

/// Reads the bits of the first `delta` record in a JSONL file.
pub fn read_delta(path: &Path) -> Result<BitString, CliError> {
    let text = std::fs::read_to_string(path)?;
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let v: Value = serde_json::from_str(line).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
        if v.get("record").and_then(Value::as_str) == Some("delta") {
            let bits = v.get("bits").and_then(Value::as_str).unwrap_or_default();
            return bits
                .parse()
                .map_err(|_| CliError::Usage(format!("{}: malformed bits", path.display())));
        }
    }
    Err(CliError::Usage(format!("{}: no delta record", path.display())))
}

fn duel(cli: &Cli, args: &DuelArgs) -> Result<Output, CliError> {
    let d: StrategyProgram = match (&args.strategy, args.fireworks_seed) {
        (Some(id), _) => catalog(cli)?.strategy(id)?,
        (None, Some(seed)) => {
            let path = args.requirements.as_deref().expect("clap enforces --requirements");
            generic_martingale(&martingale_run(cli, path, args.rounds, seed)?)
        }
        (None, None) => return Err(CliError::Usage("--strategy or --fireworks-seed is required".into())),
    };
    let (bits, seq_id) = match (&args.sequence, &args.delta) {
        (Some(id), _) => (catalog(cli)?.sequence(id)?.prefix(args.depth), id.clone()),
        (None, Some(path)) => {
            let b = read_delta(path)?;
            if b.len() < args.depth {
                return Err(CliError::Usage(format!("delta has only {} bits", b.len())));
            }
            (b.prefix(args.depth), "delta".to_string())
        }
        (None, None) => return Err(CliError::Usage("--sequence or --delta is required".into())),
    };
    let budget = args.budget.map(Budget::steps).unwrap_or(Budget::UNLIMITED);
    let t = play_bits(&d, &bits, &seq_id, budget);
    #[derive(Serialize)]
    struct Point {
        length: usize,
        outcome: &'static str,
        value: Option<Rat>,
        approx: Option<f64>,
    }
    let mut records: Vec<Value> = t
        .values
        .iter()
        .enumerate()
        .map(|(length, v)| {
            let outcome = match v {
                EvalOutcome::Converged { .. } => "converged",
                EvalOutcome::Diverged => "diverged",
                EvalOutcome::OutOfBudget { .. } => "out_of_budget",
            };
            record(
                "capital",
                &Point {
                    length,
                    outcome,
                    value: v.value().cloned(),
                    approx: v.value().map(Rat::to_f64),
                },
            )
        })
        .collect();
    #[derive(Serialize)]
    struct Summary {
        strategy: String,
        sequence: String,
        depth: usize,
        max_capital: Option<Rat>,
        target: Rat,
        success: gamblers_core::martingale::Success,
    }
    records.push(record(
        "summary",
        &Summary {
            strategy: t.strategy_id.clone(),
            sequence: t.sequence_id.clone(),
            depth: t.depth,
            max_capital: t.max_converged().cloned(),
            target: args.target.clone(),
            success: assess_success(&t, &args.target),
        },
    ));
    Ok(Output { records, failed: None })
}

fn separation(cli: &Cli) -> Result<Output, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => SeparationConfig::load(p)?,
        None => SeparationConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.master_seed = s;
    }
    let report = separation_experiment(&cfg)?;
    let mut failed = Vec::new();
    if !report.catalog_bounded() {
        failed.push("a catalog strategy exceeds its bound on Δ");
    }
    if !report.thresholds_coherent() {
        failed.push("an estimated threshold is incoherent");
    }
    Ok(Output {
        records: report.records(),
        failed: (!failed.is_empty()).then(|| failed.join("; ")),
    })
}
