mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use biars::bia::{build_group_precoders, DEFAULT_SLOT_CAP};
use biars::error::Error;
use biars::experiments::{run_experiment, scenario_dump, ExperimentKind, SCHEMA_VERSION};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const OUTPUT_ENV: &str = "BIARS_OUTPUT_DIR";

#[derive(Parser)]
#[command(name = "biars", version, about = "Coordinated laser-based optical wireless network simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// TOML config, or a manifest written by a previous run; built-in defaults if omitted.
    config: Option<PathBuf>,
    /// Override a config value, e.g. `--set experiment.snr.values=[10,20]`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check a config against the schema and the physical invariants.
    Validate(ConfigArgs),
    /// Run the configured experiments and write their tables.
    Run {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output directory (overrides the config, which overrides `BIARS_OUTPUT_DIR`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; all cores if omitted.
        #[arg(long)]
        threads: Option<usize>,
        /// Only run these experiments.
        #[arg(long = "only", value_name = "NAME")]
        only: Vec<String>,
        /// Drops per point for every experiment, e.g. `--drops 2` for a smoke run.
        #[arg(long)]
        drops: Option<usize>,
    },
    /// Print the structure of an alignment block as JSON.
    DumpBlock {
        #[arg(long)]
        aps: usize,
        #[arg(long)]
        groups: usize,
        #[arg(long, default_value_t = DEFAULT_SLOT_CAP)]
        slot_cap: u64,
    },
    /// Print a convergence trace as CSV.
    Trace {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Convergence experiment to run.
        #[arg(long, default_value = "convergence")]
        experiment: String,
        #[arg(long)]
        threads: Option<usize>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    schema_version: u32,
    tool: String,
    version: String,
    config_hash: String,
    seed: u64,
    overrides: Vec<String>,
    outputs: Vec<String>,
    config: RunConfig,
}

enum Failure {
    Config(anyhow::Error),
    Infeasible(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::Config { .. }) => Failure::Config(e),
            Some(Error::InfeasibleQos { .. }) => Failure::Infeasible(e),
            _ => Failure::Runtime(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(args) => validate(&args),
        Command::Run { cfg, out, threads, only, drops } => run(&cfg, out, threads, &only, drops),
        Command::DumpBlock { aps, groups, slot_cap } => dump_block(aps, groups, slot_cap),
        Command::Trace { cfg, experiment, threads } => trace(&cfg, &experiment, threads),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("config error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Infeasible(e)) => {
            eprintln!("infeasible: {e:#}");
            ExitCode::from(EXIT_INFEASIBLE)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

/// Reads a TOML config or the `config` field of a JSON manifest.
fn load(args: &ConfigArgs) -> std::result::Result<RunConfig, Failure> {
    let text = match &args.config {
        Some(p) => Some(std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(Failure::Config)?),
        None => None,
    };
    let cfg = match (&args.config, &text) {
        (Some(p), Some(t)) if p.extension().is_some_and(|e| e == "json") => {
            let m: Manifest = serde_json::from_str(t)
                .map_err(|e| config::config_error("<manifest>", e.to_string()))
                .map_err(Failure::Config)?;
            let base = toml::to_string(&m.config).context("re-encoding manifest").map_err(Failure::Runtime)?;
            RunConfig::resolve(Some(&base), &args.set)
        }
        _ => RunConfig::resolve(text.as_deref(), &args.set),
    }
    .map_err(Failure::Config)?;
    let errs = cfg.validate();
    if !errs.is_empty() {
        let msg = errs.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n  ");
        return Err(Failure::Config(anyhow::anyhow!("{} violation(s):\n  {msg}", errs.len())));
    }
    Ok(cfg)
}

fn validate(args: &ConfigArgs) -> std::result::Result<(), Failure> {
    let cfg = load(args)?;
    println!(
        "valid: {} APs, {} users, {} experiment(s), config hash {}",
        cfg.scenario.ap_count(),
        cfg.scenario.users,
        cfg.experiment.len(),
        cfg.hash()?
    );
    Ok(())
}

fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        b = b.num_threads(n.max(1));
    }
    Ok(b.build()?)
}

fn write(dir: &Path, name: &str, body: &str, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::write(dir.join(name), body).with_context(|| format!("writing {name}"))?;
    outputs.push(name.to_string());
    Ok(())
}

fn run(args: &ConfigArgs, out: Option<PathBuf>, threads: Option<usize>, only: &[String], drops: Option<usize>) -> std::result::Result<(), Failure> {
    let mut cfg = load(args)?;
    let mut overrides = args.set.clone();
    if let Some(d) = drops {
        if d == 0 {
            return Err(Failure::Config(config::config_error("--drops", "at least one drop required")));
        }
        cfg.experiment.values_mut().for_each(|e| e.drops = d);
        overrides.push(format!("--drops={d}"));
    }
    for name in only {
        if !cfg.experiment.contains_key(name) {
            return Err(Failure::Config(config::config_error("--only", format!("no experiment named `{name}`"))));
        }
    }
    let dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .or_else(|| std::env::var_os(OUTPUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("results"));
    std::fs::create_dir_all(&dir)
        .with_context(|| format!("creating {}", dir.display()))
        .map_err(Failure::Runtime)?;
    let ctx = cfg.context();
    let pool = pool(threads)?;
    let mut outputs = Vec::new();
    for (name, spec) in &cfg.experiment {
        if !only.is_empty() && !only.contains(name) {
            continue;
        }
        let table = pool.install(|| run_experiment(&ctx, spec)).map_err(|e| Failure::from(anyhow::Error::new(e)))?;
        write(&dir, &format!("{name}.csv"), &table.to_csv().map_err(anyhow::Error::new)?, &mut outputs)?;
        write(&dir, &format!("{name}.json"), &table.to_json().map_err(anyhow::Error::new)?, &mut outputs)?;
        println!("{name}: {} rows over {} drops", table.rows.len(), spec.drops);
        if spec.kind != ExperimentKind::Convergence {
            for r in table.rows.iter().filter(|r| r.metric == "sum_rate" || r.metric == "ber") {
                if Some(&r.axis) == spec.values.last() {
                    println!("  {:<14} {:>8} {:>10.4} ± {:.4}", r.scheme, r.metric, r.mean, r.stderr);
                }
            }
        }
    }
    let dump = scenario_dump(&ctx, cfg.scenario.users, None).map_err(|e| Failure::from(anyhow::Error::new(e)))?;
    write(&dir, "scenario.json", &serde_json::to_string_pretty(&dump).map_err(anyhow::Error::new)?, &mut outputs)?;
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: cfg.hash()?,
        seed: cfg.seed,
        overrides,
        outputs: outputs.clone(),
        config: cfg,
    };
    write(&dir, "manifest.json", &serde_json::to_string_pretty(&manifest).map_err(anyhow::Error::new)?, &mut outputs)?;
    println!("wrote {} files to {}", outputs.len(), dir.display());
    Ok(())
}

fn dump_block(aps: usize, groups: usize, slot_cap: u64) -> std::result::Result<(), Failure> {
    let block = build_group_precoders(aps, groups, slot_cap).map_err(|e| match e {
        Error::BlockTooLarge { .. } | Error::TooFewTransmitters(_) => Failure::Config(anyhow::Error::new(e)),
        e => Failure::from(anyhow::Error::new(e)),
    })?;
    println!("{}", serde_json::to_string_pretty(&block.report()).map_err(anyhow::Error::new)?);
    Ok(())
}

fn trace(args: &ConfigArgs, name: &str, threads: Option<usize>) -> std::result::Result<(), Failure> {
    let cfg = load(args)?;
    let spec = cfg
        .experiment
        .get(name)
        .ok_or_else(|| Failure::Config(config::config_error("--experiment", format!("no experiment named `{name}`"))))?;
    if spec.kind != ExperimentKind::Convergence {
        return Err(Failure::Config(config::config_error(
            &format!("experiment.{name}.kind"),
            "trace needs a convergence experiment",
        )));
    }
    let table = pool(threads)?
        .install(|| run_experiment(&cfg.context(), spec))
        .map_err(|e| Failure::from(anyhow::Error::new(e)))?;
    print!("{}", table.to_csv().map_err(anyhow::Error::new)?);
    Ok(())
}
