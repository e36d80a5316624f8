use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtc_core::interference::FeasibilityMode;
use mtc_core::runner::{cmd_compare, cmd_run, parse_seeds, RunRequest};
use mtc_core::scenario::{parse_scenario, LoadedScenario};
use mtc_core::sim::engine::AllocatorChoice;

/// Channel allocation simulator for domain-proxy managed CBRS networks.
#[derive(Debug, Parser)]
#[command(name = "mtc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one scenario with one allocator and write its artifacts.
    Run(RunArgs),
    /// Run several allocators over several seeds and tabulate their metrics.
    Compare(CompareArgs),
    /// Parse and validate a scenario without running it.
    Validate(ScenarioArg),
    /// Run the exhaustive minimum-move oracle next to MTC.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Feasibility {
    Literal,
    Mutual,
}

impl From<Feasibility> for FeasibilityMode {
    fn from(f: Feasibility) -> Self {
        match f {
            Feasibility::Literal => FeasibilityMode::Literal,
            Feasibility::Mutual => FeasibilityMode::Mutual,
        }
    }
}

#[derive(Debug, Args)]
struct ScenarioArg {
    /// Scenario file, or `builtin:fig2` / `builtin:fig2-churn`.
    #[arg(long)]
    scenario: String,
}

#[derive(Debug, Args)]
struct Common {
    #[command(flatten)]
    scenario: ScenarioArg,
    /// Override the scenario horizon.
    #[arg(long)]
    horizon: Option<u32>,
    /// Fail on the first slot with a constraint violation.
    #[arg(long)]
    strict: bool,
    /// Override the scenario feasibility mode.
    #[arg(long, value_enum)]
    feasibility: Option<Feasibility>,
    /// Output directory.
    #[arg(long, env = "MTC_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// One of mtc, greedy, random, oracle.
    #[arg(long, default_value = "mtc")]
    allocator: String,
    /// Seed for the random allocator (defaults to the scenario seed).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    common: Common,
    /// Comma-separated allocator names.
    #[arg(long, default_value = "mtc,greedy,random")]
    allocator: String,
    /// A count (`100`), a range (`0..100`) or a list (`1,5,9`).
    #[arg(long, default_value = "100")]
    seeds: String,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
}

impl Common {
    fn load(&self) -> Result<LoadedScenario> {
        parse_scenario(&self.scenario.scenario).with_context(|| format!("loading {}", self.scenario.scenario))
    }

    fn request(&self, allocator: &str, seed: Option<u64>) -> RunRequest {
        RunRequest {
            allocator: allocator.to_string(),
            seed,
            horizon: self.horizon,
            mode: self.feasibility.map(Into::into),
            strict: self.strict,
        }
    }
}

fn run(args: RunArgs) -> Result<()> {
    AllocatorChoice::parse(&args.allocator, 0)?;
    let loaded = args.common.load()?;
    let req = args.common.request(&args.allocator, args.seed);
    let outcome = cmd_run(&loaded, &req, &args.common.out)?;
    let m = &outcome.report;
    println!(
        "{} on {}: {} slots, {} moves ({} pal, {} gaa), satisfaction {:.4}, jain {:.4}, violations {}",
        m.allocator, m.scenario, m.slots, m.moves_total, m.moves_pal, m.moves_gaa, m.satisfaction, m.jain_index, m.violations
    );
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn compare(args: CompareArgs) -> Result<()> {
    let allocators: Vec<String> = args
        .allocator
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    if allocators.is_empty() {
        bail!("no allocator given");
    }
    for name in &allocators {
        AllocatorChoice::parse(name, 0)?;
    }
    let seeds = parse_seeds(&args.seeds)?;
    let loaded = args.common.load()?;
    let base = args.common.request("mtc", None);
    let report = cmd_compare(&loaded, &allocators, &seeds, &base, &args.common.out)?;
    println!("allocator,runs,mean_moves,mean_satisfaction,mean_jain");
    for s in &report.summary {
        println!("{},{},{},{},{}", s.allocator, s.runs, s.mean_moves, s.mean_satisfaction, s.mean_jain);
    }
    if let Some(check) = &report.ordering {
        println!("ordering {}: {}", check.expected, check.detail);
    }
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn validate(args: ScenarioArg) -> Result<()> {
    let loaded = parse_scenario(&args.scenario).with_context(|| format!("loading {}", args.scenario))?;
    let s = &loaded.scenario;
    println!(
        "{}: ok ({} channels, {} cbsds, {} events, horizon {}, sha256 {})",
        s.name,
        s.pool.total(),
        s.roster.len(),
        s.events.len(),
        s.horizon,
        loaded.hash
    );
    Ok(())
}

fn oracle(args: OracleArgs) -> Result<()> {
    let loaded = args.common.load()?;
    let oracle = cmd_run(&loaded, &args.common.request("oracle", None), &args.common.out.join("oracle"))?;
    let mtc = cmd_run(&loaded, &args.common.request("mtc", None), &args.common.out.join("mtc"))?;
    for (name, m) in [("oracle", &oracle.report), ("mtc", &mtc.report)] {
        println!(
            "{name}: moves {}, served {}/{}, violations {}",
            m.moves_total, m.served_total, m.demand_total, m.violations
        );
    }
    println!("wrote {}", args.common.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Compare(a) => compare(a),
        Command::Validate(a) => validate(a),
        Command::Oracle(a) => oracle(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
