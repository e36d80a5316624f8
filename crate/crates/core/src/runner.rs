//! Run and compare commands: execute scenarios and write their artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::interference::FeasibilityMode;
use crate::scenario::LoadedScenario;
use crate::sim::engine::{run_simulation, AllocatorChoice, RunOptions, SlotTrace};
use crate::sim::metrics::{compute_metrics, MetricsReport};
use crate::sim::report::{metrics_text, write_series_csv, write_trace_csv};

pub const TRACE_FILE: &str = "trace.csv";
pub const METRICS_FILE: &str = "metrics.toml";
pub const SERIES_FILE: &str = "series.csv";
pub const MANIFEST_FILE: &str = "manifest.toml";
pub const COMPARE_FILE: &str = "compare.csv";
pub const COMPARE_SUMMARY_FILE: &str = "compare_summary.toml";

/// Everything that determines a run's output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunManifest {
    pub scenario: String,
    pub scenario_hash: String,
    pub allocator: String,
    pub seed: u64,
    pub feasibility: String,
    pub horizon: u32,
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct RunRequest {
    pub allocator: String,
    /// Seed for the random allocator; defaults to the scenario seed.
    pub seed: Option<u64>,
    pub horizon: Option<u32>,
    pub mode: Option<FeasibilityMode>,
    pub strict: bool,
}

impl RunRequest {
    pub fn new(allocator: impl Into<String>) -> Self {
        RunRequest {
            allocator: allocator.into(),
            seed: None,
            horizon: None,
            mode: None,
            strict: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub trace: SlotTrace,
    pub report: MetricsReport,
}

fn execute(loaded: &LoadedScenario, req: &RunRequest) -> Result<RunOutcome> {
    let seed = req.seed.unwrap_or(loaded.scenario.seed);
    let choice = AllocatorChoice::parse(&req.allocator, seed)?;
    let mut scenario = loaded.scenario.clone();
    if let Some(mode) = req.mode {
        scenario.mode = mode;
    }
    let options = RunOptions {
        horizon: req.horizon,
        strict: req.strict,
    };
    let trace = run_simulation(&scenario, choice, options)?;
    let report = compute_metrics(&trace)?;
    let manifest = RunManifest {
        scenario: scenario.name.clone(),
        scenario_hash: loaded.hash.clone(),
        allocator: choice.name().to_string(),
        seed,
        feasibility: scenario.mode.as_str().to_string(),
        horizon: req.horizon.unwrap_or(scenario.horizon),
        strict: req.strict,
    };
    Ok(RunOutcome {
        manifest,
        trace,
        report,
    })
}

fn prepare_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: PathBuf) -> Result<(fs::File, PathBuf)> {
    let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    Ok((file, path))
}

fn write_text(path: PathBuf, text: &str) -> Result<()> {
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Runs one scenario and writes the trace, metrics, time series and manifest
/// into `out_dir`.
pub fn cmd_run(loaded: &LoadedScenario, req: &RunRequest, out_dir: &Path) -> Result<RunOutcome> {
    let outcome = execute(loaded, req)?;
    prepare_dir(out_dir)?;
    let (file, _) = create(out_dir.join(TRACE_FILE))?;
    write_trace_csv(&outcome.trace, std::io::BufWriter::new(file))?;
    let (file, _) = create(out_dir.join(SERIES_FILE))?;
    write_series_csv(&outcome.report, std::io::BufWriter::new(file))?;
    write_text(out_dir.join(METRICS_FILE), &metrics_text(&outcome.report)?)?;
    let manifest = toml::to_string(&outcome.manifest)
        .map_err(|e| Error::Config(format!("cannot serialize manifest: {e}")))?;
    write_text(out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(outcome)
}

/// One row of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareRow {
    pub allocator: String,
    pub seed: u64,
    pub moves: u32,
    pub moves_pal: u32,
    pub moves_gaa: u32,
    pub satisfaction: f64,
    pub interference_mean: f64,
    pub interference_max: f64,
    pub jain: f64,
    pub blocked: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocatorSummary {
    pub allocator: String,
    pub runs: usize,
    pub mean_moves: f64,
    pub mean_satisfaction: f64,
    pub mean_jain: f64,
}

/// Whether mean moves follow `random >= greedy >= mtc`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderingCheck {
    pub expected: String,
    pub holds: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub seeds: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ordering: Option<OrderingCheck>,
    pub summary: Vec<AllocatorSummary>,
    #[serde(skip)]
    pub rows: Vec<CompareRow>,
}

fn ordering_check(summary: &[AllocatorSummary]) -> Option<OrderingCheck> {
    let mean = |name: &str| summary.iter().find(|s| s.allocator == name).map(|s| s.mean_moves);
    let chain: Vec<(&str, f64)> = ["random", "greedy", "mtc"]
        .into_iter()
        .filter_map(|name| mean(name).map(|m| (name, m)))
        .collect();
    if chain.len() < 2 {
        return None;
    }
    let expected = chain.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(" >= ");
    let broken: Vec<String> = chain
        .windows(2)
        .filter(|w| w[0].1 < w[1].1)
        .map(|w| format!("{} ({}) < {} ({})", w[0].0, w[0].1, w[1].0, w[1].1))
        .collect();
    Some(OrderingCheck {
        expected,
        holds: broken.is_empty(),
        detail: if broken.is_empty() {
            "ok".to_string()
        } else {
            format!("ANOMALY: {}", broken.join("; "))
        },
    })
}

/// Runs every `(allocator, seed)` pair and tabulates their metrics.
pub fn compare(
    loaded: &LoadedScenario,
    allocators: &[String],
    seeds: &[u64],
    base: &RunRequest,
) -> Result<CompareReport> {
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    if allocators.is_empty() {
        return Err(Error::Config("compare needs at least one allocator".into()));
    }
    for name in allocators {
        AllocatorChoice::parse(name, 0)?;
    }
    let jobs: Vec<(String, u64)> = allocators
        .iter()
        .flat_map(|a| seeds.iter().map(move |s| (a.clone(), *s)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|(allocator, seed)| {
            let req = RunRequest {
                allocator: allocator.clone(),
                seed: Some(*seed),
                ..base.clone()
            };
            let m = execute(loaded, &req)?.report;
            Ok(CompareRow {
                allocator: allocator.clone(),
                seed: *seed,
                moves: m.moves_total,
                moves_pal: m.moves_pal,
                moves_gaa: m.moves_gaa,
                satisfaction: m.satisfaction,
                interference_mean: m.interference_mean,
                interference_max: m.interference_max,
                jain: m.jain_index,
                blocked: m.blocked_total,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let summary: Vec<AllocatorSummary> = allocators
        .iter()
        .map(|name| {
            let mine: Vec<&CompareRow> = rows.iter().filter(|r| &r.allocator == name).collect();
            let n = mine.len() as f64;
            AllocatorSummary {
                allocator: name.clone(),
                runs: mine.len(),
                mean_moves: mine.iter().map(|r| f64::from(r.moves)).sum::<f64>() / n,
                mean_satisfaction: mine.iter().map(|r| r.satisfaction).sum::<f64>() / n,
                mean_jain: mine.iter().map(|r| r.jain).sum::<f64>() / n,
            }
        })
        .collect();

    Ok(CompareReport {
        scenario: loaded.scenario.name.clone(),
        seeds: seeds.len(),
        ordering: ordering_check(&summary),
        summary,
        rows,
    })
}

/// [`compare`], writing the table and the summary into `out_dir`.
pub fn cmd_compare(
    loaded: &LoadedScenario,
    allocators: &[String],
    seeds: &[u64],
    base: &RunRequest,
    out_dir: &Path,
) -> Result<CompareReport> {
    let report = compare(loaded, allocators, seeds, base)?;
    prepare_dir(out_dir)?;
    let (file, _) = create(out_dir.join(COMPARE_FILE))?;
    let mut wtr = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in &report.rows {
        wtr.serialize(row)?;
    }
    wtr.flush().map_err(|e| Error::io(out_dir.join(COMPARE_FILE), e))?;
    let summary = toml::to_string(&report)
        .map_err(|e| Error::Config(format!("cannot serialize comparison: {e}")))?;
    write_text(out_dir.join(COMPARE_SUMMARY_FILE), &summary)?;
    Ok(report)
}

/// Parses `"0..100"`, `"5"` (a count, meaning `0..5`) or `"1,2,7"`.
pub fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let text = text.trim();
    let bad = || Error::Config(format!("cannot parse seed list `{text}`"));
    if text.is_empty() {
        return Err(Error::Config("seed list is empty".into()));
    }
    if let Some((a, b)) = text.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        let seeds: Vec<u64> = (a..b).collect();
        if seeds.is_empty() {
            return Err(Error::Config(format!("seed range `{text}` is empty")));
        }
        return Ok(seeds);
    }
    if text.contains(',') {
        return text
            .split(',')
            .map(|s| s.trim().parse().map_err(|_| bad()))
            .collect();
    }
    let count: u64 = text.parse().map_err(|_| bad())?;
    if count == 0 {
        return Err(Error::Config("seed count must be positive".into()));
    }
    Ok((0..count).collect())
}
