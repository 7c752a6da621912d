//! `repsim` command line: batch runs with checks, and the exact oracle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::checks::{self, CheckKind, CheckResult, OracleCorpus};
use crate::metrics::log::Counters;
use crate::metrics::oracle::{exact_expected_loss, OracleError, OracleInstance};
use crate::metrics::regret::RegretReport;
use crate::metrics::report::write_csv_files;
use crate::sim::{run_audited, Audit, RunOutcome, ScenarioConfig};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "repsim", version, about = "Reputation-screened permissioned chain simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run a scenario for one or more seeds and evaluate checks.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// A count `n` (seeds `seed..seed+n` from the config) or a
        /// comma-separated list.
        #[arg(long)]
        seeds: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, value_delimiter = ',')]
        checks: Vec<CheckKind>,
        #[arg(long)]
        overwrite: bool,
    },
    /// Exact expected loss of a small instance.
    Oracle {
        #[arg(long)]
        instance: PathBuf,
    },
}

/// Everything `run` needs, after argument parsing.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub seeds: Vec<u64>,
    pub out: PathBuf,
    pub checks: Vec<CheckKind>,
    pub parallel: usize,
    pub overwrite: bool,
}

/// Parses `--seeds`: a bare number is a count, anything with a comma a list.
pub fn parse_seeds(arg: &str, base: u64) -> Result<Vec<u64>, String> {
    let arg = arg.trim();
    if arg.contains(',') {
        arg.split(',')
            .filter(|s| !s.trim().is_empty())
            .map(|s| s.trim().parse::<u64>().map_err(|e| format!("bad seed {s:?}: {e}")))
            .collect()
    } else {
        let n: u64 = arg.parse().map_err(|e| format!("bad seed count {arg:?}: {e}"))?;
        if n == 0 {
            return Err("seed count must be at least 1".into());
        }
        Ok((0..n).map(|i| base.wrapping_add(i)).collect())
    }
}

#[derive(Debug, Serialize)]
struct RunSummary<'a> {
    seed: u64,
    ledger_height: u64,
    transactions_on_chain: usize,
    median_latency: Option<f64>,
    valid_inclusion_rate: f64,
    reports: &'a [RegretReport],
    counters: &'a Counters,
    audit: &'a Audit,
}

#[derive(Debug, Serialize)]
struct Aggregate<'a> {
    config: &'a ScenarioConfig,
    seeds: &'a [u64],
    checks: &'a [CheckResult],
    runs: Vec<RunSummary<'a>>,
}

fn summarize<'a>(run: &'a RunOutcome, reports: &'a [RegretReport]) -> RunSummary<'a> {
    RunSummary {
        seed: run.seed,
        ledger_height: run.ledger.height(),
        transactions_on_chain: run.ledger.tx_count(),
        median_latency: run.log.median_latency(),
        valid_inclusion_rate: run.log.valid_inclusion_rate(),
        reports,
        counters: &run.log.counters,
        audit: &run.audit,
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), String> {
    let text = serde_json::to_string_pretty(value).map_err(|e| format!("serializing {}: {e}", path.display()))?;
    fs::write(path, text + "\n").map_err(|e| format!("writing {}: {e}", path.display()))
}

fn seed_dir(out: &Path, seed: u64) -> PathBuf {
    out.join(format!("seed-{seed}"))
}

fn existing_outputs(manifest: &RunManifest) -> Vec<PathBuf> {
    let mut paths = vec![manifest.out.join("summary.json")];
    for &seed in &manifest.seeds {
        let dir = seed_dir(&manifest.out, seed);
        paths.extend(["rounds.csv", "epochs.csv", "ledger.txt", "summary.json"].map(|f| dir.join(f)));
    }
    paths.retain(|p| p.exists());
    paths
}

pub fn cmd_run(manifest: &RunManifest, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let config = match ScenarioConfig::load(&manifest.config_path) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", manifest.config_path.display());
            return EXIT_USAGE;
        }
    };
    let existing = existing_outputs(manifest);
    if !existing.is_empty() && !manifest.overwrite {
        let _ = writeln!(
            err,
            "error: {} already exists; pass --overwrite to replace outputs",
            existing[0].display()
        );
        return EXIT_USAGE;
    }

    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(manifest.parallel.max(1))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: thread pool: {e}");
            return EXIT_USAGE;
        }
    };
    let results: Vec<_> = pool.install(|| {
        manifest
            .seeds
            .par_iter()
            .map(|&seed| run_audited(config.with_seed(seed)))
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    for r in results {
        match r {
            Ok(run) => runs.push(run),
            Err(e) => {
                let _ = writeln!(err, "error: {e}");
                return EXIT_USAGE;
            }
        }
    }
    runs.sort_by_key(|r| r.seed);
    let reports: Vec<(u64, Vec<RegretReport>)> = runs.iter().map(|r| (r.seed, checks::reports_for(r))).collect();

    let mut results = Vec::new();
    for &check in &manifest.checks {
        results.push(match check {
            CheckKind::RegretBound => checks::regret_bound(&reports),
            CheckKind::Scaling => checks::scaling(&reports),
            CheckKind::Properties => checks::properties(&config, &runs),
            CheckKind::OracleAgreement => checks::oracle_agreement(&OracleCorpus {
                seed: OracleCorpus::default().seed ^ manifest.seeds[0],
                ..OracleCorpus::default()
            }),
        });
    }

    if let Err(e) = write_outputs(manifest, &config, &runs, &reports, &results) {
        let _ = writeln!(err, "error: {e}");
        return EXIT_USAGE;
    }

    let mut status = EXIT_PASS;
    for r in &results {
        let _ = writeln!(out, "{}: {}", r.check, if r.passed { "pass" } else { "FAIL" });
        if !r.passed {
            status = EXIT_CHECK_FAILED;
            for f in r.failures.iter().take(20) {
                let _ = writeln!(err, "  {}: {f}", r.check);
            }
        }
    }
    let _ = writeln!(out, "wrote {} runs to {}", runs.len(), manifest.out.display());
    status
}

fn write_outputs(
    manifest: &RunManifest,
    config: &ScenarioConfig,
    runs: &[RunOutcome],
    reports: &[(u64, Vec<RegretReport>)],
    results: &[CheckResult],
) -> Result<(), String> {
    for (run, (_, rep)) in runs.iter().zip(reports) {
        let dir = seed_dir(&manifest.out, run.seed);
        fs::create_dir_all(&dir).map_err(|e| format!("creating {}: {e}", dir.display()))?;
        write_csv_files(&dir, &run.log, rep).map_err(|e| e.to_string())?;
        fs::write(dir.join("ledger.txt"), run.ledger.export_lines())
            .map_err(|e| format!("writing ledger for seed {}: {e}", run.seed))?;
        write_json(&dir.join("summary.json"), &summarize(run, rep))?;
    }
    let aggregate = Aggregate {
        config,
        seeds: &manifest.seeds,
        checks: results,
        runs: runs
            .iter()
            .zip(reports)
            .map(|(run, (_, rep))| summarize(run, rep))
            .collect(),
    };
    write_json(&manifest.out.join("summary.json"), &aggregate)
}

pub fn cmd_oracle(path: &Path, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let instance: OracleInstance = match fs::read_to_string(path)
        .map_err(|e| e.to_string())
        .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()))
    {
        Ok(i) => i,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", path.display());
            return EXIT_USAGE;
        }
    };
    let result = match exact_expected_loss(&instance) {
        Ok(r) => r,
        Err(e @ (OracleError::TooLarge { .. } | OracleError::Malformed(_))) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let _ = writeln!(out, "expected wasted verifications: {}", result.expected_wasted);
    let _ = writeln!(out, "L_T: {}", result.expected_loss);
    for (k, s) in result.expected_slot_losses.iter().enumerate() {
        let _ = writeln!(out, "S_T[{}]: {s}", k + 1);
    }
    let _ = writeln!(out, "S_T_min: {}", result.min_slot_loss);
    let _ = writeln!(out, "regret: {}", result.regret);
    let _ = writeln!(out, "bound: {}", result.bound);
    if result.regret > result.bound {
        let _ = writeln!(err, "bound violated: {} > {}", result.regret, result.bound);
        return EXIT_CHECK_FAILED;
    }
    EXIT_PASS
}

/// Parses arguments and dispatches. Returns the process exit code.
pub fn main_with_args<'a, I, T>(args: I, out: &'a mut dyn Write, err: &'a mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_PASS };
            let sink = if e.use_stderr() { err } else { out };
            let _ = write!(sink, "{}", e.render());
            return code;
        }
    };
    match cli.command {
        Command::Run {
            config,
            seeds,
            out: out_dir,
            parallel,
            checks,
            overwrite,
        } => {
            let base = match ScenarioConfig::load(&config) {
                Ok(c) => c.seed,
                Err(e) => {
                    let _ = writeln!(err, "error: {}: {e}", config.display());
                    return EXIT_USAGE;
                }
            };
            let seeds = match parse_seeds(&seeds, base) {
                Ok(s) => s,
                Err(e) => {
                    let _ = writeln!(err, "error: --seeds: {e}");
                    return EXIT_USAGE;
                }
            };
            let manifest = RunManifest {
                config_path: config,
                seeds,
                out: out_dir,
                checks,
                parallel,
                overwrite,
            };
            cmd_run(&manifest, out, err)
        }
        Command::Oracle { instance } => cmd_oracle(&instance, out, err),
    }
}
