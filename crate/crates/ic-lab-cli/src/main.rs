//! Experiment front end for the protocol simulation library.
//!
//! Parses a config (flags and/or a JSON file), sweeps the epsilon × budget
//! grid, runs one Monte Carlo ensemble per point, and writes one result row
//! per point as CSV or JSON — plus, optionally, one JSON-lines trace file
//! per session. Exit code 0 means every session completed and no protocol
//! invariant was violated; 1 signals a runtime failure or recorded
//! violations; 2 signals a usage error.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use serde::{Deserialize, Serialize};

use ic_lab::adversary::{parse_spec, AdversaryContext, AdversaryRegistry};
use ic_lab::channel::ChannelKind;
use ic_lab::ecc::{CodeParams, TripleCode};
use ic_lab::erasure::BlockParams;
use ic_lab::harness::{
    contract_fraction, monte_carlo_sessions, InputSource, Protocol, SessionConfig, SessionResult,
};

#[derive(Parser, Debug)]
#[command(
    name = "ic-lab",
    version,
    about = "Corruption-resilience experiments for the bit-flip exchange and erasure simulation protocols"
)]
struct Args {
    /// JSON file with the same fields as the flags; explicit flags override it.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Protocol to run: bitflip or erasure.
    #[arg(long)]
    protocol: Option<String>,
    /// Input length in bits (bitflip) or simulated transcript length n0 (erasure).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated resilience slack values to sweep.
    #[arg(long)]
    epsilon: Option<String>,
    /// Corruption strategy, NAME[:key=value,...].
    #[arg(long)]
    adversary: Option<String>,
    /// Comma-separated budget fractions to sweep; defaults to each epsilon's
    /// guarantee boundary.
    #[arg(long)]
    budget: Option<String>,
    /// Sessions per sweep point.
    #[arg(long)]
    trials: Option<u64>,
    /// Base seed; per-session seeds derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Write one JSON-lines trace file per session next to --out.
    #[arg(long)]
    trace: bool,
    /// Output file; stdout when omitted.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// Output format: csv or json.
    #[arg(long)]
    format: Option<String>,
}

/// The config-file mirror of the flags. Scalar or list is accepted wherever
/// a sweep axis makes sense.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileSpec {
    protocol: Option<String>,
    n: Option<usize>,
    epsilon: Option<OneOrMany>,
    adversary: Option<String>,
    budget: Option<OneOrMany>,
    trials: Option<u64>,
    seed: Option<u64>,
    trace: Option<bool>,
    out: Option<PathBuf>,
    format: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

impl OneOrMany {
    fn into_vec(self) -> Vec<f64> {
        match self {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
}

/// A validated experiment: one protocol and adversary, a sweep over
/// epsilon × budget, a fixed trial count and base seed.
#[derive(Debug)]
struct ExperimentSpec {
    protocol: Protocol,
    n: usize,
    epsilons: Vec<f64>,
    adversary_name: String,
    adversary_params: BTreeMap<String, String>,
    /// The raw NAME[:params] string, echoed in output rows.
    adversary_label: String,
    /// None sweeps each epsilon's own contract fraction.
    budgets: Option<Vec<f64>>,
    trials: u64,
    seed: u64,
    trace: bool,
    out: Option<PathBuf>,
    format: Format,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let spec = match build_spec(args) {
        Ok(spec) => spec,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    match run_experiment(&spec) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("error: protocol invariant violations were recorded");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn parse_f64_list(raw: &str, what: &str) -> Result<Vec<f64>, String> {
    let values: Result<Vec<f64>, _> = raw.split(',').map(|p| p.trim().parse::<f64>()).collect();
    match values {
        Ok(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("could not parse {what} list {raw:?} (want comma-separated numbers)")),
    }
}

/// Merges flags over the optional config file and validates everything that
/// can be checked before running.
fn build_spec(args: Args) -> Result<ExperimentSpec, String> {
    let file: FileSpec = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("could not read config {}: {e}", path.display()))?;
            serde_json::from_str(&text)
                .map_err(|e| format!("could not parse config {}: {e}", path.display()))?
        }
        None => FileSpec::default(),
    };

    let protocol: Protocol = args
        .protocol
        .or(file.protocol)
        .ok_or("missing --protocol (bitflip or erasure)")?
        .parse()
        .map_err(|e| format!("{e}"))?;
    let n = args.n.or(file.n).ok_or("missing --n")?;
    let epsilons = match (args.epsilon, file.epsilon) {
        (Some(raw), _) => parse_f64_list(&raw, "epsilon")?,
        (None, Some(v)) => v.into_vec(),
        (None, None) => return Err("missing --epsilon".to_string()),
    };
    if epsilons.is_empty() {
        return Err("the epsilon sweep axis is empty".to_string());
    }
    let budgets = match (args.budget, file.budget) {
        (Some(raw), _) => Some(parse_f64_list(&raw, "budget")?),
        (None, Some(v)) => Some(v.into_vec()),
        (None, None) => None,
    };
    let adversary_label = args.adversary.or(file.adversary).unwrap_or_else(|| "null".to_string());
    let (adversary_name, adversary_params) =
        parse_spec(&adversary_label).map_err(|e| format!("{e}"))?;
    let trials = args.trials.or(file.trials).unwrap_or(100);
    if trials == 0 {
        return Err("--trials must be at least 1".to_string());
    }
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let trace = args.trace || file.trace.unwrap_or(false);
    let out = args.out.or(file.out);
    let format = match args.format.or(file.format).as_deref() {
        None | Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => return Err(format!("unknown format {other:?} (expected csv or json)")),
    };

    match protocol {
        Protocol::BitFlip => {
            if n == 0 || n > 59 {
                return Err(format!("bitflip input length must be in 1..=59, got {n}"));
            }
            for &eps in &epsilons {
                if !(eps.is_finite() && 0.0 < eps && eps <= 0.1) {
                    return Err(format!(
                        "bitflip epsilon must lie in (0, 0.1], got {eps}; the code construction \
                         is defined for that range"
                    ));
                }
            }
        }
        Protocol::Erasure => {
            if n < 2 {
                return Err(format!("erasure transcript length n0 must be at least 2, got {n}"));
            }
            for &eps in &epsilons {
                if !(eps.is_finite() && eps > 0.0) {
                    return Err(format!("erasure epsilon must be positive, got {eps}"));
                }
                let inv = 1.0 / eps;
                if (inv - inv.round()).abs() > 1e-9 || inv.round() < 4.0 {
                    return Err(format!(
                        "erasure epsilon must satisfy 1/epsilon integer and >= 4, got {eps}"
                    ));
                }
            }
        }
    }
    if let Some(budgets) = &budgets {
        for &b in budgets {
            if !b.is_finite() || b > 1.0 {
                return Err(format!("budget fraction must be a number <= 1, got {b}"));
            }
        }
    }
    if trace && out.is_none() {
        return Err("--trace needs --out to derive the trace file names".to_string());
    }

    // instantiate the adversary once up front so a bad name or parameter is
    // a usage error, not a mid-run failure
    let registry = AdversaryRegistry::with_builtins();
    let probe = AdversaryContext {
        kind: match protocol {
            Protocol::BitFlip => ChannelKind::BitFlip,
            Protocol::Erasure => ChannelKind::Erasure,
        },
        params: &adversary_params,
        code: match protocol {
            Protocol::BitFlip => Some(Arc::new(
                TripleCode::new(
                    CodeParams::new(n + 1, epsilons[0], seed).map_err(|e| format!("{e}"))?,
                )
                .map_err(|e| format!("{e}"))?,
            )),
            Protocol::Erasure => None,
        },
        block: match protocol {
            Protocol::BitFlip => None,
            Protocol::Erasure => {
                Some(BlockParams::new(n, epsilons[0]).map_err(|e| format!("{e}"))?)
            }
        },
        seed,
    };
    registry.build(&adversary_name, &probe).map_err(|e| format!("{e}"))?;

    Ok(ExperimentSpec {
        protocol,
        n,
        epsilons,
        adversary_name,
        adversary_params,
        adversary_label,
        budgets,
        trials,
        seed,
        trace,
        out,
        format,
    })
}

#[derive(Debug, Serialize)]
struct ResultRow {
    protocol: String,
    n: usize,
    epsilon: f64,
    budget_fraction: f64,
    adversary: String,
    trials: u64,
    successes: u64,
    success_rate: f64,
    mean_spend: f64,
    invariant_violations: u64,
    seconds: f64,
}

const CSV_HEADER: &str = "protocol,n,epsilon,budget_fraction,adversary,trials,successes,\
                          success_rate,mean_spend,invariant_violations,seconds";

fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

impl ResultRow {
    fn to_csv(&self) -> String {
        format!(
            "{},{},{:.6},{:.6},{},{},{},{:.6},{:.6},{},{:.6}",
            self.protocol,
            self.n,
            self.epsilon,
            self.budget_fraction,
            csv_escape(&self.adversary),
            self.trials,
            self.successes,
            self.success_rate,
            self.mean_spend,
            self.invariant_violations,
            self.seconds,
        )
    }
}

/// Trace file path for one session: `{out-stem}.trace.{index}.jsonl` next
/// to the output file.
fn trace_path(out: &std::path::Path, index: u64) -> PathBuf {
    let stem = out.file_stem().unwrap_or_default().to_string_lossy();
    out.with_file_name(format!("{stem}.trace.{index}.jsonl"))
}

fn write_traces(
    out: &std::path::Path,
    first_index: u64,
    sessions: &[SessionResult],
) -> anyhow::Result<()> {
    for (offset, session) in sessions.iter().enumerate() {
        let path = trace_path(out, first_index + offset as u64);
        let mut text = String::new();
        for line in &session.trace {
            text.push_str(&serde_json::to_string(line)?);
            text.push('\n');
        }
        std::fs::write(&path, text)
            .with_context(|| format!("could not write trace {}", path.display()))?;
    }
    Ok(())
}

/// Runs the whole sweep. Returns whether every point finished with zero
/// invariant violations.
fn run_experiment(spec: &ExperimentSpec) -> anyhow::Result<bool> {
    let registry = AdversaryRegistry::with_builtins();
    let mut rows: Vec<ResultRow> = Vec::new();
    let mut session_counter: u64 = 0;
    let mut total_violations: u64 = 0;

    for &epsilon in &spec.epsilons {
        let contract = contract_fraction(spec.protocol, epsilon);
        let points = match &spec.budgets {
            Some(budgets) => budgets.clone(),
            None => vec![contract],
        };
        for budget_fraction in points {
            if budget_fraction < 0.0 {
                eprintln!(
                    "warning: budget fraction {budget_fraction:.6} is negative \
                     (the guarantee boundary is below zero at epsilon {epsilon}); \
                     the budget clamps to zero corruptions"
                );
            } else if budget_fraction > contract + 1e-12 {
                eprintln!(
                    "warning: budget fraction {budget_fraction:.6} exceeds the guaranteed \
                     {contract:.6} for epsilon {epsilon}; results are outside the contract"
                );
            }
            let config = SessionConfig {
                protocol: spec.protocol,
                n: spec.n,
                epsilon,
                adversary: spec.adversary_name.clone(),
                adversary_params: spec.adversary_params.clone(),
                budget_fraction,
                seed: spec.seed,
                trace: spec.trace,
            };
            let started = Instant::now();
            let (summary, sessions) =
                monte_carlo_sessions(&config, spec.trials, &InputSource::Random, &registry)?;
            let seconds = started.elapsed().as_secs_f64();
            if spec.trace {
                let out = spec.out.as_ref().expect("--trace requires --out");
                write_traces(out, session_counter, &sessions)?;
            }
            session_counter += spec.trials;
            total_violations += summary.invariant_violations();
            rows.push(ResultRow {
                protocol: spec.protocol.to_string(),
                n: spec.n,
                epsilon,
                budget_fraction,
                adversary: spec.adversary_label.clone(),
                trials: summary.trials,
                successes: summary.success_count,
                success_rate: summary.success_rate(),
                mean_spend: summary.mean_spend,
                invariant_violations: summary.invariant_violations(),
                seconds,
            });
        }
    }

    let mut output = String::new();
    match spec.format {
        Format::Csv => {
            output.push_str(CSV_HEADER);
            output.push('\n');
            for row in &rows {
                output.push_str(&row.to_csv());
                output.push('\n');
            }
        }
        Format::Json => {
            output.push_str(&serde_json::to_string_pretty(&rows)?);
            output.push('\n');
        }
    }
    match &spec.out {
        Some(path) => std::fs::write(path, output)
            .with_context(|| format!("could not write {}", path.display()))?,
        None => print!("{output}"),
    }
    Ok(total_violations == 0)
}
