//! `mapcache` command-line driver.
//!
//! Exit codes: 0 on success, 1 for usage errors, 2 for data errors. Error
//! messages go to stderr prefixed with `error:`.

mod commands;
mod input;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::input::TraceFormat;

#[derive(Parser, Debug)]
#[command(
    name = "mapcache",
    version,
    about = "LRU map-cache locality analysis and miss-rate modelling"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Locality statistics: rank_freq.csv, interref.csv, workingset.csv, summary.json.
    Stats(StatsArgs),
    /// Piecewise power-law fit of the rank-frequency curve.
    Fit(FitArgs),
    /// Synthetic IRM trace from a two-regime rank law.
    Synth(SynthArgs),
    /// Random permutation of a trace (keeps popularity, removes temporal correlation).
    Shuffle(ShuffleArgs),
    /// Exact LRU simulation at fixed cache sizes.
    Simulate(SimulateArgs),
    /// LRU miss-rate curve from one stack-distance pass.
    Curve(CurveArgs),
    /// Evaluate an analytic miss-rate model.
    Model(ModelArgs),
    /// Join an empirical curve with a model and report the log ratio.
    Compare(CompareArgs),
    /// Cache size at a fixed miss rate as the workload grows.
    Scaling(ScalingArgs),
}

#[derive(Args, Debug)]
struct TraceArgs {
    /// Object trace or packet trace.
    #[arg(long)]
    trace: PathBuf,
    /// Routing table (`a.b.c.d/len` per line); required for packet traces.
    #[arg(long)]
    rib: Option<PathBuf>,
    /// Keep more-specific prefixes instead of filtering them out.
    #[arg(long, requires = "rib")]
    no_filter: bool,
    #[arg(long, value_enum, default_value_t = TraceFormat::Auto)]
    format: TraceFormat,
    /// Report reference-count progress on stderr.
    #[arg(long)]
    progress: bool,
}

#[derive(Args, Debug)]
struct StatsArgs {
    #[command(flatten)]
    input: TraceArgs,
    /// Directory for the output files (created if missing).
    #[arg(long)]
    out_dir: PathBuf,
    /// Working-set windows as `lo:hi:steps` (log spaced); defaults to 1:N/10:40.
    #[arg(long)]
    windows: Option<Grid>,
}

#[derive(Args, Debug)]
struct FitArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u8).range(1..=3))]
    segments: u8,
    /// Inclusive rank range `lo:hi` to fit.
    #[arg(long)]
    rank_range: Option<Span>,
    /// Ranks with fewer references are dropped.
    #[arg(long, default_value_t = 5)]
    min_count: u64,
    /// Candidate breakpoints (ranks), comma separated.
    #[arg(long, value_delimiter = ',')]
    breaks: Option<Vec<f64>>,
    /// Fit JSON destination (stdout if omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write model parameters built from the fit (2 or 3 segments).
    #[arg(long)]
    model_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct LawArgs {
    /// Number of distinct objects D.
    #[arg(long)]
    objects: usize,
    /// Head (high-frequency) exponent.
    #[arg(long, required_unless_present = "uniform")]
    q: Option<f64>,
    /// Tail (low-frequency) exponent.
    #[arg(long, required_unless_present = "uniform")]
    r: Option<f64>,
    #[arg(long, required_unless_present = "uniform")]
    crossover_rank: Option<usize>,
    /// Equal popularity for every object.
    #[arg(long, conflicts_with_all = ["q", "r", "crossover_rank"])]
    uniform: bool,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[command(flatten)]
    law: LawArgs,
    /// Number of references N.
    #[arg(long)]
    refs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ShuffleArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    input: TraceArgs,
    /// Cache sizes, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    sizes: Vec<u64>,
    /// Exclude the first K references from the statistics.
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(id = "grid", required = true, multiple = false, args = ["sizes", "log_sizes"])]
struct SizeGrid {
    /// Cache sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<f64>>,
    /// Log-spaced sizes `lo:hi:steps`.
    #[arg(long)]
    log_sizes: Option<Grid>,
}

#[derive(Args, Debug)]
struct CurveArgs {
    #[command(flatten)]
    input: TraceArgs,
    #[command(flatten)]
    grid: SizeGrid,
    #[arg(long, default_value_t = 0)]
    warmup: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Parameter file (`{"model": "gzipf" | "three_region", ...}`).
    #[arg(long)]
    params: Option<PathBuf>,
    #[arg(long)]
    q: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    n_refs: Option<u64>,
    #[command(flatten)]
    grid: ModelGrid,
    /// Head-exponent grid `lo:hi:steps` for `--sensitivity`; defaults to
    /// 16 points spanning the valid range up to 1.95.
    #[arg(long)]
    exponent_grid: Option<Grid>,
    /// Keep r fixed while q varies (default: keep q - r fixed).
    #[arg(long)]
    pin_r: bool,
    /// Write the effective parameters here.
    #[arg(long)]
    save_params: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[group(id = "model_grid", required = true, multiple = false, args = ["sizes", "log_sizes", "sensitivity"])]
struct ModelGrid {
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<f64>>,
    #[arg(long)]
    log_sizes: Option<Grid>,
    /// Cache size needed for this miss rate as the head exponent varies;
    /// writes `exponent,size` rows instead of a miss-rate curve.
    #[arg(long)]
    sensitivity: Option<f64>,
}

#[derive(Args, Debug)]
struct CompareArgs {
    /// Empirical `size,miss_rate` CSV.
    #[arg(long)]
    empirical: PathBuf,
    /// Model parameter JSON.
    #[arg(long)]
    model: PathBuf,
    /// Smallest size included in the summary statistic.
    #[arg(long, default_value_t = 1.0)]
    s_min: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[command(flatten)]
    law: LawArgs,
    /// Base number of references.
    #[arg(long)]
    refs: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Multipliers applied to N, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    factors: Vec<f64>,
    /// Also scale D and the crossover rank by each factor.
    #[arg(long)]
    scale_objects: bool,
    #[arg(long, default_value_t = 0.05)]
    target_miss_rate: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// `lo:hi:steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Grid {
    lo: f64,
    hi: f64,
    steps: usize,
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, steps] = parts[..] else {
            return Err(format!("expected lo:hi:steps, got {s:?}"));
        };
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let g = Grid {
            lo: num(lo)?,
            hi: num(hi)?,
            steps: steps
                .trim()
                .parse()
                .map_err(|e| format!("{steps:?}: {e}"))?,
        };
        if !(g.lo > 0.0 && g.hi >= g.lo && g.hi.is_finite() && g.steps > 0) {
            return Err(format!("need 0 < lo <= hi and steps > 0, got {s:?}"));
        }
        Ok(g)
    }
}

/// `lo:hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Span {
    lo: f64,
    hi: f64,
}

impl FromStr for Span {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| format!("expected lo:hi, got {s:?}"))?;
        let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
        let span = Span {
            lo: num(lo)?,
            hi: num(hi)?,
        };
        if span.lo > span.hi || span.lo.is_nan() || span.hi.is_nan() {
            return Err(format!("empty range {s:?}"));
        }
        Ok(span)
    }
}

/// An error caused by the invocation rather than the data.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<UsageError>()) {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

/// A closed stdout (e.g. piping into `head`) is not an error.
fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        let io = c
            .downcast_ref::<std::io::Error>()
            .or(match c.downcast_ref::<mapcache::Error>() {
                Some(mapcache::Error::Io(io)) => Some(io),
                _ => None,
            });
        io.is_some_and(|io| io.kind() == std::io::ErrorKind::BrokenPipe)
    })
}

#[cfg(test)]
mod tests {
    use clap::CommandFactory;

    use super::*;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(
            "1:1000:20".parse::<Grid>(),
            Ok(Grid {
                lo: 1.0,
                hi: 1000.0,
                steps: 20
            })
        );
        assert!("1:1000".parse::<Grid>().is_err());
        assert!("0:10:5".parse::<Grid>().is_err());
        assert!("10:1:5".parse::<Grid>().is_err());
        assert!("1:10:0".parse::<Grid>().is_err());
    }

    #[test]
    fn span_parsing() {
        assert_eq!("1:300".parse::<Span>(), Ok(Span { lo: 1.0, hi: 300.0 }));
        assert!("300:1".parse::<Span>().is_err());
        assert!("x:1".parse::<Span>().is_err());
    }
}
