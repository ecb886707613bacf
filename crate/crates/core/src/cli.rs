//! Command implementations behind the `diqkd` binary.
//!
//! JSON results go to stdout (or `--out`) wrapped as
//! `{"manifest": {...}, "result": ...}`. CSV files get a sidecar
//! `<file>.manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::boxes::CorrelationBox;
use crate::correlations::{closed_form_box, limit_box, optimize_t, scan_alpha, write_scan_csv, LimitParams, MeasurementSettings};
use crate::error::Error;
use crate::fock::{box_from_oracle, coherence_swap_check, OracleConfig};
use crate::polytope::{find_minimal_ensembles, min_pnl_ensemble, Tolerance};
use crate::protocol::{run_protocol, summarize, write_jsonl, EveStrategy, ProtocolConfig, Sampling};
use crate::security::key_rate_from_ensembles;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "diqkd", version, about = "Device-independent key and randomness toolkit for weak homodyne correlations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print a correlation box (closed form, limit or Fock oracle).
    Box(BoxArgs),
    /// Optimal T and CH over a grid of oscillator intensities, as CSV.
    Scan(ScanArgs),
    /// All minimal ensembles of a box, with the optimal one flagged.
    Ensembles(EnsembleArgs),
    /// Security report: key rate and Eve's information.
    Keyrate(SourceArgs),
    /// Security report focused on certified randomness.
    Rng(SourceArgs),
    /// Monte Carlo run of the protocol.
    Simulate(SimulateArgs),
    /// Two-copy coherence swapping check in the Fock basis.
    Swapcheck(SwapArgs),
}

#[derive(Debug, Args)]
pub struct BoxArgs {
    #[arg(long)]
    pub alpha2: Option<f64>,
    #[arg(long = "T")]
    pub t: Option<f64>,
    /// Limit parameter `alpha^2 T`.
    #[arg(long, conflicts_with_all = ["alpha2", "t"])]
    pub k: Option<f64>,
    /// Compute the box by photon counting and report the deviation from the
    /// closed form.
    #[arg(long, conflicts_with = "k")]
    pub oracle: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    /// Comma list (`1,2,4`), integer range (`1..10`) or `lo:hi:n`.
    #[arg(long = "alpha2-grid")]
    pub alpha2_grid: String,
    /// CSV path; a manifest is written next to it. Defaults to stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the box comes from: a JSON file, the limit family or the closed form.
#[derive(Debug, Args)]
pub struct SourceArgs {
    #[arg(long = "box", value_name = "FILE", conflicts_with_all = ["k", "alpha2"])]
    pub box_file: Option<PathBuf>,
    #[arg(long, conflicts_with = "alpha2")]
    pub k: Option<f64>,
    #[arg(long)]
    pub alpha2: Option<f64>,
    /// Transmissivity for `--alpha2`; defaults to the CH-optimal value.
    #[arg(long = "T", requires = "alpha2")]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1e-7)]
    pub epsilon: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub source: SourceArgs,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EveArg {
    Optimal,
    OnlyNonlocal,
    OnlyLocal,
}

impl From<EveArg> for EveStrategy {
    fn from(e: EveArg) -> Self {
        match e {
            EveArg::Optimal => EveStrategy::Optimal,
            EveArg::OnlyNonlocal => EveStrategy::OnlyNonlocal,
            EveArg::OnlyLocal => EveStrategy::OnlyLocal,
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub alpha2: f64,
    /// Defaults to the CH-optimal transmissivity.
    #[arg(long = "T")]
    pub t: Option<f64>,
    #[arg(long, default_value_t = 1_000_000)]
    pub rounds: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = ProtocolConfig::DEFAULT_OFF_BIAS)]
    pub off_bias: f64,
    #[arg(long, default_value_t = ProtocolConfig::DEFAULT_TEST_FRACTION)]
    pub test_fraction: f64,
    #[arg(long, value_enum)]
    pub eve: Option<EveArg>,
    /// Sample photon counts through the Fock oracle (small alpha^2 only).
    #[arg(long)]
    pub photon_counts: bool,
    /// Directory for `transcript.jsonl` and `summary.json`; without it the
    /// summary goes to stdout.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SwapArgs {
    #[arg(long, default_value_t = 2)]
    pub cutoff: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Provenance attached to every artifact.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub seed: Option<u64>,
}

impl RunManifest {
    fn new(command: &str, parameters: Value, seed: Option<u64>) -> Self {
        let parameters = match parameters {
            Value::Object(map) => map.into_iter().filter(|(_, v)| !v.is_null()).collect(),
            _ => BTreeMap::new(),
        };
        Self {
            command: command.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
        }
    }
}

/// Command failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidParameter(_) => EXIT_USAGE,
            Error::Truncation { .. } | Error::NotInPolytope { .. } | Error::EmptyCell { .. } => EXIT_NUMERICAL,
            Error::Io(_) | Error::Json(_) => EXIT_IO,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

type CliResult<T = ()> = std::result::Result<T, CliError>;

fn io_at(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    }
}

/// Parses `1,2,4`, `1..10` (inclusive, step 1) or `lo:hi:n` (n points).
pub fn parse_grid(spec: &str) -> CliResult<Vec<f64>> {
    let spec = spec.trim();
    let bad = || CliError::usage(format!("cannot parse grid {spec:?}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let grid = if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi) = (num(lo)?, num(hi)?);
        if hi < lo {
            return Err(bad());
        }
        (0..=((hi - lo).floor() as usize)).map(|i| lo + i as f64).collect()
    } else if spec.contains(':') {
        let parts: Vec<&str> = spec.split(':').collect();
        let [lo, hi, n] = parts.as_slice() else {
            return Err(bad());
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let n: usize = n.trim().parse().map_err(|_| bad())?;
        match n {
            0 => Vec::new(),
            1 => vec![lo],
            _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
        }
    } else if spec.is_empty() {
        Vec::new()
    } else {
        spec.split(',').map(num).collect::<CliResult<_>>()?
    };
    if grid.is_empty() {
        return Err(CliError::usage("alpha^2 grid is empty"));
    }
    Ok(grid)
}

fn emit(out: &mut dyn Write, path: Option<&Path>, manifest: &RunManifest, result: impl Serialize) -> CliResult {
    let doc = json!({ "manifest": manifest, "result": result });
    let text = serde_json::to_string_pretty(&doc).map_err(Error::from)? + "\n";
    match path {
        Some(p) => fs::write(p, text).map_err(io_at(p))?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(())
}

fn read_box(path: &Path) -> CliResult<CorrelationBox> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(CorrelationBox::from_json(&text)?)
}

/// Resolves a box source; also returns the transmissivity actually used.
fn source_box(src: &SourceArgs) -> CliResult<(CorrelationBox, Option<f64>)> {
    match (&src.box_file, src.k, src.alpha2) {
        (Some(path), None, None) => Ok((read_box(path)?, None)),
        (None, Some(k), None) => Ok((limit_box(&LimitParams::new(k)?), None)),
        (None, None, Some(a2)) => {
            let t = match src.t {
                Some(t) => t,
                None => optimize_t(a2)?.t_opt,
            };
            Ok((closed_form_box(&MeasurementSettings::new(a2, t)?), Some(t)))
        }
        _ => Err(CliError::usage("give exactly one of --box, --k or --alpha2")),
    }
}

fn cmd_box(args: &BoxArgs, out: &mut dyn Write) -> CliResult {
    let manifest = RunManifest::new(
        "box",
        json!({ "alpha2": args.alpha2, "T": args.t, "k": args.k, "oracle": args.oracle }),
        None,
    );
    let result = match (args.k, args.alpha2, args.t) {
        (Some(k), None, None) => json!({ "source": "limit", "box": limit_box(&LimitParams::new(k)?) }),
        (None, Some(a2), Some(t)) => {
            let closed = closed_form_box(&MeasurementSettings::new(a2, t)?);
            if args.oracle {
                let oracle = box_from_oracle(&OracleConfig::new(a2, t))?;
                json!({
                    "source": "oracle",
                    "box": oracle,
                    "max_deviation_from_closed_form": oracle.max_abs_diff(&closed),
                })
            } else {
                json!({ "source": "closed-form", "box": closed })
            }
        }
        _ => return Err(CliError::usage("give either --k or both --alpha2 and --T")),
    };
    emit(out, args.out.as_deref(), &manifest, result)
}

fn cmd_scan(args: &ScanArgs, out: &mut dyn Write) -> CliResult {
    let grid = parse_grid(&args.alpha2_grid)?;
    let rows = scan_alpha(&grid)?;
    match &args.out {
        Some(path) => {
            let mut file = fs::File::create(path).map_err(io_at(path))?;
            write_scan_csv(&rows, &mut file)?;
            let manifest = RunManifest::new("scan", json!({ "alpha2_grid": args.alpha2_grid, "out": path }), None);
            let mut sidecar = path.as_os_str().to_owned();
            sidecar.push(".manifest.json");
            let text = serde_json::to_string_pretty(&manifest).map_err(Error::from)? + "\n";
            let sidecar = PathBuf::from(sidecar);
            fs::write(&sidecar, text).map_err(io_at(&sidecar))?;
        }
        None => write_scan_csv(&rows, out)?,
    }
    Ok(())
}

fn source_manifest(command: &str, src: &SourceArgs, t_used: Option<f64>) -> RunManifest {
    RunManifest::new(
        command,
        json!({
            "box": src.box_file,
            "k": src.k,
            "alpha2": src.alpha2,
            "T": t_used,
            "epsilon": src.epsilon,
        }),
        None,
    )
}

fn cmd_ensembles(args: &EnsembleArgs, out: &mut dyn Write) -> CliResult {
    let src = &args.source;
    let tol = Tolerance::new(src.epsilon)?;
    let (bx, t_used) = source_box(src)?;
    let ensembles = find_minimal_ensembles(&bx, tol)?;
    let best = min_pnl_ensemble(&ensembles)?;
    let list: Vec<Value> = ensembles
        .iter()
        .enumerate()
        .map(|(i, e)| {
            json!({
                "index": i + 1,
                "p_nl": e.p_nl(),
                "optimal": std::ptr::eq(e, best),
                "members": e,
            })
        })
        .collect();
    let optimal_index = ensembles.iter().position(|e| std::ptr::eq(e, best)).map(|i| i + 1);
    let result = json!({ "count": ensembles.len(), "optimal_index": optimal_index, "ensembles": list });
    emit(out, src.out.as_deref(), &source_manifest("ensembles", src, t_used), result)
}

fn cmd_report(command: &str, src: &SourceArgs, out: &mut dyn Write) -> CliResult {
    let tol = Tolerance::new(src.epsilon)?;
    let (bx, t_used) = source_box(src)?;
    let ensembles = find_minimal_ensembles(&bx, tol)?;
    let report = key_rate_from_ensembles(&bx, &ensembles, tol)?;
    emit(out, src.out.as_deref(), &source_manifest(command, src, t_used), report)
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> CliResult {
    let t = match args.t {
        Some(t) => t,
        None => optimize_t(args.alpha2)?.t_opt,
    };
    let mut cfg = ProtocolConfig::new(args.alpha2, t, args.rounds, args.seed)
        .with_off_bias(args.off_bias)
        .with_test_fraction(args.test_fraction);
    if let Some(e) = args.eve {
        cfg = cfg.with_eve(e.into());
    }
    if args.photon_counts {
        cfg = cfg.with_sampling(Sampling::PhotonCounts);
    }
    let manifest = RunManifest::new(
        "simulate",
        json!({
            "alpha2": args.alpha2,
            "T": t,
            "rounds": args.rounds,
            "off_bias": args.off_bias,
            "test_fraction": args.test_fraction,
            "eve": cfg.eve,
            "sampling": cfg.sampling,
        }),
        Some(args.seed),
    );
    let transcript = run_protocol(&cfg)?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(io_at(dir))?;
        let path = dir.join("transcript.jsonl");
        write_jsonl(&transcript.records, fs::File::create(&path).map_err(io_at(&path))?)?;
    }
    let summary = summarize(&transcript)?;
    let summary_path = args.out_dir.as_ref().map(|d| d.join("summary.json"));
    emit(out, summary_path.as_deref(), &manifest, summary)
}

fn cmd_swapcheck(args: &SwapArgs, out: &mut dyn Write) -> CliResult {
    let manifest = RunManifest::new("swapcheck", json!({ "cutoff": args.cutoff }), None);
    let report = coherence_swap_check(args.cutoff)?;
    emit(out, args.out.as_deref(), &manifest, report)
}

/// Runs a parsed command, writing results to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> CliResult {
    match &cli.command {
        Command::Box(a) => cmd_box(a, out),
        Command::Scan(a) => cmd_scan(a, out),
        Command::Ensembles(a) => cmd_ensembles(a, out),
        Command::Keyrate(a) => cmd_report("keyrate", a, out),
        Command::Rng(a) => cmd_report("rng", a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Swapcheck(a) => cmd_swapcheck(a, out),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit code. Errors go to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(err, "{e}")
            } else {
                write!(out, "{e}")
            };
            return code;
        }
    };
    match run(&cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}
