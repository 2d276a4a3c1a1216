//! Command-line front end.
//!
//! Every subcommand can also read its flags from `--config <json>`; keys are
//! the long flag names. Flags given on the command line override the file.
//! When `--out` names a file, a `<out>.manifest.json` run manifest is written
//! next to it; its `config` object can be fed back through `--config` to
//! reproduce the output.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::Error;
use crate::grouping;
use crate::lut;
use crate::model::{Grouping, MismatchModel};
use crate::montecarlo::{self, Selector, SweepConfig};
use crate::reference::{enumerate_references, select_quantizer_exhaustive, select_quantizer_greedy, TargetGrid};
use crate::report::{self, Format};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "srquant", version, about = "Redundant-sensing quantizer experiments")]
struct Cli {
    /// Worker threads (default: available parallelism). Output does not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the nominal weights of a grouping
    Groups(GroupsArgs),
    /// Enumerate the references of one sampled array and print statistics
    Enumerate(EnumerateArgs),
    /// Entropy sweep over mismatch ratio, target resolution and range fraction
    Sweep(SweepArgs),
    /// Pooled reference density histogram
    Diffusion(DiffusionArgs),
    /// Per-code RMSE profile at one target resolution
    Rmse(RmseArgs),
    /// Calibration lookup tables
    #[command(subcommand)]
    Lut(LutCommand),
}

#[derive(Debug, Subcommand)]
enum LutCommand {
    /// Select a quantizer for one sampled array and write its LUT
    Export(LutExportArgs),
    /// Validate a LUT file and print its summary
    Inspect(LutInspectArgs),
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ArrayFlags {
    /// Grouping: bw, hs, un, rs (with --s and --n0-prime) or rs-<s>-<n0'>
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<String>,
    /// Intrinsic resolution in bits
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n0: Option<u32>,
    /// Sub-array shift of the redundant family
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<u32>,
    /// Sub-array resolution of the redundant family
    #[arg(long = "n0-prime")]
    #[serde(skip_serializing_if = "Option::is_none")]
    n0_prime: Option<u32>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct OutputFlags {
    /// JSON file with default values for any flag
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
    /// csv or json
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    format: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GroupsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct EnumerateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    /// Mismatch ratio
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Trial index within the seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trial: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    /// Mismatch ratios, comma-separated
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<String>,
    /// Target resolutions: comma-separated values or inclusive ranges a..b
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nk: Option<String>,
    /// Range fractions, comma-separated
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<String>,
    /// Monte Carlo trials
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// exhaustive or greedy
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    selector: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct DiffusionArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    /// Mismatch ratio
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Monte Carlo trials
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    /// Histogram bin count over [0, 1]
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    bins: Option<usize>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct RmseArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    /// Mismatch ratio
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Target resolution in bits
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nk: Option<u32>,
    /// Trials averaged per code
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<u64>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[command(flatten)]
    #[serde(flatten)]
    output: OutputFlags,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct LutExportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    array: ArrayFlags,
    /// Mismatch ratio
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    /// Target resolution in bits
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    nk: Option<u32>,
    /// Fraction of codes scored
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    delta: Option<f64>,
    /// Master seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    /// Trial index within the seed
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trial: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    selector: Option<String>,
    /// JSON file with default values for any flag
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// LUT file to write
    #[arg(long)]
    #[serde(skip)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct LutInspectArgs {
    /// LUT file
    path: PathBuf,
    /// text or json
    #[arg(long, default_value = "text")]
    format: String,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter(m) => CliError::Usage(m),
            other => CliError::Runtime(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Provenance record written next to every output file.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub version: String,
    pub wall_time_s: f64,
    pub output: String,
}

/// Parses `argv` (program name first), runs the command and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_cli_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = write!(out, "{}", e.render());
                    if e.kind() == ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand {
                        EXIT_USAGE
                    } else {
                        EXIT_OK
                    }
                }
                _ => {
                    let _ = write!(err, "{}", e.render());
                    EXIT_USAGE
                }
            };
            return code;
        }
    };

    let threads = match cli.threads {
        Some(0) => {
            let _ = writeln!(err, "error: --threads must be at least 1");
            return EXIT_USAGE;
        }
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_RUNTIME;
        }
    };

    let mut buf = Vec::new();
    let result = pool.install(|| dispatch(cli.command, &mut buf));
    if out.write_all(&buf).and_then(|_| out.flush()).is_err() {
        return EXIT_RUNTIME;
    }
    match result {
        Ok(()) => EXIT_OK,
        Err(CliError::Usage(m)) => {
            let _ = writeln!(err, "usage error: {m}");
            EXIT_USAGE
        }
        Err(CliError::Runtime(e)) => {
            let _ = writeln!(err, "error: {e}");
            EXIT_RUNTIME
        }
    }
}

/// Overlays the flags given on the command line onto the `--config` file.
fn merge_config<A: Serialize + DeserializeOwned>(flags: &A, config: Option<&Path>) -> CliResult<A> {
    let mut base = match config {
        None => Map::new(),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            let mut v: Value =
                serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", p.display())))?;
            // A run manifest is accepted in place of a bare config.
            if v.get("command").is_some() {
                if let Some(c) = v.get("config") {
                    v = c.clone();
                }
            }
            match v {
                Value::Object(m) => m,
                _ => return Err(usage("config file must hold a JSON object")),
            }
        }
    };
    let overlay = serde_json::to_value(flags).map_err(|e| CliError::Runtime(e.into()))?;
    if let Value::Object(m) = overlay {
        base.extend(m.into_iter().filter(|(_, v)| !v.is_null()));
    }
    serde_json::from_value(Value::Object(base)).map_err(|e| usage(format!("config: {e}")))
}

fn parse_groupings(flags: &ArrayFlags) -> CliResult<Vec<Grouping>> {
    let method = flags.method.as_deref().ok_or_else(|| usage("--method is required"))?;
    let mut out = Vec::new();
    let mut uses_rs_flags = false;
    for item in method.split(',') {
        let item = item.trim();
        let g = if item.eq_ignore_ascii_case("rs") {
            uses_rs_flags = true;
            let s = flags.s.ok_or_else(|| usage("--method rs needs --s"))?;
            let n0_prime = flags.n0_prime.ok_or_else(|| usage("--method rs needs --n0-prime"))?;
            Grouping::Redundant { s, n0_prime }
        } else {
            item.parse::<Grouping>()?
        };
        if g == Grouping::Custom {
            return Err(usage("custom groupings are not available from the command line"));
        }
        out.push(g);
    }
    if !uses_rs_flags && (flags.s.is_some() || flags.n0_prime.is_some()) {
        return Err(usage("--s and --n0-prime only apply to --method rs"));
    }
    Ok(out)
}

fn single_grouping(flags: &ArrayFlags) -> CliResult<Grouping> {
    let gs = parse_groupings(flags)?;
    match gs.as_slice() {
        [g] => Ok(*g),
        _ => Err(usage("this command takes exactly one --method")),
    }
}

fn n0_of(flags: &ArrayFlags) -> CliResult<u32> {
    flags.n0.ok_or_else(|| usage("--n0 is required"))
}

fn parse_f64_list(s: &str, name: &str) -> CliResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("--{name}: cannot parse {t:?}")))
        })
        .collect()
}

/// Comma-separated list of integers or inclusive ranges `a..b`.
pub fn parse_u32_ranges(s: &str) -> Result<Vec<u32>, String> {
    let mut out = Vec::new();
    for item in s.split(',') {
        let item = item.trim();
        if let Some((a, b)) = item.split_once("..") {
            let a: u32 = a.trim().parse().map_err(|_| format!("bad range start in {item:?}"))?;
            let b: u32 = b.trim().parse().map_err(|_| format!("bad range end in {item:?}"))?;
            if b < a {
                return Err(format!("empty range {item:?}"));
            }
            out.extend(a..=b);
        } else {
            out.push(item.parse().map_err(|_| format!("cannot parse {item:?}"))?);
        }
    }
    Ok(out)
}

fn parse_format(s: Option<&str>) -> CliResult<Format> {
    Ok(s.unwrap_or("csv").parse()?)
}

fn parse_selector(s: Option<&str>) -> CliResult<Selector> {
    Ok(s.unwrap_or("exhaustive").parse()?)
}

fn emit(
    command: &str,
    config: &impl Serialize,
    seed: Option<u64>,
    body: &[u8],
    out_path: Option<&Path>,
    started: Instant,
    out: &mut dyn Write,
) -> CliResult<()> {
    match out_path {
        None => out.write_all(body)?,
        Some(p) => {
            fs::write(p, body)?;
            let manifest = RunManifest {
                command: command.to_string(),
                config: serde_json::to_value(config).map_err(|e| CliError::Runtime(e.into()))?,
                seed,
                version: env!("CARGO_PKG_VERSION").to_string(),
                wall_time_s: started.elapsed().as_secs_f64(),
                output: p.display().to_string(),
            };
            let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.into()))?;
            fs::write(manifest_path(p), text + "\n")?;
        }
    }
    Ok(())
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

fn dispatch(command: Command, out: &mut Vec<u8>) -> CliResult<()> {
    let started = Instant::now();
    match command {
        Command::Groups(flags) => cmd_groups(flags, started, out),
        Command::Enumerate(flags) => cmd_enumerate(flags, started, out),
        Command::Sweep(flags) => cmd_sweep(flags, started, out),
        Command::Diffusion(flags) => cmd_diffusion(flags, started, out),
        Command::Rmse(flags) => cmd_rmse(flags, started, out),
        Command::Lut(LutCommand::Export(flags)) => cmd_lut_export(flags, started, out),
        Command::Lut(LutCommand::Inspect(flags)) => cmd_lut_inspect(flags, out),
    }
}

fn cmd_groups(flags: GroupsArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: GroupsArgs = merge_config(&flags, flags.output.config.as_deref())?;
    args.output.format.get_or_insert_with(|| "text".into());
    let g = single_grouping(&args.array)?;
    let array = grouping::build(g, n0_of(&args.array)?)?;
    let body = match args.output.format.as_deref() {
        Some("text") => {
            let list: Vec<String> = array.nominal().iter().map(u32::to_string).collect();
            format!("{{ {} }} ({} elements)\n", list.join(", "), array.len())
        }
        Some("json") => {
            let v = serde_json::json!({ "grouping": g.to_string(), "n0": array.n0(), "nominal": array.nominal() });
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Runtime(e.into()))? + "\n"
        }
        Some(other) => return Err(usage(format!("groups supports --format text|json, got {other:?}"))),
        None => unreachable!(),
    };
    emit(
        "groups",
        &args,
        None,
        body.as_bytes(),
        flags.output.out.as_deref(),
        started,
        out,
    )
}

#[derive(Serialize)]
struct EnumerateStats {
    grouping: String,
    n0: u32,
    components: usize,
    sigma_m: f64,
    seed: u64,
    trial: u64,
    references: usize,
    distinct: usize,
    min_nonzero: f64,
    max: f64,
    max_gap: f64,
    mean_gap: f64,
}

fn cmd_enumerate(flags: EnumerateArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: EnumerateArgs = merge_config(&flags, flags.output.config.as_deref())?;
    let sigma = *args.sigma.get_or_insert(0.1);
    let seed = *args.seed.get_or_insert(1);
    let trial = *args.trial.get_or_insert(0);
    let format = args.output.format.get_or_insert_with(|| "text".into()).clone();
    let g = single_grouping(&args.array)?;
    let array = grouping::build(g, n0_of(&args.array)?)?;
    let model = MismatchModel::new(sigma, montecarlo::cell_seed(seed, g, 0))?;
    let refs = enumerate_references(&array.sample(&model, trial))?;
    let values = refs.values();
    let max_gap = values.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    let max = *values.last().expect("non-empty");
    let stats = EnumerateStats {
        grouping: g.to_string(),
        n0: array.n0(),
        components: array.len(),
        sigma_m: sigma,
        seed,
        trial,
        references: refs.len(),
        distinct: refs.distinct(),
        min_nonzero: values.iter().copied().find(|&v| v > 0.0).unwrap_or(0.0),
        max,
        max_gap,
        mean_gap: max / (refs.distinct().max(2) - 1) as f64,
    };
    let body = match format.as_str() {
        "json" => serde_json::to_string_pretty(&stats).map_err(|e| CliError::Runtime(e.into()))? + "\n",
        "text" => {
            let v = serde_json::to_value(&stats).map_err(|e| CliError::Runtime(e.into()))?;
            let mut s = String::new();
            if let Value::Object(m) = v {
                for (k, v) in m {
                    s.push_str(&format!("{k}: {v}\n"));
                }
            }
            s
        }
        other => return Err(usage(format!("enumerate supports --format text|json, got {other:?}"))),
    };
    emit(
        "enumerate",
        &args,
        Some(seed),
        body.as_bytes(),
        flags.output.out.as_deref(),
        started,
        out,
    )
}

fn cmd_sweep(flags: SweepArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: SweepArgs = merge_config(&flags, flags.output.config.as_deref())?;
    args.array.method.get_or_insert_with(|| "hs,un".into());
    let n0 = *args.array.n0.get_or_insert(10);
    args.sigma.get_or_insert_with(|| "0.1".into());
    args.nk.get_or_insert_with(|| format!("{n0}..{}", n0 + 8));
    args.delta.get_or_insert_with(|| "1".into());
    args.trials.get_or_insert(montecarlo::DEFAULT_TRIALS);
    args.seed.get_or_insert(1);
    args.selector.get_or_insert_with(|| "exhaustive".into());
    args.output.format.get_or_insert_with(|| "csv".into());

    let config = SweepConfig {
        groupings: parse_groupings(&args.array)?,
        n0,
        sigmas: parse_f64_list(args.sigma.as_deref().unwrap_or_default(), "sigma")?,
        nks: parse_u32_ranges(args.nk.as_deref().unwrap_or_default()).map_err(|m| usage(format!("--nk: {m}")))?,
        deltas: parse_f64_list(args.delta.as_deref().unwrap_or_default(), "delta")?,
        trials: args.trials.unwrap_or_default(),
        master_seed: args.seed.unwrap_or_default(),
        selector: parse_selector(args.selector.as_deref())?,
        keep_raw: false,
    };
    let format = parse_format(args.output.format.as_deref())?;
    let summary = montecarlo::run_sweep(&config)?;
    if let Some(c) = summary.flagged().next() {
        return Err(CliError::Runtime(Error::InvalidParameter(format!(
            "non-finite entropy in cell {} sigma={} nk={} delta={}",
            c.grouping, c.sigma_m, c.nk, c.delta
        ))));
    }
    let body = report::render(&report::sweep_records(&summary), format)?;
    emit(
        "sweep",
        &args,
        Some(config.master_seed),
        body.as_bytes(),
        flags.output.out.as_deref(),
        started,
        out,
    )
}

fn cmd_diffusion(flags: DiffusionArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: DiffusionArgs = merge_config(&flags, flags.output.config.as_deref())?;
    let sigma = *args.sigma.get_or_insert(0.1);
    let trials = *args.trials.get_or_insert(montecarlo::DESK_TRIALS);
    let bins = *args.bins.get_or_insert(montecarlo::DEFAULT_BINS);
    let seed = *args.seed.get_or_insert(1);
    args.output.format.get_or_insert_with(|| "csv".into());
    let g = single_grouping(&args.array)?;
    let format = parse_format(args.output.format.as_deref())?;
    let hist = montecarlo::run_diffusion(g, n0_of(&args.array)?, sigma, trials, bins, seed)?;
    let body = report::render(&report::diffusion_records(&hist), format)?;
    emit(
        "diffusion",
        &args,
        Some(seed),
        body.as_bytes(),
        flags.output.out.as_deref(),
        started,
        out,
    )
}

fn cmd_rmse(flags: RmseArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: RmseArgs = merge_config(&flags, flags.output.config.as_deref())?;
    let sigma = *args.sigma.get_or_insert(0.1);
    let trials = *args.trials.get_or_insert(1);
    let seed = *args.seed.get_or_insert(1);
    args.output.format.get_or_insert_with(|| "csv".into());
    let g = single_grouping(&args.array)?;
    let n0 = n0_of(&args.array)?;
    let nk = *args.nk.get_or_insert(n0 + 8);
    let format = parse_format(args.output.format.as_deref())?;
    let profile = montecarlo::run_rmse(g, n0, sigma, nk, trials, seed)?;
    let body = report::render(&report::rmse_records(&profile), format)?;
    emit(
        "rmse",
        &args,
        Some(seed),
        body.as_bytes(),
        flags.output.out.as_deref(),
        started,
        out,
    )
}

fn cmd_lut_export(flags: LutExportArgs, started: Instant, out: &mut dyn Write) -> CliResult<()> {
    let mut args: LutExportArgs = merge_config(&flags, flags.config.as_deref())?;
    let path = flags
        .out
        .clone()
        .ok_or_else(|| usage("lut export needs --out <file>"))?;
    let sigma = *args.sigma.get_or_insert(0.1);
    let seed = *args.seed.get_or_insert(1);
    let trial = *args.trial.get_or_insert(0);
    let delta = *args.delta.get_or_insert(1.0);
    args.selector.get_or_insert_with(|| "exhaustive".into());
    let g = single_grouping(&args.array)?;
    let n0 = n0_of(&args.array)?;
    let nk = *args.nk.get_or_insert(n0 + 6);
    let selector = parse_selector(args.selector.as_deref())?;

    let array = grouping::build(g, n0)?.sample(&MismatchModel::new(sigma, montecarlo::cell_seed(seed, g, 0))?, trial);
    let grid = TargetGrid::new(nk, delta)?;
    let q = match selector {
        Selector::Exhaustive => select_quantizer_exhaustive(&enumerate_references(&array)?, grid)?,
        Selector::Greedy => select_quantizer_greedy(&array, grid)?,
    };
    let bytes = lut::encode_lut(&q, &array)?;
    emit("lut export", &args, Some(seed), &bytes, Some(&path), started, out)?;
    writeln!(out, "wrote {} bytes to {}", bytes.len(), path.display())?;
    Ok(())
}

fn cmd_lut_inspect(flags: LutInspectArgs, out: &mut dyn Write) -> CliResult<()> {
    let (q, array) = lut::import_lut(&flags.path)?;
    let header = lut::read_header(&fs::read(&flags.path)?)?;
    let report = crate::metrics::entropy_report(&q, q.delta())?;
    let v = serde_json::json!({
        "header": header,
        "nominal": array.nominal(),
        "actual": array.actual(),
        "interior_codes": q.masks().len(),
        "mask_stream_bits": lut::mask_stream_bits(q.nk(), array.len()),
        "file_bytes": lut::lut_size(q.nk(), array.len()),
        "entropy_bits": report.h,
    });
    match flags.format.as_str() {
        "json" => writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Runtime(e.into()))?
        )?,
        "text" => {
            if let Value::Object(m) = v {
                for (k, v) in m {
                    writeln!(out, "{k}: {v}")?;
                }
            }
        }
        other => return Err(usage(format!("lut inspect supports --format text|json, got {other:?}"))),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let argv = std::iter::once("srquant").chain(args.iter().copied());
        let code = run_cli_with(argv, &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn ranges() {
        assert_eq!(parse_u32_ranges("10..12,14").unwrap(), vec![10, 11, 12, 14]);
        assert_eq!(parse_u32_ranges("5").unwrap(), vec![5]);
        assert!(parse_u32_ranges("5..3").is_err());
        assert!(parse_u32_ranges("x").is_err());
    }

    #[test]
    fn groups_uniform() {
        let (code, out, _) = run(&["groups", "--method", "un", "--n0", "10"]);
        assert_eq!(code, 0);
        assert_eq!(
            out,
            "{ 1, 2, 4, 8, 16, 31, 62, 123, 245, 490, 1, 2, 4, 8, 16, 1, 2, 4, 1, 2 } (20 elements)\n"
        );
    }

    #[test]
    fn usage_errors() {
        assert_eq!(
            run(&["groups", "--method", "un", "--n0", "10", "--bogus"]).0,
            EXIT_USAGE
        );
        assert_eq!(run(&["groups", "--n0", "10"]).0, EXIT_USAGE);
        assert_eq!(
            run(&["groups", "--method", "un", "--n0", "10", "--s", "1"]).0,
            EXIT_USAGE
        );
        assert_eq!(run(&["groups", "--method", "hs,un", "--n0", "10"]).0, EXIT_USAGE);
        assert_eq!(
            run(&["sweep", "--method", "hs", "--n0", "4", "--nk", "9..2"]).0,
            EXIT_USAGE
        );
        assert_eq!(run(&["nosuch"]).0, EXIT_USAGE);
        assert_eq!(
            run(&["--threads", "0", "groups", "--method", "bw", "--n0", "3"]).0,
            EXIT_USAGE
        );
    }

    #[test]
    fn runtime_errors() {
        let (code, _, err) = run(&["lut", "inspect", "/nonexistent/file.srl"]);
        assert_eq!(code, EXIT_RUNTIME, "{err}");
        let (code, _, _) = run(&["enumerate", "--method", "hs", "--n0", "14"]);
        assert_eq!(code, EXIT_RUNTIME);
    }

    #[test]
    fn help_everywhere() {
        for sub in [
            &["--help"][..],
            &["groups", "--help"],
            &["sweep", "--help"],
            &["lut", "export", "--help"],
            &["lut", "inspect", "--help"],
        ] {
            let (code, out, _) = run(sub);
            assert_eq!(code, 0);
            assert!(out.contains("Usage"), "{out}");
        }
    }

    #[test]
    fn rs_method_flags() {
        let (code, out, _) = run(&["groups", "--method", "rs", "--n0", "4", "--s", "1", "--n0-prime", "2"]);
        assert_eq!(code, 0);
        assert_eq!(out, "{ 1, 2, 2, 4, 2, 4 } (6 elements)\n");
        let (code, _, _) = run(&["groups", "--method", "rs", "--n0", "4", "--s", "1"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn config_file_and_override() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("cfg.json");
        fs::write(&cfg, r#"{"method": "hs", "n0": 3}"#).unwrap();
        let (code, out, _) = run(&["groups", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, 0);
        assert_eq!(out, "{ 1, 2, 1, 1, 2 } (5 elements)\n");
        let (_, out, _) = run(&["groups", "--config", cfg.to_str().unwrap(), "--method", "bw"]);
        assert_eq!(out, "{ 1, 2, 4 } (3 elements)\n");
        fs::write(&cfg, r#"{"method": "hs", "n0": 3, "mystery": 1}"#).unwrap();
        assert_eq!(run(&["groups", "--config", cfg.to_str().unwrap()]).0, EXIT_USAGE);
    }
}
