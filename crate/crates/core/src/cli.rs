//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a configuration
//! or usage error. `validate` exits 1 when it finds violations.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::SimConfig;
use crate::engine::{self, preset, simulate_workload, SimError, Simulation, SWEEPABLE};
use crate::metrics::{Format, MetricsError, MetricsReport};
use crate::workload::{Workload, WorkloadError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "fogauction", version, about = "Auction-based function placement simulator for fog hierarchies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one configuration for each seed and write its report.
    Run(RunArgs),
    /// Simulate every (value, seed) combination of one parameter.
    Sweep(SweepArgs),
    /// List every violated constraint of a configuration.
    Validate(Source),
    /// Simulate a previously dumped workload.
    Replay(ReplayArgs),
}

#[derive(Debug, Args)]
pub struct Source {
    /// TOML configuration file.
    #[arg(long, conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in configuration: exp1, exp2 or exp3.
    #[arg(long)]
    pub preset: Option<String>,
    /// `key=value` assignment on a dotted field path; applied in order.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Args)]
pub struct Output {
    /// Seed to run; may be repeated.
    #[arg(long = "seed", env = "FOGAUCTION_SEED", value_delimiter = ',')]
    pub seeds: Vec<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum FormatArg {
    Csv,
    Jsonl,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Jsonl => Format::Jsonl,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    /// Also write the generated workload as JSON lines.
    #[arg(long)]
    pub dump_workload: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    /// Parameter to sweep: rate, num_executables or stickiness.
    #[arg(long)]
    pub param: String,
    /// Comma-separated list, or `start:end:step` (inclusive).
    #[arg(long)]
    pub values: String,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    #[command(flatten)]
    pub source: Source,
    #[command(flatten)]
    pub output: Output,
    /// Workload file written by `run --dump-workload`.
    #[arg(long)]
    pub workload: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_CONFIG,
            CliError::Sim(
                SimError::Config(_)
                | SimError::ConfigInvalid(_)
                | SimError::UnknownPreset(_)
                | SimError::UnknownParameter(_),
            ) => EXIT_CONFIG,
            _ => EXIT_RUNTIME,
        }
    }
}

impl Source {
    fn name(&self) -> String {
        match (&self.config, &self.preset) {
            (Some(p), _) => p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "config".into()),
            (None, Some(p)) => p.clone(),
            (None, None) => "config".into(),
        }
    }

    fn load(&self) -> Result<SimConfig, CliError> {
        let base = match (&self.config, &self.preset) {
            (Some(path), _) => SimConfig::load(path).map_err(SimError::from)?,
            (None, Some(name)) => preset(name)?,
            (None, None) => return Err(CliError::Usage("one of --config or --preset is required".into())),
        };
        Ok(base.with_overrides(&self.overrides).map_err(SimError::from)?)
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    source: String,
    seed: u64,
    overrides: &'a [String],
    param: Option<(&'a str, f64)>,
    format: Format,
    files: Vec<String>,
}

fn seeds_or_default(seeds: &[u64], cfg: &SimConfig) -> Vec<u64> {
    if seeds.is_empty() {
        vec![cfg.workload.seed]
    } else {
        seeds.to_vec()
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_report(
    report: &MetricsReport,
    output: &Output,
    base: &str,
    source: &Source,
    seed: u64,
    param: Option<(&str, f64)>,
) -> Result<(), CliError> {
    let format = Format::from(output.format);
    let files = report.export(&output.out, base, format)?;
    let meta = Meta {
        source: source.name(),
        seed,
        overrides: &source.overrides,
        param,
        format,
        files: files
            .iter()
            .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
            .collect(),
    };
    let path = output.out.join(format!("{base}.meta.json"));
    let file = File::create(&path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::to_writer_pretty(BufWriter::new(file), &meta).map_err(MetricsError::from)?;
    Ok(())
}

/// Parses `a,b,c` or `start:end:step`.
pub fn parse_values(text: &str) -> Result<Vec<f64>, String> {
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|e| format!("bad number {s:?}: {e}"))
    };
    if text.contains(':') {
        let parts: Vec<&str> = text.split(':').collect();
        let [start, end, step] = parts[..] else {
            return Err(format!("expected start:end:step, got {text:?}"));
        };
        let (start, end, step) = (num(start)?, num(end)?, num(step)?);
        if !(step > 0.0) || end < start {
            return Err(format!("empty range {text:?}"));
        }
        let n = ((end - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    } else {
        let v: Vec<f64> = text.split(',').map(num).collect::<Result<_, _>>()?;
        if v.is_empty() {
            return Err("no values given".into());
        }
        Ok(v)
    }
}

fn run(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.source.load()?;
    create_dir(&args.output.out)?;
    let name = args.source.name();
    for seed in seeds_or_default(&args.output.seeds, &cfg) {
        let cfg = cfg.with_override(&format!("seed={seed}")).map_err(SimError::from)?;
        let base = format!("{name}_seed={seed}");
        let sim = if args.dump_workload {
            let topology = cfg.topology.build().map_err(SimError::from)?;
            crate::engine::validate_config(&cfg)?;
            let workload = Workload::generate(&cfg.workload, &topology, cfg.tick_ms).map_err(SimError::from)?;
            let path = args.output.out.join(format!("{base}.workload.jsonl"));
            let file = File::create(&path).map_err(|source| CliError::Io {
                path: path.display().to_string(),
                source,
            })?;
            workload.dump(&topology, BufWriter::new(file))?;
            Simulation::with_workload(&cfg, workload)?
        } else {
            Simulation::new(&cfg)?
        };
        let report = sim.run()?;
        write_report(&report, &args.output, &base, &args.source, seed, None)?;
        eprintln!(
            "{base}: {} requests, placement edge {:.3} / intermediary {:.3} / cloud {:.3}",
            report.total_requests,
            report.placement_share.edge,
            report.placement_share.intermediary,
            report.placement_share.cloud
        );
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    if !SWEEPABLE.contains(&args.param.as_str()) {
        return Err(SimError::UnknownParameter(args.param.clone()).into());
    }
    let values = parse_values(&args.values).map_err(CliError::Usage)?;
    let cfg = args.source.load()?;
    create_dir(&args.output.out)?;
    let seeds = seeds_or_default(&args.output.seeds, &cfg);
    let result = engine::sweep(&cfg, &args.param, &values, &seeds)?;
    let name = args.source.name();
    for p in &result.points {
        let base = format!("{name}_{}={}_seed={}", args.param, p.value, p.seed);
        write_report(
            &p.report,
            &args.output,
            &base,
            &args.source,
            p.seed,
            Some((&args.param, p.value)),
        )?;
    }
    let path = args.output.out.join(format!("{name}_sweep_{}.csv", args.param));
    let file = File::create(&path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    result.write_csv(BufWriter::new(file))?;
    eprintln!("{}: {} points", path.display(), result.points.len());
    Ok(())
}

fn replay(args: &ReplayArgs) -> Result<(), CliError> {
    let cfg = args.source.load()?;
    crate::engine::validate_config(&cfg)?;
    let topology = cfg.topology.build().map_err(SimError::from)?;
    let file = File::open(&args.workload).map_err(|source| CliError::Io {
        path: args.workload.display().to_string(),
        source,
    })?;
    let workload = Workload::load(&topology, BufReader::new(file))?;
    create_dir(&args.output.out)?;
    let seed = cfg.workload.seed;
    let report = simulate_workload(&cfg, workload, |_| {})?;
    let base = format!("{}_replay_seed={seed}", args.source.name());
    write_report(&report, &args.output, &base, &args.source, seed, None)?;
    Ok(())
}

fn validate(source: &Source) -> Result<i32, CliError> {
    let cfg = source.load()?;
    let diagnostics = cfg.diagnostics();
    for d in &diagnostics {
        println!("{d}");
    }
    if diagnostics.is_empty() {
        println!("ok");
        Ok(EXIT_OK)
    } else {
        Ok(EXIT_RUNTIME)
    }
}

/// Runs one invocation, reporting errors on stderr. Returns the exit code.
pub fn execute(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run(a) => run(a).map(|()| EXIT_OK),
        Command::Sweep(a) => sweep(a).map(|()| EXIT_OK),
        Command::Validate(s) => validate(s),
        Command::Replay(a) => replay(a).map(|()| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs them.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => execute(cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_lists() {
        assert_eq!(parse_values("100,150,200").unwrap(), vec![100.0, 150.0, 200.0]);
        let v = parse_values("5:100:5").unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!((v[0], v[19]), (5.0, 100.0));
        assert_eq!(parse_values("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(parse_values("1:0:1").is_err());
        assert!(parse_values("a,b").is_err());
    }

    #[test]
    fn exactly_one_command() {
        assert!(Cli::try_parse_from(["fogauction"]).is_err());
        assert!(Cli::try_parse_from(["fogauction", "run", "validate"]).is_err());
    }
}
