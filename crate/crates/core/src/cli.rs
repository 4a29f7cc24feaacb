//! Command-line surface. Flags override values from an optional TOML
//! config file.
//!
//! Exit codes: 0 success, 1 configuration error, 2 corpus error, 3 partial
//! run (outputs written, some hours missing or unreadable).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::aggregate::{AggregateOptions, ValidityPolicy};
use crate::calendar::{DayRange, MonthId};
use crate::corpus::output::OutputLayout;
use crate::corpus::raw::{scan_corpus, YearDigits};
use crate::error::Error;
use crate::pipeline::{self, PipelineConfig, RunStatus, RunSummary};
use crate::preprocess::StageSet;
use crate::synth::{self, DefectRates, SynthConfig};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 1;
pub const EXIT_CORPUS: u8 = 2;
pub const EXIT_PARTIAL: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "scinda-iono",
    version,
    about = "SCINDA scintillation (.scn) processing toolkit"
)]
pub struct Cli {
    /// TOML file with default values for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Inventory the hourly archives of one month.
    Scan(CommonArgs),
    /// Apply T20/61p/TwD corrections and write corrected hourly .scn files.
    Preprocess(CommonArgs),
    /// Aggregate a folder of corrected hourly .scn files.
    Aggregate(CommonArgs),
    /// Full pipeline: scan, extract, parse, correct, aggregate, write.
    Run(CommonArgs),
    /// Generate a synthetic corpus with injected defects.
    Synth(SynthArgs),
    /// Plot the all-satellite families of an existing output tree.
    Plot(CommonArgs),
}

#[derive(Debug, Args, Default, Clone)]
pub struct CommonArgs {
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long)]
    pub month: Option<u32>,
    /// Day range inside the month, e.g. 01-31.
    #[arg(long)]
    pub days: Option<String>,
    /// Comma-separated subset of t20,61p,twd (or "none").
    #[arg(long)]
    pub stages: Option<String>,
    /// strict|default
    #[arg(long)]
    pub policy: Option<String>,
    #[arg(long = "min-elevation", value_name = "DEG")]
    pub min_elevation: Option<f64>,
    #[arg(long = "exclude-sbas")]
    pub exclude_sbas: bool,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub plots: bool,
    /// Write raw-style file stems with a two-digit year.
    #[arg(long = "two-digit-year")]
    pub two_digit_year: bool,
}

#[derive(Debug, Args, Default, Clone)]
pub struct SynthArgs {
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub year: Option<i32>,
    #[arg(long)]
    pub month: Option<u32>,
    #[arg(long)]
    pub days: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fraction of epochs given a malformed year.
    #[arg(long = "t20-rate")]
    pub t20_rate: Option<f64>,
    /// Fraction of hour boundaries whose first epoch lands in the previous file.
    #[arg(long = "p61-rate")]
    pub p61_rate: Option<f64>,
    /// Fraction of epochs emptied to a bare header.
    #[arg(long = "twd-rate")]
    pub twd_rate: Option<f64>,
    #[arg(long = "gps-prns")]
    pub gps_prns: Option<u16>,
    #[arg(long = "two-digit-year")]
    pub two_digit_year: bool,
}

/// Values accepted in the config file.
#[derive(Debug, Default, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub root: Option<PathBuf>,
    pub year: Option<i32>,
    pub month: Option<u32>,
    pub days: Option<String>,
    pub stages: Option<String>,
    pub policy: Option<String>,
    pub min_elevation: Option<f64>,
    pub exclude_sbas: Option<bool>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
    pub plots: Option<bool>,
    pub two_digit_year: Option<bool>,
    pub seed: Option<u64>,
    pub t20_rate: Option<f64>,
    pub p61_rate: Option<f64>,
    pub twd_rate: Option<f64>,
    pub gps_prns: Option<u16>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn required<T>(value: Option<T>, name: &str) -> Result<T, Error> {
    value.ok_or_else(|| Error::Config(format!("--{name} is required")))
}

fn digits(flag: bool, file: Option<bool>) -> YearDigits {
    if flag || file.unwrap_or(false) {
        YearDigits::Two
    } else {
        YearDigits::One
    }
}

fn resolve_days(
    year: Option<i32>,
    month: Option<u32>,
    days: Option<&str>,
) -> Result<DayRange, Error> {
    let month = MonthId::new(required(year, "year")?, required(month, "month")?)?;
    match days {
        Some(d) => DayRange::parse(month, d),
        None => Ok(DayRange::whole(month)),
    }
}

/// Merges flags over the config file into a pipeline configuration.
pub fn resolve(args: &CommonArgs, file: &FileConfig) -> Result<PipelineConfig, Error> {
    let days = resolve_days(
        args.year.or(file.year),
        args.month.or(file.month),
        args.days.as_deref().or(file.days.as_deref()),
    )?;
    let stages = match args.stages.as_deref().or(file.stages.as_deref()) {
        Some(s) => s.parse()?,
        None => StageSet::ALL,
    };
    let policy = match args.policy.as_deref().or(file.policy.as_deref()) {
        Some(p) => p.parse::<ValidityPolicy>().map_err(Error::Config)?,
        None => ValidityPolicy::Default,
    };
    let min_elevation = args.min_elevation.or(file.min_elevation);
    if min_elevation.is_some_and(|e| !(-90.0..=90.0).contains(&e)) {
        return Err(Error::Config(
            "--min-elevation must be within [-90, 90]".into(),
        ));
    }
    let workers = args.workers.or(file.workers).unwrap_or(1);
    if workers == 0 {
        return Err(Error::Config("--workers must be at least 1".into()));
    }
    Ok(PipelineConfig {
        root: args.root.clone().or(file.root.clone()).unwrap_or_default(),
        days,
        stages,
        options: AggregateOptions {
            policy,
            min_elevation,
            exclude_sbas: args.exclude_sbas || file.exclude_sbas.unwrap_or(false),
        },
        out: args.out.clone().or(file.out.clone()).unwrap_or_default(),
        workers,
        plots: args.plots || file.plots.unwrap_or(false),
        digits: digits(args.two_digit_year, file.two_digit_year),
    })
}

pub fn resolve_synth(args: &SynthArgs, file: &FileConfig) -> Result<(PathBuf, SynthConfig), Error> {
    let out = required(args.out.clone().or(file.out.clone()), "out")?;
    let days = resolve_days(
        args.year.or(file.year),
        args.month.or(file.month),
        args.days.as_deref().or(file.days.as_deref()),
    )?;
    let rates = DefectRates {
        t20: args.t20_rate.or(file.t20_rate).unwrap_or(0.0),
        p61: args.p61_rate.or(file.p61_rate).unwrap_or(0.0),
        twd: args.twd_rate.or(file.twd_rate).unwrap_or(0.0),
    };
    for (name, r) in [("t20", rates.t20), ("p61", rates.p61), ("twd", rates.twd)] {
        if !(0.0..=1.0).contains(&r) {
            return Err(Error::Config(format!(
                "--{name}-rate must be within [0, 1]"
            )));
        }
    }
    let mut cfg = SynthConfig::new(args.seed.or(file.seed).unwrap_or(0), days);
    cfg.rates = rates;
    cfg.digits = digits(args.two_digit_year, file.two_digit_year);
    if let Some(n) = args.gps_prns.or(file.gps_prns) {
        if !(1..=32).contains(&n) {
            return Err(Error::Config("--gps-prns must be within 1..=32".into()));
        }
        cfg.gps_prns = n;
    }
    Ok((out, cfg))
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::MissingRoot(_)
        | Error::UnreadableDir { .. }
        | Error::CorruptArchive { .. }
        | Error::MalformedOutput { .. }
        | Error::Io(_) => EXIT_CORPUS,
        _ => EXIT_CONFIG,
    }
}

fn report(summary: &RunSummary) -> u8 {
    print!("{}", summary.readme);
    match summary.status {
        RunStatus::Complete => EXIT_OK,
        RunStatus::Partial => EXIT_PARTIAL,
    }
}

fn need_paths(cfg: &PipelineConfig, root: bool) -> Result<(), Error> {
    if root && cfg.root.as_os_str().is_empty() {
        return Err(Error::Config("--root is required".into()));
    }
    if cfg.out.as_os_str().is_empty() {
        return Err(Error::Config("--out is required".into()));
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<u8, Error> {
    let file = match &cli.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    match &cli.command {
        Command::Scan(args) => {
            let cfg = resolve(args, &file)?;
            if cfg.root.as_os_str().is_empty() {
                return Err(Error::Config("--root is required".into()));
            }
            let mut index = scan_corpus(&cfg.root, cfg.month())?;
            index
                .scn_gaps
                .retain(|k| (cfg.days.first..=cfg.days.last).contains(&k.day));
            print!("{}", index.summary());
            Ok(
                if index.scn_gaps.is_empty() && index.unreadable.is_empty() {
                    EXIT_OK
                } else {
                    EXIT_PARTIAL
                },
            )
        }
        Command::Preprocess(args) => {
            let cfg = resolve(args, &file)?;
            need_paths(&cfg, true)?;
            Ok(report(&pipeline::run_preprocess(&cfg)?))
        }
        Command::Aggregate(args) => {
            let cfg = resolve(args, &file)?;
            need_paths(&cfg, true)?;
            Ok(report(&pipeline::run_aggregate(&cfg)?))
        }
        Command::Run(args) => {
            let cfg = resolve(args, &file)?;
            need_paths(&cfg, true)?;
            Ok(report(&pipeline::run_pipeline(&cfg)?))
        }
        Command::Synth(args) => {
            let (out, cfg) = resolve_synth(args, &file)?;
            let manifest = synth::write_corpus(&out, &cfg)?;
            println!(
                "wrote {} hourly files ({} epochs); injected T20 {}, 61p {}, TwD {}",
                manifest.hourly_files,
                manifest.clean_epochs,
                manifest.counts.t20,
                manifest.counts.p61,
                manifest.counts.twd
            );
            Ok(EXIT_OK)
        }
        Command::Plot(args) => {
            let cfg = resolve(args, &file)?;
            need_paths(&cfg, false)?;
            let layout = OutputLayout::new(cfg.stages, cfg.days);
            let files = pipeline::run_plot(&cfg.out, &layout)?;
            println!("wrote {} plot files", files.len());
            Ok(EXIT_OK)
        }
    }
}

pub fn main_with(cli: Cli) -> ExitCode {
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("scinda-iono").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn flags_override_file() {
        let cli = parse(&[
            "run", "--root", "r", "--year", "2015", "--month", "3", "--stages", "twd", "--out", "o",
        ]);
        let Command::Run(args) = cli.command else {
            panic!()
        };
        let file: FileConfig = toml::from_str(
            "year = 2014\nmonth = 6\nstages = \"t20,61p\"\nworkers = 4\npolicy = \"strict\"\n",
        )
        .unwrap();
        let cfg = resolve(&args, &file).unwrap();
        assert_eq!(cfg.month(), MonthId::new(2015, 3).unwrap());
        assert_eq!(cfg.stages.label(), "TwD");
        assert_eq!(cfg.workers, 4);
        assert_eq!(cfg.options.policy, ValidityPolicy::Strict);
        assert_eq!(cfg.days.tag(), "01-31");
    }

    #[test]
    fn config_errors() {
        let file = FileConfig::default();
        let mut args = CommonArgs {
            year: Some(2015),
            month: Some(2),
            days: Some("01-30".into()),
            ..Default::default()
        };
        assert_eq!(exit_code(&resolve(&args, &file).unwrap_err()), EXIT_CONFIG);
        args.days = None;
        args.policy = Some("lenient".into());
        assert!(resolve(&args, &file).is_err());
        args.policy = None;
        args.month = None;
        assert!(resolve(&args, &file).is_err());
        assert!(toml::from_str::<FileConfig>("colour = 1").is_err());
    }

    #[test]
    fn synth_rates_validated() {
        let args = SynthArgs {
            out: Some("x".into()),
            year: Some(2015),
            month: Some(3),
            t20_rate: Some(1.5),
            ..Default::default()
        };
        assert!(resolve_synth(&args, &FileConfig::default()).is_err());
    }
}
