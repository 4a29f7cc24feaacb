//! End-to-end processing of one month: scan, extract, parse, correct,
//! aggregate and write.
//!
//! Extraction and parsing run on a worker pool; everything after the
//! parse is reduced sequentially in key order, so output bytes do not
//! depend on the worker count.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::aggregate::{
    build_all_series, hourly_stats, sat_list, split_per_prn, split_per_prn_epochs,
    AggregateOptions, HourlyStats, MinuteSeries, Param, SatList,
};
use crate::calendar::{DayRange, MonthId};
use crate::corpus::output::{self, OutputLayout};
use crate::corpus::raw::{
    extract, scan_corpus, scan_flat, CorpusIndex, EntryStatus, RawExt, YearDigits,
};
use crate::error::{Error, Result};
use crate::plot;
use crate::preprocess::{preprocess_month, BucketKey, CorrectionLog, MonthBuckets, StageSet};
use crate::record::{parse_scn, Diagnostic};

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Raw corpus root, or a flat folder of corrected files for
    /// [`run_aggregate`].
    pub root: PathBuf,
    pub days: DayRange,
    pub stages: StageSet,
    pub options: AggregateOptions,
    pub out: PathBuf,
    pub workers: usize,
    pub plots: bool,
    pub digits: YearDigits,
}

impl PipelineConfig {
    pub fn new(root: impl Into<PathBuf>, out: impl Into<PathBuf>, days: DayRange) -> Self {
        PipelineConfig {
            root: root.into(),
            days,
            stages: StageSet::ALL,
            options: AggregateOptions::default(),
            out: out.into(),
            workers: 1,
            plots: false,
            digits: YearDigits::One,
        }
    }

    pub fn month(&self) -> MonthId {
        self.days.month
    }

    pub fn layout(&self) -> OutputLayout {
        OutputLayout::new(self.stages, self.days)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Complete,
    /// Outputs were written but some hours were missing or unreadable.
    Partial,
}

/// Per-month parse totals over all hourly files.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseTotals {
    pub files: usize,
    pub lines: usize,
    pub epochs_ok: usize,
    pub epochs_malformed: usize,
    pub observation_rows: usize,
    pub lines_skipped: usize,
    pub diagnostics: Vec<(PathBuf, Diagnostic)>,
}

#[derive(Debug, Clone)]
pub struct LoadedMonth {
    pub index: CorpusIndex,
    pub buckets: MonthBuckets,
    pub totals: ParseTotals,
    /// Hours inside the day range without a usable file.
    pub gaps: Vec<BucketKey>,
    /// Files that failed to extract, with the reason.
    pub failures: Vec<(PathBuf, String)>,
}

#[derive(Debug, Clone)]
pub struct Aggregates {
    pub all_minute: MinuteSeries,
    pub prn_minute: BTreeMap<u16, MinuteSeries>,
    pub all_hourly: HourlyStats,
    pub prn_hourly: BTreeMap<u16, HourlyStats>,
    pub sat_list: SatList,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub status: RunStatus,
    pub log: CorrectionLog,
    pub epochs_after: usize,
    pub files_written: Vec<PathBuf>,
    pub readme: String,
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Extracts and parses every processable `.scn` entry of the day range.
pub fn load_month(index: CorpusIndex, days: &DayRange, workers: usize) -> Result<LoadedMonth> {
    let entries: Vec<_> = index
        .scn_entries()
        .filter(|e| {
            let k = e.key.hour;
            (days.first..=days.last).contains(&k.day)
        })
        .cloned()
        .collect();

    let parsed: Vec<_> = pool(workers)?.install(|| {
        entries
            .par_iter()
            .map(|entry| (entry, extract(entry).map(|bytes| parse_scn(&bytes))))
            .collect()
    });

    let mut buckets = MonthBuckets::new(days.month);
    let mut totals = ParseTotals::default();
    let mut failures = Vec::new();
    for (entry, result) in parsed {
        match result {
            Ok((epochs, report)) => {
                totals.files += 1;
                totals.lines += report.lines_total;
                totals.epochs_ok += report.epochs_ok;
                totals.epochs_malformed += report.epochs_malformed;
                totals.observation_rows += report.observation_rows;
                totals.lines_skipped += report.lines_skipped;
                totals.diagnostics.extend(
                    report
                        .diagnostics
                        .into_iter()
                        .map(|d| (entry.path.clone(), d)),
                );
                buckets.insert(entry.key.hour, epochs);
            }
            Err(e) => {
                log::warn!("{e}");
                failures.push((entry.path.clone(), e.to_string()));
            }
        }
    }
    for entry in index.entries.values() {
        let in_range = (days.first..=days.last).contains(&entry.key.hour.day);
        if entry.key.ext == RawExt::Scn && !entry.processable() && in_range {
            let reason = match entry.status {
                EntryStatus::Empty => "empty archive",
                _ => "not a gzip stream",
            };
            failures.push((entry.path.clone(), reason.to_string()));
        }
    }
    failures.sort();

    let gaps = CorpusIndex::expected_hours(days.month)
        .filter(|k| (days.first..=days.last).contains(&k.day))
        .filter(|k| !buckets.hours.contains_key(k))
        .collect();

    Ok(LoadedMonth {
        index,
        buckets,
        totals,
        gaps,
        failures,
    })
}

/// Builds all four dataset families from corrected buckets.
pub fn aggregate(
    buckets: &MonthBuckets,
    options: &AggregateOptions,
    days: &DayRange,
    workers: usize,
) -> Result<Aggregates> {
    let all_minute = build_all_series(buckets, options, days);
    let prn_minute = split_per_prn(buckets, options, days);
    let all_hourly = hourly_stats(&all_minute, days);
    let prn_hourly: BTreeMap<u16, HourlyStats> = pool(workers)?.install(|| {
        prn_minute
            .par_iter()
            .map(|(prn, s)| (*prn, hourly_stats(s, days)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect()
    });
    let sat_list = sat_list(&prn_minute);
    Ok(Aggregates {
        all_minute,
        prn_minute,
        all_hourly,
        prn_hourly,
        sat_list,
    })
}

/// Writes the four families, the per-pair `.scn` files and, if asked, plots.
pub fn write_aggregates(
    cfg: &PipelineConfig,
    buckets: &MonthBuckets,
    agg: &Aggregates,
) -> Result<Vec<PathBuf>> {
    let layout = cfg.layout();
    let out = &cfg.out;
    let mut files = Vec::new();
    files.extend(output::write_all_minute(out, &layout, &agg.all_minute)?);
    files.extend(output::write_sats_minute(
        out,
        &layout,
        &agg.prn_minute,
        &agg.sat_list,
    )?);
    files.extend(output::write_all_hourly(out, &layout, &agg.all_hourly)?);
    files.extend(output::write_sats_hourly(
        out,
        &layout,
        &agg.prn_hourly,
        &agg.sat_list,
    )?);
    let prn_epochs = split_per_prn_epochs(buckets, &cfg.options, &cfg.days);
    files.extend(output::write_prn_scn(
        out,
        &layout,
        &prn_epochs,
        &agg.sat_list,
    )?);
    if cfg.plots {
        files.extend(plot_families(
            out,
            &layout,
            &agg.all_minute,
            &agg.all_hourly,
        )?);
    }
    Ok(files)
}

pub fn plots_folder(layout: &OutputLayout) -> String {
    let label = layout.stages.label();
    if label.is_empty() {
        format!("Plots_{}", layout.days.month.tag())
    } else {
        format!("Plots_{label}_{}", layout.days.month.tag())
    }
}

pub fn plot_families(
    out: &Path,
    layout: &OutputLayout,
    minute: &MinuteSeries,
    hourly: &HourlyStats,
) -> Result<Vec<PathBuf>> {
    let dir = out.join(plots_folder(layout));
    let mut files = plot::emit_minute_plots(minute, &dir)?;
    files.extend(plot::emit_hourly_plots(hourly, &dir)?);
    Ok(files)
}

/// Canonical form of a path that may not exist yet: the deepest existing
/// ancestor is canonicalized and the remaining components appended.
fn canonical_target(path: &Path) -> Result<PathBuf> {
    let absolute = std::path::absolute(path)?;
    let mut existing = absolute.as_path();
    let mut rest = Vec::new();
    while !existing.exists() {
        match (existing.parent(), existing.file_name()) {
            (Some(parent), Some(name)) => {
                rest.push(name.to_os_string());
                existing = parent;
            }
            _ => break,
        }
    }
    let mut out = fs::canonicalize(existing)?;
    out.extend(rest.into_iter().rev());
    Ok(out)
}

fn prepare_output(cfg: &PipelineConfig) -> Result<()> {
    if !cfg.root.is_dir() {
        return Err(Error::MissingRoot(cfg.root.clone()));
    }
    let root = fs::canonicalize(&cfg.root)?;
    let out = canonical_target(&cfg.out)?;
    let year_dir = root.join(format!("{:04}", cfg.month().year));
    if out == root || out.starts_with(&year_dir) {
        return Err(Error::Config(format!(
            "output root {} would write into the raw corpus",
            cfg.out.display()
        )));
    }
    fs::create_dir_all(&cfg.out).map_err(|e| {
        Error::Config(format!(
            "cannot create output root {}: {e}",
            cfg.out.display()
        ))
    })?;
    Ok(())
}

fn write_reports(
    cfg: &PipelineConfig,
    loaded: &LoadedMonth,
    log: &CorrectionLog,
    files: &mut Vec<PathBuf>,
) -> Result<()> {
    let month = cfg.month().tag();
    let log_path = cfg.out.join(format!("CorrectionLog_{month}.txt"));
    fs::write(&log_path, log.report(cfg.month(), cfg.stages))?;
    files.push(log_path);
    if !loaded.totals.diagnostics.is_empty() {
        let mut text = String::new();
        for (path, d) in &loaded.totals.diagnostics {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("?");
            let _ = writeln!(text, "{name}:{}: {}", d.line, d.reason);
        }
        let path = cfg.out.join(format!("ParseDiagnostics_{month}.txt"));
        fs::write(&path, text)?;
        files.push(path);
    }
    Ok(())
}

fn status_of(loaded: &LoadedMonth) -> RunStatus {
    if loaded.gaps.is_empty() && loaded.failures.is_empty() {
        RunStatus::Complete
    } else {
        RunStatus::Partial
    }
}

/// The plain-text summary written next to the outputs.
pub fn month_readme(
    cfg: &PipelineConfig,
    loaded: &LoadedMonth,
    log: &CorrectionLog,
    epochs_after: usize,
    agg: Option<&Aggregates>,
) -> String {
    let layout = cfg.layout();
    let t = &loaded.totals;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "SCINDA scintillation data, {} (days {})",
        cfg.month(),
        cfg.days.tag()
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "Stages applied: {}", cfg.stages);
    let _ = writeln!(s, "Validity policy: {}", cfg.options.policy);
    let _ = writeln!(
        s,
        "Elevation mask: {}",
        cfg.options
            .min_elevation
            .map_or_else(|| "none".to_string(), |e| format!("{e} deg"))
    );
    let _ = writeln!(
        s,
        "SBAS PRNs (>= 100): {}",
        if cfg.options.exclude_sbas {
            "excluded"
        } else {
            "included"
        }
    );
    let _ = writeln!(s);
    let expected = cfg.days.day_count() as usize * 24;
    let _ = writeln!(
        s,
        "Hourly .scn files: {expected} expected, {} read, {} missing, {} unreadable",
        t.files,
        loaded.gaps.len() - loaded.failures.len().min(loaded.gaps.len()),
        loaded.failures.len()
    );
    let _ = writeln!(
        s,
        "Lines: {}; epochs: {} well-formed, {} malformed; observation rows: {}; skipped lines: {}",
        t.lines, t.epochs_ok, t.epochs_malformed, t.observation_rows, t.lines_skipped
    );
    let _ = writeln!(
        s,
        "Corrections: T20 removed {}, 61p moved {}, 61p dropped {} (outside month) + {} (duplicates), TwD removed {}",
        log.t20_removed,
        log.moved_61p.len(),
        log.out_of_month_61p.len(),
        log.duplicates_61p.len(),
        log.twd_removed
    );
    let _ = writeln!(s, "Epochs after corrections: {epochs_after}");
    if let Some(agg) = agg {
        let prns: Vec<String> = agg.sat_list.0.iter().map(u16::to_string).collect();
        let _ = writeln!(
            s,
            "Satellites: {} ({})",
            agg.sat_list.0.len(),
            prns.join(" ")
        );
        let _ = writeln!(
            s,
            "1-minute all-satellite samples: {}",
            agg.all_minute.len()
        );
        let _ = writeln!(s);
        let _ = writeln!(s, "Folders:");
        for family in output::Family::ALL {
            let _ = writeln!(s, "  {}", layout.folder(family));
        }
        let _ = writeln!(s, "  {}", layout.prn_scn_folder());
        if cfg.plots {
            let _ = writeln!(s, "  {}", plots_folder(&layout));
        }
    }
    let _ = writeln!(s);
    let cols: Vec<&str> = Param::ALL.iter().map(|p| p.name()).collect();
    let _ = writeln!(s, "Data columns: {}", cols.join(" "));
    let _ = writeln!(
        s,
        "DATES-TIMES columns: year month day hour seconds-from-start-of-day fraction-of-day"
    );
    let _ = writeln!(s, "Hourly rows are stamped at the start of the hour; _Std is the sample standard deviation (n-1), _Nobs the number of minute samples.");
    let _ = writeln!(s, "Missing values are written as NaN.");
    if !loaded.gaps.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Hours without data:");
        for k in &loaded.gaps {
            let _ = writeln!(s, "  {k}");
        }
    }
    if !loaded.failures.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "Unreadable files:");
        for (path, reason) in &loaded.failures {
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("?");
            let _ = writeln!(s, "  {name}: {reason}");
        }
    }
    s
}

fn finish(
    cfg: &PipelineConfig,
    loaded: &LoadedMonth,
    log: CorrectionLog,
    epochs_after: usize,
    agg: Option<&Aggregates>,
    mut files: Vec<PathBuf>,
) -> Result<RunSummary> {
    write_reports(cfg, loaded, &log, &mut files)?;
    let readme = month_readme(cfg, loaded, &log, epochs_after, agg);
    let path = cfg.out.join(format!("README_{}.txt", cfg.month().tag()));
    fs::write(&path, &readme)?;
    files.push(path);
    Ok(RunSummary {
        status: status_of(loaded),
        log,
        epochs_after,
        files_written: files,
        readme,
    })
}

/// Scan, extract, parse, correct, aggregate and write one month.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunSummary> {
    prepare_output(cfg)?;
    let index = scan_corpus(&cfg.root, cfg.month())?;
    let loaded = load_month(index, &cfg.days, cfg.workers)?;
    let (buckets, log) = preprocess_month(loaded.buckets.clone(), cfg.stages);
    let agg = aggregate(&buckets, &cfg.options, &cfg.days, cfg.workers)?;
    let files = write_aggregates(cfg, &buckets, &agg)?;
    finish(cfg, &loaded, log, buckets.epoch_count(), Some(&agg), files)
}

/// Scan, extract, parse and correct, writing the corrected hourly files.
pub fn run_preprocess(cfg: &PipelineConfig) -> Result<RunSummary> {
    prepare_output(cfg)?;
    let index = scan_corpus(&cfg.root, cfg.month())?;
    let loaded = load_month(index, &cfg.days, cfg.workers)?;
    let (buckets, log) = preprocess_month(loaded.buckets.clone(), cfg.stages);
    let files = output::write_corrected_scn(&cfg.out, &cfg.layout(), &buckets, cfg.digits)?;
    finish(cfg, &loaded, log, buckets.epoch_count(), None, files)
}

/// Aggregates a flat folder of already corrected hourly `.scn` files.
/// `cfg.stages` only labels the outputs; no correction is applied.
pub fn run_aggregate(cfg: &PipelineConfig) -> Result<RunSummary> {
    prepare_output(cfg)?;
    let index = scan_flat(&cfg.root, cfg.month())?;
    let loaded = load_month(index, &cfg.days, cfg.workers)?;
    let buckets = loaded.buckets.clone();
    let agg = aggregate(&buckets, &cfg.options, &cfg.days, cfg.workers)?;
    let files = write_aggregates(cfg, &buckets, &agg)?;
    finish(
        cfg,
        &loaded,
        CorrectionLog::default(),
        buckets.epoch_count(),
        Some(&agg),
        files,
    )
}

/// Re-reads the all-satellite families of an output tree and plots them.
pub fn run_plot(out: &Path, layout: &OutputLayout) -> Result<Vec<PathBuf>> {
    let minute = output::load_all_minute(out, layout)?;
    let hourly = output::load_all_hourly(out, layout)?;
    plot_families(out, layout, &minute, &hourly)
}
