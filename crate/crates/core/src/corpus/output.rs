//! Processed dataset families and their on-disk layout.
//!
//! ```text
//! All_<stages>_<YYYY-MM>/           SCN_<YYYY-MM>_res1m_<DD-DD>.dat (+ _DATES-TIMES)
//! SATs_<stages>_<YYYY-MM>/          SCN_<YYYY-MM>_res1m_<DD-DD>_<k>.dat (+ _DATES-TIMES)
//!                                   SATs_LIST_UNIQUEs_<YYYYMM>.dat
//! All_<stages>_Means1h_<YYYY-MM>/   SCN_<YYYY-MM>_Means1h_<DD-DD>.dat (+ _DATES-TIMES, _Nobs, _Std)
//! SATs_<stages>_SATs1h_<YYYY-MM>/   SCN_<YYYY-MM>_SATs1h_<DD-DD>_<k>.dat (+ _DATES-TIMES, _Nobs, _Std)
//! ```
//!
//! Every `.dat` file has six right-aligned columns of width 14, so a data
//! file and its companions have identical row lengths. Reals are printed
//! with six significant digits (`%.5e`), missing values as `NaN`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{Datelike, NaiveDate};

use crate::aggregate::{HourRow, HourlyStats, MinuteSeries, ParamVector, SatList, Scope};
use crate::calendar::DayRange;
use crate::error::{Error, Result};
use crate::preprocess::{MonthBuckets, StageSet};
use crate::record::{serialize_scn, EpochTime, ScnEpoch};

use super::raw::{RawExt, RawFileKey, YearDigits};

pub const COLUMN_WIDTH: usize = 14;
pub const MISSING_TOKEN: &str = "NaN";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    All1m,
    Sats1m,
    All1h,
    Sats1h,
}

impl Family {
    pub const ALL: [Family; 4] = [Family::All1m, Family::Sats1m, Family::All1h, Family::Sats1h];

    pub fn hourly(self) -> bool {
        matches!(self, Family::All1h | Family::Sats1h)
    }

    pub fn per_prn(self) -> bool {
        matches!(self, Family::Sats1m | Family::Sats1h)
    }
}

/// Names folders and files for one processed month.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutputLayout {
    pub stages: StageSet,
    pub days: DayRange,
}

impl OutputLayout {
    pub fn new(stages: StageSet, days: DayRange) -> Self {
        OutputLayout { stages, days }
    }

    fn month_tag(&self) -> String {
        self.days.month.tag()
    }

    fn prefixed(&self, scope: &str, suffix: &str) -> String {
        let label = self.stages.label();
        let mut name = scope.to_string();
        if !label.is_empty() {
            name.push('_');
            name.push_str(&label);
        }
        if !suffix.is_empty() {
            name.push('_');
            name.push_str(suffix);
        }
        name.push('_');
        name.push_str(&self.month_tag());
        name
    }

    pub fn folder(&self, family: Family) -> String {
        match family {
            Family::All1m => self.prefixed("All", ""),
            Family::Sats1m => self.prefixed("SATs", ""),
            Family::All1h => self.prefixed("All", "Means1h"),
            Family::Sats1h => self.prefixed("SATs", "SATs1h"),
        }
    }

    /// Folder of the corrected hourly `.scn` files.
    pub fn corrected_folder(&self) -> String {
        self.prefixed("SCN", "")
    }

    /// Folder of the per-pair `.scn` files.
    pub fn prn_scn_folder(&self) -> String {
        self.prefixed("SATs", "SCN")
    }

    /// File stem without companion suffix. `index` is the 1-based SatList
    /// position for per-PRN families.
    pub fn stem(&self, family: Family, index: Option<usize>) -> String {
        let kind = match family {
            Family::All1m | Family::Sats1m => "res1m",
            Family::All1h => "Means1h",
            Family::Sats1h => "SATs1h",
        };
        let mut stem = format!("SCN_{}_{}_{}", self.month_tag(), kind, self.days.tag());
        if let Some(k) = index {
            let _ = write!(stem, "_{k}");
        }
        stem
    }

    pub fn data_file(&self, family: Family, index: Option<usize>) -> String {
        format!("{}.dat", self.stem(family, index))
    }

    pub fn dates_file(&self, family: Family, index: Option<usize>) -> String {
        format!("{}_DATES-TIMES.dat", self.stem(family, index))
    }

    pub fn nobs_file(&self, family: Family, index: Option<usize>) -> String {
        format!("{}_Nobs.dat", self.stem(family, index))
    }

    pub fn std_file(&self, family: Family, index: Option<usize>) -> String {
        format!("{}_Std.dat", self.stem(family, index))
    }

    pub fn sat_list_file(&self) -> String {
        let m = self.days.month;
        format!("SATs_LIST_UNIQUEs_{:04}{:02}.dat", m.year, m.month)
    }

    pub fn prn_scn_file(&self, index: usize) -> String {
        format!("SCN_{}_{}_{}.scn", self.month_tag(), self.days.tag(), index)
    }

    /// Every file name of a family, in the order it is written.
    pub fn family_files(&self, family: Family, index: Option<usize>) -> Vec<String> {
        let mut names = vec![
            self.data_file(family, index),
            self.dates_file(family, index),
        ];
        if family.hourly() {
            names.push(self.nobs_file(family, index));
            names.push(self.std_file(family, index));
        }
        names
    }
}

/// `%.5e` with a sign and at least two exponent digits, e.g. `8.77778e-02`.
pub fn format_sci(v: f64) -> String {
    if !v.is_finite() {
        return MISSING_TOKEN.to_string();
    }
    let s = format!("{v:.5e}");
    let (mantissa, exp) = s.split_once('e').expect("LowerExp always has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

fn push_cell(out: &mut String, cell: &str) {
    let _ = write!(out, "{cell:>COLUMN_WIDTH$}");
}

pub fn format_values_row(v: &ParamVector) -> String {
    let mut row = String::with_capacity(COLUMN_WIDTH * 6 + 1);
    for x in v.0 {
        push_cell(
            &mut row,
            &x.map_or_else(|| MISSING_TOKEN.to_string(), format_sci),
        );
    }
    row.push('\n');
    row
}

pub fn format_nobs_row(nobs: &[u32; 6]) -> String {
    let mut row = String::with_capacity(COLUMN_WIDTH * 6 + 1);
    for n in nobs {
        push_cell(&mut row, &n.to_string());
    }
    row.push('\n');
    row
}

/// One row of a DATES-TIMES companion file.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DatesRow {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
    /// Seconds from the start of the day.
    pub seconds: u32,
    pub fraction_of_day: f64,
}

impl DatesRow {
    pub fn of(t: &EpochTime) -> Self {
        DatesRow {
            year: t.date.year(),
            month: t.date.month(),
            day: t.date.day(),
            hour: t.hour(),
            seconds: t.utsec,
            fraction_of_day: t.fraction_of_day(),
        }
    }

    pub fn time(&self) -> Option<EpochTime> {
        let date = NaiveDate::from_ymd_opt(self.year, self.month, self.day)?;
        EpochTime::new(date, self.seconds).ok()
    }

    pub fn format(&self) -> String {
        let mut row = String::with_capacity(COLUMN_WIDTH * 6 + 1);
        for cell in [
            self.year.to_string(),
            self.month.to_string(),
            self.day.to_string(),
            self.hour.to_string(),
            self.seconds.to_string(),
            format_sci(self.fraction_of_day),
        ] {
            push_cell(&mut row, &cell);
        }
        row.push('\n');
        row
    }
}

fn write_file(path: &Path, contents: &str) -> Result<PathBuf> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(path.to_path_buf())
}

fn check_range(days: &DayRange, times: impl IntoIterator<Item = EpochTime>) -> Result<()> {
    for t in times {
        if !days.contains(t.date) {
            return Err(Error::OutsideDayRange(
                t.datetime().to_string(),
                format!("{} {}", days.month, days.tag()),
            ));
        }
    }
    Ok(())
}

fn minute_contents(series: &MinuteSeries) -> (String, String) {
    let mut data = String::new();
    let mut dates = String::new();
    for (t, v) in &series.samples {
        data.push_str(&format_values_row(v));
        dates.push_str(&DatesRow::of(t).format());
    }
    (data, dates)
}

fn hourly_contents(stats: &HourlyStats) -> [String; 4] {
    let mut out: [String; 4] = Default::default();
    for HourRow {
        start,
        mean,
        std,
        nobs,
    } in &stats.rows
    {
        out[0].push_str(&format_values_row(mean));
        out[1].push_str(&DatesRow::of(start).format());
        out[2].push_str(&format_nobs_row(nobs));
        out[3].push_str(&format_values_row(std));
    }
    out
}

fn write_minute(
    dir: &Path,
    layout: &OutputLayout,
    family: Family,
    index: Option<usize>,
    series: &MinuteSeries,
) -> Result<Vec<PathBuf>> {
    check_range(&layout.days, series.samples.iter().map(|(t, _)| *t))?;
    let (data, dates) = minute_contents(series);
    Ok(vec![
        write_file(&dir.join(layout.data_file(family, index)), &data)?,
        write_file(&dir.join(layout.dates_file(family, index)), &dates)?,
    ])
}

fn write_hourly(
    dir: &Path,
    layout: &OutputLayout,
    family: Family,
    index: Option<usize>,
    stats: &HourlyStats,
) -> Result<Vec<PathBuf>> {
    check_range(&layout.days, stats.rows.iter().map(|r| r.start))?;
    let [data, dates, nobs, std] = hourly_contents(stats);
    Ok(vec![
        write_file(&dir.join(layout.data_file(family, index)), &data)?,
        write_file(&dir.join(layout.dates_file(family, index)), &dates)?,
        write_file(&dir.join(layout.nobs_file(family, index)), &nobs)?,
        write_file(&dir.join(layout.std_file(family, index)), &std)?,
    ])
}

/// 1-minute all-satellite family.
pub fn write_all_minute(
    root: &Path,
    layout: &OutputLayout,
    series: &MinuteSeries,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.folder(Family::All1m));
    write_minute(&dir, layout, Family::All1m, None, series)
}

/// 1-minute per-PRN family plus the SatList file.
pub fn write_sats_minute(
    root: &Path,
    layout: &OutputLayout,
    series: &BTreeMap<u16, MinuteSeries>,
    list: &SatList,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.folder(Family::Sats1m));
    let mut listing = String::new();
    for (_, prn) in list.iter() {
        let _ = writeln!(listing, "{prn}");
    }
    let mut written = vec![write_file(&dir.join(layout.sat_list_file()), &listing)?];
    for (k, prn) in list.iter() {
        if let Some(s) = series.get(&prn) {
            written.extend(write_minute(&dir, layout, Family::Sats1m, Some(k), s)?);
        }
    }
    Ok(written)
}

pub fn write_all_hourly(
    root: &Path,
    layout: &OutputLayout,
    stats: &HourlyStats,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.folder(Family::All1h));
    write_hourly(&dir, layout, Family::All1h, None, stats)
}

pub fn write_sats_hourly(
    root: &Path,
    layout: &OutputLayout,
    stats: &BTreeMap<u16, HourlyStats>,
    list: &SatList,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.folder(Family::Sats1h));
    let mut written = Vec::new();
    for (k, prn) in list.iter() {
        if let Some(s) = stats.get(&prn) {
            written.extend(write_hourly(&dir, layout, Family::Sats1h, Some(k), s)?);
        }
    }
    Ok(written)
}

/// Per-pair `.scn` files, one header and one row per epoch.
pub fn write_prn_scn(
    root: &Path,
    layout: &OutputLayout,
    epochs: &BTreeMap<u16, Vec<ScnEpoch>>,
    list: &SatList,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.prn_scn_folder());
    let mut written = Vec::new();
    for (k, prn) in list.iter() {
        if let Some(e) = epochs.get(&prn) {
            written.push(write_file(
                &dir.join(layout.prn_scn_file(k)),
                &serialize_scn(e),
            )?);
        }
    }
    Ok(written)
}

/// Corrected hourly files, uncompressed, named like the raw archives.
pub fn write_corrected_scn(
    root: &Path,
    layout: &OutputLayout,
    buckets: &MonthBuckets,
    digits: YearDigits,
) -> Result<Vec<PathBuf>> {
    let dir = root.join(layout.corrected_folder());
    let mut written = Vec::new();
    for (key, epochs) in &buckets.hours {
        let name = format!("{}.scn", RawFileKey::new(*key, RawExt::Scn).stem(digits));
        written.push(write_file(&dir.join(name), &serialize_scn(epochs))?);
    }
    Ok(written)
}

fn read_rows<T>(path: &Path, parse: impl Fn(&[&str]) -> Option<T>) -> Result<Vec<T>> {
    let text = fs::read_to_string(path)?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let tokens: Vec<&str> = line.split_ascii_whitespace().collect();
            Some(&tokens)
                .filter(|t| t.len() == 6)
                .and_then(|t| parse(t))
                .ok_or_else(|| Error::MalformedOutput {
                    path: path.to_path_buf(),
                    reason: format!("line {} does not have six valid columns", i + 1),
                })
        })
        .collect()
}

pub fn read_values(path: &Path) -> Result<Vec<ParamVector>> {
    read_rows(path, |t| {
        let mut v = ParamVector::MISSING;
        for (i, tok) in t.iter().enumerate() {
            if *tok != MISSING_TOKEN {
                v.0[i] = Some(tok.parse().ok()?);
            }
        }
        Some(v)
    })
}

pub fn read_nobs(path: &Path) -> Result<Vec<[u32; 6]>> {
    read_rows(path, |t| {
        let mut n = [0u32; 6];
        for (i, tok) in t.iter().enumerate() {
            n[i] = tok.parse().ok()?;
        }
        Some(n)
    })
}

pub fn read_dates(path: &Path) -> Result<Vec<DatesRow>> {
    read_rows(path, |t| {
        Some(DatesRow {
            year: t[0].parse().ok()?,
            month: t[1].parse().ok()?,
            day: t[2].parse().ok()?,
            hour: t[3].parse().ok()?,
            seconds: t[4].parse().ok()?,
            fraction_of_day: t[5].parse().ok()?,
        })
    })
}

fn times(path: &Path, rows: Vec<DatesRow>) -> Result<Vec<EpochTime>> {
    rows.into_iter()
        .map(|r| {
            r.time().ok_or_else(|| Error::MalformedOutput {
                path: path.to_path_buf(),
                reason: "invalid date in DATES-TIMES row".to_string(),
            })
        })
        .collect()
}

fn misaligned(path: &Path) -> Error {
    Error::MalformedOutput {
        path: path.to_path_buf(),
        reason: "row count differs from the DATES-TIMES companion".to_string(),
    }
}

/// Reads a 1-minute data file and its DATES-TIMES companion.
pub fn read_minute(
    dir: &Path,
    layout: &OutputLayout,
    family: Family,
    index: Option<usize>,
    scope: Scope,
) -> Result<MinuteSeries> {
    let data_path = dir.join(layout.data_file(family, index));
    let dates_path = dir.join(layout.dates_file(family, index));
    let values = read_values(&data_path)?;
    let times = times(&dates_path, read_dates(&dates_path)?)?;
    if values.len() != times.len() {
        return Err(misaligned(&data_path));
    }
    Ok(MinuteSeries {
        scope,
        samples: times.into_iter().zip(values).collect(),
    })
}

/// Reads an hourly data file with its DATES-TIMES, Nobs and Std companions.
pub fn read_hourly(
    dir: &Path,
    layout: &OutputLayout,
    family: Family,
    index: Option<usize>,
    scope: Scope,
) -> Result<HourlyStats> {
    let data_path = dir.join(layout.data_file(family, index));
    let dates_path = dir.join(layout.dates_file(family, index));
    let mean = read_values(&data_path)?;
    let std = read_values(&dir.join(layout.std_file(family, index)))?;
    let nobs = read_nobs(&dir.join(layout.nobs_file(family, index)))?;
    let times = times(&dates_path, read_dates(&dates_path)?)?;
    if [mean.len(), std.len(), nobs.len()]
        .iter()
        .any(|&n| n != times.len())
    {
        return Err(misaligned(&data_path));
    }
    let rows = times
        .into_iter()
        .zip(mean)
        .zip(std)
        .zip(nobs)
        .map(|(((start, mean), std), nobs)| HourRow {
            start,
            mean,
            std,
            nobs,
        })
        .collect();
    Ok(HourlyStats { scope, rows })
}

/// The all-satellite 1-minute series of a written output tree.
pub fn load_all_minute(root: &Path, layout: &OutputLayout) -> Result<MinuteSeries> {
    read_minute(
        &root.join(layout.folder(Family::All1m)),
        layout,
        Family::All1m,
        None,
        Scope::All,
    )
}

/// The all-satellite hourly statistics of a written output tree.
pub fn load_all_hourly(root: &Path, layout: &OutputLayout) -> Result<HourlyStats> {
    read_hourly(
        &root.join(layout.folder(Family::All1h)),
        layout,
        Family::All1h,
        None,
        Scope::All,
    )
}
