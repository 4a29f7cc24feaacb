//! Minute and hour scale series built from preprocessed epochs.
//!
//! Four dataset families come out of here: the 1-minute series of every
//! receiver-satellite pair, the 1-minute average over all satellites, and
//! hourly mean/std/count tables for both.

use std::collections::BTreeMap;
use std::fmt;

use chrono::Duration;

use crate::calendar::DayRange;
use crate::preprocess::MonthBuckets;
use crate::record::{EpochHeader, EpochTime, SatObservation, ScnEpoch};

pub const SBAS_PRN_MIN: u16 = 100;

/// The six output columns, in on-disk order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    L1S4,
    L2S4,
    Tecp,
    Tecf,
    Roti,
    Tecr,
}

impl Param {
    pub const ALL: [Param; 6] = [
        Param::L1S4,
        Param::L2S4,
        Param::Tecp,
        Param::Tecf,
        Param::Roti,
        Param::Tecr,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Param::L1S4 => "L1S4",
            Param::L2S4 => "L2S4",
            Param::Tecp => "TECP",
            Param::Tecf => "TECF",
            Param::Roti => "ROTI",
            Param::Tecr => "TECR",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn value(self, obs: &SatObservation) -> f64 {
        match self {
            Param::L1S4 => obs.l1s4,
            Param::L2S4 => obs.l2s4,
            Param::Tecp => obs.tecp,
            Param::Tecf => obs.tecf,
            Param::Roti => obs.roti,
            Param::Tecr => obs.tecr,
        }
    }

    /// Columns that come from the L2 channel and are zero-filled when L2
    /// is not tracked.
    pub fn needs_l2(self) -> bool {
        !matches!(self, Param::L1S4)
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Six optional values in `Param::ALL` order; `None` is a missing value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ParamVector(pub [Option<f64>; 6]);

impl ParamVector {
    pub const MISSING: ParamVector = ParamVector([None; 6]);

    pub fn get(&self, p: Param) -> Option<f64> {
        self.0[p.index()]
    }

    pub fn set(&mut self, p: Param, v: Option<f64>) {
        self.0[p.index()] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scope {
    All,
    Prn(u16),
}

/// Which observations feed which columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ValidityPolicy {
    /// L1S4 needs L1 %SAM > 0; the L2-dependent columns need L2 %SAM > 0.
    #[default]
    Default,
    /// Every accepted row contributes to every column, zero-fill included.
    Strict,
}

impl std::str::FromStr for ValidityPolicy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "default" => Ok(ValidityPolicy::Default),
            "strict" => Ok(ValidityPolicy::Strict),
            _ => Err(format!(
                "unknown validity policy '{s}' (expected strict|default)"
            )),
        }
    }
}

impl fmt::Display for ValidityPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValidityPolicy::Default => "default",
            ValidityPolicy::Strict => "strict",
        })
    }
}

/// Observation filters and the validity policy used for aggregation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AggregateOptions {
    pub policy: ValidityPolicy,
    /// Rows below this elevation (degrees) are ignored entirely.
    pub min_elevation: Option<f64>,
    /// Ignore PRNs >= 100.
    pub exclude_sbas: bool,
}

impl AggregateOptions {
    pub fn accepts(&self, obs: &SatObservation) -> bool {
        if self.exclude_sbas && obs.prn >= SBAS_PRN_MIN {
            return false;
        }
        match self.min_elevation {
            Some(min) => obs.el >= min,
            None => true,
        }
    }

    pub fn is_valid(&self, obs: &SatObservation, param: Param) -> bool {
        match self.policy {
            ValidityPolicy::Strict => true,
            ValidityPolicy::Default => {
                if param.needs_l2() {
                    obs.sam_l2 > 0.0
                } else {
                    obs.sam_l1 > 0.0
                }
            }
        }
    }

    /// One row's contribution, policy-masked.
    pub fn masked(&self, obs: &SatObservation) -> ParamVector {
        let mut v = ParamVector::MISSING;
        for p in Param::ALL {
            if self.is_valid(obs, p) {
                v.set(p, Some(p.value(obs)));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MinuteSeries {
    pub scope: Scope,
    pub samples: Vec<(EpochTime, ParamVector)>,
}

impl MinuteSeries {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourRow {
    /// Start of the hour.
    pub start: EpochTime,
    pub mean: ParamVector,
    pub std: ParamVector,
    pub nobs: [u32; 6],
}

#[derive(Debug, Clone, PartialEq)]
pub struct HourlyStats {
    pub scope: Scope,
    pub rows: Vec<HourRow>,
}

/// Unique PRNs of a month, ascending. Entry k (1-based) names per-PRN
/// output file k.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SatList(pub Vec<u16>);

impl SatList {
    pub fn from_prns(prns: impl IntoIterator<Item = u16>) -> Self {
        let mut v: Vec<u16> = prns.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SatList(v)
    }

    /// 1-based file index of a PRN.
    pub fn index_of(&self, prn: u16) -> Option<usize> {
        self.0.binary_search(&prn).ok().map(|i| i + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, u16)> + '_ {
        self.0.iter().enumerate().map(|(i, &p)| (i + 1, p))
    }
}

/// Well-formed epochs inside the day range in time order. If two epochs
/// share a timestamp the first in bucket order is kept.
pub fn ordered_epochs<'a>(
    buckets: &'a MonthBuckets,
    days: &DayRange,
) -> Vec<(EpochTime, &'a ScnEpoch)> {
    let mut out: Vec<(EpochTime, &ScnEpoch)> = buckets
        .epochs()
        .filter_map(|(_, e)| e.time().map(|t| (t, e)))
        .filter(|(t, _)| days.contains(t.date))
        .collect();
    out.sort_by_key(|(t, _)| *t);
    out.dedup_by_key(|(t, _)| *t);
    out
}

/// Per-column mean over the observations valid for that column.
///
/// Values are summed in sorted order so the result does not depend on row
/// order.
pub fn average_over_satellites(epoch: &ScnEpoch, opts: &AggregateOptions) -> ParamVector {
    let rows: Vec<&SatObservation> = epoch
        .observations
        .iter()
        .filter(|o| opts.accepts(o))
        .collect();
    let mut out = ParamVector::MISSING;
    let mut values = Vec::with_capacity(rows.len());
    for p in Param::ALL {
        values.clear();
        values.extend(
            rows.iter()
                .filter(|o| opts.is_valid(o, p))
                .map(|o| p.value(o)),
        );
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let sum: f64 = values.iter().sum();
        out.set(p, Some(sum / values.len() as f64));
    }
    out
}

/// One sample per surviving epoch, averaged over satellites.
pub fn build_all_series(
    buckets: &MonthBuckets,
    opts: &AggregateOptions,
    days: &DayRange,
) -> MinuteSeries {
    let samples = ordered_epochs(buckets, days)
        .into_iter()
        .map(|(t, e)| (t, average_over_satellites(e, opts)))
        .collect();
    MinuteSeries {
        scope: Scope::All,
        samples,
    }
}

/// The series of every PRN seen in the month, keyed by PRN.
pub fn split_per_prn(
    buckets: &MonthBuckets,
    opts: &AggregateOptions,
    days: &DayRange,
) -> BTreeMap<u16, MinuteSeries> {
    let mut out: BTreeMap<u16, MinuteSeries> = BTreeMap::new();
    for (t, epoch) in ordered_epochs(buckets, days) {
        for obs in epoch.observations.iter().filter(|o| opts.accepts(o)) {
            out.entry(obs.prn)
                .or_insert_with(|| MinuteSeries {
                    scope: Scope::Prn(obs.prn),
                    samples: Vec::new(),
                })
                .samples
                .push((t, opts.masked(obs)));
        }
    }
    out
}

/// Single-row epochs per PRN, in the `.scn` layout of a per-pair file.
pub fn split_per_prn_epochs(
    buckets: &MonthBuckets,
    opts: &AggregateOptions,
    days: &DayRange,
) -> BTreeMap<u16, Vec<ScnEpoch>> {
    let mut out: BTreeMap<u16, Vec<ScnEpoch>> = BTreeMap::new();
    for (_, epoch) in ordered_epochs(buckets, days) {
        let header: EpochHeader = *epoch.header.valid().expect("ordered epochs are valid");
        for obs in epoch.observations.iter().filter(|o| opts.accepts(o)) {
            out.entry(obs.prn)
                .or_default()
                .push(ScnEpoch::new(header, vec![*obs]));
        }
    }
    out
}

pub fn sat_list(series: &BTreeMap<u16, MinuteSeries>) -> SatList {
    SatList::from_prns(series.keys().copied())
}

/// Mean and sample standard deviation (divisor n-1) of a column sample.
pub fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (Some(mean), None);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (Some(mean), Some((ss / (n - 1) as f64).sqrt()))
}

/// Hourly mean, std and count on a dense grid covering every hour of the
/// day range. Hours without samples get nobs 0 and missing mean and std.
pub fn hourly_stats(series: &MinuteSeries, days: &DayRange) -> HourlyStats {
    let first = days.dates().next().expect("day range is never empty");
    let hours = days.day_count() as usize * 24;
    let mut cells: Vec<[Vec<f64>; 6]> = vec![Default::default(); hours];

    for (t, v) in &series.samples {
        if !days.contains(t.date) {
            continue;
        }
        let slot = (t.date - first).num_days() as usize * 24 + t.hour() as usize;
        for p in Param::ALL {
            if let Some(x) = v.get(p) {
                cells[slot][p.index()].push(x);
            }
        }
    }

    let rows = cells
        .into_iter()
        .enumerate()
        .map(|(slot, columns)| {
            let date = first + Duration::days((slot / 24) as i64);
            let start = EpochTime::new(date, (slot % 24) as u32 * 3600).expect("hour start");
            let mut row = HourRow {
                start,
                mean: ParamVector::MISSING,
                std: ParamVector::MISSING,
                nobs: [0; 6],
            };
            for p in Param::ALL {
                let values = &columns[p.index()];
                let (mean, std) = mean_std(values);
                row.mean.set(p, mean);
                row.std.set(p, std);
                row.nobs[p.index()] = values.len() as u32;
            }
            row
        })
        .collect();
    HourlyStats {
        scope: series.scope,
        rows,
    }
}

/// Parsed ROTI against |dTECR|/dt (TECU/min) for one pair's series.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct RotiCheck {
    /// Consecutive one-minute sample pairs compared.
    pub pairs: usize,
    pub mean_abs_diff: f64,
}

/// Compares the parsed ROTI column with the TECR rate over consecutive
/// samples exactly one minute apart. Informational only; the receiver's
/// ROTI formula is not known.
pub fn roti_consistency(series: &MinuteSeries) -> RotiCheck {
    let mut pairs = 0usize;
    let mut total = 0.0;
    for w in series.samples.windows(2) {
        let (t0, v0) = &w[0];
        let (t1, v1) = &w[1];
        if (t1.datetime() - t0.datetime()).num_seconds() != 60 {
            continue;
        }
        if let (Some(a), Some(b), Some(roti)) = (
            v0.get(Param::Tecr),
            v1.get(Param::Tecr),
            v1.get(Param::Roti),
        ) {
            total += (roti - (b - a).abs()).abs();
            pairs += 1;
        }
    }
    RotiCheck {
        pairs,
        mean_abs_diff: if pairs == 0 {
            0.0
        } else {
            total / pairs as f64
        },
    }
}
