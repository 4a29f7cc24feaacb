//! Corrections applied to a month of hourly epoch buckets.
//!
//! * T20: delete epochs whose header could not be read (e.g. `T -20 ...`).
//! * 61p: move epochs stored under the wrong hourly file to the bucket of
//!   their own timestamp.
//! * TwD: delete epochs that carry a header and no rows.
//!
//! Stages run in the fixed order T20, 61p, TwD; any subset may be selected.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use chrono::Datelike;

pub use crate::calendar::MonthId;
use crate::error::{Error, Result};
use crate::record::{EpochTime, ScnEpoch};

/// Identifies one hourly file: (year, month, day, hour).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BucketKey {
    pub year: i32,
    pub month: u32,
    pub day: u32,
    pub hour: u32,
}

impl BucketKey {
    pub fn new(year: i32, month: u32, day: u32, hour: u32) -> Self {
        BucketKey {
            year,
            month,
            day,
            hour,
        }
    }

    pub fn of(time: &EpochTime) -> Self {
        BucketKey {
            year: time.date.year(),
            month: time.date.month(),
            day: time.date.day(),
            hour: time.hour(),
        }
    }
}

impl fmt::Display for BucketKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:04}-{:02}-{:02} {:02}h",
            self.year, self.month, self.day, self.hour
        )
    }
}

/// All hourly buckets of one month. Epochs within a bucket keep the order
/// they had in the source file until 61p sorts them.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthBuckets {
    pub month: MonthId,
    pub hours: BTreeMap<BucketKey, Vec<ScnEpoch>>,
}

impl MonthBuckets {
    pub fn new(month: MonthId) -> Self {
        MonthBuckets {
            month,
            hours: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, key: BucketKey, epochs: Vec<ScnEpoch>) {
        self.hours.insert(key, epochs);
    }

    pub fn epoch_count(&self) -> usize {
        self.hours.values().map(Vec::len).sum()
    }

    pub fn epochs(&self) -> impl Iterator<Item = (&BucketKey, &ScnEpoch)> {
        self.hours
            .iter()
            .flat_map(|(k, v)| v.iter().map(move |e| (k, e)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stage {
    T20,
    P61,
    TwD,
}

impl Stage {
    pub fn label(self) -> &'static str {
        match self {
            Stage::T20 => "T20",
            Stage::P61 => "61p",
            Stage::TwD => "TwD",
        }
    }
}

/// Selected corrections. Application order does not depend on how the set
/// was written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct StageSet {
    pub t20: bool,
    pub p61: bool,
    pub twd: bool,
}

impl StageSet {
    pub const ALL: StageSet = StageSet {
        t20: true,
        p61: true,
        twd: true,
    };
    pub const NONE: StageSet = StageSet {
        t20: false,
        p61: false,
        twd: false,
    };

    pub fn stages(&self) -> Vec<Stage> {
        let mut out = Vec::with_capacity(3);
        if self.t20 {
            out.push(Stage::T20);
        }
        if self.p61 {
            out.push(Stage::P61);
        }
        if self.twd {
            out.push(Stage::TwD);
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        !(self.t20 || self.p61 || self.twd)
    }

    /// Folder token, e.g. `T20_61p_TwD`; empty for no stages.
    pub fn label(&self) -> String {
        self.stages()
            .into_iter()
            .map(Stage::label)
            .collect::<Vec<_>>()
            .join("_")
    }
}

impl FromStr for StageSet {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut set = StageSet::NONE;
        for token in s.split([',', '_']).map(str::trim).filter(|t| !t.is_empty()) {
            match token.to_ascii_lowercase().as_str() {
                "t20" => set.t20 = true,
                "61p" => set.p61 = true,
                "twd" => set.twd = true,
                "none" => {}
                _ => return Err(Error::InvalidStages(s.to_string())),
            }
        }
        Ok(set)
    }
}

impl fmt::Display for StageSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&self.label())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Move {
    pub from: BucketKey,
    pub to: BucketKey,
    pub utsec: u32,
}

/// An epoch removed by 61p: either its timestamp lies outside the
/// processed month, or its destination already holds an epoch at the same
/// second.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dropped {
    pub from: BucketKey,
    pub time: EpochTime,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CorrectionLog {
    pub t20_removed: usize,
    pub moved_61p: Vec<Move>,
    pub out_of_month_61p: Vec<Dropped>,
    pub duplicates_61p: Vec<Dropped>,
    pub twd_removed: usize,
}

impl CorrectionLog {
    pub fn merge(&mut self, other: CorrectionLog) {
        self.t20_removed += other.t20_removed;
        self.moved_61p.extend(other.moved_61p);
        self.out_of_month_61p.extend(other.out_of_month_61p);
        self.duplicates_61p.extend(other.duplicates_61p);
        self.twd_removed += other.twd_removed;
    }

    /// Epochs that left the month in total.
    pub fn removed(&self) -> usize {
        self.t20_removed
            + self.twd_removed
            + self.out_of_month_61p.len()
            + self.duplicates_61p.len()
    }

    pub fn is_empty(&self) -> bool {
        *self == CorrectionLog::default()
    }

    pub fn report(&self, month: MonthId, stages: StageSet) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "Correction log for {month}, stages: {stages}");
        let _ = writeln!(out, "T20 epochs removed: {}", self.t20_removed);
        let _ = writeln!(out, "61p epochs moved: {}", self.moved_61p.len());
        let _ = writeln!(
            out,
            "61p epochs dropped outside month: {}",
            self.out_of_month_61p.len()
        );
        let _ = writeln!(
            out,
            "61p epochs dropped as duplicates: {}",
            self.duplicates_61p.len()
        );
        let _ = writeln!(out, "TwD epochs removed: {}", self.twd_removed);
        for m in &self.moved_61p {
            let _ = writeln!(out, "moved {} -> {} utsec {:05}", m.from, m.to, m.utsec);
        }
        for d in &self.out_of_month_61p {
            let _ = writeln!(out, "out-of-month {} at {}", d.from, d.time.datetime());
        }
        for d in &self.duplicates_61p {
            let _ = writeln!(out, "duplicate {} at {}", d.from, d.time.datetime());
        }
        out
    }
}

/// Removes every epoch whose header is malformed, rows and all.
pub fn apply_t20(mut buckets: MonthBuckets) -> (MonthBuckets, CorrectionLog) {
    let mut log = CorrectionLog::default();
    for epochs in buckets.hours.values_mut() {
        let before = epochs.len();
        epochs.retain(|e| !e.header.is_malformed());
        log.t20_removed += before - epochs.len();
    }
    (buckets, log)
}

/// Removes every epoch without observations.
pub fn apply_twd(mut buckets: MonthBuckets) -> (MonthBuckets, CorrectionLog) {
    let mut log = CorrectionLog::default();
    for epochs in buckets.hours.values_mut() {
        let before = epochs.len();
        epochs.retain(|e| !e.observations.is_empty());
        log.twd_removed += before - epochs.len();
    }
    (buckets, log)
}

struct Placed {
    epoch: ScnEpoch,
    time: EpochTime,
    from: BucketKey,
    native: bool,
}

/// Re-buckets every well-formed epoch under the hour of its own timestamp
/// and sorts each bucket by time.
///
/// Malformed epochs have no usable timestamp; they stay in their source
/// bucket, after the sorted ones. When two epochs land on the same second,
/// an epoch already native to the bucket wins over a mover, otherwise the
/// earlier one in file order wins.
pub fn apply_61p(buckets: MonthBuckets) -> (MonthBuckets, CorrectionLog) {
    let month = buckets.month;
    let mut log = CorrectionLog::default();
    let mut placed: BTreeMap<BucketKey, Vec<Placed>> = BTreeMap::new();
    let mut malformed: BTreeMap<BucketKey, Vec<ScnEpoch>> = BTreeMap::new();

    for (from, epochs) in buckets.hours {
        placed.entry(from).or_default();
        malformed.entry(from).or_default();
        for epoch in epochs {
            let Some(time) = epoch.time() else {
                malformed.entry(from).or_default().push(epoch);
                continue;
            };
            if !month.contains(time.date) {
                log.out_of_month_61p.push(Dropped { from, time });
                continue;
            }
            let to = BucketKey::of(&time);
            placed.entry(to).or_default().push(Placed {
                epoch,
                time,
                from,
                native: to == from,
            });
        }
    }

    let mut hours = BTreeMap::new();
    for (key, mut entries) in placed {
        entries.sort_by_key(|p| (p.time, !p.native));
        let mut kept: Vec<ScnEpoch> = Vec::with_capacity(entries.len());
        let mut last: Option<EpochTime> = None;
        for p in entries {
            if last == Some(p.time) {
                log.duplicates_61p.push(Dropped {
                    from: p.from,
                    time: p.time,
                });
                continue;
            }
            last = Some(p.time);
            if !p.native {
                log.moved_61p.push(Move {
                    from: p.from,
                    to: key,
                    utsec: p.time.utsec,
                });
            }
            kept.push(p.epoch);
        }
        kept.extend(malformed.remove(&key).unwrap_or_default());
        hours.insert(key, kept);
    }
    (MonthBuckets { month, hours }, log)
}

pub fn apply_stage(stage: Stage, buckets: MonthBuckets) -> (MonthBuckets, CorrectionLog) {
    match stage {
        Stage::T20 => apply_t20(buckets),
        Stage::P61 => apply_61p(buckets),
        Stage::TwD => apply_twd(buckets),
    }
}

/// Applies the selected stages in the order T20, 61p, TwD.
pub fn preprocess_month(
    mut buckets: MonthBuckets,
    stages: StageSet,
) -> (MonthBuckets, CorrectionLog) {
    let mut log = CorrectionLog::default();
    for stage in stages.stages() {
        let (next, delta) = apply_stage(stage, buckets);
        buckets = next;
        log.merge(delta);
    }
    (buckets, log)
}
