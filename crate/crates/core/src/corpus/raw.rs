//! Raw corpus layout: `YYYY/MM-Mon/YMMDD_HH0000.<ext>.gz`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::calendar::MonthId;
use crate::error::{Error, Result};
use crate::preprocess::BucketKey;

const GZIP_MAGIC: [u8; 2] = [0x1f, 0x8b];

const MONTH_ABBR: [&str; 12] = [
    "Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec",
];

pub fn month_abbr(month: u32) -> &'static str {
    MONTH_ABBR[(month - 1) as usize]
}

/// `MM-Mon`, e.g. `03-Mar`.
pub fn month_folder(month: u32) -> String {
    format!("{:02}-{}", month, month_abbr(month))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RawExt {
    Ism,
    Msg,
    Rng,
    Obs,
    Psn,
    Scn,
}

impl RawExt {
    pub const ALL: [RawExt; 6] = [
        RawExt::Ism,
        RawExt::Msg,
        RawExt::Rng,
        RawExt::Obs,
        RawExt::Psn,
        RawExt::Scn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RawExt::Ism => "ism",
            RawExt::Msg => "msg",
            RawExt::Rng => "rng",
            RawExt::Obs => "obs",
            RawExt::Psn => "psn",
            RawExt::Scn => "scn",
        }
    }
}

impl FromStr for RawExt {
    type Err = ();

    fn from_str(s: &str) -> std::result::Result<Self, ()> {
        RawExt::ALL.into_iter().find(|e| e.as_str() == s).ok_or(())
    }
}

impl fmt::Display for RawExt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Year digits in the `YMMDD` file stem. Both forms are accepted on read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum YearDigits {
    #[default]
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RawFileKey {
    pub hour: BucketKey,
    pub ext: RawExt,
}

impl RawFileKey {
    pub fn new(hour: BucketKey, ext: RawExt) -> Self {
        RawFileKey { hour, ext }
    }

    /// `YMMDD_HH0000`
    pub fn stem(&self, digits: YearDigits) -> String {
        let k = &self.hour;
        let year = match digits {
            YearDigits::One => format!("{}", k.year.rem_euclid(10)),
            YearDigits::Two => format!("{:02}", k.year.rem_euclid(100)),
        };
        format!("{year}{:02}{:02}_{:02}0000", k.month, k.day, k.hour)
    }

    pub fn file_name(&self, digits: YearDigits) -> String {
        format!("{}.{}.gz", self.stem(digits), self.ext)
    }

    /// `root/YYYY/MM-Mon/YMMDD_HH0000.ext.gz`
    pub fn path(&self, root: &Path, digits: YearDigits) -> PathBuf {
        root.join(format!("{:04}", self.hour.year))
            .join(month_folder(self.hour.month))
            .join(self.file_name(digits))
    }
}

/// Parses a `YMMDD_HH0000` stem against the year of the enclosing folder.
/// The digits in the stem must agree with the folder year.
pub fn parse_stem(stem: &str, year: i32) -> Option<BucketKey> {
    let (date, time) = stem.split_once('_')?;
    if !date.bytes().all(|b| b.is_ascii_digit()) || !time.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    if time.len() != 6 || &time[2..] != "0000" {
        return None;
    }
    let (ydigits, mmdd) = match date.len() {
        5 => (&date[..1], &date[1..]),
        6 => (&date[..2], &date[2..]),
        _ => return None,
    };
    let modulus = 10i32.pow(ydigits.len() as u32);
    if ydigits.parse::<i32>().ok()? != year.rem_euclid(modulus) {
        return None;
    }
    let month: u32 = mmdd[..2].parse().ok()?;
    let day: u32 = mmdd[2..].parse().ok()?;
    let hour: u32 = time[..2].parse().ok()?;
    chrono::NaiveDate::from_ymd_opt(year, month, day)?;
    if hour > 23 {
        return None;
    }
    Some(BucketKey::new(year, month, day, hour))
}

/// Parses `YMMDD_HH0000.ext.gz`.
pub fn parse_file_name(name: &str, year: i32) -> Option<RawFileKey> {
    let rest = name.strip_suffix(".gz")?;
    let (stem, ext) = rest.rsplit_once('.')?;
    let ext = ext.parse().ok()?;
    Some(RawFileKey::new(parse_stem(stem, year)?, ext))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EntryStatus {
    Ok,
    /// Zero bytes on disk.
    Empty,
    /// Does not start with the gzip magic number.
    NotGzip,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawEntry {
    pub key: RawFileKey,
    pub path: PathBuf,
    pub size: u64,
    pub status: EntryStatus,
    pub compressed: bool,
}

impl RawEntry {
    pub fn processable(&self) -> bool {
        self.key.ext == RawExt::Scn && self.status == EntryStatus::Ok
    }
}

/// Inventory of one month of hourly files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusIndex {
    pub month: MonthId,
    pub entries: BTreeMap<RawFileKey, RawEntry>,
    /// Hours of the month with no `.scn` file.
    pub scn_gaps: Vec<BucketKey>,
    /// Entries flagged at scan time as unreadable archives.
    pub unreadable: Vec<PathBuf>,
    /// Files in the month folder that do not follow the naming scheme.
    pub unrecognized: Vec<PathBuf>,
}

impl CorpusIndex {
    pub fn expected_hours(month: MonthId) -> impl Iterator<Item = BucketKey> {
        (1..=month.days())
            .flat_map(move |d| (0..24).map(move |h| BucketKey::new(month.year, month.month, d, h)))
    }

    pub fn scn_entries(&self) -> impl Iterator<Item = &RawEntry> {
        self.entries.values().filter(|e| e.processable())
    }

    pub fn count(&self, ext: RawExt) -> usize {
        self.entries.keys().filter(|k| k.ext == ext).count()
    }

    pub fn summary(&self) -> String {
        let mut out = format!("Corpus inventory for {}\n", self.month);
        for ext in RawExt::ALL {
            let bytes: u64 = self
                .entries
                .values()
                .filter(|e| e.key.ext == ext)
                .map(|e| e.size)
                .sum();
            out.push_str(&format!(
                "{ext}: {} files, {bytes} bytes\n",
                self.count(ext)
            ));
        }
        out.push_str(&format!("missing .scn hours: {}\n", self.scn_gaps.len()));
        out.push_str(&format!("unreadable archives: {}\n", self.unreadable.len()));
        out.push_str(&format!(
            "unrecognized files: {}\n",
            self.unrecognized.len()
        ));
        out
    }

    fn finish(mut self) -> Self {
        self.scn_gaps = Self::expected_hours(self.month)
            .filter(|k| !self.entries.contains_key(&RawFileKey::new(*k, RawExt::Scn)))
            .collect();
        self.unreadable = self
            .entries
            .values()
            .filter(|e| e.status != EntryStatus::Ok)
            .map(|e| e.path.clone())
            .collect();
        self.unrecognized.sort();
        self
    }

    fn empty(month: MonthId) -> Self {
        CorpusIndex {
            month,
            entries: BTreeMap::new(),
            scn_gaps: Vec::new(),
            unreadable: Vec::new(),
            unrecognized: Vec::new(),
        }
    }
}

fn probe(path: &Path, compressed: bool) -> Result<(u64, EntryStatus)> {
    let size = fs::metadata(path)?.len();
    if size == 0 {
        return Ok((0, EntryStatus::Empty));
    }
    if !compressed {
        return Ok((size, EntryStatus::Ok));
    }
    let mut magic = [0u8; 2];
    let mut f = fs::File::open(path)?;
    let status = match f.read_exact(&mut magic) {
        Ok(()) if magic == GZIP_MAGIC => EntryStatus::Ok,
        _ => EntryStatus::NotGzip,
    };
    Ok((size, status))
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>> {
    let rd = fs::read_dir(dir).map_err(|source| Error::UnreadableDir {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut paths = Vec::new();
    for entry in rd {
        let entry = entry.map_err(|source| Error::UnreadableDir {
            path: dir.to_path_buf(),
            source,
        })?;
        paths.push(entry.path());
    }
    paths.sort();
    Ok(paths)
}

/// Inventories the hourly archives of one month under a raw corpus root.
/// A missing year or month folder yields an index where every hour is a gap.
pub fn scan_corpus(root: &Path, month: MonthId) -> Result<CorpusIndex> {
    if !root.is_dir() {
        return Err(Error::MissingRoot(root.to_path_buf()));
    }
    let mut index = CorpusIndex::empty(month);
    let dir = root
        .join(format!("{:04}", month.year))
        .join(month_folder(month.month));
    if !dir.is_dir() {
        return Ok(index.finish());
    }
    for path in read_dir_sorted(&dir)? {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        match parse_file_name(name, month.year) {
            Some(key) if path.is_file() && key.hour.month == month.month => {
                let (size, status) = probe(&path, true)?;
                index.entries.insert(
                    key,
                    RawEntry {
                        key,
                        path,
                        size,
                        status,
                        compressed: true,
                    },
                );
            }
            _ => index.unrecognized.push(path),
        }
    }
    Ok(index.finish())
}

/// Inventories a flat folder of uncompressed hourly `YMMDD_HH0000.scn`
/// files, such as the corrected files written by the preprocess step.
pub fn scan_flat(dir: &Path, month: MonthId) -> Result<CorpusIndex> {
    if !dir.is_dir() {
        return Err(Error::MissingRoot(dir.to_path_buf()));
    }
    let mut index = CorpusIndex::empty(month);
    for path in read_dir_sorted(dir)? {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let key = name
            .strip_suffix(".scn")
            .and_then(|stem| parse_stem(stem, month.year))
            .filter(|k| k.month == month.month && path.is_file());
        match key {
            Some(hour) => {
                let key = RawFileKey::new(hour, RawExt::Scn);
                let (size, status) = probe(&path, false)?;
                // An empty corrected file is a valid hour with no epochs.
                let status = if status == EntryStatus::Empty {
                    EntryStatus::Ok
                } else {
                    status
                };
                index.entries.insert(
                    key,
                    RawEntry {
                        key,
                        path,
                        size,
                        status,
                        compressed: false,
                    },
                );
            }
            None => index.unrecognized.push(path),
        }
    }
    Ok(index.finish())
}

fn corrupt(path: &Path, reason: impl Into<String>) -> Error {
    Error::CorruptArchive {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Decompresses a gzip byte buffer. `path` is only used in errors.
pub fn gunzip(bytes: &[u8], path: &Path) -> Result<Vec<u8>> {
    if bytes.is_empty() {
        return Err(corrupt(path, "empty archive"));
    }
    if bytes.len() < 2 || bytes[..2] != GZIP_MAGIC {
        return Err(corrupt(path, "not a gzip stream"));
    }
    let mut out = Vec::new();
    MultiGzDecoder::new(bytes)
        .read_to_end(&mut out)
        .map_err(|e| corrupt(path, e.to_string()))?;
    Ok(out)
}

/// Reads the bytes of one hourly file, decompressing archives.
pub fn extract(entry: &RawEntry) -> Result<Vec<u8>> {
    let bytes = fs::read(&entry.path)?;
    if entry.compressed {
        gunzip(&bytes, &entry.path)
    } else {
        Ok(bytes)
    }
}

/// Gzip with a fixed header, so equal input gives equal bytes.
pub fn gzip(bytes: &[u8]) -> Vec<u8> {
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(bytes).expect("writing to a Vec");
    enc.finish().expect("writing to a Vec")
}
