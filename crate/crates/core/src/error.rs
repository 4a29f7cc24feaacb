use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("invalid calendar date 20{year2:02}-{month:02}-{day:02}")]
    InvalidDate { year2: u8, month: u8, day: u8 },

    #[error("utsec {0} outside [0, 86399]")]
    InvalidUtsec(u32),

    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),

    #[error("unreadable directory {path}: {source}")]
    UnreadableDir {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corrupt archive {path}: {reason}")]
    CorruptArchive { path: PathBuf, reason: String },

    #[error("invalid day range {0}")]
    InvalidDayRange(String),

    #[error("day range {first}-{last} is not inside one calendar month ({days} days in {year}-{month:02})")]
    CrossMonth {
        year: i32,
        month: u32,
        first: u32,
        last: u32,
        days: u32,
    },

    #[error("invalid month {year}-{month}")]
    InvalidMonth { year: i32, month: u32 },

    #[error("invalid stage list '{0}' (expected a subset of t20,61p,twd)")]
    InvalidStages(String),

    #[error("malformed output file {path}: {reason}")]
    MalformedOutput { path: PathBuf, reason: String },

    #[error("sample at {0} lies outside the output day range {1}")]
    OutsideDayRange(String, String),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
