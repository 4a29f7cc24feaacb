//! Reading the raw archive tree and writing the processed dataset families.

pub mod output;
pub mod raw;

pub use output::{DatesRow, Family, OutputLayout};
pub use raw::{
    extract, scan_corpus, scan_flat, CorpusIndex, EntryStatus, RawEntry, RawExt, RawFileKey,
    YearDigits,
};
