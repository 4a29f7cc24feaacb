use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};

use crate::error::{Error, Result};

/// A calendar month.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MonthId {
    pub year: i32,
    pub month: u32,
}

impl MonthId {
    pub fn new(year: i32, month: u32) -> Result<Self> {
        if !(1..=12).contains(&month) || NaiveDate::from_ymd_opt(year, month, 1).is_none() {
            return Err(Error::InvalidMonth { year, month });
        }
        Ok(MonthId { year, month })
    }

    pub fn days(&self) -> u32 {
        let first = NaiveDate::from_ymd_opt(self.year, self.month, 1).expect("validated");
        let next = if self.month == 12 {
            NaiveDate::from_ymd_opt(self.year + 1, 1, 1)
        } else {
            NaiveDate::from_ymd_opt(self.year, self.month + 1, 1)
        }
        .expect("valid month");
        (next - first).num_days() as u32
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        date.year() == self.year && date.month() == self.month
    }

    /// `YYYY-MM`
    pub fn tag(&self) -> String {
        format!("{:04}-{:02}", self.year, self.month)
    }
}

impl fmt::Display for MonthId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.tag())
    }
}

/// An inclusive range of days inside one month, written `DD-DD`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DayRange {
    pub month: MonthId,
    pub first: u32,
    pub last: u32,
}

impl DayRange {
    pub fn new(month: MonthId, first: u32, last: u32) -> Result<Self> {
        let days = month.days();
        if first == 0 || first > last {
            return Err(Error::InvalidDayRange(format!("{first:02}-{last:02}")));
        }
        if last > days {
            return Err(Error::CrossMonth {
                year: month.year,
                month: month.month,
                first,
                last,
                days,
            });
        }
        Ok(DayRange { month, first, last })
    }

    pub fn whole(month: MonthId) -> Self {
        DayRange {
            month,
            first: 1,
            last: month.days(),
        }
    }

    /// Parses `A-B` (e.g. `01-31` or `5-9`) against a month.
    pub fn parse(month: MonthId, s: &str) -> Result<Self> {
        let bad = || Error::InvalidDayRange(s.to_string());
        let (a, b) = s.split_once('-').ok_or_else(bad)?;
        let first = u32::from_str(a.trim()).map_err(|_| bad())?;
        let last = u32::from_str(b.trim()).map_err(|_| bad())?;
        DayRange::new(month, first, last)
    }

    /// `DD-DD`
    pub fn tag(&self) -> String {
        format!("{:02}-{:02}", self.first, self.last)
    }

    pub fn day_count(&self) -> u32 {
        self.last - self.first + 1
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.month.contains(date) && (self.first..=self.last).contains(&date.day())
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (self.first..=self.last).map(|d| {
            NaiveDate::from_ymd_opt(self.month.year, self.month.month, d).expect("validated range")
        })
    }
}
