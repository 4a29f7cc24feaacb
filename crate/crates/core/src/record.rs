//! The SCINDA `.scn` scintillation record dialect.
//!
//! A file is a sequence of epochs. Each epoch is a header line made of a
//! one-letter marker and four numeric tokens (`T 15 03 01 00092`: two-digit
//! year, month, day, seconds since midnight) followed by zero or more
//! 12-token rows, one per receiver-satellite pair:
//!
//! ```text
//! AZ EL L1S4 %SAM L2S4 %SAM TECP TECF ROTI TECR N PRN
//! ```
//!
//! Tokens are separated by any run of spaces or tabs. Headers whose fields
//! cannot be read as a valid date and time (the `T -20 ...` pattern seen in
//! receiver output) are kept as malformed epochs so that a later stage can
//! decide what to do with them.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::{self, BufRead};

use chrono::{NaiveDate, NaiveDateTime, NaiveTime};

use crate::error::{Error, Result};

pub const SECONDS_PER_DAY: u32 = 86_400;
pub const ROW_TOKENS: usize = 12;

/// Header of a well-formed epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EpochHeader {
    pub marker: char,
    pub year2: u8,
    pub month: u8,
    pub day: u8,
    pub utsec: u32,
}

impl EpochHeader {
    pub fn new(marker: char, year2: u8, month: u8, day: u8, utsec: u32) -> Result<Self> {
        let header = EpochHeader {
            marker,
            year2,
            month,
            day,
            utsec,
        };
        header.timestamp()?;
        Ok(header)
    }

    pub fn timestamp(&self) -> Result<EpochTime> {
        epoch_timestamp(self)
    }
}

/// A header line that could not be read as a date and time. The
/// observations that follow it are still attached to the epoch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MalformedHeader {
    pub marker: char,
    /// Header tokens joined by single spaces.
    pub raw: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Header {
    Valid(EpochHeader),
    Malformed(MalformedHeader),
}

impl Header {
    pub fn marker(&self) -> char {
        match self {
            Header::Valid(h) => h.marker,
            Header::Malformed(m) => m.marker,
        }
    }

    pub fn valid(&self) -> Option<&EpochHeader> {
        match self {
            Header::Valid(h) => Some(h),
            Header::Malformed(_) => None,
        }
    }

    pub fn is_malformed(&self) -> bool {
        matches!(self, Header::Malformed(_))
    }
}

/// One row of an epoch: what one receiver-satellite pair saw during the minute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SatObservation {
    /// Azimuth, degrees.
    pub az: f64,
    /// Elevation, degrees.
    pub el: f64,
    pub l1s4: f64,
    /// Percent of L1 samples taken versus expected.
    pub sam_l1: f64,
    pub l2s4: f64,
    /// Percent of L2 samples taken versus expected. Zero means the
    /// L2-dependent columns are receiver zero-fill.
    pub sam_l2: f64,
    /// Differential pseudorange TEC, TECU.
    pub tecp: f64,
    /// Differential carrier phase TEC, TECU.
    pub tecf: f64,
    pub roti: f64,
    /// Relative, uncalibrated TEC, TECU.
    pub tecr: f64,
    /// Minutes since the last time slip.
    pub n_slip: u32,
    pub prn: u16,
}

impl SatObservation {
    /// Checks the value ranges a row must satisfy to be accepted.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(0.0..360.0).contains(&self.az) {
            return Err(format!("azimuth {} outside [0, 360)", self.az));
        }
        if !(-90.0..=90.0).contains(&self.el) {
            return Err(format!("elevation {} outside [-90, 90]", self.el));
        }
        if self.l1s4 < 0.0 || self.l2s4 < 0.0 {
            return Err("negative S4".to_string());
        }
        for (name, sam) in [("L1", self.sam_l1), ("L2", self.sam_l2)] {
            if !(0.0..=100.0).contains(&sam) {
                return Err(format!("{name} %SAM {sam} outside [0, 100]"));
            }
        }
        if self.roti < 0.0 {
            return Err(format!("negative ROTI {}", self.roti));
        }
        if self.prn == 0 {
            return Err("PRN must be positive".to_string());
        }
        if self.sam_l2 == 0.0
            && (self.tecp != 0.0
                || self.tecf != 0.0
                || self.roti != 0.0
                || self.tecr != 0.0
                || self.n_slip != 0)
        {
            return Err("L2 %SAM is 0 but L2-dependent columns are not zero-filled".to_string());
        }
        Ok(())
    }

    fn from_tokens(tokens: &[&str]) -> std::result::Result<Self, String> {
        debug_assert_eq!(tokens.len(), ROW_TOKENS);
        let real = |i: usize, name: &str| -> std::result::Result<f64, String> {
            match tokens[i].parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                _ => Err(format!("{name}: cannot parse '{}' as a number", tokens[i])),
            }
        };
        let obs = SatObservation {
            az: real(0, "AZ")?,
            el: real(1, "EL")?,
            l1s4: real(2, "L1S4")?,
            sam_l1: real(3, "%SAM(L1)")?,
            l2s4: real(4, "L2S4")?,
            sam_l2: real(5, "%SAM(L2)")?,
            tecp: real(6, "TECP")?,
            tecf: real(7, "TECF")?,
            roti: real(8, "ROTI")?,
            tecr: real(9, "TECR")?,
            n_slip: tokens[10]
                .parse()
                .map_err(|_| format!("N: cannot parse '{}' as an integer", tokens[10]))?,
            prn: tokens[11]
                .parse()
                .map_err(|_| format!("PRN: cannot parse '{}' as an integer", tokens[11]))?,
        };
        obs.validate()?;
        Ok(obs)
    }

    fn write_row(&self, out: &mut String) {
        let _ = writeln!(
            out,
            "{:.1} {:.1} {:.2} {} {:.2} {} {:.1} {:.3} {:.2} {:.1} {} {}",
            self.az,
            self.el,
            self.l1s4,
            self.sam_l1,
            self.l2s4,
            self.sam_l2,
            self.tecp,
            self.tecf,
            self.roti,
            self.tecr,
            self.n_slip,
            self.prn
        );
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScnEpoch {
    pub header: Header,
    pub observations: Vec<SatObservation>,
}

impl ScnEpoch {
    pub fn new(header: EpochHeader, observations: Vec<SatObservation>) -> Self {
        ScnEpoch {
            header: Header::Valid(header),
            observations,
        }
    }

    /// Timestamp of a well-formed epoch, `None` for malformed headers.
    pub fn time(&self) -> Option<EpochTime> {
        self.header.valid().and_then(|h| h.timestamp().ok())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    /// 1-based line number.
    pub line: usize,
    pub reason: String,
}

/// Line accounting for one parse. Every input line is a header, an
/// accepted observation row, or skipped.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ParseReport {
    pub epochs_ok: usize,
    pub epochs_malformed: usize,
    pub observation_rows: usize,
    /// Skipped lines, blank ones included. Only non-blank skips carry a
    /// diagnostic.
    pub lines_skipped: usize,
    pub lines_total: usize,
    pub diagnostics: Vec<Diagnostic>,
}

impl ParseReport {
    pub fn header_lines(&self) -> usize {
        self.epochs_ok + self.epochs_malformed
    }

    fn skip(&mut self, line: usize, reason: impl Into<String>) {
        self.lines_skipped += 1;
        self.diagnostics.push(Diagnostic {
            line,
            reason: reason.into(),
        });
    }
}

/// Calendar position of an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EpochTime {
    pub date: NaiveDate,
    pub utsec: u32,
}

impl EpochTime {
    pub fn new(date: NaiveDate, utsec: u32) -> Result<Self> {
        if utsec >= SECONDS_PER_DAY {
            return Err(Error::InvalidUtsec(utsec));
        }
        Ok(EpochTime { date, utsec })
    }

    pub fn hour(&self) -> u32 {
        self.utsec / 3600
    }

    pub fn minute(&self) -> u32 {
        (self.utsec % 3600) / 60
    }

    pub fn second(&self) -> u32 {
        self.utsec % 60
    }

    pub fn fraction_of_day(&self) -> f64 {
        f64::from(self.utsec) / f64::from(SECONDS_PER_DAY)
    }

    pub fn datetime(&self) -> NaiveDateTime {
        let time = NaiveTime::from_num_seconds_from_midnight_opt(self.utsec, 0)
            .expect("utsec checked at construction");
        self.date.and_time(time)
    }
}

/// Resolves a header to its calendar date, time of day and fraction of day.
pub fn epoch_timestamp(header: &EpochHeader) -> Result<EpochTime> {
    let date = NaiveDate::from_ymd_opt(
        2000 + i32::from(header.year2),
        u32::from(header.month),
        u32::from(header.day),
    )
    .filter(|_| header.year2 < 100)
    .ok_or(Error::InvalidDate {
        year2: header.year2,
        month: header.month,
        day: header.day,
    })?;
    EpochTime::new(date, header.utsec)
}

fn is_marker(token: &str) -> Option<char> {
    let mut chars = token.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_uppercase() => Some(c),
        _ => None,
    }
}

fn parse_header(marker: char, tokens: &[&str]) -> Header {
    let malformed = |reason: String| {
        Header::Malformed(MalformedHeader {
            marker,
            raw: tokens.join(" "),
            reason,
        })
    };
    if tokens.len() != 5 {
        return malformed(format!("expected 5 header tokens, found {}", tokens.len()));
    }
    let year = tokens[1];
    if year.len() != 2 || !year.bytes().all(|b| b.is_ascii_digit()) {
        return malformed(format!("year field '{year}' is not a two-digit number"));
    }
    let unsigned = |token: &str| -> Option<u32> {
        if token.bytes().all(|b| b.is_ascii_digit()) {
            token.parse().ok()
        } else {
            None
        }
    };
    let (Some(month), Some(day), Some(utsec)) = (
        unsigned(tokens[2]),
        unsigned(tokens[3]),
        unsigned(tokens[4]),
    ) else {
        return malformed("non-numeric month, day or UTSEC field".to_string());
    };
    let (Ok(month), Ok(day)) = (u8::try_from(month), u8::try_from(day)) else {
        return malformed("month or day out of range".to_string());
    };
    let year2 = year.parse().expect("two ascii digits");
    match EpochHeader::new(marker, year2, month, day, utsec) {
        Ok(h) => Header::Valid(h),
        Err(e) => malformed(e.to_string()),
    }
}

/// Parses a `.scn` byte stream, stopping only on I/O failure.
pub fn parse_scn_reader<R: BufRead>(reader: R) -> io::Result<(Vec<ScnEpoch>, ParseReport)> {
    let mut epochs: Vec<ScnEpoch> = Vec::new();
    let mut report = ParseReport::default();
    let mut seen_prns: HashSet<u16> = HashSet::new();

    for (idx, line) in reader.split(b'\n').enumerate() {
        let line = line?;
        let lineno = idx + 1;
        report.lines_total += 1;

        let Ok(text) = std::str::from_utf8(&line) else {
            report.skip(lineno, "line is not valid UTF-8");
            continue;
        };
        let tokens: Vec<&str> = text.split_ascii_whitespace().collect();
        if tokens.is_empty() {
            report.lines_skipped += 1;
            continue;
        }

        if let Some(marker) = is_marker(tokens[0]) {
            let header = parse_header(marker, &tokens);
            if header.is_malformed() {
                report.epochs_malformed += 1;
            } else {
                report.epochs_ok += 1;
            }
            epochs.push(ScnEpoch {
                header,
                observations: Vec::new(),
            });
            seen_prns.clear();
            continue;
        }

        if tokens.len() != ROW_TOKENS {
            report.skip(
                lineno,
                format!("expected {ROW_TOKENS} tokens, found {}", tokens.len()),
            );
            continue;
        }
        let Some(epoch) = epochs.last_mut() else {
            report.skip(lineno, "observation row before any epoch header");
            continue;
        };
        match SatObservation::from_tokens(&tokens) {
            Ok(obs) => {
                if !seen_prns.insert(obs.prn) {
                    report.skip(lineno, format!("duplicate PRN {} in epoch", obs.prn));
                    continue;
                }
                epoch.observations.push(obs);
                report.observation_rows += 1;
            }
            Err(reason) => report.skip(lineno, reason),
        }
    }
    Ok((epochs, report))
}

pub fn parse_scn(bytes: &[u8]) -> (Vec<ScnEpoch>, ParseReport) {
    parse_scn_reader(bytes).expect("reading from a byte slice cannot fail")
}

pub fn write_header(header: &Header, out: &mut String) {
    match header {
        Header::Valid(h) => {
            let _ = writeln!(
                out,
                "{} {:02} {:02} {:02} {:05}",
                h.marker, h.year2, h.month, h.day, h.utsec
            );
        }
        Header::Malformed(m) => {
            out.push_str(&m.raw);
            out.push('\n');
        }
    }
}

pub fn write_observation(obs: &SatObservation, out: &mut String) {
    obs.write_row(out);
}

/// Serializes epochs in the `.scn` layout, one space between tokens.
pub fn serialize_scn(epochs: &[ScnEpoch]) -> String {
    let mut out = String::new();
    for epoch in epochs {
        write_header(&epoch.header, &mut out);
        for obs in &epoch.observations {
            obs.write_row(&mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(line: &str) -> Header {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        parse_header(is_marker(tokens[0]).unwrap(), &tokens)
    }

    #[test]
    fn single_epoch_single_row() {
        let text = "T 15 03 01 00092\n323.6 59.2 0.04 100 0.02 100 16.8 -32.659 8.87 14.5 134 16\n";
        let (epochs, report) = parse_scn(text.as_bytes());
        assert_eq!(epochs.len(), 1);
        let h = epochs[0].header.valid().unwrap();
        assert_eq!(
            (h.marker, h.year2, h.month, h.day, h.utsec),
            ('T', 15, 3, 1, 92)
        );
        assert_eq!(
            epochs[0].observations,
            vec![SatObservation {
                az: 323.6,
                el: 59.2,
                l1s4: 0.04,
                sam_l1: 100.0,
                l2s4: 0.02,
                sam_l2: 100.0,
                tecp: 16.8,
                tecf: -32.659,
                roti: 8.87,
                tecr: 14.5,
                n_slip: 134,
                prn: 16,
            }]
        );
        assert_eq!(report.epochs_ok, 1);
        assert_eq!(report.observation_rows, 1);
        assert_eq!(report.lines_total, 2);
    }

    #[test]
    fn empty_input() {
        let (epochs, report) = parse_scn(b"");
        assert!(epochs.is_empty());
        assert_eq!(report, ParseReport::default());
    }

    #[test]
    fn header_only_epoch() {
        let (epochs, report) = parse_scn(b"T 15 03 01 00032\n");
        assert_eq!(epochs.len(), 1);
        assert!(epochs[0].observations.is_empty());
        assert_eq!(report.epochs_ok, 1);
    }

    #[test]
    fn malformed_year_is_kept_with_its_rows() {
        let text =
            "T -20 03 01 00092\n323.6 59.2 0.04 100 0.02 100 16.8 -32.659 8.87 14.5 134 16\n";
        let (epochs, report) = parse_scn(text.as_bytes());
        assert_eq!(report.epochs_malformed, 1);
        assert_eq!(report.epochs_ok, 0);
        assert!(epochs[0].header.is_malformed());
        assert_eq!(epochs[0].observations.len(), 1);
        assert_eq!(serialize_scn(&epochs), text);
    }

    #[test]
    fn header_variants() {
        assert!(header("P 15 03 01 00032").valid().is_some());
        assert!(header("T 5 03 01 00032").is_malformed());
        assert!(header("T 15 02 30 00032").is_malformed());
        assert!(header("T 15 03 01 86400").is_malformed());
        assert!(header("T 15 03 01").is_malformed());
        assert!(header("T 15 03 01 0x20").is_malformed());
        assert!(header("T 15 03 01 -0001").is_malformed());
    }

    #[test]
    fn bad_rows_are_skipped_with_diagnostics() {
        let text = "\
323.6 59.2 0.04 100 0.02 100 16.8 -32.659 8.87 14.5 134 16
T 15 03 01 00092
323.6 59.2 0.04 100 0.02 100 16.8 -32.659 8.87 14.5 134
323.6 59.2 abc 100 0.02 100 16.8 -32.659 8.87 14.5 134 17
323.6 59.2 0.04 100 0.02 100 16.8 -32.659 8.87 14.5 134 18
117.7 22.9 0.13 100 0.16 100 31.2 -12.718 10.39 28.6 39 18

400.0 22.9 0.13 100 0.16 100 31.2 -12.718 10.39 28.6 39 19
132.4 32.9 0.11 100 0.00 0 5.0 -0.000 0.00 0.0 0 126
132.4 32.9 0.11 100 0.00 0 0.0 -0.000 0.00 0.0 0 126
";
        let (epochs, report) = parse_scn(text.as_bytes());
        assert_eq!(epochs.len(), 1);
        let prns: Vec<u16> = epochs[0].observations.iter().map(|o| o.prn).collect();
        assert_eq!(prns, vec![18, 126]);
        let lines: Vec<usize> = report.diagnostics.iter().map(|d| d.line).collect();
        assert_eq!(lines, vec![1, 3, 4, 6, 8, 9]);
        assert_eq!(report.lines_skipped, 7);
        assert_eq!(
            report.lines_total,
            report.header_lines() + report.observation_rows + report.lines_skipped
        );
    }

    #[test]
    fn crlf_and_tabs() {
        let text = "P\t15\t03\t01\t00032\r\n\t323.3\t58.7\t0.03\t100\t0.02\t100\t18.3\t-32.622\t10.28\t14.5\t133\t16  \r\n";
        let (epochs, report) = parse_scn(text.as_bytes());
        assert!(report.diagnostics.is_empty());
        assert_eq!(epochs[0].header.marker(), 'P');
        assert_eq!(epochs[0].observations[0].tecf, -32.622);
    }

    #[test]
    fn negative_zero_survives_serialization() {
        let text = "T 15 03 01 00032\n190.1 44.8 0.05 100 0.00 0 0.0 -0.000 0.00 0.0 0 120\n";
        let (epochs, _) = parse_scn(text.as_bytes());
        assert_eq!(serialize_scn(&epochs), text);
    }

    #[test]
    fn empty_epoch_serializes_to_header_line() {
        let h = EpochHeader::new('T', 15, 3, 1, 32).unwrap();
        assert_eq!(
            serialize_scn(&[ScnEpoch::new(h, vec![])]),
            "T 15 03 01 00032\n"
        );
    }

    #[test]
    fn timestamps() {
        let t = EpochHeader::new('T', 15, 3, 1, 92)
            .unwrap()
            .timestamp()
            .unwrap();
        assert_eq!(t.datetime().to_string(), "2015-03-01 00:01:32");
        assert_eq!(t.fraction_of_day(), 92.0 / 86400.0);

        let t = EpochHeader::new('T', 15, 3, 1, 0)
            .unwrap()
            .timestamp()
            .unwrap();
        assert_eq!((t.hour(), t.minute(), t.second()), (0, 0, 0));
        assert_eq!(t.fraction_of_day(), 0.0);

        let t = EpochHeader::new('T', 15, 3, 1, 86399)
            .unwrap()
            .timestamp()
            .unwrap();
        assert_eq!((t.hour(), t.minute(), t.second()), (23, 59, 59));
        assert_eq!(t.fraction_of_day(), 86399.0 / 86400.0);

        let bad = EpochHeader {
            marker: 'T',
            year2: 15,
            month: 2,
            day: 29,
            utsec: 0,
        };
        assert!(matches!(
            epoch_timestamp(&bad),
            Err(Error::InvalidDate { .. })
        ));
    }
}
