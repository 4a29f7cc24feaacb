mod common;

use std::fs;
use std::path::Path;

use chrono::NaiveDate;

use scinda_iono::aggregate::{split_per_prn_epochs, AggregateOptions, Scope};
use scinda_iono::calendar::{DayRange, MonthId};
use scinda_iono::corpus::output::{
    read_hourly, read_minute, write_all_hourly, write_all_minute, write_prn_scn, write_sats_minute,
    COLUMN_WIDTH,
};
use scinda_iono::corpus::raw::{gzip, parse_file_name};
use scinda_iono::corpus::{
    extract, scan_corpus, DatesRow, EntryStatus, Family, OutputLayout, RawExt, RawFileKey,
    YearDigits,
};
use scinda_iono::pipeline::aggregate;
use scinda_iono::preprocess::{BucketKey, MonthBuckets, StageSet};
use scinda_iono::record::{parse_scn, serialize_scn, EpochHeader, EpochTime, ScnEpoch};
use scinda_iono::Error;

use common::*;

fn write_gz(root: &Path, key: BucketKey, ext: RawExt, text: &str) {
    let path = RawFileKey::new(key, ext).path(root, YearDigits::One);
    fs::create_dir_all(path.parent().unwrap()).unwrap();
    fs::write(path, gzip(text.as_bytes())).unwrap();
}

/// Sample-hour rows restricted to three PRNs, replicated on every day of March.
fn three_satellite_month() -> MonthBuckets {
    let (epochs, _) = parse_scn(SAMPLE_HOUR.as_bytes());
    let mut b = MonthBuckets::new(march());
    for day in 1..=31u8 {
        let list: Vec<ScnEpoch> = epochs
            .iter()
            .map(|e| {
                let h = e.header.valid().unwrap();
                let header = EpochHeader::new(h.marker, 15, 3, day, h.utsec).unwrap();
                let rows = e
                    .observations
                    .iter()
                    .filter(|o| [16, 18, 19].contains(&o.prn))
                    .copied()
                    .collect();
                ScnEpoch::new(header, rows)
            })
            .collect();
        b.insert(BucketKey::new(2015, 3, u32::from(day), 0), list);
    }
    b
}

fn listing(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
}

#[test]
fn full_month_scan_finds_every_hour() {
    let dir = tempfile::tempdir().unwrap();
    for key in scinda_iono::corpus::CorpusIndex::expected_hours(march()) {
        write_gz(dir.path(), key, RawExt::Scn, SAMPLE_HOUR);
    }
    write_gz(dir.path(), BucketKey::new(2015, 3, 1, 0), RawExt::Obs, "x");
    fs::write(dir.path().join("2015/03-Mar/notes.txt"), "x").unwrap();

    let index = scan_corpus(dir.path(), march()).unwrap();
    assert_eq!(index.scn_entries().count(), 744);
    assert_eq!(index.count(RawExt::Scn), 744);
    assert_eq!(index.count(RawExt::Obs), 1);
    assert!(index.scn_gaps.is_empty());
    assert_eq!(index.unrecognized.len(), 1);
    assert!(index.unreadable.is_empty());
    let first = index.scn_entries().next().unwrap();
    assert!(first.path.ends_with("2015/03-Mar/50301_000000.scn.gz"));
}

#[test]
fn empty_root_is_all_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let index = scan_corpus(dir.path(), march()).unwrap();
    assert_eq!(index.scn_gaps.len(), 744);
    assert!(index.entries.is_empty());

    let feb = MonthId::new(2016, 2).unwrap();
    assert_eq!(
        scan_corpus(dir.path(), feb).unwrap().scn_gaps.len(),
        29 * 24
    );
}

#[test]
fn missing_root_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = scan_corpus(&dir.path().join("nope"), march()).unwrap_err();
    assert!(matches!(err, Error::MissingRoot(_)));
}

#[test]
fn archive_names_decode_to_hours() {
    let key = parse_file_name("50301_000000.scn.gz", 2015).unwrap();
    assert_eq!(key.hour, BucketKey::new(2015, 3, 1, 0));
    assert_eq!(key.ext, RawExt::Scn);
    let key = parse_file_name("150331_230000.scn.gz", 2015).unwrap();
    assert_eq!(key.hour, BucketKey::new(2015, 3, 31, 23));
    assert_eq!(key.file_name(YearDigits::One), "50331_230000.scn.gz");
    assert!(parse_file_name("50332_000000.scn.gz", 2015).is_none());
    assert!(parse_file_name("50301_240000.scn.gz", 2015).is_none());
    assert!(parse_file_name("50301_000000.txt", 2015).is_none());
}

#[test]
fn extraction_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    write_gz(
        dir.path(),
        BucketKey::new(2015, 3, 1, 0),
        RawExt::Scn,
        SAMPLE_HOUR,
    );
    let index = scan_corpus(dir.path(), march()).unwrap();
    let bytes = extract(index.scn_entries().next().unwrap()).unwrap();
    assert_eq!(bytes, SAMPLE_HOUR.as_bytes());
}

#[test]
fn bad_archives_are_flagged_with_their_path() {
    let dir = tempfile::tempdir().unwrap();
    let folder = dir.path().join("2015/03-Mar");
    fs::create_dir_all(&folder).unwrap();
    fs::write(folder.join("50301_000000.scn.gz"), b"").unwrap();
    fs::write(folder.join("50301_010000.scn.gz"), SAMPLE_HOUR).unwrap();
    let mut truncated = gzip(SAMPLE_HOUR.as_bytes());
    truncated.truncate(truncated.len() / 2);
    fs::write(folder.join("50301_020000.scn.gz"), truncated).unwrap();

    let index = scan_corpus(dir.path(), march()).unwrap();
    assert_eq!(index.unreadable.len(), 2);
    let statuses: Vec<EntryStatus> = index.entries.values().map(|e| e.status).collect();
    assert_eq!(
        statuses,
        [EntryStatus::Empty, EntryStatus::NotGzip, EntryStatus::Ok]
    );
    for entry in index.entries.values() {
        match extract(entry).unwrap_err() {
            Error::CorruptArchive { path, .. } => assert_eq!(path, entry.path),
            other => panic!("unexpected {other:?}"),
        }
    }
}

#[test]
fn per_prn_files_follow_satellite_list() {
    let dir = tempfile::tempdir().unwrap();
    let b = three_satellite_month();
    let days = DayRange::whole(march());
    let layout = OutputLayout::new(StageSet::ALL, days);
    let opts = AggregateOptions::default();
    let agg = aggregate(&b, &opts, &days, 2).unwrap();
    assert_eq!(agg.sat_list.0, [16, 18, 19]);

    write_sats_minute(dir.path(), &layout, &agg.prn_minute, &agg.sat_list).unwrap();
    let folder = dir.path().join("SATs_T20_61p_TwD_2015-03");
    assert_eq!(
        listing(&folder),
        [
            "SATs_LIST_UNIQUEs_201503.dat",
            "SCN_2015-03_res1m_01-31_1.dat",
            "SCN_2015-03_res1m_01-31_1_DATES-TIMES.dat",
            "SCN_2015-03_res1m_01-31_2.dat",
            "SCN_2015-03_res1m_01-31_2_DATES-TIMES.dat",
            "SCN_2015-03_res1m_01-31_3.dat",
            "SCN_2015-03_res1m_01-31_3_DATES-TIMES.dat",
        ]
    );
    let list = fs::read_to_string(folder.join("SATs_LIST_UNIQUEs_201503.dat")).unwrap();
    assert_eq!(list, "16\n18\n19\n");

    let second = read_minute(&folder, &layout, Family::Sats1m, Some(2), Scope::Prn(18)).unwrap();
    assert_eq!(second.samples.len(), 62);
}

#[test]
fn hourly_family_has_four_files() {
    let dir = tempfile::tempdir().unwrap();
    let b = three_satellite_month();
    let days = DayRange::whole(march());
    let layout = OutputLayout::new(StageSet::ALL, days);
    let agg = aggregate(&b, &AggregateOptions::default(), &days, 1).unwrap();
    write_all_hourly(dir.path(), &layout, &agg.all_hourly).unwrap();
    let folder = dir.path().join("All_T20_61p_TwD_Means1h_2015-03");
    assert_eq!(
        listing(&folder),
        [
            "SCN_2015-03_Means1h_01-31.dat",
            "SCN_2015-03_Means1h_01-31_DATES-TIMES.dat",
            "SCN_2015-03_Means1h_01-31_Nobs.dat",
            "SCN_2015-03_Means1h_01-31_Std.dat",
        ]
    );
    let back = read_hourly(&folder, &layout, Family::All1h, None, Scope::All).unwrap();
    assert_eq!(back.rows.len(), 744);
    assert_eq!(back.rows[0].nobs, [2; 6]);
    assert_eq!(back.rows[1].nobs, [0; 6]);
    assert!(back.rows[1].mean.0.iter().all(Option::is_none));
}

#[test]
fn rows_are_aligned_and_fixed_width() {
    let dir = tempfile::tempdir().unwrap();
    let b = three_satellite_month();
    let days = DayRange::whole(march());
    let layout = OutputLayout::new(StageSet::ALL, days);
    let agg = aggregate(&b, &AggregateOptions::default(), &days, 1).unwrap();
    let mut files = write_all_minute(dir.path(), &layout, &agg.all_minute).unwrap();
    files.extend(write_all_hourly(dir.path(), &layout, &agg.all_hourly).unwrap());

    let mut counts = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        assert!(text.lines().all(|l| l.len() == 6 * COLUMN_WIDTH), "{f:?}");
        counts.push((f.parent().unwrap().to_path_buf(), text.lines().count()));
    }
    for (dir, n) in &counts {
        assert!(counts.iter().filter(|(d, _)| d == dir).all(|(_, m)| m == n));
    }
    let minute_sizes: Vec<u64> = files[..2]
        .iter()
        .map(|f| fs::metadata(f).unwrap().len())
        .collect();
    assert_eq!(minute_sizes[0], minute_sizes[1]);
}

#[test]
fn reread_matches_printed_precision() {
    let dir = tempfile::tempdir().unwrap();
    let b = three_satellite_month();
    let days = DayRange::whole(march());
    let layout = OutputLayout::new(StageSet::ALL, days);
    let agg = aggregate(&b, &AggregateOptions::default(), &days, 1).unwrap();
    write_all_minute(dir.path(), &layout, &agg.all_minute).unwrap();
    let folder = dir.path().join(layout.folder(Family::All1m));
    let back = read_minute(&folder, &layout, Family::All1m, None, Scope::All).unwrap();
    assert_eq!(back.samples.len(), agg.all_minute.samples.len());
    for ((t0, v0), (t1, v1)) in agg.all_minute.samples.iter().zip(&back.samples) {
        assert_eq!(t0, t1);
        for (a, b) in v0.0.iter().zip(&v1.0) {
            match (a, b) {
                (Some(a), Some(b)) => assert!(rel_close(*a, *b, 5e-6), "{a} vs {b}"),
                (a, b) => assert_eq!(a.is_some(), b.is_some()),
            }
        }
    }
}

#[test]
fn dates_row_for_first_epoch() {
    let date = NaiveDate::from_ymd_opt(2015, 3, 1).unwrap();
    let row = DatesRow::of(&EpochTime::new(date, 92).unwrap());
    assert_eq!(
        (row.year, row.month, row.day, row.hour, row.seconds),
        (2015, 3, 1, 0, 92)
    );
    assert!((row.fraction_of_day - 92.0 / 86400.0).abs() < 1e-15);
    let tokens: Vec<String> = row.format().split_whitespace().map(String::from).collect();
    assert_eq!(tokens, ["2015", "3", "1", "0", "92", "1.06481e-03"]);
}

#[test]
fn day_range_cannot_cross_months() {
    assert!(matches!(
        DayRange::new(march(), 30, 32),
        Err(Error::CrossMonth { .. })
    ));
    assert!(DayRange::parse(MonthId::new(2015, 2).unwrap(), "01-29").is_err());
    assert!(DayRange::parse(MonthId::new(2016, 2).unwrap(), "01-29").is_ok());
}

#[test]
fn writers_reject_samples_outside_the_range() {
    let dir = tempfile::tempdir().unwrap();
    let b = three_satellite_month();
    let whole = DayRange::whole(march());
    let agg = aggregate(&b, &AggregateOptions::default(), &whole, 1).unwrap();
    let narrow = OutputLayout::new(StageSet::ALL, DayRange::new(march(), 1, 2).unwrap());
    let err = write_all_minute(dir.path(), &narrow, &agg.all_minute).unwrap_err();
    assert!(matches!(err, Error::OutsideDayRange(..)));
}

#[test]
fn per_pair_scn_matches_published_rows() {
    assert_eq!(
        serialize_scn(&parse_scn(PRN16_PAIR.as_bytes()).0),
        PRN16_PAIR
    );

    let (pair, report) = parse_scn(PRN16_PAIR.as_bytes());
    assert!(report.diagnostics.is_empty());
    let utsecs: Vec<u32> = pair
        .iter()
        .map(|e| e.header.valid().unwrap().utsec)
        .collect();
    assert_eq!(utsecs, (0..8).map(|i| 32 + 60 * i).collect::<Vec<_>>());
    assert!(pair
        .iter()
        .all(|e| e.observations.len() == 1 && e.observations[0].prn == 16));

    let (epochs, _) = parse_scn(SAMPLE_HOUR.as_bytes());
    let mut b = MonthBuckets::new(march());
    b.insert(BucketKey::new(2015, 3, 1, 0), epochs);
    let days = DayRange::new(march(), 1, 1).unwrap();
    let split = split_per_prn_epochs(&b, &AggregateOptions::default(), &days);
    assert_eq!(split.len(), 9);
    let prn16 = &split[&16];
    assert_eq!(prn16.len(), 2);
    for (ours, published) in prn16.iter().zip(&pair) {
        assert_eq!(ours.observations, published.observations);
        assert_eq!(ours.time(), published.time());
    }

    let dir = tempfile::tempdir().unwrap();
    let layout = OutputLayout::new(StageSet::ALL, days);
    let list = scinda_iono::aggregate::SatList::from_prns(split.keys().copied());
    let files = write_prn_scn(dir.path(), &layout, &split, &list).unwrap();
    assert_eq!(files.len(), 9);
    assert!(files[0].ends_with("SATs_T20_61p_TwD_SCN_2015-03/SCN_2015-03_01-01_1.scn"));
}
