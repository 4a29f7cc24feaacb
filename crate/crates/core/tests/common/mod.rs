#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;

use scinda_iono::calendar::{DayRange, MonthId};
use scinda_iono::preprocess::MonthBuckets;
use scinda_iono::record::{parse_scn, EpochHeader, SatObservation, ScnEpoch};
use scinda_iono::synth::{generate, SynthConfig, SynthCorpus};

pub const SAMPLE_HOUR: &str = include_str!("../data/sample_hour.scn");
pub const PRN16_PAIR: &str = include_str!("../data/prn16_pair.scn");

/// Values on the printed grid of each column, so that formatting is exact.
pub fn observation(prn: u16) -> impl Strategy<Value = SatObservation> {
    (
        (0i64..3600, -900i64..=900, 0i64..300, 0u8..=100, 0i64..300),
        prop_oneof![Just(0u8), 1u8..=100],
        (
            -5000i64..5000,
            -200_000i64..200_000,
            0i64..3000,
            -5000i64..5000,
            0u32..20_000,
        ),
    )
        .prop_map(move |((az, el, l1, sam1, l2), sam2, (tp, tf, ro, tr, n))| {
            let zero = sam2 == 0;
            SatObservation {
                az: az as f64 / 10.0,
                el: el as f64 / 10.0,
                l1s4: l1 as f64 / 100.0,
                sam_l1: f64::from(sam1),
                l2s4: l2 as f64 / 100.0,
                sam_l2: f64::from(sam2),
                tecp: if zero { 0.0 } else { tp as f64 / 10.0 },
                tecf: if zero { 0.0 } else { tf as f64 / 1000.0 },
                roti: if zero { 0.0 } else { ro as f64 / 100.0 },
                tecr: if zero { 0.0 } else { tr as f64 / 10.0 },
                n_slip: if zero { 0 } else { n },
                prn,
            }
        })
}

pub fn header() -> impl Strategy<Value = EpochHeader> {
    (
        proptest::char::range('A', 'Z'),
        0u8..100,
        1u8..=12,
        1u8..=28,
        0u32..86_400,
    )
        .prop_map(|(m, y, mo, d, s)| EpochHeader::new(m, y, mo, d, s).unwrap())
}

pub fn epoch() -> impl Strategy<Value = ScnEpoch> {
    (header(), btree_set(1u16..200, 0..12))
        .prop_flat_map(|(h, prns)| {
            let obs: Vec<_> = prns.into_iter().map(observation).collect();
            (Just(h), obs)
        })
        .prop_map(|(h, obs)| ScnEpoch::new(h, obs))
}

pub fn epochs() -> impl Strategy<Value = Vec<ScnEpoch>> {
    vec(epoch(), 0..8)
}

/// Loads an in-memory synthetic corpus as month buckets, bypassing gzip.
pub fn buckets_of(corpus: &SynthCorpus, month: MonthId) -> MonthBuckets {
    let mut b = MonthBuckets::new(month);
    for (key, text) in &corpus.files {
        b.insert(*key, parse_scn(text.as_bytes()).0);
    }
    b
}

pub fn march() -> MonthId {
    MonthId::new(2015, 3).unwrap()
}

pub fn synthetic(seed: u64, days: DayRange, rates: (f64, f64, f64)) -> SynthCorpus {
    let mut cfg = SynthConfig::new(seed, days);
    cfg.rates.t20 = rates.0;
    cfg.rates.p61 = rates.1;
    cfg.rates.twd = rates.2;
    generate(&cfg)
}

/// Naive mean of the values of one column over the rows that qualify.
pub fn brute_mean(rows: &[(f64, bool)]) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for &(v, ok) in rows {
        if ok {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        None
    } else {
        Some(sum / n as f64)
    }
}

/// Sample standard deviation from pairwise differences:
/// s^2 = sum_{i<j} (x_i - x_j)^2 / (n (n - 1)).
pub fn brute_std(values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let d = values[i] - values[j];
            acc += d * d;
        }
    }
    Some((acc / (n * (n - 1)) as f64).sqrt())
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    let scale = a.abs().max(b.abs());
    (a - b).abs() <= tol * scale || (a - b).abs() <= f64::MIN_POSITIVE
}

/// Relative path -> bytes for every file under `root`.
pub fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        for p in entries {
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(
                    p.strip_prefix(base).unwrap().to_path_buf(),
                    fs::read(&p).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}
