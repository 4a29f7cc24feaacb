//! Seeded synthetic `.scn` corpora with injected defects.
//!
//! A clean month has one epoch per minute in every hourly file. Defects are
//! injected at exact counts (`round(rate * population)`), never sampled
//! per epoch, and each injection is recorded in the manifest:
//!
//! * T20: the header year is replaced by `-20`, rows kept;
//! * 61p: the first epoch of an hour is appended to the previous hour's
//!   file instead of its own. The rate is per eligible hour boundary;
//! * TwD: the rows of an epoch are dropped, header kept.
//!
//! The three defect sets are disjoint.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use chrono::Datelike;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::calendar::DayRange;
use crate::corpus::raw::{gzip, RawExt, RawFileKey, YearDigits};
use crate::error::Result;
use crate::preprocess::BucketKey;
use crate::record::{
    write_header, write_observation, EpochHeader, Header, MalformedHeader, SatObservation,
};

const GPS_ORBIT_SECONDS: f64 = 43_082.0;
const SBAS_PRNS: [u16; 2] = [120, 126];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DefectRates {
    pub t20: f64,
    pub p61: f64,
    pub twd: f64,
}

#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: DayRange,
    /// GPS PRNs in the constellation; roughly half are above the horizon
    /// at any time. Two SBAS PRNs are always added.
    pub gps_prns: u16,
    pub rates: DefectRates,
    /// Seconds past each minute at which epochs are stamped.
    pub second_offset: u32,
    pub digits: YearDigits,
}

impl SynthConfig {
    pub fn new(seed: u64, days: DayRange) -> Self {
        SynthConfig {
            seed,
            days,
            gps_prns: 18,
            rates: DefectRates::default(),
            second_offset: 32,
            digits: YearDigits::One,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedEpoch {
    /// Stem of the hourly file the epoch was written to.
    pub file: String,
    pub utsec: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectedMove {
    pub from: String,
    pub to: String,
    pub utsec: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DefectCounts {
    pub t20: usize,
    pub p61: usize,
    pub twd: usize,
}

/// Ground truth of a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub month: String,
    pub days: String,
    pub rates: DefectRates,
    pub hourly_files: usize,
    /// Epochs in the clean corpus, before injection.
    pub clean_epochs: usize,
    pub observation_rows: usize,
    pub counts: DefectCounts,
    pub t20: Vec<InjectedEpoch>,
    pub p61: Vec<InjectedMove>,
    pub twd: Vec<InjectedEpoch>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Manifest> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| crate::Error::Config(e.to_string()))
    }
}

/// In-memory corpus: uncompressed `.scn` text per hourly file.
#[derive(Debug, Clone)]
pub struct SynthCorpus {
    pub files: BTreeMap<BucketKey, String>,
    pub manifest: Manifest,
}

struct Orbit {
    prn: u16,
    phase: f64,
    az0: f64,
    inclination: f64,
    tec_base: f64,
    slip: u32,
}

fn count_for(rate: f64, population: usize) -> usize {
    ((rate.clamp(0.0, 1.0) * population as f64).round() as usize).min(population)
}

fn hundredths(rng: &mut impl Rng, lo: i64, hi: i64) -> f64 {
    rng.gen_range(lo..=hi) as f64 / 100.0
}

fn observe(orbit: &mut Orbit, t: f64, rng: &mut impl Rng) -> Option<SatObservation> {
    if SBAS_PRNS.contains(&orbit.prn) {
        return Some(SatObservation {
            az: ((orbit.az0 * 10.0).round() as i64).rem_euclid(3600) as f64 / 10.0,
            el: (orbit.inclination * 10.0).round() / 10.0,
            l1s4: hundredths(rng, 2, 15),
            sam_l1: 100.0,
            l2s4: 0.0,
            sam_l2: 0.0,
            tecp: 0.0,
            tecf: -0.0,
            roti: 0.0,
            tecr: 0.0,
            n_slip: 0,
            prn: orbit.prn,
        });
    }
    let angle = TAU * t / GPS_ORBIT_SECONDS + orbit.phase;
    let el = orbit.inclination * angle.sin();
    let el_tenths = (el * 10.0).round() as i64;
    if el_tenths < 50 {
        orbit.slip = 0;
        return None;
    }
    let az_tenths = ((orbit.az0 + angle.to_degrees() * 0.5) * 10.0).round() as i64;
    if rng.gen_bool(0.002) {
        orbit.slip = 0;
    }
    orbit.slip += 1;
    let low = 1.0 - el / 90.0;
    let tecr = orbit.tec_base + 8.0 * (TAU * t / 86_400.0).sin() * low;
    let sam_l2 = if rng.gen_bool(0.02) {
        rng.gen_range(50..100)
    } else {
        100
    };
    Some(SatObservation {
        az: az_tenths.rem_euclid(3600) as f64 / 10.0,
        el: el_tenths as f64 / 10.0,
        l1s4: hundredths(rng, 1, 8 + (20.0 * low) as i64),
        sam_l1: 100.0,
        l2s4: hundredths(rng, 1, 10 + (25.0 * low) as i64),
        sam_l2: f64::from(sam_l2),
        tecp: (tecr * 10.0 + rng.gen_range(-40..=40) as f64)
            .round()
            .max(0.0)
            / 10.0,
        tecf: -(rng.gen_range(1_000..120_000) as f64) / 1000.0,
        roti: hundredths(rng, 50, 1200),
        tecr: (tecr * 10.0).round().max(0.0) / 10.0,
        n_slip: orbit.slip,
        prn: orbit.prn,
    })
}

struct PendingEpoch {
    header: Header,
    observations: Vec<SatObservation>,
}

/// Builds the corpus in memory. Equal configs give equal corpora.
pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let days = cfg.days;

    let mut orbits: Vec<Orbit> = (1..=cfg.gps_prns)
        .chain(SBAS_PRNS)
        .map(|prn| Orbit {
            prn,
            phase: rng.gen_range(0.0..TAU),
            az0: rng.gen_range(0.0..360.0),
            inclination: if prn >= 100 {
                rng.gen_range(25.0..50.0)
            } else {
                rng.gen_range(55.0..88.0)
            },
            tec_base: rng.gen_range(8.0..40.0),
            slip: 0,
        })
        .collect();

    // Clean epochs, hour by hour.
    let hours: Vec<BucketKey> = days
        .dates()
        .flat_map(|d| (0..24).map(move |h| BucketKey::new(d.year(), d.month(), d.day(), h)))
        .collect();
    let per_hour = 60usize;
    let mut epochs: Vec<PendingEpoch> = Vec::with_capacity(hours.len() * per_hour);
    let mut rows = 0usize;
    for (hi, key) in hours.iter().enumerate() {
        for minute in 0..per_hour as u32 {
            let utsec = key.hour * 3600 + minute * 60 + cfg.second_offset;
            let t = (hi as f64) * 3600.0 + f64::from(minute * 60 + cfg.second_offset);
            let marker = if minute == 0 { 'P' } else { 'T' };
            let header = EpochHeader::new(
                marker,
                (key.year % 100) as u8,
                key.month as u8,
                key.day as u8,
                utsec,
            )
            .expect("generated header is valid");
            let observations: Vec<SatObservation> = orbits
                .iter_mut()
                .filter_map(|o| observe(o, t, &mut rng))
                .collect();
            rows += observations.len();
            epochs.push(PendingEpoch {
                header: Header::Valid(header),
                observations,
            });
        }
    }
    let clean_epochs = epochs.len();

    // Defect selection: 61p among hour starts after the first, then T20 and
    // TwD from what is left.
    let boundaries = hours.len().saturating_sub(1);
    let n_p61 = count_for(cfg.rates.p61, boundaries);
    let mut moved_hours: Vec<usize> = sample(&mut rng, boundaries, n_p61)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    moved_hours.sort_unstable();
    let moved: Vec<usize> = moved_hours.iter().map(|h| h * per_hour).collect();

    let pool: Vec<usize> = (0..clean_epochs)
        .filter(|i| moved.binary_search(i).is_err())
        .collect();
    let n_t20 = count_for(cfg.rates.t20, clean_epochs).min(pool.len());
    let n_twd = count_for(cfg.rates.twd, clean_epochs).min(pool.len() - n_t20);
    let picked = sample(&mut rng, pool.len(), n_t20 + n_twd).into_vec();
    let mut t20_idx: Vec<usize> = picked[..n_t20].iter().map(|&i| pool[i]).collect();
    let mut twd_idx: Vec<usize> = picked[n_t20..].iter().map(|&i| pool[i]).collect();
    t20_idx.sort_unstable();
    twd_idx.sort_unstable();

    let stem = |key: &BucketKey| RawFileKey::new(*key, RawExt::Scn).stem(cfg.digits);
    let mut manifest = Manifest {
        seed: cfg.seed,
        month: days.month.tag(),
        days: days.tag(),
        rates: cfg.rates,
        hourly_files: hours.len(),
        clean_epochs,
        observation_rows: rows,
        counts: DefectCounts {
            t20: n_t20,
            p61: n_p61,
            twd: n_twd,
        },
        t20: Vec::new(),
        p61: Vec::new(),
        twd: Vec::new(),
    };

    for &i in &t20_idx {
        let h = *epochs[i].header.valid().expect("clean header");
        let raw = format!(
            "{} -20 {:02} {:02} {:05}",
            h.marker, h.month, h.day, h.utsec
        );
        epochs[i].header = Header::Malformed(MalformedHeader {
            marker: h.marker,
            raw,
            reason: "injected".to_string(),
        });
        manifest.t20.push(InjectedEpoch {
            file: stem(&hours[i / per_hour]),
            utsec: h.utsec,
        });
    }
    for &i in &twd_idx {
        epochs[i].observations.clear();
        manifest.twd.push(InjectedEpoch {
            file: stem(&hours[i / per_hour]),
            utsec: epochs[i].header.valid().expect("clean header").utsec,
        });
    }
    for &h in &moved_hours {
        manifest.p61.push(InjectedMove {
            from: stem(&hours[h - 1]),
            to: stem(&hours[h]),
            utsec: epochs[h * per_hour]
                .header
                .valid()
                .expect("clean header")
                .utsec,
        });
    }

    // Render files; a moved epoch is written at the end of the previous hour.
    let mut files = BTreeMap::new();
    for (hi, key) in hours.iter().enumerate() {
        let mut text = String::new();
        let start = hi * per_hour;
        for (i, e) in epochs.iter().enumerate().skip(start).take(per_hour) {
            if i == start && moved_hours.binary_search(&hi).is_ok() {
                continue;
            }
            render(e, &mut text);
        }
        if moved_hours.binary_search(&(hi + 1)).is_ok() {
            render(&epochs[start + per_hour], &mut text);
        }
        files.insert(*key, text);
    }

    SynthCorpus { files, manifest }
}

fn render(e: &PendingEpoch, out: &mut String) {
    write_header(&e.header, out);
    for o in &e.observations {
        write_observation(o, out);
    }
}

/// Writes `root/YYYY/MM-Mon/YMMDD_HH0000.scn.gz` files and `root/manifest.json`.
pub fn write_corpus(root: &Path, cfg: &SynthConfig) -> Result<Manifest> {
    let corpus = generate(cfg);
    for (key, text) in &corpus.files {
        let path = RawFileKey::new(*key, RawExt::Scn).path(root, cfg.digits);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, gzip(text.as_bytes()))?;
    }
    let json = serde_json::to_string_pretty(&corpus.manifest).expect("manifest serializes");
    fs::write(root.join("manifest.json"), json + "\n")?;
    Ok(corpus.manifest)
}
