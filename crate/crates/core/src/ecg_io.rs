//! ECG record ingestion, windowing/resampling, and signal contamination.
//!
//! Two text formats are accepted:
//!
//! * CSV: a header row of lead names, then one row per sample in mV. The
//!   sampling rate is not part of the file and is supplied by the caller.
//! * wfdb-like: a header line `fs=<Hz> n=<samples> leads=<comma list>`, a
//!   gain line `gain=<units per mV>`, then `n × leads` whitespace-separated
//!   signed integers, sample-major (all leads of sample 0, then sample 1, ...).

use std::collections::HashSet;
use std::io::Read;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from, substream};

pub const STANDARD_LEADS: [&str; 12] = [
    "I", "II", "III", "aVR", "aVL", "aVF", "V1", "V2", "V3", "V4", "V5", "V6",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lead {
    pub name: String,
    pub samples: Vec<f64>,
}

/// Multi-lead time-series in millivolts.
#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecord {
    leads: Vec<Lead>,
    fs: f64,
}

impl EcgRecord {
    pub fn new(leads: Vec<Lead>, fs: f64) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::Value(format!("sampling rate must be positive, got {fs}")));
        }
        if leads.is_empty() {
            return Err(Error::Value("record has no leads".into()));
        }
        let n = leads[0].samples.len();
        let mut names = HashSet::new();
        for lead in &leads {
            if !names.insert(lead.name.as_str()) {
                return Err(Error::Value(format!("duplicate lead name {:?}", lead.name)));
            }
            if lead.samples.len() != n {
                return Err(Error::LengthMismatch(format!(
                    "lead {} has {} samples, lead {} has {n}",
                    lead.name,
                    lead.samples.len(),
                    leads[0].name
                )));
            }
            if let Some(i) = lead.samples.iter().position(|v| !v.is_finite()) {
                return Err(Error::Value(format!(
                    "lead {} sample {i} is not finite",
                    lead.name
                )));
            }
        }
        Ok(Self { leads, fs })
    }

    /// Build from (name, samples) pairs.
    pub fn from_pairs<S: Into<String>>(pairs: Vec<(S, Vec<f64>)>, fs: f64) -> Result<Self> {
        let leads = pairs
            .into_iter()
            .map(|(name, samples)| Lead {
                name: name.into(),
                samples,
            })
            .collect();
        Self::new(leads, fs)
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn leads(&self) -> &[Lead] {
        &self.leads
    }

    pub fn lead(&self, name: &str) -> Option<&Lead> {
        self.leads.iter().find(|l| l.name == name)
    }

    pub fn lead_names(&self) -> impl Iterator<Item = &str> {
        self.leads.iter().map(|l| l.name.as_str())
    }

    pub fn sample_count(&self) -> usize {
        self.leads[0].samples.len()
    }

    pub fn duration_s(&self) -> f64 {
        self.sample_count() as f64 / self.fs
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RecordFormat {
    /// CSV has no sampling-rate field, so it travels with the format.
    Csv { fs: f64 },
    WfdbLike,
}

pub fn parse_record<R: Read>(mut source: R, format: RecordFormat) -> Result<EcgRecord> {
    let mut text = String::new();
    source
        .read_to_string(&mut text)
        .map_err(|e| Error::Format(format!("unreadable record: {e}")))?;
    match format {
        RecordFormat::Csv { fs } => parse_csv(&text, fs),
        RecordFormat::WfdbLike => parse_wfdb_like(&text),
    }
}

fn parse_value(tok: &str, row: usize) -> Result<f64> {
    let v: f64 = tok
        .trim()
        .parse()
        .map_err(|_| Error::Format(format!("row {row}: cannot parse {tok:?} as a number")))?;
    if !v.is_finite() {
        return Err(Error::Value(format!("row {row}: non-finite value {tok:?}")));
    }
    Ok(v)
}

fn parse_csv(text: &str, fs: f64) -> Result<EcgRecord> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty CSV".into()))?;
    let names: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    if names.iter().any(|n| n.is_empty()) {
        return Err(Error::Format("CSV header has an empty lead name".into()));
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(Error::LengthMismatch(format!(
                "CSV row {} has {} fields, header has {}",
                row + 1,
                fields.len(),
                names.len()
            )));
        }
        for (col, tok) in columns.iter_mut().zip(fields) {
            col.push(parse_value(tok, row + 1)?);
        }
    }
    EcgRecord::from_pairs(names.into_iter().zip(columns).collect(), fs)
}

fn header_field<'a>(line: &'a str, key: &str) -> Result<&'a str> {
    line.split_whitespace()
        .find_map(|kv| kv.strip_prefix(key).and_then(|r| r.strip_prefix('=')))
        .ok_or_else(|| Error::Format(format!("header is missing `{key}=`")))
}

fn parse_wfdb_like(text: &str) -> Result<EcgRecord> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Format("empty wfdb-like record".into()))?;
    let fs: f64 = header_field(header, "fs")?
        .parse()
        .map_err(|_| Error::Format("bad fs in header".into()))?;
    let n: usize = header_field(header, "n")?
        .parse()
        .map_err(|_| Error::Format("bad n in header".into()))?;
    let names: Vec<String> = header_field(header, "leads")?
        .split(',')
        .map(str::to_string)
        .collect();
    if names.iter().any(|s| s.is_empty()) {
        return Err(Error::Format("empty lead name in header".into()));
    }
    let gain_line = lines
        .next()
        .ok_or_else(|| Error::Format("missing gain line".into()))?;
    let gain: f64 = gain_line
        .trim()
        .strip_prefix("gain=")
        .ok_or_else(|| Error::Format(format!("expected `gain=<units per mV>`, got {gain_line:?}")))?
        .parse()
        .map_err(|_| Error::Format("bad gain value".into()))?;
    if !(gain.is_finite() && gain != 0.0) {
        return Err(Error::Value(format!("gain must be finite and nonzero, got {gain}")));
    }
    let mut values = Vec::with_capacity(n * names.len());
    for (row, line) in lines.enumerate() {
        for tok in line.split_whitespace() {
            let v: i64 = tok.parse().map_err(|_| {
                Error::Format(format!("data line {}: {tok:?} is not an integer", row + 1))
            })?;
            values.push(v as f64 / gain);
        }
    }
    let want = n * names.len();
    if values.len() != want {
        return Err(Error::LengthMismatch(format!(
            "expected {n} samples x {} leads = {want} values, found {}",
            names.len(),
            values.len()
        )));
    }
    let l = names.len();
    let columns: Vec<Vec<f64>> = (0..l)
        .map(|j| values.iter().skip(j).step_by(l).copied().collect())
        .collect();
    EcgRecord::from_pairs(names.into_iter().zip(columns).collect(), fs)
}

/// Write the wfdb-like text format (used by tests and tooling).
pub fn write_wfdb_like(rec: &EcgRecord, gain: f64) -> String {
    let names: Vec<&str> = rec.lead_names().collect();
    let mut out = format!(
        "fs={} n={} leads={}\ngain={}\n",
        rec.fs(),
        rec.sample_count(),
        names.join(","),
        gain
    );
    for i in 0..rec.sample_count() {
        let row: Vec<String> = rec
            .leads()
            .iter()
            .map(|l| ((l.samples[i] * gain).round() as i64).to_string())
            .collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

pub fn write_csv(rec: &EcgRecord) -> String {
    let names: Vec<&str> = rec.lead_names().collect();
    let mut out = names.join(",");
    out.push('\n');
    for i in 0..rec.sample_count() {
        let row: Vec<String> = rec.leads().iter().map(|l| l.samples[i].to_string()).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Cut `[start_s, start_s + dur_s)` and resample it to `target_fs` by linear
/// interpolation on sample timestamps `i / fs`.
pub fn segment_and_resample(
    rec: &EcgRecord,
    start_s: f64,
    dur_s: f64,
    target_fs: f64,
) -> Result<EcgRecord> {
    const EPS: f64 = 1e-9;
    if !(start_s >= 0.0 && dur_s > 0.0 && start_s + dur_s <= rec.duration_s() + EPS) {
        return Err(Error::Range(format!(
            "window [{start_s}, {}) s outside record of {} s",
            start_s + dur_s,
            rec.duration_s()
        )));
    }
    if !(target_fs.is_finite() && target_fs > 0.0) {
        return Err(Error::Range(format!("target_fs must be positive, got {target_fs}")));
    }
    let n_out = (target_fs * dur_s).round() as usize;
    let n_in = rec.sample_count();
    let step = rec.fs() / target_fs;
    let origin = start_s * rec.fs();
    let leads = rec
        .leads()
        .iter()
        .map(|lead| {
            let s = &lead.samples;
            let samples = (0..n_out)
                .map(|k| {
                    let pos = origin + k as f64 * step;
                    let i0 = pos.floor();
                    let frac = pos - i0;
                    let i0 = (i0.max(0.0) as usize).min(n_in - 1);
                    let i1 = (i0 + 1).min(n_in - 1);
                    if frac == 0.0 || i0 == i1 {
                        s[i0]
                    } else {
                        s[i0] + (s[i1] - s[i0]) * frac
                    }
                })
                .collect();
            Lead {
                name: lead.name.clone(),
                samples,
            }
        })
        .collect();
    EcgRecord::new(leads, target_fs)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SignalNoiseKind {
    #[default]
    None,
    Awgn,
    BaselineWander,
    Both,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalNoiseSpec {
    pub kind: SignalNoiseKind,
    pub snr_db: f64,
    pub wander_freq_hz: f64,
    pub wander_amp_mv: f64,
}

impl Default for SignalNoiseSpec {
    fn default() -> Self {
        Self {
            kind: SignalNoiseKind::None,
            snr_db: 30.0,
            wander_freq_hz: 0.3,
            wander_amp_mv: 0.1,
        }
    }
}

impl SignalNoiseSpec {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let awgn = matches!(self.kind, SignalNoiseKind::Awgn | SignalNoiseKind::Both);
        if awgn && !self.snr_db.is_finite() {
            return Err(Error::param(format!("{prefix}snr_db"), "must be finite"));
        }
        if !(self.wander_freq_hz > 0.0 && self.wander_freq_hz <= 1.0) {
            return Err(Error::param(
                format!("{prefix}wander_freq_hz"),
                "must be in (0, 1] Hz",
            ));
        }
        if !(self.wander_amp_mv >= 0.0 && self.wander_amp_mv.is_finite()) {
            return Err(Error::param(format!("{prefix}wander_amp_mv"), "must be >= 0"));
        }
        Ok(())
    }
}

/// AWGN at a per-lead SNR (signal power = mean square) and/or sinusoidal
/// baseline wander. Each lead draws from its own substream.
pub fn add_signal_noise(rec: &EcgRecord, spec: &SignalNoiseSpec, seed: u64) -> Result<EcgRecord> {
    spec.validate("signal_noise.")?;
    let (awgn, wander) = match spec.kind {
        SignalNoiseKind::None => return Ok(rec.clone()),
        SignalNoiseKind::Awgn => (true, false),
        SignalNoiseKind::BaselineWander => (false, true),
        SignalNoiseKind::Both => (true, true),
    };
    let fs = rec.fs();
    let mut leads = Vec::with_capacity(rec.leads().len());
    for (li, lead) in rec.leads().iter().enumerate() {
        let mut samples = lead.samples.clone();
        if awgn {
            let power = samples.iter().map(|v| v * v).sum::<f64>() / samples.len() as f64;
            if power == 0.0 {
                return Err(Error::DegeneratePower(lead.name.clone()));
            }
            let sigma = (power / 10f64.powf(spec.snr_db / 10.0)).sqrt();
            let normal = Normal::new(0.0, sigma).map_err(|e| Error::Value(e.to_string()))?;
            let mut rng = rng_from(substream(seed, li as u64));
            for v in samples.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        if wander {
            let w = 2.0 * std::f64::consts::PI * spec.wander_freq_hz;
            for (i, v) in samples.iter_mut().enumerate() {
                *v += spec.wander_amp_mv * (w * i as f64 / fs).sin();
            }
        }
        leads.push(Lead {
            name: lead.name.clone(),
            samples,
        });
    }
    EcgRecord::new(leads, fs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_csv(rows: usize) -> String {
        let mut s = String::from("I,II\n");
        for _ in 0..rows {
            s.push_str("0.0,0.0\n");
        }
        s
    }

    #[test]
    fn csv_zero_record() {
        let rec = parse_record(zero_csv(500).as_bytes(), RecordFormat::Csv { fs: 500.0 }).unwrap();
        assert_eq!(rec.leads().len(), 2);
        assert_eq!(rec.sample_count(), 500);
        assert!(rec.leads().iter().all(|l| l.samples.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn csv_ragged_row_is_length_mismatch() {
        let text = "I,II\n0.1,0.2\n0.3\n";
        let err = parse_record(text.as_bytes(), RecordFormat::Csv { fs: 500.0 }).unwrap_err();
        assert!(matches!(err, Error::LengthMismatch(_)), "{err}");
    }

    #[test]
    fn csv_non_finite_is_value_error() {
        let text = "I\n0.1\nNaN\n";
        let err = parse_record(text.as_bytes(), RecordFormat::Csv { fs: 500.0 }).unwrap_err();
        assert!(matches!(err, Error::Value(_)), "{err}");
        let text = "I\n0.1\ninf\n";
        assert!(matches!(
            parse_record(text.as_bytes(), RecordFormat::Csv { fs: 500.0 }),
            Err(Error::Value(_))
        ));
    }

    #[test]
    fn wfdb_like_gain_division() {
        let names = STANDARD_LEADS.join(",");
        let mut text = format!("fs=500 n=5000 leads={names}\ngain=200\n");
        for _ in 0..5000 {
            text.push_str(&["200"; 12].join(" "));
            text.push('\n');
        }
        let rec = parse_record(text.as_bytes(), RecordFormat::WfdbLike).unwrap();
        assert_eq!(rec.leads().len(), 12);
        assert_eq!(rec.lead("V6").unwrap().samples[0], 1.0);
        assert_eq!(rec.sample_count(), 5000);
        assert_eq!(rec.duration_s(), 10.0);
    }

    #[test]
    fn wfdb_like_malformed_header() {
        let err = parse_record("fs=500 leads=I\ngain=1\n1\n".as_bytes(), RecordFormat::WfdbLike)
            .unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
        let err = parse_record("fs=500 n=1 leads=I\n1\n".as_bytes(), RecordFormat::WfdbLike)
            .unwrap_err();
        assert!(matches!(err, Error::Format(_)), "{err}");
    }

    #[test]
    fn wfdb_like_short_data() {
        let err = parse_record(
            "fs=500 n=3 leads=I,II\ngain=1\n1 2\n3 4\n5\n".as_bytes(),
            RecordFormat::WfdbLike,
        )
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch(_)), "{err}");
    }

    #[test]
    fn wfdb_like_round_trip() {
        let rec = EcgRecord::from_pairs(
            vec![("I", vec![0.005, -1.0, 2.5]), ("II", vec![0.0, 0.1, -0.2])],
            250.0,
        )
        .unwrap();
        let back = parse_record(write_wfdb_like(&rec, 200.0).as_bytes(), RecordFormat::WfdbLike)
            .unwrap();
        assert_eq!(back, rec);
    }

    #[test]
    fn record_invariants() {
        assert!(EcgRecord::from_pairs(vec![("I", vec![0.0])], 0.0).is_err());
        assert!(EcgRecord::from_pairs(vec![("I", vec![0.0]), ("I", vec![0.0])], 1.0).is_err());
        assert!(EcgRecord::from_pairs(Vec::<(&str, Vec<f64>)>::new(), 1.0).is_err());
    }

    fn ramp_record() -> EcgRecord {
        // v(t) = t / 9.996, so resampling at 250 Hz gives k / 2499 exactly.
        let samples = (0..5000).map(|i| (i as f64 / 500.0) / 9.996).collect();
        EcgRecord::from_pairs(vec![("I", samples)], 500.0).unwrap()
    }

    #[test]
    fn identity_resample_is_bitwise() {
        let rec = ramp_record();
        let out = segment_and_resample(&rec, 0.0, rec.duration_s(), rec.fs()).unwrap();
        assert_eq!(out, rec);
    }

    #[test]
    fn ramp_resample_matches_closed_form() {
        let out = segment_and_resample(&ramp_record(), 0.0, 10.0, 250.0).unwrap();
        assert_eq!(out.sample_count(), 2500);
        assert_eq!(out.duration_s(), 10.0);
        for (k, v) in out.leads()[0].samples.iter().enumerate() {
            assert!((v - k as f64 / 2499.0).abs() < 1e-9, "k={k} v={v}");
        }
    }

    #[test]
    fn constant_survives_any_window() {
        let rec = EcgRecord::from_pairs(vec![("II", vec![1.0; 5000])], 500.0).unwrap();
        for (start, dur, fs) in [(0.3, 2.5, 333.0), (1.0, 9.0, 1000.0), (7.77, 2.2, 125.0)] {
            let out = segment_and_resample(&rec, start, dur, fs).unwrap();
            assert!(out.leads()[0].samples.iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn window_out_of_range() {
        let rec = ramp_record();
        assert!(matches!(
            segment_and_resample(&rec, 5.0, 6.0, 500.0),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            segment_and_resample(&rec, -1.0, 1.0, 500.0),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            segment_and_resample(&rec, 0.0, 1.0, 0.0),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn noise_none_is_identity() {
        let rec = ramp_record();
        let out = add_signal_noise(&rec, &SignalNoiseSpec::default(), 3).unwrap();
        assert_eq!(out, rec);
    }

    fn unit_power_record(n: usize) -> EcgRecord {
        // alternating ±1: mean square exactly 1
        let s = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        EcgRecord::from_pairs(vec![("I", s)], 500.0).unwrap()
    }

    fn noise_power(a: &EcgRecord, b: &EcgRecord) -> f64 {
        let (x, y) = (&a.leads()[0].samples, &b.leads()[0].samples);
        x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / x.len() as f64
    }

    #[test]
    fn awgn_zero_db_monte_carlo() {
        let rec = unit_power_record(100_000);
        let spec = SignalNoiseSpec {
            kind: SignalNoiseKind::Awgn,
            snr_db: 0.0,
            ..Default::default()
        };
        let p = noise_power(&rec, &add_signal_noise(&rec, &spec, 11).unwrap());
        assert!((p - 1.0).abs() < 0.05, "noise power {p}");
    }

    #[test]
    fn awgn_empirical_snr_within_half_db() {
        let rec = unit_power_record(5000);
        for (snr, seed) in [(0.0, 1), (10.0, 2), (20.0, 3), (35.0, 4)] {
            let spec = SignalNoiseSpec {
                kind: SignalNoiseKind::Awgn,
                snr_db: snr,
                ..Default::default()
            };
            let p = noise_power(&rec, &add_signal_noise(&rec, &spec, seed).unwrap());
            let got = 10.0 * (1.0 / p).log10();
            assert!((got - snr).abs() <= 0.5, "target {snr} got {got}");
        }
    }

    #[test]
    fn awgn_on_zero_lead_fails() {
        let rec = EcgRecord::from_pairs(vec![("I", vec![0.0; 100])], 500.0).unwrap();
        let spec = SignalNoiseSpec {
            kind: SignalNoiseKind::Both,
            ..Default::default()
        };
        assert!(matches!(
            add_signal_noise(&rec, &spec, 0),
            Err(Error::DegeneratePower(_))
        ));
    }

    #[test]
    fn wander_amplitude_bound() {
        let rec = EcgRecord::from_pairs(vec![("I", vec![0.0; 5000])], 500.0).unwrap();
        let spec = SignalNoiseSpec {
            kind: SignalNoiseKind::BaselineWander,
            wander_amp_mv: 0.1,
            wander_freq_hz: 0.5,
            ..Default::default()
        };
        let out = add_signal_noise(&rec, &spec, 0).unwrap();
        let max = out.leads()[0].samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!((max - 0.1).abs() <= 1e-12, "max {max}");
    }

    #[test]
    fn invalid_wander_freq_rejected() {
        let spec = SignalNoiseSpec {
            kind: SignalNoiseKind::BaselineWander,
            wander_freq_hz: 2.0,
            ..Default::default()
        };
        assert!(spec.validate("").is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn resample_stays_within_source_bounds(
                samples in prop::collection::vec(-3.0f64..3.0, 50..400),
                start_frac in 0.0f64..0.5,
                dur_frac in 0.1f64..0.5,
                target in 20.0f64..1500.0,
            ) {
                let rec = EcgRecord::from_pairs(vec![("I", samples.clone())], 100.0).unwrap();
                let d = rec.duration_s();
                let out = segment_and_resample(&rec, start_frac * d, dur_frac * d, target).unwrap();
                let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                for v in &out.leads()[0].samples {
                    prop_assert!(*v >= lo - 1e-12 && *v <= hi + 1e-12);
                }
            }

            #[test]
            fn noise_is_deterministic(seed in any::<u64>(), snr in -5.0f64..40.0) {
                let rec = EcgRecord::from_pairs(
                    vec![("I", (0..300).map(|i| (i as f64 * 0.1).sin()).collect::<Vec<_>>())],
                    250.0,
                ).unwrap();
                let spec = SignalNoiseSpec { kind: SignalNoiseKind::Both, snr_db: snr, ..Default::default() };
                prop_assert_eq!(add_signal_noise(&rec, &spec, seed).unwrap(), add_signal_noise(&rec, &spec, seed).unwrap());
            }
        }
    }
}
