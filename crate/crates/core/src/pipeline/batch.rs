//! Directory-to-directory generation with a JSON manifest.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{DistortionConfig, Generator, Stage, StageTiming};
use crate::ecg_io::{parse_record, EcgRecord, RecordFormat};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub record_index: u64,
    pub input: PathBuf,
    pub image: Option<PathBuf>,
    pub sidecar: Option<PathBuf>,
    /// SHA-256 of the PNG file.
    pub image_sha256: Option<String>,
    pub error: Option<String>,
    pub stages: Vec<StageTiming>,
    /// Sum of the stage spans.
    pub total_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub stage: String,
    /// Coarse reporting group (see [`Stage::timing_group`]).
    pub group: Option<String>,
    pub records: usize,
    pub mean_s: f64,
    pub total_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    pub rows: Vec<TimingRow>,
    pub mean_total_s: f64,
    pub total_s: f64,
}

impl TimingSummary {
    pub fn from_entries(entries: &[ManifestEntry]) -> Self {
        let ok: Vec<&ManifestEntry> = entries.iter().filter(|e| e.error.is_none()).collect();
        let mut by_stage: BTreeMap<(u64, String), Vec<f64>> = BTreeMap::new();
        for e in &ok {
            for s in &e.stages {
                let order = Stage::from_name(&s.stage).map_or(u64::MAX, Stage::id);
                by_stage.entry((order, s.stage.clone())).or_default().push(s.seconds);
            }
        }
        let rows = by_stage
            .into_iter()
            .map(|((_, stage), v)| {
                let total: f64 = v.iter().sum();
                TimingRow {
                    group: Stage::from_name(&stage).and_then(Stage::timing_group).map(str::to_string),
                    stage,
                    records: v.len(),
                    mean_s: total / v.len() as f64,
                    total_s: total,
                }
            })
            .collect();
        let total_s: f64 = ok.iter().map(|e| e.total_s).sum();
        Self {
            rows,
            mean_total_s: if ok.is_empty() { 0.0 } else { total_s / ok.len() as f64 },
            total_s,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub workers: usize,
    pub master_seed: u64,
    pub succeeded: usize,
    pub failed: usize,
    pub records: Vec<ManifestEntry>,
    pub timing: TimingSummary,
}

impl Manifest {
    pub fn from_entries(entries: Vec<ManifestEntry>, workers: usize, master_seed: u64) -> Self {
        let failed = entries.iter().filter(|e| e.error.is_some()).count();
        Self {
            schema_version: super::SCHEMA_VERSION,
            workers,
            master_seed,
            succeeded: entries.len() - failed,
            failed,
            timing: TimingSummary::from_entries(&entries),
            records: entries,
        }
    }
}

pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Input extensions: `.csv` is read as CSV, `.txt`/`.dat`/`.ecg` as the
/// wfdb-like text format. Other files are ignored.
fn record_format(path: &Path, csv_fs: f64) -> Option<RecordFormat> {
    let ext = path.extension()?.to_str()?.to_ascii_lowercase();
    match ext.as_str() {
        "csv" => Some(RecordFormat::Csv { fs: csv_fs }),
        "txt" | "dat" | "ecg" => Some(RecordFormat::WfdbLike),
        _ => None,
    }
}

fn list_records(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && record_format(p, 1.0).is_some())
        .collect();
    files.sort();
    Ok(files)
}

fn read_record(path: &Path, csv_fs: f64) -> Result<EcgRecord> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let format = record_format(path, csv_fs).ok_or_else(|| Error::Format("unknown record extension".into()))?;
    parse_record(std::io::BufReader::new(file), format)
}

fn process(gen: &Generator, path: &Path, index: u64, out_dir: &Path) -> ManifestEntry {
    let id = path.file_stem().map_or_else(|| format!("record_{index:05}"), |s| s.to_string_lossy().into_owned());
    let mut entry = ManifestEntry {
        record_id: id.clone(),
        record_index: index,
        input: path.to_path_buf(),
        image: None,
        sidecar: None,
        image_sha256: None,
        error: None,
        stages: Vec::new(),
        total_s: 0.0,
    };
    let run = || -> Result<_> {
        let rec = read_record(path, gen.config().input.csv_fs)?;
        let (img, mut meta) = gen.generate(&rec, index)?;
        meta.record_id = id.clone();
        let png = img.to_png_bytes(Some(gen.config().paper.dpi))?;
        let image = out_dir.join(format!("{id}.png"));
        std::fs::write(&image, &png).map_err(|e| Error::io(&image, e))?;
        let sidecar = out_dir.join(format!("{id}.json"));
        meta.save(&sidecar)?;
        Ok((image, sidecar, hex::encode(Sha256::digest(&png)), meta))
    };
    match run() {
        Ok((image, sidecar, digest, meta)) => {
            entry.total_s = meta.total_seconds();
            entry.stages = meta.stages;
            entry.image = Some(image);
            entry.sidecar = Some(sidecar);
            entry.image_sha256 = Some(digest);
        }
        Err(e) => {
            log::warn!("{}: {e}", path.display());
            entry.error = Some(e.to_string());
        }
    }
    entry
}

/// Generate every record in `input_dir` with `workers` threads. Records are
/// indexed by sorted file name, so outputs do not depend on scheduling. A
/// failing record is listed in the manifest and the batch goes on.
pub fn generate_batch(input_dir: &Path, out_dir: &Path, cfg: &DistortionConfig, workers: usize) -> Result<Manifest> {
    let gen = Generator::new(cfg.clone())?;
    let files = list_records(input_dir)?;
    if files.is_empty() {
        return Err(Error::Value(format!("no records in {}", input_dir.display())));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Value(format!("thread pool: {e}")))?;
    let entries: Vec<ManifestEntry> = pool.install(|| {
        files
            .par_iter()
            .enumerate()
            .map(|(i, p)| process(&gen, p, i as u64, out_dir))
            .collect()
    });
    let manifest = Manifest::from_entries(entries, workers, cfg.master_seed);
    let path = out_dir.join(MANIFEST_NAME);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

/// Per-stage mean seconds per image plus a total row, then the same means
/// added up per reporting group.
pub fn report_timings(m: &Manifest) -> Result<String> {
    if m.succeeded == 0 || m.timing.rows.is_empty() {
        return Err(Error::EmptyReport("manifest has no successful records".into()));
    }
    let mut s = String::new();
    let _ = writeln!(s, "{:<16} {:<28} {:>7} {:>12} {:>12}", "stage", "group", "images", "mean_s", "total_s");
    for r in &m.timing.rows {
        let _ = writeln!(
            s,
            "{:<16} {:<28} {:>7} {:>12.4} {:>12.4}",
            r.stage,
            r.group.as_deref().unwrap_or("-"),
            r.records,
            r.mean_s,
            r.total_s
        );
    }
    let _ = writeln!(
        s,
        "{:<16} {:<28} {:>7} {:>12.4} {:>12.4}",
        "total", "total", m.succeeded, m.timing.mean_total_s, m.timing.total_s
    );
    // mapped rows only, added up per group
    let mut groups: Vec<(&str, f64)> = Vec::new();
    for r in &m.timing.rows {
        if let Some(g) = r.group.as_deref() {
            match groups.iter_mut().find(|(n, _)| *n == g) {
                Some(e) => e.1 += r.mean_s,
                None => groups.push((g, r.mean_s)),
            }
        }
    }
    if !groups.is_empty() {
        let _ = writeln!(s);
        let _ = writeln!(s, "{:<28} {:>12}", "group", "mean_s");
        for (g, v) in groups {
            let _ = writeln!(s, "{g:<28} {v:>12.4}");
        }
    }
    if m.failed > 0 {
        let _ = writeln!(s, "failed records: {}", m.failed);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, stages: &[(&str, f64)]) -> ManifestEntry {
        ManifestEntry {
            record_id: id.into(),
            record_index: 0,
            input: PathBuf::from(id),
            image: None,
            sidecar: None,
            image_sha256: None,
            error: None,
            stages: stages
                .iter()
                .map(|&(s, t)| StageTiming {
                    stage: s.into(),
                    seconds: t,
                })
                .collect(),
            total_s: stages.iter().map(|s| s.1).sum(),
        }
    }

    #[test]
    fn pass_through_values() {
        let m = Manifest::from_entries(vec![entry("a", &[("render", 0.1)])], 1, 0);
        let t = report_timings(&m).unwrap();
        let render = t.lines().find(|l| l.starts_with("render")).unwrap();
        assert!(render.contains("distortionless generation") && render.contains("0.1000"), "{t}");
        let total = t.lines().find(|l| l.starts_with("total")).unwrap();
        assert!(total.contains("0.1000"), "{t}");
    }

    #[test]
    fn averages_and_additivity() {
        let m = Manifest::from_entries(
            vec![
                entry("a", &[("render", 0.2), ("creases", 0.4), ("perspective", 1.0)]),
                entry("b", &[("render", 0.4), ("creases", 0.2), ("perspective", 3.0)]),
            ],
            2,
            0,
        );
        let rows = &m.timing.rows;
        let names: Vec<_> = rows.iter().map(|r| r.stage.as_str()).collect();
        assert_eq!(names, ["render", "creases", "perspective"]);
        assert!((rows[0].mean_s - 0.3).abs() < 1e-12);
        assert!((rows[2].mean_s - 2.0).abs() < 1e-12);
        let sum: f64 = rows.iter().map(|r| r.mean_s).sum();
        assert!((sum - m.timing.mean_total_s).abs() < 1e-12);
    }

    #[test]
    fn one_row_per_stage_plus_total() {
        let m = Manifest::from_entries(vec![entry("a", &[("render", 0.1), ("handwriting", 0.2)])], 1, 0);
        let t = report_timings(&m).unwrap();
        let table: Vec<&str> = t.lines().take_while(|l| !l.is_empty()).collect();
        assert_eq!(table.len(), 1 + 2 + 1);
    }

    #[test]
    fn empty_manifest_is_an_error() {
        let m = Manifest::from_entries(Vec::new(), 1, 0);
        assert!(matches!(report_timings(&m), Err(Error::EmptyReport(_))));
    }
}
