//! Per-image ground truth, stored as JSON next to the image.
//!
//! Schema version 1. Pixel coordinates follow the image: x right, y down,
//! pixel centres on integers. `leads[].points` and `pulses` are after the
//! perspective stage; `leads[].region`, `leads[].baseline_px` and
//! `artifacts` are in page coordinates before it. Mapping page coordinates
//! through `matrix` gives image coordinates.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::crease::{CreaseLines, CreaseSpec};
use crate::ecg_io::{EcgRecord, SignalNoiseSpec};
use crate::error::{Error, Result};
use crate::geometry::Matrix3;
use crate::grid::{LeadPolyline, PaperSpec};
use crate::noise::NoiseSpec;
use crate::raster::PixelRect;
use crate::text::ArtifactBox;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadTruth {
    pub lead: String,
    pub row: usize,
    pub col: usize,
    pub rhythm: bool,
    pub t_start_s: f64,
    pub duration_s: f64,
    pub fs: f64,
    pub first_sample: usize,
    pub baseline_px: f64,
    pub region: PixelRect,
    pub points: Vec<[f64; 2]>,
    /// The plotted samples, mV.
    pub samples_mv: Vec<f64>,
}

impl LeadTruth {
    pub(crate) fn from_plot(l: &LeadPolyline, rec: &EcgRecord) -> Self {
        let all = &rec.lead(&l.lead).expect("plotted lead exists").samples;
        Self {
            lead: l.lead.clone(),
            row: l.row,
            col: l.col,
            rhythm: l.rhythm,
            t_start_s: l.t_start_s,
            duration_s: l.duration_s,
            fs: l.fs,
            first_sample: l.first_sample,
            baseline_px: l.baseline_px,
            region: l.region,
            points: l.points.clone(),
            samples_mv: all[l.first_sample..l.first_sample + l.points.len()].to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreaseRecord {
    pub spec: CreaseSpec,
    pub lines: CreaseLines,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WrinkleRecord {
    pub block_px: u32,
    pub overlap_px: u32,
    pub candidates: usize,
    pub alpha: f64,
    pub texture_seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthMeta {
    pub schema_version: u32,
    pub record_id: String,
    pub record_index: u64,
    pub master_seed: u64,
    pub fs: f64,
    pub duration_s: f64,
    pub paper: PaperSpec,
    pub px_per_mm: f64,
    pub px_per_s: f64,
    pub px_per_mv: f64,
    pub matrix: Matrix3,
    pub leads: Vec<LeadTruth>,
    /// Calibration pulse polylines.
    pub pulses: Vec<Vec<[f64; 2]>>,
    pub artifacts: Vec<ArtifactBox>,
    pub signal_noise: Option<SignalNoiseSpec>,
    pub creases: Option<CreaseRecord>,
    pub wrinkles: Option<WrinkleRecord>,
    pub imaging: Option<NoiseSpec>,
    /// Enabled stages in execution order.
    pub stages: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

impl GroundTruthMeta {
    pub fn total_seconds(&self) -> f64 {
        self.stages.iter().map(|s| s.seconds).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let meta: Self = serde_json::from_str(text)?;
        if meta.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "sidecar schema version {} (expected {SCHEMA_VERSION})",
                meta.schema_version
            )));
        }
        Ok(meta)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }
}

pub fn read_sidecar(path: &Path) -> Result<GroundTruthMeta> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    GroundTruthMeta::from_json(&text)
}
