//! Generation config: one TOML document, every table optional.
//!
//! ```toml
//! master_seed = 7
//!
//! [paper]
//! dpi = 200.0
//!
//! [handwriting]
//! enabled = true
//! count_range = [1, 3]
//!
//! [imaging]
//! gaussian_eta = 4.0
//! ```
//!
//! Unknown keys are rejected. Validation errors name the offending field
//! with its table path (`imaging.sp_p`, `creases.theta_range`, ...).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ecg_io::SignalNoiseSpec;
use crate::error::{Error, Result};
use crate::grid::{LeadLayout, PaperSpec};
use crate::noise::NoiseSpec;
use crate::raster::Rgb;
use crate::text::PrintedTemplate;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    /// Sampling rate assumed for CSV records, which carry none.
    pub csv_fs: f64,
    /// Window start inside each record.
    pub start_s: f64,
    /// Window length; `None` takes the rest of the record.
    pub duration_s: Option<f64>,
    /// Resample the window to this rate before plotting.
    pub resample_fs: Option<f64>,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            csv_fs: 500.0,
            start_s: 0.0,
            duration_s: None,
            resample_fs: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HandwritingConfig {
    pub enabled: bool,
    /// Inclusive range of style ids drawn per annotation.
    pub style_range: [u8; 2],
    /// Inclusive range of annotations per record.
    pub count_range: [usize; 2],
    /// Glyph height range in pixels.
    pub size_px_range: [f64; 2],
    /// One phrase per line; the bundled lexicon when absent.
    pub lexicon_path: Option<PathBuf>,
    /// Text to match the lexicon against; without one, phrases are drawn
    /// from the lexicon directly.
    pub corpus_path: Option<PathBuf>,
    pub ink_color: Rgb,
    pub opacity: f32,
}

impl Default for HandwritingConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            style_range: [1, 7],
            count_range: [1, 3],
            size_px_range: [28.0, 44.0],
            lexicon_path: None,
            corpus_path: None,
            ink_color: [24, 28, 72],
            opacity: 0.9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CreaseConfig {
    pub enabled: bool,
    pub count_range: [usize; 2],
    pub theta_range: [f64; 2],
    pub intensity: f64,
    pub sigma_px: f64,
    pub line_width_px: u32,
    pub lighten: bool,
}

impl Default for CreaseConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            count_range: [1, 4],
            theta_range: [30.0, 150.0],
            intensity: 0.35,
            sigma_px: 3.0,
            line_width_px: 2,
            lighten: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WrinkleConfig {
    pub enabled: bool,
    pub block_px: u32,
    pub overlap_px: u32,
    pub candidates: usize,
    pub alpha: f64,
    /// PNG or PPM seed; a procedural texture of `seed_size_px` otherwise.
    pub seed_texture_path: Option<PathBuf>,
    pub seed_size_px: u32,
    /// Quilt at `1/downscale` of the page size, then upsample bilinearly.
    pub downscale: u32,
}

impl Default for WrinkleConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            block_px: 60,
            overlap_px: 10,
            candidates: 20,
            alpha: 0.5,
            seed_texture_path: None,
            seed_size_px: 192,
            downscale: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerspectiveConfig {
    pub enabled: bool,
    /// Maximum corner displacement as a fraction of the page diagonal.
    pub corner_jitter_frac: f64,
}

impl Default for PerspectiveConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            corner_jitter_frac: 0.03,
        }
    }
}

/// Full recipe for one batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistortionConfig {
    pub master_seed: u64,
    pub input: InputConfig,
    pub paper: PaperSpec,
    pub layout: LeadLayout,
    /// Print each lead's name at the start of its segment.
    pub lead_labels: bool,
    pub calibration_pulse: bool,
    pub template: PrintedTemplate,
    pub signal_noise: SignalNoiseSpec,
    pub handwriting: HandwritingConfig,
    pub creases: CreaseConfig,
    pub wrinkles: WrinkleConfig,
    pub perspective: PerspectiveConfig,
    pub imaging: NoiseSpec,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            input: InputConfig::default(),
            paper: PaperSpec::default(),
            layout: LeadLayout::default(),
            lead_labels: true,
            calibration_pulse: true,
            template: PrintedTemplate::default(),
            signal_noise: SignalNoiseSpec::default(),
            handwriting: HandwritingConfig::default(),
            creases: CreaseConfig::default(),
            wrinkles: WrinkleConfig::default(),
            perspective: PerspectiveConfig::default(),
            imaging: NoiseSpec {
                gaussian_eta: 3.0,
                ..NoiseSpec::default()
            },
        }
    }
}

fn ordered<T: PartialOrd + Copy>(r: [T; 2], field: &str, ok: impl Fn(T) -> bool) -> Result<()> {
    if !(ok(r[0]) && ok(r[1]) && r[0] <= r[1]) {
        return Err(Error::param(field, "need lo <= hi, both in range"));
    }
    Ok(())
}

impl DistortionConfig {
    /// Every stage off: the output is the plain plotted record.
    pub fn distortionless() -> Self {
        let mut c = Self {
            lead_labels: false,
            ..Self::default()
        };
        c.handwriting.enabled = false;
        c.creases.enabled = false;
        c.wrinkles.enabled = false;
        c.perspective.enabled = false;
        c.imaging = NoiseSpec::default();
        c
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.input;
        if !(i.csv_fs.is_finite() && i.csv_fs > 0.0) {
            return Err(Error::param("input.csv_fs", "must be > 0"));
        }
        if !(i.start_s.is_finite() && i.start_s >= 0.0) {
            return Err(Error::param("input.start_s", "must be >= 0"));
        }
        if let Some(d) = i.duration_s {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::param("input.duration_s", "must be > 0"));
            }
        }
        if let Some(f) = i.resample_fs {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::param("input.resample_fs", "must be > 0"));
            }
        }
        self.paper.validate("paper.")?;
        self.layout.validate(&self.paper, "layout.")?;
        self.template.validate(&self.paper, "template.")?;
        self.signal_noise.validate("signal_noise.")?;

        let h = &self.handwriting;
        ordered(h.style_range, "handwriting.style_range", |s| (1..=7).contains(&s))?;
        ordered(h.count_range, "handwriting.count_range", |_| true)?;
        ordered(h.size_px_range, "handwriting.size_px_range", |s| s >= 8.0 && s.is_finite())?;
        if !(0.0..=1.0).contains(&h.opacity) {
            return Err(Error::param("handwriting.opacity", "must be in [0, 1]"));
        }

        let c = &self.creases;
        ordered(c.count_range, "creases.count_range", |_| true)?;
        ordered(c.theta_range, "creases.theta_range", |t| t > 0.0 && t < 180.0)?;
        if !(0.0..=1.0).contains(&c.intensity) {
            return Err(Error::param("creases.intensity", "must be in [0, 1]"));
        }
        if !(c.sigma_px.is_finite() && c.sigma_px >= 0.0) {
            return Err(Error::param("creases.sigma_px", "must be >= 0"));
        }
        if c.line_width_px == 0 {
            return Err(Error::param("creases.line_width_px", "must be >= 1"));
        }

        let w = &self.wrinkles;
        if !(w.overlap_px > 0 && w.overlap_px < w.block_px) {
            return Err(Error::param("wrinkles.overlap_px", "need 0 < overlap < block"));
        }
        if w.candidates == 0 {
            return Err(Error::param("wrinkles.candidates", "must be >= 1"));
        }
        if !(0.0..=1.0).contains(&w.alpha) {
            return Err(Error::param("wrinkles.alpha", "must be in [0, 1]"));
        }
        if w.seed_size_px < w.block_px {
            return Err(Error::param("wrinkles.seed_size_px", "must be >= block_px"));
        }
        if w.downscale == 0 {
            return Err(Error::param("wrinkles.downscale", "must be >= 1"));
        }
        if self.wrinkles.enabled {
            let (ow, oh) = self.quilt_dims();
            if ow < w.block_px || oh < w.block_px {
                return Err(Error::param("wrinkles.downscale", "quilted texture smaller than one block"));
            }
        }

        let p = &self.perspective;
        if !(0.0..0.25).contains(&p.corner_jitter_frac) {
            return Err(Error::param("perspective.corner_jitter_frac", "must be in [0, 0.25)"));
        }
        self.imaging.validate("imaging")
    }

    pub(crate) fn quilt_dims(&self) -> (u32, u32) {
        let d = self.wrinkles.downscale.max(1);
        (self.paper.width_px.div_ceil(d), self.paper.height_px.div_ceil(d))
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Read, parse, and validate a config file.
pub fn load_config(path: &Path) -> Result<DistortionConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    DistortionConfig::from_toml_str(&text)
}
