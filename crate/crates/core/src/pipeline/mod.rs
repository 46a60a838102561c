//! Stage orchestration, per-record seeding, sidecars, and batch runs.
//!
//! Stages always run in this order; disabled stages are skipped without
//! touching the seeds of the others:
//!
//! | id | stage          |
//! |----|----------------|
//! | 0  | signal_noise   |
//! | 1  | render         |
//! | 2  | printed_text   |
//! | 3  | handwriting    |
//! | 4  | creases        |
//! | 5  | wrinkles       |
//! | 6  | perspective    |
//! | 7  | imaging_noise  |

mod batch;
mod config;
mod sidecar;

use std::path::Path;
use std::time::Instant;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crease::{apply_creases, blend_wrinkles, procedural_seed_texture, quilt_texture, CreaseSpec, QuiltSpec};
use crate::ecg_io::{add_signal_noise, segment_and_resample, EcgRecord, SignalNoiseKind};
use crate::error::{Error, Result};
use crate::geometry::{random_perspective, transform_points, warp_image, Matrix3};
use crate::grid::{plot_record, render_blank_paper};
use crate::noise::apply_noise;
use crate::raster::RasterImage;
use crate::rng::{derive_seed, rng_from, substream};
use crate::text::{
    overlay_handwriting, overlay_printed_text, parse_lexicon, select_keywords, synthesize_handwriting,
    HandwritingStyle, TemplateField, DEFAULT_LEXICON,
};

pub use batch::{generate_batch, read_manifest, report_timings, Manifest, ManifestEntry, TimingRow, TimingSummary};
pub use config::{
    load_config, CreaseConfig, DistortionConfig, HandwritingConfig, InputConfig, PerspectiveConfig, WrinkleConfig,
};
pub use sidecar::{
    read_sidecar, CreaseRecord, GroundTruthMeta, LeadTruth, StageTiming, WrinkleRecord, SCHEMA_VERSION,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    SignalNoise,
    Render,
    PrintedText,
    Handwriting,
    Creases,
    Wrinkles,
    Perspective,
    ImagingNoise,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::SignalNoise,
        Stage::Render,
        Stage::PrintedText,
        Stage::Handwriting,
        Stage::Creases,
        Stage::Wrinkles,
        Stage::Perspective,
        Stage::ImagingNoise,
    ];

    pub fn id(self) -> u64 {
        self as u64
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::SignalNoise => "signal_noise",
            Stage::Render => "render",
            Stage::PrintedText => "printed_text",
            Stage::Handwriting => "handwriting",
            Stage::Creases => "creases",
            Stage::Wrinkles => "wrinkles",
            Stage::Perspective => "perspective",
            Stage::ImagingNoise => "imaging_noise",
        }
    }

    pub fn from_name(name: &str) -> Option<Stage> {
        Stage::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Coarse reporting group used by the timing summary. Printed text and
    /// the noise stages are reported on their own rows only.
    pub fn timing_group(self) -> Option<&'static str> {
        match self {
            Stage::Render => Some("distortionless generation"),
            Stage::Handwriting => Some("handwriting"),
            Stage::Creases | Stage::Wrinkles => Some("wrinkles and creases"),
            Stage::Perspective => Some("perspective"),
            _ => None,
        }
    }

    pub fn enabled(self, cfg: &DistortionConfig) -> bool {
        match self {
            Stage::SignalNoise => cfg.signal_noise.kind != SignalNoiseKind::None,
            Stage::Render => true,
            Stage::PrintedText => cfg.lead_labels || !cfg.template.fields.is_empty(),
            Stage::Handwriting => cfg.handwriting.enabled && cfg.handwriting.count_range[1] > 0,
            Stage::Creases => cfg.creases.enabled,
            Stage::Wrinkles => cfg.wrinkles.enabled,
            Stage::Perspective => cfg.perspective.enabled,
            Stage::ImagingNoise => {
                let n = &cfg.imaging;
                n.gaussian_eta > 0.0 || n.poisson_lambda > 0.0 || n.sp_p > 0.0 || n.kelvin.is_some()
            }
        }
    }
}

/// Background outside the warped page.
pub const WARP_FILL: [u8; 3] = [110, 110, 110];

/// Config plus the assets it points to, loaded once per batch.
#[derive(Clone, Debug)]
pub struct Generator {
    cfg: DistortionConfig,
    lexicon: Vec<String>,
    corpus: String,
    seed_texture: Option<RasterImage>,
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

impl Generator {
    pub fn new(cfg: DistortionConfig) -> Result<Self> {
        cfg.validate()?;
        let h = &cfg.handwriting;
        let lexicon = match &h.lexicon_path {
            Some(p) => parse_lexicon(&read_text(p)?),
            None => parse_lexicon(DEFAULT_LEXICON),
        };
        if h.enabled && lexicon.is_empty() {
            return Err(Error::param("handwriting.lexicon_path", "lexicon has no phrases"));
        }
        let corpus = match &h.corpus_path {
            Some(p) => read_text(p)?,
            None => String::new(),
        };
        let seed_texture = match &cfg.wrinkles.seed_texture_path {
            Some(p) => Some(RasterImage::load(p)?),
            None => None,
        };
        if let Some(t) = &seed_texture {
            let b = cfg.wrinkles.block_px;
            if t.width() < b || t.height() < b {
                return Err(Error::param("wrinkles.seed_texture_path", "seed texture smaller than block_px"));
            }
        }
        Ok(Self {
            cfg,
            lexicon,
            corpus,
            seed_texture,
        })
    }

    pub fn config(&self) -> &DistortionConfig {
        &self.cfg
    }

    /// Window/resample a raw record as configured.
    pub fn prepare(&self, rec: &EcgRecord) -> Result<EcgRecord> {
        let i = &self.cfg.input;
        if i.start_s == 0.0 && i.duration_s.is_none() && i.resample_fs.is_none() {
            return Ok(rec.clone());
        }
        let dur = i.duration_s.unwrap_or(rec.duration_s() - i.start_s);
        segment_and_resample(rec, i.start_s, dur, i.resample_fs.unwrap_or(rec.fs()))
    }

    /// Run every enabled stage on one record.
    pub fn generate(&self, rec: &EcgRecord, record_index: u64) -> Result<(RasterImage, GroundTruthMeta)> {
        let cfg = &self.cfg;
        let seed = |s: Stage| derive_seed(cfg.master_seed, record_index, s.id());
        let tag = |s: Stage| move |e: Error| Error::Stage {
            stage: s.name(),
            source: Box::new(e),
        };
        let mut stages = Vec::new();
        let mut timed = |s: Stage, t: Instant| {
            stages.push(StageTiming {
                stage: s.name().to_string(),
                seconds: t.elapsed().as_secs_f64(),
            })
        };
        let spec = &cfg.paper;
        let mut warnings = Vec::new();

        let t = Instant::now();
        let rec = self.prepare(rec).map_err(tag(Stage::Render))?;
        let mut signal_noise = None;
        let rec = if Stage::SignalNoise.enabled(cfg) {
            let r = add_signal_noise(&rec, &cfg.signal_noise, seed(Stage::SignalNoise)).map_err(tag(Stage::SignalNoise))?;
            signal_noise = Some(cfg.signal_noise);
            timed(Stage::SignalNoise, t);
            r
        } else {
            rec
        };

        let t = Instant::now();
        let blank = render_blank_paper(spec).map_err(tag(Stage::Render))?;
        let (mut img, plot) =
            plot_record(blank, &rec, &cfg.layout, spec, cfg.calibration_pulse).map_err(tag(Stage::Render))?;
        warnings.extend(plot.clipped.iter().map(|l| format!("lead {l} runs off the page")));
        timed(Stage::Render, t);

        let mut artifacts = Vec::new();
        if Stage::PrintedText.enabled(cfg) {
            let t = Instant::now();
            let mut tpl = cfg.template.clone();
            if cfg.lead_labels {
                for l in &plot.leads {
                    let x = spec.to_mm(l.region.x0) + 1.0;
                    let y = (spec.to_mm(l.baseline_px) - 12.0).max(spec.to_mm(l.region.y0) + 0.5);
                    tpl.fields.push(TemplateField {
                        key: format!("label_{}_{}_{}", l.lead, l.row, l.col),
                        text: l.lead.clone(),
                        pos_mm: [x, y.max(0.0)],
                        font_size_mm: 3.0,
                    });
                }
            }
            let (out, overlay) = overlay_printed_text(img, &tpl, spec, &plot.leads).map_err(tag(Stage::PrintedText))?;
            img = out;
            artifacts.extend(overlay.boxes);
            warnings.extend(overlay.warnings);
            timed(Stage::PrintedText, t);
        }

        if Stage::Handwriting.enabled(cfg) {
            let t = Instant::now();
            let h = &cfg.handwriting;
            let mut rng = rng_from(seed(Stage::Handwriting));
            let count = rng.gen_range(h.count_range[0]..=h.count_range[1]);
            let picked = select_keywords(&self.corpus, &self.lexicon, count, rng.gen::<u64>())
                .map_err(tag(Stage::Handwriting))?;
            for word in &picked.keywords {
                let style = HandwritingStyle::preset(rng.gen_range(h.style_range[0]..=h.style_range[1]))
                    .map_err(tag(Stage::Handwriting))?;
                let size = rng.gen_range(h.size_px_range[0]..=h.size_px_range[1]);
                let (s1, s2) = (rng.gen::<u64>(), rng.gen::<u64>());
                let stencil = synthesize_handwriting(word, &style, size, s1).map_err(tag(Stage::Handwriting))?;
                if !stencil.substituted.is_empty() {
                    warnings.push(format!("handwriting {word:?}: squiggles for {:?}", stencil.substituted));
                }
                if stencil.width > img.width() || stencil.height > img.height() {
                    warnings.push(format!("handwriting {word:?} does not fit on the page; skipped"));
                    continue;
                }
                let (out, bx) =
                    overlay_handwriting(img, &stencil, None, h.ink_color, h.opacity, s2).map_err(tag(Stage::Handwriting))?;
                img = out;
                artifacts.push(bx);
            }
            timed(Stage::Handwriting, t);
        }

        let mut creases = None;
        if Stage::Creases.enabled(cfg) {
            let t = Instant::now();
            let c = &cfg.creases;
            let mut rng = rng_from(seed(Stage::Creases));
            let cs = CreaseSpec {
                n: rng.gen_range(c.count_range[0]..=c.count_range[1]),
                theta_deg: rng.gen_range(c.theta_range[0]..=c.theta_range[1]),
                intensity: c.intensity,
                sigma_px: c.sigma_px,
                line_width_px: c.line_width_px,
                lighten: c.lighten,
            };
            let (out, lines) = apply_creases(&img, &cs).map_err(tag(Stage::Creases))?;
            img = out;
            creases = Some(CreaseRecord { spec: cs, lines });
            timed(Stage::Creases, t);
        }

        let mut wrinkles = None;
        if Stage::Wrinkles.enabled(cfg) {
            let t = Instant::now();
            let w = &cfg.wrinkles;
            let s = seed(Stage::Wrinkles);
            let seed_texture = match &self.seed_texture {
                Some(t) => t.clone(),
                None => procedural_seed_texture(w.seed_size_px, substream(s, 1)),
            };
            let (qw, qh) = cfg.quilt_dims();
            let qs = QuiltSpec {
                block_px: w.block_px,
                overlap_px: w.overlap_px,
                out_w: qw,
                out_h: qh,
                candidates: w.candidates,
                seed_texture,
                rng_seed: substream(s, 2),
            };
            let mut tex = quilt_texture(&qs).map_err(tag(Stage::Wrinkles))?;
            if tex.dims() != img.dims() {
                tex = tex.resize_bilinear(img.width(), img.height());
            }
            img = blend_wrinkles(&img, &tex, w.alpha).map_err(tag(Stage::Wrinkles))?;
            wrinkles = Some(WrinkleRecord {
                block_px: w.block_px,
                overlap_px: w.overlap_px,
                candidates: w.candidates,
                alpha: w.alpha,
                texture_seed: s,
            });
            timed(Stage::Wrinkles, t);
        }

        let mut matrix = Matrix3::IDENTITY;
        let mut leads: Vec<LeadTruth> = plot
            .leads
            .iter()
            .map(|l| LeadTruth::from_plot(l, &rec))
            .collect();
        let mut pulses = plot.pulses.clone();
        if Stage::Perspective.enabled(cfg) {
            let t = Instant::now();
            let mut rng = rng_from(seed(Stage::Perspective));
            matrix = random_perspective(img.width(), img.height(), cfg.perspective.corner_jitter_frac, &mut rng)
                .map_err(tag(Stage::Perspective))?;
            img = warp_image(&img, &matrix, WARP_FILL).map_err(tag(Stage::Perspective))?;
            for l in &mut leads {
                l.points = transform_points(&l.points, &matrix).map_err(tag(Stage::Perspective))?;
            }
            for p in &mut pulses {
                *p = transform_points(p, &matrix).map_err(tag(Stage::Perspective))?;
            }
            timed(Stage::Perspective, t);
        }

        let mut imaging = None;
        if Stage::ImagingNoise.enabled(cfg) {
            let t = Instant::now();
            img = apply_noise(&img, &cfg.imaging, seed(Stage::ImagingNoise)).map_err(tag(Stage::ImagingNoise))?;
            imaging = Some(cfg.imaging.clone());
            timed(Stage::ImagingNoise, t);
        }

        let meta = GroundTruthMeta {
            schema_version: SCHEMA_VERSION,
            record_id: format!("record_{record_index:05}"),
            record_index,
            master_seed: cfg.master_seed,
            fs: rec.fs(),
            duration_s: rec.duration_s(),
            paper: spec.clone(),
            px_per_mm: spec.px_per_mm(),
            px_per_s: spec.px_per_s(),
            px_per_mv: spec.px_per_mv(),
            matrix,
            leads,
            pulses,
            artifacts,
            signal_noise,
            creases,
            wrinkles,
            imaging,
            stages,
            warnings,
        };
        Ok((img, meta))
    }
}

/// One record through the configured stages.
pub fn generate_one(rec: &EcgRecord, cfg: &DistortionConfig, record_index: u64) -> Result<(RasterImage, GroundTruthMeta)> {
    Generator::new(cfg.clone())?.generate(rec, record_index)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ecg_io::STANDARD_LEADS;

    fn record(seconds: f64) -> EcgRecord {
        let fs = 250.0;
        let n = (fs * seconds) as usize;
        let pairs = STANDARD_LEADS
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let f = 1.0 + k as f64 * 0.5;
                let v = (0..n)
                    .map(|i| 0.8 * (2.0 * std::f64::consts::PI * f * i as f64 / fs).sin())
                    .collect();
                (*name, v)
            })
            .collect();
        EcgRecord::from_pairs(pairs, fs).unwrap()
    }

    #[test]
    fn stage_ids_follow_order() {
        for (i, s) in Stage::ALL.iter().enumerate() {
            assert_eq!(s.id(), i as u64);
            assert_eq!(Stage::from_name(s.name()), Some(*s));
        }
    }

    #[test]
    fn all_disabled_is_plain_plot() {
        let cfg = DistortionConfig::distortionless();
        let rec = record(10.0);
        let (img, meta) = generate_one(&rec, &cfg, 3).unwrap();
        let (plain, plot) =
            plot_record(render_blank_paper(&cfg.paper).unwrap(), &rec, &cfg.layout, &cfg.paper, true).unwrap();
        assert!(img == plain);
        assert_eq!(meta.matrix, Matrix3::IDENTITY);
        assert_eq!(meta.stages.len(), 1);
        assert_eq!(meta.stages[0].stage, "render");
        for (a, b) in meta.leads.iter().zip(&plot.leads) {
            assert_eq!(a.points, b.points);
        }
    }

    #[test]
    fn stored_polylines_follow_the_matrix() {
        let mut cfg = DistortionConfig::distortionless();
        cfg.perspective.enabled = true;
        cfg.master_seed = 11;
        let rec = record(10.0);
        let (_, warped) = generate_one(&rec, &cfg, 0).unwrap();
        let (_, flat) = generate_one(&rec, &DistortionConfig::distortionless(), 0).unwrap();
        assert_ne!(warped.matrix, Matrix3::IDENTITY);
        for (w, f) in warped.leads.iter().zip(&flat.leads) {
            let mapped = transform_points(&f.points, &warped.matrix).unwrap();
            for (a, b) in mapped.iter().zip(&w.points) {
                assert!((a[0] - b[0]).abs() < 1e-9 && (a[1] - b[1]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn every_enabled_stage_is_recorded() {
        let mut cfg = DistortionConfig {
            master_seed: 5,
            ..DistortionConfig::default()
        };
        cfg.signal_noise.kind = SignalNoiseKind::Awgn;
        cfg.wrinkles.downscale = 4;
        let (_, meta) = generate_one(&record(10.0), &cfg, 1).unwrap();
        let names: Vec<_> = meta.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(
            names,
            ["signal_noise", "render", "printed_text", "handwriting", "creases", "wrinkles", "perspective", "imaging_noise"]
        );
        assert!(meta.artifacts.iter().any(|b| b.kind == crate::text::ArtifactKind::Handwritten));
        assert!(meta.artifacts.iter().any(|b| b.kind == crate::text::ArtifactKind::Printed));
        assert!(meta.creases.is_some() && meta.wrinkles.is_some() && meta.imaging.is_some());
        assert!(meta.signal_noise.is_some());
    }

    #[test]
    fn disabling_a_stage_keeps_other_seeds() {
        // perspective alone vs. perspective with creases: same matrix
        let mut a = DistortionConfig::distortionless();
        a.perspective.enabled = true;
        let mut b = a.clone();
        b.creases.enabled = true;
        let rec = record(10.0);
        let (_, ma) = generate_one(&rec, &a, 2).unwrap();
        let (_, mb) = generate_one(&rec, &b, 2).unwrap();
        assert_eq!(ma.matrix, mb.matrix);
    }

    #[test]
    fn stage_errors_are_tagged() {
        let mut cfg = DistortionConfig::distortionless();
        cfg.input.duration_s = Some(20.0);
        let err = generate_one(&record(10.0), &cfg, 0).unwrap_err();
        assert!(matches!(err, Error::Stage { stage: "render", .. }), "{err}");
    }
}
