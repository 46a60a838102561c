//! Procedural handwriting: stroke skeletons perturbed per style, smoothed
//! with quadratic B-spline arcs, and stroked into an alpha stencil.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::strokes::{glyph, squiggle};
use super::{ArtifactBox, ArtifactKind};
use crate::error::{Error, Result};
use crate::grid::draw_segment_aa;
use crate::raster::{Coverage, PixelRect, RasterImage, Rgb};
use crate::rng::rng_from;

/// Gap between glyphs as a fraction of the ascender height.
const LETTER_GAP: f64 = 0.15;
const ASCENT: f64 = 1.1;
const DESCENT: f64 = 0.4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HandwritingStyle {
    pub style_id: u8,
    pub slant_deg: f64,
    pub jitter_px: f64,
    pub stroke_width_px: u32,
    pub baseline_wobble_px: f64,
    pub letter_spacing_scale: f64,
}

const PRESETS: [(f64, f64, u32, f64, f64); 7] = [
    // slant, jitter, width, wobble, spacing
    (0.0, 0.4, 2, 1.0, 1.0),
    (12.0, 0.6, 2, 1.5, 0.95),
    (-8.0, 0.5, 3, 0.8, 1.1),
    (20.0, 0.8, 2, 2.5, 0.9),
    (5.0, 1.2, 1, 1.2, 1.25),
    (-15.0, 0.3, 3, 2.0, 1.0),
    (28.0, 1.0, 4, 3.0, 1.3),
];

impl HandwritingStyle {
    /// One of the seven built-in styles (`1..=7`).
    pub fn preset(style_id: u8) -> Result<Self> {
        let (slant, jitter, width, wobble, spacing) = *PRESETS
            .get((style_id as usize).wrapping_sub(1))
            .ok_or_else(|| Error::param("handwriting.style_id", "must be in 1..=7"))?;
        Ok(Self {
            style_id,
            slant_deg: slant,
            jitter_px: jitter,
            stroke_width_px: width,
            baseline_wobble_px: wobble,
            letter_spacing_scale: spacing,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=7).contains(&self.style_id) {
            return Err(Error::param("style_id", "must be in 1..=7"));
        }
        if !(self.jitter_px >= 0.0 && self.baseline_wobble_px >= 0.0) {
            return Err(Error::param("jitter_px", "jitter and wobble must be >= 0"));
        }
        if self.stroke_width_px < 1 {
            return Err(Error::param("stroke_width_px", "must be >= 1"));
        }
        if !(self.slant_deg.abs() < 60.0 && self.letter_spacing_scale > 0.0) {
            return Err(Error::param("slant_deg", "slant must be within ±60° and spacing > 0"));
        }
        Ok(())
    }
}

/// Grayscale alpha mask of synthesized text.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stencil {
    pub width: u32,
    pub height: u32,
    pub alpha: Vec<u8>,
    /// Horizontal advance of each character, in pixels.
    pub advances: Vec<u32>,
    /// Characters without a stroke template, drawn as a squiggle.
    pub substituted: Vec<char>,
    pub text: String,
}

impl Stencil {
    pub fn ink_pixels(&self) -> usize {
        self.alpha.iter().filter(|&&a| a > 0).count()
    }
}

struct Laid {
    /// Strokes in pixels: x to the right from the pen origin, y up from the baseline.
    strokes: Vec<Vec<[f64; 2]>>,
    advances: Vec<f64>,
    substituted: Vec<char>,
}

fn check_input(text: &str, size_px: f64) -> Result<()> {
    if text.is_empty() {
        return Err(Error::Value("handwriting text is empty".into()));
    }
    if !(size_px.is_finite() && size_px >= 8.0) {
        return Err(Error::param("size_px", "must be >= 8"));
    }
    Ok(())
}

fn lay_out(text: &str, size_px: f64, spacing: f64) -> Laid {
    let mut laid = Laid {
        strokes: Vec::new(),
        advances: Vec::new(),
        substituted: Vec::new(),
    };
    let mut pen = 0.0;
    for c in text.chars() {
        let g = glyph(c).unwrap_or_else(|| {
            laid.substituted.push(c);
            squiggle()
        });
        for s in &g.strokes {
            laid.strokes.push(
                s.iter()
                    .map(|p| [pen + p[0] * size_px, p[1] * size_px])
                    .collect(),
            );
        }
        let adv = (g.width + LETTER_GAP) * size_px * spacing;
        laid.advances.push(adv);
        pen += adv;
    }
    laid
}

struct Canvas {
    width: u32,
    height: u32,
    origin_x: f64,
    baseline_y: f64,
}

fn canvas(laid: &Laid, size_px: f64, style: &HandwritingStyle) -> Canvas {
    let pad = style.stroke_width_px as f64 + 3.0 * style.jitter_px + style.baseline_wobble_px + 2.0;
    let slant = style.slant_deg.to_radians().tan().abs() * size_px * ASCENT;
    let total: f64 = laid.advances.iter().sum();
    Canvas {
        width: (total + 2.0 * slant + 2.0 * pad).ceil() as u32,
        height: ((ASCENT + DESCENT) * size_px + 2.0 * pad).ceil() as u32,
        origin_x: pad + slant,
        baseline_y: pad + ASCENT * size_px,
    }
}

/// Quadratic B-spline through the midpoints of consecutive edges, keeping
/// the first and last vertex.
fn smooth(stroke: &[[f64; 2]]) -> Vec<[f64; 2]> {
    if stroke.len() < 3 {
        return stroke.to_vec();
    }
    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
    let mut out = vec![stroke[0]];
    for i in 1..stroke.len() - 1 {
        let p0 = if i == 1 { stroke[0] } else { mid(stroke[i - 1], stroke[i]) };
        let c = stroke[i];
        let p1 = if i == stroke.len() - 2 {
            stroke[i + 1]
        } else {
            mid(stroke[i], stroke[i + 1])
        };
        let len = ((c[0] - p0[0]).hypot(c[1] - p0[1]) + (p1[0] - c[0]).hypot(p1[1] - c[1])).max(1.0);
        let steps = (len / 2.0).ceil().max(2.0) as usize;
        for k in 1..=steps {
            let t = k as f64 / steps as f64;
            let u = 1.0 - t;
            out.push([
                u * u * p0[0] + 2.0 * u * t * c[0] + t * t * p1[0],
                u * u * p0[1] + 2.0 * u * t * c[1] + t * t * p1[1],
            ]);
        }
    }
    out
}

fn rasterize(
    strokes: &[Vec<[f64; 2]>],
    cv: &Canvas,
    stroke_width: u32,
    laid: &Laid,
    text: &str,
) -> Stencil {
    let mut cov = Coverage::new(cv.width, cv.height);
    for s in strokes {
        let placed: Vec<[f64; 2]> = s
            .iter()
            .map(|p| [cv.origin_x + p[0], cv.baseline_y - p[1]])
            .collect();
        let curve = smooth(&placed);
        if curve.len() == 1 {
            draw_segment_aa(&mut cov, curve[0], curve[0], stroke_width as f64, 1.0);
        }
        for pair in curve.windows(2) {
            draw_segment_aa(&mut cov, pair[0], pair[1], stroke_width as f64, 1.0);
        }
    }
    Stencil {
        width: cv.width,
        height: cv.height,
        alpha: cov
            .data
            .iter()
            .map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect(),
        advances: laid.advances.iter().map(|a| a.round() as u32).collect(),
        substituted: laid.substituted.clone(),
        text: text.to_string(),
    }
}

/// Unperturbed rendering of the stroke templates.
pub fn render_template(text: &str, size_px: f64, stroke_width_px: u32, spacing: f64) -> Result<Stencil> {
    check_input(text, size_px)?;
    let laid = lay_out(text, size_px, spacing);
    let flat = HandwritingStyle {
        style_id: 1,
        slant_deg: 0.0,
        jitter_px: 0.0,
        stroke_width_px,
        baseline_wobble_px: 0.0,
        letter_spacing_scale: spacing,
    };
    let cv = canvas(&laid, size_px, &flat);
    Ok(rasterize(&laid.strokes, &cv, stroke_width_px, &laid, text))
}

/// Render `text` in a handwriting style: per-vertex Gaussian jitter, shear by
/// the slant angle, and a sinusoidal baseline wobble, then smoothing and
/// stroking. Deterministic in `seed`.
pub fn synthesize_handwriting(text: &str, style: &HandwritingStyle, size_px: f64, seed: u64) -> Result<Stencil> {
    check_input(text, size_px)?;
    style.validate()?;
    let laid = lay_out(text, size_px, style.letter_spacing_scale);
    let cv = canvas(&laid, size_px, style);
    let mut rng = rng_from(seed);
    let jitter = (style.jitter_px > 0.0)
        .then(|| Normal::new(0.0, style.jitter_px).expect("jitter is finite and positive"));
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let shear = style.slant_deg.to_radians().tan();
    let period = 3.0 * size_px;
    let strokes: Vec<Vec<[f64; 2]>> = laid
        .strokes
        .iter()
        .map(|s| {
            s.iter()
                .map(|&[mut x, mut y]| {
                    if let Some(n) = &jitter {
                        x += n.sample(&mut rng);
                        y += n.sample(&mut rng);
                    }
                    x += y * shear;
                    if style.baseline_wobble_px > 0.0 {
                        y += style.baseline_wobble_px
                            * (std::f64::consts::TAU * x / period + phase).sin();
                    }
                    [x, y]
                })
                .collect()
        })
        .collect();
    Ok(rasterize(&strokes, &cv, style.stroke_width_px, &laid, text))
}

/// Alpha-composite `ink` through the stencil. Without `pos`, the top-left
/// corner is drawn uniformly among positions that keep the stencil on-page.
pub fn overlay_handwriting(
    mut img: RasterImage,
    stencil: &Stencil,
    pos: Option<[u32; 2]>,
    ink: Rgb,
    opacity: f32,
    seed: u64,
) -> Result<(RasterImage, ArtifactBox)> {
    let (w, h) = img.dims();
    if stencil.width > w || stencil.height > h {
        return Err(Error::Size(format!(
            "stencil {}x{} larger than page {w}x{h}",
            stencil.width, stencil.height
        )));
    }
    let [x0, y0] = match pos {
        Some(p) => {
            if p[0] + stencil.width > w || p[1] + stencil.height > h {
                return Err(Error::Size(format!(
                    "stencil at {p:?} does not fit on the {w}x{h} page"
                )));
            }
            p
        }
        None => {
            let mut rng = rng_from(seed);
            [
                rng.gen_range(0..=w - stencil.width),
                rng.gen_range(0..=h - stencil.height),
            ]
        }
    };
    let cov = Coverage {
        width: stencil.width,
        height: stencil.height,
        data: stencil.alpha.iter().map(|&a| a as f32 / 255.0).collect(),
    };
    cov.composite(&mut img, x0 as i64, y0 as i64, ink, opacity);
    let bbox = PixelRect {
        x0: x0 as f64,
        y0: y0 as f64,
        x1: (x0 + stencil.width) as f64,
        y1: (y0 + stencil.height) as f64,
    };
    Ok((
        img,
        ArtifactBox {
            kind: ArtifactKind::Handwritten,
            bbox_px: bbox,
            text: stencil.text.clone(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let s = HandwritingStyle::preset(4).unwrap();
        let a = synthesize_handwriting("st elevation", &s, 40.0, 17).unwrap();
        let b = synthesize_handwriting("st elevation", &s, 40.0, 17).unwrap();
        assert_eq!(a, b);
        let c = synthesize_handwriting("st elevation", &s, 40.0, 18).unwrap();
        assert_ne!(a.alpha, c.alpha);
    }

    #[test]
    fn zero_perturbation_equals_template() {
        let style = HandwritingStyle {
            style_id: 3,
            slant_deg: 0.0,
            jitter_px: 0.0,
            stroke_width_px: 3,
            baseline_wobble_px: 0.0,
            letter_spacing_scale: 1.1,
        };
        let a = synthesize_handwriting("Sinus rhythm 72", &style, 32.0, 99).unwrap();
        let b = render_template("Sinus rhythm 72", 32.0, 3, 1.1).unwrap();
        assert_eq!(a, b);
        assert!(a.ink_pixels() > 100);
    }

    #[test]
    fn width_grows_with_text() {
        for id in 1..=7 {
            let s = HandwritingStyle::preset(id).unwrap();
            let a = synthesize_handwriting("a", &s, 30.0, 1).unwrap();
            let ab = synthesize_handwriting("ab", &s, 30.0, 1).unwrap();
            assert!(ab.width > a.width);
            assert_eq!(ab.advances.len(), 2);
        }
    }

    #[test]
    fn styles_are_distinguishable() {
        let stencils: Vec<Stencil> = (1..=7)
            .map(|id| {
                synthesize_handwriting("atrial fibrillation", &HandwritingStyle::preset(id).unwrap(), 36.0, 5)
                    .unwrap()
            })
            .collect();
        for i in 0..7 {
            for j in i + 1..7 {
                let (a, b) = (&stencils[i], &stencils[j]);
                let (w, h) = (a.width.max(b.width), a.height.max(b.height));
                let at = |s: &Stencil, x: u32, y: u32| {
                    if x < s.width && y < s.height {
                        s.alpha[(y * s.width + x) as usize]
                    } else {
                        0
                    }
                };
                let mut diff = 0usize;
                for y in 0..h {
                    for x in 0..w {
                        if (at(a, x, y) > 0) != (at(b, x, y) > 0) {
                            diff += 1;
                        }
                    }
                }
                assert!(
                    diff as f64 >= 0.01 * (w * h) as f64,
                    "styles {} and {} differ in only {diff} px",
                    i + 1,
                    j + 1
                );
            }
        }
    }

    #[test]
    fn unsupported_chars_become_squiggles() {
        let s = HandwritingStyle::preset(1).unwrap();
        let st = synthesize_handwriting("a@b", &s, 20.0, 0).unwrap();
        assert_eq!(st.substituted, vec!['@']);
        assert!(st.ink_pixels() > 0);
    }

    #[test]
    fn rejects_bad_input() {
        let s = HandwritingStyle::preset(1).unwrap();
        assert!(synthesize_handwriting("", &s, 20.0, 0).is_err());
        assert!(synthesize_handwriting("x", &s, 4.0, 0).is_err());
        assert!(HandwritingStyle::preset(0).is_err());
        assert!(HandwritingStyle::preset(8).is_err());
    }

    #[test]
    fn transparent_stencil_is_identity() {
        let img = RasterImage::new(50, 40, [200, 190, 180]);
        let st = Stencil {
            width: 10,
            height: 10,
            alpha: vec![0; 100],
            advances: vec![10],
            substituted: vec![],
            text: " ".into(),
        };
        let (out, _) = overlay_handwriting(img.clone(), &st, None, [0, 0, 80], 0.9, 3).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn placement_contract() {
        let img = RasterImage::new(400, 200, [255, 255, 255]);
        let st = synthesize_handwriting("lvh", &HandwritingStyle::preset(2).unwrap(), 24.0, 1).unwrap();
        let (_, b) = overlay_handwriting(img.clone(), &st, Some([30, 40]), [0, 0, 80], 0.9, 0).unwrap();
        assert_eq!((b.bbox_px.x0, b.bbox_px.y0), (30.0, 40.0));
        let (o1, b1) = overlay_handwriting(img.clone(), &st, None, [0, 0, 80], 0.9, 77).unwrap();
        let (o2, b2) = overlay_handwriting(img.clone(), &st, None, [0, 0, 80], 0.9, 77).unwrap();
        assert_eq!(b1, b2);
        assert_eq!(o1, o2);
        assert!(b1.bbox_px.x1 <= 400.0 && b1.bbox_px.y1 <= 200.0);
    }

    #[test]
    fn oversized_stencil_is_size_error() {
        let img = RasterImage::new(20, 20, [255, 255, 255]);
        let st = synthesize_handwriting("long text", &HandwritingStyle::preset(1).unwrap(), 20.0, 1).unwrap();
        assert!(matches!(
            overlay_handwriting(img, &st, None, [0, 0, 0], 1.0, 0),
            Err(Error::Size(_))
        ));
    }
}
