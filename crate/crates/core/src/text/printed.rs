use serde::{Deserialize, Serialize};

use super::{ArtifactBox, ArtifactKind};
use crate::error::{Error, Result};
use crate::grid::{LeadPolyline, PaperSpec};
use crate::raster::{Coverage, PixelRect, RasterImage, Rgb};

/// Bundled 8x8 bitmap faces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FontFace {
    #[default]
    Mono,
    /// Mono with every stroke widened by one scaled pixel.
    MonoBold,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateField {
    pub key: String,
    pub text: String,
    /// Top-left corner of the text box.
    pub pos_mm: [f64; 2],
    /// Glyph cell height.
    pub font_size_mm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PrintedTemplate {
    pub fields: Vec<TemplateField>,
    pub allow_overlap: bool,
    pub font: FontFace,
    pub color: Rgb,
}

impl Default for PrintedTemplate {
    fn default() -> Self {
        Self {
            fields: Vec::new(),
            allow_overlap: false,
            font: FontFace::Mono,
            color: [0, 0, 0],
        }
    }
}

impl PrintedTemplate {
    pub fn validate(&self, spec: &PaperSpec, prefix: &str) -> Result<()> {
        for (i, f) in self.fields.iter().enumerate() {
            if !(f.font_size_mm.is_finite() && f.font_size_mm > 0.0) {
                return Err(Error::param(
                    format!("{prefix}fields[{i}].font_size_mm"),
                    "must be > 0",
                ));
            }
            let [x, y] = f.pos_mm;
            if !(x >= 0.0 && y >= 0.0 && x < spec.width_mm() && y < spec.height_mm()) {
                return Err(Error::param(
                    format!("{prefix}fields[{i}].pos_mm"),
                    "must lie on the page",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrintedOverlay {
    pub boxes: Vec<ArtifactBox>,
    /// Fields moved or dropped to avoid traces.
    pub warnings: Vec<String>,
}

const STEP_MM: f64 = 2.0;
const MAX_STEPS: usize = 50;
const DIRECTIONS: [(f64, f64); 8] = [
    (1.0, 0.0),
    (1.0, -1.0),
    (0.0, -1.0),
    (-1.0, -1.0),
    (-1.0, 0.0),
    (-1.0, 1.0),
    (0.0, 1.0),
    (1.0, 1.0),
];

fn glyph_scale(spec: &PaperSpec, size_mm: f64) -> u32 {
    ((spec.to_pixels(size_mm) / 8.0).round() as u32).max(1)
}

fn text_cells(text: &str) -> usize {
    text.chars().count()
}

fn ink_text(text: &str, scale: u32, face: FontFace) -> Coverage {
    let cell = 8 * scale;
    let mut cov = Coverage::new(cell * text_cells(text).max(1) as u32, cell);
    let bold = match face {
        FontFace::Mono => 0,
        FontFace::MonoBold => scale as i64,
    };
    for (i, ch) in text.chars().enumerate() {
        let idx = ch as usize;
        let glyph = if idx < 128 {
            font8x8::legacy::BASIC_LEGACY[idx]
        } else {
            font8x8::legacy::BASIC_LEGACY[b'?' as usize]
        };
        let ox = (i as u32 * cell) as i64;
        for (gy, bits) in glyph.iter().enumerate() {
            for gx in 0..8 {
                if bits >> gx & 1 == 0 {
                    continue;
                }
                for sy in 0..scale as i64 {
                    for sx in 0..scale as i64 + bold {
                        cov.stamp(
                            ox + gx as i64 * scale as i64 + sx,
                            gy as i64 * scale as i64 + sy,
                            1.0,
                        );
                    }
                }
            }
        }
    }
    cov
}

/// Render template fields by glyph blitting. With `allow_overlap = false`,
/// a field whose box meets a lead's polyline box is moved along a spiral
/// (eight directions, 2 mm steps, at most 50 candidates) inside its cell,
/// or dropped with a warning.
pub fn overlay_printed_text(
    mut img: RasterImage,
    tpl: &PrintedTemplate,
    spec: &PaperSpec,
    leads: &[LeadPolyline],
) -> Result<(RasterImage, PrintedOverlay)> {
    tpl.validate(spec, "template.")?;
    let page = PixelRect {
        x0: 0.0,
        y0: 0.0,
        x1: img.width() as f64,
        y1: img.height() as f64,
    };
    let pad = spec.trace_width_px as f64 / 2.0;
    let obstacles: Vec<PixelRect> = leads.iter().filter_map(|l| l.bbox(pad)).collect();
    let mut overlay = PrintedOverlay::default();
    for field in &tpl.fields {
        if field.text.trim().is_empty() {
            overlay
                .warnings
                .push(format!("field {} has no printable text; skipped", field.key));
            continue;
        }
        let scale = glyph_scale(spec, field.font_size_mm);
        let ink = ink_text(&field.text, scale, tpl.font);
        let (bw, bh) = (ink.width as f64, ink.height as f64);
        let x0 = spec.to_pixels(field.pos_mm[0]).round();
        let y0 = spec.to_pixels(field.pos_mm[1]).round();
        let at = |x: f64, y: f64| PixelRect {
            x0: x,
            y0: y,
            x1: x + bw,
            y1: y + bh,
        };
        let mut placed = at(x0, y0);
        if !tpl.allow_overlap {
            let cell = leads
                .iter()
                .map(|l| l.region)
                .find(|r| x0 >= r.x0 && x0 < r.x1 && y0 >= r.y0 && y0 < r.y1)
                .unwrap_or(page);
            let free = |r: &PixelRect| {
                page.contains_rect(r)
                    && cell.contains_rect(r)
                    && !obstacles.iter().any(|o| o.intersects(r))
            };
            if !obstacles.iter().any(|o| o.intersects(&placed)) {
                // Original position is fine even if the box pokes out of its cell.
            } else {
                let step = spec.to_pixels(STEP_MM);
                let found = (1..)
                    .flat_map(|ring| DIRECTIONS.iter().map(move |d| (ring, d)))
                    .take(MAX_STEPS)
                    .map(|(ring, (dx, dy))| {
                        let k = ring as f64 * step;
                        at((x0 + dx * k).round(), (y0 + dy * k).round())
                    })
                    .find(|r| free(r));
                match found {
                    Some(r) => {
                        overlay.warnings.push(format!(
                            "field {} moved by ({:.0}, {:.0}) px to avoid traces",
                            field.key,
                            r.x0 - x0,
                            r.y0 - y0
                        ));
                        placed = r;
                    }
                    None => {
                        overlay.warnings.push(format!(
                            "field {} dropped: no trace-free position within its cell",
                            field.key
                        ));
                        continue;
                    }
                }
            }
        }
        let clipped = PixelRect {
            x0: placed.x0.max(0.0),
            y0: placed.y0.max(0.0),
            x1: placed.x1.min(page.x1),
            y1: placed.y1.min(page.y1),
        };
        let visible_ink = (0..ink.height).any(|y| {
            (0..ink.width).any(|x| {
                let (px, py) = (placed.x0 + x as f64, placed.y0 + y as f64);
                ink.get(x, y) > 0.0 && px >= 0.0 && py >= 0.0 && px < page.x1 && py < page.y1
            })
        });
        if !visible_ink {
            overlay
                .warnings
                .push(format!("field {} is off the page; skipped", field.key));
            continue;
        }
        ink.composite(&mut img, placed.x0 as i64, placed.y0 as i64, tpl.color, 1.0);
        overlay.boxes.push(ArtifactBox {
            kind: ArtifactKind::Printed,
            bbox_px: clipped,
            text: field.text.clone(),
        });
    }
    Ok((img, overlay))
}
