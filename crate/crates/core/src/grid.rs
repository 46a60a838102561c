//! ECG paper grid and lead trace rendering at physical scale.

use serde::{Deserialize, Serialize};

use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::raster::{Coverage, PixelRect, RasterImage, Rgb};

/// Physical-to-pixel mapping and paper appearance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PaperSpec {
    pub dpi: f64,
    pub width_px: u32,
    pub height_px: u32,
    pub mm_per_s: f64,
    pub mm_per_mv: f64,
    pub fine_grid_mm: f64,
    pub coarse_grid_mm: f64,
    pub bg_color: Rgb,
    pub fine_color: Rgb,
    pub coarse_color: Rgb,
    pub trace_color: Rgb,
    pub trace_width_px: u32,
    pub antialias: bool,
}

impl Default for PaperSpec {
    fn default() -> Self {
        Self {
            dpi: 200.0,
            width_px: 2200,
            height_px: 1700,
            mm_per_s: 25.0,
            mm_per_mv: 10.0,
            fine_grid_mm: 1.0,
            coarse_grid_mm: 5.0,
            bg_color: [255, 250, 246],
            fine_color: [246, 196, 186],
            coarse_color: [226, 104, 88],
            trace_color: [0, 0, 0],
            trace_width_px: 2,
            antialias: false,
        }
    }
}

impl PaperSpec {
    pub fn px_per_mm(&self) -> f64 {
        self.dpi / 25.4
    }

    pub fn to_pixels(&self, mm: f64) -> f64 {
        mm * self.dpi / 25.4
    }

    pub fn to_mm(&self, px: f64) -> f64 {
        px * 25.4 / self.dpi
    }

    pub fn width_mm(&self) -> f64 {
        self.to_mm(self.width_px as f64)
    }

    pub fn height_mm(&self) -> f64 {
        self.to_mm(self.height_px as f64)
    }

    /// Pixels per millivolt on the vertical axis.
    pub fn px_per_mv(&self) -> f64 {
        self.to_pixels(self.mm_per_mv)
    }

    /// Pixels per second on the horizontal axis.
    pub fn px_per_s(&self) -> f64 {
        self.to_pixels(self.mm_per_s)
    }

    fn scaled_width(&self, at_200dpi: f64) -> u32 {
        ((at_200dpi * self.dpi / 200.0).round() as u32).max(1)
    }

    pub fn fine_line_px(&self) -> u32 {
        self.scaled_width(1.0)
    }

    pub fn coarse_line_px(&self) -> u32 {
        self.scaled_width(2.0)
    }

    pub fn validate(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| format!("{prefix}{name}");
        if !(self.dpi.is_finite() && self.dpi > 0.0) {
            return Err(Error::param(f("dpi"), "must be > 0"));
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::param(f("width_px"), "page dimensions must be > 0"));
        }
        if !(self.mm_per_s > 0.0 && self.mm_per_mv > 0.0) {
            return Err(Error::param(f("mm_per_s"), "scale constants must be > 0"));
        }
        if !(self.fine_grid_mm > 0.0 && self.fine_grid_mm < self.coarse_grid_mm) {
            return Err(Error::param(
                f("fine_grid_mm"),
                "need 0 < fine_grid_mm < coarse_grid_mm",
            ));
        }
        let ratio = self.coarse_grid_mm / self.fine_grid_mm;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::param(
                f("coarse_grid_mm"),
                "must be an integer multiple of fine_grid_mm",
            ));
        }
        if self.trace_width_px == 0 {
            return Err(Error::param(f("trace_width_px"), "must be >= 1"));
        }
        Ok(())
    }
}

pub fn to_pixels(spec: &PaperSpec, mm: f64) -> f64 {
    spec.to_pixels(mm)
}

/// Pixel positions `round(to_pixels(k * pitch))` that fall on a page of
/// `extent_px` pixels.
pub fn grid_positions(spec: &PaperSpec, pitch_mm: f64, extent_px: u32) -> Vec<u32> {
    (0..)
        .map(|k| spec.to_pixels(k as f64 * pitch_mm).round())
        .take_while(|&p| p < extent_px as f64)
        .map(|p| p as u32)
        .collect()
}

pub fn render_blank_paper(spec: &PaperSpec) -> Result<RasterImage> {
    spec.validate("paper.")?;
    let cell = spec.to_pixels(spec.coarse_grid_mm);
    if (spec.width_px as f64) < cell || (spec.height_px as f64) < cell {
        return Err(Error::Size(format!(
            "page {}x{} px is smaller than one {:.2} px coarse cell",
            spec.width_px, spec.height_px, cell
        )));
    }
    let (w, h) = (spec.width_px, spec.height_px);
    let mut img = RasterImage::new(w, h, spec.bg_color);
    for (pitch, lw, color) in [
        (spec.fine_grid_mm, spec.fine_line_px(), spec.fine_color),
        (spec.coarse_grid_mm, spec.coarse_line_px(), spec.coarse_color),
    ] {
        for x in grid_positions(spec, pitch, w) {
            img.fill_rect(x, 0, x + lw, h, color);
        }
        for y in grid_positions(spec, pitch, h) {
            img.fill_rect(0, y, w, y + lw, color);
        }
    }
    Ok(img)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PulsePlacement {
    #[default]
    RowStart,
    RowEnd,
}

/// Grid of lead segments plus an optional full-length rhythm strip.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LeadLayout {
    pub rows: usize,
    pub cols: usize,
    /// Row-major lead names; column `c` shows record time
    /// `[c, c + 1) * duration / cols`.
    pub order: Vec<String>,
    pub rhythm_lead: Option<String>,
    /// One baseline per row, plus one for the rhythm strip if present.
    pub row_baselines_mm: Vec<f64>,
    /// left, right, top, bottom
    pub margins_mm: [f64; 4],
    pub pulse: PulsePlacement,
}

impl Default for LeadLayout {
    fn default() -> Self {
        let order = ["I", "aVR", "V1", "V4", "II", "aVL", "V2", "V5", "III", "aVF", "V3", "V6"];
        Self {
            rows: 3,
            cols: 4,
            order: order.iter().map(|s| s.to_string()).collect(),
            rhythm_lead: Some("II".into()),
            row_baselines_mm: vec![50.0, 95.0, 140.0, 185.0],
            margins_mm: [20.0, 9.4, 25.0, 8.0],
            pulse: PulsePlacement::RowStart,
        }
    }
}

const PULSE_LEAD_MM: f64 = 2.0;
const PULSE_GAP_MM: f64 = 1.0;

impl LeadLayout {
    /// Single lead, single row; handy for tests and small pages.
    pub fn single(lead: &str, baseline_mm: f64, margins_mm: [f64; 4]) -> Self {
        Self {
            rows: 1,
            cols: 1,
            order: vec![lead.to_string()],
            rhythm_lead: None,
            row_baselines_mm: vec![baseline_mm],
            margins_mm,
            pulse: PulsePlacement::RowStart,
        }
    }

    pub fn total_rows(&self) -> usize {
        self.rows + usize::from(self.rhythm_lead.is_some())
    }

    pub fn validate(&self, spec: &PaperSpec, prefix: &str) -> Result<()> {
        let f = |name: &str| format!("{prefix}{name}");
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::param(f("rows"), "rows and cols must be >= 1"));
        }
        if self.rows * self.cols < self.order.len() {
            return Err(Error::param(
                f("order"),
                format!(
                    "{} leads do not fit {}x{}",
                    self.order.len(),
                    self.rows,
                    self.cols
                ),
            ));
        }
        if self.row_baselines_mm.len() != self.total_rows() {
            return Err(Error::param(
                f("row_baselines_mm"),
                format!("expected {} baselines", self.total_rows()),
            ));
        }
        let [_, _, top, bottom] = self.margins_mm;
        if self.margins_mm.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::param(f("margins_mm"), "margins must be >= 0"));
        }
        let limit = spec.height_mm() - bottom;
        let mut prev = top;
        for (i, &b) in self.row_baselines_mm.iter().enumerate() {
            let ok = if i == 0 { b >= prev } else { b > prev };
            if !ok || b > limit {
                return Err(Error::param(
                    f("row_baselines_mm"),
                    "baselines must be strictly increasing and inside the margins",
                ));
            }
            prev = b;
        }
        Ok(())
    }

    fn check_record(&self, rec: &EcgRecord) -> Result<()> {
        for name in self.order.iter().chain(self.rhythm_lead.iter()) {
            if rec.lead(name).is_none() {
                return Err(Error::Value(format!("layout lead {name} not in record")));
            }
        }
        Ok(())
    }
}

/// Ground-truth trace geometry of one rendered lead.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadPolyline {
    pub lead: String,
    pub row: usize,
    pub col: usize,
    pub rhythm: bool,
    /// Record time of the first vertex.
    pub t_start_s: f64,
    pub duration_s: f64,
    pub fs: f64,
    /// Index of the first plotted sample in the record.
    pub first_sample: usize,
    pub baseline_px: f64,
    pub x_start_px: f64,
    /// Cell the lead is drawn in, before any geometric transform.
    pub region: PixelRect,
    pub points: Vec<[f64; 2]>,
}

impl LeadPolyline {
    pub fn bbox(&self, pad: f64) -> Option<PixelRect> {
        PixelRect::bounding(&self.points, pad)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotOutput {
    pub leads: Vec<LeadPolyline>,
    pub pulses: Vec<Vec<[f64; 2]>>,
    /// Leads with at least one vertex off the page.
    pub clipped: Vec<String>,
}

fn off_page(p: &[f64; 2], w: u32, h: u32) -> bool {
    p[0] < 0.0 || p[1] < 0.0 || p[0] > (w - 1) as f64 || p[1] > (h - 1) as f64
}

/// Plot every layout lead (and the rhythm strip) onto `img`.
pub fn plot_record(
    mut img: RasterImage,
    rec: &EcgRecord,
    layout: &LeadLayout,
    spec: &PaperSpec,
    with_pulse: bool,
) -> Result<(RasterImage, PlotOutput)> {
    spec.validate("paper.")?;
    layout.validate(spec, "layout.")?;
    layout.check_record(rec)?;
    let (w, h) = img.dims();
    let [left, right, top, bottom] = layout.margins_mm;
    let trace_mm = spec.mm_per_s * rec.duration_s();
    if left + trace_mm > spec.width_mm() - right + 1e-9 {
        return Err(Error::Size(format!(
            "{:.1} s of trace ({trace_mm:.1} mm) does not fit between margins",
            rec.duration_s()
        )));
    }

    let fs = rec.fs();
    let n = rec.sample_count();
    let ppmv = spec.px_per_mv();
    let baselines: Vec<f64> = layout
        .row_baselines_mm
        .iter()
        .map(|&b| spec.to_pixels(b))
        .collect();
    let row_band = |row: usize| {
        let y0 = if row == 0 {
            spec.to_pixels(top)
        } else {
            (baselines[row - 1] + baselines[row]) / 2.0
        };
        let y1 = if row + 1 == baselines.len() {
            spec.to_pixels(spec.height_mm() - bottom)
        } else {
            (baselines[row] + baselines[row + 1]) / 2.0
        };
        (y0, y1)
    };

    let mut segments: Vec<(usize, usize, bool, &str, usize, usize)> = layout
        .order
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let (row, col) = (i / layout.cols, i % layout.cols);
            let i0 = (n as f64 * col as f64 / layout.cols as f64).round() as usize;
            let i1 = (n as f64 * (col + 1) as f64 / layout.cols as f64).round() as usize;
            (row, col, false, name.as_str(), i0, i1)
        })
        .collect();
    if let Some(name) = &layout.rhythm_lead {
        segments.push((layout.rows, 0, true, name.as_str(), 0, n));
    }

    let mut out = PlotOutput::default();
    let mut ink = Coverage::new(w, h);
    for (row, col, rhythm, name, i0, i1) in segments {
        let samples = &rec.lead(name).expect("checked").samples;
        let baseline = baselines[row];
        let x_start = spec.to_pixels(left + spec.mm_per_s * i0 as f64 / fs);
        let x_end = spec.to_pixels(left + spec.mm_per_s * i1 as f64 / fs);
        let points: Vec<[f64; 2]> = (i0..i1)
            .map(|i| {
                let x = x_start + spec.px_per_s() * (i - i0) as f64 / fs;
                [x, baseline - ppmv * samples[i]]
            })
            .collect();
        if points.iter().any(|p| off_page(p, w, h)) {
            out.clipped.push(name.to_string());
        }
        draw_polyline(&mut ink, &points, spec.trace_width_px, spec.antialias);
        let (y0, y1) = row_band(row);
        out.leads.push(LeadPolyline {
            lead: name.to_string(),
            row,
            col,
            rhythm,
            t_start_s: i0 as f64 / fs,
            duration_s: (i1 - i0) as f64 / fs,
            fs,
            first_sample: i0,
            baseline_px: baseline,
            x_start_px: x_start,
            region: PixelRect {
                x0: x_start,
                y0,
                x1: x_end,
                y1,
            },
            points,
        });
    }

    if with_pulse {
        let pulse_w = 0.2 * spec.mm_per_s;
        let total = 2.0 * PULSE_LEAD_MM + pulse_w;
        let start_mm = match layout.pulse {
            PulsePlacement::RowStart => left - PULSE_GAP_MM - total,
            PulsePlacement::RowEnd => left + trace_mm + PULSE_GAP_MM,
        };
        if start_mm < 0.0 || start_mm + total > spec.width_mm() {
            return Err(Error::Size(format!(
                "no room for the {total:.1} mm calibration pulse in the margin"
            )));
        }
        for &b in &baselines {
            let rise = spec.to_pixels(start_mm + PULSE_LEAD_MM);
            let fall = rise + spec.to_pixels(pulse_w);
            let top_y = b - ppmv;
            let pts = vec![
                [spec.to_pixels(start_mm), b],
                [rise, b],
                [rise, top_y],
                [fall, top_y],
                [fall, b],
                [spec.to_pixels(start_mm + total), b],
            ];
            draw_polyline(&mut ink, &pts, spec.trace_width_px, spec.antialias);
            out.pulses.push(pts);
        }
    }

    ink.composite(&mut img, 0, 0, spec.trace_color, 1.0);
    Ok((img, out))
}

/// Rasterize a polyline into a coverage layer. Returns true if any ink fell
/// off the layer.
pub fn draw_polyline(ink: &mut Coverage, points: &[[f64; 2]], width: u32, antialias: bool) -> bool {
    let mut clipped = false;
    if points.len() == 1 {
        clipped |= draw_segment(ink, points[0], points[0], width, antialias);
    }
    for pair in points.windows(2) {
        clipped |= draw_segment(ink, pair[0], pair[1], width, antialias);
    }
    clipped
}

pub fn draw_segment(ink: &mut Coverage, a: [f64; 2], b: [f64; 2], width: u32, antialias: bool) -> bool {
    if antialias {
        draw_segment_aa(ink, a, b, width as f64, 1.0)
    } else {
        draw_segment_bresenham(ink, a, b, width, 1.0)
    }
}

/// Integer Bresenham between rounded endpoints, stamping a `width`-pixel
/// square brush at every step.
pub fn draw_segment_bresenham(ink: &mut Coverage, a: [f64; 2], b: [f64; 2], width: u32, value: f32) -> bool {
    let (mut x0, mut y0) = (a[0].round() as i64, a[1].round() as i64);
    let (x1, y1) = (b[0].round() as i64, b[1].round() as i64);
    let lo = -((width as i64 - 1) / 2);
    let hi = lo + width as i64 - 1;
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut clipped = false;
    loop {
        for oy in lo..=hi {
            for ox in lo..=hi {
                clipped |= !ink.stamp(x0 + ox, y0 + oy, value);
            }
        }
        if x0 == x1 && y0 == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x0 += sx;
        }
        if e2 <= dx {
            err += dx;
            y0 += sy;
        }
    }
    clipped
}

/// Anti-aliased thick segment: coverage falls off linearly over one pixel
/// at distance `width / 2` from the segment.
pub fn draw_segment_aa(ink: &mut Coverage, a: [f64; 2], b: [f64; 2], width: f64, value: f32) -> bool {
    let r = width / 2.0;
    let reach = r + 1.0;
    let x_lo = (a[0].min(b[0]) - reach).floor() as i64;
    let x_hi = (a[0].max(b[0]) + reach).ceil() as i64;
    let y_lo = (a[1].min(b[1]) - reach).floor() as i64;
    let y_hi = (a[1].max(b[1]) + reach).ceil() as i64;
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let mut clipped = false;
    for y in y_lo..=y_hi {
        for x in x_lo..=x_hi {
            let (px, py) = (x as f64 - a[0], y as f64 - a[1]);
            let t = if len2 > 0.0 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let d = ((px - t * dx).powi(2) + (py - t * dy).powi(2)).sqrt();
            let cov = (r + 0.5 - d).clamp(0.0, 1.0) as f32;
            if cov > 0.0 {
                clipped |= !ink.stamp(x, y, cov * value);
            }
        }
    }
    clipped
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> PaperSpec {
        PaperSpec {
            width_px: 600,
            height_px: 400,
            ..PaperSpec::default()
        }
    }

    fn flat_record(v: f64, secs: f64) -> EcgRecord {
        EcgRecord::from_pairs(vec![("II", vec![v; (500.0 * secs) as usize])], 500.0).unwrap()
    }

    #[test]
    fn pixel_conversion() {
        let s = PaperSpec::default();
        assert!((to_pixels(&s, 1.0) - 200.0 / 25.4).abs() < 1e-12);
        assert!((to_pixels(&s, 25.0) - 196.850_393_700_787_4).abs() < 1e-9);
        assert_eq!(to_pixels(&s, 0.0), 0.0);
        assert!((s.px_per_mm() - 7.874_015_748_031_496).abs() < 1e-12);
    }

    #[test]
    fn coarse_lines_follow_rounded_positions() {
        let s = PaperSpec::default();
        let xs = grid_positions(&s, 5.0, s.width_px);
        let p = s.to_pixels(5.0);
        assert_eq!(xs.len(), (s.width_px as f64 / p).floor() as usize + 1);
        for (k, &x) in xs.iter().enumerate() {
            assert_eq!(x as f64, (39.370_078_740_157_48 * k as f64).round());
        }
        let img = render_blank_paper(&s).unwrap();
        for &x in &xs {
            assert_eq!(img.get(x, 3), s.coarse_color);
            assert_eq!(img.get(x + 1, 3), s.coarse_color);
        }
    }

    #[test]
    fn off_grid_pixels_are_background() {
        let s = PaperSpec::default();
        let img = render_blank_paper(&s).unwrap();
        let fine: Vec<u32> = grid_positions(&s, 1.0, s.width_px);
        let fine_y: Vec<u32> = grid_positions(&s, 1.0, s.height_px);
        let on = |v: u32, lines: &[u32]| lines.iter().any(|&l| v >= l && v < l + 2);
        let mut checked = 0;
        for y in (0..s.height_px).step_by(7) {
            for x in (0..s.width_px).step_by(5) {
                if !on(x, &fine) && !on(y, &fine_y) {
                    assert_eq!(img.get(x, y), s.bg_color, "({x},{y})");
                    checked += 1;
                }
            }
        }
        assert!(checked > 1000);
    }

    #[test]
    fn tiny_page_is_size_error() {
        let s = PaperSpec {
            width_px: 30,
            height_px: 30,
            ..PaperSpec::default()
        };
        assert!(matches!(render_blank_paper(&s), Err(Error::Size(_))));
    }

    #[test]
    fn spec_validation() {
        let bad = PaperSpec {
            coarse_grid_mm: 4.5,
            fine_grid_mm: 1.0,
            ..PaperSpec::default()
        };
        assert!(bad.validate("").is_err());
        let bad = PaperSpec {
            fine_grid_mm: 5.0,
            ..PaperSpec::default()
        };
        assert!(bad.validate("").is_err());
        assert!(PaperSpec::default().validate("").is_ok());
    }

    #[test]
    fn zero_lead_is_flat_at_baseline() {
        let s = small_spec();
        let layout = LeadLayout::single("II", 25.0, [15.0, 5.0, 5.0, 5.0]);
        let (img, out) = plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(0.0, 2.0),
            &layout,
            &s,
            false,
        )
        .unwrap();
        let lead = &out.leads[0];
        let b = s.to_pixels(25.0);
        assert!(lead.points.iter().all(|p| p[1] == b));
        let (x0, x1) = (lead.points[0][0].ceil() as u32, lead.points.last().unwrap()[0] as u32);
        for x in x0..x1 {
            for y in 0..s.height_px {
                if img.get(x, y) == s.trace_color {
                    assert!((y as f64 - b).abs() <= s.trace_width_px as f64, "y={y}");
                }
            }
        }
    }

    #[test]
    fn one_millivolt_offset() {
        let s = small_spec();
        let layout = LeadLayout::single("II", 30.0, [15.0, 5.0, 5.0, 5.0]);
        let (_, out) = plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(1.0, 1.0),
            &layout,
            &s,
            false,
        )
        .unwrap();
        let lead = &out.leads[0];
        for p in &lead.points {
            assert!((lead.baseline_px - p[1] - 78.740_157_480_314_96).abs() < 1e-9);
        }
    }

    #[test]
    fn pulse_geometry() {
        let s = small_spec();
        let layout = LeadLayout::single("II", 30.0, [15.0, 5.0, 5.0, 5.0]);
        let (_, out) = plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(0.0, 1.0),
            &layout,
            &s,
            true,
        )
        .unwrap();
        let p = &out.pulses[0];
        assert!((p[1][1] - p[2][1] - 78.74).abs() < 0.01);
        assert!((p[3][0] - p[2][0] - 39.37).abs() < 0.01);
    }

    #[test]
    fn pulse_needs_margin() {
        let s = small_spec();
        let layout = LeadLayout::single("II", 30.0, [3.0, 5.0, 5.0, 5.0]);
        let r = plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(0.0, 1.0),
            &layout,
            &s,
            true,
        );
        assert!(matches!(r, Err(Error::Size(_))));
    }

    #[test]
    fn out_of_page_trace_is_flagged() {
        let s = small_spec();
        let layout = LeadLayout::single("II", 10.0, [15.0, 5.0, 5.0, 5.0]);
        let (_, out) = plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(3.0, 1.0),
            &layout,
            &s,
            false,
        )
        .unwrap();
        assert_eq!(out.clipped, vec!["II".to_string()]);
    }

    #[test]
    fn missing_lead_is_rejected() {
        let s = small_spec();
        let layout = LeadLayout::single("V1", 30.0, [15.0, 5.0, 5.0, 5.0]);
        assert!(plot_record(
            render_blank_paper(&s).unwrap(),
            &flat_record(0.0, 1.0),
            &layout,
            &s,
            false
        )
        .is_err());
    }

    #[test]
    fn default_layout_covers_twelve_leads() {
        let s = PaperSpec::default();
        let l = LeadLayout::default();
        l.validate(&s, "").unwrap();
        assert_eq!(l.order.len(), 12);
        assert_eq!(l.total_rows(), 4);
    }

    #[test]
    fn segment_extent_matches_speed() {
        let s = PaperSpec::default();
        let rec = EcgRecord::from_pairs(
            crate::ecg_io::STANDARD_LEADS
                .iter()
                .map(|n| (*n, vec![0.0; 5000]))
                .collect(),
            500.0,
        )
        .unwrap();
        let (_, out) = plot_record(
            render_blank_paper(&s).unwrap(),
            &rec,
            &LeadLayout::default(),
            &s,
            true,
        )
        .unwrap();
        assert_eq!(out.leads.len(), 13);
        for l in &out.leads {
            let extent = l.region.x1 - l.region.x0;
            assert!((extent - s.to_pixels(25.0 * l.duration_s)).abs() < 1e-9);
        }
        let rhythm = out.leads.iter().find(|l| l.rhythm).unwrap();
        assert_eq!(rhythm.points.len(), 5000);
        assert_eq!(out.pulses.len(), 4);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(24))]

            #[test]
            fn vertices_sit_on_ink(values in prop::collection::vec(-1.5f64..1.5, 100..300), width in 1u32..5) {
                let s = PaperSpec { trace_width_px: width, ..small_spec() };
                let rec = EcgRecord::from_pairs(vec![("II", values.clone())], 500.0).unwrap();
                let layout = LeadLayout::single("II", 25.0, [15.0, 5.0, 5.0, 5.0]);
                let (img, out) = plot_record(render_blank_paper(&s).unwrap(), &rec, &layout, &s, false).unwrap();
                let reach = (width as f64 / 2.0).ceil() as i64;
                let lead = &out.leads[0];
                for (p, v) in lead.points.iter().zip(&values) {
                    let back = (lead.baseline_px - p[1]) / (s.to_pixels(1.0) * s.mm_per_mv);
                    prop_assert!((back - v).abs() <= 0.5 / s.to_pixels(1.0) / s.mm_per_mv);
                    let (cx, cy) = (p[0].round() as i64, p[1].round() as i64);
                    let mut hit = false;
                    for dy in -reach..=reach {
                        for dx in -reach..=reach {
                            let (x, y) = (cx + dx, cy + dy);
                            if x >= 0 && y >= 0 && x < img.width() as i64 && y < img.height() as i64
                                && img.get(x as u32, y as u32) == s.trace_color {
                                hit = true;
                            }
                        }
                    }
                    prop_assert!(hit, "no ink near {:?}", p);
                }
            }
        }
    }
}
