use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::draw_segment_bresenham;
use crate::raster::{Coverage, RasterImage};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CreaseSpec {
    pub n: usize,
    pub theta_deg: f64,
    /// Darkness of the line before blurring, 0..=1.
    pub intensity: f64,
    /// Blur standard deviation; 0 disables the blur.
    pub sigma_px: f64,
    pub line_width_px: u32,
    /// Brighten instead of darken (scanner highlight).
    pub lighten: bool,
}

impl CreaseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.theta_deg > 0.0 && self.theta_deg < 180.0) {
            return Err(Error::param("creases.theta_deg", "must be in (0, 180)"));
        }
        if !(self.sigma_px >= 0.0 && self.sigma_px.is_finite()) {
            return Err(Error::param("creases.sigma_px", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.intensity) {
            return Err(Error::param("creases.intensity", "must be in [0, 1]"));
        }
        if self.line_width_px == 0 {
            return Err(Error::param("creases.line_width_px", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CreaseLines {
    /// Start points stepped along the top edge, then down the right edge.
    pub starts: Vec<[f64; 2]>,
    /// Unclipped ends: `(0, m·0 + c)` on the line through each start.
    pub raw_ends: Vec<[f64; 2]>,
    /// Each crease line clipped to the page rectangle.
    pub segments: Vec<([f64; 2], [f64; 2])>,
}

/// Crease coordinates for `n` creases at inclination `theta_deg` on a
/// `w × h` page.
///
/// Starts are spaced `gap = (w + h) / (n + 1)` apart along the top edge
/// and then down the right edge. Each crease is the line through its start
/// with slope `tan(π − θ)`; its raw end is evaluated at `x = 0`. The line is
/// then clipped to the page. At θ = 90° the lines are vertical.
pub fn generate_crease_lines(n: usize, theta_deg: f64, w: u32, h: u32) -> Result<CreaseLines> {
    if w == 0 || h == 0 {
        return Err(Error::Size("page must be non-empty".into()));
    }
    if !(theta_deg > 0.0 && theta_deg < 180.0) {
        return Err(Error::param("theta_deg", "must be in (0, 180)"));
    }
    let (wf, hf) = (w as f64, h as f64);
    let gap = (wf + hf) / (n as f64 + 1.0);
    let mut out = CreaseLines::default();
    // Arc length along top edge then right edge.
    let mut travelled = 0.0;
    for _ in 0..n {
        travelled += gap;
        let start = if travelled < wf {
            [travelled, 0.0]
        } else {
            [wf, travelled - wf]
        };
        out.starts.push(start);
    }
    let vertical = (theta_deg - 90.0).abs() < 1e-9;
    for &[x, y] in &out.starts {
        let x_end = 0.0;
        let (raw_end, dir) = if vertical {
            ([x, hf], [0.0, 1.0])
        } else {
            let m = (std::f64::consts::PI - theta_deg.to_radians()).tan();
            let c = y - m * x;
            ([x_end, m * x_end + c], [1.0, m])
        };
        out.raw_ends.push(raw_end);
        let seg = clip_line_to_page([x, y], dir, wf, hf).unwrap_or(([x, y], [x, y]));
        out.segments.push(seg);
    }
    Ok(out)
}

/// Liang–Barsky clip of the infinite line `p + t·d` to `[0, w] × [0, h]`.
/// The returned chord starts at the end nearer to `p`.
pub fn clip_line_to_page(p: [f64; 2], d: [f64; 2], w: f64, h: f64) -> Option<([f64; 2], [f64; 2])> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for (pi, di, hi) in [(p[0], d[0], w), (p[1], d[1], h)] {
        if di.abs() < 1e-15 {
            if pi < -1e-9 || pi > hi + 1e-9 {
                return None;
            }
            continue;
        }
        let (a, b) = ((0.0 - pi) / di, (hi - pi) / di);
        t0 = t0.max(a.min(b));
        t1 = t1.min(a.max(b));
    }
    if t0 > t1 {
        return None;
    }
    let at = |t: f64| {
        [
            (p[0] + t * d[0]).clamp(0.0, w),
            (p[1] + t * d[1]).clamp(0.0, h),
        ]
    };
    let (a, b) = (at(t0), at(t1));
    if t0.abs() <= t1.abs() {
        Some((a, b))
    } else {
        Some((b, a))
    }
}

/// Normalized 2-D Gaussian on a `(2r + 1)²` grid, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel2D {
    pub radius: usize,
    pub values: Vec<f64>,
}

impl Kernel2D {
    pub fn size(&self) -> usize {
        2 * self.radius + 1
    }

    /// Value at offset (i, j) from the center.
    pub fn at(&self, i: i64, j: i64) -> f64 {
        let r = self.radius as i64;
        self.values[((i + r) * (2 * r + 1) + (j + r)) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_sigma(sigma_px: f64) -> Result<()> {
    if !(sigma_px.is_finite() && sigma_px > 0.0) {
        return Err(Error::param("sigma_px", "must be > 0"));
    }
    Ok(())
}

pub fn default_radius(sigma_px: f64) -> usize {
    ((3.0 * sigma_px).ceil() as usize).max(1)
}

/// `kernel[i][j] ∝ exp(−(i² + j²) / 2σ²)`, normalized to unit sum. A
/// `radius` of `None` means `ceil(3σ)`.
pub fn gaussian_kernel(sigma_px: f64, radius: Option<usize>) -> Result<Kernel2D> {
    check_sigma(sigma_px)?;
    let r = radius.unwrap_or_else(|| default_radius(sigma_px)).max(1) as i64;
    let two_s2 = 2.0 * sigma_px * sigma_px;
    let mut values = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
    for i in -r..=r {
        for j in -r..=r {
            values.push((-((i * i + j * j) as f64) / two_s2).exp());
        }
    }
    let total: f64 = values.iter().sum();
    values.iter_mut().for_each(|v| *v /= total);
    Ok(Kernel2D {
        radius: r as usize,
        values,
    })
}

/// Normalized 1-D factor; the 2-D kernel is its outer product with itself.
pub fn gaussian_kernel_1d(sigma_px: f64, radius: usize) -> Result<Vec<f64>> {
    check_sigma(sigma_px)?;
    let r = radius.max(1) as i64;
    let two_s2 = 2.0 * sigma_px * sigma_px;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-((i * i) as f64) / two_s2).exp()).collect();
    let total: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= total);
    Ok(k)
}

/// Separable Gaussian blur of a coverage layer with clamp-to-edge borders.
pub fn blur_separable(layer: &Coverage, sigma_px: f64) -> Result<Coverage> {
    let r = default_radius(sigma_px);
    let k: Vec<f32> = gaussian_kernel_1d(sigma_px, r)?
        .into_iter()
        .map(|v| v as f32)
        .collect();
    let (w, h) = (layer.width as usize, layer.height as usize);
    let ri = r as i64;
    let mut tmp = vec![0f32; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let src = &layer.data[y * w..(y + 1) * w];
        if src.iter().all(|&v| v == 0.0) {
            return;
        }
        for (x, out) in row.iter_mut().enumerate() {
            let mut acc = 0f32;
            for (t, kv) in k.iter().enumerate() {
                let sx = (x as i64 + t as i64 - ri).clamp(0, w as i64 - 1) as usize;
                acc += kv * src[sx];
            }
            *out = acc;
        }
    });
    let mut data = vec![0f32; w * h];
    data.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (t, kv) in k.iter().enumerate() {
            let sy = (y as i64 + t as i64 - ri).clamp(0, h as i64 - 1) as usize;
            let src = &tmp[sy * w..(sy + 1) * w];
            for (o, s) in row.iter_mut().zip(src) {
                *o += kv * s;
            }
        }
    });
    Ok(Coverage {
        width: layer.width,
        height: layer.height,
        data,
    })
}

/// Draw the creases into a mask at `intensity`, blur it, and darken the page
/// multiplicatively: `out = img · (1 − mask)`. With `lighten`, the page is
/// pushed toward white instead.
pub fn apply_creases(img: &RasterImage, spec: &CreaseSpec) -> Result<(RasterImage, CreaseLines)> {
    spec.validate()?;
    let (w, h) = img.dims();
    let lines = generate_crease_lines(spec.n, spec.theta_deg, w, h)?;
    if spec.intensity == 0.0 || spec.n == 0 {
        return Ok((img.clone(), lines));
    }
    let mut mask = Coverage::new(w, h);
    for (a, b) in &lines.segments {
        if a == b {
            continue;
        }
        let clampi = |p: [f64; 2]| [p[0].min(w as f64 - 1.0), p[1].min(h as f64 - 1.0)];
        draw_segment_bresenham(&mut mask, clampi(*a), clampi(*b), spec.line_width_px, spec.intensity as f32);
    }
    let mask = if spec.sigma_px > 0.0 {
        blur_separable(&mask, spec.sigma_px)?
    } else {
        mask
    };
    let mut out = img.clone();
    let row_len = w as usize * 3;
    out.as_raw_mut()
        .par_chunks_mut(row_len)
        .enumerate()
        .for_each(|(y, row)| {
            let m = &mask.data[y * w as usize..(y + 1) * w as usize];
            for (px, &a) in row.chunks_exact_mut(3).zip(m) {
                if a <= 0.0 {
                    continue;
                }
                let a = a.min(1.0);
                for c in px.iter_mut() {
                    let v = *c as f32;
                    let nv = if spec.lighten {
                        v + (255.0 - v) * a
                    } else {
                        v * (1.0 - a)
                    };
                    *c = nv.round().clamp(0.0, 255.0) as u8;
                }
            }
        });
    Ok((out, lines))
}
