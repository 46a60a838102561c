//! Image quilting with minimum-error boundary cuts.

use rand::Rng;

use crate::error::{Error, Result};
use crate::raster::{luminance, RasterImage};
use crate::rng::rng_from;

/// Dense `rows × cols × channels` block of samples.
#[derive(Clone, Debug, PartialEq)]
pub struct Block {
    pub rows: usize,
    pub cols: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Block {
    pub fn new(rows: usize, cols: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols * channels {
            return Err(Error::Size(format!(
                "block data has {} values, expected {rows}x{cols}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            rows,
            cols,
            channels,
            data,
        })
    }

    pub fn gray(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Self::new(rows, cols, 1, data)
    }
}

/// A vertical seam: one column index per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    pub path: Vec<usize>,
    pub cost: f64,
}

/// Minimal vertical path through an error surface with ±1 column moves.
///
/// `E[0] = e[0]`, `E[i][j] = e[i][j] + min(E[i−1][j−1..=j+1])`; the path is
/// backtracked from the argmin of the last row. Ties go to the smallest
/// column index.
pub fn min_cut_from_error(e: &[f64], rows: usize, cols: usize) -> Result<Cut> {
    if rows == 0 || cols == 0 || e.len() != rows * cols {
        return Err(Error::Size(format!(
            "error surface of {} values is not {rows}x{cols}",
            e.len()
        )));
    }
    let mut acc = e.to_vec();
    for i in 1..rows {
        for j in 0..cols {
            let lo = j.saturating_sub(1);
            let hi = (j + 1).min(cols - 1);
            let best = (lo..=hi)
                .map(|k| acc[(i - 1) * cols + k])
                .fold(f64::INFINITY, f64::min);
            acc[i * cols + j] += best;
        }
    }
    let argmin = |row: usize, lo: usize, hi: usize| {
        let mut best = lo;
        for k in lo..=hi {
            if acc[row * cols + k] < acc[row * cols + best] {
                best = k;
            }
        }
        best
    };
    let mut path = vec![0; rows];
    path[rows - 1] = argmin(rows - 1, 0, cols - 1);
    let cost = acc[(rows - 1) * cols + path[rows - 1]];
    for i in (0..rows - 1).rev() {
        let j = path[i + 1];
        path[i] = argmin(i, j.saturating_sub(1), (j + 1).min(cols - 1));
    }
    Ok(Cut { path, cost })
}

/// Error surface `e = Σ_channels (ov1 − ov2)²` and its minimal vertical cut.
pub fn min_error_boundary_cut(ov1: &Block, ov2: &Block) -> Result<Cut> {
    if (ov1.rows, ov1.cols, ov1.channels) != (ov2.rows, ov2.cols, ov2.channels) {
        return Err(Error::Size(format!(
            "overlap blocks differ: {}x{}x{} vs {}x{}x{}",
            ov1.rows, ov1.cols, ov1.channels, ov2.rows, ov2.cols, ov2.channels
        )));
    }
    let ch = ov1.channels;
    let e: Vec<f64> = ov1
        .data
        .chunks_exact(ch)
        .zip(ov2.data.chunks_exact(ch))
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum())
        .collect();
    min_cut_from_error(&e, ov1.rows, ov1.cols)
}

#[derive(Clone, Debug)]
pub struct QuiltSpec {
    pub block_px: u32,
    pub overlap_px: u32,
    pub out_w: u32,
    pub out_h: u32,
    /// Random candidate patches scored per tile.
    pub candidates: usize,
    /// Read as grayscale.
    pub seed_texture: RasterImage,
    pub rng_seed: u64,
}

impl QuiltSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.overlap_px > 0 && self.overlap_px < self.block_px) {
            return Err(Error::param("wrinkles.overlap_px", "need 0 < overlap < block"));
        }
        if self.out_w < self.block_px || self.out_h < self.block_px {
            return Err(Error::Size(format!(
                "output {}x{} smaller than block {}",
                self.out_w, self.out_h, self.block_px
            )));
        }
        let (sw, sh) = self.seed_texture.dims();
        if sw < self.block_px || sh < self.block_px {
            return Err(Error::Size(format!(
                "seed texture {sw}x{sh} smaller than block {}",
                self.block_px
            )));
        }
        if self.candidates == 0 {
            return Err(Error::param("wrinkles.candidates", "must be >= 1"));
        }
        Ok(())
    }
}

pub fn quilt_texture(spec: &QuiltSpec) -> Result<RasterImage> {
    spec.validate()?;
    let (sw, sh) = spec.seed_texture.dims();
    let mut rng = rng_from(spec.rng_seed);
    let (mx, my) = (sw - spec.block_px, sh - spec.block_px);
    quilt_texture_with(spec, &mut || (rng.gen_range(0..=mx), rng.gen_range(0..=my)))
}

/// Quilting with an explicit patch sampler returning top-left corners in the
/// seed texture. The first tile takes one draw; every later tile takes
/// `spec.candidates` draws and keeps the one with the lowest overlap SSD.
pub fn quilt_texture_with(
    spec: &QuiltSpec,
    sample: &mut dyn FnMut() -> (u32, u32),
) -> Result<RasterImage> {
    spec.validate()?;
    let b = spec.block_px as usize;
    let ov = spec.overlap_px as usize;
    let stride = b - ov;
    let (sw, _) = spec.seed_texture.dims();
    let sw = sw as usize;
    let seed: Vec<f64> = spec
        .seed_texture
        .as_raw()
        .chunks_exact(3)
        .map(|p| luminance([p[0], p[1], p[2]]).round())
        .collect();
    let tiles = |out: usize| (out - b).div_ceil(stride) + 1;
    let (nx, ny) = (tiles(spec.out_w as usize), tiles(spec.out_h as usize));
    let cw = (nx - 1) * stride + b;
    let ch = (ny - 1) * stride + b;
    let mut canvas = vec![0f64; cw * ch];
    let patch_at = |px: usize, py: usize, c: usize, r: usize| seed[(py + r) * sw + px + c];

    let mut e_left = vec![0f64; b * ov];
    let mut e_top = vec![0f64; b * ov];
    for ty in 0..ny {
        for tx in 0..nx {
            let (x, y) = (tx * stride, ty * stride);
            let in_overlap = |c: usize, r: usize| (tx > 0 && c < ov) || (ty > 0 && r < ov);
            let (px, py) = if tx == 0 && ty == 0 {
                let (px, py) = sample();
                (px as usize, py as usize)
            } else {
                let mut best: Option<((usize, usize), f64)> = None;
                for _ in 0..spec.candidates {
                    let (px, py) = sample();
                    let (px, py) = (px as usize, py as usize);
                    let mut ssd = 0.0;
                    for r in 0..b {
                        for c in 0..b {
                            if in_overlap(c, r) {
                                let d = canvas[(y + r) * cw + x + c] - patch_at(px, py, c, r);
                                ssd += d * d;
                            }
                        }
                    }
                    if best.is_none_or(|(_, s)| ssd < s) {
                        best = Some(((px, py), ssd));
                    }
                }
                best.expect("candidates >= 1").0
            };

            let left = if tx > 0 {
                for r in 0..b {
                    for c in 0..ov {
                        let d = canvas[(y + r) * cw + x + c] - patch_at(px, py, c, r);
                        e_left[r * ov + c] = d * d;
                    }
                }
                Some(min_cut_from_error(&e_left, b, ov)?.path)
            } else {
                None
            };
            let top = if ty > 0 {
                // transposed: one row of the surface per block column
                for c in 0..b {
                    for r in 0..ov {
                        let d = canvas[(y + r) * cw + x + c] - patch_at(px, py, c, r);
                        e_top[c * ov + r] = d * d;
                    }
                }
                Some(min_cut_from_error(&e_top, b, ov)?.path)
            } else {
                None
            };
            for r in 0..b {
                for c in 0..b {
                    let keep_old = left.as_ref().is_some_and(|p| c < ov && c < p[r])
                        || top.as_ref().is_some_and(|p| r < ov && r < p[c]);
                    if !keep_old {
                        canvas[(y + r) * cw + x + c] = patch_at(px, py, c, r);
                    }
                }
            }
        }
    }

    let (ow, oh) = (spec.out_w as usize, spec.out_h as usize);
    let mut pixels = Vec::with_capacity(ow * oh * 3);
    for r in 0..oh {
        for c in 0..ow {
            let v = canvas[r * cw + c].clamp(0.0, 255.0) as u8;
            pixels.extend_from_slice(&[v, v, v]);
        }
    }
    RasterImage::from_raw(spec.out_w, spec.out_h, pixels)
}

/// Ridged multi-octave value noise, rendered as a light gray texture with
/// fold-like dark ridges.
pub fn procedural_seed_texture(size: u32, seed: u64) -> RasterImage {
    let mut rng = rng_from(seed);
    let octaves = [(4usize, 1.0f64), (8, 0.5), (16, 0.25), (32, 0.125)];
    let lattices: Vec<(usize, Vec<f64>)> = octaves
        .iter()
        .map(|&(cells, _)| {
            let n = cells + 1;
            (cells, (0..n * n).map(|_| rng.gen::<f64>()).collect())
        })
        .collect();
    let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
    let mut out = RasterImage::new(size, size, [0, 0, 0]);
    let norm: f64 = octaves.iter().map(|o| o.1).sum();
    for y in 0..size {
        for x in 0..size {
            let mut v = 0.0;
            for ((cells, lat), &(_, amp)) in lattices.iter().zip(&octaves) {
                let n = cells + 1;
                let fx = x as f64 / size as f64 * *cells as f64;
                let fy = y as f64 / size as f64 * *cells as f64;
                let (ix, iy) = (fx.floor() as usize, fy.floor() as usize);
                let (tx, ty) = (smooth(fx - ix as f64), smooth(fy - iy as f64));
                let at = |i: usize, j: usize| lat[j.min(*cells) * n + i.min(*cells)];
                let top = at(ix, iy) * (1.0 - tx) + at(ix + 1, iy) * tx;
                let bot = at(ix, iy + 1) * (1.0 - tx) + at(ix + 1, iy + 1) * tx;
                let noise = top * (1.0 - ty) + bot * ty;
                v += amp * (1.0 - (2.0 * noise - 1.0).abs());
            }
            let g = (150.0 + 105.0 * (v / norm)).round().clamp(0.0, 255.0) as u8;
            out.put(x, y, [g, g, g]);
        }
    }
    out
}

/// Multiplicative luminance modulation:
/// `out = (1 − α)·img + α·img·(L / mean(L))` with `L` the texture luminance.
pub fn blend_wrinkles(img: &RasterImage, texture: &RasterImage, alpha: f64) -> Result<RasterImage> {
    if img.dims() != texture.dims() {
        return Err(Error::Size(format!(
            "texture {:?} does not match image {:?}",
            texture.dims(),
            img.dims()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::param("wrinkles.alpha", "must be in [0, 1]"));
    }
    if alpha == 0.0 {
        return Ok(img.clone());
    }
    let lum: Vec<f64> = texture
        .as_raw()
        .chunks_exact(3)
        .map(|p| luminance([p[0], p[1], p[2]]))
        .collect();
    let mean = lum.iter().sum::<f64>() / lum.len().max(1) as f64;
    let mut out = img.clone();
    for (px, l) in out.as_raw_mut().chunks_exact_mut(3).zip(&lum) {
        let m = if mean > 0.0 { l / mean } else { 1.0 };
        let gain = 1.0 + alpha * (m - 1.0);
        for c in px.iter_mut() {
            *c = (*c as f64 * gain).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}
