//! 3×3 affine and projective transforms. Pixel `(x, y)` has its center at
//! integer coordinates, matching the polyline convention of the renderer.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::{RasterImage, Rgb};

const DET_EPS: f64 = 1e-12;

/// Row-major `(a, b, c, d, e, f, g, h, i)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Matrix3(pub [f64; 9]);

impl Default for Matrix3 {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl Matrix3 {
    pub const IDENTITY: Matrix3 = Matrix3([1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);

    pub fn is_affine(&self) -> bool {
        self.0[6] == 0.0 && self.0[7] == 0.0 && self.0[8] == 1.0
    }

    pub fn det(&self) -> f64 {
        let [a, b, c, d, e, f, g, h, i] = self.0;
        a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    }

    pub fn inverse(&self) -> Result<Matrix3> {
        let det = self.det();
        if !det.is_finite() || det.abs() <= DET_EPS {
            return Err(Error::Degenerate(format!("singular matrix (det = {det:e})")));
        }
        let [a, b, c, d, e, f, g, h, i] = self.0;
        let adj = [
            e * i - f * h,
            c * h - b * i,
            b * f - c * e,
            f * g - d * i,
            a * i - c * g,
            c * d - a * f,
            d * h - e * g,
            b * g - a * h,
            a * e - b * d,
        ];
        Ok(Matrix3(adj.map(|v| v / det)))
    }

    /// `self · rhs`: applies `rhs` first.
    pub fn mul(&self, rhs: &Matrix3) -> Matrix3 {
        let (l, r) = (&self.0, &rhs.0);
        let mut out = [0.0; 9];
        for row in 0..3 {
            for col in 0..3 {
                out[row * 3 + col] = (0..3).map(|k| l[row * 3 + k] * r[k * 3 + col]).sum();
            }
        }
        Matrix3(out)
    }

    /// Homogeneous map with `w′` divide; `None` when `|w′| < 1e-12`.
    #[inline]
    pub fn apply(&self, x: f64, y: f64) -> Option<[f64; 2]> {
        let [a, b, c, d, e, f, g, h, i] = self.0;
        let w = g * x + h * y + i;
        if w.abs() < DET_EPS {
            return None;
        }
        Some([(a * x + b * y + c) / w, (d * x + e * y + f) / w])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TransformKind {
    Translate { tx: f64, ty: f64 },
    /// About the origin.
    Scale { sx: f64, sy: f64 },
    /// Counter-clockwise in image coordinates (y down), about `center`.
    Rotate { deg: f64, center: [f64; 2] },
    /// `x' = x + kx·y`, `y' = y + ky·x`.
    Shear { kx: f64, ky: f64 },
    /// Homography taking each `src[k]` to `dst[k]`.
    ProjectiveCorners { src: [[f64; 2]; 4], dst: [[f64; 2]; 4] },
}

pub fn build_transform(kind: &TransformKind) -> Result<Matrix3> {
    let m = match kind {
        TransformKind::Translate { tx, ty } => Matrix3([1.0, 0.0, *tx, 0.0, 1.0, *ty, 0.0, 0.0, 1.0]),
        TransformKind::Scale { sx, sy } => Matrix3([*sx, 0.0, 0.0, 0.0, *sy, 0.0, 0.0, 0.0, 1.0]),
        TransformKind::Rotate { deg, center: [cx, cy] } => {
            let (s, c) = deg.to_radians().sin_cos();
            // T(center) · R · T(−center)
            Matrix3([
                c,
                s,
                cx - c * cx - s * cy,
                -s,
                c,
                cy + s * cx - c * cy,
                0.0,
                0.0,
                1.0,
            ])
        }
        TransformKind::Shear { kx, ky } => Matrix3([1.0, *kx, 0.0, *ky, 1.0, 0.0, 0.0, 0.0, 1.0]),
        TransformKind::ProjectiveCorners { src, dst } => homography(src, dst)?,
    };
    if m.0.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("geometry", "transform parameters must be finite"));
    }
    if m.det().abs() <= DET_EPS {
        return Err(Error::Degenerate(format!("{kind:?} is not invertible")));
    }
    Ok(m)
}

fn check_no_three_collinear(pts: &[[f64; 2]; 4], which: &str) -> Result<()> {
    let scale = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    for skip in 0..4 {
        let t: Vec<&[f64; 2]> = pts.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, p)| p).collect();
        let cross = (t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[1][1] - t[0][1]) * (t[2][0] - t[0][0]);
        if cross.abs() <= 1e-9 * scale * scale {
            return Err(Error::Degenerate(format!("three {which} corners are collinear")));
        }
    }
    Ok(())
}

/// Solves the 8-unknown system with `i = 1`.
fn homography(src: &[[f64; 2]; 4], dst: &[[f64; 2]; 4]) -> Result<Matrix3> {
    check_no_three_collinear(src, "source")?;
    check_no_three_collinear(dst, "destination")?;
    let mut a = [[0.0f64; 9]; 8];
    for k in 0..4 {
        let ([x, y], [u, v]) = (src[k], dst[k]);
        a[2 * k] = [x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, u];
        a[2 * k + 1] = [0.0, 0.0, 0.0, x, y, 1.0, -v * x, -v * y, v];
    }
    // Gaussian elimination with partial pivoting on the augmented matrix.
    for col in 0..8 {
        let piv = (col..8)
            .max_by(|&p, &q| a[p][col].abs().total_cmp(&a[q][col].abs()))
            .unwrap();
        if a[piv][col].abs() < DET_EPS {
            return Err(Error::Degenerate("singular homography system".into()));
        }
        a.swap(col, piv);
        for row in 0..8 {
            if row != col {
                let f = a[row][col] / a[col][col];
                if f != 0.0 {
                    for k in col..9 {
                        a[row][k] -= f * a[col][k];
                    }
                }
            }
        }
    }
    let mut h = [0.0; 9];
    for k in 0..8 {
        h[k] = a[k][8] / a[k][k];
    }
    h[8] = 1.0;
    Ok(Matrix3(h))
}

pub fn transform_points(pts: &[[f64; 2]], m: &Matrix3) -> Result<Vec<[f64; 2]>> {
    pts.iter()
        .enumerate()
        .map(|(index, &[x, y])| {
            m.apply(x, y).ok_or_else(|| Error::PointAtInfinity {
                index,
                w: m.0[6] * x + m.0[7] * y + m.0[8],
            })
        })
        .collect()
}

/// Inverse-mapped bilinear warp; output keeps the source dimensions.
/// Sample positions outside `[−0.5, w − 0.5] × [−0.5, h − 0.5]` get `fill`.
pub fn warp_image(img: &RasterImage, m: &Matrix3, fill: Rgb) -> Result<RasterImage> {
    let inv = m.inverse()?;
    let (w, h) = img.dims();
    let src = img.as_raw();
    let stride = w as usize * 3;
    let (wf, hf) = (w as f64, h as f64);
    let mut out = vec![0u8; src.len()];
    out.par_chunks_mut(stride.max(1)).enumerate().for_each(|(y, row)| {
        for x in 0..w as usize {
            let px = &mut row[x * 3..x * 3 + 3];
            let Some([sx, sy]) = inv.apply(x as f64, y as f64) else {
                px.copy_from_slice(&fill);
                continue;
            };
            if !(sx >= -0.5 && sx <= wf - 0.5 && sy >= -0.5 && sy <= hf - 0.5) {
                px.copy_from_slice(&fill);
                continue;
            }
            let sx = sx.clamp(0.0, wf - 1.0);
            let sy = sy.clamp(0.0, hf - 1.0);
            let (x0, y0) = (sx.floor() as usize, sy.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w as usize - 1), (y0 + 1).min(h as usize - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let at = |xx: usize, yy: usize, c: usize| src[yy * stride + xx * 3 + c] as f64;
            for c in 0..3 {
                let top = at(x0, y0, c) * (1.0 - fx) + at(x1, y0, c) * fx;
                let bot = at(x0, y1, c) * (1.0 - fx) + at(x1, y1, c) * fx;
                px[c] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
        }
    });
    RasterImage::from_raw(w, h, out)
}

/// Page corners each jittered uniformly within `±frac·diagonal` per axis.
pub fn random_perspective<R: Rng>(width: u32, height: u32, frac: f64, rng: &mut R) -> Result<Matrix3> {
    if !(0.0..0.25).contains(&frac) {
        return Err(Error::param("perspective.jitter_frac", "must be in [0, 0.25)"));
    }
    let (w, h) = ((width.max(2) - 1) as f64, (height.max(2) - 1) as f64);
    let src = [[0.0, 0.0], [w, 0.0], [w, h], [0.0, h]];
    let amp = frac * (w * w + h * h).sqrt();
    for _ in 0..100 {
        let mut dst = src;
        if amp > 0.0 {
            for p in dst.iter_mut() {
                p[0] += rng.gen_range(-amp..=amp);
                p[1] += rng.gen_range(-amp..=amp);
            }
        }
        if let Ok(m) = build_transform(&TransformKind::ProjectiveCorners { src, dst }) {
            return Ok(m);
        }
    }
    Err(Error::Degenerate("could not sample a valid perspective".into()))
}
