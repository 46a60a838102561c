//! Round-trip digitizer and reconstruction metrics.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{warp_image, Matrix3};
use crate::grid::PaperSpec;
use crate::pipeline::{read_sidecar, GroundTruthMeta};
use crate::raster::{PixelRect, RasterImage, Rgb};

/// Boolean trace mask, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceMask {
    pub width: u32,
    pub height: u32,
    pub data: Vec<bool>,
}

impl TraceMask {
    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.data[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn fraction(&self) -> f64 {
        self.count() as f64 / self.data.len().max(1) as f64
    }
}

fn dist2(a: Rgb, b: [u8; 3]) -> i32 {
    (0..3).map(|c| (a[c] as i32 - b[c] as i32).pow(2)).sum()
}

/// Nearest-centroid classification: a pixel is trace iff it is strictly
/// closer to the trace colour than to the background and both grid colours.
pub fn remove_grid(img: &RasterImage, spec: &PaperSpec) -> TraceMask {
    let others = [spec.bg_color, spec.fine_color, spec.coarse_color];
    let data = img
        .as_raw()
        .chunks_exact(3)
        .map(|p| {
            let p = [p[0], p[1], p[2]];
            let d = dist2(spec.trace_color, p);
            others.iter().all(|&o| d < dist2(o, p))
        })
        .collect();
    TraceMask {
        width: img.width(),
        height: img.height(),
        data,
    }
}

/// Where a lead sits on the page and how to sample it back.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceQuery {
    /// Lead cell; `x0` is the time origin of the segment.
    pub region: PixelRect,
    pub baseline_px: f64,
    pub fs: f64,
    pub duration_s: f64,
    /// Columns under any of these boxes are ignored and interpolated.
    pub occluders: Vec<PixelRect>,
}

/// How a column's trace height is estimated from the tracked ink runs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnEstimator {
    /// Centroid of the column's ink run.
    Centroid,
    /// Undo the brush footprint to get the curve's range inside each
    /// centreline column, then take the midpoint of that range, or the
    /// vertex of a parabola through the neighbours at a local extremum.
    #[default]
    Desmear,
}

type Run = (i64, i64);

fn column_runs(mask: &TraceMask, x: i64, y0: i64, y1: i64) -> Vec<Run> {
    let mut runs = Vec::new();
    let mut open: Option<i64> = None;
    for y in y0..=y1 {
        let on = mask.get(x as u32, y as u32);
        match (on, open) {
            (true, None) => open = Some(y),
            (false, Some(s)) => {
                runs.push((s, y - 1));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(s) = open {
        runs.push((s, y1));
    }
    runs
}

fn run_gap(r: Run, lo: i64, hi: i64) -> i64 {
    if r.1 < lo {
        lo - r.1
    } else if r.0 > hi {
        r.0 - hi
    } else {
        0
    }
}

/// Pick one run per column by following the trace outward from an anchor
/// column that holds a single run.
fn track_runs(runs: &[Vec<Run>]) -> Vec<Option<Run>> {
    let n = runs.len();
    let mut chosen = vec![None; n];
    let margin = 3.min(n / 2);
    let anchor = (margin..n.saturating_sub(margin))
        .find(|&i| runs[i].len() == 1)
        .or_else(|| (0..n).find(|&i| !runs[i].is_empty()));
    let Some(anchor) = anchor else {
        return chosen;
    };
    let first = runs[anchor].iter().copied().max_by_key(|r| r.1 - r.0).unwrap();
    chosen[anchor] = Some(first);
    let pick = |i: usize, prev: Run| {
        runs[i]
            .iter()
            .copied()
            .min_by_key(|&r| (run_gap(r, prev.0, prev.1), -(r.1.min(prev.1) - r.0.max(prev.0))))
    };
    let mut prev = first;
    for i in anchor + 1..n {
        chosen[i] = pick(i, prev);
        prev = chosen[i].unwrap_or(prev);
    }
    prev = first;
    for i in (0..anchor).rev() {
        chosen[i] = pick(i, prev);
        prev = chosen[i].unwrap_or(prev);
    }
    chosen
}

/// Column-based extraction. Ink runs inside the region are tracked column
/// by column, each column gets a height estimate, gaps (no ink or occluded)
/// are filled linearly from neighbours, and the column series is resampled
/// at `round(fs·duration)` sample times.
pub fn extract_trace(mask: &TraceMask, q: &TraceQuery, spec: &PaperSpec) -> Result<Vec<f64>> {
    extract_trace_with(mask, q, spec, ColumnEstimator::default())
}

pub fn extract_trace_with(
    mask: &TraceMask,
    q: &TraceQuery,
    spec: &PaperSpec,
    estimator: ColumnEstimator,
) -> Result<Vec<f64>> {
    let n_out = (q.fs * q.duration_s).round() as usize;
    let r = &q.region;
    // Brush footprint [blo, bhi] in both axes, relative to the
    // centreline pixel.
    let (blo, bhi) = if spec.antialias {
        let k = (spec.trace_width_px as f64 / 2.0).round() as i64;
        (-k, k)
    } else {
        let w = spec.trace_width_px.max(1) as i64;
        let lo = -((w - 1) / 2);
        (lo, lo + w - 1)
    };
    let pps = spec.px_per_s();
    let x_last = r.x0 + pps * n_out.saturating_sub(1) as f64 / q.fs;
    let cx0 = (r.x0.round() as i64 + blo).max(0);
    let cx1 = (x_last.round() as i64 + bhi).min(mask.width as i64 - 1);
    let ry0 = r.y0.ceil().max(0.0) as i64;
    let ry1 = (r.y1.floor() as i64).min(mask.height as i64 - 1);
    if cx1 < cx0 || ry1 < ry0 {
        return Err(Error::EmptyTrace(format!("region {r:?} is off the image")));
    }
    let ppmv = spec.px_per_mv();

    let xs: Vec<i64> = (cx0..=cx1).collect();
    // Boxes that cover each column inside the region, as row spans.
    let covers: Vec<Vec<Run>> = xs
        .iter()
        .map(|&x| {
            q.occluders
                .iter()
                .filter(|b| (x as f64) >= b.x0.floor() && (x as f64) < b.x1.ceil() && b.y0 < r.y1 && r.y0 < b.y1)
                .map(|b| (b.y0.floor() as i64, b.y1.ceil() as i64 - 1))
                .collect()
        })
        .collect();
    let runs: Vec<Vec<Run>> = xs
        .iter()
        .zip(&covers)
        .map(|(&x, cov)| {
            let mut runs = column_runs(mask, x, ry0, ry1);
            // ink entirely inside a box is the artifact itself
            runs.retain(|r| !cov.iter().any(|c| c.0 <= r.0 && r.1 <= c.1));
            runs
        })
        .collect();
    let mut chosen = track_runs(&runs);
    for (c, cov) in chosen.iter_mut().zip(&covers) {
        if let Some(run) = *c {
            if cov.iter().any(|b| run.0 <= b.1 + 1 && b.0 - 1 <= run.1) {
                *c = None;
            }
        }
    }
    let ink = |x: i64| -> Option<Run> {
        if x < cx0 || x > cx1 {
            None
        } else {
            chosen[(x - cx0) as usize]
        }
    };

    let mut cols: Vec<(f64, f64)> = Vec::new();
    match estimator {
        ColumnEstimator::Centroid => {
            let bias = (blo + bhi) as f64 / 2.0;
            for &x in &xs {
                if let Some(run) = ink(x) {
                    let y = (run.0 + run.1) as f64 / 2.0 - bias;
                    cols.push((x as f64 - bias, y));
                }
            }
        }
        ColumnEstimator::Desmear => {
            // Centreline column X is stamped into ink columns X+blo..=X+bhi,
            // each shifted down by blo..=bhi rows.
            let xc0 = r.x0.round() as i64;
            let xc1 = x_last.round() as i64;
            // Ink columns that also hold centreline pixels from outside the
            // segment cannot be trusted run by run.
            let clean = |x: i64| -> Option<Run> {
                let dirty = (x < xc0 + bhi) || (x > xc1 + blo);
                if dirty {
                    None
                } else {
                    ink(x)
                }
            };
            let mut range: Vec<Option<Run>> = (xc0 - 1..=xc1 + 1)
                .map(|x| {
                    let mut lo = i64::MIN;
                    let mut hi = i64::MAX;
                    let mut seen = false;
                    for o in blo..=bhi {
                        if let Some(run) = clean(x + o) {
                            lo = lo.max(run.0 - blo);
                            hi = hi.min(run.1 - bhi);
                            seen = true;
                        }
                    }
                    (seen && lo <= hi).then_some((lo, hi)).or_else(|| {
                        // footprint disagreement: fall back to the widest
                        // consistent reading
                        seen.then(|| (hi.min(lo), lo.max(hi)))
                    })
                })
                .collect();
            let span = (bhi - blo) as usize;
            let n = range.len();
            // The outermost centreline columns share their ink columns with
            // the adjacent segment. Recover each from a clean ink column
            // (the union of a few centreline columns) minus what its inner
            // neighbours explain.
            if span > 0 && n > 4 * (span + 2) {
                let residual = |clean: Option<Run>, inner: &[Option<Run>]| -> Option<Run> {
                    let clean = clean?;
                    let ilo = inner.iter().flatten().map(|r| r.0).min()? + blo;
                    let ihi = inner.iter().flatten().map(|r| r.1).max()? + bhi;
                    let res = match (clean.0 < ilo, clean.1 > ihi) {
                        (true, false) => (clean.0, ilo),
                        (false, true) => (ihi, clean.1),
                        (true, true) => clean,
                        (false, false) => return None,
                    };
                    let lo = res.0 - blo;
                    Some((lo, (res.1 - bhi).max(lo)))
                };
                range[1] = residual(clean(xc0 + bhi), &range[2..2 + span]);
                range[n - 2] = residual(clean(xc1 + blo), &range[n - 2 - span..n - 2]);
            }
            // At a local extremum the min/max reading overshoots on the far
            // side; that end is really where the trace meets its neighbours.
            let raw = range.clone();
            for i in 2..n.saturating_sub(2) {
                if let (Some(p), Some(c), Some(nx)) = (raw[i - 1], raw[i], raw[i + 1]) {
                    let lo_by = p.0.min(nx.0) - c.0;
                    let hi_by = c.1 - p.1.max(nx.1);
                    if lo_by > 0 && hi_by < 0 {
                        range[i] = Some((c.0, c.1.min(p.0.max(nx.0)).max(c.0)));
                    } else if hi_by > 0 && lo_by < 0 {
                        range[i] = Some((c.0.max(p.1.min(nx.1)).min(c.1), c.1));
                    }
                }
            }
            // Polyline vertices sit on the sample grid. A column's ink ends
            // halfway between the straddling vertices, not at X ± 0.5.
            let step = pps / q.fs;
            let left_edge = |x: i64| -> f64 {
                let b = x as f64 - 0.5;
                if spec.antialias || step >= 1.0 {
                    return b;
                }
                let k = ((b - r.x0) / step).ceil();
                r.x0 + step * (k - 0.5)
            };
            // An end column holding a vertex of the adjacent segment mixes two
            // leads; drop it.
            let shared = |x: i64| {
                (x == xc0 && (r.x0 - step).round() as i64 == xc0)
                    || (x == xc1 && (x_last + step).round() as i64 == xc1)
            };
            for i in 1..range.len() - 1 {
                let Some((lo, hi)) = range[i] else { continue };
                let x = xc0 - 1 + i as i64;
                if shared(x) {
                    continue;
                }
                let (el, er) = (left_edge(x), left_edge(x + 1));
                let mid = (lo + hi) as f64 / 2.0;
                let (lo_f, hi_f) = (lo as f64, hi as f64);
                let (xf, half, mut pts) = ((el + er) / 2.0, (er - el) / 2.0, Vec::with_capacity(3));
                // neighbours outside the segment belong to another lead
                let prev = if x > xc0 { range[i - 1] } else { None };
                let next = if x < xc1 { range[i + 1] } else { None };
                match (prev, next) {
                    (Some(p), Some(n)) if hi - lo > 1 => {
                        // how far this column pokes past both neighbours
                        let lo_by = p.0.min(n.0) - lo;
                        let hi_by = hi - p.1.max(n.1);
                        let lo_ext = lo_by >= 0 && lo_by > hi_by;
                        let hi_ext = hi_by >= 0 && hi_by > lo_by;
                        let monotone = lo_by < 0 && hi_by < 0;
                        let vertex = |a: f64, b: f64| {
                            let t0 = if a + b > 0.0 { (a - b) / (2.0 * (a + b)) } else { 0.0 };
                            (t0, (a - b).powi(2) / 4.0)
                        };
                        if lo_ext && !hi_ext {
                            let (t0, rise) = vertex(((p.0 - lo) as f64).sqrt(), ((n.0 - lo) as f64).sqrt());
                            pts.push((xf + 2.0 * half * t0, lo_f));
                            if t0.abs() > 0.2 {
                                pts.push((xf, lo_f + rise));
                            }
                        } else if hi_ext && !lo_ext {
                            let (t0, drop) = vertex(((hi - p.1) as f64).sqrt(), ((hi - n.1) as f64).sqrt());
                            pts.push((xf + 2.0 * half * t0, hi_f));
                            if t0.abs() > 0.2 {
                                pts.push((xf, hi_f - drop));
                            }
                        } else if monotone {
                            // monotone: the range ends sit on the column edges
                            let rising = (p.0 + p.1) > (n.0 + n.1);
                            let (left, right) = if rising { (hi_f, lo_f) } else { (lo_f, hi_f) };
                            pts.push((el, left));
                            pts.push((er, right));
                        } else {
                            pts.push((xf, mid));
                        }
                    }
                    (Some(o), None) | (None, Some(o)) if hi - lo > 1 => {
                        let (lo_by, hi_by) = (o.0 - lo, hi - o.1);
                        if lo_by > 0 && hi_by < 0 {
                            pts.push((xf, lo_f));
                        } else if hi_by > 0 && lo_by < 0 {
                            pts.push((xf, hi_f));
                        } else {
                            // segment end: assume the trace runs straight on
                            let toward_low = (o.0 + o.1) < (lo + hi);
                            let (left, right) = if prev.is_some() == toward_low {
                                (lo_f, hi_f)
                            } else {
                                (hi_f, lo_f)
                            };
                            pts.push((el, left));
                            pts.push((er, right));
                        }
                    }
                    _ => pts.push((xf, mid)),
                }
                cols.extend(pts);
            }
            cols.sort_by(|a, b| a.0.total_cmp(&b.0));
            // shared column edges get two readings; average them
            let mut merged: Vec<(f64, f64, usize)> = Vec::with_capacity(cols.len());
            for &(x, y) in &cols {
                match merged.last_mut() {
                    Some(m) if x - m.0 / m.2 as f64 <= 0.2 => {
                        m.0 += x;
                        m.1 += y;
                        m.2 += 1;
                    }
                    _ => merged.push((x, y, 1)),
                }
            }
            cols = merged.into_iter().map(|(x, y, n)| (x / n as f64, y / n as f64)).collect();
        }
    }
    for c in cols.iter_mut() {
        c.1 = (q.baseline_px - c.1) / ppmv;
    }
    if cols.is_empty() {
        return Err(Error::EmptyTrace(format!("region {r:?}")));
    }

    Ok(resample_hermite(&cols, n_out, |k| r.x0 + pps * k as f64 / q.fs))
}

/// Cubic Hermite interpolation through sorted (x px, mV) knots, with
/// three-point slopes; long gaps (> 1.5 px) are bridged linearly. Past
/// either end the first/last value is held.
fn resample_hermite(knots: &[(f64, f64)], n: usize, x_of: impl Fn(usize) -> f64) -> Vec<f64> {
    let m = knots.len();
    let slope = |i: usize| -> f64 {
        if m < 2 {
            return 0.0;
        }
        let d = |a: usize, b: usize| (knots[b].1 - knots[a].1) / (knots[b].0 - knots[a].0);
        if i == 0 {
            d(0, 1)
        } else if i == m - 1 {
            d(m - 2, m - 1)
        } else {
            let (h0, h1) = (knots[i].0 - knots[i - 1].0, knots[i + 1].0 - knots[i].0);
            (d(i - 1, i) * h1 + d(i, i + 1) * h0) / (h0 + h1)
        }
    };
    let mut out = Vec::with_capacity(n);
    let mut j = 0usize;
    for k in 0..n {
        let x = x_of(k);
        while j + 1 < m && knots[j + 1].0 <= x {
            j += 1;
        }
        let v = if x <= knots[0].0 {
            knots[0].1
        } else if j + 1 >= m {
            knots[m - 1].1
        } else {
            let ((x0, y0), (x1, y1)) = (knots[j], knots[j + 1]);
            let h = x1 - x0;
            let t = (x - x0) / h;
            if h > 1.5 {
                y0 + (y1 - y0) * t
            } else {
                let (t2, t3) = (t * t, t * t * t);
                (2.0 * t3 - 3.0 * t2 + 1.0) * y0
                    + (t3 - 2.0 * t2 + t) * h * slope(j)
                    + (-2.0 * t3 + 3.0 * t2) * y1
                    + (t3 - t2) * h * slope(j + 1)
            }
        };
        out.push(v);
    }
    out
}

/// `10·log10(Σ ref² / Σ (ref − est)²)`; `+∞` when the error is zero.
pub fn snr_db(reference: &[f64], estimate: &[f64]) -> Result<f64> {
    check_lengths(reference, estimate)?;
    let signal: f64 = reference.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let noise: f64 = reference.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum();
    if noise == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// `(mse in mV², rmse in mV)`.
pub fn mse(reference: &[f64], estimate: &[f64]) -> Result<(f64, f64)> {
    check_lengths(reference, estimate)?;
    let m = reference.iter().zip(estimate).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / reference.len() as f64;
    Ok((m, m.sqrt()))
}

fn check_lengths(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::Size(format!("series lengths {} and {} (need equal, >= 1)", a.len(), b.len())));
    }
    Ok(())
}

/// Infinite SNR (exact reconstruction) is written as `null`.
mod inf_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadScore {
    pub record_id: String,
    pub lead: String,
    pub row: usize,
    pub col: usize,
    pub rhythm: bool,
    #[serde(with = "inf_as_null")]
    pub snr_db: f64,
    pub mse_mv2: f64,
    pub rmse_mv: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub low: f64,
    pub high: f64,
    pub count: usize,
}

/// Fixed-width SNR histogram. Bins start at the lowest finite value rounded
/// down to a multiple of `width`; infinite values land in the last bin.
pub fn snr_histogram(values: &[f64], width: f64) -> Result<Vec<HistogramBin>> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::param("bin_width_db", "must be > 0"));
    }
    let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    if values.is_empty() {
        return Ok(Vec::new());
    }
    let (lo, hi) = finite
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let first = if finite.is_empty() { 0.0 } else { (lo / width).floor() };
    let bins = if finite.is_empty() { 1 } else { ((hi / width).floor() - first) as usize + 1 };
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin {
            low: (first + i as f64) * width,
            high: (first + i as f64 + 1.0) * width,
            count: 0,
        })
        .collect();
    for &v in values {
        let i = if v.is_finite() {
            (((v / width).floor() - first) as usize).min(bins - 1)
        } else {
            bins - 1
        };
        out[i].count += 1;
    }
    Ok(out)
}

/// Mean and population standard deviation of the finite values. Values are
/// sorted before summation, so the result does not depend on input order.
pub fn finite_mean_std(values: &[f64]) -> (f64, f64) {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let mut d: Vec<f64> = v.iter().map(|x| (x - mean) * (x - mean)).collect();
    d.sort_by(f64::total_cmp);
    (mean, (d.iter().sum::<f64>() / n).sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub records: usize,
    pub leads: Vec<LeadScore>,
    /// Leads or records that could not be scored.
    pub failures: Vec<String>,
    pub mean_snr_db: f64,
    pub std_snr_db: f64,
    pub infinite_snr: usize,
    pub mean_mse_mv2: f64,
    pub mean_rmse_mv: f64,
    pub bin_width_db: f64,
    pub histogram: Vec<HistogramBin>,
}

impl EvalReport {
    pub fn from_scores(records: usize, leads: Vec<LeadScore>, failures: Vec<String>, bin_width_db: f64) -> Result<Self> {
        let snr: Vec<f64> = leads.iter().map(|l| l.snr_db).collect();
        let (mean_snr_db, std_snr_db) = finite_mean_std(&snr);
        let (mean_mse_mv2, _) = finite_mean_std(&leads.iter().map(|l| l.mse_mv2).collect::<Vec<_>>());
        let (mean_rmse_mv, _) = finite_mean_std(&leads.iter().map(|l| l.rmse_mv).collect::<Vec<_>>());
        Ok(Self {
            records,
            infinite_snr: snr.iter().filter(|v| v.is_infinite()).count(),
            histogram: snr_histogram(&snr, bin_width_db)?,
            leads,
            failures,
            mean_snr_db,
            std_snr_db,
            mean_mse_mv2,
            mean_rmse_mv,
            bin_width_db,
        })
    }

    pub fn write_histogram_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_low,bin_high,count")?;
        for b in &self.histogram {
            writeln!(w, "{},{},{}", b.low, b.high, b.count)?;
        }
        Ok(())
    }

    pub fn summary(&self) -> String {
        format!(
            "records {}  leads {}  failures {}\nsnr_db mean {:.2}  std {:.2}  (infinite {})\nmse_mv2 mean {:.6}  rmse_mv mean {:.4}\n",
            self.records,
            self.leads.len(),
            self.failures.len(),
            self.mean_snr_db,
            self.std_snr_db,
            self.infinite_snr,
            self.mean_mse_mv2,
            self.mean_rmse_mv
        )
    }
}

/// Score one generated image against its sidecar. A warped image is first
/// mapped back through the inverse of the stored matrix; artifact boxes act
/// as occluders. Leads that cannot be scored are returned as messages.
pub fn evaluate_image(img: &RasterImage, meta: &GroundTruthMeta) -> Result<(Vec<LeadScore>, Vec<String>)> {
    let spec = &meta.paper;
    if img.dims() != (spec.width_px, spec.height_px) {
        return Err(Error::Size(format!(
            "image {:?} does not match the sidecar page {}x{}",
            img.dims(),
            spec.width_px,
            spec.height_px
        )));
    }
    let flat;
    let page = if meta.matrix == Matrix3::IDENTITY {
        img
    } else {
        flat = warp_image(img, &meta.matrix.inverse()?, spec.bg_color)?;
        &flat
    };
    let mask = remove_grid(page, spec);
    let occluders: Vec<PixelRect> = meta.artifacts.iter().map(|a| a.bbox_px).collect();
    let mut scores = Vec::new();
    let mut failures = Vec::new();
    for l in &meta.leads {
        let q = TraceQuery {
            region: l.region,
            baseline_px: l.baseline_px,
            fs: l.fs,
            duration_s: l.samples_mv.len() as f64 / l.fs,
            occluders: occluders.clone(),
        };
        let scored = extract_trace(&mask, &q, spec).and_then(|est| {
            let snr = snr_db(&l.samples_mv, &est)?;
            let (m, r) = mse(&l.samples_mv, &est)?;
            Ok((snr, m, r))
        });
        match scored {
            Ok((snr_db, mse_mv2, rmse_mv)) => scores.push(LeadScore {
                record_id: meta.record_id.clone(),
                lead: l.lead.clone(),
                row: l.row,
                col: l.col,
                rhythm: l.rhythm,
                snr_db,
                mse_mv2,
                rmse_mv,
            }),
            Err(e) => failures.push(format!("{} {} (row {}, col {}): {e}", meta.record_id, l.lead, l.row, l.col)),
        }
    }
    Ok((scores, failures))
}

/// Score every `<id>.png` that has a `<id>.json` sidecar in `dir`.
pub fn evaluate_dir(dir: &Path, bin_width_db: f64) -> Result<EvalReport> {
    let mut sidecars: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.with_extension("png").is_file())
        .collect();
    sidecars.sort();
    if sidecars.is_empty() {
        return Err(Error::EmptyReport(format!("no image/sidecar pairs in {}", dir.display())));
    }
    let per_record: Vec<(Vec<LeadScore>, Vec<String>)> = sidecars
        .par_iter()
        .map(|p| {
            let run = || -> Result<_> {
                let meta = read_sidecar(p)?;
                let img = RasterImage::load(&p.with_extension("png"))?;
                evaluate_image(&img, &meta)
            };
            run().unwrap_or_else(|e| (Vec::new(), vec![format!("{}: {e}", p.display())]))
        })
        .collect();
    let mut leads = Vec::new();
    let mut failures = Vec::new();
    for (s, f) in per_record {
        leads.extend(s);
        failures.extend(f);
    }
    EvalReport::from_scores(sidecars.len(), leads, failures, bin_width_db)
}
