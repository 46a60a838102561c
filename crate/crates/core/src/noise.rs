//! Acquisition noise and colour-temperature tint.
//!
//! Stochastic operators process the image in bands of [`BAND_ROWS`] rows, each
//! with its own substream of the seed, so the output is identical for any
//! number of worker threads.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::RasterImage;
use crate::rng::{rng_from, substream};

pub const BAND_ROWS: usize = 32;

pub const KELVIN_MIN: f64 = 1000.0;
pub const KELVIN_MAX: f64 = 40000.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TintOrientation {
    /// Low temperatures tint blue, high temperatures tint orange.
    #[default]
    Inverted,
    /// Blackbody orientation: low temperatures are orange.
    Physical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    pub gaussian_eta: f64,
    pub poisson_lambda: f64,
    pub poisson_centered: bool,
    pub sp_p: f64,
    pub kelvin: Option<f64>,
    pub orientation: TintOrientation,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gaussian_eta: 0.0,
            poisson_lambda: 0.0,
            poisson_centered: true,
            sp_p: 0.0,
            kelvin: None,
            orientation: TintOrientation::Inverted,
        }
    }
}

impl NoiseSpec {
    pub fn validate(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| format!("{prefix}.{name}");
        if !(self.gaussian_eta.is_finite() && self.gaussian_eta >= 0.0) {
            return Err(Error::param(f("gaussian_eta"), "must be >= 0"));
        }
        if !(self.poisson_lambda.is_finite() && self.poisson_lambda >= 0.0) {
            return Err(Error::param(f("poisson_lambda"), "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.sp_p) {
            return Err(Error::param(f("sp_p"), "must be in [0, 1]"));
        }
        if let Some(k) = self.kelvin {
            if !(KELVIN_MIN..=KELVIN_MAX).contains(&k) {
                return Err(Error::param(f("kelvin"), "must be in [1000, 40000]"));
            }
        }
        Ok(())
    }
}

fn per_band(img: &RasterImage, seed: u64, f: impl Fn(&mut ChaCha8Rng, &mut [u8]) + Sync) -> RasterImage {
    let mut out = img.clone();
    let stride = img.width() as usize * 3;
    if stride == 0 {
        return out;
    }
    out.as_raw_mut()
        .par_chunks_mut(stride * BAND_ROWS)
        .enumerate()
        .for_each(|(band, chunk)| {
            let mut rng = rng_from(substream(seed, band as u64));
            f(&mut rng, chunk);
        });
    out
}

#[inline]
fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// `out = clamp(round(in + N(0, η)))`, one draw per channel.
pub fn add_gaussian_noise(img: &RasterImage, eta: f64, seed: u64) -> Result<RasterImage> {
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::param("imaging.gaussian_eta", "must be >= 0"));
    }
    if eta == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, eta).map_err(|e| Error::param("imaging.gaussian_eta", e.to_string()))?;
    Ok(per_band(img, seed, |rng, px| {
        for v in px {
            *v = clamp_u8(*v as f64 + normal.sample(rng));
        }
    }))
}

/// `out = clamp(in + Pois(λ))`, or `clamp(in + Pois(λ) − round(λ))` when
/// `centered`.
pub fn add_poisson_noise(img: &RasterImage, lambda: f64, centered: bool, seed: u64) -> Result<RasterImage> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::param("imaging.poisson_lambda", "must be >= 0"));
    }
    if lambda == 0.0 {
        return Ok(img.clone());
    }
    let pois = Poisson::new(lambda).map_err(|e| Error::param("imaging.poisson_lambda", e.to_string()))?;
    let shift = if centered { lambda.round() } else { 0.0 };
    Ok(per_band(img, seed, |rng, px| {
        for v in px {
            let k: f64 = pois.sample(rng);
            *v = clamp_u8(*v as f64 + k - shift);
        }
    }))
}

/// Whole-pixel salt and pepper: black with probability p/2, white with p/2.
pub fn add_salt_pepper(img: &RasterImage, p: f64, seed: u64) -> Result<RasterImage> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("imaging.sp_p", "must be in [0, 1]"));
    }
    if p == 0.0 {
        return Ok(img.clone());
    }
    Ok(per_band(img, seed, |rng, px| {
        for c in px.chunks_exact_mut(3) {
            let u: f64 = rng.gen();
            if u < p / 2.0 {
                c.fill(0);
            } else if u < p {
                c.fill(255);
            }
        }
    }))
}

/// Blackbody white point on the 0..255 scale, piecewise fit:
///
/// | channel | T = K/100 ≤ 66                   | T > 66                            |
/// |---------|----------------------------------|-----------------------------------|
/// | R       | 255                              | 329.698727446·(T−60)^−0.1332047592 |
/// | G       | 99.4708025861·ln T − 161.1195681661 | 288.1221695283·(T−60)^−0.0755148492 |
/// | B       | 0 if T ≤ 19, else 138.5177312231·ln(T−10) − 305.0447927307 | 255 |
///
/// Each channel is clamped to [0, 255].
pub fn kelvin_to_rgb(kelvin: f64) -> [f64; 3] {
    let t = kelvin / 100.0;
    let r = if t <= 66.0 {
        255.0
    } else {
        329.698727446 * (t - 60.0).powf(-0.1332047592)
    };
    let g = if t <= 66.0 {
        99.4708025861 * t.ln() - 161.1195681661
    } else {
        288.1221695283 * (t - 60.0).powf(-0.0755148492)
    };
    let b = if t >= 66.0 {
        255.0
    } else if t <= 19.0 {
        0.0
    } else {
        138.5177312231 * (t - 10.0).ln() - 305.0447927307
    };
    [r, g, b].map(|v| v.clamp(0.0, 255.0))
}

/// Per-channel gains: the white point normalized to max 1, with R and B
/// swapped under [`TintOrientation::Inverted`].
pub fn tint_factors(kelvin: f64, orientation: TintOrientation) -> Result<[f64; 3]> {
    if !(KELVIN_MIN..=KELVIN_MAX).contains(&kelvin) {
        return Err(Error::param("imaging.kelvin", format!("{kelvin} outside [1000, 40000]")));
    }
    let rgb = kelvin_to_rgb(kelvin);
    let max = rgb.iter().cloned().fold(0.0, f64::max);
    let [r, g, b] = rgb.map(|v| v / max);
    Ok(match orientation {
        TintOrientation::Physical => [r, g, b],
        TintOrientation::Inverted => [b, g, r],
    })
}

pub fn apply_color_temperature(img: &RasterImage, kelvin: f64, orientation: TintOrientation) -> Result<RasterImage> {
    let k = tint_factors(kelvin, orientation)?;
    let mut out = img.clone();
    out.as_raw_mut().par_chunks_mut(3).for_each(|px| {
        for c in 0..3 {
            px[c] = clamp_u8(px[c] as f64 * k[c]);
        }
    });
    Ok(out)
}

/// Tint, then Gaussian, Poisson and salt-and-pepper noise, each from its own
/// substream of `seed`.
pub fn apply_noise(img: &RasterImage, spec: &NoiseSpec, seed: u64) -> Result<RasterImage> {
    spec.validate("imaging")?;
    let mut out = match spec.kelvin {
        Some(k) => apply_color_temperature(img, k, spec.orientation)?,
        None => img.clone(),
    };
    out = add_gaussian_noise(&out, spec.gaussian_eta, substream(seed, 1))?;
    out = add_poisson_noise(&out, spec.poisson_lambda, spec.poisson_centered, substream(seed, 2))?;
    add_salt_pepper(&out, spec.sp_p, substream(seed, 3))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(v: u8) -> RasterImage {
        RasterImage::new(400, 300, [v, v, v])
    }

    fn stats(img: &RasterImage, ch: usize) -> (f64, f64) {
        let vals: Vec<f64> = img.as_raw().chunks_exact(3).map(|p| p[ch] as f64).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var.sqrt())
    }

    fn rb_ratio(img: &RasterImage) -> f64 {
        let m = img.channel_means();
        m[0] / m[2]
    }

    fn colorful() -> RasterImage {
        let mut img = RasterImage::new(40, 30, [0, 0, 0]);
        for y in 0..30 {
            for x in 0..40 {
                img.put(x, y, [(100 + 3 * x) as u8, 150, (90 + 4 * y) as u8]);
            }
        }
        img
    }

    #[test]
    fn zero_parameters_are_identity() {
        let img = colorful();
        assert_eq!(add_gaussian_noise(&img, 0.0, 1).unwrap(), img);
        assert_eq!(add_poisson_noise(&img, 0.0, false, 1).unwrap(), img);
        assert_eq!(add_salt_pepper(&img, 0.0, 1).unwrap(), img);
        assert_eq!(apply_noise(&img, &NoiseSpec::default(), 1).unwrap(), img);
    }

    #[test]
    fn gaussian_std_and_mean() {
        let out = add_gaussian_noise(&flat(128), 10.0, 42).unwrap();
        for ch in 0..3 {
            let (mean, sd) = stats(&out, ch);
            assert!((9.5..=10.5).contains(&sd), "sd {sd}");
            assert!((mean - 128.0).abs() < 0.2, "mean {mean}");
        }
    }

    #[test]
    fn poisson_literal_and_centered_means() {
        let (lit, _) = stats(&add_poisson_noise(&flat(100), 5.0, false, 3).unwrap(), 1);
        let (cen, _) = stats(&add_poisson_noise(&flat(100), 5.0, true, 3).unwrap(), 1);
        assert!((lit - 105.0).abs() < 0.2, "{lit}");
        assert!((cen - 100.0).abs() < 0.2, "{cen}");
    }

    #[test]
    fn salt_pepper_rates() {
        let img = flat(128);
        let all = add_salt_pepper(&img, 1.0, 9).unwrap();
        assert!(all.as_raw().chunks_exact(3).all(|p| p == [0, 0, 0] || p == [255, 255, 255]));
        let out = add_salt_pepper(&img, 0.1, 9).unwrap();
        let n = (img.width() * img.height()) as f64;
        let changed = out.as_raw().chunks_exact(3).filter(|p| p[0] != 128).count() as f64;
        let sigma = (n * 0.1 * 0.9).sqrt();
        assert!((changed - 0.1 * n).abs() <= 3.0 * sigma, "{changed}");
        // channels move together
        assert!(out.as_raw().chunks_exact(3).all(|p| p[0] == p[1] && p[1] == p[2]));
    }

    #[test]
    fn deterministic_and_seed_sensitive() {
        let img = flat(128);
        let a = add_gaussian_noise(&img, 5.0, 11).unwrap();
        assert_eq!(a, add_gaussian_noise(&img, 5.0, 11).unwrap());
        assert_ne!(a, add_gaussian_noise(&img, 5.0, 12).unwrap());
        let p = add_poisson_noise(&img, 3.0, true, 11).unwrap();
        assert_eq!(p, add_poisson_noise(&img, 3.0, true, 11).unwrap());
        let s = add_salt_pepper(&img, 0.2, 11).unwrap();
        assert_eq!(s, add_salt_pepper(&img, 0.2, 11).unwrap());
    }

    #[test]
    fn worker_count_invariance() {
        let img = colorful().resize_bilinear(300, 257);
        let spec = NoiseSpec {
            gaussian_eta: 4.0,
            poisson_lambda: 2.0,
            sp_p: 0.05,
            kelvin: Some(5000.0),
            ..NoiseSpec::default()
        };
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| apply_noise(&img, &spec, 77).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn white_point_is_neutral() {
        for o in [TintOrientation::Inverted, TintOrientation::Physical] {
            let k = tint_factors(6600.0, o).unwrap();
            assert!(k.iter().all(|v| (v - 1.0).abs() <= 0.02), "{k:?}");
        }
    }

    #[test]
    fn tint_direction() {
        let img = colorful();
        let base = rb_ratio(&img);
        let cold = apply_color_temperature(&img, 1000.0, TintOrientation::Inverted).unwrap();
        let m = cold.channel_means();
        assert!(m[2] / m[0] > img.channel_means()[2] / img.channel_means()[0]);
        let warm = apply_color_temperature(&img, 40000.0, TintOrientation::Inverted).unwrap();
        assert!(rb_ratio(&warm) > base);
        let phys = apply_color_temperature(&img, 2000.0, TintOrientation::Physical).unwrap();
        assert!(rb_ratio(&phys) > base);
    }

    #[test]
    fn kelvin_range_checked() {
        let img = colorful();
        assert!(matches!(
            apply_color_temperature(&img, 999.0, TintOrientation::Inverted),
            Err(Error::Parameter { .. })
        ));
        assert!(apply_color_temperature(&img, 40001.0, TintOrientation::Inverted).is_err());
    }

    #[test]
    fn tint_ratio_monotone_in_kelvin() {
        let img = colorful();
        let mut prev = f64::NEG_INFINITY;
        let mut k = 1000.0;
        while k <= 40000.0 {
            let r = rb_ratio(&apply_color_temperature(&img, k, TintOrientation::Inverted).unwrap());
            assert!(r >= prev - 1e-12, "k={k}: {r} < {prev}");
            prev = r;
            k += 250.0;
        }
    }

    #[test]
    fn spec_validation_names_field() {
        let bad = NoiseSpec {
            sp_p: 1.5,
            ..NoiseSpec::default()
        };
        match bad.validate("imaging") {
            Err(Error::Parameter { field, .. }) => assert_eq!(field, "imaging.sp_p"),
            other => panic!("{other:?}"),
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(48))]
            #[test]
            fn outputs_stay_valid(
                v in any::<[u8; 3]>(),
                eta in 0.0..80.0f64,
                lambda in 0.0..60.0f64,
                centered in any::<bool>(),
                p in 0.0..=1.0f64,
                kelvin in prop::option::of(1000.0..=40000.0f64),
                seed in any::<u64>(),
            ) {
                let img = RasterImage::new(17, 40, v);
                let spec = NoiseSpec { gaussian_eta: eta, poisson_lambda: lambda, poisson_centered: centered, sp_p: p, kelvin, ..NoiseSpec::default() };
                let a = apply_noise(&img, &spec, seed).unwrap();
                prop_assert_eq!(a.dims(), img.dims());
                prop_assert_eq!(&a, &apply_noise(&img, &spec, seed).unwrap());
            }
        }
    }
}
