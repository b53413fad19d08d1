//! Sensor-effect chain: optics blur, detector sampling, detector noise.
//!
//! The chain runs in the fixed physical order blur -> sample -> noise. The
//! blur models the system MTF as a single-parameter Gaussian PSF; sampling is
//! integrate-then-decimate over square blocks; noise is additive white
//! Gaussian in gray levels. Quantization to integers happens only at export
//! ([`quantize`]), never inside the chain.

use crate::error::{Error, Result};
use crate::imaging::RadiometricImage;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Parameters of the sensor chain. The defaults are a transparent sensor
/// (no blur, native sampling, no noise, 16-bit export).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    /// Standard deviation of the Gaussian PSF in pixels; 0 disables blur.
    #[serde(rename = "mtf_sigma_px")]
    pub mtf_sigma: f64,
    /// Detector sampling factor; each output pixel integrates a factor x factor block.
    pub sampling_factor: u32,
    /// Additive white Gaussian noise std in gray levels; 0 disables noise.
    #[serde(rename = "noise_sigma_gl")]
    pub noise_sigma: f64,
    /// Output bit depth used by [`quantize`] at export.
    #[serde(rename = "quantization_bits")]
    pub quantization_bits: u32,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            mtf_sigma: 0.0,
            sampling_factor: 1,
            noise_sigma: 0.0,
            quantization_bits: 16,
        }
    }
}

impl SensorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mtf_sigma.is_finite() && self.mtf_sigma >= 0.0) {
            return Err(Error::ConfigError(format!(
                "mtf_sigma must be >= 0, got {}",
                self.mtf_sigma
            )));
        }
        if self.sampling_factor == 0 {
            return Err(Error::ConfigError("sampling_factor must be >= 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::ConfigError(format!(
                "noise_sigma must be >= 0, got {}",
                self.noise_sigma
            )));
        }
        if self.quantization_bits == 0 || self.quantization_bits > 16 {
            return Err(Error::ConfigError(format!(
                "quantization_bits must lie in 1..=16, got {}",
                self.quantization_bits
            )));
        }
        Ok(())
    }

    /// True when the whole chain is the identity (ignoring quantization).
    pub fn is_identity(&self) -> bool {
        self.mtf_sigma == 0.0 && self.sampling_factor == 1 && self.noise_sigma == 0.0
    }
}

/// Normalized 1D Gaussian kernel truncated at +/- 4 sigma.
fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let total: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= total;
    }
    taps
}

/// Symmetric (half-sample) reflection of an out-of-range index.
#[inline]
fn reflect_index(mut i: i64, n: i64) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - 1 - i;
        } else {
            return i as usize;
        }
    }
}

/// Blur with a normalized Gaussian PSF of the given sigma (pixels).
///
/// The kernel is truncated at +/- 4 sigma and applied separably with
/// mirror-reflect boundary handling, which preserves both total flux on
/// interior-supported inputs and the image mean.
pub fn apply_mtf(img: &RadiometricImage, mtf_sigma: f64) -> Result<RadiometricImage> {
    if !(mtf_sigma.is_finite() && mtf_sigma >= 0.0) {
        return Err(Error::ValueError(format!(
            "mtf_sigma must be >= 0, got {mtf_sigma}"
        )));
    }
    if mtf_sigma == 0.0 {
        return Ok(img.clone());
    }
    let taps = gaussian_kernel(mtf_sigma);
    let radius = (taps.len() / 2) as i64;
    let w = img.width() as i64;
    let h = img.height() as i64;
    let src = img.samples();

    // horizontal pass
    let mut rows = vec![0.0f64; src.len()];
    for y in 0..h {
        let row = &src[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                let sx = reflect_index(x + t as i64 - radius, w);
                acc += tap * row[sx];
            }
            rows[(y * w + x) as usize] = acc;
        }
    }
    // vertical pass
    let mut out = vec![0.0f64; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (t, &tap) in taps.iter().enumerate() {
                let sy = reflect_index(y + t as i64 - radius, h);
                acc += tap * rows[sy * w as usize + x as usize];
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    Ok(RadiometricImage::from_parts(img.width(), img.height(), out))
}

/// Integrate-then-decimate sampling: each output pixel is the mean of its
/// factor x factor input block. Trailing rows/columns that do not fill a
/// block are dropped.
pub fn subsample(img: &RadiometricImage, factor: u32) -> Result<RadiometricImage> {
    if factor == 0 {
        return Err(Error::ValueError("sampling factor must be >= 1".into()));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let out_w = img.width() / factor;
    let out_h = img.height() / factor;
    if out_w == 0 || out_h == 0 {
        return Err(Error::TargetTooSmall(
            (img.width().min(img.height()) as f64 / factor as f64).powi(2),
        ));
    }
    let inv = 1.0 / (factor as f64 * factor as f64);
    let mut samples = Vec::with_capacity(out_w as usize * out_h as usize);
    for oy in 0..out_h {
        for ox in 0..out_w {
            let mut acc = 0.0;
            for dy in 0..factor {
                for dx in 0..factor {
                    acc += img.sample(ox * factor + dx, oy * factor + dy);
                }
            }
            samples.push(acc * inv);
        }
    }
    Ok(RadiometricImage::from_parts(out_w, out_h, samples))
}

/// Add zero-mean white Gaussian noise of the given std (gray levels).
pub fn add_noise<R: Rng + ?Sized>(
    img: &RadiometricImage,
    noise_sigma: f64,
    rng: &mut R,
) -> Result<RadiometricImage> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::ValueError(format!(
            "noise_sigma must be >= 0, got {noise_sigma}"
        )));
    }
    if noise_sigma == 0.0 {
        return Ok(img.clone());
    }
    let samples = img
        .samples()
        .iter()
        .map(|&v| v + noise_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(RadiometricImage::from_parts(
        img.width(),
        img.height(),
        samples,
    ))
}

/// The full chain: blur, then sampling, then noise.
pub fn apply_sensor<R: Rng + ?Sized>(
    img: &RadiometricImage,
    cfg: &SensorConfig,
    rng: &mut R,
) -> Result<RadiometricImage> {
    cfg.validate()?;
    let blurred = apply_mtf(img, cfg.mtf_sigma)?;
    let sampled = subsample(&blurred, cfg.sampling_factor)?;
    add_noise(&sampled, cfg.noise_sigma, rng)
}

/// Export-time quantization: clamp to `[0, 2^bits - 1]` and round to nearest.
/// The result is still carried as reals; integer storage is the writer's job.
pub fn quantize(img: &RadiometricImage, bits: u32) -> Result<RadiometricImage> {
    if bits == 0 || bits > 16 {
        return Err(Error::ValueError(format!(
            "quantization bits must lie in 1..=16, got {bits}"
        )));
    }
    let max = ((1u32 << bits) - 1) as f64;
    let samples = img
        .samples()
        .iter()
        .map(|&v| v.clamp(0.0, max).round())
        .collect();
    Ok(RadiometricImage::from_parts(
        img.width(),
        img.height(),
        samples,
    ))
}
