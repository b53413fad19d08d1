//! Intra-target thermal variability.
//!
//! A vehicle signature is stored as two chips: `ambient` (engine off, vehicle
//! cold) and `operating` (everything running at temperature). The vehicle is
//! segmented into five regions with independent thermal behaviour (engine,
//! body, exhaust, windows, running gear). An intermediate state blends the two
//! chips per region:
//!
//! ```text
//! out(p) = (1 - lambda_R) * ambient(p) + lambda_R * operating(p)
//! ```
//!
//! with one blend coefficient `lambda_R` per region, drawn from a
//! mode-dependent truncated Gaussian:
//!
//! * ambient mode:      lambda in [0, 0.1],  half-Gaussian at 0,   sigma = 1/30
//! * intermediate mode: lambda in ]0.1, 0.9[, Gaussian at 0.5,     sigma = 2/15
//! * operating mode:    lambda in [0.9, 1],  half-Gaussian at 1,   sigma = 1/30
//!
//! Each sigma satisfies `3 * sigma = half-width of its interval`, so at least
//! 99% of the untruncated mass already lies inside; rejection sampling
//! therefore accepts >= 99% of draws on average.

use crate::error::{Error, Result};
use crate::imaging::{RadiometricImage, RegionMask};
use crate::seed;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// The five vehicle sub-regions with independent thermal behaviour.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(rename_all = "snake_case")]
pub enum VehicleRegion {
    Engine,
    Body,
    Exhaust,
    Windows,
    RunningGear,
}

impl VehicleRegion {
    pub const ALL: [VehicleRegion; 5] = [
        VehicleRegion::Engine,
        VehicleRegion::Body,
        VehicleRegion::Exhaust,
        VehicleRegion::Windows,
        VehicleRegion::RunningGear,
    ];

    /// Raster code used in region-map files (0 is reserved for "none").
    pub fn code(self) -> u8 {
        match self {
            VehicleRegion::Engine => 1,
            VehicleRegion::Body => 2,
            VehicleRegion::Exhaust => 3,
            VehicleRegion::Windows => 4,
            VehicleRegion::RunningGear => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<VehicleRegion> {
        Self::ALL.into_iter().find(|r| r.code() == code)
    }

    pub fn name(self) -> &'static str {
        match self {
            VehicleRegion::Engine => "engine",
            VehicleRegion::Body => "body",
            VehicleRegion::Exhaust => "exhaust",
            VehicleRegion::Windows => "windows",
            VehicleRegion::RunningGear => "running_gear",
        }
    }
}

/// Per-pixel region labels for a signature view. Code 0 means "no region"
/// (outside the silhouette).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    width: u32,
    height: u32,
    codes: Vec<u8>,
}

impl RegionMap {
    pub fn new(width: u32, height: u32, codes: Vec<u8>) -> Result<Self> {
        if codes.len() != width as usize * height as usize {
            return Err(Error::ValueError(format!(
                "region map length {} does not match {width}x{height}",
                codes.len()
            )));
        }
        if let Some(bad) = codes.iter().find(|&&c| c > 5) {
            return Err(Error::ValueError(format!(
                "region map contains invalid code {bad} (valid range 0..=5)"
            )));
        }
        Ok(Self {
            width,
            height,
            codes,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn codes(&self) -> &[u8] {
        &self.codes
    }

    #[inline]
    pub fn label(&self, x: u32, y: u32) -> Option<VehicleRegion> {
        VehicleRegion::from_code(self.codes[y as usize * self.width as usize + x as usize])
    }
}

/// Thermal state of one region: which interval its blend coefficient lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThermalMode {
    /// Cold region, lambda in [0, 0.1].
    Ambient,
    /// Warming/cooling region, lambda in ]0.1, 0.9[.
    Intermediate,
    /// Hot region, lambda in [0.9, 1].
    Operating,
}

impl ThermalMode {
    /// Does `lambda` lie in this mode's interval? The extreme intervals are
    /// closed, the intermediate one is open.
    pub fn contains(self, lambda: f64) -> bool {
        match self {
            ThermalMode::Ambient => (0.0..=0.1).contains(&lambda),
            ThermalMode::Intermediate => lambda > 0.1 && lambda < 0.9,
            ThermalMode::Operating => (0.9..=1.0).contains(&lambda),
        }
    }
}

/// Sigma of the half-Gaussians at the interval extremes (3*sigma = 0.1).
pub const SIGMA_EXTREME: f64 = 1.0 / 30.0;
/// Sigma of the centered intermediate Gaussian (3*sigma = 0.4).
pub const SIGMA_INTERMEDIATE: f64 = 2.0 / 15.0;

/// The truncated-Gaussian law of the blend coefficient for one mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaLaw {
    pub mode: ThermalMode,
    pub center: f64,
    pub sigma: f64,
}

impl LambdaLaw {
    pub fn for_mode(mode: ThermalMode) -> LambdaLaw {
        match mode {
            ThermalMode::Ambient => LambdaLaw {
                mode,
                center: 0.0,
                sigma: SIGMA_EXTREME,
            },
            ThermalMode::Intermediate => LambdaLaw {
                mode,
                center: 0.5,
                sigma: SIGMA_INTERMEDIATE,
            },
            ThermalMode::Operating => LambdaLaw {
                mode,
                center: 1.0,
                sigma: SIGMA_EXTREME,
            },
        }
    }

    /// One draw, resampling until the value lands in the mode interval.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_counted(rng).0
    }

    /// One draw plus the number of attempts the rejection loop needed.
    pub fn sample_counted<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, u32) {
        let mut attempts = 0u32;
        loop {
            attempts += 1;
            let z: f64 = rng.sample(StandardNormal);
            let lambda = match self.mode {
                // folding the Gaussian about its endpoint gives the half-Gaussian
                ThermalMode::Ambient => (self.sigma * z).abs(),
                ThermalMode::Operating => 1.0 - (self.sigma * z).abs(),
                ThermalMode::Intermediate => 0.5 + self.sigma * z,
            };
            if self.mode.contains(lambda) {
                return (lambda, attempts);
            }
        }
    }
}

/// Draw one blend coefficient for the given thermal mode.
pub fn sample_lambda<R: Rng + ?Sized>(mode: ThermalMode, rng: &mut R) -> f64 {
    LambdaLaw::for_mode(mode).sample(rng)
}

/// Thermal mode of each of the five regions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionModes {
    pub engine: ThermalMode,
    pub body: ThermalMode,
    pub exhaust: ThermalMode,
    pub windows: ThermalMode,
    pub running_gear: ThermalMode,
}

impl RegionModes {
    pub fn uniform(mode: ThermalMode) -> Self {
        Self {
            engine: mode,
            body: mode,
            exhaust: mode,
            windows: mode,
            running_gear: mode,
        }
    }

    pub fn get(&self, region: VehicleRegion) -> ThermalMode {
        match region {
            VehicleRegion::Engine => self.engine,
            VehicleRegion::Body => self.body,
            VehicleRegion::Exhaust => self.exhaust,
            VehicleRegion::Windows => self.windows,
            VehicleRegion::RunningGear => self.running_gear,
        }
    }
}

/// A named assignment of thermal modes to all five regions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperatingConfiguration {
    pub name: String,
    pub modes: RegionModes,
}

impl OperatingConfiguration {
    /// Built-in configurations covering the usual employment situations.
    pub fn builtin(name: &str) -> Option<OperatingConfiguration> {
        let modes = match name {
            "cold" => RegionModes::uniform(ThermalMode::Ambient),
            "operating" => RegionModes::uniform(ThermalMode::Operating),
            // parked with the engine running: only engine and exhaust are hot
            "stationary_engine_running" => RegionModes {
                engine: ThermalMode::Operating,
                exhaust: ThermalMode::Operating,
                body: ThermalMode::Ambient,
                windows: ThermalMode::Ambient,
                running_gear: ThermalMode::Ambient,
            },
            // on the move: drive train hot, body warming, windows cold
            "moving" => RegionModes {
                engine: ThermalMode::Operating,
                exhaust: ThermalMode::Operating,
                running_gear: ThermalMode::Operating,
                body: ThermalMode::Intermediate,
                windows: ThermalMode::Ambient,
            },
            _ => return None,
        };
        Some(OperatingConfiguration {
            name: name.to_string(),
            modes,
        })
    }

    pub fn builtin_names() -> [&'static str; 4] {
        ["cold", "operating", "stationary_engine_running", "moving"]
    }
}

/// Blend coefficients per region. May be partial when hand-built; a draw from
/// [`assign_lambdas`] always covers all five regions.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LambdaMap(BTreeMap<VehicleRegion, f64>);

impl LambdaMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, region: VehicleRegion, lambda: f64) {
        self.0.insert(region, lambda);
    }

    pub fn get(&self, region: VehicleRegion) -> Option<f64> {
        self.0.get(&region).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VehicleRegion, f64)> + '_ {
        self.0.iter().map(|(&r, &l)| (r, l))
    }
}

/// One independent draw per region, each from its assigned mode's law.
/// Regions are drawn in the fixed order of [`VehicleRegion::ALL`] so a seeded
/// stream reproduces the same map.
pub fn assign_lambdas<R: Rng + ?Sized>(config: &OperatingConfiguration, rng: &mut R) -> LambdaMap {
    let mut map = LambdaMap::new();
    for region in VehicleRegion::ALL {
        map.insert(region, sample_lambda(config.modes.get(region), rng));
    }
    map
}

/// One 2D view of a vehicle: the two extreme-state chips, the region labels,
/// the silhouette, and identification metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalSignature {
    vehicle_id: String,
    aspect_azimuth_deg: f64,
    ambient: RadiometricImage,
    operating: RadiometricImage,
    regions: RegionMap,
    silhouette: RegionMask,
    present: [bool; 5],
}

impl ThermalSignature {
    /// Validate and build a signature. Every silhouette pixel must carry one
    /// of the five region labels and every exterior pixel must carry none.
    pub fn new(
        vehicle_id: impl Into<String>,
        aspect_azimuth_deg: f64,
        ambient: RadiometricImage,
        operating: RadiometricImage,
        regions: RegionMap,
        silhouette: RegionMask,
    ) -> Result<Self> {
        let (w, h) = (ambient.width(), ambient.height());
        if operating.width() != w || operating.height() != h {
            return Err(Error::ShapeError {
                context: "signature operating chip",
                expected_w: w,
                expected_h: h,
                actual_w: operating.width(),
                actual_h: operating.height(),
            });
        }
        if regions.width() != w || regions.height() != h {
            return Err(Error::ShapeError {
                context: "signature region map",
                expected_w: w,
                expected_h: h,
                actual_w: regions.width(),
                actual_h: regions.height(),
            });
        }
        if silhouette.width() != w || silhouette.height() != h {
            return Err(Error::ShapeError {
                context: "signature silhouette",
                expected_w: w,
                expected_h: h,
                actual_w: silhouette.width(),
                actual_h: silhouette.height(),
            });
        }
        let mut present = [false; 5];
        for y in 0..h {
            for x in 0..w {
                match (silhouette.get(x, y), regions.label(x, y)) {
                    (true, Some(r)) => present[r as usize] = true,
                    (true, None) => {
                        return Err(Error::ValueError(format!(
                            "silhouette pixel ({x},{y}) has no region label"
                        )))
                    }
                    (false, Some(_)) => {
                        return Err(Error::ValueError(format!(
                            "pixel ({x},{y}) outside the silhouette carries a region label"
                        )))
                    }
                    (false, None) => {}
                }
            }
        }
        if !(aspect_azimuth_deg.is_finite()) {
            return Err(Error::ValueError("aspect azimuth must be finite".into()));
        }
        Ok(Self {
            vehicle_id: vehicle_id.into(),
            aspect_azimuth_deg: aspect_azimuth_deg.rem_euclid(360.0),
            ambient,
            operating,
            regions,
            silhouette,
            present,
        })
    }

    pub fn vehicle_id(&self) -> &str {
        &self.vehicle_id
    }

    /// View azimuth in [0, 360): 0 is frontal, angles grow clockwise.
    pub fn aspect_azimuth_deg(&self) -> f64 {
        self.aspect_azimuth_deg
    }

    pub fn ambient(&self) -> &RadiometricImage {
        &self.ambient
    }

    pub fn operating(&self) -> &RadiometricImage {
        &self.operating
    }

    pub fn regions(&self) -> &RegionMap {
        &self.regions
    }

    pub fn silhouette(&self) -> &RegionMask {
        &self.silhouette
    }

    /// Regions that actually appear in this view.
    pub fn regions_present(&self) -> impl Iterator<Item = VehicleRegion> + '_ {
        VehicleRegion::ALL
            .into_iter()
            .filter(|&r| self.present[r as usize])
    }

    pub fn width(&self) -> u32 {
        self.ambient.width()
    }

    pub fn height(&self) -> u32 {
        self.ambient.height()
    }
}

/// Blend the two extreme-state chips into an intermediate-state chip.
///
/// Pixels outside the silhouette are set to zero; they are transparent and
/// only the silhouette decides what gets painted at composition. `lambdas`
/// must cover every region present in the view. The endpoints reproduce the
/// source chips bit-exactly, and every blended value is clamped into
/// `[min(ta, tf), max(ta, tf)]`.
pub fn synthesize_signature(
    sig: &ThermalSignature,
    lambdas: &LambdaMap,
) -> Result<RadiometricImage> {
    let mut lut = [0.0f64; 6];
    for region in sig.regions_present() {
        let lambda = lambdas.get(region).ok_or_else(|| {
            Error::ConfigError(format!(
                "no blend coefficient for region '{}'",
                region.name()
            ))
        })?;
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::ValueError(format!(
                "lambda for region '{}' must lie in [0, 1], got {lambda}",
                region.name()
            )));
        }
        lut[region.code() as usize] = lambda;
    }
    let w = sig.width();
    let h = sig.height();
    let mut samples = vec![0.0f64; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            if !sig.silhouette.get(x, y) {
                continue;
            }
            let code = sig.regions.codes()[y as usize * w as usize + x as usize];
            let lambda = lut[code as usize];
            let ta = sig.ambient.sample(x, y);
            let tf = sig.operating.sample(x, y);
            let v = if lambda == 0.0 {
                ta
            } else if lambda == 1.0 {
                tf
            } else {
                ((1.0 - lambda) * ta + lambda * tf).clamp(ta.min(tf), ta.max(tf))
            };
            samples[y as usize * w as usize + x as usize] = v;
        }
    }
    Ok(RadiometricImage::from_parts(w, h, samples))
}

/// One synthesized variant of a signature, with full provenance.
#[derive(Debug, Clone)]
pub struct SignatureVariant {
    pub vehicle_id: String,
    pub aspect_azimuth_deg: f64,
    pub configuration: String,
    pub variant_index: u32,
    pub seed: u64,
    pub lambdas: LambdaMap,
    pub chip: RadiometricImage,
    pub silhouette: RegionMask,
}

/// Generate `n_variants` blended chips per (signature, configuration) pair.
///
/// Each variant draws its own blend map from an independent child stream
/// derived from the master seed and the variant's identity, so the whole
/// expansion is reproducible and order-independent.
pub fn expand_database(
    signatures: &[ThermalSignature],
    configs: &[OperatingConfiguration],
    n_variants: u32,
    master_seed: u64,
) -> Result<Vec<SignatureVariant>> {
    if n_variants == 0 {
        return Err(Error::ValueError("n_variants must be at least 1".into()));
    }
    let mut out = Vec::with_capacity(signatures.len() * configs.len() * n_variants as usize);
    for sig in signatures {
        for config in configs {
            for variant_index in 0..n_variants {
                let tag = format!(
                    "{}/{:.3}/{}",
                    sig.vehicle_id(),
                    sig.aspect_azimuth_deg(),
                    config.name
                );
                let seed = seed::child_seed_tagged(master_seed, "variant", &tag, variant_index as u64);
                let mut rng = seed::rng_from(seed);
                let lambdas = assign_lambdas(config, &mut rng);
                let chip = synthesize_signature(sig, &lambdas)?;
                out.push(SignatureVariant {
                    vehicle_id: sig.vehicle_id().to_string(),
                    aspect_azimuth_deg: sig.aspect_azimuth_deg(),
                    configuration: config.name.clone(),
                    variant_index,
                    seed,
                    lambdas,
                    chip,
                    silhouette: sig.silhouette().clone(),
                });
            }
        }
    }
    Ok(out)
}
