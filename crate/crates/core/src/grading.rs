//! Closed-form inversion of the quality metrics into per-region gain/offset
//! transforms and a target scale factor.
//!
//! The solvers work backwards from a requested [`QualitySpec`]:
//!
//! * background: `nu_k * RSS / sigma_F = RSC` pins the graded background std
//!   to `sigma_F' = nu_k * rss* / rsc*`, so `gain_F = sigma_F' / sigma_F`; the
//!   offset preserves the background mean.
//! * target: squaring the RSS definition gives
//!   `(nu_k * RSS)^2 = dmu^2 + sigma_C^2`, and with `dmu = K * nu_k * RSS`
//!   this splits into `dmu' = k* * nu_k * rss*` and
//!   `sigma_C' = nu_k * rss* * sqrt(1 - k*^2)`. |K| <= 1 is therefore a hard
//!   feasibility condition.
//! * scale: `Q_D = RSS * S_C` inverts to a target area `S* = qd* / rss*` and a
//!   linear factor `sqrt(S* / S_native)`.
//!
//! Grading is ordered: the background transform is solved and applied first,
//! then the target transform is computed against the graded F1 mean. The
//! guaranteed metrics are pre-sensor; the sensor chain perturbs them.

use crate::error::{Error, Result};
use crate::imaging::{
    apply_gain_offset, region_stats, RadiometricImage, RegionStats, ScenePartition,
};
use crate::metrics::{compute_all, Calibration, MetricSet};
use serde::{Deserialize, Serialize};

/// Requested values of the quality metrics for one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualitySpec {
    /// Requested local contrast RSS, kelvin. Must be positive.
    #[serde(rename = "rss_star_K")]
    pub rss_star: f64,
    /// Requested signal-to-clutter ratio. Must be positive.
    #[serde(rename = "rsc_star")]
    pub rsc_star: f64,
    /// Requested internal contrast, |k*| <= 1.
    #[serde(rename = "k_star")]
    pub k_star: f64,
    /// Requested detectability quantity, kelvin * pixels. `None` keeps the
    /// target at its native scale.
    #[serde(rename = "qd_star_Kpx", default)]
    pub qd_star: Option<f64>,
    /// Requested occlusion ratio in [0, 1].
    #[serde(rename = "rx_star", default)]
    pub rx_star: f64,
    /// Gray-level / kelvin conversion.
    #[serde(rename = "gl_per_kelvin")]
    pub calibration: Calibration,
    /// Relative tolerance of the closed-form guarantee on RSS, RSC, K.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    1e-9
}

impl QualitySpec {
    /// Validate everything that makes a spec structurally unusable.
    ///
    /// |k*| > 1 is deliberately not rejected here: it is a *feasibility*
    /// failure surfaced by [`solve_target`] as [`Error::InfeasibleContrast`].
    pub fn validate(&self) -> Result<()> {
        if !(self.rss_star.is_finite() && self.rss_star > 0.0) {
            return Err(Error::ConfigError(format!(
                "rss_star must be positive, got {}",
                self.rss_star
            )));
        }
        if !(self.rsc_star.is_finite() && self.rsc_star > 0.0) {
            return Err(Error::ConfigError(format!(
                "rsc_star must be positive, got {}",
                self.rsc_star
            )));
        }
        if !self.k_star.is_finite() {
            return Err(Error::ConfigError("k_star must be finite".into()));
        }
        if !(0.0..=1.0).contains(&self.rx_star) {
            return Err(Error::ConfigError(format!(
                "rx_star must lie in [0, 1], got {}",
                self.rx_star
            )));
        }
        if let Some(qd) = self.qd_star {
            if !(qd.is_finite() && qd > 0.0) {
                return Err(Error::ConfigError(format!(
                    "qd_star must be positive when set, got {qd}"
                )));
            }
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::ConfigError(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// One affine gray-level transform.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainOffset {
    pub gain: f64,
    pub offset: f64,
}

/// The full set of transforms that grade one scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradingSolution {
    /// Transform applied to the global background F.
    pub background: GainOffset,
    /// Transform applied to the visible target C.
    pub target: GainOffset,
    /// Linear scale factor applied to the target chip before placement.
    pub target_scale: f64,
}

/// Gain/offset for the background so that RSC comes out at `rsc_star` while
/// the background mean is preserved.
pub fn solve_background(stats_f: &RegionStats, spec: &QualitySpec) -> Result<GainOffset> {
    if stats_f.std == 0.0 {
        return Err(Error::DegenerateBackground);
    }
    let sigma_target = spec.calibration.gl_per_kelvin() * spec.rss_star / spec.rsc_star;
    let gain = sigma_target / stats_f.std;
    let offset = stats_f.mean * (1.0 - gain);
    Ok(GainOffset { gain, offset })
}

/// Gain/offset for the visible target so that RSS and K come out at the
/// requested values against the already-graded local background mean.
pub fn solve_target(
    stats_c: &RegionStats,
    mu_f1_graded: f64,
    spec: &QualitySpec,
) -> Result<GainOffset> {
    if spec.k_star.abs() > 1.0 {
        return Err(Error::InfeasibleContrast(spec.k_star.abs()));
    }
    let nu_rss = spec.calibration.gl_per_kelvin() * spec.rss_star;
    let sigma_target = nu_rss * (1.0 - spec.k_star * spec.k_star).max(0.0).sqrt();
    let gain = if sigma_target == 0.0 {
        // |k*| = 1: all contrast carried by the mean offset, target flattened
        0.0
    } else if stats_c.std == 0.0 {
        return Err(Error::FlatTarget);
    } else {
        sigma_target / stats_c.std
    };
    // dmu = mu_F1' - mu_C' = k* * nu_k * rss*
    let mu_target = mu_f1_graded - spec.k_star * nu_rss;
    let offset = mu_target - gain * stats_c.mean;
    Ok(GainOffset { gain, offset })
}

/// Linear scale factor that brings the native silhouette area to
/// `S* = qd_star / rss_star` pixels.
pub fn solve_scale(native_area: usize, spec: &QualitySpec) -> Result<f64> {
    let qd_star = spec
        .qd_star
        .ok_or_else(|| Error::ConfigError("qd_star is not set; nothing to invert".into()))?;
    if native_area == 0 {
        return Err(Error::EmptyRegion("native silhouette has zero area"));
    }
    let area_target = qd_star / spec.rss_star;
    if area_target < 1.0 {
        return Err(Error::TargetTooSmall(area_target));
    }
    Ok((area_target / native_area as f64).sqrt())
}

/// A graded scene together with its achieved metrics and the transforms used.
#[derive(Debug, Clone)]
pub struct GradedScene {
    pub image: RadiometricImage,
    pub solution: GradingSolution,
    pub achieved: MetricSet,
}

/// Grade a composed scene in place of its partition: background transform
/// first, then the target transform computed against the graded F1 mean.
///
/// The scene must already contain the painted target chip under
/// `part.visible_target` (grading an affine transform of the chip commutes
/// with painting it). Occluder pixels belong to no partition mask and are left
/// untouched. The returned metrics satisfy the spec on RSS, RSC, and K within
/// `spec.tolerance` (relative, pre-sensor).
pub fn grade_scene(
    scene: &RadiometricImage,
    part: &ScenePartition,
    spec: &QualitySpec,
) -> Result<GradedScene> {
    spec.validate()?;
    let background_mask = part.background();
    let stats_f = region_stats(scene, &background_mask)
        .map_err(|_| Error::EmptyRegion("global background F is empty"))?;
    let bg = solve_background(&stats_f, spec)?;
    let graded_bg = apply_gain_offset(scene, &background_mask, bg.gain, bg.offset)?;

    let mu_f1_graded = region_stats(&graded_bg, &part.local_background)
        .map_err(|_| Error::EmptyRegion("local background F1 is empty"))?
        .mean;
    let stats_c = region_stats(scene, &part.visible_target)
        .map_err(|_| Error::EmptyRegion("target region C is empty"))?;
    let tgt = solve_target(&stats_c, mu_f1_graded, spec)?;
    let image = apply_gain_offset(&graded_bg, &part.visible_target, tgt.gain, tgt.offset)?;

    let achieved = compute_all(&image, part, spec.calibration)?;
    Ok(GradedScene {
        image,
        solution: GradingSolution {
            background: bg,
            target: tgt,
            target_scale: 1.0,
        },
        achieved,
    })
}

/// Relative deviation |achieved - requested| / |requested| (absolute when the
/// request is zero).
pub fn relative_error(achieved: f64, requested: f64) -> f64 {
    if requested == 0.0 {
        achieved.abs()
    } else {
        (achieved - requested).abs() / requested.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{make_partition, RegionMask};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn spec(rss: f64, rsc: f64, k: f64, nu: f64) -> QualitySpec {
        QualitySpec {
            rss_star: rss,
            rsc_star: rsc,
            k_star: k,
            qd_star: None,
            rx_star: 0.0,
            calibration: Calibration::new(nu).unwrap(),
            tolerance: 1e-9,
        }
    }

    fn random_scene(seed: u64, w: u32, h: u32) -> RadiometricImage {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let samples: Vec<f64> = (0..w as usize * h as usize)
            .map(|_| 500.0 + 80.0 * rng.random::<f64>())
            .collect();
        RadiometricImage::new(w, h, samples).unwrap()
    }

    #[test]
    fn background_gain_remeasured() {
        // nu=1, RSS*=2, RSC*=2, sigma_F=4 -> gain 0.25, mean preserved
        let img = random_scene(7, 32, 32);
        let mask = RegionMask::filled(32, 32);
        let before = region_stats(&img, &mask).unwrap();
        // force sigma to exactly 4 by normalizing first
        let normalized = apply_gain_offset(
            &img,
            &mask,
            4.0 / before.std,
            100.0 - before.mean * 4.0 / before.std,
        )
        .unwrap();
        let stats = region_stats(&normalized, &mask).unwrap();
        let s = spec(2.0, 2.0, 0.0, 1.0);
        let go = solve_background(&stats, &s).unwrap();
        assert!((go.gain - 0.25).abs() < 1e-9);
        let after = region_stats(
            &apply_gain_offset(&normalized, &mask, go.gain, go.offset).unwrap(),
            &mask,
        )
        .unwrap();
        assert!((after.mean - stats.mean).abs() < 1e-9 * stats.mean.abs().max(1.0));
        assert!((after.std - 1.0).abs() < 1e-9);
    }

    #[test]
    fn background_identity_when_already_matched() {
        let stats = RegionStats {
            mean: 40.0,
            std: 1.5,
            area: 100,
        };
        // sigma already equals nu*rss/rsc = 3/2
        let s = spec(3.0, 2.0, 0.0, 1.0);
        let go = solve_background(&stats, &s).unwrap();
        assert!((go.gain - 1.0).abs() < 1e-15);
        assert!(go.offset.abs() < 1e-12);
    }

    #[test]
    fn background_flat_rejected() {
        let stats = RegionStats {
            mean: 40.0,
            std: 0.0,
            area: 100,
        };
        assert!(matches!(
            solve_background(&stats, &spec(2.0, 2.0, 0.0, 1.0)),
            Err(Error::DegenerateBackground)
        ));
    }

    #[test]
    fn target_solution_apply_then_remeasure() {
        // nu=1, RSS*=2, k*=0.5, mu_F1'=10, mu_C=0, sigma_C=1
        // -> sigma' = sqrt(3), gain = sqrt(3), offset = 9
        let stats_c = RegionStats {
            mean: 0.0,
            std: 1.0,
            area: 64,
        };
        let s = spec(2.0, 1.0, 0.5, 1.0);
        let go = solve_target(&stats_c, 10.0, &s).unwrap();
        assert!((go.gain - 3.0_f64.sqrt()).abs() < 1e-12);
        assert!((go.offset - 9.0).abs() < 1e-12);
        // re-measure on synthetic samples with exactly mu=0, sigma=1
        let samples = vec![-1.0, 1.0, -1.0, 1.0];
        let img = RadiometricImage::new(2, 2, samples).unwrap();
        let mask = RegionMask::filled(2, 2);
        let out = apply_gain_offset(&img, &mask, go.gain, go.offset).unwrap();
        let after = region_stats(&out, &mask).unwrap();
        let rss = ((10.0 - after.mean).powi(2) + after.std * after.std).sqrt();
        assert!((rss - 2.0).abs() < 1e-12);
        let k = (10.0 - after.mean) / rss;
        assert!((k - 0.5).abs() < 1e-12);
    }

    #[test]
    fn target_extreme_contrast_flattens() {
        let stats_c = RegionStats {
            mean: 5.0,
            std: 2.0,
            area: 64,
        };
        let s = spec(2.0, 1.0, 1.0, 1.0);
        let go = solve_target(&stats_c, 10.0, &s).unwrap();
        assert_eq!(go.gain, 0.0);
        assert!((go.offset - (10.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn target_infeasible_contrast() {
        let stats_c = RegionStats {
            mean: 5.0,
            std: 2.0,
            area: 64,
        };
        assert!(matches!(
            solve_target(&stats_c, 10.0, &spec(2.0, 1.0, 1.5, 1.0)),
            Err(Error::InfeasibleContrast(_))
        ));
    }

    #[test]
    fn target_flat_chip_rejected() {
        let stats_c = RegionStats {
            mean: 5.0,
            std: 0.0,
            area: 64,
        };
        assert!(matches!(
            solve_target(&stats_c, 10.0, &spec(2.0, 1.0, 0.5, 1.0)),
            Err(Error::FlatTarget)
        ));
    }

    #[test]
    fn target_solution_offset_invariant() {
        // shifting the input scene by a constant shifts only the offset bookkeeping;
        // the achieved region is identical
        let s = spec(2.5, 1.0, -0.4, 2.0);
        let a = RegionStats {
            mean: 12.0,
            std: 3.0,
            area: 64,
        };
        let shift = 55.5;
        let b = RegionStats {
            mean: 12.0 + shift,
            std: 3.0,
            area: 64,
        };
        let ga = solve_target(&a, 20.0, &s).unwrap();
        let gb = solve_target(&b, 20.0, &s).unwrap();
        assert!((ga.gain - gb.gain).abs() < 1e-12);
        // graded mean must match in both cases
        let mu_a = ga.gain * a.mean + ga.offset;
        let mu_b = gb.gain * b.mean + gb.offset;
        assert!((mu_a - mu_b).abs() < 1e-9);
    }

    #[test]
    fn scale_area_ratio() {
        let mut s = spec(2.5, 1.0, 0.0, 1.0);
        s.qd_star = Some(250.0);
        let scale = solve_scale(400, &s).unwrap();
        assert!((scale - 0.5).abs() < 1e-15);
    }

    #[test]
    fn scale_identity() {
        let mut s = spec(2.0, 1.0, 0.0, 1.0);
        s.qd_star = Some(2.0 * 400.0);
        assert!((solve_scale(400, &s).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scale_too_small() {
        let mut s = spec(10.0, 1.0, 0.0, 1.0);
        s.qd_star = Some(1.0);
        assert!(matches!(
            solve_scale(400, &s),
            Err(Error::TargetTooSmall(_))
        ));
    }

    fn composed_scene(seed: u64) -> (RadiometricImage, ScenePartition) {
        let mut scene = random_scene(seed, 64, 64);
        let sil = RegionMask::filled(8, 8);
        let part = make_partition(&sil, (20, 24), (64, 64), 5).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(seed ^ 0xabcdef);
        for y in 0..64u32 {
            for x in 0..64u32 {
                if part.visible_target.get(x, y) {
                    scene.set_sample(x, y, 300.0 + 10.0 * rng.random::<f64>());
                }
            }
        }
        (scene, part)
    }

    #[test]
    fn grade_round_trip_hits_spec() {
        let (scene, part) = composed_scene(3);
        let s = spec(2.0, 1.5, 0.3, 1.0);
        let graded = grade_scene(&scene, &part, &s).unwrap();
        assert!(relative_error(graded.achieved.rss, s.rss_star) <= 1e-9);
        assert!(relative_error(graded.achieved.rsc, s.rsc_star) <= 1e-9);
        assert!(relative_error(graded.achieved.k.unwrap(), s.k_star) <= 1e-9);
    }

    #[test]
    fn grade_fixed_point_yields_identity() {
        let (scene, part) = composed_scene(11);
        let nu = Calibration::new(1.0).unwrap();
        let current = compute_all(&scene, &part, nu).unwrap();
        let s = spec(current.rss, current.rsc, current.k.unwrap(), 1.0);
        let graded = grade_scene(&scene, &part, &s).unwrap();
        assert!((graded.solution.background.gain - 1.0).abs() < 1e-9);
        assert!(graded.solution.background.offset.abs() < 1e-6);
        assert!((graded.solution.target.gain - 1.0).abs() < 1e-9);
        assert!(graded.solution.target.offset.abs() < 1e-6);
    }

    #[test]
    fn grade_idempotent() {
        let (scene, part) = composed_scene(29);
        let s = spec(3.0, 2.0, -0.6, 2.0);
        let once = grade_scene(&scene, &part, &s).unwrap();
        let twice = grade_scene(&once.image, &part, &s).unwrap();
        assert!((twice.solution.background.gain - 1.0).abs() < 1e-9);
        assert!(twice.solution.background.offset.abs() < 1e-6);
        assert!((twice.solution.target.gain - 1.0).abs() < 1e-9);
        assert!(twice.solution.target.offset.abs() < 1e-6);
    }

    #[test]
    fn grade_flat_background_rejected() {
        let scene = RadiometricImage::filled(64, 64, 50.0).unwrap();
        let sil = RegionMask::filled(8, 8);
        let part = make_partition(&sil, (20, 24), (64, 64), 5).unwrap();
        assert!(matches!(
            grade_scene(&scene, &part, &spec(2.0, 1.5, 0.3, 1.0)),
            Err(Error::DegenerateBackground)
        ));
    }

    #[test]
    fn quality_spec_validation() {
        let mut s = spec(2.0, 1.5, 0.3, 1.0);
        s.rss_star = -1.0;
        assert!(matches!(s.validate(), Err(Error::ConfigError(_))));
        let mut s = spec(2.0, 1.5, 0.3, 1.0);
        s.rx_star = 1.5;
        assert!(matches!(s.validate(), Err(Error::ConfigError(_))));
        // |k*| > 1 passes validation; it is a solver-level feasibility error
        let s = spec(2.0, 1.5, 2.0, 1.0);
        assert!(s.validate().is_ok());
    }
}
