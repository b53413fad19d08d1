//! Scene composition: occluder placement under an occlusion-ratio constraint,
//! target placement, chip rescaling, and the paint pass that assembles the
//! frame.
//!
//! Paint order is fixed: background, then target, then occluder. The occluder
//! keeps its own radiometry and is never graded; its footprint is excluded
//! from every partition mask.

use crate::error::{Error, Result};
use crate::imaging::{make_partition, RadiometricImage, RegionMask, ScenePartition};
use crate::thermal::RegionMap;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Integer pixel offset of a chip's top-left corner in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub x: i64,
    pub y: i64,
}

impl Placement {
    pub fn new(x: i64, y: i64) -> Self {
        Self { x, y }
    }

    pub fn translated(self, dx: i64, dy: i64) -> Self {
        Self {
            x: self.x + dx,
            y: self.y + dy,
        }
    }
}

/// A foreground object (tree, rock, ...) with its own infrared texture.
#[derive(Debug, Clone, PartialEq)]
pub struct Occluder {
    name: String,
    chip: RadiometricImage,
    silhouette: RegionMask,
}

impl Occluder {
    pub fn new(
        name: impl Into<String>,
        chip: RadiometricImage,
        silhouette: RegionMask,
    ) -> Result<Self> {
        if chip.width() != silhouette.width() || chip.height() != silhouette.height() {
            return Err(Error::ShapeError {
                context: "occluder silhouette",
                expected_w: chip.width(),
                expected_h: chip.height(),
                actual_w: silhouette.width(),
                actual_h: silhouette.height(),
            });
        }
        Ok(Self {
            name: name.into(),
            chip,
            silhouette,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chip(&self) -> &RadiometricImage {
        &self.chip
    }

    pub fn silhouette(&self) -> &RegionMask {
        &self.silhouette
    }
}

/// Result of the occlusion search: where to put the occluder relative to the
/// target silhouette's origin, and the occlusion ratio that placement yields.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OcclusionSolution {
    /// Occluder offset relative to the target silhouette origin.
    pub placement: Placement,
    /// Achieved occlusion ratio (overlap / target area), exact by pixel count.
    pub achieved: f64,
}

/// Count overlap pixels with the occluder offset by (dx, dy) relative to the
/// target origin.
fn overlap_at(target: &RegionMask, occluder: &RegionMask, dx: i64, dy: i64) -> usize {
    let x0 = dx.max(0);
    let y0 = dy.max(0);
    let x1 = (dx + occluder.width() as i64).min(target.width() as i64);
    let y1 = (dy + occluder.height() as i64).min(target.height() as i64);
    if x0 >= x1 || y0 >= y1 {
        return 0;
    }
    let mut count = 0usize;
    for y in y0..y1 {
        for x in x0..x1 {
            if target.get(x as u32, y as u32)
                && occluder.get((x - dx) as u32, (y - dy) as u32)
            {
                count += 1;
            }
        }
    }
    count
}

/// Find a relative occluder placement whose occlusion ratio is within
/// `epsilon` of `rx_star`.
///
/// Fast path: slide the occluder horizontally toward the target at a fixed
/// vertical centering. Overlap grows monotonically along this approach for
/// convex silhouettes, so the hit point is found by bisection. When the fast
/// path cannot reach the requested ratio (non-convex shape, ratio not
/// attainable on the sweep line) an exhaustive 2D offset scan takes over,
/// parallelized over columns with deterministic tie-breaking (smallest error,
/// then lowest x, then lowest y).
pub fn solve_occlusion(
    target_sil: &RegionMask,
    occluder_sil: &RegionMask,
    rx_star: f64,
    epsilon: f64,
) -> Result<OcclusionSolution> {
    if !(0.0..=1.0).contains(&rx_star) {
        return Err(Error::ValueError(format!(
            "rx_star must lie in [0, 1], got {rx_star}"
        )));
    }
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(Error::ValueError(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let target_area = target_sil.area();
    if target_area == 0 {
        return Err(Error::EmptyRegion("target silhouette is empty"));
    }
    if occluder_sil.is_empty() {
        return Err(Error::EmptyRegion("occluder silhouette is empty"));
    }

    let t_w = target_sil.width() as i64;
    let t_h = target_sil.height() as i64;
    let o_w = occluder_sil.width() as i64;
    let o_h = occluder_sil.height() as i64;
    let dy_center = (t_h - o_h).div_euclid(2);
    let ratio = |overlap: usize| overlap as f64 / target_area as f64;

    // lateral approach: dx = -o_w has zero overlap, dx at horizontal centering
    // has the sweep maximum for convex shapes
    let dx_lo = -o_w;
    let dx_hi = (t_w - o_w).div_euclid(2);
    let f_hi = overlap_at(target_sil, occluder_sil, dx_hi, dy_center);
    if ratio(f_hi) >= rx_star {
        // bisect for the smallest dx whose overlap reaches rx_star
        let mut lo = dx_lo;
        let mut hi = dx_hi;
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if ratio(overlap_at(target_sil, occluder_sil, mid, dy_center)) >= rx_star {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        // the crossing point and its predecessor bracket rx_star
        let at = overlap_at(target_sil, occluder_sil, lo, dy_center);
        let before = overlap_at(target_sil, occluder_sil, lo - 1, dy_center);
        let (best_dx, best_overlap) =
            if (ratio(before) - rx_star).abs() < (ratio(at) - rx_star).abs() {
                (lo - 1, before)
            } else {
                (lo, at)
            };
        if (ratio(best_overlap) - rx_star).abs() <= epsilon {
            return Ok(OcclusionSolution {
                placement: Placement::new(best_dx, dy_center),
                achieved: ratio(best_overlap),
            });
        }
    }

    // exhaustive scan over every offset where the footprints can interact,
    // plus the non-overlapping boundary
    let dys: Vec<i64> = (-o_h..=t_h).collect();
    let best = (-o_w..=t_w)
        .into_par_iter()
        .map(|dx| {
            let mut col_best: Option<(f64, i64, i64, usize)> = None;
            for &dy in &dys {
                let ov = overlap_at(target_sil, occluder_sil, dx, dy);
                let err = (ratio(ov) - rx_star).abs();
                let better = match &col_best {
                    None => true,
                    Some(&(e, _, by, _)) => err < e || (err == e && dy < by),
                };
                if better {
                    col_best = Some((err, dx, dy, ov));
                }
            }
            col_best
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .min_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap()
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

    match best {
        Some((err, dx, dy, ov)) if err <= epsilon => Ok(OcclusionSolution {
            placement: Placement::new(dx, dy),
            achieved: ratio(ov),
        }),
        Some((_, _, _, ov)) => Err(Error::OcclusionInfeasible {
            requested: rx_star,
            epsilon,
            best: ratio(ov),
        }),
        None => Err(Error::OcclusionInfeasible {
            requested: rx_star,
            epsilon,
            best: 0.0,
        }),
    }
}

fn paint_chip(
    frame: &mut RadiometricImage,
    chip: &RadiometricImage,
    silhouette: &RegionMask,
    at: Placement,
) -> Result<()> {
    for sy in 0..chip.height() {
        for sx in 0..chip.width() {
            if !silhouette.get(sx, sy) {
                continue;
            }
            let fx = at.x + sx as i64;
            let fy = at.y + sy as i64;
            if fx < 0 || fy < 0 || fx >= frame.width() as i64 || fy >= frame.height() as i64 {
                return Err(Error::PlacementError(format!(
                    "chip pixel ({sx},{sy}) placed at ({fx},{fy}) falls outside the \
                     {}x{} frame",
                    frame.width(),
                    frame.height()
                )));
            }
            frame.set_sample(fx as u32, fy as u32, chip.sample(sx, sy));
        }
    }
    Ok(())
}

/// Paint the scene (background, then target, then occluder) and build its
/// partition. Occluded target pixels move from C to `occluded`; the occluder
/// footprint is removed from both background masks.
pub fn composite(
    background: &RadiometricImage,
    target_chip: &RadiometricImage,
    target_sil: &RegionMask,
    target_at: Placement,
    occluder: Option<(&Occluder, Placement)>,
    ring_width: u32,
) -> Result<(RadiometricImage, ScenePartition)> {
    if target_chip.width() != target_sil.width() || target_chip.height() != target_sil.height() {
        return Err(Error::ShapeError {
            context: "target silhouette",
            expected_w: target_chip.width(),
            expected_h: target_chip.height(),
            actual_w: target_sil.width(),
            actual_h: target_sil.height(),
        });
    }
    let frame = (background.width(), background.height());
    let mut scene = background.clone();
    paint_chip(&mut scene, target_chip, target_sil, target_at)?;
    let mut part = make_partition(target_sil, (target_at.x, target_at.y), frame, ring_width)?;

    if let Some((occ, occ_at)) = occluder {
        paint_chip(&mut scene, occ.chip(), occ.silhouette(), occ_at)?;
        let footprint = occ
            .silhouette()
            .place_into(frame.0, frame.1, occ_at.x, occ_at.y)?;
        part = part.with_occluder(&footprint);
    }
    Ok((scene, part))
}

/// Resample a chip set by a linear scale factor: bilinear for the
/// radiometric chip, nearest-neighbor for the silhouette and region labels
/// (sampled at the same source pixel so they stay consistent).
pub fn rescale_chip(
    chip: &RadiometricImage,
    silhouette: &RegionMask,
    regions: Option<&RegionMap>,
    scale: f64,
) -> Result<(RadiometricImage, RegionMask, Option<RegionMap>)> {
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::ValueError(format!(
            "scale must be positive, got {scale}"
        )));
    }
    let w = chip.width();
    let h = chip.height();
    if silhouette.width() != w || silhouette.height() != h {
        return Err(Error::ShapeError {
            context: "rescale silhouette",
            expected_w: w,
            expected_h: h,
            actual_w: silhouette.width(),
            actual_h: silhouette.height(),
        });
    }
    if let Some(r) = regions {
        if r.width() != w || r.height() != h {
            return Err(Error::ShapeError {
                context: "rescale region map",
                expected_w: w,
                expected_h: h,
                actual_w: r.width(),
                actual_h: r.height(),
            });
        }
    }
    if scale == 1.0 {
        return Ok((chip.clone(), silhouette.clone(), regions.cloned()));
    }
    let out_w = (w as f64 * scale).round() as i64;
    let out_h = (h as f64 * scale).round() as i64;
    if out_w < 1 || out_h < 1 {
        return Err(Error::TargetTooSmall(
            (w as f64 * scale) * (h as f64 * scale),
        ));
    }
    let out_w = out_w as u32;
    let out_h = out_h as u32;

    let mut samples = Vec::with_capacity(out_w as usize * out_h as usize);
    let mut bits = Vec::with_capacity(out_w as usize * out_h as usize);
    let mut codes = Vec::with_capacity(out_w as usize * out_h as usize);
    for oy in 0..out_h {
        for ox in 0..out_w {
            // pixel-center mapping from output to source coordinates
            let sx = (ox as f64 + 0.5) * w as f64 / out_w as f64 - 0.5;
            let sy = (oy as f64 + 0.5) * h as f64 / out_h as f64 - 0.5;

            // bilinear radiometry
            let x0 = sx.floor().clamp(0.0, (w - 1) as f64) as u32;
            let y0 = sy.floor().clamp(0.0, (h - 1) as f64) as u32;
            let x1 = (x0 + 1).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let fx = (sx - x0 as f64).clamp(0.0, 1.0);
            let fy = (sy - y0 as f64).clamp(0.0, 1.0);
            let top = (1.0 - fx) * chip.sample(x0, y0) + fx * chip.sample(x1, y0);
            let bot = (1.0 - fx) * chip.sample(x0, y1) + fx * chip.sample(x1, y1);
            samples.push((1.0 - fy) * top + fy * bot);

            // shared nearest-neighbor source pixel for mask and labels
            let nx = sx.round().clamp(0.0, (w - 1) as f64) as u32;
            let ny = sy.round().clamp(0.0, (h - 1) as f64) as u32;
            bits.push(silhouette.get(nx, ny));
            if let Some(r) = regions {
                codes.push(r.codes()[ny as usize * w as usize + nx as usize]);
            }
        }
    }
    let out_chip = RadiometricImage::from_parts(out_w, out_h, samples);
    let out_sil = RegionMask::from_bits(out_w, out_h, bits)?;
    let out_regions = if regions.is_some() {
        Some(RegionMap::new(out_w, out_h, codes)?)
    } else {
        None
    };
    Ok((out_chip, out_sil, out_regions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::compute_rx;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    /// Exhaustive oracle over every relative offset.
    fn oracle_best(
        target: &RegionMask,
        occluder: &RegionMask,
        rx_star: f64,
    ) -> (f64, i64, i64) {
        let t_w = target.width() as i64;
        let t_h = target.height() as i64;
        let o_w = occluder.width() as i64;
        let o_h = occluder.height() as i64;
        let area = target.area() as f64;
        let mut best = (f64::INFINITY, 0i64, 0i64);
        for dx in -o_w..=t_w {
            for dy in -o_h..=t_h {
                let r = overlap_at(target, occluder, dx, dy) as f64 / area;
                let err = (r - rx_star).abs();
                if err < best.0 {
                    best = (err, dx, dy);
                }
            }
        }
        best
    }

    #[test]
    fn occlusion_zero_ratio() {
        let t = RegionMask::filled(10, 10);
        let o = RegionMask::filled(6, 6);
        let sol = solve_occlusion(&t, &o, 0.0, 0.01).unwrap();
        assert_eq!(sol.achieved, 0.0);
    }

    #[test]
    fn occlusion_half_columns_exact() {
        // equal 10x10 rectangles, rx* = 0.5: occluder covers exactly 5 columns
        let t = RegionMask::filled(10, 10);
        let o = RegionMask::filled(10, 10);
        let sol = solve_occlusion(&t, &o, 0.5, 0.01).unwrap();
        assert_eq!(sol.achieved, 0.5);
        assert_eq!(sol.placement.x, -5);
        let recount = overlap_at(&t, &o, sol.placement.x, sol.placement.y);
        assert_eq!(recount, 50);
    }

    #[test]
    fn occlusion_full_cover_infeasible_when_small() {
        let t = RegionMask::filled(10, 10);
        let o = RegionMask::filled(6, 6);
        assert!(matches!(
            solve_occlusion(&t, &o, 1.0, 0.01),
            Err(Error::OcclusionInfeasible { .. })
        ));
    }

    #[test]
    fn occlusion_full_cover_feasible_when_large() {
        let t = RegionMask::filled(8, 8);
        let o = RegionMask::filled(12, 12);
        let sol = solve_occlusion(&t, &o, 1.0, 0.01).unwrap();
        assert_eq!(sol.achieved, 1.0);
    }

    #[test]
    fn occlusion_agrees_with_exhaustive_oracle() {
        let t = RegionMask::filled(12, 9);
        let o = RegionMask::filled(7, 11);
        for rx in [0.0, 0.1, 0.25, 0.5, 0.75, 1.0] {
            let oracle = oracle_best(&t, &o, rx);
            match solve_occlusion(&t, &o, rx, 0.01) {
                Ok(sol) => {
                    assert!((sol.achieved - rx).abs() <= 0.01);
                    // solver is never worse than the oracle's tolerance window
                    assert!(oracle.0 <= 0.01 + 1e-12);
                    let recount =
                        overlap_at(&t, &o, sol.placement.x, sol.placement.y) as f64
                            / t.area() as f64;
                    assert_eq!(recount, sol.achieved);
                }
                Err(Error::OcclusionInfeasible { .. }) => {
                    assert!(oracle.0 > 0.01, "oracle found {oracle:?} for rx {rx}");
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    fn blob(seed: u64, w: u32, h: u32) -> RegionMask {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let cx = w as f64 / 2.0;
        let cy = h as f64 / 2.0;
        let rx = w as f64 * (0.25 + 0.15 * rng.random::<f64>());
        let ry = h as f64 * (0.25 + 0.15 * rng.random::<f64>());
        let bx = w as f64 * rng.random::<f64>();
        let by = h as f64 * rng.random::<f64>();
        let br = w.min(h) as f64 * 0.2;
        RegionMask::from_fn(w, h, |x, y| {
            let dx = (x as f64 - cx) / rx;
            let dy = (y as f64 - cy) / ry;
            let in_ellipse = dx * dx + dy * dy <= 1.0;
            let ddx = x as f64 - bx;
            let ddy = y as f64 - by;
            in_ellipse || ddx * ddx + ddy * ddy <= br * br
        })
    }

    #[test]
    fn occlusion_blob_shapes() {
        let t = blob(5, 24, 20);
        let o = blob(9, 18, 22);
        for rx in [0.0, 0.25, 0.5] {
            let sol = solve_occlusion(&t, &o, rx, 0.01).unwrap();
            assert!((sol.achieved - rx).abs() <= 0.01, "rx {rx}: {}", sol.achieved);
        }
    }

    fn checker_background(w: u32, h: u32) -> RadiometricImage {
        RadiometricImage::new(
            w,
            h,
            (0..w as usize * h as usize)
                .map(|i| ((i % 7) as f64) * 3.0 + 10.0)
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn composite_without_occluder() {
        let bg = checker_background(32, 32);
        let chip = RadiometricImage::filled(6, 6, 500.0).unwrap();
        let sil = RegionMask::filled(6, 6);
        let (scene, part) =
            composite(&bg, &chip, &sil, Placement::new(10, 12), None, 2).unwrap();
        assert_eq!(part.visible_target.area(), 36);
        assert!(part.occluded.is_empty());
        assert_eq!(scene.sample(10, 12), 500.0);
        // background untouched outside the footprint
        assert_eq!(scene.sample(0, 0), bg.sample(0, 0));
        assert_eq!(scene.sample(31, 31), bg.sample(31, 31));
    }

    #[test]
    fn composite_fully_covered_target() {
        let bg = checker_background(32, 32);
        let chip = RadiometricImage::filled(6, 6, 500.0).unwrap();
        let sil = RegionMask::filled(6, 6);
        let occ = Occluder::new(
            "rock",
            RadiometricImage::filled(8, 8, 77.0).unwrap(),
            RegionMask::filled(8, 8),
        )
        .unwrap();
        let (scene, part) = composite(
            &bg,
            &chip,
            &sil,
            Placement::new(10, 12),
            Some((&occ, Placement::new(9, 11))),
            2,
        )
        .unwrap();
        assert!(part.visible_target.is_empty());
        assert_eq!(part.occluded.area(), 36);
        assert_eq!(
            compute_rx(part.occluded.area(), part.total_target_area()).unwrap(),
            1.0
        );
        assert_eq!(scene.sample(10, 12), 77.0);
    }

    #[test]
    fn composite_half_covered_paint_order() {
        // 10x10 target at (10,10); 10x10 occluder shifted to cover 5 columns
        let bg = checker_background(40, 40);
        let chip = RadiometricImage::filled(10, 10, 500.0).unwrap();
        let sil = RegionMask::filled(10, 10);
        let occ = Occluder::new(
            "tree",
            RadiometricImage::filled(10, 10, 77.0).unwrap(),
            RegionMask::filled(10, 10),
        )
        .unwrap();
        let (scene, part) = composite(
            &bg,
            &chip,
            &sil,
            Placement::new(10, 10),
            Some((&occ, Placement::new(5, 10))),
            2,
        )
        .unwrap();
        assert_eq!(part.visible_target.area(), 50);
        assert_eq!(part.occluded.area(), 50);
        // occluder chip values where it covers the target
        assert_eq!(scene.sample(12, 15), 77.0);
        // target values in the visible half
        assert_eq!(scene.sample(17, 15), 500.0);
        // ring pixels under the occluder are excluded from F1
        assert!(!part.local_background.get(9, 10));
    }

    #[test]
    fn composite_rx_matches_solver() {
        let t = RegionMask::filled(10, 10);
        let o_sil = RegionMask::filled(10, 10);
        let sol = solve_occlusion(&t, &o_sil, 0.5, 0.01).unwrap();
        let bg = checker_background(64, 64);
        let chip = RadiometricImage::filled(10, 10, 500.0).unwrap();
        let occ = Occluder::new(
            "tree",
            RadiometricImage::filled(10, 10, 77.0).unwrap(),
            o_sil,
        )
        .unwrap();
        let target_at = Placement::new(20, 20);
        let occ_at = target_at.translated(sol.placement.x, sol.placement.y);
        let (_, part) =
            composite(&bg, &chip, &t, target_at, Some((&occ, occ_at)), 3).unwrap();
        let rx = compute_rx(part.occluded.area(), part.total_target_area()).unwrap();
        assert_eq!(rx, sol.achieved);
    }

    #[test]
    fn composite_rejects_out_of_frame() {
        let bg = checker_background(16, 16);
        let chip = RadiometricImage::filled(6, 6, 1.0).unwrap();
        let sil = RegionMask::filled(6, 6);
        assert!(matches!(
            composite(&bg, &chip, &sil, Placement::new(12, 0), None, 2),
            Err(Error::PlacementError(_))
        ));
    }

    #[test]
    fn rescale_identity() {
        let chip = checker_background(20, 20);
        let sil = RegionMask::filled(20, 20);
        let (c, s, r) = rescale_chip(&chip, &sil, None, 1.0).unwrap();
        assert_eq!(c, chip);
        assert_eq!(s, sil);
        assert!(r.is_none());
    }

    #[test]
    fn rescale_area_tracks_scale() {
        let chip = checker_background(20, 20);
        let sil = RegionMask::filled(20, 20);
        let (c, s, _) = rescale_chip(&chip, &sil, None, 0.5).unwrap();
        assert_eq!((c.width(), c.height()), (10, 10));
        let area = s.area() as f64;
        assert!((area - 100.0).abs() / 100.0 <= 0.05);
    }

    #[test]
    fn rescale_too_small() {
        let chip = checker_background(20, 20);
        let sil = RegionMask::filled(20, 20);
        assert!(matches!(
            rescale_chip(&chip, &sil, None, 0.01),
            Err(Error::TargetTooSmall(_))
        ));
    }

    #[test]
    fn rescale_keeps_labels_on_silhouette() {
        use crate::thermal::RegionMap;
        let w = 16u32;
        let h = 12u32;
        let chip = checker_background(w, h);
        let sil = RegionMask::from_fn(w, h, |x, y| {
            let dx = x as f64 - 8.0;
            let dy = y as f64 - 6.0;
            dx * dx / 36.0 + dy * dy / 16.0 <= 1.0
        });
        let codes: Vec<u8> = (0..w * h)
            .map(|i| {
                let x = i % w;
                let y = i / w;
                if sil.get(x, y) {
                    if x < 8 {
                        1
                    } else {
                        2
                    }
                } else {
                    0
                }
            })
            .collect();
        let regions = RegionMap::new(w, h, codes).unwrap();
        let (_, s2, r2) = rescale_chip(&chip, &sil, Some(&regions), 0.75).unwrap();
        let r2 = r2.unwrap();
        for y in 0..s2.height() {
            for x in 0..s2.width() {
                let labeled = r2.label(x, y).is_some();
                assert_eq!(s2.get(x, y), labeled, "pixel ({x},{y})");
            }
        }
    }
}
