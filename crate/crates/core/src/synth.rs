//! Procedurally generated placeholder assets: backgrounds, vehicle signature
//! views, and occluders. These stand in for a measured signature library in
//! demos and tests; they carry plausible structure (clutter, region layout,
//! hot spots) but no physical meaning.

use crate::compositing::Occluder;
use crate::imaging::{RadiometricImage, RegionMask};
use crate::seed;
use crate::thermal::{RegionMap, ThermalSignature, VehicleRegion};
use rand::Rng;

/// Cluttered background: a smooth vertical gradient plus band-limited noise.
pub fn background(width: u32, height: u32, mean_gl: f64, clutter_gl: f64, seed_v: u64) -> RadiometricImage {
    let mut rng = seed::rng_from(seed_v);
    let n = width as usize * height as usize;
    let noise: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    // cheap smoothing: average each pixel with its left and upper neighbours
    let mut smooth = vec![0.0f64; n];
    let w = width as usize;
    for y in 0..height as usize {
        for x in 0..w {
            let mut acc = noise[y * w + x];
            let mut cnt = 1.0;
            if x > 0 {
                acc += noise[y * w + x - 1];
                cnt += 1.0;
            }
            if y > 0 {
                acc += smooth[(y - 1) * w + x];
                cnt += 1.0;
            }
            smooth[y * w + x] = acc / cnt;
        }
    }
    let samples = (0..n)
        .map(|i| {
            let y = (i / w) as f64 / height as f64;
            mean_gl + 8.0 * clutter_gl * smooth[i] + clutter_gl * 0.5 * (y - 0.5)
        })
        .collect();
    RadiometricImage::from_parts(width, height, samples)
}

/// One synthetic vehicle view: a hull silhouette with the five labeled
/// regions, a cold chip near ambient, and a hot chip with engine/exhaust
/// hot spots. The aspect azimuth only stretches the hull so different views
/// are distinguishable.
pub fn signature(vehicle_id: &str, azimuth_deg: f64, width: u32, height: u32, seed_v: u64) -> ThermalSignature {
    let mut rng = seed::rng_from(seed_v);
    let w = width;
    let h = height;
    // hull: a rounded box whose aspect ratio follows the view angle
    let az = azimuth_deg.to_radians();
    let half_w = w as f64 * (0.28 + 0.14 * az.sin().abs());
    let half_h = h as f64 * 0.30;
    let cx = w as f64 / 2.0;
    let cy = h as f64 / 2.0;
    let silhouette = RegionMask::from_fn(w, h, |x, y| {
        let dx = (x as f64 - cx) / half_w;
        let dy = (y as f64 - cy) / half_h;
        dx * dx + dy.powi(4) <= 1.0
    });

    // region layout over the hull: running gear at the bottom, windows top
    // front, engine front mid, exhaust one rear patch, body everywhere else
    let mut codes = vec![0u8; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            if !silhouette.get(x, y) {
                continue;
            }
            let fx = (x as f64 - (cx - half_w)) / (2.0 * half_w); // 0 front, 1 rear
            let fy = (y as f64 - (cy - half_h)) / (2.0 * half_h); // 0 top, 1 bottom
            let region = if fy > 0.78 {
                VehicleRegion::RunningGear
            } else if fx < 0.30 && fy < 0.35 {
                VehicleRegion::Windows
            } else if fx < 0.38 {
                VehicleRegion::Engine
            } else if fx > 0.82 && fy > 0.45 && fy < 0.70 {
                VehicleRegion::Exhaust
            } else {
                VehicleRegion::Body
            };
            codes[y as usize * w as usize + x as usize] = region.code();
        }
    }
    let regions = RegionMap::new(w, h, codes).expect("codes are valid by construction");

    // cold chip: slightly textured, near the ambient level
    let ambient_level = 480.0 + 20.0 * rng.random::<f64>();
    let mut ta = vec![0.0f64; w as usize * h as usize];
    let mut tf = vec![0.0f64; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            let i = y as usize * w as usize + x as usize;
            if !silhouette.get(x, y) {
                continue;
            }
            let texture = 6.0 * (rng.random::<f64>() - 0.5);
            ta[i] = ambient_level + texture;
            let hot = match regions.label(x, y).expect("hull pixels are labeled") {
                VehicleRegion::Engine => 120.0,
                VehicleRegion::Exhaust => 160.0,
                VehicleRegion::RunningGear => 60.0,
                VehicleRegion::Body => 35.0,
                VehicleRegion::Windows => 10.0,
            };
            tf[i] = ta[i] + hot + 8.0 * (rng.random::<f64>() - 0.5);
        }
    }
    ThermalSignature::new(
        vehicle_id,
        azimuth_deg,
        RadiometricImage::from_parts(w, h, ta),
        RadiometricImage::from_parts(w, h, tf),
        regions,
        silhouette,
    )
    .expect("synthetic signature is consistent by construction")
}

/// A blobby occluder (tree/rock stand-in) with its own texture.
pub fn occluder(name: &str, width: u32, height: u32, seed_v: u64) -> Occluder {
    let mut rng = seed::rng_from(seed_v);
    let cx = width as f64 / 2.0;
    let cy = height as f64 / 2.0;
    let r0 = width.min(height) as f64 * 0.42;
    // radial bumps make the outline irregular
    let bumps: Vec<f64> = (0..8).map(|_| 0.75 + 0.5 * rng.random::<f64>()).collect();
    let silhouette = RegionMask::from_fn(width, height, |x, y| {
        let dx = x as f64 - cx;
        let dy = y as f64 - cy;
        let r = (dx * dx + dy * dy).sqrt();
        let angle = dy.atan2(dx) + std::f64::consts::PI;
        let k = (angle / (2.0 * std::f64::consts::PI) * 8.0) as usize % 8;
        r <= r0 * bumps[k]
    });
    let level = 430.0 + 30.0 * rng.random::<f64>();
    let samples = (0..width as usize * height as usize)
        .map(|_| level + 12.0 * (rng.random::<f64>() - 0.5))
        .collect();
    let chip = RadiometricImage::from_parts(width, height, samples);
    Occluder::new(name, chip, silhouette).expect("shapes match by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn background_is_cluttered() {
        let bg = background(64, 48, 500.0, 10.0, 7);
        let full = RegionMask::filled(64, 48);
        let stats = crate::imaging::region_stats(&bg, &full).unwrap();
        assert!(stats.std > 0.5);
        assert!((stats.mean - 500.0).abs() < 20.0);
    }

    #[test]
    fn signature_has_all_regions_and_hot_engine() {
        let sig = signature("veh", 90.0, 64, 40, 3);
        let present: Vec<_> = sig.regions_present().collect();
        assert_eq!(present.len(), 5, "expected all regions, got {present:?}");
        // hot chip strictly hotter than cold chip on the hull
        for y in 0..sig.height() {
            for x in 0..sig.width() {
                if sig.silhouette().get(x, y) {
                    assert!(sig.operating().sample(x, y) > sig.ambient().sample(x, y));
                }
            }
        }
    }

    #[test]
    fn occluder_nonempty_and_reproducible() {
        let a = occluder("tree", 32, 32, 11);
        let b = occluder("tree", 32, 32, 11);
        assert!(a.silhouette().area() > 50);
        assert_eq!(a, b);
    }
}
