//! Raster, mask, and region-statistics primitives.
//!
//! Every other module works on [`RadiometricImage`] (a single-channel raster of
//! real-valued gray levels) and [`RegionMask`] (a boolean raster selecting a
//! region). Gray levels stay real-valued through the whole pipeline;
//! quantization to integer storage happens only at export.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Single-channel raster of real-valued gray levels (GL), row-major.
///
/// Invariants (enforced at construction): positive dimensions, `samples.len()
/// == width * height`, every sample finite.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiometricImage {
    width: u32,
    height: u32,
    samples: Vec<f64>,
}

impl RadiometricImage {
    /// Build an image from row-major samples, validating the invariants.
    pub fn new(width: u32, height: u32, samples: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ValueError(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if samples.len() != expected {
            return Err(Error::ValueError(format!(
                "sample buffer length {} does not match {width}x{height}",
                samples.len()
            )));
        }
        if !samples.iter().all(|v| v.is_finite()) {
            return Err(Error::ValueError("non-finite sample in image".into()));
        }
        Ok(Self {
            width,
            height,
            samples,
        })
    }

    /// Constant-valued image.
    pub fn filled(width: u32, height: u32, value: f64) -> Result<Self> {
        Self::new(
            width,
            height,
            vec![value; width as usize * height as usize],
        )
    }

    /// Internal constructor for buffers already known to satisfy the invariants.
    pub(crate) fn from_parts(width: u32, height: u32, samples: Vec<f64>) -> Self {
        debug_assert_eq!(samples.len(), width as usize * height as usize);
        debug_assert!(samples.iter().all(|v| v.is_finite()));
        Self {
            width,
            height,
            samples,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    #[inline]
    pub fn sample(&self, x: u32, y: u32) -> f64 {
        self.samples[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub(crate) fn set_sample(&mut self, x: u32, y: u32, value: f64) {
        debug_assert!(value.is_finite());
        self.samples[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn same_shape(&self, other: &RadiometricImage) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_mask_shape(&self, mask: &RegionMask, context: &'static str) -> Result<()> {
        if self.width != mask.width() || self.height != mask.height() {
            return Err(Error::ShapeError {
                context,
                expected_w: self.width,
                expected_h: self.height,
                actual_w: mask.width(),
                actual_h: mask.height(),
            });
        }
        Ok(())
    }
}

/// Boolean raster selecting a pixel region. Dimensions must match the image it
/// indexes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl RegionMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width as usize * height as usize],
        }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width as usize * height as usize {
            return Err(Error::ValueError(format!(
                "mask buffer length {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width as usize * height as usize],
        }
    }

    /// Build from a predicate over (x, y).
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of set pixels.
    pub fn area(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    fn assert_same_shape(&self, other: &RegionMask) {
        assert!(
            self.width == other.width && self.height == other.height,
            "mask shape mismatch: {}x{} vs {}x{}",
            self.width,
            self.height,
            other.width,
            other.height
        );
    }

    pub fn union(&self, other: &RegionMask) -> RegionMask {
        self.assert_same_shape(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a || b)
            .collect();
        RegionMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    pub fn intersection(&self, other: &RegionMask) -> RegionMask {
        self.assert_same_shape(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && b)
            .collect();
        RegionMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// Pixels in `self` but not in `other`.
    pub fn difference(&self, other: &RegionMask) -> RegionMask {
        self.assert_same_shape(other);
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(&a, &b)| a && !b)
            .collect();
        RegionMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    pub fn overlap_area(&self, other: &RegionMask) -> usize {
        self.assert_same_shape(other);
        self.bits
            .iter()
            .zip(&other.bits)
            .filter(|&(&a, &b)| a && b)
            .count()
    }

    /// Chebyshev (square structuring element) dilation of the given radius.
    /// Separable: a row pass followed by a column pass.
    pub fn dilate_chebyshev(&self, radius: u32) -> RegionMask {
        if radius == 0 {
            return self.clone();
        }
        let w = self.width as usize;
        let h = self.height as usize;
        let r = radius as usize;
        let mut rows = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if self.bits[y * w + x] {
                    let x0 = x.saturating_sub(r);
                    let x1 = (x + r).min(w - 1);
                    for out in &mut rows[y * w + x0..=y * w + x1] {
                        *out = true;
                    }
                }
            }
        }
        let mut bits = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if rows[y * w + x] {
                    let y0 = y.saturating_sub(r);
                    let y1 = (y + r).min(h - 1);
                    for yy in y0..=y1 {
                        bits[yy * w + x] = true;
                    }
                }
            }
        }
        RegionMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// Place this mask into a `frame_w` x `frame_h` frame with its top-left
    /// corner at `(x, y)`. Every set pixel must land inside the frame.
    pub fn place_into(&self, frame_w: u32, frame_h: u32, x: i64, y: i64) -> Result<RegionMask> {
        let mut out = RegionMask::new(frame_w, frame_h);
        for sy in 0..self.height {
            for sx in 0..self.width {
                if !self.get(sx, sy) {
                    continue;
                }
                let fx = x + sx as i64;
                let fy = y + sy as i64;
                if fx < 0 || fy < 0 || fx >= frame_w as i64 || fy >= frame_h as i64 {
                    return Err(Error::PlacementError(format!(
                        "silhouette pixel ({sx},{sy}) placed at ({fx},{fy}) falls outside \
                         {frame_w}x{frame_h} frame"
                    )));
                }
                out.set(fx as u32, fy as u32, true);
            }
        }
        Ok(out)
    }

    /// Tight bounding box of the set pixels as (x0, y0, x1, y1), inclusive.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let mut bbox: Option<(u32, u32, u32, u32)> = None;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    bbox = Some(match bbox {
                        None => (x, y, x, y),
                        Some((x0, y0, x1, y1)) => (x0.min(x), y0.min(y), x1.max(x), y1.max(y)),
                    });
                }
            }
        }
        bbox
    }
}

/// Mean, population standard deviation, and pixel area of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionStats {
    /// Mean gray level.
    pub mean: f64,
    /// Population standard deviation (divide by N).
    pub std: f64,
    /// Region area in pixels.
    pub area: usize,
}

/// Mean and population std of the masked samples.
///
/// The population convention (divide by N) is used: the statistic describes a
/// fixed region, not a sample estimate.
pub fn region_stats(img: &RadiometricImage, mask: &RegionMask) -> Result<RegionStats> {
    img.check_mask_shape(mask, "region_stats")?;
    let mut sum = 0.0;
    let mut n = 0usize;
    for (v, &m) in img.samples().iter().zip(mask.bits()) {
        if m {
            sum += v;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::EmptyRegion("region_stats on empty mask"));
    }
    let mean = sum / n as f64;
    let mut ss = 0.0;
    for (v, &m) in img.samples().iter().zip(mask.bits()) {
        if m {
            let d = v - mean;
            ss += d * d;
        }
    }
    Ok(RegionStats {
        mean,
        std: (ss / n as f64).sqrt(),
        area: n,
    })
}

/// Copy of `img` with masked pixels mapped to `gain * v + offset`.
pub fn apply_gain_offset(
    img: &RadiometricImage,
    mask: &RegionMask,
    gain: f64,
    offset: f64,
) -> Result<RadiometricImage> {
    img.check_mask_shape(mask, "apply_gain_offset")?;
    if !gain.is_finite() || !offset.is_finite() {
        return Err(Error::ValueError(format!(
            "gain/offset must be finite, got gain={gain}, offset={offset}"
        )));
    }
    let samples = img
        .samples()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &m)| if m { gain * v + offset } else { v })
        .collect();
    Ok(RadiometricImage::from_parts(
        img.width(),
        img.height(),
        samples,
    ))
}

/// Disjoint masks partitioning a scene frame around one target.
///
/// `visible_target` is the target region C; `local_background` is the ring F1
/// around the full target footprint; `far_background` is the remaining
/// background F2; `occluded` holds target pixels hidden by an occluder. The
/// global background F is F1 ∪ F2. When an occluder is present its footprint
/// pixels belong to none of the four masks (the occluder is its own object and
/// never contributes to background statistics).
#[derive(Debug, Clone, PartialEq)]
pub struct ScenePartition {
    pub visible_target: RegionMask,
    pub local_background: RegionMask,
    pub far_background: RegionMask,
    pub occluded: RegionMask,
}

impl ScenePartition {
    pub fn width(&self) -> u32 {
        self.visible_target.width()
    }

    pub fn height(&self) -> u32 {
        self.visible_target.height()
    }

    /// Global background F = F1 ∪ F2.
    pub fn background(&self) -> RegionMask {
        self.local_background.union(&self.far_background)
    }

    /// Total target footprint area: visible plus occluded pixels.
    pub fn total_target_area(&self) -> usize {
        self.visible_target.area() + self.occluded.area()
    }

    /// Full target footprint (visible plus occluded).
    pub fn target_footprint(&self) -> RegionMask {
        self.visible_target.union(&self.occluded)
    }

    /// Verify pairwise disjointness of the four masks.
    pub fn is_disjoint(&self) -> bool {
        let masks = [
            &self.visible_target,
            &self.local_background,
            &self.far_background,
            &self.occluded,
        ];
        for i in 0..masks.len() {
            for j in i + 1..masks.len() {
                if masks[i].overlap_area(masks[j]) != 0 {
                    return false;
                }
            }
        }
        true
    }

    /// Move target pixels under `occluder_footprint` from C to `occluded`, and
    /// remove the occluder footprint from both background masks.
    pub fn with_occluder(&self, occluder_footprint: &RegionMask) -> ScenePartition {
        ScenePartition {
            visible_target: self.visible_target.difference(occluder_footprint),
            local_background: self.local_background.difference(occluder_footprint),
            far_background: self.far_background.difference(occluder_footprint),
            occluded: self
                .occluded
                .union(&self.visible_target.intersection(occluder_footprint)),
        }
    }

    /// Partition at the post-sampling resolution: each output pixel takes the
    /// plurality label of its factor x factor block, ties broken in the order
    /// target > occluded > local background > far background > unlabeled.
    pub fn subsample(&self, factor: u32) -> Result<ScenePartition> {
        if factor == 0 {
            return Err(Error::ValueError("sampling factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let f = factor;
        let out_w = self.width() / f;
        let out_h = self.height() / f;
        if out_w == 0 || out_h == 0 {
            return Err(Error::TargetTooSmall(0.0));
        }
        let mut parts = ScenePartition {
            visible_target: RegionMask::new(out_w, out_h),
            local_background: RegionMask::new(out_w, out_h),
            far_background: RegionMask::new(out_w, out_h),
            occluded: RegionMask::new(out_w, out_h),
        };
        for oy in 0..out_h {
            for ox in 0..out_w {
                // counts: [unlabeled, F2, F1, occluded, C]
                let mut counts = [0u32; 5];
                for dy in 0..f {
                    for dx in 0..f {
                        let x = ox * f + dx;
                        let y = oy * f + dy;
                        let label = if self.visible_target.get(x, y) {
                            4
                        } else if self.occluded.get(x, y) {
                            3
                        } else if self.local_background.get(x, y) {
                            2
                        } else if self.far_background.get(x, y) {
                            1
                        } else {
                            0
                        };
                        counts[label] += 1;
                    }
                }
                // plurality; on ties the higher-priority label (higher index) wins
                let mut best = 0usize;
                for label in 1..5 {
                    if counts[label] >= counts[best] {
                        best = label;
                    }
                }
                match best {
                    4 => parts.visible_target.set(ox, oy, true),
                    3 => parts.occluded.set(ox, oy, true),
                    2 => parts.local_background.set(ox, oy, true),
                    1 => parts.far_background.set(ox, oy, true),
                    _ => {}
                }
            }
        }
        Ok(parts)
    }
}

/// Build the C / F1 / F2 partition for a silhouette placed into a frame.
///
/// C is the placed silhouette; F1 is the Chebyshev dilation of C by
/// `ring_width` minus C, clipped to the frame; F2 is the rest of the frame.
/// `occluded` starts empty (see [`ScenePartition::with_occluder`]).
pub fn make_partition(
    silhouette: &RegionMask,
    placement: (i64, i64),
    frame: (u32, u32),
    ring_width: u32,
) -> Result<ScenePartition> {
    if ring_width == 0 {
        return Err(Error::PlacementError(
            "ring width must be at least 1 pixel".into(),
        ));
    }
    let (frame_w, frame_h) = frame;
    let target = silhouette.place_into(frame_w, frame_h, placement.0, placement.1)?;
    let dilated = target.dilate_chebyshev(ring_width);
    let ring = dilated.difference(&target);
    let covered = dilated; // target ∪ ring
    let far = RegionMask::from_fn(frame_w, frame_h, |x, y| !covered.get(x, y));
    Ok(ScenePartition {
        visible_target: target,
        local_background: ring,
        far_background: far,
        occluded: RegionMask::new(frame_w, frame_h),
    })
}
