//! Per-scene ground truth and the batch manifest.
//!
//! Every generated scene carries a `truth.json` with the requested and
//! achieved metrics, the grading transforms, placements, seeds, and a
//! run-length encoding of the partition masks so the scene can be re-measured
//! from the files alone.

use crate::compositing::Placement;
use crate::error::{Error, Result};
use crate::grading::{GradingSolution, QualitySpec};
use crate::imaging::{RegionMask, ScenePartition};
use crate::metrics::MetricSet;
use crate::thermal::LambdaMap;
use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, inclusive origin, exclusive extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl BoundingBox {
    pub fn from_mask(mask: &RegionMask) -> Option<BoundingBox> {
        mask.bounding_box().map(|(x0, y0, x1, y1)| BoundingBox {
            x: x0,
            y: y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        })
    }

    /// Map composition-resolution coordinates to post-sampling coordinates.
    pub fn at_sampling_factor(&self, factor: u32) -> BoundingBox {
        if factor <= 1 {
            return *self;
        }
        let x0 = self.x / factor;
        let y0 = self.y / factor;
        let x1 = (self.x + self.width - 1) / factor;
        let y1 = (self.y + self.height - 1) / factor;
        BoundingBox {
            x: x0,
            y: y0,
            width: x1 - x0 + 1,
            height: y1 - y0 + 1,
        }
    }
}

/// Run-length encoding of one mask: alternating run lengths, starting with a
/// (possibly zero) run of unset pixels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskRle {
    pub runs: Vec<u32>,
}

impl MaskRle {
    pub fn encode(mask: &RegionMask) -> MaskRle {
        let mut runs = Vec::new();
        let mut current = false;
        let mut len = 0u32;
        for &bit in mask.bits() {
            if bit == current {
                len += 1;
            } else {
                runs.push(len);
                current = bit;
                len = 1;
            }
        }
        runs.push(len);
        MaskRle { runs }
    }

    pub fn decode(&self, width: u32, height: u32) -> Result<RegionMask> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        let mut value = false;
        for &run in &self.runs {
            bits.extend(std::iter::repeat(value).take(run as usize));
            value = !value;
        }
        if bits.len() != width as usize * height as usize {
            return Err(Error::ValueError(format!(
                "mask RLE decodes to {} pixels, expected {}",
                bits.len(),
                width as usize * height as usize
            )));
        }
        RegionMask::from_bits(width, height, bits)
    }
}

/// RLE of the whole partition at composition resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionRle {
    pub width: u32,
    pub height: u32,
    pub visible_target: MaskRle,
    pub local_background: MaskRle,
    pub far_background: MaskRle,
    pub occluded: MaskRle,
}

impl PartitionRle {
    pub fn encode(part: &ScenePartition) -> PartitionRle {
        PartitionRle {
            width: part.width(),
            height: part.height(),
            visible_target: MaskRle::encode(&part.visible_target),
            local_background: MaskRle::encode(&part.local_background),
            far_background: MaskRle::encode(&part.far_background),
            occluded: MaskRle::encode(&part.occluded),
        }
    }

    pub fn decode(&self) -> Result<ScenePartition> {
        Ok(ScenePartition {
            visible_target: self.visible_target.decode(self.width, self.height)?,
            local_background: self.local_background.decode(self.width, self.height)?,
            far_background: self.far_background.decode(self.width, self.height)?,
            occluded: self.occluded.decode(self.width, self.height)?,
        })
    }
}

/// Seeds that reproduce one scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneSeeds {
    /// Batch master seed, when generated as part of a batch.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master: Option<u64>,
    /// The scene's own derived seed; all scene randomness flows from it.
    pub scene: u64,
}

/// The annotation record written next to every scene image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub scene_id: String,
    pub vehicle_id: String,
    pub aspect_azimuth_deg: f64,
    pub operating_configuration: String,
    /// Blend coefficient drawn for each vehicle region.
    pub lambdas: LambdaMap,
    /// Target footprint box at composition resolution.
    pub bbox_pre_sampling: BoundingBox,
    /// The same box at the exported (post-sampling) resolution.
    pub bbox_post_sampling: BoundingBox,
    pub requested: QualitySpec,
    /// Metrics measured on the graded scene before the sensor chain.
    pub achieved_pre_sensor: MetricSet,
    /// Metrics measured after the sensor chain, when still measurable.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub achieved_post_sensor: Option<MetricSet>,
    pub grading: GradingSolution,
    pub target_placement: Placement,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occluder_placement: Option<Placement>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occluder_name: Option<String>,
    /// The occluder keeps its own radiometry; recorded so consumers know the
    /// occluder region was not graded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occluder_graded: Option<bool>,
    pub sampling_factor: u32,
    pub seeds: SceneSeeds,
    /// Partition masks at composition resolution.
    pub partition: PartitionRle,
}

/// Outcome of one scene in a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneStatus {
    Ok,
    Failed,
}

/// Structured failure: which stage broke and why.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureReport {
    pub stage: String,
    pub code: String,
    pub message: String,
}

/// One manifest line per scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: u64,
    pub scene_id: String,
    pub seed: u64,
    pub status: SceneStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<FailureReport>,
}

/// Batch summary written once all scenes completed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub master_seed: u64,
    pub count: u64,
    pub successes: u64,
    pub failures: u64,
    pub scenes: Vec<ManifestEntry>,
}
