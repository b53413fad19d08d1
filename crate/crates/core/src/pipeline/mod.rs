//! End-to-end orchestration: one scene, a batch, or a trajectory sequence.
//!
//! A scene runs through the fixed stage order: draw blend coefficients,
//! synthesize the signature, solve the target scale, solve the occluder
//! placement, place the target, composite, grade, then apply the sensor
//! chain. Every stage failure is reported with the stage name and error code;
//! batches skip failed scenes and record them in the manifest.
//!
//! All randomness of a scene flows from one derived seed, so a
//! `(config, master_seed)` pair determines every output byte.

pub mod config;
pub mod truth;

pub use config::{ExpandConfig, PlacementPolicy, ScenarioConfig};
pub use truth::{
    BoundingBox, FailureReport, GroundTruth, Manifest, ManifestEntry, MaskRle, PartitionRle,
    SceneSeeds, SceneStatus,
};

use crate::compositing::{composite, rescale_chip, solve_occlusion, Occluder, Placement};
use crate::db::SignatureDb;
use crate::error::{Error, Result};
use crate::grading::{grade_scene, relative_error};
use crate::imaging::{RadiometricImage, RegionMask};
use crate::io;
use crate::metrics::{compute_all, MetricSet};
use crate::seed;
use crate::sensor::{apply_sensor, quantize};
use crate::thermal::{assign_lambdas, synthesize_signature, LambdaMap, OperatingConfiguration, ThermalSignature};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::fs;
use std::path::Path;

/// Pipeline stage names used in failure reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    SelectSignature,
    Thermal,
    Scale,
    Occlusion,
    Placement,
    Composite,
    Grading,
    Sensor,
    Export,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::SelectSignature => "select_signature",
            Stage::Thermal => "thermal",
            Stage::Scale => "scale",
            Stage::Occlusion => "occlusion",
            Stage::Placement => "placement",
            Stage::Composite => "composite",
            Stage::Grading => "grading",
            Stage::Sensor => "sensor",
            Stage::Export => "export",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An error tagged with the pipeline stage it occurred in.
#[derive(Debug, thiserror::Error)]
#[error("stage {stage}: {source}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn report(&self) -> FailureReport {
        FailureReport {
            stage: self.stage.as_str().to_string(),
            code: self.source.code().to_string(),
            message: self.source.to_string(),
        }
    }
}

trait StageResult<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError>;
}

impl<T> StageResult<T> for Result<T> {
    fn at(self, stage: Stage) -> std::result::Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// A scenario with all referenced assets loaded and validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    cfg: ScenarioConfig,
    background: RadiometricImage,
    db: SignatureDb,
    occluder: Option<Occluder>,
    operating: OperatingConfiguration,
}

/// One generated scene: the graded pre-sensor image, the post-sensor image
/// (still real-valued), and the ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub pre_sensor: RadiometricImage,
    pub image: RadiometricImage,
    pub truth: GroundTruth,
}

impl GeneratedScene {
    /// The image as it will be stored: clamped and rounded at the configured
    /// bit depth.
    pub fn quantized(&self, bits: u32) -> Result<RadiometricImage> {
        quantize(&self.image, bits)
    }
}

#[derive(Default)]
struct Overrides<'a> {
    signature: Option<&'a ThermalSignature>,
    lambdas: Option<&'a LambdaMap>,
}

impl Scenario {
    /// Load every asset referenced by the configuration.
    pub fn load(cfg: ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        let background = load_raster(&cfg.background)?;
        let db = SignatureDb::load_dir(&cfg.signatures)?;
        let occluder = match &cfg.occluder {
            Some(dir) => Some(crate::db::load_occluder_dir(dir)?),
            None => None,
        };
        Self::from_parts(cfg, background, db, occluder)
    }

    /// Assemble a scenario from in-memory assets (paths in `cfg` are ignored).
    pub fn from_parts(
        cfg: ScenarioConfig,
        background: RadiometricImage,
        db: SignatureDb,
        occluder: Option<Occluder>,
    ) -> Result<Self> {
        cfg.quality.validate()?;
        cfg.sensor.validate()?;
        let operating = cfg.resolve_operating_configuration()?;
        if cfg.quality.rx_star > 0.0 && occluder.is_none() {
            return Err(Error::ConfigError(
                "rx_star > 0 requires an occluder".into(),
            ));
        }
        if let Some(vid) = &cfg.vehicle_id {
            if db.views_of(vid).is_empty() {
                return Err(Error::NotFound(format!(
                    "no signatures for vehicle '{vid}'"
                )));
            }
        }
        Ok(Self {
            cfg,
            background,
            db,
            occluder,
            operating,
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn database(&self) -> &SignatureDb {
        &self.db
    }

    pub fn operating_configuration(&self) -> &OperatingConfiguration {
        &self.operating
    }

    /// Generate one scene from its derived seed.
    pub fn generate_scene(
        &self,
        scene_seed: u64,
    ) -> std::result::Result<GeneratedScene, StageError> {
        self.generate_with(scene_seed, "scene_000000", None, Overrides::default())
    }

    fn generate_with(
        &self,
        scene_seed: u64,
        scene_id: &str,
        master_seed: Option<u64>,
        overrides: Overrides<'_>,
    ) -> std::result::Result<GeneratedScene, StageError> {
        let mut rng = seed::rng_from(scene_seed);
        let quality = &self.cfg.quality;

        // stage: signature selection
        let signature = match overrides.signature {
            Some(sig) => sig,
            None => self.pick_signature(&mut rng).at(Stage::SelectSignature)?,
        };

        // stage: thermal state
        let lambdas = match overrides.lambdas {
            Some(map) => map.clone(),
            None => assign_lambdas(&self.operating, &mut rng),
        };
        let chip = synthesize_signature(signature, &lambdas).at(Stage::Thermal)?;

        // stage: detectability scale
        let (chip, target_sil, target_scale) = if quality.qd_star.is_some() {
            let scale = crate::grading::solve_scale(signature.silhouette().area(), quality)
                .at(Stage::Scale)?;
            let (chip, sil, _) =
                rescale_chip(&chip, signature.silhouette(), None, scale).at(Stage::Scale)?;
            if sil.is_empty() {
                return Err(StageError {
                    stage: Stage::Scale,
                    source: Error::EmptyRegion("scaled silhouette has no pixels"),
                });
            }
            (chip, sil, scale)
        } else {
            (chip, signature.silhouette().clone(), 1.0)
        };

        // stage: occluder placement relative to the target
        let occlusion = match &self.occluder {
            Some(occ) => Some(
                solve_occlusion(
                    &target_sil,
                    occ.silhouette(),
                    quality.rx_star,
                    self.cfg.occlusion_epsilon,
                )
                .at(Stage::Occlusion)?,
            ),
            None => None,
        };

        // stage: target placement in the frame
        let relative = occlusion.map(|s| s.placement);
        let target_at = self
            .place_target(&target_sil, relative, &mut rng)
            .at(Stage::Placement)?;
        let occluder_at = relative.map(|rel| target_at.translated(rel.x, rel.y));

        // stage: composite (occluder over target over background)
        let occ_pair = self
            .occluder
            .as_ref()
            .map(|o| (o, occluder_at.expect("relative placement exists with occluder")));
        let (scene, part) = composite(
            &self.background,
            &chip,
            &target_sil,
            target_at,
            occ_pair,
            self.cfg.ring_width_px,
        )
        .at(Stage::Composite)?;

        // stage: grading to the requested metrics
        let mut graded = grade_scene(&scene, &part, quality).at(Stage::Grading)?;
        graded.solution.target_scale = target_scale;
        let achieved = graded.achieved;
        let k_achieved = achieved.k.ok_or(Error::UndefinedK).at(Stage::Grading)?;
        let worst = relative_error(achieved.rss, quality.rss_star)
            .max(relative_error(achieved.rsc, quality.rsc_star))
            .max(relative_error(k_achieved, quality.k_star));
        if worst > quality.tolerance {
            return Err(StageError {
                stage: Stage::Grading,
                source: Error::ValueError(format!(
                    "graded metrics off by {worst:.3e} (tolerance {:.3e})",
                    quality.tolerance
                )),
            });
        }

        // stage: sensor chain
        let post = apply_sensor(&graded.image, &self.cfg.sensor, &mut rng).at(Stage::Sensor)?;
        let factor = self.cfg.sensor.sampling_factor;
        let achieved_post = if self.cfg.sensor.is_identity() {
            Some(achieved)
        } else {
            part.subsample(factor)
                .ok()
                .and_then(|p| compute_all(&post, &p, quality.calibration).ok())
        };

        let bbox_pre = BoundingBox::from_mask(&part.target_footprint())
            .ok_or(Error::EmptyRegion("target footprint is empty"))
            .at(Stage::Composite)?;
        let truth = GroundTruth {
            scene_id: scene_id.to_string(),
            vehicle_id: signature.vehicle_id().to_string(),
            aspect_azimuth_deg: signature.aspect_azimuth_deg(),
            operating_configuration: self.operating.name.clone(),
            lambdas,
            bbox_pre_sampling: bbox_pre,
            bbox_post_sampling: bbox_pre.at_sampling_factor(factor),
            requested: *quality,
            achieved_pre_sensor: achieved,
            achieved_post_sensor: achieved_post,
            grading: graded.solution,
            target_placement: target_at,
            occluder_placement: occluder_at,
            occluder_name: self.occluder.as_ref().map(|o| o.name().to_string()),
            occluder_graded: self.occluder.as_ref().map(|_| false),
            sampling_factor: factor,
            seeds: SceneSeeds {
                master: master_seed,
                scene: scene_seed,
            },
            partition: PartitionRle::encode(&part),
        };

        Ok(GeneratedScene {
            pre_sensor: graded.image,
            image: post,
            truth,
        })
    }

    fn pick_signature<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<&ThermalSignature> {
        match (&self.cfg.vehicle_id, self.cfg.aspect_azimuth_deg) {
            (Some(vid), Some(az)) => self.db.select_nearest(vid, az),
            (Some(vid), None) => {
                let views = self.db.views_of(vid);
                if views.is_empty() {
                    return Err(Error::NotFound(format!(
                        "no signatures for vehicle '{vid}'"
                    )));
                }
                Ok(views[rng.random_range(0..views.len())])
            }
            (None, Some(az)) => {
                // nearest view of a random vehicle
                let mut vehicles: Vec<&str> =
                    self.db.iter().map(|s| s.vehicle_id()).collect();
                vehicles.dedup();
                let vid = vehicles[rng.random_range(0..vehicles.len())];
                self.db.select_nearest(vid, az)
            }
            (None, None) => {
                let idx = rng.random_range(0..self.db.len());
                Ok(self.db.get(idx).expect("index in range"))
            }
        }
    }

    /// Anchor the target (and the occluder, at its relative offset) inside
    /// the frame according to the placement policy.
    fn place_target<R: Rng + ?Sized>(
        &self,
        target_sil: &RegionMask,
        occluder_rel: Option<Placement>,
        rng: &mut R,
    ) -> Result<Placement> {
        let frame_w = self.background.width() as i64;
        let frame_h = self.background.height() as i64;
        let t_w = target_sil.width() as i64;
        let t_h = target_sil.height() as i64;
        // extent of the combined footprint relative to the target anchor
        let (min_dx, min_dy, max_x, max_y) = match (occluder_rel, &self.occluder) {
            (Some(rel), Some(occ)) => (
                rel.x.min(0),
                rel.y.min(0),
                (rel.x + occ.silhouette().width() as i64).max(t_w),
                (rel.y + occ.silhouette().height() as i64).max(t_h),
            ),
            _ => (0, 0, t_w, t_h),
        };
        match self.cfg.placement {
            PlacementPolicy::Fixed { x, y } => Ok(Placement::new(x, y)),
            PlacementPolicy::UniformRandom { margin_px } => {
                let m = margin_px as i64;
                let x_lo = m - min_dx;
                let x_hi = frame_w - m - max_x;
                let y_lo = m - min_dy;
                let y_hi = frame_h - m - max_y;
                if x_lo > x_hi || y_lo > y_hi {
                    return Err(Error::PlacementError(format!(
                        "combined footprint does not fit the {frame_w}x{frame_h} frame \
                         with margin {margin_px}"
                    )));
                }
                Ok(Placement::new(
                    rng.random_range(x_lo..=x_hi),
                    rng.random_range(y_lo..=y_hi),
                ))
            }
        }
    }
}

fn load_raster(path: &Path) -> Result<RadiometricImage> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pgm") => io::load_image_pgm(path),
        Some("gl64") => io::load_raw_gl64(path),
        _ => io::load_image_png16(path),
    }
}

/// Options for batch and sequence generation.
#[derive(Debug, Clone, Copy, Default)]
pub struct BatchOptions {
    /// Worker threads; `None` uses the default pool.
    pub jobs: Option<usize>,
    /// Also write the lossless pre-sensor intermediate per scene.
    pub debug_intermediates: bool,
}

fn write_scene(
    out_dir: &Path,
    scene_id: &str,
    generated: &GeneratedScene,
    bits: u32,
    debug_intermediates: bool,
) -> Result<(String, String)> {
    let image_name = format!("{scene_id}.png");
    let truth_name = format!("{scene_id}.truth.json");
    let quantized = generated.quantized(bits)?;
    io::save_image_png16(&quantized, &out_dir.join(&image_name))?;
    serde_json::to_writer_pretty(
        fs::File::create(out_dir.join(&truth_name))?,
        &generated.truth,
    )?;
    if debug_intermediates {
        io::save_raw_gl64(
            &generated.pre_sensor,
            &out_dir.join(format!("{scene_id}.presensor.gl64")),
        )?;
    }
    Ok((image_name, truth_name))
}

fn run_indexed<F>(
    scenario: &Scenario,
    jobs: &[(u64, String, u64)], // (index, scene_id, seed)
    master_seed: u64,
    out_dir: &Path,
    opts: BatchOptions,
    generate: F,
) -> Result<Manifest>
where
    F: Fn(&Scenario, u64, &str, u64) -> std::result::Result<GeneratedScene, StageError> + Sync,
{
    fs::create_dir_all(out_dir)?;
    let bits = scenario.cfg.sensor.quantization_bits;
    let run = || -> Vec<ManifestEntry> {
        jobs.par_iter()
            .map(|(index, scene_id, scene_seed)| {
                let outcome = generate(scenario, *scene_seed, scene_id, *index).and_then(|g| {
                    write_scene(out_dir, scene_id, &g, bits, opts.debug_intermediates)
                        .at(Stage::Export)
                });
                match outcome {
                    Ok((image, truth)) => ManifestEntry {
                        index: *index,
                        scene_id: scene_id.clone(),
                        seed: *scene_seed,
                        status: SceneStatus::Ok,
                        image: Some(image),
                        truth: Some(truth),
                        error: None,
                    },
                    Err(stage_err) => ManifestEntry {
                        index: *index,
                        scene_id: scene_id.clone(),
                        seed: *scene_seed,
                        status: SceneStatus::Failed,
                        image: None,
                        truth: None,
                        error: Some(stage_err.report()),
                    },
                }
            })
            .collect()
    };
    let scenes = match opts.jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::ConfigError(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    let successes = scenes
        .iter()
        .filter(|e| e.status == SceneStatus::Ok)
        .count() as u64;
    let manifest = Manifest {
        master_seed,
        count: jobs.len() as u64,
        successes,
        failures: jobs.len() as u64 - successes,
        scenes,
    };
    serde_json::to_writer_pretty(fs::File::create(out_dir.join("manifest.json"))?, &manifest)?;
    Ok(manifest)
}

/// Generate `count` scenes under `master_seed` into `out_dir`.
///
/// Scenes are independent (own seed, own output files) and run in parallel;
/// failures are skipped and reported in the manifest.
pub fn generate_batch(
    scenario: &Scenario,
    count: u64,
    master_seed: u64,
    out_dir: &Path,
    opts: BatchOptions,
) -> Result<Manifest> {
    if count == 0 {
        return Err(Error::ConfigError("count must be at least 1".into()));
    }
    let jobs: Vec<(u64, String, u64)> = (0..count)
        .map(|i| {
            (
                i,
                format!("scene_{i:06}"),
                seed::child_seed(master_seed, "scene", i),
            )
        })
        .collect();
    run_indexed(
        scenario,
        &jobs,
        master_seed,
        out_dir,
        opts,
        |sc, seed_v, id, _| {
            sc.generate_with(seed_v, id, Some(master_seed), Overrides::default())
        },
    )
}

/// One sample of a target trajectory, in a ground frame with x pointing east
/// and y pointing north. Headings and bearings are compass angles: 0 at
/// north, growing clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    /// Target position in meters.
    pub target_position_m: [f64; 2],
    /// Target heading in degrees.
    pub heading_deg: f64,
    /// Sensor position in meters.
    pub sensor_position_m: [f64; 2],
    /// Timestamp in seconds (informational).
    #[serde(default)]
    pub time_s: f64,
}

impl TrajectoryPoint {
    /// Aspect angle presented to the sensor: the target-to-sensor bearing
    /// minus the target heading, normalized to [0, 360).
    pub fn aspect_angle_deg(&self) -> Result<f64> {
        let dx = self.sensor_position_m[0] - self.target_position_m[0];
        let dy = self.sensor_position_m[1] - self.target_position_m[1];
        if dx == 0.0 && dy == 0.0 {
            return Err(Error::ValueError(
                "sensor and target positions coincide".into(),
            ));
        }
        let bearing = dx.atan2(dy).to_degrees();
        Ok((bearing - self.heading_deg).rem_euclid(360.0))
    }
}

/// Load a JSON trajectory file (an array of points).
pub fn load_trajectory(path: &Path) -> Result<Vec<TrajectoryPoint>> {
    let text = fs::read_to_string(path)?;
    let points: Vec<TrajectoryPoint> = serde_json::from_str(&text)
        .map_err(|e| Error::ConfigError(format!("invalid trajectory: {e}")))?;
    if points.is_empty() {
        return Err(Error::ConfigError("trajectory is empty".into()));
    }
    Ok(points)
}

/// Select the database view of `vehicle_id` closest to the aspect angle the
/// trajectory point presents.
pub fn select_view<'a>(
    pt: &TrajectoryPoint,
    db: &'a SignatureDb,
    vehicle_id: &str,
) -> Result<&'a ThermalSignature> {
    let aspect = pt.aspect_angle_deg()?;
    db.select_nearest(vehicle_id, aspect)
}

/// Generate one scene per trajectory point.
///
/// The thermal state is drawn once per sequence and held fixed across frames;
/// only the selected view and the per-frame sensor noise change.
pub fn generate_sequence(
    scenario: &Scenario,
    trajectory: &[TrajectoryPoint],
    master_seed: u64,
    out_dir: &Path,
    opts: BatchOptions,
) -> Result<Manifest> {
    if trajectory.is_empty() {
        return Err(Error::ConfigError("trajectory is empty".into()));
    }
    let vehicle_id = match &scenario.cfg.vehicle_id {
        Some(v) => v.clone(),
        None => {
            let mut vehicles: Vec<&str> =
                scenario.db.iter().map(|s| s.vehicle_id()).collect();
            vehicles.dedup();
            if vehicles.len() != 1 {
                return Err(Error::ConfigError(
                    "sequence generation needs vehicle_id when the database holds \
                     several vehicles"
                        .into(),
                ));
            }
            vehicles[0].to_string()
        }
    };
    // one thermal state for the whole sequence
    let mut lambda_rng = seed::rng_from(seed::child_seed(master_seed, "sequence-lambdas", 0));
    let lambdas = assign_lambdas(&scenario.operating, &mut lambda_rng);

    let views: Vec<&ThermalSignature> = trajectory
        .iter()
        .map(|pt| select_view(pt, &scenario.db, &vehicle_id))
        .collect::<Result<_>>()?;

    let jobs: Vec<(u64, String, u64)> = (0..trajectory.len() as u64)
        .map(|i| {
            (
                i,
                format!("frame_{i:06}"),
                seed::child_seed(master_seed, "frame", i),
            )
        })
        .collect();
    run_indexed(
        scenario,
        &jobs,
        master_seed,
        out_dir,
        opts,
        |sc, seed_v, id, index| {
            sc.generate_with(
                seed_v,
                id,
                Some(master_seed),
                Overrides {
                    signature: Some(views[index as usize]),
                    lambdas: Some(&lambdas),
                },
            )
        },
    )
}

/// Result of re-measuring a scene image against its recorded truth.
#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    /// "pre_sensor" or "post_sensor", decided by the image dimensions.
    pub stage: String,
    pub measured: MetricSet,
    pub recorded: MetricSet,
    pub max_relative_error: f64,
    pub within_tolerance: bool,
}

fn metric_set_distance(a: &MetricSet, b: &MetricSet) -> f64 {
    let mut worst = relative_error(a.rss, b.rss)
        .max(relative_error(a.qd, b.qd))
        .max(relative_error(a.rsc, b.rsc))
        .max(relative_error(a.rx, b.rx));
    worst = match (a.k, b.k) {
        (Some(ka), Some(kb)) => worst.max(relative_error(ka, kb)),
        (None, None) => worst,
        _ => f64::INFINITY,
    };
    worst
}

/// Re-measure the metrics of an emitted image from its ground truth.
///
/// The partition is rebuilt from the truth's RLE masks; the image resolution
/// decides whether the pre-sensor or post-sensor record is checked.
pub fn verify_scene(
    image: &RadiometricImage,
    truth: &GroundTruth,
    tolerance: f64,
) -> Result<VerifyReport> {
    let part = truth.partition.decode()?;
    let factor = truth.sampling_factor.max(1);
    let (stage, part, recorded) = if image.width() == part.width()
        && image.height() == part.height()
    {
        ("pre_sensor", part, truth.achieved_pre_sensor)
    } else if image.width() == part.width() / factor && image.height() == part.height() / factor
    {
        let recorded = truth.achieved_post_sensor.ok_or_else(|| {
            Error::ValueError("truth records no post-sensor metrics to compare against".into())
        })?;
        ("post_sensor", part.subsample(factor)?, recorded)
    } else {
        return Err(Error::ShapeError {
            context: "verify_scene image vs partition",
            expected_w: part.width(),
            expected_h: part.height(),
            actual_w: image.width(),
            actual_h: image.height(),
        });
    };
    let measured = compute_all(image, &part, truth.requested.calibration)?;
    let max_relative_error = metric_set_distance(&measured, &recorded);
    Ok(VerifyReport {
        stage: stage.to_string(),
        measured,
        recorded,
        max_relative_error,
        within_tolerance: max_relative_error <= tolerance,
    })
}
