//! Infrared scene synthesis under image-quality constraints.
//!
//! The library embeds region-labeled vehicle thermal signatures into
//! background imagery so the composed scene hits requested values of the
//! standard embedding metrics (local contrast RSS, detectability Q_D,
//! signal-to-clutter RSC, occlusion ratio R_x, internal contrast K), then
//! applies a sensor-effect chain (Gaussian MTF blur, detector sampling,
//! additive noise). Intra-target thermal variability comes from per-region
//! blending between an ambient-state and an operating-state chip with
//! truncated-Gaussian blend coefficients.
//!
//! The crate is organized as:
//!
//! * [`imaging`] — rasters, masks, region statistics, the C/F1/F2 partition;
//! * [`metrics`] — the five quality metrics;
//! * [`grading`] — closed-form inversion of the metrics into gain/offset
//!   transforms and a target scale;
//! * [`thermal`] — signature blending, blend-coefficient laws, database
//!   expansion;
//! * [`compositing`] — occlusion solving, chip rescaling, the paint pass;
//! * [`sensor`] — the MTF / sampling / noise chain and export quantization;
//! * [`pipeline`] — scene/batch/sequence orchestration, ground truth,
//!   scenario configuration;
//! * [`io`], [`db`] — file formats and on-disk library layouts;
//! * [`synth`] — procedural placeholder assets for demos and tests.
//!
//! All operations are pure (RNGs are passed explicitly), so scenes generate
//! in parallel and a `(config, master_seed)` pair reproduces every byte.

pub mod compositing;
pub mod db;
pub mod error;
pub mod grading;
pub mod imaging;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod sensor;
pub mod synth;
pub mod thermal;

pub use compositing::{composite, rescale_chip, solve_occlusion, Occluder, Placement};
pub use error::{Error, Result};
pub use grading::{
    grade_scene, solve_background, solve_scale, solve_target, GradingSolution, QualitySpec,
};
pub use imaging::{
    apply_gain_offset, make_partition, region_stats, RadiometricImage, RegionMask, RegionStats,
    ScenePartition,
};
pub use metrics::{compute_all, Calibration, MetricSet};
pub use pipeline::{
    generate_batch, generate_sequence, select_view, BatchOptions, GroundTruth, Scenario,
    ScenarioConfig, TrajectoryPoint,
};
pub use sensor::{apply_mtf, apply_sensor, add_noise, quantize, subsample, SensorConfig};
pub use thermal::{
    assign_lambdas, expand_database, sample_lambda, synthesize_signature, LambdaMap,
    OperatingConfiguration, ThermalMode, ThermalSignature, VehicleRegion,
};
