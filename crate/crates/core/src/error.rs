//! Error type shared by every module of the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T, E = Error> = std::result::Result<T, E>;

/// All failure modes of the scene-generation library.
#[derive(Debug, Error)]
pub enum Error {
    /// A statistics or grading operation was asked to run on a mask with no pixels.
    #[error("empty region: {0}")]
    EmptyRegion(&'static str),

    /// Two rasters that must share dimensions do not.
    #[error("shape mismatch in {context}: {expected_w}x{expected_h} vs {actual_w}x{actual_h}")]
    ShapeError {
        context: &'static str,
        expected_w: u32,
        expected_h: u32,
        actual_w: u32,
        actual_h: u32,
    },

    /// A chip or silhouette does not fit the frame at the requested offset,
    /// or a placement parameter is out of range.
    #[error("invalid placement: {0}")]
    PlacementError(String),

    /// A numeric argument is non-finite or out of its documented range.
    #[error("invalid value: {0}")]
    ValueError(String),

    /// The background region has zero standard deviation; no gain can create clutter.
    #[error("degenerate background: zero standard deviation over F")]
    DegenerateBackground,

    /// Internal contrast K is 0/0 when RSS is zero.
    #[error("internal contrast undefined: RSS is zero")]
    UndefinedK,

    /// A requested internal contrast outside [-1, 1] cannot be realised.
    #[error("infeasible contrast: |k*| = {0} exceeds 1")]
    InfeasibleContrast(f64),

    /// The target region has zero variance, so no affine transform reaches |k*| < 1.
    #[error("flat target: zero variance, cannot synthesise internal texture")]
    FlatTarget,

    /// Requested detectability implies a target smaller than one pixel.
    #[error("target too small: requested area {0:.3} px")]
    TargetTooSmall(f64),

    /// No occluder placement achieves the requested occlusion ratio.
    #[error(
        "occlusion infeasible: requested rx={requested}, best achievable {best} (epsilon {epsilon})"
    )]
    OcclusionInfeasible {
        requested: f64,
        epsilon: f64,
        best: f64,
    },

    /// A scenario, database, or operating-configuration entry is inconsistent.
    #[error("configuration error: {0}")]
    ConfigError(String),

    /// A database lookup found no matching entry.
    #[error("not found: {0}")]
    NotFound(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("image codec error: {0}")]
    Image(#[from] image::ImageError),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable code, used in batch manifests.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyRegion(_) => "EmptyRegion",
            Error::ShapeError { .. } => "ShapeError",
            Error::PlacementError(_) => "PlacementError",
            Error::ValueError(_) => "ValueError",
            Error::DegenerateBackground => "DegenerateBackground",
            Error::UndefinedK => "UndefinedK",
            Error::InfeasibleContrast(_) => "InfeasibleContrast",
            Error::FlatTarget => "FlatTarget",
            Error::TargetTooSmall(_) => "TargetTooSmall",
            Error::OcclusionInfeasible { .. } => "OcclusionInfeasible",
            Error::ConfigError(_) => "ConfigError",
            Error::NotFound(_) => "NotFound",
            Error::Io(_) => "Io",
            Error::Image(_) => "Image",
            Error::Json(_) => "Json",
        }
    }
}
