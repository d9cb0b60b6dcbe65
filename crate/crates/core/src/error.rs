use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape parameter s = {0} is outside the supported range s >= 1")]
    UnsupportedShape(f64),

    #[error("invalid grid resolution: {0}")]
    InvalidResolution(String),

    #[error("profile inversion failed: {0}")]
    ProfileInversion(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("zonal profile flagged west-facing but F > 0 at r = {r} (F = {value})")]
    NotWestFacing { r: f64, value: f64 },

    #[error("projection solve failed for Fourier mode {mode}; increase the resolution")]
    ProjectionSolve { mode: usize },

    #[error("Misiolek curvature must be positive for the second-variation formula, got {0}")]
    NonPositiveCurvature(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("gap evaluations disagree: direct {direct:e}, closed form {closed_form:e}")]
    GapMismatch { direct: f64, closed_form: f64 },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed input: {0}")]
    Parse(String),
}
