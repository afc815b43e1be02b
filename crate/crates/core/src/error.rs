use thiserror::Error;

/// Domain errors raised by the propagation model.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("path length must be positive, got {0} km")]
    NonPositiveDistance(f64),
    #[error("foliage depth must be non-negative, got {0} m")]
    NegativeDistance(f64),
    #[error("frequency must be positive, got {0} MHz")]
    NonPositiveFrequency(f64),
    #[error("foliage cover factor must lie in [0, 1], got {0}")]
    DeltaOutOfRange(f64),
    #[error("base station antenna height must be positive, got {0} m")]
    NonPositiveHeight(f64),
    #[error("foliage height {h_f_m} m is outside [0, {h_m}] m")]
    HeightOutOfRange { h_f_m: f64, h_m: f64 },
    #[error("geometry needs either delta or both h_m and h_f_m")]
    MissingDeltaSource,
    #[error("delta {delta} disagrees with h_f_m / h_m = {from_heights}")]
    InconsistentDelta { delta: f64, from_heights: f64 },
    #[error(
        "full foliage cover (delta = 1) leaves no free-space segment; free-space loss is singular"
    )]
    FullFoliageCover,
    #[error("invalid delta band: {0}")]
    InvalidBand(String),
    #[error("{0} must be finite")]
    NonFinite(&'static str),
}
