//! Foliage-aware propagation loss.
//!
//! A link of total length `d` is split into a segment that passes through
//! vegetation (`d_f = δ·d`) and a free-space remainder (`d_fsp = (1 − δ)·d`).
//! The vegetated segment is charged with Weissberger's exponential-decay
//! foliage loss, the free-space segment with the usual free-space path loss,
//! and the link total is their sum.
//!
//! Distances are carried in meters inside [`PathSplit`]; the public entry
//! points take kilometers where link lengths are concerned and meters for
//! foliage depth and heights.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Free-space constant (dB) for distance in km and frequency in MHz.
pub const DEFAULT_FSPL_CONSTANT: f64 = 32.45;

/// Foliage depth (m) at which Weissberger switches from the linear to the power branch.
pub const WEISSBERGER_LINEAR_LIMIT_M: f64 = 14.0;

/// Upper end of the depth range over which Weissberger was fitted.
pub const WEISSBERGER_VALID_LIMIT_M: f64 = 400.0;

const WEISSBERGER_FREQ_EXPONENT: f64 = 0.284;
const WEISSBERGER_LINEAR_COEFF: f64 = 0.45;
const WEISSBERGER_POWER_COEFF: f64 = 1.33;
const WEISSBERGER_DEPTH_EXPONENT: f64 = 0.588;

/// Tolerance for agreement between an explicit delta and `h_f_m / h_m`.
pub const DELTA_CONSISTENCY_TOL: f64 = 1e-12;

/// Which branch of the foliage model produced a loss value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Zero,
    Linear,
    Power,
}

/// Whether the foliage depth lies inside the fitted range of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Validity {
    InDomain,
    Extrapolated,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Zero => "Zero",
            Regime::Linear => "Linear",
            Regime::Power => "Power",
        })
    }
}

impl fmt::Display for Validity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Validity::InDomain => "InDomain",
            Validity::Extrapolated => "Extrapolated",
        })
    }
}

/// One link's geometry. The foliage cover factor comes either from `delta`
/// directly or from the foliage and antenna heights (`δ = h_f / h`).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinkGeometry {
    pub d_km: f64,
    pub h_m: Option<f64>,
    pub h_f_m: Option<f64>,
    pub delta: Option<f64>,
}

impl LinkGeometry {
    pub fn with_delta(d_km: f64, delta: f64) -> Self {
        Self {
            d_km,
            delta: Some(delta),
            ..Self::default()
        }
    }

    pub fn with_heights(d_km: f64, h_m: f64, h_f_m: f64) -> Self {
        Self {
            d_km,
            h_m: Some(h_m),
            h_f_m: Some(h_f_m),
            delta: None,
        }
    }

    /// Height of the free-space part of the triangle, `h − h_f`.
    pub fn h_fsp_m(&self) -> Option<f64> {
        Some(self.h_m? - self.h_f_m?)
    }

    /// Validates the geometry and resolves its foliage cover factor.
    pub fn resolve_delta(&self) -> Result<f64, ModelError> {
        check_distance_km(self.d_km)?;
        let from_heights = match (self.h_m, self.h_f_m) {
            (Some(h_m), Some(h_f_m)) => Some(delta_from_heights(h_f_m, h_m)?),
            (None, None) => None,
            _ => return Err(ModelError::MissingDeltaSource),
        };
        match (self.delta, from_heights) {
            (Some(delta), Some(h)) => {
                check_delta(delta)?;
                if (delta - h).abs() > DELTA_CONSISTENCY_TOL {
                    return Err(ModelError::InconsistentDelta {
                        delta,
                        from_heights: h,
                    });
                }
                Ok(h)
            }
            (Some(delta), None) => {
                check_delta(delta)?;
                Ok(delta)
            }
            (None, Some(h)) => Ok(h),
            (None, None) => Err(ModelError::MissingDeltaSource),
        }
    }
}

/// Decomposition of a path into foliage and free-space segments, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSplit {
    pub d_f_m: f64,
    pub d_fsp_m: f64,
    pub delta: f64,
}

impl PathSplit {
    pub fn total_m(&self) -> f64 {
        self.d_f_m + self.d_fsp_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoliageLossResult {
    pub loss_db: f64,
    pub regime: Regime,
    pub validity: Validity,
}

/// Per-term and total loss for one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub l_foliage_db: f64,
    pub l_fsp_db: f64,
    pub l_total_db: f64,
    pub foliage: FoliageLossResult,
    pub split: PathSplit,
}

/// Admissible band for picking a nominal foliage factor that stays inside
/// `[delta_min, delta_max]` under a fractional perturbation `sigma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaBounds {
    pub delta_min: f64,
    pub delta_max: f64,
    pub sigma: f64,
    pub alpha_low_min: f64,
    pub alpha_high_max: f64,
}

impl DeltaBounds {
    pub fn admits(&self, alpha: f64) -> bool {
        self.alpha_low_min <= alpha && alpha <= self.alpha_high_max
    }
}

/// Model parameters. Only the free-space constant is tunable; 32.45 is
/// the km/MHz form of Friis rounded to two decimals, and 32.44, 32.4478
/// or 32.5 can be selected for comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationModel {
    pub fspl_constant: f64,
}

impl Default for PropagationModel {
    fn default() -> Self {
        Self {
            fspl_constant: DEFAULT_FSPL_CONSTANT,
        }
    }
}

impl PropagationModel {
    pub fn new(fspl_constant: f64) -> Result<Self, ModelError> {
        if !fspl_constant.is_finite() {
            return Err(ModelError::NonFinite("free-space constant"));
        }
        Ok(Self { fspl_constant })
    }

    /// `K + 20·log10(d_km) + 20·log10(f_mhz)`.
    pub fn free_space_loss(&self, d_km: f64, f_mhz: f64) -> Result<f64, ModelError> {
        check_distance_km(d_km)?;
        check_frequency(f_mhz)?;
        Ok(self.fspl_constant + 20.0 * d_km.log10() + 20.0 * f_mhz.log10())
    }

    pub fn total_loss(
        &self,
        geometry: &LinkGeometry,
        f_mhz: f64,
    ) -> Result<LossBreakdown, ModelError> {
        let delta = geometry.resolve_delta()?;
        self.loss_for_delta(geometry.d_km, delta, f_mhz)
    }

    /// Total loss for a link given its length and foliage cover factor.
    pub fn loss_for_delta(
        &self,
        d_km: f64,
        delta: f64,
        f_mhz: f64,
    ) -> Result<LossBreakdown, ModelError> {
        check_frequency(f_mhz)?;
        let split = foliage_split(d_km, delta)?;
        if split.d_fsp_m <= 0.0 {
            return Err(ModelError::FullFoliageCover);
        }
        let foliage = weissberger_loss(f_mhz, split.d_f_m)?;
        let l_fsp_db = self.free_space_loss(split.d_fsp_m / 1000.0, f_mhz)?;
        Ok(LossBreakdown {
            l_foliage_db: foliage.loss_db,
            l_fsp_db,
            l_total_db: foliage.loss_db + l_fsp_db,
            foliage,
            split,
        })
    }
}

fn check_distance_km(d_km: f64) -> Result<(), ModelError> {
    if d_km > 0.0 && d_km.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveDistance(d_km))
    }
}

fn check_frequency(f_mhz: f64) -> Result<(), ModelError> {
    if f_mhz > 0.0 && f_mhz.is_finite() {
        Ok(())
    } else {
        Err(ModelError::NonPositiveFrequency(f_mhz))
    }
}

fn check_delta(delta: f64) -> Result<(), ModelError> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(ModelError::DeltaOutOfRange(delta))
    }
}

/// Splits a `d_km` path into its foliage and free-space segments.
pub fn foliage_split(d_km: f64, delta: f64) -> Result<PathSplit, ModelError> {
    check_distance_km(d_km)?;
    check_delta(delta)?;
    let d_m = d_km * 1000.0;
    Ok(PathSplit {
        d_f_m: delta * d_m,
        d_fsp_m: (1.0 - delta) * d_m,
        delta,
    })
}

/// Foliage cover factor from similar triangles: `h_f / h`.
pub fn delta_from_heights(h_f_m: f64, h_m: f64) -> Result<f64, ModelError> {
    if !(h_m > 0.0 && h_m.is_finite()) {
        return Err(ModelError::NonPositiveHeight(h_m));
    }
    if !(0.0..=h_m).contains(&h_f_m) {
        return Err(ModelError::HeightOutOfRange { h_f_m, h_m });
    }
    Ok(h_f_m / h_m)
}

pub fn split_from_heights(d_km: f64, h_m: f64, h_f_m: f64) -> Result<PathSplit, ModelError> {
    let delta = delta_from_heights(h_f_m, h_m)?;
    foliage_split(d_km, delta)
}

/// Weissberger foliage loss for `d_f_m` meters of vegetation.
///
/// The frequency enters the model in GHz. Depths up to 14 m use the
/// linear branch (14 m itself included); deeper paths use the power branch,
/// which is still evaluated past 400 m but flagged [`Validity::Extrapolated`].
pub fn weissberger_loss(f_mhz: f64, d_f_m: f64) -> Result<FoliageLossResult, ModelError> {
    check_frequency(f_mhz)?;
    if d_f_m.is_nan() || d_f_m < 0.0 {
        return Err(ModelError::NegativeDistance(d_f_m));
    }
    if d_f_m.is_infinite() {
        return Err(ModelError::NonFinite("foliage depth"));
    }
    let freq_term = (f_mhz / 1000.0).powf(WEISSBERGER_FREQ_EXPONENT);
    let (loss_db, regime) = if d_f_m == 0.0 {
        (0.0, Regime::Zero)
    } else if d_f_m <= WEISSBERGER_LINEAR_LIMIT_M {
        (WEISSBERGER_LINEAR_COEFF * freq_term * d_f_m, Regime::Linear)
    } else {
        (
            WEISSBERGER_POWER_COEFF * freq_term * d_f_m.powf(WEISSBERGER_DEPTH_EXPONENT),
            Regime::Power,
        )
    };
    let validity = if d_f_m > WEISSBERGER_VALID_LIMIT_M {
        Validity::Extrapolated
    } else {
        Validity::InDomain
    };
    Ok(FoliageLossResult {
        loss_db,
        regime,
        validity,
    })
}

/// Free-space loss with the default constant.
pub fn free_space_loss(d_km: f64, f_mhz: f64) -> Result<f64, ModelError> {
    PropagationModel::default().free_space_loss(d_km, f_mhz)
}

/// Total loss with the default model.
pub fn total_loss(geometry: &LinkGeometry, f_mhz: f64) -> Result<LossBreakdown, ModelError> {
    PropagationModel::default().total_loss(geometry, f_mhz)
}

/// Bounds on the nominal foliage factor so that a `±sigma` excursion stays
/// inside `[delta_min, delta_max]`.
pub fn delta_bounds(delta_min: f64, delta_max: f64, sigma: f64) -> Result<DeltaBounds, ModelError> {
    if !(0.0 <= delta_min && delta_min < delta_max && delta_max <= 1.0) {
        return Err(ModelError::InvalidBand(format!(
            "need 0 <= delta_min < delta_max <= 1, got [{delta_min}, {delta_max}]"
        )));
    }
    if !(0.0..1.0).contains(&sigma) {
        return Err(ModelError::InvalidBand(format!(
            "sigma must lie in [0, 1), got {sigma}"
        )));
    }
    let alpha_low_min = delta_min / (1.0 - sigma);
    let alpha_high_max = delta_max / (1.0 + sigma);
    if alpha_low_min > alpha_high_max {
        return Err(ModelError::InvalidBand(format!(
            "empty band: lower pick {alpha_low_min} exceeds upper pick {alpha_high_max}"
        )));
    }
    Ok(DeltaBounds {
        delta_min,
        delta_max,
        sigma,
        alpha_low_min,
        alpha_high_max,
    })
}

/// Largest foliage cover factor for which the foliage depth stays inside
/// the fitted 400 m range of the Weissberger model, capped at 1.
pub fn weissberger_delta_limit(d_km: f64) -> Result<f64, ModelError> {
    check_distance_km(d_km)?;
    Ok((WEISSBERGER_VALID_LIMIT_M / (d_km * 1000.0)).min(1.0))
}
