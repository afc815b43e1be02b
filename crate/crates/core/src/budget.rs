//! Link-budget arithmetic and inverse solvers on top of the propagation model.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::propagation::PropagationModel;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error("no solution: loss budget {budget_db} dB is below the minimum loss {min_loss_db} dB")]
    NoSolution { budget_db: f64, min_loss_db: f64 },
    #[error("loss budget {budget_db} dB exceeds the loss {loss_at_hi_db} dB at the search limit {d_hi_km} km")]
    BracketExceeded {
        budget_db: f64,
        loss_at_hi_db: f64,
        d_hi_km: f64,
    },
    #[error("invalid radio configuration: {0}")]
    InvalidRadio(String),
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Transmitter, antennas and receiver of one link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadioConfig {
    pub tx_power_dbm: f64,
    pub tx_gain_dbi: f64,
    pub rx_gain_dbi: f64,
    /// Negative for real receivers, e.g. -137 dBm.
    pub rx_sensitivity_dbm: f64,
    #[serde(default)]
    pub required_margin_db: f64,
}

impl RadioConfig {
    pub fn validate(&self) -> Result<(), SolveError> {
        let fields = [
            ("tx_power_dbm", self.tx_power_dbm),
            ("tx_gain_dbi", self.tx_gain_dbi),
            ("rx_gain_dbi", self.rx_gain_dbi),
            ("rx_sensitivity_dbm", self.rx_sensitivity_dbm),
            ("required_margin_db", self.required_margin_db),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(SolveError::InvalidRadio(format!("{name} must be finite")));
        }
        if self.required_margin_db < 0.0 {
            return Err(SolveError::InvalidRadio(format!(
                "required_margin_db must be >= 0, got {}",
                self.required_margin_db
            )));
        }
        Ok(())
    }
}

/// Received power above sensitivity after `loss_db` of path loss.
pub fn link_margin(radio: &RadioConfig, loss_db: f64) -> f64 {
    radio.tx_power_dbm + radio.tx_gain_dbi + radio.rx_gain_dbi - loss_db - radio.rx_sensitivity_dbm
}

/// Smallest transmit power that closes the link with the required margin.
pub fn required_tx_power(radio: &RadioConfig, loss_db: f64) -> f64 {
    loss_db + radio.rx_sensitivity_dbm - radio.tx_gain_dbi - radio.rx_gain_dbi
        + radio.required_margin_db
}

/// Largest path loss the link can absorb while keeping the required margin.
pub fn max_loss_budget(radio: &RadioConfig) -> f64 {
    radio.tx_power_dbm + radio.tx_gain_dbi + radio.rx_gain_dbi
        - radio.rx_sensitivity_dbm
        - radio.required_margin_db
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    /// km for range, dimensionless for delta, meters for foliage height.
    pub value: f64,
    pub achieved_loss_db: f64,
    pub iterations: u32,
    pub converged: bool,
    /// The search cap itself is feasible and was returned as the answer.
    pub all_feasible: bool,
}

/// How the foliage-factor solver picks among several feasibility frontiers.
///
/// Total loss rises with delta and then turns down as the free-space
/// segment shrinks, so the feasible set can be split in two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum FrontierPolicy {
    /// First crossing of the budget scanning upward from delta = 0.
    #[default]
    FirstCrossing,
    /// Largest feasible delta anywhere in `[0, cap]`.
    LargestFeasible,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub d_lo_km: f64,
    pub d_hi_km: f64,
    pub max_iterations: u32,
    pub loss_tol_db: f64,
    pub distance_tol_km: f64,
    pub delta_tol: f64,
    /// Grid cells for the foliage-factor frontier scan.
    pub delta_grid_cells: usize,
    pub delta_cap: f64,
    pub policy: FrontierPolicy,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            d_lo_km: 1e-4,
            d_hi_km: 1000.0,
            max_iterations: 200,
            loss_tol_db: 1e-6,
            distance_tol_km: 1e-7,
            delta_tol: 1e-9,
            delta_grid_cells: 10_000,
            delta_cap: 0.95,
            policy: FrontierPolicy::FirstCrossing,
        }
    }
}

/// Inverse solvers over a propagation model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkSolver {
    pub model: PropagationModel,
    pub options: SolverOptions,
}

struct Bracket {
    lo: f64,
    hi: f64,
    lo_loss: f64,
    iterations: u32,
    finished: bool,
}

impl LinkSolver {
    pub fn new(model: PropagationModel, options: SolverOptions) -> Self {
        Self { model, options }
    }

    /// Longest link at foliage factor `delta` whose total loss fits the budget.
    pub fn max_range(
        &self,
        radio: &RadioConfig,
        delta: f64,
        f_mhz: f64,
    ) -> Result<SolveResult, SolveError> {
        radio.validate()?;
        if !(0.0..1.0).contains(&delta) {
            return Err(SolveError::InvalidInput(format!(
                "delta must lie in [0, 1) for a range solve, got {delta}"
            )));
        }
        let budget = max_loss_budget(radio);
        let o = &self.options;
        let loss = |d_km: f64| -> Result<f64, SolveError> {
            Ok(self.model.loss_for_delta(d_km, delta, f_mhz)?.l_total_db)
        };

        let lo_loss = loss(o.d_lo_km)?;
        if lo_loss > budget + o.loss_tol_db {
            return Err(SolveError::NoSolution {
                budget_db: budget,
                min_loss_db: lo_loss,
            });
        }
        let hi_loss = loss(o.d_hi_km)?;
        if hi_loss <= budget + o.loss_tol_db {
            return Err(SolveError::BracketExceeded {
                budget_db: budget,
                loss_at_hi_db: hi_loss,
                d_hi_km: o.d_hi_km,
            });
        }
        let bracket = self.bisect(
            &loss,
            budget,
            o.d_lo_km,
            lo_loss,
            o.d_hi_km,
            o.distance_tol_km,
        )?;
        self.finish(&loss, budget, bracket)
    }

    /// Largest tolerable foliage factor on a `d_km` link, up to `delta_cap`.
    ///
    /// A uniform grid locates the frontier cell, then bisection refines it.
    pub fn max_foliage_factor(
        &self,
        radio: &RadioConfig,
        d_km: f64,
        f_mhz: f64,
        delta_cap: f64,
    ) -> Result<SolveResult, SolveError> {
        radio.validate()?;
        if !(delta_cap > 0.0 && delta_cap < 1.0) {
            return Err(SolveError::InvalidInput(format!(
                "delta cap must lie in (0, 1), got {delta_cap}"
            )));
        }
        let budget = max_loss_budget(radio);
        let o = &self.options;
        let cells = o.delta_grid_cells.max(1);
        let loss = |delta: f64| -> Result<f64, SolveError> {
            Ok(self.model.loss_for_delta(d_km, delta, f_mhz)?.l_total_db)
        };
        let grid = |i: usize| {
            if i == cells {
                delta_cap
            } else {
                delta_cap * i as f64 / cells as f64
            }
        };
        let feasible = |l: f64| l <= budget + o.loss_tol_db;

        let mut losses = Vec::with_capacity(cells + 1);
        for i in 0..=cells {
            losses.push(loss(grid(i))?);
        }

        let frontier = match o.policy {
            FrontierPolicy::FirstCrossing => {
                if !feasible(losses[0]) {
                    return Err(SolveError::NoSolution {
                        budget_db: budget,
                        min_loss_db: losses[0],
                    });
                }
                losses.iter().position(|&l| !feasible(l)).map(|i| i - 1)
            }
            FrontierPolicy::LargestFeasible => {
                let Some(last) = losses.iter().rposition(|&l| feasible(l)) else {
                    let min_loss_db = losses.iter().copied().fold(f64::INFINITY, f64::min);
                    return Err(SolveError::NoSolution {
                        budget_db: budget,
                        min_loss_db,
                    });
                };
                (last < cells).then_some(last)
            }
        };

        match frontier {
            None => Ok(SolveResult {
                value: delta_cap,
                achieved_loss_db: losses[cells],
                iterations: 0,
                converged: true,
                all_feasible: true,
            }),
            Some(i) => {
                let bracket =
                    self.bisect(&loss, budget, grid(i), losses[i], grid(i + 1), o.delta_tol)?;
                self.finish(&loss, budget, bracket)
            }
        }
    }

    /// Tallest foliage (meters above the sensor antenna) the budget tolerates
    /// under a base antenna of height `h_m`.
    pub fn max_foliage_height(
        &self,
        radio: &RadioConfig,
        d_km: f64,
        h_m: f64,
        f_mhz: f64,
    ) -> Result<SolveResult, SolveError> {
        if !(h_m > 0.0 && h_m.is_finite()) {
            return Err(ModelError::NonPositiveHeight(h_m).into());
        }
        let cap = self.options.delta_cap.min(1.0);
        let r = self.max_foliage_factor(radio, d_km, f_mhz, cap)?;
        Ok(SolveResult {
            value: r.value * h_m,
            ..r
        })
    }

    // Bisects the cell [lo, hi] where `lo` is feasible (possibly only within
    // the loss tolerance) and `hi` is not. Interior points must meet the
    // budget exactly.
    fn bisect<F>(
        &self,
        loss: &F,
        budget: f64,
        mut lo: f64,
        mut lo_loss: f64,
        mut hi: f64,
        x_tol: f64,
    ) -> Result<Bracket, SolveError>
    where
        F: Fn(f64) -> Result<f64, SolveError>,
    {
        let tol = self.options.loss_tol_db;
        let mut iterations = 0;
        loop {
            if hi - lo <= x_tol && (lo_loss - budget).abs() <= tol {
                break;
            }
            let mid = lo + (hi - lo) / 2.0;
            if mid <= lo || mid >= hi {
                // floating-point resolution reached
                break;
            }
            if iterations >= self.options.max_iterations {
                return Ok(Bracket {
                    lo,
                    hi,
                    lo_loss,
                    iterations,
                    finished: false,
                });
            }
            iterations += 1;
            let mid_loss = loss(mid)?;
            if mid_loss <= budget {
                lo = mid;
                lo_loss = mid_loss;
            } else {
                hi = mid;
            }
        }
        Ok(Bracket {
            lo,
            hi,
            lo_loss,
            iterations,
            finished: true,
        })
    }

    fn finish<F>(&self, loss: &F, budget: f64, b: Bracket) -> Result<SolveResult, SolveError>
    where
        F: Fn(f64) -> Result<f64, SolveError>,
    {
        let (value, achieved) = if b.finished {
            (b.lo, b.lo_loss)
        } else {
            let mid = b.lo + (b.hi - b.lo) / 2.0;
            (mid, loss(mid)?)
        };
        Ok(SolveResult {
            value,
            achieved_loss_db: achieved,
            iterations: b.iterations,
            converged: b.finished && (achieved - budget).abs() <= self.options.loss_tol_db,
            all_feasible: false,
        })
    }
}

pub fn max_range(radio: &RadioConfig, delta: f64, f_mhz: f64) -> Result<SolveResult, SolveError> {
    LinkSolver::default().max_range(radio, delta, f_mhz)
}

pub fn max_foliage_factor(
    radio: &RadioConfig,
    d_km: f64,
    f_mhz: f64,
    delta_cap: f64,
) -> Result<SolveResult, SolveError> {
    LinkSolver::default().max_foliage_factor(radio, d_km, f_mhz, delta_cap)
}

pub fn max_foliage_height(
    radio: &RadioConfig,
    d_km: f64,
    h_m: f64,
    f_mhz: f64,
) -> Result<SolveResult, SolveError> {
    LinkSolver::default().max_foliage_height(radio, d_km, h_m, f_mhz)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::propagation::{total_loss, LinkGeometry};

    fn radio(tx: f64, gain: f64, sens: f64, margin: f64) -> RadioConfig {
        RadioConfig {
            tx_power_dbm: tx,
            tx_gain_dbi: gain,
            rx_gain_dbi: gain,
            rx_sensitivity_dbm: sens,
            required_margin_db: margin,
        }
    }

    /// Radio whose loss budget is exactly `budget` dB.
    fn budget_radio(budget: f64) -> RadioConfig {
        radio(budget, 0.0, 0.0, 0.0)
    }

    fn loss(d_km: f64, delta: f64, f_mhz: f64) -> f64 {
        total_loss(&LinkGeometry::with_delta(d_km, delta), f_mhz)
            .unwrap()
            .l_total_db
    }

    #[test]
    fn margin_examples() {
        let r = radio(14.0, 0.0, -137.0, 0.0);
        assert!((link_margin(&r, 224.5112779) + 73.5112779).abs() < 1e-9);
        assert_eq!(link_margin(&r, 0.0), 151.0);
        let r = radio(14.0, 2.0, -137.0, 0.0);
        assert!((link_margin(&r, 106.0748247) - 48.9251753).abs() < 1e-9);
    }

    #[test]
    fn tx_power_examples() {
        let r = radio(0.0, 0.0, -137.0, 0.0);
        assert!((required_tx_power(&r, 224.5112779) - 87.5112779).abs() < 1e-9);
        assert_eq!(required_tx_power(&r, 0.0), -137.0);
        let r = radio(0.0, 3.0, -120.0, 10.0);
        assert!((required_tx_power(&r, 106.0748247) + 9.9251753).abs() < 1e-9);

        let mut r = radio(0.0, 0.0, -137.0, 0.0);
        r.tx_power_dbm = required_tx_power(&r, 0.0);
        assert_eq!(link_margin(&r, 0.0), r.required_margin_db);
    }

    #[test]
    fn budget_examples() {
        assert_eq!(max_loss_budget(&radio(14.0, 0.0, -137.0, 0.0)), 151.0);
        assert_eq!(max_loss_budget(&radio(14.0, 0.0, -137.0, 10.0)), 141.0);
        assert_eq!(max_loss_budget(&radio(20.0, 6.0, -110.0, 0.0)), 142.0);
    }

    #[test]
    fn radio_validation() {
        assert!(matches!(
            radio(14.0, 0.0, -137.0, -1.0).validate(),
            Err(SolveError::InvalidRadio(_))
        ));
        assert!(matches!(
            radio(f64::NAN, 0.0, -137.0, 0.0).validate(),
            Err(SolveError::InvalidRadio(_))
        ));
    }

    #[test]
    fn range_inverts_reported_values() {
        let r = max_range(&budget_radio(106.0748247), 0.0, 2400.0).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-6, "{}", r.value);

        let r = max_range(&budget_radio(224.5112779), 0.95, 2400.0).unwrap();
        assert!(r.converged);
        assert!((r.value - 2.0).abs() < 1e-6, "{}", r.value);

        let target = loss(1.0, 0.3, 868.0);
        let r = max_range(&budget_radio(target), 0.3, 868.0).unwrap();
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-6, "{}", r.value);
        assert!((loss(r.value, 0.3, 868.0) - target).abs() <= 1e-6);
    }

    #[test]
    fn range_errors() {
        assert!(matches!(
            max_range(&budget_radio(10.0), 0.0, 2400.0),
            Err(SolveError::NoSolution { .. })
        ));
        assert!(matches!(
            max_range(&budget_radio(500.0), 0.0, 2400.0),
            Err(SolveError::BracketExceeded { .. })
        ));
        assert!(matches!(
            max_range(&budget_radio(150.0), 1.0, 2400.0),
            Err(SolveError::InvalidInput(_))
        ));
    }

    #[test]
    fn iteration_cap_reports_unconverged_midpoint() {
        let solver = LinkSolver {
            options: SolverOptions {
                max_iterations: 3,
                ..SolverOptions::default()
            },
            ..LinkSolver::default()
        };
        let r = solver
            .max_range(&budget_radio(106.0748247), 0.0, 2400.0)
            .unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 3);
    }

    #[test]
    fn foliage_factor_first_crossing() {
        // Loss at d = 2 km, 2.4 GHz peaks near delta = 0.905 and falls back to
        // 224.51 dB at 0.95, so the first crossing of that budget sits well
        // below the cap.
        let r = max_foliage_factor(&budget_radio(224.5112779), 2.0, 2400.0, 0.95).unwrap();
        assert!(r.converged && !r.all_feasible);
        assert!(r.value > 0.8 && r.value < 0.905, "{}", r.value);
        assert!((loss(2.0, r.value, 2400.0) - 224.5112779).abs() <= 1e-6);
        // every grid point below the frontier is feasible
        for i in 0..=((r.value / 1e-4) as usize) {
            assert!(loss(2.0, i as f64 * 1e-4, 2400.0) <= 224.5112779 + 1e-6);
        }

        let r = max_foliage_factor(&budget_radio(106.0748247), 2.0, 2400.0, 0.95).unwrap();
        assert!(r.converged);
        assert!(r.value < 1e-6, "{}", r.value);

        assert!(matches!(
            max_foliage_factor(&budget_radio(100.0), 2.0, 2400.0, 0.95),
            Err(SolveError::NoSolution { .. })
        ));
    }

    #[test]
    fn foliage_factor_largest_feasible() {
        let solver = LinkSolver {
            options: SolverOptions {
                policy: FrontierPolicy::LargestFeasible,
                ..SolverOptions::default()
            },
            ..LinkSolver::default()
        };
        let r = solver
            .max_foliage_factor(&budget_radio(224.5112779), 2.0, 2400.0, 0.95)
            .unwrap();
        assert!(r.all_feasible && r.converged);
        assert_eq!(r.value, 0.95);

        let r = solver
            .max_foliage_factor(&budget_radio(106.0748247), 2.0, 2400.0, 0.95)
            .unwrap();
        assert!(r.value < 1e-6);
    }

    #[test]
    fn foliage_factor_cap_validation() {
        for cap in [0.0, 1.0, 1.5] {
            assert!(matches!(
                max_foliage_factor(&budget_radio(150.0), 2.0, 2400.0, cap),
                Err(SolveError::InvalidInput(_))
            ));
        }
    }

    #[test]
    fn foliage_height_examples() {
        let target = total_loss(&LinkGeometry::with_heights(2.0, 30.0, 15.0), 2400.0)
            .unwrap()
            .l_total_db;
        let r = max_foliage_height(&budget_radio(199.0990144), 2.0, 30.0, 2400.0).unwrap();
        assert!(r.converged);
        assert!((r.value - 15.0).abs() < 1e-5, "{}", r.value);
        assert!((r.achieved_loss_db - target).abs() < 1e-5);

        let r = max_foliage_height(&budget_radio(106.0748247), 2.0, 30.0, 2400.0).unwrap();
        assert!(r.value < 1e-4);

        let r = max_foliage_height(&budget_radio(1000.0), 2.0, 30.0, 2400.0).unwrap();
        assert!(r.all_feasible);
        assert!((r.value - 28.5).abs() < 1e-12);

        assert!(matches!(
            max_foliage_height(&budget_radio(150.0), 2.0, 0.0, 2400.0),
            Err(SolveError::Model(ModelError::NonPositiveHeight(_)))
        ));
    }
}
