//! One-dimensional parameter sweeps and the figure presets.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ModelError;
use crate::propagation::{delta_from_heights, LinkGeometry, PropagationModel, Regime, Validity};

/// Default upper limit for swept foliage factors.
pub const DEFAULT_DELTA_CAP: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SweepError {
    #[error("invalid sweep: {0}")]
    InvalidSpec(String),
    #[error("unknown preset {0:?} (expected figure2, figure3 or figure4)")]
    UnknownPreset(String),
    #[error("at {variable} = {x}: {source}")]
    AtPoint {
        variable: SweepVariable,
        x: f64,
        source: ModelError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepVariable {
    Delta,
    FoliageHeight,
    Distance,
    FrequencyMHz,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::Delta => "delta",
            SweepVariable::FoliageHeight => "h_f_m",
            SweepVariable::Distance => "d_km",
            SweepVariable::FrequencyMHz => "f_mhz",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepVariable {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "delta" => Ok(SweepVariable::Delta),
            "h_f_m" | "h-f-m" | "foliage-height" | "foliageheight" => {
                Ok(SweepVariable::FoliageHeight)
            }
            "d_km" | "d-km" | "distance" => Ok(SweepVariable::Distance),
            "f_mhz" | "f-mhz" | "frequency" | "frequencymhz" => Ok(SweepVariable::FrequencyMHz),
            _ => Err(SweepError::InvalidSpec(format!(
                "unknown sweep variable {s:?}"
            ))),
        }
    }
}

/// Parameters held fixed during a sweep. The swept one is overridden per point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepBase {
    pub geometry: LinkGeometry,
    pub f_mhz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub variable: SweepVariable,
    pub start: f64,
    pub stop: f64,
    /// Evaluation points, endpoints included.
    pub steps: usize,
    pub base: SweepBase,
    pub delta_cap: f64,
}

impl SweepSpec {
    pub fn new(
        variable: SweepVariable,
        start: f64,
        stop: f64,
        steps: usize,
        base: SweepBase,
    ) -> Self {
        Self {
            variable,
            start,
            stop,
            steps,
            base,
            delta_cap: DEFAULT_DELTA_CAP,
        }
    }

    pub fn validate(&self) -> Result<(), SweepError> {
        let invalid = |msg: String| Err(SweepError::InvalidSpec(msg));
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return invalid("start and stop must be finite".into());
        }
        if self.start >= self.stop {
            return invalid(format!(
                "start {} must be below stop {}",
                self.start, self.stop
            ));
        }
        if self.steps < 2 {
            return invalid(format!("steps must be at least 2, got {}", self.steps));
        }
        if !(self.delta_cap > 0.0 && self.delta_cap < 1.0) {
            return invalid(format!(
                "delta cap must lie in (0, 1), got {}",
                self.delta_cap
            ));
        }
        let g = &self.base.geometry;
        match self.variable {
            SweepVariable::Delta => {
                if self.start < 0.0 || self.stop > self.delta_cap {
                    return invalid(format!(
                        "delta range [{}, {}] must lie in [0, {}]",
                        self.start, self.stop, self.delta_cap
                    ));
                }
            }
            SweepVariable::FoliageHeight => {
                let Some(h_m) = g.h_m else {
                    return invalid("a foliage-height sweep needs the antenna height h_m".into());
                };
                if h_m.is_nan() || h_m <= 0.0 {
                    return invalid(format!("antenna height must be positive, got {h_m}"));
                }
                if self.start < 0.0 || self.stop / h_m > self.delta_cap {
                    return invalid(format!(
                        "foliage height range [{}, {}] must lie in [0, {}] m for h = {h_m} m",
                        self.start,
                        self.stop,
                        self.delta_cap * h_m
                    ));
                }
            }
            SweepVariable::Distance => {
                if self.start <= 0.0 {
                    return invalid(format!(
                        "distances must be positive, got start {}",
                        self.start
                    ));
                }
                self.check_fixed_delta()?;
            }
            SweepVariable::FrequencyMHz => {
                if self.start <= 0.0 {
                    return invalid(format!(
                        "frequencies must be positive, got start {}",
                        self.start
                    ));
                }
                self.check_fixed_delta()?;
            }
        }
        Ok(())
    }

    fn check_fixed_delta(&self) -> Result<(), SweepError> {
        let g = &self.base.geometry;
        let delta = match (g.delta, g.h_m, g.h_f_m) {
            (Some(d), ..) => d,
            (None, Some(h), Some(hf)) => {
                delta_from_heights(hf, h).map_err(|e| SweepError::InvalidSpec(e.to_string()))?
            }
            _ => {
                return Err(SweepError::InvalidSpec(
                    "base geometry needs delta or h_m and h_f_m".into(),
                ))
            }
        };
        if !(0.0..=self.delta_cap).contains(&delta) {
            return Err(SweepError::InvalidSpec(format!(
                "fixed delta {delta} must lie in [0, {}]",
                self.delta_cap
            )));
        }
        Ok(())
    }

    /// The swept values, endpoints exact.
    pub fn points(&self) -> Vec<f64> {
        let last = self.steps - 1;
        (0..self.steps)
            .map(|i| {
                if i == last {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last as f64
                }
            })
            .collect()
    }

    fn point(&self, x: f64) -> (LinkGeometry, f64) {
        let mut g = self.base.geometry;
        let mut f_mhz = self.base.f_mhz;
        match self.variable {
            SweepVariable::Delta => {
                g = LinkGeometry::with_delta(g.d_km, x);
            }
            SweepVariable::FoliageHeight => {
                g = LinkGeometry::with_heights(g.d_km, g.h_m.unwrap_or(f64::NAN), x);
            }
            SweepVariable::Distance => g.d_km = x,
            SweepVariable::FrequencyMHz => f_mhz = x,
        }
        (g, f_mhz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub x: f64,
    pub delta: f64,
    pub d_f_m: f64,
    pub d_fsp_m: f64,
    pub l_foliage_db: f64,
    pub l_fsp_db: f64,
    pub l_total_db: f64,
    pub regime: Regime,
    pub validity: Validity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub variable: SweepVariable,
    pub rows: Vec<SweepRow>,
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepTable, SweepError> {
    run_sweep_with(&PropagationModel::default(), spec)
}

/// Evaluates every point of `spec`; rows come back in ascending `x` order.
pub fn run_sweep_with(
    model: &PropagationModel,
    spec: &SweepSpec,
) -> Result<SweepTable, SweepError> {
    spec.validate()?;
    let rows = spec
        .points()
        .into_par_iter()
        .map(|x| {
            let (g, f_mhz) = spec.point(x);
            let b = model
                .total_loss(&g, f_mhz)
                .map_err(|source| SweepError::AtPoint {
                    variable: spec.variable,
                    x,
                    source,
                })?;
            Ok(SweepRow {
                x,
                delta: b.split.delta,
                d_f_m: b.split.d_f_m,
                d_fsp_m: b.split.d_fsp_m,
                l_foliage_db: b.l_foliage_db,
                l_fsp_db: b.l_fsp_db,
                l_total_db: b.l_total_db,
                regime: b.foliage.regime,
                validity: b.foliage.validity,
            })
        })
        .collect::<Vec<Result<SweepRow, SweepError>>>()
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SweepTable {
        variable: spec.variable,
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Figure2,
    Figure3,
    Figure4,
}

impl FromStr for Preset {
    type Err = SweepError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "figure2" | "fig2" => Ok(Preset::Figure2),
            "figure3" | "fig3" => Ok(Preset::Figure3),
            "figure4" | "fig4" => Ok(Preset::Figure4),
            _ => Err(SweepError::UnknownPreset(s.to_string())),
        }
    }
}

/// Sweeps behind the published figures: d = 2 km, f = 2400 MHz, and for
/// the height figure a 30 m base antenna.
pub fn preset(name: Preset) -> SweepSpec {
    match name {
        Preset::Figure2 | Preset::Figure3 => SweepSpec::new(
            SweepVariable::Delta,
            0.0,
            0.95,
            96,
            SweepBase {
                geometry: LinkGeometry::with_delta(2.0, 0.0),
                f_mhz: 2400.0,
            },
        ),
        Preset::Figure4 => SweepSpec::new(
            SweepVariable::FoliageHeight,
            0.0,
            15.0,
            16,
            SweepBase {
                geometry: LinkGeometry::with_heights(2.0, 30.0, 0.0),
                f_mhz: 2400.0,
            },
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta_spec(start: f64, stop: f64, steps: usize) -> SweepSpec {
        SweepSpec {
            start,
            stop,
            steps,
            ..preset(Preset::Figure2)
        }
    }

    #[test]
    fn delta_sweep_endpoints() {
        let t = run_sweep(&delta_spec(0.0, 0.95, 20)).unwrap();
        assert_eq!(t.rows.len(), 20);
        assert!((t.rows[0].l_total_db - 106.0748247).abs() < 1e-7);
        let last = t.rows.last().unwrap();
        assert_eq!(last.x, 0.95);
        assert!((last.l_total_db - 224.5112779).abs() < 1e-6);
    }

    #[test]
    fn endpoints_only() {
        let t = run_sweep(&delta_spec(0.0, 0.95, 2)).unwrap();
        assert_eq!(t.rows.len(), 2);
        assert_eq!((t.rows[0].x, t.rows[1].x), (0.0, 0.95));
    }

    #[test]
    fn height_sweep() {
        let t = run_sweep(&preset(Preset::Figure4)).unwrap();
        assert_eq!(t.rows.len(), 16);
        let last = t.rows.last().unwrap();
        assert_eq!((last.x, last.delta), (15.0, 0.5));
        assert!((last.l_total_db - 199.0990144).abs() < 1e-6);
        assert!(t.rows.windows(2).all(|w| w[0].x < w[1].x));
    }

    #[test]
    fn presets() {
        let p2 = preset(Preset::Figure2);
        assert_eq!(p2.variable, SweepVariable::Delta);
        assert_eq!((p2.start, p2.stop, p2.steps), (0.0, 0.95, 96));
        assert_eq!((p2.base.geometry.d_km, p2.base.f_mhz), (2.0, 2400.0));
        assert_eq!(preset(Preset::Figure3).points(), p2.points());

        let p4 = preset(Preset::Figure4);
        assert_eq!(p4.variable, SweepVariable::FoliageHeight);
        assert_eq!((p4.start, p4.stop, p4.steps), (0.0, 15.0, 16));
        assert_eq!(p4.base.geometry.h_m, Some(30.0));

        assert_eq!("Figure4".parse::<Preset>(), Ok(Preset::Figure4));
        assert!(matches!(
            "figure5".parse::<Preset>(),
            Err(SweepError::UnknownPreset(_))
        ));
    }

    #[test]
    fn delta_sweep_shape() {
        let t = run_sweep(&preset(Preset::Figure3)).unwrap();
        for w in t.rows.windows(2) {
            assert!(w[1].d_f_m > w[0].d_f_m);
            assert!(w[1].d_fsp_m < w[0].d_fsp_m);
            assert!(w[1].l_foliage_db > w[0].l_foliage_db);
            assert!(w[1].l_fsp_db < w[0].l_fsp_db);
        }
        for r in &t.rows {
            assert_eq!(r.l_total_db, r.l_foliage_db + r.l_fsp_db);
            assert!((r.d_f_m + r.d_fsp_m - 2000.0).abs() < 1e-9);
        }
        // Total loss rises up to delta = 0.90 and then turns down as the
        // free-space segment collapses.
        let peak = t
            .rows
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.l_total_db.total_cmp(&b.1.l_total_db))
            .unwrap()
            .0;
        assert_eq!(t.rows[peak].x, 0.9);
        assert!(t.rows[..=peak]
            .windows(2)
            .all(|w| w[1].l_total_db > w[0].l_total_db));
    }

    #[test]
    fn distance_and_frequency_sweeps() {
        let base = SweepBase {
            geometry: LinkGeometry::with_delta(2.0, 0.3),
            f_mhz: 868.0,
        };
        let t = run_sweep(&SweepSpec::new(SweepVariable::Distance, 0.5, 5.0, 10, base)).unwrap();
        assert!(t.rows.iter().all(|r| r.delta == 0.3));
        assert_eq!(t.rows.last().unwrap().x, 5.0);

        let t = run_sweep(&SweepSpec::new(
            SweepVariable::FrequencyMHz,
            433.0,
            5800.0,
            5,
            base,
        ))
        .unwrap();
        assert!(t.rows.windows(2).all(|w| w[1].l_total_db > w[0].l_total_db));
    }

    #[test]
    fn invalid_specs() {
        let bad = [
            delta_spec(0.5, 0.5, 4),
            delta_spec(0.0, 0.95, 1),
            delta_spec(0.0, 1.0, 4),
            delta_spec(-0.1, 0.5, 4),
            SweepSpec {
                stop: 30.0,
                ..preset(Preset::Figure4)
            },
            SweepSpec::new(
                SweepVariable::Distance,
                0.0,
                1.0,
                3,
                preset(Preset::Figure2).base,
            ),
            SweepSpec::new(
                SweepVariable::FrequencyMHz,
                100.0,
                1000.0,
                3,
                SweepBase {
                    geometry: LinkGeometry {
                        d_km: 2.0,
                        ..LinkGeometry::default()
                    },
                    f_mhz: 0.0,
                },
            ),
        ];
        for spec in bad {
            assert!(
                matches!(run_sweep(&spec), Err(SweepError::InvalidSpec(_))),
                "{spec:?}"
            );
        }
    }

    #[test]
    fn core_errors_carry_x() {
        let spec = SweepSpec::new(
            SweepVariable::FrequencyMHz,
            100.0,
            1000.0,
            3,
            SweepBase {
                geometry: LinkGeometry::with_delta(-1.0, 0.2),
                f_mhz: 0.0,
            },
        );
        match run_sweep(&spec) {
            Err(SweepError::AtPoint { x, source, .. }) => {
                assert_eq!(x, 100.0);
                assert_eq!(source, ModelError::NonPositiveDistance(-1.0));
            }
            other => panic!("{other:?}"),
        }
    }
}
