//! Independent runs over a list of horizons and the regret-slope fit.

use crate::regret::{fit_slope, RegretError, SlopeFit};

use super::config::ExperimentConfig;
use super::runner::{run_horizon, MeanSe, RunSummary};
use super::HarnessError;

/// Slopes at or above this are reported as not sublinear.
pub const NOT_SUBLINEAR_SLOPE: f64 = 0.9;

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub horizon: usize,
    pub sc_regret: MeanSe,
    pub dc_regret: Option<MeanSe>,
    pub movement: MeanSe,
    pub summaries: Vec<RunSummary>,
}

#[derive(Debug, Clone)]
pub struct SweepReport {
    pub points: Vec<SweepPoint>,
    pub sc_fit: SlopeFit,
    pub dc_fit: Option<SlopeFit>,
    pub movement_fit: Option<SlopeFit>,
}

impl SweepReport {
    pub fn not_sublinear(&self) -> bool {
        self.sc_fit.slope >= NOT_SUBLINEAR_SLOPE
    }

    pub fn dc_not_sublinear(&self) -> Option<bool> {
        self.dc_fit.map(|f| f.slope >= NOT_SUBLINEAR_SLOPE)
    }
}

/// Runs every seed at each horizon; schedules are rebuilt per horizon.
pub fn k_sweep(cfg: &ExperimentConfig, horizons: &[usize]) -> Result<SweepReport, HarnessError> {
    let mut distinct = horizons.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(RegretError::TooFewPoints(distinct.len()).into());
    }
    cfg.validate()?;
    let mut points = Vec::with_capacity(horizons.len());
    for &k in horizons {
        let ensemble = run_horizon(cfg, k)?;
        points.push(SweepPoint {
            horizon: k,
            sc_regret: ensemble.sc_regret,
            dc_regret: ensemble.dc_regret,
            movement: ensemble.movement,
            summaries: ensemble.runs.into_iter().map(|r| r.summary).collect(),
        });
    }
    let curve = |f: &dyn Fn(&SweepPoint) -> Option<f64>| -> Option<Vec<(f64, f64)>> {
        points.iter().map(|p| f(p).map(|v| (p.horizon as f64, v))).collect()
    };
    let sc_fit = fit_slope(&curve(&|p| Some(p.sc_regret.mean)).unwrap_or_default())?;
    let dc_fit = curve(&|p| p.dc_regret.map(|d| d.mean)).map(|c| fit_slope(&c)).transpose()?;
    let movement_fit = match curve(&|p| Some(p.movement.mean)) {
        Some(c) if c.iter().any(|&(_, v)| v > 0.0) => Some(fit_slope(&c)?),
        _ => None,
    };
    Ok(SweepReport {
        points,
        sc_fit,
        dc_fit,
        movement_fit,
    })
}
