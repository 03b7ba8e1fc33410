//! Exponential perturbations and the grid-search offline oracle.
//!
//! The oracle minimizes `V(x) − σx` over an interval and certifies its
//! suboptimality as `ρ + β|σ|`. With grid spacing `h`, a Lipschitz constant
//! `L` and a curvature bound `H` for `V`, the nearest grid point to the true
//! minimizer is within `min(L·h, H·h²/8) + h|σ|`, so `ρ` is taken as that
//! minimum and `β = h`.

use rand::Rng;
use thiserror::Error;

use crate::losses::{Domain, ScalarObjective};
use crate::search::{self, SearchError, UniformGrid};

/// Verification grids are this many times finer than the oracle grid.
pub const AUDIT_REFINEMENT: usize = 10;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("eta must be positive, got {0}")]
    NonPositiveEta(f64),
    #[error("uniform draw must lie in (0, 1], got {0}")]
    UniformOutOfRange(f64),
    #[error("grid oracle needs a one-dimensional domain, got dimension {0}")]
    NotOneDimensional(usize),
    #[error("invalid oracle spec: {0}")]
    InvalidSpec(String),
    #[error("non-finite objective value at grid point {0}")]
    NonFinite(f64),
}

impl From<SearchError> for OracleError {
    fn from(err: SearchError) -> Self {
        match err {
            SearchError::NonFinite(p) => OracleError::NonFinite(p[0]),
            other => OracleError::InvalidSpec(other.to_string()),
        }
    }
}

/// Inverse-CDF transform `−ln(u)/η` for `u ∈ (0, 1]`.
pub fn exponential_from_uniform(eta: f64, u: f64) -> Result<f64, OracleError> {
    if !(eta > 0.0) {
        return Err(OracleError::NonPositiveEta(eta));
    }
    if !(u > 0.0 && u <= 1.0) {
        return Err(OracleError::UniformOutOfRange(u));
    }
    // -ln(1) is -0.0; report a clean zero
    Ok((-u.ln() / eta).max(0.0))
}

/// Draws from `exp(η)` (rate `η`, mean `1/η`).
pub fn sample_exponential<R: Rng + ?Sized>(eta: f64, rng: &mut R) -> Result<f64, OracleError> {
    if !(eta > 0.0) {
        return Err(OracleError::NonPositiveEta(eta));
    }
    let u = 1.0 - rng.gen::<f64>();
    exponential_from_uniform(eta, u)
}

/// `min(L·h, H·h²/8)`.
pub fn rho_certificate(spacing: f64, lipschitz: f64, curvature: f64) -> f64 {
    (lipschitz * spacing).min(curvature * spacing * spacing / 8.0)
}

/// Declared accuracy of the oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSpec {
    pub rho: f64,
    pub beta: f64,
    pub grid_points: usize,
    pub domain: Domain,
}

impl OracleSpec {
    pub fn new(rho: f64, beta: f64, grid_points: usize, domain: Domain) -> Result<OracleSpec, OracleError> {
        if domain.dimension() != 1 {
            return Err(OracleError::NotOneDimensional(domain.dimension()));
        }
        if grid_points < 2 {
            return Err(OracleError::InvalidSpec(format!(
                "grid_points must be at least 2, got {grid_points}"
            )));
        }
        if !(rho >= 0.0 && beta >= 0.0) {
            return Err(OracleError::InvalidSpec("rho and beta must be ≥ 0".into()));
        }
        Ok(OracleSpec {
            rho,
            beta,
            grid_points,
            domain,
        })
    }

    pub fn spacing(&self) -> f64 {
        self.domain.diameter_inf() / (self.grid_points - 1) as f64
    }

    /// Spec whose declared `ρ` and `β` are the grid certificates for an
    /// objective with the given bounds.
    pub fn certified(
        grid_points: usize,
        domain: Domain,
        lipschitz: f64,
        curvature: f64,
    ) -> Result<OracleSpec, OracleError> {
        let width = domain.diameter_inf();
        let h = width / (grid_points.max(2) - 1) as f64;
        OracleSpec::new(rho_certificate(h, lipschitz, curvature), h, grid_points, domain)
    }

    /// Grid fine enough that the certified `ρ ≤ scale/√K` and `β ≤ scale/K`.
    /// Declared values are exactly `scale/√K` and `scale/K`.
    pub fn for_horizon(
        horizon: usize,
        domain: Domain,
        lipschitz: f64,
        curvature: f64,
        scale: f64,
    ) -> Result<OracleSpec, OracleError> {
        if horizon == 0 || !(scale > 0.0) {
            return Err(OracleError::InvalidSpec("horizon and scale must be positive".into()));
        }
        let k = horizon as f64;
        let rho = scale / k.sqrt();
        let beta = scale / k;
        let by_curvature = if curvature > 0.0 {
            (8.0 * rho / curvature).sqrt()
        } else {
            f64::INFINITY
        };
        let by_lipschitz = if lipschitz > 0.0 {
            rho / lipschitz
        } else {
            f64::INFINITY
        };
        let h = beta.min(by_curvature.max(by_lipschitz));
        let points = (domain.diameter_inf() / h).ceil() as usize + 1;
        OracleSpec::new(rho, beta, points.max(2), domain)
    }

    fn grid_with(&self, points: usize) -> UniformGrid {
        UniformGrid::new(self.domain.lower()[0], self.domain.upper()[0], points)
            .expect("spec validated on construction")
    }
}

/// Result of one oracle call.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleOutcome {
    pub x: f64,
    /// `V(x) − σx` at the returned point.
    pub value: f64,
    /// Suboptimality certificate this call earned, before the `β|σ|` term.
    pub certified_rho: f64,
}

/// `(ρ, β)` check of one returned point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleAudit {
    pub pass: bool,
    /// `inf + ρ + β|σ| − returned`; negative on failure.
    pub slack: f64,
    pub returned_value: f64,
    pub fine_infimum: f64,
    pub allowance: f64,
}

/// Anything that can approximately minimize a perturbed objective.
pub trait OfflineOracle {
    fn spec(&self) -> &OracleSpec;

    fn minimize(&self, objective: &dyn ScalarObjective, sigma: f64) -> Result<OracleOutcome, OracleError>;

    fn audit(&self, objective: &dyn ScalarObjective, sigma: f64, returned_x: f64) -> OracleAudit {
        verify_oracle_call(objective, sigma, returned_x, self.spec())
    }
}

/// Exhaustive grid search with one golden-section refinement.
#[derive(Debug, Clone)]
pub struct GridOracle {
    spec: OracleSpec,
    grid: UniformGrid,
    fine: UniformGrid,
}

impl GridOracle {
    pub fn new(spec: OracleSpec) -> GridOracle {
        let grid = spec.grid_with(spec.grid_points);
        let fine = spec.grid_with(AUDIT_REFINEMENT * (spec.grid_points - 1) + 1);
        GridOracle { spec, grid, fine }
    }

    pub fn grid(&self) -> &UniformGrid {
        &self.grid
    }
}

impl OfflineOracle for GridOracle {
    fn spec(&self) -> &OracleSpec {
        &self.spec
    }

    fn minimize(&self, objective: &dyn ScalarObjective, sigma: f64) -> Result<OracleOutcome, OracleError> {
        let mut values = objective.values_on(&self.grid);
        for (idx, v) in values.iter_mut().enumerate() {
            *v -= sigma * self.grid.point(idx);
        }
        let coarse = search::argmin_values(&values, &self.grid)?;
        let perturbed = |x: f64| objective.value(x) - sigma * x;
        let (x, value) = search::golden_refine(perturbed, coarse.x, coarse.value, &self.grid);
        let (lo, hi) = (self.grid.lower(), self.grid.upper());
        Ok(OracleOutcome {
            x,
            value,
            certified_rho: rho_certificate(
                self.grid.spacing(),
                objective.lipschitz_bound(lo, hi),
                objective.curvature_bound(),
            ),
        })
    }

    fn audit(&self, objective: &dyn ScalarObjective, sigma: f64, returned_x: f64) -> OracleAudit {
        audit_on(objective, sigma, returned_x, &self.spec, &self.fine)
    }
}

/// One-shot oracle call with a freshly built grid.
pub fn offline_minimize(
    objective: &dyn ScalarObjective,
    sigma: f64,
    spec: &OracleSpec,
) -> Result<OracleOutcome, OracleError> {
    GridOracle::new(spec.clone()).minimize(objective, sigma)
}

/// Compares the returned point against the infimum over a grid
/// [`AUDIT_REFINEMENT`] times finer than the oracle's. Never errors; a
/// non-finite value fails the audit.
pub fn verify_oracle_call(
    objective: &dyn ScalarObjective,
    sigma: f64,
    returned_x: f64,
    spec: &OracleSpec,
) -> OracleAudit {
    let fine = spec.grid_with(AUDIT_REFINEMENT * (spec.grid_points - 1) + 1);
    audit_on(objective, sigma, returned_x, spec, &fine)
}

fn audit_on(
    objective: &dyn ScalarObjective,
    sigma: f64,
    returned_x: f64,
    spec: &OracleSpec,
    fine: &UniformGrid,
) -> OracleAudit {
    let values = objective.values_on(fine);
    let fine_infimum = values
        .iter()
        .enumerate()
        .map(|(idx, v)| v - sigma * fine.point(idx))
        .fold(f64::INFINITY, f64::min);
    let returned_value = objective.value(returned_x) - sigma * returned_x;
    let allowance = spec.rho + spec.beta * sigma.abs();
    let slack = fine_infimum + allowance - returned_value;
    let in_domain = spec.domain.contains(&[returned_x]);
    OracleAudit {
        pass: in_domain && slack.is_finite() && slack >= 0.0,
        slack,
        returned_value,
        fine_infimum,
        allowance,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::FnObjective;

    fn unit() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    fn square() -> FnObjective<impl Fn(f64) -> f64> {
        FnObjective {
            f: |x: f64| x * x,
            lipschitz: 2.0,
            curvature: 2.0,
        }
    }

    #[test]
    fn inverse_cdf_examples() {
        assert_eq!(exponential_from_uniform(2.0, 1.0).unwrap(), 0.0);
        let x = exponential_from_uniform(2.0, (-1f64).exp()).unwrap();
        assert!((x - 0.5).abs() < 1e-15);
        assert_eq!(
            exponential_from_uniform(0.0, 0.5).unwrap_err(),
            OracleError::NonPositiveEta(0.0)
        );
        assert!(exponential_from_uniform(1.0, 0.0).is_err());
    }

    #[test]
    fn sampler_rejects_bad_eta() {
        let mut rng = rand::thread_rng();
        assert!(sample_exponential(-1.0, &mut rng).is_err());
    }

    #[test]
    fn square_minimized_at_zero() {
        let spec = OracleSpec::certified(10_001, unit(), 2.0, 2.0).unwrap();
        let out = offline_minimize(&square(), 0.0, &spec).unwrap();
        assert!(out.x.abs() <= spec.spacing());
    }

    #[test]
    fn perturbed_square_hits_boundary() {
        let spec = OracleSpec::certified(10_001, unit(), 2.0, 2.0).unwrap();
        let out = offline_minimize(&square(), 2.0, &spec).unwrap();
        assert!((out.x - 1.0).abs() < 1e-9, "{}", out.x);
    }

    #[test]
    fn sine_quadratic_minimized_at_zero() {
        let f = FnObjective {
            f: |x: f64| (3.0 * x).sin().powi(2) + x * x / 2.0,
            lipschitz: 4.0,
            curvature: 19.0,
        };
        let spec = OracleSpec::certified(10_001, unit(), 4.0, 19.0).unwrap();
        let out = offline_minimize(&f, 0.0, &spec).unwrap();
        // brute force over 1e5 points
        let fine = UniformGrid::new(-1.0, 1.0, 100_001).unwrap();
        let m = search::argmin_1d(|x| (f.f)(x), &fine).unwrap();
        assert!(m.x.abs() < 1e-12);
        assert!(out.x.abs() <= spec.spacing());
    }

    #[test]
    fn non_finite_objective_reports_point() {
        let f = FnObjective {
            f: |x: f64| if x > 0.5 { f64::NAN } else { x },
            lipschitz: 1.0,
            curvature: 0.0,
        };
        let spec = OracleSpec::certified(5, unit(), 1.0, 0.0).unwrap();
        assert_eq!(
            offline_minimize(&f, 0.0, &spec).unwrap_err(),
            OracleError::NonFinite(1.0)
        );
    }

    #[test]
    fn audit_of_exact_minimizer_has_full_slack() {
        let spec = OracleSpec::new(1e-3, 1e-4, 1001, unit()).unwrap();
        let audit = verify_oracle_call(&square(), 0.5, 0.25, &spec);
        assert!(audit.pass);
        assert!((audit.slack - (1e-3 + 0.5e-4)).abs() < 1e-15);
    }

    #[test]
    fn displaced_point_fails_audit() {
        let linear = FnObjective {
            f: |x: f64| x,
            lipschitz: 1.0,
            curvature: 0.0,
        };
        let spec = OracleSpec::new(1e-3, 0.0, 1001, unit()).unwrap();
        let exact = verify_oracle_call(&linear, 0.0, -1.0, &spec);
        assert!(exact.pass);
        let displaced = -1.0 + 10.0 * spec.rho / 1.0;
        let audit = verify_oracle_call(&linear, 0.0, displaced, &spec);
        assert!(!audit.pass);
        assert!(audit.slack < 0.0);
    }

    #[test]
    fn huge_sigma_boundary_passes() {
        let spec = OracleSpec::certified(1001, unit(), 2.0, 2.0).unwrap();
        let out = offline_minimize(&square(), 1e6, &spec).unwrap();
        assert_eq!(out.x, 1.0);
        assert!(verify_oracle_call(&square(), 1e6, out.x, &spec).pass);
    }

    #[test]
    fn out_of_domain_point_fails() {
        let spec = OracleSpec::certified(101, unit(), 2.0, 2.0).unwrap();
        assert!(!verify_oracle_call(&square(), 0.0, 1.5, &spec).pass);
    }

    #[test]
    fn horizon_spec_meets_targets() {
        let spec = OracleSpec::for_horizon(3000, unit(), 1e4, 1e5, 1.0).unwrap();
        let h = spec.spacing();
        assert!(h <= spec.beta + 1e-15);
        assert!(rho_certificate(h, 1e4, 1e5) <= spec.rho);
        assert_eq!(spec.grid_points, 6001);
    }

    #[test]
    fn spec_validation() {
        assert!(OracleSpec::new(0.1, 0.1, 1, unit()).is_err());
        assert!(OracleSpec::new(-0.1, 0.1, 10, unit()).is_err());
        let plane = Domain::cube(2, -1.0, 1.0).unwrap();
        assert_eq!(
            OracleSpec::new(0.1, 0.1, 10, plane).unwrap_err(),
            OracleError::NotOneDimensional(2)
        );
    }
}
