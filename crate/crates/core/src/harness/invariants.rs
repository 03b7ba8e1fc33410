//! The invariant suite behind `coregret verify`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::losses::{gradient_relative_error, LossFunction};

use super::config::{ExperimentConfig, Preset};
use super::dsgd::dsgd_preset;
use super::report::trace_string;
use super::runner::{build_context, build_domain, build_mixing, run_seed};
use super::HarnessError;

pub const STOCHASTICITY_TOLERANCE: f64 = 1e-12;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const GRADIENT_SAMPLES: usize = 1000;
pub const FD_STEP: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq)]
pub struct InvariantCheck {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl InvariantCheck {
    fn new(name: &'static str, pass: bool, detail: impl Into<String>) -> InvariantCheck {
        InvariantCheck {
            name,
            pass,
            detail: detail.into(),
        }
    }
}

/// Worst finite-difference error over random points and centers.
pub fn worst_gradient_error(cfg: &ExperimentConfig, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (cfg.domain_lower, cfg.domain_upper);
    let family = cfg.loss_family();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let center: Vec<f64> = (0..cfg.dimension).map(|_| rng.gen_range(lo..=hi)).collect();
        let x: Vec<f64> = (0..cfg.dimension).map(|_| rng.gen_range(lo..=hi)).collect();
        let loss = LossFunction::new(family, center);
        worst = worst.max(gradient_relative_error(&loss, &x, FD_STEP));
    }
    worst
}

/// Runs the invariant checks for one configuration using its first seed.
pub fn verify(cfg: &ExperimentConfig) -> Result<Vec<InvariantCheck>, HarnessError> {
    cfg.validate()?;
    let mut checks = Vec::new();

    let round_trip = ExperimentConfig::parse(&cfg.serialize()).map(|c| c.serialize() == cfg.serialize());
    checks.push(InvariantCheck::new(
        "config_round_trip",
        round_trip == Ok(true),
        "serialize → parse → serialize",
    ));

    let mixing = build_mixing(cfg)?;
    let residual = mixing.stochasticity_residual();
    checks.push(InvariantCheck::new(
        "mixing_doubly_stochastic",
        residual <= STOCHASTICITY_TOLERANCE,
        format!("residual {residual:.3e}"),
    ));
    checks.push(InvariantCheck::new(
        "mixing_symmetric",
        mixing.is_exactly_symmetric(),
        "exact equality with the transpose",
    ));
    let top = mixing.eigenvalues().first().copied().unwrap_or(1.0);
    checks.push(InvariantCheck::new(
        "laplacian_psd",
        1.0 - top >= -STOCHASTICITY_TOLERANCE,
        format!("smallest eigenvalue of I − Π {:.3e}", 1.0 - top),
    ));
    let lambda = mixing.lambda();
    checks.push(InvariantCheck::new(
        "spectral_gap",
        (0.0..1.0).contains(&lambda),
        format!("lambda {lambda}"),
    ));

    let worst = worst_gradient_error(cfg, GRADIENT_SAMPLES, cfg.seeds[0]);
    checks.push(InvariantCheck::new(
        "gradient_finite_difference",
        worst <= GRADIENT_TOLERANCE,
        format!("worst relative error {worst:.3e} over {GRADIENT_SAMPLES} points"),
    ));

    if cfg.preset == Preset::Dsgd {
        let report = dsgd_preset(cfg)?;
        checks.push(InvariantCheck::new(
            "dsgd_gap",
            report.gap_holds(),
            format!("gap {:.6e} vs envelope {:.6e}", report.gap, report.envelope),
        ));
        checks.push(InvariantCheck::new("dsgd_jensen", report.jensen_holds(), "H(x̄) ≤ mean H(x_k)"));
        return Ok(checks);
    }

    let seed = cfg.seeds[0];
    let ctx = build_context(cfg, cfg.horizon, cfg.loss_seed.unwrap_or(seed))?;
    let run = run_seed(cfg, cfg.horizon, seed, &ctx, &mixing)?;
    let s = &run.summary;
    if s.consensus_envelope.is_some() {
        checks.push(InvariantCheck::new(
            "consensus_envelope",
            s.consensus_violations == 0,
            format!("{} violations", s.consensus_violations),
        ));
    }
    if s.gradient_envelope.is_some() {
        checks.push(InvariantCheck::new(
            "gradient_envelope",
            s.gradient_violations == 0,
            format!("{} violations", s.gradient_violations),
        ));
    }
    for (name, check) in [("terminal_sc_envelope", s.sc_check), ("terminal_dc_envelope", s.dc_check)] {
        if let Some(c) = check {
            checks.push(InvariantCheck::new(
                name,
                c.holds(),
                format!("{} {:.6e} vs {} {:.6e}", "regret", c.value, c.envelope, c.bound),
            ));
        }
    }
    if s.audits.calls > 0 {
        checks.push(InvariantCheck::new(
            "oracle_audit",
            s.audits.passed == s.audits.calls,
            format!("{}/{} audited calls passed", s.audits.passed, s.audits.calls),
        ));
    }
    if cfg.n_agents == 1 {
        let zero = run.ledger.records().iter().all(|r| r.network_loss == 0.0);
        checks.push(InvariantCheck::new("single_agent_network_loss", zero, "identically zero"));
    }
    let domain = build_domain(cfg)?;
    let finite = run
        .ledger
        .records()
        .iter()
        .all(|r| r.agents.iter().all(|a| domain.contains(&a.x)));
    checks.push(InvariantCheck::new("iterates_feasible", finite, "every decision inside the box"));

    let again = run_seed(cfg, cfg.horizon, seed, &ctx, &mixing)?;
    checks.push(InvariantCheck::new(
        "reproducible_trace",
        trace_string(&run.ledger) == trace_string(&again.ledger),
        "two runs with the same seed",
    ));
    Ok(checks)
}
