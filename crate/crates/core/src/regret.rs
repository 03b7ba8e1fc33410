//! Composite regret accounting, consensus residuals and bound envelopes.
//!
//! The composite value of a round is `V_k(x) = Σ_i f^i_k(x^i) + c·x(I − Π)x`.
//! The ledger stores the quadratic form `x(I − Π)x`; the neighbour double sum
//! `Σ_i Σ_j π_ij ‖x^i − x^j‖²` is exactly twice that for a symmetric
//! doubly-stochastic `Π` and is recorded alongside it.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::algorithms::{AgentStates, StepSchedule};
use crate::losses::{Domain, LossError, LossFunction};
use crate::topology::MixingMatrix;

#[derive(Debug, Error, PartialEq)]
pub enum RegretError {
    #[error("comparator missing: {0}")]
    MissingComparator(&'static str),
    #[error("unknown envelope '{0}'")]
    UnknownEnvelope(String),
    #[error("envelope {0} needs constant '{1}'")]
    MissingConstant(&'static str, &'static str),
    #[error("slope fit needs at least 4 distinct horizons, got {0}")]
    TooFewPoints(usize),
    #[error("invalid curve point: {0}")]
    InvalidPoint(String),
    #[error("regularization constant must be ≥ 0, got {0}")]
    NegativeC(f64),
    #[error("comparator network loss is {0}, expected 0")]
    NonConsensualComparator(f64),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// Distance used in the network penalty.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NetworkNorm {
    L2Squared,
    L1,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompositeValue {
    pub f_loss: f64,
    /// `c · x(I − Π)x` (half the double sum).
    pub network_loss: f64,
    /// `c · Σ_i Σ_j π_ij ‖x^i − x^j‖`.
    pub network_double_sum: f64,
    pub v: f64,
}

fn pair_distance(a: &[f64], b: &[f64], norm: NetworkNorm) -> f64 {
    let diffs = a.iter().zip(b).map(|(x, y)| x - y);
    match norm {
        NetworkNorm::L2Squared => diffs.map(|d| d * d).sum(),
        NetworkNorm::L1 => diffs.map(f64::abs).sum(),
    }
}

/// `c · ½ Σ_j π_ij ‖x^i − x^j‖` for one agent; shares add up to the network loss.
pub fn network_share(state: &AgentStates, i: usize, mixing: &MixingMatrix, c: f64, norm: NetworkNorm) -> f64 {
    let xi = state.row(i);
    let s: f64 = state
        .rows()
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, xj)| mixing.weight(i, j) * pair_distance(xi, xj, norm))
        .sum();
    0.5 * c * s
}

pub fn composite_value(
    state: &AgentStates,
    losses_k: &[LossFunction],
    mixing: &MixingMatrix,
    c: f64,
    norm: NetworkNorm,
    domain: &Domain,
) -> Result<CompositeValue, RegretError> {
    if !(c >= 0.0) {
        return Err(RegretError::NegativeC(c));
    }
    let mut f_loss = 0.0;
    for (x, loss) in state.rows().iter().zip(losses_k) {
        f_loss += loss.evaluate(x, domain)?;
    }
    let network_loss: f64 = (0..state.n_agents())
        .map(|i| network_share(state, i, mixing, c, norm))
        .sum();
    Ok(CompositeValue {
        f_loss,
        network_loss,
        network_double_sum: 2.0 * network_loss,
        v: f_loss + network_loss,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    /// `‖x − x̂‖` over the stacked state.
    pub norm: f64,
    pub per_agent: Vec<f64>,
    pub max_agent: f64,
}

pub fn consensus_residual(state: &AgentStates) -> Residual {
    // an exact consensus must report exactly zero, which averaging may not
    let mean = match state.rows().first() {
        Some(first) if state.rows().iter().all(|r| r == first) => first.clone(),
        _ => state.mean(),
    };
    let per_agent: Vec<f64> = state
        .rows()
        .iter()
        .map(|row| pair_distance(row, &mean, NetworkNorm::L2Squared).sqrt())
        .collect();
    let norm = per_agent.iter().map(|r| r * r).sum::<f64>().sqrt();
    let max_agent = per_agent.iter().copied().fold(0.0, f64::max);
    Residual {
        norm,
        per_agent,
        max_agent,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRecord {
    pub x: Vec<f64>,
    pub f_loss: f64,
    pub network_share: f64,
    pub residual: f64,
}

/// Envelope diagnostics attached to a round after the run.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RoundEnvelopes {
    /// Per-agent consensus bound.
    pub consensus: Option<f64>,
    /// Gradient-type quantity checked against `gradient_envelope`.
    pub gradient_value: Option<f64>,
    pub gradient_envelope: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub k: usize,
    pub c_used: f64,
    pub f_loss: f64,
    pub network_loss: f64,
    pub network_double_sum: f64,
    pub v: f64,
    pub static_comparator_v: f64,
    pub dynamic_comparator_v: Option<f64>,
    pub sc_regret: f64,
    pub dc_regret: Option<f64>,
    pub consensus_residual: f64,
    pub max_agent_residual: f64,
    pub agents: Vec<AgentRecord>,
    pub envelopes: RoundEnvelopes,
}

/// What a round produced.
#[derive(Debug, Clone, Copy)]
pub struct RoundOutputs<'a> {
    pub state: &'a AgentStates,
    pub losses: &'a [LossFunction],
    pub mixing: &'a MixingMatrix,
    pub c: f64,
    pub domain: &'a Domain,
}

/// Static comparator `x_*` and, when tracked, the round's `x_{*,k}`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Comparators<'a> {
    pub static_point: Option<&'a [f64]>,
    pub dynamic_point: Option<&'a [f64]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    records: Vec<RoundRecord>,
    track_dynamic: bool,
    norm: NetworkNorm,
}

impl RegretLedger {
    pub fn new(track_dynamic: bool) -> RegretLedger {
        RegretLedger {
            records: Vec::new(),
            track_dynamic,
            norm: NetworkNorm::L2Squared,
        }
    }

    pub fn with_norm(mut self, norm: NetworkNorm) -> RegretLedger {
        self.norm = norm;
        self
    }

    pub fn tracks_dynamic(&self) -> bool {
        self.track_dynamic
    }

    pub fn records(&self) -> &[RoundRecord] {
        &self.records
    }

    pub fn records_mut(&mut self) -> &mut [RoundRecord] {
        &mut self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn sc_regret(&self) -> f64 {
        self.records.last().map(|r| r.sc_regret).unwrap_or(0.0)
    }

    pub fn dc_regret(&self) -> Option<f64> {
        if !self.track_dynamic {
            return None;
        }
        Some(self.records.last().and_then(|r| r.dc_regret).unwrap_or(0.0))
    }

    /// Re-sums the stored per-round pieces.
    pub fn recompute_sc(&self) -> f64 {
        self.records.iter().map(|r| r.v - r.static_comparator_v).sum()
    }

    pub fn recompute_dc(&self) -> Option<f64> {
        self.records
            .iter()
            .map(|r| r.dynamic_comparator_v.map(|d| r.v - d))
            .sum()
    }
}

/// Comparator value `V_k(x_*)` for a consensual stacked comparator.
fn comparator_value(
    point: &[f64],
    out: &RoundOutputs<'_>,
    norm: NetworkNorm,
) -> Result<f64, RegretError> {
    let stacked = AgentStates::new(vec![point.to_vec(); out.losses.len()], out.state.round());
    let value = composite_value(&stacked, out.losses, out.mixing, out.c, norm, out.domain)?;
    if value.network_loss != 0.0 {
        return Err(RegretError::NonConsensualComparator(value.network_loss));
    }
    Ok(value.v)
}

/// Appends one round to the ledger.
pub fn update_ledger(
    ledger: &mut RegretLedger,
    out: RoundOutputs<'_>,
    comparators: Comparators<'_>,
) -> Result<(), RegretError> {
    let static_point = comparators
        .static_point
        .ok_or(RegretError::MissingComparator("static"))?;
    let dynamic_point = match (ledger.track_dynamic, comparators.dynamic_point) {
        (true, None) => return Err(RegretError::MissingComparator("dynamic")),
        (true, Some(p)) => Some(p),
        (false, _) => None,
    };
    let norm = ledger.norm;
    let value = composite_value(out.state, out.losses, out.mixing, out.c, norm, out.domain)?;
    let static_v = comparator_value(static_point, &out, norm)?;
    let dynamic_v = dynamic_point
        .map(|p| comparator_value(p, &out, norm))
        .transpose()?;
    let residual = consensus_residual(out.state);
    let agents = (0..out.state.n_agents())
        .map(|i| {
            Ok(AgentRecord {
                x: out.state.row(i).to_vec(),
                f_loss: out.losses[i].evaluate(out.state.row(i), out.domain)?,
                network_share: network_share(out.state, i, out.mixing, out.c, norm),
                residual: residual.per_agent[i],
            })
        })
        .collect::<Result<Vec<_>, RegretError>>()?;
    let prev_sc = ledger.sc_regret();
    let prev_dc = ledger.records.last().and_then(|r| r.dc_regret).unwrap_or(0.0);
    ledger.records.push(RoundRecord {
        k: out.state.round(),
        c_used: out.c,
        f_loss: value.f_loss,
        network_loss: value.network_loss,
        network_double_sum: value.network_double_sum,
        v: value.v,
        static_comparator_v: static_v,
        dynamic_comparator_v: dynamic_v,
        sc_regret: prev_sc + (value.v - static_v),
        dc_regret: dynamic_v.map(|d| prev_dc + (value.v - d)),
        consensus_residual: residual.norm,
        max_agent_residual: residual.max_agent,
        agents,
        envelopes: RoundEnvelopes::default(),
    });
    Ok(())
}

/// Named bound envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvelopeName {
    /// `(G²/(2μ))(1 + 2/(1−λ))²(1 + ln K)` for OCGD with `α_k = 1/(μk)`.
    StronglyConvexRegret,
    /// `D·C·√(NK)` for constant-step OCGD.
    StaticRegret,
    /// `√(√N D(√N D + 3P_K))·C·√K` for constant-step OCGD.
    DynamicRegret,
    /// `(3√N D G/2)(1 + 3.42/(1−λ))√K` for OCGD with `α_k ∝ 1/√k`.
    SqrtStepRegret,
    /// `ζ(1 + 1/(1−λ))√(K(N D² + 3√N D P_K))` for CONGD.
    CongdDynamicRegret,
    /// `G Σ_{s<k} α_s λ^{k−1−s}` per-agent OCGD consensus bound.
    ConsensusOcgd,
    /// `√N Σ_{s<k} α_s λ^{k−1−s}` per-agent CONGD consensus bound; the `√N`
    /// covers per-agent (rather than stacked) gradient normalization.
    ConsensusCongd,
    /// `‖(I − Π)x_k‖/α ≤ 2√N/(1−λ)` for CONGD.
    CongdDisagreement,
    /// `‖∇V_k(x_k)‖` bound, `G(1 + 2/(1−λ))`, or `G(1 + 3.42/(1−λ))` for `1/√k` steps.
    CompositeGradient,
    /// `‖(I − Π)x_k‖/α_k ≤ 2G/(1−λ)` for `α_k = B/k`.
    DisagreementInverseK,
    /// `‖(I − Π)x_k‖/α_k ≤ 3.42G/(1−λ)` for `α_k = B/√k`.
    DisagreementInverseSqrtK,
    /// `√N D G(1 + 2/(1−λ))/√K` optimality gap of averaged DSGD.
    DsgdGap,
}

impl EnvelopeName {
    pub const ALL: [EnvelopeName; 12] = [
        EnvelopeName::StronglyConvexRegret,
        EnvelopeName::StaticRegret,
        EnvelopeName::DynamicRegret,
        EnvelopeName::SqrtStepRegret,
        EnvelopeName::CongdDynamicRegret,
        EnvelopeName::ConsensusOcgd,
        EnvelopeName::ConsensusCongd,
        EnvelopeName::CongdDisagreement,
        EnvelopeName::CompositeGradient,
        EnvelopeName::DisagreementInverseK,
        EnvelopeName::DisagreementInverseSqrtK,
        EnvelopeName::DsgdGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EnvelopeName::StronglyConvexRegret => "strongly_convex_regret",
            EnvelopeName::StaticRegret => "static_regret",
            EnvelopeName::DynamicRegret => "dynamic_regret",
            EnvelopeName::SqrtStepRegret => "sqrt_step_regret",
            EnvelopeName::CongdDynamicRegret => "congd_dynamic_regret",
            EnvelopeName::ConsensusOcgd => "consensus_ocgd",
            EnvelopeName::ConsensusCongd => "consensus_congd",
            EnvelopeName::CongdDisagreement => "congd_disagreement",
            EnvelopeName::CompositeGradient => "composite_gradient",
            EnvelopeName::DisagreementInverseK => "disagreement_inverse_k",
            EnvelopeName::DisagreementInverseSqrtK => "disagreement_inverse_sqrt_k",
            EnvelopeName::DsgdGap => "dsgd_gap",
        }
    }
}

impl FromStr for EnvelopeName {
    type Err = RegretError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EnvelopeName::ALL
            .into_iter()
            .find(|e| e.name() == s.trim())
            .ok_or_else(|| RegretError::UnknownEnvelope(s.to_string()))
    }
}

impl fmt::Display for EnvelopeName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EnvelopeConstants {
    pub lipschitz: Option<f64>,
    pub mu: Option<f64>,
    pub lambda: Option<f64>,
    pub n_agents: Option<usize>,
    pub diameter: Option<f64>,
    pub path_variation: Option<f64>,
    /// Only for the CONGD regret envelope.
    pub zeta: Option<f64>,
}

/// Running `S_k = Σ_{s=1}^{k−1} α_s λ^{k−1−s}` via `S_{k+1} = λ S_k + α_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeometricSum {
    lambda: f64,
    value: f64,
}

impl GeometricSum {
    pub fn new(lambda: f64) -> GeometricSum {
        GeometricSum { lambda, value: 0.0 }
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn push(&mut self, alpha: f64) {
        self.value = self.lambda * self.value + alpha;
    }
}

/// `S_k` for a schedule, by recursion.
pub fn geometric_step_sum(schedule: &StepSchedule, lambda: f64, k: usize) -> f64 {
    let mut sum = GeometricSum::new(lambda);
    for s in 1..k {
        sum.push(schedule.alpha(s));
    }
    sum.value()
}

/// Envelope value at round / horizon `k`.
pub fn bound_envelope(
    name: EnvelopeName,
    constants: &EnvelopeConstants,
    schedule: Option<&StepSchedule>,
    k: usize,
) -> Result<f64, RegretError> {
    let label = name.name();
    let need = |v: Option<f64>, what: &'static str| v.ok_or(RegretError::MissingConstant(label, what));
    let g = || need(constants.lipschitz, "lipschitz");
    let lambda = || need(constants.lambda, "lambda");
    let n = || {
        constants
            .n_agents
            .map(|n| n as f64)
            .ok_or(RegretError::MissingConstant(label, "n_agents"))
    };
    let d = || need(constants.diameter, "diameter");
    let p = || need(constants.path_variation, "path_variation");
    let sched = || schedule.ok_or(RegretError::MissingConstant(label, "schedule"));
    let kf = k as f64;
    let value = match name {
        EnvelopeName::StronglyConvexRegret => {
            let mu = need(constants.mu, "mu")?;
            let factor = 1.0 + 2.0 / (1.0 - lambda()?);
            g()?.powi(2) / (2.0 * mu) * factor * factor * (1.0 + kf.ln())
        }
        EnvelopeName::StaticRegret => {
            let c = g()? * (1.0 + 2.0 / (1.0 - lambda()?));
            d()? * c * (n()? * kf).sqrt()
        }
        EnvelopeName::DynamicRegret => {
            let c = g()? * (1.0 + 2.0 / (1.0 - lambda()?));
            let nd = n()?.sqrt() * d()?;
            (nd * (nd + 3.0 * p()?)).sqrt() * c * kf.sqrt()
        }
        EnvelopeName::SqrtStepRegret => {
            1.5 * n()?.sqrt() * d()? * g()? * (1.0 + 3.42 / (1.0 - lambda()?)) * kf.sqrt()
        }
        EnvelopeName::CongdDynamicRegret => {
            let zeta = need(constants.zeta, "zeta")?;
            let (nn, dd) = (n()?, d()?);
            zeta * (1.0 + 1.0 / (1.0 - lambda()?))
                * (kf * (nn * dd * dd + 3.0 * nn.sqrt() * dd * p()?)).sqrt()
        }
        EnvelopeName::ConsensusOcgd => g()? * geometric_step_sum(sched()?, lambda()?, k),
        EnvelopeName::ConsensusCongd => n()?.sqrt() * geometric_step_sum(sched()?, lambda()?, k),
        EnvelopeName::CongdDisagreement => 2.0 * n()?.sqrt() / (1.0 - lambda()?),
        EnvelopeName::CompositeGradient => {
            let lam = lambda()?;
            let inflation = match schedule.map(|s| s.kind) {
                Some(crate::algorithms::ScheduleKind::InverseSqrtK) => 3.42,
                _ => 2.0,
            };
            g()? * (1.0 + inflation / (1.0 - lam))
        }
        EnvelopeName::DisagreementInverseK => 2.0 * g()? / (1.0 - lambda()?),
        EnvelopeName::DisagreementInverseSqrtK => 3.42 * g()? / (1.0 - lambda()?),
        EnvelopeName::DsgdGap => {
            n()?.sqrt() * d()? * g()? * (1.0 + 2.0 / (1.0 - lambda()?)) / kf.sqrt()
        }
    };
    Ok(value)
}

/// Least-squares fit of `ln(regret)` against `ln(K)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// `log10(K_max / K_min)`.
    pub decades: f64,
    pub points: usize,
}

/// Regrets are clipped at this floor before taking logs.
pub const REGRET_FLOOR: f64 = 1e-12;

pub fn fit_slope(curve: &[(f64, f64)]) -> Result<SlopeFit, RegretError> {
    for &(k, r) in curve {
        if !(k > 0.0 && k.is_finite()) || r.is_nan() {
            return Err(RegretError::InvalidPoint(format!("({k}, {r})")));
        }
    }
    let mut ks: Vec<f64> = curve.iter().map(|p| p.0).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    if ks.len() < 4 {
        return Err(RegretError::TooFewPoints(ks.len()));
    }
    let xs: Vec<f64> = curve.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = curve.iter().map(|p| p.1.max(REGRET_FLOOR).ln()).collect();
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        decades: (ks[ks.len() - 1] / ks[0]).log10(),
        points: curve.len(),
    })
}

pub fn sublinearity_slope(curve: &[(f64, f64)]) -> Result<f64, RegretError> {
    fit_slope(curve).map(|f| f.slope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{metropolis_mixing, Graph, TopologyKind};

    fn unit() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    fn mixing(kind: TopologyKind, n: usize) -> MixingMatrix {
        metropolis_mixing(&Graph::build(&kind, n).unwrap())
    }

    #[test]
    fn composite_value_examples() {
        let m = mixing(TopologyKind::Complete, 2);
        let losses = vec![LossFunction::quadratic(1.0, 0.0); 2];
        let same = AgentStates::scalars(&[0.3, 0.3], 1);
        let v = composite_value(&same, &losses, &m, 5.0, NetworkNorm::L2Squared, &unit()).unwrap();
        assert_eq!(v.network_loss, 0.0);

        let single = mixing(TopologyKind::Complete, 1);
        let s = AgentStates::scalars(&[0.8], 1);
        let v = composite_value(&s, &losses[..1], &single, 5.0, NetworkNorm::L2Squared, &unit()).unwrap();
        assert_eq!(v.network_loss, 0.0);
        assert_eq!(v.v, v.f_loss);

        let split = AgentStates::scalars(&[0.0, 1.0], 1);
        let zero = vec![LossFunction::quadratic(0.0, 0.0); 2];
        let v = composite_value(&split, &zero, &m, 1.0, NetworkNorm::L2Squared, &unit()).unwrap();
        assert!((v.network_loss - 0.5).abs() < 1e-15);
        assert!((v.network_double_sum - 1.0).abs() < 1e-15);
        assert!((m.disagreement_form(split.rows()) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn residual_examples() {
        assert_eq!(consensus_residual(&AgentStates::scalars(&[0.2, 0.2, 0.2], 1)).norm, 0.0);
        let r = consensus_residual(&AgentStates::scalars(&[0.0, 1.0], 1));
        assert!((r.norm - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(r.max_agent, 0.5);
        assert_eq!(consensus_residual(&AgentStates::scalars(&[0.9], 1)).norm, 0.0);
    }

    fn one_round(ledger: &mut RegretLedger, x: f64, comp: Comparators<'_>) -> Result<(), RegretError> {
        let m = mixing(TopologyKind::Complete, 1);
        let state = AgentStates::scalars(&[x], 1);
        let losses = [LossFunction::quadratic(2.0, 0.0)];
        update_ledger(
            ledger,
            RoundOutputs {
                state: &state,
                losses: &losses,
                mixing: &m,
                c: 1.0,
                domain: &unit(),
            },
            comp,
        )
    }

    #[test]
    fn single_round_regret() {
        let mut ledger = RegretLedger::new(true);
        let zero = [0.0];
        one_round(
            &mut ledger,
            1.0,
            Comparators {
                static_point: Some(&zero),
                dynamic_point: Some(&zero),
            },
        )
        .unwrap();
        assert_eq!(ledger.sc_regret(), 1.0);
        assert_eq!(ledger.dc_regret(), Some(1.0));
    }

    #[test]
    fn playing_the_comparator_gives_zero_regret() {
        let mut ledger = RegretLedger::new(true);
        let zero = [0.0];
        for _ in 0..10 {
            one_round(
                &mut ledger,
                0.0,
                Comparators {
                    static_point: Some(&zero),
                    dynamic_point: Some(&zero),
                },
            )
            .unwrap();
        }
        assert!(ledger.sc_regret().abs() <= 1e-9);
        assert!(ledger.dc_regret().unwrap().abs() <= 1e-9);
        assert_eq!(ledger.recompute_sc(), ledger.sc_regret());
    }

    #[test]
    fn missing_comparators_error() {
        let mut ledger = RegretLedger::new(true);
        assert_eq!(
            one_round(&mut ledger, 0.0, Comparators::default()).unwrap_err(),
            RegretError::MissingComparator("static")
        );
        let zero = [0.0];
        let err = one_round(
            &mut ledger,
            0.0,
            Comparators {
                static_point: Some(&zero),
                dynamic_point: None,
            },
        )
        .unwrap_err();
        assert_eq!(err, RegretError::MissingComparator("dynamic"));
        let mut static_only = RegretLedger::new(false);
        one_round(
            &mut static_only,
            0.5,
            Comparators {
                static_point: Some(&zero),
                dynamic_point: None,
            },
        )
        .unwrap();
        assert_eq!(static_only.dc_regret(), None);
    }

    #[test]
    fn envelope_examples() {
        let c = EnvelopeConstants {
            lipschitz: Some(1.0),
            lambda: Some(1.0 / 3.0),
            ..Default::default()
        };
        let v = bound_envelope(EnvelopeName::CompositeGradient, &c, None, 1).unwrap();
        assert!((v - 4.0).abs() < 1e-12);

        let s = StepSchedule::constant(0.1);
        assert_eq!(bound_envelope(EnvelopeName::ConsensusOcgd, &c, Some(&s), 1).unwrap(), 0.0);

        // D = 2, N = 1, C = 3 (G = 1, λ = 0), K = 400
        let c = EnvelopeConstants {
            lipschitz: Some(1.0),
            lambda: Some(0.0),
            n_agents: Some(1),
            diameter: Some(2.0),
            ..Default::default()
        };
        let v = bound_envelope(EnvelopeName::StaticRegret, &c, None, 400).unwrap();
        assert!((v - 120.0).abs() < 1e-9);
    }

    #[test]
    fn unknown_envelope_name() {
        assert_eq!(
            "nonsense".parse::<EnvelopeName>().unwrap_err(),
            RegretError::UnknownEnvelope("nonsense".into())
        );
        for e in EnvelopeName::ALL {
            assert_eq!(e.name().parse::<EnvelopeName>().unwrap(), e);
        }
    }

    #[test]
    fn geometric_sum_matches_closed_form() {
        let s = StepSchedule::inverse_k(0.7);
        let lambda: f64 = 0.6;
        for k in 1..30 {
            let direct: f64 = (1..k).map(|j| s.alpha(j) * lambda.powi((k - 1 - j) as i32)).sum();
            assert!((geometric_step_sum(&s, lambda, k) - direct).abs() < 1e-14);
        }
    }

    #[test]
    fn slope_examples() {
        let ks: [f64; 4] = [1e2, 1e3, 1e4, 1e5];
        let root: Vec<(f64, f64)> = ks.iter().map(|&k| (k, k.sqrt())).collect();
        assert!((sublinearity_slope(&root).unwrap() - 0.5).abs() < 1e-9);
        let log: Vec<(f64, f64)> = ks.iter().map(|&k| (k, 7.0 * k.ln())).collect();
        assert!(sublinearity_slope(&log).unwrap() < 0.2);
        let lin: Vec<(f64, f64)> = ks.iter().map(|&k| (k, k)).collect();
        assert!((sublinearity_slope(&lin).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(
            sublinearity_slope(&root[..3]).unwrap_err(),
            RegretError::TooFewPoints(3)
        );
        assert_eq!(fit_slope(&root).unwrap().decades, 3.0);
    }

    #[test]
    fn zero_regret_is_clipped() {
        let flat: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&k| (k, 0.0)).collect();
        assert_eq!(sublinearity_slope(&flat).unwrap(), 0.0);
    }
}
