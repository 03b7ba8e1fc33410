//! Round-synchronous updates for OCGD, CONGD and DINOCO, plus step schedules.
//!
//! Every update reads only the round-`k` snapshot and writes a fresh state,
//! so the order in which agents are processed cannot change the result.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::losses::{Domain, LossError, LossFunction, LossSum};
use crate::oracle::{self, OfflineOracle, OracleError, OracleOutcome};
use crate::topology::MixingMatrix;

/// Gradient norms at or below this count as zero in CONGD.
pub const GRADIENT_EPSILON: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum AlgorithmError {
    #[error("step size must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("expected {expected} agents, got {got}")]
    AgentCount { expected: usize, got: usize },
    #[error("DINOCO runs on one-dimensional decisions, got dimension {0}")]
    DinocoDimension(usize),
    #[error("missing constant '{0}' for schedule {1}")]
    MissingConstant(&'static str, &'static str),
    #[error("invalid constant '{0}': {1}")]
    InvalidConstant(&'static str, String),
    #[error("unknown schedule '{0}'")]
    UnknownSchedule(String),
    #[error("non-finite state for agent {agent} at round {round}")]
    NonFinite { agent: usize, round: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// Stacked decisions of all agents at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStates {
    x: Vec<Vec<f64>>,
    round: usize,
}

impl AgentStates {
    /// Every agent at the origin, round 1.
    pub fn origin(n_agents: usize, dimension: usize) -> AgentStates {
        AgentStates {
            x: vec![vec![0.0; dimension]; n_agents],
            round: 1,
        }
    }

    pub fn new(x: Vec<Vec<f64>>, round: usize) -> AgentStates {
        AgentStates { x, round }
    }

    /// Scalar decisions, one per agent.
    pub fn scalars(values: &[f64], round: usize) -> AgentStates {
        AgentStates::new(values.iter().map(|v| vec![*v]).collect(), round)
    }

    pub fn n_agents(&self) -> usize {
        self.x.len()
    }

    pub fn dimension(&self) -> usize {
        self.x.first().map(Vec::len).unwrap_or(0)
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i]
    }

    /// Agent average `x̂`.
    pub fn mean(&self) -> Vec<f64> {
        let n = self.n_agents() as f64;
        let mut m = vec![0.0; self.dimension()];
        for row in &self.x {
            for (acc, v) in m.iter_mut().zip(row) {
                *acc += v;
            }
        }
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    /// Stacked Euclidean distance `‖x − y‖`.
    pub fn distance(&self, other: &AgentStates) -> f64 {
        self.x
            .iter()
            .flatten()
            .zip(other.x.iter().flatten())
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Stacked ℓ1 distance.
    pub fn l1_distance(&self, other: &AgentStates) -> f64 {
        self.x
            .iter()
            .flatten()
            .zip(other.x.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .sum()
    }

    fn check_finite(&self) -> Result<(), AlgorithmError> {
        for (agent, row) in self.x.iter().enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(AlgorithmError::NonFinite {
                    agent,
                    round: self.round,
                });
            }
        }
        Ok(())
    }
}

/// Componentwise clamp onto the box.
pub fn project_box(y: &[f64], domain: &Domain) -> Vec<f64> {
    y.iter()
        .zip(domain.lower().iter().zip(domain.upper()))
        .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
        .collect()
}

/// Local gradients `∇f^i_k(x^i_k)` for every agent.
pub fn local_gradients(
    state: &AgentStates,
    losses_k: &[LossFunction],
    domain: &Domain,
) -> Result<Vec<Vec<f64>>, AlgorithmError> {
    check_agents(state, losses_k.len())?;
    state
        .rows()
        .iter()
        .zip(losses_k)
        .map(|(x, loss)| loss.gradient(x, domain).map_err(AlgorithmError::from))
        .collect()
}

fn check_agents(state: &AgentStates, n: usize) -> Result<(), AlgorithmError> {
    if state.n_agents() != n {
        return Err(AlgorithmError::AgentCount {
            expected: state.n_agents(),
            got: n,
        });
    }
    Ok(())
}

fn check_step(alpha: f64) -> Result<(), AlgorithmError> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(AlgorithmError::NonPositiveStep(alpha));
    }
    Ok(())
}

/// `x_{k+1} = P(Πx_k − α∇F_k(x_k))`.
pub fn ocgd_step(
    state: &AgentStates,
    losses_k: &[LossFunction],
    mixing: &MixingMatrix,
    alpha: f64,
    domain: &Domain,
) -> Result<AgentStates, AlgorithmError> {
    let gradients = local_gradients(state, losses_k, domain)?;
    ocgd_step_with_gradients(state, &gradients, mixing, alpha, domain)
}

pub fn ocgd_step_with_gradients(
    state: &AgentStates,
    gradients: &[Vec<f64>],
    mixing: &MixingMatrix,
    alpha: f64,
    domain: &Domain,
) -> Result<AgentStates, AlgorithmError> {
    check_step(alpha)?;
    check_agents(state, gradients.len())?;
    let next: Vec<Vec<f64>> = (0..state.n_agents())
        .map(|i| {
            let mixed = mixing.mix_agent(i, state.rows());
            let y: Vec<f64> = mixed
                .iter()
                .zip(&gradients[i])
                .map(|(m, g)| m - alpha * g)
                .collect();
            project_box(&y, domain)
        })
        .collect();
    let out = AgentStates::new(next, state.round() + 1);
    out.check_finite()?;
    Ok(out)
}

/// Composite feedback `∇V^i = ∇f^i + (1/α) Σ_j π_ij (x^i − x^j)`.
pub fn composite_feedback(
    state: &AgentStates,
    i: usize,
    gradient: &[f64],
    mixing: &MixingMatrix,
    alpha: f64,
) -> Vec<f64> {
    let xi = state.row(i);
    let mut penalty = vec![0.0; xi.len()];
    for (j, xj) in state.rows().iter().enumerate() {
        let w = mixing.weight(i, j);
        for d in 0..xi.len() {
            penalty[d] += w * (xi[d] - xj[d]);
        }
    }
    gradient
        .iter()
        .zip(penalty)
        .map(|(g, p)| g + p / alpha)
        .collect()
}

/// Agent-wise form: each agent steps `x^i − α∇V^i` then projects. Same
/// iterate as [`ocgd_step`] up to rounding.
pub fn ocgd_agentwise_step(
    state: &AgentStates,
    losses_k: &[LossFunction],
    mixing: &MixingMatrix,
    alpha: f64,
    domain: &Domain,
) -> Result<AgentStates, AlgorithmError> {
    check_step(alpha)?;
    let gradients = local_gradients(state, losses_k, domain)?;
    let next = (0..state.n_agents())
        .map(|i| {
            let feedback = composite_feedback(state, i, &gradients[i], mixing, alpha);
            let y: Vec<f64> = state
                .row(i)
                .iter()
                .zip(feedback)
                .map(|(x, v)| x - alpha * v)
                .collect();
            project_box(&y, domain)
        })
        .collect();
    Ok(AgentStates::new(next, state.round() + 1))
}

/// Normalized-gradient consensus step; agents with a (numerically) zero
/// gradient keep their decision.
pub fn congd_step(
    state: &AgentStates,
    losses_k: &[LossFunction],
    mixing: &MixingMatrix,
    alpha: f64,
    domain: &Domain,
) -> Result<AgentStates, AlgorithmError> {
    let gradients = local_gradients(state, losses_k, domain)?;
    congd_step_with_gradients(state, &gradients, mixing, alpha, domain)
}

pub fn congd_step_with_gradients(
    state: &AgentStates,
    gradients: &[Vec<f64>],
    mixing: &MixingMatrix,
    alpha: f64,
    domain: &Domain,
) -> Result<AgentStates, AlgorithmError> {
    check_step(alpha)?;
    check_agents(state, gradients.len())?;
    let next: Vec<Vec<f64>> = (0..state.n_agents())
        .map(|i| {
            let g = &gradients[i];
            let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > GRADIENT_EPSILON {
                let mixed = mixing.mix_agent(i, state.rows());
                let y: Vec<f64> = mixed
                    .iter()
                    .zip(g)
                    .map(|(m, gd)| m - alpha * gd / norm)
                    .collect();
                project_box(&y, domain)
            } else {
                state.row(i).to_vec()
            }
        })
        .collect();
    let out = AgentStates::new(next, state.round() + 1);
    out.check_finite()?;
    Ok(out)
}

/// Per-agent, per-round random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStreams {
    master_seed: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStreams {
    pub fn new(master_seed: u64) -> RngStreams {
        RngStreams { master_seed }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream(&self, agent: usize, round: usize) -> ChaCha8Rng {
        let a = splitmix64(self.master_seed);
        let b = splitmix64(a ^ agent as u64);
        let c = splitmix64(b ^ (round as u64).rotate_left(32));
        ChaCha8Rng::seed_from_u64(c)
    }
}

/// Cumulative per-agent objectives `Σ_{l≤k} (f^i_l + r^i_l)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DinocoHistory {
    per_agent: Vec<LossSum>,
    rounds: usize,
}

impl DinocoHistory {
    pub fn new(n_agents: usize) -> DinocoHistory {
        DinocoHistory {
            per_agent: vec![LossSum::new(); n_agents],
            rounds: 0,
        }
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn objective(&self, agent: usize) -> &LossSum {
        &self.per_agent[agent]
    }

    /// Appends round `k`: each agent's loss plus the network term
    /// `(1/(2η)) Σ_{j ∈ Nb(i)} π_ij (x − x^j_k)²` with neighbours frozen at
    /// their played values.
    pub fn record_round(
        &mut self,
        losses_k: &[LossFunction],
        played: &AgentStates,
        mixing: &MixingMatrix,
        eta: f64,
    ) -> Result<(), AlgorithmError> {
        if !(eta > 0.0) {
            return Err(OracleError::NonPositiveEta(eta).into());
        }
        check_agents(played, losses_k.len())?;
        if played.dimension() != 1 {
            return Err(AlgorithmError::DinocoDimension(played.dimension()));
        }
        let n = played.n_agents();
        for (i, (sum, loss)) in self.per_agent.iter_mut().zip(losses_k).enumerate() {
            sum.add(loss);
            for j in (0..n).filter(|&j| j != i) {
                let w = mixing.weight(i, j);
                if w != 0.0 {
                    sum.add_weighted_square(w / (2.0 * eta), played.row(j)[0]);
                }
            }
        }
        self.rounds += 1;
        Ok(())
    }
}

/// Output of one DINOCO round.
#[derive(Debug, Clone, PartialEq)]
pub struct DinocoRound {
    pub next: AgentStates,
    pub sigmas: Vec<f64>,
    pub outcomes: Vec<OracleOutcome>,
}

/// Plays the perturbed leader: each agent draws `σ ~ exp(η)` from its own
/// stream and asks the oracle for `argmin Σ_{l≤k}(f_l + r_l)(x) − σx`.
/// With an empty history every agent plays the origin.
pub fn dinoco_step(
    history: &DinocoHistory,
    eta: f64,
    oracle: &dyn OfflineOracle,
    streams: &RngStreams,
    domain: &Domain,
) -> Result<DinocoRound, AlgorithmError> {
    if domain.dimension() != 1 {
        return Err(AlgorithmError::DinocoDimension(domain.dimension()));
    }
    let n = history.per_agent.len();
    let next_round = history.rounds() + 1;
    if history.rounds() == 0 {
        return Ok(DinocoRound {
            next: AgentStates::origin(n, 1),
            sigmas: vec![],
            outcomes: vec![],
        });
    }
    let mut xs = Vec::with_capacity(n);
    let mut sigmas = Vec::with_capacity(n);
    let mut outcomes = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = streams.stream(i, next_round);
        let sigma = oracle::sample_exponential(eta, &mut rng)?;
        let outcome = oracle.minimize(history.objective(i), sigma)?;
        xs.push(vec![project_box(&[outcome.x], domain)[0]]);
        sigmas.push(sigma);
        outcomes.push(outcome);
    }
    let next = AgentStates::new(xs, next_round);
    next.check_finite()?;
    Ok(DinocoRound {
        next,
        sigmas,
        outcomes,
    })
}

/// Shape of a step-size sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    InverseK,
    InverseSqrtK,
}

/// Closed-form step schedules, one per setting with a regret bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleTheorem {
    OcgdStronglyConvex,
    OcgdConvexStatic,
    OcgdConvexDynamic,
    OcgdConvexSqrtK,
    CongdDynamic,
}

impl ScheduleTheorem {
    pub const ALL: [ScheduleTheorem; 5] = [
        ScheduleTheorem::OcgdStronglyConvex,
        ScheduleTheorem::OcgdConvexStatic,
        ScheduleTheorem::OcgdConvexDynamic,
        ScheduleTheorem::OcgdConvexSqrtK,
        ScheduleTheorem::CongdDynamic,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ScheduleTheorem::OcgdStronglyConvex => "ocgd_strongly_convex",
            ScheduleTheorem::OcgdConvexStatic => "ocgd_convex_static",
            ScheduleTheorem::OcgdConvexDynamic => "ocgd_convex_dynamic",
            ScheduleTheorem::OcgdConvexSqrtK => "ocgd_convex_sqrtk",
            ScheduleTheorem::CongdDynamic => "congd_dynamic",
        }
    }
}

impl FromStr for ScheduleTheorem {
    type Err = AlgorithmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ScheduleTheorem::ALL
            .into_iter()
            .find(|t| t.name() == s.trim())
            .ok_or_else(|| AlgorithmError::UnknownSchedule(s.to_string()))
    }
}

impl fmt::Display for ScheduleTheorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Where a schedule's base value came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Provenance {
    Explicit,
    Theorem(ScheduleTheorem),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub kind: ScheduleKind,
    pub base: f64,
    pub provenance: Provenance,
}

impl StepSchedule {
    pub fn constant(alpha: f64) -> StepSchedule {
        StepSchedule {
            kind: ScheduleKind::Constant,
            base: alpha,
            provenance: Provenance::Explicit,
        }
    }

    pub fn inverse_k(base: f64) -> StepSchedule {
        StepSchedule {
            kind: ScheduleKind::InverseK,
            base,
            provenance: Provenance::Explicit,
        }
    }

    pub fn inverse_sqrt_k(base: f64) -> StepSchedule {
        StepSchedule {
            kind: ScheduleKind::InverseSqrtK,
            base,
            provenance: Provenance::Explicit,
        }
    }

    /// `α_k` for round `k ≥ 1`.
    pub fn alpha(&self, k: usize) -> f64 {
        let k = k.max(1) as f64;
        match self.kind {
            ScheduleKind::Constant => self.base,
            ScheduleKind::InverseK => self.base / k,
            ScheduleKind::InverseSqrtK => self.base / k.sqrt(),
        }
    }

    pub fn describe(&self) -> String {
        let shape = match self.kind {
            ScheduleKind::Constant => "constant",
            ScheduleKind::InverseK => "inverse_k",
            ScheduleKind::InverseSqrtK => "inverse_sqrt_k",
        };
        match self.provenance {
            Provenance::Explicit => format!("{shape}({})", self.base),
            Provenance::Theorem(t) => format!("{shape}({}) from {t}", self.base),
        }
    }
}

/// Problem constants the theorem schedules may need.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ScheduleConstants {
    pub mu: Option<f64>,
    pub lipschitz: Option<f64>,
    pub lambda: Option<f64>,
    pub n_agents: Option<usize>,
    pub diameter: Option<f64>,
    pub path_variation: Option<f64>,
    pub horizon: Option<usize>,
}

fn need<T: Copy>(v: Option<T>, name: &'static str, which: ScheduleTheorem) -> Result<T, AlgorithmError> {
    v.ok_or(AlgorithmError::MissingConstant(name, which.name()))
}

fn positive(v: f64, name: &'static str) -> Result<f64, AlgorithmError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(AlgorithmError::InvalidConstant(name, format!("must be positive, got {v}")))
    }
}

/// `C = G (1 + 2/(1 − λ))`.
pub fn gradient_constant(lipschitz: f64, lambda: f64) -> f64 {
    lipschitz * (1.0 + 2.0 / (1.0 - lambda))
}

pub fn schedule_from_theorem(
    which: ScheduleTheorem,
    constants: &ScheduleConstants,
) -> Result<StepSchedule, AlgorithmError> {
    let c = constants;
    let lambda = |c: &ScheduleConstants| -> Result<f64, AlgorithmError> {
        let l = need(c.lambda, "lambda", which)?;
        if (0.0..1.0).contains(&l) {
            Ok(l)
        } else {
            Err(AlgorithmError::InvalidConstant("lambda", format!("must lie in [0, 1), got {l}")))
        }
    };
    let sqrt_nd = |c: &ScheduleConstants| -> Result<f64, AlgorithmError> {
        let n = need(c.n_agents, "n_agents", which)?;
        let d = positive(need(c.diameter, "diameter", which)?, "diameter")?;
        Ok((n as f64).sqrt() * d)
    };
    let horizon = |c: &ScheduleConstants| -> Result<f64, AlgorithmError> {
        let k = need(c.horizon, "horizon", which)?;
        if k == 0 {
            return Err(AlgorithmError::InvalidConstant("horizon", "must be positive".into()));
        }
        Ok(k as f64)
    };
    let path = |c: &ScheduleConstants| -> Result<f64, AlgorithmError> {
        let p = need(c.path_variation, "path_variation", which)?;
        if p >= 0.0 {
            Ok(p)
        } else {
            Err(AlgorithmError::InvalidConstant("path_variation", format!("must be ≥ 0, got {p}")))
        }
    };
    let (kind, base) = match which {
        ScheduleTheorem::OcgdStronglyConvex => {
            let mu = positive(need(c.mu, "mu", which)?, "mu")?;
            (ScheduleKind::InverseK, 1.0 / mu)
        }
        ScheduleTheorem::OcgdConvexStatic => {
            let g = positive(need(c.lipschitz, "lipschitz", which)?, "lipschitz")?;
            let cc = gradient_constant(g, lambda(c)?);
            (ScheduleKind::Constant, sqrt_nd(c)? / (cc * horizon(c)?.sqrt()))
        }
        ScheduleTheorem::OcgdConvexDynamic => {
            let g = positive(need(c.lipschitz, "lipschitz", which)?, "lipschitz")?;
            let cc = gradient_constant(g, lambda(c)?);
            let nd = sqrt_nd(c)?;
            let alpha = (nd * (nd + 3.0 * path(c)?)).sqrt() / (cc * horizon(c)?.sqrt());
            (ScheduleKind::Constant, alpha)
        }
        ScheduleTheorem::OcgdConvexSqrtK => {
            let g = positive(need(c.lipschitz, "lipschitz", which)?, "lipschitz")?;
            let l = lambda(c)?;
            (ScheduleKind::InverseSqrtK, sqrt_nd(c)? / (g * (1.0 + 3.42 / (1.0 - l))))
        }
        ScheduleTheorem::CongdDynamic => {
            let nd = sqrt_nd(c)?;
            let alpha = (nd * (nd + 3.0 * path(c)?) / horizon(c)?).sqrt();
            (ScheduleKind::Constant, alpha)
        }
    };
    Ok(StepSchedule {
        kind,
        base,
        provenance: Provenance::Theorem(which),
    })
}
