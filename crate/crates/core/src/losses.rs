//! Loss families, drifting loss sequences and brute-force comparators.
//!
//! Four families cover the classes the algorithms are analysed for:
//! quadratic (strongly convex), Huber-smoothed absolute drift (convex),
//! a sigmoid of the coordinate sum (pseudo-convex) and a quadratic with a
//! sine ripple (non-convex).

use std::collections::HashMap;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::search::{self, SearchError, UniformGrid};

pub const DEFAULT_HUBER_KNEE: f64 = 1e-3;
pub const DEFAULT_GRID_POINTS: usize = 10_001;

#[derive(Debug, Error, PartialEq)]
pub enum LossError {
    #[error("out of domain: {0:?}")]
    OutOfDomain(Vec<f64>),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("grid oracle limited to n ≤ 2")]
    GridDimension,
    #[error("invalid domain: {0}")]
    InvalidDomain(String),
    #[error("invalid loss parameter: {0}")]
    InvalidParameter(String),
    #[error("round {0} outside 1..={1}")]
    RoundOutOfRange(usize, usize),
    #[error(transparent)]
    Search(#[from] SearchError),
}

/// Axis-aligned box containing the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Domain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Domain, LossError> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(LossError::InvalidDomain(
                "bounds must be non-empty and of equal length".into(),
            ));
        }
        for (lo, hi) in lower.iter().zip(&upper) {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(LossError::InvalidDomain(format!(
                    "need finite lower < upper, got [{lo}, {hi}]"
                )));
            }
            if *lo > 0.0 || *hi < 0.0 {
                return Err(LossError::InvalidDomain(format!(
                    "[{lo}, {hi}] does not contain the origin"
                )));
            }
        }
        Ok(Domain { lower, upper })
    }

    pub fn interval(lower: f64, upper: f64) -> Result<Domain, LossError> {
        Domain::new(vec![lower], vec![upper])
    }

    pub fn cube(dimension: usize, lower: f64, upper: f64) -> Result<Domain, LossError> {
        Domain::new(vec![lower; dimension], vec![upper; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// `D = max_j (upper_j − lower_j)`.
    pub fn diameter_inf(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .fold(0.0, f64::max)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension()
            && x
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (lo, hi))| lo <= v && v <= hi)
    }

    /// Per-coordinate largest distance from `point` to the box faces.
    fn farthest_offsets(&self, point: &[f64]) -> Vec<f64> {
        point
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(c, (lo, hi))| (c - lo).abs().max((hi - c).abs()))
            .collect()
    }

    pub fn axis_grid(&self, axis: usize, points: usize) -> Result<UniformGrid, SearchError> {
        UniformGrid::new(self.lower[axis], self.upper[axis], points)
    }

    fn check(&self, x: &[f64]) -> Result<(), LossError> {
        if x.len() != self.dimension() {
            return Err(LossError::DimensionMismatch {
                expected: self.dimension(),
                got: x.len(),
            });
        }
        if !self.contains(x) {
            return Err(LossError::OutOfDomain(x.to_vec()));
        }
        Ok(())
    }
}

/// Curvature class used for algorithm compatibility checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossClass {
    StronglyConvex,
    Convex,
    PseudoConvex,
    NonConvex,
}

/// Family and its shape parameters; the center lives on [`LossFunction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossFamily {
    /// `(μ/2)‖x − c‖²`
    Quadratic { mu: f64 },
    /// Huber-smoothed `‖x − c‖` with quadratic zone of radius `knee`.
    AbsoluteDrift { knee: f64 },
    /// `1/(1 + exp(−s Σ_j (x_j − c_j)))`
    PseudoSigmoid { steepness: f64 },
    /// `‖x − c‖²/2 + a Σ_j sin²(ω (x_j − c_j))`
    SineQuadratic { amplitude: f64, frequency: f64 },
}

impl LossFamily {
    pub fn name(&self) -> &'static str {
        match self {
            LossFamily::Quadratic { .. } => "quadratic",
            LossFamily::AbsoluteDrift { .. } => "absolute-drift",
            LossFamily::PseudoSigmoid { .. } => "pseudo-sigmoid",
            LossFamily::SineQuadratic { .. } => "nonconvex-sine-quadratic",
        }
    }

    pub fn class(&self) -> LossClass {
        match *self {
            LossFamily::Quadratic { mu } if mu > 0.0 => LossClass::StronglyConvex,
            LossFamily::Quadratic { .. } | LossFamily::AbsoluteDrift { .. } => LossClass::Convex,
            LossFamily::PseudoSigmoid { .. } => LossClass::PseudoConvex,
            LossFamily::SineQuadratic { .. } => LossClass::NonConvex,
        }
    }

    pub fn validate(&self) -> Result<(), LossError> {
        let bad = |msg: String| Err(LossError::InvalidParameter(msg));
        match *self {
            LossFamily::Quadratic { mu } if !(mu >= 0.0 && mu.is_finite()) => {
                bad(format!("mu must be finite and ≥ 0, got {mu}"))
            }
            LossFamily::AbsoluteDrift { knee } if !(knee > 0.0 && knee.is_finite()) => {
                bad(format!("knee must be positive, got {knee}"))
            }
            LossFamily::PseudoSigmoid { steepness } if !(steepness > 0.0 && steepness.is_finite()) => {
                bad(format!("steepness must be positive, got {steepness}"))
            }
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } if !(amplitude >= 0.0 && frequency >= 0.0 && (amplitude + frequency).is_finite()) => {
                bad("amplitude and frequency must be finite and ≥ 0".into())
            }
            _ => Ok(()),
        }
    }
}

fn logistic(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// One agent's loss at one round.
#[derive(Debug, Clone, PartialEq)]
pub struct LossFunction {
    pub family: LossFamily,
    pub center: Vec<f64>,
}

impl LossFunction {
    pub fn new(family: LossFamily, center: Vec<f64>) -> LossFunction {
        LossFunction { family, center }
    }

    pub fn quadratic(mu: f64, center: f64) -> LossFunction {
        LossFunction::new(LossFamily::Quadratic { mu }, vec![center])
    }

    pub fn dimension(&self) -> usize {
        self.center.len()
    }

    /// Value without the domain check.
    pub fn value_unchecked(&self, x: &[f64]) -> f64 {
        match self.family {
            LossFamily::Quadratic { mu } => 0.5 * mu * self.sq_dist(x),
            LossFamily::AbsoluteDrift { knee } => {
                let r = self.sq_dist(x).sqrt();
                if r <= knee {
                    r * r / (2.0 * knee)
                } else {
                    r - knee / 2.0
                }
            }
            LossFamily::PseudoSigmoid { steepness } => logistic(steepness * self.offset_sum(x)),
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } => {
                let ripple: f64 = x
                    .iter()
                    .zip(&self.center)
                    .map(|(v, c)| (frequency * (v - c)).sin().powi(2))
                    .sum();
                0.5 * self.sq_dist(x) + amplitude * ripple
            }
        }
    }

    /// Gradient without the domain check.
    pub fn gradient_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let offsets: Vec<f64> = x.iter().zip(&self.center).map(|(v, c)| v - c).collect();
        match self.family {
            LossFamily::Quadratic { mu } => offsets.iter().map(|r| mu * r).collect(),
            LossFamily::AbsoluteDrift { knee } => {
                let norm = offsets.iter().map(|r| r * r).sum::<f64>().sqrt();
                let scale = if norm <= knee { 1.0 / knee } else { 1.0 / norm };
                offsets.iter().map(|r| r * scale).collect()
            }
            LossFamily::PseudoSigmoid { steepness } => {
                let p = logistic(steepness * offsets.iter().sum::<f64>());
                vec![steepness * p * (1.0 - p); x.len()]
            }
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } => offsets
                .iter()
                .map(|r| r + amplitude * frequency * (2.0 * frequency * r).sin())
                .collect(),
        }
    }

    pub fn evaluate(&self, x: &[f64], domain: &Domain) -> Result<f64, LossError> {
        self.check_dims(domain)?;
        domain.check(x)?;
        Ok(self.value_unchecked(x))
    }

    pub fn gradient(&self, x: &[f64], domain: &Domain) -> Result<Vec<f64>, LossError> {
        self.check_dims(domain)?;
        domain.check(x)?;
        Ok(self.gradient_unchecked(x))
    }

    /// Upper bound on `‖∇f‖` over the domain.
    pub fn lipschitz_bound(&self, domain: &Domain) -> f64 {
        let far = domain.farthest_offsets(&self.center);
        match self.family {
            LossFamily::Quadratic { mu } => mu * far.iter().map(|r| r * r).sum::<f64>().sqrt(),
            LossFamily::AbsoluteDrift { .. } => 1.0,
            LossFamily::PseudoSigmoid { steepness } => {
                steepness * (self.dimension() as f64).sqrt() / 4.0
            }
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } => far
                .iter()
                .map(|r| (r + amplitude * frequency).powi(2))
                .sum::<f64>()
                .sqrt(),
        }
    }

    /// Upper bound on the largest Hessian eigenvalue magnitude.
    pub fn curvature_bound(&self) -> f64 {
        match self.family {
            LossFamily::Quadratic { mu } => mu,
            LossFamily::AbsoluteDrift { knee } => 1.0 / knee,
            // max |σ''| = 1/(6√3); the Hessian is s²σ''·11ᵀ with norm n·s²|σ''|
            LossFamily::PseudoSigmoid { steepness } => {
                self.dimension() as f64 * steepness * steepness / (6.0 * 3f64.sqrt())
            }
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } => 1.0 + 2.0 * amplitude * frequency * frequency,
        }
    }

    fn sq_dist(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(v, c)| (v - c) * (v - c))
            .sum()
    }

    fn offset_sum(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.center).map(|(v, c)| v - c).sum()
    }

    fn check_dims(&self, domain: &Domain) -> Result<(), LossError> {
        if self.dimension() != domain.dimension() {
            return Err(LossError::DimensionMismatch {
                expected: domain.dimension(),
                got: self.dimension(),
            });
        }
        Ok(())
    }
}

/// Central finite-difference gradient with step `h`.
pub fn finite_difference_gradient(loss: &LossFunction, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|d| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[d] += h;
            down[d] -= h;
            (loss.value_unchecked(&up) - loss.value_unchecked(&down)) / (2.0 * h)
        })
        .collect()
}

/// `‖fd − g‖ / max(‖g‖, 1)`.
pub fn gradient_relative_error(loss: &LossFunction, x: &[f64], h: f64) -> f64 {
    let analytic = loss.gradient_unchecked(x);
    let numeric = finite_difference_gradient(loss, x, h);
    let diff = analytic
        .iter()
        .zip(&numeric)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt().max(1.0);
    diff / scale
}

/// `1.05 × max ‖∇f‖` over uniformly sampled domain points.
pub fn estimate_lipschitz(loss: &LossFunction, domain: &Domain, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x: Vec<f64> = domain
            .lower()
            .iter()
            .zip(domain.upper())
            .map(|(lo, hi)| rng.gen_range(*lo..=*hi))
            .collect();
        let g = loss.gradient_unchecked(&x);
        worst = worst.max(g.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    1.05 * worst
}

/// A one-dimensional objective the grid searches can minimize.
pub trait ScalarObjective {
    fn value(&self, x: f64) -> f64;

    fn values_on(&self, grid: &UniformGrid) -> Vec<f64> {
        grid.iter().map(|x| self.value(x)).collect()
    }

    /// Bound on `|f'|` over `[lower, upper]`.
    fn lipschitz_bound(&self, lower: f64, upper: f64) -> f64;

    /// Bound on `|f''|`.
    fn curvature_bound(&self) -> f64;
}

/// Closure-backed objective with caller-supplied bounds.
pub struct FnObjective<F: Fn(f64) -> f64> {
    pub f: F,
    pub lipschitz: f64,
    pub curvature: f64,
}

impl<F: Fn(f64) -> f64> ScalarObjective for FnObjective<F> {
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    fn lipschitz_bound(&self, _lower: f64, _upper: f64) -> f64 {
        self.lipschitz
    }

    fn curvature_bound(&self) -> f64 {
        self.curvature
    }
}

#[derive(Debug, Clone, PartialEq)]
struct TrigGroup {
    freq: f64,
    cos_coef: f64,
    sin_coef: f64,
}

/// Sum of one-dimensional losses and weighted squared distances.
///
/// Quadratic parts collapse to three coefficients and sine ripples with the
/// same frequency collapse to one cosine/sine pair, so evaluating a sum of
/// thousands of terms costs a handful of flops. Other families are kept as a
/// term list.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossSum {
    quad: [f64; 3],
    trig: Vec<TrigGroup>,
    /// Remaining terms with their multiplicities.
    others: Vec<(LossFunction, f64)>,
    other_index: HashMap<(u8, u64, u64), usize>,
    other_curvature: f64,
    terms: usize,
}

impl LossSum {
    pub fn new() -> LossSum {
        LossSum::default()
    }

    pub fn n_terms(&self) -> usize {
        self.terms
    }

    /// Adds a one-dimensional loss.
    pub fn add(&mut self, loss: &LossFunction) {
        debug_assert_eq!(loss.dimension(), 1);
        let c = loss.center[0];
        self.terms += 1;
        match loss.family {
            LossFamily::Quadratic { mu } => self.add_weighted_square(mu / 2.0, c),
            LossFamily::SineQuadratic {
                amplitude,
                frequency,
            } => {
                self.add_weighted_square(0.5, c);
                if amplitude != 0.0 && frequency != 0.0 {
                    // a sin²(ω(x−c)) = a/2 − (a/2)[cos(2ωc)cos(2ωx) + sin(2ωc)sin(2ωx)]
                    let freq = 2.0 * frequency;
                    let half = amplitude / 2.0;
                    self.quad[2] += half;
                    let (s, co) = (freq * c).sin_cos();
                    let group = match self.trig.iter_mut().find(|g| g.freq == freq) {
                        Some(g) => g,
                        None => {
                            self.trig.push(TrigGroup {
                                freq,
                                cos_coef: 0.0,
                                sin_coef: 0.0,
                            });
                            self.trig.last_mut().expect("just pushed")
                        }
                    };
                    group.cos_coef -= half * co;
                    group.sin_coef -= half * s;
                }
            }
            LossFamily::AbsoluteDrift { knee: p } | LossFamily::PseudoSigmoid { steepness: p } => {
                self.other_curvature += loss.curvature_bound();
                let tag = matches!(loss.family, LossFamily::PseudoSigmoid { .. }) as u8;
                let key = (tag, p.to_bits(), c.to_bits());
                match self.other_index.get(&key) {
                    Some(&idx) => self.others[idx].1 += 1.0,
                    None => {
                        self.other_index.insert(key, self.others.len());
                        self.others.push((loss.clone(), 1.0));
                    }
                }
            }
        }
    }

    /// Adds `weight · (x − center)²`.
    pub fn add_weighted_square(&mut self, weight: f64, center: f64) {
        self.quad[0] += weight;
        self.quad[1] -= 2.0 * weight * center;
        self.quad[2] += weight * center * center;
    }

    /// Adds a linear term `slope · x`.
    pub fn add_linear(&mut self, slope: f64) {
        self.quad[1] += slope;
    }

    fn others_lipschitz(&self, lower: f64, upper: f64) -> f64 {
        let domain = Domain {
            lower: vec![lower],
            upper: vec![upper],
        };
        self.others.iter().map(|(l, w)| w * l.lipschitz_bound(&domain)).sum()
    }
}

impl ScalarObjective for LossSum {
    fn value(&self, x: f64) -> f64 {
        let [a2, a1, a0] = self.quad;
        let mut v = (a2 * x + a1) * x + a0;
        for g in &self.trig {
            let (s, c) = (g.freq * x).sin_cos();
            v += g.cos_coef * c + g.sin_coef * s;
        }
        let point = [x];
        for (l, w) in &self.others {
            v += w * l.value_unchecked(&point);
        }
        v
    }

    fn values_on(&self, grid: &UniformGrid) -> Vec<f64> {
        let [a2, a1, a0] = self.quad;
        let mut values: Vec<f64> = grid.iter().map(|x| (a2 * x + a1) * x + a0).collect();
        for g in &self.trig {
            let table = grid.trig_table(g.freq);
            for ((v, c), s) in values.iter_mut().zip(&table.cos).zip(&table.sin) {
                *v += g.cos_coef * c + g.sin_coef * s;
            }
        }
        if !self.others.is_empty() {
            let mut point = [0.0];
            for (idx, v) in values.iter_mut().enumerate() {
                point[0] = grid.point(idx);
                for (l, w) in &self.others {
                    *v += w * l.value_unchecked(&point);
                }
            }
        }
        values
    }

    fn lipschitz_bound(&self, lower: f64, upper: f64) -> f64 {
        let [a2, a1, _] = self.quad;
        let quad = (2.0 * a2 * lower + a1).abs().max((2.0 * a2 * upper + a1).abs());
        let trig: f64 = self
            .trig
            .iter()
            .map(|g| g.freq * g.cos_coef.hypot(g.sin_coef))
            .sum();
        quad + trig + self.others_lipschitz(lower, upper)
    }

    fn curvature_bound(&self) -> f64 {
        let trig: f64 = self
            .trig
            .iter()
            .map(|g| g.freq * g.freq * g.cos_coef.hypot(g.sin_coef))
            .sum();
        2.0 * self.quad[0].abs() + trig + self.other_curvature
    }
}

/// How loss centers move over rounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriftSpec {
    None,
    /// Every center shifts by `rate` per round.
    Linear { rate: f64 },
    /// Centers oscillate as `amplitude · cos(2π(k − 1)/period)`.
    Sinusoidal { amplitude: f64, period: f64 },
}

impl DriftSpec {
    /// Sinusoidal drift whose total center movement over `horizon` rounds is
    /// about `horizon^exponent`.
    pub fn for_exponent(exponent: f64, horizon: usize, amplitude: f64) -> DriftSpec {
        let k = horizon.max(1) as f64;
        let period = (4.0 * amplitude * k.powf(1.0 - exponent)).max(2.0);
        DriftSpec::Sinusoidal { amplitude, period }
    }

    /// Shift applied to every center at round `k` (1-based).
    pub fn offset(&self, k: usize) -> f64 {
        let t = (k - 1) as f64;
        match *self {
            DriftSpec::None => 0.0,
            DriftSpec::Linear { rate } => rate * t,
            DriftSpec::Sinusoidal { amplitude, period } => {
                // integer periods repeat bit-for-bit
                let t = if period.fract() == 0.0 { t % period } else { t };
                amplitude * (2.0 * PI * t / period).cos()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DriftSpec::None => "none",
            DriftSpec::Linear { .. } => "linear",
            DriftSpec::Sinusoidal { .. } => "sinusoidal",
        }
    }
}

/// Inputs to [`make_drifting_sequence`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceSpec {
    pub family: LossFamily,
    pub n_agents: usize,
    pub horizon: usize,
    pub dimension: usize,
    pub drift: DriftSpec,
    /// Agent offsets are drawn uniformly from `[−heterogeneity, heterogeneity]`.
    pub heterogeneity: f64,
    pub base_center: f64,
    pub seed: u64,
}

impl SequenceSpec {
    pub fn new(family: LossFamily, n_agents: usize, horizon: usize) -> SequenceSpec {
        SequenceSpec {
            family,
            n_agents,
            horizon,
            dimension: 1,
            drift: DriftSpec::None,
            heterogeneity: 0.0,
            base_center: 0.0,
            seed: 0,
        }
    }
}

/// Per-round, per-agent losses for a whole horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct LossSequence {
    rounds: Vec<Vec<LossFunction>>,
    drift: DriftSpec,
}

pub fn make_drifting_sequence(spec: &SequenceSpec) -> Result<LossSequence, LossError> {
    if spec.horizon == 0 || spec.n_agents == 0 || spec.dimension == 0 {
        return Err(LossError::InvalidParameter(
            "horizon, n_agents and dimension must be positive".into(),
        ));
    }
    spec.family.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let offsets: Vec<Vec<f64>> = (0..spec.n_agents)
        .map(|_| {
            (0..spec.dimension)
                .map(|_| {
                    let u: f64 = rng.gen_range(-1.0..=1.0);
                    spec.heterogeneity * u
                })
                .collect()
        })
        .collect();
    let rounds = (1..=spec.horizon)
        .map(|k| {
            let shift = spec.drift.offset(k);
            offsets
                .iter()
                .map(|off| {
                    let center = off.iter().map(|o| spec.base_center + o + shift).collect();
                    LossFunction::new(spec.family, center)
                })
                .collect()
        })
        .collect();
    Ok(LossSequence {
        rounds,
        drift: spec.drift,
    })
}

impl LossSequence {
    /// Builds a sequence from explicit rounds (`rounds[k − 1][agent]`).
    pub fn from_rounds(rounds: Vec<Vec<LossFunction>>) -> Result<LossSequence, LossError> {
        let n = rounds.first().map(Vec::len).unwrap_or(0);
        if n == 0 || rounds.iter().any(|r| r.len() != n) {
            return Err(LossError::InvalidParameter(
                "every round needs the same positive number of agents".into(),
            ));
        }
        let dim = rounds[0][0].dimension();
        if rounds.iter().flatten().any(|l| l.dimension() != dim) {
            return Err(LossError::InvalidParameter("mixed loss dimensions".into()));
        }
        Ok(LossSequence {
            rounds,
            drift: DriftSpec::None,
        })
    }

    pub fn horizon(&self) -> usize {
        self.rounds.len()
    }

    pub fn n_agents(&self) -> usize {
        self.rounds[0].len()
    }

    pub fn dimension(&self) -> usize {
        self.rounds[0][0].dimension()
    }

    pub fn drift(&self) -> DriftSpec {
        self.drift
    }

    /// Losses of round `k` (1-based).
    pub fn round(&self, k: usize) -> &[LossFunction] {
        &self.rounds[k - 1]
    }

    pub fn rounds(&self) -> impl Iterator<Item = &[LossFunction]> {
        self.rounds.iter().map(Vec::as_slice)
    }

    /// Family shared by the first loss; sequences built here are homogeneous.
    pub fn family(&self) -> LossFamily {
        self.rounds[0][0].family
    }

    /// Stacked Lipschitz bound `sqrt(Σ_i G_i²)` with `G_i` the worst over rounds.
    pub fn stacked_lipschitz(&self, domain: &Domain) -> f64 {
        let n = self.n_agents();
        (0..n)
            .map(|i| {
                self.rounds
                    .iter()
                    .map(|r| r[i].lipschitz_bound(domain))
                    .fold(0.0, f64::max)
                    .powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Largest per-agent Lipschitz bound.
    pub fn max_lipschitz(&self, domain: &Domain) -> f64 {
        self.rounds
            .iter()
            .flatten()
            .map(|l| l.lipschitz_bound(domain))
            .fold(0.0, f64::max)
    }

    pub fn max_curvature(&self) -> f64 {
        self.rounds
            .iter()
            .flatten()
            .map(LossFunction::curvature_bound)
            .fold(0.0, f64::max)
    }

    /// Σ_i f^i_k(x) at a common point `x`.
    pub fn round_total(&self, k: usize, x: &[f64]) -> f64 {
        self.round(k).iter().map(|l| l.value_unchecked(x)).sum()
    }

    fn check_round(&self, k: usize) -> Result<(), LossError> {
        if k == 0 || k > self.horizon() {
            return Err(LossError::RoundOutOfRange(k, self.horizon()));
        }
        Ok(())
    }
}

fn minimize_losses<'a>(
    losses: impl Iterator<Item = &'a LossFunction> + Clone,
    dimension: usize,
    domain: &Domain,
    grid: &[UniformGrid],
) -> Result<Vec<f64>, LossError> {
    match dimension {
        1 => {
            let mut sum = LossSum::new();
            for l in losses {
                sum.add(l);
            }
            let values = sum.values_on(&grid[0]);
            let coarse = search::argmin_values(&values, &grid[0])?;
            let (x, _) = search::golden_refine(|x| sum.value(x), coarse.x, coarse.value, &grid[0]);
            Ok(vec![x])
        }
        2 => {
            let f = |p: &[f64]| losses.clone().map(|l| l.value_unchecked(p)).sum::<f64>();
            let (point, _) = search::minimize_2d(f, [&grid[0], &grid[1]])?;
            debug_assert!(domain.contains(&point));
            Ok(point)
        }
        _ => Err(LossError::GridDimension),
    }
}

fn build_grids(domain: &Domain, dimension: usize, grid_points: usize) -> Result<Vec<UniformGrid>, LossError> {
    if dimension > 2 {
        return Err(LossError::GridDimension);
    }
    if dimension != domain.dimension() {
        return Err(LossError::DimensionMismatch {
            expected: domain.dimension(),
            got: dimension,
        });
    }
    (0..dimension)
        .map(|axis| domain.axis_grid(axis, grid_points).map_err(LossError::from))
        .collect()
}

fn identity_bits(loss: &LossFunction) -> Vec<u64> {
    let params: [f64; 3] = match loss.family {
        LossFamily::Quadratic { mu } => [0.0, mu, 0.0],
        LossFamily::AbsoluteDrift { knee } => [1.0, knee, 0.0],
        LossFamily::PseudoSigmoid { steepness } => [2.0, steepness, 0.0],
        LossFamily::SineQuadratic {
            amplitude,
            frequency,
        } => [3.0, amplitude, frequency],
    };
    params.iter().chain(&loss.center).map(|v| v.to_bits()).collect()
}

/// Grid minimizer of `Σ_i f^i_k` (dynamic comparator for round `k`).
pub fn minimizer_per_round(
    sequence: &LossSequence,
    k: usize,
    domain: &Domain,
    grid_points: usize,
) -> Result<Vec<f64>, LossError> {
    sequence.check_round(k)?;
    let grids = build_grids(domain, sequence.dimension(), grid_points)?;
    minimize_losses(sequence.round(k).iter(), sequence.dimension(), domain, &grids)
}

/// Dynamic comparators for every round, sharing one grid.
pub fn per_round_minimizers(
    sequence: &LossSequence,
    domain: &Domain,
    grid_points: usize,
) -> Result<Vec<Vec<f64>>, LossError> {
    let grids = build_grids(domain, sequence.dimension(), grid_points)?;
    // periodic drift repeats rounds exactly; solve each distinct round once
    let mut seen: HashMap<Vec<u64>, Vec<f64>> = HashMap::new();
    sequence
        .rounds()
        .map(|round| {
            let key: Vec<u64> = round.iter().flat_map(identity_bits).collect();
            if let Some(x) = seen.get(&key) {
                return Ok(x.clone());
            }
            let x = minimize_losses(round.iter(), sequence.dimension(), domain, &grids)?;
            seen.insert(key, x.clone());
            Ok(x)
        })
        .collect()
}

/// Grid minimizer of `Σ_k Σ_i f^i_k` (static comparator).
pub fn best_fixed_strategy(
    sequence: &LossSequence,
    domain: &Domain,
    grid_points: usize,
) -> Result<Vec<f64>, LossError> {
    let grids = build_grids(domain, sequence.dimension(), grid_points)?;
    minimize_losses(
        sequence.rounds.iter().flatten(),
        sequence.dimension(),
        domain,
        &grids,
    )
}

/// `Σ_k ‖x_{*,k} − x_{*,k+1}‖`.
pub fn path_variation(minimizers: &[Vec<f64>]) -> f64 {
    minimizers
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .sum()
}

impl LossSequence {
    /// P_K from grid minimizers.
    pub fn path_variation(&self, domain: &Domain, grid_points: usize) -> Result<f64, LossError> {
        Ok(path_variation(&per_round_minimizers(self, domain, grid_points)?))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Domain {
        Domain::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn quadratic_values_and_gradients() {
        let q = LossFunction::quadratic(2.0, 0.0);
        assert_eq!(q.evaluate(&[1.0], &unit()).unwrap(), 1.0);
        assert_eq!(q.evaluate(&[0.0], &unit()).unwrap(), 0.0);
        assert_eq!(q.gradient(&[1.0], &unit()).unwrap(), vec![2.0]);
        let q = LossFunction::quadratic(2.0, 0.5);
        assert_eq!(q.gradient(&[0.5], &unit()).unwrap(), vec![0.0]);
    }

    #[test]
    fn sine_quadratic_vanishes_at_center() {
        let f = LossFunction::new(
            LossFamily::SineQuadratic {
                amplitude: 1.0,
                frequency: 3.0,
            },
            vec![0.0],
        );
        assert_eq!(f.evaluate(&[0.0], &unit()).unwrap(), 0.0);
    }

    #[test]
    fn out_of_domain_is_an_error() {
        let q = LossFunction::quadratic(2.0, 0.0);
        let err = q.evaluate(&[1.5], &unit()).unwrap_err();
        assert!(err.to_string().starts_with("out of domain"));
        assert!(q.gradient(&[-1.0001], &unit()).is_err());
    }

    #[test]
    fn pseudo_sigmoid_gradient_matches_central_difference() {
        let f = LossFunction::new(LossFamily::PseudoSigmoid { steepness: 2.0 }, vec![0.1]);
        let fd = finite_difference_gradient(&f, &[0.7], 1e-6);
        let g = f.gradient(&[0.7], &unit()).unwrap();
        assert!((fd[0] - g[0]).abs() / g[0].abs().max(1.0) <= 1e-5);
    }

    #[test]
    fn huber_branches() {
        let f = LossFunction::new(LossFamily::AbsoluteDrift { knee: 1e-3 }, vec![0.0]);
        assert_eq!(f.value_unchecked(&[0.5]), 0.5 - 5e-4);
        assert!((f.value_unchecked(&[5e-4]) - 1.25e-4).abs() < 1e-18);
        assert_eq!(f.gradient_unchecked(&[-0.5]), vec![-1.0]);
        assert!((f.gradient_unchecked(&[5e-4])[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn stationary_sequence_has_zero_path_variation() {
        let mut spec = SequenceSpec::new(LossFamily::Quadratic { mu: 1.0 }, 2, 10);
        spec.seed = 7;
        let seq = make_drifting_sequence(&spec).unwrap();
        assert_eq!(seq.path_variation(&unit(), DEFAULT_GRID_POINTS).unwrap(), 0.0);
    }

    #[test]
    fn linear_drift_path_variation() {
        let mut spec = SequenceSpec::new(LossFamily::Quadratic { mu: 1.0 }, 1, 3);
        spec.drift = DriftSpec::Linear { rate: 0.1 };
        let seq = make_drifting_sequence(&spec).unwrap();
        let p = seq.path_variation(&unit(), DEFAULT_GRID_POINTS).unwrap();
        assert!((p - 0.2).abs() < 1e-9, "{p}");
    }

    #[test]
    fn heterogeneity_gives_distinct_centers() {
        let mut spec = SequenceSpec::new(LossFamily::Quadratic { mu: 1.0 }, 4, 2);
        spec.heterogeneity = 0.5;
        spec.seed = 3;
        let seq = make_drifting_sequence(&spec).unwrap();
        let centers: Vec<f64> = seq.round(1).iter().map(|l| l.center[0]).collect();
        for i in 0..4 {
            assert!(centers[i].abs() <= 0.5);
            for j in i + 1..4 {
                assert_ne!(centers[i], centers[j]);
            }
        }
        assert_eq!(seq, make_drifting_sequence(&spec).unwrap());
    }

    #[test]
    fn per_round_minimizer_examples() {
        let two = LossSequence::from_rounds(vec![vec![
            LossFunction::quadratic(1.0, 0.0),
            LossFunction::quadratic(1.0, 1.0),
        ]])
        .unwrap();
        let x = minimizer_per_round(&two, 1, &unit(), DEFAULT_GRID_POINTS).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9);

        let one = LossSequence::from_rounds(vec![vec![LossFunction::quadratic(1.0, 0.3)]]).unwrap();
        let x = minimizer_per_round(&one, 1, &unit(), DEFAULT_GRID_POINTS).unwrap();
        assert!((x[0] - 0.3).abs() <= 2e-4);

        let outside = LossSequence::from_rounds(vec![vec![LossFunction::quadratic(1.0, 2.0)]]).unwrap();
        let x = minimizer_per_round(&outside, 1, &unit(), DEFAULT_GRID_POINTS).unwrap();
        assert_eq!(x, vec![1.0]);
        assert!(minimizer_per_round(&outside, 2, &unit(), 11).is_err());
    }

    #[test]
    fn three_dimensions_rejected() {
        let seq = LossSequence::from_rounds(vec![vec![LossFunction::new(
            LossFamily::Quadratic { mu: 1.0 },
            vec![0.0; 3],
        )]])
        .unwrap();
        let domain = Domain::cube(3, -1.0, 1.0).unwrap();
        let err = minimizer_per_round(&seq, 1, &domain, 11).unwrap_err();
        assert_eq!(err.to_string(), "grid oracle limited to n ≤ 2");
    }

    #[test]
    fn best_fixed_examples() {
        let seq = LossSequence::from_rounds(vec![
            vec![LossFunction::quadratic(1.0, 0.0)],
            vec![LossFunction::quadratic(1.0, 1.0)],
        ])
        .unwrap();
        let x = best_fixed_strategy(&seq, &unit(), DEFAULT_GRID_POINTS).unwrap();
        assert!((x[0] - 0.5).abs() < 1e-9);

        let zero = LossSequence::from_rounds(vec![vec![LossFunction::quadratic(0.0, 0.4)]; 3]).unwrap();
        assert_eq!(best_fixed_strategy(&zero, &unit(), 101).unwrap(), vec![-1.0]);

        let mut spec = SequenceSpec::new(LossFamily::Quadratic { mu: 3.0 }, 3, 5);
        spec.heterogeneity = 0.4;
        let stationary = make_drifting_sequence(&spec).unwrap();
        let fixed = best_fixed_strategy(&stationary, &unit(), 2001).unwrap();
        let per = minimizer_per_round(&stationary, 4, &unit(), 2001).unwrap();
        assert!((fixed[0] - per[0]).abs() < 1e-9);
    }

    #[test]
    fn two_dimensional_comparator() {
        let seq = LossSequence::from_rounds(vec![vec![
            LossFunction::new(LossFamily::Quadratic { mu: 1.0 }, vec![0.2, -0.4]),
            LossFunction::new(LossFamily::Quadratic { mu: 1.0 }, vec![0.4, 0.0]),
        ]])
        .unwrap();
        let domain = Domain::cube(2, -1.0, 1.0).unwrap();
        let x = minimizer_per_round(&seq, 1, &domain, 201).unwrap();
        assert!((x[0] - 0.3).abs() < 1e-7 && (x[1] + 0.2).abs() < 1e-7);
    }

    #[test]
    fn loss_sum_matches_direct_evaluation() {
        let terms = vec![
            LossFunction::quadratic(2.0, 0.3),
            LossFunction::new(
                LossFamily::SineQuadratic {
                    amplitude: 1.0,
                    frequency: 3.0,
                },
                vec![-0.2],
            ),
            LossFunction::new(
                LossFamily::SineQuadratic {
                    amplitude: 0.5,
                    frequency: 3.0,
                },
                vec![0.6],
            ),
            LossFunction::new(LossFamily::AbsoluteDrift { knee: 1e-3 }, vec![0.1]),
            LossFunction::new(LossFamily::PseudoSigmoid { steepness: 2.0 }, vec![0.0]),
        ];
        let mut sum = LossSum::new();
        for t in &terms {
            sum.add(t);
        }
        sum.add_weighted_square(0.7, -0.5);
        sum.add_linear(-1.5);
        let grid = UniformGrid::new(-1.0, 1.0, 101).unwrap();
        let on_grid = sum.values_on(&grid);
        for (idx, x) in grid.iter().enumerate() {
            let direct: f64 = terms.iter().map(|t| t.value_unchecked(&[x])).sum::<f64>()
                + 0.7 * (x + 0.5).powi(2)
                - 1.5 * x;
            assert!((sum.value(x) - direct).abs() < 1e-12);
            assert!((on_grid[idx] - direct).abs() < 1e-12);
        }
        assert_eq!(sum.n_terms(), terms.len());
    }

    #[test]
    fn sampled_lipschitz_below_analytic() {
        let f = LossFunction::new(
            LossFamily::SineQuadratic {
                amplitude: 1.0,
                frequency: 3.0,
            },
            vec![0.2],
        );
        let sampled = estimate_lipschitz(&f, &unit(), 10_000, 1);
        assert!(sampled / 1.05 <= f.lipschitz_bound(&unit()) + 1e-12);
        assert!(sampled > 0.5 * f.lipschitz_bound(&unit()));
    }

    #[test]
    fn domain_validation() {
        assert!(Domain::interval(0.5, 1.0).is_err());
        assert!(Domain::interval(1.0, -1.0).is_err());
        assert!(Domain::new(vec![-1.0], vec![]).is_err());
        let d = Domain::new(vec![-1.0, -2.0], vec![1.0, 0.5]).unwrap();
        assert_eq!(d.diameter_inf(), 2.5);
    }
}
