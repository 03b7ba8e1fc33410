//! Flat `section.key = value` experiment configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::algorithms::ScheduleTheorem;
use crate::losses::{DriftSpec, LossClass, LossFamily, DEFAULT_GRID_POINTS, DEFAULT_HUBER_KNEE};
use crate::topology::{TopologyKind, WeightScheme};

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("unknown key '{0}'")]
    UnknownKey(String),
    #[error("duplicate key '{0}'")]
    DuplicateKey(String),
    #[error("invalid value for '{key}': {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("incompatible configuration: {0}")]
    Incompatible(String),
    #[error("reading {path}: {reason}")]
    Io { path: PathBuf, reason: String },
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Ocgd,
    Congd,
    Dinoco,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Ocgd => "ocgd",
            Algorithm::Congd => "congd",
            Algorithm::Dinoco => "dinoco",
        }
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "ocgd" => Ok(Algorithm::Ocgd),
            "congd" => Ok(Algorithm::Congd),
            "dinoco" => Ok(Algorithm::Dinoco),
            other => Err(format!("unknown algorithm '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Standard,
    /// Sampled finite-sum training with running-average evaluation.
    Dsgd,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TopologyChoice {
    Kind(TopologyKind),
    File(PathBuf),
}

impl TopologyChoice {
    pub fn parse(s: &str) -> Result<TopologyChoice, String> {
        let s = s.trim();
        if let Some(path) = s.strip_prefix("file:") {
            if path.is_empty() {
                return Err("empty edge-list path".into());
            }
            return Ok(TopologyChoice::File(PathBuf::from(path)));
        }
        TopologyKind::from_str(s)
            .map(TopologyChoice::Kind)
            .map_err(|e| e.to_string())
    }

    pub fn render(&self) -> String {
        match self {
            TopologyChoice::Kind(k) => k.name().to_string(),
            TopologyChoice::File(p) => format!("file:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyName {
    Quadratic,
    AbsoluteDrift,
    PseudoSigmoid,
    SineQuadratic,
}

impl FamilyName {
    pub fn name(&self) -> &'static str {
        match self {
            FamilyName::Quadratic => "quadratic",
            FamilyName::AbsoluteDrift => "absolute-drift",
            FamilyName::PseudoSigmoid => "pseudo-sigmoid",
            FamilyName::SineQuadratic => "nonconvex-sine-quadratic",
        }
    }
}

impl FromStr for FamilyName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "quadratic" => Ok(FamilyName::Quadratic),
            "absolute-drift" => Ok(FamilyName::AbsoluteDrift),
            "pseudo-sigmoid" => Ok(FamilyName::PseudoSigmoid),
            "nonconvex-sine-quadratic" | "sine-quadratic" => Ok(FamilyName::SineQuadratic),
            other => Err(format!("unknown loss family '{other}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriftKind {
    None,
    Linear,
    Sinusoidal,
}

/// Step sizes: a theorem formula or an explicit shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleChoice {
    Theorem(ScheduleTheorem),
    Constant(f64),
    InverseK(f64),
    InverseSqrtK(f64),
}

/// Perturbation rate for DINOCO.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaChoice {
    Fixed(f64),
    /// `1/√K`
    Theorem,
    /// `1/√(NK)`
    TheoremN,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub preset: Preset,
    pub horizon: usize,
    pub k_sweep: Vec<usize>,
    pub seeds: Vec<u64>,
    pub out_dir: Option<PathBuf>,
    pub dynamic_regret: bool,

    pub topology: TopologyChoice,
    pub n_agents: usize,
    pub weights: WeightScheme,

    pub family: FamilyName,
    pub mu: f64,
    pub knee: f64,
    pub steepness: f64,
    pub amplitude: f64,
    pub frequency: f64,
    pub dimension: usize,
    pub drift: DriftKind,
    pub drift_rate: f64,
    pub drift_amplitude: f64,
    pub drift_period: f64,
    /// When set, the sinusoidal period is chosen so that `P_K ≈ K^exponent`.
    pub drift_exponent: Option<f64>,
    pub heterogeneity: f64,
    pub base_center: f64,
    /// Fixed loss-sequence seed; `None` reuses each run seed.
    pub loss_seed: Option<u64>,

    pub domain_lower: f64,
    pub domain_upper: f64,

    pub schedule: ScheduleChoice,

    /// `None` sizes the grid from the horizon.
    pub oracle_grid_points: Option<usize>,
    pub eta: EtaChoice,
    pub rho_scale: f64,
    pub audit_calls: usize,

    pub comparator_grid_points: usize,

    pub dsgd_samples_per_agent: usize,
    pub dsgd_spread: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            algorithm: Algorithm::Ocgd,
            preset: Preset::Standard,
            horizon: 1000,
            k_sweep: vec![],
            seeds: vec![1],
            out_dir: None,
            dynamic_regret: true,
            topology: TopologyChoice::Kind(TopologyKind::Ring),
            n_agents: 4,
            weights: WeightScheme::Metropolis,
            family: FamilyName::Quadratic,
            mu: 1.0,
            knee: DEFAULT_HUBER_KNEE,
            steepness: 2.0,
            amplitude: 1.0,
            frequency: 3.0,
            dimension: 1,
            drift: DriftKind::None,
            drift_rate: 0.0,
            drift_amplitude: 0.0,
            drift_period: 100.0,
            drift_exponent: None,
            heterogeneity: 0.0,
            base_center: 0.0,
            loss_seed: None,
            domain_lower: -1.0,
            domain_upper: 1.0,
            schedule: ScheduleChoice::Theorem(ScheduleTheorem::OcgdConvexStatic),
            oracle_grid_points: None,
            eta: EtaChoice::Theorem,
            rho_scale: 1.0,
            audit_calls: 100,
            comparator_grid_points: DEFAULT_GRID_POINTS,
            dsgd_samples_per_agent: 10,
            dsgd_spread: 0.5,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.parse::<T>().map_err(|e| invalid(key, e.to_string()))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, ConfigError> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(invalid(key, "expected true or false")),
    }
}

fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    if v.is_empty() {
        return Ok(vec![]);
    }
    v.split(',').map(|s| parse_num(key, s.trim())).collect()
}

/// `1,2,3` or the inclusive range `1..=20`.
fn parse_seeds(key: &str, v: &str) -> Result<Vec<u64>, ConfigError> {
    if let Some((a, b)) = v.split_once("..=") {
        let a: u64 = parse_num(key, a.trim())?;
        let b: u64 = parse_num(key, b.trim())?;
        if b < a {
            return Err(invalid(key, "empty seed range"));
        }
        return Ok((a..=b).collect());
    }
    parse_list(key, v)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::default();
        let mut seen = std::collections::HashSet::new();
        // base values the schedule/eta keys refer to may come in any order
        let mut schedule_name: Option<String> = None;
        let mut schedule_base: Option<f64> = None;
        let mut eta_scheme: Option<String> = None;
        let mut eta_value: Option<f64> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: idx + 1,
                reason: "expected 'section.key = value'".into(),
            })?;
            let key = key.trim();
            let v = value.trim();
            if !key.contains('.') {
                return Err(ConfigError::Syntax {
                    line: idx + 1,
                    reason: format!("key '{key}' lacks a section"),
                });
            }
            if !seen.insert(key.to_string()) {
                return Err(ConfigError::DuplicateKey(key.to_string()));
            }
            match key {
                "experiment.algorithm" => cfg.algorithm = v.parse().map_err(|e: String| invalid(key, e))?,
                "experiment.preset" => {
                    cfg.preset = match v {
                        "standard" => Preset::Standard,
                        "dsgd" => Preset::Dsgd,
                        _ => return Err(invalid(key, "expected standard or dsgd")),
                    }
                }
                "experiment.horizon" => cfg.horizon = parse_num(key, v)?,
                "experiment.k_sweep" => cfg.k_sweep = parse_list(key, v)?,
                "experiment.seeds" => cfg.seeds = parse_seeds(key, v)?,
                "experiment.out_dir" => {
                    cfg.out_dir = if v.is_empty() { None } else { Some(PathBuf::from(v)) }
                }
                "experiment.dynamic_regret" => cfg.dynamic_regret = parse_bool(key, v)?,
                "topology.kind" => cfg.topology = TopologyChoice::parse(v).map_err(|e| invalid(key, e))?,
                "topology.n_agents" => cfg.n_agents = parse_num(key, v)?,
                "topology.weights" => cfg.weights = v.parse().map_err(|e: String| invalid(key, e))?,
                "loss.family" => cfg.family = v.parse().map_err(|e: String| invalid(key, e))?,
                "loss.mu" => cfg.mu = parse_num(key, v)?,
                "loss.knee" => cfg.knee = parse_num(key, v)?,
                "loss.steepness" => cfg.steepness = parse_num(key, v)?,
                "loss.amplitude" => cfg.amplitude = parse_num(key, v)?,
                "loss.frequency" => cfg.frequency = parse_num(key, v)?,
                "loss.dimension" => cfg.dimension = parse_num(key, v)?,
                "loss.drift" => {
                    cfg.drift = match v {
                        "none" => DriftKind::None,
                        "linear" => DriftKind::Linear,
                        "sinusoidal" => DriftKind::Sinusoidal,
                        _ => return Err(invalid(key, "expected none, linear or sinusoidal")),
                    }
                }
                "loss.drift_rate" => cfg.drift_rate = parse_num(key, v)?,
                "loss.drift_amplitude" => cfg.drift_amplitude = parse_num(key, v)?,
                "loss.drift_period" => cfg.drift_period = parse_num(key, v)?,
                "loss.drift_exponent" => {
                    cfg.drift_exponent = if v == "none" { None } else { Some(parse_num(key, v)?) }
                }
                "loss.heterogeneity" => cfg.heterogeneity = parse_num(key, v)?,
                "loss.base_center" => cfg.base_center = parse_num(key, v)?,
                "loss.seed" => cfg.loss_seed = if v == "run" { None } else { Some(parse_num(key, v)?) },
                "domain.lower" => cfg.domain_lower = parse_num(key, v)?,
                "domain.upper" => cfg.domain_upper = parse_num(key, v)?,
                "schedule.name" => schedule_name = Some(v.to_string()),
                "schedule.base" => schedule_base = Some(parse_num(key, v)?),
                "oracle.grid_points" => {
                    cfg.oracle_grid_points = if v == "auto" { None } else { Some(parse_num(key, v)?) }
                }
                "oracle.eta_scheme" => eta_scheme = Some(v.to_string()),
                "oracle.eta" => eta_value = Some(parse_num(key, v)?),
                "oracle.rho_scale" => cfg.rho_scale = parse_num(key, v)?,
                "oracle.audit_calls" => cfg.audit_calls = parse_num(key, v)?,
                "grid.points" => cfg.comparator_grid_points = parse_num(key, v)?,
                "dsgd.samples_per_agent" => cfg.dsgd_samples_per_agent = parse_num(key, v)?,
                "dsgd.spread" => cfg.dsgd_spread = parse_num(key, v)?,
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        if let Some(name) = schedule_name {
            cfg.schedule = schedule_from_parts(&name, schedule_base)?;
        } else if schedule_base.is_some() {
            return Err(invalid("schedule.base", "given without schedule.name"));
        }
        cfg.eta = match (eta_scheme.as_deref(), eta_value) {
            (None | Some("fixed"), Some(v)) => EtaChoice::Fixed(v),
            (Some("fixed"), None) => return Err(invalid("oracle.eta", "required when eta_scheme = fixed")),
            (None, None) | (Some("theorem"), None) => EtaChoice::Theorem,
            (Some("theorem_n"), None) => EtaChoice::TheoremN,
            (Some(other), _) => {
                return Err(invalid(
                    "oracle.eta_scheme",
                    format!("'{other}' (expected fixed, theorem or theorem_n; oracle.eta only with fixed)"),
                ))
            }
        };
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ExperimentConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        ExperimentConfig::parse(&text)
    }

    /// Canonical text form; `parse(serialize(c))` reproduces `c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment.algorithm", self.algorithm.name().into());
        kv(
            "experiment.preset",
            match self.preset {
                Preset::Standard => "standard",
                Preset::Dsgd => "dsgd",
            }
            .into(),
        );
        kv("experiment.horizon", self.horizon.to_string());
        kv("experiment.k_sweep", join(&self.k_sweep));
        kv("experiment.seeds", join(&self.seeds));
        kv(
            "experiment.out_dir",
            self.out_dir.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        kv("experiment.dynamic_regret", self.dynamic_regret.to_string());
        kv("topology.kind", self.topology.render());
        kv("topology.n_agents", self.n_agents.to_string());
        kv("topology.weights", self.weights.name().into());
        kv("loss.family", self.family.name().into());
        kv("loss.mu", self.mu.to_string());
        kv("loss.knee", self.knee.to_string());
        kv("loss.steepness", self.steepness.to_string());
        kv("loss.amplitude", self.amplitude.to_string());
        kv("loss.frequency", self.frequency.to_string());
        kv("loss.dimension", self.dimension.to_string());
        kv(
            "loss.drift",
            match self.drift {
                DriftKind::None => "none",
                DriftKind::Linear => "linear",
                DriftKind::Sinusoidal => "sinusoidal",
            }
            .into(),
        );
        kv("loss.drift_rate", self.drift_rate.to_string());
        kv("loss.drift_amplitude", self.drift_amplitude.to_string());
        kv("loss.drift_period", self.drift_period.to_string());
        kv(
            "loss.drift_exponent",
            self.drift_exponent.map(|e| e.to_string()).unwrap_or_else(|| "none".into()),
        );
        kv("loss.heterogeneity", self.heterogeneity.to_string());
        kv("loss.base_center", self.base_center.to_string());
        kv(
            "loss.seed",
            self.loss_seed.map(|s| s.to_string()).unwrap_or_else(|| "run".into()),
        );
        kv("domain.lower", self.domain_lower.to_string());
        kv("domain.upper", self.domain_upper.to_string());
        let (name, base) = match self.schedule {
            ScheduleChoice::Theorem(t) => (t.name().to_string(), None),
            ScheduleChoice::Constant(b) => ("constant".into(), Some(b)),
            ScheduleChoice::InverseK(b) => ("inverse_k".into(), Some(b)),
            ScheduleChoice::InverseSqrtK(b) => ("inverse_sqrt_k".into(), Some(b)),
        };
        kv("schedule.name", name);
        if let Some(b) = base {
            kv("schedule.base", b.to_string());
        }
        kv(
            "oracle.grid_points",
            self.oracle_grid_points.map(|g| g.to_string()).unwrap_or_else(|| "auto".into()),
        );
        match self.eta {
            EtaChoice::Fixed(v) => {
                kv("oracle.eta_scheme", "fixed".into());
                kv("oracle.eta", v.to_string());
            }
            EtaChoice::Theorem => kv("oracle.eta_scheme", "theorem".into()),
            EtaChoice::TheoremN => kv("oracle.eta_scheme", "theorem_n".into()),
        }
        kv("oracle.rho_scale", self.rho_scale.to_string());
        kv("oracle.audit_calls", self.audit_calls.to_string());
        kv("grid.points", self.comparator_grid_points.to_string());
        kv("dsgd.samples_per_agent", self.dsgd_samples_per_agent.to_string());
        kv("dsgd.spread", self.dsgd_spread.to_string());
        s
    }

    pub fn loss_family(&self) -> LossFamily {
        match self.family {
            FamilyName::Quadratic => LossFamily::Quadratic { mu: self.mu },
            FamilyName::AbsoluteDrift => LossFamily::AbsoluteDrift { knee: self.knee },
            FamilyName::PseudoSigmoid => LossFamily::PseudoSigmoid {
                steepness: self.steepness,
            },
            FamilyName::SineQuadratic => LossFamily::SineQuadratic {
                amplitude: self.amplitude,
                frequency: self.frequency,
            },
        }
    }

    /// Drift for a run of `horizon` rounds.
    pub fn drift_spec(&self, horizon: usize) -> DriftSpec {
        match self.drift {
            DriftKind::None => DriftSpec::None,
            DriftKind::Linear => DriftSpec::Linear {
                rate: self.drift_rate,
            },
            DriftKind::Sinusoidal => match self.drift_exponent {
                Some(e) => DriftSpec::for_exponent(e, horizon, self.drift_amplitude),
                None => DriftSpec::Sinusoidal {
                    amplitude: self.drift_amplitude,
                    period: self.drift_period,
                },
            },
        }
    }

    /// Rejects inconsistent settings before any computation.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let incompatible = |m: String| Err(ConfigError::Incompatible(m));
        if self.horizon == 0 {
            return Err(invalid("experiment.horizon", "must be positive"));
        }
        if self.seeds.is_empty() {
            return Err(invalid("experiment.seeds", "at least one seed required"));
        }
        if self.n_agents == 0 {
            return Err(invalid("topology.n_agents", "must be positive"));
        }
        if !(self.domain_lower <= 0.0 && 0.0 <= self.domain_upper && self.domain_lower < self.domain_upper) {
            return Err(invalid("domain", "need lower < upper with the origin inside"));
        }
        if self.dimension == 0 || self.dimension > 2 {
            return Err(invalid("loss.dimension", "supported dimensions are 1 and 2"));
        }
        if self.comparator_grid_points < 2 {
            return Err(invalid("grid.points", "need at least 2 points"));
        }
        if self.k_sweep.contains(&0) {
            return Err(invalid("experiment.k_sweep", "horizons must be positive"));
        }
        self.loss_family()
            .validate()
            .map_err(|e| invalid("loss", e.to_string()))?;
        if self.drift == DriftKind::Sinusoidal && self.drift_exponent.is_none() && !(self.drift_period > 0.0) {
            return Err(invalid("loss.drift_period", "must be positive"));
        }
        let class = self.loss_family().class();
        match self.algorithm {
            Algorithm::Congd if class == LossClass::NonConvex => {
                return incompatible(format!(
                    "CONGD requires a convex or pseudo-convex family, got {}",
                    self.family.name()
                ));
            }
            Algorithm::Dinoco if self.dimension != 1 => {
                return incompatible("DINOCO requires dimension 1".into());
            }
            _ => {}
        }
        if let ScheduleChoice::Theorem(t) = self.schedule {
            let ok = match t {
                ScheduleTheorem::CongdDynamic => self.algorithm != Algorithm::Ocgd,
                _ => self.algorithm != Algorithm::Congd,
            };
            if !ok && self.algorithm != Algorithm::Dinoco {
                return incompatible(format!(
                    "schedule {} does not apply to {}",
                    t.name(),
                    self.algorithm.name()
                ));
            }
            if t == ScheduleTheorem::OcgdStronglyConvex && class != LossClass::StronglyConvex {
                return incompatible(
                    "ocgd_strongly_convex requires the quadratic family with mu > 0".into(),
                );
            }
        }
        match self.schedule {
            ScheduleChoice::Constant(b) | ScheduleChoice::InverseK(b) | ScheduleChoice::InverseSqrtK(b)
                if !(b > 0.0 && b.is_finite()) =>
            {
                return Err(invalid("schedule.base", "must be positive"));
            }
            _ => {}
        }
        if let EtaChoice::Fixed(e) = self.eta {
            if !(e > 0.0) {
                return Err(invalid("oracle.eta", "must be positive"));
            }
        }
        if self.algorithm == Algorithm::Dinoco && !(self.rho_scale > 0.0) {
            return Err(invalid("oracle.rho_scale", "must be positive"));
        }
        if self.preset == Preset::Dsgd {
            if self.algorithm != Algorithm::Ocgd || self.family != FamilyName::Quadratic {
                return incompatible("the dsgd preset runs OCGD on quadratic losses".into());
            }
            if self.dsgd_samples_per_agent == 0 {
                return Err(invalid("dsgd.samples_per_agent", "must be positive"));
            }
            if self.dimension != 1 {
                return incompatible("the dsgd preset is one-dimensional".into());
            }
        }
        Ok(())
    }
}

fn schedule_from_parts(name: &str, base: Option<f64>) -> Result<ScheduleChoice, ConfigError> {
    let need_base = || base.ok_or_else(|| invalid("schedule.base", format!("required for schedule '{name}'")));
    match name {
        "constant" => Ok(ScheduleChoice::Constant(need_base()?)),
        "inverse_k" => Ok(ScheduleChoice::InverseK(need_base()?)),
        "inverse_sqrt_k" => Ok(ScheduleChoice::InverseSqrtK(need_base()?)),
        other => {
            if base.is_some() {
                return Err(invalid("schedule.base", "theorem schedules derive their own base"));
            }
            other
                .parse::<ScheduleTheorem>()
                .map(ScheduleChoice::Theorem)
                .map_err(|e| invalid("schedule.name", e.to_string()))
        }
    }
}

/// Parses a `--schedule` flag value such as `ocgd_convex_static` or `constant:0.5`.
pub fn parse_schedule_flag(s: &str) -> Result<ScheduleChoice, ConfigError> {
    match s.split_once(':') {
        Some((name, base)) => schedule_from_parts(name, Some(parse_num("schedule.base", base)?)),
        None => schedule_from_parts(s, None),
    }
}
