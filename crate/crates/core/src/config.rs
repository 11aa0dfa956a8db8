//! Flat `key = value` run configuration.
//!
//! The same syntax is used for hand-written config files, CLI overrides and
//! the manifest written next to every artifact set, so a manifest can be fed
//! back to reproduce a run exactly.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cartpole::{EnvConfig, Range};
use crate::error::{Error, Result};
use crate::pbrl::PbrlParams;
use crate::qlearn::QParams;
use crate::sequence::{DEFAULT_SIGMA, SYNTHETIC_SIGMA};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentKind {
    Pbrl,
    QLearning,
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Pbrl => "pbrl",
            AgentKind::QLearning => "qlearning",
        })
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pbrl" => Ok(AgentKind::Pbrl),
            "qlearning" | "q" => Ok(AgentKind::QLearning),
            other => Err(Error::config("agent", format!("unknown agent `{other}`"))),
        }
    }
}

/// Where decision samples come from.
///
/// Text form: `uniform`, `normal[:SIGMA]`, `synthetic:LAG`, `file:PATH`,
/// `surrogate:<inner>`.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceSpec {
    Uniform,
    Normal { sigma: f64 },
    Synthetic { lag: usize },
    File(PathBuf),
    Surrogate(Box<SourceSpec>),
}

impl SourceSpec {
    /// Default agent constants for this kind of sequence. Synthetic chaos
    /// has a wider spread than the traces the chaos row was tuned on, so it
    /// gets that row rescaled to its own standard deviation.
    pub fn default_pbrl_params(&self) -> PbrlParams {
        match self {
            SourceSpec::Uniform => PbrlParams::UNIFORM,
            SourceSpec::Normal { .. } => PbrlParams::NORMAL,
            SourceSpec::Synthetic { .. } => PbrlParams::CHAOS.for_spread(SYNTHETIC_SIGMA),
            SourceSpec::File(_) => PbrlParams::CHAOS,
            SourceSpec::Surrogate(inner) => inner.default_pbrl_params(),
        }
    }

    /// Sources backed by a finite series read through a strided cursor.
    pub fn is_series(&self) -> bool {
        !matches!(self, SourceSpec::Uniform | SourceSpec::Normal { .. })
    }

    /// Lag of the generated series behind this source, if any.
    pub fn synthetic_lag(&self) -> Option<usize> {
        match self {
            SourceSpec::Synthetic { lag } => Some(*lag),
            SourceSpec::Surrogate(inner) => inner.synthetic_lag(),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SourceSpec::Uniform => "uniform",
            SourceSpec::Normal { .. } => "normal",
            SourceSpec::Synthetic { .. } => "synthetic",
            SourceSpec::File(_) => "file",
            SourceSpec::Surrogate(_) => "surrogate",
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::Uniform => f.write_str("uniform"),
            SourceSpec::Normal { sigma } => write!(f, "normal:{sigma}"),
            SourceSpec::Synthetic { lag } => write!(f, "synthetic:{lag}"),
            SourceSpec::File(p) => write!(f, "file:{}", p.display()),
            SourceSpec::Surrogate(inner) => write!(f, "surrogate:{inner}"),
        }
    }
}

impl FromStr for SourceSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::config("source", msg);
        let (head, rest) = match s.split_once(':') {
            Some((h, r)) => (h, Some(r)),
            None => (s, None),
        };
        match (head, rest) {
            ("uniform", None) => Ok(SourceSpec::Uniform),
            ("normal", None) => Ok(SourceSpec::Normal {
                sigma: DEFAULT_SIGMA,
            }),
            ("normal", Some(v)) => {
                let sigma: f64 = v.parse().map_err(|_| bad(format!("bad sigma `{v}`")))?;
                if !(sigma.is_finite() && sigma > 0.0) {
                    return Err(bad(format!("sigma must be positive, got {v}")));
                }
                Ok(SourceSpec::Normal { sigma })
            }
            ("synthetic", Some(v)) => {
                let lag: usize = v.parse().map_err(|_| bad(format!("bad lag `{v}`")))?;
                if lag == 0 {
                    return Err(bad("lag must be at least 1".into()));
                }
                Ok(SourceSpec::Synthetic { lag })
            }
            ("file", Some(p)) if !p.is_empty() => Ok(SourceSpec::File(PathBuf::from(p))),
            ("surrogate", Some(inner)) => {
                let inner: SourceSpec = inner.parse()?;
                if !inner.is_series() {
                    return Err(bad(
                        "surrogate needs a series source (synthetic or file)".into()
                    ));
                }
                Ok(SourceSpec::Surrogate(Box::new(inner)))
            }
            _ => Err(bad(format!("unrecognised source `{s}`"))),
        }
    }
}

/// Everything that determines the output of a simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub agent: AgentKind,
    pub source: SourceSpec,
    pub stride: usize,
    pub rounds: usize,
    pub episodes: usize,
    pub max_steps: usize,
    /// Success count the averaged curve must reach for the figure of merit.
    pub success_threshold: f64,
    pub seed: u64,
    /// Seed for generated series and surrogate shuffles.
    pub source_seed: u64,
    /// Length of generated series.
    pub chaos_length: usize,
    pub base_period_ps: f64,
    pub pbrl: PbrlParams,
    pub q: QParams,
    pub env: EnvConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        let source = SourceSpec::Normal {
            sigma: DEFAULT_SIGMA,
        };
        Self {
            agent: AgentKind::Pbrl,
            pbrl: source.default_pbrl_params(),
            source,
            stride: 1,
            rounds: 200,
            episodes: 1000,
            max_steps: 150,
            success_threshold: 145.0,
            seed: 1,
            source_seed: 7,
            chaos_length: 1 << 22,
            base_period_ps: 10.0,
            q: QParams::TUNED,
            env: EnvConfig::default(),
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("cannot parse `{value}`")))
}

fn parse_range(key: &str, value: &str) -> Result<Range> {
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| Error::config(key, "expected `lo,hi`"))?;
    Ok(Range::new(parse_num(key, lo)?, parse_num(key, hi)?))
}

/// Splits `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            Error::config(
                format!("line {}", i + 1),
                format!("expected `key = value`, got `{line}`"),
            )
        })?;
        pairs.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(pairs)
}

impl RunConfig {
    /// Builds a config from key/value pairs; later pairs win. Agent
    /// constants default to the tuned set for the chosen source unless
    /// given explicitly.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some((_, v)) = pairs.iter().rev().find(|(k, _)| k.as_ref() == "source") {
            cfg.source = v.as_ref().parse()?;
            cfg.pbrl = cfg.source.default_pbrl_params();
        }
        for (k, v) in pairs {
            cfg.set(k.as_ref(), v.as_ref())?;
        }
        Ok(cfg)
    }

    pub fn from_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_pairs(text)?)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "agent" => self.agent = v.parse()?,
            "source" => self.source = v.parse()?,
            "stride" => self.stride = parse_num(key, v)?,
            "rounds" => self.rounds = parse_num(key, v)?,
            "episodes" => self.episodes = parse_num(key, v)?,
            "max_steps" => self.max_steps = parse_num(key, v)?,
            "success_threshold" => self.success_threshold = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "source_seed" => self.source_seed = parse_num(key, v)?,
            "chaos_length" => self.chaos_length = parse_num(key, v)?,
            "base_period_ps" => self.base_period_ps = parse_num(key, v)?,
            "delta_th" => self.pbrl.delta_th = parse_num(key, v)?,
            "a0" => self.pbrl.a0 = parse_num(key, v)?,
            "pbrl_gamma" => self.pbrl.gamma = parse_num(key, v)?,
            "r_penalty" => self.q.r_penalty = parse_num(key, v)?,
            "q_gamma" => self.q.gamma = parse_num(key, v)?,
            "alpha" => self.q.alpha = parse_num(key, v)?,
            "epsilon0" => self.q.epsilon0 = parse_num(key, v)?,
            "late_failure_reward" => self.q.late_failure_reward = parse_num(key, v)?,
            "env.gravity" => self.env.gravity = parse_num(key, v)?,
            "env.cart_mass" => self.env.cart_mass = parse_num(key, v)?,
            "env.pole_mass" => self.env.pole_mass = parse_num(key, v)?,
            "env.half_length" => self.env.half_length = parse_num(key, v)?,
            "env.force_mag" => self.env.force_mag = parse_num(key, v)?,
            "env.tau" => self.env.tau = parse_num(key, v)?,
            "env.x_limit" => self.env.x_limit = parse_num(key, v)?,
            "env.theta_limit" => self.env.theta_limit = parse_num(key, v)?,
            "env.x_range" => self.env.x_range = parse_range(key, v)?,
            "env.x_dot_range" => self.env.x_dot_range = parse_range(key, v)?,
            "env.theta_range" => self.env.theta_range = parse_range(key, v)?,
            "env.theta_dot_range" => self.env.theta_dot_range = parse_range(key, v)?,
            other => return Err(Error::config(other, "unknown key")),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        if self.rounds == 0 {
            return Err(Error::config("rounds", "must be at least 1"));
        }
        if self.episodes == 0 || !self.episodes.is_multiple_of(crate::harness::WINDOW) {
            return Err(Error::config(
                "episodes",
                "must be a positive multiple of 10",
            ));
        }
        if self.max_steps == 0 {
            return Err(Error::config("max_steps", "must be at least 1"));
        }
        if !self.success_threshold.is_finite() {
            return Err(Error::config("success_threshold", "must be finite"));
        }
        if !(self.base_period_ps.is_finite() && self.base_period_ps > 0.0) {
            return Err(Error::config("base_period_ps", "must be positive"));
        }
        if let Some(lag) = self.source.synthetic_lag() {
            if self.chaos_length <= lag {
                return Err(Error::config(
                    "chaos_length",
                    "must exceed the synthetic lag",
                ));
            }
        }
        if let Some(path) = self.chaos_file() {
            if !path.is_file() {
                return Err(Error::config(
                    "source",
                    format!("chaos file not found: {}", path.display()),
                ));
            }
        }
        self.pbrl.validate()?;
        self.q.validate()?;
        self.env.validate()
    }

    fn chaos_file(&self) -> Option<&PathBuf> {
        let mut s = &self.source;
        loop {
            match s {
                SourceSpec::File(p) => return Some(p),
                SourceSpec::Surrogate(inner) => s = inner,
                _ => return None,
            }
        }
    }

    /// Every output-affecting setting, one `key = value` per line.
    pub fn to_manifest(&self) -> String {
        let r = |r: Range| format!("{},{}", r.lo, r.hi);
        let e = &self.env;
        let lines: Vec<(&str, String)> = vec![
            ("agent", self.agent.to_string()),
            ("source", self.source.to_string()),
            ("stride", self.stride.to_string()),
            ("rounds", self.rounds.to_string()),
            ("episodes", self.episodes.to_string()),
            ("max_steps", self.max_steps.to_string()),
            ("success_threshold", self.success_threshold.to_string()),
            ("seed", self.seed.to_string()),
            ("source_seed", self.source_seed.to_string()),
            ("chaos_length", self.chaos_length.to_string()),
            ("base_period_ps", self.base_period_ps.to_string()),
            ("delta_th", self.pbrl.delta_th.to_string()),
            ("a0", self.pbrl.a0.to_string()),
            ("pbrl_gamma", self.pbrl.gamma.to_string()),
            ("r_penalty", self.q.r_penalty.to_string()),
            ("q_gamma", self.q.gamma.to_string()),
            ("alpha", self.q.alpha.to_string()),
            ("epsilon0", self.q.epsilon0.to_string()),
            (
                "late_failure_reward",
                self.q.late_failure_reward.to_string(),
            ),
            ("env.gravity", e.gravity.to_string()),
            ("env.cart_mass", e.cart_mass.to_string()),
            ("env.pole_mass", e.pole_mass.to_string()),
            ("env.half_length", e.half_length.to_string()),
            ("env.force_mag", e.force_mag.to_string()),
            ("env.tau", e.tau.to_string()),
            ("env.x_limit", e.x_limit.to_string()),
            ("env.theta_limit", e.theta_limit.to_string()),
            ("env.x_range", r(e.x_range)),
            ("env.x_dot_range", r(e.x_dot_range)),
            ("env.theta_range", r(e.theta_range)),
            ("env.theta_dot_range", r(e.theta_dot_range)),
        ];
        lines
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
