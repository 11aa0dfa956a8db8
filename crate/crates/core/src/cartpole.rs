//! One-dimensional cart-pole dynamics and the 6^4 state discretization.

use rand::Rng;

use crate::error::{Error, Result};

/// Divisions per state variable.
pub const BINS: usize = 6;
/// Total number of discrete states, `BINS^4`.
pub const NUM_STATES: usize = BINS * BINS * BINS * BINS;

/// The two pushes available to the agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    /// Action 1: push the cart to the right.
    Right,
    /// Action 2: push the cart to the left.
    Left,
}

impl Action {
    /// 1 for [`Action::Right`], 2 for [`Action::Left`].
    pub fn number(self) -> u8 {
        match self {
            Action::Right => 1,
            Action::Left => 2,
        }
    }

    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            1 => Some(Action::Right),
            2 => Some(Action::Left),
            _ => None,
        }
    }

    /// `(-1)^a` for action number `a`.
    pub fn sign(self) -> f64 {
        match self {
            Action::Right => -1.0,
            Action::Left => 1.0,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Action::Right => Action::Left,
            Action::Left => Action::Right,
        }
    }

    pub(crate) fn index(self) -> usize {
        usize::from(self.number() - 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContinuousState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl ContinuousState {
    pub fn new(x: f64, x_dot: f64, theta: f64, theta_dot: f64) -> Self {
        Self {
            x,
            x_dot,
            theta,
            theta_dot,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

impl std::ops::Neg for ContinuousState {
    type Output = Self;

    fn neg(self) -> Self {
        Self::new(-self.x, -self.x_dot, -self.theta, -self.theta_dot)
    }
}

/// Index of a discretized state, always below [`NUM_STATES`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DiscreteState(u16);

impl DiscreteState {
    pub fn new(index: usize) -> Option<Self> {
        (index < NUM_STATES).then_some(Self(index as u16))
    }

    pub fn from_bins(bins: [usize; 4]) -> Option<Self> {
        if bins.iter().any(|&b| b >= BINS) {
            return None;
        }
        let index = bins.iter().fold(0, |acc, &b| acc * BINS + b);
        Self::new(index)
    }

    pub fn bins(self) -> [usize; 4] {
        let mut rest = usize::from(self.0);
        let mut bins = [0; 4];
        for slot in bins.iter_mut().rev() {
            *slot = rest % BINS;
            rest /= BINS;
        }
        bins
    }

    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

/// Closed interval `[lo, hi]` split into [`BINS`] equal-width bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub const fn symmetric(half: f64) -> Self {
        Self {
            lo: -half,
            hi: half,
        }
    }

    /// Half-open bins `[lo + k w, lo + (k+1) w)`, top bin closed; values
    /// outside the range clamp to the edge bins.
    pub fn bin(&self, v: f64) -> usize {
        let v = v.clamp(self.lo, self.hi);
        let scaled = (v - self.lo) / (self.hi - self.lo) * BINS as f64;
        (scaled.floor() as usize).min(BINS - 1)
    }
}

/// Physical constants, failure bounds and discretization ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub gravity: f64,
    pub cart_mass: f64,
    pub pole_mass: f64,
    /// Half the pole length.
    pub half_length: f64,
    pub force_mag: f64,
    /// Euler integration step in seconds.
    pub tau: f64,
    pub x_limit: f64,
    pub theta_limit: f64,
    pub x_range: Range,
    pub x_dot_range: Range,
    pub theta_range: Range,
    pub theta_dot_range: Range,
}

pub const THETA_LIMIT_RAD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            gravity: 9.8,
            cart_mass: 1.0,
            pole_mass: 0.1,
            half_length: 0.5,
            force_mag: 10.0,
            tau: 0.02,
            x_limit: 2.4,
            theta_limit: THETA_LIMIT_RAD,
            x_range: Range::symmetric(2.4),
            x_dot_range: Range::symmetric(3.0),
            theta_range: Range::symmetric(THETA_LIMIT_RAD),
            theta_dot_range: Range::symmetric(2.0),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("env.cart_mass", self.cart_mass),
            ("env.pole_mass", self.pole_mass),
            ("env.half_length", self.half_length),
            ("env.tau", self.tau),
            ("env.x_limit", self.x_limit),
            ("env.theta_limit", self.theta_limit),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(key, format!("must be positive, got {v}")));
            }
        }
        if !(self.force_mag.is_finite() && self.force_mag >= 0.0) {
            return Err(Error::config("env.force_mag", "must be non-negative"));
        }
        if !self.gravity.is_finite() {
            return Err(Error::config("env.gravity", "must be finite"));
        }
        let ranges = [
            ("env.x_range", self.x_range),
            ("env.x_dot_range", self.x_dot_range),
            ("env.theta_range", self.theta_range),
            ("env.theta_dot_range", self.theta_dot_range),
        ];
        for (key, r) in ranges {
            if !(r.lo.is_finite() && r.hi.is_finite() && r.lo < r.hi) {
                return Err(Error::config(key, "needs finite lo < hi"));
            }
        }
        Ok(())
    }
}

/// Everything the episode loop needs from an environment.
pub trait Environment {
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> ContinuousState;
    fn step(&self, state: &ContinuousState, action: Action) -> Result<(ContinuousState, bool)>;
    fn discretize(&self, state: &ContinuousState) -> DiscreteState;
}

#[derive(Debug, Clone, Default)]
pub struct CartPole {
    pub config: EnvConfig,
}

impl CartPole {
    pub fn new(config: EnvConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }
}

impl Environment for CartPole {
    /// Each variable uniform in `[-0.05, 0.05]`.
    fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> ContinuousState {
        let mut draw = || rng.random_range(-0.05..=0.05);
        ContinuousState::new(draw(), draw(), draw(), draw())
    }

    fn step(&self, state: &ContinuousState, action: Action) -> Result<(ContinuousState, bool)> {
        if !state.is_finite() {
            return Err(Error::NonFiniteState(state.to_array()));
        }
        let c = &self.config;
        let force = match action {
            Action::Right => c.force_mag,
            Action::Left => -c.force_mag,
        };
        let total_mass = c.cart_mass + c.pole_mass;
        let pole_moment = c.pole_mass * c.half_length;
        let (sin, cos) = state.theta.sin_cos();

        let temp = (force + pole_moment * state.theta_dot * state.theta_dot * sin) / total_mass;
        let theta_acc = (c.gravity * sin - cos * temp)
            / (c.half_length * (4.0 / 3.0 - c.pole_mass * cos * cos / total_mass));
        let x_acc = temp - pole_moment * theta_acc * cos / total_mass;

        let next = ContinuousState::new(
            state.x + c.tau * state.x_dot,
            state.x_dot + c.tau * x_acc,
            state.theta + c.tau * state.theta_dot,
            state.theta_dot + c.tau * theta_acc,
        );
        let failed = next.x.abs() > c.x_limit || next.theta.abs() > c.theta_limit;
        Ok((next, failed))
    }

    fn discretize(&self, state: &ContinuousState) -> DiscreteState {
        discretize(state, &self.config)
    }
}

pub fn discretize(state: &ContinuousState, config: &EnvConfig) -> DiscreteState {
    let bins = [
        config.x_range.bin(state.x),
        config.x_dot_range.bin(state.x_dot),
        config.theta_range.bin(state.theta),
        config.theta_dot_range.bin(state.theta_dot),
    ];
    DiscreteState::from_bins(bins).expect("bins are clamped below BINS")
}
