//! Tabular Q-learning baseline with a decaying ε-greedy policy.

use std::fmt::Write as _;

use rand::Rng;

use crate::agent::{Agent, Outcome, Transition};
use crate::cartpole::{Action, DiscreteState, NUM_STATES};
use crate::error::{Error, Result};

/// Failures at or after this step are not penalised.
pub const PENALTY_HORIZON: usize = 145;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    pub r_penalty: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon0: f64,
    /// Reward for a failing action at or beyond [`PENALTY_HORIZON`].
    pub late_failure_reward: f64,
}

impl Default for QParams {
    fn default() -> Self {
        Self::TUNED
    }
}

impl QParams {
    pub const TUNED: Self = Self {
        r_penalty: 773.8,
        gamma: 0.8494,
        alpha: 0.2265,
        epsilon0: 0.4653,
        late_failure_reward: 0.0,
    };

    pub const fn new(r_penalty: f64, gamma: f64, alpha: f64, epsilon0: f64) -> Self {
        Self {
            r_penalty,
            gamma,
            alpha,
            epsilon0,
            late_failure_reward: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_penalty.is_finite() && self.r_penalty > 0.0) {
            return Err(Error::config("r_penalty", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("q_gamma", "must lie in (0, 1)"));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::config("alpha", "must lie in [0, 1)"));
        }
        if !(0.0..1.0).contains(&self.epsilon0) {
            return Err(Error::config("epsilon0", "must lie in [0, 1)"));
        }
        if !self.late_failure_reward.is_finite() {
            return Err(Error::config("late_failure_reward", "must be finite"));
        }
        Ok(())
    }

    /// The tuner's acceptance box. The penalty range is (0, 1000).
    pub fn in_tuning_box(&self) -> bool {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        self.r_penalty > 0.0
            && self.r_penalty < 1000.0
            && unit(self.gamma)
            && unit(self.alpha)
            && unit(self.epsilon0)
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.r_penalty, self.gamma, self.alpha, self.epsilon0]
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        match *v {
            [r, g, a, e] => Some(Self::new(r, g, a, e)),
            _ => None,
        }
    }
}

/// `N × 2` action values, zero-initialised.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable {
    q: Vec<[f64; 2]>,
}

impl Default for QTable {
    fn default() -> Self {
        Self {
            q: vec![[0.0; 2]; NUM_STATES],
        }
    }
}

impl QTable {
    pub fn get(&self, state: DiscreteState, action: Action) -> f64 {
        self.q[state.index()][action.index()]
    }

    pub fn set(&mut self, state: DiscreteState, action: Action, value: f64) {
        self.q[state.index()][action.index()] = value;
    }

    pub fn max(&self, state: DiscreteState) -> f64 {
        let [a, b] = self.q[state.index()];
        a.max(b)
    }

    pub fn rows(&self) -> &[[f64; 2]] {
        &self.q
    }

    /// CSV dump: `state_index,q_action1,q_action2`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state_index,q_action1,q_action2\n");
        for (i, [a, b]) in self.q.iter().enumerate() {
            let _ = writeln!(out, "{i},{a},{b}");
        }
        out
    }
}

/// `ε_t = ε0 / (t + 1)` with `t` the 0-based episode number.
pub fn epsilon_schedule(epsilon0: f64, episode: usize) -> f64 {
    epsilon0 / (episode as f64 + 1.0)
}

/// ε-greedy choice; ties in the greedy branch are broken uniformly.
pub fn select_action<R: Rng + ?Sized>(
    table: &QTable,
    state: DiscreteState,
    epsilon: f64,
    rng: &mut R,
) -> Action {
    let random = |rng: &mut R| {
        if rng.random_bool(0.5) {
            Action::Right
        } else {
            Action::Left
        }
    };
    if rng.random::<f64>() < epsilon {
        return random(rng);
    }
    let right = table.get(state, Action::Right);
    let left = table.get(state, Action::Left);
    if right > left {
        Action::Right
    } else if left > right {
        Action::Left
    } else {
        random(rng)
    }
}

/// `Q(s,a) ← Q(s,a) + α [r + γ max_a' Q(s',a') - Q(s,a)]`, with the
/// bootstrap term dropped on terminal transitions.
pub fn q_update(
    table: &mut QTable,
    state: DiscreteState,
    action: Action,
    reward: f64,
    next_state: DiscreteState,
    terminal: bool,
    params: &QParams,
) {
    let bootstrap = if terminal { 0.0 } else { table.max(next_state) };
    let q = table.get(state, action);
    let updated = q + params.alpha * (reward + params.gamma * bootstrap - q);
    table.set(state, action, updated);
}

/// +1 for a surviving action, `-r_penalty` for a failure before
/// [`PENALTY_HORIZON`], otherwise `late_failure_reward`.
pub fn reward_of(failed: bool, step: usize, params: &QParams) -> f64 {
    if !failed {
        1.0
    } else if step < PENALTY_HORIZON {
        -params.r_penalty
    } else {
        params.late_failure_reward
    }
}

#[derive(Debug, Clone)]
pub struct QAgent<R> {
    table: QTable,
    params: QParams,
    epsilon: f64,
    rng: R,
}

impl<R: Rng> QAgent<R> {
    pub fn new(params: QParams, rng: R) -> Self {
        Self {
            table: QTable::default(),
            epsilon: params.epsilon0,
            params,
            rng,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

impl<R: Rng> Agent for QAgent<R> {
    fn begin_episode(&mut self, episode: usize) {
        self.epsilon = epsilon_schedule(self.params.epsilon0, episode);
    }

    fn act(&mut self, state: DiscreteState, _step: usize) -> Action {
        select_action(&self.table, state, self.epsilon, &mut self.rng)
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        let failed = t.outcome == Outcome::Failed;
        let reward = reward_of(failed, t.step, &self.params);
        q_update(
            &mut self.table,
            t.state,
            t.action,
            reward,
            t.next_state,
            failed,
            &self.params,
        );
        Ok(())
    }
}
