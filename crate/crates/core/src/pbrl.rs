//! Parallel bandit learner: one two-armed threshold decision per state.
//!
//! Each state `j` owns a threshold `TH_j`. The agent reads one sample from
//! its source and takes action 1 when the sample exceeds the threshold,
//! action 2 otherwise. A successful action moves only the current threshold
//! by `ΔTH` towards repeating that action; a failure pushes every threshold
//! visited in the episode away from the action taken there, weighted by
//! `A0 * γ^(t - t')`. All exploration comes from the sample stream.

use std::fmt::Write as _;

use crate::agent::{Agent, Outcome, Transition};
use crate::cartpole::{Action, DiscreteState, NUM_STATES};
use crate::error::{Error, Result};
use crate::sequence::{SampleSource, UNIFORM_SD};

/// Learning constants of the threshold agent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PbrlParams {
    /// Threshold shift after a success.
    pub delta_th: f64,
    /// Penalty amplitude after a failure.
    pub a0: f64,
    /// Time discount of the penalty.
    pub gamma: f64,
}

impl PbrlParams {
    /// Tuned values for chaos traces and their surrogates.
    pub const CHAOS: Self = Self::new(1.767, 301.3, 0.6774);
    pub const NORMAL: Self = Self::new(2.151, 366.8, 0.6774);
    pub const UNIFORM: Self = Self::new(4.881, 832.5, 0.6774);
    /// Output of the simplex stage, the base for the scale search.
    pub const SIMPLEX_BEST: Self = Self::new(3.208, 547.0, 0.6774);

    pub const fn new(delta_th: f64, a0: f64, gamma: f64) -> Self {
        Self {
            delta_th,
            a0,
            gamma,
        }
    }

    /// `ΔTH` and `A0` multiplied by `factor`, γ unchanged.
    pub fn scaled(self, factor: f64) -> Self {
        Self::new(factor * self.delta_th, factor * self.a0, self.gamma)
    }

    /// Source standard deviation these constants are matched to. The step
    /// and the penalty grow with the spread of the samples, so a row maps to
    /// the spread implied by its ratio to the uniform row.
    pub fn reference_spread(&self) -> f64 {
        UNIFORM_SD * self.delta_th / Self::UNIFORM.delta_th
    }

    /// The same constants rescaled for a source of standard deviation `sd`.
    pub fn for_spread(self, sd: f64) -> Self {
        self.scaled(sd / self.reference_spread())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta_th.is_finite() && self.delta_th >= 0.0) {
            return Err(Error::config("delta_th", "must be a non-negative number"));
        }
        if !(self.a0.is_finite() && self.a0 >= 0.0) {
            return Err(Error::config("a0", "must be a non-negative number"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(Error::config("pbrl_gamma", "must lie in (0, 1)"));
        }
        Ok(())
    }

    /// The box outside of which the tuner rejects parameters unseen.
    pub fn in_tuning_box(&self) -> bool {
        self.delta_th > 0.0
            && self.delta_th < 10.0
            && self.a0 > 10.0
            && self.a0 < 1000.0
            && self.gamma > 0.0
            && self.gamma < 1.0
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.delta_th, self.a0, self.gamma]
    }

    pub fn from_slice(v: &[f64]) -> Option<Self> {
        match *v {
            [delta_th, a0, gamma] => Some(Self::new(delta_th, a0, gamma)),
            _ => None,
        }
    }
}

/// One threshold per discrete state, initialised to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    th: Vec<f64>,
}

impl Default for ThresholdTable {
    fn default() -> Self {
        Self {
            th: vec![0.0; NUM_STATES],
        }
    }
}

impl ThresholdTable {
    pub fn get(&self, state: DiscreteState) -> f64 {
        self.th[state.index()]
    }

    pub fn set(&mut self, state: DiscreteState, value: f64) {
        self.th[state.index()] = value;
    }

    pub fn values(&self) -> &[f64] {
        &self.th
    }

    /// CSV dump: `state_index,threshold`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("state_index,threshold\n");
        for (i, v) in self.th.iter().enumerate() {
            let _ = writeln!(out, "{i},{v}");
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub state: DiscreteState,
    pub action: Action,
    pub step: usize,
}

/// Decisions taken since the start of the current episode.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EpisodeTrace {
    entries: Vec<TraceEntry>,
}

impl EpisodeTrace {
    pub fn push(&mut self, state: DiscreteState, action: Action, step: usize) {
        debug_assert!(
            self.entries.last().is_none_or(|e| e.step < step),
            "trace steps must increase"
        );
        self.entries.push(TraceEntry {
            state,
            action,
            step,
        });
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn entries(&self) -> &[TraceEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Action 1 iff the sample strictly exceeds the threshold.
pub fn decide(threshold: f64, sample: i16) -> Action {
    if f64::from(sample) > threshold {
        Action::Right
    } else {
        Action::Left
    }
}

/// `TH ← TH + (-1)^a ΔTH` for the state just acted in.
pub fn reward_update(
    table: &mut ThresholdTable,
    state: DiscreteState,
    action: Action,
    params: &PbrlParams,
) {
    let th = &mut table.th[state.index()];
    *th += action.sign() * params.delta_th;
}

/// `TH_{j(t')} ← TH_{j(t')} - (-1)^{a(t')} A0 γ^{t - t'}` for every trace entry.
pub fn penalize_trace(
    table: &mut ThresholdTable,
    trace: &EpisodeTrace,
    fail_step: usize,
    params: &PbrlParams,
) {
    for entry in trace.entries() {
        debug_assert!(entry.step >= 1 && entry.step <= fail_step);
        let age = fail_step.saturating_sub(entry.step);
        let weight = params.gamma.powi(age as i32);
        table.th[entry.state.index()] -= entry.action.sign() * params.a0 * weight;
    }
}

/// Threshold agent that draws its randomness from `S`.
#[derive(Debug, Clone)]
pub struct PbrlAgent<S> {
    table: ThresholdTable,
    trace: EpisodeTrace,
    source: S,
    params: PbrlParams,
}

impl<S: SampleSource> PbrlAgent<S> {
    pub fn new(params: PbrlParams, source: S) -> Self {
        Self {
            table: ThresholdTable::default(),
            trace: EpisodeTrace::default(),
            source,
            params,
        }
    }

    pub fn table(&self) -> &ThresholdTable {
        &self.table
    }

    pub fn trace(&self) -> &EpisodeTrace {
        &self.trace
    }

    pub fn params(&self) -> &PbrlParams {
        &self.params
    }

    /// Decides in `state` at `step`, asks `env` for the outcome of that
    /// action, then learns from it.
    pub fn act_and_learn<F>(&mut self, state: DiscreteState, step: usize, env: F) -> Result<Action>
    where
        F: FnOnce(Action) -> Result<(DiscreteState, Outcome)>,
    {
        let action = self.act(state, step);
        let (next_state, outcome) = env(action)?;
        self.observe(&Transition {
            state,
            action,
            next_state,
            step,
            outcome,
        })?;
        Ok(action)
    }
}

impl<S: SampleSource> Agent for PbrlAgent<S> {
    fn begin_episode(&mut self, _episode: usize) {
        self.trace.clear();
    }

    fn act(&mut self, state: DiscreteState, step: usize) -> Action {
        let sample = self.source.next_sample();
        let action = decide(self.table.get(state), sample);
        self.trace.push(state, action, step);
        action
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        match t.outcome {
            Outcome::Continue => reward_update(&mut self.table, t.state, t.action, &self.params),
            Outcome::Truncated => {
                reward_update(&mut self.table, t.state, t.action, &self.params);
                self.trace.clear();
            }
            Outcome::Failed => {
                penalize_trace(&mut self.table, &self.trace, t.step, &self.params);
                self.trace.clear();
            }
        }
        Ok(())
    }
}
