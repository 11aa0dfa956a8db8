use crate::cartpole::{Action, DiscreteState};
use crate::error::Result;

/// How a single step ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    /// The action did not fail and the episode continues.
    Continue,
    /// The action drove the system out of bounds.
    Failed,
    /// The action succeeded and hit the per-episode success cap.
    Truncated,
}

impl Outcome {
    pub fn is_success(self) -> bool {
        !matches!(self, Outcome::Failed)
    }
}

/// One decision and its consequence. `step` is 1-based within the episode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub state: DiscreteState,
    pub action: Action,
    pub next_state: DiscreteState,
    pub step: usize,
    pub outcome: Outcome,
}

/// A learner that picks one of two actions per discrete state.
pub trait Agent {
    /// Called before the first step of every episode; `episode` is 0-based.
    fn begin_episode(&mut self, episode: usize);

    fn act(&mut self, state: DiscreteState, step: usize) -> Action;

    fn observe(&mut self, transition: &Transition) -> Result<()>;
}
