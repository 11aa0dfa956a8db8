//! Threshold-table bandit learning ("parallel bandits") and a tabular
//! Q-learning baseline on discretized cart-pole, with pluggable random
//! sequence sources, learning-curve metrics and FOM-driven tuners.

pub mod agent;
pub mod cartpole;
pub mod config;
pub mod error;
pub mod harness;
pub mod pbrl;
pub mod qlearn;
pub mod report;
pub mod sequence;
pub mod stats;
pub mod tuner;

pub use agent::{Agent, Outcome, Transition};
pub use cartpole::{
    Action, CartPole, ContinuousState, DiscreteState, EnvConfig, Environment, NUM_STATES,
};
pub use config::{AgentKind, RunConfig, SourceSpec};
pub use error::{Error, Result};
pub use harness::{ExperimentCurves, RoundResult, Simulation};
pub use pbrl::{PbrlAgent, PbrlParams, ThresholdTable};
pub use qlearn::{QAgent, QParams, QTable};
pub use sequence::{SampleSeries, SampleSource, StridedCursor};
