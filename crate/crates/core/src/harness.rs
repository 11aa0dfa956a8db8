//! Episodes, learning rounds and experiments.
//!
//! A round is `episodes` consecutive episodes sharing one learner. Rounds are
//! independent: every random stream inside a round is derived from the round
//! seed `seed + round_index`, so rounds may run in any order or in parallel
//! and the averaged curves come out identical. Averages are taken over
//! integer sums, which keeps them independent of summation order.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agent::{Agent, Outcome, Transition};
use crate::cartpole::{CartPole, DiscreteState, Environment, NUM_STATES};
use crate::config::{AgentKind, RunConfig, SourceSpec};
use crate::error::{Error, Result};
use crate::pbrl::PbrlAgent;
use crate::qlearn::QAgent;
use crate::sequence::{self, PrngStream, SampleSeries, StridedCursor};

/// Episodes per variety-of-states window.
pub const WINDOW: usize = 10;

/// Multiplier for per-round cursor offsets into a shared series.
pub const OFFSET_PRIME: u64 = 1_000_003;

const WORDS: usize = NUM_STATES.div_ceil(64);

// Independent ChaCha streams within one round.
const ENV_STREAM: u64 = 0;
const AGENT_STREAM: u64 = 1;
const SAMPLE_STREAM: u64 = 2;

/// Fixed-size bitset over discrete states.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateSet {
    words: [u64; WORDS],
}

impl Default for StateSet {
    fn default() -> Self {
        Self { words: [0; WORDS] }
    }
}

impl StateSet {
    pub fn insert(&mut self, state: DiscreteState) {
        let i = state.index();
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn contains(&self, state: DiscreteState) -> bool {
        let i = state.index();
        self.words[i / 64] & (1 << (i % 64)) != 0
    }

    pub fn union_with(&mut self, other: &StateSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = DiscreteState> + '_ {
        (0..NUM_STATES)
            .filter_map(DiscreteState::new)
            .filter(|s| self.contains(*s))
    }
}

impl FromIterator<DiscreteState> for StateSet {
    fn from_iter<I: IntoIterator<Item = DiscreteState>>(iter: I) -> Self {
        let mut set = StateSet::default();
        for s in iter {
            set.insert(s);
        }
        set
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    /// Number of non-failing actions.
    pub steps_survived: usize,
    /// States in which the agent made a decision.
    pub visited: StateSet,
}

/// Runs one episode from a fresh initial state until failure or
/// `max_steps` successes.
pub fn run_episode<A, E, R>(
    agent: &mut A,
    env: &E,
    rng: &mut R,
    episode: usize,
    max_steps: usize,
) -> Result<EpisodeResult>
where
    A: Agent,
    E: Environment,
    R: Rng + ?Sized,
{
    agent.begin_episode(episode);
    let mut state = env.reset(rng);
    let mut current = env.discretize(&state);
    let mut visited = StateSet::default();
    let mut survived = 0;
    for step in 1..=max_steps {
        visited.insert(current);
        let action = agent.act(current, step);
        let (next, failed) = env.step(&state, action)?;
        let next_state = env.discretize(&next);
        let outcome = if failed {
            Outcome::Failed
        } else if step == max_steps {
            Outcome::Truncated
        } else {
            Outcome::Continue
        };
        agent.observe(&Transition {
            state: current,
            action,
            next_state,
            step,
            outcome,
        })?;
        if failed {
            break;
        }
        survived = step;
        state = next;
        current = next_state;
    }
    Ok(EpisodeResult {
        steps_survived: survived,
        visited,
    })
}

/// Per-episode success counts and per-window distinct states of one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundResult {
    pub success_steps: Vec<u16>,
    pub window_states: Vec<StateSet>,
}

impl RoundResult {
    /// Mean success over the 1-based inclusive episode range.
    pub fn mean_success(&self, first: usize, last: usize) -> f64 {
        let slice = &self.success_steps[first - 1..last];
        slice.iter().map(|&v| f64::from(v)).sum::<f64>() / slice.len() as f64
    }
}

/// Runs `episodes` episodes with a single learner.
pub fn run_agent_round<A, E, R>(
    agent: &mut A,
    env: &E,
    rng: &mut R,
    episodes: usize,
    max_steps: usize,
) -> Result<RoundResult>
where
    A: Agent,
    E: Environment,
    R: Rng + ?Sized,
{
    let mut success_steps = Vec::with_capacity(episodes);
    let mut window_states = Vec::with_capacity(episodes.div_ceil(WINDOW));
    let mut window = StateSet::default();
    for episode in 0..episodes {
        let result = run_episode(agent, env, rng, episode, max_steps)?;
        success_steps.push(result.steps_survived as u16);
        window.union_with(&result.visited);
        if (episode + 1) % WINDOW == 0 || episode + 1 == episodes {
            window_states.push(std::mem::take(&mut window));
        }
    }
    Ok(RoundResult {
        success_steps,
        window_states,
    })
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Builds the shared series behind a series-backed source.
pub fn build_series(spec: &SourceSpec, config: &RunConfig) -> Result<Option<Arc<SampleSeries>>> {
    fn build(spec: &SourceSpec, config: &RunConfig) -> Result<Option<SampleSeries>> {
        Ok(match spec {
            SourceSpec::Uniform | SourceSpec::Normal { .. } => None,
            SourceSpec::Synthetic { lag } => Some(sequence::gen_synthetic_chaos(
                config.chaos_length,
                *lag,
                config.source_seed,
            )?),
            SourceSpec::File(path) => Some(sequence::load_chaos_file(path, config.base_period_ps)?),
            SourceSpec::Surrogate(inner) => {
                let base = build(inner, config)?
                    .ok_or_else(|| Error::config("source", "surrogate needs a series source"))?;
                Some(sequence::shuffle_surrogate(
                    &base,
                    config.source_seed.wrapping_add(1),
                ))
            }
        })
    }
    Ok(build(spec, config)?.map(Arc::new))
}

/// A validated configuration together with its prepared sample series.
#[derive(Debug, Clone)]
pub struct Simulation {
    config: RunConfig,
    env: CartPole,
    series: Option<Arc<SampleSeries>>,
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let series = match config.agent {
            AgentKind::Pbrl => build_series(&config.source, &config)?,
            AgentKind::QLearning => None,
        };
        let env = CartPole::new(config.env.clone())?;
        Ok(Self {
            config,
            env,
            series,
        })
    }

    pub fn config(&self) -> &RunConfig {
        &self.config
    }

    /// A modified copy that reuses the prepared series when the source
    /// settings are unchanged.
    pub fn with_config(&self, edit: impl FnOnce(&mut RunConfig)) -> Result<Simulation> {
        let mut config = self.config.clone();
        edit(&mut config);
        let same_source = config.source == self.config.source
            && config.agent == self.config.agent
            && config.source_seed == self.config.source_seed
            && config.chaos_length == self.config.chaos_length
            && config.base_period_ps == self.config.base_period_ps;
        if !same_source {
            return Simulation::new(config);
        }
        config.validate()?;
        let env = CartPole::new(config.env.clone())?;
        Ok(Simulation {
            config,
            env,
            series: self.series.clone(),
        })
    }

    pub fn series(&self) -> Option<&Arc<SampleSeries>> {
        self.series.as_ref()
    }

    pub fn round_seed(&self, round_index: usize) -> u64 {
        self.config.seed.wrapping_add(round_index as u64)
    }

    pub fn run_round(&self, round_seed: u64) -> Result<RoundResult> {
        self.run_round_with(round_seed, |_| ())
    }

    /// Like [`Simulation::run_round`], also returning the learned table as CSV.
    pub fn run_round_with_table(&self, round_seed: u64) -> Result<(RoundResult, String)> {
        let mut table = String::new();
        let result = self.run_round_with(round_seed, |csv| table = csv)?;
        Ok((result, table))
    }

    fn run_round_with(&self, round_seed: u64, mut dump: impl FnMut(String)) -> Result<RoundResult> {
        let cfg = &self.config;
        let mut env_rng = stream_rng(round_seed, ENV_STREAM);
        match cfg.agent {
            AgentKind::QLearning => {
                let mut agent = QAgent::new(cfg.q, stream_rng(round_seed, AGENT_STREAM));
                let r = run_agent_round(
                    &mut agent,
                    &self.env,
                    &mut env_rng,
                    cfg.episodes,
                    cfg.max_steps,
                )?;
                dump(agent.table().to_csv());
                Ok(r)
            }
            AgentKind::Pbrl => match (&self.series, &cfg.source) {
                (Some(series), _) => {
                    let offset = round_seed.wrapping_mul(OFFSET_PRIME) % series.len() as u64;
                    let cursor = StridedCursor::new(series.clone(), cfg.stride, offset as usize)?;
                    let mut agent = PbrlAgent::new(cfg.pbrl, cursor);
                    let r = run_agent_round(
                        &mut agent,
                        &self.env,
                        &mut env_rng,
                        cfg.episodes,
                        cfg.max_steps,
                    )?;
                    dump(agent.table().to_csv());
                    Ok(r)
                }
                (None, source) => {
                    let rng = stream_rng(round_seed, SAMPLE_STREAM);
                    let stream = match source {
                        SourceSpec::Normal { sigma } => PrngStream::from_rng_normal(rng, *sigma)?,
                        _ => PrngStream::from_rng_uniform(rng),
                    };
                    let mut agent = PbrlAgent::new(cfg.pbrl, stream);
                    let r = run_agent_round(
                        &mut agent,
                        &self.env,
                        &mut env_rng,
                        cfg.episodes,
                        cfg.max_steps,
                    )?;
                    dump(agent.table().to_csv());
                    Ok(r)
                }
            },
        }
    }

    /// Runs every round. `jobs == 1` runs sequentially; `0` uses all cores.
    pub fn run_rounds(&self, jobs: usize) -> Result<Vec<RoundResult>> {
        let seeds: Vec<u64> = (0..self.config.rounds)
            .map(|r| self.round_seed(r))
            .collect();
        if jobs == 1 {
            return seeds.iter().map(|&s| self.run_round(s)).collect();
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
        pool.install(|| seeds.par_iter().map(|&s| self.run_round(s)).collect())
    }

    pub fn run_experiment(&self, jobs: usize) -> Result<ExperimentCurves> {
        let rounds = self.run_rounds(jobs)?;
        ExperimentCurves::from_rounds(&rounds, self.config.success_threshold)
    }
}

/// Round-averaged observables of one experimental condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentCurves {
    pub mean_success: Vec<f64>,
    pub mean_variety: Vec<f64>,
    pub fom: u32,
}

impl ExperimentCurves {
    pub fn from_rounds(rounds: &[RoundResult], threshold: f64) -> Result<Self> {
        let mean_success = mean_success(rounds)?;
        let mean_variety = variety_of_states(rounds)?;
        let fom = compute_fom(&mean_success, threshold, mean_success.len() as u32);
        Ok(Self {
            mean_success,
            mean_variety,
            fom,
        })
    }

    /// Mean of the averaged success curve over 1-based episodes `first..=last`.
    pub fn mean_success_between(&self, first: usize, last: usize) -> f64 {
        let s = &self.mean_success[first - 1..last];
        s.iter().sum::<f64>() / s.len() as f64
    }
}

pub fn mean_success(rounds: &[RoundResult]) -> Result<Vec<f64>> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no rounds to average".into()))?;
    let mut sums = vec![0u64; first.success_steps.len()];
    for r in rounds {
        if r.success_steps.len() != sums.len() {
            return Err(Error::InvalidArgument(
                "rounds differ in episode count".into(),
            ));
        }
        for (acc, &v) in sums.iter_mut().zip(&r.success_steps) {
            *acc += u64::from(v);
        }
    }
    let n = rounds.len() as f64;
    Ok(sums.into_iter().map(|s| s as f64 / n).collect())
}

/// Mean number of distinct states per window, averaged over rounds.
pub fn variety_of_states(rounds: &[RoundResult]) -> Result<Vec<f64>> {
    let first = rounds
        .first()
        .ok_or_else(|| Error::InvalidArgument("no rounds to average".into()))?;
    let mut sums = vec![0u64; first.window_states.len()];
    for r in rounds {
        if r.window_states.len() != sums.len() {
            return Err(Error::InvalidArgument(
                "rounds differ in window count".into(),
            ));
        }
        for (acc, w) in sums.iter_mut().zip(&r.window_states) {
            *acc += w.len() as u64;
        }
    }
    let n = rounds.len() as f64;
    Ok(sums.into_iter().map(|s| s as f64 / n).collect())
}

/// Last 1-based episode whose averaged success is below `threshold`, or 0
/// when every episode clears it. An uncleared final episode yields `cap`.
pub fn compute_fom(curve: &[f64], threshold: f64, cap: u32) -> u32 {
    match curve.iter().rposition(|&v| v < threshold) {
        None => 0,
        Some(i) if i + 1 == curve.len() => cap,
        Some(i) => i as u32 + 1,
    }
}
