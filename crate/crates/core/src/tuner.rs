//! Derivative-free hyperparameter search driven by the figure of merit.
//!
//! Two searches are provided: a Nelder-Mead simplex over full parameter
//! vectors, and a four-point golden-section search over a single scale
//! exponent `c` applied to `(ΔTH, A0)`. Parameter vectors outside the
//! admissible box are scored [`GUARD_FOM`] without running a simulation.

use std::fmt::Write as _;

use crate::config::{AgentKind, RunConfig};
use crate::error::{Error, Result};
use crate::harness::Simulation;
use crate::pbrl::PbrlParams;
use crate::qlearn::QParams;

/// Score assigned to obviously wrong parameters.
pub const GUARD_FOM: u32 = 2000;

/// Reflection, expansion, contraction and shrink coefficients.
pub const NM_REFLECT: f64 = 1.0;
pub const NM_EXPAND: f64 = 2.0;
pub const NM_CONTRACT: f64 = 0.5;
pub const NM_SHRINK: f64 = 0.5;

/// Contraction factor of the golden-section plateau rule.
pub const PLATEAU_RATIO: f64 = 0.9;

pub const GOLDEN: f64 = 1.618_033_988_749_895;

/// Default evaluation budgets for desk-scale tuning.
pub const NM_ROUNDS: usize = 480;
pub const GS_ROUNDS: usize = 270;
pub const NM_ITERATIONS: usize = 20;
pub const GS_ITERATIONS: usize = 25;

type Guard<'a> = Box<dyn Fn(&[f64]) -> bool + 'a>;
type Evaluator<'a> = Box<dyn FnMut(&[f64]) -> Result<u32> + 'a>;

/// FOM evaluator with a guard that short-circuits out-of-box vectors.
pub struct Objective<'a> {
    guard: Guard<'a>,
    evaluate: Evaluator<'a>,
    simulations: usize,
}

impl<'a> Objective<'a> {
    pub fn new(
        guard: impl Fn(&[f64]) -> bool + 'a,
        evaluate: impl FnMut(&[f64]) -> Result<u32> + 'a,
    ) -> Self {
        Self {
            guard: Box::new(guard),
            evaluate: Box::new(evaluate),
            simulations: 0,
        }
    }

    pub fn fom(&mut self, params: &[f64]) -> Result<u32> {
        if !(self.guard)(params) {
            return Ok(GUARD_FOM);
        }
        self.simulations += 1;
        (self.evaluate)(params)
    }

    /// Number of calls that reached the evaluator.
    pub fn simulations(&self) -> usize {
        self.simulations
    }
}

pub fn pbrl_guard(v: &[f64]) -> bool {
    PbrlParams::from_slice(v).is_some_and(|p| p.in_tuning_box())
}

pub fn q_guard(v: &[f64]) -> bool {
    QParams::from_slice(v).is_some_and(|p| p.in_tuning_box())
}

/// One line of a tuning log. Initial evaluations carry iteration 0; each
/// later row holds the best vertex after that iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct LogRow {
    pub iteration: usize,
    pub params: Vec<f64>,
    pub value: f64,
}

pub fn log_to_csv(names: &[&str], rows: &[LogRow]) -> String {
    let mut out = format!("iteration,{},fom\n", names.join(","));
    for row in rows {
        let params: Vec<String> = row.params.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(out, "{},{},{}", row.iteration, params.join(","), row.value);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexState {
    pub vertices: Vec<Vec<f64>>,
    pub values: Vec<f64>,
    pub iteration: usize,
}

impl SimplexState {
    /// Index of the best vertex; the lower index wins ties.
    pub fn best(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.values.iter().enumerate() {
            if *v < self.values[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub best_value: f64,
    pub best_params: Vec<f64>,
    pub state: SimplexState,
    pub log: Vec<LogRow>,
}

fn check_simplex(vertices: &[Vec<f64>]) -> Result<usize> {
    let dim = vertices.first().map_or(0, Vec::len);
    if dim == 0 || vertices.len() != dim + 1 {
        return Err(Error::DegenerateSimplex(format!(
            "need dim + 1 vertices of equal dimension, got {} of dimension {dim}",
            vertices.len()
        )));
    }
    if vertices
        .iter()
        .any(|v| v.len() != dim || v.iter().any(|x| !x.is_finite()))
    {
        return Err(Error::DegenerateSimplex(
            "vertices must be finite and equally sized".into(),
        ));
    }
    for i in 0..vertices.len() {
        for j in i + 1..vertices.len() {
            if vertices[i] == vertices[j] {
                return Err(Error::DegenerateSimplex(format!(
                    "vertices {i} and {j} coincide"
                )));
            }
        }
    }
    // affine independence: edge vectors from vertex 0 must have full rank
    let mut m: Vec<Vec<f64>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let scale = m.iter().flatten().fold(0.0f64, |acc, x| acc.max(x.abs()));
    for col in 0..dim {
        let pivot = (col..dim)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .expect("non-empty range");
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(Error::DegenerateSimplex(
                "vertices are affinely dependent".into(),
            ));
        }
        m.swap(col, pivot);
        let (upper, lower) = m.split_at_mut(col + 1);
        let pivot_row = &upper[col];
        for row in lower {
            let f = row[col] / pivot_row[col];
            for (r, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *r -= f * p;
            }
        }
    }
    Ok(dim)
}

fn lerp(from: &[f64], to: &[f64], t: f64) -> Vec<f64> {
    from.iter().zip(to).map(|(a, b)| a + t * (b - a)).collect()
}

/// Nelder-Mead minimisation for exactly `iterations` simplex transformations.
pub fn nelder_mead<F>(
    mut f: F,
    initial: Vec<Vec<f64>>,
    iterations: usize,
) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let dim = check_simplex(&initial)?;
    let mut log = Vec::with_capacity(initial.len() + iterations);
    let mut values = Vec::with_capacity(initial.len());
    for v in &initial {
        let value = f(v)?;
        log.push(LogRow {
            iteration: 0,
            params: v.clone(),
            value,
        });
        values.push(value);
    }
    let mut state = SimplexState {
        vertices: initial,
        values,
        iteration: 0,
    };

    for iteration in 1..=iterations {
        // stable ordering keeps the lower original index first on ties
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| state.values[a].total_cmp(&state.values[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let mut centroid = vec![0.0; dim];
        for &i in &order[..dim] {
            for (c, x) in centroid.iter_mut().zip(&state.vertices[i]) {
                *c += x / dim as f64;
            }
        }

        let f_best = state.values[best];
        let f_worst = state.values[worst];
        let f_second = state.values[second_worst];

        let reflected = lerp(&centroid, &state.vertices[worst], -NM_REFLECT);
        let f_reflected = f(&reflected)?;

        let mut replacement = None;
        if f_reflected < f_best {
            let expanded = lerp(&centroid, &reflected, NM_EXPAND);
            let f_expanded = f(&expanded)?;
            replacement = Some(if f_expanded < f_reflected {
                (expanded, f_expanded)
            } else {
                (reflected, f_reflected)
            });
        } else if f_reflected < f_second {
            replacement = Some((reflected, f_reflected));
        } else if f_reflected < f_worst {
            let outside = lerp(&centroid, &reflected, NM_CONTRACT);
            let f_outside = f(&outside)?;
            if f_outside <= f_reflected {
                replacement = Some((outside, f_outside));
            }
        } else {
            let inside = lerp(&centroid, &state.vertices[worst], NM_CONTRACT);
            let f_inside = f(&inside)?;
            if f_inside < f_worst {
                replacement = Some((inside, f_inside));
            }
        }

        match replacement {
            Some((v, value)) => {
                state.vertices[worst] = v;
                state.values[worst] = value;
            }
            None => {
                let anchor = state.vertices[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    state.vertices[i] = lerp(&anchor, &state.vertices[i], NM_SHRINK);
                    state.values[i] = f(&state.vertices[i])?;
                }
            }
        }
        state.iteration = iteration;
        let b = state.best();
        log.push(LogRow {
            iteration,
            params: state.vertices[b].clone(),
            value: state.values[b],
        });
    }

    let b = state.best();
    Ok(NelderMeadResult {
        best_value: state.values[b],
        best_params: state.vertices[b].clone(),
        state,
        log,
    })
}

/// The four bracketing points of the golden-section search and their values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoldenState {
    pub c: [f64; 4],
    pub f: [f64; 4],
    pub iteration: usize,
}

impl GoldenState {
    pub fn is_plateau(&self) -> bool {
        self.f[0] == self.f[3] && self.f[1] == self.f[2]
    }

    pub fn width(&self) -> f64 {
        self.c[3] - self.c[0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GoldenResult {
    pub best_c: f64,
    pub best_value: f64,
    /// Bracket after every iteration, starting with the initial one.
    pub states: Vec<GoldenState>,
    /// `true` where the corresponding iteration applied the plateau rule.
    pub plateaus: Vec<bool>,
    pub log: Vec<LogRow>,
}

/// Initial points `0, 2(φ-1), 2, 2φ`.
pub fn golden_initial_points() -> [f64; 4] {
    [0.0, 2.0 * (GOLDEN - 1.0), 2.0, 2.0 * GOLDEN]
}

/// Four-point golden-section search run for exactly `iterations` steps.
///
/// A normal step drops the outer point on the worse side and places one new
/// interior point at the golden fraction of the narrowed bracket. When the outer
/// pair and the inner pair both tie, all four points are pulled towards the
/// centre by [`PLATEAU_RATIO`] and re-evaluated; that counts as one step.
pub fn golden_section<F>(mut f: F, initial: [f64; 4], iterations: usize) -> Result<GoldenResult>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !initial.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::InvalidArgument(
            "golden-section points must be strictly increasing".into(),
        ));
    }
    let mut best = (initial[0], f64::INFINITY);
    let mut log = Vec::with_capacity(4 + iterations);
    let mut eval =
        |c: f64, best: &mut (f64, f64), log: &mut Vec<LogRow>, iteration: usize| -> Result<f64> {
            let v = f(c)?;
            if v < best.1 {
                *best = (c, v);
            }
            if iteration == 0 {
                log.push(LogRow {
                    iteration,
                    params: vec![c],
                    value: v,
                });
            }
            Ok(v)
        };

    let mut values = [0.0; 4];
    for (slot, &c) in values.iter_mut().zip(&initial) {
        *slot = eval(c, &mut best, &mut log, 0)?;
    }
    let mut state = GoldenState {
        c: initial,
        f: values,
        iteration: 0,
    };
    let mut states = vec![state];
    let mut plateaus = Vec::with_capacity(iterations);

    for iteration in 1..=iterations {
        let [c1, c2, c3, c4] = state.c;
        let [f1, f2, f3, f4] = state.f;
        let plateau = state.is_plateau();
        if plateau {
            let centre = (c1 + c4) / 2.0;
            for i in 0..4 {
                state.c[i] = centre + PLATEAU_RATIO * (state.c[i] - centre);
                state.f[i] = eval(state.c[i], &mut best, &mut log, iteration)?;
            }
        } else if f2 < f3 || (f2 == f3 && f1 <= f4) {
            let new_c2 = c1 + (2.0 - GOLDEN) * (c3 - c1);
            let new_f2 = eval(new_c2, &mut best, &mut log, iteration)?;
            state.c = [c1, new_c2, c2, c3];
            state.f = [f1, new_f2, f2, f3];
        } else {
            let new_c3 = c2 + (GOLDEN - 1.0) * (c4 - c2);
            let new_f3 = eval(new_c3, &mut best, &mut log, iteration)?;
            state.c = [c2, c3, new_c3, c4];
            state.f = [f2, f3, new_f3, f4];
        }
        state.iteration = iteration;
        states.push(state);
        plateaus.push(plateau);
        log.push(LogRow {
            iteration,
            params: vec![best.0],
            value: best.1,
        });
    }

    Ok(GoldenResult {
        best_c: best.0,
        best_value: best.1,
        states,
        plateaus,
        log,
    })
}

/// `ΔTH = 10^c ΔTH_base`, `A0 = 10^c A0_base`, γ unchanged.
pub fn scale_params(c: f64, base: PbrlParams) -> PbrlParams {
    base.scaled(10f64.powf(c))
}

/// Starting simplex for `[ΔTH, A0, γ]`.
pub fn pbrl_initial_simplex() -> Vec<Vec<f64>> {
    let (d_th, d_a0, d_g) = (0.1, 1.0, 0.01);
    vec![
        vec![d_th, 10.0 + d_a0, 1.0 - d_g],
        vec![d_th, 1000.0 - d_a0, 0.5],
        vec![10.0 - d_th, 10.0 + d_a0, 0.5],
        vec![d_th, 10.0 + d_a0, d_g],
    ]
}

/// Starting simplex for `[r_penalty, γ, α, ε0]`.
pub fn q_initial_simplex() -> Vec<Vec<f64>> {
    let (d_r, d) = (1.0, 0.01);
    vec![
        vec![1000.0 - d_r, d, d, d],
        vec![1000.0 - d_r, 0.5, d, d],
        vec![d_r, 1.0 - d, 0.5, 1.0 - d],
        vec![d_r, d, 1.0 - d, 0.5],
        vec![d_r, d, d, d],
    ]
}

/// Which search `tune` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TuneTarget {
    PbrlNelderMead,
    PbrlGolden,
    QNelderMead,
}

impl std::str::FromStr for TuneTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pbrl-nm" => Ok(TuneTarget::PbrlNelderMead),
            "pbrl-gs" => Ok(TuneTarget::PbrlGolden),
            "q-nm" => Ok(TuneTarget::QNelderMead),
            other => Err(Error::config(
                "target",
                format!("unknown tuning target `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneSettings {
    pub target: TuneTarget,
    /// Rounds per evaluation; `None` uses the target's default.
    pub rounds: Option<usize>,
    /// `None` uses the target's default.
    pub iterations: Option<usize>,
    /// Base parameters of the scale search.
    pub golden_base: PbrlParams,
    pub jobs: usize,
}

impl TuneSettings {
    pub fn new(target: TuneTarget) -> Self {
        Self {
            target,
            rounds: None,
            iterations: None,
            golden_base: PbrlParams::SIMPLEX_BEST,
            jobs: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub best_fom: u32,
    pub best_params: Vec<f64>,
    pub param_names: Vec<&'static str>,
    pub log: Vec<LogRow>,
    /// The base config with the winning parameters substituted.
    pub tuned: RunConfig,
    pub simulations: usize,
}

impl TuneOutcome {
    pub fn log_csv(&self) -> String {
        log_to_csv(&self.param_names, &self.log)
    }
}

/// Runs one of the tuning protocols against `base` (source, env, seeds).
pub fn tune(original: &RunConfig, settings: &TuneSettings) -> Result<TuneOutcome> {
    let mut base = original.clone();
    base.agent = match settings.target {
        TuneTarget::QNelderMead => AgentKind::QLearning,
        _ => AgentKind::Pbrl,
    };
    base.rounds = settings.rounds.unwrap_or(match settings.target {
        TuneTarget::PbrlGolden => GS_ROUNDS,
        _ => NM_ROUNDS,
    });
    let iterations = settings.iterations.unwrap_or(match settings.target {
        TuneTarget::PbrlGolden => GS_ITERATIONS,
        _ => NM_ITERATIONS,
    });
    let sim = Simulation::new(base.clone())?;
    let jobs = settings.jobs;
    // the tuned config keeps the caller's round count
    let base = RunConfig {
        agent: base.agent,
        ..original.clone()
    };

    match settings.target {
        TuneTarget::PbrlNelderMead => {
            let mut objective = Objective::new(pbrl_guard, |v| {
                let p = PbrlParams::from_slice(v).expect("guarded");
                sim.with_config(|c| c.pbrl = p)?
                    .run_experiment(jobs)
                    .map(|e| e.fom)
            });
            let result = nelder_mead(
                |v| objective.fom(v).map(f64::from),
                pbrl_initial_simplex(),
                iterations,
            )?;
            let mut tuned = base.clone();
            tuned.pbrl = PbrlParams::from_slice(&result.best_params).expect("3-vector");
            Ok(TuneOutcome {
                best_fom: result.best_value as u32,
                best_params: result.best_params,
                param_names: vec!["delta_th", "a0", "pbrl_gamma"],
                log: result.log,
                tuned,
                simulations: objective.simulations(),
            })
        }
        TuneTarget::QNelderMead => {
            let late = base.q.late_failure_reward;
            let mut objective = Objective::new(q_guard, |v| {
                let mut p = QParams::from_slice(v).expect("guarded");
                p.late_failure_reward = late;
                sim.with_config(|c| c.q = p)?
                    .run_experiment(jobs)
                    .map(|e| e.fom)
            });
            let result = nelder_mead(
                |v| objective.fom(v).map(f64::from),
                q_initial_simplex(),
                iterations,
            )?;
            let mut tuned = base.clone();
            tuned.q = QParams::from_slice(&result.best_params).expect("4-vector");
            tuned.q.late_failure_reward = late;
            Ok(TuneOutcome {
                best_fom: result.best_value as u32,
                best_params: result.best_params,
                param_names: vec!["r_penalty", "q_gamma", "alpha", "epsilon0"],
                log: result.log,
                tuned,
                simulations: objective.simulations(),
            })
        }
        TuneTarget::PbrlGolden => {
            let golden_base = settings.golden_base;
            let mut objective = Objective::new(pbrl_guard, |v| {
                let p = PbrlParams::from_slice(v).expect("guarded");
                sim.with_config(|c| c.pbrl = p)?
                    .run_experiment(jobs)
                    .map(|e| e.fom)
            });
            let result = golden_section(
                |c| {
                    objective
                        .fom(&scale_params(c, golden_base).to_vec())
                        .map(f64::from)
                },
                golden_initial_points(),
                iterations,
            )?;
            let best = scale_params(result.best_c, golden_base);
            let log = result
                .log
                .iter()
                .map(|row| {
                    let mut params = row.params.clone();
                    params.extend(scale_params(row.params[0], golden_base).to_vec());
                    LogRow {
                        params,
                        ..row.clone()
                    }
                })
                .collect();
            let mut tuned = base.clone();
            tuned.pbrl = best;
            let mut best_params = vec![result.best_c];
            best_params.extend(best.to_vec());
            Ok(TuneOutcome {
                best_fom: result.best_value as u32,
                best_params,
                param_names: vec!["c", "delta_th", "a0", "pbrl_gamma"],
                log,
                tuned,
                simulations: objective.simulations(),
            })
        }
    }
}
