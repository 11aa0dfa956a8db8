use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use pbrl_core::config::parse_pairs;
use pbrl_core::harness::build_series;
use pbrl_core::sequence::{self, autocorrelation};
use pbrl_core::tuner::{self, TuneSettings, TuneTarget};
use pbrl_core::{report, AgentKind, RunConfig, Simulation, SourceSpec};

#[derive(Parser)]
#[command(
    name = "pbrl",
    version,
    about = "Threshold-bandit and Q-learning cart-pole experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run learning rounds and write the averaged curves.
    Simulate(SimulateArgs),
    /// Search agent constants that minimise the FOM.
    Tune(TuneArgs),
    /// Write the autocorrelation profile of a source.
    Autocorr(AutocorrArgs),
    /// Write a randomly shuffled copy of a series file.
    Surrogate(SurrogateArgs),
}

/// Options shared by commands that build a run configuration.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` file applied before the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// pbrl or qlearning.
    #[arg(long)]
    agent: Option<String>,
    /// uniform, normal[:sigma], synthetic:LAG, file:PATH or surrogate:<source>.
    #[arg(long)]
    source: Option<String>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Any config key, repeatable: `--set a0=400`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Worker threads; 0 uses every core, 1 runs sequentially.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, env = "PBRL_OUT_DIR", default_value = "out")]
    out: PathBuf,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, pbrl_core::Error> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).map_err(|source| pbrl_core::Error::Read {
                        path: path.clone(),
                        source,
                    })?;
                parse_pairs(&text)?
            }
            None => Vec::new(),
        };
        let mut flag = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                pairs.push((k.to_string(), v));
            }
        };
        flag("agent", self.agent.clone());
        flag("source", self.source.clone());
        flag("stride", self.stride.map(|v| v.to_string()));
        flag("rounds", self.rounds.map(|v| v.to_string()));
        flag("seed", self.seed.map(|v| v.to_string()));
        for item in &self.overrides {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| pbrl_core::Error::config(item.as_str(), "expected KEY=VALUE"))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let config = RunConfig::from_pairs(&pairs)?;
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Also write the learned table of the first round.
    #[arg(long)]
    dump_table: bool,
}

#[derive(Args)]
struct TuneArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// pbrl-nm, pbrl-gs or q-nm.
    #[arg(long)]
    target: TuneTarget,
    /// Iterations; defaults to 20 for the simplex and 25 for the scale search.
    #[arg(long)]
    iterations: Option<usize>,
    /// Rounds per evaluation; defaults to 480 for the simplex and 270 for the scale search.
    #[arg(long)]
    eval_rounds: Option<usize>,
}

#[derive(Args)]
struct AutocorrArgs {
    #[arg(long)]
    source: SourceSpec,
    #[arg(long, default_value_t = 10)]
    max_lag: usize,
    /// Length of generated series.
    #[arg(long, default_value_t = 1_000_000)]
    length: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurrogateArgs {
    /// `.bin` (offset-binary) or `.txt` (one integer per line).
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn write(path: &Path, body: &str) -> Result<()> {
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn simulate(args: &SimulateArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let out = &args.config.out;
    let sim = Simulation::new(config.clone())?;
    let curves = sim.run_experiment(args.config.jobs)?;
    report::write_artifacts(out, &config, &curves)
        .with_context(|| format!("cannot write to {}", out.display()))?;
    if args.dump_table {
        let (_, table) = sim.run_round_with_table(sim.round_seed(0))?;
        let name = match config.agent {
            AgentKind::Pbrl => "threshold_table.csv",
            AgentKind::QLearning => "q_table.csv",
        };
        write(&out.join(name), &table)?;
    }
    println!(
        "fom {} ({} rounds) -> {}",
        curves.fom,
        config.rounds,
        out.display()
    );
    Ok(())
}

fn tune(args: &TuneArgs) -> Result<()> {
    let config = args.config.resolve()?;
    let settings = TuneSettings {
        rounds: args.eval_rounds,
        iterations: args.iterations,
        jobs: args.config.jobs,
        ..TuneSettings::new(args.target)
    };
    let outcome = tuner::tune(&config, &settings)?;
    let out = &args.config.out;
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write(&out.join("tuning_log.csv"), &outcome.log_csv())?;
    write(&out.join("tuned.cfg"), &outcome.tuned.to_manifest())?;
    let params: Vec<String> = outcome
        .param_names
        .iter()
        .zip(&outcome.best_params)
        .map(|(n, v)| format!("{n}={v}"))
        .collect();
    println!(
        "best fom {} with {} after {} simulations -> {}",
        outcome.best_fom,
        params.join(" "),
        outcome.simulations,
        out.display()
    );
    Ok(())
}

fn autocorr(args: &AutocorrArgs) -> Result<()> {
    let series = match &args.source {
        SourceSpec::Uniform => sequence::gen_uniform(args.length, args.seed)?,
        SourceSpec::Normal { sigma } => sequence::gen_normal(args.length, *sigma, args.seed)?,
        spec => {
            let config = RunConfig {
                chaos_length: args.length,
                source_seed: args.seed,
                ..RunConfig::default()
            };
            let series = build_series(spec, &config)?.expect("series-backed source");
            std::sync::Arc::unwrap_or_clone(series)
        }
    };
    let csv = autocorrelation(&series, args.max_lag)?.to_csv();
    match &args.out {
        Some(path) => write(path, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn surrogate(args: &SurrogateArgs) -> Result<()> {
    let series = sequence::load_chaos_file(&args.input, sequence::DEFAULT_BASE_PERIOD_PS)?;
    let shuffled = sequence::shuffle_surrogate(&series, args.seed);
    sequence::save_series(&shuffled, &args.output)
        .with_context(|| format!("cannot write {}", args.output.display()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Tune(a) => tune(a),
        Command::Autocorr(a) => autocorr(a),
        Command::Surrogate(a) => surrogate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let config_error = err
                .downcast_ref::<pbrl_core::Error>()
                .is_some_and(|e| e.is_config());
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
