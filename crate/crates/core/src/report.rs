//! CSV artifacts of an experiment.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::harness::{ExperimentCurves, WINDOW};

pub const SUCCESS_FILE: &str = "success_curve.csv";
pub const VARIETY_FILE: &str = "variety.csv";
pub const FOM_FILE: &str = "fom.txt";
pub const MANIFEST_FILE: &str = "manifest.cfg";

/// `# key=value` lines describing the condition.
fn metadata(config: &RunConfig) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# agent={}", config.agent);
    let _ = writeln!(out, "# source={}", config.source.kind());
    let _ = writeln!(out, "# source_spec={}", config.source);
    let _ = writeln!(out, "# stride={}", config.stride);
    let _ = writeln!(
        out,
        "# sampling_interval_ps={}",
        config.stride as f64 * config.base_period_ps
    );
    let _ = writeln!(out, "# seed={}", config.seed);
    let _ = writeln!(out, "# rounds={}", config.rounds);
    match config.agent {
        crate::config::AgentKind::Pbrl => {
            let p = config.pbrl;
            let _ = writeln!(
                out,
                "# params=delta_th:{},a0:{},gamma:{}",
                p.delta_th, p.a0, p.gamma
            );
        }
        crate::config::AgentKind::QLearning => {
            let q = config.q;
            let _ = writeln!(
                out,
                "# params=r_penalty:{},gamma:{},alpha:{},epsilon0:{}",
                q.r_penalty, q.gamma, q.alpha, q.epsilon0
            );
        }
    }
    out
}

/// `episode,mean_steps`, one row per episode.
pub fn success_csv(config: &RunConfig, curves: &ExperimentCurves) -> String {
    let mut out = metadata(config);
    out.push_str("episode,mean_steps\n");
    for (i, v) in curves.mean_success.iter().enumerate() {
        let _ = writeln!(out, "{},{v}", i + 1);
    }
    out
}

/// `window_start_episode,mean_distinct_states`, one row per window.
pub fn variety_csv(config: &RunConfig, curves: &ExperimentCurves) -> String {
    let mut out = metadata(config);
    out.push_str("window_start_episode,mean_distinct_states\n");
    for (i, v) in curves.mean_variety.iter().enumerate() {
        let _ = writeln!(out, "{},{v}", i * WINDOW + 1);
    }
    out
}

pub fn fom_text(curves: &ExperimentCurves) -> String {
    format!("{}\n", curves.fom)
}

/// Artifact file names and contents, in write order.
pub fn artifacts(config: &RunConfig, curves: &ExperimentCurves) -> Vec<(&'static str, String)> {
    vec![
        (SUCCESS_FILE, success_csv(config, curves)),
        (VARIETY_FILE, variety_csv(config, curves)),
        (FOM_FILE, fom_text(curves)),
        (MANIFEST_FILE, config.to_manifest()),
    ]
}

pub fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    curves: &ExperimentCurves,
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (name, body) in artifacts(config, curves) {
        std::fs::write(dir.join(name), body)?;
    }
    Ok(())
}
