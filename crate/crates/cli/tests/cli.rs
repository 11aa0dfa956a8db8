use std::path::Path;
use std::process::{Command, Output};

fn pbrl(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pbrl"))
        .current_dir(dir)
        .env_remove("PBRL_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn data_rows(csv: &str) -> Vec<&str> {
    csv.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect()
}

#[test]
fn smoke_run_writes_every_episode() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "simulate", "--agent", "pbrl", "--source", "uniform", "--rounds", "1",
        ],
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let success = std::fs::read_to_string(dir.path().join("out/success_curve.csv")).unwrap();
    assert_eq!(data_rows(&success).len(), 1000);
    assert!(success.contains("# source=uniform\n"));
    let variety = std::fs::read_to_string(dir.path().join("out/variety.csv")).unwrap();
    assert_eq!(data_rows(&variety).len(), 100);
    let fom: u32 = std::fs::read_to_string(dir.path().join("out/fom.txt"))
        .unwrap()
        .trim()
        .parse()
        .unwrap();
    assert!(fom <= 1000);
}

#[test]
fn output_directory_comes_from_the_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_pbrl"))
        .current_dir(dir.path())
        .env("PBRL_OUT_DIR", "from-env")
        .args(["simulate", "--rounds", "1", "--set", "episodes=20"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/manifest.cfg").exists());
}

#[test]
fn missing_chaos_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "simulate",
            "--source",
            "file:absent/trace.bin",
            "--rounds",
            "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("absent/trace.bin"));
}

#[test]
fn bad_keys_and_values_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(dir.path(), &["simulate", "--set", "bogus=1"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
    let out = pbrl(dir.path(), &["simulate", "--stride", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("stride"));
    std::fs::write(dir.path().join("bad.cfg"), "rounds = 2\nnot a pair\n").unwrap();
    let out = pbrl(dir.path(), &["simulate", "--config", "bad.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
}

#[test]
fn manifest_replay_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let first = pbrl(
        dir.path(),
        &[
            "simulate",
            "--source",
            "surrogate:synthetic:3",
            "--stride",
            "2",
            "--rounds",
            "3",
            "--seed",
            "5",
            "--set",
            "chaos_length=50000",
            "--out",
            "a",
        ],
    );
    assert!(
        first.status.success(),
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let replay = pbrl(
        dir.path(),
        &[
            "simulate",
            "--config",
            "a/manifest.cfg",
            "--jobs",
            "1",
            "--out",
            "b",
        ],
    );
    assert!(replay.status.success());
    for name in [
        "success_curve.csv",
        "variety.csv",
        "fom.txt",
        "manifest.cfg",
    ] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs");
    }
}

#[test]
fn table_dump_has_one_row_per_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "simulate",
            "--agent",
            "qlearning",
            "--rounds",
            "1",
            "--set",
            "episodes=30",
            "--dump-table",
        ],
    );
    assert!(out.status.success());
    let table = std::fs::read_to_string(dir.path().join("out/q_table.csv")).unwrap();
    assert!(table.starts_with("state_index,q_action1,q_action2\n"));
    assert_eq!(table.lines().count(), 1 + 1296);
}

#[test]
fn autocorrelation_of_synthetic_chaos_bottoms_out_at_its_lag() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "autocorr",
            "--source",
            "synthetic:5",
            "--length",
            "200000",
            "--out",
            "acf.csv",
        ],
    );
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("acf.csv")).unwrap();
    let rows: Vec<(usize, f64)> = data_rows(&csv)
        .iter()
        .map(|l| {
            let (lag, rho) = l.split_once(',').unwrap();
            (lag.parse().unwrap(), rho.parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 10);
    let min = rows.iter().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(min.0, 5);
    assert!((min.1 + 0.5).abs() < 0.02);
}

#[test]
fn autocorrelation_of_a_surrogate_is_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "autocorr",
            "--source",
            "surrogate:synthetic:5",
            "--length",
            "100000",
        ],
    );
    assert!(out.status.success());
    let csv = String::from_utf8(out.stdout).unwrap();
    for row in data_rows(&csv) {
        let rho: f64 = row.split_once(',').unwrap().1.parse().unwrap();
        assert!(rho.abs() < 0.05, "{row}");
    }
}

#[test]
fn constant_series_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("flat.txt"), "3\n3\n3\n3\n3\n").unwrap();
    let out = pbrl(
        dir.path(),
        &["autocorr", "--source", "file:flat.txt", "--max-lag", "2"],
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("zero variance"));
}

#[test]
fn surrogate_preserves_the_values() {
    let dir = tempfile::tempdir().unwrap();
    let bytes: Vec<u8> = (0..=255u8).cycle().take(4096).collect();
    std::fs::write(dir.path().join("in.bin"), &bytes).unwrap();
    let out = pbrl(
        dir.path(),
        &[
            "surrogate",
            "--input",
            "in.bin",
            "--output",
            "out.bin",
            "--seed",
            "3",
        ],
    );
    assert!(out.status.success());
    let mut shuffled = std::fs::read(dir.path().join("out.bin")).unwrap();
    assert_ne!(shuffled, bytes);
    shuffled.sort_unstable();
    let mut sorted = bytes.clone();
    sorted.sort_unstable();
    assert_eq!(shuffled, sorted);
}

#[test]
fn tuning_log_has_initial_and_iteration_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&str, usize, usize); 3] = [("q-nm", 3, 5), ("pbrl-nm", 2, 4), ("pbrl-gs", 3, 4)];
    for (target, iterations, initial) in cases {
        let out_dir = format!("tune-{target}");
        let out = pbrl(
            dir.path(),
            &[
                "tune",
                "--target",
                target,
                "--iterations",
                &iterations.to_string(),
                "--eval-rounds",
                "1",
                "--rounds",
                "7",
                "--set",
                "episodes=20",
                "--out",
                &out_dir,
            ],
        );
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        let log =
            std::fs::read_to_string(dir.path().join(&out_dir).join("tuning_log.csv")).unwrap();
        assert!(log.starts_with("iteration,"));
        assert_eq!(log.lines().count() - 1, iterations + initial, "{target}");
        let tuned = std::fs::read_to_string(dir.path().join(&out_dir).join("tuned.cfg")).unwrap();
        assert!(tuned.contains("rounds = 7\n"), "{tuned}");
        let replay = pbrl(
            dir.path(),
            &[
                "simulate",
                "--config",
                &format!("{out_dir}/tuned.cfg"),
                "--out",
                &format!("{out_dir}/run"),
            ],
        );
        assert!(replay.status.success());
    }
}

#[test]
fn unknown_tuning_target_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = pbrl(dir.path(), &["tune", "--target", "grid"]);
    assert_eq!(out.status.code(), Some(2));
}
