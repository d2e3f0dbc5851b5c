//! End-to-end tests that drive the compiled `maestro` binary the way a user
//! would, covering the documented exit-code contract and the determinism and
//! resume guarantees.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_maestro"))
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("process must exit normally")
}

const SMOKE_CONFIG: &str = r#"
version = 1
method = "maestro"
seeds = [11]
budget = 10
out_dir = "OUT_DIR"
snapshot_interval = 4
metrics_interval = 4

[ppo]
epochs = 1
minibatches = 1

[curriculum]
buffer_capacity = 8
checkpoint_interval = 5
win_window = 16

[rollout]
max_steps = 16
hidden = 4
"#;

fn write_smoke_config(dir: &Path, out_dir: &Path) -> PathBuf {
    let text = SMOKE_CONFIG.replace("OUT_DIR", &out_dir.display().to_string());
    let p = dir.join("train.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run_dir(out_dir: &Path) -> PathBuf {
    out_dir.join("maestro").join("seed_11")
}

#[test]
fn table1_passes_on_the_bundled_fixture() {
    let out = bin().arg("table1").output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("(pi_A, theta_1) regret 0.6"), "{text}");
    assert!(text.contains("(pi_C, theta_3) regret 0.4"), "{text}");
    assert!(text.contains("PASS"), "{text}");
}

#[test]
fn table1_rejects_a_perturbed_fixture() {
    let tmp = tempfile::tempdir().unwrap();
    // A well-formed matrix whose argmaxes land elsewhere.
    let fixture = "# rows: co_x co_y\n# cols: env_a env_b\n0.6 0.1\n0.05 0.7\n";
    let path = tmp.path().join("fixture.tsv");
    std::fs::write(&path, fixture).unwrap();
    let out = bin().args(["table1", "--fixture"]).arg(&path).output().unwrap();
    assert_eq!(code(&out), 1, "stdout: {}", stdout(&out));
    assert!(stdout(&out).contains("FAIL"));
}

#[test]
fn table1_missing_fixture_exits_3_and_garbage_exits_4() {
    let out = bin().args(["table1", "--fixture", "/nonexistent/f.tsv"]).output().unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("garbage.tsv");
    std::fs::write(&path, "not\ta\tmatrix").unwrap();
    let out = bin().args(["table1", "--fixture"]).arg(&path).output().unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
}

#[test]
fn train_smoke_run_writes_artifacts_and_exits_zero() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("runs");
    let cfg = write_smoke_config(tmp.path(), &out_dir);
    let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let dir = run_dir(&out_dir);
    for f in
        ["config.toml", "events.jsonl", "metrics.csv", "checkpoint_latest.json", "checkpoint_final.json", "manifest.json"]
    {
        assert!(dir.join(f).exists(), "missing {f}");
    }
    assert!(stdout(&out).contains("10 updates"));
}

#[test]
fn bad_config_exits_2_and_missing_config_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    std::fs::write(&bad, SMOKE_CONFIG.replace("\"maestro\"", "\"sgd\"")).unwrap();
    let out = bin().args(["train", "--config"]).arg(&bad).output().unwrap();
    assert_eq!(code(&out), 2, "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("method"), "error must name the field: {}", stderr(&out));

    let out = bin().args(["train", "--config", "/nonexistent/t.toml"]).output().unwrap();
    assert_eq!(code(&out), 3);
}

#[test]
fn deterministic_reruns_are_bit_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("runs");
    let cfg = write_smoke_config(tmp.path(), &out_dir);
    let run = || {
        let out = bin()
            .args(["train", "--deterministic", "--config"])
            .arg(&cfg)
            .output()
            .unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    };
    run();
    let dir = run_dir(&out_dir);
    let files = ["events.jsonl", "metrics.csv", "checkpoint_final.json", "manifest.json"];
    let first: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect();
    run();
    let second: Vec<Vec<u8>> = files.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect();
    assert_eq!(first, second);
}

#[test]
fn interrupted_run_resumes_to_the_uninterrupted_result() {
    let tmp = tempfile::tempdir().unwrap();
    let full_out = tmp.path().join("full");
    let split_out = tmp.path().join("split");
    let cfg_full = write_smoke_config(&tmp.path().join("."), &full_out);
    let out = bin().args(["train", "--config"]).arg(&cfg_full).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    // Same config, different out_dir, run in two halves.
    let split_cfg = tmp.path().join("split.toml");
    std::fs::write(&split_cfg, SMOKE_CONFIG.replace("OUT_DIR", &split_out.display().to_string()))
        .unwrap();
    let out = bin()
        .args(["train", "--stop-after-updates", "6", "--config"])
        .arg(&split_cfg)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("6 updates"));
    let out = bin().args(["train", "--resume", "--config"]).arg(&split_cfg).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    // Event streams (minus the config-bearing header) and metrics agree byte
    // for byte.
    let ev = |dir: &Path| -> Vec<String> {
        std::fs::read_to_string(run_dir(dir).join("events.jsonl"))
            .unwrap()
            .lines()
            .skip(1)
            .map(str::to_string)
            .collect()
    };
    assert_eq!(ev(&full_out), ev(&split_out));
    let metrics = |dir: &Path| std::fs::read(run_dir(dir).join("metrics.csv")).unwrap();
    assert_eq!(metrics(&full_out), metrics(&split_out));
}

#[test]
fn eval_then_plot_pipeline_produces_reports_and_charts() {
    let tmp = tempfile::tempdir().unwrap();
    let runs = tmp.path().join("runs");

    // Two tiny runs under different methods.
    for (method, seed) in [("maestro", "11"), ("dr-sp", "12")] {
        let text = SMOKE_CONFIG
            .replace("OUT_DIR", &runs.display().to_string())
            .replace("\"maestro\"", &format!("{method:?}"))
            .replace("seeds = [11]", &format!("seeds = [{seed}]"));
        let cfg = tmp.path().join(format!("{method}.toml"));
        std::fs::write(&cfg, text).unwrap();
        let out = bin().args(["train", "--config"]).arg(&cfg).output().unwrap();
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }

    let eval_out = runs.join("eval");
    let eval_cfg = tmp.path().join("eval.toml");
    std::fs::write(
        &eval_cfg,
        format!(
            r#"
version = 1
out_dir = "{}"
levels = ["Cross"]
episodes_per_pair = 1
base_seed = 3
max_steps = 16

[[entrants]]
method = "maestro"
checkpoints = ["{}"]

[[entrants]]
method = "dr-sp"
checkpoints = ["{}"]
"#,
            eval_out.display(),
            runs.join("maestro/seed_11/checkpoint_final.json").display(),
            runs.join("dr-sp/seed_12/checkpoint_final.json").display(),
        ),
    )
    .unwrap();
    let out = bin().args(["eval", "--config"]).arg(&eval_cfg).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for f in ["schedule.json", "matches.csv", "tournament.json", "manifest.json"] {
        assert!(eval_out.join(f).exists(), "missing {f}");
    }
    assert!(stdout(&out).contains("normalized returns"));

    // Re-run: evaluation must be reproducible.
    let before = std::fs::read(eval_out.join("matches.csv")).unwrap();
    let out = bin().args(["eval", "--config"]).arg(&eval_cfg).output().unwrap();
    assert_eq!(code(&out), 0);
    assert_eq!(before, std::fs::read(eval_out.join("matches.csv")).unwrap());

    // Plot over the whole results tree.
    let plots = tmp.path().join("plots");
    let out = bin().args(["plot", "--results"]).arg(&runs).args(["--out"]).arg(&plots).output().unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    for f in ["score.svg", "wall_density.svg", "grid_size.svg", "rr_returns.svg"] {
        assert!(plots.join(f).exists(), "missing {f}");
    }
    let svg = std::fs::read_to_string(plots.join("score.svg")).unwrap();
    assert_eq!(svg.matches("<polyline").count(), 2, "one series per run");

    // Landscape over the population-bearing checkpoint.
    let landscape_out = tmp.path().join("landscape.tsv");
    let out = bin()
        .args(["landscape", "--envs", "2", "--seed", "1", "--checkpoint"])
        .arg(runs.join("maestro/seed_11/checkpoint_final.json"))
        .args(["--out"])
        .arg(&landscape_out)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("joint selection"));
    assert!(landscape_out.exists());
}

#[test]
fn eval_missing_checkpoint_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let eval_cfg = tmp.path().join("eval.toml");
    std::fs::write(
        &eval_cfg,
        format!(
            r#"
version = 1
out_dir = "{}"
levels = ["Cross"]

[[entrants]]
method = "maestro"
checkpoints = ["/nonexistent/a.json"]

[[entrants]]
method = "dr-sp"
checkpoints = ["/nonexistent/b.json"]
"#,
            tmp.path().join("eval").display()
        ),
    )
    .unwrap();
    let out = bin().args(["eval", "--config"]).arg(&eval_cfg).output().unwrap();
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
}

#[test]
fn plot_malformed_metrics_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("results/x");
    std::fs::create_dir_all(&run).unwrap();
    std::fs::write(run.join("metrics.csv"), "bogus header\n1,2,3\n").unwrap();
    let out = bin()
        .args(["plot", "--results"])
        .arg(tmp.path().join("results"))
        .args(["--out"])
        .arg(tmp.path().join("plots"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 4, "stderr: {}", stderr(&out));
}
