//! The `eval` command: cross-plays trained checkpoints on held-out levels,
//! writing the pre-execution schedule, per-match CSV, tournament tables and
//! an optional specialist-exploiter report.

use crate::config::{resolve_levels, EvalConfig};
use crate::CliError;
use maestro::evaluation::{
    build_schedule, match_csv_row, normalize_returns, run_round_robin, run_specialist_eval,
    EvalError, LabeledPolicies, SpecialistConfig, TournamentTable, MATCH_CSV_HEADER,
};
use maestro::curriculum::LaserTagDomain;
use serde::Serialize;
use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

pub const TOURNAMENT_VERSION: u32 = 1;

#[derive(Clone, Debug, Default)]
pub struct EvalOptions {
    pub deterministic: bool,
    pub out_override: Option<PathBuf>,
}

/// Engine-level parameter/config complaints map to the config exit code; the
/// rest is internal.
fn eval_err(e: EvalError) -> CliError {
    match e {
        EvalError::Parameter(m) | EvalError::Config(m) => CliError::Config(m),
        other => CliError::Internal(other.to_string()),
    }
}

#[derive(Serialize)]
struct TournamentReport<'a> {
    version: u32,
    raw: &'a TournamentTable,
    normalized: &'a TournamentTable,
}

pub fn cmd_eval(config_path: &Path, opts: &EvalOptions) -> Result<(), CliError> {
    let mut cfg = EvalConfig::load(config_path)?;
    if let Some(o) = &opts.out_override {
        cfg.out_dir = o.clone();
    }
    let workers = if opts.deterministic { 1 } else { cfg.workers };
    init_thread_pool(workers)?;

    let levels = resolve_levels(&cfg.levels)?;
    let entrants = load_entrants(&cfg)?;

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| crate::io_error(&cfg.out_dir, e))?;

    // The schedule is committed to disk before any episode runs.
    let schedule =
        build_schedule(&entrants, &levels, cfg.episodes_per_pair, cfg.base_seed).map_err(eval_err)?;
    let schedule_path = cfg.out_dir.join("schedule.json");
    let schedule_json = serde_json::to_string_pretty(&schedule)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&schedule_path, &schedule_json).map_err(|e| crate::io_error(&schedule_path, e))?;

    let (raw, results, executed_schedule) =
        run_round_robin(&entrants, &levels, cfg.episodes_per_pair, cfg.base_seed, cfg.max_steps)
            .map_err(eval_err)?;
    debug_assert_eq!(schedule, executed_schedule, "executed schedule must match the manifest");
    let normalized = normalize_returns(&raw).map_err(eval_err)?;

    let mut csv = String::from(MATCH_CSV_HEADER);
    csv.push('\n');
    for r in &results {
        csv.push_str(&match_csv_row(r));
        csv.push('\n');
    }
    let matches_path = cfg.out_dir.join("matches.csv");
    std::fs::write(&matches_path, &csv).map_err(|e| crate::io_error(&matches_path, e))?;

    let report = TournamentReport { version: TOURNAMENT_VERSION, raw: &raw, normalized: &normalized };
    let tournament_path = cfg.out_dir.join("tournament.json");
    let tournament_json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Internal(e.to_string()))?;
    std::fs::write(&tournament_path, &tournament_json)
        .map_err(|e| crate::io_error(&tournament_path, e))?;

    let mut artifacts = vec![
        PathBuf::from("schedule.json"),
        PathBuf::from("matches.csv"),
        PathBuf::from("tournament.json"),
    ];

    if let Some(sp) = &cfg.specialist {
        let generalist = entrants
            .iter()
            .find(|l| l.method == sp.generalist)
            .expect("validated: generalist is an entrant");
        let sp_levels = resolve_levels(&sp.levels)?;
        let sp_cfg = SpecialistConfig {
            domain: LaserTagDomain { max_steps: cfg.max_steps, ..LaserTagDomain::desk_default() },
            training_budget: sp.training_budget,
            eval_episodes: sp.eval_episodes,
            hidden: sp.hidden,
            base_seed: sp.base_seed,
        };
        let reports =
            run_specialist_eval(&generalist.policies, &sp_levels, &sp_cfg).map_err(eval_err)?;
        let sp_path = cfg.out_dir.join("specialist.json");
        let sp_json = serde_json::to_string_pretty(&reports)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        std::fs::write(&sp_path, &sp_json).map_err(|e| crate::io_error(&sp_path, e))?;
        artifacts.push(PathBuf::from("specialist.json"));

        let mut out = std::io::stdout().lock();
        let _ = writeln!(out, "specialist exploiters ({} updates each):", sp.training_budget);
        for r in &reports {
            let _ = writeln!(
                out,
                "  {:<24} generalist {} mean return {:+.3} (win rate {:.3})",
                r.level, sp.generalist, r.generalist_mean_return, r.generalist_win_rate
            );
        }
    }

    crate::artifacts::write_manifest(&cfg.out_dir, &artifacts)?;
    print_summary(&normalized, results.len(), levels.len());
    Ok(())
}

fn load_entrants(cfg: &EvalConfig) -> Result<Vec<LabeledPolicies>, CliError> {
    let mut entrants = Vec::with_capacity(cfg.entrants.len());
    for entrant in &cfg.entrants {
        let mut policies = Vec::with_capacity(entrant.checkpoints.len());
        let mut seen = BTreeSet::new();
        for path in &entrant.checkpoints {
            let (seed, policy) = crate::runner::load_lasertag_policy(path)?;
            if !seen.insert(seed) {
                return Err(CliError::Config(format!(
                    "entrant {:?}: two checkpoints carry training seed {seed}",
                    entrant.method
                )));
            }
            policies.push((seed, policy));
        }
        entrants.push(LabeledPolicies { method: entrant.method.clone(), policies });
    }
    Ok(entrants)
}

/// Builds the global rayon pool. 0 workers means "let rayon pick"; the pool
/// only affects wall-clock time, never results, because match aggregation is
/// schedule-ordered.
pub fn init_thread_pool(workers: usize) -> Result<(), CliError> {
    if workers == 0 {
        return Ok(());
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build_global() {
        Ok(()) => Ok(()),
        // A pool already exists (tests, repeated calls): results do not
        // depend on pool size, so carry on.
        Err(_) => Ok(()),
    }
}

fn print_summary(normalized: &TournamentTable, episodes: usize, levels: usize) {
    let mut text = String::new();
    let _ = writeln!(text, "round robin: {episodes} episodes across {levels} levels");
    let _ = writeln!(text, "normalized returns (row vs column, 0.5 = even):");
    let width = normalized.methods.iter().map(|m| m.len()).max().unwrap_or(8).max(8);
    let _ = write!(text, "  {:<width$}", "");
    for m in &normalized.methods {
        let _ = write!(text, " {m:>width$}");
    }
    text.push('\n');
    for (i, m) in normalized.methods.iter().enumerate() {
        let _ = write!(text, "  {m:<width$}");
        for j in 0..normalized.methods.len() {
            if i == j {
                let _ = write!(text, " {:>width$}", "-");
            } else {
                let _ = write!(text, " {:>width$.3}", normalized.cell(i, j));
            }
        }
        text.push('\n');
    }
    let means = normalized.method_means();
    let _ = writeln!(text, "mean normalized return vs field:");
    let mut order: Vec<usize> = (0..means.len()).collect();
    order.sort_by(|&a, &b| means[b].partial_cmp(&means[a]).unwrap_or(std::cmp::Ordering::Equal));
    for idx in order {
        let _ = writeln!(text, "  {:<width$} {:.3}", normalized.methods[idx], means[idx]);
    }
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TrainConfig;
    use crate::runner::{cmd_train, seed_dir, TrainOptions};

    fn train_small(dir: &Path, method: &str, seeds: &[u64]) -> Vec<PathBuf> {
        let seeds_list =
            seeds.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(", ");
        let text = format!(
            r#"
version = 1
method = "{method}"
seeds = [{seeds_list}]
budget = 6
out_dir = "{}"
snapshot_interval = 3
metrics_interval = 3

[ppo]
epochs = 1
minibatches = 1

[curriculum]
buffer_capacity = 8
checkpoint_interval = 4
win_window = 16

[rollout]
max_steps = 16
hidden = 4
"#,
            dir.display()
        );
        let cfg = TrainConfig::parse(&text).unwrap();
        let cfg_path = dir.join(format!("{method}.toml"));
        std::fs::write(&cfg_path, cfg.to_toml_string()).unwrap();
        cmd_train(&cfg_path, &TrainOptions::default()).unwrap();
        seeds.iter().map(|&s| seed_dir(&cfg, s).join("checkpoint_final.json")).collect()
    }

    fn eval_config(dir: &Path, ckpts_a: &[PathBuf], ckpts_b: &[PathBuf]) -> PathBuf {
        let list = |v: &[PathBuf]| {
            v.iter().map(|p| format!("{:?}", p.display().to_string())).collect::<Vec<_>>().join(", ")
        };
        let text = format!(
            r#"
version = 1
out_dir = "{}"
levels = ["Cross", "Star"]
episodes_per_pair = 1
base_seed = 7
max_steps = 16

[[entrants]]
method = "maestro"
checkpoints = [{}]

[[entrants]]
method = "dr-sp"
checkpoints = [{}]
"#,
            dir.join("eval").display(),
            list(ckpts_a),
            list(ckpts_b),
        );
        let p = dir.join("eval.toml");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn eval_writes_schedule_matches_and_tables() {
        let tmp = tempfile::tempdir().unwrap();
        let a = train_small(tmp.path(), "maestro", &[1]);
        let b = train_small(tmp.path(), "dr-sp", &[2]);
        let cfg_path = eval_config(tmp.path(), &a, &b);
        cmd_eval(&cfg_path, &EvalOptions::default()).unwrap();
        let out = tmp.path().join("eval");
        for f in ["schedule.json", "matches.csv", "tournament.json", "manifest.json"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
        let csv = std::fs::read_to_string(out.join("matches.csv")).unwrap();
        // 1 method pair x 1 seed pair x 2 levels x 1 episode x 2 role orders.
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.starts_with(MATCH_CSV_HEADER));
        let report: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(out.join("tournament.json")).unwrap())
                .unwrap();
        assert_eq!(report["raw"]["normalized"], serde_json::Value::Bool(false));
        assert_eq!(report["normalized"]["normalized"], serde_json::Value::Bool(true));

        // Re-running the evaluation reproduces every artifact byte for byte.
        let before: Vec<Vec<u8>> = ["schedule.json", "matches.csv", "tournament.json"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        cmd_eval(&cfg_path, &EvalOptions::default()).unwrap();
        let after: Vec<Vec<u8>> = ["schedule.json", "matches.csv", "tournament.json"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        assert_eq!(before, after, "evaluation must be reproducible");
    }

    #[test]
    fn missing_checkpoint_is_a_missing_artifact_error() {
        let tmp = tempfile::tempdir().unwrap();
        let a = train_small(tmp.path(), "maestro", &[1]);
        let ghost = vec![tmp.path().join("nope/checkpoint_final.json")];
        let cfg_path = eval_config(tmp.path(), &a, &ghost);
        let err = cmd_eval(&cfg_path, &EvalOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 3, "unexpected error: {err}");
    }

    #[test]
    fn duplicate_seed_within_method_is_rejected() {
        let tmp = tempfile::tempdir().unwrap();
        let a = train_small(tmp.path(), "maestro", &[1]);
        let b = train_small(tmp.path(), "dr-sp", &[2]);
        let dup = vec![a[0].clone(), a[0].clone()];
        let cfg_path = eval_config(tmp.path(), &dup, &b);
        let err = cmd_eval(&cfg_path, &EvalOptions::default()).unwrap_err();
        assert_eq!(err.exit_code(), 2, "unexpected error: {err}");
        assert!(err.to_string().contains("seed"), "{err}");
    }
}
