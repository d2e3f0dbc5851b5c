//! The `train` command: drives the curriculum engine per seed, emitting an
//! event log, a metrics CSV, resume checkpoints and a hashed manifest.
//!
//! Every derived artifact (metrics, manifest) is a pure function of the event
//! stream, and the event stream is a pure function of (config, seed), so an
//! interrupted run resumed from its latest checkpoint reproduces the
//! uninterrupted artifacts byte for byte.

use crate::artifacts::{
    save_checkpoint, Checkpoint, LasertagCheckpoint, MatrixCheckpoint, CHECKPOINT_VERSION,
    KIND_LASERTAG, KIND_MATRIX,
};
use crate::config::{EnvKind, TrainConfig};
use crate::eventlog::{read_log, truncate_log, EventWriter, LogHeader, EVENT_LOG_VERSION};
use crate::CliError;
use maestro::curriculum::{curriculum_step, Domain, MatrixStudent, StepEvent, TrainState};
use maestro::lasertag;
use maestro::learner::{ObsEncoding, PolicyParams, Student};
use maestro::rng::RngHandle;
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

#[derive(Clone, Debug, Default)]
pub struct TrainOptions {
    pub resume: bool,
    pub deterministic: bool,
    pub seed_override: Option<u64>,
    pub out_override: Option<PathBuf>,
    /// Stop after this many student updates even if the budget is larger
    /// (artifacts are still finalized, so the run can be resumed later).
    pub stop_after_updates: Option<u64>,
}

pub const METRICS_CSV_HEADER: &str = "update,episodes,branch_fraction,mean_score,buffer_size_total,population_size,wall_density_window,grid_size_window";

/// Folds step events into metrics CSV rows. Fed live during training and
/// re-fed from the truncated log on resume, producing identical rows either
/// way because every input comes from the event itself.
struct MetricsBuilder {
    interval: u64,
    uses_population: bool,
    updates: u64,
    episodes: u64,
    population: usize,
    last_buffer_total: usize,
    win_iters: u64,
    win_trained: u64,
    win_score_sum: f64,
    win_wd_sum: f64,
    win_wd_n: u64,
    win_gs_sum: f64,
    win_gs_n: u64,
    rows: Vec<String>,
}

impl MetricsBuilder {
    fn new(interval: u64, uses_population: bool) -> MetricsBuilder {
        MetricsBuilder {
            interval,
            uses_population,
            updates: 0,
            episodes: 0,
            population: if uses_population { 1 } else { 0 },
            last_buffer_total: 0,
            win_iters: 0,
            win_trained: 0,
            win_score_sum: 0.0,
            win_wd_sum: 0.0,
            win_wd_n: 0,
            win_gs_sum: 0.0,
            win_gs_n: 0,
            rows: Vec::new(),
        }
    }

    fn feed<P>(&mut self, event: &StepEvent<P>, wall_density: Option<f64>, grid_size: Option<f64>) {
        self.episodes += 1;
        if event.trained {
            self.updates += 1;
            self.win_trained += 1;
            if let Some(w) = wall_density {
                self.win_wd_sum += w;
                self.win_wd_n += 1;
            }
            if let Some(g) = grid_size {
                self.win_gs_sum += g;
                self.win_gs_n += 1;
            }
        }
        if event.checkpointed {
            self.population += 1;
        }
        debug_assert!(self.uses_population || self.population == 0);
        self.win_iters += 1;
        self.win_score_sum += event.score;
        self.last_buffer_total = event.buffer_sizes.iter().sum();
        if (event.iteration + 1) % self.interval == 0 {
            self.emit_row();
        }
    }

    fn emit_row(&mut self) {
        if self.win_iters == 0 {
            return;
        }
        let mut row = String::new();
        let _ = write!(
            row,
            "{},{},{},{},{},{}",
            self.updates,
            self.episodes,
            self.win_trained as f64 / self.win_iters as f64,
            self.win_score_sum / self.win_iters as f64,
            self.last_buffer_total,
            self.population,
        );
        if self.win_wd_n > 0 {
            let _ = write!(row, ",{}", self.win_wd_sum / self.win_wd_n as f64);
        } else {
            row.push(',');
        }
        if self.win_gs_n > 0 {
            let _ = write!(row, ",{}", self.win_gs_sum / self.win_gs_n as f64);
        } else {
            row.push(',');
        }
        self.rows.push(row);
        self.win_iters = 0;
        self.win_trained = 0;
        self.win_score_sum = 0.0;
        self.win_wd_sum = 0.0;
        self.win_wd_n = 0;
        self.win_gs_sum = 0.0;
        self.win_gs_n = 0;
    }

    fn finish(&mut self) {
        self.emit_row();
    }

    fn csv(&self) -> String {
        let mut out = String::from(METRICS_CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(r);
            out.push('\n');
        }
        out
    }
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| crate::io_error(path, e))
}

pub fn seed_dir(cfg: &TrainConfig, seed: u64) -> PathBuf {
    cfg.out_dir.join(cfg.method.name()).join(format!("seed_{seed}"))
}

pub fn cmd_train(config_path: &Path, opts: &TrainOptions) -> Result<(), CliError> {
    let mut cfg = TrainConfig::load(config_path)?;
    if let Some(s) = opts.seed_override {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &opts.out_override {
        cfg.out_dir = o.clone();
    }
    if opts.deterministic {
        cfg.deterministic = true;
    }
    for seed in cfg.seeds.clone() {
        run_seed(&cfg, seed, opts)?;
    }
    Ok(())
}

fn run_seed(cfg: &TrainConfig, seed: u64, opts: &TrainOptions) -> Result<(), CliError> {
    match cfg.environment {
        EnvKind::Lasertag => {
            let domain = cfg.lasertag_domain();
            let hidden = cfg.hidden;
            run_seed_domain(
                &domain,
                cfg,
                seed,
                opts,
                KIND_LASERTAG,
                |rng| {
                    Student::new(PolicyParams::mlp_init(
                        ObsEncoding::lasertag(),
                        lasertag::NUM_ACTIONS,
                        hidden,
                        rng,
                    ))
                },
                |event| {
                    (
                        Some(event.env.payload.board.wall_fraction()),
                        Some(event.env.payload.grid_size()),
                    )
                },
            )
        }
        EnvKind::Matrix { .. } => {
            let domain = cfg.matrix_domain().expect("matrix env kind");
            run_seed_domain(
                &domain,
                cfg,
                seed,
                opts,
                KIND_MATRIX,
                |_| MatrixStudent::new(),
                |_| (None, None),
            )
        }
    }
}

fn run_seed_domain<D, FS, FE>(
    domain: &D,
    cfg: &TrainConfig,
    seed: u64,
    opts: &TrainOptions,
    kind: &str,
    fresh_student: FS,
    env_stats: FE,
) -> Result<(), CliError>
where
    D: Domain,
    D::Student: Serialize + DeserializeOwned,
    D::Frozen: Serialize + DeserializeOwned,
    FS: FnOnce(&mut RngHandle) -> D::Student,
    FE: Fn(&StepEvent<D::Payload>) -> (Option<f64>, Option<f64>),
{
    let dir = seed_dir(cfg, seed);
    std::fs::create_dir_all(&dir).map_err(|e| crate::io_error(&dir, e))?;
    let config_toml = cfg.to_toml_string();
    write_file(&dir.join("config.toml"), &config_toml)?;

    let events_path = dir.join("events.jsonl");
    let latest_path = dir.join("checkpoint_latest.json");
    let mut metrics =
        MetricsBuilder::new(cfg.metrics_interval, cfg.method.uses_population());

    let (mut state, mut rng, mut events) = if opts.resume && latest_path.exists() {
        let ckpt: Checkpoint<TrainState<D>> =
            crate::artifacts::load_checkpoint(&latest_path, kind)?;
        if ckpt.config_toml != config_toml {
            return Err(CliError::Config(format!(
                "{}: checkpoint was written by a different config; refusing to resume",
                latest_path.display()
            )));
        }
        if ckpt.seed != seed {
            return Err(CliError::Config(format!(
                "{}: checkpoint seed {} does not match requested seed {seed}",
                latest_path.display(),
                ckpt.seed
            )));
        }
        // Drop any events past the snapshot, then replay the kept prefix
        // through the metrics builder so its window state is exactly what a
        // live run would hold here.
        truncate_log::<D::Payload>(&events_path, ckpt.state.iterations)?;
        let (_, kept) = read_log::<D::Payload>(&events_path)?;
        for e in &kept {
            let (wd, gs) = env_stats(e);
            metrics.feed(e, wd, gs);
        }
        let writer = EventWriter::append_to(&events_path)?;
        (ckpt.state, ckpt.rng, writer)
    } else {
        let mut rng = RngHandle::from_seed(seed);
        let student = fresh_student(&mut rng);
        let state = TrainState::new(domain, student, &cfg.curriculum)
            .map_err(|e| CliError::Config(e.to_string()))?;
        let header = LogHeader {
            version: EVENT_LOG_VERSION,
            kind: kind.into(),
            method: cfg.method.name().into(),
            seed,
            config_toml: config_toml.clone(),
        };
        let writer = EventWriter::create(&events_path, &header)?;
        (state, rng, writer)
    };

    let target_updates = opts.stop_after_updates.map_or(cfg.budget, |s| s.min(cfg.budget));
    // A buffered method trains on roughly a `replay_probability` fraction of
    // iterations; this cap only exists to turn a silently-stuck run into a
    // loud error.
    let iteration_cap = cfg.budget.saturating_mul(1000).max(100_000);
    let mut last_snapshot = state.updates;
    while state.updates < target_updates {
        if state.iterations >= iteration_cap {
            return Err(CliError::Data(format!(
                "run stalled: {} iterations produced only {} of {target_updates} updates",
                state.iterations, state.updates
            )));
        }
        let event = curriculum_step(domain, &mut state, &cfg.curriculum, &mut rng)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        events.append(&event)?;
        let (wd, gs) = env_stats(&event);
        metrics.feed(&event, wd, gs);

        if event.trained
            && state.updates % cfg.snapshot_interval == 0
            && state.updates != last_snapshot
        {
            events.flush()?;
            write_file(&dir.join("metrics.csv"), &metrics.csv())?;
            save_checkpoint(
                &latest_path,
                &Checkpoint {
                    version: CHECKPOINT_VERSION,
                    kind: kind.into(),
                    method: cfg.method.name().into(),
                    seed,
                    config_toml: config_toml.clone(),
                    state: &state,
                    rng: rng.clone(),
                },
            )?;
            last_snapshot = state.updates;
        }
    }

    events.flush()?;
    metrics.finish();
    write_file(&dir.join("metrics.csv"), &metrics.csv())?;
    let final_ckpt = Checkpoint {
        version: CHECKPOINT_VERSION,
        kind: kind.into(),
        method: cfg.method.name().into(),
        seed,
        config_toml: config_toml.clone(),
        state: &state,
        rng: rng.clone(),
    };
    save_checkpoint(&latest_path, &final_ckpt)?;
    save_checkpoint(&dir.join("checkpoint_final.json"), &final_ckpt)?;
    crate::artifacts::write_manifest(
        &dir,
        &[
            PathBuf::from("config.toml"),
            PathBuf::from("events.jsonl"),
            PathBuf::from("metrics.csv"),
            PathBuf::from("checkpoint_latest.json"),
            PathBuf::from("checkpoint_final.json"),
        ],
    )?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "trained {} seed {seed}: {} updates over {} episodes -> {}",
        cfg.method.name(),
        state.updates,
        state.episodes,
        dir.display()
    );
    Ok(())
}

/// Loads the student policy out of a finished tag-gridworld run (used by the
/// eval and landscape commands).
pub fn load_lasertag_policy(path: &Path) -> Result<(u64, PolicyParams), CliError> {
    let ckpt: LasertagCheckpoint = crate::artifacts::load_checkpoint(path, KIND_LASERTAG)?;
    Ok((ckpt.seed, ckpt.state.student.policy))
}

/// Loads a matrix-environment checkpoint (analysis paths).
pub fn load_matrix_checkpoint(path: &Path) -> Result<MatrixCheckpoint, CliError> {
    crate::artifacts::load_checkpoint(path, KIND_MATRIX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use maestro::curriculum::Branch;
    use maestro::regret::RegretEstimator;

    fn smoke_config(dir: &Path, method: &str, budget: u64) -> TrainConfig {
        let text = format!(
            r#"
version = 1
method = "{method}"
seeds = [1]
budget = {budget}
out_dir = "{}"
metrics_interval = 4
snapshot_interval = 5

[ppo]
epochs = 1
minibatches = 1

[curriculum]
buffer_capacity = 8
checkpoint_interval = 10
win_window = 16

[rollout]
max_steps = 24
hidden = 4
"#,
            dir.display()
        );
        TrainConfig::parse(&text).unwrap()
    }

    fn write_config(cfg: &TrainConfig, dir: &Path) -> PathBuf {
        let p = dir.join("cfg.toml");
        std::fs::write(&p, cfg.to_toml_string()).unwrap();
        p
    }

    #[test]
    fn smoke_run_emits_all_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let cfg = smoke_config(tmp.path(), "maestro", 12);
        let cfg_path = write_config(&cfg, tmp.path());
        cmd_train(&cfg_path, &TrainOptions::default()).unwrap();
        let dir = seed_dir(&cfg, 1);
        for f in
            ["config.toml", "events.jsonl", "metrics.csv", "checkpoint_latest.json", "checkpoint_final.json", "manifest.json"]
        {
            assert!(dir.join(f).exists(), "missing artifact {f}");
        }
        let (header, events) = read_log::<lasertag::LaserTagParams>(&dir.join("events.jsonl")).unwrap();
        assert_eq!(header.method, "maestro");
        let trained = events.iter().filter(|e| e.trained).count() as u64;
        assert_eq!(trained, 12, "run must stop exactly at the budget");
        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        assert!(metrics.starts_with(METRICS_CSV_HEADER));
        assert!(metrics.lines().count() > 1, "metrics must contain data rows");
    }

    #[test]
    fn interrupted_plus_resumed_equals_uninterrupted() {
        let tmp = tempfile::tempdir().unwrap();
        let full_dir = tmp.path().join("full");
        let split_dir = tmp.path().join("split");

        let mut cfg_full = smoke_config(tmp.path(), "maestro", 20);
        cfg_full.out_dir = full_dir.clone();
        let p_full = tmp.path().join("full.toml");
        std::fs::write(&p_full, cfg_full.to_toml_string()).unwrap();
        cmd_train(&p_full, &TrainOptions::default()).unwrap();

        let mut cfg_split = smoke_config(tmp.path(), "maestro", 20);
        cfg_split.out_dir = split_dir.clone();
        let p_split = tmp.path().join("split.toml");
        std::fs::write(&p_split, cfg_split.to_toml_string()).unwrap();
        cmd_train(
            &p_split,
            &TrainOptions { stop_after_updates: Some(10), ..TrainOptions::default() },
        )
        .unwrap();
        cmd_train(&p_split, &TrainOptions { resume: true, ..TrainOptions::default() })
            .unwrap();

        for f in ["events.jsonl", "metrics.csv", "checkpoint_final.json", "manifest.json"] {
            let a = std::fs::read(seed_dir(&cfg_full, 1).join(f)).unwrap();
            let b = std::fs::read(seed_dir(&cfg_split, 1).join(f)).unwrap();
            // config.toml differs (out_dir), so events may not: strip the
            // header line which embeds the config.
            if f == "events.jsonl" {
                let a = String::from_utf8(a).unwrap();
                let b = String::from_utf8(b).unwrap();
                let a_events: Vec<&str> = a.lines().skip(1).collect();
                let b_events: Vec<&str> = b.lines().skip(1).collect();
                assert_eq!(a_events, b_events, "resumed event stream diverged");
            } else if f == "metrics.csv" {
                assert_eq!(a, b, "resumed metrics diverged");
            }
            // checkpoint/manifest embed config_toml (out_dir differs); the
            // state must still agree.
        }
        let a: LasertagCheckpoint =
            crate::artifacts::load_checkpoint(&seed_dir(&cfg_full, 1).join("checkpoint_final.json"), KIND_LASERTAG)
                .unwrap();
        let b: LasertagCheckpoint =
            crate::artifacts::load_checkpoint(&seed_dir(&cfg_split, 1).join("checkpoint_final.json"), KIND_LASERTAG)
                .unwrap();
        assert_eq!(
            serde_json::to_string(&a.state).unwrap(),
            serde_json::to_string(&b.state).unwrap(),
            "resumed final state diverged"
        );
        assert_eq!(serde_json::to_string(&a.rng).unwrap(), serde_json::to_string(&b.rng).unwrap());
    }

    #[test]
    fn identical_configs_reproduce_identical_artifacts() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = smoke_config(tmp.path(), "plr-fsp", 10);
        cfg.deterministic = true;
        let cfg_path = write_config(&cfg, tmp.path());
        cmd_train(&cfg_path, &TrainOptions::default()).unwrap();
        let dir = seed_dir(&cfg, 1);
        let first: Vec<Vec<u8>> =
            ["events.jsonl", "metrics.csv", "checkpoint_final.json", "manifest.json"]
                .iter()
                .map(|f| std::fs::read(dir.join(f)).unwrap())
                .collect();
        cmd_train(&cfg_path, &TrainOptions::default()).unwrap();
        let second: Vec<Vec<u8>> =
            ["events.jsonl", "metrics.csv", "checkpoint_final.json", "manifest.json"]
                .iter()
                .map(|f| std::fs::read(dir.join(f)).unwrap())
                .collect();
        assert_eq!(first, second, "deterministic re-run must be bit-identical");
    }

    #[test]
    fn matrix_runs_train_and_checkpoint() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = smoke_config(tmp.path(), "maestro", 15);
        cfg.environment = EnvKind::Matrix { rows: 3, cols: 3 };
        let cfg_path = write_config(&cfg, tmp.path());
        cmd_train(&cfg_path, &TrainOptions::default()).unwrap();
        let dir = seed_dir(&cfg, 1);
        let ckpt = load_matrix_checkpoint(&dir.join("checkpoint_final.json")).unwrap();
        assert_eq!(ckpt.state.updates, 15);
        let (_, events) =
            read_log::<maestro::matrix::ZeroSumGame>(&dir.join("events.jsonl")).unwrap();
        assert!(events.iter().all(|e| e.estimator == RegretEstimator::Exact));
        assert!(events.iter().any(|e| e.branch == Branch::Replay));
        // Matrix metrics leave the gridworld descriptor columns empty.
        let metrics = std::fs::read_to_string(dir.join("metrics.csv")).unwrap();
        let row = metrics.lines().nth(1).unwrap();
        assert!(row.ends_with(",,"), "matrix rows must leave wall/grid columns empty: {row}");
    }

    #[test]
    fn metrics_builder_window_math() {
        let mut b = MetricsBuilder::new(2, true);
        let env = lasertag::generate(1);
        let mk = |iteration: u64, trained: bool, score: f64| StepEvent {
            iteration,
            branch: if trained { Branch::Replay } else { Branch::Eval },
            coplayer_id: 0,
            member_index: Some(0),
            env: env.clone(),
            env_hash: env.content_hash(),
            score,
            estimator: RegretEstimator::MaxMc,
            trained,
            episode_return: 0.0,
            raw_return: 0.0,
            steps: 1,
            checkpointed: false,
            buffer_sizes: vec![2, 1],
        };
        b.feed(&mk(0, true, 1.0), Some(0.25), Some(7.0));
        b.feed(&mk(1, false, 3.0), None, None);
        assert_eq!(b.rows.len(), 1);
        // update=1, episodes=2, branch_fraction=0.5, mean_score=2, buffers=3,
        // population=1, wall=0.25, grid=7.
        assert_eq!(b.rows[0], "1,2,0.5,2,3,1,0.25,7");
        b.feed(&mk(2, false, 5.0), None, None);
        b.finish();
        assert_eq!(b.rows[1], "1,3,0,5,3,1,,");
    }
}
