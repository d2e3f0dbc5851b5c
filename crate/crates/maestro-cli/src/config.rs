//! Versioned TOML experiment configuration.
//!
//! Every hyperparameter has a default (the tag-gridworld training values);
//! every default is overridable; unknown keys are hard errors so typos in
//! hyperparameter names cannot silently fall back to defaults. A resolved
//! config serializes back to a complete TOML document that parses to itself.

use crate::CliError;
use maestro::curriculum::{CurriculumConfig, LaserTagDomain, MatrixDomain, Method};
use maestro::lasertag;
use maestro::learner::PpoConfig;
use maestro::regret::RegretEstimator;
use maestro::uposg::GaeConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CONFIG_VERSION: u32 = 1;

/// Which environment family a run trains on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvKind {
    Lasertag,
    Matrix { rows: usize, cols: usize },
}

impl EnvKind {
    pub fn parse(s: &str) -> Result<EnvKind, CliError> {
        if s == "lasertag" {
            return Ok(EnvKind::Lasertag);
        }
        if let Some(shape) = s.strip_prefix("matrix:") {
            let dims: Vec<&str> = shape.split('x').collect();
            if dims.len() == 2 {
                if let (Ok(r), Ok(c)) = (dims[0].parse::<usize>(), dims[1].parse::<usize>()) {
                    if r >= 2 && c >= 2 && r <= 64 && c <= 64 {
                        return Ok(EnvKind::Matrix { rows: r, cols: c });
                    }
                    return Err(CliError::Config(format!(
                        "environment: matrix shape {r}x{c} outside 2..=64"
                    )));
                }
            }
            return Err(CliError::Config(format!(
                "environment: malformed matrix shape {shape:?} (expected e.g. \"matrix:3x3\")"
            )));
        }
        Err(CliError::Config(format!(
            "environment: unknown value {s:?} (expected \"lasertag\" or \"matrix:<rows>x<cols>\")"
        )))
    }

    pub fn render(&self) -> String {
        match self {
            EnvKind::Lasertag => "lasertag".into(),
            EnvKind::Matrix { rows, cols } => format!("matrix:{rows}x{cols}"),
        }
    }
}

/// Accepts the canonical method names plus the short ablation aliases
/// `maestro-r` (uniform co-player) and `maestro-p` (outcome-prioritized).
pub fn parse_method(s: &str) -> Result<Method, CliError> {
    let canonical = match s {
        "maestro-r" => "maestro-uniform",
        "maestro-p" => "maestro-pfsp",
        other => other,
    };
    Method::parse(canonical).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        CliError::Config(format!("method: unknown name {s:?} (expected one of {names:?})"))
    })
}

pub fn parse_estimator(s: &str) -> Result<RegretEstimator, CliError> {
    match s {
        "max_mc" => Ok(RegretEstimator::MaxMc),
        "pvl" => Ok(RegretEstimator::Pvl),
        other => Err(CliError::Config(format!(
            "estimator: unknown value {other:?} (expected \"max_mc\" or \"pvl\")"
        ))),
    }
}

fn render_estimator(e: RegretEstimator) -> &'static str {
    match e {
        RegretEstimator::MaxMc => "max_mc",
        RegretEstimator::Pvl => "pvl",
        RegretEstimator::Exact => "exact",
    }
}

// ---------------------------------------------------------------------------
// Raw file form: every field optional except the identity of the run.
// ---------------------------------------------------------------------------

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PpoFile {
    learning_rate: Option<f64>,
    clip_range: Option<f64>,
    value_loss_coef: Option<f64>,
    entropy_coef: Option<f64>,
    max_grad_norm: Option<f64>,
    epochs: Option<usize>,
    minibatches: Option<usize>,
    normalize_advantages: Option<bool>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GaeFile {
    gamma: Option<f64>,
    lambda: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CurriculumFile {
    replay_probability: Option<f64>,
    buffer_capacity: Option<usize>,
    score_beta: Option<f64>,
    staleness_coef: Option<f64>,
    mixing_lambda: Option<f64>,
    checkpoint_interval: Option<u64>,
    pfsp_power: Option<f64>,
    pfsp_smoothing: Option<f64>,
    win_window: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RolloutFile {
    max_steps: Option<usize>,
    estimator: Option<String>,
    hidden: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    version: u32,
    method: String,
    #[serde(default)]
    environment: Option<String>,
    seeds: Vec<u64>,
    budget: u64,
    out_dir: PathBuf,
    #[serde(default)]
    workers: Option<usize>,
    #[serde(default)]
    deterministic: Option<bool>,
    #[serde(default)]
    snapshot_interval: Option<u64>,
    #[serde(default)]
    metrics_interval: Option<u64>,
    #[serde(default)]
    ppo: Option<PpoFile>,
    #[serde(default)]
    gae: Option<GaeFile>,
    #[serde(default)]
    curriculum: Option<CurriculumFile>,
    #[serde(default)]
    rollout: Option<RolloutFile>,
}

// ---------------------------------------------------------------------------
// Resolved form.
// ---------------------------------------------------------------------------

/// A fully resolved training configuration: every field concrete.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub method: Method,
    pub environment: EnvKind,
    pub seeds: Vec<u64>,
    /// Student updates per seed.
    pub budget: u64,
    pub out_dir: PathBuf,
    /// Worker threads for parallel sections (0 = library default).
    pub workers: usize,
    pub deterministic: bool,
    /// Updates between on-disk resume checkpoints.
    pub snapshot_interval: u64,
    /// Iterations between metrics CSV rows.
    pub metrics_interval: u64,
    pub ppo: PpoConfig,
    pub curriculum: CurriculumConfig,
    pub estimator: RegretEstimator,
    pub max_steps: usize,
    /// Hidden width of the student network.
    pub hidden: usize,
}

impl TrainConfig {
    pub fn parse(text: &str) -> Result<TrainConfig, CliError> {
        let file: TrainFile =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        if file.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "version: config schema {} unsupported (this build reads {CONFIG_VERSION})",
                file.version
            )));
        }
        let method = parse_method(&file.method)?;
        let environment = EnvKind::parse(file.environment.as_deref().unwrap_or("lasertag"))?;
        if file.seeds.is_empty() {
            return Err(CliError::Config("seeds: must list at least one seed".into()));
        }
        {
            let mut sorted = file.seeds.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != file.seeds.len() {
                return Err(CliError::Config("seeds: duplicate entries".into()));
            }
        }
        if file.budget == 0 {
            return Err(CliError::Config("budget: must be at least 1 update".into()));
        }
        if matches!(environment, EnvKind::Matrix { .. }) && !method.uses_population() {
            return Err(CliError::Config(format!(
                "method: {} uses self-play, which the matrix environment does not define",
                method.name()
            )));
        }

        let mut ppo = PpoConfig::lasertag_default();
        if let Some(p) = &file.ppo {
            if let Some(v) = p.learning_rate {
                ppo.learning_rate = v;
            }
            if let Some(v) = p.clip_range {
                ppo.clip_range = v;
            }
            if let Some(v) = p.value_loss_coef {
                ppo.value_loss_coef = v;
            }
            if let Some(v) = p.entropy_coef {
                ppo.entropy_coef = v;
            }
            if let Some(v) = p.max_grad_norm {
                ppo.max_grad_norm = v;
            }
            if let Some(v) = p.epochs {
                ppo.epochs = v;
            }
            if let Some(v) = p.minibatches {
                ppo.minibatches = v;
            }
            if let Some(v) = p.normalize_advantages {
                ppo.normalize_advantages = v;
            }
        }
        let g = file.gae.unwrap_or_default();
        ppo.gae = GaeConfig::new(
            g.gamma.unwrap_or(ppo.gae.gamma()),
            g.lambda.unwrap_or(ppo.gae.lambda()),
        )
        .map_err(|e| CliError::Config(format!("gae: {e}")))?;
        if ppo.epochs == 0 || ppo.minibatches == 0 {
            return Err(CliError::Config("ppo: epochs and minibatches must be at least 1".into()));
        }

        let mut curriculum = CurriculumConfig::lasertag_default(method);
        if let Some(c) = &file.curriculum {
            if let Some(v) = c.replay_probability {
                curriculum.replay_probability = v;
            }
            if let Some(v) = c.buffer_capacity {
                curriculum.buffer_capacity = v;
            }
            if let Some(v) = c.score_beta {
                curriculum.score_beta = v;
            }
            if let Some(v) = c.staleness_coef {
                curriculum.staleness_coef = v;
            }
            if let Some(v) = c.mixing_lambda {
                curriculum.mixing_lambda = v;
            }
            if let Some(v) = c.checkpoint_interval {
                curriculum.checkpoint_interval = v;
            }
            if let Some(v) = c.pfsp_power {
                curriculum.pfsp_power = v;
            }
            if let Some(v) = c.pfsp_smoothing {
                curriculum.pfsp_smoothing = v;
            }
            if let Some(v) = c.win_window {
                curriculum.win_window = v;
            }
        }
        curriculum.validate().map_err(|e| CliError::Config(format!("curriculum: {e}")))?;
        if !matches!(method.env_strategy(), maestro::curriculum::EnvStrategy::DomainRandomization)
            && curriculum.replay_probability == 0.0
        {
            return Err(CliError::Config(
                "curriculum: replay_probability 0 means a buffered method never trains".into(),
            ));
        }

        let r = file.rollout.unwrap_or_default();
        let estimator = match &r.estimator {
            Some(s) => parse_estimator(s)?,
            None => RegretEstimator::MaxMc,
        };
        let max_steps = r.max_steps.unwrap_or(lasertag::DEFAULT_MAX_STEPS);
        if max_steps == 0 {
            return Err(CliError::Config("rollout: max_steps must be at least 1".into()));
        }
        let hidden = r.hidden.unwrap_or(32);
        if hidden == 0 {
            return Err(CliError::Config("rollout: hidden must be at least 1".into()));
        }

        Ok(TrainConfig {
            method,
            environment,
            seeds: file.seeds,
            budget: file.budget,
            out_dir: file.out_dir,
            workers: file.workers.unwrap_or(0),
            deterministic: file.deterministic.unwrap_or(false),
            snapshot_interval: file.snapshot_interval.unwrap_or(500).max(1),
            metrics_interval: file.metrics_interval.unwrap_or(50).max(1),
            ppo,
            curriculum,
            estimator,
            max_steps,
            hidden,
        })
    }

    pub fn load(path: &Path) -> Result<TrainConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
        TrainConfig::parse(&text)
    }

    /// Serializes the resolved config as a complete TOML document; parsing it
    /// back yields an identical config.
    pub fn to_toml_string(&self) -> String {
        let file = TrainFile {
            version: CONFIG_VERSION,
            method: self.method.name().into(),
            environment: Some(self.environment.render()),
            seeds: self.seeds.clone(),
            budget: self.budget,
            out_dir: self.out_dir.clone(),
            workers: Some(self.workers),
            deterministic: Some(self.deterministic),
            snapshot_interval: Some(self.snapshot_interval),
            metrics_interval: Some(self.metrics_interval),
            ppo: Some(PpoFile {
                learning_rate: Some(self.ppo.learning_rate),
                clip_range: Some(self.ppo.clip_range),
                value_loss_coef: Some(self.ppo.value_loss_coef),
                entropy_coef: Some(self.ppo.entropy_coef),
                max_grad_norm: Some(self.ppo.max_grad_norm),
                epochs: Some(self.ppo.epochs),
                minibatches: Some(self.ppo.minibatches),
                normalize_advantages: Some(self.ppo.normalize_advantages),
            }),
            gae: Some(GaeFile {
                gamma: Some(self.ppo.gae.gamma()),
                lambda: Some(self.ppo.gae.lambda()),
            }),
            curriculum: Some(CurriculumFile {
                replay_probability: Some(self.curriculum.replay_probability),
                buffer_capacity: Some(self.curriculum.buffer_capacity),
                score_beta: Some(self.curriculum.score_beta),
                staleness_coef: Some(self.curriculum.staleness_coef),
                mixing_lambda: Some(self.curriculum.mixing_lambda),
                checkpoint_interval: Some(self.curriculum.checkpoint_interval),
                pfsp_power: Some(self.curriculum.pfsp_power),
                pfsp_smoothing: Some(self.curriculum.pfsp_smoothing),
                win_window: Some(self.curriculum.win_window),
            }),
            rollout: Some(RolloutFile {
                max_steps: Some(self.max_steps),
                estimator: Some(render_estimator(self.estimator).into()),
                hidden: Some(self.hidden),
            }),
        };
        toml::to_string_pretty(&file).expect("resolved config always serializes")
    }

    pub fn lasertag_domain(&self) -> LaserTagDomain {
        LaserTagDomain {
            ppo: self.ppo.clone(),
            estimator: self.estimator,
            max_steps: self.max_steps,
        }
    }

    pub fn matrix_domain(&self) -> Option<MatrixDomain> {
        match self.environment {
            EnvKind::Matrix { rows, cols } => Some(MatrixDomain::new(rows, cols)),
            EnvKind::Lasertag => None,
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation config.
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntrantFile {
    method: String,
    checkpoints: Vec<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecialistFile {
    training_budget: u64,
    #[serde(default)]
    eval_episodes: Option<usize>,
    #[serde(default)]
    hidden: Option<usize>,
    #[serde(default)]
    base_seed: Option<u64>,
    /// Entrant label whose policies act as the generalist.
    generalist: String,
    #[serde(default)]
    levels: Option<Vec<String>>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalFile {
    version: u32,
    out_dir: PathBuf,
    levels: Vec<String>,
    #[serde(default)]
    episodes_per_pair: Option<usize>,
    #[serde(default)]
    base_seed: Option<u64>,
    #[serde(default)]
    max_steps: Option<usize>,
    #[serde(default)]
    workers: Option<usize>,
    entrants: Vec<EntrantFile>,
    #[serde(default)]
    specialist: Option<SpecialistFile>,
}

#[derive(Clone, Debug)]
pub struct EvalEntrant {
    pub method: String,
    pub checkpoints: Vec<PathBuf>,
}

#[derive(Clone, Debug)]
pub struct SpecialistSection {
    pub training_budget: u64,
    pub eval_episodes: usize,
    pub hidden: usize,
    pub base_seed: u64,
    pub generalist: String,
    pub levels: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct EvalConfig {
    pub out_dir: PathBuf,
    /// Held-out level names ("all" expands to the full bundled set).
    pub levels: Vec<String>,
    pub episodes_per_pair: usize,
    pub base_seed: u64,
    pub max_steps: usize,
    pub workers: usize,
    pub entrants: Vec<EvalEntrant>,
    pub specialist: Option<SpecialistSection>,
}

/// Expands level names against the bundled held-out set.
pub fn resolve_levels(
    names: &[String],
) -> Result<Vec<(String, maestro::uposg::EnvParams<lasertag::LaserTagParams>)>, CliError> {
    let bundled = lasertag::held_out_levels();
    if names.is_empty() {
        return Err(CliError::Config("levels: empty level list".into()));
    }
    if names.len() == 1 && names[0] == "all" {
        return Ok(bundled.into_iter().map(|(n, p)| (n.to_string(), p)).collect());
    }
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        match bundled.iter().find(|(n, _)| n == name) {
            Some((n, p)) => out.push((n.to_string(), p.clone())),
            None => {
                let known: Vec<&str> = bundled.iter().map(|(n, _)| *n).collect();
                return Err(CliError::Config(format!(
                    "levels: unknown level {name:?} (bundled levels: {known:?})"
                )));
            }
        }
    }
    Ok(out)
}

impl EvalConfig {
    pub fn parse(text: &str) -> Result<EvalConfig, CliError> {
        let file: EvalFile =
            toml::from_str(text).map_err(|e| CliError::Config(format!("config parse: {e}")))?;
        if file.version != CONFIG_VERSION {
            return Err(CliError::Config(format!(
                "version: config schema {} unsupported (this build reads {CONFIG_VERSION})",
                file.version
            )));
        }
        if file.levels.is_empty() {
            return Err(CliError::Config("levels: empty level list".into()));
        }
        if file.entrants.len() < 2 {
            return Err(CliError::Config(format!(
                "entrants: round-robin needs at least 2 methods, got {}",
                file.entrants.len()
            )));
        }
        for e in &file.entrants {
            if e.checkpoints.is_empty() {
                return Err(CliError::Config(format!(
                    "entrants: method {} lists no checkpoints",
                    e.method
                )));
            }
        }
        let episodes_per_pair = file.episodes_per_pair.unwrap_or(5);
        if episodes_per_pair == 0 {
            return Err(CliError::Config("episodes_per_pair: must be at least 1".into()));
        }
        let specialist = match file.specialist {
            None => None,
            Some(s) => {
                if !file.entrants.iter().any(|e| e.method == s.generalist) {
                    return Err(CliError::Config(format!(
                        "specialist.generalist: {:?} is not an entrant",
                        s.generalist
                    )));
                }
                Some(SpecialistSection {
                    training_budget: s.training_budget,
                    eval_episodes: s.eval_episodes.unwrap_or(5),
                    hidden: s.hidden.unwrap_or(32),
                    base_seed: s.base_seed.unwrap_or(0),
                    generalist: s.generalist,
                    levels: s.levels.unwrap_or_else(|| file.levels.clone()),
                })
            }
        };
        Ok(EvalConfig {
            out_dir: file.out_dir,
            levels: file.levels,
            episodes_per_pair,
            base_seed: file.base_seed.unwrap_or(0),
            max_steps: file.max_steps.unwrap_or(lasertag::DEFAULT_MAX_STEPS),
            workers: file.workers.unwrap_or(0),
            entrants: file
                .entrants
                .into_iter()
                .map(|e| EvalEntrant { method: e.method, checkpoints: e.checkpoints })
                .collect(),
            specialist,
        })
    }

    pub fn load(path: &Path) -> Result<EvalConfig, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
        EvalConfig::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
version = 1
method = "maestro"
seeds = [1, 2]
budget = 100
out_dir = "runs/demo"
"#;

    #[test]
    fn minimal_config_gets_training_defaults() {
        let cfg = TrainConfig::parse(MINIMAL).unwrap();
        assert_eq!(cfg.method, Method::Maestro);
        assert_eq!(cfg.environment, EnvKind::Lasertag);
        assert_eq!(cfg.ppo.learning_rate, 1e-4);
        assert_eq!(cfg.ppo.clip_range, 0.2);
        assert_eq!(cfg.ppo.epochs, 5);
        assert_eq!(cfg.ppo.minibatches, 4);
        assert_eq!(cfg.ppo.gae.gamma(), 0.995);
        assert_eq!(cfg.ppo.gae.lambda(), 0.95);
        assert_eq!(cfg.curriculum.replay_probability, 0.5);
        assert_eq!(cfg.curriculum.buffer_capacity, 1000);
        assert_eq!(cfg.curriculum.score_beta, 0.3);
        assert_eq!(cfg.curriculum.staleness_coef, 0.3);
        assert_eq!(cfg.curriculum.mixing_lambda, 0.1);
        assert_eq!(cfg.curriculum.checkpoint_interval, 8000);
        assert_eq!(cfg.estimator, RegretEstimator::MaxMc);
        assert_eq!(cfg.max_steps, 256);
    }

    #[test]
    fn every_default_is_overridable_and_round_trips() {
        let text = r#"
version = 1
method = "plr-pfsp"
environment = "lasertag"
seeds = [7]
budget = 42
out_dir = "elsewhere"
workers = 2
deterministic = true
snapshot_interval = 11
metrics_interval = 3

[ppo]
learning_rate = 0.003
clip_range = 0.1
value_loss_coef = 0.7
entropy_coef = 0.01
max_grad_norm = 1.5
epochs = 2
minibatches = 8
normalize_advantages = false

[gae]
gamma = 0.9
lambda = 0.8

[curriculum]
replay_probability = 0.25
buffer_capacity = 64
score_beta = 0.5
staleness_coef = 0.2
mixing_lambda = 0.3
checkpoint_interval = 17
pfsp_power = 3.0
pfsp_smoothing = 0.2
win_window = 99

[rollout]
max_steps = 60
estimator = "pvl"
hidden = 8
"#;
        let cfg = TrainConfig::parse(text).unwrap();
        assert_eq!(cfg.ppo.learning_rate, 0.003);
        assert_eq!(cfg.ppo.gae.gamma(), 0.9);
        assert_eq!(cfg.curriculum.win_window, 99);
        assert_eq!(cfg.estimator, RegretEstimator::Pvl);
        assert_eq!(cfg.hidden, 8);
        assert!(cfg.deterministic);
        let round = TrainConfig::parse(&cfg.to_toml_string()).unwrap();
        assert_eq!(round, cfg);
    }

    #[test]
    fn unknown_keys_and_names_are_named_in_errors() {
        let bad_method = MINIMAL.replace("\"maestro\"", "\"fancy\"");
        let err = TrainConfig::parse(&bad_method).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
        assert!(err.to_string().contains("method"), "error must name the field: {err}");
        assert_eq!(err.exit_code(), 2);

        let typo = format!("{MINIMAL}\n[ppo]\nlering_rate = 0.1\n");
        let err = TrainConfig::parse(&typo).unwrap_err();
        assert!(err.to_string().contains("lering_rate"), "unknown key must be fatal: {err}");

        let err = TrainConfig::parse(&MINIMAL.replace("version = 1", "version = 9")).unwrap_err();
        assert!(err.to_string().contains("version"));
    }

    #[test]
    fn method_aliases_resolve_to_the_ablations() {
        assert_eq!(parse_method("maestro-r").unwrap(), Method::MaestroUniform);
        assert_eq!(parse_method("maestro-p").unwrap(), Method::MaestroPfsp);
        assert_eq!(parse_method("dr-fsp").unwrap(), Method::DrFsp);
    }

    #[test]
    fn matrix_environment_parses_and_rejects_self_play() {
        let cfg = TrainConfig::parse(&MINIMAL.replace(
            "seeds = [1, 2]",
            "environment = \"matrix:3x3\"\nseeds = [1, 2]",
        ))
        .unwrap();
        assert_eq!(cfg.environment, EnvKind::Matrix { rows: 3, cols: 3 });
        assert!(cfg.matrix_domain().is_some());

        let sp = MINIMAL
            .replace("\"maestro\"", "\"dr-sp\"")
            .replace("seeds = [1, 2]", "environment = \"matrix:3x3\"\nseeds = [1]");
        let err = TrainConfig::parse(&sp).unwrap_err();
        assert!(err.to_string().contains("self-play"));

        assert!(EnvKind::parse("matrix:3x").is_err());
        assert!(EnvKind::parse("matrix:1x3").is_err());
        assert!(EnvKind::parse("gridworld").is_err());
    }

    #[test]
    fn degenerate_run_shapes_are_rejected() {
        assert!(TrainConfig::parse(&MINIMAL.replace("seeds = [1, 2]", "seeds = []")).is_err());
        assert!(TrainConfig::parse(&MINIMAL.replace("seeds = [1, 2]", "seeds = [1, 1]")).is_err());
        assert!(TrainConfig::parse(&MINIMAL.replace("budget = 100", "budget = 0")).is_err());
        let no_replay = format!("{MINIMAL}\n[curriculum]\nreplay_probability = 0.0\n");
        let err = TrainConfig::parse(&no_replay).unwrap_err();
        assert!(err.to_string().contains("never trains"));
    }

    #[test]
    fn eval_config_parses_and_validates() {
        let text = r#"
version = 1
out_dir = "eval_out"
levels = ["Ruins", "Star"]
episodes_per_pair = 3
base_seed = 5

[[entrants]]
method = "maestro"
checkpoints = ["a.json"]

[[entrants]]
method = "dr-sp"
checkpoints = ["b.json"]

[specialist]
training_budget = 10
generalist = "maestro"
"#;
        let cfg = EvalConfig::parse(text).unwrap();
        assert_eq!(cfg.levels, vec!["Ruins", "Star"]);
        assert_eq!(cfg.entrants.len(), 2);
        let sp = cfg.specialist.unwrap();
        assert_eq!(sp.generalist, "maestro");
        assert_eq!(sp.levels, vec!["Ruins", "Star"]);

        let empty = text.replace("levels = [\"Ruins\", \"Star\"]", "levels = []");
        assert!(matches!(EvalConfig::parse(&empty), Err(CliError::Config(_))));
        let lone = text.replace(
            "[[entrants]]\nmethod = \"dr-sp\"\ncheckpoints = [\"b.json\"]\n\n",
            "",
        );
        assert!(EvalConfig::parse(&lone).is_err());
        let bad_gen = text.replace("generalist = \"maestro\"", "generalist = \"nobody\"");
        assert!(EvalConfig::parse(&bad_gen).unwrap_err().to_string().contains("generalist"));
    }

    #[test]
    fn level_names_resolve_against_the_bundled_set() {
        let all = resolve_levels(&["all".to_string()]).unwrap();
        assert_eq!(all.len(), lasertag::HELD_OUT_LEVEL_NAMES.len());
        let two = resolve_levels(&["Ruins".to_string(), "Star".to_string()]).unwrap();
        assert_eq!(two.len(), 2);
        assert_eq!(two[0].0, "Ruins");
        let err = resolve_levels(&["atlantis".to_string()]).unwrap_err();
        assert!(err.to_string().contains("atlantis"));
        assert!(resolve_levels(&[]).is_err());
    }
}
