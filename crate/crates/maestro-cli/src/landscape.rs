//! The `landscape` command: probes a trained checkpoint's regret surface over
//! its frozen co-player population and freshly sampled environments, printing
//! the same co-player x environment table the selection fixture uses.

use crate::artifacts::{LasertagCheckpoint, KIND_LASERTAG};
use crate::config::{parse_estimator, TrainConfig};
use crate::CliError;
use maestro::evaluation::{regret_landscape, EvalError};
use maestro::learner::PolicyParams;
use maestro::matrix::RegretMatrix;
use maestro::rng::RngHandle;
use std::io::Write as _;
use std::path::Path;

pub struct LandscapeArgs<'a> {
    pub checkpoint: &'a Path,
    pub envs: usize,
    pub estimator: &'a str,
    pub seed: u64,
    pub out: Option<&'a Path>,
}

pub fn cmd_landscape(args: &LandscapeArgs<'_>) -> Result<(), CliError> {
    let ckpt: LasertagCheckpoint =
        crate::artifacts::load_checkpoint(args.checkpoint, KIND_LASERTAG)?;
    let estimator = parse_estimator(args.estimator)?;
    // The checkpoint embeds the resolved training config; reuse its advantage
    // discounting and horizon so probe scores are commensurate with the
    // scores the buffer was built from.
    let train_cfg = TrainConfig::parse(&ckpt.config_toml)?;
    let population: Vec<(u32, PolicyParams)> = ckpt
        .state
        .population
        .members()
        .iter()
        .map(|m| (m.checkpoint_id, m.policy.clone()))
        .collect();
    if population.is_empty() {
        return Err(CliError::Config(format!(
            "{}: the {} run keeps no frozen population (self-play trains against the live \
             student), so there is no co-player axis to chart",
            args.checkpoint.display(),
            ckpt.method
        )));
    }
    let mut rng = RngHandle::from_seed(args.seed);
    let matrix = regret_landscape(
        &ckpt.state.student.policy,
        &population,
        args.envs,
        estimator,
        &train_cfg.ppo.gae,
        train_cfg.max_steps,
        &mut rng,
    )
    .map_err(|e| match e {
        EvalError::Parameter(m) | EvalError::Config(m) => CliError::Config(m),
        other => CliError::Internal(other.to_string()),
    })?;
    let text = matrix.to_text();
    if let Some(out) = args.out {
        std::fs::write(out, &text).map_err(|e| crate::io_error(out, e))?;
    }
    print_landscape(&matrix, &text, args.out.is_none());
    Ok(())
}

fn print_landscape(matrix: &RegretMatrix, text: &str, include_table: bool) {
    let (ji, jj, jv) = matrix.joint_argmax();
    let (ii, ij, iv) = matrix.independent_argmax();
    let mut out = std::io::stdout().lock();
    if include_table {
        let _ = out.write_all(text.as_bytes());
    }
    let _ = writeln!(
        out,
        "joint selection:       ({}, {}) regret {:.6}",
        matrix.co_players[ji], matrix.environments[jj], jv
    );
    let _ = writeln!(
        out,
        "independent selection: ({}, {}) regret {:.6}",
        matrix.co_players[ii], matrix.environments[ij], iv
    );
    let gap = jv - iv;
    let _ = writeln!(
        out,
        "joint - independent gap: {gap:.6}{}",
        if gap > 0.0 { " (joint curation finds strictly higher regret here)" } else { "" }
    );
}
