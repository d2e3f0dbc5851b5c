//! Append-only JSONL event log: one header line carrying the resolved run
//! config, then one line per curriculum iteration. The log is the run's audit
//! trail — buffers and metrics can be reconstructed from it exactly — and the
//! resume path truncates it back to the checkpointed iteration so a resumed
//! run's log is indistinguishable from an uninterrupted one.

use crate::CliError;
use maestro::curriculum::StepEvent;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

pub const EVENT_LOG_VERSION: u32 = 1;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogHeader {
    pub version: u32,
    /// `"lasertag"` or `"matrix"`.
    pub kind: String,
    pub method: String,
    pub seed: u64,
    /// Resolved config of the run that wrote this log.
    pub config_toml: String,
}

pub struct EventWriter {
    out: BufWriter<File>,
}

impl EventWriter {
    /// Creates (truncating) and writes the header line.
    pub fn create(path: &Path, header: &LogHeader) -> Result<EventWriter, CliError> {
        let file = File::create(path).map_err(|e| crate::io_error(path, e))?;
        let mut w = EventWriter { out: BufWriter::new(file) };
        let line = serde_json::to_string(header).map_err(CliError::internal)?;
        writeln!(w.out, "{line}").map_err(CliError::internal)?;
        Ok(w)
    }

    /// Opens an existing log for appending (header must already be present).
    pub fn append_to(path: &Path) -> Result<EventWriter, CliError> {
        let file =
            OpenOptions::new().append(true).open(path).map_err(|e| crate::io_error(path, e))?;
        Ok(EventWriter { out: BufWriter::new(file) })
    }

    pub fn append<P: Serialize>(&mut self, event: &StepEvent<P>) -> Result<(), CliError> {
        let line = serde_json::to_string(event).map_err(CliError::internal)?;
        writeln!(self.out, "{line}").map_err(CliError::internal)?;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<(), CliError> {
        self.out.flush().map_err(CliError::internal)
    }
}

/// Reads the whole log. Malformed header or event lines are data errors;
/// blank trailing lines are tolerated.
pub fn read_log<P: DeserializeOwned>(
    path: &Path,
) -> Result<(LogHeader, Vec<StepEvent<P>>), CliError> {
    let file = File::open(path).map_err(|e| crate::io_error(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header_line = match lines.next() {
        Some(l) => l.map_err(CliError::internal)?,
        None => return Err(CliError::Data(format!("{}: empty event log", path.display()))),
    };
    let header: LogHeader = serde_json::from_str(&header_line)
        .map_err(|e| CliError::Data(format!("{}: bad log header: {e}", path.display())))?;
    if header.version != EVENT_LOG_VERSION {
        return Err(CliError::Data(format!(
            "{}: log version {} unsupported (this build reads {EVENT_LOG_VERSION})",
            path.display(),
            header.version
        )));
    }
    let mut events = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(CliError::internal)?;
        if line.trim().is_empty() {
            continue;
        }
        let event: StepEvent<P> = serde_json::from_str(&line).map_err(|e| {
            CliError::Data(format!("{}: bad event on line {}: {e}", path.display(), i + 2))
        })?;
        events.push(event);
    }
    Ok((header, events))
}

/// Rewrites the log keeping the header and only events with
/// `iteration < keep_iterations` — the resume invariant (the checkpoint's
/// iteration counter equals the number of events that should precede it).
pub fn truncate_log<P: Serialize + DeserializeOwned>(
    path: &Path,
    keep_iterations: u64,
) -> Result<usize, CliError> {
    let (header, events) = read_log::<P>(path)?;
    let kept: Vec<&StepEvent<P>> =
        events.iter().filter(|e| e.iteration < keep_iterations).collect();
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| crate::io_error(&tmp, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", serde_json::to_string(&header).map_err(CliError::internal)?)
            .map_err(CliError::internal)?;
        for e in &kept {
            writeln!(out, "{}", serde_json::to_string(e).map_err(CliError::internal)?)
                .map_err(CliError::internal)?;
        }
        out.flush().map_err(CliError::internal)?;
    }
    std::fs::rename(&tmp, path).map_err(|e| crate::io_error(path, e))?;
    Ok(kept.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use maestro::curriculum::Branch;
    use maestro::lasertag::{generate, LaserTagParams};
    use maestro::regret::RegretEstimator;

    fn header() -> LogHeader {
        LogHeader {
            version: EVENT_LOG_VERSION,
            kind: "lasertag".into(),
            method: "maestro".into(),
            seed: 3,
            config_toml: "version = 1".into(),
        }
    }

    fn event(iteration: u64) -> StepEvent<LaserTagParams> {
        let env = generate(iteration);
        let env_hash = env.content_hash();
        StepEvent {
            iteration,
            branch: Branch::Eval,
            coplayer_id: 0,
            member_index: Some(0),
            env,
            env_hash,
            score: iteration as f64 * 0.5,
            estimator: RegretEstimator::MaxMc,
            trained: false,
            episode_return: 0.0,
            raw_return: 0.0,
            steps: 4,
            checkpointed: false,
            buffer_sizes: vec![1],
        }
    }

    #[test]
    fn log_round_trips_header_and_events() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut w = EventWriter::create(&path, &header()).unwrap();
        for i in 0..5 {
            w.append(&event(i)).unwrap();
        }
        w.flush().unwrap();
        let (h, events) = read_log::<LaserTagParams>(&path).unwrap();
        assert_eq!(h.method, "maestro");
        assert_eq!(events.len(), 5);
        assert_eq!(events[3].iteration, 3);
        assert_eq!(events[3].env_hash, events[3].env.content_hash());
    }

    #[test]
    fn append_continues_an_existing_log() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut w = EventWriter::create(&path, &header()).unwrap();
        w.append(&event(0)).unwrap();
        w.flush().unwrap();
        drop(w);
        let mut w = EventWriter::append_to(&path).unwrap();
        w.append(&event(1)).unwrap();
        w.flush().unwrap();
        let (_, events) = read_log::<LaserTagParams>(&path).unwrap();
        assert_eq!(events.len(), 2);
    }

    #[test]
    fn truncation_keeps_exactly_the_checkpointed_prefix() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        let mut w = EventWriter::create(&path, &header()).unwrap();
        for i in 0..10 {
            w.append(&event(i)).unwrap();
        }
        w.flush().unwrap();
        let kept = truncate_log::<LaserTagParams>(&path, 6).unwrap();
        assert_eq!(kept, 6);
        let (h, events) = read_log::<LaserTagParams>(&path).unwrap();
        assert_eq!(h.seed, 3);
        assert_eq!(events.len(), 6);
        assert!(events.iter().all(|e| e.iteration < 6));
    }

    #[test]
    fn malformed_logs_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.jsonl");
        std::fs::write(&path, "").unwrap();
        assert!(matches!(read_log::<LaserTagParams>(&path), Err(CliError::Data(_))));
        std::fs::write(&path, "{\"not\": \"a header\"}\n").unwrap();
        assert!(matches!(read_log::<LaserTagParams>(&path), Err(CliError::Data(_))));
        let mut w = EventWriter::create(&path, &header()).unwrap();
        w.flush().unwrap();
        drop(w);
        let mut text = std::fs::read_to_string(&path).unwrap();
        text.push_str("garbage line\n");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(read_log::<LaserTagParams>(&path), Err(CliError::Data(_))));
    }
}
