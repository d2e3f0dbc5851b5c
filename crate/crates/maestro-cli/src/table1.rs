//! The `table1` command: recomputes the joint-vs-independent selection on the
//! bundled regret fixture and checks both answers exactly.
//!
//! The fixture's joint argmax lands on (pi_A, theta_1) with regret 0.6, while
//! picking the co-player and environment independently from the marginal
//! argmaxes lands on (pi_C, theta_3), whose joint regret is only 0.4 — the
//! motivating gap between curating over pairs and curating each axis alone.

use crate::CliError;
use maestro::matrix::{RegretMatrix, SELECTION_FIXTURE};
use std::io::Write as _;
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionReport {
    pub joint: (String, String, f64),
    pub independent: (String, String, f64),
    pub pass: bool,
}

const EXPECTED_JOINT: (&str, &str, f64) = ("pi_A", "theta_1", 0.6);
const EXPECTED_INDEPENDENT: (&str, &str, f64) = ("pi_C", "theta_3", 0.4);

/// Computes both selections and compares them to the published values with
/// zero tolerance (the fixture is exact decimal data).
pub fn run_table1(fixture_text: &str) -> Result<SelectionReport, CliError> {
    let m = RegretMatrix::from_text(fixture_text)
        .map_err(|e| CliError::Data(format!("regret fixture: {e}")))?;
    let (ji, jj, jv) = m.joint_argmax();
    let (ii, ij, iv) = m.independent_argmax();
    let joint = (m.co_players[ji].clone(), m.environments[jj].clone(), jv);
    let independent = (m.co_players[ii].clone(), m.environments[ij].clone(), iv);
    let pass = joint.0 == EXPECTED_JOINT.0
        && joint.1 == EXPECTED_JOINT.1
        && joint.2 == EXPECTED_JOINT.2
        && independent.0 == EXPECTED_INDEPENDENT.0
        && independent.1 == EXPECTED_INDEPENDENT.1
        && independent.2 == EXPECTED_INDEPENDENT.2;
    Ok(SelectionReport { joint, independent, pass })
}

/// CLI wrapper: loads an override fixture if given, prints the selections,
/// and returns whether they match the published values (exit 0 iff so).
pub fn cmd_table1(fixture: Option<&Path>) -> Result<bool, CliError> {
    let text = match fixture {
        Some(path) => std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?,
        None => SELECTION_FIXTURE.to_string(),
    };
    let report = run_table1(&text)?;
    let mut out = std::io::stdout().lock();
    let _ = writeln!(
        out,
        "joint selection:       ({}, {}) regret {}",
        report.joint.0, report.joint.1, report.joint.2
    );
    let _ = writeln!(
        out,
        "independent selection: ({}, {}) regret {}",
        report.independent.0, report.independent.1, report.independent.2
    );
    let _ = writeln!(
        out,
        "expected:              joint (pi_A, theta_1) regret 0.6, independent (pi_C, theta_3) regret 0.4"
    );
    let _ = writeln!(out, "verdict: {}", if report.pass { "PASS" } else { "FAIL" });
    Ok(report.pass)
}
