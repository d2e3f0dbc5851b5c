//! Plain-text matrix files.
//!
//! Grammar, line by line:
//!   - `#` starts a comment. Two directive comments are recognized and attach
//!     labels: `# rows: a b c` and `# cols: x y z`; every other comment is
//!     ignored.
//!   - Any other non-empty line is one matrix row of whitespace-separated
//!     real numbers. All rows must have the same width.
//!
//! Rendering emits the canonical form: label directives (when labels exist)
//! followed by the rows, six significant digits stripped of trailing zeros —
//! exactly what `parse` reads back.

use super::MatrixError;

#[derive(Debug)]
pub struct ParsedMatrix {
    pub rows: Vec<Vec<f64>>,
    pub row_labels: Option<Vec<String>>,
    pub col_labels: Option<Vec<String>>,
}

/// Parses the plain-text matrix format. Errors carry the 1-based source line.
pub fn parse_matrix_text(text: &str) -> Result<ParsedMatrix, MatrixError> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut row_labels: Option<Vec<String>> = None;
    let mut col_labels: Option<Vec<String>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(labels) = comment.strip_prefix("rows:") {
                row_labels = Some(labels.split_whitespace().map(String::from).collect());
            } else if let Some(labels) = comment.strip_prefix("cols:") {
                col_labels = Some(labels.split_whitespace().map(String::from).collect());
            }
            continue;
        }
        let mut row = Vec::new();
        for tok in line.split_whitespace() {
            let v: f64 = tok.parse().map_err(|_| MatrixError::Parse {
                line: line_no,
                message: format!("`{tok}` is not a real number"),
            })?;
            if !v.is_finite() {
                return Err(MatrixError::Parse {
                    line: line_no,
                    message: format!("non-finite entry `{tok}`"),
                });
            }
            row.push(v);
        }
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(MatrixError::Parse {
                    line: line_no,
                    message: format!("row has {} entries, earlier rows have {}", row.len(), first.len()),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(MatrixError::Parse { line: 0, message: "no matrix rows found".into() });
    }
    if let Some(labels) = &row_labels {
        if labels.len() != rows.len() {
            return Err(MatrixError::Parse {
                line: 0,
                message: format!("{} row labels for {} rows", labels.len(), rows.len()),
            });
        }
    }
    if let Some(labels) = &col_labels {
        if labels.len() != rows[0].len() {
            return Err(MatrixError::Parse {
                line: 0,
                message: format!("{} column labels for {} columns", labels.len(), rows[0].len()),
            });
        }
    }
    Ok(ParsedMatrix { rows, row_labels, col_labels })
}

/// Canonical renderer for the same format.
pub fn render_matrix_text(
    rows: &[Vec<f64>],
    row_labels: Option<&[String]>,
    col_labels: Option<&[String]>,
) -> String {
    let mut out = String::new();
    if let Some(labels) = row_labels {
        out.push_str(&format!("# rows: {}\n", labels.join(" ")));
    }
    if let Some(labels) = col_labels {
        out.push_str(&format!("# cols: {}\n", labels.join(" ")));
    }
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

fn format_number(v: f64) -> String {
    // Shortest representation that round-trips through f64 parsing.
    let s = format!("{v}");
    debug_assert_eq!(s.parse::<f64>().unwrap(), v);
    s
}
