//! The `plot` command: renders training metrics CSVs and tournament tables
//! into self-contained SVG charts.
//!
//! The renderer is deliberately dependency-free: charts are a few hundred
//! bytes of axes, polylines and text. Each SVG root carries `data-ymin` /
//! `data-ymax` attributes so scripts (and the acceptance suite) can verify
//! the drawn range covers the data without parsing coordinates.

use crate::runner::METRICS_CSV_HEADER;
use crate::CliError;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// One parsed metrics.csv.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricsSeries {
    pub updates: Vec<f64>,
    pub episodes: Vec<f64>,
    pub branch_fraction: Vec<f64>,
    pub mean_score: Vec<f64>,
    pub buffer_size_total: Vec<f64>,
    pub population_size: Vec<f64>,
    /// Empty cells (runs without a gridworld descriptor) parse to None.
    pub wall_density: Vec<Option<f64>>,
    pub grid_size: Vec<Option<f64>>,
}

pub fn parse_metrics_csv(text: &str) -> Result<MetricsSeries, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == METRICS_CSV_HEADER => {}
        Some(h) => {
            return Err(CliError::Data(format!(
                "metrics header mismatch: got {h:?}, expected {METRICS_CSV_HEADER:?}"
            )))
        }
        None => return Err(CliError::Data("metrics file is empty".into())),
    }
    let mut s = MetricsSeries {
        updates: Vec::new(),
        episodes: Vec::new(),
        branch_fraction: Vec::new(),
        mean_score: Vec::new(),
        buffer_size_total: Vec::new(),
        population_size: Vec::new(),
        wall_density: Vec::new(),
        grid_size: Vec::new(),
    };
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 8 {
            return Err(CliError::Data(format!(
                "metrics row {}: expected 8 columns, got {}",
                lineno + 2,
                cells.len()
            )));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            cells[i].parse::<f64>().map_err(|_| {
                CliError::Data(format!(
                    "metrics row {}: column {:?} is not numeric: {:?}",
                    lineno + 2,
                    METRICS_CSV_HEADER.split(',').nth(i).unwrap_or("?"),
                    cells[i]
                ))
            })
        };
        let opt = |i: usize| -> Result<Option<f64>, CliError> {
            if cells[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        s.updates.push(num(0)?);
        s.episodes.push(num(1)?);
        s.branch_fraction.push(num(2)?);
        s.mean_score.push(num(3)?);
        s.buffer_size_total.push(num(4)?);
        s.population_size.push(num(5)?);
        s.wall_density.push(opt(6)?);
        s.grid_size.push(opt(7)?);
    }
    if s.updates.is_empty() {
        return Err(CliError::Data("metrics file contains no data rows".into()));
    }
    Ok(s)
}

// ---------------------------------------------------------------------------
// SVG rendering.
// ---------------------------------------------------------------------------

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const ML: f64 = 74.0;
const MR: f64 = 190.0;
const MT: f64 = 44.0;
const MB: f64 = 54.0;
const PALETTE: [&str; 8] =
    ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f"];

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.4}");
    let t = s.trim_end_matches('0').trim_end_matches('.');
    if t.is_empty() || t == "-" {
        "0".into()
    } else {
        t.to_string()
    }
}

struct Bounds {
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Bounds {
    fn of(series: &[(String, Vec<(f64, f64)>)]) -> Bounds {
        let mut b = Bounds {
            xmin: f64::INFINITY,
            xmax: f64::NEG_INFINITY,
            ymin: f64::INFINITY,
            ymax: f64::NEG_INFINITY,
        };
        for (_, pts) in series {
            for &(x, y) in pts {
                b.xmin = b.xmin.min(x);
                b.xmax = b.xmax.max(x);
                b.ymin = b.ymin.min(y);
                b.ymax = b.ymax.max(y);
            }
        }
        if !b.xmin.is_finite() {
            b = Bounds { xmin: 0.0, xmax: 1.0, ymin: 0.0, ymax: 1.0 };
        }
        if b.xmax == b.xmin {
            b.xmax = b.xmin + 1.0;
        }
        if b.ymax == b.ymin {
            b.ymax += 0.5;
            b.ymin -= 0.5;
        }
        b
    }

    fn px(&self, x: f64) -> f64 {
        ML + (x - self.xmin) / (self.xmax - self.xmin) * (WIDTH - ML - MR)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MB - (y - self.ymin) / (self.ymax - self.ymin) * (HEIGHT - MB - MT)
    }
}

/// Renders a multi-series line chart; one polyline per series.
pub fn line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[(String, Vec<(f64, f64)>)],
) -> String {
    let b = Bounds::of(series);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" data-ymin=\"{}\" data-ymax=\"{}\" data-xmin=\"{}\" data-xmax=\"{}\">\n",
        b.ymin, b.ymax, b.xmin, b.xmax
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        (ML + WIDTH - MR) / 2.0,
        title
    );
    // Axes.
    let _ = write!(
        svg,
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        HEIGHT - MB,
        WIDTH - MR
    );
    let _ = write!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MB
    );
    // Tick labels: axis extrema plus midpoints.
    for (frac, v) in [(0.0, b.xmin), (0.5, (b.xmin + b.xmax) / 2.0), (1.0, b.xmax)] {
        let x = ML + frac * (WIDTH - ML - MR);
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            HEIGHT - MB + 16.0,
            fmt_tick(v)
        );
    }
    for (frac, v) in [(0.0, b.ymin), (0.5, (b.ymin + b.ymax) / 2.0), (1.0, b.ymax)] {
        let y = HEIGHT - MB - frac * (HEIGHT - MB - MT);
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
            ML - 6.0,
            y + 4.0,
            fmt_tick(v)
        );
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        (ML + WIDTH - MR) / 2.0,
        HEIGHT - 12.0,
        x_label
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        (MT + HEIGHT - MB) / 2.0,
        (MT + HEIGHT - MB) / 2.0,
        y_label
    );
    // Series.
    for (idx, (label, pts)) in series.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut coords = String::new();
        for &(x, y) in pts {
            let _ = write!(coords, "{:.2},{:.2} ", b.px(x), b.py(y));
        }
        let _ = write!(
            svg,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            coords.trim_end()
        );
        // Legend row.
        let ly = MT + 14.0 * idx as f64;
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\n",
            WIDTH - MR + 10.0,
            ly
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>\n",
            WIDTH - MR + 24.0,
            ly + 9.0,
            label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Renders a bar chart (used for normalized round-robin returns).
pub fn bar_chart(title: &str, y_label: &str, bars: &[(String, f64)]) -> String {
    let ymax = bars.iter().map(|&(_, v)| v).fold(1.0_f64, f64::max);
    let ymin = bars.iter().map(|&(_, v)| v).fold(0.0_f64, f64::min);
    let span = (ymax - ymin).max(1e-12);
    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" data-ymin=\"{ymin}\" data-ymax=\"{ymax}\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
        WIDTH / 2.0,
        title
    );
    let plot_w = WIDTH - ML - 30.0;
    let plot_h = HEIGHT - MT - MB;
    let py = |v: f64| HEIGHT - MB - (v - ymin) / span * plot_h;
    let _ = write!(
        svg,
        "<line x1=\"{ML}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        HEIGHT - MB,
        WIDTH - 30.0
    );
    let _ = write!(
        svg,
        "<line x1=\"{ML}\" y1=\"{MT}\" x2=\"{ML}\" y2=\"{}\" stroke=\"black\"/>\n",
        HEIGHT - MB
    );
    for v in [ymin, (ymin + ymax) / 2.0, ymax] {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\" font-family=\"sans-serif\">{}</text>\n",
            ML - 6.0,
            py(v) + 4.0,
            fmt_tick(v)
        );
    }
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         transform=\"rotate(-90 18 {})\">{}</text>\n",
        (MT + HEIGHT - MB) / 2.0,
        (MT + HEIGHT - MB) / 2.0,
        y_label
    );
    let slot = plot_w / bars.len().max(1) as f64;
    let bar_w = slot * 0.6;
    for (idx, (label, v)) in bars.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let x = ML + slot * idx as f64 + (slot - bar_w) / 2.0;
        let top = py(*v);
        let base = py(ymin.min(0.0).max(ymin));
        let (y0, h) = if top <= base { (top, base - top) } else { (base, top - base) };
        let _ = write!(
            svg,
            "<rect x=\"{x:.2}\" y=\"{y0:.2}\" width=\"{bar_w:.2}\" height=\"{h:.2}\" fill=\"{color}\"/>\n"
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            x + bar_w / 2.0,
            top - 6.0,
            fmt_tick(*v)
        );
        let _ = write!(
            svg,
            "<text x=\"{:.2}\" y=\"{}\" font-size=\"11\" text-anchor=\"middle\" font-family=\"sans-serif\">{}</text>\n",
            x + bar_w / 2.0,
            HEIGHT - MB + 16.0,
            label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Directory scan + command.
// ---------------------------------------------------------------------------

fn walk(dir: &Path, hits: &mut Vec<PathBuf>, name: &str) {
    let Ok(entries) = std::fs::read_dir(dir) else { return };
    let mut paths: Vec<PathBuf> = entries.flatten().map(|e| e.path()).collect();
    paths.sort();
    for p in paths {
        if p.is_dir() {
            walk(&p, hits, name);
        } else if p.file_name().and_then(|n| n.to_str()) == Some(name) {
            hits.push(p);
        }
    }
}

fn run_label(results: &Path, metrics_path: &Path) -> String {
    let parent = metrics_path.parent().unwrap_or(metrics_path);
    let rel = parent.strip_prefix(results).unwrap_or(parent);
    let s = rel.to_string_lossy().replace(std::path::MAIN_SEPARATOR, "/");
    if s.is_empty() {
        "run".into()
    } else {
        s
    }
}

pub fn cmd_plot(results: &Path, out_dir: &Path) -> Result<(), CliError> {
    if !results.is_dir() {
        return Err(CliError::Missing(format!("{}: not a directory", results.display())));
    }
    let mut metrics_files = Vec::new();
    walk(results, &mut metrics_files, "metrics.csv");
    let mut tournament_files = Vec::new();
    walk(results, &mut tournament_files, "tournament.json");
    if metrics_files.is_empty() && tournament_files.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no metrics.csv or tournament.json found under this directory",
            results.display()
        )));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| crate::io_error(out_dir, e))?;

    let mut runs: Vec<(String, MetricsSeries)> = Vec::new();
    for path in &metrics_files {
        let text = std::fs::read_to_string(path).map_err(|e| crate::io_error(path, e))?;
        let series = parse_metrics_csv(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        runs.push((run_label(results, path), series));
    }

    let mut written = Vec::new();
    let mut save = |name: &str, svg: String| -> Result<(), CliError> {
        let path = out_dir.join(name);
        std::fs::write(&path, svg).map_err(|e| crate::io_error(&path, e))?;
        written.push(path);
        Ok(())
    };

    if !runs.is_empty() {
        let score: Vec<(String, Vec<(f64, f64)>)> = runs
            .iter()
            .map(|(label, s)| {
                (label.clone(), s.updates.iter().copied().zip(s.mean_score.iter().copied()).collect())
            })
            .collect();
        save("score.svg", line_chart("curation score over training", "student updates", "mean score", &score))?;

        let optional = |pick: fn(&MetricsSeries) -> &Vec<Option<f64>>| -> Vec<(String, Vec<(f64, f64)>)> {
            runs.iter()
                .filter_map(|(label, s)| {
                    let pts: Vec<(f64, f64)> = s
                        .updates
                        .iter()
                        .zip(pick(s).iter())
                        .filter_map(|(&u, v)| v.map(|v| (u, v)))
                        .collect();
                    if pts.is_empty() {
                        None
                    } else {
                        Some((label.clone(), pts))
                    }
                })
                .collect()
        };
        let wall = optional(|s| &s.wall_density);
        if !wall.is_empty() {
            save(
                "wall_density.svg",
                line_chart("wall density of trained-on levels", "student updates", "mean wall density", &wall),
            )?;
        }
        let grid = optional(|s| &s.grid_size);
        if !grid.is_empty() {
            save(
                "grid_size.svg",
                line_chart("grid size of trained-on levels", "student updates", "mean grid side", &grid),
            )?;
        }
    }

    if let Some(tpath) = tournament_files.first() {
        let text = std::fs::read_to_string(tpath).map_err(|e| crate::io_error(tpath, e))?;
        let v: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: invalid tournament JSON: {e}", tpath.display())))?;
        let table = &v["normalized"];
        let methods = table["methods"].as_array().cloned().unwrap_or_default();
        let means = mean_returns_from(table).ok_or_else(|| {
            CliError::Data(format!("{}: tournament JSON lacks a normalized table", tpath.display()))
        })?;
        let bars: Vec<(String, f64)> = methods
            .iter()
            .zip(means)
            .map(|(m, v)| (m.as_str().unwrap_or("?").to_string(), v))
            .collect();
        if bars.is_empty() {
            return Err(CliError::Data(format!(
                "{}: tournament JSON lists no methods",
                tpath.display()
            )));
        }
        save(
            "rr_returns.svg",
            bar_chart("round-robin normalized return vs field", "mean normalized return", &bars),
        )?;
    }

    let mut out = std::io::stdout().lock();
    for p in &written {
        let _ = writeln!(out, "wrote {}", p.display());
    }
    Ok(())
}

/// Mean off-diagonal normalized return per method, from the JSON table.
fn mean_returns_from(table: &serde_json::Value) -> Option<Vec<f64>> {
    let rows = table["mean_returns"].as_array()?;
    let n = rows.len();
    let mut means = Vec::with_capacity(n);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_array()?;
        if row.len() != n || n < 2 {
            return None;
        }
        let mut sum = 0.0;
        for (j, cell) in row.iter().enumerate() {
            if i != j {
                sum += cell.as_f64()?;
            }
        }
        means.push(sum / (n - 1) as f64);
    }
    Some(means)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD_CSV: &str = "update,episodes,branch_fraction,mean_score,buffer_size_total,population_size,wall_density_window,grid_size_window\n\
        2,4,0.5,0.25,3,1,0.125,7\n\
        4,8,0.5,0.5,4,1,0.25,7\n\
        6,12,0.5,0.125,4,2,,\n";

    #[test]
    fn parses_well_formed_metrics() {
        let s = parse_metrics_csv(GOOD_CSV).unwrap();
        assert_eq!(s.updates, vec![2.0, 4.0, 6.0]);
        assert_eq!(s.mean_score, vec![0.25, 0.5, 0.125]);
        assert_eq!(s.wall_density, vec![Some(0.125), Some(0.25), None]);
        assert_eq!(s.grid_size[2], None);
    }

    #[test]
    fn malformed_metrics_are_data_errors() {
        for bad in [
            "wrong,header\n1,2\n",
            "",
            METRICS_CSV_HEADER, // header only, no rows
            &format!("{METRICS_CSV_HEADER}\n1,2,3\n"),
            &format!("{METRICS_CSV_HEADER}\n1,2,x,4,5,6,7,8\n"),
        ] {
            let err = parse_metrics_csv(bad).unwrap_err();
            assert_eq!(err.exit_code(), 4, "expected data error for {bad:?}");
        }
    }

    #[test]
    fn line_chart_has_one_polyline_per_series_and_covering_axes() {
        let series = vec![
            ("a".to_string(), vec![(0.0, 1.0), (10.0, 3.0)]),
            ("b".to_string(), vec![(0.0, -2.0), (10.0, 0.5)]),
        ];
        let svg = line_chart("t", "x", "y", &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("data-ymin=\"-2\""), "{svg}");
        assert!(svg.contains("data-ymax=\"3\""), "{svg}");
        assert!(svg.contains("data-xmax=\"10\""));
        // Tick labels for the extrema are rendered.
        assert!(svg.contains(">-2<") && svg.contains(">3<"));
        assert!(svg.contains(">a<") && svg.contains(">b<"), "legend labels missing");
    }

    #[test]
    fn bar_chart_has_one_bar_per_method() {
        let svg = bar_chart("t", "y", &[("m1".into(), 0.6), ("m2".into(), 0.4)]);
        // One background rect + legend-free bars.
        assert_eq!(svg.matches("<rect").count(), 1 + 2);
        assert!(svg.contains(">m1<") && svg.contains(">m2<"));
    }

    #[test]
    fn plot_command_renders_all_chart_files() {
        let tmp = tempfile::tempdir().unwrap();
        let run_a = tmp.path().join("results/maestro/seed_1");
        let run_b = tmp.path().join("results/dr-sp/seed_2");
        std::fs::create_dir_all(&run_a).unwrap();
        std::fs::create_dir_all(&run_b).unwrap();
        std::fs::write(run_a.join("metrics.csv"), GOOD_CSV).unwrap();
        std::fs::write(run_b.join("metrics.csv"), GOOD_CSV).unwrap();
        std::fs::write(
            tmp.path().join("results/tournament.json"),
            r#"{"normalized":{"methods":["maestro","dr-sp"],"mean_returns":[[0.0,0.61],[0.39,0.0]]}}"#,
        )
        .unwrap();
        let out = tmp.path().join("plots");
        cmd_plot(&tmp.path().join("results"), &out).unwrap();
        for f in ["score.svg", "wall_density.svg", "grid_size.svg", "rr_returns.svg"] {
            assert!(out.join(f).exists(), "missing {f}");
        }
        let svg = std::fs::read_to_string(out.join("score.svg")).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2, "one polyline per run");
        assert!(svg.contains("maestro/seed_1"));
    }

    #[test]
    fn empty_results_directory_is_a_data_error() {
        let tmp = tempfile::tempdir().unwrap();
        let err = cmd_plot(tmp.path(), &tmp.path().join("plots")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }

    #[test]
    fn absent_results_directory_is_a_missing_artifact() {
        let tmp = tempfile::tempdir().unwrap();
        let err = cmd_plot(&tmp.path().join("nope"), &tmp.path().join("plots")).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn malformed_csv_fails_the_whole_plot() {
        let tmp = tempfile::tempdir().unwrap();
        let run = tmp.path().join("results/x");
        std::fs::create_dir_all(&run).unwrap();
        std::fs::write(run.join("metrics.csv"), "garbage\n1,2\n").unwrap();
        let err = cmd_plot(&tmp.path().join("results"), &tmp.path().join("plots")).unwrap_err();
        assert_eq!(err.exit_code(), 4);
    }
}
