//! Hand-authored level files.
//!
//! Grammar (line-oriented, `%` lines are comments, blank lines ignored):
//!
//! ```text
//! WxH                  header: W columns, H rows
//! <H grid rows>        exactly W characters each, from:
//!                        '#' wall   '.' empty   'A' agent 0   'B' agent 1
//! A<facing>            legend: one line per agent marker, facing is one of
//! B<facing>            '^' north  '>' east  'v' south  '<' west
//! ```
//!
//! The grid must contain exactly one `A` and one `B`. The surrounding wall
//! border is implicit and never written. [`render_level`] emits the canonical
//! form — header, rows, `A` legend, `B` legend, no comments — and
//! `parse ∘ render` is the identity on every level that parses.

use super::{Board, Dir, LaserTagParams, Pose};
use crate::uposg::EnvParams;
use thiserror::Error;

#[derive(Debug, Error)]
#[error("level syntax error at line {line}, column {col}: {message}")]
pub struct LevelError {
    pub line: usize,
    pub col: usize,
    pub message: String,
}

fn err(line: usize, col: usize, message: impl Into<String>) -> LevelError {
    LevelError { line, col, message: message.into() }
}

fn facing_char(dir: Dir) -> char {
    match dir {
        Dir::North => '^',
        Dir::East => '>',
        Dir::South => 'v',
        Dir::West => '<',
    }
}

fn parse_facing(c: char) -> Option<Dir> {
    match c {
        '^' => Some(Dir::North),
        '>' => Some(Dir::East),
        'v' => Some(Dir::South),
        '<' => Some(Dir::West),
        _ => None,
    }
}

/// Parses the level grammar above into a parameter record (no seed — these
/// are authored instances, not generated ones).
pub fn parse_level(text: &str) -> Result<EnvParams<LaserTagParams>, LevelError> {
    // Significant lines with their 1-based source positions.
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end()))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'))
        .collect();
    let mut it = lines.into_iter();

    let (hline, header) =
        it.next().ok_or_else(|| err(1, 1, "missing WxH header"))?;
    let (w, h) = {
        let mut parts = header.trim().split('x');
        let w = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| err(hline, 1, format!("bad header `{header}`, expected WxH")))?;
        let h = parts
            .next()
            .and_then(|s| s.parse::<usize>().ok())
            .ok_or_else(|| err(hline, 1, format!("bad header `{header}`, expected WxH")))?;
        if parts.next().is_some() || w == 0 || h == 0 {
            return Err(err(hline, 1, format!("bad header `{header}`, expected WxH")));
        }
        (w, h)
    };

    let mut board = Board::open(w, h);
    let mut agents: [Option<(i32, i32)>; 2] = [None, None];
    let mut last_line = hline;
    for row in 0..h {
        let (lno, line) =
            it.next().ok_or_else(|| err(last_line, 1, format!("expected {h} grid rows, found {row}")))?;
        last_line = lno;
        let chars: Vec<char> = line.chars().collect();
        if chars.len() != w {
            return Err(err(lno, chars.len().max(1), format!("row has {} cells, header says {w}", chars.len())));
        }
        for (col, c) in chars.iter().enumerate() {
            match c {
                '.' => {}
                '#' => board.set_wall(col, row, true),
                'A' | 'B' => {
                    let idx = if *c == 'A' { 0 } else { 1 };
                    if agents[idx].is_some() {
                        return Err(err(lno, col + 1, format!("duplicate agent marker {c}")));
                    }
                    agents[idx] = Some((col as i32, row as i32));
                }
                other => {
                    return Err(err(lno, col + 1, format!("unknown cell character `{other}`")));
                }
            }
        }
    }

    let mut facings: [Option<Dir>; 2] = [None, None];
    for _ in 0..2 {
        let (lno, line) = it
            .next()
            .ok_or_else(|| err(last_line, 1, "missing facing legend (need `A<facing>` and `B<facing>`)"))?;
        last_line = lno;
        let chars: Vec<char> = line.trim().chars().collect();
        if chars.len() != 2 {
            return Err(err(lno, 1, format!("bad legend line `{line}`, expected e.g. `A^`")));
        }
        let idx = match chars[0] {
            'A' => 0,
            'B' => 1,
            other => return Err(err(lno, 1, format!("legend must start with A or B, got `{other}`"))),
        };
        let dir = parse_facing(chars[1])
            .ok_or_else(|| err(lno, 2, format!("facing must be one of ^ > v <, got `{}`", chars[1])))?;
        if facings[idx].is_some() {
            return Err(err(lno, 1, format!("duplicate legend for agent {}", chars[0])));
        }
        facings[idx] = Some(dir);
    }
    if let Some((lno, line)) = it.next() {
        return Err(err(lno, 1, format!("unexpected trailing content `{line}`")));
    }

    let a = agents[0].ok_or_else(|| err(last_line, 1, "grid contains no `A` marker"))?;
    let b = agents[1].ok_or_else(|| err(last_line, 1, "grid contains no `B` marker"))?;
    let starts = [
        Pose { x: a.0, y: a.1, dir: facings[0].unwrap() },
        Pose { x: b.0, y: b.1, dir: facings[1].unwrap() },
    ];
    Ok(EnvParams::authored(LaserTagParams { board, starts }))
}

/// Canonical renderer for the level grammar.
pub fn render_level(params: &LaserTagParams) -> String {
    let (w, h) = (params.board.width, params.board.height);
    let mut out = format!("{w}x{h}\n");
    for y in 0..h {
        for x in 0..w {
            let here = (x as i32, y as i32);
            let c = if here == (params.starts[0].x, params.starts[0].y) {
                'A'
            } else if here == (params.starts[1].x, params.starts[1].y) {
                'B'
            } else if params.board.is_wall(here.0, here.1) {
                '#'
            } else {
                '.'
            };
            out.push(c);
        }
        out.push('\n');
    }
    out.push('A');
    out.push(facing_char(params.starts[0].dir));
    out.push('\n');
    out.push('B');
    out.push(facing_char(params.starts[1].dir));
    out.push('\n');
    out
}

/// Names of the bundled held-out evaluation levels, in canonical order.
pub const HELD_OUT_LEVEL_NAMES: [&str; 13] = [
    "Cross",
    "FourRooms",
    "SixteenRooms",
    "Ruins",
    "Ruins2",
    "Star",
    "LargeCorridor",
    "Maze1",
    "Maze2",
    "Arena1",
    "Arena2",
    "Corridor1",
    "Corridor2",
];

const LEVEL_SOURCES: [(&str, &str); 13] = [
    ("Cross", include_str!("../../levels/cross.lvl")),
    ("FourRooms", include_str!("../../levels/four_rooms.lvl")),
    ("SixteenRooms", include_str!("../../levels/sixteen_rooms.lvl")),
    ("Ruins", include_str!("../../levels/ruins.lvl")),
    ("Ruins2", include_str!("../../levels/ruins2.lvl")),
    ("Star", include_str!("../../levels/star.lvl")),
    ("LargeCorridor", include_str!("../../levels/large_corridor.lvl")),
    ("Maze1", include_str!("../../levels/maze1.lvl")),
    ("Maze2", include_str!("../../levels/maze2.lvl")),
    ("Arena1", include_str!("../../levels/arena1.lvl")),
    ("Arena2", include_str!("../../levels/arena2.lvl")),
    ("Corridor1", include_str!("../../levels/corridor1.lvl")),
    ("Corridor2", include_str!("../../levels/corridor2.lvl")),
];

/// The bundled held-out evaluation suite.
pub fn held_out_levels() -> Vec<(&'static str, EnvParams<LaserTagParams>)> {
    LEVEL_SOURCES
        .iter()
        .map(|(name, src)| {
            let params = parse_level(src)
                .unwrap_or_else(|e| panic!("bundled level {name} fails to parse: {e}"));
            (*name, params)
        })
        .collect()
}
