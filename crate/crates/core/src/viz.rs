//! Renders patterns as unit-ownership grids, plus unit 0's local storage
//! order, as plain text or SVG.

use std::fmt::Write as _;

use crate::pattern::Pattern;
use crate::runtime::UnitId;

/// Fill colours, cycling by unit id.
pub const PALETTE: [&str; 4] = ["#4e79a7", "#f28e2b", "#59a14f", "#e15759"];

const CELL: usize = 24;
const MARGIN: usize = 8;

fn unit_label(unit: usize, n_units: usize) -> String {
    if n_units <= 36 {
        char::from_digit(unit as u32, 36).unwrap().to_string()
    } else {
        format!("{unit:>width$}", width = (n_units - 1).to_string().len())
    }
}

/// Splits an index space into 2-D slices of (rows, cols). 1-D patterns are a
/// single row; higher dimensions iterate the leading ones.
fn slices(pattern: &Pattern) -> (Vec<Vec<usize>>, usize, usize) {
    let ext = pattern.extents();
    let d = ext.len();
    let (rows, cols) = match d {
        1 => (1, ext[0]),
        _ => (ext[d - 2], ext[d - 1]),
    };
    let lead = &ext[..d.saturating_sub(2)];
    let mut prefixes = vec![Vec::new()];
    for &n in lead {
        prefixes = prefixes
            .into_iter()
            .flat_map(|p| {
                (0..n).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    (prefixes, rows, cols)
}

fn coord(pattern: &Pattern, prefix: &[usize], r: usize, c: usize) -> Vec<usize> {
    let mut v = prefix.to_vec();
    if pattern.ndim() > 1 {
        v.push(r);
    }
    v.push(c);
    v
}

/// Owner labels, one line per row; slices of 3-D and higher patterns are
/// separated by an empty line.
pub fn owner_grid(pattern: &Pattern) -> Vec<String> {
    let n_units = pattern.n_units();
    let sep = if n_units <= 36 { "" } else { " " };
    let (prefixes, rows, cols) = slices(pattern);
    let mut lines = Vec::new();
    for (i, prefix) in prefixes.iter().enumerate() {
        if i > 0 {
            lines.push(String::new());
        }
        for r in 0..rows {
            let line: Vec<String> = (0..cols)
                .map(|c| {
                    let u = pattern.unit_of(&coord(pattern, prefix, r, c)).expect("coordinate in range");
                    unit_label(u.index(), n_units)
                })
                .collect();
            lines.push(line.join(sep));
        }
    }
    lines
}

/// Local offsets of unit 0's elements at their grid positions, `.` elsewhere.
pub fn memory_order_grid(pattern: &Pattern) -> Vec<String> {
    let size = pattern.local_size(UnitId(0)).unwrap_or(0);
    let width = size.saturating_sub(1).to_string().len();
    let (prefixes, rows, cols) = slices(pattern);
    let mut lines = Vec::new();
    for (i, prefix) in prefixes.iter().enumerate() {
        if i > 0 {
            lines.push(String::new());
        }
        for r in 0..rows {
            let cells: Vec<String> = (0..cols)
                .map(|c| match pattern.local_index_of(&coord(pattern, prefix, r, c)) {
                    Ok((UnitId(0), off)) => format!("{off:>width$}"),
                    _ => format!("{:>width$}", "."),
                })
                .collect();
            lines.push(cells.join(" "));
        }
    }
    lines
}

pub fn render_text(pattern: &Pattern) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "pattern: {pattern}");
    let _ = writeln!(out, "local sizes: {:?}", pattern.local_sizes());
    out.push_str("owners:\n");
    for line in owner_grid(pattern) {
        out.push_str(&line);
        out.push('\n');
    }
    out.push_str("unit 0 memory order:\n");
    for line in memory_order_grid(pattern) {
        out.push_str(&line);
        out.push('\n');
    }
    out
}

/// SVG 1.1 drawing: one coloured cell per element labelled with its owner,
/// and unit 0's storage order as dots joined by a line. Patterns with more
/// than two dimensions are drawn slice after slice, top to bottom.
pub fn render_svg(pattern: &Pattern) -> String {
    let (prefixes, rows, cols) = slices(pattern);
    let slice_h = rows * CELL + MARGIN;
    let width = cols * CELL + 2 * MARGIN;
    let height = prefixes.len() * slice_h + MARGIN;
    let mut out = String::new();
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(out, "<title>{pattern}</title>");
    let mut trace: Vec<(usize, usize, usize)> = Vec::new();
    for (s, prefix) in prefixes.iter().enumerate() {
        let top = MARGIN + s * slice_h;
        for r in 0..rows {
            for c in 0..cols {
                let x = MARGIN + c * CELL;
                let y = top + r * CELL;
                let (u, off) = pattern
                    .local_index_of(&coord(pattern, prefix, r, c))
                    .expect("coordinate in range");
                let _ = writeln!(
                    out,
                    r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ffffff" stroke-width="1"/>"##,
                    PALETTE[u.index() % PALETTE.len()]
                );
                let _ = writeln!(
                    out,
                    r##"<text x="{}" y="{}" font-family="monospace" font-size="9" fill="#000000">{}</text>"##,
                    x + 2,
                    y + 9,
                    u.index()
                );
                if u == UnitId(0) {
                    trace.push((off, x + CELL / 2, y + CELL / 2));
                }
            }
        }
    }
    trace.sort_unstable();
    if trace.len() > 1 {
        let points: Vec<String> = trace.iter().map(|&(_, x, y)| format!("{x},{y}")).collect();
        let _ = writeln!(
            out,
            r##"<polyline points="{}" fill="none" stroke="#ffffff" stroke-width="1.5"/>"##,
            points.join(" ")
        );
    }
    for &(_, x, y) in &trace {
        let _ = writeln!(out, r##"<circle cx="{x}" cy="{y}" r="3" fill="#ffffff"/>"##);
    }
    out.push_str("</svg>\n");
    out
}
