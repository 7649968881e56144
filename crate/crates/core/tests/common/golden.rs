//! Reference ownership grids stored under `tests/golden`.

use std::path::PathBuf;

use pgas::{viz, Pattern};

/// (golden file, pattern spec)
pub const LAYOUTS: [(&str, &str); 6] = [
    ("row_blocked.txt", "20 BLOCKED team 4"),
    ("row_cyclic.txt", "20 CYCLIC team 4"),
    ("row_blockcyclic3.txt", "20 BLOCKCYCLIC(3) team 4"),
    ("grid_row_blocks.txt", "16x10 BLOCKED,NONE team 4x1"),
    ("grid_column_blocks.txt", "16x10 NONE,BLOCKED team 1x4"),
    ("grid_tiles.txt", "16x10 TILE(4),TILE(2) team 2x2 col"),
];

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

pub fn golden_lines(name: &str) -> Vec<String> {
    std::fs::read_to_string(golden_path(name))
        .unwrap_or_else(|e| panic!("{name}: {e}"))
        .lines()
        .map(str::to_owned)
        .collect()
}

/// Compares the rendered owner grid of `spec` against its golden file.
pub fn check(name: &str, spec: &str) -> Result<(), String> {
    let pattern = Pattern::parse(spec).map_err(|e| format!("{spec}: {e}"))?;
    let got = viz::owner_grid(&pattern);
    let want = golden_lines(name);
    if got == want {
        Ok(())
    } else {
        Err(format!("{spec}: got\n{}\nwant\n{}", got.join("\n"), want.join("\n")))
    }
}
