use std::io::Write;
use std::path::Path;

use super::grid::SimGrid;
use super::state::MagState;
use crate::error::{Error, Result};

/// Writes per-cell m as CSV. Rows run x-major then y; the first line is a
/// `#` comment recording grid size and time.
pub fn write_snapshot(path: &Path, grid: &SimGrid, state: &MagState) -> Result<()> {
    state.check(grid)?;
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(
        w,
        "# nx={} ny={} cell_size={:e} t={:e} order=x-major,y",
        grid.nx, grid.ny, grid.cell_size, state.t
    )
    .map_err(io)?;
    writeln!(w, "x,y,mx,my,mz").map_err(io)?;
    for y in 0..grid.ny {
        for x in 0..grid.nx {
            let m = state.m[grid.index(x, y)];
            writeln!(w, "{x},{y},{:e},{:e},{:e}", m[0], m[1], m[2]).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::grid::MaterialParams;

    #[test]
    fn snapshot_layout() {
        let g = SimGrid::new(3, 2, 1e-9, MaterialParams::default()).unwrap();
        let s = MagState::uniform(&g, [0.0, 0.0, 1.0]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        write_snapshot(&p, &g, &s).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert!(lines[0].starts_with("# nx=3 ny=2"));
        assert_eq!(lines.len(), 2 + 6);
        assert!(lines[3].starts_with("1,0,"));
        assert!(lines[5].starts_with("0,1,"));
    }
}
