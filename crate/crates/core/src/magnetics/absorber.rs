use super::grid::{MaterialMap, SimGrid};
use crate::error::{Error, Result};

/// Quadratic damping ramps over `strip_cells` columns at both x-ends.
///
/// The outermost column gets `alpha_max`; column `d` cells in from the edge
/// gets α + (alpha_max − α)·((strip − d)/strip)². Ms is left untouched.
pub fn build_absorber(grid: &SimGrid, strip_cells: usize, alpha_max: f64) -> Result<MaterialMap> {
    if 2 * strip_cells >= grid.nx && strip_cells > 0 {
        return Err(Error::config(format!(
            "absorber strips of {strip_cells} cells do not fit in nx = {}",
            grid.nx
        )));
    }
    let base = grid.params.alpha;
    if !(alpha_max >= base && alpha_max < 1.0) {
        return Err(Error::config(format!("alpha_max {alpha_max} outside [{base}, 1)")));
    }
    let mut map = grid.material.clone();
    if strip_cells == 0 {
        return Ok(map);
    }
    let strip = strip_cells as f64;
    for y in 0..grid.ny {
        for d in 0..strip_cells {
            let u = (strip - d as f64) / strip;
            let alpha = base + (alpha_max - base) * u * u;
            for x in [d, grid.nx - 1 - d] {
                let c = grid.index(x, y);
                map.alpha_per_cell[c] = map.alpha_per_cell[c].max(alpha);
            }
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::magnetics::grid::MaterialParams;
    use approx::assert_relative_eq;

    fn grid() -> SimGrid {
        SimGrid::new(100, 3, 2.5e-9, MaterialParams::default()).unwrap()
    }

    #[test]
    fn zero_width_keeps_global_alpha() {
        let g = grid();
        let m = build_absorber(&g, 0, 0.5).unwrap();
        assert!(m.alpha_per_cell.iter().all(|&a| a == g.params.alpha));
    }

    #[test]
    fn outer_edge_and_halfway_values() {
        let g = grid();
        let m = build_absorber(&g, 40, 0.5).unwrap();
        let a = g.params.alpha;
        assert_eq!(m.alpha_per_cell[g.index(0, 1)], 0.5);
        assert_eq!(m.alpha_per_cell[g.index(99, 2)], 0.5);
        assert_relative_eq!(
            m.alpha_per_cell[g.index(20, 0)],
            a + (0.5 - a) * 0.25,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            m.alpha_per_cell[g.index(79, 0)],
            a + (0.5 - a) * 0.25,
            max_relative = 1e-12
        );
        assert_eq!(m.alpha_per_cell[g.index(50, 0)], a);
        assert_eq!(m.ms_per_cell, g.material.ms_per_cell);
    }

    #[test]
    fn too_wide_strip_rejected() {
        assert!(build_absorber(&grid(), 50, 0.5).is_err());
    }
}
