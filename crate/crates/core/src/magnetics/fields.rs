//! Effective-field terms and the LLG right-hand side.
//!
//! These are the straightforward per-term evaluators. The integrator in
//! [`super::integrator`] fuses the same expressions into one pass per stage;
//! its tests check the two agree.

use super::grid::{MaterialMap, SimGrid, MU0};
use super::state::{cross, dot, FieldGrid, MagState, Vec3};
use crate::error::Result;

/// In-plane neighbours (-x, +x, -y, +y) of every cell. A missing neighbour
/// (film edge or void cell) is replaced by the cell itself, which makes its
/// Laplacian contribution vanish: the mirror (Neumann) boundary.
pub fn neighbor_table(grid: &SimGrid) -> Vec<[u32; 4]> {
    let (nx, ny) = (grid.nx, grid.ny);
    let ms = &grid.material.ms_per_cell;
    let mut table = Vec::with_capacity(nx * ny);
    for y in 0..ny {
        for x in 0..nx {
            let c = y * nx + x;
            let pick = |cond: bool, other: usize| -> u32 {
                if cond && ms[other] > 0.0 {
                    other as u32
                } else {
                    c as u32
                }
            };
            table.push([
                pick(x > 0, c.wrapping_sub(1)),
                pick(x + 1 < nx, c + 1),
                pick(y > 0, c.wrapping_sub(nx)),
                pick(y + 1 < ny, c + nx),
            ]);
        }
    }
    table
}

/// h_ex = (2 A / Ms) ∇²m with the 4-neighbour Laplacian.
pub fn exchange_field(state: &MagState, grid: &SimGrid) -> Result<FieldGrid> {
    state.check(grid)?;
    grid.check_material()?;
    let nb = neighbor_table(grid);
    let inv_dx2 = 1.0 / (grid.cell_size * grid.cell_size);
    let mut out = FieldGrid::zeros(grid.cells());
    for (c, h) in out.h.iter_mut().enumerate() {
        let ms = grid.material.ms_per_cell[c];
        if ms <= 0.0 {
            continue;
        }
        let coef = 2.0 * grid.params.a_ex / ms * inv_dx2;
        let m = state.m[c];
        for k in 0..3 {
            let mut lap = -4.0 * m[k];
            for &n in &nb[c] {
                lap += state.m[n as usize][k];
            }
            h[k] = coef * lap;
        }
    }
    Ok(out)
}

/// Uniform bias in every active cell.
pub fn zeeman_field(bias: Vec3, material: &MaterialMap) -> FieldGrid {
    FieldGrid {
        h: material
            .ms_per_cell
            .iter()
            .map(|&ms| if ms > 0.0 { bias } else { [0.0; 3] })
            .collect(),
    }
}

/// Local thin-film demagnetization, h_d = -μ0 Ms m_z ẑ.
pub fn thin_film_demag_field(state: &MagState, material: &MaterialMap) -> FieldGrid {
    FieldGrid {
        h: state
            .m
            .iter()
            .zip(&material.ms_per_cell)
            .map(|(m, &ms)| [0.0, 0.0, -MU0 * ms * m[2]])
            .collect(),
    }
}

/// dm/dt = -γ/(1+α²) [m × h + α m × (m × h)] for one cell.
#[inline(always)]
pub fn llg_cell(m: Vec3, h: Vec3, gamma: f64, alpha: f64) -> Vec3 {
    let pre = -gamma / (1.0 + alpha * alpha);
    let mxh = cross(m, h);
    let mxmxh = cross(m, mxh);
    [
        pre * (mxh[0] + alpha * mxmxh[0]),
        pre * (mxh[1] + alpha * mxmxh[1]),
        pre * (mxh[2] + alpha * mxmxh[2]),
    ]
}

/// LLG rate for every cell (s⁻¹), using each cell's local damping.
pub fn llg_rhs(state: &MagState, h_eff: &FieldGrid, material: &MaterialMap, gamma: f64) -> Vec<Vec3> {
    state
        .m
        .iter()
        .zip(&h_eff.h)
        .zip(&material.alpha_per_cell)
        .map(|((&m, &h), &alpha)| llg_cell(m, h, gamma, alpha))
        .collect()
}

/// Total Zeeman + exchange + demag energy (J) of the film.
pub fn total_energy(state: &MagState, grid: &SimGrid, bias: Vec3) -> Result<f64> {
    state.check(grid)?;
    let dx = grid.cell_size;
    let vol = dx * dx * dx;
    let ms = &grid.material.ms_per_cell;
    let mut e = 0.0;
    for (c, &m) in state.m.iter().enumerate() {
        if ms[c] <= 0.0 {
            continue;
        }
        e += vol * (-ms[c] * dot(m, bias) + 0.5 * MU0 * ms[c] * ms[c] * m[2] * m[2]);
    }
    // each link once: +x and +y neighbours
    let nb = neighbor_table(grid);
    for (c, links) in nb.iter().enumerate() {
        if ms[c] <= 0.0 {
            continue;
        }
        for n in [links[1] as usize, links[3] as usize] {
            if n == c {
                continue;
            }
            let d = [
                state.m[c][0] - state.m[n][0],
                state.m[c][1] - state.m[n][1],
                state.m[c][2] - state.m[n][2],
            ];
            e += grid.params.a_ex * dx * dot(d, d);
        }
    }
    Ok(e)
}
