use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Vacuum permeability (T·m/A).
pub const MU0: f64 = 4.0e-7 * std::f64::consts::PI;

/// Global material constants of the film (YIG-like by default).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaterialParams {
    /// Saturation magnetization (A/m).
    pub ms_base: f64,
    /// Exchange stiffness (J/m).
    pub a_ex: f64,
    /// Gilbert damping.
    pub alpha: f64,
    /// Gyromagnetic ratio (rad/(s·T)).
    pub gamma: f64,
}

impl Default for MaterialParams {
    fn default() -> Self {
        Self {
            ms_base: 140e3,
            a_ex: 3.5e-12,
            alpha: 2e-4,
            gamma: 1.760859e11,
        }
    }
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ms_base > 0.0 && self.a_ex > 0.0 && self.alpha > 0.0 && self.alpha < 1.0 && self.gamma > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config(format!("invalid material parameters {self:?}")))
        }
    }
}

/// Inclusive-exclusive rectangle of cell indices in the film plane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellRect {
    pub x0: usize,
    pub x1: usize,
    pub y0: usize,
    pub y1: usize,
}

impl CellRect {
    pub fn new(x0: usize, x1: usize, y0: usize, y1: usize) -> Self {
        Self { x0, x1, y0, y1 }
    }

    pub fn is_empty(&self) -> bool {
        self.x1 <= self.x0 || self.y1 <= self.y0
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            (self.x1 - self.x0) * (self.y1 - self.y0)
        }
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn overlaps(&self, other: &CellRect) -> bool {
        self.x0 < other.x1 && other.x0 < self.x1 && self.y0 < other.y1 && other.y0 < self.y1
    }

    pub fn fits(&self, nx: usize, ny: usize) -> bool {
        !self.is_empty() && self.x1 <= nx && self.y1 <= ny
    }

    /// Flat cell indices, x-major within each row of y.
    pub fn cells(&self, nx: usize) -> impl Iterator<Item = usize> + '_ {
        (self.y0..self.y1).flat_map(move |y| (self.x0..self.x1).map(move |x| y * nx + x))
    }
}

/// Per-cell material: Ms encodes geometry (0 = void) and scattering spots,
/// alpha encodes absorbing strips.
#[derive(Debug, Clone, PartialEq)]
pub struct MaterialMap {
    pub ms_per_cell: Vec<f64>,
    pub alpha_per_cell: Vec<f64>,
}

impl MaterialMap {
    pub fn uniform(cells: usize, params: &MaterialParams) -> Self {
        Self {
            ms_per_cell: vec![params.ms_base; cells],
            alpha_per_cell: vec![params.alpha; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.ms_per_cell.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ms_per_cell.is_empty()
    }

    pub fn is_active(&self, cell: usize) -> bool {
        self.ms_per_cell[cell] > 0.0
    }
}

/// Single-cell-thick finite-difference film.
#[derive(Debug, Clone, PartialEq)]
pub struct SimGrid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    /// Cubic cell edge (m).
    pub cell_size: f64,
    pub params: MaterialParams,
    pub material: MaterialMap,
}

impl SimGrid {
    pub fn new(nx: usize, ny: usize, cell_size: f64, params: MaterialParams) -> Result<Self> {
        if nx == 0 || ny == 0 {
            return Err(Error::config(format!("empty grid {nx}x{ny}")));
        }
        if !(cell_size > 0.0) {
            return Err(Error::config(format!("cell size {cell_size} must be positive")));
        }
        params.validate()?;
        Ok(Self {
            nx,
            ny,
            nz: 1,
            cell_size,
            params,
            material: MaterialMap::uniform(nx * ny, &params),
        })
    }

    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.nx + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.nx, cell / self.nx)
    }

    pub fn full_rect(&self) -> CellRect {
        CellRect::new(0, self.nx, 0, self.ny)
    }

    /// Removes material from every cell in `rect`.
    pub fn carve_void(&mut self, rect: &CellRect) {
        for c in rect.cells(self.nx) {
            self.material.ms_per_cell[c] = 0.0;
        }
    }

    pub fn active_count(&self) -> usize {
        self.material.ms_per_cell.iter().filter(|&&ms| ms > 0.0).count()
    }

    pub(crate) fn check_material(&self) -> Result<()> {
        let n = self.cells();
        if self.material.ms_per_cell.len() != n || self.material.alpha_per_cell.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: self.material.ms_per_cell.len(),
            });
        }
        Ok(())
    }
}
