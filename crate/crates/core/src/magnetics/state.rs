use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::grid::SimGrid;
use crate::error::{Error, Result};

pub type Vec3 = [f64; 3];

#[inline(always)]
pub fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline(always)]
pub fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline(always)]
pub fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn normalized(a: Vec3) -> Vec3 {
    let n = norm(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Unit magnetization per cell plus the simulation clock.
#[derive(Debug, Clone, PartialEq)]
pub struct MagState {
    pub m: Vec<Vec3>,
    /// Simulation time (s).
    pub t: f64,
}

impl MagState {
    /// Every active cell along `direction`; void cells hold zero.
    pub fn uniform(grid: &SimGrid, direction: Vec3) -> Self {
        let d = normalized(direction);
        let m = grid
            .material
            .ms_per_cell
            .iter()
            .map(|&ms| if ms > 0.0 { d } else { [0.0; 3] })
            .collect();
        Self { m, t: 0.0 }
    }

    pub fn len(&self) -> usize {
        self.m.len()
    }

    pub fn is_empty(&self) -> bool {
        self.m.is_empty()
    }

    /// Tilts every active cell by a random angle up to `max_angle` (rad)
    /// about a random transverse axis.
    pub fn perturb(&mut self, seed: u64, max_angle: f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in self.m.iter_mut() {
            if dot(*m, *m) == 0.0 {
                continue;
            }
            let theta = rng.random_range(0.0..=max_angle);
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            // orthonormal frame around m
            let helper = if m[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let u = normalized(cross(*m, helper));
            let v = cross(*m, u);
            let (s, c) = theta.sin_cos();
            for k in 0..3 {
                m[k] = c * m[k] + s * (phi.cos() * u[k] + phi.sin() * v[k]);
            }
            *m = normalized(*m);
        }
    }

    /// Largest | |m| - 1 | over active cells.
    pub fn max_norm_error(&self) -> f64 {
        self.m
            .iter()
            .filter(|m| dot(**m, **m) > 0.0)
            .map(|&m| (norm(m) - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check(&self, grid: &SimGrid) -> Result<()> {
        if self.m.len() != grid.cells() {
            return Err(Error::Dimension {
                expected: grid.cells(),
                actual: self.m.len(),
            });
        }
        Ok(())
    }
}

/// Magnetic flux density per cell, tesla (μ0·H convention).
#[derive(Debug, Clone, PartialEq)]
pub struct FieldGrid {
    pub h: Vec<Vec3>,
}

impl FieldGrid {
    pub fn zeros(cells: usize) -> Self {
        Self {
            h: vec![[0.0; 3]; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn clear(&mut self) {
        self.h.fill([0.0; 3]);
    }

    pub fn add_assign(&mut self, other: &FieldGrid) {
        for (a, b) in self.h.iter_mut().zip(&other.h) {
            a[0] += b[0];
            a[1] += b[1];
            a[2] += b[2];
        }
    }
}
