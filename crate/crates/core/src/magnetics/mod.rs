//! Thin-film Landau–Lifshitz–Gilbert solver on a single-layer finite-difference grid.

mod absorber;
pub mod dispersion;
mod fields;
mod grid;
mod integrator;
mod snapshot;
mod state;

pub use absorber::build_absorber;
pub use dispersion::{Dispersion, Saturation, WavelengthMeasurement, WavelengthProbe};
pub use fields::{
    exchange_field, llg_cell, llg_rhs, neighbor_table, thin_film_demag_field, total_energy, zeeman_field,
};
pub use grid::{CellRect, MaterialMap, MaterialParams, SimGrid, MU0};
pub use integrator::{DriveRegions, Simulator};
pub use snapshot::write_snapshot;
pub use state::{cross, dot, norm, normalized, FieldGrid, MagState, Vec3};
