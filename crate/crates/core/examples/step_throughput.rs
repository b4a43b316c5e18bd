//! Measures RK4 step throughput on the default and coarse waveguides.

use std::time::Instant;

use magnon_rc::magnetics::{DriveRegions, MagState, MaterialParams, SimGrid, Simulator, Vec3};

fn main() {
    for (nx, ny, dx, dt) in [
        (500, 20, 2.5e-9, 25e-15),
        (250, 10, 5e-9, 200e-15),
        (120, 10, 5e-9, 200e-15),
    ] {
        let grid = SimGrid::new(nx, ny, dx, MaterialParams::default()).unwrap();
        let bias = [0.0, 0.0, 0.25];
        let mut state = MagState::uniform(&grid, bias);
        state.perturb(1, 0.01);
        let mut sim = Simulator::new(grid, bias).unwrap();
        let regions = DriveRegions::new(vec![(0..ny).map(|y| y * nx + 10).collect()]);
        let mut drive = |t: f64, f: &mut [Vec3]| {
            f[0] = [1e-3 * (6.2e9 * t).sin(), 0.0, 0.0];
            Ok(())
        };
        let steps = 2000;
        let t0 = Instant::now();
        sim.advance(&mut state, dt, steps, &regions, &mut drive).unwrap();
        let el = t0.elapsed().as_secs_f64();
        let per_cell_stage = el / (steps as f64 * 4.0 * (nx * ny) as f64) * 1e9;
        let interval = 0.3e-9 / dt * el / steps as f64;
        println!(
            "{nx}x{ny} dt={dt:e}: {:.1} us/step, {per_cell_stage:.2} ns/cell-stage, {interval:.3} s per 0.3 ns interval; stability limit {:.3e}",
            el / steps as f64 * 1e6,
            sim.stability_limit()
        );
    }
}
