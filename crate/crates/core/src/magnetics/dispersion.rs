//! Linear spin-wave dispersion of the implemented discrete model.
//!
//! Small-amplitude waves uniform across the guide width, with the
//! 4-neighbour exchange factor K(k) = 2(1 − cos kΔ)/Δ² and the local
//! thin-film demag term:
//!
//! * out-of-plane saturation: ω = γ (B₀ − μ0Ms + D K)
//! * in-plane saturation (bias ⟂ propagation): ω² = γ² (B₀ + D K)(B₀ + D K + μ0Ms)
//!
//! with D = 2A/Ms.

use std::f64::consts::TAU;

use super::absorber::build_absorber;
use super::grid::{MaterialParams, SimGrid, MU0};
use super::integrator::{DriveRegions, Simulator};
use super::state::{MagState, Vec3};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Saturation {
    OutOfPlane,
    InPlane,
}

#[derive(Debug, Clone, Copy)]
pub struct Dispersion {
    pub saturation: Saturation,
    /// |bias| (T).
    pub bias: f64,
    pub params: MaterialParams,
    pub cell_size: f64,
}

impl Dispersion {
    fn stiffness(&self) -> f64 {
        2.0 * self.params.a_ex / self.params.ms_base
    }

    fn exchange_factor(&self, k: f64) -> f64 {
        let dx = self.cell_size;
        2.0 * (1.0 - (k * dx).cos()) / (dx * dx)
    }

    fn m_sat(&self) -> f64 {
        MU0 * self.params.ms_base
    }

    /// Angular frequency (rad/s) of wavenumber `k` (1/m).
    pub fn omega(&self, k: f64) -> f64 {
        let b = self.bias + self.stiffness() * self.exchange_factor(k);
        let g = self.params.gamma;
        match self.saturation {
            Saturation::OutOfPlane => g * (b - self.m_sat()),
            Saturation::InPlane => g * (b * (b + self.m_sat())).sqrt(),
        }
    }

    pub fn frequency(&self, k: f64) -> f64 {
        self.omega(k) / TAU
    }

    /// Wavenumber carrying `freq` (Hz); errors below the band bottom or
    /// beyond the grid's Nyquist limit.
    pub fn wavenumber(&self, freq: f64) -> Result<f64> {
        let w = TAU * freq / self.params.gamma;
        let ms = self.m_sat();
        // total field B₀ + D K needed for this frequency
        let b = match self.saturation {
            Saturation::OutOfPlane => w + ms,
            Saturation::InPlane => 0.5 * (-ms + (ms * ms + 4.0 * w * w).sqrt()),
        };
        let k_factor = (b - self.bias) / self.stiffness();
        let dx = self.cell_size;
        let c = 1.0 - k_factor * dx * dx / 2.0;
        if k_factor < 0.0 || c < -1.0 {
            return Err(Error::config(format!("{freq:.3e} Hz is outside the spin-wave band")));
        }
        Ok(c.acos() / dx)
    }

    pub fn wavelength(&self, freq: f64) -> Result<f64> {
        Ok(TAU / self.wavenumber(freq)?)
    }

    /// dω/dk (m/s).
    pub fn group_velocity(&self, k: f64) -> f64 {
        let dx = self.cell_size;
        let dk = self.stiffness() * 2.0 * (k * dx).sin() / dx;
        let g = self.params.gamma;
        match self.saturation {
            Saturation::OutOfPlane => g * dk,
            Saturation::InPlane => {
                let b = self.bias + self.stiffness() * self.exchange_factor(k);
                g * (2.0 * b + self.m_sat()) / (2.0 * (b * (b + self.m_sat())).sqrt()) * dk
            }
        }
    }
}

/// Wavelength actually produced by the solver at one drive frequency.
///
/// A strip one cell wide is saturated along the bias (z out of plane, y in
/// plane), driven by a small x field over a few cells near its left end,
/// and run until the wave has crossed the measurement window. The complex
/// response at the drive frequency is then accumulated over whole periods,
/// and the wavenumber is the slope of its unwrapped phase along x.
#[derive(Debug, Clone, Copy)]
pub struct WavelengthProbe {
    pub dispersion: Dispersion,
    pub freq: f64,
    pub dt: f64,
    /// Antenna field (T); small enough to stay linear.
    pub amplitude: f64,
    /// Window length in predicted wavelengths.
    pub window_wavelengths: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WavelengthMeasurement {
    pub predicted: f64,
    pub measured: f64,
    /// Cells in the fitted window.
    pub window_cells: usize,
    pub steps: usize,
}

impl WavelengthMeasurement {
    pub fn relative_error(&self) -> f64 {
        (self.measured - self.predicted).abs() / self.predicted
    }
}

impl WavelengthProbe {
    pub fn new(dispersion: Dispersion, freq: f64, dt: f64) -> Self {
        Self {
            dispersion,
            freq,
            dt,
            amplitude: 1e-4,
            window_wavelengths: 4.0,
        }
    }

    pub fn run(&self) -> Result<WavelengthMeasurement> {
        let d = &self.dispersion;
        let dx = d.cell_size;
        let k = d.wavenumber(self.freq)?;
        let predicted = TAU / k;
        let lambda_cells = (predicted / dx).ceil() as usize;
        let absorber = (2 * lambda_cells).max(40);
        let antenna = absorber + 4;
        let start = antenna + 4 + lambda_cells;
        let window = (self.window_wavelengths * lambda_cells as f64).ceil() as usize;
        let end = start + window;
        let nx = end + lambda_cells + absorber;

        let mut grid = SimGrid::new(nx, 1, dx, d.params)?;
        grid.material = build_absorber(&grid, absorber, 0.5)?;
        let (bias, dir): (Vec3, Vec3) = match d.saturation {
            Saturation::OutOfPlane => ([0.0, 0.0, d.bias], [0.0, 0.0, 1.0]),
            Saturation::InPlane => ([0.0, d.bias, 0.0], [0.0, 1.0, 0.0]),
        };
        let mut state = MagState::uniform(&grid, dir);
        let mut sim = Simulator::new(grid, bias)?;
        sim.check_dt(self.dt)?;

        let w = TAU * self.freq;
        let travel = (end - antenna) as f64 * dx / d.group_velocity(k);
        let period = 1.0 / self.freq;
        let settle = 1.5 * travel + 20.0 * period;
        let lock_periods = (0.2e-9 / period).ceil().max(4.0);
        let per_period = ((period / self.dt).round() as usize).max(8);
        let h = period / per_period as f64;
        sim.check_dt(h)?;
        let settle_steps = (settle / h).ceil() as usize;
        let lock_steps = lock_periods as usize * per_period;

        let regions = DriveRegions::new(vec![(antenna..antenna + 4).collect()]);
        let amp = self.amplitude;
        let mut drive = |t: f64, a: &mut [Vec3]| {
            a[0] = [amp * (w * t).sin(), 0.0, 0.0];
            Ok(())
        };
        sim.advance(&mut state, h, settle_steps, &regions, &mut drive)?;
        let mut re = vec![0.0; window];
        let mut im = vec![0.0; window];
        for _ in 0..lock_steps {
            sim.advance(&mut state, h, 1, &regions, &mut drive)?;
            let (c, s) = ((w * state.t).cos(), (w * state.t).sin());
            for i in 0..window {
                let mx = state.m[start + i][0];
                re[i] += mx * c;
                im[i] -= mx * s;
            }
        }

        let mut phase = Vec::with_capacity(window);
        for i in 0..window {
            let p = im[i].atan2(re[i]);
            let p = match phase.last() {
                Some(&prev) => prev + wrap(p - prev),
                None => p,
            };
            phase.push(p);
        }
        let slope = fit_slope(&phase) / dx;
        Ok(WavelengthMeasurement {
            predicted,
            measured: TAU / slope.abs(),
            window_cells: window,
            steps: settle_steps + lock_steps,
        })
    }
}

/// Into (−π, π].
fn wrap(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > std::f64::consts::PI {
        r - TAU
    } else {
        r
    }
}

/// Least-squares slope of `y` against its index.
fn fit_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let dxi = i as f64 - xm;
        sxy += dxi * (v - ym);
        sxx += dxi * dxi;
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn disp(s: Saturation, bias: f64) -> Dispersion {
        Dispersion {
            saturation: s,
            bias,
            params: MaterialParams::default(),
            cell_size: 2.5e-9,
        }
    }

    #[test]
    fn wavenumber_inverts_frequency() {
        for (s, b, f) in [(Saturation::OutOfPlane, 0.25, 6.2e9), (Saturation::InPlane, 0.2, 14e9)] {
            let d = disp(s, b);
            let k = d.wavenumber(f).unwrap();
            assert_relative_eq!(d.frequency(k), f, max_relative = 1e-10);
        }
    }

    #[test]
    fn wavelengths_near_continuum_estimates() {
        let fv = disp(Saturation::OutOfPlane, 0.25).wavelength(6.2e9).unwrap();
        let ip = disp(Saturation::InPlane, 0.2).wavelength(14e9).unwrap();
        assert!((fv - 116e-9).abs() < 3e-9, "{fv}");
        assert!((ip - 95e-9).abs() < 3e-9, "{ip}");
    }

    #[test]
    fn group_velocity_matches_finite_difference() {
        for (s, b) in [(Saturation::OutOfPlane, 0.25), (Saturation::InPlane, 0.2)] {
            let d = disp(s, b);
            let k = 5e7;
            let h = 1e2;
            let fd = (d.omega(k + h) - d.omega(k - h)) / (2.0 * h);
            assert_relative_eq!(d.group_velocity(k), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn slope_of_wrapped_ramp() {
        let ramp: Vec<f64> = (0..50).map(|i| 0.7 * i as f64 + 0.3).collect();
        let mut acc = Vec::new();
        for &v in &ramp {
            let p = wrap(v);
            acc.push(match acc.last() {
                Some(&prev) => prev + wrap(p - prev),
                None => p,
            });
        }
        assert_relative_eq!(fit_slope(&acc), 0.7, max_relative = 1e-12);
    }

    #[test]
    fn coarse_strip_wavelength() {
        // 5 nm cells keep this quick; the oracle uses the same discretization
        let d = Dispersion {
            cell_size: 5e-9,
            ..disp(Saturation::OutOfPlane, 0.25)
        };
        let m = WavelengthProbe::new(d, 6.2e9, 100e-15).run().unwrap();
        assert!(m.relative_error() < 0.1, "{m:?}");
    }

    #[test]
    fn below_band_is_error() {
        assert!(disp(Saturation::OutOfPlane, 0.25).wavenumber(1e9).is_err());
    }
}
