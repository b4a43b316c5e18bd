//! Antenna drive synthesis, probe sampling and the interval clock that ties
//! the two to the integrator.

use std::f64::consts::{PI, TAU};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::magnetics::{
    build_absorber, dot, norm, CellRect, DriveRegions, FieldGrid, MagState, MaterialParams, SimGrid, Simulator, Vec3,
};

/// S = I·sin(2πft).
pub fn encode_amplitude(input: f64, freq: f64, t: f64) -> Result<f64> {
    check_input(input)?;
    Ok(input * (TAU * freq * t).sin())
}

/// S = sin(2πft + πI).
pub fn encode_phase(input: f64, freq: f64, t: f64) -> Result<f64> {
    check_input(input)?;
    Ok((TAU * freq * t + PI * input).sin())
}

fn check_input(input: f64) -> Result<()> {
    if (0.0..=1.0).contains(&input) {
        Ok(())
    } else {
        Err(Error::InputRange { value: input })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoding {
    Amplitude,
    Phase,
}

impl Encoding {
    pub fn encode(self, input: f64, freq: f64, t: f64) -> Result<f64> {
        match self {
            Encoding::Amplitude => encode_amplitude(input, freq, t),
            Encoding::Phase => encode_phase(input, freq, t),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Encoding::Amplitude => "amplitude",
            Encoding::Phase => "phase",
        }
    }
}

/// Uniform microstrip-like field over a cell rectangle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntennaSpec {
    pub region: CellRect,
    /// Unit field direction.
    pub polarization: Vec3,
    /// Field (T) at drive multiplier 1.
    pub base_amplitude: f64,
    /// Carrier frequency (Hz).
    pub frequency: f64,
}

impl AntennaSpec {
    /// `static_dir` is the equilibrium magnetization the antenna must tilt.
    pub fn validate(&self, grid: &SimGrid, static_dir: Vec3) -> Result<()> {
        if !self.region.fits(grid.nx, grid.ny) {
            return Err(Error::config(format!(
                "antenna region {:?} is empty or outside the grid",
                self.region
            )));
        }
        if !(self.base_amplitude > 0.0) || !(self.frequency > 0.0) {
            return Err(Error::config("antenna amplitude and frequency must be positive"));
        }
        if (norm(self.polarization) - 1.0).abs() > 1e-9 {
            return Err(Error::config("antenna polarization must be a unit vector"));
        }
        let s = norm(static_dir);
        if s > 0.0 && dot(self.polarization, static_dir).abs() / s > 1e-9 {
            return Err(Error::config(
                "antenna polarization must be perpendicular to the static magnetization",
            ));
        }
        Ok(())
    }

    /// Field for drive multiplier `s`.
    pub fn field(&self, s: f64) -> Vec3 {
        let a = s * self.base_amplitude;
        [
            a * self.polarization[0],
            a * self.polarization[1],
            a * self.polarization[2],
        ]
    }
}

/// Adds `s · base_amplitude · polarization` over the antenna region.
pub fn apply_drive(antenna: &AntennaSpec, s: f64, s_max: f64, nx: usize, out: &mut FieldGrid) -> Result<()> {
    if !(s.abs() <= s_max) {
        return Err(Error::DriveSaturation {
            value: s,
            cap: s_max,
            interval: 0,
        });
    }
    let h = antenna.field(s);
    let n = out.len();
    for c in antenna.region.cells(nx) {
        let cell = out.h.get_mut(c).ok_or(Error::Dimension {
            expected: c + 1,
            actual: n,
        })?;
        for k in 0..3 {
            cell[k] += h[k];
        }
    }
    Ok(())
}

/// Averages one magnetization component over the active cells of a region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub region: CellRect,
    /// 0 = x, 1 = y, 2 = z.
    pub component: usize,
}

impl ProbeSpec {
    pub fn validate(&self, grid: &SimGrid, antennas: &[AntennaSpec]) -> Result<()> {
        if !self.region.fits(grid.nx, grid.ny) {
            return Err(Error::config(format!(
                "probe region {:?} is empty or outside the grid",
                self.region
            )));
        }
        if self.component > 2 {
            return Err(Error::config(format!(
                "probe component {} is not 0, 1 or 2",
                self.component
            )));
        }
        if antennas.iter().any(|a| a.region.overlaps(&self.region)) {
            return Err(Error::config("probe region overlaps an antenna"));
        }
        self.active_cells(grid).map(|_| ())
    }

    fn active_cells(&self, grid: &SimGrid) -> Result<Vec<usize>> {
        let cells: Vec<usize> = self
            .region
            .cells(grid.nx)
            .filter(|&c| c < grid.cells() && grid.material.is_active(c))
            .collect();
        if cells.is_empty() {
            return Err(Error::config(format!(
                "probe region {:?} holds no magnetic cells",
                self.region
            )));
        }
        Ok(cells)
    }
}

/// Mean of the probed component over the region's active cells.
pub fn sample_probe(state: &MagState, grid: &SimGrid, probe: &ProbeSpec) -> Result<f64> {
    if state.m.len() != grid.cells() {
        return Err(Error::Dimension {
            expected: grid.cells(),
            actual: state.m.len(),
        });
    }
    if probe.component > 2 {
        return Err(Error::config(format!(
            "probe component {} is not 0, 1 or 2",
            probe.component
        )));
    }
    let cells = probe.active_cells(grid)?;
    Ok(cells.iter().map(|&c| state.m[c][probe.component]).sum::<f64>() / cells.len() as f64)
}

/// Sampled drive multiplier waveform, bounded by a cap.
#[derive(Debug, Clone, PartialEq)]
pub struct DriveSignal {
    pub sample_period: f64,
    pub values: Vec<f64>,
    pub cap: f64,
}

impl DriveSignal {
    pub fn new(sample_period: f64, values: Vec<f64>, cap: f64) -> Result<Self> {
        if let Some(&v) = values.iter().find(|v| !(v.abs() <= cap)) {
            return Err(Error::DriveSaturation {
                value: v,
                cap,
                interval: 0,
            });
        }
        Ok(Self {
            sample_period,
            values,
            cap,
        })
    }

    /// Zero-order hold; zero outside the sampled span.
    pub fn at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let k = (t / self.sample_period + 1e-9).floor() as usize;
        self.values.get(k).copied().unwrap_or(0.0)
    }
}

/// Interval length and probe sample spacing. Both interval endpoints are
/// sampled, so consecutive intervals share a boundary sample time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleClock {
    /// Interval length (s).
    pub interval: f64,
    /// Probe sample spacing (s).
    pub sample_period: f64,
}

impl Default for SampleClock {
    fn default() -> Self {
        Self {
            interval: 0.3e-9,
            sample_period: 0.01e-9,
        }
    }
}

impl SampleClock {
    /// Sample steps per interval (30 by default).
    pub fn steps(&self) -> usize {
        (self.interval / self.sample_period).round() as usize
    }

    /// Samples per interval including both endpoints (31 by default).
    pub fn samples(&self) -> usize {
        self.steps() + 1
    }

    pub fn validate(&self) -> Result<()> {
        let ratio = self.interval / self.sample_period;
        if !(self.sample_period > 0.0) || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::config(format!(
                "interval {:e} s is not a whole number of {:e} s samples",
                self.interval, self.sample_period
            )));
        }
        Ok(())
    }

    /// Integrator steps per sample step; errors unless `dt` divides the spacing.
    pub fn steps_per_sample(&self, dt: f64) -> Result<usize> {
        let ratio = self.sample_period / dt;
        if !(dt > 0.0) || ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-6 {
            return Err(Error::config(format!(
                "time step {dt:e} s does not divide the sample spacing {:e} s",
                self.sample_period
            )));
        }
        Ok(ratio.round() as usize)
    }
}

/// Waveguide discretization, boundary treatment and transducer levels shared
/// by both reservoir architectures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilmConfig {
    pub material: MaterialParams,
    pub nx: usize,
    pub ny: usize,
    /// Cell edge (m).
    pub cell_size: f64,
    /// Integrator step (s).
    pub dt: f64,
    pub absorber_cells: usize,
    pub absorber_alpha: f64,
    /// Duration (s) and damping of the pre-drive relaxation.
    pub relax_time: f64,
    pub relax_alpha: f64,
    /// Antenna field (T) at drive multiplier 1.
    pub base_amplitude: f64,
    /// Largest allowed |drive multiplier|.
    pub s_max: f64,
    pub clock: SampleClock,
}

impl Default for FilmConfig {
    fn default() -> Self {
        Self {
            material: MaterialParams::default(),
            nx: 500,
            ny: 20,
            cell_size: 2.5e-9,
            dt: 25e-15,
            absorber_cells: 40,
            absorber_alpha: 0.5,
            relax_time: 1e-9,
            relax_alpha: 0.1,
            base_amplitude: 1e-3,
            s_max: 2.0,
            clock: SampleClock::default(),
        }
    }
}

impl FilmConfig {
    /// Coarse waveguide for single-core runs: 5 nm cells, 200 fs steps.
    pub fn desk(nx: usize) -> Self {
        Self {
            nx,
            ny: 10,
            cell_size: 5e-9,
            dt: 200e-15,
            absorber_cells: 16,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        self.clock.validate()?;
        self.clock.steps_per_sample(self.dt)?;
        if !(self.s_max > 0.0) || !(self.base_amplitude > 0.0) {
            return Err(Error::config("s_max and base_amplitude must be positive"));
        }
        if !(self.relax_time >= 0.0) || !(self.relax_alpha > 0.0 && self.relax_alpha < 1.0) {
            return Err(Error::config("relaxation needs time ≥ 0 and damping in (0, 1)"));
        }
        Ok(())
    }

    /// Uniform film with absorbing ends.
    pub fn grid(&self) -> Result<SimGrid> {
        let mut grid = SimGrid::new(self.nx, self.ny, self.cell_size, self.material)?;
        grid.material = build_absorber(&grid, self.absorber_cells, self.absorber_alpha)?;
        Ok(grid)
    }

    /// Converts a length (m) to a whole number of cells, at least 1.
    pub fn cells(&self, length: f64) -> usize {
        ((length / self.cell_size).round() as usize).max(1)
    }
}

/// A relaxed film with its antennas and probes, advanced one sample step at
/// a time.
#[derive(Debug, Clone)]
pub struct DrivenFilm {
    sim: Simulator,
    state: MagState,
    antennas: Vec<AntennaSpec>,
    probes: Vec<ProbeSpec>,
    probe_cells: Vec<Vec<usize>>,
    regions: DriveRegions,
    dt: f64,
    steps_per_sample: usize,
    clock: SampleClock,
    s_max: f64,
}

impl DrivenFilm {
    /// Builds the film with m along `bias` and relaxes it.
    pub fn new(
        grid: SimGrid,
        bias: Vec3,
        antennas: Vec<AntennaSpec>,
        probes: Vec<ProbeSpec>,
        config: &FilmConfig,
    ) -> Result<Self> {
        config.validate()?;
        for a in &antennas {
            a.validate(&grid, bias)?;
        }
        for p in &probes {
            p.validate(&grid, &antennas)?;
        }
        let probe_cells = probes.iter().map(|p| p.active_cells(&grid)).collect::<Result<_>>()?;
        let regions = DriveRegions::new(antennas.iter().map(|a| a.region.cells(grid.nx).collect()).collect());
        let state = MagState::uniform(&grid, bias);
        let sim = Simulator::new(grid, bias)?;
        sim.check_dt(config.dt)?;
        let mut film = Self {
            sim,
            state,
            antennas,
            probes,
            probe_cells,
            regions,
            dt: config.dt,
            steps_per_sample: config.clock.steps_per_sample(config.dt)?,
            clock: config.clock,
            s_max: config.s_max,
        };
        if config.relax_time > 0.0 {
            let relax_dt = film.sim.stability_limit().min(config.dt);
            film.sim
                .relax(&mut film.state, config.relax_time, relax_dt, config.relax_alpha)?;
        }
        Ok(film)
    }

    pub fn grid(&self) -> &SimGrid {
        self.sim.grid()
    }

    pub fn state(&self) -> &MagState {
        &self.state
    }

    pub fn set_state(&mut self, state: MagState) -> Result<()> {
        if state.m.len() != self.grid().cells() {
            return Err(Error::Dimension {
                expected: self.grid().cells(),
                actual: state.m.len(),
            });
        }
        self.state = state;
        Ok(())
    }

    pub fn antennas(&self) -> &[AntennaSpec] {
        &self.antennas
    }

    pub fn probes(&self) -> &[ProbeSpec] {
        &self.probes
    }

    pub fn clock(&self) -> SampleClock {
        self.clock
    }

    /// Current reading of every probe.
    pub fn read_probes(&self) -> Vec<f64> {
        self.probes
            .iter()
            .zip(&self.probe_cells)
            .map(|(p, cells)| cells.iter().map(|&c| self.state.m[c][p.component]).sum::<f64>() / cells.len() as f64)
            .collect()
    }

    /// Integrates over sample step `k` of `interval`. `mult(t_rel, out)`
    /// fills one drive multiplier per antenna, with `t_rel` measured from the
    /// start of the interval. Errors carry the interval index.
    pub fn advance_sample<F>(&mut self, interval: usize, k: usize, mut mult: F) -> Result<()>
    where
        F: FnMut(f64, &mut [f64]) -> Result<()>,
    {
        let t_start = interval as f64 * self.clock.interval;
        // the clock restarts exactly on every sample to keep round-off from accumulating
        self.state.t = t_start + k as f64 * self.clock.sample_period;
        let cap = self.s_max;
        let mut s = vec![0.0; self.antennas.len()];
        let antennas = &self.antennas;
        let mut drive = |t: f64, amps: &mut [Vec3]| -> Result<()> {
            s.fill(0.0);
            mult(t - t_start, &mut s)?;
            for ((amp, a), &v) in amps.iter_mut().zip(antennas).zip(s.iter()) {
                if !(v.abs() <= cap) {
                    return Err(Error::DriveSaturation {
                        value: v,
                        cap,
                        interval,
                    });
                }
                *amp = a.field(v);
            }
            Ok(())
        };
        self.sim
            .advance(
                &mut self.state,
                self.dt,
                self.steps_per_sample,
                &self.regions,
                &mut drive,
            )
            .map_err(|e| e.in_interval(interval))
    }
}

/// Writes `(interval_index, sample_index, t_ns, value)` rows; `samples[i]`
/// holds interval i.
pub fn write_probe_trace(path: &Path, clock: &SampleClock, samples: &[Vec<f64>]) -> Result<()> {
    let io = |e| Error::io(path, e);
    let file = std::fs::File::create(path).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    writeln!(w, "interval_index,sample_index,t_ns,value").map_err(io)?;
    for (i, row) in samples.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let t = (i as f64 * clock.interval + j as f64 * clock.sample_period) * 1e9;
            writeln!(w, "{i},{j},{t:.4},{v:e}").map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
