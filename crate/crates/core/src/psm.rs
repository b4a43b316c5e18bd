//! Parallel input scattering model: a waveguide whose input end is split by
//! a void slit into two driven channels, a region of randomly placed
//! reduced-Ms spots that mixes the two waves, and 1–3 output probes.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{encode_amplitude, AntennaSpec, DrivenFilm, FilmConfig, ProbeSpec, SampleClock};
use crate::magnetics::{normalized, CellRect, SimGrid, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpotConfig {
    pub count: usize,
    /// Spot radius (m).
    pub radius: f64,
    /// Fractional Ms reduction inside a spot, in (0, 0.5].
    pub ms_reduction: f64,
    pub seed: u64,
    /// Scattering region as fractions of the waveguide length.
    pub start: f64,
    pub end: f64,
}

impl Default for SpotConfig {
    fn default() -> Self {
        Self {
            count: 20,
            radius: 12.5e-9,
            ms_reduction: 0.2,
            seed: 0,
            start: 0.2,
            end: 0.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PsmConfig {
    pub film: FilmConfig,
    /// Static field (T); out of plane.
    pub bias: Vec3,
    pub frequency: f64,
    pub n_output_channels: usize,
    pub spots: SpotConfig,
    /// Slit length as a fraction of the waveguide length.
    pub slit_length: f64,
    /// Slit height in cells, centred on the midline.
    pub slit_cells: usize,
    /// Gap (m) between the inner edge of the left absorber and the antennas.
    pub antenna_offset: f64,
    pub antenna_width: f64,
    /// Output probes start at this fraction of the length.
    pub output_start: f64,
    pub probe_width: f64,
    pub polarization: Vec3,
    pub probe_component: usize,
    /// Undriven intervals recorded after the last input.
    pub tail_intervals: usize,
}

impl Default for PsmConfig {
    fn default() -> Self {
        Self {
            film: FilmConfig::default(),
            bias: [0.0, 0.0, 0.25],
            frequency: 6.2e9,
            n_output_channels: 1,
            spots: SpotConfig::default(),
            slit_length: 0.2,
            slit_cells: 2,
            antenna_offset: 10e-9,
            antenna_width: 10e-9,
            output_start: 0.8,
            probe_width: 10e-9,
            polarization: [1.0, 0.0, 0.0],
            probe_component: 0,
            tail_intervals: 2,
        }
    }
}

impl PsmConfig {
    /// 600 nm guide on the coarse single-core grid.
    pub fn desk() -> Self {
        Self {
            film: FilmConfig::desk(120),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Spot {
    pub x: usize,
    pub y: usize,
    /// Radius (m).
    pub radius: f64,
    pub ms_reduction: f64,
}

/// Seeded spot layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterSpots {
    pub spots: Vec<Spot>,
    pub seed: u64,
}

impl ScatterSpots {
    /// Uniform centres such that every disk lies inside `region`.
    pub fn generate(cfg: &SpotConfig, region: CellRect, cell_size: f64) -> Result<Self> {
        if !(cfg.ms_reduction > 0.0 && cfg.ms_reduction <= 0.5) {
            return Err(Error::config(format!(
                "ms_reduction {} outside (0, 0.5]",
                cfg.ms_reduction
            )));
        }
        let r = (cfg.radius / cell_size).floor() as usize;
        let fits = region.x0 + 2 * r < region.x1 && region.y0 + 2 * r < region.y1;
        if cfg.count > 0 && (!fits || !(cfg.radius > 0.0)) {
            return Err(Error::config(format!(
                "spots of radius {:e} m do not fit the scattering region {region:?}",
                cfg.radius
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let spots = (0..cfg.count)
            .map(|_| Spot {
                x: rng.random_range(region.x0 + r..region.x1 - r),
                y: rng.random_range(region.y0 + r..region.y1 - r),
                radius: cfg.radius,
                ms_reduction: cfg.ms_reduction,
            })
            .collect();
        Ok(Self { spots, seed: cfg.seed })
    }

    /// This layout plus its reflection across the waveguide midline.
    pub fn mirrored(&self, ny: usize) -> Self {
        let mut spots = self.spots.clone();
        spots.extend(self.spots.iter().map(|s| Spot { y: ny - 1 - s.y, ..*s }));
        Self { spots, seed: self.seed }
    }

    /// Lowers Ms under every spot; overlapping spots take the deepest reduction.
    pub fn apply(&self, grid: &mut SimGrid) -> Result<()> {
        let base = grid.params.ms_base;
        let mut red = vec![0.0f64; grid.cells()];
        for s in &self.spots {
            let rc = s.radius / grid.cell_size;
            let r = rc.floor() as usize;
            if s.x < r || s.y < r || s.x + r >= grid.nx || s.y + r >= grid.ny {
                return Err(Error::config(format!("spot at ({}, {}) overflows the grid", s.x, s.y)));
            }
            for y in s.y - r..=s.y + r {
                for x in s.x - r..=s.x + r {
                    let (dx, dy) = (x as f64 - s.x as f64, y as f64 - s.y as f64);
                    if dx * dx + dy * dy <= rc * rc + 1e-9 {
                        let c = grid.index(x, y);
                        red[c] = red[c].max(s.ms_reduction);
                    }
                }
            }
        }
        for (ms, r) in grid.material.ms_per_cell.iter_mut().zip(red) {
            if *ms > 0.0 {
                *ms = base * (1.0 - r);
            }
        }
        Ok(())
    }

    /// `(x_cell, y_cell, radius_cells, ms_reduction)` rows.
    pub fn write_csv(&self, path: &Path, cell_size: f64) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "x_cell,y_cell,radius_cells,ms_reduction").map_err(io)?;
        for s in &self.spots {
            writeln!(w, "{},{},{},{}", s.x, s.y, s.radius / cell_size, s.ms_reduction).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsmGeometry {
    pub slit: CellRect,
    pub inputs: [AntennaSpec; 2],
    pub outputs: Vec<ProbeSpec>,
    pub spots: ScatterSpots,
    pub scatter_region: CellRect,
    pub bias: Vec3,
    pub frequency: f64,
}

/// Lays out slit, antennas, probes and spots; returns the geometry and the
/// grid carrying the resulting material map.
pub fn build_psm(config: &PsmConfig) -> Result<(PsmGeometry, SimGrid)> {
    build_with_spots(config, None)
}

fn build_with_spots(config: &PsmConfig, spots: Option<ScatterSpots>) -> Result<(PsmGeometry, SimGrid)> {
    let f = &config.film;
    let (nx, ny) = (f.nx, f.ny);
    if !(1..=3).contains(&config.n_output_channels) {
        return Err(Error::config(format!(
            "n_output_channels must be 1, 2 or 3, got {}",
            config.n_output_channels
        )));
    }
    if config.slit_cells == 0 || config.slit_cells + 2 > ny || (ny - config.slit_cells) % 2 != 0 {
        return Err(Error::config(format!(
            "a {}-cell slit cannot split {ny} rows into two equal channels",
            config.slit_cells
        )));
    }
    let frac = |x: f64| (x * nx as f64).round() as usize;
    let y0 = (ny - config.slit_cells) / 2;
    let slit = CellRect::new(0, frac(config.slit_length), y0, y0 + config.slit_cells);

    let ax = f.absorber_cells + (config.antenna_offset / f.cell_size).round() as usize;
    let aw = f.cells(config.antenna_width);
    if ax + aw > slit.x1 {
        return Err(Error::config("input antennas must sit beside the slit"));
    }
    let pol = normalized(config.polarization);
    let antenna = |y0, y1| AntennaSpec {
        region: CellRect::new(ax, ax + aw, y0, y1),
        polarization: pol,
        base_amplitude: f.base_amplitude,
        frequency: config.frequency,
    };
    let inputs = [antenna(0, slit.y0), antenna(slit.y1, ny)];

    let px = frac(config.output_start);
    let pw = f.cells(config.probe_width);
    if px + pw > nx.saturating_sub(f.absorber_cells) {
        return Err(Error::config("output probes overlap the right absorber"));
    }
    let n = config.n_output_channels;
    let outputs = (0..n)
        .map(|c| ProbeSpec {
            region: CellRect::new(px, px + pw, c * ny / n, (c + 1) * ny / n),
            component: config.probe_component,
        })
        .collect();

    let scatter_region = CellRect::new(frac(config.spots.start), frac(config.spots.end), 0, ny);
    if scatter_region.x0 < slit.x1 || scatter_region.x1 > px {
        return Err(Error::config(
            "scattering region must lie between the slit and the outputs",
        ));
    }
    let spots = match spots {
        Some(s) => s,
        None => ScatterSpots::generate(&config.spots, scatter_region, f.cell_size)?,
    };

    let mut grid = f.grid()?;
    spots.apply(&mut grid)?;
    grid.carve_void(&slit);
    Ok((
        PsmGeometry {
            slit,
            inputs,
            outputs,
            spots,
            scatter_region,
            bias: config.bias,
            frequency: config.frequency,
        },
        grid,
    ))
}

/// Probe samples per channel and interval.
#[derive(Debug, Clone, PartialEq)]
pub struct PsmTrace {
    pub clock: SampleClock,
    /// `samples[channel][interval][sample]`.
    pub samples: Vec<Vec<Vec<f64>>>,
}

impl PsmTrace {
    pub fn channels(&self) -> usize {
        self.samples.len()
    }

    pub fn intervals(&self) -> usize {
        self.samples.first().map_or(0, |c| c.len())
    }

    /// RMS of each interval of `channel`.
    pub fn interval_rms(&self, channel: usize) -> Vec<f64> {
        self.samples[channel]
            .iter()
            .map(|s| (s.iter().map(|v| v * v).sum::<f64>() / s.len() as f64).sqrt())
            .collect()
    }

    /// Appends `(sample_id, channel, interval, sample, t_ns, value)` rows.
    pub fn write_csv_rows(&self, w: &mut impl Write, sample_id: usize) -> std::io::Result<()> {
        for (c, ch) in self.samples.iter().enumerate() {
            for (i, iv) in ch.iter().enumerate() {
                for (j, v) in iv.iter().enumerate() {
                    let t = (i as f64 * self.clock.interval + j as f64 * self.clock.sample_period) * 1e9;
                    writeln!(w, "{sample_id},{c},{i},{j},{t:.4},{v:e}")?;
                }
            }
        }
        Ok(())
    }

    pub fn write_csv(traces: &[PsmTrace], path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "sample_id,channel,interval,sample,t_ns,value").map_err(io)?;
        for (id, t) in traces.iter().enumerate() {
            t.write_csv_rows(&mut w, id).map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// Channel-major, then interval, then sample.
pub fn psm_features(trace: &PsmTrace) -> Vec<f64> {
    trace.samples.iter().flatten().flatten().copied().collect()
}

/// A relaxed scattering guide, reusable across samples.
#[derive(Debug, Clone)]
pub struct Psm {
    config: PsmConfig,
    geometry: PsmGeometry,
    film: DrivenFilm,
}

impl Psm {
    pub fn new(config: PsmConfig) -> Result<Self> {
        Self::build(config, None)
    }

    /// Uses `spots` instead of the seeded layout.
    pub fn with_spots(config: PsmConfig, spots: ScatterSpots) -> Result<Self> {
        Self::build(config, Some(spots))
    }

    fn build(config: PsmConfig, spots: Option<ScatterSpots>) -> Result<Self> {
        config.film.validate()?;
        let (geometry, grid) = build_with_spots(&config, spots)?;
        let film = DrivenFilm::new(
            grid,
            config.bias,
            geometry.inputs.to_vec(),
            geometry.outputs.clone(),
            &config.film,
        )?;
        Ok(Self { config, geometry, film })
    }

    pub fn config(&self) -> &PsmConfig {
        &self.config
    }

    pub fn geometry(&self) -> &PsmGeometry {
        &self.geometry
    }

    pub fn film(&self) -> &DrivenFilm {
        &self.film
    }

    /// One amplitude-encoded interval per input pair, then the tail.
    pub fn run(&self, pairs: &[(f64, f64)]) -> Result<PsmTrace> {
        let clock = self.config.film.clock;
        let steps = clock.steps();
        let freq = self.config.frequency;
        let n_int = pairs.len() + self.config.tail_intervals;
        let n_ch = self.geometry.outputs.len();
        let mut samples = vec![Vec::with_capacity(n_int); n_ch];
        let mut film = self.film.clone();
        for i in 0..n_int {
            let (a, b) = pairs.get(i).copied().unwrap_or((0.0, 0.0));
            for v in [a, b] {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InputRange { value: v });
                }
            }
            let mut block = vec![Vec::with_capacity(steps + 1); n_ch];
            for k in 0..=steps {
                for (c, v) in film.read_probes().into_iter().enumerate() {
                    block[c].push(v);
                }
                if k == steps {
                    break;
                }
                film.advance_sample(i, k, |t, s| {
                    s[0] = encode_amplitude(a, freq, t)?;
                    s[1] = encode_amplitude(b, freq, t)?;
                    Ok(())
                })?;
            }
            for (c, b) in block.into_iter().enumerate() {
                samples[c].push(b);
            }
        }
        Ok(PsmTrace { clock, samples })
    }
}

/// Builds and relaxes a guide for `config`, then runs it once.
pub fn run_psm(pairs: &[(f64, f64)], config: &PsmConfig) -> Result<PsmTrace> {
    Psm::new(config.clone())?.run(pairs)
}

/// Layers of guides: every pair of single-output guides in one layer feeds
/// the two input channels of one guide in the next.
#[derive(Debug, Clone)]
pub struct Cascade {
    layers: Vec<Vec<Psm>>,
}

impl Cascade {
    pub fn new(layers: Vec<Vec<PsmConfig>>) -> Result<Self> {
        if layers.is_empty() || layers.iter().any(|l| l.is_empty()) {
            return Err(Error::config("a cascade needs at least one guide per layer"));
        }
        for (k, pair) in layers.windows(2).enumerate() {
            if pair[0].len() != 2 * pair[1].len() {
                return Err(Error::config(format!(
                    "layer {k} has {} guides but layer {} needs {}",
                    pair[0].len(),
                    k + 1,
                    2 * pair[1].len()
                )));
            }
            if pair[0].iter().any(|c| c.n_output_channels != 1) {
                return Err(Error::config(format!(
                    "layer {k} feeds forward, so its guides need one output"
                )));
            }
        }
        let layers = layers
            .into_iter()
            .map(|l| l.into_iter().map(Psm::new).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { layers })
    }

    pub fn layers(&self) -> usize {
        self.layers.len()
    }

    /// Runs every guide of `layer` and returns their traces.
    fn run_layer(&self, layer: usize, inputs: &[Vec<(f64, f64)>]) -> Result<Vec<PsmTrace>> {
        let guides = &self.layers[layer];
        if inputs.len() != guides.len() {
            return Err(Error::config(format!(
                "layer {layer} has {} guides, got {} input sequences",
                guides.len(),
                inputs.len()
            )));
        }
        guides.iter().zip(inputs).map(|(g, p)| g.run(p)).collect()
    }

    /// Next-layer input pairs from per-interval output RMS times `scale`,
    /// clipped to 1.
    fn forward_inputs(traces: &[PsmTrace], scale: f64) -> Vec<Vec<(f64, f64)>> {
        traces
            .chunks(2)
            .map(|pair| {
                let a = pair[0].interval_rms(0);
                let b = pair[1].interval_rms(0);
                a.iter()
                    .zip(&b)
                    .map(|(x, y)| ((x * scale).min(1.0), (y * scale).min(1.0)))
                    .collect()
            })
            .collect()
    }

    /// Per-layer amplification that matches the RMS of the forwarded
    /// envelopes to the RMS of the first layer's input values over a batch.
    pub fn calibrate(&self, batch: &[Vec<Vec<(f64, f64)>>]) -> Result<Vec<f64>> {
        let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len().max(1) as f64).sqrt();
        let target: Vec<f64> = batch.iter().flatten().flatten().flat_map(|&(a, b)| [a, b]).collect();
        let target = rms(&target);
        let mut scales = Vec::with_capacity(self.layers.len().saturating_sub(1));
        let mut current: Vec<Vec<Vec<(f64, f64)>>> = batch.to_vec();
        for layer in 0..self.layers.len() - 1 {
            let traces = current
                .iter()
                .map(|inp| self.run_layer(layer, inp))
                .collect::<Result<Vec<_>>>()?;
            let env: Vec<f64> = traces.iter().flatten().flat_map(|t| t.interval_rms(0)).collect();
            let level = rms(&env);
            let scale = if level > 0.0 { target / level } else { 1.0 };
            scales.push(scale);
            current = traces.iter().map(|t| Self::forward_inputs(t, scale)).collect();
        }
        Ok(scales)
    }

    /// Runs the layers in turn; `inputs[j]` drives guide j of the first layer.
    pub fn run(&self, inputs: &[Vec<(f64, f64)>], amplification: &[f64]) -> Result<Vec<PsmTrace>> {
        if amplification.len() != self.layers.len() - 1 {
            return Err(Error::Dimension {
                expected: self.layers.len() - 1,
                actual: amplification.len(),
            });
        }
        let mut traces = self.run_layer(0, inputs)?;
        for (layer, &scale) in amplification.iter().enumerate() {
            let next = Self::forward_inputs(&traces, scale);
            traces = self.run_layer(layer + 1, &next)?;
        }
        Ok(traces)
    }
}

/// Builds the cascade and runs it once on `inputs`.
pub fn cascade_psm(
    stage_configs: Vec<Vec<PsmConfig>>,
    amplification: &[f64],
    inputs: &[Vec<(f64, f64)>],
) -> Result<Vec<PsmTrace>> {
    Cascade::new(stage_configs)?.run(inputs, amplification)
}
