//! Auto-oscillation ring: a waveguide whose output antenna feeds back into
//! its input antenna, with a frozen amplification network scaling each
//! interval's drive from the previous interval's output.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::excitation::{AntennaSpec, DrivenFilm, Encoding, FilmConfig, ProbeSpec, SampleClock};
use crate::magnetics::{normalized, CellRect, MagState, Vec3};

pub const ANN_INPUTS: usize = 31;
pub const ANN_HIDDEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AorConfig {
    pub film: FilmConfig,
    /// Static field (T); in-plane and perpendicular to propagation.
    pub bias: Vec3,
    /// Carrier frequency (Hz).
    pub frequency: f64,
    pub encoding: Encoding,
    pub feedback_gain: f64,
    pub feedback_delay_samples: usize,
    pub ann_enabled: bool,
    /// Seeds the amplification network and the initial tilt, if any.
    pub seed: u64,
    /// Gap (m) between the inner edge of the left absorber and the input antenna.
    pub antenna_offset: f64,
    pub antenna_width: f64,
    /// Edge-to-edge distance (m) from input antenna to output probe.
    pub probe_distance: f64,
    pub probe_width: f64,
    pub polarization: Vec3,
    pub probe_component: usize,
    /// Output transducer gain: recorded output = gain × probed magnetization.
    pub output_gain: f64,
    /// Largest random tilt (rad) applied to the relaxed film before driving.
    pub initial_tilt: f64,
    /// Restores the relaxed film at every interval start (ablation only).
    pub reset_film_between_intervals: bool,
}

impl Default for AorConfig {
    fn default() -> Self {
        Self {
            film: FilmConfig::default(),
            bias: [0.0, 0.2, 0.0],
            frequency: 14e9,
            encoding: Encoding::Amplitude,
            feedback_gain: 0.5,
            feedback_delay_samples: 1,
            ann_enabled: true,
            seed: 0,
            antenna_offset: 10e-9,
            antenna_width: 10e-9,
            probe_distance: 100e-9,
            probe_width: 10e-9,
            polarization: [1.0, 0.0, 0.0],
            probe_component: 2,
            output_gain: 150.0,
            initial_tilt: 0.0,
            reset_film_between_intervals: false,
        }
    }
}

impl AorConfig {
    /// 500 nm ring on the coarse single-core grid.
    pub fn desk() -> Self {
        Self {
            film: FilmConfig::desk(100),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.film.validate()?;
        if !(self.feedback_gain >= 0.0) {
            return Err(Error::config("feedback_gain must be ≥ 0"));
        }
        if self.feedback_delay_samples < 1 {
            return Err(Error::config("feedback_delay_samples must be ≥ 1"));
        }
        if self.ann_enabled && self.film.clock.samples() != ANN_INPUTS {
            return Err(Error::config(format!(
                "the amplification network reads {ANN_INPUTS} samples per interval, clock gives {}",
                self.film.clock.samples()
            )));
        }
        if !(self.output_gain > 0.0) || !(self.frequency > 0.0) {
            return Err(Error::config("output_gain and frequency must be positive"));
        }
        self.layout().map(|_| ())
    }

    fn layout(&self) -> Result<(CellRect, CellRect)> {
        let f = &self.film;
        let ax = f.absorber_cells + (self.antenna_offset / f.cell_size).round() as usize;
        let aw = f.cells(self.antenna_width);
        let px = ax + aw + (self.probe_distance / f.cell_size).round() as usize;
        let pw = f.cells(self.probe_width);
        if px + pw > f.nx.saturating_sub(f.absorber_cells) {
            return Err(Error::config(format!(
                "probe at cells {px}..{} does not fit before the right absorber",
                px + pw
            )));
        }
        Ok((CellRect::new(ax, ax + aw, 0, f.ny), CellRect::new(px, px + pw, 0, f.ny)))
    }
}

/// Frozen 31 → 10 (rectifier) → 1 (sigmoid) network.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnSpec {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl AnnSpec {
    pub const PARAM_COUNT: usize = ANN_HIDDEN * ANN_INPUTS + 2 * ANN_HIDDEN + 1;

    /// Uniform weights in ±1/√fan-in.
    pub fn seeded(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = 1.0 / (ANN_INPUTS as f64).sqrt();
        let l2 = 1.0 / (ANN_HIDDEN as f64).sqrt();
        let mut draw = |n: usize, lim: f64| (0..n).map(|_| rng.random_range(-lim..=lim)).collect::<Vec<_>>();
        let w1 = draw(ANN_HIDDEN * ANN_INPUTS, l1);
        let b1 = draw(ANN_HIDDEN, l1);
        let w2 = draw(ANN_HIDDEN, l2);
        let b2 = draw(1, l2)[0];
        Self { w1, b1, w2, b2 }
    }

    pub fn zeros() -> Self {
        Self::from_params(&[0.0; Self::PARAM_COUNT]).expect("length matches")
    }

    /// Parameters in the order w1 (row-major, hidden × input), b1, w2, b2.
    pub fn from_params(p: &[f64]) -> Result<Self> {
        if p.len() != Self::PARAM_COUNT {
            return Err(Error::Dimension {
                expected: Self::PARAM_COUNT,
                actual: p.len(),
            });
        }
        let (w1, rest) = p.split_at(ANN_HIDDEN * ANN_INPUTS);
        let (b1, rest) = rest.split_at(ANN_HIDDEN);
        let (w2, b2) = rest.split_at(ANN_HIDDEN);
        Ok(Self {
            w1: w1.to_vec(),
            b1: b1.to_vec(),
            w2: w2.to_vec(),
            b2: b2[0],
        })
    }

    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(Self::PARAM_COUNT);
        p.extend(&self.w1);
        p.extend(&self.b1);
        p.extend(&self.w2);
        p.push(self.b2);
        p
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// sigmoid(w₂·relu(W₁x + b₁) + b₂).
pub fn ann_forward(ann: &AnnSpec, prev_outputs: &[f64]) -> Result<f64> {
    if prev_outputs.len() != ANN_INPUTS {
        return Err(Error::Dimension {
            expected: ANN_INPUTS,
            actual: prev_outputs.len(),
        });
    }
    let mut z = ann.b2;
    for h in 0..ANN_HIDDEN {
        let row = &ann.w1[h * ANN_INPUTS..(h + 1) * ANN_INPUTS];
        let pre = ann.b1[h] + row.iter().zip(prev_outputs).map(|(w, x)| w * x).sum::<f64>();
        z += ann.w2[h] * pre.max(0.0);
    }
    Ok(sigmoid(z))
}

/// Samples of one interval. `input` is the encoded drive before network
/// scaling and feedback.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub input: Vec<f64>,
    pub output: Vec<f64>,
    pub diff: Vec<f64>,
    /// Network gain a_i applied as (1 + a_i); 0 when the network is off.
    pub ann_gain: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirTrace {
    pub clock: SampleClock,
    pub records: Vec<IntervalRecord>,
}

impl ReservoirTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Root-mean-square output of each interval.
    pub fn output_rms(&self) -> Vec<f64> {
        self.records
            .iter()
            .map(|r| (r.output.iter().map(|v| v * v).sum::<f64>() / r.output.len() as f64).sqrt())
            .collect()
    }

    /// `(interval, sample, t_ns, input, output, diff, ann_gain)` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "interval,sample,t_ns,input,output,diff,ann_gain").map_err(io)?;
        for (i, r) in self.records.iter().enumerate() {
            for j in 0..r.input.len() {
                let t = (i as f64 * self.clock.interval + j as f64 * self.clock.sample_period) * 1e9;
                writeln!(
                    w,
                    "{i},{j},{t:.4},{:e},{:e},{:e},{:e}",
                    r.input[j], r.output[j], r.diff[j], r.ann_gain
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }
}

/// `[input | output | diff]` per interval, one row per consumed input.
pub fn trace_features(trace: &ReservoirTrace) -> Vec<Vec<f64>> {
    trace
        .records
        .iter()
        .map(|r| r.input.iter().chain(&r.output).chain(&r.diff).copied().collect())
        .collect()
}

/// A relaxed ring, reusable across runs.
#[derive(Debug, Clone)]
pub struct Aor {
    config: AorConfig,
    film: DrivenFilm,
}

impl Aor {
    pub fn new(config: AorConfig) -> Result<Self> {
        config.validate()?;
        let (antenna, probe) = config.layout()?;
        let grid = config.film.grid()?;
        let antenna = AntennaSpec {
            region: antenna,
            polarization: normalized(config.polarization),
            base_amplitude: config.film.base_amplitude,
            frequency: config.frequency,
        };
        let probe = ProbeSpec {
            region: probe,
            component: config.probe_component,
        };
        let film = DrivenFilm::new(grid, config.bias, vec![antenna], vec![probe], &config.film)?;
        Ok(Self { config, film })
    }

    pub fn config(&self) -> &AorConfig {
        &self.config
    }

    pub fn film(&self) -> &DrivenFilm {
        &self.film
    }

    /// Drives the ring with one encoded input per interval.
    pub fn run(&self, inputs: &[f64], ann: &AnnSpec) -> Result<ReservoirTrace> {
        self.run_from(inputs, ann, None)
    }

    /// As [`Self::run`], starting from `initial` instead of the relaxed film.
    pub fn run_from(&self, inputs: &[f64], ann: &AnnSpec, initial: Option<MagState>) -> Result<ReservoirTrace> {
        if inputs.is_empty() {
            return Err(Error::config("no inputs"));
        }
        if let Some(&bad) = inputs.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InputRange { value: bad });
        }
        let cfg = &self.config;
        let clock = cfg.film.clock;
        let steps = clock.steps();
        let relaxed = self.film.state().clone();
        let mut film = self.film.clone();
        if let Some(s) = initial {
            film.set_state(s)?;
        } else if cfg.initial_tilt > 0.0 {
            let mut s = relaxed.clone();
            s.perturb(cfg.seed, cfg.initial_tilt);
            film.set_state(s)?;
        }
        let gain = cfg.output_gain;
        let fb = cfg.feedback_gain;
        let delay = cfg.feedback_delay_samples;
        let freq = cfg.frequency;
        let enc = cfg.encoding;

        // probe samples as one continuous stream; interval boundaries are shared
        let mut stream: Vec<f64> = Vec::with_capacity(inputs.len() * steps + 1);
        let mut records: Vec<IntervalRecord> = Vec::with_capacity(inputs.len());
        for (i, &value) in inputs.iter().enumerate() {
            if cfg.reset_film_between_intervals {
                film.set_state(relaxed.clone())?;
                stream.truncate(i * steps);
            }
            let a = match records.last() {
                Some(prev) if cfg.ann_enabled => ann_forward(ann, &prev.output)?,
                _ => 0.0,
            };
            let mut input = Vec::with_capacity(steps + 1);
            let mut output = Vec::with_capacity(steps + 1);
            for k in 0..=steps {
                let n = i * steps + k;
                let y = gain * film.read_probes()[0];
                if stream.len() == n {
                    stream.push(y);
                }
                output.push(y);
                input.push(enc.encode(value, freq, k as f64 * clock.sample_period)?);
                if k == steps {
                    break;
                }
                let held = if n >= delay { fb * stream[n - delay] } else { 0.0 };
                film.advance_sample(i, k, |t, s| {
                    s[0] = enc.encode(value, freq, t)? * (1.0 + a) + held;
                    Ok(())
                })?;
            }
            let diff = input.iter().zip(&output).map(|(x, y)| x - y).collect();
            records.push(IntervalRecord {
                input,
                output,
                diff,
                ann_gain: a,
            });
        }
        Ok(ReservoirTrace { clock, records })
    }
}

/// Builds and relaxes a ring for `config`, then runs it once.
pub fn run_aor(inputs: &[f64], config: &AorConfig, ann: &AnnSpec) -> Result<ReservoirTrace> {
    Aor::new(config.clone())?.run(inputs, ann)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_network_outputs_half() {
        let x = [0.3; ANN_INPUTS];
        assert_eq!(ann_forward(&AnnSpec::zeros(), &x).unwrap(), 0.5);
    }

    #[test]
    fn dead_hidden_layer_leaves_output_bias() {
        let mut p = vec![0.0; AnnSpec::PARAM_COUNT];
        // every hidden unit gets a negative bias and no input weight
        for h in 0..ANN_HIDDEN {
            p[ANN_HIDDEN * ANN_INPUTS + h] = -1.0;
            p[ANN_HIDDEN * ANN_INPUTS + ANN_HIDDEN + h] = 3.0;
        }
        p[AnnSpec::PARAM_COUNT - 1] = 0.7;
        let ann = AnnSpec::from_params(&p).unwrap();
        let expect = 1.0 / (1.0 + (-0.7f64).exp());
        assert_relative_eq!(
            ann_forward(&ann, &[0.5; ANN_INPUTS]).unwrap(),
            expect,
            max_relative = 1e-15
        );
    }

    #[test]
    fn network_rejects_wrong_width() {
        assert!(matches!(
            ann_forward(&AnnSpec::zeros(), &[0.0; 30]),
            Err(Error::Dimension {
                expected: 31,
                actual: 30
            })
        ));
    }

    #[test]
    fn seeded_network_is_reproducible_and_bounded() {
        let a = AnnSpec::seeded(7);
        assert_eq!(a, AnnSpec::seeded(7));
        assert_ne!(a, AnnSpec::seeded(8));
        let lim = 1.0 / (ANN_INPUTS as f64).sqrt();
        assert!(a.w1.iter().all(|w| w.abs() <= lim));
        let x: Vec<f64> = (0..ANN_INPUTS).map(|j| (j as f64 * 0.4).sin()).collect();
        let y = ann_forward(&a, &x).unwrap();
        assert!(y > 0.0 && y < 1.0);
        assert_eq!(y, ann_forward(&AnnSpec::seeded(7), &x).unwrap());
        assert_eq!(AnnSpec::from_params(&a.params()).unwrap(), a);
    }

    #[test]
    fn features_follow_layout() {
        let rec = IntervalRecord {
            input: (0..31).map(|j| j as f64).collect(),
            output: (0..31).map(|j| 0.5 * j as f64).collect(),
            diff: (0..31).map(|j| 0.5 * j as f64).collect(),
            ann_gain: 0.0,
        };
        let trace = ReservoirTrace {
            clock: SampleClock::default(),
            records: vec![rec.clone()],
        };
        let f = trace_features(&trace);
        assert_eq!(f[0].len(), 93);
        assert_eq!(&f[0][..31], &rec.input[..]);
        for j in 0..31 {
            assert_eq!(f[0][62 + j], f[0][j] - f[0][31 + j]);
        }
    }

    fn quick() -> AorConfig {
        let mut c = AorConfig::desk();
        c.film.relax_time = 0.05e-9;
        c
    }

    #[test]
    fn quiet_inputs_give_quiet_ring() {
        let mut c = quick();
        c.feedback_gain = 0.0;
        let t = run_aor(&[0.0, 0.0], &c, &AnnSpec::seeded(1)).unwrap();
        assert_eq!(t.len(), 2);
        for r in &t.records {
            assert_eq!(r.input.len(), 31);
            assert!(r.output.iter().all(|v| v.abs() < 1e-6));
            for j in 0..31 {
                assert_eq!(r.diff[j], r.input[j] - r.output[j]);
            }
        }
    }

    #[test]
    fn layout_must_fit() {
        let mut c = quick();
        c.probe_distance = 1e-6;
        assert!(matches!(Aor::new(c), Err(Error::Config(_))));
    }
}
