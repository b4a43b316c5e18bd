//! Config-driven trial protocol: reservoir features are computed once per
//! dataset, then every (split, trial) draws its own seeded train/test
//! partition and fits each configured readout.

mod cache;
mod config;
mod memory;
mod report;

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::aor::{trace_features, AnnSpec, Aor, ReservoirTrace};
use crate::data::{gen_dimred, load_iris, load_statlog, load_stock, SequentialDataset};
use crate::error::{Error, Result};
use crate::psm::{psm_features, Cascade, Psm, PsmConfig, PsmTrace};
use crate::readout::{evaluate, fit_readout, FeatureMatrix};

pub use cache::{physics_key, FeatureCache};
pub use config::{Architecture, CascadeSpec, DatasetSpec, ExperimentConfig};
pub use memory::{chance_p_value, memory_benchmark, MemoryCurve, MemoryPoint, MemorySpec};
pub use report::{emit_report, read_summary, read_trials, Aggregate, ReportFiles, TrialReport, TrialRow};

/// Reservoir (or direct) features with their labels, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub n_classes: usize,
}

/// Raw traces of the first sample, for input/output overlays.
#[derive(Debug, Clone, PartialEq)]
pub enum Overlay {
    Aor(ReservoirTrace),
    Psm(Vec<PsmTrace>),
}

impl Overlay {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        match self {
            Overlay::Aor(t) => t.write_csv(path),
            Overlay::Psm(t) => PsmTrace::write_csv(t, path),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub report: TrialReport,
    /// `None` when features came from the cache or no reservoir ran.
    pub overlay: Option<Overlay>,
}

pub fn load_dataset(spec: &DatasetSpec) -> Result<SequentialDataset> {
    match spec {
        DatasetSpec::Stock { path, has_header } => load_stock(path, *has_header),
        DatasetSpec::Iris {
            path,
            classes,
            features,
            has_header,
        } => SequentialDataset::from_dataset(load_iris(path, *classes, *features, *has_header)?, 2),
        DatasetSpec::Statlog { path, has_header } => load_statlog(path, *has_header),
        DatasetSpec::Dimred {
            seed,
            n_samples,
            n_classes,
            n_features,
        } => SequentialDataset::from_dataset(gen_dimred(*seed, *n_samples, *n_classes, *n_features)?.0, 2),
    }
}

fn aor_features(cfg: &ExperimentConfig, ds: &SequentialDataset) -> Result<(Vec<Vec<f64>>, Overlay)> {
    let aor = Aor::new(cfg.aor.clone())?;
    let ann = AnnSpec::seeded(cfg.aor.seed);
    let keep = cfg.overlay_intervals.max(1);
    if ds.continuous {
        let inputs: Vec<f64> = ds.data.features.iter().flatten().copied().collect();
        let trace = aor.run(&inputs, &ann)?;
        let feats = trace_features(&trace);
        // one row per interval: widths must agree with samples
        let per = ds.data.n_features();
        let rows = feats.chunks(per).map(|c| c.concat()).collect();
        let overlay = ReservoirTrace {
            clock: trace.clock,
            records: trace.records.into_iter().take(keep).collect(),
        };
        return Ok((rows, Overlay::Aor(overlay)));
    }
    let traces = ds
        .data
        .features
        .par_iter()
        .map(|x| aor.run(x, &ann))
        .collect::<Result<Vec<_>>>()?;
    let rows = traces.iter().map(|t| trace_features(t).concat()).collect();
    Ok((
        rows,
        Overlay::Aor(traces.into_iter().next().expect("non-empty dataset")),
    ))
}

fn psm_features_all(cfg: &ExperimentConfig, ds: &SequentialDataset) -> Result<(Vec<Vec<f64>>, Overlay)> {
    let psm = Psm::new(cfg.psm.clone())?;
    let traces = (0..ds.data.len())
        .into_par_iter()
        .map(|i| psm.run(&ds.pairs(i)?))
        .collect::<Result<Vec<_>>>()?;
    let rows = traces.iter().map(psm_features).collect();
    Ok((
        rows,
        Overlay::Psm(vec![traces.into_iter().next().expect("non-empty dataset")]),
    ))
}

/// Guide configs per layer; every guide gets its own spot layout.
pub fn cascade_layers(psm: &PsmConfig, spec: &CascadeSpec) -> Vec<Vec<PsmConfig>> {
    let mut k = 0u64;
    spec.layers
        .iter()
        .map(|&n| {
            (0..n)
                .map(|_| {
                    let mut c = psm.clone();
                    c.spots.seed = psm.spots.seed.wrapping_add(k);
                    c.n_output_channels = 1;
                    k += 1;
                    c
                })
                .collect()
        })
        .collect()
}

fn cascade_features(cfg: &ExperimentConfig, ds: &SequentialDataset) -> Result<(Vec<Vec<f64>>, Overlay)> {
    let mut layers = cascade_layers(&cfg.psm, &cfg.cascade);
    // the last guide keeps the configured output partition
    layers.last_mut().expect("validated")[0].n_output_channels = cfg.psm.n_output_channels;
    let cascade = Cascade::new(layers)?;
    let width = cfg.cascade.layers[0];
    let split = |i: usize| -> Result<Vec<Vec<(f64, f64)>>> {
        let pairs = ds.pairs(i)?;
        if pairs.len() % width != 0 {
            return Err(Error::config(format!(
                "{} input pairs do not divide among {width} first-layer guides",
                pairs.len()
            )));
        }
        Ok(pairs.chunks(pairs.len() / width).map(<[_]>::to_vec).collect())
    };
    let n_cal = cfg.cascade.calibration_samples.min(ds.data.len());
    let batch = (0..n_cal).map(split).collect::<Result<Vec<_>>>()?;
    let scale = cascade.calibrate(&batch)?;
    let traces = (0..ds.data.len())
        .into_par_iter()
        .map(|i| cascade.run(&split(i)?, &scale))
        .collect::<Result<Vec<_>>>()?;
    let rows = traces
        .iter()
        .map(|t| t.iter().flat_map(psm_features).collect())
        .collect();
    Ok((
        rows,
        Overlay::Psm(traces.into_iter().next().expect("non-empty dataset")),
    ))
}

/// Features for `cfg`'s architecture, reading and filling `cache` when given.
pub fn build_features(
    cfg: &ExperimentConfig,
    ds: &SequentialDataset,
    cache: Option<&FeatureCache>,
) -> Result<(FeatureSet, Option<Overlay>)> {
    if ds.data.is_empty() {
        return Err(Error::data("empty dataset"));
    }
    let wrap = |features| FeatureSet {
        features,
        labels: ds.data.labels.clone(),
        n_classes: ds.data.n_classes,
    };
    if cfg.architecture == Architecture::ReferenceDirect {
        return Ok((wrap(ds.data.features.clone()), None));
    }
    let key = physics_key(cfg)?;
    if let Some(hit) = cache.map(|c| c.get(&key)).transpose()?.flatten() {
        if hit.labels == ds.data.labels {
            return Ok((hit, None));
        }
    }
    let (rows, overlay) = match cfg.architecture {
        Architecture::Aor => aor_features(cfg, ds)?,
        Architecture::Psm => psm_features_all(cfg, ds)?,
        Architecture::PsmCascade => cascade_features(cfg, ds)?,
        Architecture::ReferenceDirect => unreachable!("handled above"),
    };
    let set = wrap(rows);
    if let Some(c) = cache {
        c.put(&key, &set)?;
    }
    Ok((set, Some(overlay)))
}

/// Per-trial seed: `base ⊕ hash(split, trial)`.
pub fn trial_seed(base: u64, split: f64, trial: usize) -> u64 {
    let mut h = Sha256::new();
    h.update(split.to_bits().to_le_bytes());
    h.update((trial as u64).to_le_bytes());
    let d = h.finalize();
    base ^ u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Rows in the test set for a fraction of `n`.
pub fn test_count(frac: f64, n: usize) -> usize {
    (frac * n as f64 - 1e-9).ceil().max(0.0) as usize
}

/// Seeded (train, test) row indices.
pub fn split_indices(n: usize, frac: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let k = test_count(frac, n).min(n);
    let train = idx.split_off(k);
    (train, idx)
}

/// Fits and scores every configured readout on every (split, trial).
pub fn run_trials(cfg: &ExperimentConfig, set: &FeatureSet) -> Result<TrialReport> {
    let x = FeatureMatrix::from_rows(&set.features)?;
    let n = x.rows();
    let jobs: Vec<(f64, usize)> = cfg
        .splits
        .iter()
        .flat_map(|&s| (0..cfg.n_trials).map(move |t| (s, t)))
        .collect();
    let encoding = cfg.encoding_name().to_owned();
    let ann_flag = cfg.ann_flag();
    let rows = jobs
        .par_iter()
        .map(|&(split, trial)| {
            let seed = trial_seed(cfg.seed, split, trial);
            let (train, test) = split_indices(n, split, seed);
            if train.is_empty() || test.is_empty() {
                return Err(Error::config(format!("split {split} of {n} rows leaves an empty side")));
            }
            let (xtr, xte) = (x.select_rows(&train), x.select_rows(&test));
            let ytr: Vec<usize> = train.iter().map(|&i| set.labels[i]).collect();
            let yte: Vec<usize> = test.iter().map(|&i| set.labels[i]).collect();
            cfg.methods
                .iter()
                .map(|&m| {
                    let model = fit_readout(m, &xtr, &ytr, set.n_classes, &cfg.readout, seed)?;
                    Ok(TrialRow {
                        method: m.name().to_owned(),
                        encoding: encoding.clone(),
                        ann_flag,
                        split,
                        trial,
                        accuracy: evaluate(&model, &xte, &yte)?,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TrialReport::new(
        format!("{}_{}", cfg.name, cfg.architecture.name()),
        rows.into_iter().flatten().collect(),
    ))
}

/// Validates, loads the dataset, builds features and runs all trials.
/// Relative dataset paths resolve against `base_dir`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    base_dir: &Path,
    cache: Option<&FeatureCache>,
) -> Result<ExperimentOutcome> {
    let cfg = ExperimentConfig {
        dataset: cfg.dataset.resolved(base_dir),
        ..cfg.clone()
    };
    cfg.validate()?;
    let ds = load_dataset(&cfg.dataset)?;
    let (set, overlay) = build_features(&cfg, &ds, cache)?;
    Ok(ExperimentOutcome {
        report: run_trials(&cfg, &set)?,
        overlay,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::ReadoutMethod;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            name: "t".into(),
            dataset: DatasetSpec::Dimred {
                seed: 1,
                n_samples: 40,
                n_classes: 3,
                n_features: 4,
            },
            methods: vec![ReadoutMethod::Linear, ReadoutMethod::Mlp],
            splits: vec![0.5],
            n_trials: 3,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn split_arithmetic() {
        assert_eq!(test_count(0.5, 40), 20);
        assert_eq!(test_count(0.1, 248), 25);
        assert_eq!(test_count(0.3, 10), 3);
        let (tr, te) = split_indices(40, 0.5, 9);
        assert_eq!((tr.len(), te.len()), (20, 20));
        let mut all: Vec<_> = tr.iter().chain(&te).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..40).collect::<Vec<_>>());
    }

    #[test]
    fn seeds_differ_per_cell() {
        let s = trial_seed(7, 0.1, 0);
        assert_ne!(s, trial_seed(7, 0.1, 1));
        assert_ne!(s, trial_seed(7, 0.2, 0));
        assert_eq!(s, trial_seed(7, 0.1, 0));
        assert_eq!(trial_seed(7, 0.1, 0) ^ 7, trial_seed(0, 0.1, 0));
    }

    #[test]
    fn direct_run_is_deterministic() {
        let c = small();
        let a = run_experiment(&c, Path::new("."), None).unwrap();
        let b = run_experiment(&c, Path::new("."), None).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.report.rows.len(), 6);
        assert!(a.overlay.is_none());
    }

    #[test]
    fn missing_dataset_fails_before_physics() {
        let mut c = small();
        c.architecture = Architecture::Psm;
        c.dataset = DatasetSpec::Iris {
            path: "nowhere/iris.data".into(),
            classes: crate::data::IrisClasses::All,
            features: crate::data::IrisFeatures::Petal,
            has_header: false,
        };
        assert!(matches!(
            run_experiment(&c, Path::new("/"), None),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn cascade_layers_get_distinct_spots() {
        let l = cascade_layers(&PsmConfig::desk(), &CascadeSpec::default());
        assert_eq!(l.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
        assert_ne!(l[0][0].spots.seed, l[0][1].spots.seed);
        assert_ne!(l[0][1].spots.seed, l[1][0].spots.seed);
    }
}
