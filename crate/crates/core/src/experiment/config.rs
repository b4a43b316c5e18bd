use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aor::AorConfig;
use crate::data::{IrisClasses, IrisFeatures};
use crate::error::{Error, Result};
use crate::psm::PsmConfig;
use crate::readout::{ReadoutConfig, ReadoutMethod};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    Aor,
    Psm,
    PsmCascade,
    /// Scaled features straight into the readout.
    ReferenceDirect,
}

impl Architecture {
    pub fn name(self) -> &'static str {
        match self {
            Architecture::Aor => "aor",
            Architecture::Psm => "psm",
            Architecture::PsmCascade => "psm-cascade",
            Architecture::ReferenceDirect => "reference-direct",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatasetSpec {
    Stock {
        path: PathBuf,
        #[serde(default = "yes")]
        has_header: bool,
    },
    Iris {
        path: PathBuf,
        classes: IrisClasses,
        #[serde(default = "petal")]
        features: IrisFeatures,
        #[serde(default)]
        has_header: bool,
    },
    Statlog {
        path: PathBuf,
        #[serde(default)]
        has_header: bool,
    },
    Dimred {
        seed: u64,
        n_samples: usize,
        #[serde(default = "three")]
        n_classes: usize,
        #[serde(default = "four")]
        n_features: usize,
    },
}

fn yes() -> bool {
    true
}
fn petal() -> IrisFeatures {
    IrisFeatures::Petal
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}

impl DatasetSpec {
    pub fn path(&self) -> Option<&Path> {
        match self {
            DatasetSpec::Stock { path, .. } | DatasetSpec::Iris { path, .. } | DatasetSpec::Statlog { path, .. } => {
                Some(path)
            }
            DatasetSpec::Dimred { .. } => None,
        }
    }

    /// Same spec with a relative path resolved against `base`.
    pub fn resolved(&self, base: &Path) -> Self {
        let mut out = self.clone();
        match &mut out {
            DatasetSpec::Stock { path, .. } | DatasetSpec::Iris { path, .. } | DatasetSpec::Statlog { path, .. } => {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
            DatasetSpec::Dimred { .. } => {}
        }
        out
    }
}

/// Guides per cascade layer, first layer first; each layer halves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CascadeSpec {
    pub layers: Vec<usize>,
    /// Samples used to calibrate the inter-layer amplification.
    pub calibration_samples: usize,
}

impl Default for CascadeSpec {
    fn default() -> Self {
        Self {
            layers: vec![2, 1],
            calibration_samples: 20,
        }
    }
}

/// A complete, reproducible run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub architecture: Architecture,
    pub dataset: DatasetSpec,
    pub methods: Vec<ReadoutMethod>,
    pub readout: ReadoutConfig,
    /// Test fractions, each in (0, 1).
    pub splits: Vec<f64>,
    pub n_trials: usize,
    pub seed: u64,
    pub aor: AorConfig,
    pub psm: PsmConfig,
    pub cascade: CascadeSpec,
    /// Intervals of the first sample kept for the input/output overlay.
    pub overlay_intervals: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            architecture: Architecture::ReferenceDirect,
            dataset: DatasetSpec::Dimred {
                seed: 0,
                n_samples: 300,
                n_classes: 3,
                n_features: 4,
            },
            methods: vec![ReadoutMethod::Linear, ReadoutMethod::Ensemble, ReadoutMethod::Mlp],
            readout: ReadoutConfig::default(),
            splits: vec![0.1, 0.2, 0.3, 0.4, 0.5],
            n_trials: 100,
            seed: 0,
            aor: AorConfig::desk(),
            psm: PsmConfig::desk(),
            cascade: CascadeSpec::default(),
            overlay_intervals: 10,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    /// Label used in report rows for the encoding column.
    pub fn encoding_name(&self) -> &'static str {
        match self.architecture {
            Architecture::Aor => self.aor.encoding.name(),
            Architecture::Psm | Architecture::PsmCascade => "amplitude",
            Architecture::ReferenceDirect => "none",
        }
    }

    pub fn ann_flag(&self) -> bool {
        self.architecture == Architecture::Aor && self.aor.ann_enabled
    }

    /// Everything that can be checked without simulating.
    pub fn validate(&self) -> Result<()> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials must be ≥ 1"));
        }
        if self.splits.is_empty() {
            return Err(Error::config("no test splits"));
        }
        if let Some(s) = self.splits.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
            return Err(Error::config(format!("split {s} outside (0, 1)")));
        }
        if self.methods.is_empty() {
            return Err(Error::config("no readout methods"));
        }
        if let Some(p) = self.dataset.path() {
            if !p.is_file() {
                return Err(Error::config(format!("dataset file {} not found", p.display())));
            }
        }
        let pairs = matches!(
            self.dataset,
            DatasetSpec::Iris { .. } | DatasetSpec::Statlog { .. } | DatasetSpec::Dimred { .. }
        );
        match self.architecture {
            Architecture::Aor => self.aor.validate()?,
            Architecture::Psm | Architecture::PsmCascade if !pairs => {
                return Err(Error::config("guides take input pairs; the stock series is scalar"));
            }
            Architecture::Psm => build_check(&self.psm)?,
            Architecture::PsmCascade => {
                let l = &self.cascade.layers;
                if l.is_empty() || l.last() != Some(&1) || l.windows(2).any(|w| w[0] != 2 * w[1]) {
                    return Err(Error::config(format!("cascade layers {l:?} must halve down to 1")));
                }
                if self.cascade.calibration_samples == 0 {
                    return Err(Error::config("cascade calibration needs ≥ 1 sample"));
                }
                build_check(&self.psm)?;
            }
            Architecture::ReferenceDirect => {}
        }
        Ok(())
    }
}

fn build_check(psm: &PsmConfig) -> Result<()> {
    crate::psm::build_psm(psm).map(|_| ())
}
