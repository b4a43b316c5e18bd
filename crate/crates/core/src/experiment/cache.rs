use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::{Architecture, ExperimentConfig, FeatureSet};
use crate::error::{Error, Result};

/// Bumped whenever feature extraction changes meaning.
const FEATURE_VERSION: u32 = 1;

/// Hex SHA-256 over everything that determines the features: architecture,
/// dataset and the physics of that architecture. Readout settings, splits
/// and trial counts are deliberately left out.
pub fn physics_key(cfg: &ExperimentConfig) -> Result<String> {
    #[derive(Serialize)]
    struct Key<'a> {
        version: u32,
        architecture: Architecture,
        dataset: &'a super::DatasetSpec,
        physics: serde_json::Value,
    }
    let physics = match cfg.architecture {
        Architecture::Aor => serde_json::to_value(&cfg.aor),
        Architecture::Psm => serde_json::to_value(&cfg.psm),
        Architecture::PsmCascade => serde_json::to_value((&cfg.psm, &cfg.cascade)),
        Architecture::ReferenceDirect => Ok(serde_json::Value::Null),
    }
    .map_err(|e| Error::config(e.to_string()))?;
    let text = serde_json::to_string(&Key {
        version: FEATURE_VERSION,
        architecture: cfg.architecture,
        dataset: &cfg.dataset,
        physics,
    })
    .map_err(|e| Error::config(e.to_string()))?;
    Ok(Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Directory of `<key>.csv` feature files: `n_classes` on the first line,
/// then one `label,features…` row per sample.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureCache {
    dir: PathBuf,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.csv"))
    }

    pub fn get(&self, key: &str) -> Result<Option<FeatureSet>> {
        let path = self.path(key);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(&path, e)),
        };
        let bad = || Error::data(format!("{}: corrupt feature cache", path.display()));
        let mut lines = text.lines();
        let n_classes = lines.next().and_then(|l| l.parse().ok()).ok_or_else(bad)?;
        let mut set = FeatureSet {
            features: Vec::new(),
            labels: Vec::new(),
            n_classes,
        };
        for l in lines {
            let mut it = l.split(',');
            set.labels.push(it.next().and_then(|v| v.parse().ok()).ok_or_else(bad)?);
            set.features
                .push(it.map(|v| v.parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?);
        }
        Ok(Some(set))
    }

    /// Writes to a temporary file in the cache directory, then renames it
    /// into place, so readers never see a partial file.
    pub fn put(&self, key: &str, set: &FeatureSet) -> Result<()> {
        let io = |e| Error::io(&self.dir, e);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(io)?;
        {
            let mut w = std::io::BufWriter::new(tmp.as_file_mut());
            writeln!(w, "{}", set.n_classes).map_err(io)?;
            for (row, l) in set.features.iter().zip(&set.labels) {
                write!(w, "{l}").map_err(io)?;
                for v in row {
                    // shortest representation that parses back to the same bits
                    write!(w, ",{v:?}").map_err(io)?;
                }
                writeln!(w).map_err(io)?;
            }
            w.flush().map_err(io)?;
        }
        let path = self.path(key);
        tmp.persist(&path).map_err(|e| Error::io(&path, e.error))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::readout::ReadoutMethod;

    #[test]
    fn key_ignores_readout_and_splits() {
        let a = ExperimentConfig {
            architecture: Architecture::Psm,
            ..ExperimentConfig::default()
        };
        let mut b = a.clone();
        b.methods = vec![ReadoutMethod::Mlp];
        b.splits = vec![0.25];
        b.n_trials = 7;
        b.seed = 99;
        // physics of a different architecture is irrelevant too
        b.aor.feedback_gain = 0.1;
        assert_eq!(physics_key(&a).unwrap(), physics_key(&b).unwrap());
        b.psm.frequency = 6.0e9;
        assert_ne!(physics_key(&a).unwrap(), physics_key(&b).unwrap());
        assert_eq!(physics_key(&a).unwrap().len(), 64);
    }

    #[test]
    fn bit_exact_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let c = FeatureCache::new(dir.path().join("c")).unwrap();
        let set = FeatureSet {
            features: vec![vec![0.1 + 0.2, -1e-300, 1.0 / 3.0], vec![5e300, 0.0, -0.0]],
            labels: vec![2, 0],
            n_classes: 3,
        };
        assert!(c.get("k").unwrap().is_none());
        c.put("k", &set).unwrap();
        let back = c.get("k").unwrap().unwrap();
        assert_eq!(back, set);
        for (a, b) in back.features.iter().flatten().zip(set.features.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        // only the final file remains
        assert_eq!(std::fs::read_dir(c.dir()).unwrap().count(), 1);
    }
}
