use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use super::{fit_linear, param_shift_grad, FeatureMatrix, LinearModel};
use crate::aor::{trace_features, AnnSpec, Aor};
use crate::error::{Error, Result};

/// What the loss sees: an input sequence, one regression target per input,
/// and the forward-difference step.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeSetup {
    pub inputs: Vec<f64>,
    pub targets: Vec<f64>,
    pub delta: f64,
    /// Network parameters to perturb; `None` means all of them.
    pub indices: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientReport {
    pub delta: f64,
    pub base_loss: f64,
    /// (parameter index, estimate)
    pub estimates: Vec<(usize, f64)>,
}

impl GradientReport {
    pub fn max_abs(&self) -> f64 {
        self.estimates.iter().map(|(_, g)| g.abs()).fold(0.0, f64::max)
    }

    pub fn nonzero(&self) -> usize {
        self.estimates.iter().filter(|(_, g)| *g != 0.0).count()
    }

    /// `param,estimate` rows.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "param,estimate").map_err(io)?;
        for (k, g) in &self.estimates {
            writeln!(w, "{k},{g:e}").map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

fn readout_loss(
    aor: &Aor,
    inputs: &[f64],
    targets: &DMatrix<f64>,
    ann: &AnnSpec,
    fixed: Option<&LinearModel>,
) -> Result<(f64, LinearModel)> {
    let x = FeatureMatrix::from_rows(&trace_features(&aor.run(inputs, ann)?))?;
    let model = match fixed {
        Some(m) => m.clone(),
        None => fit_linear(&x, targets)?,
    };
    let r = model.predict(&x)? - targets;
    Ok((0.5 * r.norm_squared() / x.rows() as f64, model))
}

/// Forward-difference sensitivity of the end-to-end readout loss to the
/// amplification network's parameters. The linear readout is fitted once at
/// `ann` and then held fixed, so only the film dynamics carry a parameter
/// dependence. Reports without judging the size of the result.
pub fn ann_gradient_probe(aor: &Aor, ann: &AnnSpec, setup: &ProbeSetup) -> Result<GradientReport> {
    if setup.targets.len() != setup.inputs.len() {
        return Err(Error::Dimension {
            expected: setup.inputs.len(),
            actual: setup.targets.len(),
        });
    }
    let base = ann.params();
    let indices: Vec<usize> = match &setup.indices {
        Some(ix) => ix.clone(),
        None => (0..base.len()).collect(),
    };
    if let Some(&bad) = indices.iter().find(|&&k| k >= base.len()) {
        return Err(Error::config(format!("parameter index {bad} ≥ {}", base.len())));
    }
    let targets = DMatrix::from_column_slice(setup.targets.len(), 1, &setup.targets);
    let (base_loss, readout) = readout_loss(aor, &setup.inputs, &targets, ann, None)?;

    // the perturbed subspace, so that the estimator sees exactly |indices| + 1 evaluations
    let sub: Vec<f64> = indices.iter().map(|&k| base[k]).collect();
    let mut first = true;
    let grads = param_shift_grad(
        |p| {
            if std::mem::take(&mut first) {
                return Ok(base_loss);
            }
            let mut full = base.clone();
            for (&k, &v) in indices.iter().zip(p) {
                full[k] = v;
            }
            let ann = AnnSpec::from_params(&full)?;
            Ok(readout_loss(aor, &setup.inputs, &targets, &ann, Some(&readout))?.0)
        },
        &sub,
        setup.delta,
    )
    .map_err(|e| match e {
        Error::Probe { index, source } => Error::Probe {
            index: indices[index],
            source,
        },
        e => e,
    })?;
    // the estimator indexes the subspace; report the network index instead
    let estimates = indices.iter().copied().zip(grads).collect();
    Ok(GradientReport {
        delta: setup.delta,
        base_loss,
        estimates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aor::{AorConfig, ANN_HIDDEN, ANN_INPUTS};
    use crate::excitation::FilmConfig;

    fn small(ann_enabled: bool) -> Aor {
        let mut c = AorConfig::desk();
        c.film = FilmConfig {
            ny: 4,
            ..FilmConfig::desk(100)
        };
        c.ann_enabled = ann_enabled;
        Aor::new(c).unwrap()
    }

    fn setup(indices: Vec<usize>, delta: f64) -> ProbeSetup {
        ProbeSetup {
            inputs: vec![0.2, 0.9, 0.5],
            targets: vec![0.2, 0.9, 0.5],
            delta,
            indices: Some(indices),
        }
    }

    #[test]
    fn bypassed_network_gives_exact_zeros() {
        let r = ann_gradient_probe(&small(false), &AnnSpec::seeded(1), &setup(vec![0, 310, 330], 0.1)).unwrap();
        assert_eq!(r.estimates.len(), 3);
        assert!(r.estimates.iter().all(|&(_, g)| g == 0.0));
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn saturated_gain_gives_zero_estimate() {
        // silent hidden layer and a huge output bias: the gain is 1.0 in f64
        // before and after each shift
        let mut p = vec![0.0; AnnSpec::PARAM_COUNT];
        p[AnnSpec::PARAM_COUNT - 1] = 60.0;
        let ann = AnnSpec::from_params(&p).unwrap();
        let idx = vec![0, ANN_HIDDEN * ANN_INPUTS, AnnSpec::PARAM_COUNT - 1];
        let r = ann_gradient_probe(&small(true), &ann, &setup(idx, 1.0)).unwrap();
        assert!(r.estimates.iter().all(|&(_, g)| g == 0.0), "{:?}", r.estimates);
    }

    #[test]
    fn report_written() {
        let r = GradientReport {
            delta: 0.1,
            base_loss: 1.0,
            estimates: vec![(3, 0.5), (7, -2.0)],
        };
        assert_eq!(r.max_abs(), 2.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.csv");
        r.write_csv(&p).unwrap();
        let text = std::fs::read_to_string(p).unwrap();
        assert!(text.starts_with("param,estimate\n3,5e-1\n"));
    }

    #[test]
    fn bad_index_rejected() {
        let e = ann_gradient_probe(
            &small(false),
            &AnnSpec::zeros(),
            &setup(vec![AnnSpec::PARAM_COUNT], 0.1),
        );
        assert!(matches!(e, Err(Error::Config(_))));
    }
}
