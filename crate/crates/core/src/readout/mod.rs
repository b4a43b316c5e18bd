//! Trained readouts from reservoir features to class labels: a direct
//! pseudo-inverse map, an ensemble of chunk-wise maps, and a small MLP.

mod linear;
mod mlp;
mod probe;

use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use linear::{fit_ensemble, fit_linear, pinv, EnsembleModel, LinearModel, PINV_RTOL};
pub use mlp::{backprop_grad, fit_mlp, FeatureScaling, MlpModel, MlpOutput, MlpSpec};
pub use probe::{ann_gradient_probe, GradientReport, ProbeSetup};

/// Samples × features, all finite.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    data: DMatrix<f64>,
}

impl FeatureMatrix {
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!(
                "non-finite feature at row {}, column {}",
                i % data.nrows().max(1),
                i / data.nrows().max(1)
            )));
        }
        Ok(Self { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != cols) {
            return Err(Error::data(format!(
                "row {i} has {} features, expected {cols}",
                r.len()
            )));
        }
        Self::new(DMatrix::from_row_iterator(
            rows.len(),
            cols,
            rows.iter().flatten().copied(),
        ))
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(idx),
        }
    }
}

/// Regression targets for the linear readouts: a single 0/1 column for two
/// classes, one-hot columns otherwise.
pub fn target_matrix(labels: &[usize], n_classes: usize) -> Result<DMatrix<f64>> {
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::data(format!("label {bad} out of range for {n_classes} classes")));
    }
    Ok(if n_classes <= 2 {
        DMatrix::from_iterator(labels.len(), 1, labels.iter().map(|&l| l as f64))
    } else {
        DMatrix::from_fn(labels.len(), n_classes, |r, c| if labels[r] == c { 1.0 } else { 0.0 })
    })
}

/// Class per row: a single score column predicts 1 iff score ≥ 0.5;
/// several columns take the argmax, ties to the lowest index.
pub fn predict_classes(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            if row.len() == 1 {
                usize::from(row[0] >= 0.5)
            } else {
                let mut best = 0;
                for (c, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = c;
                    }
                }
                best
            }
        })
        .collect()
}

/// Percentage of rows whose predicted class matches `labels`.
pub fn evaluate_scores(scores: &DMatrix<f64>, labels: &[usize]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predict_classes(scores)
        .iter()
        .zip(labels)
        .filter(|(p, l)| p == l)
        .count();
    100.0 * hits as f64 / labels.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReadoutMethod {
    Linear,
    Ensemble,
    Mlp,
}

impl ReadoutMethod {
    pub fn name(self) -> &'static str {
        match self {
            ReadoutMethod::Linear => "linear",
            ReadoutMethod::Ensemble => "ensemble",
            ReadoutMethod::Mlp => "mlp",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReadoutModel {
    Linear(LinearModel),
    Ensemble(EnsembleModel),
    Mlp(MlpModel),
}

/// Readout hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReadoutConfig {
    pub ensemble_members: usize,
    pub mlp: MlpSpec,
}

impl Default for ReadoutConfig {
    fn default() -> Self {
        Self {
            ensemble_members: 5,
            mlp: MlpSpec::default(),
        }
    }
}

pub fn fit_readout(
    method: ReadoutMethod,
    x: &FeatureMatrix,
    labels: &[usize],
    n_classes: usize,
    cfg: &ReadoutConfig,
    seed: u64,
) -> Result<ReadoutModel> {
    Ok(match method {
        ReadoutMethod::Linear => ReadoutModel::Linear(fit_linear(x, &target_matrix(labels, n_classes)?)?),
        ReadoutMethod::Ensemble => ReadoutModel::Ensemble(fit_ensemble(
            x,
            &target_matrix(labels, n_classes)?,
            cfg.ensemble_members,
        )?),
        ReadoutMethod::Mlp => ReadoutModel::Mlp(fit_mlp(x, labels, n_classes, &cfg.mlp, seed)?),
    })
}

impl ReadoutModel {
    pub fn scores(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        match self {
            ReadoutModel::Linear(m) => m.predict(x),
            ReadoutModel::Ensemble(m) => m.predict(x),
            ReadoutModel::Mlp(m) => m.predict(x),
        }
    }

    /// Writes the model as CSV: a `kind` row, a `sizes` row, then one row
    /// per tensor holding its entries row-major.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        let row = |w: &mut std::io::BufWriter<_>, name: &str, m: &DMatrix<f64>| -> std::io::Result<()> {
            write!(w, "{name}")?;
            for v in m.transpose().iter() {
                write!(w, ",{v:e}")?;
            }
            writeln!(w)
        };
        match self {
            ReadoutModel::Linear(m) => {
                writeln!(w, "kind,linear").map_err(io)?;
                writeln!(w, "sizes,{},{}", m.w.nrows(), m.w.ncols()).map_err(io)?;
                row(&mut w, "w", &m.w).map_err(io)?;
            }
            ReadoutModel::Ensemble(e) => {
                let (r, c) = e.members.first().map_or((0, 0), |m| m.w.shape());
                writeln!(w, "kind,ensemble").map_err(io)?;
                writeln!(w, "sizes,{r},{c},{}", e.members.len()).map_err(io)?;
                for m in &e.members {
                    row(&mut w, "w", &m.w).map_err(io)?;
                }
            }
            ReadoutModel::Mlp(m) => {
                let out = match m.output {
                    MlpOutput::Sigmoid => "sigmoid",
                    MlpOutput::Softmax => "softmax",
                };
                writeln!(w, "kind,mlp,{out}").map_err(io)?;
                writeln!(w, "sizes,{},{},{}", m.n_inputs(), m.n_hidden(), m.n_outputs()).map_err(io)?;
                row(&mut w, "mean", &DMatrix::from_row_slice(1, m.mean.len(), &m.mean)).map_err(io)?;
                row(
                    &mut w,
                    "inv_std",
                    &DMatrix::from_row_slice(1, m.inv_std.len(), &m.inv_std),
                )
                .map_err(io)?;
                row(&mut w, "w1", &m.w1).map_err(io)?;
                row(
                    &mut w,
                    "b1",
                    &DMatrix::from_column_slice(1, m.b1.len(), m.b1.as_slice()),
                )
                .map_err(io)?;
                row(&mut w, "w2", &m.w2).map_err(io)?;
                row(
                    &mut w,
                    "b2",
                    &DMatrix::from_column_slice(1, m.b2.len(), m.b2.as_slice()),
                )
                .map_err(io)?;
            }
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::open(path).map_err(io)?;
        let mut lines = Vec::new();
        for l in std::io::BufReader::new(file).lines() {
            let l = l.map_err(io)?;
            if !l.trim().is_empty() {
                lines.push(l.split(',').map(str::to_owned).collect::<Vec<_>>());
            }
        }
        let bad = |what: &str| Error::data(format!("{}: malformed model file ({what})", path.display()));
        let nums = |row: &[String]| -> Result<Vec<f64>> {
            row[1..]
                .iter()
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("number")))
                .collect()
        };
        let sizes: Vec<usize> = lines.get(1).filter(|r| r[0] == "sizes").ok_or_else(|| bad("sizes"))?[1..]
            .iter()
            .map(|s| s.trim().parse().map_err(|_| bad("sizes")))
            .collect::<Result<_>>()?;
        let tensor = |i: usize, name: &str, r: usize, c: usize| -> Result<DMatrix<f64>> {
            let row = lines.get(i).filter(|row| row[0] == name).ok_or_else(|| bad(name))?;
            let v = nums(row)?;
            if v.len() != r * c {
                return Err(bad(name));
            }
            Ok(DMatrix::from_row_slice(r, c, &v))
        };
        let kind = lines.first().ok_or_else(|| bad("kind"))?;
        match (kind.get(1).map(String::as_str), sizes.as_slice()) {
            (Some("linear"), &[r, c]) => Ok(ReadoutModel::Linear(LinearModel {
                w: tensor(2, "w", r, c)?,
            })),
            (Some("ensemble"), &[r, c, n]) => Ok(ReadoutModel::Ensemble(EnsembleModel {
                members: (0..n)
                    .map(|k| {
                        Ok(LinearModel {
                            w: tensor(2 + k, "w", r, c)?,
                        })
                    })
                    .collect::<Result<_>>()?,
            })),
            (Some("mlp"), &[i, h, o]) => {
                let output = match kind.get(2).map(String::as_str) {
                    Some("sigmoid") => MlpOutput::Sigmoid,
                    Some("softmax") => MlpOutput::Softmax,
                    _ => return Err(bad("output")),
                };
                Ok(ReadoutModel::Mlp(MlpModel {
                    mean: tensor(2, "mean", 1, i)?.iter().copied().collect(),
                    inv_std: tensor(3, "inv_std", 1, i)?.iter().copied().collect(),
                    w1: tensor(4, "w1", h, i)?,
                    b1: DVector::from_iterator(h, tensor(5, "b1", 1, h)?.iter().copied()),
                    w2: tensor(6, "w2", o, h)?,
                    b2: DVector::from_iterator(o, tensor(7, "b2", 1, o)?.iter().copied()),
                    output,
                }))
            }
            _ => Err(bad("kind")),
        }
    }
}

/// Accuracy percent of `model` on (x, labels).
pub fn evaluate(model: &ReadoutModel, x: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    Ok(evaluate_scores(&model.scores(x)?, labels))
}

/// Forward-difference gradient (f(p + Δeₖ) − f(p))/Δ, using exactly P + 1
/// evaluations of `f`.
pub fn param_shift_grad<F>(mut f: F, params: &[f64], delta: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if !(delta > 0.0) {
        return Err(Error::config(format!("shift {delta} must be positive")));
    }
    let base = f(params)?;
    let mut p = params.to_vec();
    let mut g = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        p[k] = params[k] + delta;
        let v = f(&p).map_err(|e| Error::Probe {
            index: k,
            source: Box::new(e),
        })?;
        p[k] = params[k];
        g.push((v - base) / delta);
    }
    Ok(g)
}
