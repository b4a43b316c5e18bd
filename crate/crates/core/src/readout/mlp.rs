use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlpOutput {
    /// One unit, binary cross-entropy.
    Sigmoid,
    /// One unit per class, categorical cross-entropy.
    Softmax,
}

/// Per-feature input transform fitted on the training rows and stored in
/// the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureScaling {
    None,
    /// Divide by the largest magnitude, so every column peaks at 1.
    MaxAbs,
    /// Zero mean, unit population variance.
    Standard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpSpec {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub scaling: FeatureScaling,
}

impl Default for MlpSpec {
    fn default() -> Self {
        Self {
            hidden: 16,
            epochs: 300,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            scaling: FeatureScaling::MaxAbs,
        }
    }
}

/// One hidden rectifier layer.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    /// hidden × inputs
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    /// outputs × hidden
    pub w2: DMatrix<f64>,
    pub b2: DVector<f64>,
    pub mean: Vec<f64>,
    /// Input transform: (x − mean)·inv_std per column.
    pub inv_std: Vec<f64>,
    pub output: MlpOutput,
}

struct Forward {
    z: DMatrix<f64>,
    h_pre: DMatrix<f64>,
    h: DMatrix<f64>,
    p: DMatrix<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl MlpModel {
    /// Glorot-uniform weights, zero biases, identity standardization.
    pub fn init(n_in: usize, hidden: usize, output: MlpOutput, n_classes: usize, seed: u64) -> Self {
        let n_out = match output {
            MlpOutput::Sigmoid => 1,
            MlpOutput::Softmax => n_classes,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l1 = (6.0 / (n_in + hidden) as f64).sqrt();
        let l2 = (6.0 / (hidden + n_out) as f64).sqrt();
        let w1 = DMatrix::from_fn(hidden, n_in, |_, _| rng.random_range(-l1..=l1));
        let w2 = DMatrix::from_fn(n_out, hidden, |_, _| rng.random_range(-l2..=l2));
        Self {
            w1,
            b1: DVector::zeros(hidden),
            w2,
            b2: DVector::zeros(n_out),
            mean: vec![0.0; n_in],
            inv_std: vec![1.0; n_in],
            output,
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.w1.ncols()
    }

    pub fn n_hidden(&self) -> usize {
        self.w1.nrows()
    }

    pub fn n_outputs(&self) -> usize {
        self.w2.nrows()
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// w1 (row-major), b1, w2 (row-major), b2.
    pub fn params(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.param_count());
        p.extend(self.w1.transpose().iter());
        p.extend(self.b1.iter());
        p.extend(self.w2.transpose().iter());
        p.extend(self.b2.iter());
        p
    }

    pub fn with_params(&self, p: &[f64]) -> Result<Self> {
        if p.len() != self.param_count() {
            return Err(Error::Dimension {
                expected: self.param_count(),
                actual: p.len(),
            });
        }
        let (h, i, o) = (self.n_hidden(), self.n_inputs(), self.n_outputs());
        let (w1, rest) = p.split_at(h * i);
        let (b1, rest) = rest.split_at(h);
        let (w2, b2) = rest.split_at(o * h);
        Ok(Self {
            w1: DMatrix::from_row_slice(h, i, w1),
            b1: DVector::from_column_slice(b1),
            w2: DMatrix::from_row_slice(o, h, w2),
            b2: DVector::from_column_slice(b2),
            ..self.clone()
        })
    }

    fn forward(&self, x: &FeatureMatrix) -> Result<Forward> {
        if x.cols() != self.n_inputs() {
            return Err(Error::Dimension {
                expected: self.n_inputs(),
                actual: x.cols(),
            });
        }
        let mut z = x.matrix().clone();
        for (j, mut col) in z.column_iter_mut().enumerate() {
            let (m, s) = (self.mean[j], self.inv_std[j]);
            col.apply(|v| *v = (*v - m) * s);
        }
        let mut h_pre = &z * self.w1.transpose();
        for mut row in h_pre.row_iter_mut() {
            row += self.b1.transpose();
        }
        let h = h_pre.map(|v| v.max(0.0));
        let mut o = &h * self.w2.transpose();
        for mut row in o.row_iter_mut() {
            row += self.b2.transpose();
        }
        let p = match self.output {
            MlpOutput::Sigmoid => o.map(sigmoid),
            MlpOutput::Softmax => {
                for mut row in o.row_iter_mut() {
                    let m = row.max();
                    row.apply(|v| *v = (*v - m).exp());
                    let s = row.sum();
                    row /= s;
                }
                o
            }
        };
        Ok(Forward { z, h_pre, h, p })
    }

    /// Class probabilities: one column for sigmoid output (P(class 1)),
    /// one per class for softmax.
    pub fn predict(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        Ok(self.forward(x)?.p)
    }

    fn targets(&self, labels: &[usize]) -> Result<DMatrix<f64>> {
        let n_out = self.n_outputs();
        let mut y = DMatrix::zeros(labels.len(), n_out);
        for (r, &l) in labels.iter().enumerate() {
            match self.output {
                MlpOutput::Sigmoid if l <= 1 => y[(r, 0)] = l as f64,
                MlpOutput::Softmax if l < n_out => y[(r, l)] = 1.0,
                _ => return Err(Error::data(format!("label {l} out of range for {n_out} outputs"))),
            }
        }
        Ok(y)
    }

    fn cross_entropy(&self, p: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
        const FLOOR: f64 = 1e-300;
        let n = p.nrows().max(1) as f64;
        let total: f64 = match self.output {
            MlpOutput::Sigmoid => p
                .iter()
                .zip(y.iter())
                .map(|(&p, &y)| -(y * p.max(FLOOR).ln() + (1.0 - y) * (1.0 - p).max(FLOOR).ln()))
                .sum(),
            MlpOutput::Softmax => p.iter().zip(y.iter()).map(|(&p, &y)| -y * p.max(FLOOR).ln()).sum(),
        };
        total / n
    }

    /// Mean cross-entropy over the rows.
    pub fn loss(&self, x: &FeatureMatrix, labels: &[usize]) -> Result<f64> {
        let f = self.forward(x)?;
        Ok(self.cross_entropy(&f.p, &self.targets(labels)?))
    }

    /// Loss and its analytic gradient in [`Self::params`] order.
    pub fn loss_grad(&self, x: &FeatureMatrix, labels: &[usize]) -> Result<(f64, Vec<f64>)> {
        if labels.len() != x.rows() {
            return Err(Error::Dimension {
                expected: x.rows(),
                actual: labels.len(),
            });
        }
        let y = self.targets(labels)?;
        let f = self.forward(x)?;
        let loss = self.cross_entropy(&f.p, &y);
        let n = x.rows().max(1) as f64;
        // both output heads reduce to (p − y) at the pre-activation
        let d_o = (&f.p - &y) / n;
        let g_w2 = d_o.transpose() * &f.h;
        let g_b2: DVector<f64> = d_o.row_sum().transpose();
        let mut d_h = &d_o * &self.w2;
        d_h.zip_apply(&f.h_pre, |d, pre| {
            if pre <= 0.0 {
                *d = 0.0
            }
        });
        let g_w1 = d_h.transpose() * &f.z;
        let g_b1: DVector<f64> = d_h.row_sum().transpose();
        let mut g = Vec::with_capacity(self.param_count());
        g.extend(g_w1.transpose().iter());
        g.extend(g_b1.iter());
        g.extend(g_w2.transpose().iter());
        g.extend(g_b2.iter());
        Ok((loss, g))
    }
}

/// Analytic gradient of the mean cross-entropy.
pub fn backprop_grad(model: &MlpModel, x: &FeatureMatrix, labels: &[usize]) -> Result<Vec<f64>> {
    Ok(model.loss_grad(x, labels)?.1)
}

/// Full-batch Adam on cross-entropy; sigmoid head for two classes, softmax
/// otherwise.
pub fn fit_mlp(x: &FeatureMatrix, labels: &[usize], n_classes: usize, spec: &MlpSpec, seed: u64) -> Result<MlpModel> {
    if labels.len() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: labels.len(),
        });
    }
    if n_classes < 2 || spec.hidden == 0 {
        return Err(Error::config("an MLP readout needs ≥ 2 classes and ≥ 1 hidden unit"));
    }
    let output = if n_classes == 2 {
        MlpOutput::Sigmoid
    } else {
        MlpOutput::Softmax
    };
    let mut model = MlpModel::init(x.cols(), spec.hidden, output, n_classes, seed);
    if x.rows() > 0 {
        let m = x.matrix();
        for j in 0..x.cols() {
            let col = m.column(j);
            match spec.scaling {
                FeatureScaling::None => {}
                FeatureScaling::MaxAbs => {
                    let peak = col.amax();
                    model.inv_std[j] = if peak > 0.0 { 1.0 / peak } else { 1.0 };
                }
                FeatureScaling::Standard => {
                    let mean = col.mean();
                    let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
                    model.mean[j] = mean;
                    model.inv_std[j] = if var > 0.0 { 1.0 / var.sqrt() } else { 1.0 };
                }
            }
        }
    }
    let mut p = model.params();
    let mut m1 = vec![0.0; p.len()];
    let mut m2 = vec![0.0; p.len()];
    let (b1, b2) = (spec.beta1, spec.beta2);
    for epoch in 0..spec.epochs {
        let (loss, g) = model.loss_grad(x, labels)?;
        if !loss.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Training { epoch });
        }
        let t = (epoch + 1) as i32;
        let c1 = 1.0 - b1.powi(t);
        let c2 = 1.0 - b2.powi(t);
        for k in 0..p.len() {
            m1[k] = b1 * m1[k] + (1.0 - b1) * g[k];
            m2[k] = b2 * m2[k] + (1.0 - b2) * g[k] * g[k];
            p[k] -= spec.learning_rate * (m1[k] / c1) / ((m2[k] / c2).sqrt() + spec.epsilon);
        }
        model = model.with_params(&p)?;
    }
    if p.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training { epoch: spec.epochs });
    }
    Ok(model)
}
