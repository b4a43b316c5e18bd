use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use crate::aor::{trace_features, AnnSpec, Aor};
use crate::error::{Error, Result};
use crate::readout::{evaluate, fit_readout, FeatureMatrix, ReadoutConfig, ReadoutMethod};

/// Test accuracy (percent) at one delay, with the one-sided binomial
/// p-value of reaching it by coin flips.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryPoint {
    pub delay: usize,
    pub memory: f64,
    pub memory_p: f64,
    /// XOR of the last `delay` inputs; absent at delay 0.
    pub parity: Option<f64>,
    pub parity_p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryCurve {
    pub n_train: usize,
    pub n_test: usize,
    pub points: Vec<MemoryPoint>,
}

impl MemoryCurve {
    /// `delay,memory,memory_p,parity,parity_p` rows; parity cells empty at
    /// delay 0.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e| Error::io(path, e);
        let file = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        writeln!(w, "delay,memory,memory_p,parity,parity_p").map_err(io)?;
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{}",
                p.delay,
                p.memory,
                p.memory_p,
                opt(p.parity),
                opt(p.parity_p)
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }
}

/// P(X ≥ hits) for X ~ Binomial(n, 1/2).
pub fn chance_p_value(hits: usize, n: usize) -> f64 {
    if hits == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n as u64).expect("p = 1/2 is valid");
    b.sf(hits as u64 - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MemorySpec {
    pub j_max: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    /// Input values encoding bits 0 and 1.
    pub levels: (f64, f64),
}

impl Default for MemorySpec {
    fn default() -> Self {
        Self {
            j_max: 5,
            n_train: 200,
            n_test: 200,
            seed: 0,
            levels: (0.0, 1.0),
        }
    }
}

/// Drives the ring with a random binary sequence and fits a linear readout
/// per delay j to recover u[i−j] and u[i] ⊕ … ⊕ u[i−j+1]. The first `j_max`
/// intervals only warm up the ring; the next `n_train` train and the last
/// `n_test` test.
pub fn memory_benchmark(aor: &Aor, ann: &AnnSpec, spec: &MemorySpec) -> Result<MemoryCurve> {
    let MemorySpec {
        j_max,
        n_train,
        n_test,
        seed,
        levels,
    } = *spec;
    if n_train == 0 || n_test == 0 {
        return Err(Error::config("memory benchmark needs train and test intervals"));
    }
    let n = j_max + n_train + n_test;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let u: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let inputs: Vec<f64> = u.iter().map(|&b| if b == 1 { levels.1 } else { levels.0 }).collect();
    let feats = trace_features(&aor.run(&inputs, ann)?);
    let train: Vec<usize> = (j_max..j_max + n_train).collect();
    let test: Vec<usize> = (j_max + n_train..n).collect();
    let x = FeatureMatrix::from_rows(&feats)?;
    let (xtr, xte) = (x.select_rows(&train), x.select_rows(&test));
    let score = |target: &dyn Fn(usize) -> usize| -> Result<(f64, f64)> {
        let ytr: Vec<usize> = train.iter().map(|&i| target(i)).collect();
        let yte: Vec<usize> = test.iter().map(|&i| target(i)).collect();
        let m = fit_readout(ReadoutMethod::Linear, &xtr, &ytr, 2, &ReadoutConfig::default(), 0)?;
        let acc = evaluate(&m, &xte, &yte)?;
        let hits = (acc * n_test as f64 / 100.0).round() as usize;
        Ok((acc, chance_p_value(hits, n_test)))
    };
    let mut points = Vec::with_capacity(j_max + 1);
    for j in 0..=j_max {
        let (memory, memory_p) = score(&|i| u[i - j])?;
        let parity = if j == 0 {
            None
        } else {
            Some(score(&|i| u[i + 1 - j..=i].iter().fold(0, |a, b| a ^ b))?)
        };
        points.push(MemoryPoint {
            delay: j,
            memory,
            memory_p,
            parity: parity.map(|p| p.0),
            parity_p: parity.map(|p| p.1),
        });
    }
    Ok(MemoryCurve {
        n_train,
        n_test,
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_values_by_hand() {
        // P(X ≥ 2 | n = 2) = 1/4, P(X ≥ 1 | n = 2) = 3/4
        assert!((chance_p_value(2, 2) - 0.25).abs() < 1e-12);
        assert!((chance_p_value(1, 2) - 0.75).abs() < 1e-12);
        assert_eq!(chance_p_value(0, 10), 1.0);
        // 120 of 200 heads: well below 0.01
        assert!(chance_p_value(120, 200) < 0.01);
        assert!(chance_p_value(105, 200) > 0.05);
    }
}
