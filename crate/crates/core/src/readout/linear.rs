use nalgebra::DMatrix;

use super::FeatureMatrix;
use crate::error::{Error, Result};

/// Relative singular-value cutoff of the pseudo-inverse.
pub const PINV_RTOL: f64 = 1e-10;

/// Moore–Penrose pseudo-inverse via SVD; singular values below
/// 1e-10·σ_max are dropped.
pub fn pinv(x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite entry in matrix"));
    }
    let (rows, cols) = x.shape();
    if x.is_empty() {
        return Ok(DMatrix::zeros(cols, rows));
    }
    let svd = faer::Mat::<f64>::from_fn(rows, cols, |i, j| x[(i, j)])
        .thin_svd()
        .map_err(|e| Error::data(format!("SVD did not converge: {e:?}")))?;
    let (u, s, v) = (svd.U(), svd.S().column_vector(), svd.V());
    let smax = (0..s.nrows()).map(|k| s[k]).fold(0.0, f64::max);
    let tol = PINV_RTOL * smax;
    let mut out = DMatrix::zeros(cols, rows);
    for k in 0..s.nrows() {
        if s[k] > tol && s[k] > 0.0 {
            // out += v_k u_kᵀ / s_k
            for i in 0..rows {
                let uk = u[(i, k)] / s[k];
                for j in 0..cols {
                    out[(j, i)] += v[(j, k)] * uk;
                }
            }
        }
    }
    Ok(out)
}

/// W (features × outputs) minimizing ‖XW − Y‖.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub w: DMatrix<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        if x.cols() != self.w.nrows() {
            return Err(Error::Dimension {
                expected: self.w.nrows(),
                actual: x.cols(),
            });
        }
        Ok(x.matrix() * &self.w)
    }

    /// ½·mean over rows of ‖x W − y‖² and its gradient with respect to W
    /// (column-major, matching `w.as_slice()`).
    pub fn loss_grad(&self, x: &FeatureMatrix, y: &DMatrix<f64>) -> Result<(f64, Vec<f64>)> {
        let r = self.predict(x)? - y;
        let n = x.rows().max(1) as f64;
        let loss = 0.5 * r.norm_squared() / n;
        let g = x.matrix().transpose() * r / n;
        Ok((loss, g.as_slice().to_vec()))
    }
}

pub fn fit_linear(x: &FeatureMatrix, y: &DMatrix<f64>) -> Result<LinearModel> {
    if x.rows() == 0 {
        return Err(Error::data("cannot fit a linear map to zero rows"));
    }
    if y.nrows() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: y.nrows(),
        });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::data("non-finite target"));
    }
    Ok(LinearModel {
        w: pinv(x.matrix())? * y,
    })
}

/// Mean of linear maps fitted to contiguous row chunks.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    pub members: Vec<LinearModel>,
}

impl EnsembleModel {
    pub fn predict(&self, x: &FeatureMatrix) -> Result<DMatrix<f64>> {
        let mut acc: Option<DMatrix<f64>> = None;
        for m in &self.members {
            let p = m.predict(x)?;
            acc = Some(match acc {
                Some(a) => a + p,
                None => p,
            });
        }
        let acc = acc.ok_or_else(|| Error::config("empty ensemble"))?;
        Ok(acc / self.members.len() as f64)
    }
}

/// Splits rows into `n` contiguous chunks of equal size, the remainder going
/// to the last chunk, and fits one linear map per chunk.
pub fn fit_ensemble(x: &FeatureMatrix, y: &DMatrix<f64>, n: usize) -> Result<EnsembleModel> {
    if n == 0 || n > x.rows() {
        return Err(Error::config(format!(
            "ensemble of {n} members needs 1..={} rows",
            x.rows()
        )));
    }
    if y.nrows() != x.rows() {
        return Err(Error::Dimension {
            expected: x.rows(),
            actual: y.nrows(),
        });
    }
    let size = x.rows() / n;
    let members = (0..n)
        .map(|k| {
            let start = k * size;
            let len = if k + 1 == n { x.rows() - start } else { size };
            let xs = FeatureMatrix::new(x.matrix().rows(start, len).into_owned())?;
            fit_linear(&xs, &y.rows(start, len).into_owned())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleModel { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fm(rows: usize, cols: usize, data: &[f64]) -> FeatureMatrix {
        FeatureMatrix::new(DMatrix::from_row_slice(rows, cols, data)).unwrap()
    }

    #[test]
    fn identity_system() {
        let m = fit_linear(
            &fm(2, 2, &[1.0, 0.0, 0.0, 1.0]),
            &DMatrix::from_row_slice(2, 1, &[1.0, 0.0]),
        )
        .unwrap();
        assert_eq!(m.w, DMatrix::from_row_slice(2, 1, &[1.0, 0.0]));
    }

    #[test]
    fn overdetermined_constant_gives_mean() {
        // normal equations: 2w = 0 + 1
        let m = fit_linear(&fm(2, 1, &[1.0, 1.0]), &DMatrix::from_row_slice(2, 1, &[0.0, 1.0])).unwrap();
        assert_relative_eq!(m.w[(0, 0)], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn exact_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = DMatrix::from_fn(10, 3, |_, _| rng.random_range(-1.0..1.0));
        let w = DMatrix::from_row_slice(3, 1, &[0.7, -1.3, 2.1]);
        let y = &x * &w;
        let m = fit_linear(&FeatureMatrix::new(x).unwrap(), &y).unwrap();
        assert!((m.w - w).abs().max() < 1e-8);
    }

    #[test]
    fn pinv_of_rank_deficient() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 3.0, 6.0]);
        let p = pinv(&x).unwrap();
        assert!((&x * &p * &x - &x).abs().max() < 1e-12);
        assert!((&p * &x * &p - &p).abs().max() < 1e-12);
    }

    #[test]
    fn non_finite_rejected() {
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        assert!(matches!(pinv(&x), Err(Error::Data(_))));
        assert!(FeatureMatrix::new(x).is_err());
    }

    #[test]
    fn two_chunk_ensemble_is_member_mean() {
        // chunk 1 rows (1),(1) → y (0, 2): w = 1; chunk 2 rows (1),(2) → y (1, 1): w = 3/5
        let x = fm(4, 1, &[1.0, 1.0, 1.0, 2.0]);
        let y = DMatrix::from_row_slice(4, 1, &[0.0, 2.0, 1.0, 1.0]);
        let e = fit_ensemble(&x, &y, 2).unwrap();
        assert_relative_eq!(e.members[0].w[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(e.members[1].w[(0, 0)], 0.6, epsilon = 1e-14);
        let p = e.predict(&x).unwrap();
        for (r, xv) in [1.0, 1.0, 1.0, 2.0].iter().enumerate() {
            assert_relative_eq!(p[(r, 0)], 0.5 * (1.0 + 0.6) * xv, epsilon = 1e-14);
        }
    }

    #[test]
    fn remainder_goes_to_last_chunk() {
        let x = fm(5, 1, &[1.0, 1.0, 1.0, 1.0, 1.0]);
        let y = DMatrix::from_row_slice(5, 1, &[0.0, 0.0, 1.0, 1.0, 4.0]);
        let e = fit_ensemble(&x, &y, 2).unwrap();
        assert_relative_eq!(e.members[0].w[(0, 0)], 0.0, epsilon = 1e-14);
        assert_relative_eq!(e.members[1].w[(0, 0)], 2.0, epsilon = 1e-14);
        assert!(matches!(fit_ensemble(&x, &y, 6), Err(Error::Config(_))));
        assert!(matches!(fit_ensemble(&x, &y, 0), Err(Error::Config(_))));
    }

    #[test]
    fn duplicated_chunks_agree() {
        let x = fm(4, 2, &[1.0, 2.0, 0.5, -1.0, 1.0, 2.0, 0.5, -1.0]);
        let y = DMatrix::from_row_slice(4, 1, &[1.0, 0.0, 1.0, 0.0]);
        let e = fit_ensemble(&x, &y, 2).unwrap();
        assert!((&e.members[0].w - &e.members[1].w).abs().max() < 1e-12);
        let single = fit_linear(&x, &y).unwrap();
        assert!((e.predict(&x).unwrap() - single.predict(&x).unwrap()).abs().max() < 1e-12);
    }
}
