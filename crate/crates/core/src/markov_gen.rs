//! Kernels from transient Markov chains: `K = (I - P)^{-1}` for substochastic `P`.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{invert, spectral_radius_nonneg, DenseMatrix, MMatrixPair};
use crate::sampler::RngStream;

const ROW_SUM_TOL: f64 = 1e-12;
const RADIUS_MARGIN: f64 = 1e-9;

/// A substochastic transition matrix with spectral radius below one.
#[derive(Debug, Clone, PartialEq)]
pub struct TransientChain {
    p: DenseMatrix,
    radius: f64,
}

impl TransientChain {
    pub fn new(p: DenseMatrix) -> Result<Self> {
        if !p.is_nonnegative() {
            return Err(Error::InvalidInput("transition matrix has a negative entry".into()));
        }
        for (i, s) in p.row_sums().iter().enumerate() {
            if *s > 1.0 + ROW_SUM_TOL {
                return Err(Error::InvalidInput(format!("row {i} sums to {s} > 1")));
            }
        }
        let radius = spectral_radius_nonneg(&p)?;
        if radius >= 1.0 - RADIUS_MARGIN {
            return Err(Error::NotTransient { radius });
        }
        Ok(Self { p, radius })
    }

    pub fn p(&self) -> &DenseMatrix {
        &self.p
    }

    pub fn n(&self) -> usize {
        self.p.n()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

/// Green function `sum_k P^k = (I - P)^{-1}`.
pub fn green_kernel(chain: &TransientChain) -> Result<DenseMatrix> {
    let n = chain.n();
    invert(&DenseMatrix::identity(n).sub(&chain.p))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppendixReport {
    /// `K^{-1}` is a nonsingular M-matrix with nonnegative row sums.
    pub passed: bool,
    /// Every row sum exceeds `1e-12`.
    pub strictly_positive_rows: bool,
    pub row_sums: Vec<f64>,
    pub violation: Option<String>,
}

/// Checks that `K^{-1}` is a nonsingular M-matrix and reports its row sums.
pub fn validate_appendix_lemma(k: &DenseMatrix) -> AppendixReport {
    match MMatrixPair::from_kernel(k) {
        Err(e) => AppendixReport {
            passed: false,
            strictly_positive_rows: false,
            row_sums: Vec::new(),
            violation: Some(e.to_string()),
        },
        Ok(pair) => {
            let row_sums = pair.row_sums().to_vec();
            let negative = row_sums.iter().position(|&s| s < -ROW_SUM_TOL);
            AppendixReport {
                passed: negative.is_none(),
                strictly_positive_rows: row_sums.iter().all(|&s| s > ROW_SUM_TOL),
                violation: negative.map(|i| format!("row {i} of the inverse sums to {}", row_sums[i])),
                row_sums,
            }
        }
    }
}

/// Random chain whose row `i` has total mass `1 - kill_i`, `kill_i` uniform on `[kill_min, 1)`.
pub fn random_transient_chain(n: usize, kill_min: f64, seed: u64) -> Result<TransientChain> {
    if n < 2 {
        return Err(Error::InvalidInput(format!("need n >= 2, got {n}")));
    }
    if !(kill_min > 0.0 && kill_min < 1.0) {
        return Err(Error::InvalidInput(format!("kill_min must lie in (0, 1), got {kill_min}")));
    }
    let mut rng = RngStream::new(seed, 0);
    let mut p = DenseMatrix::zeros(n);
    for i in 0..n {
        let kill = kill_min + (1.0 - kill_min) * rng.gen::<f64>();
        let weights: Vec<f64> = (0..n).map(|_| rng.gen::<f64>()).collect();
        let total: f64 = weights.iter().sum();
        for j in 0..n {
            p[(i, j)] = (1.0 - kill) * weights[j] / total;
        }
    }
    TransientChain::new(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_state_green_function() {
        let chain = TransientChain::new(DenseMatrix::from_rows(&[[0.0, 0.5], [0.5, 0.0]]).unwrap()).unwrap();
        let k = green_kernel(&chain).unwrap();
        let expect = DenseMatrix::from_rows(&[[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]]).unwrap();
        assert!(k.max_abs_diff(&expect) < 1e-14);
        let r = validate_appendix_lemma(&k);
        assert!(r.passed && r.strictly_positive_rows);
        assert!(r.row_sums.iter().all(|s| (s - 0.5).abs() < 1e-14));
    }

    #[test]
    fn zero_chain_gives_identity() {
        let k = green_kernel(&TransientChain::new(DenseMatrix::zeros(3)).unwrap()).unwrap();
        assert_eq!(k, DenseMatrix::identity(3));
    }

    #[test]
    fn recurrent_chain_is_rejected() {
        let p = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!(matches!(TransientChain::new(p), Err(Error::NotTransient { .. })));
    }

    #[test]
    fn brownian_covariance_has_zero_row_sums() {
        let k = DenseMatrix::from_fn(5, |i, j| (i.min(j) + 1) as f64);
        let r = validate_appendix_lemma(&k);
        assert!(r.passed && !r.strictly_positive_rows);
        for (i, s) in r.row_sums.iter().enumerate() {
            let expect = if i == 0 { 1.0 } else { 0.0 };
            assert!((s - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn non_m_inverse_is_located() {
        let k = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let r = validate_appendix_lemma(&k);
        assert!(!r.passed && r.violation.is_some());
    }

    #[test]
    fn random_chains() {
        let c = random_transient_chain(2, 0.5, 9).unwrap();
        assert!(c.p().row_sums().iter().all(|&s| s <= 0.5 + 1e-15));
        assert_eq!(random_transient_chain(4, 0.2, 3).unwrap(), random_transient_chain(4, 0.2, 3).unwrap());
        assert_ne!(random_transient_chain(4, 0.2, 3).unwrap(), random_transient_chain(4, 0.2, 4).unwrap());
    }
}
