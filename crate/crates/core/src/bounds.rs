//! Bounds on the diagonal of a nonsingular M-matrix in terms of its inverse kernel,
//! the sigma metric, and the statistics built from them.

use rayon::prelude::*;
use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::{invert, validate_m_matrix, DenseMatrix, MMatrixPair};
use crate::quadrature::integrate;

/// Entries of sigma^2 below this are reported as negative.
pub const NEGATIVE_TOL: f64 = 1e-12;
const HOLD_TOL: f64 = 1e-10;
const DIAG_TOL: f64 = 1e-10;

/// `sigma^2_{ij} = K_ii + K_jj - K_ij - K_ji`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaMatrix {
    pub sigma2: Vec<Vec<f64>>,
    /// Minimum over `i != j`.
    pub sigma_star2: f64,
    pub argmin: (usize, usize),
    /// Some entry is below `-1e-12`.
    pub negative_square: bool,
}

pub fn sigma_matrix(k: &DenseMatrix) -> SigmaMatrix {
    let n = k.n();
    let mut sigma2 = vec![vec![0.0; n]; n];
    let mut star = f64::INFINITY;
    let mut argmin = (0, 0);
    let mut negative = false;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = k[(i, i)] + k[(j, j)] - k[(i, j)] - k[(j, i)];
            sigma2[i][j] = v;
            if v < -NEGATIVE_TOL {
                negative = true;
            }
            if v < star {
                star = v;
                argmin = (i, j);
            }
        }
    }
    SigmaMatrix { sigma2, sigma_star2: star, argmin, negative_square: negative }
}

/// Per-row bounds with the diagonal they bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowBounds {
    pub bounds: Vec<f64>,
    pub diagonal: Vec<f64>,
    /// `diagonal[i] <= bounds[i]` for every row, up to `1e-10` relative.
    pub holds: bool,
}

fn holds(value: f64, bound: f64) -> bool {
    value <= bound * (1.0 + HOLD_TOL) + HOLD_TOL
}

fn check_row_sums(pair: &MMatrixPair) -> Result<()> {
    for (i, s) in pair.row_sums().iter().enumerate() {
        if *s < -NEGATIVE_TOL {
            return Err(Error::HypothesisFailed { row: i, detail: format!("row sum {s} of A is negative") });
        }
    }
    Ok(())
}

/// `A_ii <= 1 / (K_ii - max_{j != i} K_ji)`, requiring the gap to be positive.
pub fn diag_bound_simple(pair: &MMatrixPair) -> Result<RowBounds> {
    check_row_sums(pair)?;
    let k = pair.kernel();
    let n = pair.n();
    let mut bounds = Vec::with_capacity(n);
    for i in 0..n {
        let col_max = (0..n).filter(|&j| j != i).map(|j| k[(j, i)]).fold(f64::NEG_INFINITY, f64::max);
        let gap = k[(i, i)] - col_max;
        if !(gap > DIAG_TOL * k[(i, i)].abs()) {
            return Err(Error::HypothesisFailed {
                row: i,
                detail: format!("K_ii - max_j K_ji = {gap} is not positive"),
            });
        }
        bounds.push(1.0 / gap);
    }
    let diagonal = pair.diag_a().to_vec();
    let ok = diagonal.iter().zip(&bounds).all(|(&d, &b)| holds(d, b));
    Ok(RowBounds { bounds, diagonal, holds: ok })
}

/// Smallest `C` with `|K_ij - K_ji| <= C sigma^2_ij` for all `i != j`.
pub fn asymmetry_constant(k: &DenseMatrix) -> Result<f64> {
    let s = sigma_matrix(k);
    ratio_max(k.n(), |i, j| ((k[(i, j)] - k[(j, i)]).abs(), s.sigma2[i][j]))
}

/// The same constant for the normalized ratios `K_ij / K_jj`, with
/// `hat sigma^2_ij = 2 - K_ij / K_jj - K_ji / K_ii`.
pub fn asymmetry_constant_normalized(k: &DenseMatrix) -> Result<f64> {
    scaled_asymmetry(k, &k.diagonal(), 1.0).map(|(c, _)| c)
}

fn ratio_max(n: usize, mut parts: impl FnMut(usize, usize) -> (f64, f64)) -> Result<f64> {
    let mut c: f64 = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let (num, den) = parts(i, j);
            if num == 0.0 {
                continue;
            }
            if !(den > 0.0) {
                return Err(Error::DegenerateSigma { row: i, col: j });
            }
            c = c.max(num / den);
        }
    }
    Ok(c)
}

/// Returns the asymmetry constant and the matrix of `hat sigma^2` for scales `r` and level `k_hat`.
fn scaled_asymmetry(k: &DenseMatrix, r: &[f64], k_hat: f64) -> Result<(f64, Vec<Vec<f64>>)> {
    let n = k.n();
    let mut s = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s[i][j] = 2.0 * k_hat - k[(i, j)] / r[j] - k[(j, i)] / r[i];
            }
        }
    }
    let c = ratio_max(n, |i, j| ((k[(i, j)] / r[j] - k[(j, i)] / r[i]).abs(), s[i][j]))?;
    Ok((c, s))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SigmaBound {
    pub bound: f64,
    pub max_diagonal: f64,
    pub sigma_star2: f64,
    pub c: f64,
    pub holds: bool,
}

fn sigma_bound_value(pair: &MMatrixPair, c: f64) -> SigmaBound {
    let s = sigma_matrix(pair.kernel());
    let bound = 2.0 / ((1.0 - c) * s.sigma_star2);
    let max_diagonal = pair.diag_a().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    SigmaBound { bound, max_diagonal, sigma_star2: s.sigma_star2, c, holds: holds(max_diagonal, bound) }
}

/// `A_ii <= 2 / ((1 - C) sigma*^2)` for constant-diagonal `K` with asymmetry at most `C < 1`.
pub fn diag_bound_sigma(pair: &MMatrixPair, c: f64) -> Result<SigmaBound> {
    if !(0.0..1.0).contains(&c) {
        return Err(Error::InvalidInput(format!("C must lie in [0, 1), got {c}")));
    }
    check_row_sums(pair)?;
    let k = pair.kernel();
    let d = k.diagonal();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if d.iter().any(|v| (v - d[0]).abs() > DIAG_TOL * scale) {
        return Err(Error::NotConstantDiagonal);
    }
    let min_c = asymmetry_constant(k)?;
    if min_c > c + 1e-12 {
        return Err(Error::AsymmetryTooLarge { min_c });
    }
    Ok(sigma_bound_value(pair, c))
}

/// The value `2 / ((1 - C) sigma*^2)` without checking the hypotheses, for comparing
/// against cases outside them.
pub fn diag_bound_sigma_unchecked(pair: &MMatrixPair, c: f64) -> SigmaBound {
    sigma_bound_value(pair, c)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScaledBound {
    pub r: Vec<f64>,
    /// `r_i A_ii`.
    pub scaled_diagonal: Vec<f64>,
    pub bound: f64,
    pub c: f64,
    pub sigma_hat_star2: f64,
    pub holds: bool,
}

/// `r_i A_ii <= 2 / ((1 - C) hat sigma*^2)` with `r_i = K_ii / k_hat`.
pub fn diag_bound_scaled(pair: &MMatrixPair, k_hat: f64) -> Result<ScaledBound> {
    if !(k_hat > 0.0 && k_hat.is_finite()) {
        return Err(Error::InvalidInput(format!("K_hat must be positive, got {k_hat}")));
    }
    check_row_sums(pair)?;
    let k = pair.kernel();
    let n = pair.n();
    for i in 0..n {
        let col_max = (0..n).filter(|&j| j != i).map(|j| k[(j, i)]).fold(f64::NEG_INFINITY, f64::max);
        if !(k[(i, i)] > col_max) {
            return Err(Error::HypothesisFailed { row: i, detail: format!("K_ii = {} <= max_j K_ji = {col_max}", k[(i, i)]) });
        }
    }
    let r: Vec<f64> = k.diagonal().iter().map(|v| v / k_hat).collect();
    let (c, s) = scaled_asymmetry(k, &r, k_hat)?;
    if c >= 1.0 {
        return Err(Error::AsymmetryTooLarge { min_c: c });
    }
    let mut star = f64::INFINITY;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                star = star.min(s[i][j]);
            }
        }
    }
    let bound = 2.0 / ((1.0 - c) * star);
    let scaled_diagonal: Vec<f64> = pair.diag_a().iter().zip(&r).map(|(a, ri)| a * ri).collect();
    let ok = scaled_diagonal.iter().all(|&v| holds(v, bound));
    Ok(ScaledBound { r, scaled_diagonal, bound, c, sigma_hat_star2: star, holds: ok })
}

/// Points `t_1, .., t_n` with kernel values `u(t_i, t_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointConfig {
    pub points: Vec<f64>,
    pub kernel_values: DenseMatrix,
}

impl PointConfig {
    pub fn new(points: Vec<f64>, kernel_values: DenseMatrix) -> Result<Self> {
        if points.len() < 2 || points.len() != kernel_values.n() {
            return Err(Error::InvalidInput("need at least two points and a matching kernel".into()));
        }
        Ok(Self { points, kernel_values })
    }

    pub fn from_fn(points: Vec<f64>, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let k = DenseMatrix::from_fn(points.len(), |i, j| u(points[i], points[j]));
        if k.rows().iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("kernel values must be finite".into()));
        }
        Self::new(points, k)
    }

    /// `t_j = j delta / n`, `j = 1..n`.
    pub fn equally_spaced(n: usize, delta: f64, u: impl Fn(f64, f64) -> f64) -> Result<Self> {
        Self::from_fn((1..=n).map(|j| j as f64 * delta / n as f64).collect(), u)
    }
}

/// `a*_{[n/p]}`: the `[n/p]`-th smallest diagonal entry of `A = K^{-1}`.
pub fn psi_star(config: &PointConfig, p: usize) -> Result<f64> {
    let n = config.points.len();
    if p < 1 || p > n {
        return Err(Error::InvalidInput(format!("p must lie in 1..={n}, got {p}")));
    }
    let a = invert(&config.kernel_values)?;
    let pair = validate_m_matrix(&a)?;
    let mut d = pair.diag_a().to_vec();
    d.sort_by(f64::total_cmp);
    Ok(d[n / p - 1])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnboundednessRow {
    pub delta: f64,
    pub n: usize,
    pub psi_star: Option<f64>,
    /// `log n / psi_star`.
    pub log_n_over_psi: Option<f64>,
    /// `sigma*^2 log n`.
    pub sigma_star2_log_n: Option<f64>,
    pub error: Option<String>,
}

/// Diagnostic table on equally spaced configurations; growth along `n` is evidence,
/// not proof, of unboundedness.
pub fn unboundedness_statistic(
    u: &(dyn Fn(f64, f64) -> f64 + Sync),
    deltas: &[f64],
    n_grid: &[usize],
    p: usize,
) -> Vec<UnboundednessRow> {
    let cells: Vec<(f64, usize)> = deltas.iter().flat_map(|&d| n_grid.iter().map(move |&n| (d, n))).collect();
    cells
        .par_iter()
        .map(|&(delta, n)| {
            let row = |psi: Option<f64>, sigma: Option<f64>, error: Option<String>| UnboundednessRow {
                delta,
                n,
                psi_star: psi,
                log_n_over_psi: psi.map(|v| (n as f64).ln() / v),
                sigma_star2_log_n: sigma.map(|s| s * (n as f64).ln()),
                error,
            };
            let config = match PointConfig::equally_spaced(n, delta, u) {
                Ok(c) => c,
                Err(e) => return row(None, None, Some(e.to_string())),
            };
            let sigma = sigma_matrix(&config.kernel_values).sigma_star2;
            match psi_star(&config, p) {
                Ok(v) => row(Some(v), Some(sigma), None),
                Err(e) => row(None, Some(sigma), Some(e.to_string())),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SudakovReport {
    pub max_a: f64,
    pub two_over_sigma_star2: f64,
    /// `(max_i sqrt(a_i))^{-1} E max |zeta_i|`.
    pub permanental_bound: f64,
    /// `(sigma* / sqrt 2) E max zeta_i`.
    pub sudakov_bound: f64,
    /// `max a_i <= 2 / sigma*^2`.
    pub permanental_stronger: bool,
    pub tie: bool,
}

fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `E max_{i <= n} |zeta_i|` for iid standard normals.
pub fn expected_max_abs_normal(n: usize) -> Result<f64> {
    let f = |x: f64| -((n as f64) * (-erfc(x / std::f64::consts::SQRT_2)).ln_1p()).exp_m1();
    Ok(integrate(f, 0.0, 40.0, 1e-12, 1e-12, 2000)?.value)
}

/// `E max_{i <= n} zeta_i` for iid standard normals.
pub fn expected_max_normal(n: usize) -> Result<f64> {
    let upper = integrate(|x: f64| 1.0 - normal_cdf(x).powi(n as i32), 0.0, 40.0, 1e-12, 1e-12, 2000)?;
    let lower = integrate(|x: f64| normal_cdf(-x).powi(n as i32), 0.0, 40.0, 1e-12, 1e-12, 2000)?;
    Ok(upper.value - lower.value)
}

/// Compares the permanental and Sudakov lower bounds for `E max eta_i`, `eta ~ N(0, K)`.
pub fn sudakov_compare(pair: &MMatrixPair) -> Result<SudakovReport> {
    let k = pair.kernel();
    if !k.is_symmetric(1e-12 * k.norm_inf().max(1.0)) {
        return Err(Error::NotSymmetric);
    }
    let n = pair.n();
    let s = sigma_matrix(k);
    let max_a = pair.diag_a().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let two_over = 2.0 / s.sigma_star2;
    let permanental_bound = expected_max_abs_normal(n)? / max_a.sqrt();
    let sudakov_bound = (s.sigma_star2 / 2.0).sqrt() * expected_max_normal(n)?;
    Ok(SudakovReport {
        max_a,
        two_over_sigma_star2: two_over,
        permanental_bound,
        sudakov_bound,
        permanental_stronger: holds(max_a, two_over),
        tie: (max_a - two_over).abs() <= HOLD_TOL * two_over.abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brownian(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, |i, j| (i.min(j) + 1) as f64)
    }

    #[test]
    fn sigma_examples() {
        let s = sigma_matrix(&brownian(4));
        for i in 0..4 {
            for j in 0..4 {
                assert!((s.sigma2[i][j] - (i as f64 - j as f64).abs()).abs() < 1e-14);
            }
        }
        assert_eq!(s.sigma_star2, 1.0);
        let c = sigma_matrix(&DenseMatrix::from_fn(3, |_, _| 2.5));
        assert!(c.sigma2.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn simple_bound_examples() {
        let pair = MMatrixPair::from_kernel(&DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap().scale_rows(&[1.0 / 3.0, 1.0 / 3.0])).unwrap();
        let b = diag_bound_simple(&pair).unwrap();
        assert!((b.bounds[0] - 3.0).abs() < 1e-12 && b.holds);
        let pair = MMatrixPair::from_kernel(&brownian(4)).unwrap();
        assert!(matches!(diag_bound_simple(&pair), Err(Error::HypothesisFailed { .. })));
    }

    #[test]
    fn hand_asymmetry() {
        let k = DenseMatrix::from_rows(&[[2.0, 1.5], [0.5, 2.0]]).unwrap();
        assert!((asymmetry_constant(&k).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(asymmetry_constant(&brownian(3)).unwrap(), 0.0);
    }

    #[test]
    fn sigma_bound_symmetric() {
        let pair = MMatrixPair::from_kernel(&DenseMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
        let b = diag_bound_sigma(&pair, 0.0).unwrap();
        assert!((b.bound - 1.0).abs() < 1e-14 && b.holds);
        let pair = MMatrixPair::from_kernel(&DenseMatrix::diag(&[1.0, 2.0])).unwrap();
        assert_eq!(diag_bound_sigma(&pair, 0.0), Err(Error::NotConstantDiagonal));
    }

    #[test]
    fn scaled_reduces_to_sigma() {
        let pair = MMatrixPair::from_kernel(&DenseMatrix::from_rows(&[[2.0, 1.0], [0.8, 2.0]]).unwrap()).unwrap();
        let s = diag_bound_scaled(&pair, 2.0).unwrap();
        let t = diag_bound_sigma(&pair, s.c).unwrap();
        assert!((s.bound - t.bound).abs() < 1e-12 * t.bound);
        assert!(s.r.iter().all(|&r| r == 1.0));
    }

    #[test]
    fn psi_star_examples() {
        let k = invert(&DenseMatrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap()).unwrap();
        let c = PointConfig::new(vec![0.0, 1.0], k).unwrap();
        assert!((psi_star(&c, 1).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn sudakov_examples() {
        let pair = MMatrixPair::from_kernel(&DenseMatrix::identity(3)).unwrap();
        let r = sudakov_compare(&pair).unwrap();
        assert!(r.tie && r.permanental_stronger && (r.max_a - 1.0).abs() < 1e-14);
        let pair = MMatrixPair::from_kernel(&brownian(4)).unwrap();
        let r = sudakov_compare(&pair).unwrap();
        assert!(r.tie && (r.max_a - 2.0).abs() < 1e-12);
        let asym = MMatrixPair::from_kernel(&DenseMatrix::from_rows(&[[2.0, 1.0], [0.8, 2.0]]).unwrap()).unwrap();
        assert_eq!(sudakov_compare(&asym), Err(Error::NotSymmetric));
    }

    #[test]
    fn normal_maxima() {
        assert!((expected_max_normal(2).unwrap() - 1.0 / std::f64::consts::PI.sqrt()).abs() < 1e-9);
        assert!((expected_max_abs_normal(1).unwrap() - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-9);
    }
}
