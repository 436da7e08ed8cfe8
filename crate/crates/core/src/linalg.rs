//! Dense real matrices, alpha-permanents and the M-matrix splitting `A = D - B`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, NotMReason, Result};

/// Largest dimension accepted by [`alpha_permanent`].
pub const PERMANENT_CAP: usize = 12;
/// Off-diagonal entries of an M-matrix candidate up to this value are clamped to zero.
pub const OFF_DIAGONAL_TOL: f64 = 1e-12;
/// Inverse entries down to `-INVERSE_TOL` are accepted as nonnegative.
pub const INVERSE_TOL: f64 = 1e-10;
/// Relative pivot threshold used by [`invert`].
pub const SINGULAR_REL_THRESHOLD: f64 = 1e-13;

/// Square real matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixJson", into = "MatrixJson")]
pub struct DenseMatrix {
    n: usize,
    data: Vec<f64>,
}

/// On-disk JSON form `{"n": .., "rows": [[..], ..]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: usize,
    pub rows: Vec<Vec<f64>>,
}

impl TryFrom<MatrixJson> for DenseMatrix {
    type Error = Error;

    fn try_from(value: MatrixJson) -> Result<Self> {
        if value.rows.len() != value.n {
            return Err(Error::InvalidInput(format!(
                "declared n = {} but {} rows given",
                value.n,
                value.rows.len()
            )));
        }
        DenseMatrix::from_rows(&value.rows)
    }
}

impl From<DenseMatrix> for MatrixJson {
    fn from(m: DenseMatrix) -> Self {
        MatrixJson { n: m.n, rows: m.rows() }
    }
}

impl DenseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, data: vec![0.0; n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Builds a matrix from rows, rejecting ragged or non-finite input.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("entry ({i}, {j}) is not finite")));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    /// Parses the whitespace-delimited text form, one row per line.
    pub fn parse_text(text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| {
                l.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|e| Error::InvalidInput(format!("bad number {tok:?}: {e}")))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_rows(&rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.n.max(1)).take(self.n).map(<[f64]>::to_vec).collect()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).iter().sum()).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * other.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn add_diag(&self, d: &[f64]) -> Self {
        let mut m = self.clone();
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] += v;
        }
        m
    }

    pub fn scale_rows(&self, s: &[f64]) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] * s[i])
    }

    pub fn scale_cols(&self, s: &[f64]) -> Self {
        Self::from_fn(self.n, |i, j| self[(i, j)] * s[j])
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.row(i).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&v| v >= 0.0)
    }

    /// Principal submatrix / reindexing `M[idx[p], idx[q]]`.
    pub fn select(&self, idx: &[usize]) -> Self {
        Self::from_fn(idx.len(), |p, q| self[(idx[p], idx[q])])
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.n + j]
    }
}

/// LU factorization with partial pivoting, `P M = L U` packed in one matrix.
struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
    min_pivot: f64,
}

fn lu_factor(m: &DenseMatrix) -> Lu {
    let n = m.n;
    let mut lu = m.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut min_pivot = f64::INFINITY;
    for col in 0..n {
        let (piv, piv_abs) = (col..n)
            .map(|r| (r, lu[(r, col)].abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        min_pivot = min_pivot.min(piv_abs);
        if piv != col {
            for j in 0..n {
                lu.data.swap(col * n + j, piv * n + j);
            }
            perm.swap(col, piv);
            sign = -sign;
        }
        let p = lu[(col, col)];
        if p == 0.0 {
            continue;
        }
        for r in col + 1..n {
            let f = lu[(r, col)] / p;
            lu[(r, col)] = f;
            if f != 0.0 {
                for j in col + 1..n {
                    let v = lu[(col, j)];
                    lu[(r, j)] -= f * v;
                }
            }
        }
    }
    Lu { lu, perm, sign, min_pivot }
}

/// Determinant by pivoted LU. The empty matrix has determinant 1.
pub fn det_lu(m: &DenseMatrix) -> f64 {
    if m.n == 0 {
        return 1.0;
    }
    let f = lu_factor(m);
    (0..m.n).map(|i| f.lu[(i, i)]).product::<f64>() * f.sign
}

/// Inverse by pivoted LU; fails when the smallest pivot is below
/// `SINGULAR_REL_THRESHOLD * ||M||_inf`.
pub fn invert(m: &DenseMatrix) -> Result<DenseMatrix> {
    let n = m.n;
    let threshold = SINGULAR_REL_THRESHOLD * m.norm_inf();
    let f = lu_factor(m);
    if n > 0 && (f.min_pivot <= threshold || f.min_pivot == 0.0) {
        return Err(Error::SingularMatrix { pivot: f.min_pivot, threshold });
    }
    let mut inv = DenseMatrix::zeros(n);
    let mut col = vec![0.0; n];
    for c in 0..n {
        for (i, slot) in col.iter_mut().enumerate() {
            *slot = if f.perm[i] == c { 1.0 } else { 0.0 };
        }
        for i in 0..n {
            let mut s = col[i];
            for j in 0..i {
                s -= f.lu[(i, j)] * col[j];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in i + 1..n {
                s -= f.lu[(i, j)] * col[j];
            }
            col[i] = s / f.lu[(i, i)];
        }
        for i in 0..n {
            inv[(i, c)] = col[i];
        }
    }
    Ok(inv)
}

/// `k = (k_1, .., k_n)` with its cached order `|k|`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex {
    k: Vec<u32>,
    order: u32,
}

impl MultiIndex {
    pub fn new(k: Vec<u32>) -> Self {
        let order = k.iter().sum();
        Self { k, order }
    }

    pub fn zero(n: usize) -> Self {
        Self { k: vec![0; n], order: 0 }
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.k
    }

    pub fn len(&self) -> usize {
        self.k.len()
    }

    pub fn is_empty(&self) -> bool {
        self.k.is_empty()
    }

    /// Row/column map `p -> i_p` of the block expansion, zero-based.
    pub fn expansion_map(&self) -> Vec<usize> {
        self.k
            .iter()
            .enumerate()
            .flat_map(|(i, &ki)| std::iter::repeat(i).take(ki as usize))
            .collect()
    }

    /// `k_1! k_2! .. k_n!`
    pub fn factorial_product(&self) -> f64 {
        self.k.iter().map(|&v| (1..=v).map(f64::from).product::<f64>()).product()
    }
}

/// All multi-indices of length `n` and order `m`, in lexicographic order.
pub fn multi_indices_of_order(n: usize, m: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn rec(pos: usize, remaining: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        let n = cur.len();
        if pos + 1 == n {
            cur[pos] = remaining;
            out.push(cur.clone());
            return;
        }
        for v in 0..=remaining {
            cur[pos] = v;
            rec(pos + 1, remaining - v, cur, out);
        }
    }
    if n == 0 {
        if m == 0 {
            out.push(Vec::new());
        }
        return out;
    }
    rec(0, m, &mut cur, &mut out);
    out
}

/// The `|k| x |k|` matrix `C(k)` with entries `c_{i_p, i_q}`.
pub fn block_expand(c: &DenseMatrix, k: &MultiIndex) -> DenseMatrix {
    assert_eq!(k.len(), c.n(), "multi-index length must match the matrix dimension");
    c.select(&k.expansion_map())
}

/// `sum_pi alpha^{c(pi)} prod_i m_{i, pi(i)}` over all permutations, in Heap's order
/// with the cycle count updated per transposition.
pub fn alpha_permanent(m: &DenseMatrix, alpha: f64) -> Result<f64> {
    let n = m.n();
    if n > PERMANENT_CAP {
        return Err(Error::DimensionTooLarge { n, cap: PERMANENT_CAP });
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
    }
    if n == 0 {
        return Ok(1.0);
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut cycles = n as i32;
    let alpha_pow: Vec<f64> = (0..=n as i32).map(|c| alpha.powi(c)).collect();
    let term = |perm: &[usize], cycles: i32| -> f64 {
        let mut p = alpha_pow[cycles as usize];
        for (i, &j) in perm.iter().enumerate() {
            p *= m[(i, j)];
            if p == 0.0 {
                break;
            }
        }
        p
    };
    let mut total = term(&perm, cycles);
    let mut c = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if c[i] < i {
            let (a, b) = if i % 2 == 0 { (0, i) } else { (c[i], i) };
            // Right-composing with (a b) splits a cycle if a, b share one, else merges two.
            let mut x = perm[a];
            let mut same = false;
            while x != a {
                if x == b {
                    same = true;
                    break;
                }
                x = perm[x];
            }
            cycles += if same { 1 } else { -1 };
            perm.swap(a, b);
            total += term(&perm, cycles);
            c[i] += 1;
            i = 1;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(total)
}

/// Perron root of an entrywise nonnegative matrix.
///
/// Power iteration on `M + I` (aperiodic even when `M` is not) with the upper
/// Collatz-Wielandt quotient as estimate, so the returned value never
/// underestimates the root by more than the convergence tolerance.
pub fn spectral_radius_nonneg(m: &DenseMatrix) -> Result<f64> {
    const MAX_ITER: usize = 200_000;
    let n = m.n();
    if n == 0 {
        return Ok(0.0);
    }
    if !m.is_nonnegative() {
        return Err(Error::InvalidInput("matrix has negative entries".into()));
    }
    let mut x = vec![1.0; n];
    let mut prev_upper = f64::INFINITY;
    let mut stable = 0;
    for _ in 0..MAX_ITER {
        let mut y = m.matvec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        let upper = hi - 1.0;
        if hi - lo <= 1e-14 * hi {
            return Ok(upper.max(0.0));
        }
        if (prev_upper - upper).abs() <= 1e-15 * hi {
            stable += 1;
            if stable >= 50 {
                return Ok(upper.max(0.0));
            }
        } else {
            stable = 0;
        }
        prev_upper = upper;
        let norm = y.iter().cloned().fold(0.0, f64::max);
        x = y.into_iter().map(|v| v / norm).collect();
    }
    Err(Error::NoConvergence { iterations: MAX_ITER, estimate: prev_upper })
}

/// A validated nonsingular M-matrix `A`, its inverse kernel `K`, and the splitting
/// `A = D - B` with `B >= 0` and zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct MMatrixPair {
    a: DenseMatrix,
    k: DenseMatrix,
    diag_a: Vec<f64>,
    b: DenseMatrix,
    row_sums: Vec<f64>,
}

impl MMatrixPair {
    pub fn a(&self) -> &DenseMatrix {
        &self.a
    }
    pub fn kernel(&self) -> &DenseMatrix {
        &self.k
    }
    pub fn diag_a(&self) -> &[f64] {
        &self.diag_a
    }
    pub fn b(&self) -> &DenseMatrix {
        &self.b
    }
    pub fn row_sums(&self) -> &[f64] {
        &self.row_sums
    }
    pub fn n(&self) -> usize {
        self.a.n()
    }

    /// `D^{-1} B`, whose Perron root certifies convergence of the mixture series.
    pub fn scaled_b(&self) -> DenseMatrix {
        let inv: Vec<f64> = self.diag_a.iter().map(|a| 1.0 / a).collect();
        self.b.scale_rows(&inv)
    }

    /// Validates a kernel by inverting it.
    pub fn from_kernel(k: &DenseMatrix) -> Result<Self> {
        let a = invert(k).map_err(|_| Error::NotMMatrix(NotMReason::Singular))?;
        validate_m_matrix(&a)
    }
}

/// Checks that `A` is a nonsingular M-matrix and builds its splitting.
pub fn validate_m_matrix(a: &DenseMatrix) -> Result<MMatrixPair> {
    let n = a.n();
    let mut a = a.clone();
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let v = a[(i, j)];
            if v > OFF_DIAGONAL_TOL {
                return Err(Error::NotMMatrix(NotMReason::PositiveOffDiagonal {
                    row: i,
                    col: j,
                    value: v,
                }));
            }
            if v > 0.0 {
                a[(i, j)] = 0.0;
            }
        }
    }
    let k = invert(&a).map_err(|_| Error::NotMMatrix(NotMReason::Singular))?;
    for i in 0..n {
        for j in 0..n {
            if k[(i, j)] < -INVERSE_TOL {
                return Err(Error::NotMMatrix(NotMReason::NegativeInverseEntry {
                    row: i,
                    col: j,
                    value: k[(i, j)],
                }));
            }
        }
    }
    let diag_a = a.diagonal();
    if let Some((row, &value)) = diag_a.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::NotMMatrix(NotMReason::NonPositiveDiagonal { row, value }));
    }
    let b = DenseMatrix::from_fn(n, |i, j| if i == j { 0.0 } else { -a[(i, j)] });
    let row_sums = a.row_sums();
    Ok(MMatrixPair { a, k, diag_a, b, row_sums })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> DenseMatrix {
        DenseMatrix::from_rows(&[[2.0, -1.0], [-1.0, 2.0]]).unwrap()
    }

    /// Cofactor expansion along the first row.
    fn det_cofactor(m: &DenseMatrix) -> f64 {
        let n = m.n();
        if n == 0 {
            return 1.0;
        }
        if n == 1 {
            return m[(0, 0)];
        }
        (0..n)
            .map(|j| {
                let idx_r: Vec<usize> = (1..n).collect();
                let idx_c: Vec<usize> = (0..n).filter(|&c| c != j).collect();
                let minor = DenseMatrix::from_fn(n - 1, |p, q| m[(idx_r[p], idx_c[q])]);
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                s * m[(0, j)] * det_cofactor(&minor)
            })
            .sum()
    }

    fn lcg(seed: &mut u64) -> f64 {
        *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((*seed >> 11) as f64) / ((1u64 << 53) as f64)
    }

    #[test]
    fn det_examples() {
        assert_eq!(det_lu(&DenseMatrix::identity(3)), 1.0);
        assert!((det_lu(&m2()) - 3.0).abs() < 1e-15);
        assert_eq!(det_lu(&DenseMatrix::zeros(0)), 1.0);
        assert_eq!(det_lu(&DenseMatrix::zeros(3)), 0.0);
    }

    #[test]
    fn det_matches_cofactor_oracle() {
        let mut seed = 17;
        for _ in 0..20 {
            let m = DenseMatrix::from_fn(6, |_, _| 2.0 * lcg(&mut seed) - 1.0);
            let a = det_lu(&m);
            let b = det_cofactor(&m);
            assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-3), "{a} vs {b}");
        }
    }

    #[test]
    fn invert_examples() {
        let inv = invert(&DenseMatrix::diag(&[2.0, 3.0])).unwrap();
        assert!(inv.max_abs_diff(&DenseMatrix::diag(&[0.5, 1.0 / 3.0])) < 1e-15);
        let inv = invert(&m2()).unwrap();
        let expect = DenseMatrix::from_rows(&[[2.0 / 3.0, 1.0 / 3.0], [1.0 / 3.0, 2.0 / 3.0]]).unwrap();
        assert!(inv.max_abs_diff(&expect) < 1e-15);
        let singular = DenseMatrix::from_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert!(matches!(invert(&singular), Err(Error::SingularMatrix { .. })));
    }

    #[test]
    fn brownian_covariance_inverse_is_tridiagonal() {
        let n = 4;
        let cov = DenseMatrix::from_fn(n, |i, j| (i.min(j) + 1) as f64);
        let inv = invert(&cov).unwrap();
        let expect = DenseMatrix::from_fn(n, |i, j| {
            if i == j {
                if i == n - 1 { 1.0 } else { 2.0 }
            } else if i.abs_diff(j) == 1 {
                -1.0
            } else {
                0.0
            }
        });
        assert!(inv.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn validate_examples() {
        let pair = validate_m_matrix(&m2()).unwrap();
        assert_eq!(pair.b().rows(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert_eq!(pair.diag_a(), &[2.0, 2.0]);

        let bad = DenseMatrix::from_rows(&[[1.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(
            validate_m_matrix(&bad),
            Err(Error::NotMMatrix(NotMReason::PositiveOffDiagonal { row: 0, col: 1, .. }))
        ));

        let a = DenseMatrix::from_rows(&[[1.0, -0.5], [-0.5, 1.0]]).unwrap();
        let pair = validate_m_matrix(&a).unwrap();
        let k = DenseMatrix::from_rows(&[[4.0 / 3.0, 2.0 / 3.0], [2.0 / 3.0, 4.0 / 3.0]]).unwrap();
        assert!(pair.kernel().max_abs_diff(&k) < 1e-15);
        assert_eq!(pair.row_sums(), &[0.5, 0.5]);

        // Singular: off-diagonals fine, but no inverse.
        let s = DenseMatrix::from_rows(&[[1.0, -1.0], [-1.0, 1.0]]).unwrap();
        assert!(matches!(validate_m_matrix(&s), Err(Error::NotMMatrix(NotMReason::Singular))));

        // Z-matrix whose inverse is not nonnegative.
        let z = DenseMatrix::from_rows(&[[1.0, -2.0], [-2.0, 1.0]]).unwrap();
        assert!(matches!(
            validate_m_matrix(&z),
            Err(Error::NotMMatrix(NotMReason::NegativeInverseEntry { .. }))
        ));

        // Rounding noise above zero is clamped.
        let noisy = DenseMatrix::from_rows(&[[2.0, 1e-13], [-1.0, 2.0]]).unwrap();
        let pair = validate_m_matrix(&noisy).unwrap();
        assert_eq!(pair.a()[(0, 1)], 0.0);
    }

    #[test]
    fn alpha_permanent_examples() {
        assert_eq!(alpha_permanent(&DenseMatrix::identity(3), 2.0).unwrap(), 8.0);
        for alpha in [0.3, 1.0, 2.5] {
            let ones = DenseMatrix::from_rows(&[[1.0, 1.0], [1.0, 1.0]]).unwrap();
            let p = alpha_permanent(&ones, alpha).unwrap();
            assert!((p - (alpha * alpha + alpha)).abs() < 1e-14);
        }
        assert!(matches!(
            alpha_permanent(&DenseMatrix::identity(13), 1.0),
            Err(Error::DimensionTooLarge { n: 13, cap: 12 })
        ));
        assert_eq!(alpha_permanent(&DenseMatrix::zeros(0), 1.5).unwrap(), 1.0);
    }

    #[test]
    fn block_expand_examples() {
        let c = DenseMatrix::from_fn(3, |i, j| (10 * (i + 1) + j + 1) as f64);
        let e = block_expand(&c, &MultiIndex::new(vec![0, 2, 3]));
        let idx = [1, 1, 2, 2, 2];
        assert_eq!(e.n(), 5);
        for p in 0..5 {
            for q in 0..5 {
                assert_eq!(e[(p, q)], c[(idx[p], idx[q])]);
            }
        }
        assert_eq!(block_expand(&c, &MultiIndex::new(vec![1, 1, 1])), c);
        let c2 = DenseMatrix::from_rows(&[[1.5, 2.0], [3.0, 4.0]]).unwrap();
        let e = block_expand(&c2, &MultiIndex::new(vec![2, 0]));
        assert_eq!(e.rows(), vec![vec![1.5, 1.5], vec![1.5, 1.5]]);
    }

    #[test]
    fn spectral_radius_examples() {
        let swap = DenseMatrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        assert!((spectral_radius_nonneg(&swap).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(spectral_radius_nonneg(&DenseMatrix::zeros(3)).unwrap(), 0.0);
        let reducible = DenseMatrix::from_rows(&[[0.5, 1.0], [0.0, 0.1]]).unwrap();
        assert!((spectral_radius_nonneg(&reducible).unwrap() - 0.5).abs() < 1e-10);
        let diag = DenseMatrix::diag(&[0.1, 0.5]);
        assert!((spectral_radius_nonneg(&diag).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn multi_indices_are_lexicographic() {
        let v = multi_indices_of_order(3, 2);
        assert_eq!(v.len(), 6);
        let mut sorted = v.clone();
        sorted.sort();
        assert_eq!(v, sorted);
        assert_eq!(v[0], vec![0, 0, 2]);
        assert_eq!(MultiIndex::new(vec![2, 3, 0]).factorial_product(), 12.0);
    }

    #[test]
    fn text_and_json_roundtrip() {
        let m = DenseMatrix::from_rows(&[[1.0, -0.25], [0.5, 3.0]]).unwrap();
        assert_eq!(DenseMatrix::parse_text(&m.to_text()).unwrap(), m);
        let js = serde_json::to_string(&m).unwrap();
        assert_eq!(js, r#"{"n":2,"rows":[[1.0,-0.25],[0.5,3.0]]}"#);
        assert_eq!(serde_json::from_str::<DenseMatrix>(&js).unwrap(), m);
        assert!(serde_json::from_str::<DenseMatrix>(r#"{"n":3,"rows":[[1.0]]}"#).is_err());
    }
}
