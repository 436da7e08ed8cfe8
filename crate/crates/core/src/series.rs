//! Taylor coefficients of `det(I - Z W)^{-alpha}` for an entrywise nonnegative `W`.
//!
//! The coefficient of `z^k` equals `|W(k)|_alpha / k!`, the normalized alpha-permanent of
//! the block expansion of `W`. Instead of evaluating each permanent, the engine uses
//! `E F = alpha F tr(sum_j (ZW)^j)`, where `E` is the total-degree operator, and
//! tracks closed walks through auxiliary polynomials
//!
//! ```text
//! Y_s(v) = sum_{paths s -> v} (path weight) * F_{m - length}
//! ```
//!
//! so every term in the recurrence is nonnegative and no cancellation occurs.

use crate::error::{Error, Result};
use crate::linalg::{spectral_radius_nonneg, DenseMatrix};

/// Hard cap on the number of live floats held by one engine.
pub const DEFAULT_TERM_BUDGET: usize = 60_000_000;

/// Binomial table `C(a, b)` for `b <= max_b`, grown on demand.
#[derive(Debug, Clone)]
struct Binomials {
    max_b: usize,
    rows: Vec<Vec<u64>>,
}

impl Binomials {
    fn new(max_b: usize) -> Self {
        Self { max_b, rows: vec![{
            let mut r = vec![0u64; max_b + 1];
            r[0] = 1;
            r
        }] }
    }

    fn ensure(&mut self, a: usize) {
        while self.rows.len() <= a {
            let prev = self.rows.last().unwrap().clone();
            let mut next = vec![0u64; self.max_b + 1];
            next[0] = 1;
            for b in 1..=self.max_b {
                next[b] = prev[b - 1].saturating_add(prev[b]);
            }
            self.rows.push(next);
        }
    }

    fn get(&self, a: usize, b: usize) -> u64 {
        self.rows[a][b]
    }
}

/// Number of multi-indices of length `n` and order `m`.
pub fn count_of_order(n: usize, m: usize) -> usize {
    if n == 0 {
        return usize::from(m == 0);
    }
    let mut c: f64 = 1.0;
    for i in 1..n {
        c = c * (m + i) as f64 / i as f64;
    }
    c.round() as usize
}

/// Lexicographic rank of `k` among the multi-indices of its order.
fn lex_rank(k: &[u32], binom: &Binomials) -> usize {
    let n = k.len();
    let mut rem: usize = k.iter().map(|&v| v as usize).sum();
    let mut rank = 0u64;
    for i in 0..n.saturating_sub(1) {
        let p = n - i - 1;
        let ki = k[i] as usize;
        // sum_{v < k_i} C(rem - v + p - 1, p - 1) = C(rem + p, p) - C(rem - k_i + p, p)
        rank += binom.get(rem + p, p) - binom.get(rem - ki + p, p);
        rem -= ki;
    }
    rank as usize
}

/// Advances `k` to the next multi-index of the same order in lexicographic order.
fn next_lex(k: &mut [u32]) -> bool {
    let n = k.len();
    if n < 2 {
        return false;
    }
    // Find the rightmost position i < n-1 that can be increased: needs some mass to its right.
    let mut tail: u32 = k[n - 1];
    for i in (0..n - 1).rev() {
        if tail > 0 {
            k[i] += 1;
            for v in k.iter_mut().skip(i + 1) {
                *v = 0;
            }
            k[n - 1] = tail - 1;
            return true;
        }
        tail += k[i];
    }
    false
}

/// Streaming generator of the order-by-order coefficients.
#[derive(Debug, Clone)]
pub struct CoefficientEngine {
    n: usize,
    alpha: f64,
    w: DenseMatrix,
    order: usize,
    /// `y[(s * n + v) * count + rank]` for the current order.
    y: Vec<f64>,
    coeffs: Vec<f64>,
    binom: Binomials,
    budget: usize,
}

impl CoefficientEngine {
    pub fn new(w: &DenseMatrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {alpha}")));
        }
        if !w.is_nonnegative() {
            return Err(Error::InvalidInput("series matrix must be entrywise nonnegative".into()));
        }
        let n = w.n();
        let mut y = vec![0.0; n * n];
        for s in 0..n {
            y[s * n + s] = 1.0;
        }
        Ok(Self {
            n,
            alpha,
            w: w.clone(),
            order: 0,
            y,
            coeffs: vec![1.0],
            binom: Binomials::new(n),
            budget: DEFAULT_TERM_BUDGET,
        })
    }

    pub fn with_budget(mut self, budget: usize) -> Self {
        self.budget = budget;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Coefficients of the current order, in lexicographic order of `k`.
    pub fn coefficients(&self) -> &[f64] {
        &self.coeffs
    }

    /// Rank of `k` among the multi-indices of its order.
    pub fn rank(&mut self, k: &[u32]) -> usize {
        let m: usize = k.iter().map(|&v| v as usize).sum();
        self.binom.ensure(m + self.n + 1);
        lex_rank(k, &self.binom)
    }

    /// Advances to the next order.
    pub fn advance(&mut self) -> Result<()> {
        let n = self.n;
        if n == 0 {
            self.order += 1;
            self.coeffs.clear();
            return Ok(());
        }
        let m = self.order + 1;
        let count = count_of_order(n, m);
        let prev_count = count_of_order(n, m - 1);
        let live = count.saturating_mul(n * n + 1).saturating_add(self.y.len());
        if live > self.budget {
            return Err(Error::TruncationInfeasible(format!(
                "order {m} needs {live} live terms, above the budget of {}",
                self.budget
            )));
        }
        self.binom.ensure(m + n + 1);
        let w = &self.w;
        let alpha_over_m = self.alpha / m as f64;
        let mut y_new = vec![0.0; n * n * count];
        let mut coeffs = vec![0.0; count];
        let mut k = vec![0u32; n];
        k[n - 1] = m as u32;
        let mut pred = vec![usize::MAX; n];
        let mut closed = vec![0.0; n];
        let mut rank = 0usize;
        loop {
            for u in 0..n {
                if k[u] > 0 {
                    k[u] -= 1;
                    pred[u] = lex_rank(&k, &self.binom);
                    k[u] += 1;
                } else {
                    pred[u] = usize::MAX;
                }
            }
            let mut total = 0.0;
            for s in 0..n {
                for v in 0..n {
                    let mut acc = 0.0;
                    for u in 0..n {
                        let p = pred[u];
                        if p != usize::MAX {
                            let wuv = w[(u, v)];
                            if wuv != 0.0 {
                                acc += wuv * self.y[(s * n + u) * prev_count + p];
                            }
                        }
                    }
                    if v == s {
                        closed[s] = acc;
                        total += acc;
                    } else {
                        y_new[(s * n + v) * count + rank] = acc;
                    }
                }
            }
            let f = alpha_over_m * total;
            coeffs[rank] = f;
            for s in 0..n {
                y_new[(s * n + s) * count + rank] = f + closed[s];
            }
            rank += 1;
            if !next_lex(&mut k) {
                break;
            }
        }
        debug_assert_eq!(rank, count);
        self.y = y_new;
        self.coeffs = coeffs;
        self.order = m;
        Ok(())
    }
}

/// Order sums `H_j = sum_{|k| = j} coeff(k)` from the trace recurrence
/// `j H_j = alpha sum_{i=1}^{j} tr(W^i) H_{j-i}`, plus a rigorous remainder bound.
///
/// Because `tr(W^i) <= n rho^i` for `W >= 0`, the generating function is dominated
/// coefficientwise by `(1 - rho t)^{-n alpha}`, whose tail bounds everything past the
/// last computed order.
#[derive(Debug, Clone)]
pub struct OrderSums {
    sums: Vec<f64>,
    /// Bound on `sum_{j > sums.len() - 1} H_j`.
    remainder: f64,
    rho: f64,
}

impl OrderSums {
    pub fn compute(w: &DenseMatrix, alpha: f64, max_order: usize) -> Result<Self> {
        let n = w.n();
        let rho = spectral_radius_nonneg(w)?;
        if rho >= 1.0 {
            return Err(Error::TruncationInfeasible(format!(
                "Perron root {rho} of the series matrix is not below 1"
            )));
        }
        let mut traces = Vec::with_capacity(max_order + 1);
        traces.push(n as f64);
        let mut power = DenseMatrix::identity(n);
        let mut sums = vec![1.0];
        let na = n as f64 * alpha;
        let mut majorant_term = 1.0; // binom(na + j - 1, j) rho^j at j
        let mut remainder = f64::INFINITY;
        for j in 1..=max_order {
            power = power.matmul(w);
            traces.push((0..n).map(|i| power[(i, i)]).sum::<f64>());
            let mut acc = 0.0;
            for i in 1..=j {
                acc += traces[i] * sums[j - i];
            }
            sums.push(alpha * acc / j as f64);
            majorant_term *= rho * (na + (j - 1) as f64) / j as f64;
            let next_ratio = rho * (na + j as f64) / (j + 1) as f64;
            let r = next_ratio.max(rho);
            if r < 1.0 {
                remainder = majorant_term * next_ratio / (1.0 - r);
                let total: f64 = sums.iter().sum();
                if remainder < 1e-18 * total {
                    break;
                }
            }
        }
        Ok(Self { sums, remainder, rho })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn sums(&self) -> &[f64] {
        &self.sums
    }

    /// Certified bound on `sum_{j > m} H_j`.
    pub fn tail_after(&self, m: usize) -> f64 {
        let computed: f64 = self.sums.iter().skip(m + 1).sum();
        computed + self.remainder
    }

    pub fn total(&self) -> f64 {
        self.sums.iter().sum::<f64>() + self.remainder
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{alpha_permanent, block_expand, det_lu, MultiIndex};

    #[test]
    fn rank_matches_enumeration() {
        let mut b = Binomials::new(4);
        b.ensure(20);
        for m in 0..6u32 {
            let all = crate::linalg::multi_indices_of_order(4, m);
            assert_eq!(all.len(), count_of_order(4, m as usize));
            for (r, k) in all.iter().enumerate() {
                assert_eq!(lex_rank(k, &b), r);
            }
            let mut k = all[0].clone();
            let mut seen = vec![k.clone()];
            while next_lex(&mut k) {
                seen.push(k.clone());
            }
            assert_eq!(seen, all);
        }
    }

    #[test]
    fn two_state_closed_form() {
        // det(I - ZW)^{-alpha} = (1 - bc z1 z2)^{-alpha}
        let (b, c, alpha) = (0.3, 0.7, 1.7);
        let w = DenseMatrix::from_rows(&[[0.0, b], [c, 0.0]]).unwrap();
        let mut e = CoefficientEngine::new(&w, alpha).unwrap();
        for m in 1..=12u32 {
            e.advance().unwrap();
            for (r, k) in crate::linalg::multi_indices_of_order(2, m).iter().enumerate() {
                let expect = if k[0] == k[1] {
                    let j = k[0];
                    let binom: f64 = (1..=j).map(|i| (alpha + f64::from(i) - 1.0) / f64::from(i)).product();
                    binom * (b * c).powi(j as i32)
                } else {
                    0.0
                };
                let got = e.coefficients()[r];
                assert!((got - expect).abs() <= 1e-14 * expect.max(1e-300), "{k:?}: {got} vs {expect}");
            }
        }
    }

    #[test]
    fn coefficients_equal_normalized_alpha_permanents() {
        let w = DenseMatrix::from_rows(&[[0.1, 0.4, 0.2], [0.3, 0.0, 0.25], [0.05, 0.5, 0.15]]).unwrap();
        for alpha in [0.5, 1.0, 2.3] {
            let mut e = CoefficientEngine::new(&w, alpha).unwrap();
            for m in 1..=7u32 {
                e.advance().unwrap();
                for (r, k) in crate::linalg::multi_indices_of_order(3, m).into_iter().enumerate() {
                    let mi = MultiIndex::new(k);
                    let perm = alpha_permanent(&block_expand(&w, &mi), alpha).unwrap();
                    let expect = perm / mi.factorial_product();
                    let got = e.coefficients()[r];
                    assert!((got - expect).abs() <= 1e-12 * expect.abs().max(1e-300), "{mi:?}: {got} vs {expect}");
                }
            }
        }
    }

    #[test]
    fn order_sums_match_engine_and_determinant() {
        let w = DenseMatrix::from_rows(&[[0.0, 0.3, 0.1], [0.2, 0.0, 0.3], [0.25, 0.2, 0.0]]).unwrap();
        let alpha = 0.8;
        let sums = OrderSums::compute(&w, alpha, 5000).unwrap();
        let mut e = CoefficientEngine::new(&w, alpha).unwrap();
        for m in 1..=10 {
            e.advance().unwrap();
            let s: f64 = e.coefficients().iter().sum();
            assert!((s - sums.sums()[m]).abs() <= 1e-13 * s);
        }
        let exact = det_lu(&DenseMatrix::identity(3).sub(&w)).powf(-alpha);
        let total: f64 = sums.sums().iter().sum();
        assert!((total - exact).abs() <= 1e-13 * exact);
        assert!(sums.total() >= total);
        // Tail after m is consistent with the exact remainder.
        let partial: f64 = sums.sums()[..=10].iter().sum();
        let tail = sums.tail_after(10);
        assert!((partial + tail - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn budget_is_enforced() {
        let w = DenseMatrix::from_fn(4, |i, j| if i == j { 0.0 } else { 0.2 });
        let mut e = CoefficientEngine::new(&w, 1.0).unwrap().with_budget(1000);
        let mut hit = false;
        for _ in 0..30 {
            if let Err(Error::TruncationInfeasible(_)) = e.advance() {
                hit = true;
                break;
            }
        }
        assert!(hit);
    }
}
