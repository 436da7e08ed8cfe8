//! Adaptive Gauss-Kronrod quadrature and lobe-wise summation of oscillatory integrals.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_279,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

/// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Integral value with an error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
}

impl QuadResult {
    pub fn zero() -> Self {
        Self { value: 0.0, error: 0.0 }
    }
}

impl std::ops::Add for QuadResult {
    type Output = QuadResult;

    fn add(self, rhs: Self) -> Self {
        Self { value: self.value + rhs.value, error: self.error + rhs.error }
    }
}

impl std::ops::Sub for QuadResult {
    type Output = QuadResult;

    fn sub(self, rhs: Self) -> Self {
        Self { value: self.value - rhs.value, error: self.error + rhs.error }
    }
}

impl std::ops::Mul<f64> for QuadResult {
    type Output = QuadResult;

    fn mul(self, rhs: f64) -> Self {
        Self { value: self.value * rhs, error: self.error * rhs.abs() }
    }
}

/// One 21-point Kronrod rule with the embedded 10-point Gauss rule as error estimate.
pub fn gk21(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> QuadResult {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[10] * fc;
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    QuadResult { value: kronrod * h, error: ((kronrod - gauss) * h).abs() }
}

struct Segment {
    a: f64,
    b: f64,
    r: QuadResult,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.r.error == other.r.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.r.error.total_cmp(&other.r.error)
    }
}

/// Globally adaptive bisection on `[a, b]`.
///
/// Stops when the summed error estimate is below `max(abs_tol, rel_tol |I|)` or after
/// `max_segments` segments; in the latter case the returned error is whatever was reached.
pub fn integrate(
    mut f: impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult::zero());
    }
    let first = gk21(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    let mut total = first;
    heap.push(Segment { a, b, r: first });
    while heap.len() < max_segments {
        if total.error <= abs_tol.max(rel_tol * total.value.abs()) {
            break;
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let left = gk21(&mut f, worst.a, mid);
        let right = gk21(&mut f, mid, worst.b);
        total.value += left.value + right.value - worst.r.value;
        total.error += left.error + right.error - worst.r.error;
        heap.push(Segment { a: worst.a, b: mid, r: left });
        heap.push(Segment { a: mid, b: worst.b, r: right });
    }
    // Re-sum to shed the drift of the incremental updates.
    let value: f64 = heap.iter().map(|s| s.r.value).sum();
    let error: f64 = heap.iter().map(|s| s.r.error).sum();
    if !value.is_finite() {
        return Err(Error::QuadratureFailure {
            detail: format!("non-finite integral on [{a}, {b}]"),
            residual: f64::INFINITY,
        });
    }
    Ok(QuadResult { value, error })
}

/// Wynn's epsilon algorithm applied to a sequence of partial sums.
///
/// Returns the last diagonal estimate and the gap to the previous one.
pub fn wynn_epsilon(partial_sums: &[f64]) -> (f64, f64) {
    let m = partial_sums.len();
    if m < 3 {
        let last = partial_sums.last().copied().unwrap_or(0.0);
        let prev = if m >= 2 { partial_sums[m - 2] } else { 0.0 };
        return (last, (last - prev).abs());
    }
    let mut prev_col: Vec<f64> = vec![0.0; m + 1];
    let mut cur_col: Vec<f64> = partial_sums.to_vec();
    let mut estimates: Vec<f64> = Vec::new();
    let mut col = 0;
    while cur_col.len() > 1 {
        let mut next = Vec::with_capacity(cur_col.len() - 1);
        for i in 0..cur_col.len() - 1 {
            let diff = cur_col[i + 1] - cur_col[i];
            let base = if col == 0 { 0.0 } else { prev_col[i + 1] };
            let v = if diff == 0.0 { f64::INFINITY } else { base + 1.0 / diff };
            next.push(v);
        }
        col += 1;
        prev_col = cur_col;
        cur_col = next;
        if col % 2 == 0 {
            if let Some(&v) = cur_col.last() {
                if v.is_finite() {
                    estimates.push(v);
                }
            }
        }
        if cur_col.iter().any(|v| !v.is_finite()) {
            break;
        }
    }
    let last = *partial_sums.last().unwrap();
    match estimates.len() {
        0 => (last, (last - partial_sums[m - 2]).abs()),
        1 => (estimates[0], (estimates[0] - last).abs()),
        k => (estimates[k - 1], (estimates[k - 1] - estimates[k - 2]).abs()),
    }
}

/// Sums lobe integrals `lobe(0), lobe(1), ..` of an alternating tail.
///
/// `lobe` returns `None` once the integration range is exhausted. The series is
/// truncated when the last lobe is below `abs_tol`; otherwise after `max_lobes` the
/// Wynn-accelerated limit of the partial sums is used.
pub fn sum_lobes(
    mut lobe: impl FnMut(usize) -> Result<Option<QuadResult>>,
    max_lobes: usize,
    abs_tol: f64,
) -> Result<QuadResult> {
    let mut partial = Vec::new();
    let mut total = QuadResult::zero();
    for i in 0..max_lobes {
        match lobe(i)? {
            None => return Ok(total),
            Some(r) => {
                total = total + r;
                partial.push(total.value);
                if r.value.abs() < abs_tol && i >= 2 {
                    return Ok(total);
                }
            }
        }
    }
    let tail = &partial[partial.len().saturating_sub(40)..];
    let (value, gap) = wynn_epsilon(tail);
    Ok(QuadResult { value, error: total.error + gap })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_exact() {
        let r = gk21(&mut |x: f64| x.powi(7) - 3.0 * x * x, 0.0, 2.0);
        assert!((r.value - (32.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-12, 1e-12, 500).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{:?}", r);
        let r = integrate(|x: f64| x.ln(), 0.0, 1.0, 1e-13, 1e-13, 500).unwrap();
        assert!((r.value + 1.0).abs() < 1e-11);
    }

    #[test]
    fn wynn_accelerates_alternating_series() {
        // log 2 = 1 - 1/2 + 1/3 - ...
        let mut s = 0.0;
        let partial: Vec<f64> = (1..=20)
            .map(|k| {
                s += if k % 2 == 1 { 1.0 } else { -1.0 } / k as f64;
                s
            })
            .collect();
        let (v, _) = wynn_epsilon(&partial);
        assert!((v - 2f64.ln()).abs() < 1e-10, "{v}");
    }

    #[test]
    fn lobe_sum_dirichlet_integral() {
        // int_0^inf sin x / x dx = pi/2 over lobes [k pi, (k+1) pi].
        let r = sum_lobes(
            |k| {
                let a = k as f64 * PI;
                let f = |x: f64| if x == 0.0 { 1.0 } else { x.sin() / x };
                Ok(Some(integrate(f, a, a + PI, 1e-15, 1e-14, 50)?))
            },
            60,
            1e-14,
        )
        .unwrap();
        assert!((r.value - PI / 2.0).abs() < 1e-10, "{:?}", r);
    }
}
