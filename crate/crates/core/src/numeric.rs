//! Small numerical kernels shared by the bound catalog and the chaining
//! diagnostics: compensated summation, log-binomial sums and adaptive
//! Simpson quadrature.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl Extend<f64> for CompensatedSum {
    fn extend<I: IntoIterator<Item = f64>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

pub fn compensated_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut acc = CompensatedSum::new();
    acc.extend(xs);
    acc.value()
}

/// `ln C(n, k)` as a compensated sum of `ln((n - k + j) / j)`.
pub fn ln_choose(n: u64, k: u64) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    let base = (n - k) as f64;
    compensated_sum((1..=k).map(|j| {
        let j = j as f64;
        (base / j).ln_1p()
    }))
}

/// `ln Σ_{j=0}^{m} C(n, j)`.
///
/// Below the midpoint the sum is anchored at its largest term `C(n, m)` and
/// the remaining ratios decay geometrically. At or above the midpoint the
/// complement `2^n - Σ_{j<n-m} C(n, j)` is used instead.
pub fn ln_partial_binomial_sum(n: u64, m: u64) -> f64 {
    if m >= n {
        return n as f64 * LN_2;
    }
    if 2 * m < n {
        let mut ratio = 1.0_f64;
        let mut tail = CompensatedSum::new();
        tail.add(1.0);
        let mut j = m;
        while j > 0 {
            ratio *= j as f64 / (n - j + 1) as f64;
            if ratio < 1e-18 * tail.value() {
                break;
            }
            tail.add(ratio);
            j -= 1;
        }
        ln_choose(n, m) + tail.value().ln()
    } else {
        let total = n as f64 * LN_2;
        let complement = ln_partial_binomial_sum(n, n - m - 1);
        total + (-(complement - total).exp()).ln_1p()
    }
}

/// Exact `Σ_{j=0}^{m} C(n, j)`, or `None` on `u128` overflow.
pub fn partial_binomial_sum_exact(n: u64, m: u64) -> Option<u128> {
    let m = m.min(n);
    let mut term: u128 = 1;
    let mut total: u128 = 1;
    for j in 1..=m {
        term = term.checked_mul((n - j + 1) as u128)? / j as u128;
        total = total.checked_add(term)?;
    }
    Some(total)
}

/// Adaptive Simpson quadrature to an absolute tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    if hi == lo {
        return Ok(0.0);
    }
    if hi < lo {
        return integrate(f, hi, lo, tol).map(|v| -v);
    }
    let mid = 0.5 * (lo + hi);
    let (flo, fmid, fhi) = (f(lo), f(mid), f(hi));
    let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
    let mut failed = false;
    let value = simpson_step(&f, lo, hi, flo, fmid, fhi, whole, tol, MAX_DEPTH, &mut failed);
    if failed || !value.is_finite() {
        return Err(Error::Integration { lo, hi, tol });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    flo: f64,
    fmid: f64,
    fhi: f64,
    whole: f64,
    tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let mid = 0.5 * (lo + hi);
    let lmid = 0.5 * (lo + mid);
    let rmid = 0.5 * (mid + hi);
    let (flm, frm) = (f(lmid), f(rmid));
    let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
    let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        *failed = true;
        return left + right;
    }
    simpson_step(f, lo, mid, flo, flm, fmid, left, 0.5 * tol, depth - 1, failed)
        + simpson_step(f, mid, hi, fmid, frm, fhi, right, 0.5 * tol, depth - 1, failed)
}

/// Integrates piecewise over the sorted breakpoints that fall inside `(lo, hi)`.
pub fn integrate_split<F: Fn(f64) -> f64>(
    f: F,
    lo: f64,
    hi: f64,
    breaks: &[f64],
    tol: f64,
) -> Result<f64> {
    let mut knots: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|b| *b > lo && *b < hi)
        .collect();
    knots.sort_by(f64::total_cmp);
    knots.dedup();
    let pieces = knots.len() + 1;
    let mut acc = CompensatedSum::new();
    let mut left = lo;
    for right in knots.into_iter().chain(std::iter::once(hi)) {
        acc.add(integrate(&f, left, right, tol / pieces as f64)?);
        left = right;
    }
    Ok(acc.value())
}

/// Mean and standard error (sample standard deviation over `√len`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let len = xs.len();
    if len == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = compensated_sum(xs.iter().copied()) / len as f64;
    if len < 2 {
        return (mean, 0.0);
    }
    let ss = compensated_sum(xs.iter().map(|x| (x - mean) * (x - mean)));
    let sd = (ss / (len - 1) as f64).sqrt();
    (mean, sd / (len as f64).sqrt())
}

/// `x · ln(c / x)` extended by continuity to 0 at `x = 0`.
pub(crate) fn x_log_c_over_x(x: f64, c: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * (c / x).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut xs = vec![1e16, 1.0, -1e16];
        xs.extend(std::iter::repeat_n(1e-3, 1000));
        let s = compensated_sum(xs);
        assert!((s - 2.0).abs() < 1e-12, "{s}");
    }

    #[test]
    fn ln_choose_small_values() {
        assert_eq!(ln_choose(5, 0), 0.0);
        assert!((ln_choose(10, 3) - 120f64.ln()).abs() < 1e-14);
        assert!((ln_choose(10, 7) - 120f64.ln()).abs() < 1e-14);
        assert_eq!(ln_choose(3, 4), f64::NEG_INFINITY);
    }

    #[test]
    fn partial_sum_matches_exact_integers() {
        for n in 1..=120u64 {
            for m in 0..=n {
                let exact = partial_binomial_sum_exact(n, m).unwrap() as f64;
                let got = ln_partial_binomial_sum(n, m);
                assert!(
                    (got - exact.ln()).abs() <= 1e-12 * exact.ln().max(1.0),
                    "n={n} m={m}: {got} vs {}",
                    exact.ln()
                );
            }
        }
    }

    #[test]
    fn simpson_integrates_polynomials_and_logs() {
        let v = integrate(|x| x * x, 0.0, 3.0, 1e-10).unwrap();
        assert!((v - 9.0).abs() < 1e-9);
        let v = integrate(|x| 1.0 / x, 0.5, 2.0, 1e-10).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-9);
        let v = integrate(|x| x, 2.0, 1.0, 1e-10).unwrap();
        assert!((v + 1.5).abs() < 1e-12);
    }

    #[test]
    fn simpson_reports_failure_on_nonintegrable_spike() {
        let err = integrate(|x: f64| 1.0 / x.abs().max(1e-300), -1.0, 1.0, 1e-12);
        assert!(matches!(err, Err(Error::Integration { .. })));
    }

    #[test]
    fn split_integration_handles_kinks() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_split(f, 0.0, 1.0, &[0.3], 1e-12).unwrap();
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn mean_stderr_basic() {
        let (m, s) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        let sd = (5.0f64 / 3.0).sqrt();
        assert!((s - sd / 2.0).abs() < 1e-15);
        assert_eq!(mean_stderr(&[7.0, 7.0, 7.0]), (7.0, 0.0));
    }
}
