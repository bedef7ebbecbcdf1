//! Chaining over empirical L1 packings of a trace set: the entropy function
//! `h`, its integral `H`, the constants `q`, `b_q`, `c_d`, and a level-by-level
//! decomposition of the Rademacher supremum that checks each step.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::bounds::gamma_bar;
use crate::error::{domain, Error, Result};
use crate::numeric::{compensated_sum, integrate_split};
use crate::sets::TraceSet;

/// `q = 2^{5/2} e^{-6}`, the ratio between consecutive `√η_k`.
pub const Q: f64 = 5.656_854_249_492_381 * 0.002_478_752_176_666_358_4;

/// Absolute tolerance of the `H` quadrature.
pub const H_TOL: f64 = 1e-8;

/// Largest sample for exhaustive sign enumeration.
pub const MAX_EXHAUSTIVE_N: usize = 20;

/// `b_q = √2 (√(1 + q²) / (1 - q) + √(1/3))`.
pub fn b_q() -> f64 {
    2f64.sqrt() * ((1.0 + Q * Q).sqrt() / (1.0 - Q) + (1.0f64 / 3.0).sqrt())
}

/// `c_d = log 2 + 2 log(e(d+1)(2e)^d) + 2d log(1/q)`.
///
/// Expanded with `log(1/q) = 6 - (5/2) log 2` this is
/// `16d + (1 - 3d) log 2 + 2 log(d+1) + 2(1 - d)`, which is how it is
/// evaluated: the excess over `16d` vanishes exactly at `d = 1`.
pub fn c_d(d: u64) -> Result<f64> {
    if d == 0 {
        return Err(domain("d", 0.0, "d >= 1"));
    }
    let d = d as f64;
    let excess = (1.0 - 3.0 * d) * LN_2 + 2.0 * (d + 1.0).ln() + 2.0 * (1.0 - d);
    Ok(16.0 * d + excess)
}

fn haussler_intercept(m: f64) -> f64 {
    1.0 + (m + 1.0).ln() + m * (2.0 * E).ln()
}

/// `h(η) = [log(e(m+1)(2e)^m) + m log(1/η)] ∧ [Γ̄_n(d) - log 2]` on `(0, 1)`
/// and 0 from 1 on, with `m = d∧n`.
pub fn h_entropy(eta: f64, n: u64, d: u64) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(domain("eta", eta, "eta > 0"));
    }
    check_nd(n, d)?;
    if eta >= 1.0 {
        return Ok(0.0);
    }
    let m = d.min(n) as f64;
    let packing = haussler_intercept(m) - m * eta.ln();
    Ok(packing.min(gamma_bar(n, d) - LN_2))
}

fn check_nd(n: u64, d: u64) -> Result<()> {
    if n == 0 {
        return Err(domain("n", 0.0, "n >= 1"));
    }
    if d == 0 {
        return Err(domain("d", 0.0, "d >= 1"));
    }
    Ok(())
}

/// The `η` at which the two branches of `h` meet, when inside `(0, 1)`.
fn h_kink(n: u64, d: u64) -> Option<f64> {
    let m = d.min(n) as f64;
    let eta = ((haussler_intercept(m) - gamma_bar(n, d) + LN_2) / m).exp();
    (eta > 0.0 && eta < 1.0).then_some(eta)
}

/// `H(x) = ∫_0^x √(log 2 + h(u²) + h(q²u²)) du` for `0 ≤ x ≤ 1`.
pub fn h_integral(x: f64, n: u64, d: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("x", x, "0 <= x <= 1"));
    }
    check_nd(n, d)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    let cap = gamma_bar(n, d) - LN_2;
    let m = d.min(n) as f64;
    let intercept = haussler_intercept(m);
    // Left limit at η = 1: the integrand's jump at u = 1 is a single point.
    let h = |eta: f64| {
        if eta <= 0.0 {
            cap
        } else {
            (intercept - m * eta.min(1.0).ln()).min(cap)
        }
    };
    let integrand = |u: f64| (LN_2 + h(u * u) + h(Q * Q * u * u)).sqrt();
    let breaks: Vec<f64> = match h_kink(n, d) {
        Some(k) => vec![k.sqrt(), k.sqrt() / Q],
        None => Vec::new(),
    };
    integrate_split(integrand, 0.0, x, &breaks, H_TOL)
}

/// `√n · b_q · H(√η₀)`, the chaining bound on `E_ε Z̄` given the sample.
pub fn master_bound(eta0: f64, n: u64, d: u64) -> Result<f64> {
    Ok((n as f64).sqrt() * b_q() * h_integral(eta0.sqrt(), n, d)?)
}

/// `η₀ = max_C (1/n) Σ 1{X_i ∈ C}` over the traces.
pub fn eta0(traces: &TraceSet) -> f64 {
    let top = traces.masks.iter().map(|m| m.count_ones()).max().unwrap_or(0);
    top as f64 / traces.n as f64
}

/// A maximal `η`-separated subset of the traces for `|C Δ C'| / n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub eta: f64,
    pub centers: Vec<u128>,
    /// `projection[j]` indexes the center nearest to trace `j`.
    pub projection: Vec<usize>,
}

impl Packing {
    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    pub fn project(&self, j: usize) -> u128 {
        self.centers[self.projection[j]]
    }
}

/// Greedy packing in increasing mask order. A trace becomes a center when it
/// is more than `nη` from every earlier center; each trace is then projected
/// to its nearest center, ties going to the earlier one.
pub fn l1_packing(traces: &TraceSet, eta: f64) -> Result<Packing> {
    if !(eta >= 0.0) {
        return Err(domain("eta", eta, "eta >= 0"));
    }
    if traces.is_empty() {
        return Err(Error::EmptySet);
    }
    let n = traces.n;
    let radius = n as f64 * eta;
    if radius < 1.0 {
        return Ok(Packing {
            eta,
            centers: traces.masks.clone(),
            projection: (0..traces.len()).collect(),
        });
    }
    // Distances are integers: within the radius means at most ⌊nη⌋.
    let r = radius.floor().min(n as f64) as usize;
    // Centers bucketed by size: |C Δ C'| ≥ ||C| - |C'||.
    let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    let mut centers: Vec<u128> = Vec::new();
    for &t in &traces.masks {
        let p = t.count_ones() as usize;
        let lo = p.saturating_sub(r);
        let hi = (p + r).min(n);
        let near = (lo..=hi).any(|b| {
            buckets[b]
                .iter()
                .any(|&c| (centers[c] ^ t).count_ones() as usize <= r)
        });
        if !near {
            buckets[p].push(centers.len());
            centers.push(t);
        }
    }
    let projection = traces
        .masks
        .iter()
        .map(|&t| {
            let p = t.count_ones() as usize;
            let mut best = (u32::MAX, usize::MAX);
            for bucket in &buckets[p.saturating_sub(r)..=(p + r).min(n)] {
                for &c in bucket {
                    let dist = (centers[c] ^ t).count_ones();
                    if (dist, c) < best {
                        best = (dist, c);
                    }
                }
            }
            best.1
        })
        .collect();
    Ok(Packing {
        eta,
        centers,
        projection,
    })
}

/// One refinement step of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainLevel {
    pub k: usize,
    pub eta_k: f64,
    pub packing_size: usize,
    pub h_eta_k: f64,
    /// `sup_C |Σ ε_i (1_{C_{k+1}} - 1_{C_k})(X_i)|`; for the last level, where
    /// the projection is exact, 0.
    pub level_sup: f64,
    /// Level-0 term plus the level sups up to and including this one.
    pub cumulative: f64,
    /// `max_C |C_{k+1} Δ C_k|`.
    pub max_increment: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub n: usize,
    pub eta0: f64,
    /// `sup` over level-0 centers of `|Σ ε_i 1_C(X_i)|`.
    pub level0_sup: f64,
    pub levels: Vec<ChainLevel>,
    /// `level0_sup + Σ level_sup`.
    pub total: f64,
    /// `Z̄` on the traces.
    pub zbar: f64,
    /// Every trace equals its telescoped reconstruction.
    pub telescoping_ok: bool,
    /// `|C_{k+1} Δ C_k| ≤ n(1 + q²)η_k` at every level.
    pub increments_ok: bool,
    /// The finest level projects every trace to itself.
    pub exact_at_bottom: bool,
}

impl ChainReport {
    /// `Z̄ ≤ level-0 term + Σ level sups`.
    pub fn master_ok(&self) -> bool {
        self.zbar <= self.total
    }
}

fn signed_count(mask: u128, pos: u128, neg: u128) -> i64 {
    (mask & pos).count_ones() as i64 - (mask & neg).count_ones() as i64
}

fn sign_masks(signs: &[f64], n: usize) -> Result<(u128, u128)> {
    if signs.len() != n {
        return Err(Error::RaggedVectors {
            expected: n,
            found: signs.len(),
        });
    }
    let mut pos = 0u128;
    let mut neg = 0u128;
    for (i, e) in signs.iter().enumerate() {
        if *e == 1.0 {
            pos |= 1 << i;
        } else if *e == -1.0 {
            neg |= 1 << i;
        } else {
            return Err(Error::InvalidArgument(format!("sign {e} is not +1 or -1")));
        }
    }
    Ok((pos, neg))
}

/// Builds levels `η_k = q^{2k} η₀` down to the first `η_K < 1/n`, projects
/// every trace at each level and checks the telescoping identity
/// `1_C = 1_{C_0} + Σ_k (1_{C_{k+1}} - 1_{C_k})` and the increment bound.
pub fn chaining_decomposition(traces: &TraceSet, signs: &[f64], eta0: f64) -> Result<ChainReport> {
    if !(eta0 > 0.0 && eta0 <= 1.0) {
        return Err(domain("eta0", eta0, "0 < eta0 <= 1"));
    }
    let n = traces.n;
    let (pos, neg) = sign_masks(signs, n)?;
    let nf = n as f64;

    let mut etas = vec![eta0];
    while *etas.last().expect("nonempty") * nf >= 1.0 {
        let next = etas.last().expect("nonempty") * Q * Q;
        etas.push(next);
    }
    let packings: Vec<Packing> = etas.iter().map(|&e| l1_packing(traces, e)).collect::<Result<_>>()?;
    let bottom = packings.last().expect("at least one level");
    let exact_at_bottom = (0..traces.len()).all(|j| bottom.project(j) == traces.masks[j]);

    let level0_sup = packings[0]
        .centers
        .iter()
        .map(|&c| signed_count(c, pos, neg).abs())
        .max()
        .unwrap_or(0) as f64;

    let mut telescoping_ok = exact_at_bottom;
    for (j, &c) in traces.masks.iter().enumerate() {
        // Per-point telescoped indicator, as integers.
        let mut acc = vec![0i32; n];
        let start = packings[0].project(j);
        for (i, a) in acc.iter_mut().enumerate() {
            *a = (start >> i & 1) as i32;
        }
        for w in packings.windows(2) {
            let (from, to) = (w[0].project(j), w[1].project(j));
            for (i, a) in acc.iter_mut().enumerate() {
                *a += (to >> i & 1) as i32 - (from >> i & 1) as i32;
            }
        }
        if acc.iter().enumerate().any(|(i, a)| *a != (c >> i & 1) as i32) {
            telescoping_ok = false;
        }
    }

    let mut levels = Vec::with_capacity(etas.len());
    let mut cumulative = level0_sup;
    let mut increments_ok = true;
    for k in 0..etas.len() {
        let (level_sup, max_increment) = if k + 1 < etas.len() {
            let mut sup = 0i64;
            let mut inc = 0usize;
            for j in 0..traces.len() {
                let (a, b) = (packings[k].project(j), packings[k + 1].project(j));
                sup = sup.max((signed_count(b, pos, neg) - signed_count(a, pos, neg)).abs());
                inc = inc.max((a ^ b).count_ones() as usize);
            }
            (sup as f64, inc)
        } else {
            (0.0, 0)
        };
        if max_increment as f64 > nf * (1.0 + Q * Q) * etas[k] * (1.0 + 1e-12) {
            increments_ok = false;
        }
        cumulative += level_sup;
        levels.push(ChainLevel {
            k,
            eta_k: etas[k],
            packing_size: packings[k].len(),
            h_eta_k: 0.0,
            level_sup,
            cumulative,
            max_increment,
        });
    }

    let zbar = traces
        .masks
        .iter()
        .map(|&c| signed_count(c, pos, neg).abs())
        .max()
        .unwrap_or(0) as f64;

    Ok(ChainReport {
        n,
        eta0,
        level0_sup,
        total: cumulative,
        levels,
        zbar,
        telescoping_ok,
        increments_ok,
        exact_at_bottom,
    })
}

/// Fills in `h(η_k)` for dimension `d`.
pub fn with_entropy(mut report: ChainReport, d: u64) -> Result<ChainReport> {
    for level in &mut report.levels {
        level.h_eta_k = h_entropy(level.eta_k, report.n as u64, d)?;
    }
    Ok(report)
}

/// `E_ε sup_C |Σ ε_i 1_C(X_i)|` over all `2^n` sign vectors.
pub fn conditional_rademacher_exhaustive(traces: &TraceSet) -> Result<f64> {
    let n = traces.n;
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TraceCap {
            n,
            cap: MAX_EXHAUSTIVE_N,
        });
    }
    let vals = (0u128..1 << n).map(|neg| {
        traces
            .masks
            .iter()
            .map(|&c| (c.count_ones() as i64 - 2 * (c & neg).count_ones() as i64).abs())
            .max()
            .unwrap_or(0) as f64
    });
    Ok(compensated_sum(vals) / (1u64 << n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::h_bar;
    use crate::sets::{trace_values, SetClass, Shape};

    fn halfline_traces() -> TraceSet {
        trace_values(&SetClass::of(Shape::Upper), &[0.2, 0.5, 0.9], 30).unwrap()
    }

    #[test]
    fn constants() {
        let q = 2f64.powf(2.5) * (-6f64).exp();
        assert!((Q - q).abs() < 1e-17);
        assert!(b_q() < 2.5);
        assert_eq!(c_d(1).unwrap(), 16.0);
        for d in 1..=100 {
            let direct = LN_2 + 2.0 * (E * (d + 1) as f64 * (2.0 * E).powi(d as i32)).ln()
                + 2.0 * d as f64 * (1.0 / Q).ln();
            let c = c_d(d).unwrap();
            assert!((c - direct).abs() < 1e-9 * direct, "d={d}");
            assert!(c <= 16.0 * d as f64);
        }
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(h_entropy(1.0, 3, 1).unwrap(), 0.0);
        assert_eq!(h_entropy(2.0 * E, 3, 1).unwrap(), 0.0);
        let h = h_entropy(1.0 - 1e-12, 3, 1).unwrap();
        assert!((h - 4f64.ln()).abs() < 1e-12);
        let h = h_entropy(1.0 - 1e-12, 10_000, 1).unwrap();
        assert!((h - (4.0 * E * E).ln()).abs() < 1e-9);
        assert!(h_entropy(0.0, 3, 1).is_err());
    }

    #[test]
    fn entropy_floor_and_monotonicity() {
        for n in [1u64, 2, 5, 30, 1000] {
            for d in [1u64, 2, 5] {
                let floor = (2.0 * (2.0 * E).ln()).min(((n + 1) as f64).ln());
                let mut prev = f64::INFINITY;
                for k in 1..200 {
                    let eta = k as f64 / 200.0;
                    let h = h_entropy(eta, n, d).unwrap();
                    assert!(h >= floor - 1e-12 && h <= prev + 1e-15);
                    assert!(h <= gamma_bar(n, d) - LN_2 + 1e-12);
                    prev = h;
                }
            }
        }
    }

    #[test]
    fn h_integral_bounds_and_concavity() {
        for (n, d) in [(10u64, 1u64), (100, 2), (5000, 3)] {
            let slope = (2.0 * gamma_bar(n, d)).sqrt();
            let xs: Vec<f64> = (1..=50).map(|k| k as f64 / 50.0).collect();
            let hs: Vec<f64> = xs.iter().map(|&x| h_integral(x, n, d).unwrap()).collect();
            for (x, h) in xs.iter().zip(&hs) {
                assert!(*h <= slope * x + 1e-8);
                assert!(*h <= 2.0 * h_bar(*x, d).unwrap());
            }
            for w in hs.windows(3) {
                assert!(w[2] - 2.0 * w[1] + w[0] <= 1e-7);
                assert!(w[1] >= w[0]);
            }
        }
    }

    #[test]
    fn packing_examples() {
        let t = halfline_traces();
        assert_eq!(l1_packing(&t, 1.0).unwrap().len(), 1);
        assert_eq!(l1_packing(&t, 5.0).unwrap().len(), 1);
        assert_eq!(l1_packing(&t, 0.3).unwrap().len(), 4);
    }

    #[test]
    fn packing_is_separated_and_covering() {
        let xs: Vec<f64> = (0..25).map(|i| ((i * 37) % 25) as f64 / 25.0).collect();
        let t = trace_values(&SetClass::intervals(None), &xs, 30).unwrap();
        for eta in [0.01, 0.05, 0.1, 0.2, 0.5, 0.9] {
            let p = l1_packing(&t, eta).unwrap();
            let r = 25.0 * eta;
            for (a, &c) in p.centers.iter().enumerate() {
                for &c2 in &p.centers[a + 1..] {
                    assert!((c ^ c2).count_ones() as f64 > r);
                }
            }
            for (j, &m) in t.masks.iter().enumerate() {
                let proj = p.project(j);
                let dist = (proj ^ m).count_ones();
                assert!(dist as f64 <= r);
                assert!(p.centers.iter().all(|&c| (c ^ m).count_ones() >= dist));
            }
            assert!((p.len() as f64).ln() <= h_entropy(eta, 25, 2).unwrap());
        }
    }

    #[test]
    fn chain_on_halflines() {
        let t = halfline_traces();
        for bits in 0..8u32 {
            let e: Vec<f64> = (0..3).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect();
            let r = chaining_decomposition(&t, &e, 1.0).unwrap();
            assert!(r.telescoping_ok && r.increments_ok && r.exact_at_bottom);
            assert!(r.master_ok());
            assert_eq!(r.levels.last().unwrap().packing_size, 4);
        }
    }

    #[test]
    fn single_trace_levels_are_zero() {
        let t = TraceSet::from_masks(4, vec![0b0110]).unwrap();
        let r = chaining_decomposition(&t, &[1.0, -1.0, 1.0, 1.0], 0.5).unwrap();
        assert!(r.levels.iter().all(|l| l.level_sup == 0.0));
        assert_eq!(r.total, r.zbar);
    }

    #[test]
    fn end_to_end_bound_on_small_samples() {
        let xs = [0.05, 0.93, 0.4, 0.61, 0.27, 0.78, 0.12, 0.5];
        let t = trace_values(&SetClass::intervals(None), &xs, 30).unwrap();
        let lhs = conditional_rademacher_exhaustive(&t).unwrap();
        let rhs = master_bound(eta0(&t), 8, 2).unwrap();
        assert!(lhs <= rhs && rhs <= 2.5 / b_q() * rhs);
    }
}
