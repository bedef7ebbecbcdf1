//! Shattering, sample-based VC dimensions, Sauer's lemma and Monte Carlo
//! estimates of `Γ_u = E log(2 |𝓔_u(X)|)`.

use std::f64::consts::LN_2;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{gamma_bar, GammaCurve};
use crate::error::{Error, Result};
use crate::families::{Family, Member};
use crate::numeric::{mean_stderr, partial_binomial_sum_exact};
use crate::sample::{Distribution, Grouped, Sample, SampleLaw};
use crate::sets::{full_mask, trace_with_cap, TraceSet, MAX_TRACE_CAP};

/// Default number of candidate subsets examined per dimension estimate.
pub const DEFAULT_BUDGET: usize = 1 << 20;

/// A sample-based dimension: a certified lower bound, exact when `exhaustive`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimEstimate {
    pub dim: usize,
    pub exhaustive: bool,
    /// `is_shattered` calls made.
    pub examined: usize,
}

impl DimEstimate {
    fn merge(self, other: DimEstimate) -> DimEstimate {
        DimEstimate {
            dim: self.dim.max(other.dim),
            exhaustive: self.exhaustive && other.exhaustive,
            examined: self.examined + other.examined,
        }
    }
}

/// Whether the traces cut every subset of the index set `s`.
pub fn is_shattered(t: &TraceSet, s: u128) -> Result<bool> {
    if s & !full_mask(t.n) != 0 {
        return Err(Error::InvalidArgument(format!(
            "subset {s:#b} is not inside a sample of size {}",
            t.n
        )));
    }
    Ok(shatters(&t.masks, s))
}

fn shatters(masks: &[u128], s: u128) -> bool {
    let k = s.count_ones();
    if k >= 64 || (masks.len() as u128) < 1u128 << k {
        return false;
    }
    let mut cut: Vec<u128> = masks.iter().map(|m| m & s).collect();
    cut.sort_unstable();
    cut.dedup();
    cut.len() as u128 == 1u128 << k
}

/// Size of the largest shattered index subset.
///
/// Sizes are tried in increasing order; a size is searched exhaustively when
/// its `C(n, k)` candidates fit in what is left of `budget`, and by greedy
/// growth with restarts otherwise. No subset of size `k` can be shattered by
/// fewer than `2^k` traces, which ends the search early.
pub fn vc_dim_on_sample(t: &TraceSet, budget: usize) -> DimEstimate {
    let n = t.n;
    let mut est = DimEstimate {
        dim: 0,
        exhaustive: true,
        examined: 0,
    };
    let mut witness = 0u128;
    for k in 1..=n {
        if k >= 64 || (t.len() as u128) < 1u128 << k {
            return est;
        }
        let left = budget.saturating_sub(est.examined);
        let fits = partial_binomial_sum_exact(n as u64, k as u64)
            .zip(partial_binomial_sum_exact(n as u64, k as u64 - 1))
            .is_some_and(|(a, b)| a - b <= left as u128);
        if !fits {
            est.exhaustive = false;
            greedy_search(t, budget, witness, &mut est);
            return est;
        }
        let mut found = None;
        for_each_subset(n, k, |s| {
            est.examined += 1;
            if shatters(&t.masks, s) {
                found = Some(s);
                false
            } else {
                true
            }
        });
        match found {
            Some(s) => {
                est.dim = k;
                witness = s;
            }
            None => return est,
        }
    }
    est
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order until it
/// returns `false`.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(u128) -> bool) {
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mask = idx.iter().fold(0u128, |m, i| m | 1 << i);
        if !f(mask) {
            return;
        }
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return;
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

const RESTARTS: usize = 64;

fn greedy_search(t: &TraceSet, budget: usize, seed_set: u128, est: &mut DimEstimate) {
    let n = t.n;
    let mut rng = ChaCha8Rng::seed_from_u64(t.len() as u64 ^ (n as u64) << 32);
    let mut order: Vec<usize> = (0..n).collect();
    let mut start = seed_set;
    for _ in 0..RESTARTS {
        if est.examined >= budget {
            break;
        }
        let mut s = start;
        order.shuffle(&mut rng);
        for &i in &order {
            if s >> i & 1 == 1 {
                continue;
            }
            if est.examined >= budget {
                break;
            }
            est.examined += 1;
            if shatters(&t.masks, s | 1 << i) {
                s |= 1 << i;
            }
        }
        est.dim = est.dim.max(s.count_ones() as usize);
        start = 1u128 << order[0];
    }
}

/// Level grid for a set of achieved values: one point below the minimum,
/// every value, every midpoint and one point above the maximum.
pub fn u_grid(values: &[f64]) -> Vec<f64> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    let (Some(&lo), Some(&hi)) = (v.first(), v.last()) else {
        return vec![0.0];
    };
    let mut grid = Vec::with_capacity(2 * v.len() + 1);
    grid.push(lo - 1.0);
    for w in v.windows(2) {
        grid.push(w[0]);
        grid.push(0.5 * (w[0] + w[1]));
    }
    grid.push(hi);
    grid.push(hi + 1.0);
    grid
}

/// Level grid built from the values members take on the sample.
pub fn member_grid(members: &[Member], xs: &[f64]) -> Vec<f64> {
    let vals: Vec<f64> = members
        .iter()
        .flat_map(|f| xs.iter().map(move |x| f.eval(*x)))
        .collect();
    u_grid(&vals)
}

/// `max_u` of the sample dimension of the level class `𝓒_u` over the grid.
pub fn weak_vc_dim_estimate(
    family: &Family,
    sample: &Sample,
    grid: &[f64],
    budget: usize,
) -> Result<DimEstimate> {
    let mut est = DimEstimate {
        dim: 0,
        exhaustive: true,
        examined: 0,
    };
    for &u in grid {
        let t = trace_with_cap(&family.level_class(u)?, sample, MAX_TRACE_CAP)?;
        est = est.merge(vc_dim_on_sample(&t, budget));
    }
    Ok(est)
}

/// Traces `{i : f(x_i) > u}` (or `≥ u` when not `strict`) over the members.
pub fn member_level_traces(members: &[Member], xs: &[f64], u: f64, strict: bool) -> Result<TraceSet> {
    let masks = members
        .iter()
        .map(|f| {
            xs.iter().enumerate().fold(0u128, |m, (i, x)| {
                let v = f.eval(*x);
                if v > u || (!strict && v == u) {
                    m | 1 << i
                } else {
                    m
                }
            })
        })
        .collect();
    member_traces(xs.len(), masks)
}

fn member_traces(n: usize, masks: Vec<u128>) -> Result<TraceSet> {
    if n > MAX_TRACE_CAP {
        return Err(Error::TraceCap {
            n,
            cap: MAX_TRACE_CAP,
        });
    }
    if masks.is_empty() {
        return Err(Error::EmptySet);
    }
    TraceSet::from_masks(n, masks)
}

/// Weak VC-major dimension of a finite set of members, per level.
pub fn weak_vc_dim_members(
    members: &[Member],
    xs: &[f64],
    grid: &[f64],
    strict: bool,
    budget: usize,
) -> Result<DimEstimate> {
    let mut est = DimEstimate {
        dim: 0,
        exhaustive: true,
        examined: 0,
    };
    for &u in grid {
        let t = member_level_traces(members, xs, u, strict)?;
        est = est.merge(vc_dim_on_sample(&t, budget));
    }
    Ok(est)
}

/// VC-major dimension of a finite set of members: all levels pooled.
pub fn vc_major_dim_members(members: &[Member], xs: &[f64], grid: &[f64], budget: usize) -> Result<DimEstimate> {
    let mut masks = Vec::new();
    for &u in grid {
        masks.extend(member_level_traces(members, xs, u, true)?.masks);
    }
    Ok(vc_dim_on_sample(&member_traces(xs.len(), masks)?, budget))
}

/// `|t| ≤ Σ_{j ≤ d∧n} C(n, j)`.
pub fn sauer_check(t: &TraceSet, d: u64) -> bool {
    match partial_binomial_sum_exact(t.n as u64, d) {
        Some(limit) => t.len() as u128 <= limit,
        None => true,
    }
}

/// Per-replicate generator: stream `rep` of the master seed.
pub fn replicate_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep);
    rng
}

fn log_trace_counts(family: &Family, grid: &[f64], g: &Grouped) -> Result<Vec<f64>> {
    grid.iter()
        .map(|&u| Ok((2.0 * family.level_class(u)?.count_traces(g) as f64).ln()))
        .collect()
}

fn gamma_reps(
    family: &Family,
    dist: &Distribution,
    n: usize,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if reps < 2 {
        return Err(Error::InvalidArgument(format!("reps = {reps}, need at least 2")));
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    dist.validate()?;
    let law = SampleLaw::Iid(dist.clone());
    (0..reps)
        .into_par_iter()
        .map(|r| {
            let mut rng = replicate_rng(seed, r as u64);
            let s = Sample::draw(&law, n, &mut rng)?;
            log_trace_counts(family, grid, &s.grouped())
        })
        .collect()
}

/// Monte Carlo mean and standard error of `log(2 |𝓔_u(X)|)` over i.i.d.
/// samples of size `n`. Trace counts are exact and need no cap.
pub fn gamma_u_estimate(
    family: &Family,
    u: f64,
    dist: &Distribution,
    n: usize,
    reps: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let rows = gamma_reps(family, dist, n, &[u], reps, seed)?;
    let xs: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    Ok(mean_stderr(&xs))
}

/// `u ↦ Γ_u` on a grid in `(0, 1)`, from common samples across the grid.
/// Fails if an estimate exceeds `Γ̄_n(d)` for the declared weak dimension.
pub fn gamma_curve(
    family: &Family,
    dist: &Distribution,
    n: usize,
    grid: &[f64],
    reps: usize,
    seed: u64,
) -> Result<GammaCurve> {
    let mut knots = grid.to_vec();
    knots.sort_by(f64::total_cmp);
    let rows = gamma_reps(family, dist, n, &knots, reps, seed)?;
    let cap = gamma_bar(n as u64, family.declared().weak);
    let mut values = Vec::with_capacity(knots.len());
    let mut stderr = Vec::with_capacity(knots.len());
    for (j, u) in knots.iter().enumerate() {
        let xs: Vec<f64> = rows.iter().map(|r| r[j]).collect();
        let (m, se) = mean_stderr(&xs);
        if let Some(x) = xs.iter().find(|x| **x > cap * (1.0 + 1e-12)) {
            return Err(Error::InvalidArgument(format!(
                "log(2|trace|) = {x} at u = {u} exceeds the Sauer ceiling {cap} for {}",
                family.name()
            )));
        }
        values.push(m.max(LN_2));
        stderr.push(se);
    }
    GammaCurve::new(knots, values, stderr)
}
