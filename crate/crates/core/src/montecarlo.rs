//! Monte Carlo estimates of `E Z` and `E Z̄`, the symmetrization check and
//! the bound-versus-simulation sweep.
//!
//! Replicate `r` of a run seeded with `s` draws from stream `r` of a ChaCha8
//! generator keyed by `s`: first the sample, then the signs. Results are
//! collected in replicate order, so they do not depend on the thread count.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    betal_bound, cor1_bound, cor2_bound, cor3_bound, prop4_bound, thm1_bound, thm2_bound,
    Cor2Argument,
};
use crate::error::{Error, Result};
use crate::families::Family;
use crate::numeric::{compensated_sum, mean_stderr};
use crate::sample::{Distribution, Sample, SampleLaw};
use crate::shatter::replicate_rng;

/// Standard errors of slack allowed on every Monte Carlo comparison.
pub const MC_SLACK: f64 = 3.0;

/// Largest sample for which the sign expectation is enumerated.
pub const MAX_EXHAUSTIVE_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub family: Family,
    pub law: SampleLaw,
    pub parallel: bool,
    /// Keep the per-replicate values in the estimates.
    pub keep_per_rep: bool,
}

impl McConfig {
    pub fn new(family: Family, law: SampleLaw, n: usize, reps: usize, seed: u64) -> Self {
        Self {
            n,
            reps,
            seed,
            family,
            law,
            parallel: true,
            keep_per_rep: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::EmptySample);
        }
        if self.reps < 2 {
            return Err(Error::InvalidArgument(format!("reps = {}, need at least 2", self.reps)));
        }
        self.law.validate(self.n)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_rep: Option<Vec<f64>>,
}

impl McEstimate {
    pub fn from_values(xs: Vec<f64>, keep: bool) -> Self {
        let (mean, stderr) = mean_stderr(&xs);
        Self {
            mean,
            stderr,
            reps: xs.len(),
            per_rep: keep.then_some(xs),
        }
    }

    /// `mean + MC_SLACK · stderr`.
    pub fn upper(&self) -> f64 {
        self.mean + MC_SLACK * self.stderr
    }
}

/// `E Z` with its two one-sided parts, from the same replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZEstimates {
    pub two_sided: McEstimate,
    pub upper: McEstimate,
    pub lower: McEstimate,
}

impl ZEstimates {
    /// The larger one-sided mean.
    pub fn one_sided_max(&self) -> &McEstimate {
        if self.upper.mean >= self.lower.mean {
            &self.upper
        } else {
            &self.lower
        }
    }
}

fn draw_signs<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect()
}

/// Runs `f(sample, signs)` on every replicate in replicate order.
fn run_reps<T, F>(cfg: &McConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(&Sample, &[f64]) -> Result<T> + Sync,
{
    cfg.validate()?;
    let one = |r: usize| {
        let mut rng = replicate_rng(cfg.seed, r as u64);
        let sample = Sample::draw(&cfg.law, cfg.n, &mut rng)?;
        let signs = draw_signs(&mut rng, cfg.n);
        f(&sample, &signs)
    };
    if cfg.parallel {
        (0..cfg.reps).into_par_iter().map(one).collect()
    } else {
        (0..cfg.reps).map(one).collect()
    }
}

pub fn estimate_z_parts(cfg: &McConfig) -> Result<ZEstimates> {
    let rows = run_reps(cfg, |s, _| cfg.family.sup_empirical_parts(s))?;
    let keep = cfg.keep_per_rep;
    Ok(ZEstimates {
        two_sided: McEstimate::from_values(rows.iter().map(|p| p.two_sided()).collect(), keep),
        upper: McEstimate::from_values(rows.iter().map(|p| p.upper).collect(), keep),
        lower: McEstimate::from_values(rows.iter().map(|p| p.lower).collect(), keep),
    })
}

/// `E Z`, `Z = sup_f |Σ (f(X_i) - E f(X_i))|`.
pub fn estimate_z(cfg: &McConfig) -> Result<McEstimate> {
    let rows = run_reps(cfg, |s, _| cfg.family.sup_empirical(s))?;
    Ok(McEstimate::from_values(rows, cfg.keep_per_rep))
}

/// `E Z̄`, `Z̄ = sup_f |Σ ε_i f(X_i)|`.
pub fn estimate_zbar(cfg: &McConfig) -> Result<McEstimate> {
    let rows = run_reps(cfg, |s, e| cfg.family.sup_rademacher(s, e))?;
    Ok(McEstimate::from_values(rows, cfg.keep_per_rep))
}

/// `E_ε Z̄` on a fixed sample, over all `2^n` sign vectors.
pub fn exhaustive_zbar(family: &Family, sample: &Sample) -> Result<f64> {
    let n = sample.len();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TraceCap {
            n,
            cap: MAX_EXHAUSTIVE_N,
        });
    }
    let mut signs = vec![1.0; n];
    let mut vals = Vec::with_capacity(1 << n);
    for bits in 0u32..1 << n {
        for (i, e) in signs.iter_mut().enumerate() {
            *e = if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        }
        vals.push(family.sup_rademacher(sample, &signs)?);
    }
    Ok(compensated_sum(vals) / (1u64 << n) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignMode {
    /// One sign vector per replicate.
    Sampled,
    /// Exact expectation over all sign vectors per replicate.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetrizationReport {
    pub lhs: McEstimate,
    pub rhs: McEstimate,
    pub pass: bool,
    /// `E sup |Σ ε_i (f(X_i) - a_i)|` with `a_i = E f(X_i)` for a fixed member.
    pub shifted_rhs: McEstimate,
    pub shifted_pass: bool,
}

/// `lhs ≤ 2·rhs + 3·√(se_lhs² + 4·se_rhs²)`.
pub fn symmetrization_holds(lhs: &McEstimate, rhs: &McEstimate) -> bool {
    lhs.mean <= 2.0 * rhs.mean + MC_SLACK * combined_stderr(lhs, rhs)
}

fn combined_stderr(lhs: &McEstimate, rhs: &McEstimate) -> f64 {
    (lhs.stderr * lhs.stderr + 4.0 * rhs.stderr * rhs.stderr).sqrt()
}

/// `E Z`, `E Z̄` and `E sup |Σ ε_i (f(X_i) - a_i)|`, all from the same
/// replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointEstimates {
    pub z: ZEstimates,
    pub zbar: McEstimate,
    /// Absent when the family has no reference member with a known mean.
    pub zbar_shifted: Option<McEstimate>,
}

/// Shifts `a_i = E f(X_i)` for the family's reference member.
fn reference_shifts(cfg: &McConfig) -> Result<Vec<f64>> {
    let reference = cfg.family.reference_member(cfg.law.law(0))?;
    (0..cfg.n).map(|i| reference.mean(cfg.law.law(i))).collect()
}

fn exhaustive_pair(family: &Family, s: &Sample, shifts: Option<&[f64]>) -> Result<(f64, f64)> {
    let n = s.len();
    if n > MAX_EXHAUSTIVE_N {
        return Err(Error::TraceCap {
            n,
            cap: MAX_EXHAUSTIVE_N,
        });
    }
    let mut plain = Vec::with_capacity(1 << n);
    let mut shifted = Vec::with_capacity(1 << n);
    let mut signs = vec![1.0; n];
    for bits in 0u32..1 << n {
        for (i, x) in signs.iter_mut().enumerate() {
            *x = if bits >> i & 1 == 1 { -1.0 } else { 1.0 };
        }
        plain.push(family.sup_rademacher(s, &signs)?);
        if let Some(a) = shifts {
            shifted.push(family.sup_rademacher_shifted(s, &signs, a)?);
        }
    }
    let total = (1u64 << n) as f64;
    Ok((compensated_sum(plain) / total, compensated_sum(shifted) / total))
}

pub fn estimate_joint(cfg: &McConfig, mode: SignMode) -> Result<JointEstimates> {
    cfg.validate()?;
    let shifts = reference_shifts(cfg).ok();
    let family = &cfg.family;
    let rows = run_reps(cfg, |s, e| {
        let parts = family.sup_empirical_parts(s)?;
        let (plain, shifted) = match mode {
            SignMode::Sampled => (
                family.sup_rademacher(s, e)?,
                match &shifts {
                    Some(a) => family.sup_rademacher_shifted(s, e, a)?,
                    None => 0.0,
                },
            ),
            SignMode::Exhaustive => exhaustive_pair(family, s, shifts.as_deref())?,
        };
        Ok((parts, plain, shifted))
    })?;
    let keep = cfg.keep_per_rep;
    let col = |f: &dyn Fn(&(crate::families::OneSided, f64, f64)) -> f64| {
        McEstimate::from_values(rows.iter().map(f).collect(), keep)
    };
    Ok(JointEstimates {
        z: ZEstimates {
            two_sided: col(&|r| r.0.two_sided()),
            upper: col(&|r| r.0.upper),
            lower: col(&|r| r.0.lower),
        },
        zbar: col(&|r| r.1),
        zbar_shifted: shifts.is_some().then(|| col(&|r| r.2)),
    })
}

/// `E Z ≤ 2 E Z̄`, and its form with shifts, on common replicates.
pub fn symmetrization_check(cfg: &McConfig, mode: SignMode) -> Result<SymmetrizationReport> {
    cfg.validate()?;
    reference_shifts(cfg)?;
    let j = estimate_joint(cfg, mode)?;
    let shifted_rhs = j.zbar_shifted.expect("reference shifts are available");
    Ok(SymmetrizationReport {
        pass: symmetrization_holds(&j.z.two_sided, &j.zbar),
        shifted_pass: symmetrization_holds(&j.z.two_sided, &shifted_rhs),
        lhs: j.z.two_sided,
        rhs: j.zbar,
        shifted_rhs,
    })
}

/// Bounds that can be checked against a simulated `E Z`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepBound {
    Thm1,
    Thm2,
    Cor1,
    Cor2,
    Cor3,
    Prop4,
    Betal,
}

impl SweepBound {
    pub const ALL: [SweepBound; 7] = [
        SweepBound::Thm1,
        SweepBound::Thm2,
        SweepBound::Cor1,
        SweepBound::Cor2,
        SweepBound::Cor3,
        SweepBound::Prop4,
        SweepBound::Betal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepBound::Thm1 => "thm1",
            SweepBound::Thm2 => "thm2",
            SweepBound::Cor1 => "cor1",
            SweepBound::Cor2 => "cor2",
            SweepBound::Cor3 => "cor3",
            SweepBound::Prop4 => "prop4",
            SweepBound::Betal => "betal",
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|b| b.name() == name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown bound `{name}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Interval families take their length cap from each `sigma` on the grid.
    pub family: Family,
    pub dist: Distribution,
    pub ns: Vec<usize>,
    pub sigmas: Vec<f64>,
    /// Dimension fed to the bounds.
    pub d: u64,
    pub reps: usize,
    pub seed: u64,
    pub parallel: bool,
    pub bounds: Vec<SweepBound>,
}

/// One comparison of a bound (or of the symmetrization inequality) with a
/// simulated expectation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub sigma: f64,
    pub check: String,
    pub bound: Option<f64>,
    pub estimate: f64,
    pub stderr: f64,
    /// `bound - (estimate + 3·stderr)`.
    pub margin: Option<f64>,
    pub valid: bool,
    pub pass: bool,
    pub note: String,
}

fn grid_seed(seed: u64, point: usize) -> u64 {
    seed.wrapping_add((point as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Simulates `E Z` and `E Z̄` at every grid point and compares them with the
/// selected bounds. Invalid bounds are reported with their reason and do not
/// count as failures.
pub fn dominance_sweep(grid: &SweepGrid) -> Result<Vec<SweepRow>> {
    grid.dist.validate()?;
    let mut rows = Vec::new();
    let mut point = 0;
    for &n in &grid.ns {
        for &sigma_in in &grid.sigmas {
            let family = match grid.family {
                Family::Intervals { .. } => grid.family.with_sigma(sigma_in)?,
                Family::CenteredHalved(ref base) if matches!(**base, Family::Intervals { .. }) => {
                    grid.family.with_sigma(sigma_in)?
                }
                _ => grid.family.clone(),
            };
            let mut cfg = McConfig::new(
                family.clone(),
                SampleLaw::Iid(grid.dist.clone()),
                n,
                grid.reps,
                grid_seed(grid.seed, point),
            );
            cfg.parallel = grid.parallel;
            point += 1;
            sweep_point(&cfg, grid, &mut rows)?;
        }
    }
    Ok(rows)
}

fn sweep_point(cfg: &McConfig, grid: &SweepGrid, rows: &mut Vec<SweepRow>) -> Result<()> {
    let family = &cfg.family;
    let n = cfg.n;
    let sigma = family.sigma_of(&grid.dist)?;
    let sigma_sd = family.sigma_sd_of(&grid.dist)?;
    let b = family.half_width();
    let d = grid.d;
    let nu = n as u64;

    let joint = estimate_joint(cfg, SignMode::Sampled)?;
    let z = &joint.z;

    let unit = |r: Result<f64>| {
        if b == 1.0 {
            r
        } else {
            Err(Error::InvalidArgument("requires a [0,1]-valued family (b = 1)".into()))
        }
    };
    for &which in &grid.bounds {
        let (value, est, note) = match which {
            SweepBound::Thm1 => (unit(thm1_bound(sigma, nu, d)), &z.two_sided, String::new()),
            SweepBound::Thm2 => (unit(thm2_bound(sigma, nu, d)), &z.two_sided, String::new()),
            SweepBound::Cor1 => (cor1_bound(sigma, nu, d, b), &z.two_sided, String::new()),
            SweepBound::Cor2 => (
                cor2_bound(sigma_sd, nu, d, b, Cor2Argument::HalfSigmaOverB),
                &z.two_sided,
                format!("sigma_sd = {sigma_sd}"),
            ),
            SweepBound::Cor3 => (unit(cor3_bound(sigma, nu, d)), &z.two_sided, String::new()),
            SweepBound::Prop4 => (unit(prop4_bound(sigma, nu, d)), &z.two_sided, String::new()),
            SweepBound::Betal => (
                unit(betal_bound(sigma, nu, d).and_then(|c| {
                    if c.valid {
                        Ok(c.value)
                    } else {
                        Err(Error::InvalidArgument("side condition on sigma fails".into()))
                    }
                })),
                z.one_sided_max(),
                "against the larger one-sided mean".to_string(),
            ),
        };
        rows.push(match value {
            Ok(v) => {
                let margin = v - est.upper();
                SweepRow {
                    n,
                    sigma,
                    check: which.name().into(),
                    bound: Some(v),
                    estimate: est.mean,
                    stderr: est.stderr,
                    margin: Some(margin),
                    valid: true,
                    pass: margin >= 0.0,
                    note,
                }
            }
            Err(e) => SweepRow {
                n,
                sigma,
                check: which.name().into(),
                bound: None,
                estimate: est.mean,
                stderr: est.stderr,
                margin: None,
                valid: false,
                pass: true,
                note: e.to_string(),
            },
        });
    }

    let lhs = &z.two_sided;
    let rhs = [("symmetrization", Some(&joint.zbar)), ("symmetrization-shifted", joint.zbar_shifted.as_ref())];
    for (check, rhs) in rhs {
        let Some(rhs) = rhs else {
            rows.push(SweepRow {
                n,
                sigma,
                check: check.into(),
                bound: None,
                estimate: lhs.mean,
                stderr: lhs.stderr,
                margin: None,
                valid: false,
                pass: true,
                note: "no reference member with a known mean".into(),
            });
            continue;
        };
        let se = combined_stderr(lhs, rhs);
        let margin = 2.0 * rhs.mean - (lhs.mean + MC_SLACK * se);
        rows.push(SweepRow {
            n,
            sigma,
            check: check.into(),
            bound: Some(2.0 * rhs.mean),
            estimate: lhs.mean,
            stderr: se,
            margin: Some(margin),
            valid: true,
            pass: margin >= 0.0,
            note: "bound is twice the Rademacher mean; stderr combines both sides".into(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(family: Family, n: usize, reps: usize, seed: u64) -> McConfig {
        McConfig::new(family, SampleLaw::Iid(Distribution::Uniform), n, reps, seed)
    }

    #[test]
    fn constant_family_has_zero_z() {
        let c = cfg(Family::Constant(0.3), 7, 50, 1);
        let z = estimate_z(&c).unwrap();
        assert_eq!((z.mean, z.stderr), (0.0, 0.0));
        let s = symmetrization_check(&c, SignMode::Sampled).unwrap();
        assert!(s.pass && s.shifted_pass);
    }

    #[test]
    fn single_point_intervals() {
        let z = estimate_z(&cfg(Family::Intervals { max_length: None }, 1, 100, 5)).unwrap();
        assert_eq!((z.mean, z.stderr), (1.0, 0.0));
    }

    #[test]
    fn exhaustive_examples() {
        let s = Sample::uniform(vec![0.3, 0.6]).unwrap();
        assert_eq!(exhaustive_zbar(&Family::Constant(1.0), &s).unwrap(), 1.0);
        assert_eq!(exhaustive_zbar(&Family::HalfLines, &s).unwrap(), 1.5);
    }

    #[test]
    fn deterministic_across_schedules() {
        let mut a = cfg(Family::Intervals { max_length: Some(0.2) }, 40, 300, 99);
        a.keep_per_rep = true;
        let mut b = a.clone();
        b.parallel = false;
        assert_eq!(estimate_zbar(&a).unwrap(), estimate_zbar(&b).unwrap());
        assert_eq!(estimate_z_parts(&a).unwrap(), estimate_z_parts(&b).unwrap());
    }

    #[test]
    fn removing_the_cap_never_decreases_replicates() {
        let mut capped = cfg(Family::Intervals { max_length: Some(0.1) }, 30, 200, 3);
        capped.keep_per_rep = true;
        let mut free = capped.clone();
        free.family = Family::Intervals { max_length: None };
        let a = estimate_zbar(&capped).unwrap().per_rep.unwrap();
        let b = estimate_zbar(&free).unwrap().per_rep.unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x <= y));
    }

    #[test]
    fn mc_matches_exhaustive_signs() {
        let c = cfg(Family::HalfLines, 8, 10_000, 11);
        let est = estimate_zbar(&c).unwrap();
        let s = Sample::uniform((1..=8).map(|i| i as f64 / 9.0).collect()).unwrap();
        let exact = exhaustive_zbar(&Family::HalfLines, &s).unwrap();
        assert!((est.mean - exact).abs() <= 3.0 * est.stderr, "{} vs {exact}", est.mean);
    }

    #[test]
    fn doubling_reps_is_consistent() {
        for k in 0..10 {
            let a = estimate_z(&cfg(Family::HalfLines, 30, 400, 1000 + k)).unwrap();
            let b = estimate_z(&cfg(Family::HalfLines, 30, 800, 2000 + k)).unwrap();
            let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
            assert!((a.mean - b.mean).abs() <= 4.0 * se);
        }
    }

    #[test]
    fn symmetrization_exhaustive_and_sampled() {
        let s = symmetrization_check(&cfg(Family::HalfLines, 8, 300, 2), SignMode::Exhaustive).unwrap();
        assert!(s.pass && s.shifted_pass);
        let s = symmetrization_check(&cfg(Family::Intervals { max_length: Some(0.25) }, 50, 500, 2), SignMode::Sampled)
            .unwrap();
        assert!(s.pass && s.shifted_pass);
    }

    #[test]
    fn non_iid_laws_are_supported() {
        let law = SampleLaw::Independent(
            (0..6)
                .map(|i| Distribution::Discrete {
                    atoms: vec![0.0, 0.5, 1.0],
                    probs: vec![0.2, 0.3 + 0.05 * i as f64, 0.5 - 0.05 * i as f64],
                })
                .collect(),
        );
        let c = McConfig::new(Family::HalfLines, law, 6, 400, 8);
        let s = symmetrization_check(&c, SignMode::Exhaustive).unwrap();
        assert!(s.pass);
        let c2 = McConfig {
            family: Family::CenteredHalved(Box::new(Family::HalfLines)),
            ..c
        };
        assert!(matches!(estimate_z(&c2), Err(Error::RequiresIid(_))));
    }

    #[test]
    fn small_sweep_passes() {
        let grid = SweepGrid {
            family: Family::Intervals { max_length: None },
            dist: Distribution::Uniform,
            ns: vec![50],
            sigmas: vec![0.1, 0.8],
            d: 2,
            reps: 200,
            seed: 4,
            parallel: true,
            bounds: SweepBound::ALL.to_vec(),
        };
        let rows = dominance_sweep(&grid).unwrap();
        assert_eq!(rows.len(), 2 * (SweepBound::ALL.len() + 2));
        assert!(rows.iter().all(|r| r.pass), "{rows:#?}");
        assert!(rows.iter().any(|r| r.check == "betal" && !r.valid));
        let single = SweepGrid {
            family: Family::Constant(1.0),
            ns: vec![20],
            sigmas: vec![1.0],
            d: 1,
            ..grid
        };
        for r in dominance_sweep(&single).unwrap() {
            assert!(r.pass && r.estimate == 0.0 || r.check.starts_with("symm"));
        }
    }

    #[test]
    fn bound_names_round_trip() {
        for b in SweepBound::ALL {
            assert_eq!(SweepBound::from_name(b.name()).unwrap(), b);
        }
        assert!(SweepBound::from_name("gk").is_err());
    }
}
