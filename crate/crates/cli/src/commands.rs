use std::path::Path;

use anyhow::{bail, Context};
use rand::Rng;
use serde::{Deserialize, Serialize};
use vcbound::bounds::{
    b_branch, evaluate_all, thm1_general_bound, BBranch, BoundEntry, BoundInputs, EvaluateOptions,
    McSummary, ENTRY_NAMES,
};
use vcbound::chaining::{
    b_q, chaining_decomposition, conditional_rademacher_exhaustive, eta0, master_bound,
    with_entropy, MAX_EXHAUSTIVE_N,
};
use vcbound::families::Family;
use vcbound::montecarlo::{dominance_sweep, estimate_z, McConfig, SweepBound, SweepGrid, SweepRow};
use vcbound::sample::{Sample, SampleLaw};
use vcbound::sets::trace;
use vcbound::shatter::{
    gamma_curve, member_grid, member_level_traces, replicate_rng, sauer_check, u_grid,
    vc_dim_on_sample, weak_vc_dim_estimate, weak_vc_dim_members,
};

use crate::config::Config;
use crate::report::{emit, emit_summary, num, opt, render, Row};

/// What a command asks the process to exit with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    Violation,
}

/// Seed for the `k`-th independent stream family under a master seed.
fn sub_seed(seed: u64, k: u64) -> u64 {
    seed.wrapping_add(k.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn parse_family(name: &str, sigma: Option<f64>) -> anyhow::Result<Family> {
    Family::from_name(name, sigma).with_context(|| format!("family `{name}`"))
}

fn branch_label(b: BBranch) -> &'static str {
    match b {
        BBranch::AtOrAboveThreshold => "at-or-above",
        BBranch::BelowThreshold => "below",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub n: u64,
    pub d: u64,
    pub sigma: f64,
    pub b: f64,
    pub b_branch: String,
    pub entries: Vec<BoundEntry>,
    pub tightest: Option<String>,
    pub tightest_value: Option<f64>,
}

impl Row for BoundsRow {
    fn header() -> Vec<String> {
        let mut h: Vec<String> = ["n", "d", "sigma", "b", "b_branch"].map(String::from).to_vec();
        for name in ENTRY_NAMES {
            h.push(name.to_string());
            h.push(format!("{name}_valid"));
        }
        h.push("tightest".into());
        h.push("tightest_value".into());
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.n.to_string(),
            self.d.to_string(),
            num(self.sigma),
            num(self.b),
            self.b_branch.clone(),
        ];
        for name in ENTRY_NAMES {
            let e = self.entries.iter().find(|e| e.name == *name);
            r.push(opt(e.and_then(|e| e.value)));
            r.push(e.is_some_and(|e| e.valid).to_string());
        }
        r.push(self.tightest.clone().unwrap_or_default());
        r.push(opt(self.tightest_value));
        r
    }
}

pub fn bounds_rows(cfg: &Config) -> anyhow::Result<Vec<BoundsRow>> {
    let c = &cfg.bounds;
    let options = EvaluateOptions {
        cor2_argument: c.cor2_argument,
    };
    let mut rows = Vec::new();
    for (ni, &n) in c.n.iter().enumerate() {
        let curve = match &c.curve {
            Some(cc) => {
                let fam = parse_family(&cc.family, None)?;
                let curve = gamma_curve(&fam, &cc.dist, n as usize, &cc.grid, cc.reps, sub_seed(cfg.seed, ni as u64))?;
                Some(curve)
            }
            None => None,
        };
        for &d in &c.d {
            for &sigma in &c.sigma {
                let inputs = BoundInputs::new(n, d, sigma).with_half_width(c.b);
                let report = evaluate_all(&inputs, curve.as_ref(), options)?;
                // Quadrature failures are fatal here, not an invalid entry.
                if let Some(curve) = &curve {
                    if let Err(e @ vcbound::Error::Integration { .. }) = thm1_general_bound(curve, sigma, n) {
                        return Err(e.into());
                    }
                }
                rows.push(BoundsRow {
                    n,
                    d,
                    sigma,
                    b: c.b,
                    b_branch: branch_label(b_branch(sigma / c.b, n, d)).into(),
                    tightest_value: report.tightest_value(),
                    tightest: report.tightest,
                    entries: report.entries,
                });
            }
        }
    }
    Ok(rows)
}

pub fn cmd_bounds(cfg: &Config, out: Option<&Path>) -> anyhow::Result<Status> {
    emit(&render(&bounds_rows(cfg)?, cfg.format)?, out)?;
    Ok(Status::Ok)
}

impl Row for SweepRow {
    fn header() -> Vec<String> {
        ["n", "sigma", "check", "bound", "estimate", "stderr", "margin", "valid", "pass", "note"]
            .map(String::from)
            .to_vec()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            num(self.sigma),
            self.check.clone(),
            opt(self.bound),
            num(self.estimate),
            num(self.stderr),
            opt(self.margin),
            self.valid.to_string(),
            self.pass.to_string(),
            self.note.clone(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub n: usize,
    pub sigma: f64,
    pub check: String,
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateSummary {
    pub family: String,
    pub seed: u64,
    pub rows: usize,
    pub valid_checks: usize,
    pub failures: Vec<Failure>,
    pub pass: bool,
}

pub fn simulate_rows(cfg: &Config) -> anyhow::Result<(Vec<SweepRow>, SimulateSummary)> {
    let s = &cfg.simulate;
    let family = parse_family(&s.family, s.sigma.first().copied())?;
    let bounds = s
        .bounds
        .iter()
        .map(|b| SweepBound::from_name(b))
        .collect::<vcbound::Result<Vec<_>>>()?;
    let grid = SweepGrid {
        d: s.d.unwrap_or_else(|| family.bound_dim()),
        family,
        dist: s.dist.clone(),
        ns: s.n.clone(),
        sigmas: s.sigma.clone(),
        reps: s.reps,
        seed: cfg.seed,
        parallel: true,
        bounds,
    };
    let rows = dominance_sweep(&grid)?;
    let failures: Vec<Failure> = rows
        .iter()
        .filter(|r| !r.pass)
        .map(|r| Failure {
            n: r.n,
            sigma: r.sigma,
            check: r.check.clone(),
            margin: r.margin,
        })
        .collect();
    let summary = SimulateSummary {
        family: s.family.clone(),
        seed: cfg.seed,
        rows: rows.len(),
        valid_checks: rows.iter().filter(|r| r.valid).count(),
        pass: failures.is_empty(),
        failures,
    };
    Ok((rows, summary))
}

pub fn cmd_simulate(cfg: &Config, out: Option<&Path>) -> anyhow::Result<Status> {
    let (rows, summary) = simulate_rows(cfg)?;
    emit(&render(&rows, cfg.format)?, out)?;
    emit_summary(&summary, out)?;
    Ok(if summary.pass { Status::Ok } else { Status::Violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShatterRow {
    pub family: String,
    pub n: usize,
    pub sample: usize,
    /// `level-class` when level sets are analytic, `probe-members` otherwise.
    pub method: String,
    /// Traces of the level class at `u = 1/2` (or of the middle grid level).
    pub traces: usize,
    pub vc_dim: usize,
    pub weak_dim: usize,
    pub exhaustive: bool,
    pub declared_weak: u64,
    pub sauer_ok: bool,
}

impl Row for ShatterRow {
    fn header() -> Vec<String> {
        [
            "family",
            "n",
            "sample",
            "method",
            "traces",
            "vc_dim",
            "weak_dim",
            "exhaustive",
            "declared_weak",
            "sauer_ok",
        ]
        .map(String::from)
        .to_vec()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.family.clone(),
            self.n.to_string(),
            self.sample.to_string(),
            self.method.clone(),
            self.traces.to_string(),
            self.vc_dim.to_string(),
            self.weak_dim.to_string(),
            self.exhaustive.to_string(),
            self.declared_weak.to_string(),
            self.sauer_ok.to_string(),
        ]
    }
}

pub fn shatter_rows(cfg: &Config) -> anyhow::Result<Vec<ShatterRow>> {
    let c = &cfg.shatter;
    let law = SampleLaw::Iid(c.dist.clone());
    let mut rows = Vec::new();
    let mut stream_family = 0u64;
    for name in &c.families {
        let family = parse_family(name, None)?;
        let declared = family.declared().weak;
        for &n in &c.n {
            let seed = sub_seed(cfg.seed, stream_family);
            stream_family += 1;
            for k in 0..c.samples {
                let mut rng = replicate_rng(seed, k as u64);
                let sample = Sample::draw(&law, n, &mut rng)?;
                let row = match family.level_class(0.5) {
                    Ok(class) => {
                        let t = trace(&class, &sample)?;
                        let grid = u_grid(&family.level_breaks());
                        let weak = weak_vc_dim_estimate(&family, &sample, &grid, c.budget)?;
                        let mut sauer_ok = true;
                        for &u in &grid {
                            sauer_ok &= sauer_check(&trace(&family.level_class(u)?, &sample)?, declared);
                        }
                        let vc = vc_dim_on_sample(&t, c.budget);
                        ShatterRow {
                            family: family.name(),
                            n,
                            sample: k,
                            method: "level-class".into(),
                            traces: t.len(),
                            vc_dim: vc.dim,
                            weak_dim: weak.dim,
                            exhaustive: vc.exhaustive && weak.exhaustive,
                            declared_weak: declared,
                            sauer_ok,
                        }
                    }
                    Err(_) => {
                        let members = family.probe_members(&mut rng, c.probes, &c.dist)?;
                        let xs = sample.values();
                        let grid = member_grid(&members, xs);
                        let weak = weak_vc_dim_members(&members, xs, &grid, true, c.budget)?;
                        let mut sauer_ok = true;
                        for &u in &grid {
                            sauer_ok &= sauer_check(&member_level_traces(&members, xs, u, true)?, declared);
                        }
                        let mid = member_level_traces(&members, xs, grid[grid.len() / 2], true)?;
                        let vc = vc_dim_on_sample(&mid, c.budget);
                        ShatterRow {
                            family: family.name(),
                            n,
                            sample: k,
                            method: "probe-members".into(),
                            traces: mid.len(),
                            vc_dim: vc.dim,
                            weak_dim: weak.dim,
                            exhaustive: vc.exhaustive && weak.exhaustive,
                            declared_weak: declared,
                            sauer_ok,
                        }
                    }
                };
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub fn cmd_shatter(cfg: &Config, out: Option<&Path>) -> anyhow::Result<Status> {
    emit(&render(&shatter_rows(cfg)?, cfg.format)?, out)?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainRow {
    pub k: usize,
    pub eta_k: f64,
    pub packing_size: usize,
    pub h_eta_k: f64,
    pub level_sup: f64,
    pub cumulative: f64,
}

impl Row for ChainRow {
    fn header() -> Vec<String> {
        ["k", "eta_k", "packing_size", "h_eta_k", "level_sup", "cumulative"]
            .map(String::from)
            .to_vec()
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.k.to_string(),
            num(self.eta_k),
            self.packing_size.to_string(),
            num(self.h_eta_k),
            num(self.level_sup),
            num(self.cumulative),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub family: String,
    pub n: usize,
    pub d: u64,
    pub eta0: f64,
    pub traces: usize,
    pub level0_sup: f64,
    pub total: f64,
    pub zbar: f64,
    pub master_ok: bool,
    pub telescoping_ok: bool,
    pub increments_ok: bool,
    pub exact_at_bottom: bool,
    /// `E_ε Z̄` given the sample, when `n` is small enough to enumerate.
    pub conditional_mean: Option<f64>,
    /// `√n · b_q · H(√η₀)`.
    pub chaining_bound: f64,
    pub b_q: f64,
    pub end_to_end_ok: Option<bool>,
}

pub fn chain_rows(cfg: &Config) -> anyhow::Result<(Vec<ChainRow>, ChainSummary)> {
    let c = &cfg.chain;
    let family = parse_family(&c.family, None)?;
    let d = c.d.unwrap_or_else(|| family.bound_dim());
    let class = family
        .level_class(0.5)
        .with_context(|| format!("chain needs analytic level sets; `{}` has none", family.name()))?;
    let mut rng = replicate_rng(cfg.seed, 0);
    let sample = Sample::draw(&SampleLaw::Iid(c.dist.clone()), c.n, &mut rng)?;
    let signs: Vec<f64> = match &c.signs {
        Some(s) => s.clone(),
        None => (0..c.n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect(),
    };
    let traces = trace(&class, &sample)?;
    let e0 = match c.eta0 {
        Some(e) => e,
        None => eta0(&traces),
    };
    if e0 <= 0.0 {
        bail!("eta0 = {e0}: every trace is empty, nothing to chain");
    }
    let report = with_entropy(chaining_decomposition(&traces, &signs, e0)?, d)?;
    let n = c.n as u64;
    let chaining_bound = master_bound(e0, n, d)?;
    let conditional_mean = if c.n <= MAX_EXHAUSTIVE_N {
        Some(conditional_rademacher_exhaustive(&traces)?)
    } else {
        None
    };
    let rows = report
        .levels
        .iter()
        .map(|l| ChainRow {
            k: l.k,
            eta_k: l.eta_k,
            packing_size: l.packing_size,
            h_eta_k: l.h_eta_k,
            level_sup: l.level_sup,
            cumulative: l.cumulative,
        })
        .collect();
    let summary = ChainSummary {
        family: family.name(),
        n: c.n,
        d,
        eta0: e0,
        traces: traces.len(),
        level0_sup: report.level0_sup,
        total: report.total,
        zbar: report.zbar,
        master_ok: report.master_ok(),
        telescoping_ok: report.telescoping_ok,
        increments_ok: report.increments_ok,
        exact_at_bottom: report.exact_at_bottom,
        end_to_end_ok: conditional_mean.map(|m| m <= chaining_bound),
        conditional_mean,
        chaining_bound,
        b_q: b_q(),
    };
    Ok((rows, summary))
}

pub fn cmd_chain(cfg: &Config, out: Option<&Path>) -> anyhow::Result<Status> {
    let (rows, summary) = chain_rows(cfg)?;
    emit(&render(&rows, cfg.format)?, out)?;
    emit_summary(&summary, out)?;
    Ok(Status::Ok)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub n: usize,
    /// `sup_f (E f²)^{1/2}` of the family at this grid point.
    pub sigma: f64,
    pub d: u64,
    pub b: f64,
    pub mc: McSummary,
    pub entries: Vec<BoundEntry>,
    pub tightest: Option<String>,
    pub tightest_value: Option<f64>,
}

/// Entries that bound `E[Z]` (or its larger one-sided part) without a curve.
const COMPARED: &[&str] = &["thm1", "thm2", "cor1", "cor2", "cor3", "prop4", "betal"];

impl Row for CompareRow {
    fn header() -> Vec<String> {
        let mut h: Vec<String> = ["n", "sigma", "d", "b", "mc_mean", "mc_stderr"]
            .map(String::from)
            .to_vec();
        h.extend(COMPARED.iter().map(|s| s.to_string()));
        h.extend(["tightest", "tightest_value", "tightest_ratio"].map(String::from));
        h
    }

    fn record(&self) -> Vec<String> {
        let mut r = vec![
            self.n.to_string(),
            num(self.sigma),
            self.d.to_string(),
            num(self.b),
            num(self.mc.mean),
            num(self.mc.stderr),
        ];
        for name in COMPARED {
            let e = self.entries.iter().find(|e| e.name == *name);
            r.push(opt(e.filter(|e| e.valid).and_then(|e| e.value)));
        }
        r.push(self.tightest.clone().unwrap_or_default());
        r.push(opt(self.tightest_value));
        r.push(opt(self.tightest_value.map(|v| v / self.mc.mean)));
        r
    }
}

pub fn compare_rows(cfg: &Config) -> anyhow::Result<Vec<CompareRow>> {
    let c = &cfg.compare;
    let base = parse_family(&c.family, c.sigma.first().copied())?;
    let law = SampleLaw::Iid(c.dist.clone());
    let mut rows = Vec::new();
    let mut point = 0u64;
    for &n in &c.n {
        for &s in &c.sigma {
            let family = match base {
                Family::Intervals { max_length: Some(_) } => base.with_sigma(s)?,
                _ => base.clone(),
            };
            let sigma = family.sigma_of(&c.dist)?;
            let d = c.d.unwrap_or_else(|| family.bound_dim());
            let b = family.half_width();
            let mc = estimate_z(&McConfig::new(family.clone(), law.clone(), n, c.reps, sub_seed(cfg.seed, point)))?;
            point += 1;
            let inputs = BoundInputs::new(n as u64, d, sigma).with_half_width(if b > 0.0 { b } else { 1.0 });
            let mut report = evaluate_all(
                &inputs,
                None,
                EvaluateOptions {
                    cor2_argument: c.cor2_argument,
                },
            )?;
            report.mc_estimate = Some(McSummary {
                mean: mc.mean,
                stderr: mc.stderr,
                reps: mc.reps,
            });
            rows.push(CompareRow {
                n,
                sigma,
                d,
                b: inputs.b,
                mc: report.mc_estimate.expect("just set"),
                tightest_value: report.tightest_value(),
                tightest: report.tightest,
                entries: report.entries,
            });
        }
    }
    Ok(rows)
}

pub fn cmd_compare(cfg: &Config, out: Option<&Path>) -> anyhow::Result<Status> {
    emit(&render(&compare_rows(cfg)?, cfg.format)?, out)?;
    Ok(Status::Ok)
}

/// Report bytes for a command, as written to `--out`.
pub fn render_command(cfg: &Config, command: &str) -> anyhow::Result<Vec<u8>> {
    Ok(match command {
        "bounds" => render(&bounds_rows(cfg)?, cfg.format)?,
        "simulate" => render(&simulate_rows(cfg)?.0, cfg.format)?,
        "shatter" => render(&shatter_rows(cfg)?, cfg.format)?,
        "chain" => render(&chain_rows(cfg)?.0, cfg.format)?,
        "compare" => render(&compare_rows(cfg)?, cfg.format)?,
        other => bail!("unknown command `{other}`"),
    })
}
