//! Closed-form upper bounds on `E[Z(F)]`, the expected supremum of the
//! centered empirical process over a (weak) VC-major family, together with
//! the auxiliary quantities they are built from.
//!
//! Conventions:
//!
//! * `n` is the sample size, `d` the (weak) VC-major dimension, `sigma` the
//!   supremum of root-mean-square norms (or of standard deviations for
//!   [`cor2_bound`]) and `b` the half-width of the range `[-b, b]`.
//! * Terms of the form `σ·log(c/σ)` are extended by continuity to 0 at
//!   `σ = 0`, so every bound that accepts `σ = 0` returns its limit there.
//! * All functions are pure.

use std::f64::consts::{E, LN_2};

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numeric::{self, x_log_c_over_x};

/// Absolute tolerance of the quadratures behind [`thm1_general_bound`].
pub const QUADRATURE_TOL: f64 = 1e-8;

/// `(n, d, σ, b)`: everything a closed-form bound consumes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    pub n: u64,
    pub d: u64,
    pub sigma: f64,
    #[serde(default = "default_half_width")]
    pub b: f64,
}

fn default_half_width() -> f64 {
    1.0
}

impl BoundInputs {
    pub fn new(n: u64, d: u64, sigma: f64) -> Self {
        Self { n, d, sigma, b: 1.0 }
    }

    pub fn with_half_width(mut self, b: f64) -> Self {
        self.b = b;
        self
    }

    /// Checks `n ≥ 1`, `b > 0` and `0 ≤ σ ≤ b`. `d = 0` is accepted here and
    /// rejected per bound by [`evaluate_all`].
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(domain("n", 0.0, "n >= 1"));
        }
        if !(self.b > 0.0 && self.b.is_finite()) {
            return Err(domain("b", self.b, "b > 0"));
        }
        if !(self.sigma >= 0.0 && self.sigma <= self.b) {
            return Err(domain("sigma", self.sigma, "0 <= sigma <= b"));
        }
        Ok(())
    }
}

/// A Monte Carlo estimate of `u ↦ Γ_u = E[log(2|E_u(X)|)]` on a grid of
/// levels, read as a piecewise-linear interpolant with constant extension
/// outside the knot range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaCurve {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl GammaCurve {
    pub fn new(knots: Vec<f64>, values: Vec<f64>, stderr: Vec<f64>) -> Result<Self> {
        if knots.is_empty() || knots.len() != values.len() || knots.len() != stderr.len() {
            return Err(Error::InvalidArgument(format!(
                "gamma curve needs matching nonempty knots/values/stderr (got {}, {}, {})",
                knots.len(),
                values.len(),
                stderr.len()
            )));
        }
        if let Some(u) = knots.iter().find(|u| !(**u > 0.0 && **u < 1.0)) {
            return Err(domain("knot", *u, "0 < u < 1"));
        }
        if knots.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidArgument(
                "gamma curve knots must be nondecreasing".into(),
            ));
        }
        // Means of values that are each >= log 2 can round a hair below it.
        if let Some(v) = values.iter().find(|v| !(**v >= LN_2 * (1.0 - 1e-12))) {
            return Err(domain("gamma value", *v, "value >= log 2"));
        }
        Ok(Self {
            knots,
            values,
            stderr,
        })
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new(vec![0.5], vec![value], vec![0.0])
    }

    pub fn eval(&self, u: f64) -> f64 {
        let k = &self.knots;
        let last = k.len() - 1;
        if u <= k[0] {
            return self.values[0];
        }
        if u >= k[last] {
            return self.values[last];
        }
        let hi = k.partition_point(|x| *x <= u);
        let lo = hi - 1;
        let span = k[hi] - k[lo];
        if span == 0.0 {
            return self.values[hi];
        }
        let t = (u - k[lo]) / span;
        self.values[lo] + t * (self.values[hi] - self.values[lo])
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Which argument the second branch of [`cor2_bound`] feeds to `B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Cor2Argument {
    /// `B(σ / (2b))`: the centered-and-halved family has RMS norm `σ/2`.
    #[default]
    HalfSigmaOverB,
    /// `B(σ / b)`.
    SigmaOverB,
}

impl Cor2Argument {
    fn apply(self, sigma: f64, b: f64) -> f64 {
        match self {
            Self::HalfSigmaOverB => sigma / (2.0 * b),
            Self::SigmaOverB => sigma / b,
        }
    }
}

/// Branch of `B(σ)` selected by the threshold `a`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BBranch {
    AtOrAboveThreshold,
    BelowThreshold,
}

/// `Γ̄_n(d) = log(2 Σ_{j ≤ d∧n} C(n, j))`.
pub fn gamma_bar(n: u64, d: u64) -> f64 {
    LN_2 + numeric::ln_partial_binomial_sum(n, d.min(n))
}

/// `(d∧n)·log(2en / (d∧n))`, an upper bound on [`gamma_bar`].
pub fn gamma_bar_upper(n: u64, d: u64) -> Result<f64> {
    check_n(n)?;
    check_d(d)?;
    let m = d.min(n) as f64;
    Ok(m * (2.0 * E * n as f64 / m).ln())
}

/// `H̄(x) = x·√(d(5 + log(1/x)))`, with `H̄(0) = 0`.
pub fn h_bar(x: f64, d: u64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(domain("x", x, "0 <= x <= 1"));
    }
    check_d(d)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x * (d as f64 * (5.0 - x.ln())).sqrt())
}

/// `a = (32·√(Γ̄_n(d)/n)) ∧ 1`.
pub fn a_threshold(n: u64, d: u64) -> f64 {
    let n = n.max(1);
    (32.0 * (gamma_bar(n, d) / n as f64).sqrt()).min(1.0)
}

pub fn b_branch(sigma: f64, n: u64, d: u64) -> BBranch {
    if sigma >= a_threshold(n, d) {
        BBranch::AtOrAboveThreshold
    } else {
        BBranch::BelowThreshold
    }
}

/// `B(σ)`: `H̄(σ log(1/σ) + σ)` for `σ ≥ a`, `H̄(σ log(1/a) + a)` below.
pub fn b_of_sigma(sigma: f64, n: u64, d: u64) -> Result<f64> {
    check_unit_sigma(sigma)?;
    check_n(n)?;
    check_d(d)?;
    let a = a_threshold(n, d);
    let arg = if sigma >= a {
        x_log_c_over_x(sigma, 1.0) + sigma
    } else {
        sigma * (1.0 / a).ln() + a
    };
    // Both branches are at most 1 analytically; rounding can overshoot.
    h_bar(arg.min(1.0), d)
}

/// `2√Γ̄ [σ log(e/σ) √(2n) + 4√Γ̄]` for `[0,1]`-valued weak VC-major families.
pub fn thm1_bound(sigma: f64, n: u64, d: u64) -> Result<f64> {
    check_unit_sigma(sigma)?;
    check_n(n)?;
    let g = gamma_bar(n, d);
    let root = g.sqrt();
    Ok(2.0 * root * (x_log_c_over_x(sigma, E) * (2.0 * n as f64).sqrt() + 4.0 * root))
}

/// The entropy-integral form
/// `2√(2n) σ [σ⁻¹∫₀^σ √Γ_u du + ∫_σ^1 √Γ_u / u du] + 8 ∫₀^1 Γ_u du`
/// evaluated against an estimated `Γ_u` curve.
pub fn thm1_general_bound(curve: &GammaCurve, sigma: f64, n: u64) -> Result<f64> {
    check_unit_sigma(sigma)?;
    check_n(n)?;
    let ceiling = (n as f64 + 1.0) * LN_2;
    let top = curve.max_value();
    if top > ceiling * (1.0 + 1e-12) {
        return Err(domain("gamma value", top, "value <= (n+1) log 2"));
    }
    let knots = &curve.knots;
    let root = |u: f64| curve.eval(u).sqrt();
    let lower = if sigma > 0.0 {
        numeric::integrate_split(root, 0.0, sigma, knots, QUADRATURE_TOL)?
    } else {
        0.0
    };
    let upper = if sigma > 0.0 && sigma < 1.0 {
        numeric::integrate_split(|u| root(u) / u, sigma, 1.0, knots, QUADRATURE_TOL)?
    } else {
        0.0
    };
    let whole = numeric::integrate_split(|u| curve.eval(u), 0.0, 1.0, knots, QUADRATURE_TOL)?;
    Ok(2.0 * (2.0 * n as f64).sqrt() * (lower + sigma * upper) + 8.0 * whole)
}

/// `10 √n B(σ)`.
pub fn thm2_bound(sigma: f64, n: u64, d: u64) -> Result<f64> {
    Ok(10.0 * (n as f64).sqrt() * b_of_sigma(sigma, n, d)?)
}

/// `4 · min{σ log(eb/σ) √(2nΓ̄) + 4bΓ̄ ; 5√n b B(σ/b)}` for `[-b, b]`-valued
/// weak VC-major families.
pub fn cor1_bound(sigma: f64, n: u64, d: u64, b: f64) -> Result<f64> {
    check_half_width(b)?;
    if !(0.0..=b).contains(&sigma) {
        return Err(domain("sigma", sigma, "0 <= sigma <= b"));
    }
    check_n(n)?;
    check_d(d)?;
    let g = gamma_bar(n, d);
    let entropy = x_log_c_over_x(sigma, E * b) * (2.0 * n as f64 * g).sqrt() + 4.0 * b * g;
    let local = 5.0 * (n as f64).sqrt() * b * b_of_sigma((sigma / b).min(1.0), n, d)?;
    Ok(4.0 * entropy.min(local))
}

/// `min{2σ log(2eb/σ) √(2nΓ̄) + 16bΓ̄ ; 20√n b B(·)}` for i.i.d. samples and
/// VC-major families, with `σ` the largest standard deviation.
pub fn cor2_bound(sigma_sd: f64, n: u64, d: u64, b: f64, argument: Cor2Argument) -> Result<f64> {
    check_half_width(b)?;
    if !(sigma_sd > 0.0 && sigma_sd <= b) {
        return Err(domain("sigma_sd", sigma_sd, "0 < sigma_sd <= b"));
    }
    check_n(n)?;
    check_d(d)?;
    let g = gamma_bar(n, d);
    let entropy =
        2.0 * sigma_sd * (2.0 * E * b / sigma_sd).ln() * (2.0 * n as f64 * g).sqrt() + 16.0 * b * g;
    let arg = argument.apply(sigma_sd, b).min(1.0);
    let local = 20.0 * (n as f64).sqrt() * b * b_of_sigma(arg, n, d)?;
    Ok(entropy.min(local))
}

/// `2[σ√(2nΓ) + 4Γ]` for indicator families with trace entropy `Γ`.
pub fn thm3_indicator_bound(sigma: f64, n: u64, gamma: f64) -> Result<f64> {
    check_unit_sigma(sigma)?;
    if !(gamma >= LN_2) {
        return Err(domain("gamma", gamma, "gamma >= log 2"));
    }
    Ok(2.0 * (sigma * (2.0 * n as f64 * gamma).sqrt() + 4.0 * gamma))
}

/// [`thm3_indicator_bound`] with `Γ = Γ̄_n(d)`: VC classes of sets.
pub fn cor3_bound(sigma: f64, n: u64, d: u64) -> Result<f64> {
    check_n(n)?;
    thm3_indicator_bound(sigma, n, gamma_bar(n, d))
}

/// `10 √n H̄(σ ∨ a)` for VC classes of sets.
pub fn prop4_bound(sigma: f64, n: u64, d: u64) -> Result<f64> {
    check_unit_sigma(sigma)?;
    check_n(n)?;
    check_d(d)?;
    let a = a_threshold(n, d);
    Ok(10.0 * (n as f64).sqrt() * h_bar(sigma.max(a), d)?)
}

/// `√(2 log(2|T|) v²)` with `v² = max_t Σ t_i²`: the finite-maximum bound on
/// `E[max_t |Σ ε_i t_i|]`.
pub fn massart_finite_bound<V: AsRef<[f64]>>(vectors: &[V]) -> Result<f64> {
    let first = vectors.first().ok_or(Error::EmptySet)?.as_ref().len();
    let mut v2: f64 = 0.0;
    for t in vectors {
        let t = t.as_ref();
        if t.len() != first {
            return Err(Error::RaggedVectors {
                expected: first,
                found: t.len(),
            });
        }
        v2 = v2.max(t.iter().map(|x| x * x).sum());
    }
    Ok((2.0 * (2.0 * vectors.len() as f64).ln() * v2).sqrt())
}

/// Order-only comparison curve `σ√(nL(σ)) + L(σ) + √(log n)` with
/// `L(σ) = log(1/σ)^{3/2} log log(1/σ)`; carries no constant.
pub fn gk_reference(sigma: f64, n: u64) -> Result<f64> {
    let limit = (-E).exp();
    if !(sigma > 0.0 && sigma < limit) {
        return Err(domain("sigma", sigma, "0 < sigma < e^-e"));
    }
    check_n(n)?;
    let l1 = (1.0 / sigma).ln();
    let l = l1.powf(1.5) * l1.ln();
    let n = n as f64;
    Ok(sigma * (n * l).sqrt() + l + n.ln().sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditional {
    pub value: f64,
    pub valid: bool,
}

/// `72 √n σ √(d log(4e²/σ))`, valid when `σ ≥ 24 √((d/(5n)) log(4e²/σ))`.
/// Bounds the larger of the two one-sided expected suprema.
pub fn betal_bound(sigma: f64, n: u64, d: u64) -> Result<Conditional> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(domain("sigma", sigma, "0 < sigma <= 1"));
    }
    check_n(n)?;
    check_d(d)?;
    let (nf, df) = (n as f64, d as f64);
    let log_term = (4.0 * E * E / sigma).ln();
    let value = 72.0 * nf.sqrt() * sigma * (df * log_term).sqrt();
    let threshold = 24.0 * (df / (5.0 * nf) * log_term).sqrt();
    Ok(Conditional {
        value,
        valid: sigma >= threshold,
    })
}

/// Role of a report entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntryKind {
    /// Helper quantity, not a bound.
    Auxiliary,
    /// Explicit upper bound on `E[Z(F)]`.
    Bound,
    /// Explicit upper bound on the larger one-sided expected supremum.
    OneSidedBound,
    /// Order-of-magnitude curve without constants.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub name: String,
    pub kind: EntryKind,
    pub value: Option<f64>,
    pub valid: bool,
    pub note: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSummary {
    pub mean: f64,
    pub stderr: f64,
    pub reps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub entries: Vec<BoundEntry>,
    /// Name of the smallest valid [`EntryKind::Bound`] entry.
    pub tightest: Option<String>,
    pub mc_estimate: Option<McSummary>,
}

impl BoundReport {
    pub fn entry(&self, name: &str) -> Option<&BoundEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn value(&self, name: &str) -> Option<f64> {
        self.entry(name).and_then(|e| e.value)
    }

    pub fn tightest_value(&self) -> Option<f64> {
        self.tightest.as_deref().and_then(|name| self.value(name))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EvaluateOptions {
    pub cor2_argument: Cor2Argument,
}

/// Names of the entries [`evaluate_all`] produces, in report order.
pub const ENTRY_NAMES: &[&str] = &[
    "gamma_bar",
    "gamma_bar_upper",
    "a_threshold",
    "b_of_sigma",
    "thm1",
    "thm1_general",
    "thm2",
    "cor1",
    "cor2",
    "cor3",
    "prop4",
    "betal",
    "gk_reference",
];

/// Evaluates every bound at `inputs`. Precondition failures become invalid
/// entries with a note; only malformed `inputs` are an error.
pub fn evaluate_all(
    inputs: &BoundInputs,
    curve: Option<&GammaCurve>,
    options: EvaluateOptions,
) -> Result<BoundReport> {
    inputs.validate()?;
    let BoundInputs { n, d, sigma, b } = *inputs;
    let unit_range = b == 1.0;
    let need_unit = |r: Result<f64>| -> Result<f64> {
        if unit_range {
            r
        } else {
            Err(Error::InvalidArgument(
                "requires a [0,1]-valued family (b = 1)".into(),
            ))
        }
    };

    let mut entries = Vec::with_capacity(ENTRY_NAMES.len());
    let mut push = |name: &str, kind: EntryKind, r: Result<f64>, note: &str| {
        entries.push(match r {
            Ok(v) => BoundEntry {
                name: name.into(),
                kind,
                value: Some(v),
                valid: true,
                note: note.into(),
            },
            Err(e) => BoundEntry {
                name: name.into(),
                kind,
                value: None,
                valid: false,
                note: e.to_string(),
            },
        })
    };

    let sigma_unit = sigma / b;
    push("gamma_bar", EntryKind::Auxiliary, Ok(gamma_bar(n, d)), "");
    push(
        "gamma_bar_upper",
        EntryKind::Auxiliary,
        gamma_bar_upper(n, d),
        "",
    );
    push("a_threshold", EntryKind::Auxiliary, Ok(a_threshold(n, d)), "");
    let branch_note = match b_branch(sigma_unit, n, d) {
        BBranch::AtOrAboveThreshold => "sigma/b >= a",
        BBranch::BelowThreshold => "sigma/b < a",
    };
    push(
        "b_of_sigma",
        EntryKind::Auxiliary,
        b_of_sigma(sigma_unit, n, d),
        branch_note,
    );
    push("thm1", EntryKind::Bound, need_unit(thm1_bound(sigma, n, d)), "");
    match curve {
        Some(c) => push(
            "thm1_general",
            EntryKind::Bound,
            need_unit(thm1_general_bound(c, sigma, n)),
            "estimated gamma curve",
        ),
        None => push(
            "thm1_general",
            EntryKind::Bound,
            Err(Error::InvalidArgument("no gamma curve supplied".into())),
            "",
        ),
    }
    push("thm2", EntryKind::Bound, need_unit(thm2_bound(sigma, n, d)), "");
    push("cor1", EntryKind::Bound, cor1_bound(sigma, n, d, b), "");
    let cor2_note = match options.cor2_argument {
        Cor2Argument::HalfSigmaOverB => {
            "sigma read as a standard deviation; second branch uses B(sigma/(2b)), printed source form B(b/sigma) is outside B's domain"
        }
        Cor2Argument::SigmaOverB => {
            "sigma read as a standard deviation; second branch uses B(sigma/b)"
        }
    };
    push(
        "cor2",
        EntryKind::Bound,
        cor2_bound(sigma, n, d, b, options.cor2_argument),
        cor2_note,
    );
    push(
        "cor3",
        EntryKind::Bound,
        need_unit(cor3_bound(sigma, n, d)),
        "indicator families only",
    );
    push(
        "prop4",
        EntryKind::Bound,
        need_unit(prop4_bound(sigma, n, d)),
        "indicator families only",
    );
    let betal = need_unit(betal_bound(sigma, n, d).and_then(|c| {
        if c.valid {
            Ok(c.value)
        } else {
            Err(Error::InvalidArgument(format!(
                "side condition on sigma fails (value would be {})",
                c.value
            )))
        }
    }));
    push(
        "betal",
        EntryKind::OneSidedBound,
        betal,
        "bounds the larger one-sided expected supremum, i.i.d. only",
    );
    push(
        "gk_reference",
        EntryKind::Reference,
        gk_reference(sigma, n),
        "order-only reference; no explicit constant",
    );

    let tightest = entries
        .iter()
        .filter(|e| e.kind == EntryKind::Bound && e.valid)
        .filter_map(|e| e.value.map(|v| (e.name.clone(), v)))
        .fold(None::<(String, f64)>, |best, (name, v)| match best {
            Some((_, bv)) if bv <= v => best,
            _ => Some((name, v)),
        })
        .map(|(name, _)| name);

    Ok(BoundReport {
        inputs: *inputs,
        entries,
        tightest,
        mc_estimate: None,
    })
}

fn check_n(n: u64) -> Result<()> {
    if n == 0 {
        Err(domain("n", 0.0, "n >= 1"))
    } else {
        Ok(())
    }
}

fn check_d(d: u64) -> Result<()> {
    if d == 0 {
        Err(domain("d", 0.0, "d >= 1"))
    } else {
        Ok(())
    }
}

fn check_unit_sigma(sigma: f64) -> Result<()> {
    if (0.0..=1.0).contains(&sigma) {
        Ok(())
    } else {
        Err(domain("sigma", sigma, "0 <= sigma <= 1"))
    }
}

fn check_half_width(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(domain("b", b, "b > 0"))
    }
}
