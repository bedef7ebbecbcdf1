//! Canonical function families with known dimensions, and exact suprema of
//! their Rademacher and centered empirical processes on a realized sample.
//!
//! Every non-constant family here is `[0, 1]`-valued and is either a class of
//! indicators of intervals or a convex class whose extreme points are such
//! indicators. A linear functional of `f` is therefore extremal at an
//! indicator, and the suprema reduce to scans over runs of sorted points
//! (see [`crate::sets`]).

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{Distribution, Grouped, Interval, Sample};
use crate::sets::{SetClass, Shape};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Family {
    /// Indicators of upper half-lines `(a, ∞)` and `[a, ∞)`.
    HalfLines,
    /// Indicators of intervals, optionally of length at most `max_length`.
    Intervals { max_length: Option<f64> },
    /// Nondecreasing functions `ℝ → [0, 1]`.
    MonotoneNondecreasing,
    /// Nonincreasing functions `ℝ → [0, 1]`.
    MonotoneNonincreasing,
    /// Monotone functions `ℝ → [0, 1]` of either direction.
    Monotone,
    /// `x ↦ f(x - t)·1_{[0,1]}(x)` for monotone `f: ℝ → [0, 1]`, `t ∈ ℝ`.
    TranslatedMonotone,
    /// The single function `x ↦ c`.
    Constant(f64),
    /// `g_f = (f - E f(X_1)) / 2` for `f` in the base family.
    CenteredHalved(Box<Family>),
}

/// Dimensions a family is known to have by construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeclaredDims {
    /// Weak VC-major dimension.
    pub weak: u64,
    /// VC-major dimension, when the family is VC-major.
    pub vc_major: Option<u64>,
    pub provenance: &'static str,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Nondecreasing,
    Nonincreasing,
}

/// The two one-sided suprema `sup_f Σ (f(X_i) - E f(X_i))` and
/// `sup_f Σ (E f(X_i) - f(X_i))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OneSided {
    pub upper: f64,
    pub lower: f64,
}

impl OneSided {
    pub fn two_sided(&self) -> f64 {
        self.upper.max(self.lower)
    }
}

impl Family {
    pub const NAMES: &'static [&'static str] = &[
        "halflines",
        "intervals",
        "intervals-capped",
        "monotone-nondecr",
        "monotone-nonincr",
        "monotone",
        "translated-monotone",
        "constant",
        "centered-halved:<base>",
    ];

    /// Looks a family up by registry name. `intervals-capped` takes its
    /// length cap `σ²` from `sigma`; `constant:<c>` fixes the constant.
    pub fn from_name(name: &str, sigma: Option<f64>) -> Result<Self> {
        if let Some(base) = name.strip_prefix("centered-halved:") {
            return Ok(Family::CenteredHalved(Box::new(Self::from_name(base, sigma)?)));
        }
        if let Some(c) = name.strip_prefix("constant:") {
            let c: f64 = c
                .parse()
                .map_err(|_| Error::UnknownFamily(name.to_string()))?;
            if !c.is_finite() {
                return Err(Error::UnknownFamily(name.to_string()));
            }
            return Ok(Family::Constant(c));
        }
        Ok(match name {
            "halflines" => Family::HalfLines,
            "intervals" => Family::Intervals { max_length: None },
            "intervals-capped" => {
                let s = sigma.ok_or_else(|| {
                    Error::InvalidArgument("intervals-capped needs sigma (cap = sigma^2)".into())
                })?;
                Family::Intervals { max_length: None }.with_sigma(s)?
            }
            "monotone-nondecr" => Family::MonotoneNondecreasing,
            "monotone-nonincr" => Family::MonotoneNonincreasing,
            "monotone" => Family::Monotone,
            "translated-monotone" => Family::TranslatedMonotone,
            "constant" => Family::Constant(1.0),
            _ => return Err(Error::UnknownFamily(name.to_string())),
        })
    }

    pub fn name(&self) -> String {
        match self {
            Family::HalfLines => "halflines".into(),
            Family::Intervals { max_length: None } => "intervals".into(),
            Family::Intervals { max_length: Some(c) } => format!("intervals-capped({c})"),
            Family::MonotoneNondecreasing => "monotone-nondecr".into(),
            Family::MonotoneNonincreasing => "monotone-nonincr".into(),
            Family::Monotone => "monotone".into(),
            Family::TranslatedMonotone => "translated-monotone".into(),
            Family::Constant(c) if *c == 1.0 => "constant".into(),
            Family::Constant(c) => format!("constant:{c}"),
            Family::CenteredHalved(base) => format!("centered-halved:{}", base.name()),
        }
    }

    /// Sets the length cap of an interval family to `σ²`, so that
    /// `sup_f E f² = σ²` under the uniform law.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&sigma) {
            return Err(Error::Domain {
                name: "sigma",
                value: sigma,
                expected: "0 <= sigma <= 1",
            });
        }
        match self {
            Family::Intervals { .. } => Ok(Family::Intervals {
                max_length: Some(sigma * sigma),
            }),
            Family::CenteredHalved(base) => {
                Ok(Family::CenteredHalved(Box::new(base.with_sigma(sigma)?)))
            }
            other => Err(Error::Unsupported {
                family: other.name(),
                what: "a sigma-indexed cap",
            }),
        }
    }

    pub fn declared(&self) -> DeclaredDims {
        let d = |weak, vc_major, provenance| DeclaredDims {
            weak,
            vc_major: Some(vc_major),
            provenance,
        };
        match self {
            Family::HalfLines => d(1, 1, "level sets are upper half-lines"),
            Family::Intervals { .. } => d(2, 2, "intervals form a VC class of dimension 2"),
            Family::MonotoneNondecreasing => d(1, 1, "level sets are upper half-lines"),
            Family::MonotoneNonincreasing => d(1, 1, "level sets are lower half-lines"),
            Family::Monotone => d(2, 2, "level sets are half-lines of either direction"),
            Family::TranslatedMonotone => {
                d(2, 2, "level sets are half-lines cut to [0, 1], or the whole line")
            }
            Family::Constant(_) => d(0, 1, "level sets are the empty set or the whole line"),
            Family::CenteredHalved(base) => {
                let b = base.declared();
                DeclaredDims {
                    weak: b.vc_major.unwrap_or(b.weak),
                    vc_major: None,
                    provenance: "centering and halving a VC-major family keeps the weak dimension below its VC-major dimension",
                }
            }
        }
    }

    /// Dimension fed to the bounds: the weak dimension, at least 1.
    pub fn bound_dim(&self) -> u64 {
        self.declared().weak.max(1)
    }

    /// `b` such that every member takes values in `[-b, b]`.
    pub fn half_width(&self) -> f64 {
        match self {
            Family::Constant(c) => c.abs(),
            Family::CenteredHalved(base) => base.half_width() / 2.0,
            _ => 1.0,
        }
    }

    pub fn is_indicator(&self) -> bool {
        matches!(self, Family::HalfLines | Family::Intervals { .. })
    }

    /// Indicator class whose members are the extreme points of the family.
    fn extreme_class(&self) -> Option<SetClass> {
        match self {
            Family::HalfLines | Family::MonotoneNondecreasing => Some(SetClass::of(Shape::Upper)),
            Family::MonotoneNonincreasing => Some(SetClass::of(Shape::Lower)),
            Family::Monotone => Some(SetClass::of(Shape::HalfLines)),
            Family::TranslatedMonotone => Some(SetClass::of(Shape::HalfLines).within_unit()),
            Family::Intervals { max_length } => Some(SetClass::intervals(*max_length)),
            Family::Constant(_) | Family::CenteredHalved(_) => None,
        }
    }

    /// `{ {f > u} : f ∈ F }`.
    pub fn level_class(&self, u: f64) -> Result<SetClass> {
        match self {
            Family::Constant(c) => Ok(if u < *c { SetClass::WHOLE } else { SetClass::EMPTY }),
            Family::CenteredHalved(_) => Err(Error::Unsupported {
                family: self.name(),
                what: "analytic level classes",
            }),
            _ => Ok(if u < 0.0 {
                SetClass::WHOLE
            } else if u >= 1.0 {
                SetClass::EMPTY
            } else {
                self.extreme_class().expect("non-constant base family")
            }),
        }
    }

    /// Values at which [`Family::level_class`] changes.
    pub fn level_breaks(&self) -> Vec<f64> {
        match self {
            Family::Constant(c) => vec![*c],
            Family::CenteredHalved(base) => {
                let b = base.half_width();
                vec![-b / 2.0, b / 2.0]
            }
            _ => vec![0.0, 1.0],
        }
    }

    /// `σ = sup_f (E f²(X_1))^{1/2}`.
    pub fn sigma_of(&self, dist: &Distribution) -> Result<f64> {
        dist.validate()?;
        match self {
            Family::Constant(c) => Ok(c.abs()),
            Family::TranslatedMonotone => Ok(dist.prob(&Interval::UNIT).sqrt()),
            Family::Intervals {
                max_length: Some(cap),
            } => Ok(longest_window_mass(dist, *cap)?.sqrt()),
            Family::CenteredHalved(base) => Ok(base.sigma_sd_of(dist)? / 2.0),
            _ => Ok(1.0),
        }
    }

    /// `sup_f (Var f(X_1))^{1/2}`. Exact under the uniform law; for other
    /// laws, families without a length cap report the universal bound `1/2`.
    pub fn sigma_sd_of(&self, dist: &Distribution) -> Result<f64> {
        dist.validate()?;
        let bernoulli = |p_max: f64| {
            let p = p_max.min(0.5);
            (p * (1.0 - p)).sqrt()
        };
        match self {
            Family::Constant(_) => Ok(0.0),
            Family::TranslatedMonotone => Ok(bernoulli(dist.prob(&Interval::UNIT))),
            Family::Intervals {
                max_length: Some(cap),
            } => Ok(bernoulli(longest_window_mass(dist, *cap)?)),
            Family::CenteredHalved(base) => Ok(base.sigma_sd_of(dist)? / 2.0),
            _ => Ok(0.5),
        }
    }

    /// A fixed member with an analytic mean, used for shifted symmetrization.
    pub fn reference_member(&self, dist: &Distribution) -> Result<Member> {
        Ok(match self {
            Family::HalfLines => Member::Indicator(Interval::above(0.5, false)),
            Family::Intervals { max_length } => {
                let len = max_length.unwrap_or(0.5).min(0.5);
                Member::Indicator(Interval::closed(0.25, 0.25 + len))
            }
            Family::MonotoneNondecreasing | Family::Monotone => Member::Step {
                offset: 0.0,
                terms: vec![(0.5, Interval::above(0.3, false)), (0.5, Interval::above(0.7, true))],
            },
            Family::MonotoneNonincreasing => Member::Step {
                offset: 0.0,
                terms: vec![(0.5, Interval::below(0.3, true)), (0.5, Interval::below(0.7, false))],
            },
            Family::TranslatedMonotone => Member::Step {
                offset: 0.0,
                terms: vec![(0.5, Interval::closed(0.3, 1.0)), (0.5, Interval::closed(0.7, 1.0))],
            },
            Family::Constant(c) => Member::Constant(*c),
            Family::CenteredHalved(base) => {
                let inner = base.reference_member(dist)?;
                let mean = inner.mean(dist)?;
                Member::Centered {
                    inner: Box::new(inner),
                    mean,
                }
            }
        })
    }

    /// Random members, for level-set and dimension probes.
    pub fn probe_members<R: Rng + ?Sized>(
        &self,
        rng: &mut R,
        count: usize,
        dist: &Distribution,
    ) -> Result<Vec<Member>> {
        let mut out = Vec::with_capacity(count);
        match self {
            Family::Constant(c) => out.resize(count, Member::Constant(*c)),
            Family::HalfLines | Family::Intervals { .. } => {
                let class = self.extreme_class().expect("indicator family");
                for _ in 0..count {
                    out.push(Member::Indicator(class.random_member(rng, &[])));
                }
            }
            Family::MonotoneNondecreasing
            | Family::MonotoneNonincreasing
            | Family::Monotone
            | Family::TranslatedMonotone => {
                for _ in 0..count {
                    let dir = match self {
                        Family::MonotoneNondecreasing => Direction::Nondecreasing,
                        Family::MonotoneNonincreasing => Direction::Nonincreasing,
                        _ if rng.random_bool(0.5) => Direction::Nondecreasing,
                        _ => Direction::Nonincreasing,
                    };
                    let m = random_monotone(rng, dir);
                    out.push(if *self == Family::TranslatedMonotone {
                        Member::Windowed(Box::new(m))
                    } else {
                        m
                    });
                }
            }
            Family::CenteredHalved(base) => {
                let mut tries = 0;
                while out.len() < count {
                    tries += 1;
                    if tries > 100 * count + 100 {
                        return Err(Error::UnavailableMean(base.name()));
                    }
                    let inner = base.probe_members(rng, 1, dist)?.pop().expect("one probe");
                    if let Ok(mean) = inner.mean(dist) {
                        out.push(Member::Centered {
                            inner: Box::new(inner),
                            mean,
                        });
                    }
                }
            }
        }
        Ok(out)
    }

    /// Minimum and maximum of `Σ w_i f(X_i)` over the family.
    pub fn rademacher_range(&self, sample: &Sample, w: &[f64]) -> Result<(f64, f64)> {
        check_len(sample, w)?;
        match self {
            Family::Constant(c) => {
                let t = c * w.iter().sum::<f64>();
                Ok((t, t))
            }
            Family::CenteredHalved(base) => centered_range(base, sample, w),
            _ => {
                let class = self.extreme_class().expect("non-constant base family");
                Ok(class.sum_range(&sample.grouped(), w))
            }
        }
    }

    /// `Z̄ = sup_f |Σ ε_i f(X_i)|`.
    pub fn sup_rademacher(&self, sample: &Sample, signs: &[f64]) -> Result<f64> {
        check_signs(sample, signs)?;
        let (lo, hi) = self.rademacher_range(sample, signs)?;
        Ok(hi.max(-lo))
    }

    /// `sup_f |Σ ε_i (f(X_i) - a_i)|`.
    pub fn sup_rademacher_shifted(&self, sample: &Sample, signs: &[f64], shifts: &[f64]) -> Result<f64> {
        check_signs(sample, signs)?;
        check_len(sample, shifts)?;
        let (lo, hi) = self.rademacher_range(sample, signs)?;
        let s: f64 = signs.iter().zip(shifts).map(|(e, a)| e * a).sum();
        Ok((hi - s).max(s - lo))
    }

    /// Both one-sided suprema of the centered empirical process.
    pub fn sup_empirical_parts(&self, sample: &Sample) -> Result<OneSided> {
        match self {
            Family::Constant(_) => Ok(OneSided {
                upper: 0.0,
                lower: 0.0,
            }),
            Family::CenteredHalved(base) => {
                require_iid(sample, "centered-halved families")?;
                let p = base.sup_empirical_parts(sample)?;
                Ok(OneSided {
                    upper: p.upper / 2.0,
                    lower: p.lower / 2.0,
                })
            }
            _ => class_empirical_parts(&self.extreme_class().expect("base family"), sample),
        }
    }

    /// `Z = sup_f |Σ (f(X_i) - E f(X_i))|`.
    pub fn sup_empirical(&self, sample: &Sample) -> Result<f64> {
        Ok(self.sup_empirical_parts(sample)?.two_sided())
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl From<Family> for String {
    fn from(f: Family) -> String {
        match f {
            Family::Intervals { max_length: Some(c) } => format!("intervals-capped:{c}"),
            other => other.name(),
        }
    }
}

impl TryFrom<String> for Family {
    type Error = Error;

    fn try_from(s: String) -> Result<Family> {
        parse_serialized(&s)
    }
}

fn parse_serialized(s: &str) -> Result<Family> {
    if let Some(base) = s.strip_prefix("centered-halved:") {
        return Ok(Family::CenteredHalved(Box::new(parse_serialized(base)?)));
    }
    if let Some(c) = s.strip_prefix("intervals-capped:") {
        let c: f64 = c.parse().map_err(|_| Error::UnknownFamily(s.to_string()))?;
        return Ok(Family::Intervals { max_length: Some(c) });
    }
    Family::from_name(s, None)
}

/// `sup { P(I) : |I| ≤ cap }`.
fn longest_window_mass(dist: &Distribution, cap: f64) -> Result<f64> {
    match dist {
        Distribution::Uniform => Ok(cap.clamp(0.0, 1.0)),
        Distribution::Discrete { atoms, .. } => {
            let mut best: f64 = 0.0;
            for a in atoms {
                best = best.max(dist.prob(&Interval::closed(*a, a + cap)));
            }
            Ok(best)
        }
        Distribution::Quantile { .. } => Err(Error::RequiresUniform("a length-capped sigma")),
    }
}

fn random_monotone<R: Rng + ?Sized>(rng: &mut R, dir: Direction) -> Member {
    let up = dir == Direction::Nondecreasing;
    if rng.random_bool(0.3) {
        let scale = rng.random_range(0.02..0.5);
        return Member::Logistic {
            center: rng.random_range(-0.2..1.2),
            scale: if up { scale } else { -scale },
        };
    }
    let k = rng.random_range(1..=4);
    let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum::<f64>() / rng.random_range(0.5..1.0);
    let terms: Vec<(f64, Interval)> = raw
        .into_iter()
        .map(|w| {
            let a = rng.random_range(-0.2..1.2);
            let closed = rng.random_bool(0.5);
            let set = if up {
                Interval::above(a, closed)
            } else {
                Interval::below(a, closed)
            };
            ((w / total).min(1.0), set)
        })
        .collect();
    let room = 1.0 - terms.iter().map(|(w, _): &(f64, Interval)| w).sum::<f64>();
    Member::Step {
        offset: rng.random_range(0.0..=room.max(0.0)),
        terms,
    }
}

fn check_len(sample: &Sample, w: &[f64]) -> Result<()> {
    if w.len() != sample.len() {
        return Err(Error::RaggedVectors {
            expected: sample.len(),
            found: w.len(),
        });
    }
    Ok(())
}

fn check_signs(sample: &Sample, signs: &[f64]) -> Result<()> {
    check_len(sample, signs)?;
    if let Some(e) = signs.iter().find(|e| e.abs() != 1.0) {
        return Err(Error::InvalidArgument(format!("sign {e} is not +1 or -1")));
    }
    Ok(())
}

fn require_iid(sample: &Sample, what: &'static str) -> Result<()> {
    if sample.is_iid() {
        Ok(())
    } else {
        Err(Error::RequiresIid(what))
    }
}

/// Largest `Σ_i P(X_i ∈ I)` over class members `I ⊆ set`; for a length cap
/// this relies on the uniform law.
fn max_mass(sample: &Sample, set: &Interval, cap: Option<f64>) -> f64 {
    match cap {
        Some(c) => sample.len() as f64 * set.intersect(&Interval::UNIT).length().min(c),
        None => sample.mass(set),
    }
}

fn capped(class: &SetClass) -> Option<f64> {
    if class.shape == Shape::Intervals {
        class.max_length
    } else {
        None
    }
}

fn class_empirical_parts(class: &SetClass, sample: &Sample) -> Result<OneSided> {
    let cap = capped(class);
    if cap.is_some() && !sample.law().is_uniform() {
        return Err(Error::RequiresUniform("a length-capped empirical supremum"));
    }
    let g = sample.grouped();
    let mut upper: f64 = 0.0;
    let mut lower: f64 = 0.0;
    class.visit(&g, |w| {
        let count = span_count(&g, w.span);
        upper = upper.max(count - sample.mass(&w.min_set));
        lower = lower.max(max_mass(sample, &w.max_set, cap) - count);
    });
    Ok(OneSided { upper, lower })
}

fn span_count(g: &Grouped, span: Option<(usize, usize)>) -> f64 {
    match span {
        Some((j, k)) => (g.starts[k + 1] - g.starts[j]) as f64,
        None => 0.0,
    }
}

/// Range of `½ (Σ_{i ∈ C} w_i - P(C) Σ w_i)` over the base class: linear in
/// `P(C)`, so only the extreme members of each trace matter.
fn centered_range(base: &Family, sample: &Sample, w: &[f64]) -> Result<(f64, f64)> {
    require_iid(sample, "centered-halved families")?;
    let Some(class) = base.extreme_class() else {
        return match base {
            Family::Constant(_) => Ok((0.0, 0.0)),
            _ => Err(Error::UnavailableMean(base.name())),
        };
    };
    let cap = capped(&class);
    if cap.is_some() && !sample.law().is_uniform() {
        return Err(Error::RequiresUniform("a length-capped centered family"));
    }
    let g = sample.grouped();
    let s = g.prefix_sums(w);
    let total = s[g.len()];
    let n = sample.len() as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    class.visit(&g, |win| {
        let a = match win.span {
            Some((j, k)) => s[k + 1] - s[j],
            None => 0.0,
        };
        for p in [sample.mass(&win.min_set) / n, max_mass(sample, &win.max_set, cap) / n] {
            let v = 0.5 * (a - p * total);
            lo = lo.min(v);
            hi = hi.max(v);
        }
    });
    Ok((lo, hi))
}

/// Exact `sup |Σ ε_i 1{X_i ∈ C}|` over upper half-lines.
pub fn sup_rademacher_halflines(sample: &Sample, signs: &[f64]) -> Result<f64> {
    Family::HalfLines.sup_rademacher(sample, signs)
}

/// Exact `sup |Σ ε_i 1{X_i ∈ I}|` over intervals of length at most
/// `max_length`.
pub fn sup_rademacher_intervals(sample: &Sample, signs: &[f64], max_length: Option<f64>) -> Result<f64> {
    if let Some(c) = max_length {
        if !(c >= 0.0) {
            return Err(Error::Domain {
                name: "max_length",
                value: c,
                expected: "max_length >= 0",
            });
        }
    }
    Family::Intervals { max_length }.sup_rademacher(sample, signs)
}

/// Exact `sup |#{X_i ∈ I} - Σ_i P(X_i ∈ I)|` over intervals of length at
/// most `max_length`. A cap requires the uniform law; without one any law
/// with exact interval probabilities is accepted.
pub fn sup_empirical_intervals(sample: &Sample, max_length: Option<f64>) -> Result<f64> {
    Family::Intervals { max_length }.sup_empirical(sample)
}

/// Exact `sup |Σ ε_i f(X_i)|` over monotone `f: ℝ → [0, 1]`, reached at
/// indicators of half-lines.
pub fn sup_rademacher_monotone(sample: &Sample, signs: &[f64], direction: Direction) -> Result<f64> {
    match direction {
        Direction::Nondecreasing => Family::MonotoneNondecreasing.sup_rademacher(sample, signs),
        Direction::Nonincreasing => Family::MonotoneNonincreasing.sup_rademacher(sample, signs),
    }
}

/// `{(f - E f(X_1)) / 2 : f ∈ F}` for a law with analytic means.
pub fn center_halve(family: &Family, dist: &Distribution) -> Result<Family> {
    dist.validate()?;
    match family {
        Family::CenteredHalved(_) => Err(Error::UnavailableMean(family.name())),
        Family::Intervals {
            max_length: Some(_),
        } if !dist.is_uniform() => Err(Error::RequiresUniform("a length-capped centered family")),
        _ => Ok(Family::CenteredHalved(Box::new(family.clone()))),
    }
}

/// A single member of a family, as an evaluable function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Member {
    Constant(f64),
    Indicator(Interval),
    /// `offset + Σ weight·1_I`.
    Step { offset: f64, terms: Vec<(f64, Interval)> },
    /// `1 / (1 + exp(-(x - center) / scale))`; nonincreasing when `scale < 0`.
    Logistic { center: f64, scale: f64 },
    /// `inner(x)` on `[0, 1]`, zero elsewhere.
    Windowed(Box<Member>),
    /// `map ∘ inner`.
    Mapped { map: MonotoneMap, inner: Box<Member> },
    /// `(inner - mean) / 2`.
    Centered { inner: Box<Member>, mean: f64 },
}

/// Monotone maps of the real line applied to members.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonotoneMap {
    /// `x²`, monotone on the nonnegative values `[0, 1]`-valued members take.
    Square,
    Negate,
    PositivePart,
    Affine { scale: f64, shift: f64 },
}

impl MonotoneMap {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            MonotoneMap::Square => x * x,
            MonotoneMap::Negate => -x,
            MonotoneMap::PositivePart => x.max(0.0),
            MonotoneMap::Affine { scale, shift } => scale * x + shift,
        }
    }
}

impl Member {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Member::Constant(c) => *c,
            Member::Indicator(i) => f64::from(u8::from(i.contains(x))),
            Member::Step { offset, terms } => {
                offset + terms.iter().filter(|(_, i)| i.contains(x)).map(|(w, _)| w).sum::<f64>()
            }
            Member::Logistic { center, scale } => 1.0 / (1.0 + (-(x - center) / scale).exp()),
            Member::Windowed(inner) => {
                if Interval::UNIT.contains(x) {
                    inner.eval(x)
                } else {
                    0.0
                }
            }
            Member::Mapped { map, inner } => map.apply(inner.eval(x)),
            Member::Centered { inner, mean } => (inner.eval(x) - mean) / 2.0,
        }
    }

    /// `E f(X)` when available in closed form.
    pub fn mean(&self, dist: &Distribution) -> Result<f64> {
        match self {
            Member::Constant(c) => Ok(*c),
            Member::Indicator(i) => Ok(dist.prob(i)),
            Member::Step { offset, terms } => {
                Ok(offset + terms.iter().map(|(w, i)| w * dist.prob(i)).sum::<f64>())
            }
            Member::Centered { inner, mean } => Ok((inner.mean(dist)? - mean) / 2.0),
            Member::Windowed(inner) => {
                let unit = Interval::UNIT;
                match &**inner {
                    Member::Constant(c) => Ok(c * dist.prob(&unit)),
                    Member::Indicator(i) => Ok(dist.prob(&i.intersect(&unit))),
                    Member::Step { offset, terms } => Ok(offset * dist.prob(&unit)
                        + terms.iter().map(|(w, i)| w * dist.prob(&i.intersect(&unit))).sum::<f64>()),
                    other => Err(Error::UnavailableMean(format!("windowed {other:?}"))),
                }
            }
            other => Err(Error::UnavailableMean(format!("{other:?}"))),
        }
    }

    pub fn mapped(self, map: MonotoneMap) -> Member {
        Member::Mapped {
            map,
            inner: Box::new(self),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::SampleLaw;
    use crate::sets::trace_values;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn uniform(xs: &[f64]) -> Sample {
        Sample::uniform(xs.to_vec()).unwrap()
    }

    fn signs_of(bits: u32, n: usize) -> Vec<f64> {
        (0..n).map(|i| if bits >> i & 1 == 1 { -1.0 } else { 1.0 }).collect()
    }

    /// `max |Σ ε_i 1{x_i ∈ [x_(j), x_(k)]}|` over all windows of sorted points.
    fn window_oracle(xs: &[f64], e: &[f64], cap: Option<f64>) -> f64 {
        let mut idx: Vec<usize> = (0..xs.len()).collect();
        idx.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
        let mut best: f64 = 0.0;
        for j in 0..idx.len() {
            for k in j..idx.len() {
                if cap.is_some_and(|c| xs[idx[k]] - xs[idx[j]] > c) {
                    continue;
                }
                let s: f64 = (j..=k).map(|t| e[idx[t]]).sum();
                best = best.max(s.abs());
            }
        }
        best
    }

    #[test]
    fn halflines_examples() {
        let s = uniform(&[0.2, 0.5, 0.9]);
        assert_eq!(sup_rademacher_halflines(&s, &[1.0, -1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(sup_rademacher_halflines(&s, &[1.0; 3]).unwrap(), 3.0);
        let s4 = uniform(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(sup_rademacher_halflines(&s4, &[1.0, -1.0, 1.0, -1.0]).unwrap(), 1.0);
        assert!(sup_rademacher_halflines(&s, &[1.0, 0.5, 1.0]).is_err());
        assert!(sup_rademacher_halflines(&s, &[1.0]).is_err());
    }

    #[test]
    fn intervals_examples() {
        let s = uniform(&[0.1, 0.2, 0.3, 0.4]);
        assert_eq!(sup_rademacher_intervals(&s, &[1.0, -1.0, 1.0, 1.0], None).unwrap(), 2.0);
        assert_eq!(sup_rademacher_intervals(&s, &[1.0, 1.0, 1.0, 1.0], Some(0.05)).unwrap(), 1.0);
        assert!(sup_rademacher_intervals(&s, &[1.0; 4], Some(-0.1)).is_err());
    }

    #[test]
    fn interval_scan_matches_window_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let n = rng.random_range(1..=15);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let e: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let s = uniform(&xs);
            let cap = if rng.random_bool(0.5) { Some(rng.random_range(0.0..0.6)) } else { None };
            let got = sup_rademacher_intervals(&s, &e, cap).unwrap();
            assert_eq!(got, window_oracle(&xs, &e, cap));
            if cap.is_none() {
                let neg: Vec<f64> = e.iter().map(|x| -x).collect();
                let (lo, hi) = Family::Intervals { max_length: None }.rademacher_range(&s, &e).unwrap();
                assert_eq!(-lo, Family::Intervals { max_length: None }.rademacher_range(&s, &neg).unwrap().1);
                assert_eq!(got, hi.max(-lo));
            }
        }
    }

    #[test]
    fn exhaustive_small_instances_agree_with_traces() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let fams = [
            Family::HalfLines,
            Family::Intervals { max_length: None },
            Family::Intervals { max_length: Some(0.3) },
            Family::Monotone,
            Family::TranslatedMonotone,
        ];
        for _ in 0..12 {
            let n = rng.random_range(1..=12);
            let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..1.1)).collect();
            let s = uniform(&xs);
            for fam in &fams {
                let class = fam.extreme_class().unwrap();
                let t = trace_values(&class, &xs, 30).unwrap();
                for bits in 0..1u32 << n {
                    let e = signs_of(bits, n);
                    let brute = t
                        .masks
                        .iter()
                        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| e[i]).sum::<f64>().abs())
                        .fold(0.0, f64::max);
                    assert_eq!(fam.sup_rademacher(&s, &e).unwrap(), brute, "{fam}");
                }
            }
        }
    }

    #[test]
    fn monotone_matches_vertex_enumeration() {
        let s = uniform(&[0.2, 0.5, 0.9]);
        let e = [1.0, -1.0, 1.0];
        assert_eq!(sup_rademacher_monotone(&s, &e, Direction::Nondecreasing).unwrap(), 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..200 {
            let n = rng.random_range(1..=8);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let e: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let s = uniform(&xs);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]));
            // Vertices of the nondecreasing polytope on sorted points: 0/1 vectors that never drop.
            let mut best: f64 = 0.0;
            for v in 0..1u32 << n {
                let bits: Vec<u32> = (0..n).map(|r| v >> r & 1).collect();
                if bits.windows(2).any(|w| w[1] < w[0]) {
                    continue;
                }
                let val: f64 = (0..n).map(|r| bits[r] as f64 * e[order[r]]).sum();
                best = best.max(val.abs());
            }
            let up = sup_rademacher_monotone(&s, &e, Direction::Nondecreasing).unwrap();
            assert_eq!(up, best);
            assert_eq!(up, sup_rademacher_halflines(&s, &e).unwrap());
            // Random interior points of the polytope never beat the vertices.
            for _ in 0..20 {
                let mut f: Vec<f64> = (0..n).map(|_| rng.random()).collect();
                f.sort_by(f64::total_cmp);
                let val: f64 = (0..n).map(|r| f[r] * e[order[r]]).sum();
                assert!(val.abs() <= up + 1e-12);
            }
            let all_neg = vec![-1.0; n];
            assert_eq!(sup_rademacher_monotone(&s, &all_neg, Direction::Nonincreasing).unwrap(), n as f64);
        }
    }

    #[test]
    fn empirical_intervals_single_point() {
        let s = uniform(&[0.5]);
        assert_eq!(sup_empirical_intervals(&s, None).unwrap(), 1.0);
        let parts = Family::Intervals { max_length: None }.sup_empirical_parts(&s).unwrap();
        assert_eq!(parts, OneSided { upper: 1.0, lower: 0.5 });
    }

    #[test]
    fn empirical_intervals_degenerate_cap() {
        let n = 9;
        let xs: Vec<f64> = (1..=n).map(|i| i as f64 / (n + 1) as f64).collect();
        let s = uniform(&xs);
        assert_eq!(sup_empirical_intervals(&s, Some(0.0)).unwrap(), 1.0);
    }

    fn grid_oracle(xs: &[f64], cap: Option<f64>, endpoints: &[f64]) -> f64 {
        let n = xs.len() as f64;
        let mut best: f64 = 0.0;
        let mut eval = |i: Interval| {
            if cap.is_some_and(|c| i.length() > c) {
                return;
            }
            let count = xs.iter().filter(|x| i.contains(**x)).count() as f64;
            best = best.max((count - n * Distribution::Uniform.prob(&i)).abs());
        };
        for (a, &lo) in endpoints.iter().enumerate() {
            for &hi in &endpoints[a..] {
                for (lc, hc) in [(true, true), (false, false), (true, false), (false, true)] {
                    eval(Interval::new(lo, hi, lc, hc));
                }
            }
        }
        best
    }

    #[test]
    fn empirical_intervals_match_grid_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.random_range(1..=50);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let s = uniform(&xs);
            let cap = if rng.random_bool(0.5) { Some(rng.random_range(0.01..0.8)) } else { None };
            // Data points, points a hair inside each gap, and cap-spaced partners.
            let mut ends: Vec<f64> = vec![0.0, 1.0];
            ends.extend(&xs);
            for &x in &xs {
                ends.push(x - 1e-13);
                ends.push(x + 1e-13);
                if let Some(c) = cap {
                    ends.push(x + c);
                    ends.push(x - c);
                    ends.push(x + c - 2e-13);
                    ends.push(x - c + 2e-13);
                }
            }
            ends.sort_by(f64::total_cmp);
            let exact = sup_empirical_intervals(&s, cap).unwrap();
            let grid = grid_oracle(&xs, cap, &ends);
            assert!(grid <= exact + 1e-9, "grid {grid} > exact {exact}");
            assert!(exact - grid < 1e-9 * n as f64, "exact {exact} vs grid {grid}, cap {cap:?}");
        }
    }

    #[test]
    fn empirical_parts_need_uniform_law_when_capped() {
        let law = SampleLaw::Iid(Distribution::Discrete {
            atoms: vec![0.0, 1.0],
            probs: vec![0.5, 0.5],
        });
        let s = Sample::new(vec![0.0, 1.0, 1.0], law).unwrap();
        assert!(matches!(
            sup_empirical_intervals(&s, Some(0.5)),
            Err(Error::RequiresUniform(_))
        ));
        // Uncapped: the atom at 1 holds 2 of 3 points against an expected 1.5.
        let z = sup_empirical_intervals(&s, None).unwrap();
        assert!((z - 0.5).abs() < 1e-15);
    }

    #[test]
    fn cap_never_increases_the_supremum() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..300 {
            let n = rng.random_range(1..=30);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let e: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let s = uniform(&xs);
            let cap = rng.random_range(0.0..1.0);
            let free = Family::Intervals { max_length: None };
            let tight = Family::Intervals { max_length: Some(cap) };
            assert!(tight.sup_rademacher(&s, &e).unwrap() <= free.sup_rademacher(&s, &e).unwrap());
            assert!(tight.sup_empirical(&s).unwrap() <= free.sup_empirical(&s).unwrap() + 1e-12);
            for fam in [free, tight, Family::HalfLines, Family::Monotone] {
                let z = fam.sup_rademacher(&s, &e).unwrap();
                assert!((0.0..=n as f64).contains(&z));
            }
        }
    }

    #[test]
    fn rademacher_is_invariant_under_monotone_relabeling() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.random_range(1..=20);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let ys: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
            let e: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            for fam in [Family::HalfLines, Family::Intervals { max_length: None }, Family::Monotone] {
                assert_eq!(
                    fam.sup_rademacher(&uniform(&xs), &e).unwrap(),
                    fam.sup_rademacher(&uniform(&ys), &e).unwrap()
                );
            }
        }
    }

    #[test]
    fn centered_halved_constant_is_zero() {
        let c = center_halve(&Family::Constant(0.7), &Distribution::Uniform).unwrap();
        let s = uniform(&[0.1, 0.4, 0.8]);
        assert_eq!(c.sup_rademacher(&s, &[1.0, 1.0, -1.0]).unwrap(), 0.0);
        assert_eq!(c.sup_empirical(&s).unwrap(), 0.0);
        let m = c.reference_member(&Distribution::Uniform).unwrap();
        assert_eq!(m.eval(0.3), 0.0);
    }

    #[test]
    fn centered_halved_halflines_brute_force() {
        // g_C = (1_C - |C|) / 2 under the uniform law.
        let fam = center_halve(&Family::HalfLines, &Distribution::Uniform).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(1..=8);
            let xs: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let e: Vec<f64> = (0..n).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
            let s = uniform(&xs);
            let total: f64 = e.iter().sum();
            let mut best: f64 = 0.0;
            for k in 0..=20_000 {
                let a = -0.1 + 1.2 * k as f64 / 20_000.0;
                for closed in [false, true] {
                    let c = Interval::above(a, closed);
                    let inside: f64 = (0..n).filter(|i| c.contains(xs[*i])).map(|i| e[i]).sum();
                    let p = Distribution::Uniform.prob(&c);
                    best = best.max((0.5 * (inside - p * total)).abs());
                }
            }
            let exact = fam.sup_rademacher(&s, &e).unwrap();
            assert!(exact >= best - 1e-12 && exact - best < 1e-3, "{exact} vs {best}");
        }
    }

    #[test]
    fn centered_halved_requires_iid_and_means() {
        let law = SampleLaw::Independent(vec![Distribution::Uniform; 2]);
        let s = Sample::new(vec![0.1, 0.2], law).unwrap();
        let fam = Family::CenteredHalved(Box::new(Family::HalfLines));
        assert!(matches!(fam.sup_rademacher(&s, &[1.0, 1.0]), Err(Error::RequiresIid(_))));
        assert!(center_halve(&fam, &Distribution::Uniform).is_err());
        let q = Distribution::Quantile {
            probs: vec![0.0, 1.0],
            values: vec![0.0, 2.0],
        };
        assert!(center_halve(&Family::Intervals { max_length: Some(0.1) }, &q).is_err());
    }

    #[test]
    fn center_halve_shifts_halflines_by_half_their_mass() {
        let m = Member::Centered {
            inner: Box::new(Member::Indicator(Interval::above(0.3, false))),
            mean: 0.7,
        };
        assert!((m.eval(0.5) - 0.15).abs() < 1e-15);
        assert!((m.eval(0.1) + 0.35).abs() < 1e-15);
        assert!(m.mean(&Distribution::Uniform).unwrap().abs() < 1e-15);
    }

    #[test]
    fn registry_round_trip() {
        for name in ["halflines", "intervals", "monotone-nondecr", "monotone-nonincr", "monotone", "translated-monotone", "constant"] {
            assert_eq!(Family::from_name(name, None).unwrap().name(), name);
        }
        let capped = Family::from_name("intervals-capped", Some(0.5)).unwrap();
        assert_eq!(capped, Family::Intervals { max_length: Some(0.25) });
        assert!(Family::from_name("intervals-capped", None).is_err());
        let ch = Family::from_name("centered-halved:halflines", None).unwrap();
        assert_eq!(ch, Family::CenteredHalved(Box::new(Family::HalfLines)));
        assert_eq!(Family::from_name("constant:0.25", None).unwrap(), Family::Constant(0.25));
        assert!(matches!(Family::from_name("nope", None), Err(Error::UnknownFamily(_))));
        let json = serde_json::to_string(&capped).unwrap();
        assert_eq!(serde_json::from_str::<Family>(&json).unwrap(), capped);
    }

    #[test]
    fn sigma_matches_monte_carlo_rms() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let cap = 0.09;
        let fam = Family::Intervals { max_length: Some(cap) };
        let sigma = fam.sigma_of(&Distribution::Uniform).unwrap();
        assert!((sigma - 0.3).abs() < 1e-15);
        let f = Member::Indicator(Interval::closed(0.4, 0.4 + cap));
        let reps = 40_000;
        let xs: Vec<f64> = (0..reps).map(|_| f.eval(rng.random()).powi(2)).collect();
        let (m, se) = crate::numeric::mean_stderr(&xs);
        assert!((m - sigma * sigma).abs() <= 3.0 * se, "{m} vs {}", sigma * sigma);
        assert_eq!(Family::HalfLines.sigma_of(&Distribution::Uniform).unwrap(), 1.0);
        assert_eq!(
            Family::CenteredHalved(Box::new(Family::HalfLines))
                .sigma_of(&Distribution::Uniform)
                .unwrap(),
            0.25
        );
    }

    #[test]
    fn probe_members_stay_in_range_and_level_sets_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let fams = [
            Family::HalfLines,
            Family::Intervals { max_length: Some(0.2) },
            Family::MonotoneNondecreasing,
            Family::MonotoneNonincreasing,
            Family::Monotone,
            Family::TranslatedMonotone,
            Family::Constant(0.4),
        ];
        for fam in &fams {
            let probes = fam.probe_members(&mut rng, 200, &Distribution::Uniform).unwrap();
            for _ in 0..20 {
                let n = rng.random_range(1..=10);
                let xs: Vec<f64> = (0..n).map(|_| rng.random_range(-0.3..1.3)).collect();
                for u in [-0.5, 0.0, 0.3, 0.7, 0.999, 1.0] {
                    let t = trace_values(&fam.level_class(u).unwrap(), &xs, 30).unwrap();
                    for f in &probes {
                        let m = xs
                            .iter()
                            .enumerate()
                            .filter(|(_, x)| f.eval(**x) > u)
                            .fold(0u128, |m, (i, _)| m | 1 << i);
                        assert!(t.contains(m), "{fam} u={u} {f:?}");
                    }
                }
                for f in &probes {
                    for x in &xs {
                        let v = f.eval(*x);
                        assert!(v.abs() <= fam.half_width() && (0.0..=1.0).contains(&v));
                    }
                }
            }
        }
    }
}
