//! Realized samples, their generating laws, and exact interval probabilities.

use std::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A (possibly unbounded, possibly empty) interval of the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub const EMPTY: Interval = Interval {
        lo: 0.0,
        hi: 0.0,
        lo_closed: false,
        hi_closed: false,
    };

    pub const REALS: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
        lo_closed: false,
        hi_closed: false,
    };

    pub const UNIT: Interval = Interval {
        lo: 0.0,
        hi: 1.0,
        lo_closed: true,
        hi_closed: true,
    };

    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Self {
        Self {
            lo,
            hi,
            lo_closed: lo_closed && lo.is_finite(),
            hi_closed: hi_closed && hi.is_finite(),
        }
    }

    pub fn closed(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, true, true)
    }

    pub fn open(lo: f64, hi: f64) -> Self {
        Self::new(lo, hi, false, false)
    }

    /// `{x > a}` or `{x ≥ a}`.
    pub fn above(a: f64, closed: bool) -> Self {
        Self::new(a, f64::INFINITY, closed, false)
    }

    /// `{x < a}` or `{x ≤ a}`.
    pub fn below(a: f64, closed: bool) -> Self {
        Self::new(f64::NEG_INFINITY, a, false, closed)
    }

    pub fn is_empty(&self) -> bool {
        match self.lo.partial_cmp(&self.hi) {
            Some(Ordering::Less) => false,
            Some(Ordering::Equal) => !(self.lo_closed && self.hi_closed),
            _ => true,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        let above = if self.lo_closed { x >= self.lo } else { x > self.lo };
        let below = if self.hi_closed { x <= self.hi } else { x < self.hi };
        above && below
    }

    pub fn length(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.hi - self.lo
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        let (lo, lo_closed) = match self.lo.partial_cmp(&other.lo) {
            Some(Ordering::Greater) => (self.lo, self.lo_closed),
            Some(Ordering::Less) => (other.lo, other.lo_closed),
            _ => (self.lo, self.lo_closed && other.lo_closed),
        };
        let (hi, hi_closed) = match self.hi.partial_cmp(&other.hi) {
            Some(Ordering::Less) => (self.hi, self.hi_closed),
            Some(Ordering::Greater) => (other.hi, other.hi_closed),
            _ => (self.hi, self.hi_closed && other.hi_closed),
        };
        Interval::new(lo, hi, lo_closed, hi_closed)
    }
}

/// Law of a single observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Distribution {
    /// Uniform on `[0, 1]`.
    Uniform,
    /// Finitely many atoms with the given probabilities.
    Discrete { atoms: Vec<f64>, probs: Vec<f64> },
    /// Piecewise-linear quantile function through `(probs[k], values[k])`;
    /// `probs` runs from 0 to 1 and `values` is nondecreasing. Flat pieces
    /// of the quantile function are atoms.
    Quantile { probs: Vec<f64>, values: Vec<f64> },
}

impl Distribution {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidDistribution(msg.into()));
        match self {
            Self::Uniform => Ok(()),
            Self::Discrete { atoms, probs } => {
                if atoms.is_empty() || atoms.len() != probs.len() {
                    return bad("discrete law needs as many probabilities as atoms (at least one)");
                }
                if atoms.iter().any(|a| !a.is_finite()) {
                    return bad("atoms must be finite");
                }
                if probs.iter().any(|p| !(*p >= 0.0)) {
                    return bad("probabilities must be nonnegative");
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 {
                    return bad("probabilities must sum to 1");
                }
                Ok(())
            }
            Self::Quantile { probs, values } => {
                if probs.len() < 2 || probs.len() != values.len() {
                    return bad("quantile table needs at least two matching knots");
                }
                if probs[0] != 0.0 || probs[probs.len() - 1] != 1.0 {
                    return bad("quantile probabilities must start at 0 and end at 1");
                }
                if probs.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("quantile probabilities must be strictly increasing");
                }
                if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[1] < w[0]) {
                    return bad("quantile values must be finite and nondecreasing");
                }
                Ok(())
            }
        }
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, Self::Uniform)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        match self {
            Self::Uniform => u,
            Self::Discrete { atoms, probs } => {
                let mut acc = 0.0;
                for (a, p) in atoms.iter().zip(probs) {
                    acc += p;
                    if u < acc {
                        return *a;
                    }
                }
                // Rounding left a sliver above the last cumulative sum.
                let last = probs.iter().rposition(|p| *p > 0.0).unwrap_or(atoms.len() - 1);
                atoms[last]
            }
            Self::Quantile { probs, values } => {
                let k = probs.partition_point(|p| *p <= u).clamp(1, probs.len() - 1);
                let t = (u - probs[k - 1]) / (probs[k] - probs[k - 1]);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }

    /// `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            Self::Uniform => x.clamp(0.0, 1.0),
            Self::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(a, _)| **a <= x)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
            Self::Quantile { probs, values } => {
                let last = values.len() - 1;
                if x < values[0] {
                    return 0.0;
                }
                // Largest knot whose value is <= x.
                let s = values.partition_point(|v| *v <= x) - 1;
                if s == last {
                    return 1.0;
                }
                let t = (x - values[s]) / (values[s + 1] - values[s]);
                probs[s] + t * (probs[s + 1] - probs[s])
            }
        }
    }

    /// `P(X < x)`.
    pub fn cdf_left(&self, x: f64) -> f64 {
        match self {
            Self::Uniform => x.clamp(0.0, 1.0),
            Self::Discrete { atoms, probs } => atoms
                .iter()
                .zip(probs)
                .filter(|(a, _)| **a < x)
                .map(|(_, p)| p)
                .sum::<f64>()
                .min(1.0),
            Self::Quantile { probs, values } => {
                // Smallest knot whose value is >= x.
                let t = values.partition_point(|v| *v < x);
                if t == 0 {
                    return 0.0;
                }
                if t == values.len() {
                    return 1.0;
                }
                let w = (x - values[t - 1]) / (values[t] - values[t - 1]);
                probs[t - 1] + w * (probs[t] - probs[t - 1])
            }
        }
    }

    /// `P(X ∈ I)`.
    pub fn prob(&self, i: &Interval) -> f64 {
        if i.is_empty() {
            return 0.0;
        }
        let upper = if i.hi_closed { self.cdf(i.hi) } else { self.cdf_left(i.hi) };
        let lower = if i.lo_closed { self.cdf_left(i.lo) } else { self.cdf(i.lo) };
        (upper - lower).max(0.0)
    }
}

/// Joint law of `X_1, …, X_n`: i.i.d. or independent with per-index laws.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SampleLaw {
    Iid(Distribution),
    Independent(Vec<Distribution>),
}

impl SampleLaw {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            Self::Iid(d) => d.validate(),
            Self::Independent(ds) => {
                if ds.len() != n {
                    return Err(Error::InvalidDistribution(format!(
                        "{} per-index laws for a sample of size {n}",
                        ds.len()
                    )));
                }
                ds.iter().try_for_each(Distribution::validate)
            }
        }
    }

    pub fn is_iid(&self) -> bool {
        matches!(self, Self::Iid(_))
    }

    pub fn is_uniform(&self) -> bool {
        match self {
            Self::Iid(d) => d.is_uniform(),
            Self::Independent(ds) => ds.iter().all(Distribution::is_uniform),
        }
    }

    pub fn law(&self, i: usize) -> &Distribution {
        match self {
            Self::Iid(d) => d,
            Self::Independent(ds) => &ds[i],
        }
    }

    /// `Σ_i P(X_i ∈ I)` over a sample of size `n`.
    pub fn mass(&self, n: usize, i: &Interval) -> f64 {
        match self {
            Self::Iid(d) => n as f64 * d.prob(i),
            Self::Independent(ds) => ds.iter().map(|d| d.prob(i)).sum(),
        }
    }
}

/// A realized sample together with the law it was drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    values: Vec<f64>,
    law: SampleLaw,
}

impl Sample {
    pub fn new(values: Vec<f64>, law: SampleLaw) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        if let Some(x) = values.iter().find(|x| !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample value {x} is not finite")));
        }
        law.validate(values.len())?;
        Ok(Self { values, law })
    }

    /// Shorthand for an i.i.d. uniform sample with the given values.
    pub fn uniform(values: Vec<f64>) -> Result<Self> {
        Self::new(values, SampleLaw::Iid(Distribution::Uniform))
    }

    pub fn draw<R: Rng + ?Sized>(law: &SampleLaw, n: usize, rng: &mut R) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySample);
        }
        law.validate(n)?;
        let values = (0..n).map(|i| law.law(i).sample(rng)).collect();
        Ok(Self {
            values,
            law: law.clone(),
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn law(&self) -> &SampleLaw {
        &self.law
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_iid(&self) -> bool {
        self.law.is_iid()
    }

    pub fn mass(&self, i: &Interval) -> f64 {
        self.law.mass(self.values.len(), i)
    }

    pub fn grouped(&self) -> Grouped {
        Grouped::new(&self.values)
    }
}

/// Sample indices sorted by value, with equal values gathered into groups.
#[derive(Debug, Clone, PartialEq)]
pub struct Grouped {
    /// Distinct values in increasing order.
    pub values: Vec<f64>,
    /// Group `g` holds `order[starts[g]..starts[g + 1]]`.
    pub starts: Vec<usize>,
    pub order: Vec<usize>,
}

impl Grouped {
    pub fn new(xs: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.sort_by(|a, b| xs[*a].total_cmp(&xs[*b]).then(a.cmp(b)));
        let mut values = Vec::new();
        let mut starts = Vec::new();
        for (pos, &i) in order.iter().enumerate() {
            if values.last() != Some(&xs[i]) {
                values.push(xs[i]);
                starts.push(pos);
            }
        }
        starts.push(order.len());
        Self {
            values,
            starts,
            order,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn members(&self, g: usize) -> &[usize] {
        &self.order[self.starts[g]..self.starts[g + 1]]
    }

    pub fn count(&self, g: usize) -> usize {
        self.starts[g + 1] - self.starts[g]
    }

    /// Per-group sums of `w`, as prefix sums of length `len() + 1`.
    pub fn prefix_sums(&self, w: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.len() + 1);
        let mut acc = 0.0;
        out.push(acc);
        for g in 0..self.len() {
            acc += self.members(g).iter().map(|i| w[*i]).sum::<f64>();
            out.push(acc);
        }
        out
    }

    /// Bitmask of the sample indices in group `g`.
    pub fn mask(&self, g: usize) -> u128 {
        self.members(g).iter().fold(0, |m, i| m | 1u128 << i)
    }
}
