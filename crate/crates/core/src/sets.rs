//! Interval-shaped set classes on the real line and their traces on a sample.
//!
//! Every class handled here has members that are intervals (possibly
//! unbounded, possibly intersected with `[0, 1]`), so the trace of a member
//! on a sample is a run `j..=k` of consecutive value groups. A class is
//! described by which runs it realizes and, for each run, the smallest and
//! largest member producing it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sample::{Grouped, Interval, Sample};

/// Default ceiling on the sample size for bitmask trace enumeration.
pub const DEFAULT_TRACE_CAP: usize = 30;
/// Hard ceiling imposed by the `u128` encoding.
pub const MAX_TRACE_CAP: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Shape {
    /// `{∅}`.
    Empty,
    /// `{ℝ}`.
    Whole,
    /// `{x > a}` and `{x ≥ a}`, `a ∈ [-∞, ∞]`.
    Upper,
    /// `{x < a}` and `{x ≤ a}`.
    Lower,
    /// Upper and lower half-lines together.
    HalfLines,
    /// All intervals, open, closed or half-open.
    Intervals,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetClass {
    pub shape: Shape,
    /// Longest admissible member, in x-units (intervals only).
    pub max_length: Option<f64>,
    /// Members are intersected with `[0, 1]`.
    pub within_unit: bool,
}

/// A realizable trace: the run of groups `span = Some((j, k))` (or the empty
/// trace) together with the smallest and the largest class member cutting it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub span: Option<(usize, usize)>,
    pub min_set: Interval,
    pub max_set: Interval,
}

impl SetClass {
    pub const EMPTY: SetClass = SetClass::of(Shape::Empty);
    pub const WHOLE: SetClass = SetClass::of(Shape::Whole);

    pub const fn of(shape: Shape) -> Self {
        Self {
            shape,
            max_length: None,
            within_unit: false,
        }
    }

    pub fn intervals(max_length: Option<f64>) -> Self {
        Self {
            shape: Shape::Intervals,
            max_length,
            within_unit: false,
        }
    }

    pub fn within_unit(mut self) -> Self {
        self.within_unit = true;
        self
    }

    fn cap(&self) -> f64 {
        match self.shape {
            Shape::Intervals => self.max_length.unwrap_or(f64::INFINITY),
            _ => f64::INFINITY,
        }
    }

    fn universe(&self) -> Interval {
        if self.within_unit {
            Interval::UNIT
        } else {
            Interval::REALS
        }
    }

    /// Groups whose values lie in the universe: a contiguous range.
    fn active(&self, g: &Grouped) -> (usize, usize) {
        if self.within_unit {
            let a = g.values.partition_point(|v| *v < 0.0);
            let b = g.values.partition_point(|v| *v <= 1.0);
            (a, b)
        } else {
            (0, g.len())
        }
    }

    pub fn contains_set(&self, set: &Interval) -> bool {
        if self.shape == Shape::Whole {
            return *set == Interval::REALS;
        }
        let u = self.universe();
        let s = set.intersect(&u);
        if s.is_empty() {
            return true;
        }
        let touches_lo = s.lo == u.lo && s.lo_closed == u.lo_closed;
        let touches_hi = s.hi == u.hi && s.hi_closed == u.hi_closed;
        match self.shape {
            Shape::Empty | Shape::Whole => false,
            Shape::Upper => touches_hi,
            Shape::Lower => touches_lo,
            Shape::HalfLines => touches_lo || touches_hi,
            Shape::Intervals => s.length() <= self.cap(),
        }
    }

    /// Visits every realizable trace. Runs may be visited more than once
    /// (e.g. the whole sample for [`Shape::HalfLines`]) and the empty trace
    /// once per maximal empty member.
    // Window indices name the span as well as the value; ranges read better.
    #[allow(clippy::needless_range_loop)]
    pub fn visit(&self, g: &Grouped, mut f: impl FnMut(Window)) {
        let u = self.universe();
        let (a, b) = self.active(g);
        let v = &g.values;
        let left_of = |j: usize| {
            if j > a {
                Interval::above(v[j - 1], false).intersect(&u)
            } else {
                u
            }
        };
        let right_of = |k: usize| {
            if k + 1 < b {
                Interval::below(v[k + 1], false).intersect(&u)
            } else {
                u
            }
        };
        let empty = |max_set: Interval| Window {
            span: None,
            min_set: Interval::EMPTY,
            max_set,
        };
        match self.shape {
            Shape::Empty => f(empty(Interval::EMPTY)),
            Shape::Whole => {
                if g.is_empty() {
                    f(empty(Interval::REALS));
                } else {
                    f(Window {
                        span: Some((0, g.len() - 1)),
                        min_set: Interval::REALS,
                        max_set: Interval::REALS,
                    });
                }
            }
            Shape::Upper | Shape::Lower | Shape::HalfLines => {
                let upper = matches!(self.shape, Shape::Upper | Shape::HalfLines);
                let lower = matches!(self.shape, Shape::Lower | Shape::HalfLines);
                if upper {
                    for j in a..b {
                        f(Window {
                            span: Some((j, b - 1)),
                            min_set: Interval::above(v[j], true).intersect(&u),
                            max_set: left_of(j),
                        });
                    }
                    f(empty(if b > a {
                        Interval::above(v[b - 1], false).intersect(&u)
                    } else {
                        u
                    }));
                }
                if lower {
                    for k in a..b {
                        f(Window {
                            span: Some((a, k)),
                            min_set: Interval::below(v[k], true).intersect(&u),
                            max_set: right_of(k),
                        });
                    }
                    f(empty(if b > a {
                        Interval::below(v[a], false).intersect(&u)
                    } else {
                        u
                    }));
                }
            }
            Shape::Intervals => {
                let cap = self.cap();
                for j in a..b {
                    for k in j..b {
                        if v[k] - v[j] > cap {
                            break;
                        }
                        f(Window {
                            span: Some((j, k)),
                            min_set: Interval::closed(v[j], v[k]),
                            max_set: left_of(j).intersect(&right_of(k)),
                        });
                    }
                }
                if b == a {
                    f(empty(u));
                } else {
                    f(empty(Interval::below(v[a], false).intersect(&u)));
                    for j in a..b - 1 {
                        f(empty(Interval::open(v[j], v[j + 1])));
                    }
                    f(empty(Interval::above(v[b - 1], false).intersect(&u)));
                }
            }
        }
    }

    /// Number of distinct traces on the grouped sample, without enumeration.
    pub fn count_traces(&self, g: &Grouped) -> u128 {
        let (a, b) = self.active(g);
        let m = (b - a) as u128;
        match self.shape {
            Shape::Empty | Shape::Whole => 1,
            Shape::Upper | Shape::Lower => m + 1,
            Shape::HalfLines => (2 * m).max(1),
            Shape::Intervals => {
                let cap = self.cap();
                let v = &g.values;
                let mut total: u128 = 1;
                let mut k = a;
                for j in a..b {
                    if k < j {
                        k = j;
                    }
                    while k + 1 < b && v[k + 1] - v[j] <= cap {
                        k += 1;
                    }
                    total += (k - j + 1) as u128;
                }
                total
            }
        }
    }

    /// Minimum and maximum of `Σ_{i ∈ C} w_i` over members `C`, in `O(n)`
    /// except for length-capped intervals.
    pub fn sum_range(&self, g: &Grouped, w: &[f64]) -> (f64, f64) {
        let s = g.prefix_sums(w);
        let (a, b) = self.active(g);
        let run = |j: usize, k: usize| s[k + 1] - s[j];
        let mut lo: f64 = 0.0;
        let mut hi: f64 = 0.0;
        match self.shape {
            Shape::Empty => {}
            Shape::Whole => {
                let t = s[g.len()];
                return (t, t);
            }
            Shape::Upper | Shape::Lower | Shape::HalfLines => {
                if matches!(self.shape, Shape::Upper | Shape::HalfLines) {
                    for j in a..b {
                        let x = run(j, b - 1);
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
                if matches!(self.shape, Shape::Lower | Shape::HalfLines) {
                    for k in a..b {
                        let x = run(a, k);
                        lo = lo.min(x);
                        hi = hi.max(x);
                    }
                }
            }
            Shape::Intervals => match self.max_length {
                None => {
                    // Kadane in both directions; the empty run keeps 0 in range.
                    let (mut best_hi, mut best_lo) = (0.0f64, 0.0f64);
                    for gi in a..b {
                        let x = run(gi, gi);
                        best_hi = (best_hi + x).max(x).max(0.0);
                        best_lo = (best_lo + x).min(x).min(0.0);
                        hi = hi.max(best_hi);
                        lo = lo.min(best_lo);
                    }
                }
                Some(cap) => {
                    let v = &g.values;
                    for j in a..b {
                        for k in j..b {
                            if v[k] - v[j] > cap {
                                break;
                            }
                            let x = run(j, k);
                            lo = lo.min(x);
                            hi = hi.max(x);
                        }
                    }
                }
            },
        }
        (lo, hi)
    }

    /// Draws a random member whose endpoints are either uniform on
    /// `[-0.25, 1.25]` or, half of the time, snapped to a point of `snap`.
    pub fn random_member<R: Rng + ?Sized>(&self, rng: &mut R, snap: &[f64]) -> Interval {
        let end = |rng: &mut R| {
            if !snap.is_empty() && rng.random_bool(0.5) {
                snap[rng.random_range(0..snap.len())]
            } else {
                rng.random_range(-0.25..1.25)
            }
        };
        if self.shape == Shape::Whole {
            return Interval::REALS;
        }
        let u = self.universe();
        let set = match self.shape {
            Shape::Empty | Shape::Whole => Interval::EMPTY,
            Shape::Upper => Interval::above(end(rng), rng.random_bool(0.5)),
            Shape::Lower => Interval::below(end(rng), rng.random_bool(0.5)),
            Shape::HalfLines => {
                if rng.random_bool(0.5) {
                    Interval::above(end(rng), rng.random_bool(0.5))
                } else {
                    Interval::below(end(rng), rng.random_bool(0.5))
                }
            }
            Shape::Intervals => {
                let lo = end(rng);
                let hi = if rng.random_bool(0.5) { end(rng) } else { lo + rng.random_range(0.0..0.5) };
                let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
                let hi = match self.max_length {
                    // Shrunk a hair so rounding cannot push the length past the cap.
                    Some(cap) => hi.min(lo + cap * (1.0 - 1e-12)),
                    None => hi,
                };
                Interval::new(lo, hi, rng.random_bool(0.5), rng.random_bool(0.5))
            }
        };
        set.intersect(&u)
    }
}

/// The distinct traces `{ {i : X_i ∈ C} : C ∈ class }` as index bitmasks.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSet {
    pub n: usize,
    /// Sorted, without duplicates.
    pub masks: Vec<u128>,
}

impl TraceSet {
    pub fn from_masks(n: usize, mut masks: Vec<u128>) -> Result<Self> {
        check_cap(n, MAX_TRACE_CAP)?;
        if masks.is_empty() {
            return Err(Error::EmptySet);
        }
        let full = full_mask(n);
        if let Some(m) = masks.iter().find(|m| **m & !full != 0) {
            return Err(Error::InvalidArgument(format!(
                "trace {m:#b} has bits outside the {n} sample indices"
            )));
        }
        masks.sort_unstable();
        masks.dedup();
        Ok(Self { n, masks })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn contains(&self, mask: u128) -> bool {
        self.masks.binary_search(&mask).is_ok()
    }
}

pub fn full_mask(n: usize) -> u128 {
    if n >= 128 {
        u128::MAX
    } else {
        (1u128 << n) - 1
    }
}

pub(crate) fn check_cap(n: usize, cap: usize) -> Result<()> {
    let cap = cap.min(MAX_TRACE_CAP);
    if n > cap {
        Err(Error::TraceCap { n, cap })
    } else {
        Ok(())
    }
}

/// Traces of `class` on `sample`, refusing samples larger than `cap`.
pub fn trace_with_cap(class: &SetClass, sample: &Sample, cap: usize) -> Result<TraceSet> {
    trace_values(class, sample.values(), cap)
}

/// [`trace_with_cap`] with [`DEFAULT_TRACE_CAP`].
pub fn trace(class: &SetClass, sample: &Sample) -> Result<TraceSet> {
    trace_with_cap(class, sample, DEFAULT_TRACE_CAP)
}

pub fn trace_values(class: &SetClass, xs: &[f64], cap: usize) -> Result<TraceSet> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    check_cap(xs.len(), cap)?;
    let g = Grouped::new(xs);
    let gm: Vec<u128> = (0..g.len()).map(|k| g.mask(k)).collect();
    let mut masks = Vec::new();
    class.visit(&g, |w| {
        masks.push(match w.span {
            Some((j, k)) => gm[j..=k].iter().fold(0, |m, x| m | x),
            None => 0,
        })
    });
    TraceSet::from_masks(xs.len(), masks)
}
