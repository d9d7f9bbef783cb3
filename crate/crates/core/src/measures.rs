//! Valuation measures on the unit cake `[0, 1]`.
//!
//! A [`Valuation`] is a piecewise-constant density with rational breakpoints
//! and heights. Such measures are non-atomic, closed under exact evaluation
//! and exact cut inversion, and can concentrate mass wherever a test needs it.

use std::fmt;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::Rational;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeasureError {
    #[error("interval [{lo}, {hi}] is not a sub-interval of [0, 1]")]
    OutOfDomain { lo: Rational, hi: Rational },
    #[error("cut start {0} outside [0, 1]")]
    StartOutOfDomain(Rational),
    #[error("cut target {target} infeasible: remaining mass right of start is {remaining}")]
    InfeasibleCut { target: Rational, remaining: Rational },
    #[error("a valuation needs at least one segment")]
    NoSegments,
    #[error("invalid valuation: {0}")]
    Invalid(ValidationErrors),
}

/// A closed sub-interval `[lo, hi]` of the cake. Degenerate intervals with
/// `lo == hi` are allowed and carry no mass.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawInterval")]
pub struct Interval {
    lo: Rational,
    hi: Rational,
}

#[derive(Deserialize)]
struct RawInterval {
    lo: Rational,
    hi: Rational,
}

impl TryFrom<RawInterval> for Interval {
    type Error = MeasureError;
    fn try_from(raw: RawInterval) -> Result<Self, Self::Error> {
        Interval::new(raw.lo, raw.hi)
    }
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self, MeasureError> {
        if lo.is_negative() || hi > Rational::one() || lo > hi {
            return Err(MeasureError::OutOfDomain { lo, hi });
        }
        Ok(Interval { lo, hi })
    }

    /// The whole cake `[0, 1]`.
    pub fn unit() -> Self {
        Interval {
            lo: Rational::zero(),
            hi: Rational::one(),
        }
    }

    pub fn lo(&self) -> &Rational {
        &self.lo
    }

    pub fn hi(&self) -> &Rational {
        &self.hi
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo == self.hi
    }

    pub fn contains_point(&self, x: &Rational) -> bool {
        &self.lo <= x && x <= &self.hi
    }

    /// Splits at `x`, which must lie inside the interval.
    pub fn split_at(&self, x: &Rational) -> (Interval, Interval) {
        assert!(self.contains_point(x), "split point {x} outside {self}");
        (
            Interval {
                lo: self.lo.clone(),
                hi: x.clone(),
            },
            Interval {
                lo: x.clone(),
                hi: self.hi.clone(),
            },
        )
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// One problem found by [`validate_valuation`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    /// `heights.len()` must equal `breakpoints.len() - 1`.
    LengthMismatch { breakpoints: usize, heights: usize },
    FirstBreakpoint(Rational),
    LastBreakpoint(Rational),
    NotIncreasing { index: usize, value: Rational },
    NegativeHeight { index: usize, value: Rational },
    TotalMass(Rational),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LengthMismatch {
                breakpoints,
                heights,
            } => write!(
                f,
                "{breakpoints} breakpoints need {} heights, got {heights}",
                breakpoints.saturating_sub(1)
            ),
            Violation::FirstBreakpoint(v) => write!(f, "first breakpoint must be 0, got {v}"),
            Violation::LastBreakpoint(v) => write!(f, "last breakpoint must be 1, got {v}"),
            Violation::NotIncreasing { index, value } => {
                write!(f, "breakpoint {index} ({value}) does not strictly increase")
            }
            Violation::NegativeHeight { index, value } => {
                write!(f, "height {index} is negative ({value})")
            }
            Violation::TotalMass(m) => write!(f, "total mass is {m}, expected 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationErrors(pub Vec<Violation>);

impl fmt::Display for ValidationErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ValidationErrors {}

/// The on-disk form of a valuation: every number is a `"p/q"` string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValuationDoc {
    pub breakpoints: Vec<Rational>,
    pub heights: Vec<Rational>,
}

/// A validated probability measure with piecewise-constant density.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ValuationDoc", into = "ValuationDoc")]
pub struct Valuation {
    breakpoints: Vec<Rational>,
    heights: Vec<Rational>,
    /// `cumulative[k]` is the mass of `[0, breakpoints[k]]`.
    cumulative: Vec<Rational>,
}

impl fmt::Debug for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Valuation")
            .field("breakpoints", &self.breakpoints)
            .field("heights", &self.heights)
            .finish()
    }
}

impl TryFrom<ValuationDoc> for Valuation {
    type Error = ValidationErrors;
    fn try_from(doc: ValuationDoc) -> Result<Self, Self::Error> {
        validate_valuation(doc.breakpoints, doc.heights)
    }
}

impl From<Valuation> for ValuationDoc {
    fn from(v: Valuation) -> Self {
        ValuationDoc {
            breakpoints: v.breakpoints,
            heights: v.heights,
        }
    }
}

impl Valuation {
    pub fn uniform() -> Self {
        validate_valuation(vec![Rational::zero(), Rational::one()], vec![Rational::one()])
            .expect("uniform density is valid")
    }

    /// Density proportional to the indicator of `[lo, hi]`; `lo < hi` required.
    pub fn concentrated_on(lo: Rational, hi: Rational) -> Result<Self, MeasureError> {
        let iv = Interval::new(lo, hi)?;
        if iv.is_degenerate() {
            return Err(MeasureError::OutOfDomain {
                lo: iv.lo,
                hi: iv.hi,
            });
        }
        let height = iv.length().recip();
        let mut bps = vec![Rational::zero()];
        let mut hs = Vec::new();
        if !iv.lo.is_zero() {
            bps.push(iv.lo.clone());
            hs.push(Rational::zero());
        }
        bps.push(iv.hi.clone());
        hs.push(height);
        if iv.hi != Rational::one() {
            bps.push(Rational::one());
            hs.push(Rational::zero());
        }
        validate_valuation(bps, hs).map_err(MeasureError::Invalid)
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn heights(&self) -> &[Rational] {
        &self.heights
    }

    pub fn segments(&self) -> usize {
        self.heights.len()
    }

    /// Index of the segment containing `x`; the right end 1 maps to the last segment.
    fn segment_of(&self, x: &Rational) -> usize {
        let k = self.breakpoints.partition_point(|b| b <= x);
        k.saturating_sub(1).min(self.heights.len() - 1)
    }

    /// Mass of `[0, x]`.
    pub fn cdf(&self, x: &Rational) -> Rational {
        let k = self.segment_of(x);
        &self.cumulative[k] + &self.heights[k] * (x - &self.breakpoints[k])
    }
}

/// Exact measure of `iv` under `v`.
pub fn eval_measure(v: &Valuation, iv: &Interval) -> Rational {
    if iv.is_degenerate() {
        return Rational::zero();
    }
    v.cdf(&iv.hi) - v.cdf(&iv.lo)
}

/// Smallest `y >= start` with `eval_measure(v, [start, y]) == target`.
pub fn cut_point(v: &Valuation, start: &Rational, target: &Rational) -> Result<Rational, MeasureError> {
    if start.is_negative() || start > &Rational::one() {
        return Err(MeasureError::StartOutOfDomain(start.clone()));
    }
    let base = v.cdf(start);
    let remaining = Rational::one() - &base;
    if target.is_negative() || target > &remaining {
        return Err(MeasureError::InfeasibleCut {
            target: target.clone(),
            remaining,
        });
    }
    if target.is_zero() {
        return Ok(start.clone());
    }
    Ok(invert_cdf(v, base + target))
}

/// Smallest `y >= start` holding `share` of `v`'s value of `[start, end]`.
/// Same answer as `cut_point(v, start, share * eval_measure(v, [start, end]))`
/// with one fewer CDF evaluation.
pub fn cut_share_point(v: &Valuation, span: &Interval, share: &Rational) -> Result<Rational, MeasureError> {
    if share.is_negative() || share > &Rational::one() {
        return Err(MeasureError::InfeasibleCut {
            target: share.clone(),
            remaining: Rational::one(),
        });
    }
    let base = v.cdf(&span.lo);
    let mass = share * (v.cdf(&span.hi) - &base);
    if mass.is_zero() {
        return Ok(span.lo.clone());
    }
    Ok(invert_cdf(v, base + mass))
}

/// Leftmost `x` with `cdf(x) == goal`, for `goal` above the mass at `x`'s
/// start point.
fn invert_cdf(v: &Valuation, goal: Rational) -> Rational {
    // First breakpoint whose cumulative mass reaches the goal; the segment
    // before it has positive height and strictly crosses the goal.
    let i = v.cumulative.partition_point(|c| c < &goal);
    debug_assert!(i >= 1 && i < v.cumulative.len());
    let k = i - 1;
    &v.breakpoints[k] + (goal - &v.cumulative[k]) / &v.heights[k]
}

/// Checks every valuation invariant, collecting all violations.
pub fn validate_valuation(
    breakpoints: Vec<Rational>,
    heights: Vec<Rational>,
) -> Result<Valuation, ValidationErrors> {
    let mut violations = Vec::new();
    let shape_ok = breakpoints.len() >= 2 && heights.len() + 1 == breakpoints.len();
    if !shape_ok {
        violations.push(Violation::LengthMismatch {
            breakpoints: breakpoints.len(),
            heights: heights.len(),
        });
    }
    if let Some(first) = breakpoints.first() {
        if !first.is_zero() {
            violations.push(Violation::FirstBreakpoint(first.clone()));
        }
    }
    if let Some(last) = breakpoints.last() {
        if last != &Rational::one() {
            violations.push(Violation::LastBreakpoint(last.clone()));
        }
    }
    for (i, w) in breakpoints.windows(2).enumerate() {
        if w[1] <= w[0] {
            violations.push(Violation::NotIncreasing {
                index: i + 1,
                value: w[1].clone(),
            });
        }
    }
    for (i, h) in heights.iter().enumerate() {
        if h.is_negative() {
            violations.push(Violation::NegativeHeight {
                index: i,
                value: h.clone(),
            });
        }
    }
    let mut cumulative = Vec::with_capacity(breakpoints.len());
    if shape_ok {
        cumulative.push(Rational::zero());
        for (k, h) in heights.iter().enumerate() {
            let next = &cumulative[k] + h * (&breakpoints[k + 1] - &breakpoints[k]);
            cumulative.push(next);
        }
        let total = cumulative.last().expect("non-empty");
        if total != &Rational::one() {
            violations.push(Violation::TotalMass(total.clone()));
        }
    }
    if violations.is_empty() {
        Ok(Valuation {
            breakpoints,
            heights,
            cumulative,
        })
    } else {
        Err(ValidationErrors(violations))
    }
}

/// Deterministic random valuation with `segments` pieces.
///
/// Breakpoints sit on a grid of `12 * segments` steps; segment weights are
/// integers in `0..=9` (at least one positive), normalized exactly. Zero
/// weights are deliberate: they produce flat stretches that exercise the
/// leftmost cut rule and degenerate pieces.
pub fn random_valuation(seed: u64, segments: usize) -> Result<Valuation, MeasureError> {
    if segments == 0 {
        return Err(MeasureError::NoSegments);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = 12 * segments;
    let mut interior: Vec<usize> = index::sample(&mut rng, grid - 1, segments - 1)
        .into_iter()
        .map(|i| i + 1)
        .collect();
    interior.sort_unstable();
    let mut breakpoints = vec![Rational::zero()];
    breakpoints.extend(interior.iter().map(|&i| Rational::new(i as i64, grid as i64)));
    breakpoints.push(Rational::one());

    let mut weights: Vec<i64> = (0..segments).map(|_| rng.random_range(0..=9)).collect();
    if weights.iter().all(|&w| w == 0) {
        let k = rng.random_range(0..segments);
        weights[k] = 1 + rng.random_range(0..9);
    }
    let raw_mass: Rational = weights
        .iter()
        .zip(breakpoints.windows(2))
        .map(|(&w, b)| Rational::from_integer(w) * (&b[1] - &b[0]))
        .sum();
    let heights = weights
        .iter()
        .map(|&w| Rational::from_integer(w) / &raw_mass)
        .collect();
    validate_valuation(breakpoints, heights).map_err(MeasureError::Invalid)
}
