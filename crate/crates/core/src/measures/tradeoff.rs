use std::cmp::Ordering;

use num::{BigRational, One, Signed, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::distribution::{joint_support, to_f64};
use super::{FiniteDistribution, MeasureError};

/// Piecewise-linear trade-off curve on `[0, 1]` given by exact breakpoints.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TradeoffFunction {
    points: Vec<(BigRational, BigRational)>,
}

impl TradeoffFunction {
    pub fn from_points(points: Vec<(BigRational, BigRational)>) -> Result<Self, MeasureError> {
        let bad = |why: &str| Err(MeasureError::InvalidTradeoff(why.to_owned()));
        let zero = BigRational::zero();
        let one = BigRational::one();
        let (Some(first), Some(last)) = (points.first(), points.last()) else {
            return bad("no breakpoints");
        };
        if first.0 != zero || last.0 != one || !last.1.is_zero() {
            return bad("curve must start at alpha 0 and end at (1, 0)");
        }
        for (a, b) in &points {
            if b.is_negative() || *b > &one - a || a.is_negative() || *a > one {
                return bad("breakpoint outside 0 <= beta <= 1 - alpha");
            }
        }
        for w in points.windows(2) {
            let ((a0, b0), (a1, b1)) = (&w[0], &w[1]);
            if a1 < a0 || b1 > b0 {
                return bad("breakpoints must be sorted and non-increasing");
            }
            if a1 == a0 && !a0.is_zero() {
                return bad("vertical segment away from alpha 0");
            }
        }
        let f = Self::normalized(points);
        let slopes: Vec<BigRational> = f
            .points
            .windows(2)
            .filter(|w| w[1].0 > w[0].0)
            .map(|w| (&w[1].1 - &w[0].1) / (&w[1].0 - &w[0].0))
            .collect();
        if slopes.windows(2).any(|s| s[1] < s[0]) {
            return bad("curve is not convex");
        }
        Ok(f)
    }

    /// Drops repeated points and interior points on a straight segment.
    /// Several points at `α = 0` collapse to the lowest, keeping the curve continuous.
    fn normalized(points: Vec<(BigRational, BigRational)>) -> Self {
        let mut out: Vec<(BigRational, BigRational)> = Vec::with_capacity(points.len());
        for p in points {
            if out.last() == Some(&p) {
                continue;
            }
            if p.0.is_zero() && out.last().is_some_and(|l| l.0.is_zero()) {
                out.pop();
            }
            while out.len() >= 2 {
                let (a, b) = (&out[out.len() - 2], &out[out.len() - 1]);
                let collinear = b.0 > a.0
                    && p.0 > b.0
                    && (&b.1 - &a.1) * (&p.0 - &b.0) == (&p.1 - &b.1) * (&b.0 - &a.0);
                if collinear {
                    out.pop();
                } else {
                    break;
                }
            }
            out.push(p);
        }
        Self { points: out }
    }

    pub fn points(&self) -> &[(BigRational, BigRational)] {
        &self.points
    }

    /// `f(α)` for `α ∈ [0, 1]`.
    pub fn value_at(&self, alpha: &BigRational) -> BigRational {
        if !alpha.is_positive() {
            return self.points[0].1.clone();
        }
        for w in self.points.windows(2) {
            let ((a0, b0), (a1, b1)) = (&w[0], &w[1]);
            if a0 < alpha && alpha <= a1 {
                return b0 + (b1 - b0) * (alpha - a0) / (a1 - a0);
            }
        }
        BigRational::zero()
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        match BigRational::from_float(alpha.clamp(0.0, 1.0)) {
            Some(a) => to_f64(&self.value_at(&a)),
            None => f64::NAN,
        }
    }

    /// Pairs `(f(α), g(α))` on every breakpoint of either curve.
    fn aligned<'a>(&'a self, other: &'a Self) -> Vec<(BigRational, BigRational)> {
        let mut alphas: Vec<&BigRational> = self
            .points
            .iter()
            .chain(&other.points)
            .map(|(a, _)| a)
            .filter(|a| a.is_positive())
            .collect();
        alphas.sort();
        alphas.dedup();
        let mut out = vec![(self.points[0].1.clone(), other.points[0].1.clone())];
        out.extend(alphas.into_iter().map(|a| (self.value_at(a), other.value_at(a))));
        out
    }

    /// `self ⪯ other`: `self` lies pointwise on or above `other`.
    pub fn leq(&self, other: &Self) -> bool {
        self.aligned(other).iter().all(|(f, g)| f >= g)
    }

    /// `max_α other(α) − self(α)`; positive when `self` dips below `other`.
    pub fn max_shortfall(&self, other: &Self) -> f64 {
        self.aligned(other)
            .iter()
            .map(|(f, g)| to_f64(&(g - f)))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Serialize, Deserialize)]
struct TradeoffRepr {
    pts: Vec<(f64, f64)>,
}

impl Serialize for TradeoffFunction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        TradeoffRepr {
            pts: self.points.iter().map(|(a, b)| (to_f64(a), to_f64(b))).collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for TradeoffFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let repr = TradeoffRepr::deserialize(d)?;
        let mut pts = Vec::with_capacity(repr.pts.len());
        for (a, b) in repr.pts {
            match (BigRational::from_float(a), BigRational::from_float(b)) {
                (Some(a), Some(b)) => pts.push((a, b)),
                _ => return Err(serde::de::Error::custom("non-finite breakpoint")),
            }
        }
        TradeoffFunction::from_points(pts).map_err(serde::de::Error::custom)
    }
}

/// Exact optimal trade-off between `p` (null) and `q` (alternative).
pub fn tradeoff_of(p: &FiniteDistribution, q: &FiniteDistribution) -> TradeoffFunction {
    let mut cells: Vec<(BigRational, BigRational)> = joint_support(p, q)
        .into_iter()
        .map(|x| (p.prob(x), q.prob(x)))
        .collect();
    // likelihood ratio q/p descending, p = 0 first
    cells.sort_by(|(p1, q1), (p2, q2)| match (p1.is_zero(), p2.is_zero()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Less,
        (false, true) => Ordering::Greater,
        (false, false) => (q2 * p1).cmp(&(q1 * p2)),
    });
    let mut a = BigRational::zero();
    let mut b = BigRational::one();
    let mut pts = vec![(a.clone(), b.clone())];
    for (px, qx) in cells {
        a += px;
        b -= qx;
        pts.push((a.clone(), b.clone()));
    }
    TradeoffFunction::normalized(pts)
}

/// `f_{ε,δ}(α) = max{0, 1 − δ − e^ε α, e^{−ε}(1 − δ − α)}`.
pub fn fdp_curve(eps: f64, delta: f64) -> Result<TradeoffFunction, MeasureError> {
    if eps.is_nan() || eps < 0.0 || !(0.0..=1.0).contains(&delta) {
        return Err(MeasureError::InvalidParameter(format!(
            "f-DP curve needs eps >= 0 and delta in [0, 1], got ({eps}, {delta})"
        )));
    }
    let zero = BigRational::zero();
    let one = BigRational::one();
    let top = &one - BigRational::from_float(delta).expect("finite delta");
    let pts = if eps.is_infinite() {
        vec![(zero.clone(), top), (zero.clone(), zero.clone()), (one, zero)]
    } else {
        let e = BigRational::from_float(eps.exp()).ok_or_else(|| {
            MeasureError::InvalidParameter(format!("e^{eps} is not finite"))
        })?;
        let knee = &top / (&one + e);
        vec![
            (zero.clone(), top.clone()),
            (knee.clone(), knee),
            (top, zero.clone()),
            (one, zero),
        ]
    };
    Ok(TradeoffFunction::normalized(pts))
}
