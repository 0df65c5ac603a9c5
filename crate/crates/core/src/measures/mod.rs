//! Privacy-loss values, their partial orders, and divergences between finite
//! distributions.

mod distribution;
mod divergence;
mod tradeoff;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::wire::{Reader, Writer};

pub use distribution::FiniteDistribution;
pub use divergence::{hockey_stick, renyi_divergence, zcdp_distance};
pub use tradeoff::{fdp_curve, tradeoff_of, TradeoffFunction};

pub(crate) use distribution::ln_rational;

/// Orders used for zCDP distances and for declared Rényi losses.
pub const DEFAULT_ALPHA_GRID: [f64; 7] = [1.25, 1.5, 2.0, 4.0, 8.0, 16.0, 64.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("cannot compare {left} with {right}")]
    IncomparableTags { left: String, right: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid trade-off function: {0}")]
    InvalidTradeoff(String),
}

/// A privacy-loss value. `ApproxDp { eps: ∞, delta: ∞ }` is the top element
/// reported by overflowing accumulators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LossRepr", into = "LossRepr")]
pub enum LossValue {
    ApproxDp { eps: f64, delta: f64 },
    Renyi { alpha: f64, eps: f64 },
    Zcdp { rho: f64 },
    Tradeoff(TradeoffFunction),
}

/// Comparison class of a loss value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LossTag {
    ApproxDp,
    Renyi(f64),
    Zcdp,
    Tradeoff,
}

impl fmt::Display for LossTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossTag::ApproxDp => f.write_str("approx-DP"),
            LossTag::Renyi(a) => write!(f, "Renyi order {a}"),
            LossTag::Zcdp => f.write_str("zCDP"),
            LossTag::Tradeoff => f.write_str("trade-off"),
        }
    }
}

fn nonneg(name: &str, v: f64) -> Result<(), MeasureError> {
    if v.is_nan() || v < 0.0 {
        Err(MeasureError::InvalidParameter(format!("{name} must be >= 0, got {v}")))
    } else {
        Ok(())
    }
}

impl LossValue {
    pub fn approx(eps: f64, delta: f64) -> Result<Self, MeasureError> {
        nonneg("eps", eps)?;
        if !((0.0..=1.0).contains(&delta) || delta == f64::INFINITY) {
            return Err(MeasureError::InvalidParameter(format!(
                "delta must lie in [0, 1], got {delta}"
            )));
        }
        Ok(LossValue::ApproxDp { eps, delta })
    }

    pub fn renyi(alpha: f64, eps: f64) -> Result<Self, MeasureError> {
        if !(alpha > 1.0 && alpha.is_finite()) {
            return Err(MeasureError::InvalidParameter(format!(
                "Renyi order must be finite and > 1, got {alpha}"
            )));
        }
        nonneg("eps", eps)?;
        Ok(LossValue::Renyi { alpha, eps })
    }

    pub fn zcdp(rho: f64) -> Result<Self, MeasureError> {
        nonneg("rho", rho)?;
        Ok(LossValue::Zcdp { rho })
    }

    pub fn tradeoff(f: TradeoffFunction) -> Self {
        LossValue::Tradeoff(f)
    }

    pub fn approx_top() -> Self {
        LossValue::ApproxDp {
            eps: f64::INFINITY,
            delta: f64::INFINITY,
        }
    }

    pub fn tag(&self) -> LossTag {
        match self {
            LossValue::ApproxDp { .. } => LossTag::ApproxDp,
            LossValue::Renyi { alpha, .. } => LossTag::Renyi(*alpha),
            LossValue::Zcdp { .. } => LossTag::Zcdp,
            LossValue::Tradeoff(_) => LossTag::Tradeoff,
        }
    }

    /// Zero element of this value's tag.
    pub fn zero_like(&self) -> LossValue {
        match self {
            LossValue::ApproxDp { .. } => LossValue::ApproxDp { eps: 0.0, delta: 0.0 },
            LossValue::Renyi { alpha, .. } => LossValue::Renyi { alpha: *alpha, eps: 0.0 },
            LossValue::Zcdp { .. } => LossValue::Zcdp { rho: 0.0 },
            LossValue::Tradeoff(_) => LossValue::Tradeoff(fdp_curve(0.0, 0.0).expect("identity curve")),
        }
    }

    pub fn is_zero(&self) -> bool {
        *self == self.zero_like()
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            LossValue::ApproxDp { eps, delta } => {
                w.u8(1);
                w.f64(*eps);
                w.f64(*delta);
            }
            LossValue::Renyi { alpha, eps } => {
                w.u8(2);
                w.f64(*alpha);
                w.f64(*eps);
            }
            LossValue::Zcdp { rho } => {
                w.u8(3);
                w.f64(*rho);
            }
            LossValue::Tradeoff(f) => {
                w.u8(4);
                w.u32(f.points().len() as u32);
                for (a, b) in f.points() {
                    w.rational(a);
                    w.rational(b);
                }
            }
        }
        w.finish()
    }

    pub fn from_wire(bytes: &[u8]) -> Option<LossValue> {
        let mut r = Reader::new(bytes);
        let v = match r.u8()? {
            1 => LossValue::approx(r.f64()?, r.f64()?).ok()?,
            2 => LossValue::renyi(r.f64()?, r.f64()?).ok()?,
            3 => LossValue::zcdp(r.f64()?).ok()?,
            4 => {
                let n = r.u32()? as usize;
                let mut pts = Vec::with_capacity(n.min(1024));
                for _ in 0..n {
                    pts.push((r.rational()?, r.rational()?));
                }
                LossValue::Tradeoff(TradeoffFunction::from_points(pts).ok()?)
            }
            _ => return None,
        };
        r.is_empty().then_some(v)
    }
}

impl fmt::Display for LossValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossValue::ApproxDp { eps, delta } => write!(f, "({eps}, {delta})-DP"),
            LossValue::Renyi { alpha, eps } => write!(f, "({alpha}, {eps})-RDP"),
            LossValue::Zcdp { rho } => write!(f, "{rho}-zCDP"),
            LossValue::Tradeoff(t) => write!(f, "f-DP with {} breakpoints", t.points().len()),
        }
    }
}

/// Relative slack absorbing float rounding in scalar loss comparisons.
pub const SCALAR_SLACK: f64 = 1e-12;

/// `a ≤ b` up to a relative slack of [`SCALAR_SLACK`].
pub fn scalar_leq(a: f64, b: f64) -> bool {
    a <= b + SCALAR_SLACK * b.abs()
}

/// The partial order on loss values.
pub fn loss_leq(a: &LossValue, b: &LossValue) -> Result<bool, MeasureError> {
    match (a, b) {
        (LossValue::ApproxDp { eps: e1, delta: d1 }, LossValue::ApproxDp { eps: e2, delta: d2 }) => {
            Ok(scalar_leq(*e1, *e2) && scalar_leq(*d1, *d2))
        }
        (LossValue::Renyi { alpha: a1, eps: e1 }, LossValue::Renyi { alpha: a2, eps: e2 })
            if a1 == a2 =>
        {
            Ok(scalar_leq(*e1, *e2))
        }
        (LossValue::Zcdp { rho: r1 }, LossValue::Zcdp { rho: r2 }) => Ok(scalar_leq(*r1, *r2)),
        (LossValue::Tradeoff(f1), LossValue::Tradeoff(f2)) => Ok(f1.leq(f2)),
        _ => Err(MeasureError::IncomparableTags {
            left: a.tag().to_string(),
            right: b.tag().to_string(),
        }),
    }
}

/// JSON float that also accepts `"inf"`.
#[derive(Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
enum ExtFloat {
    Num(f64),
    Word(InfWord),
}

#[derive(Clone, Copy, Serialize, Deserialize)]
enum InfWord {
    #[serde(rename = "inf")]
    Inf,
}

impl From<f64> for ExtFloat {
    fn from(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtFloat::Word(InfWord::Inf)
        } else {
            ExtFloat::Num(v)
        }
    }
}

impl From<ExtFloat> for f64 {
    fn from(v: ExtFloat) -> Self {
        match v {
            ExtFloat::Num(x) => x,
            ExtFloat::Word(InfWord::Inf) => f64::INFINITY,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
enum LossRepr {
    Approx { eps: ExtFloat, del: ExtFloat },
    Renyi { alpha: f64, eps: ExtFloat },
    Zcdp { rho: ExtFloat },
    Tradeoff(TradeoffFunction),
}

impl TryFrom<LossRepr> for LossValue {
    type Error = MeasureError;

    fn try_from(r: LossRepr) -> Result<Self, Self::Error> {
        match r {
            LossRepr::Approx { eps, del } => LossValue::approx(eps.into(), del.into()),
            LossRepr::Renyi { alpha, eps } => LossValue::renyi(alpha, eps.into()),
            LossRepr::Zcdp { rho } => LossValue::zcdp(rho.into()),
            LossRepr::Tradeoff(f) => Ok(LossValue::Tradeoff(f)),
        }
    }
}

impl From<LossValue> for LossRepr {
    fn from(v: LossValue) -> Self {
        match v {
            LossValue::ApproxDp { eps, delta } => LossRepr::Approx {
                eps: eps.into(),
                del: delta.into(),
            },
            LossValue::Renyi { alpha, eps } => LossRepr::Renyi {
                alpha,
                eps: eps.into(),
            },
            LossValue::Zcdp { rho } => LossRepr::Zcdp { rho: rho.into() },
            LossValue::Tradeoff(f) => LossRepr::Tradeoff(f),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn approx_order_is_componentwise() {
        let a = LossValue::approx(0.5, 0.0).unwrap();
        let b = LossValue::approx(0.5, 1e-6).unwrap();
        let c = LossValue::approx(0.6, 0.0).unwrap();
        assert!(loss_leq(&a, &b).unwrap());
        assert!(!loss_leq(&b, &c).unwrap());
        assert!(!loss_leq(&c, &b).unwrap());
    }

    #[test]
    fn mismatched_orders_are_incomparable() {
        let a = LossValue::renyi(2.0, 0.1).unwrap();
        let b = LossValue::renyi(3.0, 0.1).unwrap();
        let z = LossValue::zcdp(0.1).unwrap();
        assert!(loss_leq(&a, &b).is_err());
        assert!(loss_leq(&a, &z).is_err());
    }

    #[test]
    fn tradeoff_order() {
        let f2 = LossValue::tradeoff(fdp_curve(2f64.ln(), 0.0).unwrap());
        let f3 = LossValue::tradeoff(fdp_curve(3f64.ln(), 0.0).unwrap());
        assert!(loss_leq(&f2, &f3).unwrap());
        assert!(!loss_leq(&f3, &f2).unwrap());
    }

    #[test]
    fn validation() {
        assert!(LossValue::approx(-1.0, 0.0).is_err());
        assert!(LossValue::approx(1.0, 2.0).is_err());
        assert!(LossValue::renyi(1.0, 0.0).is_err());
        assert!(LossValue::zcdp(f64::NAN).is_err());
        assert!(LossValue::renyi(2.0, f64::INFINITY).is_ok());
    }

    #[test]
    fn wire_round_trip() {
        for v in [
            LossValue::approx(0.3, 1e-7).unwrap(),
            LossValue::approx_top(),
            LossValue::renyi(1.25, f64::INFINITY).unwrap(),
            LossValue::zcdp(0.125).unwrap(),
            LossValue::tradeoff(fdp_curve(1.0, 0.01).unwrap()),
        ] {
            assert_eq!(LossValue::from_wire(&v.to_wire()), Some(v));
        }
        assert_eq!(LossValue::from_wire(&[9]), None);
    }
}
