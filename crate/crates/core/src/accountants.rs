//! Continuation rules (filters) and privacy-loss accumulators (odometers).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::measures::{loss_leq, scalar_leq, LossTag, LossValue, MeasureError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Continue,
    Halt,
}

impl Decision {
    fn from_bool(ok: bool) -> Self {
        if ok {
            Decision::Continue
        } else {
            Decision::Halt
        }
    }
}

/// `F(d1, ..., dk; d)`.
pub trait ContinuationRule: fmt::Debug + Send + Sync {
    fn decide(&self, history: &[LossValue], budget: &LossValue) -> Result<Decision, MeasureError>;
}

/// `G(d1, ..., dk)`.
pub trait LossAccumulator: fmt::Debug + Send + Sync {
    fn accumulate(&self, history: &[LossValue]) -> Result<LossValue, MeasureError>;
}

fn mismatch(want: LossTag, got: &LossValue) -> MeasureError {
    MeasureError::IncomparableTags {
        left: want.to_string(),
        right: got.tag().to_string(),
    }
}

fn bad_param(msg: String) -> MeasureError {
    MeasureError::InvalidParameter(msg)
}

/// Additive Rényi accounting at a fixed order.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RdpAdditive {
    alpha: f64,
}

impl RdpAdditive {
    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn scalar(&self, v: &LossValue) -> Result<f64, MeasureError> {
        match v {
            LossValue::Renyi { alpha, eps } if *alpha == self.alpha => Ok(*eps),
            other => Err(mismatch(LossTag::Renyi(self.alpha), other)),
        }
    }

    fn total(&self, history: &[LossValue]) -> Result<f64, MeasureError> {
        history.iter().map(|v| self.scalar(v)).sum()
    }
}

fn checked_alpha(alpha: f64) -> RdpAdditive {
    assert!(alpha > 1.0 && alpha.is_finite(), "Renyi order must be finite and > 1");
    RdpAdditive { alpha }
}

/// `F(ε1, ε2, ...; ε) = 1[Σ εi ≤ ε]`.
///
/// # Panics
/// If `alpha` is not a finite value above 1.
pub fn rdp_additive_rule(alpha: f64) -> RdpAdditive {
    checked_alpha(alpha)
}

/// `G(ε1, ..., εk) = Σ εi`.
///
/// # Panics
/// If `alpha` is not a finite value above 1.
pub fn rdp_additive_accumulator(alpha: f64) -> RdpAdditive {
    checked_alpha(alpha)
}

impl ContinuationRule for RdpAdditive {
    fn decide(&self, history: &[LossValue], budget: &LossValue) -> Result<Decision, MeasureError> {
        let cap = self.scalar(budget)?;
        Ok(Decision::from_bool(scalar_leq(self.total(history)?, cap)))
    }
}

impl LossAccumulator for RdpAdditive {
    fn accumulate(&self, history: &[LossValue]) -> Result<LossValue, MeasureError> {
        Ok(LossValue::Renyi {
            alpha: self.alpha,
            eps: self.total(history)?,
        })
    }
}

/// Additive zCDP accounting.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ZcdpAdditive;

impl ZcdpAdditive {
    fn total(history: &[LossValue]) -> Result<f64, MeasureError> {
        history.iter().map(Self::scalar).sum()
    }

    fn scalar(v: &LossValue) -> Result<f64, MeasureError> {
        match v {
            LossValue::Zcdp { rho } => Ok(*rho),
            other => Err(mismatch(LossTag::Zcdp, other)),
        }
    }
}

pub fn zcdp_additive_rule() -> ZcdpAdditive {
    ZcdpAdditive
}

pub fn zcdp_additive_accumulator() -> ZcdpAdditive {
    ZcdpAdditive
}

impl ContinuationRule for ZcdpAdditive {
    fn decide(&self, history: &[LossValue], budget: &LossValue) -> Result<Decision, MeasureError> {
        let cap = Self::scalar(budget)?;
        Ok(Decision::from_bool(scalar_leq(Self::total(history)?, cap)))
    }
}

impl LossAccumulator for ZcdpAdditive {
    fn accumulate(&self, history: &[LossValue]) -> Result<LossValue, MeasureError> {
        Ok(LossValue::Zcdp {
            rho: Self::total(history)?,
        })
    }
}

/// `(sqrt(2 ln(1/δ′) Σε²) + Σε²/2, Σδ)` over an approx-DP history.
fn advanced_bound(delta_prime: f64, history: &[LossValue]) -> Result<(f64, f64), MeasureError> {
    let mut sq = 0.0;
    let mut del = 0.0;
    for v in history {
        match v {
            LossValue::ApproxDp { eps, delta } => {
                sq += eps * eps;
                del += delta;
            }
            other => return Err(mismatch(LossTag::ApproxDp, other)),
        }
    }
    let bound = (2.0 * (1.0 / delta_prime).ln() * sq).sqrt() + 0.5 * sq;
    Ok((bound, del))
}

fn check_delta_prime(delta_prime: f64) -> Result<(), MeasureError> {
    if delta_prime > 0.0 && delta_prime < 1.0 {
        Ok(())
    } else {
        Err(bad_param(format!("delta' must lie in (0, 1), got {delta_prime}")))
    }
}

/// Approx-DP continuation rule with advanced-composition slack δ′.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhitehouseRule {
    delta_prime: f64,
}

pub fn whitehouse_rule(delta_prime: f64) -> Result<WhitehouseRule, MeasureError> {
    check_delta_prime(delta_prime)?;
    Ok(WhitehouseRule { delta_prime })
}

impl WhitehouseRule {
    pub fn delta_prime(&self) -> f64 {
        self.delta_prime
    }
}

impl ContinuationRule for WhitehouseRule {
    fn decide(&self, history: &[LossValue], budget: &LossValue) -> Result<Decision, MeasureError> {
        let LossValue::ApproxDp { eps, delta } = budget else {
            return Err(mismatch(LossTag::ApproxDp, budget));
        };
        if *delta < self.delta_prime {
            return Err(bad_param(format!(
                "budget delta {delta} is below delta' {}",
                self.delta_prime
            )));
        }
        let (bound, del) = advanced_bound(self.delta_prime, history)?;
        Ok(Decision::from_bool(
            scalar_leq(bound, *eps) && scalar_leq(self.delta_prime + del, *delta),
        ))
    }
}

/// Approx-DP accumulator reporting the fixed target δ while the δ-budget holds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WhitehouseAccumulator {
    delta_prime: f64,
    delta: f64,
}

pub fn whitehouse_accumulator(delta_prime: f64, delta: f64) -> Result<WhitehouseAccumulator, MeasureError> {
    check_delta_prime(delta_prime)?;
    if !(delta >= delta_prime && delta <= 1.0) {
        return Err(bad_param(format!(
            "target delta {delta} must lie in [delta', 1] with delta' = {delta_prime}"
        )));
    }
    Ok(WhitehouseAccumulator { delta_prime, delta })
}

impl LossAccumulator for WhitehouseAccumulator {
    fn accumulate(&self, history: &[LossValue]) -> Result<LossValue, MeasureError> {
        let (bound, del) = advanced_bound(self.delta_prime, history)?;
        if scalar_leq(self.delta_prime + del, self.delta) {
            Ok(LossValue::ApproxDp {
                eps: bound,
                delta: self.delta,
            })
        } else {
            Ok(LossValue::approx_top())
        }
    }
}

/// `F(·; d) = 1[G(·) ⪯ d]`.
#[derive(Clone, Debug)]
pub struct AccumulatorRule {
    acc: Arc<dyn LossAccumulator>,
}

pub fn rule_from_accumulator(acc: Arc<dyn LossAccumulator>) -> AccumulatorRule {
    AccumulatorRule { acc }
}

impl AccumulatorRule {
    pub fn accumulator(&self) -> &Arc<dyn LossAccumulator> {
        &self.acc
    }
}

impl ContinuationRule for AccumulatorRule {
    fn decide(&self, history: &[LossValue], budget: &LossValue) -> Result<Decision, MeasureError> {
        accumulator_budget_check(self.acc.as_ref(), budget, history)
    }
}

pub fn accumulator_budget_check(
    acc: &dyn LossAccumulator,
    budget: &LossValue,
    history: &[LossValue],
) -> Result<Decision, MeasureError> {
    let total = acc.accumulate(history)?;
    Ok(Decision::from_bool(loss_leq(&total, budget)?))
}

/// JSON description of an accumulator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AccumulatorSpec {
    RdpAdditive { alpha: f64 },
    ZcdpAdditive {},
    Whitehouse { delta_prime: f64, delta: f64 },
}

impl AccumulatorSpec {
    pub fn build(&self) -> Result<Arc<dyn LossAccumulator>, MeasureError> {
        Ok(match self {
            AccumulatorSpec::RdpAdditive { alpha } => {
                LossValue::renyi(*alpha, 0.0)?;
                Arc::new(rdp_additive_accumulator(*alpha))
            }
            AccumulatorSpec::ZcdpAdditive {} => Arc::new(zcdp_additive_accumulator()),
            AccumulatorSpec::Whitehouse { delta_prime, delta } => {
                Arc::new(whitehouse_accumulator(*delta_prime, *delta)?)
            }
        })
    }
}

/// JSON description of a continuation rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    RdpAdditive { alpha: f64 },
    ZcdpAdditive {},
    Whitehouse { delta_prime: f64 },
    FromAccumulator(AccumulatorSpec),
}

impl RuleSpec {
    pub fn build(&self) -> Result<Arc<dyn ContinuationRule>, MeasureError> {
        Ok(match self {
            RuleSpec::RdpAdditive { alpha } => {
                LossValue::renyi(*alpha, 0.0)?;
                Arc::new(rdp_additive_rule(*alpha))
            }
            RuleSpec::ZcdpAdditive {} => Arc::new(zcdp_additive_rule()),
            RuleSpec::Whitehouse { delta_prime } => Arc::new(whitehouse_rule(*delta_prime)?),
            RuleSpec::FromAccumulator(acc) => Arc::new(rule_from_accumulator(acc.build()?)),
        })
    }
}
