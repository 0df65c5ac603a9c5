use num::{BigRational, One, Signed, Zero};

use super::distribution::{joint_support, ln_rational, to_f64};
use super::{FiniteDistribution, MeasureError};

/// Integer orders up to this value are evaluated with an exact rational sum.
const EXACT_ORDER_LIMIT: f64 = 4.0;

/// Rényi divergence `D_α(p ‖ q)`, `+∞` when `p` charges an outcome `q` does not.
pub fn renyi_divergence(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    alpha: f64,
) -> Result<f64, MeasureError> {
    if !(alpha > 1.0 && alpha.is_finite()) {
        return Err(MeasureError::InvalidParameter(format!(
            "Renyi order must be finite and > 1, got {alpha}"
        )));
    }
    let mut pairs = Vec::new();
    for x in p.support() {
        let qx = q.prob(x);
        if qx.is_zero() {
            return Ok(f64::INFINITY);
        }
        pairs.push((p.prob(x), qx));
    }
    let d = if alpha.fract() == 0.0 && alpha <= EXACT_ORDER_LIMIT {
        let k = alpha as i32;
        let sum = pairs
            .iter()
            .fold(BigRational::zero(), |acc, (px, qx)| {
                acc + num::pow::pow(px.clone(), k as usize) / num::pow::pow(qx.clone(), k as usize - 1)
            });
        ln_rational(&sum) / (alpha - 1.0)
    } else {
        let logs: Vec<f64> = pairs
            .iter()
            .map(|(px, qx)| alpha * ln_rational(px) + (1.0 - alpha) * ln_rational(qx))
            .collect();
        let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + logs.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
        lse / (alpha - 1.0)
    };
    Ok(d.max(0.0))
}

/// Least δ with `p(S) ≤ e^ε q(S) + δ` for every event `S`.
pub fn hockey_stick(p: &FiniteDistribution, q: &FiniteDistribution, eps: f64) -> f64 {
    if eps == f64::INFINITY {
        let only_p = p
            .support()
            .filter(|x| q.prob(x).is_zero())
            .fold(BigRational::zero(), |acc, x| acc + p.prob(x));
        return to_f64(&only_p);
    }
    let scale = BigRational::from_float(eps.exp()).unwrap_or_else(BigRational::one);
    let mut total = BigRational::zero();
    for x in joint_support(p, q) {
        let d = p.prob(x) - &scale * q.prob(x);
        if d.is_positive() {
            total += d;
        }
    }
    to_f64(&total).clamp(0.0, 1.0)
}

/// `max_{α ∈ grid} D_α(p ‖ q) / α`, a lower bound on the true zCDP distance.
pub fn zcdp_distance(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    alpha_grid: &[f64],
) -> Result<f64, MeasureError> {
    if alpha_grid.is_empty() {
        return Err(MeasureError::InvalidParameter(
            "zCDP order grid is empty".into(),
        ));
    }
    let mut best = 0.0f64;
    for &a in alpha_grid {
        best = best.max(renyi_divergence(p, q, a)? / a);
    }
    Ok(best)
}
