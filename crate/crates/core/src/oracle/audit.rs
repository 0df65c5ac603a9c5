use serde::Serialize;

use super::{enumerate_with_cap, OracleError, DEFAULT_LEAF_CAP};
use crate::measures::{
    hockey_stick, renyi_divergence, tradeoff_of, zcdp_distance, FiniteDistribution, LossValue,
    DEFAULT_ALPHA_GRID,
};
use crate::protocol::{Adversary, Dataset, Mechanism};

#[derive(Clone, Debug, PartialEq)]
pub struct AuditConfig {
    pub tolerance: f64,
    pub alpha_grid: Vec<f64>,
    /// Defaults to the mechanism's communication bound.
    pub max_rounds: Option<usize>,
    pub leaf_cap: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            max_rounds: None,
            leaf_cap: DEFAULT_LEAF_CAP,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdversaryRow {
    pub adversary: String,
    /// Divergence in the claim's units; for trade-off claims, the largest
    /// amount by which the observed curve falls below the claimed one.
    pub observed: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditReport {
    pub mechanism: String,
    pub claimed: LossValue,
    pub observed: f64,
    pub witness: Option<String>,
    pub tolerance: f64,
    pub pass: bool,
    pub adversaries: Vec<AdversaryRow>,
}

/// Divergence of `p` from `q` in the units of `claimed`, and the bound it is
/// checked against.
pub fn divergence_in_units(
    p: &FiniteDistribution,
    q: &FiniteDistribution,
    claimed: &LossValue,
    grid: &[f64],
) -> Result<(f64, f64), OracleError> {
    Ok(match claimed {
        LossValue::ApproxDp { eps, delta } => (hockey_stick(p, q, *eps), *delta),
        LossValue::Renyi { alpha, eps } => (renyi_divergence(p, q, *alpha)?, *eps),
        LossValue::Zcdp { rho } => (zcdp_distance(p, q, grid)?, *rho),
        LossValue::Tradeoff(f) => (tradeoff_of(p, q).max_shortfall(f), 0.0),
    })
}

/// Checks `claimed` against the exact view distributions on both orderings
/// of the neighbor pair, for every listed adversary.
pub fn audit(
    mechanism: &dyn Mechanism,
    pair: (&Dataset, &Dataset),
    claimed: &LossValue,
    adversaries: &[&dyn Adversary],
    config: &AuditConfig,
) -> Result<AuditReport, OracleError> {
    let rounds = config.max_rounds.unwrap_or_else(|| mechanism.comm_bound());
    let mut rows = Vec::with_capacity(adversaries.len());
    for adv in adversaries {
        let on = |x: &Dataset| {
            enumerate_with_cap(*adv, mechanism, x, rounds, None, config.leaf_cap)
                .map(|v| v.to_distribution())
        };
        let (p, q) = (on(pair.0)?, on(pair.1)?);
        let (a, cap) = divergence_in_units(&p, &q, claimed, &config.alpha_grid)?;
        let (b, _) = divergence_in_units(&q, &p, claimed, &config.alpha_grid)?;
        let observed = a.max(b);
        rows.push(AdversaryRow {
            adversary: adv.label(),
            observed,
            pass: observed <= cap + config.tolerance,
        });
    }
    let worst = rows
        .iter()
        .enumerate()
        .max_by(|(_, x), (_, y)| x.observed.total_cmp(&y.observed));
    let (observed, witness) = match worst {
        Some((_, r)) => (r.observed, Some(r.adversary.clone())),
        None => (0.0, None),
    };
    Ok(AuditReport {
        mechanism: mechanism.name(),
        claimed: claimed.clone(),
        observed,
        witness,
        tolerance: config.tolerance,
        pass: rows.iter().all(|r| r.pass),
        adversaries: rows,
    })
}
