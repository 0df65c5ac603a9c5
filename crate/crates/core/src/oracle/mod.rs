//! Exhaustive enumeration of view distributions and privacy audits.

mod audit;

use std::collections::BTreeMap;

use num::{BigRational, One, Zero};
use thiserror::Error;

use crate::measures::{FiniteDistribution, LossValue, MeasureError};
use crate::protocol::{
    check_answer, session_exceeds, session_reported_loss, Adversary, CoinSource, Coins, Dataset, Mechanism, Message, ProtocolError,
    ScriptedCoins, State, ViewTranscript,
};

pub use audit::{audit, divergence_in_units, AdversaryRow, AuditConfig, AuditReport};

/// Default bound on the number of enumerated views.
pub const DEFAULT_LEAF_CAP: usize = 1_000_000;
/// Bound on coin draws in a single mechanism step.
pub const MAX_DRAWS_PER_STEP: usize = 64;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration exceeded {cap} views")]
    ExplosionGuard { cap: usize },
    #[error("a single step drew more than {MAX_DRAWS_PER_STEP} coins")]
    TooManyDraws,
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Exact distribution over views, keyed by canonical transcript bytes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ViewDistribution {
    mass: BTreeMap<Vec<u8>, BigRational>,
    rounds: usize,
}

impl ViewDistribution {
    pub fn mass(&self) -> &BTreeMap<Vec<u8>, BigRational> {
        &self.mass
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn total_mass(&self) -> BigRational {
        self.mass.values().fold(BigRational::zero(), |a, b| a + b)
    }

    pub fn prob(&self, view: &ViewTranscript) -> BigRational {
        self.mass
            .get(&view.to_wire())
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    /// Views with their probabilities, in canonical order.
    pub fn views(&self) -> Vec<(ViewTranscript, BigRational)> {
        self.mass
            .iter()
            .map(|(k, v)| (ViewTranscript::from_wire(k).expect("canonical key"), v.clone()))
            .collect()
    }

    pub fn to_distribution(&self) -> FiniteDistribution {
        FiniteDistribution::new(self.mass.clone()).expect("enumerated mass sums to one")
    }

    /// Marginal on the first `answers` answers of every view.
    pub fn restrict(&self, answers: usize) -> ViewDistribution {
        let mut mass: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
        for (v, p) in self.views() {
            *mass
                .entry(v.prefix(answers).to_wire())
                .or_insert_with(BigRational::zero) += p;
        }
        ViewDistribution {
            mass,
            rounds: answers.min(self.rounds),
        }
    }
}

/// One coin-outcome branch of a mechanism step.
#[derive(Clone, Debug)]
pub struct Branch {
    pub prob: BigRational,
    pub state: State,
    pub answer: Message,
}

/// Every outcome of `mechanism.step(state, msg)` with its exact probability.
pub fn step_branches(
    mechanism: &dyn Mechanism,
    state: &State,
    msg: &Message,
) -> Result<Vec<Branch>, OracleError> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<usize>, BigRational)> = vec![(Vec::new(), BigRational::one())];
    while let Some((script, prob)) = stack.pop() {
        if script.len() > MAX_DRAWS_PER_STEP {
            return Err(OracleError::TooManyDraws);
        }
        let mut src = ScriptedCoins::new(script.clone());
        let result = {
            let src_dyn: &mut dyn CoinSource = &mut src;
            let mut coins = Coins::root(src_dyn, 0);
            mechanism.step(state, msg, &mut coins)
        };
        match src.pending() {
            Some(dist) => {
                for (i, &w) in dist.weights().iter().enumerate().rev() {
                    if w > 0 {
                        let mut s = script.clone();
                        s.push(i);
                        stack.push((s, &prob * dist.probability(i)));
                    }
                }
            }
            None => {
                let (state, answer) = result?;
                out.push(Branch { prob, state, answer });
            }
        }
    }
    Ok(out)
}

struct Node {
    state: State,
    view: ViewTranscript,
    mass: BigRational,
}

struct Enumeration<'a> {
    adversary: &'a dyn Adversary,
    mechanism: &'a dyn Mechanism,
    max_rounds: usize,
    truncation: Option<&'a LossValue>,
    cap: usize,
    out: BTreeMap<Vec<u8>, BigRational>,
}

impl Enumeration<'_> {
    fn emit(&mut self, view: &ViewTranscript, mass: BigRational) -> Result<(), OracleError> {
        *self
            .out
            .entry(view.to_wire())
            .or_insert_with(BigRational::zero) += mass;
        if self.out.len() > self.cap {
            return Err(OracleError::ExplosionGuard { cap: self.cap });
        }
        Ok(())
    }

    /// Whether the privacy-loss query after reaching `state` cuts the view.
    fn truncates(&self, state: &State) -> Result<bool, OracleError> {
        let Some(budget) = self.truncation else {
            return Ok(false);
        };
        let mut branches = step_branches(self.mechanism, state, &Message::PrivacyLoss)?;
        if branches.len() != 1 {
            return Err(ProtocolError::NotAnOdometer(Message::Invalid).into());
        }
        let b = branches.pop().expect("one branch");
        let reported = session_reported_loss(&b.answer)?;
        Ok(session_exceeds(&reported, budget))
    }

    fn run(mut self, dataset: &Dataset) -> Result<ViewDistribution, OracleError> {
        let mut stack = vec![Node {
            state: self.mechanism.init_state(dataset),
            view: ViewTranscript::new(),
            mass: BigRational::one(),
        }];
        while let Some(Node { state, mut view, mass }) = stack.pop() {
            if view.answer_count() >= self.max_rounds {
                view.push_coin();
                view.mark_complete();
                self.emit(&view, mass)?;
                continue;
            }
            let q = self.adversary.next_query(&view);
            if q.is_halt() {
                view.push_coin();
                view.mark_complete();
                self.emit(&view, mass)?;
                continue;
            }
            for b in step_branches(self.mechanism, &state, &q)?.into_iter().rev() {
                check_answer(self.mechanism, &b.answer)?;
                let p = &mass * &b.prob;
                if !b.answer.is_halt() && self.truncates(&b.state)? {
                    self.emit(&view, p)?;
                    continue;
                }
                let mut v = view.clone();
                v.push_coin();
                let halted = b.answer.is_halt();
                v.push_answer(b.answer);
                if halted {
                    v.mark_complete();
                    self.emit(&v, p)?;
                } else {
                    stack.push(Node {
                        state: b.state,
                        view: v,
                        mass: p,
                    });
                }
            }
        }
        Ok(ViewDistribution {
            mass: self.out,
            rounds: self.max_rounds,
        })
    }
}

/// Exact distribution of `View(A ↔ M(x))` with at most `max_rounds` answers.
pub fn enumerate_views(
    adversary: &dyn Adversary,
    mechanism: &dyn Mechanism,
    dataset: &Dataset,
    max_rounds: usize,
) -> Result<ViewDistribution, OracleError> {
    enumerate_with_cap(adversary, mechanism, dataset, max_rounds, None, DEFAULT_LEAF_CAP)
}

/// Exact distribution of the views truncated at `budget`.
pub fn enumerate_truncated_views(
    adversary: &dyn Adversary,
    odometer: &dyn Mechanism,
    dataset: &Dataset,
    budget: &LossValue,
    max_rounds: usize,
) -> Result<ViewDistribution, OracleError> {
    enumerate_with_cap(adversary, odometer, dataset, max_rounds, Some(budget), DEFAULT_LEAF_CAP)
}

pub fn enumerate_with_cap(
    adversary: &dyn Adversary,
    mechanism: &dyn Mechanism,
    dataset: &Dataset,
    max_rounds: usize,
    truncation: Option<&LossValue>,
    cap: usize,
) -> Result<ViewDistribution, OracleError> {
    Enumeration {
        adversary,
        mechanism,
        max_rounds,
        truncation,
        cap,
        out: BTreeMap::new(),
    }
    .run(dataset)
}
