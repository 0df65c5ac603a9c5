use std::sync::Arc;

use super::composer::{concomp, decode_answer_list};
use super::postprocess::{postprocess, Direction, Postprocessed, Postprocessor};
use crate::accountants::{ContinuationRule, Decision};
use crate::measures::{loss_leq, LossValue, MeasureError};
use crate::mechanisms::{Leaf, MechanismSpec};
use crate::protocol::{
    Coins, Dataset, HaltReason, Mechanism, Message, ProtocolError, Scratch, State,
    UNPARSEABLE_DIVERGENCE,
};

#[derive(Clone, Debug, PartialEq)]
pub struct UniversalState {
    pub data: Dataset,
    pub installed: Option<(MechanismSpec, Box<State>)>,
}

/// Placeholder mechanism whose first Spawn installs any mechanism whose
/// verified loss fits the budget; afterwards it behaves as that mechanism.
#[derive(Debug, Clone)]
pub struct Universal {
    budget: LossValue,
}

pub fn universal_mechanism(budget: LossValue) -> Universal {
    Universal { budget }
}

impl Universal {
    pub fn budget(&self) -> &LossValue {
        &self.budget
    }

    fn admits(&self, spec: &MechanismSpec, loss: &LossValue) -> bool {
        spec.validate().is_ok()
            && spec.certifies(loss)
            && matches!(loss_leq(loss, &self.budget), Ok(true))
    }
}

impl Mechanism for Universal {
    fn name(&self) -> String {
        format!("universal({})", self.budget)
    }

    fn step(
        &self,
        state: &State,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        match state {
            State::Fresh(x) => Ok(match msg {
                Message::Init => (
                    State::Universal(UniversalState {
                        data: x.clone(),
                        installed: None,
                    }),
                    Message::ready(),
                ),
                _ => (state.clone(), Message::Invalid),
            }),
            State::Universal(UniversalState {
                data,
                installed: None,
            }) => match msg {
                Message::Spawn { mech, loss } if self.admits(mech, loss) => {
                    let m = Leaf::new(mech.clone());
                    let (s, a) = m.step(&m.init_state(data), &Message::Init, coins)?;
                    Ok((
                        State::Universal(UniversalState {
                            data: data.clone(),
                            installed: Some((mech.clone(), Box::new(s))),
                        }),
                        a,
                    ))
                }
                _ => Ok((state.clone(), Message::Invalid)),
            },
            State::Universal(UniversalState {
                data,
                installed: Some((spec, inner)),
            }) => {
                let (s, a) = Leaf::new(spec.clone()).step(inner, msg, coins)?;
                Ok((
                    State::Universal(UniversalState {
                        data: data.clone(),
                        installed: Some((spec.clone(), Box::new(s))),
                    }),
                    a,
                ))
            }
            _ => Err(ProtocolError::ForeignState {
                mechanism: self.name(),
            }),
        }
    }

    fn declared_losses(&self) -> Vec<LossValue> {
        vec![self.budget.clone()]
    }

    fn comm_bound(&self) -> usize {
        crate::mechanisms::LEAF_COMM_BOUND
    }
}

/// Budget left after charging `spent`, for additive Rényi or zCDP budgets.
pub fn residual_budget(budget: &LossValue, spent: &LossValue) -> Result<LossValue, MeasureError> {
    match (budget, spent) {
        (LossValue::Renyi { alpha, eps }, LossValue::Renyi { alpha: a2, eps: e2 }) if alpha == a2 => {
            LossValue::renyi(*alpha, (eps - e2).max(0.0))
        }
        (LossValue::Zcdp { rho }, LossValue::Zcdp { rho: r2 }) => LossValue::zcdp((rho - r2).max(0.0)),
        _ => Err(MeasureError::IncomparableTags {
            left: budget.tag().to_string(),
            right: spent.tag().to_string(),
        }),
    }
}

/// Postprocessor turning `concomp(M1, U(budget − d1))` into the two-slot
/// filter for an adversary whose first spawn is `(M1, d1)`.
#[derive(Debug, Clone)]
pub struct TwoSlotFilterWrapper {
    first: (MechanismSpec, LossValue),
    rule: Arc<dyn ContinuationRule>,
    budget: LossValue,
}

// words[0] stage: 0 before Init, 1 no child, 2 one child, 3 two children, 4 halted
// words[1] halt reason code; blobs[0] the first child's Init answer
const STAGE_FRESH: i64 = 0;
const STAGE_EMPTY: i64 = 1;
const STAGE_ONE: i64 = 2;
const STAGE_TWO: i64 = 3;
const STAGE_HALTED: i64 = 4;

fn reason_code(r: HaltReason) -> i64 {
    match r {
        HaltReason::BudgetExceeded => 0,
        HaltReason::MechanismLimit => 1,
        HaltReason::AdversaryHalt => 2,
    }
}

fn reason_of(c: i64) -> HaltReason {
    match c {
        0 => HaltReason::BudgetExceeded,
        1 => HaltReason::MechanismLimit,
        _ => HaltReason::AdversaryHalt,
    }
}

impl TwoSlotFilterWrapper {
    pub fn new(
        first: (MechanismSpec, LossValue),
        rule: Arc<dyn ContinuationRule>,
        budget: LossValue,
    ) -> Self {
        Self { first, rule, budget }
    }

    fn verified(&self, history: &[LossValue], spec: &MechanismSpec, loss: &LossValue) -> bool {
        let mut h = history.to_vec();
        h.push(loss.clone());
        spec.validate().is_ok()
            && spec.certifies(loss)
            && loss_leq(loss, &self.budget).is_ok()
            && self.rule.decide(&h, &self.budget).is_ok()
    }

    fn continues(&self, history: &[LossValue]) -> bool {
        self.rule.decide(history, &self.budget) == Ok(Decision::Continue)
    }

    fn outer(&self, s: &mut Scratch, msg: &Message) -> (Direction, Message) {
        let deliver = |m: Message| (Direction::FromMechanism, m);
        let halt = |s: &mut Scratch, r: HaltReason| {
            s.words = vec![STAGE_HALTED, reason_code(r)];
            deliver(Message::Halt(r))
        };
        let stage = s.words[0];
        if stage == STAGE_HALTED {
            return deliver(Message::Halt(reason_of(s.words[1])));
        }
        let d1 = self.first.1.clone();
        match msg {
            Message::Spawn { mech, loss } => {
                let history: Vec<LossValue> = match stage {
                    STAGE_EMPTY => vec![],
                    _ => vec![d1.clone()],
                };
                if !self.verified(&history, mech, loss) {
                    return deliver(Message::answer(UNPARSEABLE_DIVERGENCE));
                }
                if stage == STAGE_TWO {
                    return halt(s, HaltReason::MechanismLimit);
                }
                let mut h = history;
                h.push(loss.clone());
                if !self.continues(&h) {
                    return halt(s, HaltReason::BudgetExceeded);
                }
                if stage == STAGE_EMPTY {
                    if (mech, loss) != (&self.first.0, &self.first.1) {
                        // only the spawn this wrapper was built for can be replayed
                        return deliver(Message::Invalid);
                    }
                    s.words[0] = STAGE_ONE;
                    return deliver(Message::decode(&s.blobs[0]));
                }
                s.words[0] = STAGE_TWO;
                (Direction::FromAdversary, Message::sub(2, msg.clone()))
            }
            Message::Sub { index: 1, .. } if stage >= STAGE_ONE => (Direction::FromAdversary, msg.clone()),
            Message::Sub { index: 2, .. } if stage == STAGE_TWO => (Direction::FromAdversary, msg.clone()),
            _ => deliver(Message::Invalid),
        }
    }
}

impl Postprocessor for TwoSlotFilterWrapper {
    fn name(&self) -> String {
        "two_slot_filter".into()
    }

    fn initial_state(&self) -> State {
        State::Scratch(Scratch {
            words: vec![STAGE_FRESH, 0],
            blobs: Vec::new(),
        })
    }

    fn step(
        &self,
        state: &State,
        dir: Direction,
        msg: &Message,
        _coins: &mut Coins<'_>,
    ) -> Result<(State, Direction, Message), ProtocolError> {
        let State::Scratch(s) = state else {
            return Err(ProtocolError::ForeignState {
                mechanism: self.name(),
            });
        };
        let mut s = s.clone();
        let (d, m) = match (dir, s.words[0]) {
            (Direction::FromMechanism, STAGE_FRESH) => {
                let first = match msg {
                    Message::Answer(p) => decode_answer_list(p).and_then(|v| v.into_iter().next()),
                    _ => None,
                };
                let Some(first) = first else {
                    return Err(ProtocolError::MalformedMessage {
                        source_name: self.name(),
                        detail: format!("unexpected Init answer {msg:?}"),
                    });
                };
                s.words[0] = STAGE_EMPTY;
                s.blobs = vec![first.encode()];
                (Direction::FromMechanism, Message::ready())
            }
            (Direction::FromMechanism, _) => (Direction::FromMechanism, msg.clone()),
            (Direction::FromAdversary, _) => self.outer(&mut s, msg),
        };
        Ok((State::Scratch(s), d, m))
    }
}

/// `P ∘ concomp(M1, U(budget − d1))`, equivalent to the filter with cap 2 for
/// adversaries whose first spawn is `(M1, d1)`.
pub fn two_slot_filter_wrapper(
    first: (MechanismSpec, LossValue),
    rule: Arc<dyn ContinuationRule>,
    budget: LossValue,
) -> Result<Postprocessed, MeasureError> {
    let residual = residual_budget(&budget, &first.1)?;
    let m1 = first
        .0
        .build()
        .map_err(|e| MeasureError::InvalidParameter(e.to_string()))?;
    let inner = concomp(vec![m1, Arc::new(universal_mechanism(residual))]);
    let p = TwoSlotFilterWrapper::new(first, rule, budget);
    Ok(postprocess(Arc::new(p), Arc::new(inner)))
}
