use std::fmt;
use std::sync::Arc;

use crate::accountants::{
    rule_from_accumulator, ContinuationRule, Decision, LossAccumulator,
};
use crate::measures::{loss_leq, LossValue};
use crate::mechanisms::{Leaf, MechanismSpec};
use crate::protocol::{
    Coins, Dataset, HaltReason, Mechanism, Message, Payload, ProtocolError, State,
    UNPARSEABLE_DIVERGENCE,
};

/// Default round bound for composition machines.
pub const DEFAULT_COMPOSITION_COMM_BOUND: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub struct ChildSlot {
    /// Set for spawned children; fixed children of `concomp` have none.
    pub spec: Option<MechanismSpec>,
    pub loss: Option<LossValue>,
    pub state: State,
    /// Coins consumed so far by this child.
    pub draws: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CompositionState {
    pub dataset: Dataset,
    pub children: Vec<ChildSlot>,
    pub halted: Option<HaltReason>,
}

impl CompositionState {
    pub fn history(&self) -> Vec<LossValue> {
        self.children.iter().filter_map(|c| c.loss.clone()).collect()
    }
}

#[derive(Clone)]
enum Mode {
    Fixed(Vec<Arc<dyn Mechanism>>),
    Filter {
        rule: Arc<dyn ContinuationRule>,
        budget: LossValue,
        /// Accumulator answering privacy-loss queries, if supported.
        reports: Option<Arc<dyn LossAccumulator>>,
        /// Apply the rule to the empty history at Init.
        gate_init: bool,
    },
    Odometer(Arc<dyn LossAccumulator>),
}

impl fmt::Debug for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mode::Fixed(ms) => f.debug_tuple("Fixed").field(&ms.len()).finish(),
            Mode::Filter { rule, budget, .. } => f
                .debug_struct("Filter")
                .field("rule", rule)
                .field("budget", budget)
                .finish(),
            Mode::Odometer(acc) => f.debug_tuple("Odometer").field(acc).finish(),
        }
    }
}

/// Concurrent composition machine: concomp, privacy filters and odometers,
/// over interactive or noninteractive children.
#[derive(Clone, Debug)]
pub struct Composer {
    name: &'static str,
    mode: Mode,
    interactive: bool,
    cap: Option<usize>,
    comm_bound: usize,
}

impl Composer {
    fn new(name: &'static str, mode: Mode, interactive: bool) -> Self {
        Self {
            name,
            mode,
            interactive,
            cap: None,
            comm_bound: DEFAULT_COMPOSITION_COMM_BOUND,
        }
    }

    /// Limits the number of children to `k`.
    pub fn with_cap(mut self, k: usize) -> Self {
        self.cap = Some(k);
        self
    }

    pub fn with_comm_bound(mut self, n: usize) -> Self {
        self.comm_bound = n;
        self
    }

    pub fn cap(&self) -> Option<usize> {
        self.cap
    }

    fn accumulator(&self) -> Option<&Arc<dyn LossAccumulator>> {
        match &self.mode {
            Mode::Odometer(acc) => Some(acc),
            Mode::Filter { reports, .. } => reports.as_ref(),
            Mode::Fixed(_) => None,
        }
    }

    fn init(&self, x: &Dataset, coins: &mut Coins<'_>) -> Result<(State, Message), ProtocolError> {
        let mut cs = CompositionState {
            dataset: x.clone(),
            children: Vec::new(),
            halted: None,
        };
        match &self.mode {
            Mode::Fixed(ms) => {
                let mut answers = Vec::with_capacity(ms.len());
                for (j, m) in ms.iter().enumerate() {
                    let mut c = coins.scoped(j as u32 + 1, 0);
                    let (s, a) = m.step(&m.init_state(x), &Message::Init, &mut c)?;
                    cs.children.push(ChildSlot {
                        spec: None,
                        loss: None,
                        state: s,
                        draws: c.position(),
                    });
                    answers.push(a);
                }
                Ok((State::Composite(cs), Message::Answer(encode_answer_list(&answers))))
            }
            Mode::Filter {
                rule,
                budget,
                gate_init: true,
                ..
            } if !matches!(rule.decide(&[], budget), Ok(Decision::Continue)) => {
                cs.halted = Some(HaltReason::BudgetExceeded);
                Ok((State::Composite(cs), Message::Halt(HaltReason::BudgetExceeded)))
            }
            _ => Ok((State::Composite(cs), Message::ready())),
        }
    }

    /// Loss metadata check shared by every spawning machine.
    fn verified(&self, cs: &CompositionState, spec: &MechanismSpec, loss: &LossValue) -> bool {
        if spec.validate().is_err() || !spec.certifies(loss) {
            return false;
        }
        let mut h = cs.history();
        h.push(loss.clone());
        match &self.mode {
            Mode::Filter { rule, budget, .. } => {
                loss_leq(loss, budget).is_ok() && rule.decide(&h, budget).is_ok()
            }
            Mode::Odometer(acc) => acc.accumulate(&h).is_ok(),
            Mode::Fixed(_) => false,
        }
    }

    fn spawn(
        &self,
        cs: &CompositionState,
        spec: &MechanismSpec,
        loss: &LossValue,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        let unchanged = || State::Composite(cs.clone());
        if matches!(self.mode, Mode::Fixed(_)) || (!self.interactive && !spec.is_noninteractive()) {
            return Ok((unchanged(), Message::Invalid));
        }
        if !self.verified(cs, spec, loss) {
            return Ok((unchanged(), Message::answer(UNPARSEABLE_DIVERGENCE)));
        }
        let halt = |reason: HaltReason| {
            let mut next = cs.clone();
            next.halted = Some(reason);
            Ok((State::Composite(next), Message::Halt(reason)))
        };
        if self.cap.is_some_and(|k| cs.children.len() >= k) {
            return halt(HaltReason::MechanismLimit);
        }
        if let Mode::Filter { rule, budget, .. } = &self.mode {
            let mut h = cs.history();
            h.push(loss.clone());
            if rule.decide(&h, budget) != Ok(Decision::Continue) {
                return halt(HaltReason::BudgetExceeded);
            }
        }
        let child = Leaf::new(spec.clone());
        let index = cs.children.len() as u32 + 1;
        let mut c = coins.scoped(index, 0);
        let (s, a) = child.step(&child.init_state(&cs.dataset), &Message::Init, &mut c)?;
        let mut next = cs.clone();
        next.children.push(ChildSlot {
            spec: Some(spec.clone()),
            loss: Some(loss.clone()),
            state: s,
            draws: c.position(),
        });
        Ok((State::Composite(next), a))
    }

    fn route(
        &self,
        cs: &CompositionState,
        index: u32,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        let j = index as usize;
        if !self.interactive || j == 0 || j > cs.children.len() {
            return Ok((State::Composite(cs.clone()), Message::Invalid));
        }
        let slot = &cs.children[j - 1];
        let mut c = coins.scoped(index, slot.draws);
        let (s, a) = match (&self.mode, &slot.spec) {
            (Mode::Fixed(ms), _) => ms[j - 1].step(&slot.state, msg, &mut c)?,
            (_, Some(spec)) => Leaf::new(spec.clone()).step(&slot.state, msg, &mut c)?,
            (_, None) => return Ok((State::Composite(cs.clone()), Message::Invalid)),
        };
        let mut next = cs.clone();
        next.children[j - 1].state = s;
        next.children[j - 1].draws = c.position();
        Ok((State::Composite(next), a))
    }
}

/// Answer listing the children's Init answers, as concatenated message frames.
pub fn encode_answer_list(answers: &[Message]) -> Payload {
    Payload(answers.iter().flat_map(Message::encode).collect())
}

/// Inverse of [`encode_answer_list`].
pub fn decode_answer_list(p: &Payload) -> Option<Vec<Message>> {
    let mut r = crate::protocol::wire::Reader::new(p.as_bytes());
    let mut out = Vec::new();
    while !r.is_empty() {
        out.push(Message::read(&mut r)?);
    }
    Some(out)
}

impl Mechanism for Composer {
    fn name(&self) -> String {
        self.name.to_owned()
    }

    fn step(
        &self,
        state: &State,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        let cs = match state {
            State::Fresh(x) => {
                return match msg {
                    Message::Init => self.init(x, coins),
                    _ => Ok((state.clone(), Message::Invalid)),
                }
            }
            State::Composite(cs) => cs,
            _ => {
                return Err(ProtocolError::ForeignState {
                    mechanism: self.name(),
                })
            }
        };
        if let Some(r) = cs.halted {
            return Ok((state.clone(), Message::Halt(r)));
        }
        match msg {
            Message::Spawn { mech, loss } => self.spawn(cs, mech, loss, coins),
            Message::Sub { index, msg } => self.route(cs, *index, msg, coins),
            Message::PrivacyLoss => match self.accumulator() {
                Some(acc) => match acc.accumulate(&cs.history()) {
                    Ok(l) => Ok((state.clone(), Message::Answer(Payload(l.to_wire())))),
                    Err(_) => Ok((state.clone(), Message::Invalid)),
                },
                None => Ok((state.clone(), Message::Invalid)),
            },
            _ => Ok((state.clone(), Message::Invalid)),
        }
    }

    fn declared_losses(&self) -> Vec<LossValue> {
        match &self.mode {
            Mode::Filter { budget, .. } => vec![budget.clone()],
            _ => Vec::new(),
        }
    }

    fn comm_bound(&self) -> usize {
        self.comm_bound
    }
}

/// Concurrent composition of fixed interactive mechanisms.
pub fn concomp(mechanisms: Vec<Arc<dyn Mechanism>>) -> Composer {
    assert!(!mechanisms.is_empty(), "concomp needs at least one mechanism");
    let bound = mechanisms.iter().map(|m| m.comm_bound()).sum::<usize>() + 1;
    Composer::new("concomp", Mode::Fixed(mechanisms), true).with_comm_bound(bound)
}

/// Filtered concurrent composition of interactive mechanisms.
pub fn filt_con_im(rule: Arc<dyn ContinuationRule>, budget: LossValue) -> Composer {
    Composer::new("filt_con_im", filter_mode(rule, budget, None, false), true)
}

/// Odometer for concurrent composition of interactive mechanisms.
pub fn odom_con_im(acc: Arc<dyn LossAccumulator>) -> Composer {
    Composer::new("odom_con_im", Mode::Odometer(acc), true)
}

/// Filtered composition of noninteractive mechanisms.
pub fn filt_nim(rule: Arc<dyn ContinuationRule>, budget: LossValue) -> Composer {
    Composer::new("filt_nim", filter_mode(rule, budget, None, false), false)
}

/// Odometer for composition of noninteractive mechanisms.
pub fn odom_nim(acc: Arc<dyn LossAccumulator>) -> Composer {
    Composer::new("odom_nim", Mode::Odometer(acc), false)
}

/// The filter `1[G(·) ⪯ d]` that also answers privacy-loss queries with `G`.
pub fn odometer_as_filter(acc: Arc<dyn LossAccumulator>, budget: LossValue) -> Composer {
    let rule = Arc::new(rule_from_accumulator(acc.clone()));
    Composer::new("odometer_as_filter", filter_mode(rule, budget, Some(acc), false), true)
}

/// An odometer without privacy-loss queries that halts once `G(·) ⋠ d`.
pub fn filter_as_truncated_odometer(acc: Arc<dyn LossAccumulator>, budget: LossValue) -> Composer {
    let rule = Arc::new(rule_from_accumulator(acc));
    Composer::new(
        "filter_as_truncated_odometer",
        filter_mode(rule, budget, None, true),
        true,
    )
}

fn filter_mode(
    rule: Arc<dyn ContinuationRule>,
    budget: LossValue,
    reports: Option<Arc<dyn LossAccumulator>>,
    gate_init: bool,
) -> Mode {
    Mode::Filter {
        rule,
        budget,
        reports,
        gate_init,
    }
}
