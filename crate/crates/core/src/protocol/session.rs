use super::{
    Adversary, Coins, Dataset, HaltReason, Mechanism, Message, ProtocolError, SeededCoins, State,
    ViewTranscript,
};
use crate::measures::{loss_leq, LossValue};

/// Runs `adversary` against `mechanism` on `dataset` with coins derived from `seed`.
pub fn run_interaction(
    adversary: &dyn Adversary,
    mechanism: &dyn Mechanism,
    dataset: &Dataset,
    seed: u64,
) -> Result<ViewTranscript, ProtocolError> {
    drive(adversary, mechanism, dataset, seed, mechanism.comm_bound(), None)
}

/// Budget against which every answer is checked with a privacy-loss query.
#[derive(Debug, Clone, Copy)]
pub struct Truncation<'a> {
    pub budget: &'a LossValue,
}

/// Rejects answers a mechanism may never emit.
pub fn check_answer(mechanism: &dyn Mechanism, a: &Message) -> Result<(), ProtocolError> {
    let ok = match a {
        Message::Answer(p) => !p.as_bytes().is_empty(),
        Message::Halt(_) | Message::Invalid => true,
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(ProtocolError::MalformedMessage {
            source_name: mechanism.name(),
            detail: format!("{a:?} is not an answer"),
        })
    }
}

/// Loss reported by an odometer's privacy-loss answer.
pub(crate) fn reported_loss(a: &Message) -> Result<LossValue, ProtocolError> {
    match a {
        Message::Answer(p) => {
            LossValue::from_wire(p.as_bytes()).ok_or_else(|| ProtocolError::NotAnOdometer(a.clone()))
        }
        other => Err(ProtocolError::NotAnOdometer(other.clone())),
    }
}

/// Whether the reported loss forces truncation (`reported` not below `budget`).
pub(crate) fn exceeds(reported: &LossValue, budget: &LossValue) -> bool {
    !matches!(loss_leq(reported, budget), Ok(true))
}

/// Where an interaction stopped: the view, the mechanism's last state, and
/// the root coin position reached.
#[derive(Debug, Clone)]
pub struct SessionOutcome {
    pub view: ViewTranscript,
    pub state: State,
    pub position: u64,
}

/// The interaction loop with an explicit round bound and optional truncation.
pub fn drive(
    adversary: &dyn Adversary,
    mechanism: &dyn Mechanism,
    dataset: &Dataset,
    seed: u64,
    max_rounds: usize,
    truncation: Option<Truncation<'_>>,
) -> Result<ViewTranscript, ProtocolError> {
    drive_session(adversary, mechanism, dataset, seed, max_rounds, truncation).map(|o| o.view)
}

pub fn drive_session(
    adversary: &dyn Adversary,
    mechanism: &dyn Mechanism,
    dataset: &Dataset,
    seed: u64,
    max_rounds: usize,
    truncation: Option<Truncation<'_>>,
) -> Result<SessionOutcome, ProtocolError> {
    let mut source = SeededCoins::new(seed);
    let mut pos = 0u64;
    let mut state = mechanism.init_state(dataset);
    let mut view = ViewTranscript::new();
    let done = |view, state, position| Ok(SessionOutcome { view, state, position });
    for _ in 0..max_rounds {
        let q = adversary.next_query(&view);
        if q.is_halt() {
            view.push_coin();
            view.mark_complete();
            return done(view, state, pos);
        }
        let mut coins = Coins::root(&mut source, pos);
        let (next, a) = mechanism.step(&state, &q, &mut coins)?;
        check_answer(mechanism, &a)?;
        state = next;
        if let (Some(t), false) = (truncation, a.is_halt()) {
            let (after, l) = mechanism.step(&state, &Message::PrivacyLoss, &mut coins)?;
            state = after;
            if exceeds(&reported_loss(&l)?, t.budget) {
                let position = coins.position();
                return done(view, state, position);
            }
        }
        pos = coins.position();
        let halted = a.is_halt();
        view.push_coin();
        view.push_answer(a);
        if halted {
            view.mark_complete();
            return done(view, state, pos);
        }
    }
    // communication bound reached: synthesized adversary halt
    view.push_coin();
    view.mark_complete();
    done(view, state, pos)
}

/// Sends the script in order, then halts.
#[derive(Debug, Clone, PartialEq)]
pub struct ScriptAdversary {
    pub script: Vec<Message>,
}

impl ScriptAdversary {
    pub fn new(script: Vec<Message>) -> Self {
        Self { script }
    }
}

impl Adversary for ScriptAdversary {
    fn next_query(&self, history: &ViewTranscript) -> Message {
        self.script
            .get(history.answer_count())
            .cloned()
            .unwrap_or(Message::Halt(HaltReason::AdversaryHalt))
    }

    fn label(&self) -> String {
        format!("script{:?}", self.script)
    }
}

/// Adversary defined by a closure over the view.
pub struct FnAdversary<F> {
    f: F,
    label: String,
}

impl<F> FnAdversary<F>
where
    F: Fn(&ViewTranscript) -> Message + Send + Sync,
{
    pub fn new(label: impl Into<String>, f: F) -> Self {
        Self {
            f,
            label: label.into(),
        }
    }
}

impl<F> Adversary for FnAdversary<F>
where
    F: Fn(&ViewTranscript) -> Message + Send + Sync,
{
    fn next_query(&self, history: &ViewTranscript) -> Message {
        (self.f)(history)
    }

    fn label(&self) -> String {
        self.label.clone()
    }
}
