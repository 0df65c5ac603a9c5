use std::fmt;
use std::sync::Arc;

use crate::measures::LossValue;
use crate::protocol::{
    CoinDist, Coins, Mechanism, Message, Payload, ProtocolError, Scratch, State,
};

/// Coin scope reserved for postprocessor draws.
pub const PIM_SCOPE: u32 = u32::MAX;

/// Who a postprocessor message is exchanged with.
///
/// As input, `FromAdversary` carries an outer query and `FromMechanism` an
/// inner answer. As output, `FromAdversary` forwards a query to the inner
/// mechanism and `FromMechanism` delivers an answer outward.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    FromAdversary,
    FromMechanism,
}

/// Person-in-the-middle adapter between an adversary and a mechanism.
pub trait Postprocessor: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn initial_state(&self) -> State {
        State::Scratch(Scratch::default())
    }

    fn step(
        &self,
        state: &State,
        dir: Direction,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Direction, Message), ProtocolError>;
}

#[derive(Clone, Debug, PartialEq)]
pub struct PostprocessedState {
    pub inner: Box<State>,
    pub pim: Box<State>,
    pub pim_draws: u64,
}

/// `P ∘ M`.
#[derive(Debug, Clone)]
pub struct Postprocessed {
    pim: Arc<dyn Postprocessor>,
    inner: Arc<dyn Mechanism>,
}

pub fn postprocess(p: Arc<dyn Postprocessor>, m: Arc<dyn Mechanism>) -> Postprocessed {
    Postprocessed { pim: p, inner: m }
}

impl Postprocessed {
    fn pim_step(
        &self,
        ps: &mut PostprocessedState,
        dir: Direction,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(Direction, Message), ProtocolError> {
        let mut c = coins.scoped(PIM_SCOPE, ps.pim_draws);
        let (s, d, m) = self.pim.step(&ps.pim, dir, msg, &mut c)?;
        ps.pim_draws = c.position();
        *ps.pim = s;
        Ok((d, m))
    }
}

impl Mechanism for Postprocessed {
    fn name(&self) -> String {
        format!("{}∘{}", self.pim.name(), self.inner.name())
    }

    fn step(
        &self,
        state: &State,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        let (mut ps, (mut dir, mut m)) = match state {
            State::Fresh(x) => {
                if *msg != Message::Init {
                    return Ok((state.clone(), Message::Invalid));
                }
                let (s, a) = self.inner.step(&self.inner.init_state(x), &Message::Init, coins)?;
                let mut ps = PostprocessedState {
                    inner: Box::new(s),
                    pim: Box::new(self.pim.initial_state()),
                    pim_draws: 0,
                };
                let out = self.pim_step(&mut ps, Direction::FromMechanism, &a, coins)?;
                (ps, out)
            }
            State::Postprocessed(ps) => {
                let mut ps = ps.clone();
                let out = self.pim_step(&mut ps, Direction::FromAdversary, msg, coins)?;
                (ps, out)
            }
            _ => {
                return Err(ProtocolError::ForeignState {
                    mechanism: self.name(),
                })
            }
        };
        let limit = self.comm_bound();
        let mut inner_steps = 0;
        while dir == Direction::FromAdversary {
            inner_steps += 1;
            if inner_steps > limit {
                return Err(ProtocolError::LivelockGuard { limit });
            }
            let (s, a) = self.inner.step(&ps.inner, &m, coins)?;
            ps.inner = Box::new(s);
            (dir, m) = self.pim_step(&mut ps, Direction::FromMechanism, &a, coins)?;
        }
        Ok((State::Postprocessed(ps), m))
    }

    fn declared_losses(&self) -> Vec<LossValue> {
        self.inner.declared_losses()
    }

    fn comm_bound(&self) -> usize {
        self.inner.comm_bound()
    }
}

/// Forwards queries and answers unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPostprocessor;

impl Postprocessor for IdentityPostprocessor {
    fn name(&self) -> String {
        "identity".into()
    }

    fn step(
        &self,
        state: &State,
        dir: Direction,
        msg: &Message,
        _coins: &mut Coins<'_>,
    ) -> Result<(State, Direction, Message), ProtocolError> {
        Ok((state.clone(), dir, msg.clone()))
    }
}

/// Replaces every inner answer with a fixed payload.
#[derive(Debug, Clone)]
pub struct ConstantPostprocessor {
    pub payload: Payload,
}

impl Postprocessor for ConstantPostprocessor {
    fn name(&self) -> String {
        format!("constant({:?})", self.payload)
    }

    fn step(
        &self,
        state: &State,
        dir: Direction,
        msg: &Message,
        _coins: &mut Coins<'_>,
    ) -> Result<(State, Direction, Message), ProtocolError> {
        Ok(match dir {
            Direction::FromAdversary => (state.clone(), dir, msg.clone()),
            Direction::FromMechanism => (state.clone(), dir, Message::Answer(self.payload.clone())),
        })
    }
}

/// What a [`TablePostprocessor`] does with an outer query.
#[derive(Debug, Clone, PartialEq)]
pub enum QueryAction {
    /// Send this query to the inner mechanism.
    Forward(Message),
    /// Answer directly without touching the inner mechanism.
    Reply(Payload),
    /// Send both queries; deliver the two answers concatenated.
    Pair(Message, Message),
}

/// Randomized relabeling of one inner answer payload.
#[derive(Debug, Clone, PartialEq)]
pub struct Channel {
    pub input: Payload,
    pub dist: CoinDist,
    pub outputs: Vec<Payload>,
}

/// Finite postprocessor driven by lookup tables. Unlisted queries are
/// forwarded and unlisted answers delivered unchanged.
#[derive(Debug, Clone, Default)]
pub struct TablePostprocessor {
    pub queries: Vec<(Message, QueryAction)>,
    pub channels: Vec<Channel>,
}

impl TablePostprocessor {
    fn relabel(&self, a: &Message, coins: &mut Coins<'_>) -> Message {
        let Message::Answer(p) = a else {
            return a.clone();
        };
        match self.channels.iter().find(|c| &c.input == p) {
            Some(c) => Message::Answer(c.outputs[coins.draw(&c.dist)].clone()),
            None => a.clone(),
        }
    }
}

fn scratch(state: &State) -> Scratch {
    match state {
        State::Scratch(s) => s.clone(),
        _ => Scratch::default(),
    }
}

impl Postprocessor for TablePostprocessor {
    fn name(&self) -> String {
        format!("table({} queries, {} channels)", self.queries.len(), self.channels.len())
    }

    fn step(
        &self,
        state: &State,
        dir: Direction,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Direction, Message), ProtocolError> {
        // words[0]: 0 idle, 1 awaiting first of a pair, 2 awaiting second
        let mut s = scratch(state);
        if s.words.is_empty() {
            s.words.push(0);
        }
        let out = match dir {
            Direction::FromAdversary => {
                let action = self.queries.iter().find(|(q, _)| q == msg).map(|(_, a)| a);
                match action {
                    None => (Direction::FromAdversary, msg.clone()),
                    Some(QueryAction::Forward(q)) => (Direction::FromAdversary, q.clone()),
                    Some(QueryAction::Reply(p)) => (Direction::FromMechanism, Message::Answer(p.clone())),
                    Some(QueryAction::Pair(q1, q2)) => {
                        s.words[0] = 1;
                        s.blobs = vec![q2.encode()];
                        (Direction::FromAdversary, q1.clone())
                    }
                }
            }
            Direction::FromMechanism => {
                let a = self.relabel(msg, coins);
                match s.words[0] {
                    1 => {
                        let q2 = Message::decode(&s.blobs[0]);
                        s.words[0] = 2;
                        s.blobs = vec![answer_bytes(&a)];
                        (Direction::FromAdversary, q2)
                    }
                    2 => {
                        let mut joined = s.blobs[0].clone();
                        joined.push(b'|');
                        joined.extend(answer_bytes(&a));
                        s.words[0] = 0;
                        s.blobs.clear();
                        (Direction::FromMechanism, Message::Answer(Payload(joined)))
                    }
                    _ => (Direction::FromMechanism, a),
                }
            }
        };
        Ok((State::Scratch(s), out.0, out.1))
    }
}

fn answer_bytes(a: &Message) -> Vec<u8> {
    match a {
        Message::Answer(p) => p.as_bytes().to_vec(),
        Message::Invalid => b"invalid".to_vec(),
        Message::Halt(_) => b"halt".to_vec(),
        other => other.encode(),
    }
}
