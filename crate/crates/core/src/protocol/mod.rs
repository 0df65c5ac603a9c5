//! Mechanisms as randomized state machines, the message format, and the
//! interaction driver.

mod coins;
mod message;
mod session;
mod transcript;
pub(crate) mod wire;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coins::{CoinDist, CoinSource, Coins, ScriptedCoins, SeededCoins};
pub use message::{
    HaltReason, Message, Payload, READY, TAG_ANSWER, TAG_HALT, TAG_INIT, TAG_INVALID,
    TAG_PRIVACY_LOSS, TAG_QUERY, TAG_SPAWN, TAG_SUB, UNPARSEABLE_DIVERGENCE,
};
pub use session::{
    check_answer, drive, drive_session, run_interaction, FnAdversary, ScriptAdversary,
    SessionOutcome, Truncation,
};
pub(crate) use session::{exceeds as session_exceeds, reported_loss as session_reported_loss};
pub use transcript::{Entry, ViewTranscript};

use crate::composition::{CompositionState, PostprocessedState, UniversalState};
use crate::measures::LossValue;

pub fn encode_message(m: &Message) -> Vec<u8> {
    m.encode()
}

pub fn decode_message(b: &[u8]) -> Message {
    Message::decode(b)
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("malformed message from {source_name}: {detail}")]
    MalformedMessage { source_name: String, detail: String },
    #[error("postprocessor exceeded {limit} inner steps for one outer query")]
    LivelockGuard { limit: usize },
    #[error("mechanism answered a privacy-loss query with {0:?}")]
    NotAnOdometer(Message),
    #[error("{mechanism} received a state it does not own")]
    ForeignState { mechanism: String },
}

/// A finite dataset of small atoms.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Dataset(pub Vec<u8>);

impl Dataset {
    pub fn new(elements: Vec<u8>) -> Self {
        Dataset(elements)
    }

    pub fn bit(b: bool) -> Self {
        Dataset(vec![u8::from(b)])
    }

    pub fn elements(&self) -> &[u8] {
        &self.0
    }

    /// The first atom read as a bit.
    pub fn first_bit(&self) -> bool {
        self.0.first().is_some_and(|&b| b != 0)
    }

    pub fn count_nonzero(&self) -> usize {
        self.0.iter().filter(|&&b| b != 0).count()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NeighborRelation {
    SubstituteOne,
    AddRemoveOne,
}

impl NeighborRelation {
    pub fn are_neighbors(self, a: &Dataset, b: &Dataset) -> bool {
        let (x, y) = (a.elements(), b.elements());
        match self {
            NeighborRelation::SubstituteOne => {
                x.len() == y.len() && x.iter().zip(y).filter(|(p, q)| p != q).count() == 1
            }
            NeighborRelation::AddRemoveOne => {
                let (short, long) = if x.len() < y.len() { (x, y) } else { (y, x) };
                long.len() == short.len() + 1
                    && (0..long.len()).any(|i| {
                        long[..i] == short[..i] && long[i + 1..] == short[i..]
                    })
            }
        }
    }

    /// All neighbors of `x` with atoms drawn from `0..domain`.
    pub fn neighbors_of(self, x: &Dataset, domain: u8) -> Vec<Dataset> {
        let e = x.elements();
        let mut out = Vec::new();
        match self {
            NeighborRelation::SubstituteOne => {
                for i in 0..e.len() {
                    for v in 0..domain {
                        if v != e[i] {
                            let mut y = e.to_vec();
                            y[i] = v;
                            out.push(Dataset(y));
                        }
                    }
                }
            }
            NeighborRelation::AddRemoveOne => {
                for i in 0..e.len() {
                    let mut y = e.to_vec();
                    y.remove(i);
                    out.push(Dataset(y));
                }
                for i in 0..=e.len() {
                    for v in 0..domain {
                        let mut y = e.to_vec();
                        y.insert(i, v);
                        out.push(Dataset(y));
                    }
                }
            }
        }
        out.sort();
        out.dedup();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct LeafState {
    pub data: Dataset,
    pub round: u32,
    pub memory: Vec<u8>,
}

/// Free-form state for postprocessors and test machines.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct Scratch {
    pub words: Vec<i64>,
    pub blobs: Vec<Vec<u8>>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum State {
    /// Before the Init message.
    Fresh(Dataset),
    Leaf(LeafState),
    Composite(CompositionState),
    Universal(UniversalState),
    Postprocessed(PostprocessedState),
    Scratch(Scratch),
}

pub trait Mechanism: fmt::Debug + Send + Sync {
    fn name(&self) -> String;

    fn init_state(&self, data: &Dataset) -> State {
        State::Fresh(data.clone())
    }

    fn step(
        &self,
        state: &State,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError>;

    /// Loss metadata, at most one value per tag (and per order for Renyi).
    fn declared_losses(&self) -> Vec<LossValue>;

    /// Maximum number of rounds in any session.
    fn comm_bound(&self) -> usize;
}

/// Deterministic adversary.
pub trait Adversary: Send + Sync {
    fn next_query(&self, history: &ViewTranscript) -> Message;

    fn label(&self) -> String {
        String::from("adversary")
    }
}
