use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::wire::{Reader, Writer};
use crate::measures::LossValue;
use crate::mechanisms::MechanismSpec;

pub const TAG_INIT: u8 = 0x01;
pub const TAG_SPAWN: u8 = 0x02;
pub const TAG_SUB: u8 = 0x03;
pub const TAG_QUERY: u8 = 0x04;
pub const TAG_ANSWER: u8 = 0x05;
pub const TAG_HALT: u8 = 0x06;
pub const TAG_INVALID: u8 = 0x07;
/// The only tag with its high bit set.
pub const TAG_PRIVACY_LOSS: u8 = 0x80;

/// Answer payload sent by composition machines once they are ready for queries.
pub const READY: &[u8] = b"ready";
/// Answer payload for a Spawn whose loss metadata cannot be verified.
pub const UNPARSEABLE_DIVERGENCE: &[u8] = b"divergence cannot be parsed";

/// Opaque byte payload. JSON form is a plain string when the bytes are UTF-8,
/// `{"hex": ".."}` otherwise.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Payload(pub Vec<u8>);

impl Payload {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

impl From<&[u8]> for Payload {
    fn from(v: &[u8]) -> Self {
        Payload(v.to_vec())
    }
}

impl From<&str> for Payload {
    fn from(v: &str) -> Self {
        Payload(v.as_bytes().to_vec())
    }
}

impl From<Vec<u8>> for Payload {
    fn from(v: Vec<u8>) -> Self {
        Payload(v)
    }
}

impl fmt::Debug for Payload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match std::str::from_utf8(&self.0) {
            Ok(s) => write!(f, "{s:?}"),
            Err(_) => write!(f, "0x{}", hex::encode(&self.0)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PayloadRepr {
    Text(String),
    Hex { hex: String },
}

impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match std::str::from_utf8(&self.0) {
            Ok(t) => PayloadRepr::Text(t.to_owned()).serialize(s),
            Err(_) => PayloadRepr::Hex {
                hex: hex::encode(&self.0),
            }
            .serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Payload {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match PayloadRepr::deserialize(d)? {
            PayloadRepr::Text(t) => Ok(Payload(t.into_bytes())),
            PayloadRepr::Hex { hex } => hex::decode(hex)
                .map(Payload)
                .map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HaltReason {
    BudgetExceeded,
    MechanismLimit,
    AdversaryHalt,
}

impl HaltReason {
    fn code(self) -> u8 {
        match self {
            HaltReason::BudgetExceeded => 0,
            HaltReason::MechanismLimit => 1,
            HaltReason::AdversaryHalt => 2,
        }
    }

    fn from_code(c: u8) -> Option<Self> {
        match c {
            0 => Some(HaltReason::BudgetExceeded),
            1 => Some(HaltReason::MechanismLimit),
            2 => Some(HaltReason::AdversaryHalt),
            _ => None,
        }
    }
}

impl fmt::Display for HaltReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            HaltReason::BudgetExceeded => "insufficient budget",
            HaltReason::MechanismLimit => "at mechanism count limit",
            HaltReason::AdversaryHalt => "adversary halt",
        })
    }
}

/// Protocol message. Queries and answers share this type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Message {
    Init,
    Spawn {
        mech: MechanismSpec,
        loss: LossValue,
    },
    /// Routed query; `index` is 1-based.
    Sub {
        index: u32,
        msg: Box<Message>,
    },
    PrivacyLoss,
    Query(Payload),
    Answer(Payload),
    Halt(HaltReason),
    Invalid,
}

impl Message {
    pub fn query(p: impl Into<Payload>) -> Self {
        Message::Query(p.into())
    }

    pub fn answer(p: impl Into<Payload>) -> Self {
        Message::Answer(p.into())
    }

    pub fn ready() -> Self {
        Message::answer(READY)
    }

    /// # Panics
    /// If `index` is zero.
    pub fn sub(index: u32, msg: Message) -> Self {
        assert!(index >= 1, "sub-mechanism indices start at 1");
        Message::Sub {
            index,
            msg: Box::new(msg),
        }
    }

    pub fn spawn(mech: MechanismSpec, loss: LossValue) -> Self {
        Message::Spawn { mech, loss }
    }

    pub fn is_halt(&self) -> bool {
        matches!(self, Message::Halt(_))
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        self.write(&mut w);
        w.finish()
    }

    /// Total decoding: anything that is not exactly one well-formed frame is `Invalid`.
    pub fn decode(bytes: &[u8]) -> Message {
        let mut r = Reader::new(bytes);
        match Self::read(&mut r) {
            Some(m) if r.is_empty() => m,
            _ => Message::Invalid,
        }
    }

    pub(crate) fn write(&self, w: &mut Writer) {
        let mut body = Writer::new();
        let tag = match self {
            Message::Init => TAG_INIT,
            Message::Spawn { mech, loss } => {
                body.bytes(&mech.to_wire());
                body.bytes(&loss.to_wire());
                TAG_SPAWN
            }
            Message::Sub { index, msg } => {
                body.u32(*index);
                msg.write(&mut body);
                TAG_SUB
            }
            Message::PrivacyLoss => TAG_PRIVACY_LOSS,
            Message::Query(p) => {
                body.raw(&p.0);
                TAG_QUERY
            }
            Message::Answer(p) => {
                body.raw(&p.0);
                TAG_ANSWER
            }
            Message::Halt(r) => {
                body.u8(r.code());
                TAG_HALT
            }
            Message::Invalid => TAG_INVALID,
        };
        w.u8(tag);
        w.bytes(&body.finish());
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Option<Message> {
        let tag = r.u8()?;
        let mut body = Reader::new(r.bytes()?);
        let m = match tag {
            TAG_INIT => Message::Init,
            TAG_SPAWN => {
                let mech = MechanismSpec::from_wire(body.bytes()?)?;
                let loss = LossValue::from_wire(body.bytes()?)?;
                Message::Spawn { mech, loss }
            }
            TAG_SUB => {
                let index = body.u32()?;
                if index == 0 {
                    return None;
                }
                Message::sub(index, Self::read(&mut body)?)
            }
            TAG_PRIVACY_LOSS => Message::PrivacyLoss,
            TAG_QUERY => Message::Query(Payload(body.rest().to_vec())),
            TAG_ANSWER => Message::Answer(Payload(body.rest().to_vec())),
            TAG_HALT => Message::Halt(HaltReason::from_code(body.u8()?)?),
            TAG_INVALID => Message::Invalid,
            _ => return None,
        };
        body.is_empty().then_some(m)
    }
}
