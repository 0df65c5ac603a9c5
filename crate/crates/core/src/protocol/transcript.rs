use serde::{Deserialize, Serialize};

use super::message::{Message, Payload};
use super::wire::{Reader, Writer};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    /// Adversary coins. Always empty for deterministic adversaries.
    Coin(Payload),
    Answer(Message),
}

/// The adversary's view `(r0, m1, r2, m3, ...)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ViewTranscript {
    entries: Vec<Entry>,
    complete: bool,
}

impl ViewTranscript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn expects_coin(&self) -> bool {
        self.entries.len().is_multiple_of(2)
    }

    /// # Panics
    /// If the previous entry is not an answer.
    pub fn push_coin(&mut self) {
        assert!(self.expects_coin(), "coin records alternate with answers");
        self.entries.push(Entry::Coin(Payload::default()));
    }

    /// # Panics
    /// If the previous entry is not a coin record.
    pub fn push_answer(&mut self, m: Message) {
        assert!(!self.expects_coin(), "answers follow coin records");
        self.entries.push(Entry::Answer(m));
    }

    pub fn mark_complete(&mut self) {
        self.complete = true;
    }

    pub fn answers(&self) -> impl Iterator<Item = &Message> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Answer(m) => Some(m),
            Entry::Coin(_) => None,
        })
    }

    pub fn answer_count(&self) -> usize {
        self.entries.len() / 2
    }

    /// The view an `answers`-round session would have produced: views with
    /// more answers are cut after the coin record following answer
    /// `answers` and marked complete, as when the round bound is reached.
    pub fn prefix(&self, answers: usize) -> ViewTranscript {
        if self.answer_count() <= answers {
            return self.clone();
        }
        ViewTranscript {
            entries: self.entries[..2 * answers + 1].to_vec(),
            complete: true,
        }
    }

    /// Canonical wire form: per entry `0x00 len coin` or `0x01 frame`,
    /// terminated by `0xFF` and the completion flag.
    pub fn to_wire(&self) -> Vec<u8> {
        let mut w = Writer::new();
        for e in &self.entries {
            match e {
                Entry::Coin(p) => {
                    w.u8(0x00);
                    w.bytes(p.as_bytes());
                }
                Entry::Answer(m) => {
                    w.u8(0x01);
                    m.write(&mut w);
                }
            }
        }
        w.u8(0xFF);
        w.u8(u8::from(self.complete));
        w.finish()
    }

    pub fn from_wire(bytes: &[u8]) -> Option<ViewTranscript> {
        let mut r = Reader::new(bytes);
        let mut v = ViewTranscript::new();
        loop {
            match r.u8()? {
                0x00 if v.expects_coin() => v
                    .entries
                    .push(Entry::Coin(Payload(r.bytes()?.to_vec()))),
                0x01 if !v.expects_coin() => v.entries.push(Entry::Answer(Message::read(&mut r)?)),
                0xFF => {
                    v.complete = match r.u8()? {
                        0 => false,
                        1 => true,
                        _ => return None,
                    };
                    return r.is_empty().then_some(v);
                }
                _ => return None,
            }
        }
    }
}
