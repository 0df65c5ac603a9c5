//! Serializable deterministic adversaries and exhaustive strategy generators.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::protocol::{Adversary, HaltReason, Message, ViewTranscript};

/// Matches one answer in a history.
#[derive(Clone, Debug, PartialEq)]
pub enum Pattern {
    Any,
    Exact(Message),
}

impl Pattern {
    pub fn matches(&self, m: &Message) -> bool {
        match self {
            Pattern::Any => true,
            Pattern::Exact(e) => e == m,
        }
    }
}

impl Serialize for Pattern {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Pattern::Any => s.serialize_str("*"),
            Pattern::Exact(m) => m.serialize(s),
        }
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum PatternRepr {
    Star(Star),
    Exact(Message),
}

#[derive(Deserialize)]
enum Star {
    #[serde(rename = "*")]
    Star,
}

impl<'de> Deserialize<'de> for Pattern {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Ok(match PatternRepr::deserialize(d)? {
            PatternRepr::Star(Star::Star) => Pattern::Any,
            PatternRepr::Exact(m) => Pattern::Exact(m),
        })
    }
}

/// Fires when the answers so far match `after` exactly, position by position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub after: Vec<Pattern>,
    pub send: Message,
}

fn adversary_halt() -> Message {
    Message::Halt(HaltReason::AdversaryHalt)
}

/// Deterministic adversary: the first matching rule wins, then the script
/// entry for the current round, then the default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategySpec {
    #[serde(default)]
    pub rules: Vec<Rule>,
    #[serde(default)]
    pub script: Vec<Message>,
    #[serde(default = "adversary_halt")]
    pub default: Message,
    /// Maximum number of queries; the adversary halts afterwards.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

impl StrategySpec {
    pub fn script(script: Vec<Message>) -> Self {
        Self {
            rules: Vec::new(),
            script,
            default: adversary_halt(),
            depth: None,
            label: None,
        }
    }

    pub fn labeled(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn query_for(&self, answers: &[&Message]) -> Message {
        let i = answers.len();
        if self.depth.is_some_and(|d| i >= d) {
            return adversary_halt();
        }
        for r in &self.rules {
            if r.after.len() == i && r.after.iter().zip(answers).all(|(p, a)| p.matches(a)) {
                return r.send.clone();
            }
        }
        self.script.get(i).cloned().unwrap_or_else(|| self.default.clone())
    }
}

impl Adversary for StrategySpec {
    fn next_query(&self, history: &ViewTranscript) -> Message {
        let answers: Vec<&Message> = history.answers().collect();
        self.query_for(&answers)
    }

    fn label(&self) -> String {
        match &self.label {
            Some(l) => l.clone(),
            None => serde_label(self),
        }
    }
}

fn serde_label(s: &StrategySpec) -> String {
    let script: Vec<String> = s.script.iter().map(short).collect();
    format!("{} rules; script [{}]", s.rules.len(), script.join(", "))
}

/// Compact human-readable form of a query.
pub fn short(m: &Message) -> String {
    match m {
        Message::Init => "init".into(),
        Message::Spawn { mech, loss } => format!("spawn({}, {})", mech.name(), loss),
        Message::Sub { index, msg } => format!("sub({index}, {})", short(msg)),
        Message::PrivacyLoss => "privacy_loss".into(),
        Message::Query(p) => format!("query({p:?})"),
        Message::Answer(p) => format!("answer({p:?})"),
        Message::Halt(r) => format!("halt({r})"),
        Message::Invalid => "invalid".into(),
    }
}

/// Every non-adaptive script `prefix ++ w` with `w` a word over `alphabet`
/// of length at most `max_len`.
pub fn script_strategies(prefix: &[Message], alphabet: &[Message], max_len: usize) -> Vec<StrategySpec> {
    let mut out = Vec::new();
    let mut words: Vec<Vec<Message>> = vec![Vec::new()];
    for len in 0..=max_len {
        for w in &words {
            let mut s = prefix.to_vec();
            s.extend(w.iter().cloned());
            let label = format!("script[{}]", s.iter().map(short).collect::<Vec<_>>().join(", "));
            out.push(StrategySpec::script(s).labeled(label));
        }
        if len < max_len {
            words = words
                .iter()
                .flat_map(|w| {
                    alphabet.iter().map(move |a| {
                        let mut v = w.clone();
                        v.push(a.clone());
                        v
                    })
                })
                .collect();
        }
    }
    out
}

/// A decision tree: the query, then one subtree per answer class, with the
/// last subtree taken for unlisted answers.
#[derive(Clone, Debug)]
struct Tree {
    send: Message,
    children: Vec<Tree>,
}

fn trees(alphabet: &[Message], classes: usize, depth: usize) -> Vec<Tree> {
    if depth == 0 {
        return Vec::new();
    }
    let subs = trees(alphabet, classes, depth - 1);
    let mut out = Vec::new();
    for q in alphabet {
        if depth == 1 || subs.is_empty() {
            out.push(Tree {
                send: q.clone(),
                children: Vec::new(),
            });
            continue;
        }
        let mut idx = vec![0usize; classes + 1];
        loop {
            out.push(Tree {
                send: q.clone(),
                children: idx.iter().map(|&i| subs[i].clone()).collect(),
            });
            let mut k = 0;
            while k < idx.len() {
                idx[k] += 1;
                if idx[k] < subs.len() {
                    break;
                }
                idx[k] = 0;
                k += 1;
            }
            if k == idx.len() {
                break;
            }
        }
    }
    out
}

fn tree_rules(t: &Tree, path: &mut Vec<Pattern>, classes: &[Message], rules: &mut Vec<Rule>) {
    rules.push(Rule {
        after: path.clone(),
        send: t.send.clone(),
    });
    for (i, child) in t.children.iter().enumerate() {
        path.push(match classes.get(i) {
            Some(c) => Pattern::Exact(c.clone()),
            None => Pattern::Any,
        });
        tree_rules(child, path, classes, rules);
        path.pop();
    }
}

/// Every adaptive strategy that sends `prefix` and then follows a decision
/// tree of the given depth over `alphabet`, branching on whether each answer
/// equals one of `classes` (or none of them).
pub fn table_strategies(
    prefix: &[Message],
    alphabet: &[Message],
    classes: &[Message],
    depth: usize,
) -> Vec<StrategySpec> {
    trees(alphabet, classes.len(), depth)
        .into_iter()
        .enumerate()
        .map(|(n, t)| {
            let mut path = vec![Pattern::Any; prefix.len()];
            let mut rules = Vec::new();
            tree_rules(&t, &mut path, classes, &mut rules);
            StrategySpec {
                rules,
                script: prefix.to_vec(),
                default: adversary_halt(),
                depth: Some(prefix.len() + depth),
                label: Some(format!("table#{n}")),
            }
        })
        .collect()
}
