//! Counter-based coin streams.
//!
//! Every draw is addressed by a path of child indices and a per-path draw
//! counter, so replaying a session (or the same sub-mechanism nested inside a
//! wrapper) reproduces identical coins.

use num::{BigInt, BigRational};
use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

/// A finite coin with dyadic outcome probabilities `weights[i] / 2^bits`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CoinDist {
    bits: u32,
    weights: Vec<u64>,
}

impl CoinDist {
    /// Returns `None` unless `bits <= 63` and the weights sum to `2^bits`.
    pub fn new(bits: u32, weights: Vec<u64>) -> Option<Self> {
        if bits > 63 || weights.is_empty() {
            return None;
        }
        let total = weights
            .iter()
            .try_fold(0u64, |acc, w| acc.checked_add(*w))?;
        (total == 1u64 << bits).then_some(Self { bits, weights })
    }

    /// Outcome 1 with probability `num / 2^bits`, outcome 0 otherwise.
    pub fn bernoulli(num: u64, bits: u32) -> Self {
        let full = 1u64 << bits;
        assert!(num <= full, "bernoulli numerator exceeds coin space");
        Self::new(bits, vec![full - num, num]).expect("valid bernoulli coin")
    }

    pub fn uniform_bit() -> Self {
        Self::bernoulli(1, 1)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn weights(&self) -> &[u64] {
        &self.weights
    }

    pub fn probability(&self, outcome: usize) -> BigRational {
        BigRational::new(
            BigInt::from(self.weights[outcome]),
            BigInt::from(1u64) << self.bits as usize,
        )
    }

    /// Maps a uniform `bits`-bit integer to an outcome by cumulative weight.
    pub fn select(&self, u: u64) -> usize {
        let mut acc = 0u64;
        for (i, w) in self.weights.iter().enumerate() {
            acc += w;
            if u < acc {
                return i;
            }
        }
        self.weights.len() - 1
    }
}

pub trait CoinSource {
    fn draw(&mut self, path: &[u32], pos: u64, dist: &CoinDist) -> usize;
}

/// Handle given to a mechanism step. Children receive scoped handles.
pub struct Coins<'a> {
    source: &'a mut dyn CoinSource,
    path: Vec<u32>,
    pos: u64,
}

impl<'a> Coins<'a> {
    pub fn root(source: &'a mut dyn CoinSource, pos: u64) -> Self {
        Self {
            source,
            path: Vec::new(),
            pos,
        }
    }

    pub fn draw(&mut self, dist: &CoinDist) -> usize {
        let out = self.source.draw(&self.path, self.pos, dist);
        self.pos += 1;
        out
    }

    pub fn bernoulli(&mut self, num: u64, bits: u32) -> bool {
        self.draw(&CoinDist::bernoulli(num, bits)) == 1
    }

    /// Number of draws made at this scope so far.
    pub fn position(&self) -> u64 {
        self.pos
    }

    /// Sub-stream for child `index`, resuming at that child's draw counter.
    pub fn scoped(&mut self, index: u32, pos: u64) -> Coins<'_> {
        let mut path = self.path.clone();
        path.push(index);
        Coins {
            source: &mut *self.source,
            path,
            pos,
        }
    }
}

/// Deterministic pseudo-random source keyed by a session seed.
#[derive(Debug, Clone)]
pub struct SeededCoins {
    seed: u64,
}

impl SeededCoins {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl CoinSource for SeededCoins {
    fn draw(&mut self, path: &[u32], pos: u64, dist: &CoinDist) -> usize {
        let mut h = Sha256::new();
        h.update(self.seed.to_be_bytes());
        h.update((path.len() as u32).to_be_bytes());
        for p in path {
            h.update(p.to_be_bytes());
        }
        let key: [u8; 32] = h.finalize().into();
        let mut rng = ChaCha12Rng::from_seed(key);
        rng.set_word_pos(u128::from(pos) * 2);
        let u = if dist.bits() == 0 {
            0
        } else {
            rng.next_u64() >> (64 - dist.bits())
        };
        dist.select(u)
    }
}

/// Replays a fixed outcome script. Once the script runs out, the first
/// unscripted coin is recorded in `pending` and outcome 0 is returned.
#[derive(Debug, Default)]
pub struct ScriptedCoins {
    script: Vec<usize>,
    next: usize,
    pending: Option<CoinDist>,
}

impl ScriptedCoins {
    pub fn new(script: Vec<usize>) -> Self {
        Self {
            script,
            next: 0,
            pending: None,
        }
    }

    pub fn pending(&self) -> Option<&CoinDist> {
        self.pending.as_ref()
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl CoinSource for ScriptedCoins {
    fn draw(&mut self, _path: &[u32], _pos: u64, dist: &CoinDist) -> usize {
        if let Some(&o) = self.script.get(self.next) {
            self.next += 1;
            return o;
        }
        if self.pending.is_none() {
            self.pending = Some(dist.clone());
        }
        0
    }
}
