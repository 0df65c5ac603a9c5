//! Finite leaf mechanisms with declared, auditable losses.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num::{BigInt, BigRational, One, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measures::{
    fdp_curve, ln_rational, loss_leq, renyi_divergence, FiniteDistribution, LossValue,
    DEFAULT_ALPHA_GRID,
};
use crate::protocol::wire::{Reader, Writer};
use crate::protocol::{
    CoinDist, Coins, Dataset, LeafState, Mechanism, Message, Payload, ProtocolError, State, READY,
};

/// Resolution of randomized-response coins.
pub const RR_COIN_BITS: u32 = 32;
/// Resolution of geometric-noise coins.
pub const GEOMETRIC_COIN_BITS: u32 = 62;
/// Rounds allowed in a session with a bare leaf.
pub const LEAF_COMM_BOUND: usize = 8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MechanismError {
    #[error("invalid mechanism parameter: {0}")]
    InvalidParameter(String),
}

/// Noninteractive samplers usable inside `one_shot`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sampler {
    Rr { eps: f64 },
    Const { payload: Payload },
    Geometric { eps: f64, n: u8 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MechanismSpec {
    /// Answers a single query with the noisy first bit.
    Rr { eps: f64 },
    /// Round 2 applies RR(eps2) to `bit XOR first answer`.
    TwoRoundRr { eps1: f64, eps2: f64 },
    /// Answers every message with the payload.
    Const { payload: Payload },
    /// Answers Init with one sample, nothing afterwards.
    OneShot(Sampler),
    /// Two-sided geometric noise on the count of nonzero atoms, clamped to
    /// `0..=n`; answers a single query.
    Geometric { eps: f64, n: u8 },
}

fn check_eps(eps: f64) -> Result<(), MechanismError> {
    if eps.is_nan() || eps < 0.0 {
        Err(MechanismError::InvalidParameter(format!("eps must be >= 0, got {eps}")))
    } else {
        Ok(())
    }
}

/// Numerator over `2^32` of the probability RR(eps) reports the true bit.
pub fn rr_keep_numerator(eps: f64) -> u64 {
    let full = 1u64 << RR_COIN_BITS;
    if eps == f64::INFINITY {
        return full;
    }
    let p = 1.0 / (1.0 + (-eps).exp());
    ((p * full as f64).floor() as u64).clamp(full / 2, full)
}

fn dyadic(num: u64, bits: u32) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::one() << bits as usize)
}

fn rr_output(bit: bool, keep: u64) -> FiniteDistribution {
    let full = 1u64 << RR_COIN_BITS;
    let one = if bit { keep } else { full - keep };
    FiniteDistribution::bernoulli(dyadic(one, RR_COIN_BITS)).expect("dyadic bernoulli")
}

fn symmetric_renyi(p: &FiniteDistribution, q: &FiniteDistribution, alpha: f64) -> f64 {
    let a = renyi_divergence(p, q, alpha).expect("grid order");
    let b = renyi_divergence(q, p, alpha).expect("grid order");
    a.max(b)
}

/// Largest RR epsilon whose realized `D_alpha` stays within `target`.
pub fn rr_for_renyi(alpha: f64, target: f64) -> Result<f64, MechanismError> {
    LossValue::renyi(alpha, target).map_err(|e| MechanismError::InvalidParameter(e.to_string()))?;
    let full = 1u64 << RR_COIN_BITS;
    let div = |k: u64| symmetric_renyi(&rr_output(true, k), &rr_output(false, k), alpha);
    let (mut lo, mut hi) = (full / 2, full - 1);
    if div(hi) <= target {
        lo = hi;
    }
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if div(mid) <= target {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    let mut eps = (lo as f64 / (full - lo) as f64).ln();
    while rr_keep_numerator(eps) > lo {
        eps = eps.next_down();
    }
    Ok(eps.max(0.0))
}

/// Exact weights over `0..=n` for true count `c`: two-sided geometric noise
/// with the tails clamped onto the endpoints.
fn geometric_weights(eps: f64, n: u8, c: u8) -> Result<Vec<u64>, MechanismError> {
    let r = (-eps).exp();
    let raw: Vec<f64> = (0..=n)
        .map(|y| {
            let d = f64::from(y.abs_diff(c));
            if y == 0 || y == n {
                r.powf(d) / (1.0 + r)
            } else {
                (1.0 - r) / (1.0 + r) * r.powf(d)
            }
        })
        .collect();
    let z: f64 = raw.iter().sum();
    let full = 1u64 << GEOMETRIC_COIN_BITS;
    // slightly under-scaled so float error cannot push the total past 2^bits
    let scale = full as f64 * (1.0 - 1e-12);
    let mut w: Vec<u64> = raw.iter().map(|u| (u / z * scale).floor() as u64).collect();
    let used: u64 = w.iter().sum();
    if used > full {
        return Err(MechanismError::InvalidParameter("geometric weights overflow".into()));
    }
    w[usize::from(c)] += full - used;
    if w.contains(&0) {
        return Err(MechanismError::InvalidParameter(format!(
            "eps {eps} too large for {} outputs at {GEOMETRIC_COIN_BITS}-bit resolution",
            n + 1
        )));
    }
    Ok(w)
}

fn weights_distribution(w: &[u64], bits: u32) -> FiniteDistribution {
    let mass: BTreeMap<Vec<u8>, BigRational> = w
        .iter()
        .enumerate()
        .map(|(y, &k)| (y.to_string().into_bytes(), dyadic(k, bits)))
        .collect();
    FiniteDistribution::new(mass).expect("weights sum to one")
}

fn check_geometric(eps: f64, n: u8) -> Result<(), MechanismError> {
    check_eps(eps)?;
    if n == 0 || n > 63 || eps.is_infinite() {
        return Err(MechanismError::InvalidParameter(format!(
            "geometric needs 1 <= n <= 63 and finite eps, got n={n}"
        )));
    }
    for c in 0..=n {
        geometric_weights(eps, n, c)?;
    }
    Ok(())
}

impl Sampler {
    fn validate(&self) -> Result<(), MechanismError> {
        match self {
            Sampler::Rr { eps } => check_eps(*eps),
            Sampler::Const { payload } => check_payload(payload),
            Sampler::Geometric { eps, n } => check_geometric(*eps, *n),
        }
    }

    /// Exact output distribution on `data`.
    pub fn distribution(&self, data: &Dataset) -> FiniteDistribution {
        match self {
            Sampler::Rr { eps } => rr_output(data.first_bit(), rr_keep_numerator(*eps)),
            Sampler::Const { payload } => FiniteDistribution::point(payload.as_bytes()),
            Sampler::Geometric { eps, n } => {
                let c = geometric_count(data, *n);
                let w = geometric_weights(*eps, *n, c).expect("validated");
                weights_distribution(&w, GEOMETRIC_COIN_BITS)
            }
        }
    }

    fn sample(&self, data: &Dataset, coins: &mut Coins<'_>) -> Payload {
        match self {
            Sampler::Rr { eps } => {
                let bit = data.first_bit();
                let keep = coins.bernoulli(rr_keep_numerator(*eps), RR_COIN_BITS);
                Payload::from(if bit == keep { "1" } else { "0" })
            }
            Sampler::Const { payload } => payload.clone(),
            Sampler::Geometric { eps, n } => {
                let w = geometric_weights(*eps, *n, geometric_count(data, *n)).expect("validated");
                let dist = CoinDist::new(GEOMETRIC_COIN_BITS, w).expect("weights sum");
                Payload::from(coins.draw(&dist).to_string().into_bytes())
            }
        }
    }

    fn declared_losses(&self) -> Vec<LossValue> {
        match self {
            Sampler::Rr { eps } => {
                let k = rr_keep_numerator(*eps);
                pure_dp_losses(*eps, &rr_output(true, k), &rr_output(false, k))
            }
            Sampler::Const { .. } => zero_losses(),
            Sampler::Geometric { eps, n } => {
                let dists: Vec<FiniteDistribution> = (0..=*n)
                    .map(|c| {
                        weights_distribution(
                            &geometric_weights(*eps, *n, c).expect("validated"),
                            GEOMETRIC_COIN_BITS,
                        )
                    })
                    .collect();
                let pairs: Vec<(&FiniteDistribution, &FiniteDistribution)> =
                    dists.windows(2).map(|w| (&w[0], &w[1])).collect();
                let realized = pairs
                    .iter()
                    .map(|(p, q)| max_log_ratio(p, q).max(max_log_ratio(q, p)))
                    .fold(0.0, f64::max);
                let mut out = vec![LossValue::ApproxDp { eps: realized, delta: 0.0 }];
                for &alpha in &DEFAULT_ALPHA_GRID {
                    let d = pairs
                        .iter()
                        .map(|(p, q)| symmetric_renyi(p, q, alpha))
                        .fold(0.0, f64::max);
                    out.push(LossValue::Renyi { alpha, eps: d });
                }
                out.push(LossValue::Zcdp { rho: realized * realized / 2.0 });
                out.push(LossValue::Tradeoff(fdp_curve(realized, 0.0).expect("finite eps")));
                out
            }
        }
    }

    fn name(&self) -> String {
        match self {
            Sampler::Rr { eps } => format!("rr(eps={eps})"),
            Sampler::Const { payload } => format!("const({payload:?})"),
            Sampler::Geometric { eps, n } => format!("geometric(eps={eps}, n={n})"),
        }
    }

    fn write(&self, w: &mut Writer) {
        match self {
            Sampler::Rr { eps } => {
                w.u8(1);
                w.f64(*eps);
            }
            Sampler::Const { payload } => {
                w.u8(3);
                w.bytes(payload.as_bytes());
            }
            Sampler::Geometric { eps, n } => {
                w.u8(5);
                w.f64(*eps);
                w.u8(*n);
            }
        }
    }

    fn read(r: &mut Reader<'_>) -> Option<Sampler> {
        Some(match r.u8()? {
            1 => Sampler::Rr { eps: r.f64()? },
            3 => Sampler::Const {
                payload: Payload::from(r.bytes()?),
            },
            5 => Sampler::Geometric {
                eps: r.f64()?,
                n: r.u8()?,
            },
            _ => return None,
        })
    }
}

fn check_payload(p: &Payload) -> Result<(), MechanismError> {
    if p.as_bytes().is_empty() {
        Err(MechanismError::InvalidParameter("constant payload is empty".into()))
    } else {
        Ok(())
    }
}

fn geometric_count(data: &Dataset, n: u8) -> u8 {
    data.count_nonzero().min(usize::from(n)) as u8
}

fn max_log_ratio(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    p.support()
        .map(|x| {
            let qx = q.prob(x);
            if qx.is_zero() {
                f64::INFINITY
            } else {
                ln_rational(&(p.prob(x) / qx))
            }
        })
        .fold(0.0, f64::max)
}

fn zero_losses() -> Vec<LossValue> {
    let mut out = vec![LossValue::ApproxDp { eps: 0.0, delta: 0.0 }];
    out.extend(DEFAULT_ALPHA_GRID.iter().map(|&alpha| LossValue::Renyi { alpha, eps: 0.0 }));
    out.push(LossValue::Zcdp { rho: 0.0 });
    out.push(LossValue::Tradeoff(fdp_curve(0.0, 0.0).expect("identity")));
    out
}

/// Losses of an `eps`-DP mechanism whose neighboring output laws are `p`, `q`.
fn pure_dp_losses(eps: f64, p: &FiniteDistribution, q: &FiniteDistribution) -> Vec<LossValue> {
    let mut out = vec![LossValue::ApproxDp { eps, delta: 0.0 }];
    out.extend(DEFAULT_ALPHA_GRID.iter().map(|&alpha| LossValue::Renyi {
        alpha,
        eps: symmetric_renyi(p, q, alpha),
    }));
    out.push(LossValue::Zcdp { rho: eps * eps / 2.0 });
    out.push(LossValue::Tradeoff(fdp_curve(eps, 0.0).expect("eps >= 0")));
    out
}

/// Joint law of both two-round answers, outcomes `b"a1a2"`.
pub fn two_round_distribution(eps1: f64, eps2: f64, bit: bool) -> FiniteDistribution {
    let (k1, k2) = (rr_keep_numerator(eps1), rr_keep_numerator(eps2));
    let first = rr_output(bit, k1);
    let mut mass = BTreeMap::new();
    for (a1, p1) in first.mass() {
        let flipped = bit ^ (a1.as_slice() == b"1");
        for (a2, p2) in rr_output(flipped, k2).mass() {
            let mut key = a1.clone();
            key.extend_from_slice(a2);
            mass.insert(key, p1 * p2);
        }
    }
    FiniteDistribution::new(mass).expect("product of laws")
}

impl MechanismSpec {
    pub fn validate(&self) -> Result<(), MechanismError> {
        match self {
            MechanismSpec::Rr { eps } => check_eps(*eps),
            MechanismSpec::TwoRoundRr { eps1, eps2 } => check_eps(*eps1).and(check_eps(*eps2)),
            MechanismSpec::Const { payload } => check_payload(payload),
            MechanismSpec::OneShot(s) => s.validate(),
            MechanismSpec::Geometric { eps, n } => check_geometric(*eps, *n),
        }
    }

    pub fn build(&self) -> Result<Arc<dyn Mechanism>, MechanismError> {
        self.validate()?;
        Ok(Arc::new(Leaf::new(self.clone())))
    }

    pub fn name(&self) -> String {
        match self {
            MechanismSpec::Rr { eps } => format!("rr(eps={eps})"),
            MechanismSpec::TwoRoundRr { eps1, eps2 } => format!("two_round_rr(eps1={eps1}, eps2={eps2})"),
            MechanismSpec::Const { payload } => format!("const({payload:?})"),
            MechanismSpec::OneShot(s) => format!("one_shot({})", s.name()),
            MechanismSpec::Geometric { eps, n } => format!("geometric(eps={eps}, n={n})"),
        }
    }

    fn compute_declared(&self) -> Vec<LossValue> {
        match self {
            MechanismSpec::Rr { eps } => Sampler::Rr { eps: *eps }.declared_losses(),
            MechanismSpec::Const { payload } => Sampler::Const { payload: payload.clone() }.declared_losses(),
            MechanismSpec::OneShot(s) => s.declared_losses(),
            MechanismSpec::Geometric { eps, n } => Sampler::Geometric { eps: *eps, n: *n }.declared_losses(),
            MechanismSpec::TwoRoundRr { eps1, eps2 } => {
                let total = eps1 + eps2;
                let p = two_round_distribution(*eps1, *eps2, true);
                let q = two_round_distribution(*eps1, *eps2, false);
                let mut out = pure_dp_losses(total, &p, &q);
                for v in &mut out {
                    if let LossValue::Zcdp { rho } = v {
                        *rho = (eps1 * eps1 + eps2 * eps2) / 2.0;
                    }
                }
                out
            }
        }
    }

    /// Declared losses; empty when the spec is invalid.
    pub fn declared_losses(&self) -> Vec<LossValue> {
        match self.validate() {
            Ok(()) => {
                static CACHE: OnceLock<Mutex<HashMap<Vec<u8>, Vec<LossValue>>>> = OnceLock::new();
                let cache = CACHE.get_or_init(Default::default);
                let key = self.to_wire();
                if let Some(hit) = cache.lock().expect("cache lock").get(&key) {
                    return hit.clone();
                }
                let losses = self.compute_declared();
                cache.lock().expect("cache lock").insert(key, losses.clone());
                losses
            }
            Err(_) => Vec::new(),
        }
    }

    /// Whether some declared loss is at most `claimed`.
    pub fn certifies(&self, claimed: &LossValue) -> bool {
        self.declared_losses()
            .iter()
            .any(|d| matches!(loss_leq(d, claimed), Ok(true)))
    }

    pub fn is_noninteractive(&self) -> bool {
        matches!(self, MechanismSpec::OneShot(_) | MechanismSpec::Const { .. })
    }

    pub fn to_wire(&self) -> Vec<u8> {
        let mut w = Writer::new();
        match self {
            MechanismSpec::Rr { eps } => {
                w.u8(1);
                w.f64(*eps);
            }
            MechanismSpec::TwoRoundRr { eps1, eps2 } => {
                w.u8(2);
                w.f64(*eps1);
                w.f64(*eps2);
            }
            MechanismSpec::Const { payload } => {
                w.u8(3);
                w.bytes(payload.as_bytes());
            }
            MechanismSpec::OneShot(s) => {
                w.u8(4);
                s.write(&mut w);
            }
            MechanismSpec::Geometric { eps, n } => {
                w.u8(5);
                w.f64(*eps);
                w.u8(*n);
            }
        }
        w.finish()
    }

    pub fn from_wire(bytes: &[u8]) -> Option<MechanismSpec> {
        let mut r = Reader::new(bytes);
        let spec = match r.u8()? {
            1 => MechanismSpec::Rr { eps: r.f64()? },
            2 => MechanismSpec::TwoRoundRr {
                eps1: r.f64()?,
                eps2: r.f64()?,
            },
            3 => MechanismSpec::Const {
                payload: Payload::from(r.bytes()?),
            },
            4 => MechanismSpec::OneShot(Sampler::read(&mut r)?),
            5 => MechanismSpec::Geometric {
                eps: r.f64()?,
                n: r.u8()?,
            },
            _ => return None,
        };
        r.is_empty().then_some(spec)
    }
}

/// A leaf mechanism built from a [`MechanismSpec`].
#[derive(Debug, Clone)]
pub struct Leaf {
    spec: MechanismSpec,
}

impl Leaf {
    /// Does not validate; [`MechanismSpec::build`] does.
    pub fn new(spec: MechanismSpec) -> Self {
        Self { spec }
    }

    pub fn spec(&self) -> &MechanismSpec {
        &self.spec
    }

    fn rr_bit(bit: bool, eps: f64, coins: &mut Coins<'_>) -> bool {
        let keep = coins.bernoulli(rr_keep_numerator(eps), RR_COIN_BITS);
        bit == keep
    }

    fn query(&self, ls: &LeafState, coins: &mut Coins<'_>) -> (LeafState, Message) {
        let bit = ls.data.first_bit();
        let mut next = ls.clone();
        let exhausted = (ls.clone(), Message::Invalid);
        let answer = match (&self.spec, ls.round) {
            (MechanismSpec::Const { payload }, _) => return (next, Message::Answer(payload.clone())),
            (MechanismSpec::Rr { eps }, 0) => bit_payload(Self::rr_bit(bit, *eps, coins)),
            (MechanismSpec::Geometric { eps, n }, 0) => {
                Sampler::Geometric { eps: *eps, n: *n }.sample(&ls.data, coins)
            }
            (MechanismSpec::TwoRoundRr { eps1, .. }, 0) => {
                let a1 = Self::rr_bit(bit, *eps1, coins);
                next.memory = vec![u8::from(a1)];
                bit_payload(a1)
            }
            (MechanismSpec::TwoRoundRr { eps2, .. }, 1) => {
                let a1 = ls.memory.first().is_some_and(|&b| b != 0);
                bit_payload(Self::rr_bit(bit ^ a1, *eps2, coins))
            }
            _ => return exhausted,
        };
        next.round += 1;
        (next, Message::Answer(answer))
    }
}

fn bit_payload(b: bool) -> Payload {
    Payload::from(if b { "1" } else { "0" })
}

impl Mechanism for Leaf {
    fn name(&self) -> String {
        self.spec.name()
    }

    fn step(
        &self,
        state: &State,
        msg: &Message,
        coins: &mut Coins<'_>,
    ) -> Result<(State, Message), ProtocolError> {
        match (state, msg) {
            (State::Fresh(x), Message::Init) => {
                let ls = LeafState {
                    data: x.clone(),
                    round: 0,
                    memory: Vec::new(),
                };
                let (round, answer) = match &self.spec {
                    MechanismSpec::Const { payload } => (0, payload.clone()),
                    MechanismSpec::OneShot(s) => (1, s.sample(x, coins)),
                    _ => (0, Payload::from(READY)),
                };
                Ok((State::Leaf(LeafState { round, ..ls }), Message::Answer(answer)))
            }
            (State::Fresh(_), _) => Ok((state.clone(), Message::Invalid)),
            (State::Leaf(ls), Message::Query(_)) => {
                let (next, a) = self.query(ls, coins);
                Ok((State::Leaf(next), a))
            }
            (State::Leaf(_), _) => Ok((state.clone(), Message::Invalid)),
            _ => Err(ProtocolError::ForeignState {
                mechanism: self.name(),
            }),
        }
    }

    fn declared_losses(&self) -> Vec<LossValue> {
        self.spec.declared_losses()
    }

    fn comm_bound(&self) -> usize {
        LEAF_COMM_BOUND
    }
}

pub fn randomized_response(eps: f64) -> Result<Arc<dyn Mechanism>, MechanismError> {
    MechanismSpec::Rr { eps }.build()
}

pub fn two_round_rr(eps1: f64, eps2: f64) -> Result<Arc<dyn Mechanism>, MechanismError> {
    MechanismSpec::TwoRoundRr { eps1, eps2 }.build()
}

pub fn constant_answer(payload: impl Into<Payload>) -> Result<Arc<dyn Mechanism>, MechanismError> {
    MechanismSpec::Const {
        payload: payload.into(),
    }
    .build()
}

pub fn one_shot(inner: Sampler) -> Result<Arc<dyn Mechanism>, MechanismError> {
    MechanismSpec::OneShot(inner).build()
}

pub fn geometric_count_mechanism(eps: f64, n: u8) -> Result<Arc<dyn Mechanism>, MechanismError> {
    MechanismSpec::Geometric { eps, n }.build()
}
