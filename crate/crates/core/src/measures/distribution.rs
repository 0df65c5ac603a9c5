use std::collections::{BTreeMap, BTreeSet};

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};

use super::MeasureError;

/// Exact probability distribution over byte-string outcomes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteDistribution {
    mass: BTreeMap<Vec<u8>, BigRational>,
}

impl FiniteDistribution {
    /// Zero-mass outcomes are dropped. Masses must be nonnegative and sum to 1.
    pub fn new(mass: BTreeMap<Vec<u8>, BigRational>) -> Result<Self, MeasureError> {
        let mut total = BigRational::zero();
        for (k, v) in &mass {
            if v.is_negative() {
                return Err(MeasureError::InvalidDistribution(format!(
                    "negative mass at {}",
                    hex::encode(k)
                )));
            }
            total += v;
        }
        if !total.is_one() {
            return Err(MeasureError::InvalidDistribution(format!(
                "total mass {total} != 1"
            )));
        }
        Ok(Self {
            mass: mass.into_iter().filter(|(_, v)| !v.is_zero()).collect(),
        })
    }

    pub fn point(outcome: &[u8]) -> Self {
        Self {
            mass: BTreeMap::from([(outcome.to_vec(), BigRational::one())]),
        }
    }

    /// Outcomes `b"0"` and `b"1"`, the latter with probability `p`.
    pub fn bernoulli(p: BigRational) -> Result<Self, MeasureError> {
        let q = BigRational::one() - &p;
        Self::new(BTreeMap::from([(b"0".to_vec(), q), (b"1".to_vec(), p)]))
    }

    /// Bernoulli with probability `num/den`.
    pub fn bernoulli_ratio(num: i64, den: i64) -> Result<Self, MeasureError> {
        Self::bernoulli(ratio(num, den))
    }

    pub fn mass(&self) -> &BTreeMap<Vec<u8>, BigRational> {
        &self.mass
    }

    pub fn prob(&self, outcome: &[u8]) -> BigRational {
        self.mass.get(outcome).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn support(&self) -> impl Iterator<Item = &Vec<u8>> {
        self.mass.keys()
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    /// Push-forward along `g`.
    pub fn map(&self, mut g: impl FnMut(&[u8]) -> Vec<u8>) -> Self {
        let mut out: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
        for (k, v) in &self.mass {
            *out.entry(g(k)).or_insert_with(BigRational::zero) += v;
        }
        Self { mass: out }
    }

    /// `Σ wᵢ pᵢ`; weights must sum to 1.
    pub fn mixture(parts: &[(BigRational, FiniteDistribution)]) -> Result<Self, MeasureError> {
        let mut out: BTreeMap<Vec<u8>, BigRational> = BTreeMap::new();
        for (w, p) in parts {
            for (k, v) in &p.mass {
                *out.entry(k.clone()).or_insert_with(BigRational::zero) += w * v;
            }
        }
        Self::new(out)
    }
}

pub(crate) fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Union of the supports of `p` and `q`.
pub(crate) fn joint_support<'a>(
    p: &'a FiniteDistribution,
    q: &'a FiniteDistribution,
) -> BTreeSet<&'a Vec<u8>> {
    p.support().chain(q.support()).collect()
}

/// Natural log of a positive rational, stable for tiny and huge values.
pub(crate) fn ln_rational(r: &BigRational) -> f64 {
    debug_assert!(r.is_positive());
    ln_bigint(r.numer()) - ln_bigint(r.denom())
}

fn ln_bigint(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap_or(f64::INFINITY).ln();
    }
    let shift = bits - 900;
    let top: BigInt = n >> shift as usize;
    top.to_f64().unwrap_or(f64::INFINITY).ln() + shift as f64 * std::f64::consts::LN_2
}

pub(crate) fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        if r.is_positive() {
            f64::INFINITY
        } else if r.is_zero() {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    })
}
