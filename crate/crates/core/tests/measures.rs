use std::collections::BTreeMap;

use imdp_core::measures::{
    fdp_curve, hockey_stick, loss_leq, renyi_divergence, tradeoff_of, zcdp_distance,
    FiniteDistribution, LossValue, TradeoffFunction, DEFAULT_ALPHA_GRID,
};
use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use proptest::prelude::*;

fn r(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn dist(weights: &[u32]) -> FiniteDistribution {
    let total: u32 = weights.iter().sum();
    let mass: BTreeMap<Vec<u8>, BigRational> = weights
        .iter()
        .enumerate()
        .map(|(i, &w)| (vec![b'a' + i as u8], r(w as i64, total as i64)))
        .collect();
    FiniteDistribution::new(mass).unwrap()
}

fn weights(n: usize) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..12, n).prop_filter("nonzero", |w| w.iter().sum::<u32>() > 0)
}

fn pair() -> impl Strategy<Value = (FiniteDistribution, FiniteDistribution)> {
    (2usize..=4).prop_flat_map(|n| (weights(n), weights(n))).prop_map(|(a, b)| (dist(&a), dist(&b)))
}

fn positive_pair() -> impl Strategy<Value = (FiniteDistribution, FiniteDistribution)> {
    (2usize..=4)
        .prop_flat_map(|n| {
            let w = prop::collection::vec(1u32..12, n);
            (w.clone(), w)
        })
        .prop_map(|(a, b)| (dist(&a), dist(&b)))
}

fn outcome_mass(d: &FiniteDistribution, n: usize) -> Vec<BigRational> {
    (0..n).map(|i| d.prob(&[b'a' + i as u8])).collect()
}

/// Least type-II error at type-I level `alpha`, minimized over every vertex test.
fn brute_tradeoff(p: &[BigRational], q: &[BigRational], alpha: &BigRational) -> BigRational {
    let n = p.len();
    let mut best = BigRational::one();
    for set in 0u32..(1 << n) {
        let inside = |i: usize| set & (1 << i) != 0;
        let ps: BigRational = (0..n).filter(|&i| inside(i)).map(|i| p[i].clone()).sum();
        let qs: BigRational = (0..n).filter(|&i| inside(i)).map(|i| q[i].clone()).sum();
        if &ps <= alpha {
            best = best.min(BigRational::one() - &qs);
        }
        for e in (0..n).filter(|&i| !inside(i) && !p[i].is_zero()) {
            let t = (alpha - &ps) / &p[e];
            if t >= BigRational::zero() && t <= BigRational::one() {
                best = best.min(BigRational::one() - &qs - t * &q[e]);
            }
        }
    }
    best
}

fn probe_points(fs: &[&TradeoffFunction]) -> Vec<BigRational> {
    let mut pts: Vec<BigRational> = fs.iter().flat_map(|f| f.points().iter().map(|(a, _)| a.clone())).collect();
    for k in 0..=16 {
        pts.push(r(k, 16));
    }
    pts.sort();
    pts.dedup();
    let mids: Vec<BigRational> = pts.windows(2).map(|w| (&w[0] + &w[1]) / r(2, 1)).collect();
    pts.extend(mids);
    pts
}

/// Lower convex envelope of the pointwise minimum of `fs`.
fn lower_envelope(fs: &[TradeoffFunction]) -> Vec<(BigRational, BigRational)> {
    let refs: Vec<&TradeoffFunction> = fs.iter().collect();
    let mut pts: Vec<(BigRational, BigRational)> = probe_points(&refs)
        .into_iter()
        .map(|a| {
            let v = fs.iter().map(|f| f.value_at(&a)).min().unwrap();
            (a, v)
        })
        .collect();
    pts.sort();
    let mut hull: Vec<(BigRational, BigRational)> = Vec::new();
    for p in pts {
        while hull.len() >= 2 {
            let (o, a) = (&hull[hull.len() - 2], &hull[hull.len() - 1]);
            let cross = (&a.0 - &o.0) * (&p.1 - &o.1) - (&a.1 - &o.1) * (&p.0 - &o.0);
            if cross <= BigRational::zero() {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    hull
}

fn hull_at(hull: &[(BigRational, BigRational)], a: &BigRational) -> BigRational {
    for w in hull.windows(2) {
        if &w[0].0 <= a && a <= &w[1].0 {
            if w[1].0 == w[0].0 {
                return w[0].1.clone().min(w[1].1.clone());
            }
            let t = (a - &w[0].0) / (&w[1].0 - &w[0].0);
            return &w[0].1 + t * (&w[1].1 - &w[0].1);
        }
    }
    unreachable!()
}

fn relabel(d: &FiniteDistribution, g: &[u8]) -> FiniteDistribution {
    d.map(|x| vec![g[(x[0] - b'a') as usize]])
}

#[test]
fn bernoulli_closed_form() {
    let p = FiniteDistribution::bernoulli_ratio(3, 4).unwrap();
    let q = FiniteDistribution::bernoulli_ratio(1, 4).unwrap();
    let d = renyi_divergence(&p, &q, 2.0).unwrap();
    assert!((d - (7.0f64 / 3.0).ln()).abs() < 1e-12);
    assert_eq!(hockey_stick(&p, &q, 3f64.ln()), 0.0);
    assert!((hockey_stick(&p, &q, 0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn tradeoff_order_examples() {
    let a = LossValue::tradeoff(fdp_curve(2f64.ln(), 0.0).unwrap());
    let b = LossValue::tradeoff(fdp_curve(3f64.ln(), 0.0).unwrap());
    // f1 ⪯ f2 iff f1 >= f2 pointwise; the ln 2 curve lies above the ln 3 curve
    assert!(loss_leq(&a, &b).unwrap());
    assert!(!loss_leq(&b, &a).unwrap());
}

#[test]
fn approx_order_examples() {
    let a = LossValue::approx(0.5, 0.0).unwrap();
    let b = LossValue::approx(0.5, 1e-6).unwrap();
    let c = LossValue::approx(0.6, 0.0).unwrap();
    assert!(loss_leq(&a, &b).unwrap());
    assert!(!loss_leq(&b, &c).unwrap());
    assert!(!loss_leq(&c, &b).unwrap());
    assert!(loss_leq(&a, &LossValue::renyi(2.0, 1.0).unwrap()).is_err());
}

#[test]
fn loss_json_shapes() {
    let v = LossValue::approx(0.5, 1e-6).unwrap();
    assert_eq!(serde_json::to_string(&v).unwrap(), r#"{"approx":{"eps":0.5,"del":1e-6}}"#);
    let t = LossValue::tradeoff(fdp_curve(0.0, 0.0).unwrap());
    let back: LossValue = serde_json::from_str(&serde_json::to_string(&t).unwrap()).unwrap();
    assert_eq!(back, t);
    let z: LossValue = serde_json::from_str(r#"{"zcdp":{"rho":0.25}}"#).unwrap();
    assert_eq!(z, LossValue::zcdp(0.25).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn tradeoff_matches_brute_force((p, q) in pair()) {
        let n = 4;
        let (pm, qm) = (outcome_mass(&p, n), outcome_mass(&q, n));
        let f = tradeoff_of(&p, &q);
        for a in probe_points(&[&f]) {
            let want = brute_tradeoff(&pm, &qm, &a);
            let got = f.value_at(&a);
            prop_assert!((got - want).abs().to_f64().unwrap() <= 1e-12);
        }
    }

    #[test]
    fn hockey_zero_iff_pointwise_dominated((p, q) in pair(), eps in 0.0f64..2.0) {
        let scale = BigRational::from_float(eps.exp()).unwrap();
        let dominated = (0..4u8).all(|i| {
            let x = [b'a' + i];
            p.prob(&x) <= &scale * q.prob(&x)
        });
        prop_assert_eq!(hockey_stick(&p, &q, eps) == 0.0, dominated);
    }

    #[test]
    fn data_processing((p, q) in positive_pair(), g in prop::collection::vec(0u8..3, 4), eps in 0.0f64..2.0) {
        let g: Vec<u8> = g.into_iter().map(|c| b'x' + c).collect();
        let (gp, gq) = (relabel(&p, &g), relabel(&q, &g));
        for alpha in DEFAULT_ALPHA_GRID {
            let before = renyi_divergence(&p, &q, alpha).unwrap();
            let after = renyi_divergence(&gp, &gq, alpha).unwrap();
            prop_assert!(after <= before + 1e-9, "alpha {alpha}: {after} > {before}");
        }
        prop_assert!(hockey_stick(&gp, &gq, eps) <= hockey_stick(&p, &q, eps) + 1e-12);
        let (f, h) = (tradeoff_of(&p, &q), tradeoff_of(&gp, &gq));
        for a in probe_points(&[&f, &h]) {
            prop_assert!(h.value_at(&a) >= f.value_at(&a));
        }
    }

    #[test]
    fn joint_convexity(
        parts in prop::collection::vec(((2usize..=4).prop_flat_map(|n| (weights(n), weights(n))), 1u32..5), 2..=3),
        eps in 0.0f64..2.0,
    ) {
        let total: u32 = parts.iter().map(|(_, w)| w).sum();
        let ps: Vec<(BigRational, FiniteDistribution)> =
            parts.iter().map(|((a, _), w)| (r(*w as i64, total as i64), dist(a))).collect();
        let qs: Vec<(BigRational, FiniteDistribution)> =
            parts.iter().map(|((_, b), w)| (r(*w as i64, total as i64), dist(b))).collect();
        let p = FiniteDistribution::mixture(&ps).unwrap();
        let q = FiniteDistribution::mixture(&qs).unwrap();
        let pairs: Vec<(&FiniteDistribution, &FiniteDistribution)> =
            ps.iter().zip(&qs).map(|((_, a), (_, b))| (a, b)).collect();

        for alpha in DEFAULT_ALPHA_GRID {
            let worst = pairs.iter().map(|(a, b)| renyi_divergence(a, b, alpha).unwrap()).fold(0.0, f64::max);
            let mixed = renyi_divergence(&p, &q, alpha).unwrap();
            prop_assert!(mixed <= worst + 1e-9 || worst.is_infinite());
        }
        let worst = pairs.iter().map(|(a, b)| hockey_stick(a, b, eps)).fold(0.0, f64::max);
        prop_assert!(hockey_stick(&p, &q, eps) <= worst + 1e-12);
        let worst = pairs.iter().map(|(a, b)| zcdp_distance(a, b, &DEFAULT_ALPHA_GRID).unwrap()).fold(0.0, f64::max);
        let mixed = zcdp_distance(&p, &q, &DEFAULT_ALPHA_GRID).unwrap();
        prop_assert!(mixed <= worst + 1e-9 || worst.is_infinite());

        let curves: Vec<TradeoffFunction> = pairs.iter().map(|(a, b)| tradeoff_of(a, b)).collect();
        let hull = lower_envelope(&curves);
        let f = tradeoff_of(&p, &q);
        for a in probe_points(&[&f]) {
            prop_assert!(f.value_at(&a) >= hull_at(&hull, &a));
        }
    }

    #[test]
    fn renyi_nondecreasing_in_order((p, q) in positive_pair()) {
        let ds: Vec<f64> = DEFAULT_ALPHA_GRID.iter().map(|&a| renyi_divergence(&p, &q, a).unwrap()).collect();
        for w in ds.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn loss_wire_round_trip(eps in 0.0f64..5.0, delta in 0.0f64..1.0, alpha in 1.01f64..64.0) {
        for v in [
            LossValue::approx(eps, delta).unwrap(),
            LossValue::renyi(alpha, eps).unwrap(),
            LossValue::zcdp(eps).unwrap(),
            LossValue::tradeoff(fdp_curve(eps, delta).unwrap()),
        ] {
            prop_assert_eq!(LossValue::from_wire(&v.to_wire()).unwrap(), v.clone());
            let json = serde_json::to_string(&v).unwrap();
            let back = serde_json::from_str::<LossValue>(&json).unwrap();
            prop_assert_eq!(serde_json::to_string(&back).unwrap(), json);
        }
    }
}
