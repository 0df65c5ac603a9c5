//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any criterion fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use imdp_core::accountants::{
    rdp_additive_accumulator, rdp_additive_rule, rule_from_accumulator, whitehouse_rule,
    zcdp_additive_rule, ContinuationRule,
};
use imdp_core::composition::{
    concomp, filt_con_im, filter_as_truncated_odometer, odom_con_im, postprocess, truncate_view,
    two_slot_filter_wrapper, Channel, Composer, QueryAction, TablePostprocessor,
};
use imdp_core::measures::{
    hockey_stick, renyi_divergence, tradeoff_of, FiniteDistribution, LossValue, DEFAULT_ALPHA_GRID,
};
use imdp_core::mechanisms::{randomized_response, rr_for_renyi, two_round_rr, MechanismSpec};
use imdp_core::oracle::{enumerate_truncated_views, enumerate_views, ViewDistribution};
use imdp_core::protocol::{
    run_interaction, CoinDist, Dataset, Entry, HaltReason, Mechanism, Message, Payload,
    ScriptAdversary, ViewTranscript,
};
use imdp_core::strategy::{script_strategies, table_strategies, Pattern, Rule, StrategySpec};
use num::{BigInt, BigRational, ToPrimitive};
use rand::rngs::StdRng;
use rand::{RngExt, SeedableRng};

const TOL: f64 = 1e-9;
const SUITE: [f64; 3] = [0.3, 0.4, 0.6];
const ROUNDS: usize = 16;

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn x0() -> Dataset {
    Dataset::bit(false)
}

fn x1() -> Dataset {
    Dataset::bit(true)
}

fn renyi2(eps: f64) -> LossValue {
    LossValue::renyi(2.0, eps).unwrap()
}

fn rr_spawn(loss: f64) -> Message {
    let eps = rr_for_renyi(2.0, loss).unwrap();
    Message::spawn(MechanismSpec::Rr { eps }, renyi2(loss))
}

fn sub(j: u32) -> Message {
    Message::sub(j, Message::query("q"))
}

fn tenths(x: f64) -> i64 {
    (x * 10.0).round() as i64
}

fn laws(adv: &StrategySpec, m: &dyn Mechanism) -> (ViewDistribution, ViewDistribution) {
    (
        enumerate_views(adv, m, &x0(), ROUNDS).unwrap(),
        enumerate_views(adv, m, &x1(), ROUNDS).unwrap(),
    )
}

fn d2(p: &FiniteDistribution, q: &FiniteDistribution) -> f64 {
    renyi_divergence(p, q, 2.0).unwrap().max(renyi_divergence(q, p, 2.0).unwrap())
}

fn d2_views(p: &ViewDistribution, q: &ViewDistribution) -> f64 {
    d2(&p.to_distribution(), &q.to_distribution())
}

/// One suite scenario: its spawn losses in order of appearance and its adversary.
struct Case {
    label: String,
    adversary: StrategySpec,
    losses: BTreeMap<Vec<u8>, f64>,
}

fn register(losses: &mut BTreeMap<Vec<u8>, f64>, l: f64) -> Message {
    let m = rr_spawn(l);
    losses.insert(imdp_core::protocol::encode_message(&m), l);
    m
}

fn loss_sequences(max_len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut frontier: Vec<Vec<f64>> = vec![vec![]];
    for _ in 0..max_len {
        frontier = frontier
            .iter()
            .flat_map(|h| {
                SUITE.iter().map(move |&l| {
                    let mut g = h.clone();
                    g.push(l);
                    g
                })
            })
            .collect();
        out.extend(frontier.iter().cloned());
    }
    out
}

/// At most three children with losses from `SUITE`: alternating spawn/query
/// scripts, spawn-first scripts and adaptive scripts whose second spawn
/// depends on the first answer.
fn suite() -> Vec<Case> {
    let mut cases = Vec::new();
    for seq in loss_sequences(3) {
        let mut losses = BTreeMap::new();
        let mut alt = vec![Message::Init];
        for (i, &l) in seq.iter().enumerate() {
            alt.push(register(&mut losses, l));
            alt.push(sub(i as u32 + 1));
        }
        cases.push(Case {
            label: format!("alternate{seq:?}"),
            adversary: StrategySpec::script(alt),
            losses: losses.clone(),
        });
        let mut first = vec![Message::Init];
        first.extend(seq.iter().map(|&l| register(&mut losses, l)));
        first.extend((1..=seq.len() as u32).rev().map(sub));
        cases.push(Case {
            label: format!("spawns_first{seq:?}"),
            adversary: StrategySpec::script(first),
            losses,
        });
    }
    for a in SUITE {
        for b in SUITE {
            for c in SUITE {
                for d in SUITE {
                    let mut losses = BTreeMap::new();
                    let on_one = register(&mut losses, b);
                    let script = vec![
                        Message::Init,
                        register(&mut losses, a),
                        sub(1),
                        register(&mut losses, c),
                        sub(2),
                        register(&mut losses, d),
                        sub(3),
                    ];
                    let adversary = StrategySpec {
                        rules: vec![Rule {
                            after: vec![Pattern::Any, Pattern::Any, Pattern::Exact(Message::answer("1"))],
                            send: on_one,
                        }],
                        ..StrategySpec::script(script)
                    };
                    cases.push(Case {
                        label: format!("adaptive[{a}, {b}|{c}, {d}]"),
                        adversary,
                        losses,
                    });
                }
            }
        }
    }
    cases
}

fn queries_of(adv: &StrategySpec, view: &ViewTranscript) -> Vec<(Message, Message)> {
    let answers: Vec<&Message> = view.answers().collect();
    (0..answers.len())
        .map(|i| (adv.query_for(&answers[..i]), answers[i].clone()))
        .collect()
}

/// Checks every answer of `view` against a tenths-exact replay of the filter.
fn replay_filter(
    case: &Case,
    view: &ViewTranscript,
    cap: Option<usize>,
    seen: &mut [bool; 3],
) -> Result<(), String> {
    let mut spent = 0i64;
    let mut children = 0usize;
    let mut halted: Option<HaltReason> = None;
    for (i, (query, answer)) in queries_of(&case.adversary, view).into_iter().enumerate() {
        let expected = if let Some(r) = halted {
            Some(Message::Halt(r))
        } else {
            match &query {
                Message::Init => Some(Message::ready()),
                Message::Spawn { .. } => {
                    let l = tenths(case.losses[&imdp_core::protocol::encode_message(&query)]);
                    let m = if cap.is_some_and(|k| children >= k) {
                        seen[2] = true;
                        Message::Halt(HaltReason::MechanismLimit)
                    } else if spent + l > 10 {
                        seen[1] = true;
                        Message::Halt(HaltReason::BudgetExceeded)
                    } else {
                        seen[0] = true;
                        spent += l;
                        children += 1;
                        Message::ready()
                    };
                    if let Message::Halt(r) = m {
                        halted = Some(r);
                    }
                    Some(m)
                }
                _ => None,
            }
        };
        match expected {
            Some(e) => ensure(answer == e, || {
                format!("{}: answer {i} to {query:?} was {answer:?}, expected {e:?}", case.label)
            })?,
            None => ensure(
                answer == Message::answer("0") || answer == Message::answer("1"),
                || format!("{}: answer {i} was {answer:?}", case.label),
            )?,
        }
    }
    Ok(())
}

fn c1_concurrent_additivity() -> Outcome {
    let start = Instant::now();
    let rr = randomized_response(3f64.ln()).unwrap();
    let m = concomp(vec![rr.clone(), rr]);
    let alphabet = [sub(1), sub(2)];
    let classes = [Message::answer("0"), Message::answer("1")];
    let mut advs = script_strategies(&[Message::Init], &alphabet, 6);
    advs.extend(table_strategies(&[Message::Init], &alphabet, &classes, 3));
    let bound = 2.0 * (7f64 / 3.0).ln();
    let worst = par_max(&advs, |adv| {
        let (p, q) = laws(adv, &m);
        d2_views(&p, &q)
    });
    let elapsed = start.elapsed().as_secs_f64();
    ensure(worst <= bound + TOL, || format!("D2 {worst} exceeds {bound}"))?;
    ensure(elapsed < 10.0, || format!("took {elapsed:.2}s"))?;
    Ok(format!(
        "{} strategies, max D2 {worst:.12} <= {bound:.12}, margin {:.3e}, {elapsed:.2}s",
        advs.len(),
        bound - worst
    ))
}

fn par_max<T: Sync>(items: &[T], f: impl Fn(&T) -> f64 + Sync) -> f64 {
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(16);
    let chunk = items.len().div_ceil(workers).max(1);
    std::thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|part| s.spawn(|| part.iter().map(&f).fold(f64::NEG_INFINITY, f64::max)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).fold(f64::NEG_INFINITY, f64::max)
    })
}

fn rdp_filter(budget: f64) -> Composer {
    filt_con_im(Arc::new(rdp_additive_rule(2.0)), renyi2(budget))
}

fn c2_filter_soundness() -> Outcome {
    let cases = suite();
    let mut seen = [false; 3];
    let mut worst = f64::NEG_INFINITY;
    for (filter, cap) in [(rdp_filter(1.0), None), (rdp_filter(1.0).with_cap(2), Some(2))] {
        for case in &cases {
            let (p, q) = laws(&case.adversary, &filter);
            worst = worst.max(d2_views(&p, &q));
            for views in [&p, &q] {
                for (v, _) in views.views() {
                    replay_filter(case, &v, cap, &mut seen)?;
                }
            }
        }
    }
    ensure(worst <= 1.0 + TOL, || format!("D2 {worst} exceeds 1.0"))?;
    ensure(seen.iter().all(|&b| b), || format!("outcome coverage {seen:?}"))?;
    Ok(format!(
        "{} scenarios x 2 filters, max D2 {worst:.12}, halts exact, all three spawn outcomes reached",
        cases.len()
    ))
}

fn c3_odometer_truncation() -> Outcome {
    let odo = odom_con_im(Arc::new(rdp_additive_accumulator(2.0)));
    let budget = renyi2(1.0);
    let cases = suite();
    let mut worst = f64::NEG_INFINITY;
    for case in &cases {
        let p = enumerate_truncated_views(&case.adversary, &odo, &x0(), &budget, ROUNDS).unwrap();
        let q = enumerate_truncated_views(&case.adversary, &odo, &x1(), &budget, ROUNDS).unwrap();
        worst = worst.max(d2_views(&p, &q));
    }
    ensure(worst <= 1.0 + TOL, || format!("D2 {worst} exceeds 1.0"))?;

    // 0.6 then 0.6: Init -> ready (0), spawn -> ready (0.6), sub(1) -> bit
    // (0.6), second spawn would report 1.2, so the view stops after the bit.
    let adv = ScriptAdversary::new(vec![Message::Init, rr_spawn(0.6), sub(1), rr_spawn(0.6), sub(2)]);
    for seed in 0..16 {
        let v = truncate_view(&adv, &odo, &x1(), seed, &budget).unwrap();
        let e = v.entries();
        let shape_ok = !v.is_complete()
            && e.len() == 6
            && matches!(e[1], Entry::Answer(ref a) if *a == Message::ready())
            && matches!(e[3], Entry::Answer(ref a) if *a == Message::ready())
            && matches!(e[5], Entry::Answer(ref a) if *a == Message::answer("0") || *a == Message::answer("1"))
            && e.iter().step_by(2).all(|c| matches!(c, Entry::Coin(_)));
        ensure(shape_ok, || format!("seed {seed}: hand trace mismatch {e:?}"))?;
    }
    Ok(format!(
        "{} scenarios, max truncated D2 {worst:.12} <= 1.0, 0.6/0.6 view cut after 3 answers",
        cases.len()
    ))
}

fn c4_approx_filter() -> Outcome {
    let filter = filt_con_im(Arc::new(whitehouse_rule(1e-6).unwrap()), LossValue::approx(1.0, 1e-5).unwrap());
    let k = (1..100)
        .take_while(|&k| {
            let k = k as f64;
            (2.0 * 1e6f64.ln() * k * 0.01).sqrt() + k * 0.005 <= 1.0
        })
        .count();
    let spawn = Message::spawn(MechanismSpec::Rr { eps: 0.1 }, LossValue::approx(0.1, 0.0).unwrap());
    let mut script = vec![Message::Init];
    for j in 1..=(k as u32 + 2) {
        script.push(spawn.clone());
        script.push(sub(j));
    }
    let adv = StrategySpec::script(script);
    let (p, q) = laws(&adv, &filter);
    for (v, _) in p.views().into_iter().chain(q.views()) {
        let spawns: Vec<Message> = queries_of(&adv, &v)
            .into_iter()
            .filter(|(m, _)| matches!(m, Message::Spawn { .. }))
            .map(|(_, a)| a)
            .collect();
        let admitted = spawns.iter().take_while(|a| **a == Message::ready()).count();
        ensure(admitted == k, || format!("rule admitted {admitted}, direct evaluation gives {k}"))?;
        ensure(spawns.get(k) == Some(&Message::Halt(HaltReason::BudgetExceeded)), || {
            format!("spawn {} answered {:?}", k + 1, spawns.get(k))
        })?;
    }
    let (p, q) = (p.to_distribution(), q.to_distribution());
    let hs = hockey_stick(&p, &q, 1.0).max(hockey_stick(&q, &p, 1.0));
    ensure(hs <= 1e-5, || format!("hockey-stick {hs} exceeds 1e-5"))?;
    Ok(format!("k = {k} admitted, hockey-stick at 1.0 = {hs:.3e}"))
}

/// The view up to and including its first halt answer.
fn through_halt(v: &ViewTranscript) -> ViewTranscript {
    let mut out = ViewTranscript::new();
    for e in v.entries() {
        match e {
            Entry::Coin(_) => out.push_coin(),
            Entry::Answer(m) => {
                out.push_answer(m.clone());
                if matches!(m, Message::Halt(_)) {
                    out.mark_complete();
                    return out;
                }
            }
        }
    }
    if v.is_complete() {
        out.mark_complete();
    }
    out
}

fn c5_bijection() -> Outcome {
    let acc = Arc::new(rdp_additive_accumulator(2.0));
    let d = renyi2(1.0);
    let filter = filt_con_im(Arc::new(rule_from_accumulator(acc.clone())), d.clone());
    let bridged = filter_as_truncated_odometer(acc.clone(), d.clone());
    let odo = odom_con_im(acc);
    let cases = suite();
    let mut compared = 0;
    for case in &cases {
        for seed in 0..8 {
            for x in [x0(), x1()] {
                let a = run_interaction(&case.adversary, &filter, &x, seed).unwrap();
                let b = run_interaction(&case.adversary, &bridged, &x, seed).unwrap();
                ensure(through_halt(&a).to_wire() == through_halt(&b).to_wire(), || {
                    format!("{} seed {seed}: filter and bridged odometer differ", case.label)
                })?;
                let t = truncate_view(&case.adversary, &odo, &x, seed, &d).unwrap();
                let halt = a
                    .entries()
                    .iter()
                    .position(|e| matches!(e, Entry::Answer(Message::Halt(HaltReason::BudgetExceeded))));
                let same = match halt {
                    Some(h) => !t.is_complete() && t.entries() == &a.entries()[..h - 1],
                    None => t.to_wire() == a.to_wire(),
                };
                ensure(same, || format!("{} seed {seed}: truncated view differs from filter view", case.label))?;
                compared += 1;
            }
        }
    }
    Ok(format!("{compared} transcript pairs agree through the halt, truncated views match"))
}

fn random_table(rng: &mut StdRng) -> TablePostprocessor {
    let payloads = ["0", "1", "u", "v"];
    let pick = |rng: &mut StdRng| Payload::from(payloads[rng.random_range(0..payloads.len())]);
    let mut queries = Vec::new();
    for name in ["q", "r", "s"] {
        let action = match rng.random_range(0..4) {
            0 => continue,
            1 => QueryAction::Forward(Message::query("q")),
            2 => QueryAction::Reply(pick(rng)),
            _ => QueryAction::Pair(Message::query("q"), Message::query("q")),
        };
        queries.push((Message::query(name), action));
    }
    let mut channels = Vec::new();
    for input in ["0", "1"] {
        if rng.random_bool(0.25) {
            continue;
        }
        let k = rng.random_range(1..=3usize);
        let mut cuts: Vec<u64> = (0..k - 1).map(|_| rng.random_range(0..=16)).collect();
        cuts.sort();
        let mut weights = Vec::new();
        let mut prev = 0;
        for c in cuts {
            weights.push(c - prev);
            prev = c;
        }
        weights.push(16 - prev);
        channels.push(Channel {
            input: input.into(),
            dist: CoinDist::new(4, weights).unwrap(),
            outputs: (0..k).map(|_| pick(rng)).collect(),
        });
    }
    TablePostprocessor { queries, channels }
}

fn c6_postprocessing() -> Outcome {
    let ln3 = 3f64.ln();
    let ln9 = 9f64.ln();
    let inner = two_round_rr(ln3, ln3).unwrap();
    let base = StrategySpec::script(vec![Message::Init, Message::query("q"), Message::query("q")]);
    let (fp, fq) = laws(&base, inner.as_ref());
    let (fp, fq) = (fp.to_distribution(), fq.to_distribution());
    let full_d2 = d2(&fp, &fq);
    let full_hs = hockey_stick(&fp, &fq, ln9).max(hockey_stick(&fq, &fp, ln9));
    let (tf, tb) = (tradeoff_of(&fp, &fq), tradeoff_of(&fq, &fp));
    let alphabet = [Message::query("q"), Message::query("r"), Message::query("s")];
    let advs = script_strategies(&[Message::Init], &alphabet, 3);
    let mut rng = StdRng::seed_from_u64(0x5eed);
    let tables: Vec<TablePostprocessor> = (0..100).map(|_| random_table(&mut rng)).collect();
    let violations = par_max(&tables, |t| {
        let wrapped = postprocess(Arc::new(t.clone()), inner.clone());
        let mut bad = 0.0;
        for adv in &advs {
            let (p, q) = laws(adv, &wrapped);
            let (p, q) = (p.to_distribution(), q.to_distribution());
            let hs = hockey_stick(&p, &q, ln9).max(hockey_stick(&q, &p, ln9));
            let ok = d2(&p, &q) <= full_d2 + TOL
                && hs <= full_hs + TOL
                && tradeoff_of(&p, &q).max_shortfall(&tf) <= TOL
                && tradeoff_of(&q, &p).max_shortfall(&tb) <= TOL;
            if !ok {
                bad += 1.0;
            }
        }
        bad
    });
    ensure(violations == 0.0, || format!("{violations} violations in the worst postprocessor"))?;
    Ok(format!("100 postprocessors x {} adversaries, 0 violations", advs.len()))
}

fn c7_universal_equivalence() -> Outcome {
    let rule: Arc<dyn ContinuationRule> = Arc::new(rdp_additive_rule(2.0));
    let filter = rdp_filter(1.0).with_cap(2);
    let mut checked = 0;
    for l1 in SUITE {
        for l2 in SUITE {
            let first = match rr_spawn(l1) {
                Message::Spawn { mech, loss } => (mech, loss),
                _ => unreachable!(),
            };
            let wrapped = two_slot_filter_wrapper(first, rule.clone(), renyi2(1.0)).unwrap();
            let scripts = [
                vec![Message::Init, rr_spawn(l1), sub(1), rr_spawn(l2), sub(2)],
                vec![Message::Init, sub(1), rr_spawn(l1), sub(2), sub(1), rr_spawn(l2), sub(2), rr_spawn(0.1)],
                vec![Message::Init, rr_spawn(l1), rr_spawn(l2), sub(2), sub(1)],
            ];
            let mut advs: Vec<StrategySpec> = scripts.into_iter().map(StrategySpec::script).collect();
            for l3 in SUITE {
                advs.push(StrategySpec {
                    rules: vec![Rule {
                        after: vec![Pattern::Any, Pattern::Any, Pattern::Exact(Message::answer("1"))],
                        send: rr_spawn(l3),
                    }],
                    ..StrategySpec::script(vec![Message::Init, rr_spawn(l1), sub(1), rr_spawn(l2), sub(2)])
                });
            }
            for adv in &advs {
                for x in [x0(), x1()] {
                    let a = enumerate_views(adv, &filter, &x, ROUNDS).unwrap();
                    let b = enumerate_views(adv, &wrapped, &x, ROUNDS).unwrap();
                    ensure(a.mass() == b.mass(), || format!("view laws differ for losses {l1}, {l2}"))?;
                    checked += 1;
                }
            }
        }
    }
    Ok(format!("{checked} view distributions equal as exact rationals"))
}

fn c8_zcdp_scaling() -> Outcome {
    let mut histories = vec![vec![]];
    histories.extend(loss_sequences(3));
    let budgets = [0.3, 0.6, 0.7, 1.0, 1.2, 1.3, 2.0];
    let mut decisions = 0;
    for h in &histories {
        let z: Vec<LossValue> = h.iter().map(|&r| LossValue::zcdp(r).unwrap()).collect();
        for &b in &budgets {
            let want = zcdp_additive_rule().decide(&z, &LossValue::zcdp(b).unwrap()).unwrap();
            for alpha in DEFAULT_ALPHA_GRID {
                let scaled: Vec<LossValue> = h.iter().map(|&r| LossValue::renyi(alpha, r * alpha).unwrap()).collect();
                let got = rdp_additive_rule(alpha)
                    .decide(&scaled, &LossValue::renyi(alpha, b * alpha).unwrap())
                    .unwrap();
                ensure(got == want, || format!("{h:?} budget {b} alpha {alpha}: {got:?} vs {want:?}"))?;
                decisions += 1;
            }
        }
    }
    Ok(format!("{decisions} decisions agree across {} histories", histories.len()))
}

fn rational_dist(weights: &[u32]) -> FiniteDistribution {
    let total: u32 = weights.iter().sum();
    FiniteDistribution::new(
        weights
            .iter()
            .enumerate()
            .map(|(i, &w)| (vec![i as u8], BigRational::new(BigInt::from(w), BigInt::from(total))))
            .collect(),
    )
    .unwrap()
}

/// Least type-II error at level `alpha` over all randomized tests, taken as
/// the best interpolation between two deterministic tests that straddle it.
fn brute_force_tradeoff(p: &[f64], q: &[f64], alpha: f64) -> f64 {
    let n = p.len();
    let tests: Vec<(f64, f64)> = (0u32..1 << n)
        .map(|set| {
            let inside = |i: &usize| set & (1 << i) != 0;
            let a: f64 = (0..n).filter(inside).map(|i| p[i]).sum();
            let b: f64 = 1.0 - (0..n).filter(inside).map(|i| q[i]).sum::<f64>();
            (a, b)
        })
        .collect();
    let mut best = f64::INFINITY;
    for &(ai, bi) in &tests {
        if ai <= alpha {
            best = best.min(bi);
        }
        for &(aj, bj) in &tests {
            if ai < alpha && alpha < aj {
                let t = (alpha - ai) / (aj - ai);
                best = best.min(bi + t * (bj - bi));
            }
        }
    }
    best.max(0.0)
}

fn c9_measures() -> Outcome {
    let mut rng = StdRng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let n = rng.random_range(1..=4usize);
        let draw = |rng: &mut StdRng| loop {
            let w: Vec<u32> = (0..n).map(|_| rng.random_range(0..12)).collect();
            if w.iter().sum::<u32>() > 0 {
                return w;
            }
        };
        let (wp, wq) = (draw(&mut rng), draw(&mut rng));
        let (p, q) = (rational_dist(&wp), rational_dist(&wq));
        let to_f = |d: &FiniteDistribution| -> Vec<f64> {
            (0..n).map(|i| d.prob(&[i as u8]).to_f64().unwrap()).collect()
        };
        let (pf, qf) = (to_f(&p), to_f(&q));
        let f = tradeoff_of(&p, &q);
        let mut probes: Vec<f64> = (0..=200).map(|k| k as f64 / 200.0).collect();
        probes.extend(f.points().iter().map(|(a, _)| a.to_f64().unwrap()));
        for a in probes {
            let err = (f.eval(a) - brute_force_tradeoff(&pf, &qf, a)).abs();
            worst = worst.max(err);
            ensure(err <= 1e-12, || format!("{wp:?} vs {wq:?} at {a}: error {err}"))?;
        }
    }
    let three_quarters = FiniteDistribution::bernoulli_ratio(3, 4).unwrap();
    let quarter = FiniteDistribution::bernoulli_ratio(1, 4).unwrap();
    let r = renyi_divergence(&three_quarters, &quarter, 2.0).unwrap();
    let closed = (7f64 / 3.0).ln();
    ensure((r - closed).abs() <= 1e-12, || format!("D2 = {r}, closed form {closed}"))?;
    Ok(format!("100 pairs, max trade-off error {worst:.1e}; D2(3/4 || 1/4) = ln(7/3) to {:.1e}", (r - closed).abs()))
}

fn c10_determinism() -> Outcome {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/scenarios");
    let mut files: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path().display().to_string())
        .filter(|p| p.ends_with(".json"))
        .collect();
    files.sort();
    let run = |extra: &[&str]| {
        let out = Command::new(env!("CARGO_BIN_EXE_imdp"))
            .arg("run")
            .args(&files)
            .args(extra)
            .output()
            .unwrap();
        out.stdout
    };
    for seed in [None, Some("7"), Some("12345")] {
        let seed_args: Vec<&str> = seed.map(|s| vec!["--seed", s]).unwrap_or_default();
        let reference = run(&seed_args);
        ensure(!reference.is_empty(), || "empty run output".into())?;
        for jobs in ["1", "1", "2", "4", "8"] {
            let mut args = seed_args.clone();
            args.extend(["--jobs", jobs]);
            ensure(run(&args) == reference, || format!("seed {seed:?} --jobs {jobs} differs"))?;
        }
    }
    Ok(format!("{} scenarios x 3 seeds byte-identical across 6 runs each", files.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("concurrent RDP additivity", c1_concurrent_additivity),
        ("filter budget soundness", c2_filter_soundness),
        ("odometer truncation soundness", c3_odometer_truncation),
        ("approx-DP filter", c4_approx_filter),
        ("filter/odometer bijection", c5_bijection),
        ("postprocessing monotonicity", c6_postprocessing),
        ("universal-mechanism equivalence", c7_universal_equivalence),
        ("zCDP scaling identity", c8_zcdp_scaling),
        ("measures correctness", c9_measures),
        ("determinism", c10_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2}. {name}: {detail} [{secs:.2}s]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2}. {name}: {why} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
