//! The four commands, callable in-process.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use imdp_core::measures::{LossTag, LossValue, DEFAULT_ALPHA_GRID};
use imdp_core::mechanisms::{MechanismSpec, Sampler};
use imdp_core::oracle::{
    audit, divergence_in_units, enumerate_with_cap, AuditConfig, AuditReport, DEFAULT_LEAF_CAP,
};
use imdp_core::protocol::{
    drive_session, Adversary, Coins, Dataset, HaltReason, Message, SeededCoins, State, Truncation,
    ViewTranscript,
};
use imdp_core::strategy::{script_strategies, table_strategies};
use serde::Serialize;
use serde_json::{json, Value};

use crate::scenario::Scenario;
use crate::{CliError, EXIT_BUDGET_HALT, EXIT_CHECK_FAILED, EXIT_OK, FORMAT_VERSION};

/// A versioned JSON document plus the exit code it implies.
#[derive(Clone, Debug, PartialEq)]
pub struct Document {
    pub body: Value,
    pub code: i32,
}

impl Document {
    fn new(command: &str, key: &str, payload: Value, code: i32) -> Self {
        Self {
            body: json!({ "version": FORMAT_VERSION, "command": command, key: payload }),
            code,
        }
    }

    pub fn render(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.body).expect("documents serialize");
        s.push('\n');
        s
    }
}

/// Maps `f` over `items` on up to `jobs` threads, keeping input order.
fn par_map<T: Sync, R: Send>(items: &[T], jobs: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let jobs = jobs.clamp(1, items.len().max(1));
    if jobs == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(item) = items.get(i) else { break };
                let r = f(item);
                slots.lock().expect("result slots")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("result slots")
        .into_iter()
        .map(|r| r.expect("every item processed"))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunOutcome {
    AdversaryHalt,
    BudgetHalt,
    MechanismLimit,
    RoundBound,
    Truncated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HaltInfo {
    pub reason: String,
    /// 1-based index of the halting answer.
    pub round: usize,
    /// How many spawn requests had been sent, including the halting one.
    pub spawn: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub scenario: String,
    pub machine: String,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub halt: Option<HaltInfo>,
    pub children: usize,
    pub privacy_loss: Option<LossValue>,
    pub queries: Vec<Message>,
    pub transcript: ViewTranscript,
    pub transcript_hex: String,
}

impl RunReport {
    pub fn exit_code(&self) -> i32 {
        match self.outcome {
            RunOutcome::BudgetHalt | RunOutcome::MechanismLimit | RunOutcome::Truncated => {
                EXIT_BUDGET_HALT
            }
            RunOutcome::AdversaryHalt | RunOutcome::RoundBound => EXIT_OK,
        }
    }
}

fn view_of(answers: &[Message]) -> ViewTranscript {
    let mut v = ViewTranscript::new();
    for a in answers {
        v.push_coin();
        v.push_answer(a.clone());
    }
    v
}

/// Runs one scenario with the given seed.
pub fn run_scenario(s: &Scenario, seed: u64) -> Result<RunReport, CliError> {
    let mech = s.build()?;
    let adv = &s.adversary;
    let bound = mech.comm_bound();
    let truncation = s.truncation().map(|budget| Truncation { budget });
    let out = drive_session(adv, mech.as_ref(), &s.dataset, seed, bound, truncation)?;
    let answers: Vec<Message> = out.view.answers().cloned().collect();
    let mut queries: Vec<Message> = (0..answers.len())
        .map(|i| adv.next_query(&view_of(&answers[..i])))
        .collect();
    let next = adv.next_query(&view_of(&answers));

    let halt = answers.iter().position(|a| a.is_halt()).and_then(|i| match &answers[i] {
        Message::Halt(r) if *r != HaltReason::AdversaryHalt => Some((i, *r)),
        _ => None,
    });
    let outcome = match halt {
        Some((_, HaltReason::MechanismLimit)) => RunOutcome::MechanismLimit,
        Some(_) => RunOutcome::BudgetHalt,
        None if !out.view.is_complete() => RunOutcome::Truncated,
        None if answers.last().is_some_and(|a| a.is_halt()) || next.is_halt() => RunOutcome::AdversaryHalt,
        None => RunOutcome::RoundBound,
    };
    // the adversary's last query: its halt, or the query whose answer was cut
    if matches!(outcome, RunOutcome::AdversaryHalt | RunOutcome::Truncated)
        && !answers.last().is_some_and(|a| a.is_halt())
    {
        queries.push(next);
    }
    let halt = halt.map(|(i, r)| HaltInfo {
        reason: r.to_string(),
        round: i + 1,
        spawn: queries[..=i].iter().filter(|q| matches!(q, Message::Spawn { .. })).count(),
    });
    let children = match &out.state {
        State::Composite(cs) => cs.children.len(),
        _ => 0,
    };
    let privacy_loss = if s.machine.is_odometer() {
        let mut src = SeededCoins::new(seed);
        let (_, a) = mech.step(&out.state, &Message::PrivacyLoss, &mut Coins::root(&mut src, out.position))?;
        match a {
            Message::Answer(p) => LossValue::from_wire(p.as_bytes()),
            _ => None,
        }
    } else {
        None
    };
    Ok(RunReport {
        scenario: s.label(),
        machine: s.machine.to_string(),
        seed,
        outcome,
        halt,
        children,
        privacy_loss,
        queries,
        transcript_hex: hex::encode(out.view.to_wire()),
        transcript: out.view,
    })
}

/// `run` over several scenarios; the exit code is the most severe one.
pub fn run_many(scenarios: &[Scenario], seed: Option<u64>, jobs: usize) -> Result<(Document, Vec<RunReport>), CliError> {
    let results = par_map(scenarios, jobs, |s| run_scenario(s, seed.unwrap_or(s.seed)));
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let code = reports.iter().map(RunReport::exit_code).max().unwrap_or(EXIT_OK);
    let body = serde_json::to_value(&reports).expect("reports serialize");
    Ok((Document::new("run", "runs", body, code), reports))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasureKind {
    Approx,
    Renyi,
    Zcdp,
    Tradeoff,
}

impl MeasureKind {
    fn matches(self, tag: LossTag) -> bool {
        matches!(
            (self, tag),
            (MeasureKind::Approx, LossTag::ApproxDp)
                | (MeasureKind::Renyi, LossTag::Renyi(_))
                | (MeasureKind::Zcdp, LossTag::Zcdp)
                | (MeasureKind::Tradeoff, LossTag::Tradeoff)
        )
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub budget: Option<LossValue>,
    pub measure: Option<MeasureKind>,
    pub tolerance: f64,
    pub alpha_grid: Vec<f64>,
    pub max_rounds: Option<usize>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            budget: None,
            measure: None,
            tolerance: 1e-9,
            alpha_grid: DEFAULT_ALPHA_GRID.to_vec(),
            max_rounds: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub machine: String,
    pub measure: String,
    pub claimed: LossValue,
    pub observed: f64,
    pub margin: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub truncated: bool,
    /// Support sizes of the two view distributions.
    pub views: [usize; 2],
}

/// Compares the exact divergence of the scenario's views on its dataset pair
/// against the claimed budget.
pub fn verify_scenario(s: &Scenario, opts: &VerifyOptions) -> Result<VerifyReport, CliError> {
    let claimed = opts
        .budget
        .clone()
        .or_else(|| s.budget.clone())
        .ok_or_else(|| CliError::Usage(format!("{}: no budget to verify against", s.label())))?;
    if let Some(m) = opts.measure {
        if !m.matches(claimed.tag()) {
            return Err(CliError::Usage(format!(
                "measure {m:?} does not match the {} budget",
                claimed.tag()
            )));
        }
    }
    let neighbor = s
        .neighbor
        .as_ref()
        .ok_or_else(|| CliError::Scenario(format!("{}: verify needs a \"neighbor\" dataset", s.label())))?;
    let mech = s.build()?;
    let rounds = opts.max_rounds.unwrap_or_else(|| mech.comm_bound());
    let truncation = s.truncation();
    let law = |x: &Dataset| {
        enumerate_with_cap(&s.adversary, mech.as_ref(), x, rounds, truncation, DEFAULT_LEAF_CAP)
            .map(|v| v.to_distribution())
    };
    let (p, q) = (law(&s.dataset)?, law(neighbor)?);
    let (a, cap) = divergence_in_units(&p, &q, &claimed, &opts.alpha_grid)?;
    let (b, _) = divergence_in_units(&q, &p, &claimed, &opts.alpha_grid)?;
    let observed = a.max(b);
    Ok(VerifyReport {
        scenario: s.label(),
        machine: s.machine.to_string(),
        measure: claimed.tag().to_string(),
        observed,
        margin: cap - observed,
        tolerance: opts.tolerance,
        pass: observed <= cap + opts.tolerance,
        truncated: truncation.is_some(),
        views: [p.len(), q.len()],
        claimed,
    })
}

pub fn verify_many(scenarios: &[Scenario], opts: &VerifyOptions, jobs: usize) -> Result<(Document, Vec<VerifyReport>), CliError> {
    let results = par_map(scenarios, jobs, |s| verify_scenario(s, opts));
    let reports = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let code = if reports.iter().all(|r| r.pass) { EXIT_OK } else { EXIT_CHECK_FAILED };
    let body = serde_json::to_value(&reports).expect("reports serialize");
    Ok((Document::new("verify", "reports", body, code), reports))
}

/// Audits a leaf mechanism against exhaustive scripts of length up to
/// `depth` and every depth-2 adaptive table over a three-query alphabet.
pub fn audit_mechanism(
    spec: &MechanismSpec,
    claimed: &LossValue,
    pair: (&Dataset, &Dataset),
    config: &AuditConfig,
    depth: usize,
) -> Result<(Document, AuditReport), CliError> {
    let mech = spec.build().map_err(|e| CliError::Usage(e.to_string()))?;
    let q = |s: &str| Message::query(s);
    let mut strategies = script_strategies(&[Message::Init], &[q("q"), q("r")], depth);
    strategies.extend(table_strategies(
        &[Message::Init],
        &[q("q"), q("r"), q("s")],
        &[Message::answer("0"), Message::answer("1")],
        2,
    ));
    let advs: Vec<&dyn Adversary> = strategies.iter().map(|s| s as &dyn Adversary).collect();
    let report = audit(mech.as_ref(), pair, claimed, &advs, config)?;
    let code = if report.pass { EXIT_OK } else { EXIT_CHECK_FAILED };
    let body = serde_json::to_value(&report).expect("report serializes");
    Ok((Document::new("audit", "report", body, code), report))
}

/// Every mechanism kind with an example spec and its declared losses.
pub fn list_mechanisms() -> Document {
    let examples = [
        ("rr", "randomized response on one bit; answers one query", MechanismSpec::Rr { eps: 3f64.ln() }),
        (
            "two_round_rr",
            "two correlated randomized-response rounds",
            MechanismSpec::TwoRoundRr { eps1: 3f64.ln(), eps2: 3f64.ln() },
        ),
        ("const", "answers a fixed payload", MechanismSpec::Const { payload: "c".into() }),
        (
            "geometric",
            "clamped two-sided geometric noise on a count",
            MechanismSpec::Geometric { eps: 1.0, n: 3 },
        ),
        (
            "one_shot",
            "noninteractive sampler answered on initialization",
            MechanismSpec::OneShot(Sampler::Rr { eps: 3f64.ln() }),
        ),
    ];
    let list: Vec<Value> = examples
        .iter()
        .map(|(kind, about, spec)| {
            json!({
                "kind": kind,
                "about": about,
                "interactive": !spec.is_noninteractive(),
                "example": spec,
                "declared": spec.declared_losses(),
            })
        })
        .collect();
    Document::new("list-mechanisms", "mechanisms", Value::Array(list), EXIT_OK)
}
