#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, RngCore};
use seqgen::artifact::ArtifactHeader;
use seqgen::exec::Phase;
use seqgen::session::{Session, StepResult};
use seqgen::shrink::{delete_with_dependents, ShrinkTarget};
use seqgen::{Arg, CallStep, Registry, State, StepKind, TestArtifact, TestCase, Value, ValueKind};

fn int() -> ValueKind {
    ValueKind::Int32
}

pub fn new_account(var: &str, balance: i32, min: i32) -> CallStep {
    CallStep::construct(
        "Account",
        vec![int(), int()],
        vec![Arg::Int(balance), Arg::Int(min)],
        var,
    )
}

pub fn account_op(var: &str, op: &ModelOp) -> CallStep {
    match op {
        ModelOp::Credit(a) => {
            CallStep::invoke("Account", var, "credit", vec![int()], vec![Arg::Int(*a)])
        }
        ModelOp::Debit(a) => {
            CallStep::invoke("Account", var, "debit", vec![int()], vec![Arg::Int(*a)])
        }
        ModelOp::SetMin(m) => {
            CallStep::invoke("Account", var, "setMin", vec![int()], vec![Arg::Int(*m)])
        }
        ModelOp::Cancel => CallStep::invoke("Account", var, "cancel", vec![], vec![]),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelOp {
    Credit(i32),
    Debit(i32),
    SetMin(i32),
    Cancel,
}

/// Reference account: unbounded integers and an explicit undo stack.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelAccount {
    pub balance: i128,
    pub min: i128,
    /// Balances to restore, most recent last.
    pub undo: Vec<i128>,
}

impl ModelAccount {
    pub fn new(balance: i32, min: i32) -> Self {
        Self {
            balance: balance.into(),
            min: min.into(),
            undo: Vec::new(),
        }
    }

    pub fn apply(&mut self, op: &ModelOp) {
        match *op {
            ModelOp::Credit(a) => {
                self.undo.push(self.balance);
                self.balance += i128::from(a);
            }
            ModelOp::Debit(a) => {
                self.undo.push(self.balance);
                self.balance -= i128::from(a);
            }
            ModelOp::SetMin(m) => self.min = m.into(),
            ModelOp::Cancel => self.balance = self.undo.pop().expect("cancel on empty history"),
        }
    }
}

/// Uniform in `[lo, hi]`, or one of the ends a quarter of the time.
fn pick<R: RngCore + ?Sized>(rng: &mut R, lo: i64, hi: i64) -> i64 {
    match rng.gen_range(0..8) {
        0 => lo,
        1 => hi,
        2 => lo.saturating_add(rng.gen_range(0..=16)).min(hi),
        _ => rng.gen_range(lo..=hi),
    }
}

/// A random account and operations whose preconditions hold, whose values
/// stay in the int range, and whose minimum never exceeds a balance that
/// a later cancel could restore.
pub fn in_bounds_sequence<R: RngCore + ?Sized>(
    rng: &mut R,
    max_ops: usize,
) -> (i32, i32, Vec<ModelOp>) {
    let min = pick(rng, i64::from(i32::MIN), i64::from(i32::MAX)) as i32;
    let balance = pick(rng, i64::from(min), i64::from(i32::MAX)) as i32;
    let mut m = ModelAccount::new(balance, min);
    let n = rng.gen_range(0..=max_ops);
    let mut ops = Vec::with_capacity(n);
    for _ in 0..n {
        let b = m.balance as i64;
        let op = match rng.gen_range(0..4) {
            0 => ModelOp::Credit(
                pick(rng, 0, (i64::from(i32::MAX) - b).min(i64::from(i32::MAX))) as i32,
            ),
            1 => ModelOp::Debit(pick(rng, 0, (b - m.min as i64).min(i64::from(i32::MAX))) as i32),
            2 => {
                let ceiling = m.undo.iter().copied().chain([m.balance]).min().unwrap() as i64;
                ModelOp::SetMin(pick(rng, i64::from(i32::MIN), ceiling) as i32)
            }
            _ if !m.undo.is_empty() => ModelOp::Cancel,
            _ => ModelOp::Credit(0),
        };
        m.apply(&op);
        ops.push(op);
    }
    (balance, min, ops)
}

/// Balance, minimum and history balances (most recent last) of an account.
pub fn observe(session: &Session<'_>, var: &str) -> (i128, i128, Vec<i128>) {
    let heap = session.heap();
    let a = session
        .var(var)
        .and_then(|v| v.as_ref())
        .expect("bound account");
    let mut hist = Vec::new();
    let mut h = heap.reference(a, "hist");
    while let Some(id) = h {
        hist.push(i128::from(heap.int(id, "balance")));
        h = heap.reference(id, "prec");
    }
    hist.reverse();
    (
        heap.int(a, "balance").into(),
        heap.int(a, "min").into(),
        hist,
    )
}

/// Run a sequence against both the registry and the model. Returns the
/// number of steps at which they disagree.
pub fn model_mismatches(reg: &Registry, balance: i32, min: i32, ops: &[ModelOp]) -> usize {
    let mut session = Session::new(reg);
    let mut model = ModelAccount::new(balance, min);
    let mut mismatches = 0;
    let agree =
        |s: &Session<'_>, m: &ModelAccount| observe(s, "ob1") == (m.balance, m.min, m.undo.clone());
    if !matches!(
        session.execute_step(new_account("ob1", balance, min), Phase::Replay),
        StepResult::Done(_)
    ) || !agree(&session, &model)
    {
        return ops.len() + 1;
    }
    for op in ops {
        model.apply(op);
        let done = matches!(
            session.execute_step(account_op("ob1", op), Phase::Replay),
            StepResult::Done(_)
        );
        if !done || !agree(&session, &model) {
            mismatches += 1;
        }
        let get = CallStep::invoke("Account", "ob1", "getBalance", vec![], vec![])
            .binding(int(), &session.next_var());
        match session.execute_step(get, Phase::Replay) {
            StepResult::Done(Value::Int(v)) if i128::from(v) == model.balance => {}
            _ => mismatches += 1,
        }
    }
    mismatches
}

/// The set-min-then-cancel fault on account `target`, interleaved with valid operations
/// on other accounts and histories, `total` steps in all.
pub fn embed_set_min_cancel<R: RngCore + ?Sized>(rng: &mut R, total: usize) -> TestCase {
    let pattern = [
        new_account("target", -50, -100),
        account_op("target", &ModelOp::Credit(100)),
        account_op("target", &ModelOp::SetMin(0)),
        account_op("target", &ModelOp::Cancel),
    ];
    let noise_len = total - pattern.len();
    let mut noise = Vec::with_capacity(noise_len);
    let mut accounts: Vec<(String, ModelAccount)> = Vec::new();
    let mut fresh = 0;
    let mut name = |prefix: &str| {
        fresh += 1;
        format!("{prefix}{fresh}")
    };
    while noise.len() < noise_len {
        match rng.gen_range(0..6) {
            0 => {
                let v = name("n");
                let b = rng.gen_range(-1000..1000);
                noise.push(new_account(&v, b, b - 500));
                accounts.push((v, ModelAccount::new(b, b - 500)));
            }
            1 => {
                let v = name("h");
                let prec = noise
                    .iter()
                    .rev()
                    .find(|s: &&CallStep| s.type_name == "History" && s.kind == StepKind::Construct)
                    .and_then(|s| s.bind.clone())
                    .map_or(Arg::Null, Arg::Var);
                noise.push(CallStep::construct(
                    "History",
                    vec![int(), ValueKind::reference("History")],
                    vec![Arg::Int(rng.gen_range(-9..9)), prec],
                    &v,
                ));
            }
            _ if !accounts.is_empty() => {
                let k = rng.gen_range(0..accounts.len());
                let (var, m) = &mut accounts[k];
                let op = match rng.gen_range(0..4) {
                    0 => ModelOp::Credit(rng.gen_range(0..100)),
                    1 => ModelOp::Debit(rng.gen_range(0..=(m.balance - m.min).min(100) as i32)),
                    2 if !m.undo.is_empty() => ModelOp::Cancel,
                    _ => {
                        let v = name("g");
                        noise.push(
                            CallStep::invoke("Account", var, "getBalance", vec![], vec![])
                                .binding(int(), &v),
                        );
                        continue;
                    }
                };
                m.apply(&op);
                noise.push(account_op(var, &op));
            }
            _ => {}
        }
    }
    let mut steps = Vec::with_capacity(total);
    let slots: Vec<usize> = (0..pattern.len())
        .map(|i| (i + 1) * total / pattern.len() - 1)
        .collect();
    let mut noise = noise.into_iter();
    let mut pattern = pattern.into_iter();
    for i in 0..total {
        if slots.contains(&i) {
            steps.push(pattern.next().unwrap());
        } else {
            steps.push(noise.next().unwrap());
        }
    }
    TestCase {
        id: "embedded".into(),
        setup_steps: 0,
        steps,
    }
}

pub fn reproduces(reg: &Registry, steps: Vec<CallStep>, target: &ShrinkTarget) -> bool {
    let t = TestCase {
        id: "candidate".into(),
        setup_steps: 0,
        steps,
    };
    matches!(
        seqgen::replay::replay_test_case(reg, &t).failure(),
        Some(f) if f.kind == target.kind && f.contract == target.contract
    )
}

/// Deleting any single non-setup step, with its dependents, loses the
/// failure.
pub fn is_one_minimal(reg: &Registry, test: &TestCase, target: &ShrinkTarget) -> bool {
    (test.setup_steps..test.steps.len())
        .all(|i| !reproduces(reg, delete_with_dependents(&test.steps, &[i]), target))
}

fn ident() -> impl Strategy<Value = String> {
    "[A-Z][a-zA-Z0-9_]{0,8}"
}

fn kind() -> impl Strategy<Value = ValueKind> {
    prop_oneof![
        Just(ValueKind::Int32),
        Just(ValueKind::Boolean),
        ident().prop_map(ValueKind::Reference),
    ]
}

#[derive(Debug, Clone)]
enum RawArg {
    Int(i32),
    Bool(bool),
    Null,
    Var(usize),
}

fn raw_arg() -> impl Strategy<Value = RawArg> {
    prop_oneof![
        any::<i32>().prop_map(RawArg::Int),
        any::<bool>().prop_map(RawArg::Bool),
        Just(RawArg::Null),
        any::<usize>().prop_map(RawArg::Var),
    ]
}

type RawStep = (
    bool,
    String,
    String,
    Vec<ValueKind>,
    Vec<RawArg>,
    Option<ValueKind>,
    bool,
    usize,
);

fn raw_step() -> impl Strategy<Value = RawStep> {
    (
        any::<bool>(),
        ident(),
        "[a-z][a-zA-Z]{0,8}",
        prop::collection::vec(kind(), 0..4),
        prop::collection::vec(raw_arg(), 0..4),
        prop::option::of(kind()),
        any::<bool>(),
        any::<usize>(),
    )
}

/// Turn raw draws into a well-formed test case: variables are bound once
/// and read only after binding.
fn build_case(id: String, setup: usize, raw: Vec<RawStep>) -> TestCase {
    let mut bound: Vec<String> = Vec::new();
    let mut steps = Vec::new();
    for (construct, ty, op, signature, args, returns, bind, recv) in raw {
        let args = args
            .into_iter()
            .map(|a| match a {
                RawArg::Int(v) => Arg::Int(v),
                RawArg::Bool(v) => Arg::Bool(v),
                RawArg::Null => Arg::Null,
                RawArg::Var(k) if !bound.is_empty() => Arg::Var(bound[k % bound.len()].clone()),
                RawArg::Var(_) => Arg::Null,
            })
            .collect();
        let construct = construct || bound.is_empty();
        let step = if construct {
            CallStep::construct(&ty, signature, args, &format!("ob{}", bound.len() + 1))
        } else {
            let mut s = CallStep::invoke(&ty, &bound[recv % bound.len()], &op, signature, args);
            if bind {
                s = s.binding(
                    returns.unwrap_or(ValueKind::Int32),
                    &format!("ob{}", bound.len() + 1),
                );
            }
            s
        };
        if let Some(b) = &step.bind {
            bound.push(b.clone());
        }
        steps.push(step);
    }
    let setup_steps = setup.min(steps.len());
    TestCase {
        id,
        setup_steps,
        steps,
    }
}

pub fn artifact_strategy() -> impl Strategy<Value = TestArtifact> {
    let header = (
        "[ -~]{0,12}",
        any::<u64>(),
        any::<u32>(),
        "[0-9a-f]{64}",
        prop::option::of("[ -~]{0,20}"),
    );
    let tests = prop::collection::vec((0usize..3, prop::collection::vec(raw_step(), 0..12)), 0..6);
    (header, tests).prop_map(
        |((name, seed, attempts, digest, created), tests)| TestArtifact {
            header: ArtifactHeader {
                format_version: seqgen::artifact::FORMAT_VERSION,
                tool_version: seqgen::artifact::TOOL_VERSION.to_string(),
                name,
                seed,
                attempts_per_test: attempts,
                registry_digest: digest,
                rng: "chacha8".into(),
                created,
            },
            tests: tests
                .into_iter()
                .enumerate()
                .map(|(i, (setup, raw))| build_case(format!("test{}", i + 1), setup, raw))
                .collect(),
        },
    )
}
