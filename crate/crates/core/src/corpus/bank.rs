//! Bank accounts with an undo history.
//!
//! `Account` holds a balance, a minimum balance and a linked list of
//! `History` entries recording the balance before each credit or debit.
//! The contracts admit three known faults, kept on purpose:
//!
//! 1. `credit` overflows and wraps below the minimum.
//! 2. `setMin` raises the minimum, then `cancel` restores a balance below it.
//! 3. `debit` overflows into a large positive balance, `setMin` raises the
//!    minimum, and `cancel` restores the original negative balance.
//!
//! [`fixed_registry`] guards all three.

use rand::Rng;

use crate::artifact::{
    Arg, ArtifactHeader, CallStep, StepKind, TestArtifact, TestCase, FORMAT_VERSION, TOOL_VERSION,
};
use crate::contract::{OperationSpec, TypeUnderTest};
use crate::heap::State;
use crate::registry::{ParameterGenerator, Registry};
use crate::report::Failure;
use crate::value::{Value, ValueKind};

/// Contract variants of `Account`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct BankOptions {
    /// Guard credit, debit and cancel against the three known faults.
    pub guarded: bool,
    /// Lower bound on credited amounts. The original contract uses 0.
    pub credit_min_amount: i32,
}

fn int() -> ValueKind {
    ValueKind::Int32
}

fn history() -> ValueKind {
    ValueKind::reference("History")
}

pub fn history_type() -> TypeUnderTest {
    TypeUnderTest::new("History")
        .constructor(
            OperationSpec::constructor(vec![int(), history()], |ctx, args| {
                Ok(ctx
                    .heap_mut()
                    .alloc("History", [("balance", args[0]), ("prec", args[1])]))
            })
            .ensures(|v| {
                let h = v.this();
                v.now.field(h, "balance") == v.args[0] && v.now.field(h, "prec") == v.args[1]
            }),
        )
        .method(
            OperationSpec::method("getBalance", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "balance"))
            })
            .returns(int())
            .pure(),
        )
        .method(
            OperationSpec::method("getPrec", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "prec"))
            })
            .returns(history())
            .pure(),
        )
}

/// Shared body of credit and debit: push a history entry, then move the
/// balance with two's-complement wrapping.
fn push_and_set(
    ctx: &mut crate::exec::CallContext<'_>,
    this: crate::value::ObjId,
    balance: i32,
) -> Result<Value, crate::contract::Raised> {
    let old = ctx.heap().field(this, "balance");
    let prec = ctx.heap().field(this, "hist");
    let h = ctx.construct("History", &[old, prec])?;
    ctx.heap_mut().set(this, "hist", Value::Ref(h));
    ctx.heap_mut().set(this, "balance", balance);
    Ok(Value::Void)
}

/// The history postcondition shared by credit and debit, with the expected
/// new balance.
fn pushed_history(v: &crate::contract::PostView<'_>, expected: i32) -> bool {
    let this = v.this();
    let Some(h) = v.now.reference(this, "hist") else {
        return false;
    };
    v.now.int(this, "balance") == expected
        && v.is_fresh(Some(h))
        && v.now.int(h, "balance") == v.old.int(this, "balance")
        && v.now.reference(h, "prec") == v.old.reference(this, "hist")
}

pub fn account_type(opts: &BankOptions) -> TypeUnderTest {
    let guarded = opts.guarded;
    let credit_min = opts.credit_min_amount;
    let version = match (guarded, credit_min) {
        (false, 0) => "1".to_string(),
        (true, 0) => "fixed-1".to_string(),
        (false, m) => format!("credit-min-{m}-1"),
        (true, m) => format!("fixed-credit-min-{m}-1"),
    };
    TypeUnderTest::new("Account")
        .version(version)
        .invariant(|heap, this| heap.int(this, "balance") >= heap.int(this, "min"))
        .constructor(
            OperationSpec::constructor(vec![int(), int()], |ctx, args| {
                Ok(ctx.heap_mut().alloc(
                    "Account",
                    [
                        ("balance", args[0]),
                        ("min", args[1]),
                        ("hist", Value::Null),
                    ],
                ))
            })
            .requires(|v| v.int(0) >= v.int(1))
            .ensures(|v| {
                let a = v.this();
                v.now.int(a, "balance") == v.int(0)
                    && v.now.int(a, "min") == v.int(1)
                    && v.now.reference(a, "hist").is_none()
            }),
        )
        .method(
            OperationSpec::method("getBalance", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "balance"))
            })
            .returns(int())
            .pure(),
        )
        .method(
            OperationSpec::method("getMin", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "min"))
            })
            .returns(int())
            .pure(),
        )
        .method(
            OperationSpec::method("getHist", [], |ctx, this, _| {
                Ok(ctx.heap().field(this, "hist"))
            })
            .returns(history())
            .pure(),
        )
        .method(
            OperationSpec::method("setMin", [int()], |ctx, this, args| {
                ctx.heap_mut().set(this, "min", args[0]);
                Ok(Value::Void)
            })
            .requires(|v| v.state.int(v.this(), "balance") >= v.int(0))
            .ensures(|v| v.now.int(v.this(), "min") == v.int(0)),
        )
        .method(
            OperationSpec::method("credit", [int()], |ctx, this, args| {
                let balance = ctx.heap().int(this, "balance");
                let amount = args[0].as_int().expect("int argument");
                push_and_set(ctx, this, balance.wrapping_add(amount))
            })
            .requires(move |v| {
                let amount = v.int(0);
                let balance = v.state.int(v.this(), "balance");
                amount >= credit_min
                    && (!guarded || i64::from(balance) + i64::from(amount) <= i64::from(i32::MAX))
            })
            .ensures(|v| pushed_history(v, v.old.int(v.this(), "balance").wrapping_add(v.int(0)))),
        )
        .method(
            OperationSpec::method("debit", [int()], |ctx, this, args| {
                let balance = ctx.heap().int(this, "balance");
                let amount = args[0].as_int().expect("int argument");
                push_and_set(ctx, this, balance.wrapping_sub(amount))
            })
            .requires(move |v| {
                let amount = v.int(0);
                let this = v.this();
                let (balance, min) = (v.state.int(this, "balance"), v.state.int(this, "min"));
                // The original contract evaluates `balance - amount` in
                // 32-bit arithmetic, which is what lets fault 3 through.
                amount >= 0
                    && if guarded {
                        i64::from(balance) - i64::from(amount) >= i64::from(min)
                    } else {
                        balance.wrapping_sub(amount) >= min
                    }
            })
            .ensures(|v| pushed_history(v, v.old.int(v.this(), "balance").wrapping_sub(v.int(0)))),
        )
        .method(
            OperationSpec::method("cancel", [], |ctx, this, _| {
                let h = ctx
                    .heap()
                    .reference(this, "hist")
                    .ok_or_else(|| crate::contract::Raised::exception("NullPointerException"))?;
                let balance = ctx.heap().field(h, "balance");
                let prec = ctx.heap().field(h, "prec");
                ctx.heap_mut().set(this, "balance", balance);
                ctx.heap_mut().set(this, "hist", prec);
                Ok(Value::Void)
            })
            .requires(move |v| match v.state.reference(v.this(), "hist") {
                None => false,
                Some(h) => !guarded || v.state.int(h, "balance") >= v.state.int(v.this(), "min"),
            })
            .ensures(|v| {
                let this = v.this();
                let Some(h) = v.old.reference(this, "hist") else {
                    return false;
                };
                v.now.reference(this, "hist") == v.old.reference(h, "prec")
                    && v.now.int(this, "balance") == v.old.int(h, "balance")
            }),
        )
}

pub fn registry_with(opts: &BankOptions) -> Registry {
    let mut reg = Registry::new();
    reg.add_type(account_type(opts)).expect("fresh registry");
    reg.add_type(history_type()).expect("fresh registry");
    reg
}

/// The original contracts, faults included.
pub fn registry() -> Registry {
    registry_with(&BankOptions::default())
}

/// Contracts guarded against the three known faults.
pub fn fixed_registry() -> Registry {
    registry_with(&BankOptions {
        guarded: true,
        ..Default::default()
    })
}

/// Debit amounts uniform in `[0, balance - min]`, clamped to the int range,
/// so the debit precondition always holds.
pub fn debit_range_generator() -> ParameterGenerator {
    ParameterGenerator::new("bank.debit_range", |ctx, rng| {
        let Some(this) = ctx.receiver else {
            return Value::Int(0);
        };
        let room =
            i64::from(ctx.state.int(this, "balance")) - i64::from(ctx.state.int(this, "min"));
        let hi = room.clamp(0, i64::from(i32::MAX));
        Value::Int(rng.gen_range(0..=hi) as i32)
    })
}

/// Register [`debit_range_generator`] for `Account.debit(int)`.
pub fn register_debit_range(reg: &mut Registry) -> Result<(), crate::error::ConfigError> {
    reg.register_parameter_generator(
        "Account",
        "debit",
        &[ValueKind::Int32],
        0,
        debit_range_generator(),
    )
}

/// Which of the known faults a failure exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BankFault {
    /// Invariant broken by a credit that wrapped.
    CreditOverflow,
    /// Invariant broken by a cancel restoring a balance below a raised
    /// minimum.
    SetMinThenCancel,
    /// As above, where the cancelled operation was a debit that wrapped.
    DebitOverflowThenCancel,
}

#[derive(Clone, Copy)]
struct Undo {
    debit_overflowed: bool,
}

#[derive(Default, Clone)]
struct Shadow {
    balance: i32,
    undo: Vec<Undo>,
}

/// Classify an error verdict by violated contract and triggering
/// operation, following the history of the account involved.
pub fn classify_fault(test: &TestCase, failure: &Failure) -> Option<BankFault> {
    if failure.contract != "Account@invariant" {
        return None;
    }
    match failure.operation.as_str() {
        "Account.credit(int)" => return Some(BankFault::CreditOverflow),
        "Account.cancel()" => {}
        _ => return None,
    }
    let mut accounts: std::collections::HashMap<&str, Shadow> = std::collections::HashMap::new();
    for (i, step) in test.steps.iter().enumerate() {
        if step.type_name != "Account" {
            continue;
        }
        let amount = match step.args.first() {
            Some(Arg::Int(v)) => *v,
            _ => 0,
        };
        if step.kind == StepKind::Construct {
            if let Some(b) = &step.bind {
                accounts.insert(
                    b,
                    Shadow {
                        balance: amount,
                        undo: Vec::new(),
                    },
                );
            }
            continue;
        }
        let Some(acc) = step.receiver.as_deref().and_then(|r| accounts.get_mut(r)) else {
            continue;
        };
        match step.operation.as_str() {
            "credit" => {
                acc.undo.push(Undo {
                    debit_overflowed: false,
                });
                acc.balance = acc.balance.wrapping_add(amount);
            }
            "debit" => {
                acc.undo.push(Undo {
                    debit_overflowed: acc.balance.checked_sub(amount).is_none(),
                });
                acc.balance = acc.balance.wrapping_sub(amount);
            }
            "cancel" => {
                let popped = acc.undo.pop();
                if i == failure.step {
                    return Some(match popped {
                        Some(Undo {
                            debit_overflowed: true,
                        }) => BankFault::DebitOverflowThenCancel,
                        _ => BankFault::SetMinThenCancel,
                    });
                }
            }
            _ => {}
        }
    }
    None
}

fn account(var: &str, balance: i32, min: i32) -> CallStep {
    CallStep::construct(
        "Account",
        vec![int(), int()],
        vec![Arg::Int(balance), Arg::Int(min)],
        var,
    )
}

fn op(var: &str, name: &str, amount: Option<i32>) -> CallStep {
    match amount {
        Some(a) => CallStep::invoke("Account", var, name, vec![int()], vec![Arg::Int(a)]),
        None => CallStep::invoke("Account", var, name, vec![], vec![]),
    }
}

/// Fault 1: credit wraps to a negative balance.
pub fn credit_overflow_listing() -> TestCase {
    TestCase {
        id: "credit_overflow".into(),
        setup_steps: 0,
        steps: vec![
            account("ob1", 250_000_000, 0),
            op("ob1", "credit", Some(2_000_000_000)),
        ],
    }
}

/// Fault 2: raise the minimum, then cancel below it.
pub fn set_min_cancel_listing() -> TestCase {
    TestCase {
        id: "set_min_cancel".into(),
        setup_steps: 0,
        steps: vec![
            account("ob1", -50, -100),
            op("ob1", "credit", Some(100)),
            op("ob1", "setMin", Some(0)),
            op("ob1", "cancel", None),
        ],
    }
}

/// Fault 3: debit wraps to a positive balance, then setMin and cancel.
pub fn debit_overflow_cancel_listing() -> TestCase {
    TestCase {
        id: "debit_overflow_cancel".into(),
        setup_steps: 0,
        steps: vec![
            account("ob1", -1_500_000_000, -2_000_000_000),
            op("ob1", "debit", Some(800_000_000)),
            op("ob1", "setMin", Some(0)),
            op("ob1", "cancel", None),
        ],
    }
}

/// The three fault listings as one artifact, stamped with `reg`'s digest.
pub fn fault_listings(reg: &Registry) -> TestArtifact {
    TestArtifact {
        header: ArtifactHeader {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            name: "BankFaults".into(),
            seed: 0,
            attempts_per_test: 0,
            registry_digest: reg.digest(),
            rng: "handwritten".into(),
            created: None,
        },
        tests: vec![
            credit_overflow_listing(),
            set_min_cancel_listing(),
            debit_overflow_cancel_listing(),
        ],
    }
}
