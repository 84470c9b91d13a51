//! Contract-checked execution of a single operation call.
//!
//! The harness calls an operation at depth 0. Bodies that call other
//! operations through [`CallContext`] do so at depth 1 and deeper, where a
//! failed precondition is an internal-precondition error instead of a
//! rejected test input.

use std::panic::{catch_unwind, AssertUnwindSafe};

use serde::{Deserialize, Serialize};

use crate::contract::{
    CallView, ExceptionPolicy, OperationKind, OperationSpec, PostView, Raised, TypeUnderTest,
};
use crate::heap::{Heap, State};
use crate::registry::Registry;
use crate::value::{ObjId, Value, ValueKind};

/// The kind of assertion that failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssertionKind {
    Precondition,
    Postcondition,
    Invariant,
    /// An exception escaped where the exceptional postcondition forbids it.
    Exceptional,
}

/// Error verdict kinds. Entry preconditions never appear here.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorKind {
    Invariant,
    Postcondition,
    InternalPrecondition,
    UnexpectedException,
}

impl ErrorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ErrorKind::Invariant => "invariant",
            ErrorKind::Postcondition => "postcondition",
            ErrorKind::InternalPrecondition => "internal-precondition",
            ErrorKind::UnexpectedException => "unexpected-exception",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Generation,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Generation drops the call; the attempt is spent.
    Rejected,
    /// Replay stops the test case without judging the code.
    Inconclusive,
    Error(ErrorKind),
}

/// Map an assertion failure at a given call depth to its consequence.
/// Depth 0 is the call made directly by the harness.
pub fn classify_assertion_failure(
    depth: u32,
    assertion: AssertionKind,
    phase: Phase,
) -> Classification {
    match assertion {
        AssertionKind::Precondition if depth == 0 => match phase {
            Phase::Generation => Classification::Rejected,
            Phase::Replay => Classification::Inconclusive,
        },
        AssertionKind::Precondition => Classification::Error(ErrorKind::InternalPrecondition),
        AssertionKind::Postcondition => Classification::Error(ErrorKind::Postcondition),
        AssertionKind::Invariant => Classification::Error(ErrorKind::Invariant),
        AssertionKind::Exceptional => Classification::Error(ErrorKind::UnexpectedException),
    }
}

/// A failed contract check, with enough context to report it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub assertion: AssertionKind,
    pub depth: u32,
    /// Type owning the violated contract.
    pub type_name: String,
    /// Operation during which the check ran, e.g. `credit(int)`.
    pub operation: String,
    pub message: String,
}

impl Violation {
    /// Location label of the violated contract: `Account@invariant`,
    /// `Account.credit(int)@post`, and so on.
    pub fn label(&self) -> String {
        match self.assertion {
            AssertionKind::Invariant => format!("{}@invariant", self.type_name),
            AssertionKind::Precondition => format!("{}.{}@pre", self.type_name, self.operation),
            AssertionKind::Postcondition => format!("{}.{}@post", self.type_name, self.operation),
            AssertionKind::Exceptional => format!("{}.{}@signals", self.type_name, self.operation),
        }
    }
}

/// Handle given to operation bodies.
pub struct CallContext<'a> {
    registry: &'a Registry,
    heap: &'a mut Heap,
    depth: u32,
}

impl<'a> CallContext<'a> {
    pub(crate) fn new(registry: &'a Registry, heap: &'a mut Heap, depth: u32) -> Self {
        Self {
            registry,
            heap,
            depth,
        }
    }

    pub fn heap(&self) -> &Heap {
        self.heap
    }

    pub fn heap_mut(&mut self) -> &mut Heap {
        self.heap
    }

    /// Depth of the operation whose body holds this context.
    pub fn depth(&self) -> u32 {
        self.depth
    }

    /// Construct through the registered constructor whose signature admits
    /// `args`, with every contract checked at the nested depth.
    pub fn construct(&mut self, type_name: &str, args: &[Value]) -> Result<ObjId, Raised> {
        let registry = self.registry;
        let ty = registry
            .get(type_name)
            .ok_or_else(|| Raised::exception(format!("unknown type {type_name}")))?;
        let op = resolve_overload(ty.constructors(), self.heap, args).ok_or_else(|| {
            Raised::exception(format!("no constructor of {type_name} accepts {args:?}"))
        })?;
        let v = call(
            registry,
            self.heap,
            ty,
            op,
            None,
            args,
            self.depth + 1,
            true,
        )?;
        v.as_ref()
            .ok_or_else(|| Raised::exception(format!("constructor of {type_name} returned {v:?}")))
    }

    /// Invoke a method on `receiver`, contracts checked at the nested depth.
    pub fn invoke(
        &mut self,
        receiver: ObjId,
        method: &str,
        args: &[Value],
    ) -> Result<Value, Raised> {
        let registry = self.registry;
        let type_name = self
            .heap
            .type_of(receiver)
            .ok_or_else(|| Raised::exception(format!("dangling receiver {receiver}")))?
            .to_string();
        let ty = registry
            .get(&type_name)
            .ok_or_else(|| Raised::exception(format!("unknown type {type_name}")))?;
        let candidates: Vec<OperationSpec> = ty
            .methods()
            .iter()
            .filter(|m| m.name() == method)
            .cloned()
            .collect();
        let op = resolve_overload(&candidates, self.heap, args).ok_or_else(|| {
            Raised::exception(format!("no method {type_name}.{method} accepts {args:?}"))
        })?;
        call(
            registry,
            self.heap,
            ty,
            op,
            Some(receiver),
            args,
            self.depth + 1,
            true,
        )
    }
}

fn resolve_overload<'o>(
    ops: &'o [OperationSpec],
    heap: &Heap,
    args: &[Value],
) -> Option<&'o OperationSpec> {
    ops.iter().find(|op| {
        op.signature().len() == args.len()
            && op
                .signature()
                .iter()
                .zip(args)
                .all(|(k, v)| value_fits(heap, k, v))
    })
}

/// Whether `value` may fill a slot of `kind`, including the dynamic type
/// check for references.
pub(crate) fn value_fits(heap: &Heap, kind: &ValueKind, value: &Value) -> bool {
    match (kind, value) {
        (ValueKind::Reference(t), Value::Ref(id)) => heap.type_of(*id) == Some(t.as_str()),
        _ => kind.admits_shape(value),
    }
}

pub(crate) fn precondition_holds(
    op: &OperationSpec,
    heap: &Heap,
    receiver: Option<ObjId>,
    args: &[Value],
) -> bool {
    match &op.precondition {
        Some(pre) => pre(&CallView {
            state: heap,
            receiver,
            args,
        }),
        None => true,
    }
}

fn violation(
    ty: &TypeUnderTest,
    op: &OperationSpec,
    assertion: AssertionKind,
    depth: u32,
    message: String,
) -> Raised {
    Raised::Violation(Violation {
        assertion,
        depth,
        type_name: ty.name().to_string(),
        operation: op.display_signature(),
        message,
    })
}

fn panic_message(payload: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = payload.downcast_ref::<&str>() {
        (*s).to_string()
    } else if let Some(s) = payload.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic".to_string()
    }
}

/// Run one operation with its full contract. `check_pre` is false for the
/// harness-level call, whose entry precondition the caller has already
/// evaluated.
#[allow(clippy::too_many_arguments)]
pub(crate) fn call(
    registry: &Registry,
    heap: &mut Heap,
    ty: &TypeUnderTest,
    op: &OperationSpec,
    receiver: Option<ObjId>,
    args: &[Value],
    depth: u32,
    check_pre: bool,
) -> Result<Value, Raised> {
    if check_pre && !precondition_holds(op, heap, receiver, args) {
        return Err(violation(
            ty,
            op,
            AssertionKind::Precondition,
            depth,
            "precondition is false".into(),
        ));
    }
    let mut roots: Vec<ObjId> = receiver.into_iter().collect();
    roots.extend(args.iter().filter_map(Value::as_ref));
    let old = heap.snapshot(&roots);

    let outcome = {
        let mut ctx = CallContext::new(registry, heap, depth);
        catch_unwind(AssertUnwindSafe(|| (op.body)(&mut ctx, receiver, args)))
            .unwrap_or_else(|p| Err(Raised::Exception(format!("panicked: {}", panic_message(p)))))
    };

    let subject = match op.kind {
        OperationKind::Constructor => outcome.as_ref().ok().and_then(Value::as_ref),
        OperationKind::Method => receiver,
    };
    let check_invariant = |heap: &Heap| -> Result<(), Raised> {
        if let (Some(inv), Some(id)) = (&ty.invariant, subject) {
            if !inv(heap, id) {
                return Err(violation(
                    ty,
                    op,
                    AssertionKind::Invariant,
                    depth,
                    format!("invariant of {} is false", ty.name()),
                ));
            }
        }
        Ok(())
    };

    match outcome {
        Err(Raised::Violation(v)) => Err(Raised::Violation(v)),
        Err(Raised::Exception(msg)) => match op.exceptions {
            ExceptionPolicy::Forbid => Err(violation(
                ty,
                op,
                AssertionKind::Exceptional,
                depth,
                format!("exception escaped: {msg}"),
            )),
            ExceptionPolicy::Allow => {
                check_invariant(heap)?;
                Err(Raised::Exception(msg))
            }
        },
        Ok(result) => {
            if let Some(post) = &op.postcondition {
                let view = PostView {
                    old: &old,
                    now: heap,
                    receiver: subject,
                    args,
                    result,
                };
                if !post(&view) {
                    return Err(violation(
                        ty,
                        op,
                        AssertionKind::Postcondition,
                        depth,
                        "postcondition is false".into(),
                    ));
                }
            }
            check_invariant(heap)?;
            Ok(result)
        }
    }
}

/// Result of a harness-level call whose entry precondition held.
#[derive(Debug, Clone, PartialEq)]
pub enum CallOutcome {
    Returned(Value),
    /// An exception the operation's policy allows.
    Threw(String),
    Failed(Violation),
}

pub(crate) fn call_top(
    registry: &Registry,
    heap: &mut Heap,
    ty: &TypeUnderTest,
    op: &OperationSpec,
    receiver: Option<ObjId>,
    args: &[Value],
) -> CallOutcome {
    match call(registry, heap, ty, op, receiver, args, 0, false) {
        Ok(v) => CallOutcome::Returned(v),
        Err(Raised::Exception(m)) => CallOutcome::Threw(m),
        Err(Raised::Violation(v)) => CallOutcome::Failed(v),
    }
}
