//! Execution state of one test case, shared by generation and replay.
//!
//! A session owns the heap, the variable bindings (`ob1`, `ob2`, ...) and
//! the object pool. Generation and replay both go through
//! [`Session::execute_step`], so a freshly generated test case replays to
//! the verdict it was generated with.

use std::collections::HashMap;

use crate::artifact::{Arg, CallStep, StepKind};
use crate::contract::{OperationKind, OperationSpec, TypeUnderTest};
use crate::engine::ObjectPool;
use crate::exec::{
    self, call_top, classify_assertion_failure, CallOutcome, Classification, Phase, Violation,
};
use crate::heap::{Heap, State};
use crate::registry::Registry;
use crate::report::Failure;
use crate::value::{ObjId, Value};

/// Result of executing one recorded or freshly built step.
#[derive(Debug, Clone, PartialEq)]
pub enum StepResult {
    /// The call completed; the value is its result (or `Null` after an
    /// allowed exception).
    Done(Value),
    /// The entry precondition is false. Nothing was executed or recorded.
    PreconditionFalse,
    /// A contract was violated. The step is recorded.
    Failed(Failure),
    /// The step does not match the registry. Nothing was executed.
    Drift(String),
}

pub(crate) struct Resolved<'r> {
    pub ty: &'r TypeUnderTest,
    pub op: &'r OperationSpec,
    pub receiver: Option<ObjId>,
    pub args: Vec<Value>,
}

pub struct Session<'r> {
    registry: &'r Registry,
    heap: Heap,
    vars: Vec<(String, Value)>,
    var_index: HashMap<String, usize>,
    steps: Vec<CallStep>,
    pool: ObjectPool,
}

impl<'r> Session<'r> {
    pub fn new(registry: &'r Registry) -> Self {
        Self {
            registry,
            heap: Heap::new(),
            vars: Vec::new(),
            var_index: HashMap::new(),
            steps: Vec::new(),
            pool: ObjectPool::default(),
        }
    }

    pub fn registry(&self) -> &'r Registry {
        self.registry
    }

    pub fn heap(&self) -> &Heap {
        &self.heap
    }

    pub fn pool(&self) -> &ObjectPool {
        &self.pool
    }

    pub fn steps(&self) -> &[CallStep] {
        &self.steps
    }

    pub(crate) fn into_steps(self) -> Vec<CallStep> {
        self.steps
    }

    pub fn var(&self, name: &str) -> Option<Value> {
        self.var_index.get(name).map(|&i| self.vars[i].1)
    }

    /// Name the next binding would receive.
    pub fn next_var(&self) -> String {
        format!("ob{}", self.vars.len() + 1)
    }

    fn arg_value(&self, arg: &Arg) -> Result<Value, String> {
        match arg {
            Arg::Int(v) => Ok(Value::Int(*v)),
            Arg::Bool(v) => Ok(Value::Bool(*v)),
            Arg::Null => Ok(Value::Null),
            Arg::Var(name) => self
                .var(name)
                .ok_or_else(|| format!("unbound variable {name}")),
        }
    }

    pub(crate) fn resolve(&self, step: &CallStep) -> Result<Resolved<'r>, String> {
        let registry = self.registry;
        let ty = registry
            .get(&step.type_name)
            .ok_or_else(|| format!("type {} is not registered", step.type_name))?;
        let kind = match step.kind {
            StepKind::Construct => OperationKind::Constructor,
            StepKind::Invoke => OperationKind::Method,
        };
        let op = ty
            .find(kind, &step.operation, &step.signature)
            .ok_or_else(|| {
                format!(
                    "{}.{} not found in registry",
                    step.type_name,
                    step.display_operation()
                )
            })?;
        let receiver = match (&step.kind, &step.receiver) {
            (StepKind::Construct, None) => None,
            (StepKind::Invoke, Some(name)) => match self.var(name) {
                Some(Value::Ref(id)) if self.heap.type_of(id) == Some(ty.name()) => Some(id),
                Some(Value::Ref(_)) => {
                    return Err(format!("receiver {name} is not a {}", ty.name()))
                }
                Some(Value::Null) => return Err(format!("receiver {name} is null")),
                Some(other) => return Err(format!("receiver {name} is not an object: {other:?}")),
                None => return Err(format!("unbound receiver {name}")),
            },
            _ => return Err("receiver does not match step kind".into()),
        };
        if step.args.len() != op.signature().len() {
            return Err(format!("arity mismatch for {}", op.display_signature()));
        }
        let mut args = Vec::with_capacity(step.args.len());
        for (i, (arg, kind)) in step.args.iter().zip(op.signature()).enumerate() {
            let v = self.arg_value(arg)?;
            if !exec::value_fits(&self.heap, kind, &v) {
                return Err(format!(
                    "argument {i} of {} does not fit {kind}",
                    op.display_signature()
                ));
            }
            args.push(v);
        }
        Ok(Resolved {
            ty,
            op,
            receiver,
            args,
        })
    }

    /// Evaluate the entry precondition without executing anything.
    pub(crate) fn entry_precondition(&self, r: &Resolved<'_>) -> bool {
        exec::precondition_holds(r.op, &self.heap, r.receiver, &r.args)
    }

    /// Check, execute and record `step`. Steps whose entry precondition is
    /// false or that do not resolve are neither executed nor recorded.
    pub fn execute_step(&mut self, step: CallStep, phase: Phase) -> StepResult {
        let resolved = match self.resolve(&step) {
            Ok(r) => r,
            Err(msg) => return StepResult::Drift(msg),
        };
        if let Some(bind) = &step.bind {
            if self.var_index.contains_key(bind) {
                return StepResult::Drift(format!("variable {bind} bound twice"));
            }
        }
        if !self.entry_precondition(&resolved) {
            return StepResult::PreconditionFalse;
        }
        self.execute_resolved(step, resolved, phase)
    }

    /// Execute a step whose entry precondition the caller has checked.
    pub(crate) fn execute_resolved(
        &mut self,
        step: CallStep,
        r: Resolved<'_>,
        phase: Phase,
    ) -> StepResult {
        let outcome = call_top(
            self.registry,
            &mut self.heap,
            r.ty,
            r.op,
            r.receiver,
            &r.args,
        );
        let index = self.steps.len();
        let result = match outcome {
            CallOutcome::Returned(v) => v,
            CallOutcome::Threw(_) => Value::Null,
            CallOutcome::Failed(v) => {
                let failure = failure_from(&v, &step, index, phase);
                self.steps.push(step);
                return StepResult::Failed(failure);
            }
        };
        if let Some(name) = &step.bind {
            self.bind(name.clone(), result, step.kind == StepKind::Construct);
        }
        self.steps.push(step);
        StepResult::Done(result)
    }

    fn bind(&mut self, name: String, value: Value, constructed: bool) {
        if let Value::Ref(id) = value {
            if let Some(type_name) = self.heap.type_of(id) {
                if self.registry.get(type_name).is_some() {
                    let type_name = type_name.to_string();
                    if constructed {
                        self.pool.record_construct(&type_name, &name, id);
                    } else {
                        self.pool.record_returned(&type_name, &name, id);
                    }
                }
            }
        }
        self.var_index.insert(name.clone(), self.vars.len());
        self.vars.push((name, value));
    }

    /// Run the registry's fixture teardown, if any.
    pub(crate) fn teardown(&mut self) -> Option<String> {
        let fixture = self.registry.fixture()?;
        let f = fixture.teardown.clone()?;
        let mut td = Teardown {
            heap: &mut self.heap,
            vars: &self.vars,
        };
        match std::panic::catch_unwind(std::panic::AssertUnwindSafe(|| f(&mut td))) {
            Ok(Ok(())) => None,
            Ok(Err(msg)) => Some(format!("teardown failed: {msg}")),
            Err(_) => Some("teardown panicked".to_string()),
        }
    }
}

pub(crate) fn failure_from(v: &Violation, step: &CallStep, index: usize, phase: Phase) -> Failure {
    let kind = match classify_assertion_failure(v.depth, v.assertion, phase) {
        Classification::Error(kind) => kind,
        // A harness-level precondition is checked before execution and
        // never reaches here.
        _ => unreachable!("entry precondition reported as violation"),
    };
    Failure {
        kind,
        step: index,
        contract: v.label(),
        contract_type: v.type_name.clone(),
        operation: format!("{}.{}", step.type_name, step.display_operation()),
        message: v.message.clone(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FixtureError {
    /// A fixture call's entry precondition is false.
    Precondition(String),
    /// A fixture call violated a contract; the test case fails.
    Failed(Failure),
    /// The fixture named something that does not exist.
    Unresolved(String),
}

impl std::fmt::Display for FixtureError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FixtureError::Precondition(op) => write!(f, "entry precondition of {op} is false"),
            FixtureError::Failed(fl) => write!(f, "{} violated during setup", fl.contract),
            FixtureError::Unresolved(msg) => f.write_str(msg),
        }
    }
}

/// Handle passed to a fixture's setup. Every call is recorded as a step of
/// the test case, and constructed objects enter the pool.
pub struct FixtureSetup<'s, 'r> {
    pub(crate) session: &'s mut Session<'r>,
}

impl FixtureSetup<'_, '_> {
    /// Construct an instance; returns the variable it is bound to.
    pub fn construct(&mut self, type_name: &str, args: &[Arg]) -> Result<String, FixtureError> {
        let ty = self
            .session
            .registry
            .get(type_name)
            .ok_or_else(|| FixtureError::Unresolved(format!("unknown type {type_name}")))?;
        let op = self.pick(ty.constructors(), args, type_name)?;
        let var = self.session.next_var();
        let step = CallStep {
            kind: StepKind::Construct,
            type_name: type_name.to_string(),
            operation: op.name().to_string(),
            signature: op.signature().to_vec(),
            receiver: None,
            args: args.to_vec(),
            returns: op.return_kind().cloned(),
            bind: Some(var.clone()),
        };
        self.run(step)?;
        Ok(var)
    }

    /// Invoke a method on a bound variable. Returns the result variable
    /// for non-void methods.
    pub fn invoke(
        &mut self,
        receiver: &str,
        method: &str,
        args: &[Arg],
    ) -> Result<Option<String>, FixtureError> {
        let Some(Value::Ref(id)) = self.session.var(receiver) else {
            return Err(FixtureError::Unresolved(format!(
                "{receiver} is not an object"
            )));
        };
        let type_name = self
            .session
            .heap
            .type_of(id)
            .unwrap_or_default()
            .to_string();
        let ty = self
            .session
            .registry
            .get(&type_name)
            .ok_or_else(|| FixtureError::Unresolved(format!("unknown type {type_name}")))?;
        let candidates: Vec<OperationSpec> = ty
            .methods()
            .iter()
            .filter(|m| m.name() == method)
            .cloned()
            .collect();
        let op = self.pick(&candidates, args, method)?;
        let bind = op.return_kind().map(|_| self.session.next_var());
        let step = CallStep {
            kind: StepKind::Invoke,
            type_name,
            operation: method.to_string(),
            signature: op.signature().to_vec(),
            receiver: Some(receiver.to_string()),
            args: args.to_vec(),
            returns: op.return_kind().cloned(),
            bind: bind.clone(),
        };
        self.run(step)?;
        Ok(bind)
    }

    fn pick(
        &self,
        ops: &[OperationSpec],
        args: &[Arg],
        what: &str,
    ) -> Result<OperationSpec, FixtureError> {
        let values: Option<Vec<Value>> = args
            .iter()
            .map(|a| self.session.arg_value(a).ok())
            .collect();
        let values = values.ok_or_else(|| {
            FixtureError::Unresolved(format!("unbound argument in call to {what}"))
        })?;
        ops.iter()
            .find(|op| {
                op.signature().len() == values.len()
                    && op
                        .signature()
                        .iter()
                        .zip(&values)
                        .all(|(k, v)| exec::value_fits(&self.session.heap, k, v))
            })
            .cloned()
            .ok_or_else(|| {
                FixtureError::Unresolved(format!("no overload of {what} accepts the arguments"))
            })
    }

    fn run(&mut self, step: CallStep) -> Result<(), FixtureError> {
        let label = format!("{}.{}", step.type_name, step.display_operation());
        match self.session.execute_step(step, Phase::Generation) {
            StepResult::Done(_) => Ok(()),
            StepResult::PreconditionFalse => Err(FixtureError::Precondition(label)),
            StepResult::Failed(f) => Err(FixtureError::Failed(f)),
            StepResult::Drift(msg) => Err(FixtureError::Unresolved(msg)),
        }
    }
}

/// Handle passed to a fixture's teardown.
pub struct Teardown<'a> {
    heap: &'a mut Heap,
    vars: &'a [(String, Value)],
}

impl Teardown<'_> {
    pub fn heap(&self) -> &Heap {
        self.heap
    }

    pub fn heap_mut(&mut self) -> &mut Heap {
        self.heap
    }

    pub fn var(&self, name: &str) -> Option<Value> {
        self.vars.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    /// Objects bound to variables whose dynamic type is `type_name`.
    pub fn objects_of(&self, type_name: &str) -> Vec<ObjId> {
        self.vars
            .iter()
            .filter_map(|(_, v)| v.as_ref())
            .filter(|id| self.heap.type_of(*id) == Some(type_name))
            .collect()
    }
}
