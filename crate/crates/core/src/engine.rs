//! Random construction of call sequences, executed as they are built.
//!
//! Each test case gets a fixed number of attempts. An attempt picks a type
//! by weight, then one of its constructors or methods by weight, obtains a
//! receiver and arguments, and runs the call if its entry precondition
//! holds. Every emitted step spends one attempt slot, and so does every
//! attempt that emits nothing, so a test case never holds more steps than
//! it had attempts. The first contract violation ends the test case.
//!
//! A test case's random stream is a pure function of the run seed and its
//! index, so runs are reproducible and test cases are independent.

use std::collections::{BTreeMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::artifact::{
    Arg, ArtifactHeader, CallStep, StepKind, TestArtifact, TestCase, FORMAT_VERSION, TOOL_VERSION,
};
use crate::contract::{OperationKind, OperationSpec, TypeUnderTest};
use crate::error::GenerationError;
use crate::exec::Phase;
use crate::registry::{GenContext, Registry};
use crate::report::{Failure, GenerationReport, Outcome, SelectionStats, Verdict};
use crate::session::{FixtureError, FixtureSetup, Session, StepResult};
use crate::value::{ObjId, Value, ValueKind};

/// Identifies the random stream layout recorded in artifact headers.
pub const RNG_ID: &str = "chacha8-stream-per-test/rand_chacha-0.3";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    /// Variable the instance is bound to.
    pub var: String,
    pub id: ObjId,
}

/// Instances available for reuse in the current test case.
#[derive(Debug, Clone, Default)]
pub struct ObjectPool {
    instances: BTreeMap<String, Vec<PoolEntry>>,
    created: BTreeMap<String, u32>,
    members: HashSet<ObjId>,
}

impl ObjectPool {
    /// Successful constructions of `type_name` so far, fixture included.
    pub fn created(&self, type_name: &str) -> u32 {
        self.created.get(type_name).copied().unwrap_or(0)
    }

    pub fn instances(&self, type_name: &str) -> &[PoolEntry] {
        self.instances.get(type_name).map_or(&[], Vec::as_slice)
    }

    pub(crate) fn record_construct(&mut self, type_name: &str, var: &str, id: ObjId) {
        *self.created.entry(type_name.to_string()).or_default() += 1;
        self.record_returned(type_name, var, id);
    }

    /// An instance that surfaced as a method result joins the pool once.
    pub(crate) fn record_returned(&mut self, type_name: &str, var: &str, id: ObjId) {
        if self.members.insert(id) {
            self.instances
                .entry(type_name.to_string())
                .or_default()
                .push(PoolEntry {
                    var: var.to_string(),
                    id,
                });
        }
    }
}

/// Uniform over the full range for `int`, a fair coin for `boolean`.
/// `None` for reference kinds, which are never drawn this way.
pub fn default_primitive<R: Rng + ?Sized>(kind: &ValueKind, rng: &mut R) -> Option<Value> {
    match kind {
        ValueKind::Int32 => Some(Value::Int(rng.gen::<i32>())),
        ValueKind::Boolean => Some(Value::Bool(rng.gen_bool(0.5))),
        ValueKind::Reference(_) | ValueKind::Null => None,
    }
}

/// Weighted selection tables derived once from a frozen registry.
struct Urns {
    types: Option<WeightedIndex<f64>>,
    /// Per type, over constructors followed by methods.
    operations: Vec<Option<WeightedIndex<f64>>>,
    constructors: Vec<Option<WeightedIndex<f64>>>,
}

fn weighted(weights: impl IntoIterator<Item = f64>) -> Option<WeightedIndex<f64>> {
    WeightedIndex::new(weights).ok()
}

impl Urns {
    fn new(registry: &Registry) -> Self {
        let operations: Vec<_> = registry
            .types()
            .iter()
            .map(|t| weighted(t.operations().map(OperationSpec::get_weight)))
            .collect();
        let constructors = registry
            .types()
            .iter()
            .map(|t| weighted(t.constructors().iter().map(OperationSpec::get_weight)))
            .collect();
        // A type with no selectable operation must not be picked.
        let types = weighted(registry.types().iter().zip(&operations).map(|(t, ops)| {
            if ops.is_some() {
                t.get_weight()
            } else {
                0.0
            }
        }));
        Self {
            types,
            operations,
            constructors,
        }
    }

    fn can_bootstrap(&self, registry: &Registry) -> bool {
        let fixture_creates = registry.fixture().is_some_and(|f| f.setup.is_some());
        self.types.is_some() && (fixture_creates || self.constructors.iter().any(Option::is_some))
    }
}

/// Why an attempt emitted nothing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    /// The entry precondition of the chosen operation was false.
    Precondition(String),
    /// A constructor was chosen but the creation probability said reuse.
    CreationDeclined(String),
    /// No instance of the named type could be produced.
    Unobtainable(String),
    NothingSelectable,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Attempt {
    /// The chosen call ran and was recorded.
    Emitted,
    Rejected(Rejection),
    /// A contract was violated; the test case is over.
    Failed(Failure),
    /// No slots left.
    OutOfBudget,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Obtained {
    Instance(PoolEntry),
    Unobtainable,
    Failed(Failure),
    OutOfBudget,
}

enum Interrupt {
    Failed(Failure),
    OutOfBudget,
    Unobtainable(String),
    Fatal(GenerationError),
}

enum Emit {
    Done(Value),
    PreconditionFalse,
}

fn op_key(ty: &TypeUnderTest, op: &OperationSpec) -> String {
    format!("{}.{}", ty.name(), op.display_signature())
}

/// Builds one test case attempt by attempt.
pub struct TestCaseGenerator<'r> {
    registry: &'r Registry,
    urns: Urns,
    session: Session<'r>,
    rng: ChaCha8Rng,
    remaining: u32,
    stats: SelectionStats,
}

impl<'r> TestCaseGenerator<'r> {
    /// `index` selects the test case's random stream under `seed`.
    pub fn new(registry: &'r Registry, seed: u64, index: u64, attempts: u32) -> Self {
        registry.freeze();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self {
            registry,
            urns: Urns::new(registry),
            session: Session::new(registry),
            rng,
            remaining: attempts,
            stats: SelectionStats::default(),
        }
    }

    pub fn session(&self) -> &Session<'r> {
        &self.session
    }

    pub fn remaining(&self) -> u32 {
        self.remaining
    }

    pub fn stats(&self) -> &SelectionStats {
        &self.stats
    }

    /// Run the fixture's setup, recording its calls as leading steps.
    pub fn run_setup(&mut self) -> Result<(), FixtureError> {
        let Some(setup) = self.registry.fixture().and_then(|f| f.setup.clone()) else {
            return Ok(());
        };
        let mut fx = FixtureSetup {
            session: &mut self.session,
        };
        setup(&mut fx)
    }

    /// One attempt at adding a call.
    pub fn attempt_step(&mut self) -> Result<Attempt, GenerationError> {
        if self.remaining == 0 {
            return Ok(Attempt::OutOfBudget);
        }
        let outcome = match self.try_attempt() {
            Ok(a) => a,
            Err(Interrupt::Failed(f)) => Attempt::Failed(f),
            Err(Interrupt::OutOfBudget) => Attempt::OutOfBudget,
            Err(Interrupt::Unobtainable(t)) => Attempt::Rejected(Rejection::Unobtainable(t)),
            Err(Interrupt::Fatal(e)) => return Err(e),
        };
        if matches!(outcome, Attempt::Rejected(_)) {
            self.remaining = self.remaining.saturating_sub(1);
        }
        Ok(outcome)
    }

    /// Reuse a pooled instance of `type_name` or construct a new one,
    /// as the type's creation probability dictates.
    pub fn obtain_instance(&mut self, type_name: &str) -> Result<Obtained, GenerationError> {
        match self.obtain(type_name, 0) {
            Ok(e) => Ok(Obtained::Instance(e)),
            Err(Interrupt::Failed(f)) => Ok(Obtained::Failed(f)),
            Err(Interrupt::OutOfBudget) => Ok(Obtained::OutOfBudget),
            Err(Interrupt::Unobtainable(_)) => Ok(Obtained::Unobtainable),
            Err(Interrupt::Fatal(e)) => Err(e),
        }
    }

    fn decide(&mut self, p: f64) -> bool {
        if p >= 1.0 {
            true
        } else if p <= 0.0 {
            false
        } else {
            self.rng.gen::<f64>() < p
        }
    }

    fn try_attempt(&mut self) -> Result<Attempt, Interrupt> {
        let registry = self.registry;
        let Some(types) = &self.urns.types else {
            return Ok(Attempt::Rejected(Rejection::NothingSelectable));
        };
        let ti = types.sample(&mut self.rng);
        let ty = &registry.types()[ti];
        let Some(ops) = &self.urns.operations[ti] else {
            return Ok(Attempt::Rejected(Rejection::NothingSelectable));
        };
        let oi = ops.sample(&mut self.rng);
        let op = ty
            .operations()
            .nth(oi)
            .expect("urn index within operations");
        let key = op_key(ty, op);
        self.stats.entry(&key).selected += 1;

        let receiver = match op.kind() {
            OperationKind::Constructor => {
                let p = ty
                    .creation()
                    .probability(self.session.pool().created(ty.name()));
                if !self.decide(p) {
                    self.stats.entry(&key).other_rejections += 1;
                    return Ok(Attempt::Rejected(Rejection::CreationDeclined(
                        ty.name().to_string(),
                    )));
                }
                None
            }
            OperationKind::Method => match self.obtain(ty.name(), 0) {
                Ok(entry) => Some(entry),
                Err(Interrupt::Unobtainable(t)) => {
                    self.stats.entry(&key).other_rejections += 1;
                    return Err(Interrupt::Unobtainable(t));
                }
                Err(e) => return Err(e),
            },
        };
        let args = match self.resolve_args(ty, op, receiver.as_ref().map(|e| e.id), 0) {
            Ok(a) => a,
            Err(Interrupt::Unobtainable(t)) => {
                self.stats.entry(&key).other_rejections += 1;
                return Err(Interrupt::Unobtainable(t));
            }
            Err(e) => return Err(e),
        };
        let step = self.build_step(ty, op, receiver.map(|e| e.var), args);
        match self.emit(step, &key)? {
            Emit::Done(_) => Ok(Attempt::Emitted),
            Emit::PreconditionFalse => {
                self.stats.entry(&key).precondition_rejections += 1;
                Ok(Attempt::Rejected(Rejection::Precondition(key)))
            }
        }
    }

    fn obtain(&mut self, type_name: &str, depth: u32) -> Result<PoolEntry, Interrupt> {
        let registry = self.registry;
        let Some(ti) = registry.types().iter().position(|t| t.name() == type_name) else {
            return Err(Interrupt::Unobtainable(type_name.to_string()));
        };
        let ty = &registry.types()[ti];
        let live = self.session.pool().instances(type_name).len();
        let create = live == 0 || {
            let p = ty
                .creation()
                .probability(self.session.pool().created(type_name));
            self.decide(p)
        };
        if !create {
            let k = self.rng.gen_range(0..live);
            return Ok(self.session.pool().instances(type_name)[k].clone());
        }
        if self.urns.constructors[ti].is_none() {
            return Err(Interrupt::Unobtainable(type_name.to_string()));
        }
        for _ in 0..registry.settings().constructor_retries.max(1) {
            let ci = self.urns.constructors[ti]
                .as_ref()
                .expect("checked above")
                .sample(&mut self.rng);
            let op = &ty.constructors()[ci];
            let args = match self.resolve_args(ty, op, None, depth) {
                Ok(a) => a,
                Err(Interrupt::Unobtainable(_)) => continue,
                Err(e) => return Err(e),
            };
            let key = op_key(ty, op);
            let step = self.build_step(ty, op, None, args);
            let var = step.bind.clone().expect("constructions always bind");
            match self.emit(step, &key)? {
                Emit::Done(Value::Ref(id)) => return Ok(PoolEntry { var, id }),
                Emit::Done(other) => {
                    return Err(Interrupt::Fatal(GenerationError::Fixture(format!(
                        "constructor {key} returned {other:?}"
                    ))))
                }
                Emit::PreconditionFalse => {
                    self.stats.entry(&key).precondition_rejections += 1;
                }
            }
        }
        Err(Interrupt::Unobtainable(type_name.to_string()))
    }

    fn resolve_args(
        &mut self,
        ty: &TypeUnderTest,
        op: &OperationSpec,
        receiver: Option<ObjId>,
        depth: u32,
    ) -> Result<Vec<Arg>, Interrupt> {
        let registry = self.registry;
        let settings = registry.settings();
        let mut args = Vec::with_capacity(op.signature().len());
        for (i, kind) in op.signature().iter().enumerate() {
            let arg = match kind {
                ValueKind::Reference(target) => {
                    if depth >= settings.max_construction_depth
                        || registry.get(target).is_none()
                        || self.decide(settings.null_probability)
                    {
                        Arg::Null
                    } else {
                        Arg::Var(self.obtain(target, depth + 1)?.var)
                    }
                }
                primitive => {
                    let value = match registry.generator(ty.name(), op, i) {
                        Some(g) => {
                            let ctx = GenContext {
                                state: self.session.heap(),
                                receiver,
                            };
                            let v = g.generate(&ctx, &mut self.rng);
                            if !primitive.admits_shape(&v) {
                                return Err(Interrupt::Fatal(GenerationError::GeneratorKind {
                                    generator: g.id().to_string(),
                                    expected: primitive.name().to_string(),
                                    got: format!("{v:?}"),
                                }));
                            }
                            v
                        }
                        None => {
                            default_primitive(primitive, &mut self.rng).expect("primitive kind")
                        }
                    };
                    match value {
                        Value::Int(v) => Arg::Int(v),
                        Value::Bool(v) => Arg::Bool(v),
                        _ => unreachable!("primitive values only"),
                    }
                }
            };
            args.push(arg);
        }
        Ok(args)
    }

    fn build_step(
        &self,
        ty: &TypeUnderTest,
        op: &OperationSpec,
        receiver: Option<String>,
        args: Vec<Arg>,
    ) -> CallStep {
        let kind = match op.kind() {
            OperationKind::Constructor => StepKind::Construct,
            OperationKind::Method => StepKind::Invoke,
        };
        let returns = op.return_kind().cloned();
        CallStep {
            kind,
            type_name: ty.name().to_string(),
            operation: op.name().to_string(),
            signature: op.signature().to_vec(),
            receiver,
            args,
            bind: returns.as_ref().map(|_| self.session.next_var()),
            returns,
        }
    }

    fn emit(&mut self, step: CallStep, key: &str) -> Result<Emit, Interrupt> {
        let resolved = self
            .session
            .resolve(&step)
            .expect("generated steps resolve against their own registry");
        if !self.session.entry_precondition(&resolved) {
            return Ok(Emit::PreconditionFalse);
        }
        if self.remaining == 0 {
            return Err(Interrupt::OutOfBudget);
        }
        self.remaining -= 1;
        self.stats.entry(key).emitted += 1;
        match self
            .session
            .execute_resolved(step, resolved, Phase::Generation)
        {
            StepResult::Done(v) => Ok(Emit::Done(v)),
            StepResult::Failed(f) => Err(Interrupt::Failed(f)),
            other => unreachable!("unexpected step result {other:?}"),
        }
    }

    /// Spend the remaining attempts and return the test case and verdict.
    pub fn run(
        mut self,
        id: String,
    ) -> Result<(TestCase, Verdict, usize, SelectionStats), GenerationError> {
        let mut outcome = Outcome::Pass;
        let setup_steps = match self.run_setup() {
            Ok(()) => self.session.steps().len(),
            Err(FixtureError::Failed(f)) => {
                outcome = Outcome::Error(f);
                self.session.steps().len()
            }
            Err(e) => return Err(GenerationError::Fixture(e.to_string())),
        };
        if outcome == Outcome::Pass {
            loop {
                match self.attempt_step()? {
                    Attempt::Failed(f) => {
                        outcome = Outcome::Error(f);
                        break;
                    }
                    Attempt::OutOfBudget => break,
                    Attempt::Emitted | Attempt::Rejected(_) => {}
                }
            }
        }
        let harness_error = self.session.teardown();
        let stats = self.stats;
        let steps = self.session.into_steps();
        let emitted = steps.len() - setup_steps;
        let verdict = Verdict {
            test_id: id.clone(),
            outcome,
            harness_error,
        };
        Ok((
            TestCase {
                id,
                setup_steps,
                steps,
            },
            verdict,
            emitted,
            stats,
        ))
    }
}

/// Generate `tests` test cases of at most `attempts` steps each.
///
/// Freezes the registry. The artifact and report depend only on the
/// registry configuration, the counts and `seed`.
pub fn generate(
    registry: &Registry,
    name: &str,
    tests: usize,
    attempts: u32,
    seed: u64,
) -> Result<(TestArtifact, GenerationReport), GenerationError> {
    registry.freeze();
    if !Urns::new(registry).can_bootstrap(registry) {
        return Err(GenerationError::CannotBootstrap);
    }
    let mut report = GenerationReport {
        name: name.to_string(),
        seed,
        attempts_per_test: attempts,
        ..Default::default()
    };
    let mut cases = Vec::with_capacity(tests);
    for i in 0..tests {
        let gen = TestCaseGenerator::new(registry, seed, i as u64, attempts);
        let (case, verdict, emitted, stats) = gen.run(format!("test{}", i + 1))?;
        cases.push(case);
        report.verdicts.push(verdict);
        report.calls_emitted.push(emitted);
        report.stats.merge(&stats);
    }
    let artifact = TestArtifact {
        header: ArtifactHeader {
            format_version: FORMAT_VERSION,
            tool_version: TOOL_VERSION.to_string(),
            name: name.to_string(),
            seed,
            attempts_per_test: attempts,
            registry_digest: registry.digest(),
            rng: RNG_ID.to_string(),
            created: None,
        },
        tests: cases,
    };
    Ok((artifact, report))
}
