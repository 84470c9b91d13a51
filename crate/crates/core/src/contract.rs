//! Meta-model for types under test and their executable contracts.
//!
//! A [`TypeUnderTest`] bundles constructors, methods and an invariant.
//! Every [`OperationSpec`] carries a body plus optional pre- and
//! postconditions written as ordinary closures over the heap. Postconditions
//! see a [`StateSnapshot`] of the pre-state, which is how `old(..)`
//! expressions are written.

use std::fmt;
use std::sync::Arc;

use crate::error::ConfigError;
use crate::exec::CallContext;
use crate::heap::{Heap, StateSnapshot};
use crate::value::{signature_string, ObjId, Value, ValueKind};

/// What escaped a call body other than a normal result.
#[derive(Debug, Clone, PartialEq)]
pub enum Raised {
    /// An exception thrown by user code.
    Exception(String),
    /// A contract violation from a nested call; propagates unchanged.
    Violation(crate::exec::Violation),
}

impl Raised {
    pub fn exception(msg: impl Into<String>) -> Self {
        Raised::Exception(msg.into())
    }
}

pub type Body = Arc<
    dyn Fn(&mut CallContext<'_>, Option<ObjId>, &[Value]) -> Result<Value, Raised> + Send + Sync,
>;
pub type Precondition = Arc<dyn Fn(&CallView<'_>) -> bool + Send + Sync>;
pub type Postcondition = Arc<dyn Fn(&PostView<'_>) -> bool + Send + Sync>;
pub type Invariant = Arc<dyn Fn(&Heap, ObjId) -> bool + Send + Sync>;

/// Pre-state seen by a precondition.
pub struct CallView<'a> {
    pub state: &'a Heap,
    /// `None` for constructors.
    pub receiver: Option<ObjId>,
    pub args: &'a [Value],
}

impl CallView<'_> {
    pub fn this(&self) -> ObjId {
        self.receiver
            .expect("precondition of a constructor has no receiver")
    }

    pub fn arg(&self, index: usize) -> Value {
        self.args[index]
    }

    pub fn int(&self, index: usize) -> i32 {
        self.args[index]
            .as_int()
            .unwrap_or_else(|| panic!("argument {index} is not an int"))
    }

    pub fn boolean(&self, index: usize) -> bool {
        self.args[index]
            .as_bool()
            .unwrap_or_else(|| panic!("argument {index} is not a boolean"))
    }
}

/// Pre- and post-state seen by a postcondition.
pub struct PostView<'a> {
    pub old: &'a StateSnapshot,
    pub now: &'a Heap,
    /// The receiver for methods, the new object for constructors.
    pub receiver: Option<ObjId>,
    pub args: &'a [Value],
    pub result: Value,
}

impl PostView<'_> {
    pub fn this(&self) -> ObjId {
        self.receiver.expect("postcondition has no receiver")
    }

    pub fn int(&self, index: usize) -> i32 {
        self.args[index]
            .as_int()
            .unwrap_or_else(|| panic!("argument {index} is not an int"))
    }

    /// Allocated during this call.
    pub fn is_fresh(&self, id: Option<ObjId>) -> bool {
        id.is_some_and(|id| self.old.is_fresh(id))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperationKind {
    Constructor,
    Method,
}

/// What happens when a body raises an exception.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ExceptionPolicy {
    /// Any escaping exception is a failure (`signals (Exception e) false`).
    #[default]
    Forbid,
    /// Exceptions are a legal outcome; the call completes abruptly.
    Allow,
}

/// One constructor or method with its contract.
#[derive(Clone)]
pub struct OperationSpec {
    pub(crate) name: String,
    pub(crate) kind: OperationKind,
    pub(crate) signature: Vec<ValueKind>,
    pub(crate) returns: Option<ValueKind>,
    pub(crate) pure: bool,
    pub(crate) weight: f64,
    pub(crate) precondition: Option<Precondition>,
    pub(crate) postcondition: Option<Postcondition>,
    pub(crate) exceptions: ExceptionPolicy,
    pub(crate) body: Body,
}

impl OperationSpec {
    pub fn method<F>(name: impl Into<String>, signature: impl Into<Vec<ValueKind>>, body: F) -> Self
    where
        F: Fn(&mut CallContext<'_>, ObjId, &[Value]) -> Result<Value, Raised>
            + Send
            + Sync
            + 'static,
    {
        Self {
            name: name.into(),
            kind: OperationKind::Method,
            signature: signature.into(),
            returns: None,
            pure: false,
            weight: 1.0,
            precondition: None,
            postcondition: None,
            exceptions: ExceptionPolicy::default(),
            body: Arc::new(move |ctx, this, args| {
                body(ctx, this.expect("method called without receiver"), args)
            }),
        }
    }

    /// The constructor body allocates the object and returns its id. The
    /// name is filled in with the type name by [`TypeUnderTest::constructor`].
    pub fn constructor<F>(signature: impl Into<Vec<ValueKind>>, body: F) -> Self
    where
        F: Fn(&mut CallContext<'_>, &[Value]) -> Result<ObjId, Raised> + Send + Sync + 'static,
    {
        Self {
            name: String::new(),
            kind: OperationKind::Constructor,
            signature: signature.into(),
            returns: None,
            pure: false,
            weight: 1.0,
            precondition: None,
            postcondition: None,
            exceptions: ExceptionPolicy::default(),
            body: Arc::new(move |ctx, _, args| body(ctx, args).map(Value::Ref)),
        }
    }

    pub fn returns(mut self, kind: ValueKind) -> Self {
        self.returns = Some(kind);
        self
    }

    pub fn requires(mut self, pre: impl Fn(&CallView<'_>) -> bool + Send + Sync + 'static) -> Self {
        self.precondition = Some(Arc::new(pre));
        self
    }

    pub fn ensures(mut self, post: impl Fn(&PostView<'_>) -> bool + Send + Sync + 'static) -> Self {
        self.postcondition = Some(Arc::new(post));
        self
    }

    pub fn pure(mut self) -> Self {
        self.pure = true;
        self
    }

    pub fn weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn exceptions(mut self, policy: ExceptionPolicy) -> Self {
        self.exceptions = policy;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> OperationKind {
        self.kind
    }

    pub fn signature(&self) -> &[ValueKind] {
        &self.signature
    }

    /// Declared result kind. Constructors report a reference to their type.
    pub fn return_kind(&self) -> Option<&ValueKind> {
        self.returns.as_ref()
    }

    pub fn is_pure(&self) -> bool {
        self.pure
    }

    pub fn get_weight(&self) -> f64 {
        self.weight
    }

    pub fn exception_policy(&self) -> ExceptionPolicy {
        self.exceptions
    }

    pub fn has_precondition(&self) -> bool {
        self.precondition.is_some()
    }

    /// `credit(int)`
    pub fn display_signature(&self) -> String {
        format!("{}({})", self.name, signature_string(&self.signature))
    }
}

impl fmt::Debug for OperationSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperationSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("signature", &self.signature)
            .field("returns", &self.returns)
            .field("pure", &self.pure)
            .field("weight", &self.weight)
            .field("exceptions", &self.exceptions)
            .finish_non_exhaustive()
    }
}

/// Probability of constructing a fresh instance given how many instances of
/// the type were already created in the current test case. Always 1 at 0.
#[derive(Clone)]
pub enum CreationProbability {
    /// 1 below the threshold, 0 at or above it: at most `s` instances.
    Threshold(u32),
    /// 1 for the first instance, the given constant afterwards.
    Constant(f64),
    Custom {
        id: String,
        f: Arc<dyn Fn(u32) -> f64 + Send + Sync>,
    },
}

impl Default for CreationProbability {
    fn default() -> Self {
        CreationProbability::Constant(0.5)
    }
}

/// Number of leading arguments checked when a function is registered.
pub const CREATION_CHECK_RANGE: u32 = 1000;

impl CreationProbability {
    pub fn threshold(s: i64) -> Result<Self, ConfigError> {
        if s < 1 || s > u32::MAX as i64 {
            return Err(ConfigError::InvalidThreshold(s));
        }
        Ok(CreationProbability::Threshold(s as u32))
    }

    pub fn constant(p: f64) -> Result<Self, ConfigError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::InvalidProbability(p));
        }
        Ok(CreationProbability::Constant(p))
    }

    /// A user function, checked on `0..1000` before it is accepted.
    pub fn custom(
        id: impl Into<String>,
        f: impl Fn(u32) -> f64 + Send + Sync + 'static,
    ) -> Result<Self, ConfigError> {
        let cp = CreationProbability::Custom {
            id: id.into(),
            f: Arc::new(f),
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn probability(&self, created: u32) -> f64 {
        match self {
            CreationProbability::Threshold(s) => {
                if created < *s {
                    1.0
                } else {
                    0.0
                }
            }
            CreationProbability::Constant(p) => {
                if created == 0 {
                    1.0
                } else {
                    *p
                }
            }
            CreationProbability::Custom { f, .. } => f(created),
        }
    }

    /// Stable identity, recorded in the registry digest.
    pub fn id(&self) -> String {
        match self {
            CreationProbability::Threshold(s) => format!("threshold({s})"),
            CreationProbability::Constant(p) => format!("constant({p})"),
            CreationProbability::Custom { id, .. } => format!("custom({id})"),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |n: u32, value: f64| ConfigError::InvalidCreationFunction {
            id: self.id(),
            n,
            value,
        };
        let at_zero = self.probability(0);
        if at_zero != 1.0 {
            return Err(bad(0, at_zero));
        }
        for n in 1..CREATION_CHECK_RANGE {
            let v = self.probability(n);
            if !(0.0..=1.0).contains(&v) {
                return Err(bad(n, v));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for CreationProbability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

/// `f(n) = 1` for `n < s`, `0` otherwise.
pub fn threshold_probability(s: i64) -> Result<CreationProbability, ConfigError> {
    CreationProbability::threshold(s)
}

/// A type under test: its operations, invariant and selection profile.
#[derive(Clone)]
pub struct TypeUnderTest {
    pub(crate) name: String,
    pub(crate) version: String,
    pub(crate) constructors: Vec<OperationSpec>,
    pub(crate) methods: Vec<OperationSpec>,
    pub(crate) invariant: Option<Invariant>,
    pub(crate) weight: f64,
    pub(crate) creation: CreationProbability,
}

impl TypeUnderTest {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            version: "1".to_string(),
            constructors: Vec::new(),
            methods: Vec::new(),
            invariant: None,
            weight: 1.0,
            creation: CreationProbability::default(),
        }
    }

    /// Contract version label. Part of the registry digest, so bump it
    /// whenever a contract or body changes.
    pub fn version(mut self, version: impl Into<String>) -> Self {
        self.version = version.into();
        self
    }

    pub fn constructor(mut self, mut op: OperationSpec) -> Self {
        op.name = self.name.clone();
        op.returns = Some(ValueKind::Reference(self.name.clone()));
        self.constructors.push(op);
        self
    }

    pub fn method(mut self, op: OperationSpec) -> Self {
        self.methods.push(op);
        self
    }

    pub fn invariant(mut self, inv: impl Fn(&Heap, ObjId) -> bool + Send + Sync + 'static) -> Self {
        self.invariant = Some(Arc::new(inv));
        self
    }

    pub fn weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn creation_probability(mut self, cp: CreationProbability) -> Self {
        self.creation = cp;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn contract_version(&self) -> &str {
        &self.version
    }

    pub fn constructors(&self) -> &[OperationSpec] {
        &self.constructors
    }

    pub fn methods(&self) -> &[OperationSpec] {
        &self.methods
    }

    pub fn get_weight(&self) -> f64 {
        self.weight
    }

    pub fn creation(&self) -> &CreationProbability {
        &self.creation
    }

    pub fn has_invariant(&self) -> bool {
        self.invariant.is_some()
    }

    /// Constructors followed by methods: the selection urn.
    pub fn operations(&self) -> impl Iterator<Item = &OperationSpec> {
        self.constructors.iter().chain(self.methods.iter())
    }

    pub fn find(
        &self,
        kind: OperationKind,
        name: &str,
        signature: &[ValueKind],
    ) -> Option<&OperationSpec> {
        let list = match kind {
            OperationKind::Constructor => &self.constructors,
            OperationKind::Method => &self.methods,
        };
        list.iter()
            .find(|op| op.name == name && op.signature == signature)
    }

    pub(crate) fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |reason: &str| ConfigError::InvalidDefinition {
            name: self.name.clone(),
            reason: reason.to_string(),
        };
        if self.name.is_empty() || !is_identifier(&self.name) {
            return Err(invalid("type name must be an identifier"));
        }
        if matches!(self.name.as_str(), "int" | "boolean" | "null") {
            return Err(invalid("type name clashes with a primitive kind"));
        }
        check_weight(self.weight)?;
        self.creation.validate()?;
        let mut seen = std::collections::BTreeSet::new();
        for op in self.operations() {
            check_weight(op.weight)?;
            if op.kind == OperationKind::Method
                && (!is_identifier(&op.name) || op.name == self.name)
            {
                return Err(invalid(&format!("bad method name `{}`", op.name)));
            }
            if op.signature.contains(&ValueKind::Null) {
                return Err(invalid("null is not a parameter kind"));
            }
            if !seen.insert((
                op.kind == OperationKind::Constructor,
                op.name.clone(),
                op.signature.clone(),
            )) {
                return Err(invalid(&format!(
                    "duplicate operation {}",
                    op.display_signature()
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Debug for TypeUnderTest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TypeUnderTest")
            .field("name", &self.name)
            .field("version", &self.version)
            .field("constructors", &self.constructors)
            .field("methods", &self.methods)
            .field("weight", &self.weight)
            .field("creation", &self.creation)
            .finish_non_exhaustive()
    }
}

pub(crate) fn check_weight(w: f64) -> Result<(), ConfigError> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(ConfigError::InvalidWeight(w))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}
