//! Configuration surface: which types are tested and with what profile.
//!
//! The registry is mutable until the first generation or replay touches it,
//! after which every mutator returns [`ConfigError::Frozen`]. Its
//! [`digest`](Registry::digest) summarises everything that influences
//! generation so artifacts can detect that they were produced against a
//! different configuration.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use rand::RngCore;
use sha2::{Digest, Sha256};

use crate::contract::{
    check_weight, CreationProbability, OperationKind, OperationSpec, TypeUnderTest,
};
use crate::error::ConfigError;
use crate::heap::Heap;
use crate::session::{FixtureError, FixtureSetup, Teardown};
use crate::value::{signature_string, ObjId, Value, ValueKind};

/// What a parameter generator may look at.
pub struct GenContext<'a> {
    pub state: &'a Heap,
    /// Receiver of the method whose argument is being produced.
    pub receiver: Option<ObjId>,
}

pub type GeneratorFn = Arc<dyn Fn(&GenContext<'_>, &mut dyn RngCore) -> Value + Send + Sync>;

/// Produces values for one primitive parameter instead of the default
/// uniform draw.
#[derive(Clone)]
pub struct ParameterGenerator {
    id: String,
    f: GeneratorFn,
}

impl ParameterGenerator {
    pub fn new(
        id: impl Into<String>,
        f: impl Fn(&GenContext<'_>, &mut dyn RngCore) -> Value + Send + Sync + 'static,
    ) -> Self {
        Self {
            id: id.into(),
            f: Arc::new(f),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn generate(&self, ctx: &GenContext<'_>, rng: &mut dyn RngCore) -> Value {
        (self.f)(ctx, rng)
    }
}

impl fmt::Debug for ParameterGenerator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ParameterGenerator({})", self.id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub(crate) struct GeneratorKey {
    pub type_name: String,
    pub constructor: bool,
    pub operation: String,
    pub signature: Vec<ValueKind>,
    pub index: usize,
}

pub type SetupFn = Arc<dyn Fn(&mut FixtureSetup<'_, '_>) -> Result<(), FixtureError> + Send + Sync>;
pub type TeardownFn = Arc<dyn Fn(&mut Teardown<'_>) -> Result<(), String> + Send + Sync>;

/// Per-test-case preamble and postamble.
#[derive(Clone)]
pub struct Fixture {
    name: String,
    pub(crate) setup: Option<SetupFn>,
    pub(crate) teardown: Option<TeardownFn>,
}

impl Fixture {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            setup: None,
            teardown: None,
        }
    }

    pub fn setup(
        mut self,
        f: impl Fn(&mut FixtureSetup<'_, '_>) -> Result<(), FixtureError> + Send + Sync + 'static,
    ) -> Self {
        self.setup = Some(Arc::new(f));
        self
    }

    pub fn teardown(
        mut self,
        f: impl Fn(&mut Teardown<'_>) -> Result<(), String> + Send + Sync + 'static,
    ) -> Self {
        self.teardown = Some(Arc::new(f));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl fmt::Debug for Fixture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Fixture")
            .field("name", &self.name)
            .field("setup", &self.setup.is_some())
            .field("teardown", &self.teardown.is_some())
            .finish()
    }
}

/// Knobs of the generation engine that are not per-type.
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSettings {
    /// Chance that a reference parameter receives `null`.
    pub null_probability: f64,
    /// Parameter draws tried before a constructor is given up on.
    pub constructor_retries: u32,
    /// Nesting limit for constructing objects to fill reference parameters
    /// of constructors. Deeper slots receive `null`.
    pub max_construction_depth: u32,
}

impl Default for GenerationSettings {
    fn default() -> Self {
        Self {
            null_probability: 0.1,
            constructor_retries: 5,
            max_construction_depth: 3,
        }
    }
}

#[derive(Default)]
pub struct Registry {
    types: Vec<TypeUnderTest>,
    index: HashMap<String, usize>,
    generators: BTreeMap<GeneratorKey, ParameterGenerator>,
    fixture: Option<Fixture>,
    settings: GenerationSettings,
    frozen: AtomicBool,
}

impl fmt::Debug for Registry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Registry")
            .field("types", &self.types)
            .field("generators", &self.generators.values().collect::<Vec<_>>())
            .field("fixture", &self.fixture)
            .field("settings", &self.settings)
            .field("frozen", &self.is_frozen())
            .finish()
    }
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.load(Ordering::Acquire)
    }

    /// Idempotent. Called implicitly by generation and replay.
    pub fn freeze(&self) {
        self.frozen.store(true, Ordering::Release);
    }

    fn ensure_mutable(&self) -> Result<(), ConfigError> {
        if self.is_frozen() {
            Err(ConfigError::Frozen)
        } else {
            Ok(())
        }
    }

    pub fn add_type(&mut self, spec: TypeUnderTest) -> Result<(), ConfigError> {
        self.ensure_mutable()?;
        if self.index.contains_key(spec.name()) {
            return Err(ConfigError::DuplicateType(spec.name().to_string()));
        }
        spec.validate()?;
        self.index.insert(spec.name().to_string(), self.types.len());
        self.types.push(spec);
        Ok(())
    }

    /// Registered types in registration order.
    pub fn types(&self) -> &[TypeUnderTest] {
        &self.types
    }

    pub fn get(&self, name: &str) -> Option<&TypeUnderTest> {
        self.index.get(name).map(|&i| &self.types[i])
    }

    fn get_mut(&mut self, name: &str) -> Result<&mut TypeUnderTest, ConfigError> {
        self.ensure_mutable()?;
        match self.index.get(name) {
            Some(&i) => Ok(&mut self.types[i]),
            None => Err(ConfigError::UnknownType(name.to_string())),
        }
    }

    pub fn operation(
        &self,
        type_name: &str,
        kind: OperationKind,
        name: &str,
        signature: &[ValueKind],
    ) -> Option<&OperationSpec> {
        self.get(type_name)?.find(kind, name, signature)
    }

    pub fn set_type_weight(&mut self, type_name: &str, weight: f64) -> Result<(), ConfigError> {
        check_weight(weight)?;
        self.get_mut(type_name)?.weight = weight;
        Ok(())
    }

    /// Every method of the type; constructors keep their weights.
    pub fn change_all_methods_weight(
        &mut self,
        type_name: &str,
        weight: f64,
    ) -> Result<(), ConfigError> {
        check_weight(weight)?;
        for m in &mut self.get_mut(type_name)?.methods {
            m.weight = weight;
        }
        Ok(())
    }

    /// Without a signature every overload of `method` is updated.
    pub fn change_method_weight(
        &mut self,
        type_name: &str,
        method: &str,
        signature: Option<&[ValueKind]>,
        weight: f64,
    ) -> Result<(), ConfigError> {
        check_weight(weight)?;
        let ty = self.get_mut(type_name)?;
        let matched = update_matching(&mut ty.methods, method, signature, weight);
        if matched == 0 {
            return Err(ConfigError::UnknownOperation {
                ty: type_name.to_string(),
                selector: selector_text(method, signature),
            });
        }
        Ok(())
    }

    pub fn change_constructor_weight(
        &mut self,
        type_name: &str,
        signature: Option<&[ValueKind]>,
        weight: f64,
    ) -> Result<(), ConfigError> {
        check_weight(weight)?;
        let ty = self.get_mut(type_name)?;
        let name = ty.name.clone();
        let matched = update_matching(&mut ty.constructors, &name, signature, weight);
        if matched == 0 {
            return Err(ConfigError::UnknownOperation {
                ty: type_name.to_string(),
                selector: selector_text(&name, signature),
            });
        }
        Ok(())
    }

    pub fn change_creation_probability(
        &mut self,
        type_name: &str,
        f: CreationProbability,
    ) -> Result<(), ConfigError> {
        f.validate()?;
        self.get_mut(type_name)?.creation = f;
        Ok(())
    }

    /// Attach a generator to a primitive parameter. `operation` equal to the
    /// type name addresses a constructor. `index` is zero-based.
    pub fn register_parameter_generator(
        &mut self,
        type_name: &str,
        operation: &str,
        signature: &[ValueKind],
        index: usize,
        generator: ParameterGenerator,
    ) -> Result<(), ConfigError> {
        self.ensure_mutable()?;
        let ty = self
            .get(type_name)
            .ok_or_else(|| ConfigError::UnknownType(type_name.to_string()))?;
        let constructor = operation == ty.name();
        let kind = if constructor {
            OperationKind::Constructor
        } else {
            OperationKind::Method
        };
        let op =
            ty.find(kind, operation, signature)
                .ok_or_else(|| ConfigError::UnknownOperation {
                    ty: type_name.to_string(),
                    selector: selector_text(operation, Some(signature)),
                })?;
        if index >= op.signature.len() {
            return Err(ConfigError::ParameterIndex {
                operation: op.display_signature(),
                index,
                arity: op.signature.len(),
            });
        }
        if !op.signature[index].is_primitive() {
            return Err(ConfigError::NonPrimitiveParameter {
                operation: op.display_signature(),
                index,
            });
        }
        let key = GeneratorKey {
            type_name: type_name.to_string(),
            constructor,
            operation: operation.to_string(),
            signature: signature.to_vec(),
            index,
        };
        self.generators.insert(key, generator);
        Ok(())
    }

    pub(crate) fn generator(
        &self,
        type_name: &str,
        op: &OperationSpec,
        index: usize,
    ) -> Option<&ParameterGenerator> {
        // Allocation-free lookup is not worth the complexity at these sizes.
        let key = GeneratorKey {
            type_name: type_name.to_string(),
            constructor: op.kind == OperationKind::Constructor,
            operation: op.name.clone(),
            signature: op.signature.clone(),
            index,
        };
        self.generators.get(&key)
    }

    pub fn set_fixture(&mut self, fixture: Fixture) -> Result<(), ConfigError> {
        self.ensure_mutable()?;
        self.fixture = Some(fixture);
        Ok(())
    }

    pub fn fixture(&self) -> Option<&Fixture> {
        self.fixture.as_ref()
    }

    pub fn settings(&self) -> &GenerationSettings {
        &self.settings
    }

    pub fn set_null_probability(&mut self, p: f64) -> Result<(), ConfigError> {
        self.ensure_mutable()?;
        if !(0.0..=1.0).contains(&p) {
            return Err(ConfigError::InvalidProbability(p));
        }
        self.settings.null_probability = p;
        Ok(())
    }

    pub fn set_constructor_retries(&mut self, retries: u32) -> Result<(), ConfigError> {
        self.ensure_mutable()?;
        self.settings.constructor_retries = retries.max(1);
        Ok(())
    }

    /// Hex SHA-256 over weights, probability function ids, generator ids,
    /// contract versions, fixture name and engine settings.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        let mut line = |s: String| {
            h.update(s.as_bytes());
            h.update(b"\n");
        };
        for ty in &self.types {
            line(format!(
                "type {} version={} weight={} creation={} invariant={}",
                ty.name,
                ty.version,
                ty.weight,
                ty.creation.id(),
                ty.invariant.is_some()
            ));
            for op in ty.operations() {
                line(format!(
                    "  {:?} {} returns={} weight={} pure={} exceptions={:?} pre={} post={}",
                    op.kind,
                    op.display_signature(),
                    op.returns.as_ref().map_or("void", |k| k.name()),
                    op.weight,
                    op.pure,
                    op.exceptions,
                    op.precondition.is_some(),
                    op.postcondition.is_some()
                ));
            }
        }
        for (key, g) in &self.generators {
            line(format!(
                "generator {}.{}({})#{} = {}",
                key.type_name,
                key.operation,
                signature_string(&key.signature),
                key.index,
                g.id
            ));
        }
        if let Some(fx) = &self.fixture {
            line(format!("fixture {}", fx.name));
        }
        let s = &self.settings;
        line(format!(
            "settings null={} retries={} depth={}",
            s.null_probability, s.constructor_retries, s.max_construction_depth
        ));
        hex::encode(h.finalize())
    }
}

fn update_matching(
    ops: &mut [OperationSpec],
    name: &str,
    signature: Option<&[ValueKind]>,
    weight: f64,
) -> usize {
    let mut n = 0;
    for op in ops
        .iter_mut()
        .filter(|op| op.name == name && signature.is_none_or(|s| op.signature == s))
    {
        op.weight = weight;
        n += 1;
    }
    n
}

fn selector_text(name: &str, signature: Option<&[ValueKind]>) -> String {
    match signature {
        Some(sig) => format!("{name}({})", signature_string(sig)),
        None => name.to_string(),
    }
}
