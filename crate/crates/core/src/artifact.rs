//! Portable, replayable record of a generation run.
//!
//! Artifacts are canonical pretty-printed JSON: field order is fixed by the
//! struct definitions, integers are plain decimal, and unknown fields are
//! rejected. Writing the same artifact twice yields the same bytes.

use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::ArtifactError;
use crate::value::{signature_string, ValueKind};

pub const FORMAT_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactHeader {
    pub format_version: u32,
    pub tool_version: String,
    pub name: String,
    pub seed: u64,
    pub attempts_per_test: u32,
    pub registry_digest: String,
    pub rng: String,
    /// Caller-supplied creation stamp. Generation leaves it empty so that
    /// identical runs produce identical bytes.
    #[serde(default)]
    pub created: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StepKind {
    Construct,
    Invoke,
}

/// A literal argument or a reference to an earlier binding.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Arg {
    Int(i32),
    Bool(bool),
    Null,
    Var(String),
}

impl fmt::Display for Arg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arg::Int(v) => write!(f, "{v}"),
            Arg::Bool(v) => write!(f, "{v}"),
            Arg::Null => f.write_str("null"),
            Arg::Var(v) => f.write_str(v),
        }
    }
}

impl Serialize for Arg {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Arg::Int(v) => s.serialize_i32(*v),
            Arg::Bool(v) => s.serialize_bool(*v),
            Arg::Null => s.serialize_unit(),
            Arg::Var(v) => s.serialize_str(v),
        }
    }
}

impl<'de> Deserialize<'de> for Arg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct ArgVisitor;

        impl Visitor<'_> for ArgVisitor {
            type Value = Arg;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a 32-bit integer, boolean, null or variable name")
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Arg, E> {
                i32::try_from(v)
                    .map(Arg::Int)
                    .map_err(|_| E::custom(format!("integer {v} outside 32-bit range")))
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Arg, E> {
                i32::try_from(v)
                    .map(Arg::Int)
                    .map_err(|_| E::custom(format!("integer {v} outside 32-bit range")))
            }

            fn visit_bool<E: de::Error>(self, v: bool) -> Result<Arg, E> {
                Ok(Arg::Bool(v))
            }

            fn visit_unit<E: de::Error>(self) -> Result<Arg, E> {
                Ok(Arg::Null)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Arg, E> {
                if v.is_empty() {
                    return Err(E::custom("empty variable name"));
                }
                Ok(Arg::Var(v.to_string()))
            }
        }

        d.deserialize_any(ArgVisitor)
    }
}

/// One constructor or method call of a test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CallStep {
    pub kind: StepKind,
    #[serde(rename = "type")]
    pub type_name: String,
    pub operation: String,
    pub signature: Vec<ValueKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub receiver: Option<String>,
    pub args: Vec<Arg>,
    /// Declared result kind; absent for void methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub returns: Option<ValueKind>,
    /// Variable receiving the result.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bind: Option<String>,
}

impl CallStep {
    /// A constructor call bound to `bind`.
    pub fn construct(
        type_name: &str,
        signature: Vec<ValueKind>,
        args: Vec<Arg>,
        bind: &str,
    ) -> Self {
        Self {
            kind: StepKind::Construct,
            type_name: type_name.to_string(),
            operation: type_name.to_string(),
            signature,
            receiver: None,
            args,
            returns: Some(ValueKind::reference(type_name)),
            bind: Some(bind.to_string()),
        }
    }

    /// A void method call. Use [`CallStep::binding`] for non-void methods.
    pub fn invoke(
        type_name: &str,
        receiver: &str,
        operation: &str,
        signature: Vec<ValueKind>,
        args: Vec<Arg>,
    ) -> Self {
        Self {
            kind: StepKind::Invoke,
            type_name: type_name.to_string(),
            operation: operation.to_string(),
            signature,
            receiver: Some(receiver.to_string()),
            args,
            returns: None,
            bind: None,
        }
    }

    pub fn binding(mut self, returns: ValueKind, bind: &str) -> Self {
        self.returns = Some(returns);
        self.bind = Some(bind.to_string());
        self
    }

    /// `credit(int)`
    pub fn display_operation(&self) -> String {
        format!("{}({})", self.operation, signature_string(&self.signature))
    }

    /// Variables this step reads.
    pub fn uses(&self) -> impl Iterator<Item = &str> {
        self.receiver
            .as_deref()
            .into_iter()
            .chain(self.args.iter().filter_map(|a| match a {
                Arg::Var(v) => Some(v.as_str()),
                _ => None,
            }))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestCase {
    pub id: String,
    /// Leading steps contributed by the fixture's setup.
    #[serde(default)]
    pub setup_steps: usize,
    pub steps: Vec<CallStep>,
}

impl TestCase {
    /// Steps bind each variable once and only read variables bound earlier.
    pub fn check_integrity(&self) -> Result<(), String> {
        if self.setup_steps > self.steps.len() {
            return Err(format!("{}: setup_steps exceeds step count", self.id));
        }
        let mut bound = HashSet::new();
        for (i, step) in self.steps.iter().enumerate() {
            for var in step.uses() {
                if !bound.contains(var) {
                    return Err(format!(
                        "{} step {i}: variable {var} used before binding",
                        self.id
                    ));
                }
            }
            match (step.kind, &step.receiver) {
                (StepKind::Construct, Some(_)) => {
                    return Err(format!("{} step {i}: constructor with receiver", self.id))
                }
                (StepKind::Invoke, None) => {
                    return Err(format!("{} step {i}: method without receiver", self.id))
                }
                _ => {}
            }
            if step.kind == StepKind::Construct && step.bind.is_none() {
                return Err(format!(
                    "{} step {i}: construction without binding",
                    self.id
                ));
            }
            if let Some(b) = &step.bind {
                if !bound.insert(b.as_str()) {
                    return Err(format!("{} step {i}: variable {b} bound twice", self.id));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestArtifact {
    pub header: ArtifactHeader,
    pub tests: Vec<TestCase>,
}

impl TestArtifact {
    pub fn test(&self, id: &str) -> Option<&TestCase> {
        self.tests.iter().find(|t| t.id == id)
    }

    /// Canonical text form.
    pub fn to_canonical_string(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(self).expect("artifact serialization is infallible");
        s.push('\n');
        s
    }

    pub fn from_str_checked(text: &str) -> Result<Self, ArtifactError> {
        let artifact: TestArtifact = serde_json::from_str(text).map_err(|e| {
            let (line, column) = (e.line(), e.column());
            ArtifactError::Parse {
                offset: byte_offset(text, line, column),
                line,
                column,
                message: e.to_string(),
            }
        })?;
        if artifact.header.format_version != FORMAT_VERSION {
            return Err(ArtifactError::UnsupportedVersion(
                artifact.header.format_version,
            ));
        }
        let mut ids = HashSet::new();
        for t in &artifact.tests {
            if !ids.insert(t.id.as_str()) {
                return Err(ArtifactError::Invalid(format!(
                    "duplicate test id {}",
                    t.id
                )));
            }
            t.check_integrity().map_err(ArtifactError::Invalid)?;
        }
        Ok(artifact)
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text
        .split_inclusive('\n')
        .take(line - 1)
        .map(str::len)
        .sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

pub fn write_artifact(
    artifact: &TestArtifact,
    destination: impl AsRef<Path>,
) -> Result<(), ArtifactError> {
    std::fs::write(destination, artifact.to_canonical_string())?;
    Ok(())
}

pub fn read_artifact(source: impl AsRef<Path>) -> Result<TestArtifact, ArtifactError> {
    let text = std::fs::read_to_string(source)?;
    TestArtifact::from_str_checked(&text)
}
