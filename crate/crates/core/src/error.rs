use thiserror::Error;

/// Problems detected while building or mutating a [`Registry`](crate::Registry).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("registry is frozen; configuration can no longer change")]
    Frozen,
    #[error("type `{0}` is already registered")]
    DuplicateType(String),
    #[error("unknown type `{0}`")]
    UnknownType(String),
    #[error("type `{ty}` has no operation matching `{selector}`")]
    UnknownOperation { ty: String, selector: String },
    #[error("weight must be a finite non-negative number, got {0}")]
    InvalidWeight(f64),
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("creation probability `{id}` is invalid: f({n}) = {value}")]
    InvalidCreationFunction { id: String, n: u32, value: f64 },
    #[error("threshold must be at least 1, got {0}")]
    InvalidThreshold(i64),
    #[error("parameter index {index} out of range for `{operation}` with {arity} parameter(s)")]
    ParameterIndex {
        operation: String,
        index: usize,
        arity: usize,
    },
    #[error("parameter {index} of `{operation}` is a reference; generators apply to primitive parameters")]
    NonPrimitiveParameter { operation: String, index: usize },
    #[error("invalid definition of `{name}`: {reason}")]
    InvalidDefinition { name: String, reason: String },
    #[error("invalid selector `{0}`")]
    InvalidSelector(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerationError {
    #[error("cannot bootstrap pool: no type is constructible under the current weights")]
    CannotBootstrap,
    #[error("parameter generator `{generator}` produced {got} for a parameter of kind {expected}")]
    GeneratorKind {
        generator: String,
        expected: String,
        got: String,
    },
    #[error("fixture setup failed: {0}")]
    Fixture(String),
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at byte {offset} (line {line}, column {column}): {message}")]
    Parse {
        offset: usize,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported artifact format version {0}")]
    UnsupportedVersion(u32),
    #[error("malformed artifact: {0}")]
    Invalid(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShrinkError {
    #[error("test case does not reproduce the target failure: {0}")]
    NotReproducing(String),
    #[error("shrink budget must be at least 1")]
    ZeroBudget,
}
