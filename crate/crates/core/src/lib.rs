//! Random generation of contract-checked call sequences.
//!
//! Register the types under test with their contracts in a [`Registry`],
//! tune the operational profile (weights, creation probabilities,
//! parameter generators, fixtures), then [`generate`] test cases. Every
//! call is executed as it is generated and checked against its contract;
//! failing sequences are reported, stored as replayable artifacts, and can
//! be reduced with [`shrink`](shrink::shrink).
//!
//! ```
//! use seqgen::{corpus::bank, generate, render_report};
//!
//! let registry = bank::registry();
//! let (artifact, report) = generate(&registry, "TestBank", 20, 50, 42).unwrap();
//! assert_eq!(artifact.tests.len(), 20);
//! println!("{}", render_report(&report));
//! ```

pub mod artifact;
pub mod cli;
pub mod contract;
pub mod corpus;
pub mod engine;
pub mod error;
pub mod exec;
pub mod heap;
pub mod registry;
pub mod replay;
pub mod report;
pub mod session;
pub mod shrink;
pub mod value;

pub use artifact::{
    read_artifact, write_artifact, Arg, CallStep, StepKind, TestArtifact, TestCase,
};
pub use contract::{
    threshold_probability, CallView, CreationProbability, ExceptionPolicy, OperationSpec, PostView,
    Raised, TypeUnderTest,
};
pub use engine::generate;
pub use error::{ArtifactError, ConfigError, GenerationError, ShrinkError};
pub use exec::{CallContext, ErrorKind};
pub use heap::{Heap, State};
pub use registry::{Fixture, ParameterGenerator, Registry};
pub use replay::{replay, replay_with, ReplayOptions};
pub use report::{render_report, render_test_source, Failure, GenerationReport, Outcome, Verdict};
pub use shrink::{shrink, ShrinkOptions, ShrinkTarget};
pub use value::{ObjId, Value, ValueKind};
