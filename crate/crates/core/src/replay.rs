//! Re-execution of stored test cases against a registry.
//!
//! A step whose entry precondition no longer holds, or which no longer
//! matches the registry, makes its test case inconclusive. Contract
//! violations are errors exactly as during generation.

use rayon::prelude::*;

use crate::artifact::{TestArtifact, TestCase};
use crate::exec::Phase;
use crate::registry::Registry;
use crate::report::{GenerationReport, Outcome, Verdict};
use crate::session::{Session, StepResult};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReplayOptions {
    /// Run test cases on the rayon thread pool. Verdict order is unchanged.
    pub parallel: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub report: GenerationReport,
    /// Digest recorded in the artifact.
    pub artifact_digest: String,
    /// Digest of the registry replayed against.
    pub registry_digest: String,
}

impl ReplayReport {
    /// The registry differs from the one the artifact was produced with.
    pub fn digest_drift(&self) -> bool {
        self.artifact_digest != self.registry_digest
    }
}

/// Replay one test case in a fresh state.
pub fn replay_test_case(registry: &Registry, test: &TestCase) -> Verdict {
    registry.freeze();
    let mut session = Session::new(registry);
    let mut outcome = Outcome::Pass;
    for (i, step) in test.steps.iter().enumerate() {
        let label = format!("{}.{}", step.type_name, step.display_operation());
        match session.execute_step(step.clone(), Phase::Replay) {
            StepResult::Done(_) => {}
            StepResult::PreconditionFalse => {
                outcome = Outcome::Inconclusive {
                    step: i,
                    reason: format!("entry precondition of {label} is false"),
                };
                break;
            }
            StepResult::Drift(reason) => {
                outcome = Outcome::Inconclusive { step: i, reason };
                break;
            }
            StepResult::Failed(f) => {
                outcome = Outcome::Error(f);
                break;
            }
        }
    }
    let harness_error = session.teardown();
    Verdict {
        test_id: test.id.clone(),
        outcome,
        harness_error,
    }
}

pub fn replay(artifact: &TestArtifact, registry: &Registry) -> ReplayReport {
    replay_with(artifact, registry, ReplayOptions::default())
}

pub fn replay_with(
    artifact: &TestArtifact,
    registry: &Registry,
    opts: ReplayOptions,
) -> ReplayReport {
    registry.freeze();
    let verdicts: Vec<Verdict> = if opts.parallel {
        artifact
            .tests
            .par_iter()
            .map(|t| replay_test_case(registry, t))
            .collect()
    } else {
        artifact
            .tests
            .iter()
            .map(|t| replay_test_case(registry, t))
            .collect()
    };
    let calls_emitted = artifact
        .tests
        .iter()
        .map(|t| t.steps.len() - t.setup_steps)
        .collect();
    ReplayReport {
        report: GenerationReport {
            name: artifact.header.name.clone(),
            seed: artifact.header.seed,
            attempts_per_test: artifact.header.attempts_per_test,
            verdicts,
            calls_emitted,
            stats: Default::default(),
        },
        artifact_digest: artifact.header.registry_digest.clone(),
        registry_digest: registry.digest(),
    }
}
