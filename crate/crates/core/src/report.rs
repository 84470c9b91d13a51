//! Verdicts, run reports, and their human-readable rendering.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::artifact::{Arg, StepKind, TestCase};
use crate::exec::ErrorKind;

/// A contract violation that ended a test case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Failure {
    pub kind: ErrorKind,
    /// Index of the failing step within the test case.
    pub step: usize,
    /// Label of the violated contract, e.g. `Account@invariant`.
    pub contract: String,
    /// Type owning the violated contract.
    pub contract_type: String,
    /// Harness-level operation that triggered it, e.g. `Account.credit(int)`.
    pub operation: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Error(Failure),
    Inconclusive { step: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub test_id: String,
    pub outcome: Outcome,
    /// Teardown problems. Never changes `outcome`.
    pub harness_error: Option<String>,
}

impl Verdict {
    pub fn failure(&self) -> Option<&Failure> {
        match &self.outcome {
            Outcome::Error(f) => Some(f),
            _ => None,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.outcome == Outcome::Pass
    }

    pub fn is_error(&self) -> bool {
        matches!(self.outcome, Outcome::Error(_))
    }

    pub fn is_inconclusive(&self) -> bool {
        matches!(self.outcome, Outcome::Inconclusive { .. })
    }
}

/// How often one operation was picked from the urn and what became of it.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OperationStats {
    pub selected: u64,
    /// Calls dropped because the entry precondition was false.
    pub precondition_rejections: u64,
    /// Selections dropped for other reasons (creation declined, no instance).
    pub other_rejections: u64,
    /// Steps emitted for this operation, including those made to supply
    /// receivers and arguments.
    pub emitted: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionStats {
    /// Keyed by `Type.operation(signature)`.
    pub operations: BTreeMap<String, OperationStats>,
}

impl SelectionStats {
    pub fn get(&self, key: &str) -> OperationStats {
        self.operations.get(key).copied().unwrap_or_default()
    }

    pub(crate) fn entry(&mut self, key: &str) -> &mut OperationStats {
        if !self.operations.contains_key(key) {
            self.operations
                .insert(key.to_string(), OperationStats::default());
        }
        self.operations.get_mut(key).expect("just inserted")
    }

    pub fn merge(&mut self, other: &SelectionStats) {
        for (k, v) in &other.operations {
            let e = self.entry(k);
            e.selected += v.selected;
            e.precondition_rejections += v.precondition_rejections;
            e.other_rejections += v.other_rejections;
            e.emitted += v.emitted;
        }
    }
}

/// Outcome of a generation or replay run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GenerationReport {
    pub name: String,
    pub seed: u64,
    pub attempts_per_test: u32,
    pub verdicts: Vec<Verdict>,
    /// Steps emitted by the random phase of each test case (setup excluded).
    pub calls_emitted: Vec<usize>,
    pub stats: SelectionStats,
}

impl GenerationReport {
    pub fn tests(&self) -> usize {
        self.verdicts.len()
    }

    pub fn errors(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_error()).count()
    }

    pub fn inconclusive(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_inconclusive()).count()
    }

    pub fn passes(&self) -> usize {
        self.verdicts.iter().filter(|v| v.is_pass()).count()
    }

    pub fn verdict(&self, test_id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.test_id == test_id)
    }
}

/// One line per error, then the three summary lines.
pub fn render_report(report: &GenerationReport) -> String {
    let mut out = String::new();
    let mut n = 0;
    for v in &report.verdicts {
        if let Outcome::Error(f) = &v.outcome {
            n += 1;
            let _ = writeln!(
                out,
                "{n}) Error detected in {} by {}: {} violation of class \"{}\" ({}) by method {} at step {}",
                report.name,
                v.test_id,
                f.kind.as_str(),
                f.contract_type,
                f.contract,
                f.operation,
                f.step
            );
        }
    }
    for v in &report.verdicts {
        if let Some(h) = &v.harness_error {
            let _ = writeln!(out, "Harness error in {}: {h}", v.test_id);
        }
    }
    let _ = writeln!(out, "Number of tests: {}", report.tests());
    let _ = writeln!(out, "Number of errors: {}", report.errors());
    let _ = writeln!(
        out,
        "Number of inconclusive tests: {}",
        report.inconclusive()
    );
    out
}

/// Readable listing of a test case, one statement per step. Variables are
/// renamed `ob1`, `ob2`, ... in binding order.
pub fn render_test_source(test: &TestCase) -> String {
    let mut names: HashMap<&str, String> = HashMap::new();
    let mut out = String::new();
    for step in &test.steps {
        let name_of = |v: &str, names: &HashMap<&str, String>| {
            names.get(v).cloned().unwrap_or_else(|| v.to_string())
        };
        let args = step
            .args
            .iter()
            .map(|a| match a {
                Arg::Var(v) => name_of(v, &names),
                other => other.to_string(),
            })
            .collect::<Vec<_>>()
            .join(", ");
        let call = match step.kind {
            StepKind::Construct => format!("new {}({args})", step.type_name),
            StepKind::Invoke => {
                let recv = name_of(step.receiver.as_deref().unwrap_or("?"), &names);
                format!("{recv}.{}({args})", step.operation)
            }
        };
        match &step.bind {
            Some(bind) => {
                let fresh = format!("ob{}", names.len() + 1);
                names.insert(bind.as_str(), fresh.clone());
                let kind = step.returns.as_ref().map_or("Object", |k| k.name());
                let _ = writeln!(out, "{kind} {fresh} = {call};");
            }
            None => {
                let _ = writeln!(out, "{call};");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::CallStep;
    use crate::value::ValueKind;

    fn report(errors: usize, passes: usize) -> GenerationReport {
        let mut verdicts = Vec::new();
        for i in 0..errors {
            verdicts.push(Verdict {
                test_id: format!("test{}", i + 1),
                outcome: Outcome::Error(Failure {
                    kind: ErrorKind::Invariant,
                    step: 1,
                    contract: "Account@invariant".into(),
                    contract_type: "Account".into(),
                    operation: "Account.credit(int)".into(),
                    message: String::new(),
                }),
                harness_error: None,
            });
        }
        for i in 0..passes {
            verdicts.push(Verdict {
                test_id: format!("test{}", errors + i + 1),
                outcome: Outcome::Pass,
                harness_error: None,
            });
        }
        GenerationReport {
            name: "TestBank".into(),
            verdicts,
            ..Default::default()
        }
    }

    #[test]
    fn summary_lines_in_order() {
        let text = render_report(&report(71, 29));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 74);
        assert_eq!(
            &lines[71..],
            &[
                "Number of tests: 100",
                "Number of errors: 71",
                "Number of inconclusive tests: 0"
            ]
        );
    }

    #[test]
    fn empty_report() {
        let text = render_report(&GenerationReport::default());
        assert_eq!(
            text,
            "Number of tests: 0\nNumber of errors: 0\nNumber of inconclusive tests: 0\n"
        );
    }

    #[test]
    fn error_line_names_kind_and_type() {
        let text = render_report(&report(1, 0));
        let first = text.lines().next().unwrap();
        assert!(first.contains("test1"));
        assert!(first.contains("invariant"));
        assert!(first.contains("\"Account\""));
        assert!(first.contains("step 1"));
    }

    fn construct(ty: &str, sig: Vec<ValueKind>, args: Vec<Arg>, bind: &str) -> CallStep {
        CallStep {
            kind: StepKind::Construct,
            type_name: ty.into(),
            operation: ty.into(),
            signature: sig,
            receiver: None,
            args,
            returns: Some(ValueKind::reference(ty)),
            bind: Some(bind.into()),
        }
    }

    #[test]
    fn source_listing() {
        let int = ValueKind::Int32;
        let hist = ValueKind::reference("History");
        let test = TestCase {
            id: "test1".into(),
            setup_steps: 0,
            steps: vec![
                construct(
                    "Account",
                    vec![int.clone(), int.clone()],
                    vec![Arg::Int(1023296578), Arg::Int(223978640)],
                    "ob7",
                ),
                construct(
                    "History",
                    vec![int.clone(), hist.clone()],
                    vec![Arg::Int(1661966075), Arg::Null],
                    "ob9",
                ),
                CallStep {
                    kind: StepKind::Invoke,
                    type_name: "History".into(),
                    operation: "getBalance".into(),
                    signature: vec![],
                    receiver: Some("ob9".into()),
                    args: vec![],
                    returns: Some(int.clone()),
                    bind: Some("ob12".into()),
                },
                CallStep {
                    kind: StepKind::Invoke,
                    type_name: "Account".into(),
                    operation: "debit".into(),
                    signature: vec![int],
                    receiver: Some("ob7".into()),
                    args: vec![Arg::Int(152022897)],
                    returns: None,
                    bind: None,
                },
            ],
        };
        let src = render_test_source(&test);
        let lines: Vec<&str> = src.lines().collect();
        assert_eq!(
            lines[0],
            "Account ob1 = new Account(1023296578, 223978640);"
        );
        assert_eq!(lines[1], "History ob2 = new History(1661966075, null);");
        assert_eq!(lines[2], "int ob3 = ob2.getBalance();");
        assert_eq!(lines[3], "ob1.debit(152022897);");
    }

    #[test]
    fn empty_source() {
        let test = TestCase {
            id: "t".into(),
            setup_steps: 0,
            steps: vec![],
        };
        assert_eq!(render_test_source(&test), "");
    }
}
