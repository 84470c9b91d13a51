//! Reduction of a failing test case to a short sequence with the same
//! failure.
//!
//! Steps are deleted together with every later step that reads a variable
//! they bind, so candidates always stay well-formed. A greedy backward pass
//! of single deletions runs to a fixpoint; long sequences also get a pass
//! that removes contiguous chunks. The result is 1-minimal: deleting any one
//! remaining step (and its dependents) loses the failure. Fixture steps are
//! kept as they are.

use std::collections::{HashMap, HashSet};

use crate::artifact::{Arg, CallStep, TestCase};
use crate::error::ShrinkError;
use crate::exec::ErrorKind;
use crate::registry::Registry;
use crate::replay::replay_test_case;
use crate::report::{Failure, Outcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShrinkOptions {
    /// Maximum candidate executions, the initial reproduction check included.
    pub budget: usize,
    /// After deleting steps, also move integer arguments toward zero.
    pub shrink_values: bool,
}

impl Default for ShrinkOptions {
    fn default() -> Self {
        Self {
            budget: 10_000,
            shrink_values: false,
        }
    }
}

/// The failure a candidate must reproduce.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShrinkTarget {
    pub kind: ErrorKind,
    /// Violated contract label, e.g. `Account@invariant`.
    pub contract: String,
}

impl From<&Failure> for ShrinkTarget {
    fn from(f: &Failure) -> Self {
        Self {
            kind: f.kind,
            contract: f.contract.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkResult {
    pub test_id: String,
    pub setup_steps: usize,
    pub steps: Vec<CallStep>,
    pub original_len: usize,
    pub minimal_len: usize,
    pub kind: ErrorKind,
    pub contract: String,
    /// Candidate executions performed.
    pub iterations: usize,
    /// The budget ran out; `steps` is the shortest reproduction found.
    pub budget_exhausted: bool,
}

impl ShrinkResult {
    /// The minimal sequence as a test case, variables renumbered.
    pub fn to_test_case(&self) -> TestCase {
        renumber(&TestCase {
            id: self.test_id.clone(),
            setup_steps: self.setup_steps,
            steps: self.steps.clone(),
        })
    }
}

/// Rename bindings to `ob1`, `ob2`, ... in binding order.
pub fn renumber(test: &TestCase) -> TestCase {
    let mut names: HashMap<String, String> = HashMap::new();
    let mut steps = Vec::with_capacity(test.steps.len());
    for step in &test.steps {
        let mut s = step.clone();
        let rename = |v: &mut String, names: &HashMap<String, String>| {
            if let Some(n) = names.get(v.as_str()) {
                *v = n.clone();
            }
        };
        if let Some(r) = s.receiver.as_mut() {
            rename(r, &names);
        }
        for a in &mut s.args {
            if let Arg::Var(v) = a {
                rename(v, &names);
            }
        }
        if let Some(b) = s.bind.as_mut() {
            let fresh = format!("ob{}", names.len() + 1);
            names.insert(b.clone(), fresh.clone());
            *b = fresh;
        }
        steps.push(s);
    }
    TestCase {
        id: test.id.clone(),
        setup_steps: test.setup_steps,
        steps,
    }
}

/// Delete the steps at `indices` and, transitively, every later step that
/// reads a variable bound by a deleted step.
pub fn delete_with_dependents(steps: &[CallStep], indices: &[usize]) -> Vec<CallStep> {
    let marked: HashSet<usize> = indices.iter().copied().collect();
    let mut dead: HashSet<&str> = HashSet::new();
    let mut kept = Vec::with_capacity(steps.len());
    for (i, step) in steps.iter().enumerate() {
        if marked.contains(&i) || step.uses().any(|v| dead.contains(v)) {
            if let Some(b) = &step.bind {
                dead.insert(b);
            }
        } else {
            kept.push(step.clone());
        }
    }
    kept
}

struct Shrinker<'a> {
    registry: &'a Registry,
    target: &'a ShrinkTarget,
    id: String,
    setup: usize,
    budget: usize,
    used: usize,
}

impl Shrinker<'_> {
    fn exhausted(&self) -> bool {
        self.used >= self.budget
    }

    /// Run a candidate. On reproduction returns it cut after the failing
    /// step, since later steps never execute.
    fn check(&mut self, steps: Vec<CallStep>) -> Option<Vec<CallStep>> {
        self.used += 1;
        let test = TestCase {
            id: self.id.clone(),
            setup_steps: self.setup,
            steps,
        };
        match replay_test_case(self.registry, &test).outcome {
            Outcome::Error(f)
                if f.kind == self.target.kind && f.contract == self.target.contract =>
            {
                let mut steps = test.steps;
                steps.truncate(f.step + 1);
                Some(steps)
            }
            _ => None,
        }
    }

    /// Backward single deletions until none succeeds.
    fn greedy(&mut self, steps: &mut Vec<CallStep>) -> bool {
        let mut progress = false;
        loop {
            let mut changed = false;
            let mut i = steps.len();
            while i > self.setup {
                i -= 1;
                if self.exhausted() {
                    return progress;
                }
                let candidate = delete_with_dependents(steps, &[i]);
                if let Some(shorter) = self.check(candidate) {
                    *steps = shorter;
                    changed = true;
                    progress = true;
                    i = i.min(steps.len());
                }
            }
            if !changed {
                return progress;
            }
        }
    }

    /// Delete contiguous chunks, halving the chunk size down to two.
    fn chunks(&mut self, steps: &mut Vec<CallStep>) -> bool {
        let mut progress = false;
        let mut size = (steps.len() - self.setup) / 2;
        while size >= 2 {
            let mut start = self.setup;
            while start + size <= steps.len() {
                if self.exhausted() {
                    return progress;
                }
                let range: Vec<usize> = (start..start + size).collect();
                let candidate = delete_with_dependents(steps, &range);
                match self.check(candidate) {
                    Some(shorter) => {
                        *steps = shorter;
                        progress = true;
                    }
                    None => start += size,
                }
            }
            size /= 2;
        }
        progress
    }

    /// Move each integer argument toward zero: try 0, then halve.
    fn values(&mut self, steps: &mut Vec<CallStep>) -> bool {
        let mut progress = false;
        for i in self.setup..steps.len() {
            for a in 0..steps[i].args.len() {
                while let Arg::Int(v) = steps[i].args[a] {
                    if v == 0 || self.exhausted() {
                        break;
                    }
                    let mut accepted = false;
                    for smaller in [0, v / 2] {
                        if smaller == v || self.exhausted() {
                            continue;
                        }
                        let mut candidate = steps.clone();
                        candidate[i].args[a] = Arg::Int(smaller);
                        if let Some(ok) = self.check(candidate) {
                            if ok.len() == steps.len() {
                                *steps = ok;
                                accepted = true;
                                progress = true;
                                break;
                            }
                        }
                    }
                    if !accepted {
                        break;
                    }
                }
            }
        }
        progress
    }
}

/// Shrink `test` while it keeps failing with `target`.
pub fn shrink(
    test: &TestCase,
    target: &ShrinkTarget,
    registry: &Registry,
    opts: ShrinkOptions,
) -> Result<ShrinkResult, ShrinkError> {
    if opts.budget == 0 {
        return Err(ShrinkError::ZeroBudget);
    }
    let mut s = Shrinker {
        registry,
        target,
        id: test.id.clone(),
        setup: test.setup_steps,
        budget: opts.budget,
        used: 0,
    };
    let verdict = replay_test_case(registry, test);
    s.used = 1;
    match &verdict.outcome {
        Outcome::Error(f) if f.kind == target.kind && f.contract == target.contract => {}
        Outcome::Error(f) => {
            return Err(ShrinkError::NotReproducing(format!(
                "fails with {} violation of {} instead of {} violation of {}",
                f.kind.as_str(),
                f.contract,
                target.kind.as_str(),
                target.contract
            )))
        }
        Outcome::Pass => return Err(ShrinkError::NotReproducing("test case passes".into())),
        Outcome::Inconclusive { step, reason } => {
            return Err(ShrinkError::NotReproducing(format!(
                "inconclusive at step {step}: {reason}"
            )))
        }
    }

    let mut steps = test.steps.clone();
    loop {
        let mut progress = s.greedy(&mut steps);
        if steps.len() - s.setup > 16 {
            progress |= s.chunks(&mut steps);
        }
        if !progress || s.exhausted() {
            break;
        }
    }
    if opts.shrink_values && !s.exhausted() && s.values(&mut steps) {
        s.greedy(&mut steps);
    }
    Ok(ShrinkResult {
        test_id: test.id.clone(),
        setup_steps: test.setup_steps,
        original_len: test.steps.len(),
        minimal_len: steps.len(),
        steps,
        kind: target.kind,
        contract: target.contract.clone(),
        iterations: s.used,
        budget_exhausted: s.exhausted(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::StepKind;
    use crate::corpus::bank;
    use crate::value::ValueKind;

    fn invariant() -> ShrinkTarget {
        ShrinkTarget {
            kind: ErrorKind::Invariant,
            contract: "Account@invariant".into(),
        }
    }

    fn noise(var: &str, bind: &str) -> Vec<CallStep> {
        vec![
            CallStep::construct(
                "Account",
                vec![ValueKind::Int32, ValueKind::Int32],
                vec![Arg::Int(10), Arg::Int(0)],
                var,
            ),
            CallStep::invoke(
                "Account",
                var,
                "credit",
                vec![ValueKind::Int32],
                vec![Arg::Int(3)],
            ),
            CallStep::invoke("Account", var, "getBalance", vec![], vec![])
                .binding(ValueKind::Int32, bind),
        ]
    }

    #[test]
    fn cascade_removes_dependents() {
        let steps = noise("a", "b");
        let kept = delete_with_dependents(&steps, &[0]);
        assert!(kept.is_empty());
        let kept = delete_with_dependents(&steps, &[1]);
        assert_eq!(kept.len(), 2);
    }

    #[test]
    fn minimal_input_is_unchanged() {
        let reg = bank::registry();
        let t = bank::credit_overflow_listing();
        let r = shrink(&t, &invariant(), &reg, ShrinkOptions::default()).unwrap();
        assert_eq!(r.steps, t.steps);
        assert!(r.iterations <= 3, "{}", r.iterations);
        assert!(!r.budget_exhausted);
    }

    #[test]
    fn padding_is_removed() {
        let reg = bank::registry();
        let mut steps = noise("x1", "x2");
        steps.extend(bank::set_min_cancel_listing().steps);
        steps.extend(noise("y1", "y2"));
        let t = TestCase {
            id: "t".into(),
            setup_steps: 0,
            steps,
        };
        let r = shrink(&t, &invariant(), &reg, ShrinkOptions::default()).unwrap();
        assert_eq!(r.steps, bank::set_min_cancel_listing().steps);
        assert_eq!(r.original_len, 10);
        assert_eq!(r.minimal_len, 4);
    }

    #[test]
    fn budget_one_returns_original() {
        let reg = bank::registry();
        let mut steps = noise("x1", "x2");
        steps.extend(bank::set_min_cancel_listing().steps);
        let t = TestCase {
            id: "t".into(),
            setup_steps: 0,
            steps,
        };
        let r = shrink(
            &t,
            &invariant(),
            &reg,
            ShrinkOptions {
                budget: 1,
                shrink_values: false,
            },
        )
        .unwrap();
        assert!(r.budget_exhausted);
        assert_eq!(r.steps, t.steps);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn refuses_non_reproducing() {
        let reg = bank::registry();
        let t = TestCase {
            id: "t".into(),
            setup_steps: 0,
            steps: noise("a", "b"),
        };
        assert!(matches!(
            shrink(&t, &invariant(), &reg, ShrinkOptions::default()),
            Err(ShrinkError::NotReproducing(_))
        ));
        assert_eq!(
            shrink(
                &t,
                &invariant(),
                &reg,
                ShrinkOptions {
                    budget: 0,
                    shrink_values: false
                }
            ),
            Err(ShrinkError::ZeroBudget)
        );
    }

    #[test]
    fn value_phase_moves_toward_zero() {
        let reg = bank::registry();
        let t = bank::set_min_cancel_listing();
        let r = shrink(
            &t,
            &invariant(),
            &reg,
            ShrinkOptions {
                budget: 1000,
                shrink_values: true,
            },
        )
        .unwrap();
        assert_eq!(r.minimal_len, 4);
        let ints: Vec<i64> = r
            .steps
            .iter()
            .flat_map(|s| &s.args)
            .filter_map(|a| match a {
                Arg::Int(v) => Some(i64::from(*v).abs()),
                _ => None,
            })
            .collect();
        let before: i64 = [50, 100, 100, 0].iter().sum();
        assert!(ints.iter().sum::<i64>() <= before);
        assert_eq!(
            replay_test_case(&reg, &r.to_test_case())
                .failure()
                .unwrap()
                .contract,
            "Account@invariant"
        );
    }

    #[test]
    fn renumbering_follows_binding_order() {
        let mut steps = noise("ob7", "ob9");
        steps.push(CallStep::invoke("Account", "ob7", "cancel", vec![], vec![]));
        let t = renumber(&TestCase {
            id: "t".into(),
            setup_steps: 0,
            steps,
        });
        assert_eq!(t.steps[0].bind.as_deref(), Some("ob1"));
        assert_eq!(t.steps[1].receiver.as_deref(), Some("ob1"));
        assert_eq!(t.steps[2].bind.as_deref(), Some("ob2"));
        assert_eq!(t.steps[3].kind, StepKind::Invoke);
        assert_eq!(t.steps[3].receiver.as_deref(), Some("ob1"));
    }
}
