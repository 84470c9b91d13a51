//! Command-line front end: `generate`, `replay`, `shrink` and `report`.
//!
//! Exit codes: 0 when no error verdict was found, 1 when at least one was,
//! 2 for configuration or input problems. Settings come from flags and an
//! optional TOML file with the same keys; flags win.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use crate::artifact::{read_artifact, write_artifact, TestArtifact};
use crate::contract::CreationProbability;
use crate::corpus;
use crate::engine::generate;
use crate::error::ConfigError;
use crate::registry::Registry;
use crate::replay::{replay_test_case, replay_with, ReplayOptions};
use crate::report::{render_report, render_test_source, Outcome};
use crate::shrink::{shrink, ShrinkOptions, ShrinkTarget};
use crate::value::ValueKind;

pub const EXIT_OK: u8 = 0;
pub const EXIT_ERRORS: u8 = 1;
pub const EXIT_CONFIG: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "seqgen",
    version,
    about = "Generate, replay and shrink contract-checked call sequences"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate test cases, write the artifact and print the report.
    Generate(GenerateArgs),
    /// Re-execute a stored artifact against a corpus.
    Replay(ReplayArgs),
    /// Reduce one failing test case of an artifact.
    Shrink(ShrinkArgs),
    /// Print stored test cases as readable call listings.
    Report(ReportArgs),
}

/// Registry selection and operational profile, shared by every command
/// that builds a registry.
#[derive(Debug, Clone, Default, Args)]
pub struct ProfileArgs {
    /// TOML file with default values for these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Built-in corpus name.
    #[arg(long)]
    pub corpus: Option<String>,
    /// Weight override, e.g. `Account=2`, `Account.*=0`, `Account.credit(int)=0`.
    #[arg(long = "weight", value_name = "SELECTOR=W")]
    pub weights: Vec<String>,
    /// Allow at most S constructions of TYPE per test case.
    #[arg(long = "threshold", value_name = "TYPE=S")]
    pub thresholds: Vec<String>,
    /// Create a new TYPE instance with constant probability P once one exists.
    #[arg(long = "creation", value_name = "TYPE=P")]
    pub creations: Vec<String>,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub profile: ProfileArgs,
    #[arg(long, allow_negative_numbers = true)]
    pub tests: Option<i64>,
    #[arg(long, allow_negative_numbers = true)]
    pub attempts: Option<i64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Artifact path. The rendered report goes next to it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Name recorded in the artifact and report.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ReplayArgs {
    pub artifact: PathBuf,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Replay test cases in parallel.
    #[arg(long)]
    pub parallel: bool,
}

#[derive(Debug, Clone, Args)]
pub struct ShrinkArgs {
    pub artifact: PathBuf,
    /// Id of the failing test case.
    pub test: String,
    #[command(flatten)]
    pub profile: ProfileArgs,
    /// Maximum candidate executions.
    #[arg(long)]
    pub budget: Option<usize>,
    /// Also move integer arguments toward zero.
    #[arg(long)]
    pub values: bool,
    /// Where to write the single-test artifact.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    pub artifact: PathBuf,
    /// Only this test case.
    #[arg(long)]
    pub test: Option<String>,
}

/// Settings file contents. Every key is optional.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub corpus: Option<String>,
    pub name: Option<String>,
    pub tests: Option<i64>,
    pub attempts: Option<i64>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub parallel: Option<bool>,
    pub budget: Option<usize>,
    #[serde(default)]
    pub weight: Vec<String>,
    #[serde(default)]
    pub threshold: Vec<String>,
    #[serde(default)]
    pub creation: Vec<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }
}

/// Split `LHS=RHS` at the last `=`.
fn split_assignment(s: &str) -> Result<(&str, &str), String> {
    s.rsplit_once('=')
        .map(|(l, r)| (l.trim(), r.trim()))
        .filter(|(l, r)| !l.is_empty() && !r.is_empty())
        .ok_or_else(|| format!("expected NAME=VALUE, got `{s}`"))
}

/// Apply one `SELECTOR=W` override.
///
/// `T` sets the type weight, `T.*` every method, `T.m` every overload of
/// `m`, `T.m(int,boolean)` one overload. `T.T` and `T.T(..)` address
/// constructors.
pub fn apply_weight(reg: &mut Registry, assignment: &str) -> Result<(), ConfigError> {
    let invalid = || ConfigError::InvalidSelector(assignment.to_string());
    let (selector, w) = split_assignment(assignment).map_err(|_| invalid())?;
    let w: f64 = w.parse().map_err(|_| invalid())?;
    let Some((ty, op)) = selector.split_once('.') else {
        return reg.set_type_weight(selector, w);
    };
    if op == "*" {
        return reg.change_all_methods_weight(ty, w);
    }
    let (name, signature) = match op.split_once('(') {
        None => (op, None),
        Some((name, rest)) => {
            let inner = rest.strip_suffix(')').ok_or_else(invalid)?;
            let sig: Vec<ValueKind> = inner
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(ValueKind::parse)
                .collect();
            (name, Some(sig))
        }
    };
    if name == ty {
        reg.change_constructor_weight(ty, signature.as_deref(), w)
    } else {
        reg.change_method_weight(ty, name, signature.as_deref(), w)
    }
}

/// Apply one `TYPE=S` threshold override.
pub fn apply_threshold(reg: &mut Registry, assignment: &str) -> Result<(), ConfigError> {
    let invalid = || ConfigError::InvalidSelector(assignment.to_string());
    let (ty, s) = split_assignment(assignment).map_err(|_| invalid())?;
    let s: i64 = s.parse().map_err(|_| invalid())?;
    reg.change_creation_probability(ty, CreationProbability::threshold(s)?)
}

/// Apply one `TYPE=P` constant creation probability.
pub fn apply_creation(reg: &mut Registry, assignment: &str) -> Result<(), ConfigError> {
    let invalid = || ConfigError::InvalidSelector(assignment.to_string());
    let (ty, p) = split_assignment(assignment).map_err(|_| invalid())?;
    let p: f64 = p.parse().map_err(|_| invalid())?;
    reg.change_creation_probability(ty, CreationProbability::constant(p)?)
}

fn load_config(profile: &ProfileArgs) -> Result<RunConfig, String> {
    match &profile.config {
        Some(path) => RunConfig::load(path),
        None => Ok(RunConfig::default()),
    }
}

/// Build the registry: corpus, then file overrides, then flag overrides.
pub fn build_registry(profile: &ProfileArgs, config: &RunConfig) -> Result<Registry, String> {
    let name = profile
        .corpus
        .clone()
        .or_else(|| config.corpus.clone())
        .unwrap_or_else(|| "bank".to_string());
    let mut reg = corpus::by_name(&name).ok_or_else(|| {
        format!(
            "unknown corpus `{name}`; known: {}",
            corpus::NAMES.join(", ")
        )
    })?;
    let weights = config.weight.iter().chain(&profile.weights);
    for w in weights {
        apply_weight(&mut reg, w).map_err(|e| e.to_string())?;
    }
    for t in config.threshold.iter().chain(&profile.thresholds) {
        apply_threshold(&mut reg, t).map_err(|e| e.to_string())?;
    }
    for c in config.creation.iter().chain(&profile.creations) {
        apply_creation(&mut reg, c).map_err(|e| e.to_string())?;
    }
    Ok(reg)
}

fn positive(name: &str, v: i64) -> Result<u32, String> {
    if v < 1 || v > i64::from(u32::MAX) {
        return Err(format!("--{name} must be a positive integer, got {v}"));
    }
    Ok(v as u32)
}

/// Path of the rendered report written next to an artifact.
pub fn report_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_owned();
    s.push(".report.txt");
    PathBuf::from(s)
}

fn config_failure(msg: impl std::fmt::Display) -> u8 {
    eprintln!("seqgen: {msg}");
    EXIT_CONFIG
}

pub fn run_generate(args: &GenerateArgs) -> u8 {
    let config = match load_config(&args.profile) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let reg = match build_registry(&args.profile, &config) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let tests = args.tests.or(config.tests).unwrap_or(100);
    let attempts = args.attempts.or(config.attempts).unwrap_or(50);
    let (tests, attempts) = match (positive("tests", tests), positive("attempts", attempts)) {
        (Ok(t), Ok(a)) => (t, a),
        (Err(e), _) | (_, Err(e)) => return config_failure(e),
    };
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let name = args
        .name
        .clone()
        .or(config.name)
        .unwrap_or_else(|| "TestBank".to_string());
    let out = args
        .out
        .clone()
        .or(config.out)
        .unwrap_or_else(|| PathBuf::from(format!("{name}.json")));
    let (artifact, report) = match generate(&reg, &name, tests as usize, attempts, seed) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let text = render_report(&report);
    if let Err(e) = write_artifact(&artifact, &out) {
        return config_failure(e);
    }
    if let Err(e) = std::fs::write(report_path(&out), &text) {
        return config_failure(e);
    }
    print!("{text}");
    if report.errors() > 0 {
        EXIT_ERRORS
    } else {
        EXIT_OK
    }
}

fn read(path: &Path) -> Result<TestArtifact, u8> {
    read_artifact(path).map_err(|e| config_failure(format!("{}: {e}", path.display())))
}

pub fn run_replay(args: &ReplayArgs) -> u8 {
    let config = match load_config(&args.profile) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let reg = match build_registry(&args.profile, &config) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let artifact = match read(&args.artifact) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let parallel = args.parallel || config.parallel.unwrap_or(false);
    let result = replay_with(&artifact, &reg, ReplayOptions { parallel });
    if result.digest_drift() {
        println!("WARNING: this artifact was generated against a different configuration.");
        println!("  artifact registry digest: {}", result.artifact_digest);
        println!("  current registry digest:  {}", result.registry_digest);
        println!("Verdicts below may not match the original run.");
        println!();
    }
    print!("{}", render_report(&result.report));
    let inconclusive = result.report.inconclusive();
    if inconclusive > 0 {
        println!(
            "WARNING: {inconclusive} of {} test cases are inconclusive: a recorded call no longer satisfies its \
             entry precondition or no longer exists. The more inconclusive test cases, the less this artifact \
             says about the current code; consider regenerating it.",
            result.report.tests()
        );
    }
    if result.report.errors() > 0 {
        EXIT_ERRORS
    } else {
        EXIT_OK
    }
}

pub fn run_shrink(args: &ShrinkArgs) -> u8 {
    let config = match load_config(&args.profile) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    let reg = match build_registry(&args.profile, &config) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let artifact = match read(&args.artifact) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let Some(test) = artifact.test(&args.test) else {
        return config_failure(format!(
            "no test case `{}` in {}",
            args.test,
            args.artifact.display()
        ));
    };
    let verdict = replay_test_case(&reg, test);
    let target = match &verdict.outcome {
        Outcome::Error(f) => ShrinkTarget::from(f),
        Outcome::Pass => {
            return config_failure(format!(
                "test case `{}` passes; nothing to shrink",
                args.test
            ))
        }
        Outcome::Inconclusive { step, reason } => {
            return config_failure(format!(
                "test case `{}` is inconclusive at step {step}: {reason}",
                args.test
            ))
        }
    };
    let opts = ShrinkOptions {
        budget: args
            .budget
            .or(config.budget)
            .unwrap_or(ShrinkOptions::default().budget),
        shrink_values: args.values,
    };
    let result = match shrink(test, &target, &reg, opts) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let minimal = TestArtifact {
        header: artifact.header.clone(),
        tests: vec![result.to_test_case()],
    };
    let out = args.out.clone().unwrap_or_else(|| {
        let mut s = args.artifact.as_os_str().to_owned();
        s.push(format!(".{}.min.json", args.test));
        PathBuf::from(s)
    });
    if let Err(e) = write_artifact(&minimal, &out) {
        return config_failure(e);
    }
    println!(
        "{}: {} violation of {} reproduced in {} of {} steps ({} executions{})",
        result.test_id,
        result.kind.as_str(),
        result.contract,
        result.minimal_len,
        result.original_len,
        result.iterations,
        if result.budget_exhausted {
            ", budget exhausted"
        } else {
            ""
        }
    );
    print!("{}", render_test_source(&minimal.tests[0]));
    EXIT_OK
}

pub fn run_report(args: &ReportArgs) -> u8 {
    let artifact = match read(&args.artifact) {
        Ok(a) => a,
        Err(code) => return code,
    };
    let selected: Vec<_> = match &args.test {
        Some(id) => match artifact.test(id) {
            Some(t) => vec![t],
            None => return config_failure(format!("no test case `{id}`")),
        },
        None => artifact.tests.iter().collect(),
    };
    for t in selected {
        println!("// {}", t.id);
        print!("{}", render_test_source(t));
    }
    EXIT_OK
}

pub fn run(cli: &Cli) -> u8 {
    match &cli.command {
        Command::Generate(a) => run_generate(a),
        Command::Replay(a) => run_replay(a),
        Command::Shrink(a) => run_shrink(a),
        Command::Report(a) => run_report(a),
    }
}

/// Parse `args` (program name first) and run. Usage errors exit 2.
pub fn main_with<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let _ = e.print();
            if e.use_stderr() {
                EXIT_CONFIG
            } else {
                EXIT_OK
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contract::OperationKind;
    use crate::corpus::bank;

    fn weight(reg: &Registry, ty: &str, kind: OperationKind, name: &str, sig: &[ValueKind]) -> f64 {
        reg.operation(ty, kind, name, sig).unwrap().get_weight()
    }

    #[test]
    fn selectors() {
        let int = [ValueKind::Int32];
        let mut reg = bank::registry();
        apply_weight(&mut reg, "Account=2").unwrap();
        assert_eq!(reg.get("Account").unwrap().get_weight(), 2.0);
        apply_weight(&mut reg, "Account.credit(int)=0").unwrap();
        assert_eq!(
            weight(&reg, "Account", OperationKind::Method, "credit", &int),
            0.0
        );
        apply_weight(&mut reg, "Account.debit=1.5").unwrap();
        assert_eq!(
            weight(&reg, "Account", OperationKind::Method, "debit", &int),
            1.5
        );
        apply_weight(&mut reg, "Account.Account(int, int)=3").unwrap();
        assert_eq!(
            weight(
                &reg,
                "Account",
                OperationKind::Constructor,
                "Account",
                &[ValueKind::Int32, ValueKind::Int32]
            ),
            3.0
        );
        apply_weight(&mut reg, "History.*=0").unwrap();
        assert_eq!(
            weight(&reg, "History", OperationKind::Method, "getPrec", &[]),
            0.0
        );
        assert_eq!(
            weight(
                &reg,
                "History",
                OperationKind::Constructor,
                "History",
                &[ValueKind::Int32, ValueKind::reference("History")]
            ),
            1.0
        );
    }

    #[test]
    fn bad_selectors() {
        let mut reg = bank::registry();
        assert!(matches!(
            apply_weight(&mut reg, "Account.nosuch=1"),
            Err(ConfigError::UnknownOperation { .. })
        ));
        assert!(matches!(
            apply_weight(&mut reg, "Nope=1"),
            Err(ConfigError::UnknownType(_))
        ));
        assert!(matches!(
            apply_weight(&mut reg, "Account"),
            Err(ConfigError::InvalidSelector(_))
        ));
        assert!(matches!(
            apply_weight(&mut reg, "Account=x"),
            Err(ConfigError::InvalidSelector(_))
        ));
        assert!(matches!(
            apply_weight(&mut reg, "Account=-1"),
            Err(ConfigError::InvalidWeight(_))
        ));
        assert!(matches!(
            apply_threshold(&mut reg, "Account=0"),
            Err(ConfigError::InvalidThreshold(0))
        ));
        assert!(matches!(
            apply_creation(&mut reg, "Account=1.5"),
            Err(ConfigError::InvalidProbability(_))
        ));
    }

    #[test]
    fn flags_win_over_file() {
        let config: RunConfig = toml::from_str(
            "corpus = \"bank\"\ntests = 5\nweight = [\"Account.credit=0\"]\nthreshold = [\"Account=3\"]\n",
        )
        .unwrap();
        let profile = ProfileArgs {
            weights: vec!["Account.credit=2".into()],
            thresholds: vec!["Account=1".into()],
            ..Default::default()
        };
        let reg = build_registry(&profile, &config).unwrap();
        assert_eq!(
            weight(
                &reg,
                "Account",
                OperationKind::Method,
                "credit",
                &[ValueKind::Int32]
            ),
            2.0
        );
        assert_eq!(
            reg.get("Account").unwrap().creation().id(),
            CreationProbability::threshold(1).unwrap().id()
        );
    }

    #[test]
    fn unknown_config_key_rejected() {
        assert!(toml::from_str::<RunConfig>("tets = 5\n").is_err());
    }

    #[test]
    fn parses_subcommands() {
        let cli = Cli::try_parse_from([
            "seqgen",
            "generate",
            "--tests",
            "-1",
            "--weight",
            "Account=0",
        ])
        .unwrap();
        match cli.command {
            Command::Generate(g) => {
                assert_eq!(g.tests, Some(-1));
                assert_eq!(g.profile.weights, vec!["Account=0".to_string()]);
            }
            other => panic!("{other:?}"),
        }
        assert!(
            Cli::try_parse_from(["seqgen", "shrink", "a.json", "test3", "--budget", "7"]).is_ok()
        );
        assert!(Cli::try_parse_from(["seqgen", "replay", "a.json", "--parallel"]).is_ok());
        assert_eq!(
            main_with(["seqgen", "generate", "--tests", "-1"]),
            EXIT_CONFIG
        );
        assert_eq!(main_with(["seqgen", "bogus"]), EXIT_CONFIG);
    }
}
