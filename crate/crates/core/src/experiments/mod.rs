//! Named, seeded verification checks and the suite runner.

mod checks;

pub use checks::{
    check_affine, check_averaged_extended_range, check_bbr_constant, check_counterexample_nondivergent,
    check_main_theorem, check_subspace_identities, AffineParams, AveragedParams, BbrConstantParams,
    CounterexampleParams, MainTheoremParams, StartPoint, SubspaceParams,
};

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outcome class of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The hypotheses are not met (or the run is predicted too short), so
    /// there is nothing to verify.
    Indeterminate,
    /// A precondition or parameter was invalid, or a computation aborted.
    Error,
}

impl Verdict {
    /// Whether the suite may still exit successfully.
    pub fn is_acceptable(self) -> bool {
        matches!(self, Verdict::Pass | Verdict::Indeterminate)
    }
}

/// A bound on a measured value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Expectation {
    AtMost(f64),
    AtLeast(f64),
}

impl Expectation {
    pub fn holds(self, measured: f64) -> bool {
        match self {
            Expectation::AtMost(b) => measured <= b,
            Expectation::AtLeast(b) => measured >= b,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check_name: String,
    pub verdict: Verdict,
    /// True iff every expectation holds for its measured value.
    pub pass: bool,
    pub measured: BTreeMap<String, f64>,
    pub expected: BTreeMap<String, Expectation>,
    pub trace_ref: Option<String>,
    pub seed: u64,
    pub note: Option<String>,
}

impl CheckReport {
    /// Recomputes `pass` from `measured` and `expected`. A missing measured
    /// value fails its expectation.
    pub fn expectations_hold(&self) -> bool {
        self.expected.iter().all(|(k, e)| self.measured.get(k).is_some_and(|&m| e.holds(m)))
    }
}

/// Accumulates measurements for one check.
#[derive(Debug)]
pub(crate) struct ReportBuilder {
    name: String,
    seed: u64,
    measured: BTreeMap<String, f64>,
    expected: BTreeMap<String, Expectation>,
    notes: Vec<String>,
}

impl ReportBuilder {
    pub(crate) fn new(name: &str, seed: u64) -> Self {
        Self { name: name.into(), seed, measured: BTreeMap::new(), expected: BTreeMap::new(), notes: Vec::new() }
    }

    pub(crate) fn measure(&mut self, key: &str, value: f64) {
        self.measured.insert(key.into(), value);
    }

    pub(crate) fn expect(&mut self, key: &str, e: Expectation) {
        self.expected.insert(key.into(), e);
    }

    pub(crate) fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn build(mut self, verdict: Option<Verdict>) -> CheckReport {
        let note = (!self.notes.is_empty()).then(|| self.notes.join("; "));
        if verdict.is_some() {
            self.expected.clear();
        }
        let mut report = CheckReport {
            check_name: self.name,
            verdict: Verdict::Fail,
            pass: false,
            measured: self.measured,
            expected: self.expected,
            trace_ref: None,
            seed: self.seed,
            note,
        };
        report.pass = verdict.is_none() && report.expectations_hold();
        report.verdict = verdict.unwrap_or(if report.pass { Verdict::Pass } else { Verdict::Fail });
        report
    }

    pub(crate) fn finish(self) -> CheckReport {
        self.build(None)
    }

    pub(crate) fn indeterminate(mut self, reason: impl Into<String>) -> CheckReport {
        self.note(reason);
        self.build(Some(Verdict::Indeterminate))
    }

    pub(crate) fn error(mut self, err: &Error) -> CheckReport {
        self.note(err.to_string());
        self.build(Some(Verdict::Error))
    }
}

/// Seed used when neither the entry nor the caller supplies one.
pub const DEFAULT_SUITE_SEED: u64 = crate::rng::DEFAULT_SEED;

/// One suite entry: `{"check": name, "params": {...}, "seed": u64?, "enabled": bool?}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteEntry {
    pub check: String,
    #[serde(default = "empty_object")]
    pub params: serde_json::Value,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "yes")]
    pub enabled: bool,
}

fn empty_object() -> serde_json::Value {
    serde_json::Value::Object(Default::default())
}

fn yes() -> bool {
    true
}

impl SuiteEntry {
    pub fn new(check: &str, params: serde_json::Value) -> Self {
        Self { check: check.into(), params, seed: None, enabled: true }
    }
}

/// Parses a suite config: a JSON array of [`SuiteEntry`].
pub fn parse_suite(text: &str) -> Result<Vec<SuiteEntry>> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("suite config: {e}")))
}

/// Names accepted in [`SuiteEntry::check`].
pub const CHECK_NAMES: [&str; 6] = [
    "main_theorem",
    "bbr_constant",
    "counterexample_nondivergent",
    "affine",
    "averaged_extended_range",
    "subspace_identities",
];

/// Runs a single named check with JSON parameters. Bad parameters produce an
/// `error` report.
pub fn run_check(name: &str, params: &serde_json::Value, seed: u64) -> CheckReport {
    fn parse<P: serde::de::DeserializeOwned>(name: &str, params: &serde_json::Value) -> Result<P> {
        serde_json::from_value(params.clone()).map_err(|e| Error::Parse(format!("{name}.params: {e}")))
    }
    let result = match name {
        "main_theorem" => parse(name, params).map(|p| check_main_theorem(seed, &p)),
        "bbr_constant" => parse(name, params).map(|p| check_bbr_constant(seed, &p)),
        "counterexample_nondivergent" => parse(name, params).map(|p| check_counterexample_nondivergent(seed, &p)),
        "affine" => parse(name, params).map(|p| check_affine(seed, &p)),
        "averaged_extended_range" => parse(name, params).map(|p| check_averaged_extended_range(seed, &p)),
        "subspace_identities" => parse(name, params).map(|p| check_subspace_identities(seed, &p)),
        other => Err(Error::invalid(format!("unknown check '{other}'; expected one of {CHECK_NAMES:?}"))),
    };
    result.unwrap_or_else(|e| ReportBuilder::new(name, seed).error(&e))
}

/// Runs every enabled entry, in parallel, returning reports in config order.
///
/// An entry without a seed gets `suite_seed ^ index`, where `index` is its
/// position in the config.
pub fn run_suite(entries: &[SuiteEntry], suite_seed: u64) -> Vec<CheckReport> {
    let jobs: Vec<(usize, &SuiteEntry)> = entries.iter().enumerate().filter(|(_, e)| e.enabled).collect();
    jobs.par_iter()
        .map(|&(i, e)| run_check(&e.check, &e.params, e.seed.unwrap_or(suite_seed ^ i as u64)))
        .collect()
}

/// True iff every report passed or was indeterminate.
pub fn suite_passes(reports: &[CheckReport]) -> bool {
    reports.iter().all(|r| r.verdict.is_acceptable())
}

/// The built-in suite: every check with settings that exercise its main
/// claim at desk scale.
pub fn default_suite() -> Vec<SuiteEntry> {
    use serde_json::json;
    vec![
        SuiteEntry::new("main_theorem", json!({})),
        SuiteEntry::new(
            "main_theorem",
            json!({"d": 8, "fix_dim": 3, "schedule": {"kind": "harmonic"}, "tol": 1e-2, "max_iters": 100000}),
        ),
        SuiteEntry::new(
            "main_theorem",
            json!({"d": 5, "fix_dim": 1, "schedule": {"kind": "complement_harmonic"}, "tol": 1e-2, "max_iters": 100000}),
        ),
        SuiteEntry::new(
            "main_theorem",
            json!({"d": 7, "fix_dim": 2, "gap": 0.5, "block": "skewed", "tol": 1e-8, "max_iters": 5000}),
        ),
        SuiteEntry::new("main_theorem", json!({"start": "in_fixed"})),
        SuiteEntry::new("bbr_constant", json!({})),
        SuiteEntry::new("bbr_constant", json!({"d": 4, "fix_dim": 0, "block": "negative_identity", "lambda": 0.3})),
        SuiteEntry::new("counterexample_nondivergent", json!({})),
        SuiteEntry::new("counterexample_nondivergent", json!({"schedule": {"kind": "constant", "params": {"value": 0.0}}})),
        SuiteEntry::new("affine", json!({})),
        SuiteEntry::new("affine", json!({"d": 5, "fix_dim": 3, "schedule": {"kind": "harmonic"}, "n": 100000, "tol": 1e-2})),
        SuiteEntry::new("averaged_extended_range", json!({})),
        SuiteEntry::new("averaged_extended_range", json!({"mu_schedule": {"kind": "constant", "params": {"value": 0.5}}})),
        SuiteEntry::new(
            "averaged_extended_range",
            json!({"mu_schedule": {"kind": "harmonic"}, "n": 20000, "tol": 1e-3}),
        ),
        SuiteEntry::new("subspace_identities", json!({})),
        SuiteEntry::new("subspace_identities", json!({"d": 9, "fix_dim": 4, "gap": 0.2, "block": "skewed"})),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_config_gives_empty_report() {
        assert!(run_suite(&parse_suite("[]").unwrap(), 1).is_empty());
    }

    #[test]
    fn unknown_check_and_bad_params_are_errors_not_panics() {
        let reports = run_suite(
            &[
                SuiteEntry::new("nope", json!({})),
                SuiteEntry::new("main_theorem", json!({"bogus": 1})),
                SuiteEntry { enabled: false, ..SuiteEntry::new("main_theorem", json!({})) },
            ],
            0,
        );
        assert_eq!(reports.len(), 2);
        assert!(reports.iter().all(|r| r.verdict == Verdict::Error && !r.pass));
        assert!(!suite_passes(&reports));
    }

    #[test]
    fn seeds_derive_from_suite_seed_and_index() {
        let entries = vec![
            SuiteEntry::new("subspace_identities", json!({})),
            SuiteEntry { seed: Some(99), ..SuiteEntry::new("subspace_identities", json!({})) },
            SuiteEntry::new("subspace_identities", json!({})),
        ];
        let seeds: Vec<u64> = run_suite(&entries, 0x100).iter().map(|r| r.seed).collect();
        assert_eq!(seeds, vec![0x100, 99, 0x102]);
    }

    #[test]
    fn edge_pattern_main_theorem_is_indeterminate() {
        let r = run_check("main_theorem", &json!({"schedule": {"kind": "edge_pattern", "params": {"period": 3}}}), 5);
        assert_eq!(r.verdict, Verdict::Indeterminate, "{r:?}");
        assert!(r.verdict.is_acceptable());
    }

    #[test]
    fn zero_tolerance_fails_the_suite() {
        let r = run_check("main_theorem", &json!({"tol": 0.0}), 5);
        assert_eq!(r.verdict, Verdict::Error);
        assert!(!suite_passes(&[r]));
    }

    #[test]
    fn default_suite_passes() {
        let reports = run_suite(&default_suite(), DEFAULT_SUITE_SEED);
        for r in &reports {
            assert!(r.verdict == Verdict::Pass, "{}", serde_json::to_string(r).unwrap());
            assert_eq!(r.pass, r.expectations_hold());
        }
    }

    #[test]
    fn report_json_shape() {
        let r = run_check("subspace_identities", &json!({}), 1);
        let v = serde_json::to_value(&r).unwrap();
        assert_eq!(v["check_name"], "subspace_identities");
        assert_eq!(v["verdict"], "pass");
        assert!(v["expected"]["perp_max_angle"]["at_most"].is_number());
    }
}
