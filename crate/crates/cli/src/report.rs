//! Check records, the run report and the coverage registry.

use std::collections::BTreeSet;

use dunkl_core::stats::{KsResult, MeanEstimate};
use serde::{Deserialize, Serialize};

use crate::config::Suite;

/// Pass/fail thresholds shared by every suite.
pub mod thresholds {
    /// Monte Carlo means must lie within this many standard errors.
    pub const MC_N_SE: f64 = 4.0;
    /// Distributional tests pass above this p-value.
    pub const KS_P: f64 = 0.01;
    /// Identities checked in floating point.
    pub const FLOAT_TOL: f64 = 1e-10;
    /// Mass and first moment of the rank-one heat kernel.
    pub const DENSITY_MOMENT_TOL: f64 = 1e-4;
    /// Relative gap in the Chapman–Kolmogorov identity.
    pub const CHAPMAN_TOL: f64 = 1e-3;
    /// Relative gap between the closed-form and quadrature c_k.
    pub const CK_TOL: f64 = 1e-8;
    /// Relative gap between the series and closed-form rank-one densities.
    pub const KERNEL_REL_TOL: f64 = 1e-8;
    /// Reconstruction residual ratio under dt halving.
    pub const HALVING_RATIO: f64 = std::f64::consts::SQRT_2;
    /// Relative change under dt halving below which an estimate is stable.
    pub const STABLE_REL_CHANGE: f64 = dunkl_core::pathsim::STABLE_REL_CHANGE;
}

/// How `value` is compared against `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    /// Exact identity; `value` is the size of the defect.
    Identity,
    /// |value − target| ≤ threshold.
    AbsTol,
    /// |value − target| ≤ threshold·|target|.
    RelTol,
    /// |value − target| ≤ threshold standard errors.
    WithinSe,
    /// value > threshold (p-values).
    Above,
    /// value ≥ threshold.
    AtLeast,
    /// value ≤ threshold.
    AtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub name: String,
    pub suite: Suite,
    /// Family of the property being checked.
    pub group: String,
    pub rule: Rule,
    pub value: f64,
    pub target: Option<f64>,
    pub std_error: Option<f64>,
    pub samples: Option<usize>,
    /// True for identities verified in exact arithmetic.
    pub exact: bool,
    pub threshold: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub version: String,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub fingerprint: Fingerprint,
    pub suite: Suite,
    pub checks: Vec<CheckRecord>,
    /// Operations exercised by the run, by module.
    pub coverage: Vec<String>,
    pub passed: bool,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &CheckRecord> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per check.
    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
        let mut s = String::from("name,suite,group,rule,value,target,std_error,samples,exact,threshold,passed\n");
        for c in &self.checks {
            s.push_str(&format!(
                "{},{},{},{},{:e},{},{},{},{},{:e},{}\n",
                c.name,
                c.suite,
                c.group,
                serde_json::to_value(c.rule).unwrap().as_str().unwrap(),
                c.value,
                opt(c.target),
                opt(c.std_error),
                c.samples.map(|n| n.to_string()).unwrap_or_default(),
                c.exact,
                c.threshold,
                c.passed
            ));
        }
        s
    }
}

/// Every operation of the primary modules, named `module::operation`.
pub const OPERATIONS: &[&str] = &[
    "rootsys::build",
    "rootsys::reflect",
    "rootsys::pairing",
    "rootsys::chamber_project",
    "polyalg::dunkl_t",
    "polyalg::dunkl_l",
    "polyalg::divided_difference",
    "polyalg::eval",
    "intertwine::build_intertwine",
    "intertwine::dunkl_kernel",
    "intertwine::hermite_q",
    "intertwine::classical_hermite",
    "density::weight",
    "density::compute_ck",
    "density::transition_density",
    "density::radial_density",
    "density::radial_generator_check",
    "density::w_radial_density",
    "pathsim::simulate",
    "pathsim::simulate_skew_rank1",
    "pathsim::extract_martingales",
    "pathsim::estimate_jump_functionals",
    "pathsim::ito_residual_check",
    "chaos::iterated_integral",
    "chaos::chaos_expand",
    "chaos::isometry_check",
    "chaos::hermite_martingale_check",
    "cli::run_suite",
    "cli::dump_fixtures",
    "cli::simulate_cmd",
];

/// Collects check records and touched operations.
#[derive(Debug, Default)]
pub struct Recorder {
    pub checks: Vec<CheckRecord>,
    touched: BTreeSet<&'static str>,
    suite: Option<Suite>,
    group: String,
}

impl Recorder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Sets the suite and group attached to subsequent records.
    pub fn scope(&mut self, suite: Suite, group: &str) {
        self.suite = Some(suite);
        self.group = group.to_string();
    }

    pub fn touch(&mut self, ops: &[&'static str]) {
        for op in ops {
            debug_assert!(OPERATIONS.contains(op), "unregistered operation {op}");
            self.touched.insert(op);
        }
    }

    pub fn touched(&self) -> Vec<String> {
        self.touched.iter().map(|s| s.to_string()).collect()
    }

    pub fn untouched(&self) -> Vec<&'static str> {
        OPERATIONS.iter().copied().filter(|op| !self.touched.contains(op)).collect()
    }

    fn push(&mut self, mut rec: CheckRecord) -> bool {
        assert!(
            self.checks.iter().all(|c| c.name != rec.name),
            "check `{}` recorded twice",
            rec.name
        );
        if !rec.value.is_finite() {
            rec.passed = false;
        }
        let passed = rec.passed;
        self.checks.push(rec);
        passed
    }

    fn base(&self, name: String, rule: Rule, value: f64, threshold: f64, passed: bool) -> CheckRecord {
        CheckRecord {
            name,
            suite: self.suite.expect("scope set before recording"),
            group: self.group.clone(),
            rule,
            value,
            target: None,
            std_error: None,
            samples: None,
            exact: false,
            threshold,
            passed,
        }
    }

    /// An identity whose defect is `defect`: zero in exact mode, at most
    /// [`thresholds::FLOAT_TOL`] in float mode.
    pub fn identity(&mut self, name: String, exact: bool, holds: bool, defect: f64) -> bool {
        let threshold = if exact { 0.0 } else { thresholds::FLOAT_TOL };
        let passed = if exact { holds } else { defect <= threshold };
        let mut r = self.base(name, Rule::Identity, defect, threshold, passed);
        r.exact = exact;
        self.push(r)
    }

    pub fn abs_tol(&mut self, name: String, value: f64, target: f64, tol: f64) -> bool {
        let mut r = self.base(name, Rule::AbsTol, value, tol, (value - target).abs() <= tol);
        r.target = Some(target);
        self.push(r)
    }

    pub fn rel_tol(&mut self, name: String, value: f64, target: f64, tol: f64) -> bool {
        let mut r = self.base(name, Rule::RelTol, value, tol, (value - target).abs() <= tol * target.abs());
        r.target = Some(target);
        self.push(r)
    }

    pub fn mean(&mut self, name: String, est: MeanEstimate, target: f64) -> bool {
        let n_se = thresholds::MC_N_SE;
        let mut r = self.base(name, Rule::WithinSe, est.mean, n_se, est.within(target, n_se));
        r.target = Some(target);
        r.std_error = Some(est.se);
        r.samples = Some(est.n);
        self.push(r)
    }

    pub fn ks(&mut self, name: String, ks: KsResult) -> bool {
        let mut r = self.base(name, Rule::Above, ks.p_value, thresholds::KS_P, ks.p_value > thresholds::KS_P);
        r.samples = Some(ks.n);
        self.push(r)
    }

    pub fn at_least(&mut self, name: String, value: f64, threshold: f64) -> bool {
        let r = self.base(name, Rule::AtLeast, value, threshold, value >= threshold);
        self.push(r)
    }

    pub fn at_most(&mut self, name: String, value: f64, threshold: f64) -> bool {
        let r = self.base(name, Rule::AtMost, value, threshold, value <= threshold);
        self.push(r)
    }

    /// Fails with `value` when an operation errors out.
    pub fn error(&mut self, name: String, err: &dyn std::fmt::Display) -> bool {
        eprintln!("check {name} errored: {err}");
        let r = self.base(name, Rule::Identity, f64::NAN, 0.0, false);
        self.push(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_and_rules() {
        let mut r = Recorder::new();
        r.scope(Suite::Symbolic, "g");
        assert!(r.identity("a".into(), true, true, 0.0));
        assert!(!r.identity("b".into(), false, true, 1e-3));
        assert!(r.abs_tol("c".into(), 1.00001, 1.0, 1e-4));
        assert!(!r.rel_tol("d".into(), 1.1, 1.0, 1e-2));
        let est = MeanEstimate { mean: 0.1, se: 0.05, n: 100 };
        assert!(r.mean("e".into(), est, 0.0));
        assert!(!r.mean("f".into(), est, 1.0));
        assert!(!r.at_least("g".into(), f64::NAN, 0.0));
        assert_eq!(r.checks.len(), 7);
        assert_eq!(r.checks[4].std_error, Some(0.05));
    }

    #[test]
    #[should_panic(expected = "recorded twice")]
    fn duplicate_names_are_rejected() {
        let mut r = Recorder::new();
        r.scope(Suite::Density, "g");
        r.at_most("x".into(), 0.0, 1.0);
        r.at_most("x".into(), 0.0, 1.0);
    }

    #[test]
    fn coverage_tracks_operations() {
        let mut r = Recorder::new();
        r.touch(&["rootsys::build", "cli::run_suite"]);
        assert_eq!(r.untouched().len(), OPERATIONS.len() - 2);
    }
}
