//! Verification suites and the orchestrator behind `dunkl run`.

mod chaos;
mod density;
mod hermite;
mod paths;
mod symbolic;

use std::path::{Path as FsPath, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use dunkl_core::field::Coeff;
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::pathsim::{
    extract_martingales, path_functionals, simulate_many, ItoGauge, PathFunctionals, Scheme, SimParams,
};
use dunkl_core::poly::Polynomial;
use dunkl_core::rng::sub_seed;
use dunkl_core::{QSqrt2, RootSystem};

use crate::config::{ExperimentConfig, Suite, SystemConfig};
use crate::report::{Fingerprint, Recorder, RunReport};

/// A configured system with its built root system.
pub struct Setup {
    pub cfg: SystemConfig,
    pub rs: RootSystem,
}

impl Setup {
    pub fn name(&self) -> &str {
        &self.cfg.name
    }

    pub fn x0(&self) -> &[f64] {
        &self.cfg.x0
    }
}

/// Per-path quantities shared by the path and Hermite suites.
#[derive(Clone, Debug)]
pub(crate) struct PathSummary {
    pub mid: Vec<f64>,
    pub end: Vec<f64>,
    pub functionals: PathFunctionals,
    pub residual: f64,
    pub ito: f64,
    /// Largest |[M^α, M^β]_T| over α ≠ β.
    pub cross: f64,
}

pub(crate) struct BaseBatch {
    pub paths: Vec<PathSummary>,
    pub mid_time: f64,
    pub rejection_rate: f64,
}

pub struct Runner<'a> {
    pub cfg: &'a ExperimentConfig,
    pub systems: Vec<Setup>,
    pub rec: Recorder,
    /// Data files as (path relative to the output directory, contents).
    pub artifacts: Vec<(PathBuf, String)>,
    /// Wall-clock seconds per suite, kept out of the report.
    pub stage_times: Vec<(String, f64)>,
    base: Vec<Option<Arc<BaseBatch>>>,
}

impl<'a> Runner<'a> {
    pub fn new(cfg: &'a ExperimentConfig) -> Result<Self> {
        let systems = cfg
            .systems
            .iter()
            .map(|s| Ok(Setup { cfg: s.clone(), rs: s.build()? }))
            .collect::<Result<Vec<_>>>()?;
        let n = systems.len();
        let mut rec = Recorder::new();
        rec.touch(&["rootsys::build"]);
        Ok(Self { cfg, systems, rec, artifacts: Vec::new(), stage_times: Vec::new(), base: vec![None; n] })
    }

    pub fn euler(&self) -> SimParams {
        SimParams::new(self.cfg.t_end, self.cfg.dt)
    }

    pub fn seed(&self, label: &str) -> u64 {
        sub_seed(self.cfg.seed, label)
    }

    /// Euler paths of system `i` at the configured step, simulated once.
    pub(crate) fn base_batch(&mut self, i: usize) -> Result<Arc<BaseBatch>> {
        if let Some(b) = &self.base[i] {
            return Ok(b.clone());
        }
        let setup = &self.systems[i];
        let rs = &setup.rs;
        let params = self.euler();
        let steps = params.coarse_steps()?;
        let mid_step = steps / 2;
        let gauge = ito_gauge(rs)?;
        let seed = self.seed(&format!("paths/{}", setup.name()));
        let batch = simulate_many(rs, setup.x0(), &Scheme::Euler(params), seed, self.cfg.n_paths, |p| {
            let dec = extract_martingales(rs, p);
            let mut cross = 0.0f64;
            for a in 0..rs.num_roots() {
                for b in 0..a {
                    cross = cross.max(dec.bracket(a, b).abs());
                }
            }
            PathSummary {
                mid: p.state(mid_step).to_vec(),
                end: p.final_state().to_vec(),
                functionals: path_functionals(rs, p),
                residual: dec.reconstruction_residual().unwrap_or(f64::NAN),
                ito: gauge.residual(p, &dec).abs(),
                cross,
            }
        })?;
        self.rec.touch(&["pathsim::simulate", "pathsim::extract_martingales", "pathsim::ito_residual_check"]);
        let out = Arc::new(BaseBatch {
            mid_time: mid_step as f64 * self.cfg.dt,
            rejection_rate: batch.rejection_rate(),
            paths: batch.values,
        });
        self.base[i] = Some(out.clone());
        Ok(out)
    }

    fn fingerprint(&self) -> Fingerprint {
        Fingerprint {
            seed: self.cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_digest: self.cfg.digest(),
        }
    }
}

/// Itô gauge for Q_(2,0,…,0).
pub(crate) fn ito_gauge(rs: &RootSystem) -> Result<ItoGauge> {
    let mut nu = vec![0u16; rs.dim()];
    nu[0] = 2;
    let g = if rs.is_exact() {
        let t = IntertwineTable::<QSqrt2>::build(rs, 2)?;
        ItoGauge::new(rs, &t.hermite(&nu)?)?
    } else {
        let t = IntertwineTable::<f64>::build(rs, 2)?;
        ItoGauge::new(rs, &t.hermite(&nu)?)?
    };
    Ok(g)
}

/// Defect of a claimed identity a = b: (holds, size relative to the inputs).
pub(crate) fn defect<C: Coeff>(a: &Polynomial<C>, b: &Polynomial<C>) -> (bool, f64) {
    let diff = a - b;
    let scale = a.max_magnitude().max(b.max_magnitude()).max(1.0);
    let size = diff.max_magnitude() / scale;
    if C::EXACT {
        (diff.is_zero(), size)
    } else {
        (size <= crate::report::thresholds::FLOAT_TOL, size)
    }
}

/// Accumulates identity checks over many cases into one record.
#[derive(Default)]
pub(crate) struct Tally {
    pub holds: bool,
    pub worst: f64,
    pub cases: usize,
}

impl Tally {
    pub fn new() -> Self {
        Self { holds: true, worst: 0.0, cases: 0 }
    }

    pub fn add(&mut self, (holds, size): (bool, f64)) {
        self.holds &= holds;
        self.worst = self.worst.max(size);
        self.cases += 1;
    }

    pub fn add_float(&mut self, a: f64, b: f64) {
        let size = (a - b).abs() / a.abs().max(b.abs()).max(1.0);
        self.add((size <= crate::report::thresholds::FLOAT_TOL, size));
    }

    pub fn record(&self, rec: &mut Recorder, name: String, exact: bool) -> bool {
        rec.identity(name, exact, self.holds && self.cases > 0, self.worst)
    }
}

/// Runs `suite` and returns the report without writing anything.
pub fn execute(cfg: &ExperimentConfig, suite: Suite) -> Result<(RunReport, Runner<'_>)> {
    let mut r = Runner::new(cfg)?;
    r.rec.touch(&["cli::run_suite"]);
    for s in suite.expand() {
        let stage = s.name();
        match s {
            Suite::Symbolic => r.timed(stage, symbolic::run),
            Suite::Density => r.timed(stage, density::run),
            Suite::Paths => r.timed(stage, paths::run),
            Suite::Hermite => r.timed(stage, hermite::run),
            Suite::Chaos => r.timed(stage, chaos::run),
            Suite::All => unreachable!("expanded"),
        }
    }
    if suite == Suite::All {
        let fixtures = crate::fixtures::render(cfg)?;
        r.rec.touch(&["cli::dump_fixtures"]);
        for (p, text) in fixtures {
            r.artifacts.push((PathBuf::from("fixtures").join(p), text));
        }
        let dumps = crate::commands::render_paths(cfg)?;
        r.rec.touch(&["cli::simulate_cmd"]);
        for (p, text) in dumps {
            r.artifacts.push((PathBuf::from("paths").join(p), text));
        }
        r.rec.scope(Suite::All, "coverage");
        let missing = r.rec.untouched();
        if !missing.is_empty() {
            eprintln!("operations not exercised: {}", missing.join(", "));
        }
        r.rec.identity("coverage/all_operations".into(), true, missing.is_empty(), missing.len() as f64);
    }
    let report = RunReport {
        fingerprint: r.fingerprint(),
        suite,
        passed: r.rec.checks.iter().all(|c| c.passed),
        coverage: r.rec.touched(),
        checks: r.rec.checks.clone(),
    };
    Ok((report, r))
}

impl Runner<'_> {
    fn timed(&mut self, stage: &str, f: fn(&mut Runner)) {
        let start = std::time::Instant::now();
        f(self);
        self.stage_times.push((stage.to_string(), start.elapsed().as_secs_f64()));
    }
}

/// Runs `suite` and writes the report, the check table, timings and data
/// files under the output directory.
pub fn run_suite(cfg: &ExperimentConfig, suite: Suite) -> Result<RunReport> {
    let (report, runner) = execute(cfg, suite)?;
    let out = cfg.out_dir();
    write_file(&out.join(format!("report-{suite}.json")), &report.to_json())?;
    write_file(&out.join(format!("checks-{suite}.csv")), &report.to_csv())?;
    let timings: Vec<serde_json::Value> = runner
        .stage_times
        .iter()
        .map(|(s, t)| serde_json::json!({ "stage": s, "seconds": t }))
        .collect();
    write_file(&out.join(format!("timings-{suite}.json")), &serde_json::to_string_pretty(&timings)?)?;
    for (p, text) in &runner.artifacts {
        write_file(&out.join(p), text)?;
    }
    Ok(report)
}

pub(crate) fn write_file(path: &FsPath, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
