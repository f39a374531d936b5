//! Experiment configuration: a TOML file with nested sections.
//!
//! The canonical form is the `toml` serialization of [`ExperimentConfig`]
//! with every field written out in declaration order; its SHA-256 digest
//! identifies the configuration in run reports.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, ensure, Context, Result};
use dunkl_core::field::rational_from_f64;
use num_rational::BigRational;
use dunkl_core::rootsys::{RootSystem, RootSystemKind};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable overriding `output_dir`.
pub const OUT_DIR_ENV: &str = "DUNKL_OUT_DIR";

/// Walls closer than this to x0 are treated as containing it.
const WALL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Symbolic,
    Density,
    Paths,
    Hermite,
    Chaos,
    All,
}

impl Suite {
    pub const MODULES: [Suite; 5] = [Suite::Symbolic, Suite::Density, Suite::Paths, Suite::Hermite, Suite::Chaos];

    /// The concrete suites selected by `self`.
    pub fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => Self::MODULES.to_vec(),
            s => vec![s],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Suite::Symbolic => "symbolic",
            Suite::Density => "density",
            Suite::Paths => "paths",
            Suite::Hermite => "hermite",
            Suite::Chaos => "chaos",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "symbolic" => Suite::Symbolic,
            "density" => Suite::Density,
            "paths" => Suite::Paths,
            "hermite" => Suite::Hermite,
            "chaos" => Suite::Chaos,
            "all" => Suite::All,
            _ => bail!("unknown suite `{s}`"),
        })
    }
}

/// One root system with its starting point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Unique label used in check names and file names.
    pub name: String,
    /// `rank1`, `product`, `A2`, `B2`, `D3`, `I2(5)`, ...
    pub kind: String,
    pub dim: usize,
    /// One value per orbit, written as `"1"`, `"3/5"` or `"0.6"`.
    pub multiplicities: Vec<String>,
    pub x0: Vec<f64>,
    /// Whether path-based suites simulate this system.
    #[serde(default = "yes")]
    pub monte_carlo: bool,
}

fn yes() -> bool {
    true
}

impl SystemConfig {
    pub fn kind(&self) -> Result<RootSystemKind> {
        Ok(self.kind.parse::<RootSystemKind>()?)
    }

    pub fn multiplicities(&self) -> Result<Vec<BigRational>> {
        self.multiplicities.iter().map(|s| parse_rational(s)).collect()
    }

    pub fn build(&self) -> Result<RootSystem> {
        let rs = RootSystem::build(self.kind()?, self.dim, &self.multiplicities()?)
            .with_context(|| format!("system `{}`", self.name))?;
        Ok(rs)
    }
}

/// Parses `p/q`, an integer or a decimal into a rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let t = s.trim();
    if let Ok(r) = t.parse::<BigRational>() {
        return Ok(r);
    }
    let v: f64 = t.parse().with_context(|| format!("`{s}` is not a number"))?;
    Ok(rational_from_f64(v)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolicConfig {
    /// Operator identities are checked on every monomial up to this degree.
    pub operator_degree: usize,
    /// Intertwining and harmonicity degree for d ≥ 2; rank one uses `n_max`.
    pub intertwine_degree: usize,
}

impl Default for SymbolicConfig {
    fn default() -> Self {
        Self { operator_degree: 5, intertwine_degree: 5 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DensityConfig {
    /// Rank-one multiplicities for the quadrature checks.
    pub k: Vec<String>,
    pub x: f64,
    pub t: f64,
    /// Kernel series truncation limit.
    pub series_degree: usize,
}

impl Default for DensityConfig {
    fn default() -> Self {
        Self { k: vec!["3/5".into(), "1".into(), "2".into()], x: 1.0, t: 1.0, series_degree: 128 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Rank-one multiplicities for the grid-refinement study of the jump functionals.
    pub refine_k: Vec<String>,
    /// Paths written by `simulate`.
    pub dump_paths: usize,
}

impl Default for PathsConfig {
    fn default() -> Self {
        Self { refine_k: vec!["1".into(), "1/4".into()], dump_paths: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HermiteConfig {
    /// All 1 ≤ |ν| ≤ max_degree are checked.
    pub max_degree: usize,
}

impl Default for HermiteConfig {
    fn default() -> Self {
        Self { max_degree: 3 }
    }
}

/// A functional Π_j m_{ν_j}(X_{t_j}) for the chaos suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosSpecConfig {
    /// Observation times as rationals.
    pub times: Vec<String>,
    pub nus: Vec<Vec<u16>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChaosConfig {
    /// Name of the system to expand on.
    pub system: String,
    /// Fine step; the coarse level uses twice this.
    pub dt: f64,
    pub specs: Vec<ChaosSpecConfig>,
}

impl Default for ChaosConfig {
    fn default() -> Self {
        let spec = |times: &[&str], nus: Vec<Vec<u16>>| ChaosSpecConfig { times: times.iter().map(|s| s.to_string()).collect(), nus };
        Self {
            system: String::new(),
            dt: 5e-4,
            specs: vec![
                spec(&["1"], vec![vec![1]]),
                spec(&["1"], vec![vec![2]]),
                spec(&["1/2", "1"], vec![vec![1], vec![1]]),
            ],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FixturesConfig {
    pub max_degree: usize,
}

impl Default for FixturesConfig {
    fn default() -> Self {
        Self { max_degree: 4 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub t_end: f64,
    pub dt: f64,
    pub n_paths: usize,
    /// Degree of the intertwining tables.
    pub n_max: usize,
    pub output_dir: PathBuf,
    /// Suites run when none is given on the command line.
    #[serde(default = "default_suites")]
    pub suites: Vec<Suite>,
    pub systems: Vec<SystemConfig>,
    #[serde(default)]
    pub symbolic: SymbolicConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub paths: PathsConfig,
    #[serde(default)]
    pub hermite: HermiteConfig,
    #[serde(default)]
    pub chaos: ChaosConfig,
    #[serde(default)]
    pub fixtures: FixturesConfig,
}

fn default_suites() -> Vec<Suite> {
    vec![Suite::All]
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("parsing config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Hex SHA-256 of the canonical form.
    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(self.canonical().as_bytes()))
    }

    /// `output_dir`, unless the environment overrides it.
    pub fn out_dir(&self) -> PathBuf {
        match std::env::var_os(OUT_DIR_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_dir.clone(),
        }
    }

    pub fn system(&self, name: &str) -> Result<&SystemConfig> {
        self.systems
            .iter()
            .find(|s| s.name == name)
            .with_context(|| format!("no system named `{name}`"))
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, what: &str| -> Result<()> {
            ensure!(v.is_finite() && v > 0.0, "{what} must be positive, got {v}");
            Ok(())
        };
        positive(self.t_end, "t_end")?;
        positive(self.dt, "dt")?;
        let steps = self.t_end / self.dt;
        ensure!((steps - steps.round()).abs() < 1e-9 * steps.max(1.0), "t_end must be a multiple of dt");
        ensure!(self.n_paths >= 2, "n_paths must be at least 2");
        ensure!(self.n_max >= 1, "n_max must be at least 1");
        ensure!(!self.suites.is_empty(), "suites must not be empty");
        ensure!(!self.systems.is_empty(), "at least one system is required");
        for (i, s) in self.systems.iter().enumerate() {
            ensure!(!s.name.is_empty(), "system {i} has an empty name");
            ensure!(
                s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-'),
                "system name `{}` may only use letters, digits, `_` and `-`",
                s.name
            );
            ensure!(self.systems[..i].iter().all(|o| o.name != s.name), "duplicate system name `{}`", s.name);
            let rs = s.build()?;
            ensure!(s.x0.len() == rs.dim(), "system `{}`: x0 has {} coordinates, expected {}", s.name, s.x0.len(), rs.dim());
            ensure!(s.x0.iter().all(|v| v.is_finite()), "system `{}`: x0 must be finite", s.name);
            for a in rs.active_roots() {
                ensure!(
                    rs.pairing(a, &s.x0).abs() > WALL_TOL,
                    "system `{}`: x0 lies on the wall of root {a}",
                    s.name
                );
            }
        }
        ensure!(self.symbolic.operator_degree >= 1, "symbolic.operator_degree must be at least 1");
        for k in &self.density.k {
            let r = parse_rational(k)?;
            ensure!(r >= BigRational::from_integer(0.into()), "density.k must be nonnegative");
        }
        positive(self.density.t, "density.t")?;
        ensure!(self.density.x.is_finite(), "density.x must be finite");
        ensure!(self.density.series_degree >= 8, "density.series_degree must be at least 8");
        for k in &self.paths.refine_k {
            let r = parse_rational(k)?;
            ensure!(r > BigRational::from_integer(0.into()), "paths.refine_k entries must be positive");
        }
        ensure!(self.hermite.max_degree <= self.n_max, "hermite.max_degree exceeds n_max");
        if self.chaos.specs.is_empty() {
            return Ok(());
        }
        if !self.chaos.system.is_empty() {
            self.system(&self.chaos.system)?;
        }
        positive(self.chaos.dt, "chaos.dt")?;
        let coarse = self.t_end / (2.0 * self.chaos.dt);
        ensure!((coarse - coarse.round()).abs() < 1e-9 * coarse.max(1.0), "t_end must be a multiple of 2*chaos.dt");
        for spec in &self.chaos.specs {
            ensure!(spec.times.len() == spec.nus.len(), "chaos spec needs one multi-index per time");
            for t in &spec.times {
                parse_rational(t)?;
            }
        }
        Ok(())
    }

    /// The system the chaos suite expands on: the named one, or the first.
    pub fn chaos_system(&self) -> &SystemConfig {
        if self.chaos.system.is_empty() {
            &self.systems[0]
        } else {
            self.system(&self.chaos.system).expect("validated")
        }
    }

    /// A small configuration used by `dunkl init` and the tests.
    pub fn example() -> Self {
        Self {
            seed: 20240917,
            t_end: 1.0,
            dt: 1e-3,
            n_paths: 10_000,
            n_max: 8,
            output_dir: PathBuf::from("out"),
            suites: vec![Suite::All],
            systems: vec![SystemConfig {
                name: "rank1_k1".into(),
                kind: "rank1".into(),
                dim: 1,
                multiplicities: vec!["1".into()],
                x0: vec![1.0],
                monte_carlo: true,
            }],
            symbolic: SymbolicConfig::default(),
            density: DensityConfig::default(),
            paths: PathsConfig::default(),
            hermite: HermiteConfig::default(),
            chaos: ChaosConfig::default(),
            fixtures: FixturesConfig::default(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonical_form_round_trips() {
        let cfg = ExperimentConfig::example();
        let text = cfg.canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.canonical(), text);
        assert_eq!(back.digest(), cfg.digest());
    }

    #[test]
    fn sections_default() {
        let text = r#"
            seed = 1
            t_end = 1.0
            dt = 0.01
            n_paths = 10
            n_max = 4
            output_dir = "o"
            [[systems]]
            name = "b2"
            kind = "B2"
            dim = 2
            multiplicities = ["1", "0.5"]
            x0 = [1.0, 0.3]
        "#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        assert_eq!(cfg.suites, vec![Suite::All]);
        assert_eq!(cfg.hermite.max_degree, 3);
        assert_eq!(cfg.chaos_system().name, "b2");
        assert_eq!(cfg.systems[0].multiplicities().unwrap()[1], dunkl_core::field::rat(1, 2));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = ExperimentConfig::example();
        cfg.systems[0].x0 = vec![0.0];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::example();
        cfg.dt = 0.3;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::example();
        cfg.systems[0].multiplicities = vec!["-1".into()];
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::example();
        cfg.systems.push(cfg.systems[0].clone());
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::parse("seed = 1\nbogus = 2").is_err());
        assert!("everything".parse::<Suite>().is_err());
    }

    #[test]
    fn zero_multiplicity_walls_do_not_block_x0() {
        let mut cfg = ExperimentConfig::example();
        cfg.systems[0].multiplicities = vec!["0".into()];
        cfg.systems[0].x0 = vec![0.0];
        assert!(cfg.validate().is_ok());
    }
}
