//! Golden files: m_ν, Q_ν and the integrands of Q_ν in canonical text form.

use std::path::PathBuf;

use anyhow::Result;
use dunkl_core::field::Coeff;
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::QSqrt2;

use crate::config::{ExperimentConfig, SystemConfig};
use crate::suites::write_file;

/// Directory name `<id>_k<k1>_<k2>...`, with `/` in a multiplicity written as `-`.
pub fn fixture_key(system: &SystemConfig) -> Result<String> {
    let rs = system.build()?;
    let ks: Vec<String> = rs.orbit_multiplicities().iter().map(|k| k.to_string().replace('/', "-")).collect();
    Ok(format!("{}_k{}", rs.id(), ks.join("_")))
}

fn nu_text(nu: &[u16]) -> String {
    format!("({})", nu.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(","))
}

fn render_system<C: Coeff>(system: &SystemConfig, degree: usize) -> Result<Vec<(PathBuf, String)>> {
    let rs = system.build()?;
    let d = rs.dim();
    let key = fixture_key(system)?;
    let table = IntertwineTable::<C>::build(&rs, degree)?;
    let header = format!("# {} k=({})\n", rs.id(), system.multiplicities().map(|ks| ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(","))?);
    let (mut m, mut q, mut integrands) = (header.clone(), header.clone(), header);
    for n in 0..=degree {
        for nu in table.basis(n) {
            let e = nu.exps();
            let key_nu = nu_text(e);
            m.push_str(&format!("m{key_nu} = {}\n", table.m(e)?.canonical(d)));
            let fam = table.hermite(e)?;
            q.push_str(&format!("Q{key_nu} = {}\n", fam.q.canonical(d)));
            for (i, p) in fam.q_c.iter().enumerate() {
                integrands.push_str(&format!("dQ{key_nu}/dx{} = {}\n", i + 1, p.canonical(d)));
            }
            for (a, p) in fam.divided.iter().enumerate() {
                integrands.push_str(&format!("DQ{key_nu}/root{} = {}\n", a + 1, p.canonical(d)));
            }
        }
    }
    let dir = PathBuf::from(key);
    Ok(vec![(dir.join("m.txt"), m), (dir.join("q.txt"), q), (dir.join("integrands.txt"), integrands)])
}

/// Fixture files for every configured system, relative to the fixture directory.
pub fn render(cfg: &ExperimentConfig) -> Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    for s in &cfg.systems {
        let degree = if s.dim == 1 { cfg.n_max } else { cfg.n_max.min(cfg.fixtures.max_degree) };
        let files = if s.build()?.is_exact() { render_system::<QSqrt2>(s, degree)? } else { render_system::<f64>(s, degree)? };
        out.extend(files);
    }
    Ok(out)
}

/// Writes the fixtures under `<out>/fixtures` and returns the written paths.
pub fn dump_fixtures(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let root = cfg.out_dir().join("fixtures");
    let mut written = Vec::new();
    for (p, text) in render(cfg)? {
        let path = root.join(p);
        write_file(&path, &text)?;
        written.push(path);
    }
    Ok(written)
}
