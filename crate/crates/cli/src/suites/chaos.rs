//! Chaos expansions of polynomial functionals checked along simulated paths.

use anyhow::Result;
use dunkl_core::chaos::{
    chaos_expand, first_peel, isometry_check, ChaosExpansion, CompiledExpansion, Convention, FunctionalSpec, PathChaos,
};
use dunkl_core::field::{rational_from_f64, Coeff};
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::pathsim::{extract_martingales, simulate_many, Scheme, SimParams};
use dunkl_core::poly::Polynomial;
use dunkl_core::stats::mean_se;
use dunkl_core::QSqrt2;

use super::{defect, Runner, Tally};
use crate::config::{parse_rational, Suite};

/// The residual second moment must shrink at least by this factor when dt halves.
pub const RESIDUAL_DECAY: f64 = 0.75;

pub(super) fn run(r: &mut Runner) {
    if r.cfg.chaos.specs.is_empty() {
        return;
    }
    let name = r.cfg.chaos_system().name.clone();
    let i = r.systems.iter().position(|s| s.name() == name).expect("validated");
    let res = if r.systems[i].rs.is_exact() { system::<QSqrt2>(r, i) } else { system::<f64>(r, i) };
    if let Err(e) = res {
        r.rec.scope(Suite::Chaos, "error");
        r.rec.error(format!("{name}/chaos/error"), &e);
    }
}

fn label<C: Coeff>(exp: &ChaosExpansion<C>, term: usize) -> String {
    exp.terms[term].legs.iter().map(|l| l.label(exp.dim)).collect::<Vec<_>>().join(".")
}

fn system<C: Coeff>(r: &mut Runner, i: usize) -> Result<()> {
    let setup = &r.systems[i];
    let (rs, x0, name) = (&setup.rs, setup.x0().to_vec(), setup.name().to_string());
    let d = rs.dim();
    let x0q = x0.iter().map(|&v| rational_from_f64(v)).collect::<dunkl_core::Result<Vec<_>>>()?;
    let specs = r
        .cfg
        .chaos
        .specs
        .iter()
        .map(|s| {
            let times = s.times.iter().map(|t| parse_rational(t)).collect::<Result<Vec<_>>>()?;
            Ok(FunctionalSpec::new(times, s.nus.clone())?)
        })
        .collect::<Result<Vec<_>>>()?;
    let degree = specs.iter().map(|s| s.total_degree()).max().unwrap_or(0).max(1);
    let table = IntertwineTable::<C>::build(rs, degree)?;
    let mut expansions = Vec::new();
    let mut compiled = Vec::new();
    for spec in &specs {
        let e = chaos_expand(&table, &x0q, spec)?;
        compiled.push(CompiledExpansion::new(&e, &table, spec)?);
        expansions.push(e);
    }

    let coarse = SimParams::new(r.cfg.t_end, 2.0 * r.cfg.chaos.dt);
    let fine = coarse.halved();
    let seed = r.seed(&format!("chaos/{name}"));
    let eval = |params: &SimParams| {
        simulate_many(rs, &x0, &Scheme::Euler(params.clone()), seed, r.cfg.n_paths, |p| {
            let dec = extract_martingales(rs, p);
            compiled
                .iter()
                .map(|c| c.evaluate(p, &dec, Convention::LeftLimit))
                .collect::<dunkl_core::Result<Vec<PathChaos>>>()
        })
    };
    let coarse_batch = eval(&coarse)?;
    let fine_batch = eval(&fine)?;
    let unpack = |v: Vec<dunkl_core::Result<Vec<PathChaos>>>| v.into_iter().collect::<dunkl_core::Result<Vec<_>>>();
    let coarse_vals = unpack(coarse_batch.values)?;
    let fine_vals = unpack(fine_batch.values)?;

    let rec = &mut r.rec;
    rec.touch(&["chaos::chaos_expand", "chaos::iterated_integral", "chaos::isometry_check"]);
    for (j, (spec, exp)) in specs.iter().zip(&expansions).enumerate() {
        let ce = &compiled[j];
        let tag = format!("{name}/chaos/spec{}", j + 1);
        rec.scope(Suite::Chaos, "chaos");

        if spec.times.len() == 1 {
            let peel = first_peel(&table, &x0q, spec)?;
            let fam = table.hermite(&spec.nus[0])?;
            let t = C::from_rational(&spec.times[0]);
            let mut subs: Vec<Polynomial<C>> = (0..d).map(|v| Polynomial::var(d + 1, v)).collect();
            subs.push(&Polynomial::var(d + 1, d) - &Polynomial::constant(d + 1, t));
            let mut tally = Tally::new();
            for v in 0..d {
                tally.add(defect(&peel[v], &fam.q_c[v].compose(&subs)?));
            }
            if let Some(qd) = &fam.q_delta {
                for (a, q) in qd.iter().enumerate() {
                    tally.add(defect(&peel[d + a], &q.compose(&subs)?));
                }
            }
            tally.record(rec, format!("{tag}/first_peel_integrands"), C::EXACT);
        }

        let fine_spec: Vec<PathChaos> = fine_vals.iter().map(|v| v[j].clone()).collect();
        let report = isometry_check(ce, &fine_spec);
        rec.mean(format!("{tag}/reconstruction_residual"), report.residual, 0.0);
        let coarse_sq = mean_se(&coarse_vals.iter().map(|v| v[j].residual(ce.constant).powi(2)).collect::<Vec<_>>()).mean;
        rec.at_most(
            format!("{tag}/residual_second_moment_ratio"),
            report.residual_second_moment.mean / coarse_sq,
            RESIDUAL_DECAY,
        );
        for (t, m) in report.term_means.iter().enumerate() {
            rec.mean(format!("{tag}/term_{}/mean", label(exp, t)), *m, 0.0);
        }
        for (t, (m, exact)) in report.isometry.iter().enumerate() {
            rec.mean(format!("{tag}/term_{}/isometry", label(exp, t)), *m, *exact);
        }
        for (a, b, m) in &report.orthogonality {
            rec.mean(format!("{tag}/orthogonal_{}_{}", label(exp, *a), label(exp, *b)), *m, 0.0);
        }
        rec.mean(format!("{tag}/variance"), report.variance.0, report.variance.1);
    }
    Ok(())
}
