//! Martingale property of the space–time Hermite polynomials along paths.

use anyhow::Result;
use dunkl_core::chaos::hermite_martingale_check;
use dunkl_core::field::Coeff;
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::QSqrt2;

use super::Runner;
use crate::config::Suite;

pub(super) fn run(r: &mut Runner) {
    for i in 0..r.systems.len() {
        if !r.systems[i].cfg.monte_carlo {
            continue;
        }
        let res = if r.systems[i].rs.is_exact() { system::<QSqrt2>(r, i) } else { system::<f64>(r, i) };
        if let Err(e) = res {
            let name = r.systems[i].name().to_string();
            r.rec.scope(Suite::Hermite, "error");
            r.rec.error(format!("{name}/hermite/error"), &e);
        }
    }
}

fn nu_label(nu: &[u16]) -> String {
    nu.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("_")
}

fn system<C: Coeff>(r: &mut Runner, i: usize) -> Result<()> {
    let base = r.base_batch(i)?;
    let setup = &r.systems[i];
    let (rs, x0, name) = (&setup.rs, setup.x0(), setup.name());
    let degree = r.cfg.hermite.max_degree;
    let table = IntertwineTable::<C>::build(rs, degree)?;
    let samples: Vec<(Vec<f64>, Vec<f64>)> = base.paths.iter().map(|p| (p.mid.clone(), p.end.clone())).collect();
    let rec = &mut r.rec;
    rec.touch(&["chaos::hermite_martingale_check"]);
    rec.scope(Suite::Hermite, "hermite");
    for n in 1..=degree {
        for nu in table.basis(n) {
            let check = hermite_martingale_check(&table, nu.exps(), x0, base.mid_time, r.cfg.t_end, &samples)?;
            let label = nu_label(nu.exps());
            rec.mean(format!("{name}/hermite/nu{label}/mean"), check.mean, check.target);
            for (g, m) in &check.conditional {
                rec.mean(format!("{name}/hermite/nu{label}/increment_times_{g}"), *m, 0.0);
            }
        }
    }
    Ok(())
}
