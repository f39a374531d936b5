//! Monte Carlo checks on simulated paths.

use anyhow::Result;
use dunkl_core::special::bessel_cdf;
use dunkl_core::pathsim::{
    estimate_jump_functionals, extract_martingales, refinement_study, simulate_many, PathFunctionals, Scheme,
    SkewParams,
};
use dunkl_core::stats::{ks_one_sample, ks_two_sample, mean_se};
use dunkl_core::{RootSystem, RootSystemKind};

use super::{ito_gauge, Runner};
use crate::config::{parse_rational, Suite};
use crate::report::thresholds::{HALVING_RATIO, STABLE_REL_CHANGE};

/// Largest tolerated share of paths excluded by the wall policy.
const MAX_REJECTION_RATE: f64 = 0.01;

/// The compensator identity is tested where the count has finite variance.
const COMPENSATOR_MIN_K: f64 = 1.0;

pub(super) fn run(r: &mut Runner) {
    for i in 0..r.systems.len() {
        if !r.systems[i].cfg.monte_carlo {
            continue;
        }
        if let Err(e) = system(r, i) {
            let name = r.systems[i].name().to_string();
            r.rec.scope(Suite::Paths, "error");
            r.rec.error(format!("{name}/paths/error"), &e);
        }
    }
    let ks = r.cfg.paths.refine_k.clone();
    for k in &ks {
        if let Err(e) = refinement(r, k) {
            r.rec.scope(Suite::Paths, "error");
            r.rec.error(format!("rank1_k{k}/paths/refinement_error"), &e);
        }
    }
}

fn system(r: &mut Runner, i: usize) -> Result<()> {
    let base = r.base_batch(i)?;
    let setup = &r.systems[i];
    let (rs, x0, name) = (&setup.rs, setup.x0(), setup.name().to_string());
    let d = rs.dim();
    let t_end = r.cfg.t_end;

    // Driving-noise residuals on the coupled half-step grid.
    let fine_params = r.euler().halved();
    let gauge = ito_gauge(rs)?;
    let fine = simulate_many(rs, x0, &Scheme::Euler(fine_params), r.seed(&format!("paths/{name}")), r.cfg.n_paths, |p| {
        let dec = extract_martingales(rs, p);
        (dec.reconstruction_residual().unwrap_or(f64::NAN), gauge.residual(p, &dec).abs())
    })?;

    let skew = if rs.kind() == RootSystemKind::Rank1 && !rs.is_zero_multiplicity() {
        let params = SkewParams::new(t_end, r.cfg.dt);
        let b = simulate_many(rs, x0, &Scheme::SkewRank1(params), r.seed(&format!("skew/{name}")), r.cfg.n_paths, |p| {
            p.final_state()[0]
        })?;
        Some(b.values)
    } else {
        None
    };

    let rec = &mut r.rec;
    rec.scope(Suite::Paths, "martingale");
    rec.at_most(format!("{name}/paths/rejection_rate"), base.rejection_rate, MAX_REJECTION_RATE);
    for c in 0..d {
        let m = mean_se(&base.paths.iter().map(|p| p.end[c]).collect::<Vec<_>>());
        rec.mean(format!("{name}/martingale/mean_x{}", c + 1), m, x0[c]);
    }
    let coarse_res = mean_se(&base.paths.iter().map(|p| p.residual).collect::<Vec<_>>()).mean;
    let fine_res = mean_se(&fine.values.iter().map(|v| v.0).collect::<Vec<_>>()).mean;
    rec.at_least(format!("{name}/martingale/reconstruction_halving_ratio"), coarse_res / fine_res, HALVING_RATIO);
    let cross = base.paths.iter().map(|p| p.cross).fold(0.0, f64::max);
    if rs.num_roots() > 1 {
        rec.identity(format!("{name}/martingale/cross_bracket_zero"), true, cross == 0.0, cross);
    }
    rec.touch(&["pathsim::estimate_jump_functionals"]);
    let fs: Vec<PathFunctionals> = base.paths.iter().map(|p| p.functionals.clone()).collect();
    let report = estimate_jump_functionals(rs, &fs);
    for root in &report.roots {
        if root.k > 0.0 {
            rec.mean(format!("{name}/martingale/bracket_root{}", root.root + 1), root.qv, t_end);
        }
    }

    // Without jumps the Itô residual is rounding error only.
    if !rs.is_zero_multiplicity() {
        rec.scope(Suite::Paths, "ito");
        let coarse_ito = mean_se(&base.paths.iter().map(|p| p.ito).collect::<Vec<_>>()).mean;
        let fine_ito = mean_se(&fine.values.iter().map(|v| v.1).collect::<Vec<_>>()).mean;
        rec.at_least(format!("{name}/ito/residual_halving_ratio"), coarse_ito / fine_ito, 1.0);
    }

    rec.scope(Suite::Paths, "jumps");
    if rs.is_zero_multiplicity() {
        let jumps: f64 = base.paths.iter().map(|p| p.functionals.count.iter().sum::<f64>()).sum();
        rec.identity(format!("{name}/jumps/no_jumps_at_zero_multiplicity"), true, jumps == 0.0, jumps);
    } else if report.roots.iter().filter(|r| r.k > 0.0).all(|r| r.k >= COMPENSATOR_MIN_K) {
        for root in &report.roots {
            rec.mean(format!("{name}/jumps/count_minus_compensator_root{}", root.root + 1), root.count_minus_compensator, 0.0);
        }
    }

    if !rs.is_zero_multiplicity() {
        rec.scope(Suite::Paths, "radial_law");
        let dim = rs.bessel_dimension();
        let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radii: Vec<f64> = base.paths.iter().map(|p| p.end.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        rec.ks(format!("{name}/radial_law/ks_bessel"), ks_one_sample(&radii, |rr| bessel_cdf(dim, r0, rr, t_end)));
    }

    if let Some(sk) = skew {
        rec.touch(&["pathsim::simulate_skew_rank1"]);
        rec.scope(Suite::Paths, "skew");
        let euler: Vec<f64> = base.paths.iter().map(|p| p.end[0]).collect();
        rec.ks(format!("{name}/skew/ks_euler_vs_skew_product"), ks_two_sample(&euler, &sk));
    }

    let mut csv = (1..=d).map(|c| format!("x{c}")).collect::<Vec<_>>().join(",");
    csv.push('\n');
    for p in &base.paths {
        csv.push_str(&p.end.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(","));
        csv.push('\n');
    }
    r.artifacts.push((format!("data/terminal_{name}.csv").into(), csv));
    Ok(())
}

fn refinement(r: &mut Runner, k_text: &str) -> Result<()> {
    let k = parse_rational(k_text)?;
    let rs = RootSystem::build(RootSystemKind::Rank1, 1, &[k])?;
    let kf = rs.k(0);
    let label = format!("rank1_k{}", k_text.replace('/', "_"));
    let study = refinement_study(&rs, &[1.0], &r.euler(), r.seed(&format!("refine/{label}")), r.cfg.n_paths)?;
    let rec = &mut r.rec;
    rec.touch(&["pathsim::estimate_jump_functionals"]);
    rec.scope(Suite::Paths, "jump_refinement");
    // Σ 1/⟨α,X⟩² has finite mean only above k = 1/2.
    if kf > 0.5 {
        rec.at_most(format!("{label}/jump_refinement/inv_abs_change"), study.inv_abs_change[0], STABLE_REL_CHANGE);
        rec.at_most(format!("{label}/jump_refinement/inv_sq_change"), study.inv_sq_change[0], STABLE_REL_CHANGE);
    } else {
        rec.at_least(format!("{label}/jump_refinement/inv_sq_not_stable"), study.inv_sq_change[0], STABLE_REL_CHANGE);
    }
    Ok(())
}
