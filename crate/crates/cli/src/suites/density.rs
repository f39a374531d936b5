//! Heat-kernel quadrature checks and the normalizing constant.

use anyhow::Result;
use dunkl_core::density::{compute_ck, rank1_density_closed, weight, CkMethod, DensityContext};
use dunkl_core::special::integrate;
use dunkl_core::{RootSystem, RootSystemKind};

use super::{Runner, Tally};
use crate::config::{parse_rational, Suite};
use crate::report::thresholds::{CHAPMAN_TOL, CK_TOL, DENSITY_MOMENT_TOL, KERNEL_REL_TOL};

/// Quadrature tolerance for the moment integrals.
const QUAD_TOL: f64 = 1e-10;

/// Target points of the Chapman–Kolmogorov check.
const CHAPMAN_Z: [f64; 3] = [-0.5, 0.7, 1.6];

/// Grid written to the density artifacts.
const GRID_POINTS: usize = 201;

pub(super) fn run(r: &mut Runner) {
    let ks = r.cfg.density.k.clone();
    for k in &ks {
        if let Err(e) = rank1(r, k) {
            r.rec.scope(Suite::Density, "error");
            r.rec.error(format!("rank1_k{k}/density/error"), &e);
        }
    }
    for i in 0..r.systems.len() {
        if let Err(e) = system(r, i) {
            let name = r.systems[i].name().to_string();
            r.rec.scope(Suite::Density, "error");
            r.rec.error(format!("{name}/density/error"), &e);
        }
    }
}

fn rank1(r: &mut Runner, k_text: &str) -> Result<()> {
    let k = parse_rational(k_text)?;
    let rs = RootSystem::build(RootSystemKind::Rank1, 1, &[k])?;
    let kf = rs.k(0);
    let label = format!("rank1_k{}", k_text.replace('/', "_"));
    let (x, t) = (r.cfg.density.x, r.cfg.density.t);
    let ctx = DensityContext::new(&rs, r.cfg.density.series_degree)?;
    let rec = &mut r.rec;
    rec.touch(&["density::compute_ck", "density::transition_density", "density::radial_density", "density::w_radial_density"]);
    rec.scope(Suite::Density, "density");

    let closed = compute_ck(&rs, CkMethod::ClosedForm)?.value;
    let quad = compute_ck(&rs, CkMethod::Quadrature)?.value;
    rec.rel_tol(format!("{label}/density/ck_closed_form_vs_quadrature"), quad, closed, CK_TOL);

    let mass = ctx.integrate_rank1(x, t, |_| 1.0, QUAD_TOL)?;
    rec.abs_tol(format!("{label}/density/total_mass"), mass, 1.0, DENSITY_MOMENT_TOL);
    let mean = ctx.integrate_rank1(x, t, |y| y, QUAD_TOL)?;
    rec.abs_tol(format!("{label}/density/first_moment"), mean, x, DENSITY_MOMENT_TOL);

    let s = t / 2.0;
    let mut worst = 0.0f64;
    for &z in &CHAPMAN_Z {
        let direct = ctx.transition_density(&[x], &[z], t)?;
        let failed = std::cell::Cell::new(false);
        let composed = ctx.integrate_rank1(
            x,
            s,
            |y| {
                ctx.transition_density(&[y], &[z], s).unwrap_or_else(|_| {
                    failed.set(true);
                    f64::NAN
                })
            },
            QUAD_TOL,
        )?;
        let rel = if failed.get() { f64::NAN } else { (composed / direct - 1.0).abs() };
        worst = if rel.is_nan() { f64::NAN } else { worst.max(rel) };
    }
    rec.at_most(format!("{label}/density/chapman_kolmogorov"), worst, CHAPMAN_TOL);

    let mut series = 0.0f64;
    for &(y, tt) in &[(0.4, t), (-1.3, t), (2.1, 0.5 * t)] {
        let a = ctx.transition_density(&[x], &[y], tt)?;
        let b = rank1_density_closed(kf, x, y, tt);
        series = series.max((a / b - 1.0).abs());
    }
    rec.at_most(format!("{label}/density/series_vs_bessel_closed_form"), series, KERNEL_REL_TOL);

    // For d = 1 the W-radial part is |X|.
    let mut radial = 0.0f64;
    for &y in &[0.3, 1.0, 2.2] {
        let a = ctx.w_radial_density(&[x], &[y], t)?;
        let b = ctx.radial_density(x.abs(), y, t);
        radial = radial.max((a / b - 1.0).abs());
    }
    rec.at_most(format!("{label}/density/w_radial_vs_bessel"), radial, KERNEL_REL_TOL);
    let (radial_mass, _) = integrate(|rr| ctx.radial_density(x.abs(), rr, t), 0.0, x.abs() + 14.0 * t.sqrt(), 1e-12, 1e-12)?;
    rec.abs_tol(format!("{label}/density/radial_mass"), radial_mass, 1.0, DENSITY_MOMENT_TOL);

    let lo = x - 6.0 * t.sqrt();
    let hi = x + 6.0 * t.sqrt();
    let mut csv = String::from("y,p\n");
    for j in 0..GRID_POINTS {
        let y = lo + (hi - lo) * j as f64 / (GRID_POINTS - 1) as f64;
        csv.push_str(&format!("{y},{:e}\n", ctx.transition_density(&[x], &[y], t)?));
    }
    r.artifacts.push((format!("data/density_{label}.csv").into(), csv));
    Ok(())
}

fn system(r: &mut Runner, i: usize) -> Result<()> {
    let setup = &r.systems[i];
    let rs = &setup.rs;
    let name = setup.name();
    let d = rs.dim();
    let rec = &mut r.rec;
    rec.scope(Suite::Density, "density");
    rec.touch(&["density::weight"]);
    // ω_k is W-invariant and homogeneous of degree 2γ.
    let y: Vec<f64> = [0.83, -0.37, 1.21, 0.55][..d].to_vec();
    let w = weight(rs, &y);
    let mut inv = Tally::new();
    for a in 0..rs.num_roots() {
        inv.add_float(weight(rs, &rs.reflect(a, &y)) / w, 1.0);
    }
    let scaled: Vec<f64> = y.iter().map(|v| 2.0 * v).collect();
    inv.add_float(weight(rs, &scaled) / w, 2f64.powf(2.0 * rs.gamma_f64()));
    inv.record(rec, format!("{name}/density/weight_invariance"), false);

    let integer_k = rs.orbit_multiplicities().iter().all(|k| k.is_integer());
    if d == 2 && integer_k && !rs.is_zero_multiplicity() {
        let gm = compute_ck(rs, CkMethod::GaussianMoments)?.value;
        let quad = compute_ck(rs, CkMethod::Quadrature)?.value;
        rec.rel_tol(format!("{name}/density/ck_moments_vs_quadrature"), quad, gm, CK_TOL);
    }
    Ok(())
}
