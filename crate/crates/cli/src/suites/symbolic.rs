//! Exact operator identities, the intertwining operator and harmonicity.

use anyhow::Result;
use dunkl_core::density::radial_generator_check;
use dunkl_core::dunkl::DunklOps;
use dunkl_core::field::Coeff;
use dunkl_core::intertwine::{classical_hermite, IntertwineTable};
use dunkl_core::linalg::{identity, matmul};
use dunkl_core::field::rational_from_f64;
use dunkl_core::poly::{monomials_of_degree, Polynomial};
use dunkl_core::special::rank1_kernel;
use dunkl_core::{QSqrt2, RootSystem, RootSystemKind};
use num_rational::BigRational;
use num_traits::Zero;

use super::{defect, Runner, Setup, Tally};
use crate::config::Suite;
use crate::report::Recorder;

/// Sample points off every wall of the supported systems.
const POINT: [f64; 4] = [0.731, -0.412, 1.153, -0.268];

/// Degree of the kernel table used against the closed form.
const KERNEL_DEGREE: usize = 24;

pub(super) fn run(r: &mut Runner) {
    for i in 0..r.systems.len() {
        let setup = &r.systems[i];
        let name = setup.name().to_string();
        let res = if setup.rs.is_exact() {
            system::<QSqrt2>(r.cfg, setup, &mut r.rec)
        } else {
            system::<f64>(r.cfg, setup, &mut r.rec)
        };
        if let Err(e) = res {
            r.rec.scope(Suite::Symbolic, "error");
            r.rec.error(format!("{name}/symbolic/error"), &e);
        }
    }
}

fn all_monomials(d: usize, max_degree: usize) -> Vec<(usize, Polynomial<QSqrt2>)> {
    let mut out = Vec::new();
    for n in 0..=max_degree {
        for m in monomials_of_degree(d, n) {
            out.push((n, Polynomial::monomial(m, QSqrt2::one())));
        }
    }
    out
}

fn lift<C: Coeff>(p: &Polynomial<QSqrt2>) -> Polynomial<C> {
    p.map_coeffs(C::from_q2)
}

fn zero_clone(rs: &RootSystem) -> Result<RootSystem> {
    let zeros = vec![BigRational::zero(); rs.num_orbits()];
    Ok(RootSystem::build(rs.kind(), rs.dim(), &zeros)?)
}

fn system<C: Coeff>(cfg: &crate::config::ExperimentConfig, setup: &Setup, rec: &mut Recorder) -> Result<()> {
    let rs = &setup.rs;
    let name = setup.name();
    let d = rs.dim();
    let exact = C::EXACT;
    let ops = DunklOps::<C>::new(rs)?;
    let monos = all_monomials(d, cfg.symbolic.operator_degree);

    rec.scope(Suite::Symbolic, "rootsys");
    rec.touch(&["rootsys::reflect", "rootsys::pairing", "rootsys::chamber_project"]);
    let x = &POINT[..d];
    let mut refl = Tally::new();
    let mut chamber = Tally::new();
    let px = rs.chamber_project(x);
    for a in 0..rs.num_roots() {
        let y = rs.reflect(a, x);
        for (u, v) in rs.reflect(a, &y).iter().zip(x) {
            refl.add_float(*u, *v);
        }
        refl.add_float(rs.pairing(a, &y), -rs.pairing(a, x));
        let norm2 = |v: &[f64]| v.iter().map(|c| c * c).sum::<f64>();
        refl.add_float(norm2(&y), norm2(x));
        for (u, v) in rs.chamber_project(&y).iter().zip(&px) {
            chamber.add_float(*u, *v);
        }
    }
    refl.record(rec, format!("{name}/rootsys/reflection_involution"), false);
    chamber.record(rec, format!("{name}/rootsys/chamber_projection_invariant"), false);

    rec.scope(Suite::Symbolic, "operators");
    rec.touch(&["polyalg::dunkl_t", "polyalg::dunkl_l", "polyalg::divided_difference", "polyalg::eval"]);
    let zero_ops = DunklOps::<C>::new(&zero_clone(rs)?)?;
    let (mut commute, mut lowering, mut routes, mut reduction, mut divided, mut pointwise) =
        (Tally::new(), Tally::new(), Tally::new(), Tally::new(), Tally::new(), Tally::new());
    let xc: Vec<C> = x.iter().map(|&v| Ok(C::from_rational(&rational_from_f64(v)?))).collect::<Result<_>>()?;
    for (deg, p) in &monos {
        let p: Polynomial<C> = lift(p);
        let tp: Vec<Polynomial<C>> = (0..d).map(|i| ops.t(i, &p)).collect::<dunkl_core::Result<_>>()?;
        for i in 0..d {
            let ok = tp[i].is_zero() || (*deg >= 1 && tp[i].is_homogeneous_in(0..d, deg - 1));
            lowering.add((ok, if ok { 0.0 } else { 1.0 }));
            for j in 0..i {
                commute.add(defect(&ops.t(i, &tp[j])?, &ops.t(j, &tp[i])?));
            }
            reduction.add(defect(&zero_ops.t(i, &p)?, &p.derivative(i)));
            // Pointwise definition at a sample point.
            let mut direct = p.derivative(i).eval(&xc)?.to_f64();
            for a in 0..rs.num_roots() {
                let sx = rs.reflect(a, x);
                let diff = p.eval_f64(x)? - p.eval_f64(&sx)?;
                direct += rs.k(a) * rs.root(a)[i] * diff / rs.pairing(a, x);
            }
            pointwise.add_float(tp[i].eval_f64(x)?, direct);
        }
        routes.add(defect(&ops.l_via_t(&p)?, &ops.l_closed_form(&p)?));
        reduction.add(defect(&zero_ops.l_via_t(&p)?, &zero_ops.laplacian(&p)?));
        for a in 0..rs.num_roots() {
            let dd = ops.divided_difference(a, &p)?;
            let lhs = &dd * &ops.root_poly(a, d);
            let rhs = &p - &ops.reflect_poly(a, &p)?;
            divided.add(defect(&lhs, &rhs));
        }
    }
    if d > 1 {
        commute.record(rec, format!("{name}/operators/commute"), exact);
    }
    lowering.record(rec, format!("{name}/operators/degree_lowering"), exact);
    routes.record(rec, format!("{name}/operators/generator_routes"), exact);
    reduction.record(rec, format!("{name}/operators/zero_multiplicity"), exact);
    divided.record(rec, format!("{name}/operators/divided_difference"), exact);
    pointwise.record(rec, format!("{name}/operators/pointwise_definition"), false);

    rec.touch(&["density::radial_generator_check"]);
    let f: Vec<C> = [1, -2, 3].iter().map(|&v| C::from_i64(v)).collect();
    let rc = radial_generator_check(rs, &f)?;
    let mut radial = Tally::new();
    radial.add(defect(&rc.lhs, &rc.rhs));
    radial.record(rec, format!("{name}/operators/radial_reduction"), exact);

    rec.scope(Suite::Symbolic, "intertwining");
    rec.touch(&["intertwine::build_intertwine", "intertwine::dunkl_kernel"]);
    let degree = if d == 1 { cfg.n_max } else { cfg.n_max.min(cfg.symbolic.intertwine_degree) };
    let table = IntertwineTable::<C>::build(rs, degree)?;
    let mut inter = Tally::new();
    let mut invertible = Tally::new();
    for n in 0..=degree {
        let v = table.v_matrix(n);
        let vi = table.v_inverse_matrix(n);
        let prod = matmul(vi, v);
        let id = identity::<C>(prod.len());
        let worst = prod
            .iter()
            .flatten()
            .zip(id.iter().flatten())
            .map(|(a, b)| (a.clone() - b.clone()).magnitude())
            .fold(0.0, f64::max);
        let holds = if exact { prod == id } else { worst <= crate::report::thresholds::FLOAT_TOL };
        invertible.add((holds, worst));
        for nu in table.basis(n) {
            let xnu = Polynomial::<C>::monomial(nu.clone(), C::one());
            let m = table.m(nu.exps())?;
            for i in 0..d {
                inter.add(defect(&ops.t(i, m)?, &table.apply_v(&xnu.derivative(i))?));
            }
        }
    }
    inter.record(rec, format!("{name}/intertwining/t_m_equals_v_derivative"), exact);
    invertible.record(rec, format!("{name}/intertwining/v_invertible"), exact);

    if rs.kind() == RootSystemKind::Rank1 && degree >= 2 {
        let k = C::from_rational(rs.multiplicity(0));
        let denom = (C::one() + C::from_i64(2) * k).inv().expect("1 + 2k > 0");
        let x1 = Polynomial::<C>::var(1, 0);
        let mut closed = Tally::new();
        closed.add(defect(table.m(&[1])?, &x1.scale(&denom)));
        closed.add(defect(table.m(&[2])?, &(&x1 * &x1).scale(&denom)));
        closed.record(rec, format!("{name}/intertwining/rank1_monomials"), exact);
    }

    // D_k(σx, σy) = D_k(x, y) and D_k(x, y) = D_k(y, x) at small |x||y|.
    let xs: Vec<f64> = x.iter().map(|v| v * 0.05).collect();
    let ys: Vec<f64> = POINT.iter().rev().take(d).map(|v| v * 0.05).collect();
    let tol = 1e-12;
    let mut sym = Tally::new();
    let base = table.dunkl_kernel(&xs, &ys, tol)?;
    sym.add_float(base, table.dunkl_kernel(&ys, &xs, tol)?);
    for a in 0..rs.num_roots() {
        sym.add_float(base, table.dunkl_kernel(&rs.reflect(a, &xs), &rs.reflect(a, &ys), tol)?);
    }
    sym.record(rec, format!("{name}/intertwining/kernel_symmetry"), false);

    if matches!(rs.kind(), RootSystemKind::Rank1 | RootSystemKind::ProductOfRank1) && d <= 2 {
        let big = IntertwineTable::<C>::build(rs, KERNEL_DEGREE)?;
        let mut kern = Tally::new();
        for (x, y) in [([0.8, -0.5], [1.1, 0.6]), ([-1.2, 0.3], [0.9, -1.0])] {
            let series = big.dunkl_kernel(&x[..d], &y[..d], 1e-14)?;
            let closed: f64 = (0..d).map(|i| rank1_kernel(rs.k(i), x[i] * y[i])).product();
            let rel = (series / closed - 1.0).abs();
            kern.add((rel <= crate::report::thresholds::FLOAT_TOL, rel));
        }
        kern.record(rec, format!("{name}/intertwining/kernel_closed_form"), false);
    }

    rec.scope(Suite::Symbolic, "harmonicity");
    rec.touch(&["intertwine::hermite_q", "intertwine::classical_hermite"]);
    let mut harm = Tally::new();
    for n in 0..=degree {
        for nu in table.basis(n) {
            let fam = table.hermite(nu.exps())?;
            harm.add(defect(&fam.harmonicity_defect(table.ops())?, &Polynomial::zero(d + 1)));
        }
    }
    harm.record(rec, format!("{name}/harmonicity/space_time_harmonic"), exact);

    let zero_table = IntertwineTable::<C>::build(&zero_clone(rs)?, degree.min(4))?;
    let mut classical = Tally::new();
    for n in 0..=degree.min(4) {
        for nu in zero_table.basis(n) {
            let q = &zero_table.hermite(nu.exps())?.q;
            let mut h = Polynomial::<C>::one(d + 1);
            for (i, &e) in nu.exps().iter().enumerate() {
                h = &h * &classical_hermite::<C>(e as usize).remap(d + 1, &[i, d]);
            }
            classical.add(defect(q, &h));
        }
    }
    classical.record(rec, format!("{name}/harmonicity/zero_multiplicity_is_classical"), exact);
    Ok(())
}
