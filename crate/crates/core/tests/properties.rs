//! Property tests for the exact symbolic layer.

use dunkl_core::density::radial_generator_check;
use dunkl_core::dunkl::DunklOps;
use dunkl_core::field::{rat, Coeff, QSqrt2};
use dunkl_core::intertwine::IntertwineTable;
use dunkl_core::linalg::{identity, matmul, transpose};
use dunkl_core::poly::{monomials_of_degree, Polynomial};
use dunkl_core::rootsys::{RootSystem, RootSystemKind};
use num_rational::BigRational;
use proptest::prelude::*;

fn systems(k1: i64, k2: i64) -> Vec<RootSystem> {
    let q = |n: i64| rat(n, 2);
    vec![
        RootSystem::build(RootSystemKind::Rank1, 1, &[q(k1)]).unwrap(),
        RootSystem::build(RootSystemKind::ProductOfRank1, 2, &[q(k1), q(k2)]).unwrap(),
        RootSystem::build(RootSystemKind::A(2), 3, &[q(k1)]).unwrap(),
        RootSystem::build(RootSystemKind::B(2), 2, &[q(k1), q(k2)]).unwrap(),
        RootSystem::build(RootSystemKind::D(3), 3, &[q(k2)]).unwrap(),
    ]
}

fn poly_from(d: usize, deg: usize, coeffs: &[i64]) -> Polynomial<QSqrt2> {
    let mut p = Polynomial::zero(d);
    let mut it = coeffs.iter().cycle();
    for n in 0..=deg {
        for m in monomials_of_degree(d, n) {
            p.add_term(m, QSqrt2::int(*it.next().unwrap()));
        }
    }
    p
}

fn qvec(xs: &[i64]) -> Vec<QSqrt2> {
    xs.iter().map(|&v| QSqrt2::frac(v, 7)).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reflections_are_isometric_involutions(xs in prop::collection::vec(-40i64..40, 3), k in 0i64..4) {
        for rs in systems(k, k + 1) {
            let x = qvec(&xs[..rs.dim()]);
            let n2 = |v: &[QSqrt2]| v.iter().fold(QSqrt2::zero(), |a, c| a + c.clone() * c.clone());
            for a in 0..rs.num_roots() {
                let y = rs.reflect_in(a, &x).unwrap();
                prop_assert_eq!(rs.reflect_in(a, &y).unwrap(), x.clone());
                prop_assert_eq!(n2(&y), n2(&x));
                // The hyperplane is fixed.
                let p = rs.pairing_in(a, &x).unwrap();
                let alpha = rs.root_in::<QSqrt2>(a).unwrap();
                let on_wall: Vec<QSqrt2> = x.iter().zip(&alpha).map(|(xi, ai)| xi.clone() - p.clone() * ai.clone() * QSqrt2::frac(1, 2)).collect();
                prop_assert_eq!(rs.reflect_in(a, &on_wall).unwrap(), on_wall);
            }
        }
    }

    #[test]
    fn chamber_projection_is_orbit_invariant(xs in prop::collection::vec(-5.0f64..5.0, 3), word in prop::collection::vec(0usize..16, 0..6)) {
        for rs in systems(1, 1) {
            let x = &xs[..rs.dim()];
            let mut y = x.to_vec();
            for &w in &word {
                y = rs.reflect(w % rs.num_roots(), &y);
            }
            let (px, py) = (rs.chamber_project(x), rs.chamber_project(&y));
            prop_assert!(rs.in_closed_chamber(&px));
            for (a, b) in px.iter().zip(&py) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn dunkl_operators_commute_and_lower_degree(c in prop::collection::vec(-5i64..5, 12), k1 in 0i64..4, k2 in 0i64..4, deg in 1usize..5) {
        for rs in systems(k1, k2).into_iter().take(4) {
            let d = rs.dim();
            let ops = DunklOps::<QSqrt2>::new(&rs).unwrap();
            let p = poly_from(d, deg, &c);
            let tp: Vec<_> = (0..d).map(|i| ops.t(i, &p).unwrap()).collect();
            for i in 0..d {
                prop_assert!(tp[i].is_zero() || tp[i].degree() < p.degree());
                for j in 0..i {
                    prop_assert_eq!(ops.t(i, &tp[j]).unwrap(), ops.t(j, &tp[i]).unwrap());
                }
            }
        }
    }

    #[test]
    fn generator_routes_agree(c in prop::collection::vec(-5i64..5, 12), k1 in 0i64..4, k2 in 0i64..4, deg in 0usize..5) {
        for rs in systems(k1, k2).into_iter().take(4) {
            let ops = DunklOps::<QSqrt2>::new(&rs).unwrap();
            let p = poly_from(rs.dim(), deg, &c);
            prop_assert_eq!(ops.l_via_t(&p).unwrap(), ops.l_closed_form(&p).unwrap());
        }
    }

    #[test]
    fn zero_multiplicity_gives_partial_derivatives(c in prop::collection::vec(-5i64..5, 12), deg in 0usize..5) {
        for rs in systems(0, 0) {
            let ops = DunklOps::<QSqrt2>::new(&rs).unwrap();
            let p = poly_from(rs.dim(), deg, &c);
            for i in 0..rs.dim() {
                prop_assert_eq!(ops.t(i, &p).unwrap(), p.derivative(i));
            }
            prop_assert_eq!(ops.l_via_t(&p).unwrap(), ops.laplacian(&p).unwrap());
        }
    }

    #[test]
    fn radial_reduction(f in prop::collection::vec(-6i64..6, 1..4), k1 in 0i64..4, k2 in 0i64..4) {
        let coeffs: Vec<QSqrt2> = f.iter().map(|&v| QSqrt2::int(v)).collect();
        for rs in systems(k1, k2) {
            prop_assert!(radial_generator_check(&rs, &coeffs).unwrap().holds());
        }
    }

    #[test]
    fn intertwining_and_harmonicity(c in prop::collection::vec(-5i64..5, 10), k1 in 0i64..4, k2 in 0i64..4) {
        for rs in systems(k1, k2).into_iter().take(4) {
            let d = rs.dim();
            let table = IntertwineTable::<QSqrt2>::build(&rs, 3).unwrap();
            let p = poly_from(d, 3, &c);
            let vp = table.apply_v(&p).unwrap();
            for i in 0..d {
                prop_assert_eq!(table.ops().t(i, &vp).unwrap(), table.apply_v(&p.derivative(i)).unwrap());
            }
            prop_assert_eq!(table.to_m_basis(&vp).unwrap(), p.clone());
            let nu: Vec<u16> = (0..d).map(|i| (c[i].unsigned_abs() % 2) as u16).collect();
            let fam = table.hermite(&nu).unwrap();
            prop_assert!(fam.harmonicity_defect(table.ops()).unwrap().is_zero());
        }
    }
}

#[test]
fn root_systems_are_closed_under_their_reflections() {
    for rs in systems(1, 3) {
        for a in 0..rs.num_roots() {
            for b in 0..rs.num_roots() {
                let img = rs.reflect_in(a, &rs.root_in::<QSqrt2>(b).unwrap()).unwrap();
                assert!(rs.find_root_exact(&img).is_some(), "{} {a} {b}", rs.id());
            }
        }
    }
}

#[test]
fn intertwining_matrices_are_invertible() {
    for rs in systems(2, 1).into_iter().take(4) {
        let table = IntertwineTable::<QSqrt2>::build(&rs, 4).unwrap();
        for n in 0..=4 {
            let v = table.v_matrix(n);
            let prod = matmul(&transpose(v), &transpose(table.v_inverse_matrix(n)));
            assert_eq!(prod, identity(v.len()));
        }
    }
}

#[test]
fn gamma_feeds_the_bessel_dimension() {
    for rs in systems(1, 3) {
        let g: BigRational = (0..rs.num_roots()).map(|a| rs.multiplicity(a).clone()).sum();
        assert_eq!(g, rs.gamma());
        assert_eq!(rs.bessel_dimension(), 2.0 * rs.gamma_f64() + rs.dim() as f64);
    }
}
