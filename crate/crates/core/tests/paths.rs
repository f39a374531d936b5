//! Monte Carlo properties of the simulators at moderate path counts.

use dunkl_core::density::DensityContext;
use dunkl_core::pathsim::*;
use dunkl_core::rootsys::{RootSystem, RootSystemKind};
use dunkl_core::stats::{ks_one_sample, ks_two_sample, mean_se};

const N: usize = 4000;
const N_SE: f64 = 4.0;
const KS_P: f64 = 0.01;

fn rank1(k: f64) -> RootSystem {
    RootSystem::build_f64(RootSystemKind::Rank1, 1, &[k]).unwrap()
}

fn finals(rs: &RootSystem, x0: &[f64], scheme: &Scheme, seed: u64) -> Vec<Vec<f64>> {
    simulate_many(rs, x0, scheme, seed, N, |p| p.final_state().to_vec()).unwrap().values
}

#[test]
fn brownian_limit_is_driftless() {
    let rs = rank1(0.0);
    let xs = finals(&rs, &[0.3], &Scheme::Euler(SimParams::new(1.0, 0.01)), 1);
    let m = mean_se(&xs.iter().map(|x| x[0] - 0.3).collect::<Vec<_>>());
    assert!(m.mean.abs() < 4.0 * (1.0 / N as f64).sqrt());
}

#[test]
fn martingale_and_radial_law() {
    for (rs, x0) in [
        (rank1(1.0), vec![1.0]),
        (RootSystem::build_f64(RootSystemKind::B(2), 2, &[1.0, 1.0]).unwrap(), vec![1.0, 0.4]),
    ] {
        let xs = finals(&rs, &x0, &Scheme::Euler(SimParams::new(1.0, 2e-3)), 2);
        for i in 0..rs.dim() {
            let m = mean_se(&xs.iter().map(|x| x[i]).collect::<Vec<_>>());
            assert!(m.within(x0[i], N_SE), "{} coordinate {i}: {m:?}", rs.id());
        }
        let ctx = DensityContext::new(&rs, 4).unwrap();
        let r0 = x0.iter().map(|v| v * v).sum::<f64>().sqrt();
        let radii: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| v * v).sum::<f64>().sqrt()).collect();
        let ks = ks_one_sample(&radii, |r| ctx.radial_cdf(r0, r, 1.0));
        assert!(ks.p_value > KS_P, "{}: {ks:?}", rs.id());
    }
}

#[test]
fn skew_product_matches_euler() {
    let rs = rank1(1.0);
    let a = finals(&rs, &[1.0], &Scheme::Euler(SimParams::new(1.0, 2e-3)), 3);
    let b = finals(&rs, &[1.0], &Scheme::SkewRank1(SkewParams::new(1.0, 2e-3)), 4);
    let ks = ks_two_sample(&a.iter().map(|x| x[0]).collect::<Vec<_>>(), &b.iter().map(|x| x[0]).collect::<Vec<_>>());
    assert!(ks.p_value > KS_P, "{ks:?}");
    let ctx = DensityContext::new(&rs, 4).unwrap();
    let ks = ks_one_sample(&b.iter().map(|x| x[0].abs()).collect::<Vec<_>>(), |r| ctx.radial_cdf(1.0, r, 1.0));
    assert!(ks.p_value > KS_P, "{ks:?}");
}

#[test]
fn brownian_scaling() {
    let rs = RootSystem::build_f64(RootSystemKind::ProductOfRank1, 2, &[1.0, 1.0]).unwrap();
    let c: f64 = 4.0;
    let a = finals(&rs, &[1.0, 0.5], &Scheme::Euler(SimParams::new(4.0, 4e-3)), 5);
    let b = finals(&rs, &[0.5, 0.25], &Scheme::Euler(SimParams::new(1.0, 1e-3)), 6);
    for i in 0..2 {
        let xa: Vec<f64> = a.iter().map(|x| x[i]).collect();
        let xb: Vec<f64> = b.iter().map(|x| x[i] * c.sqrt()).collect();
        let ks = ks_two_sample(&xa, &xb);
        assert!(ks.p_value > KS_P, "coordinate {i}: {ks:?}");
    }
}

#[test]
fn jumps_match_their_compensator() {
    let rs = rank1(1.0);
    let batch = simulate_many(&rs, &[1.0], &Scheme::Euler(SimParams::new(1.0, 2e-3)), 7, N, |p| {
        let dec = extract_martingales(&rs, p);
        (path_functionals(&rs, p), dec.bracket(0, 0))
    })
    .unwrap();
    let fs: Vec<PathFunctionals> = batch.values.iter().map(|v| v.0.clone()).collect();
    let rep = estimate_jump_functionals(&rs, &fs);
    let root = &rep.roots[0];
    assert!(root.count_minus_compensator.within(0.0, N_SE), "{root:?}");
    assert!(root.qv.within(1.0, N_SE), "{root:?}");
    // The pathwise bracket is the jump sum of squares.
    for v in &batch.values {
        assert!((v.0.qv[0] - v.1).abs() < 1e-9 * (1.0 + v.1));
    }
}

#[test]
fn zero_multiplicity_never_jumps() {
    let rs = RootSystem::build_f64(RootSystemKind::B(2), 2, &[0.0, 0.0]).unwrap();
    let b = simulate_many(&rs, &[1.0, 0.5], &Scheme::Euler(SimParams::new(1.0, 0.01)), 8, 200, |p| p.jumps.len()).unwrap();
    assert!(b.values.iter().all(|&n| n == 0));
}

#[test]
fn residuals_shrink_under_refinement() {
    let rs = rank1(1.0);
    let p = SimParams::new(1.0, 0.01);
    let rms = |p: &SimParams| {
        let b = simulate_many(&rs, &[1.0], &Scheme::Euler(p.clone()), 9, 1000, |path| {
            extract_martingales(&rs, path).reconstruction_residual().unwrap()
        })
        .unwrap();
        mean_se(&b.values).mean
    };
    let (coarse, fine) = (rms(&p), rms(&p.halved()));
    assert!(coarse / fine >= std::f64::consts::SQRT_2, "{coarse} {fine}");
}
