//! Rank-one skew product: |X| is a Bessel process of dimension 1+2k and the
//! sign flips at the events of a Poisson process of rate k/2 run on the clock
//! A_t = ∫₀ᵗ ds/X_s².

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Path;
use crate::error::{Error, Result};
use crate::rng::{path_rng, sub_seed, PathRng};
use crate::rootsys::{RootSystem, RootSystemKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkewParams {
    pub t_end: f64,
    pub dt: f64,
    /// Radial steps are halved until h ≤ `step_frac`·X², down to dt/2^max_level.
    pub step_frac: f64,
    pub max_level: u32,
}

impl SkewParams {
    pub fn new(t_end: f64, dt: f64) -> Self {
        Self { t_end, dt, step_frac: 0.05, max_level: 16 }
    }
}

/// One exact transition of the squared Bessel process of dimension `delta` from `z0` over `h`.
pub fn sample_besq<R: Rng + ?Sized>(delta: f64, z0: f64, h: f64, rng: &mut R) -> f64 {
    if delta >= 1.0 {
        // BESQ^δ = BESQ^1 ⊕ BESQ^{δ−1}; the first is the square of a Brownian motion.
        let g: f64 = StandardNormal.sample(rng);
        let w = z0.sqrt() + h.sqrt() * g;
        let rest = if delta > 1.0 {
            2.0 * h * Gamma::new((delta - 1.0) / 2.0, 1.0).expect("positive shape").sample(rng)
        } else {
            0.0
        };
        w * w + rest
    } else {
        // Poisson mixture of central χ² laws.
        let lam = z0 / (2.0 * h);
        let n = if lam > 0.0 { Poisson::new(lam).expect("positive rate").sample(rng) } else { 0.0 };
        2.0 * h * Gamma::new(delta / 2.0 + n, 1.0).expect("positive shape").sample(rng)
    }
}

/// Simulates path `index` of the skew-product scheme.
pub fn simulate_skew_rank1(rs: &RootSystem, x0: f64, params: &SkewParams, seed: u64, index: u64) -> Result<Path> {
    if rs.kind() != RootSystemKind::Rank1 {
        return Err(Error::InvalidArgument("the skew product needs the rank-one system".into()));
    }
    let k = rs.k(0);
    if !(k > 0.0) {
        return Err(Error::InvalidArgument("the skew product needs k > 0".into()));
    }
    if x0 == 0.0 {
        return Err(Error::InvalidArgument("starting point lies on the wall".into()));
    }
    let sp = super::SimParams::new(params.t_end, params.dt);
    let m = sp.coarse_steps()?;
    let max_level = params.max_level.min(super::generic::MAX_LEVEL);
    let mut rng: PathRng = path_rng(sub_seed(seed, "skew"), index);
    let delta = 1.0 + 2.0 * k;
    let tick_scale = params.dt / (1u64 << max_level) as f64;
    let ticks_per_step = 1u64 << max_level;
    let mut path = Path::new(&[x0]);
    let mut z = x0 * x0;
    let mut sign = x0.signum();
    let mut tick = 0u64;
    let end = m as u64 * ticks_per_step;
    while tick < end {
        // Largest dyadic step allowed by the radial margin and by alignment.
        let mut step = ticks_per_step;
        while step > 1 && (step as f64 * tick_scale) > params.step_frac * z {
            step /= 2;
        }
        while tick % step != 0 {
            step /= 2;
        }
        let h = step as f64 * tick_scale;
        let z1 = sample_besq(delta, z, h, &mut rng);
        let t0 = tick as f64 * tick_scale;
        let da = 0.5 * h * (1.0 / z + 1.0 / z1);
        let n_flips = if da.is_finite() && da > 0.0 {
            Poisson::new(0.5 * k * da).map(|p| p.sample(&mut rng) as usize).unwrap_or(0)
        } else {
            0
        };
        let mut flips: Vec<f64> = (0..n_flips).map(|_| rng.random::<f64>()).collect();
        flips.sort_by(f64::total_cmp);
        for u in flips {
            if u == 0.0 {
                continue;
            }
            let r = (z + u * (z1 - z)).sqrt();
            let pre = sign * r;
            sign = -sign;
            path.push(t0 + u * h, &[sign * r], None, Some((0, vec![pre])));
            path.stats.substeps += 1;
        }
        tick += step;
        z = z1;
        path.push(tick as f64 * tick_scale, &[sign * z.sqrt()], None, None);
        path.stats.substeps += 1;
        let level = (ticks_per_step / step).trailing_zeros();
        path.stats.deepest_level = path.stats.deepest_level.max(level);
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_cdf;
    use crate::stats::ks_one_sample;

    #[test]
    fn besq_matches_bessel_law() {
        let mut rng = path_rng(11, 0);
        for &(delta, z0, h) in &[(3.0, 1.0, 0.5), (2.2, 0.3, 1.0), (0.6, 2.0, 0.7)] {
            let xs: Vec<f64> = (0..20_000).map(|_| sample_besq(delta, z0, h, &mut rng).sqrt()).collect();
            let ks = ks_one_sample(&xs, |r| bessel_cdf(delta, z0.sqrt(), r, h));
            assert!(ks.p_value > 0.001, "delta={delta}: p={}", ks.p_value);
        }
    }

    #[test]
    fn rejects_zero_multiplicity() {
        let rs = RootSystem::build_f64(RootSystemKind::Rank1, 1, &[0.0]).unwrap();
        assert!(simulate_skew_rank1(&rs, 1.0, &SkewParams::new(1.0, 0.01), 1, 0).is_err());
    }

    #[test]
    fn jumps_are_sign_flips_on_the_grid() {
        let rs = RootSystem::build_f64(RootSystemKind::Rank1, 1, &[0.6]).unwrap();
        let p = simulate_skew_rank1(&rs, 0.3, &SkewParams::new(1.0, 0.01), 3, 0).unwrap();
        assert!(p.grid_index(1.0).is_some() && p.grid_index(0.5).is_some());
        for j in &p.jumps {
            assert_eq!(p.state(j.step + 1)[0], -j.pre[0]);
            assert_eq!(p.times[j.step + 1], j.time);
        }
        assert!(p.times.windows(2).all(|w| w[1] >= w[0]));
    }
}
