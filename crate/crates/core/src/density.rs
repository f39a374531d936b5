//! Heat kernel of the Dunkl process, its normalizing constant c_k, the
//! W-radial density and the Bessel law of |X_t|.

use num_traits::ToPrimitive;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::function::gamma::gamma;

use crate::dunkl::DunklOps;
use crate::error::{Error, Result};
use crate::field::{Coeff, QSqrt2};
use crate::intertwine::{norm, IntertwineTable};
use crate::poly::{Monomial, Polynomial};
use crate::rng;
use crate::rootsys::{apply_matrix, RootSystem, RootSystemKind};
use crate::special;
use crate::stats;

/// Largest relative error accepted for c_k inside a [`DensityContext`].
pub const CK_MAX_REL_ERR: f64 = 1e-6;
/// Kernel series truncation error relative to the bound e^{|x||y|}.
pub const KERNEL_REL_TOL: f64 = 1e-13;

/// ω_k(y) = Π_α |⟨α,y⟩|^{2k(α)}.
pub fn weight(rs: &RootSystem, y: &[f64]) -> f64 {
    (0..rs.num_roots())
        .map(|i| {
            let k = rs.k(i);
            if k == 0.0 {
                1.0
            } else {
                rs.pairing(i, y).abs().powf(2.0 * k)
            }
        })
        .product()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum CkMethod {
    /// Gamma-function formula; rank-one, products and k ≡ 0.
    ClosedForm,
    /// Exact Gaussian moments of the polynomial weight; integer multiplicities.
    GaussianMoments,
    /// Adaptive quadrature; d ≤ 2.
    Quadrature,
    /// Gaussian-sampled estimate of E[ω_k(Y)].
    MonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CkEstimate {
    pub value: f64,
    pub rel_err: f64,
    pub method: CkMethod,
}

fn all_integer_k(rs: &RootSystem) -> bool {
    rs.orbit_multiplicities().iter().all(|k| k.is_integer())
}

fn closed_form_applies(rs: &RootSystem) -> bool {
    rs.is_zero_multiplicity() || matches!(rs.kind(), RootSystemKind::Rank1 | RootSystemKind::ProductOfRank1)
}

/// Most accurate method available for `rs`.
pub fn default_ck_method(rs: &RootSystem) -> CkMethod {
    if closed_form_applies(rs) {
        CkMethod::ClosedForm
    } else if all_integer_k(rs) {
        CkMethod::GaussianMoments
    } else if rs.dim() <= 2 {
        CkMethod::Quadrature
    } else {
        CkMethod::MonteCarlo { samples: 1_000_000, seed: 0 }
    }
}

/// c_k = ∫ e^{−|x|²/2} ω_k(x) dx.
pub fn compute_ck(rs: &RootSystem, method: CkMethod) -> Result<CkEstimate> {
    let d = rs.dim() as f64;
    let (value, rel_err) = match method {
        CkMethod::ClosedForm => {
            if rs.is_zero_multiplicity() {
                ((2.0 * std::f64::consts::PI).powf(d / 2.0), 1e-15)
            } else if closed_form_applies(rs) {
                // One factor 2^{2k+½}Γ(k+½) per coordinate root.
                let v = (0..rs.num_roots())
                    .map(|i| {
                        let k = rs.k(i);
                        2f64.powf(2.0 * k + 0.5) * gamma(k + 0.5)
                    })
                    .product();
                (v, 1e-14)
            } else {
                return Err(Error::InvalidArgument(format!("no closed form for c_k on {}", rs.kind())));
            }
        }
        CkMethod::GaussianMoments => {
            if !all_integer_k(rs) {
                return Err(Error::InvalidArgument("Gaussian moments need integer multiplicities".into()));
            }
            let e = if rs.is_exact() { gaussian_moment::<QSqrt2>(rs)? } else { gaussian_moment::<f64>(rs)? };
            (e * (2.0 * std::f64::consts::PI).powf(d / 2.0), 1e-14)
        }
        CkMethod::Quadrature => quadrature_ck(rs)?,
        CkMethod::MonteCarlo { samples, seed } => {
            let blocks = 100usize;
            let per = samples.div_ceil(blocks);
            let dim = rs.dim();
            let sums: Vec<Vec<f64>> = rng::par_paths(blocks, rng::sub_seed(seed, "ck"), |_, r| {
                (0..per)
                    .map(|_| {
                        let y: Vec<f64> = (0..dim).map(|_| r.sample(StandardNormal)).collect();
                        weight(rs, &y)
                    })
                    .collect()
            });
            let xs: Vec<f64> = sums.into_iter().flatten().collect();
            let m = stats::mean_se(&xs).mean;
            let se = stats::jackknife_se(&xs, 50);
            (m * (2.0 * std::f64::consts::PI).powf(d / 2.0), se / m)
        }
    };
    Ok(CkEstimate { value, rel_err, method })
}

/// E[ω_k(Y)] for standard Gaussian Y with integer k (ω_k is then a polynomial).
fn gaussian_moment<C: Coeff>(rs: &RootSystem) -> Result<f64> {
    let d = rs.dim();
    let mut w = Polynomial::<C>::one(d);
    for i in 0..rs.num_roots() {
        let k = rs.multiplicity(i).to_integer().to_usize().unwrap_or(0);
        let form = Polynomial::linear(&rs.root_in::<C>(i)?, d);
        for _ in 0..2 * k {
            w = &w * &form;
        }
    }
    let mut sum = C::zero();
    for (m, c) in w.terms() {
        if let Some(moment) = gaussian_monomial_moment::<C>(m) {
            sum += c.clone() * moment;
        }
    }
    Ok(sum.to_f64())
}

/// Π (ν_i − 1)!! for all-even exponents, None otherwise.
fn gaussian_monomial_moment<C: Coeff>(m: &Monomial) -> Option<C> {
    let mut v: i64 = 1;
    for &e in m.exps() {
        if e % 2 == 1 {
            return None;
        }
        let mut j = e as i64 - 1;
        while j > 1 {
            v *= j;
            j -= 2;
        }
    }
    Some(C::from_i64(v))
}

fn quadrature_ck(rs: &RootSystem) -> Result<(f64, f64)> {
    let tol = 1e-13;
    match rs.dim() {
        1 => {
            let f = |y: f64| (-y * y / 2.0).exp() * weight(rs, &[y]);
            let (v, e) = special::integrate_breaks(f, &[-40.0, -8.0, -2.0, 0.0, 2.0, 8.0, 40.0], tol, tol)?;
            Ok((v, e / v))
        }
        2 => {
            // Polar coordinates: radial integral times angular integral,
            // with breakpoints at the directions of the root hyperplanes.
            let gamma = rs.gamma_f64();
            let radial = |r: f64| (-r * r / 2.0).exp() * r.powf(2.0 * gamma + 1.0);
            let (rv, re) = special::integrate_breaks(radial, &[0.0, 1.0, 4.0, 10.0, 40.0], tol, tol)?;
            let mut pts = vec![0.0, 2.0 * std::f64::consts::PI];
            for i in 0..rs.num_roots() {
                let a = rs.root(i);
                let th = (-a[0]).atan2(a[1]).rem_euclid(std::f64::consts::PI);
                pts.push(th);
                pts.push(th + std::f64::consts::PI);
            }
            pts.sort_by(f64::total_cmp);
            let angular = |th: f64| weight(rs, &[th.cos(), th.sin()]);
            let (av, ae) = special::integrate_breaks(angular, &pts, tol, tol)?;
            Ok((rv * av, re / rv + ae / av))
        }
        d => Err(Error::InvalidArgument(format!("quadrature for c_k supports d <= 2, got {d}"))),
    }
}

/// Kernel series backed by an intertwining table of either field.
pub trait KernelSeries: Send + Sync {
    fn kernel(&self, x: &[f64], y: &[f64], tol: f64) -> Result<f64>;
    fn n_max(&self) -> usize;
}

impl<C: Coeff> KernelSeries for IntertwineTable<C> {
    fn kernel(&self, x: &[f64], y: &[f64], tol: f64) -> Result<f64> {
        self.dunkl_kernel(x, y, tol)
    }
    fn n_max(&self) -> usize {
        IntertwineTable::n_max(self)
    }
}

/// Everything needed to evaluate p_t(x, y) for one root system.
pub struct DensityContext {
    rs: RootSystem,
    table: Box<dyn KernelSeries>,
    ck: CkEstimate,
    group: Result<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for DensityContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DensityContext").field("rs", &self.rs.id()).field("ck", &self.ck).finish()
    }
}

impl DensityContext {
    /// Builds the kernel table to degree `n_max` and c_k with the default method.
    pub fn new(rs: &RootSystem, n_max: usize) -> Result<Self> {
        Self::with_method(rs, n_max, default_ck_method(rs))
    }

    pub fn with_method(rs: &RootSystem, n_max: usize, method: CkMethod) -> Result<Self> {
        let ck = compute_ck(rs, method)?;
        if !(ck.value > 0.0) || !(ck.rel_err < CK_MAX_REL_ERR) {
            return Err(Error::InvalidArgument(format!(
                "c_k = {} has relative error {:e}, above {:e}",
                ck.value, ck.rel_err, CK_MAX_REL_ERR
            )));
        }
        let table: Box<dyn KernelSeries> = if rs.is_exact() {
            Box::new(IntertwineTable::<QSqrt2>::build(rs, n_max)?)
        } else {
            Box::new(IntertwineTable::<f64>::build(rs, n_max)?)
        };
        Ok(Self { rs: rs.clone(), table, ck, group: rs.group_elements() })
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    pub fn ck(&self) -> &CkEstimate {
        &self.ck
    }

    pub fn gamma(&self) -> f64 {
        self.rs.gamma_f64()
    }

    pub fn bessel_dimension(&self) -> f64 {
        self.rs.bessel_dimension()
    }

    pub fn kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let r = norm(x) * norm(y);
        self.table.kernel(x, y, KERNEL_REL_TOL * r.exp())
    }

    /// p_t(x, y) against Lebesgue measure dy.
    pub fn transition_density(&self, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!("time must be positive, got {t}")));
        }
        let d = self.rs.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len().min(y.len()) });
        }
        let st = t.sqrt();
        let xs: Vec<f64> = x.iter().map(|v| v / st).collect();
        let ys: Vec<f64> = y.iter().map(|v| v / st).collect();
        let dk = self.kernel(&xs, &ys)?;
        let sq = x.iter().chain(y).map(|v| v * v).sum::<f64>();
        let ln_pre = -sq / (2.0 * t) - (self.gamma() + d as f64 / 2.0) * t.ln() - self.ck.value.ln();
        Ok(ln_pre.exp() * dk * weight(&self.rs, y))
    }

    /// BES(2γ+d) transition density of |X| from r0 to r.
    pub fn radial_density(&self, r0: f64, r: f64, t: f64) -> f64 {
        special::bessel_density(self.bessel_dimension(), r0, r, t)
    }

    pub fn radial_cdf(&self, r0: f64, r: f64, t: f64) -> f64 {
        special::bessel_cdf(self.bessel_dimension(), r0, r, t)
    }

    /// Density of the W-radial part: Σ_{w∈W} p_t(x, w y).
    pub fn w_radial_density(&self, x: &[f64], y: &[f64], t: f64) -> Result<f64> {
        let group = self.group.as_ref().map_err(Clone::clone)?;
        let mut sum = 0.0;
        for g in group {
            sum += self.transition_density(x, &apply_matrix(g, y), t)?;
        }
        Ok(sum)
    }

    pub fn group_order(&self) -> Result<usize> {
        self.group.as_ref().map(|g| g.len()).map_err(Clone::clone)
    }

    /// ∫ p_t(x,y) g(y) dy for d = 1 by adaptive quadrature over |y| ≤ |x| + 12√t.
    pub fn integrate_rank1<G: Fn(f64) -> f64>(&self, x: f64, t: f64, g: G, tol: f64) -> Result<f64> {
        if self.rs.dim() != 1 {
            return Err(Error::DimensionMismatch { expected: 1, got: self.rs.dim() });
        }
        let l = x.abs() + 12.0 * t.sqrt();
        let failed = std::cell::Cell::new(None);
        let f = |y: f64| match self.transition_density(&[x], &[y], t) {
            Ok(p) => p * g(y),
            Err(e) => {
                failed.set(Some(e));
                0.0
            }
        };
        let (v, _) = special::integrate_breaks(f, &[-l, -l / 2.0, 0.0, l / 2.0, l], tol, 0.0)?;
        match failed.into_inner() {
            Some(e) => Err(e),
            None => Ok(v),
        }
    }
}

/// Both sides of the radial reduction of the generator for u(x) = F(|x|),
/// F(r) = Σ_j f_j r^{2j}.
#[derive(Clone, Debug)]
pub struct RadialCheck<C: Coeff> {
    /// ½L_k u computed by the Dunkl operators.
    pub lhs: Polynomial<C>,
    /// ½F″ + (d−1)/(2r) F′ + γ/r F′ written as a polynomial in x.
    pub rhs: Polynomial<C>,
}

impl<C: Coeff> RadialCheck<C> {
    pub fn holds(&self) -> bool {
        (&self.lhs - &self.rhs).is_zero()
    }
}

pub fn radial_generator_check<C: Coeff>(rs: &RootSystem, f_coeffs: &[C]) -> Result<RadialCheck<C>> {
    let d = rs.dim();
    let ops = DunklOps::<C>::new(rs)?;
    let r2 = (0..d).fold(Polynomial::<C>::zero(d), |acc, i| {
        let xi = Polynomial::var(d, i);
        &acc + &(&xi * &xi)
    });
    let mut powers = vec![Polynomial::<C>::one(d)];
    for j in 1..=f_coeffs.len() {
        powers.push(&powers[j - 1] * &r2);
    }
    let u = f_coeffs
        .iter()
        .enumerate()
        .fold(Polynomial::zero(d), |acc, (j, c)| &acc + &powers[j].scale(c));
    let lhs = ops.generator(&u)?;
    // For F = r^{2j}: ½F″ + ((d−1)/2 + γ) F′/r = j(2j − 2 + d + 2γ) r^{2j−2}.
    let gamma = C::from_rational(&rs.gamma());
    let mut rhs = Polynomial::zero(d);
    for (j, c) in f_coeffs.iter().enumerate().skip(1) {
        let jj = C::from_i64(j as i64);
        let factor = jj.clone() * (C::from_i64(2 * j as i64 - 2 + d as i64) + C::from_i64(2) * gamma.clone());
        rhs = &rhs + &powers[j - 1].scale(&(factor * c.clone()));
    }
    Ok(RadialCheck { lhs, rhs })
}

/// Rank-one heat kernel from the closed-form Bessel expression of D_k.
pub fn rank1_density_closed(k: f64, x: f64, y: f64, t: f64) -> f64 {
    let ck = 2f64.powf(2.0 * k + 0.5) * gamma(k + 0.5);
    let ln_pre = -(x * x + y * y) / (2.0 * t) - (k + 0.5) * t.ln() - ck.ln();
    let w = (std::f64::consts::SQRT_2 * y).abs().powf(2.0 * k);
    ln_pre.exp() * special::rank1_kernel(k, x * y / t) * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rat;

    fn rank1(k: f64) -> RootSystem {
        RootSystem::build_f64(RootSystemKind::Rank1, 1, &[k]).unwrap()
    }

    #[test]
    fn weights() {
        let rs = rank1(0.6);
        assert!((weight(&rs, &[1.5]) - (std::f64::consts::SQRT_2 * 1.5).powf(1.2)).abs() < 1e-14);
        let b2 = RootSystem::build_f64(RootSystemKind::B(2), 2, &[1.0, 0.5]).unwrap();
        let y = [0.3, -1.1];
        let scaled = weight(&b2, &[0.6, -2.2]);
        assert!((scaled / weight(&b2, &y) - 2f64.powf(2.0 * b2.gamma_f64())).abs() < 1e-10);
        let zero = RootSystem::build_f64(RootSystemKind::A(2), 3, &[0.0]).unwrap();
        assert_eq!(weight(&zero, &[1.0, 2.0, 3.0]), 1.0);
    }

    #[test]
    fn ck_methods_agree() {
        for &k in &[0.6, 1.0, 2.0] {
            let rs = rank1(k);
            let cf = compute_ck(&rs, CkMethod::ClosedForm).unwrap();
            let q = compute_ck(&rs, CkMethod::Quadrature).unwrap();
            assert!((cf.value / q.value - 1.0).abs() < 1e-10, "k={k}");
        }
        let b2 = RootSystem::build(RootSystemKind::B(2), 2, &[rat(1, 1), rat(1, 1)]).unwrap();
        let gm = compute_ck(&b2, CkMethod::GaussianMoments).unwrap();
        let q = compute_ck(&b2, CkMethod::Quadrature).unwrap();
        assert!((gm.value / q.value - 1.0).abs() < 1e-10);
        let mc = compute_ck(&b2, CkMethod::MonteCarlo { samples: 200_000, seed: 3 }).unwrap();
        assert!(((mc.value - gm.value) / gm.value).abs() < 5.0 * mc.rel_err + 1e-3);
        let zero = RootSystem::build_f64(RootSystemKind::ProductOfRank1, 3, &[0.0, 0.0, 0.0]).unwrap();
        let v = compute_ck(&zero, CkMethod::ClosedForm).unwrap().value;
        assert!((v - (2.0 * std::f64::consts::PI).powf(1.5)).abs() < 1e-12);
    }

    #[test]
    fn series_matches_closed_form_kernel() {
        let ctx = DensityContext::new(&rank1(0.6), 128).unwrap();
        for &(x, y, t) in &[(1.0, 0.5, 1.0), (-1.3, 2.0, 0.5), (2.0, 3.0, 0.4), (0.0, 1.0, 1.0)] {
            let a = ctx.transition_density(&[x], &[y], t).unwrap();
            let b = rank1_density_closed(0.6, x, y, t);
            assert!((a / b - 1.0).abs() < 1e-9, "({x},{y},{t}): {a} vs {b}");
        }
    }

    #[test]
    fn origin_and_classical_reductions() {
        let ctx = DensityContext::new(&rank1(1.0), 64).unwrap();
        let y = 0.8;
        let expect = (-y * y / 2.0f64).exp() * weight(ctx.root_system(), &[y]) / ctx.ck().value;
        assert!((ctx.transition_density(&[0.0], &[y], 1.0).unwrap() - expect).abs() < 1e-15);
        let zero = DensityContext::new(&RootSystem::build_f64(RootSystemKind::ProductOfRank1, 2, &[0.0, 0.0]).unwrap(), 40).unwrap();
        let (x, y, t) = ([0.3f64, -0.2], [1.0f64, 0.4], 0.7);
        let d2 = (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2);
        let heat = (-d2 / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t);
        assert!((zero.transition_density(&x, &y, t).unwrap() / heat - 1.0).abs() < 1e-10);
    }

    #[test]
    fn radial_check_small_cases() {
        let rs = RootSystem::build(RootSystemKind::B(2), 2, &[rat(1, 1), rat(2, 1)]).unwrap();
        for f in [vec![QSqrt2::int(3)], vec![QSqrt2::zero(), QSqrt2::one()], vec![QSqrt2::one(), QSqrt2::int(-2), QSqrt2::frac(1, 3)]] {
            assert!(radial_generator_check(&rs, &f).unwrap().holds());
        }
        // ½ L_k |x|² = d + 2γ
        let c = radial_generator_check(&rs, &[QSqrt2::zero(), QSqrt2::one()]).unwrap();
        assert_eq!(c.lhs, Polynomial::constant(2, QSqrt2::int(2 + 2 * 6)));
    }

    #[test]
    fn w_radial_rank1() {
        let ctx = DensityContext::new(&rank1(1.0), 64).unwrap();
        let a = ctx.w_radial_density(&[0.7], &[1.2], 0.8).unwrap();
        let b = ctx.transition_density(&[0.7], &[1.2], 0.8).unwrap() + ctx.transition_density(&[0.7], &[-1.2], 0.8).unwrap();
        assert!((a - b).abs() < 1e-15);
    }
}
