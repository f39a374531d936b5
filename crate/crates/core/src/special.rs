//! Modified Bessel functions, adaptive Gauss–Kronrod quadrature and the
//! Bessel-process transition law.

use statrs::function::gamma::{gamma_lr, ln_gamma};

use crate::error::{Error, Result};

/// Argument at which I_ν switches from the power series to the asymptotic expansion.
pub const BESSEL_SWITCH: f64 = 20.0;

/// ln I_ν(x) for x > 0 and ν > −1.
pub fn ln_bessel_i(nu: f64, x: f64) -> f64 {
    debug_assert!(nu > -1.0);
    if x == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if x < BESSEL_SWITCH {
        // Σ_m (x/2)^{2m+ν} / (m! Γ(m+ν+1)), factored as term0 · Σ ratios.
        let ln_t0 = nu * (x / 2.0).ln() - ln_gamma(nu + 1.0);
        let q = x * x / 4.0;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        let mut m = 0.0;
        loop {
            term *= q / ((m + 1.0) * (m + nu + 1.0));
            sum += term;
            m += 1.0;
            if term < 1e-17 * sum {
                break;
            }
        }
        ln_t0 + sum.ln()
    } else {
        // e^x/√(2πx) Σ_k (−1)^k Π_{j≤k}(4ν² − (2j−1)²) / (k! (8x)^k)
        let mu = 4.0 * nu * nu;
        let (mut term, mut sum) = (1.0f64, 1.0f64);
        let mut prev = f64::INFINITY;
        for k in 1..60 {
            let j = 2.0 * k as f64 - 1.0;
            term *= -(mu - j * j) / (k as f64 * 8.0 * x);
            if term.abs() >= prev {
                break;
            }
            sum += term;
            prev = term.abs();
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        x - 0.5 * (2.0 * std::f64::consts::PI * x).ln() + sum.ln()
    }
}

/// I_ν(x).
pub fn bessel_i(nu: f64, x: f64) -> f64 {
    ln_bessel_i(nu, x).exp()
}

/// Dunkl kernel of the rank-one system with multiplicity k at the product z = xy:
/// Γ(k+½)(|z|/2)^{½−k} [I_{k−½}(|z|) + sgn(z) I_{k+½}(|z|)].
pub fn rank1_kernel(k: f64, z: f64) -> f64 {
    if z == 0.0 {
        return 1.0;
    }
    let a = z.abs();
    let pre = ln_gamma(k + 0.5) + (0.5 - k) * (a / 2.0).ln();
    let i0 = (pre + ln_bessel_i(k - 0.5, a)).exp();
    let i1 = (pre + ln_bessel_i(k + 0.5, a)).exp();
    i0 + z.signum() * i1
}

/// Transition density of BES(N) from r0 to r over time t (against dr).
pub fn bessel_density(dim: f64, r0: f64, r: f64, t: f64) -> f64 {
    if r <= 0.0 {
        return if dim == 1.0 { 2.0 * gauss(r0, t) } else { 0.0 };
    }
    let nu = dim / 2.0 - 1.0;
    if r0 == 0.0 {
        let ln = std::f64::consts::LN_2 + (dim - 1.0) * r.ln() - (dim / 2.0) * (2.0 * t).ln() - ln_gamma(dim / 2.0) - r * r / (2.0 * t);
        return ln.exp();
    }
    let z = r * r0 / t;
    let ln = (r / t).ln() + nu * (r / r0).ln() - (r0 * r0 + r * r) / (2.0 * t) + ln_bessel_i(nu, z);
    ln.exp()
}

fn gauss(x: f64, t: f64) -> f64 {
    (-(x * x) / (2.0 * t)).exp() / (2.0 * std::f64::consts::PI * t).sqrt()
}

/// P(R_t ≤ r) for BES(N) started at r0: R_t²/t is noncentral χ²_N with
/// noncentrality r0²/t, a Poisson(λ/2) mixture of central χ² laws.
pub fn bessel_cdf(dim: f64, r0: f64, r: f64, t: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let x = r * r / t;
    let half_lambda = r0 * r0 / (2.0 * t);
    if half_lambda == 0.0 {
        return gamma_lr(dim / 2.0, x / 2.0);
    }
    let jmax = (half_lambda + 12.0 * (half_lambda + 1.0).sqrt() + 40.0) as usize;
    let mut sum = 0.0;
    for j in 0..=jmax {
        let jf = j as f64;
        let lw = -half_lambda + jf * half_lambda.ln() - ln_gamma(jf + 1.0);
        sum += lw.exp() * gamma_lr(dim / 2.0 + jf, x / 2.0);
    }
    sum.min(1.0)
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One 15-point Kronrod panel: (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut resk = fc * WGK[7];
    let mut resg = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        resk += WGK[j] * s;
        if j % 2 == 1 {
            resg += WG[j / 2] * s;
        }
    }
    (resk * h, ((resk - resg) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) integral of `f` over [a, b].
///
/// Splits the worst panel until the summed error estimate is below
/// `max(abs_tol, rel_tol·|I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    integrate_breaks(f, &[a, b], abs_tol, rel_tol)
}

/// As [`integrate`], starting from the panels delimited by `points` (sorted).
pub fn integrate_breaks<F: Fn(f64) -> f64>(f: F, points: &[f64], abs_tol: f64, rel_tol: f64) -> Result<(f64, f64)> {
    let mut panels: Vec<(f64, f64, f64, f64)> = points
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| {
            let (v, e) = gk15(&f, w[0], w[1]);
            (w[0], w[1], v, e)
        })
        .collect();
    for _ in 0..5000 {
        let total: f64 = panels.iter().map(|p| p.2).sum();
        let err: f64 = panels.iter().map(|p| p.3).sum();
        if !total.is_finite() {
            return Err(Error::Quadrature("non-finite integrand".into()));
        }
        if err <= abs_tol.max(rel_tol * total.abs()) {
            return Ok((total, err));
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("at least one panel");
        let (a, b, _, _) = panels.swap_remove(i);
        let m = 0.5 * (a + b);
        let (v1, e1) = gk15(&f, a, m);
        let (v2, e2) = gk15(&f, m, b);
        panels.push((a, m, v1, e1));
        panels.push((m, b, v2, e2));
    }
    let err: f64 = panels.iter().map(|p| p.3).sum();
    Err(Error::Quadrature(format!("error estimate {err:e} after 5000 subdivisions")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_reference_values() {
        // Half-integer orders have closed forms.
        for &x in &[0.3, 2.0, 19.5, 20.5, 35.0] {
            let i_half = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.sinh();
            let i_mhalf = (2.0 / (std::f64::consts::PI * x)).sqrt() * x.cosh();
            assert!((bessel_i(0.5, x) / i_half - 1.0).abs() < 1e-10, "x={x}");
            assert!((bessel_i(-0.5, x) / i_mhalf - 1.0).abs() < 1e-10, "x={x}");
        }
        // I_0(1) and I_1(25)
        assert!((bessel_i(0.0, 1.0) - 1.266_065_877_752_008_4).abs() < 1e-13);
        assert!((bessel_i(1.0, 25.0) / 5_657_865_129.878_701 - 1.0).abs() < 1e-10);
    }

    #[test]
    fn switch_is_continuous() {
        for &nu in &[0.0, 0.6, 1.5, 4.0] {
            let lo = ln_bessel_i(nu, BESSEL_SWITCH - 1e-12);
            let hi = ln_bessel_i(nu, BESSEL_SWITCH + 1e-12);
            assert!((lo - hi).abs() < 1e-10 * lo.abs(), "nu={nu}");
        }
    }

    #[test]
    fn rank1_kernel_k_zero_is_exponential() {
        for &z in &[-3.0, -0.5, 0.0, 0.7, 4.0] {
            assert!((rank1_kernel(0.0, z) / f64::exp(z) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn quadrature_basics() {
        let (v, _) = integrate(|x| x.sin(), 0.0, std::f64::consts::PI, 1e-13, 1e-13).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
        let (v, _) = integrate(|x: f64| x.powf(1.2) * (-x * x / 2.0).exp(), 0.0, 40.0, 1e-14, 1e-13).unwrap();
        let exact = 2f64.powf(0.1) * statrs::function::gamma::gamma(1.1);
        assert!((v - exact).abs() < 1e-11);
    }

    #[test]
    fn bessel_law_is_normalized() {
        for &(dim, r0, t) in &[(3.0, 0.0, 1.0), (2.2, 1.0, 1.0), (5.0, 0.5, 0.3)] {
            let (v, _) = integrate(|r| bessel_density(dim, r0, r, t), 0.0, 20.0, 1e-12, 1e-12).unwrap();
            assert!((v - 1.0).abs() < 1e-9, "dim={dim}");
            let (half, _) = integrate(|r| bessel_density(dim, r0, r, t), 0.0, 1.1, 1e-13, 1e-13).unwrap();
            assert!((half - bessel_cdf(dim, r0, 1.1, t)).abs() < 1e-9);
        }
    }
}
