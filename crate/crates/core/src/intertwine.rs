//! The intertwining operator V_k on polynomials, generalized monomials
//! m_ν = V_k(x^ν), the Dunkl kernel series and the space–time Hermite family.
//!
//! V_k is built degree by degree from T_i(m_ν) = ν_i m_{ν−e_i}: the map
//! (T_1, …, T_d): 𝓟_n → 𝓟_{n−1}^d is injective, so each m_ν is the unique
//! solution of an overdetermined linear system.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;

use crate::dunkl::DunklOps;
use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::linalg::{self, Matrix};
use crate::poly::{monomials_of_degree, CompiledPoly, Monomial, Polynomial};
use crate::rootsys::RootSystem;

/// Default table degree.
pub const DEFAULT_N_MAX: usize = 8;

#[derive(Clone, Debug)]
pub struct IntertwineTable<C: Coeff> {
    rs: RootSystem,
    ops: DunklOps<C>,
    n_max: usize,
    /// Monomial basis of 𝓟_n, descending graded-lex.
    basis: Vec<Vec<Monomial>>,
    index: Vec<HashMap<Monomial, usize>>,
    /// `v[n][j][i]`: coefficient of basis[n][i] in m_{basis[n][j]}.
    v: Vec<Matrix<C>>,
    /// `v_inv[n][j][i]`: coefficient of m_{basis[n][i]} in x^{basis[n][j]}.
    v_inv: Vec<Matrix<C>>,
    m: Vec<Vec<Polynomial<C>>>,
    compiled: Vec<Vec<CompiledPoly>>,
}

impl<C: Coeff> IntertwineTable<C> {
    pub fn build(rs: &RootSystem, n_max: usize) -> Result<Self> {
        let ops = DunklOps::<C>::new(rs)?;
        let d = rs.dim();
        let basis: Vec<Vec<Monomial>> = (0..=n_max).map(|n| monomials_of_degree(d, n)).collect();
        let index: Vec<HashMap<Monomial, usize>> = basis
            .iter()
            .map(|b| b.iter().cloned().enumerate().map(|(i, m)| (m, i)).collect())
            .collect();
        let mut v: Vec<Matrix<C>> = vec![vec![vec![C::one()]]];
        let mut m: Vec<Vec<Polynomial<C>>> = vec![vec![Polynomial::one(d)]];

        for n in 1..=n_max {
            let cols = basis[n].len();
            let lower = &basis[n - 1];
            let rows = d * lower.len();
            // A[(i, μ'), μ] = [x^μ'] T_i(x^μ)
            let mut a: Matrix<C> = vec![vec![C::zero(); cols]; rows];
            for (c, mu) in basis[n].iter().enumerate() {
                let xm = Polynomial::monomial(mu.clone(), C::one());
                for i in 0..d {
                    let ti = ops.t(i, &xm)?;
                    for (mon, coef) in ti.terms() {
                        let r = index[n - 1][mon];
                        a[i * lower.len() + r][c] = coef.clone();
                    }
                }
            }
            // B[(i, μ'), ν] = ν_i [x^μ'] m_{ν−e_i}
            let mut b: Matrix<C> = vec![vec![C::zero(); cols]; rows];
            for (c, nu) in basis[n].iter().enumerate() {
                for i in 0..d {
                    let e = nu.0[i];
                    if e == 0 {
                        continue;
                    }
                    let mut lower_nu = nu.clone();
                    lower_nu.0[i] -= 1;
                    let src = &m[n - 1][index[n - 1][&lower_nu]];
                    for (mon, coef) in src.terms() {
                        let r = index[n - 1][mon];
                        b[i * lower.len() + r][c] = coef.clone() * C::from_i64(e as i64);
                    }
                }
            }
            let sol = linalg::solve(&a, &b)?;
            // sol[μ][ν] → v[n][ν][μ]
            let vn = linalg::transpose(&sol);
            let polys = vn
                .iter()
                .map(|col| Polynomial::from_terms(d, basis[n].iter().cloned().zip(col.iter().cloned())))
                .collect();
            v.push(vn);
            m.push(polys);
        }

        let mut v_inv = Vec::with_capacity(n_max + 1);
        for vn in &v {
            // Rows of v are images m_ν; the change of basis matrix P (columns m_ν)
            // is its transpose. x^ν = Σ_μ (P⁻¹)[μ][ν] m_μ.
            let p = linalg::transpose(vn);
            let pinv = linalg::inverse(&p)?;
            v_inv.push(linalg::transpose(&pinv));
        }
        let compiled = m.iter().map(|deg| deg.iter().map(CompiledPoly::new).collect()).collect();
        Ok(Self { rs: rs.clone(), ops, n_max, basis, index, v, v_inv, m, compiled })
    }

    pub fn root_system(&self) -> &RootSystem {
        &self.rs
    }

    pub fn ops(&self) -> &DunklOps<C> {
        &self.ops
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.rs.dim()
    }

    pub fn basis(&self, n: usize) -> &[Monomial] {
        &self.basis[n]
    }

    /// Degree-n matrix of V_k: row j holds the monomial coefficients of m_{basis[n][j]}.
    pub fn v_matrix(&self, n: usize) -> &Matrix<C> {
        &self.v[n]
    }

    pub fn v_inverse_matrix(&self, n: usize) -> &Matrix<C> {
        &self.v_inv[n]
    }

    fn locate(&self, nu: &[u16]) -> Result<(usize, usize)> {
        if nu.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: nu.len() });
        }
        let n: usize = nu.iter().map(|&e| e as usize).sum();
        if n > self.n_max {
            return Err(Error::DegreeOverflow { needed: n, max: self.n_max });
        }
        Ok((n, self.index[n][&Monomial::from_exps(nu)]))
    }

    /// The generalized monomial m_ν in the d space variables.
    pub fn m(&self, nu: &[u16]) -> Result<&Polynomial<C>> {
        let (n, j) = self.locate(nu)?;
        Ok(&self.m[n][j])
    }

    pub fn m_f64(&self, nu: &[u16], x: &[f64]) -> Result<f64> {
        let (n, j) = self.locate(nu)?;
        Ok(self.compiled[n][j].eval(x))
    }

    fn space_degree(&self, p: &Polynomial<C>) -> Result<usize> {
        if p.nvars() < self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: p.nvars() });
        }
        let n = p.degree_in(0..self.dim());
        if n > self.n_max {
            return Err(Error::DegreeOverflow { needed: n, max: self.n_max });
        }
        Ok(n)
    }

    /// Splits a term's monomial into its space part and parameter part.
    fn split(&self, mon: &Monomial) -> (Monomial, Monomial) {
        let d = self.dim();
        let space = Monomial::from_exps(&mon.0[..d]);
        let mut param = mon.clone();
        for e in param.0[..d].iter_mut() {
            *e = 0;
        }
        (space, param)
    }

    /// V_k applied in the space variables; parameter variables ride along.
    pub fn apply_v(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.space_degree(p)?;
        let nv = p.nvars();
        let map: Vec<usize> = (0..self.dim()).collect();
        let mut out = Polynomial::zero(nv);
        for (mon, c) in p.terms() {
            let (space, param) = self.split(mon);
            let n = space.degree();
            let mnu = &self.m[n][self.index[n][&space]];
            out = &out + &mnu.remap(nv, &map).mul_monomial(&param, c);
        }
        Ok(out)
    }

    /// Coordinates of `p` in the basis {m_ν · params^β}: the returned
    /// polynomial's monomial x^ν t^β stands for m_ν(x) t^β. Equivalently V_k⁻¹p.
    pub fn to_m_basis(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.space_degree(p)?;
        let nv = p.nvars();
        let d = self.dim();
        let mut out = Polynomial::zero(nv);
        for (mon, c) in p.terms() {
            let (space, param) = self.split(mon);
            let n = space.degree();
            let row = &self.v_inv[n][self.index[n][&space]];
            for (i, coef) in row.iter().enumerate() {
                if coef.is_zero() {
                    continue;
                }
                let mut target = param.clone();
                for (t, &e) in target.0[..d].iter_mut().zip(self.basis[n][i].0.iter()) {
                    *t = e;
                }
                out.add_term(target, c.clone() * coef.clone());
            }
        }
        out.normalize();
        Ok(out)
    }

    /// Smallest truncation degree whose tail bound Σ_{j>n} r^j/j! is below `tol`.
    pub fn kernel_degree(r: f64, tol: f64) -> usize {
        // Tail after n is at most the next term times 1/(1 − r/(n+2)) once n+2 > r.
        let mut term = 1.0f64;
        let mut n = 0usize;
        loop {
            let next = term * r / (n as f64 + 1.0);
            let ratio = r / (n as f64 + 2.0);
            if ratio < 1.0 && next / (1.0 - ratio) < tol {
                return n;
            }
            term = next;
            n += 1;
            if n > 100_000 {
                return n;
            }
        }
    }

    /// Truncated series Σ_{|ν|≤n} m_ν(x) y^ν/ν!, accurate to `tol`.
    pub fn dunkl_kernel(&self, x: &[f64], y: &[f64], tol: f64) -> Result<f64> {
        let d = self.dim();
        if x.len() != d || y.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: x.len().min(y.len()) });
        }
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("kernel tolerance must be positive".into()));
        }
        let r = norm(x) * norm(y);
        let n = Self::kernel_degree(r, tol);
        if n > self.n_max {
            return Err(Error::DegreeOverflow { needed: n, max: self.n_max });
        }
        // y^ν/ν! from per-coordinate tables y_i^e/e!.
        let ypow: Vec<Vec<f64>> = y
            .iter()
            .map(|&yi| {
                let mut v = vec![1.0; n + 1];
                for e in 1..=n {
                    v[e] = v[e - 1] * yi / e as f64;
                }
                v
            })
            .collect();
        let mut sum = 0.0;
        for deg in 0..=n {
            for (j, nu) in self.basis[deg].iter().enumerate() {
                let w: f64 = nu.0.iter().enumerate().map(|(i, &e)| ypow[i][e as usize]).product();
                if w != 0.0 {
                    sum += self.compiled[deg][j].eval(x) * w;
                }
            }
        }
        Ok(sum)
    }

    /// Space–time Hermite family for the multi-index ν.
    pub fn hermite(&self, nu: &[u16]) -> Result<HermiteFamily<C>> {
        HermiteFamily::build(self, nu)
    }
}

pub fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// 𝓗_n(x,t) = Σ_j n!/(j!(n−2j)!) (−t/2)^j x^{n−2j}, as a polynomial in (x, t).
///
/// It is the unique lift of x^n with (∂_t + ½∂²_x)𝓗_n = 0, so that
/// 𝓗_n(B_s, s−t) = E(B_t^n | 𝓕_s).
pub fn classical_hermite<C: Coeff>(n: usize) -> Polynomial<C> {
    let mut p = Polynomial::zero(2);
    let fact = |m: usize| (1..=m).fold(BigInt::from(1), |a, b| a * BigInt::from(b));
    for j in 0..=n / 2 {
        let num = fact(n);
        let den = fact(j) * fact(n - 2 * j) * BigInt::from(2).pow(j as u32);
        let mut c = BigRational::new(num, den);
        if j % 2 == 1 {
            c = -c;
        }
        p.add_term(Monomial::from_exps(&[(n - 2 * j) as u16, j as u16]), C::from_rational(&c));
    }
    p
}

/// Q_ν = V_k 𝓗_ν and the integrands of its martingale representation.
///
/// Variables are (x_1, …, x_d, t).
#[derive(Clone, Debug)]
pub struct HermiteFamily<C: Coeff> {
    pub nu: Vec<u16>,
    pub q: Polynomial<C>,
    /// ∂Q/∂x_i.
    pub q_c: Vec<Polynomial<C>>,
    /// (Q − Q∘σ_α)/⟨α,x⟩ per positive root.
    pub divided: Vec<Polynomial<C>>,
    /// √k(α)·(Q − Q∘σ_α)/⟨α,x⟩, when √k(α) lies in the field.
    pub q_delta: Option<Vec<Polynomial<C>>>,
}

impl<C: Coeff> HermiteFamily<C> {
    pub fn build(table: &IntertwineTable<C>, nu: &[u16]) -> Result<Self> {
        let d = table.dim();
        if nu.len() != d {
            return Err(Error::DimensionMismatch { expected: d, got: nu.len() });
        }
        let total: usize = nu.iter().map(|&e| e as usize).sum();
        if total > table.n_max() {
            return Err(Error::DegreeOverflow { needed: total, max: table.n_max() });
        }
        let nv = d + 1;
        let mut h = Polynomial::one(nv);
        for (i, &e) in nu.iter().enumerate() {
            let hi = classical_hermite::<C>(e as usize).remap(nv, &[i, d]);
            h = &h * &hi;
        }
        let q = table.apply_v(&h)?;
        let q_c = (0..d).map(|i| q.derivative(i)).collect();
        let ops = table.ops();
        let divided = (0..ops.num_roots())
            .map(|a| ops.divided_difference(a, &q))
            .collect::<Result<Vec<_>>>()?;
        let rs = table.root_system();
        let sqrt_k: Option<Vec<C>> = (0..rs.num_roots()).map(|a| C::sqrt_rational(rs.multiplicity(a))).collect();
        let q_delta = sqrt_k.map(|s| divided.iter().zip(s).map(|(p, sk)| p.scale(&sk)).collect());
        Ok(Self { nu: nu.to_vec(), q, q_c, divided, q_delta })
    }

    pub fn q_delta(&self) -> Result<&[Polynomial<C>]> {
        self.q_delta
            .as_deref()
            .ok_or_else(|| Error::NotExact("square root of a multiplicity".into()))
    }

    /// (∂_t + ½L_k) Q, which vanishes identically.
    pub fn harmonicity_defect(&self, ops: &DunklOps<C>) -> Result<Polynomial<C>> {
        let t = ops.dim();
        Ok(&self.q.derivative(t) + &ops.generator(&self.q)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, QSqrt2};
    use crate::rootsys::RootSystemKind;

    fn rank1_table(k: i64, n: usize) -> IntertwineTable<QSqrt2> {
        let rs = RootSystem::build(RootSystemKind::Rank1, 1, &[rat(k, 1)]).unwrap();
        IntertwineTable::build(&rs, n).unwrap()
    }

    #[test]
    fn rank1_generalized_monomials() {
        let t = rank1_table(1, 4);
        assert_eq!(t.m(&[0]).unwrap(), &Polynomial::one(1));
        assert_eq!(t.m(&[1]).unwrap(), &Polynomial::var(1, 0).scale(&QSqrt2::frac(1, 3)));
        assert_eq!(t.m(&[1]).unwrap().canonical(1), "(1/3+0*sqrt2)*x1");
        let x2 = &Polynomial::var(1, 0) * &Polynomial::var(1, 0);
        assert_eq!(t.m(&[2]).unwrap(), &x2.scale(&QSqrt2::frac(1, 3)));
        assert!((t.m_f64(&[1], &[3.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(t.m(&[5]), Err(Error::DegreeOverflow { .. })));
    }

    #[test]
    fn classical_hermite_low_orders() {
        let h2 = classical_hermite::<QSqrt2>(2);
        assert_eq!(h2.canonical(1), "(1+0*sqrt2)*x1^2 + (-1+0*sqrt2)*t");
        let h3 = classical_hermite::<QSqrt2>(3);
        assert_eq!(h3.canonical(1), "(1+0*sqrt2)*x1^3 + (-3+0*sqrt2)*x1*t");
        assert_eq!(classical_hermite::<QSqrt2>(0), Polynomial::one(2));
    }

    #[test]
    fn rank1_hermite_family() {
        let t = rank1_table(1, 4);
        let f = t.hermite(&[1]).unwrap();
        assert_eq!(f.q, Polynomial::var(2, 0).scale(&QSqrt2::frac(1, 3)));
        assert_eq!(f.q_c[0], Polynomial::constant(2, QSqrt2::frac(1, 3)));
        // √(2k)/(1+2k) at k = 1
        assert_eq!(f.q_delta().unwrap()[0], Polynomial::constant(2, QSqrt2::sqrt2_frac(1, 3)));
        let f2 = t.hermite(&[2]).unwrap();
        assert_eq!(f2.q.canonical(1), "(1/3+0*sqrt2)*x1^2 + (-1+0*sqrt2)*t");
        assert!(f2.q_delta().unwrap()[0].is_zero());
        assert!(f2.harmonicity_defect(t.ops()).unwrap().is_zero());
    }

    #[test]
    fn kernel_at_origin_and_k_zero() {
        let t = rank1_table(1, 4);
        assert_eq!(t.dunkl_kernel(&[0.0], &[2.0], 1e-12).unwrap(), 1.0);
        let rs = RootSystem::build(RootSystemKind::ProductOfRank1, 2, &[rat(0, 1), rat(0, 1)]).unwrap();
        let t0 = IntertwineTable::<QSqrt2>::build(&rs, 30).unwrap();
        let (x, y) = ([0.3, -0.4], [0.5, 0.7]);
        let exact = (0.3f64 * 0.5 - 0.4 * 0.7).exp();
        assert!((t0.dunkl_kernel(&x, &y, 1e-12).unwrap() - exact).abs() < 1e-12);
    }

    #[test]
    fn m_basis_roundtrip() {
        let rs = RootSystem::build(RootSystemKind::B(2), 2, &[rat(1, 1), rat(2, 1)]).unwrap();
        let t = IntertwineTable::<QSqrt2>::build(&rs, 3).unwrap();
        let x = Polynomial::<QSqrt2>::var(3, 0);
        let y = Polynomial::var(3, 1);
        let tt = Polynomial::var(3, 2);
        let p = &(&(&x * &x) * &y) + &(&tt * &x);
        let coords = t.to_m_basis(&p).unwrap();
        assert_eq!(t.apply_v(&coords).unwrap(), p);
    }
}
