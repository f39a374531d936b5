//! Dunkl differential–difference calculus on polynomials.
//!
//! Polynomials may carry extra parameter variables after the `d` space
//! variables (a time variable, for instance); reflections and derivatives act
//! on the space variables only.

use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::poly::Polynomial;
use crate::rootsys::RootSystem;

/// Root data of a system converted into the field `C`.
#[derive(Clone, Debug)]
pub struct DunklOps<C: Coeff> {
    dim: usize,
    roots: Vec<Vec<C>>,
    k: Vec<C>,
}

impl<C: Coeff> DunklOps<C> {
    pub fn new(rs: &RootSystem) -> Result<Self> {
        let roots = (0..rs.num_roots()).map(|i| rs.root_in::<C>(i)).collect::<Result<Vec<_>>>()?;
        let k = (0..rs.num_roots()).map(|i| C::from_rational(rs.multiplicity(i))).collect();
        Ok(Self { dim: rs.dim(), roots, k })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn root(&self, i: usize) -> &[C] {
        &self.roots[i]
    }

    pub fn k(&self, i: usize) -> &C {
        &self.k[i]
    }

    fn check(&self, p: &Polynomial<C>) -> Result<()> {
        if p.nvars() < self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: p.nvars() });
        }
        Ok(())
    }

    fn check_root(&self, i: usize) -> Result<()> {
        if i >= self.roots.len() {
            return Err(Error::RootIndex { index: i, count: self.roots.len() });
        }
        Ok(())
    }

    /// Coefficients of ⟨α,·⟩ padded with zeros for parameter variables.
    pub fn root_form(&self, i: usize, nvars: usize) -> Vec<C> {
        let mut f = self.roots[i].clone();
        f.resize(nvars, C::zero());
        f
    }

    /// The linear polynomial ⟨α,x⟩.
    pub fn root_poly(&self, i: usize, nvars: usize) -> Polynomial<C> {
        Polynomial::linear(&self.roots[i], nvars)
    }

    /// p∘σ_α.
    pub fn reflect_poly(&self, i: usize, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.check(p)?;
        self.check_root(i)?;
        let n = p.nvars();
        let pair = self.root_poly(i, n);
        let subs: Vec<Polynomial<C>> = (0..n)
            .map(|j| {
                let xj = Polynomial::var(n, j);
                if j < self.dim {
                    &xj - &pair.scale(&self.roots[i][j])
                } else {
                    xj
                }
            })
            .collect();
        p.compose(&subs)
    }

    /// (p − p∘σ_α)/⟨α,·⟩, divided exactly.
    pub fn divided_difference(&self, i: usize, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let reflected = self.reflect_poly(i, p)?;
        let scale = p.max_magnitude().max(reflected.max_magnitude());
        (p - &reflected).div_linear_with_scale(&self.root_form(i, p.nvars()), scale)
    }

    /// T_i p = ∂_i p + Σ_α k(α) α_i (p − p∘σ_α)/⟨α,·⟩.
    pub fn t(&self, axis: usize, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.check(p)?;
        if axis >= self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: axis + 1 });
        }
        let mut out = p.derivative(axis);
        for a in 0..self.roots.len() {
            if self.k[a].is_zero() || self.roots[a][axis].is_zero() {
                continue;
            }
            let dd = self.divided_difference(a, p)?;
            out = &out + &dd.scale(&(self.k[a].clone() * self.roots[a][axis].clone()));
        }
        Ok(out)
    }

    pub fn laplacian(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        self.check(p)?;
        let mut out = Polynomial::zero(p.nvars());
        for i in 0..self.dim {
            out = &out + &p.derivative(i).derivative(i);
        }
        Ok(out)
    }

    /// L_k p = Σ T_i(T_i p).
    pub fn l_via_t(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let mut out = Polynomial::zero(p.nvars());
        for i in 0..self.dim {
            out = &out + &self.t(i, &self.t(i, p)?)?;
        }
        Ok(out)
    }

    /// L_k p from the generator's closed form:
    /// Δp + 2 Σ_α k(α) [⟨∇p,α⟩⟨α,x⟩ + p∘σ_α − p] / ⟨α,x⟩².
    pub fn l_closed_form(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let n = p.nvars();
        let mut out = self.laplacian(p)?;
        let two = C::from_i64(2);
        for a in 0..self.roots.len() {
            if self.k[a].is_zero() {
                continue;
            }
            let mut grad_alpha = Polynomial::zero(n);
            for i in 0..self.dim {
                grad_alpha = &grad_alpha + &p.derivative(i).scale(&self.roots[a][i]);
            }
            let pair = self.root_poly(a, n);
            let slope = &grad_alpha * &pair;
            let reflected = self.reflect_poly(a, p)?;
            let scale = p.max_magnitude().max(slope.max_magnitude()).max(reflected.max_magnitude());
            let num = &(&slope + &reflected) - p;
            let form = self.root_form(a, n);
            let q = num.div_linear_with_scale(&form, scale)?.div_linear_with_scale(&form, scale)?;
            out = &out + &q.scale(&(two.clone() * self.k[a].clone()));
        }
        Ok(out)
    }

    /// The generator ½L_k.
    pub fn generator(&self, p: &Polynomial<C>) -> Result<Polynomial<C>> {
        let half = C::from_i64(2).inv().expect("2 is invertible");
        Ok(self.l_via_t(p)?.scale(&half))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{rat, QSqrt2};
    use crate::rootsys::RootSystemKind;

    fn rank1(k: i64) -> DunklOps<QSqrt2> {
        DunklOps::new(&RootSystem::build(RootSystemKind::Rank1, 1, &[rat(k, 1)]).unwrap()).unwrap()
    }

    fn xpow(n: u16) -> Polynomial<QSqrt2> {
        Polynomial::monomial(crate::poly::Monomial::from_exps(&[n]), QSqrt2::one())
    }

    #[test]
    fn rank1_t_values() {
        let ops = rank1(1);
        assert!(ops.t(0, &Polynomial::one(1)).unwrap().is_zero());
        assert_eq!(ops.t(0, &xpow(2)).unwrap(), xpow(1).scale(&QSqrt2::int(2)));
        // (3 + 2k) x² at k = 1
        assert_eq!(ops.t(0, &xpow(3)).unwrap(), xpow(2).scale(&QSqrt2::int(5)));
    }

    #[test]
    fn rank1_l_of_square() {
        let ops = rank1(2);
        let expected = Polynomial::constant(1, QSqrt2::int(2 + 4 * 2));
        assert_eq!(ops.l_via_t(&xpow(2)).unwrap(), expected);
        assert_eq!(ops.l_closed_form(&xpow(2)).unwrap(), expected);
    }

    #[test]
    fn divided_differences() {
        let ops = rank1(1);
        assert_eq!(ops.divided_difference(0, &xpow(3)).unwrap(), xpow(2).scale(&QSqrt2::sqrt2_frac(1, 1)));
        assert!(ops.divided_difference(0, &xpow(4)).unwrap().is_zero());
        let prod = DunklOps::<QSqrt2>::new(
            &RootSystem::build(RootSystemKind::ProductOfRank1, 2, &[rat(1, 1), rat(1, 1)]).unwrap(),
        )
        .unwrap();
        let x1x2 = &Polynomial::var(2, 0) * &Polynomial::var(2, 1);
        assert_eq!(
            prod.divided_difference(0, &x1x2).unwrap(),
            Polynomial::var(2, 1).scale(&QSqrt2::sqrt2_frac(1, 1))
        );
    }

    #[test]
    fn time_variable_is_inert() {
        let ops = rank1(1);
        // x·t  ↦  T(x t) = (1 + 2k) t
        let xt = &Polynomial::<QSqrt2>::var(2, 0) * &Polynomial::var(2, 1);
        assert_eq!(ops.t(0, &xt).unwrap(), Polynomial::var(2, 1).scale(&QSqrt2::int(3)));
    }

    #[test]
    fn float_dihedral_operators_commute() {
        // I2(5) has a root along x2, whose x1 component is rounding noise.
        let rs = RootSystem::build_f64(RootSystemKind::I2(5), 2, &[1.0]).unwrap();
        let ops = DunklOps::<f64>::new(&rs).unwrap();
        let p = &(&Polynomial::<f64>::var(2, 0) * &Polynomial::var(2, 1)) * &Polynomial::var(2, 1);
        let a = ops.t(0, &ops.t(1, &p).unwrap()).unwrap();
        let b = ops.t(1, &ops.t(0, &p).unwrap()).unwrap();
        assert!((&a - &b).max_magnitude() < 1e-10);
        let routes = &ops.l_via_t(&p).unwrap() - &ops.l_closed_form(&p).unwrap();
        assert!(routes.max_magnitude() < 1e-10);
    }
}
