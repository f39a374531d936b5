//! Sparse multivariate polynomials over a [`Coeff`] field.
//!
//! Terms are kept in a `BTreeMap` under graded lexicographic order
//! (x1 > x2 > … > last variable), so iteration and printed fixtures are
//! byte-stable. No zero coefficient is ever stored.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use smallvec::SmallVec;

use crate::error::{Error, Result};
use crate::field::Coeff;

/// Exponent vector of a monomial.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Monomial(pub SmallVec<[u16; 8]>);

impl Monomial {
    pub fn one(nvars: usize) -> Self {
        Monomial(SmallVec::from_elem(0, nvars))
    }

    pub fn from_exps(exps: &[u16]) -> Self {
        Monomial(SmallVec::from_slice(exps))
    }

    pub fn unit(nvars: usize, i: usize) -> Self {
        let mut m = Self::one(nvars);
        m.0[i] = 1;
        m
    }

    pub fn degree(&self) -> usize {
        self.0.iter().map(|&e| e as usize).sum()
    }

    /// Degree restricted to the variables in `vars`.
    pub fn degree_in(&self, vars: std::ops::Range<usize>) -> usize {
        self.0[vars].iter().map(|&e| e as usize).sum()
    }

    pub fn exps(&self) -> &[u16] {
        &self.0
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial(self.0.iter().zip(other.0.iter()).map(|(a, b)| a + b).collect())
    }
}

impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.as_slice().cmp(other.0.as_slice()))
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// All exponent vectors in `nvars` variables of total degree exactly `deg`,
/// in descending graded-lex order.
pub fn monomials_of_degree(nvars: usize, deg: usize) -> Vec<Monomial> {
    fn rec(nvars: usize, i: usize, left: usize, cur: &mut Vec<u16>, out: &mut Vec<Monomial>) {
        if i + 1 == nvars {
            cur.push(left as u16);
            out.push(Monomial::from_exps(cur));
            cur.pop();
            return;
        }
        for e in (0..=left).rev() {
            cur.push(e as u16);
            rec(nvars, i + 1, left - e, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if nvars == 0 {
        if deg == 0 {
            out.push(Monomial::one(0));
        }
        return out;
    }
    rec(nvars, 0, deg, &mut Vec::with_capacity(nvars), &mut out);
    out
}

#[derive(Clone, PartialEq, Debug)]
pub struct Polynomial<C: Coeff> {
    nvars: usize,
    terms: BTreeMap<Monomial, C>,
}

impl<C: Coeff> Polynomial<C> {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: C) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(Monomial::one(nvars), c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, C::one())
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        Self::monomial(Monomial::unit(nvars, i), C::one())
    }

    pub fn monomial(m: Monomial, c: C) -> Self {
        let mut p = Self::zero(m.0.len());
        p.add_term(m, c);
        p
    }

    /// Linear form Σ cᵢ xᵢ.
    pub fn linear(coeffs: &[C], nvars: usize) -> Self {
        let mut p = Self::zero(nvars);
        for (i, c) in coeffs.iter().enumerate() {
            p.add_term(Monomial::unit(nvars, i), c.clone());
        }
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Monomial, C)>) -> Self {
        let mut p = Self::zero(nvars);
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p.normalize();
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in ascending graded-lex order.
    pub fn terms(&self) -> impl DoubleEndedIterator<Item = (&Monomial, &C)> {
        self.terms.iter()
    }

    pub fn coeff(&self, m: &Monomial) -> C {
        self.terms.get(m).cloned().unwrap_or_else(C::zero)
    }

    /// Adds `c·m`, dropping the entry if it cancels exactly.
    pub fn add_term(&mut self, m: Monomial, c: C) {
        debug_assert_eq!(m.0.len(), self.nvars);
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if o.get().is_zero() {
                    o.remove();
                }
            }
        }
    }

    pub fn max_magnitude(&self) -> f64 {
        self.terms.values().map(|c| c.magnitude()).fold(0.0, f64::max)
    }

    /// Drops coefficients that are zero in the field's sense (relative
    /// tolerance in float mode).
    pub fn normalize(&mut self) {
        if C::EXACT {
            return;
        }
        let scale = self.max_magnitude();
        self.terms.retain(|_, c| !c.negligible(scale));
    }

    pub fn degree(&self) -> usize {
        self.terms.keys().map(|m| m.degree()).max().unwrap_or(0)
    }

    pub fn degree_in(&self, vars: std::ops::Range<usize>) -> usize {
        self.terms.keys().map(|m| m.degree_in(vars.clone())).max().unwrap_or(0)
    }

    /// True when every term has total degree `deg` in `vars`.
    pub fn is_homogeneous_in(&self, vars: std::ops::Range<usize>, deg: usize) -> bool {
        self.terms.keys().all(|m| m.degree_in(vars.clone()) == deg)
    }

    pub fn scale(&self, c: &C) -> Self {
        if c.is_zero() {
            return Self::zero(self.nvars);
        }
        let mut p = Self {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v.clone() * c.clone())).collect(),
        };
        p.terms.retain(|_, v| !v.is_zero());
        p.normalize();
        p
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &C) -> Self {
        let mut p = Self::zero(self.nvars);
        for (k, v) in &self.terms {
            p.add_term(k.mul(m), v.clone() * c.clone());
        }
        p.normalize();
        p
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let e = m.0[i];
            if e == 0 {
                continue;
            }
            let mut m2 = m.clone();
            m2.0[i] -= 1;
            p.add_term(m2, c.clone() * C::from_i64(e as i64));
        }
        p.normalize();
        p
    }

    /// Antiderivative in variable `i` with zero constant of integration.
    pub fn antiderivative(&self, i: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (m, c) in &self.terms {
            let mut m2 = m.clone();
            m2.0[i] += 1;
            let inv = C::from_i64(m2.0[i] as i64).inv().expect("positive integer");
            p.add_term(m2, c.clone() * inv);
        }
        p
    }

    /// Substitutes every variable `xᵢ ↦ subs[i]`; the result lives in the
    /// variable space of the substitutes.
    pub fn compose(&self, subs: &[Polynomial<C>]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: subs.len() });
        }
        let out_vars = subs.first().map(|s| s.nvars).unwrap_or(0);
        if subs.iter().any(|s| s.nvars != out_vars) {
            return Err(Error::InvalidArgument("substitutes live in different variable spaces".into()));
        }
        // powers[i][e] = subs[i]^e, filled lazily.
        let mut powers: Vec<Vec<Polynomial<C>>> = subs.iter().map(|s| vec![Polynomial::one(s.nvars)]).collect();
        let mut out = Polynomial::zero(out_vars);
        for (m, c) in &self.terms {
            let mut acc = Polynomial::constant(out_vars, c.clone());
            for (i, &e) in m.0.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                while powers[i].len() <= e as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                acc = &acc * &powers[i][e as usize];
            }
            out = &out + &acc;
        }
        Ok(out)
    }

    /// Exact quotient by the linear form Σ ℓᵢ xᵢ.
    ///
    /// Multivariate division under graded-lex order; any nonzero remainder is
    /// reported as [`Error::InexactDivision`].
    pub fn div_linear(&self, form: &[C]) -> Result<Self> {
        self.div_linear_with_scale(form, self.max_magnitude())
    }

    /// As [`Polynomial::div_linear`], with float remainders judged against at
    /// least `scale` (the size of the operands that produced `self`).
    pub fn div_linear_with_scale(&self, form: &[C], scale: f64) -> Result<Self> {
        // The largest coefficient leads, which keeps float division stable.
        let lead = (0..form.len())
            .filter(|&i| !form[i].is_zero())
            .max_by(|&i, &j| form[i].magnitude().total_cmp(&form[j].magnitude()))
            .ok_or_else(|| Error::InvalidArgument("division by the zero form".into()))?;
        let lead_inv = form[lead].inv().expect("nonzero");
        // Rounding in float mode is relative to the largest intermediate coefficient.
        let mut scale = scale.max(self.max_magnitude());
        let mut rest = self.terms.clone();
        let mut quotient = Polynomial::zero(self.nvars);
        // Keyed so that a remainder monomial reached twice is summed before judging it.
        let mut leftover: BTreeMap<Monomial, C> = BTreeMap::new();
        while let Some((m, c)) = rest.pop_last() {
            if m.0[lead] == 0 {
                let slot = leftover.entry(m).or_insert_with(C::zero);
                *slot += c;
                continue;
            }
            let q = c * lead_inv.clone();
            let mut qm = m.clone();
            qm.0[lead] -= 1;
            for (i, l) in form.iter().enumerate() {
                if i == lead || l.is_zero() {
                    continue;
                }
                let mut target = qm.clone();
                target.0[i] += 1;
                let delta = q.clone() * l.clone();
                scale = scale.max(delta.magnitude());
                let entry = rest.entry(target);
                match entry {
                    std::collections::btree_map::Entry::Vacant(v) => {
                        v.insert(-delta);
                    }
                    std::collections::btree_map::Entry::Occupied(mut o) => {
                        *o.get_mut() -= delta;
                        if o.get().is_zero() {
                            o.remove();
                        }
                    }
                }
            }
            quotient.add_term(qm, q);
        }
        let remainder = leftover.values().filter(|c| !c.negligible(scale)).count();
        if remainder > 0 {
            return Err(Error::InexactDivision { terms: remainder });
        }
        quotient.normalize();
        Ok(quotient)
    }

    pub fn eval(&self, x: &[C]) -> Result<C> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: x.len() });
        }
        let mut acc = C::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (xi, &e) in x.iter().zip(m.0.iter()) {
                for _ in 0..e {
                    t = t * xi.clone();
                }
            }
            acc += t;
        }
        Ok(acc)
    }

    pub fn eval_f64(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nvars {
            return Err(Error::DimensionMismatch { expected: self.nvars, got: x.len() });
        }
        Ok(self
            .terms
            .iter()
            .map(|(m, c)| {
                m.0.iter().zip(x).fold(c.to_f64(), |acc, (&e, &xi)| acc * xi.powi(e as i32))
            })
            .sum())
    }

    pub fn map_coeffs<D: Coeff>(&self, f: impl Fn(&C) -> D) -> Polynomial<D> {
        let mut p = Polynomial::zero(self.nvars);
        for (m, c) in &self.terms {
            p.add_term(m.clone(), f(c));
        }
        p.normalize();
        p
    }

    pub fn to_f64(&self) -> Polynomial<f64> {
        self.map_coeffs(|c| c.to_f64())
    }

    /// Re-embeds into `nvars` variables, sending old variable `i` to `map[i]`.
    pub fn remap(&self, nvars: usize, map: &[usize]) -> Self {
        let mut p = Polynomial::zero(nvars);
        for (m, c) in &self.terms {
            let mut nm = Monomial::one(nvars);
            for (i, &e) in m.0.iter().enumerate() {
                nm.0[map[i]] += e;
            }
            p.add_term(nm, c.clone());
        }
        p
    }

    /// Terms whose degree in `vars` equals `deg`.
    pub fn homogeneous_part(&self, vars: std::ops::Range<usize>, deg: usize) -> Self {
        Polynomial {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree_in(vars.clone()) == deg)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    /// Canonical fixture text: descending graded-lex, `(coeff)*x1^2*x2` terms
    /// joined by ` + `.
    pub fn canonical_with(&self, names: &[String]) -> String {
        if self.terms.is_empty() {
            return "0".to_string();
        }
        let mut parts = Vec::with_capacity(self.terms.len());
        for (m, c) in self.terms.iter().rev() {
            let mut s = format!("({})", c.canonical());
            for (i, &e) in m.0.iter().enumerate() {
                match e {
                    0 => {}
                    1 => {
                        s.push('*');
                        s.push_str(&names[i]);
                    }
                    _ => s.push_str(&format!("*{}^{}", names[i], e)),
                }
            }
            parts.push(s);
        }
        parts.join(" + ")
    }

    /// Canonical text with space variables `x1..xd` followed by `t` (one
    /// extra variable) or `t1, t2, …`.
    pub fn canonical(&self, space_dim: usize) -> String {
        self.canonical_with(&default_names(space_dim, self.nvars))
    }
}

pub fn default_names(space_dim: usize, nvars: usize) -> Vec<String> {
    let extra = nvars.saturating_sub(space_dim);
    (0..nvars)
        .map(|i| {
            if i < space_dim {
                format!("x{}", i + 1)
            } else if extra == 1 {
                "t".to_string()
            } else {
                format!("t{}", i - space_dim + 1)
            }
        })
        .collect()
}

impl<C: Coeff> fmt::Display for Polynomial<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical(self.nvars))
    }
}

impl<'a, C: Coeff> Add<&'a Polynomial<C>> for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn add(self, o: &Polynomial<C>) -> Polynomial<C> {
        debug_assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (m, c) in &o.terms {
            p.add_term(m.clone(), c.clone());
        }
        p.normalize();
        p
    }
}

impl<'a, C: Coeff> Sub<&'a Polynomial<C>> for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn sub(self, o: &Polynomial<C>) -> Polynomial<C> {
        debug_assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (m, c) in &o.terms {
            p.add_term(m.clone(), -c.clone());
        }
        p.normalize();
        p
    }
}

impl<'a, C: Coeff> Mul<&'a Polynomial<C>> for &'a Polynomial<C> {
    type Output = Polynomial<C>;
    fn mul(self, o: &Polynomial<C>) -> Polynomial<C> {
        debug_assert_eq!(self.nvars, o.nvars);
        let mut p = Polynomial::zero(self.nvars);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                p.add_term(m1.mul(m2), c1.clone() * c2.clone());
            }
        }
        p.normalize();
        p
    }
}

impl<C: Coeff> Neg for &Polynomial<C> {
    type Output = Polynomial<C>;
    fn neg(self) -> Polynomial<C> {
        Polynomial {
            nvars: self.nvars,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

/// Float polynomial flattened for fast repeated evaluation inside Monte Carlo loops.
#[derive(Clone, Debug)]
pub struct CompiledPoly {
    nvars: usize,
    max_exp: Vec<usize>,
    terms: Vec<(SmallVec<[u16; 8]>, f64)>,
}

impl CompiledPoly {
    pub fn new<C: Coeff>(p: &Polynomial<C>) -> Self {
        let mut max_exp = vec![0usize; p.nvars()];
        let terms = p
            .terms()
            .map(|(m, c)| {
                for (i, &e) in m.0.iter().enumerate() {
                    max_exp[i] = max_exp[i].max(e as usize);
                }
                (m.0.clone(), c.to_f64())
            })
            .collect();
        Self { nvars: p.nvars(), max_exp, terms }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.nvars);
        let mut pows: SmallVec<[SmallVec<[f64; 12]>; 8]> = SmallVec::new();
        for (i, &xi) in x.iter().enumerate() {
            let mut v: SmallVec<[f64; 12]> = SmallVec::with_capacity(self.max_exp[i] + 1);
            v.push(1.0);
            for e in 1..=self.max_exp[i] {
                v.push(v[e - 1] * xi);
            }
            pows.push(v);
        }
        self.terms
            .iter()
            .map(|(m, c)| m.iter().enumerate().fold(*c, |acc, (i, &e)| acc * pows[i][e as usize]))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::QSqrt2;

    fn x(n: usize, i: usize) -> Polynomial<QSqrt2> {
        Polynomial::var(n, i)
    }

    #[test]
    fn graded_lex_order_and_text() {
        // 3 x1^2 x2 + x2 + 2
        let p = &(&(&x(2, 0) * &x(2, 0)) * &x(2, 1)).scale(&QSqrt2::int(3))
            + &(&x(2, 1) + &Polynomial::constant(2, QSqrt2::int(2)));
        assert_eq!(p.canonical(2), "(3+0*sqrt2)*x1^2*x2 + (1+0*sqrt2)*x2 + (2+0*sqrt2)");
        assert_eq!(Polynomial::<QSqrt2>::zero(2).canonical(2), "0");
    }

    #[test]
    fn eval_with_time_variable() {
        // x^2 + t at (2, 3) = 7
        let p = &(&x(2, 0) * &x(2, 0)) + &x(2, 1);
        assert_eq!(p.eval(&[QSqrt2::int(2), QSqrt2::int(3)]).unwrap(), QSqrt2::int(7));
        assert_eq!(p.eval_f64(&[2.0, 3.0]).unwrap(), 7.0);
        assert!(Polynomial::<QSqrt2>::zero(2).eval(&[QSqrt2::int(5), QSqrt2::int(1)]).unwrap().is_zero());
        assert!(p.eval(&[QSqrt2::int(1)]).is_err());
    }

    #[test]
    fn division_by_linear_form() {
        // (x1^2 - x2^2) / (x1 - x2) = x1 + x2
        let p = &(&x(2, 0) * &x(2, 0)) - &(&x(2, 1) * &x(2, 1));
        let q = p.div_linear(&[QSqrt2::int(1), QSqrt2::int(-1)]).unwrap();
        assert_eq!(q, &x(2, 0) + &x(2, 1));
        let bad = &x(2, 0) * &x(2, 0);
        assert!(matches!(bad.div_linear(&[QSqrt2::int(1), QSqrt2::int(-1)]), Err(Error::InexactDivision { .. })));
    }

    #[test]
    fn float_division_pivots_on_the_largest_coefficient() {
        // (1e-17 x1 + x2)(x1 + 2 x2) divided by the form with a near-zero first entry.
        let xf = |i: usize| Polynomial::<f64>::var(2, i);
        let form = [1e-17, 1.0];
        let lin = &xf(0).scale(&form[0]) + &xf(1);
        let other = &xf(0) + &xf(1).scale(&2.0);
        let q = (&lin * &other).div_linear(&form).unwrap();
        assert!((q.eval_f64(&[0.3, -0.7]).unwrap() - other.eval_f64(&[0.3, -0.7]).unwrap()).abs() < 1e-12);
        assert!(xf(0).div_linear(&form).is_err());
    }

    #[test]
    fn compose_and_derivative() {
        // p(x1, x2) = x1^2 x2, substitute x1 -> x1 + x2, x2 -> x2
        let p = &(&x(2, 0) * &x(2, 0)) * &x(2, 1);
        let s = [&x(2, 0) + &x(2, 1), x(2, 1)];
        let q = p.compose(&s).unwrap();
        let expected = &(&s[0] * &s[0]) * &x(2, 1);
        assert_eq!(q, expected);
        assert_eq!(p.derivative(0), (&x(2, 0) * &x(2, 1)).scale(&QSqrt2::int(2)));
    }

    #[test]
    fn monomial_enumeration() {
        let ms = monomials_of_degree(3, 2);
        assert_eq!(ms.len(), 6);
        assert!(ms.windows(2).all(|w| w[0] > w[1]));
        assert_eq!(monomials_of_degree(1, 4).len(), 1);
    }

    #[test]
    fn compiled_matches_direct() {
        let p = &(&(&x(2, 0) * &x(2, 0)) * &x(2, 1)) - &x(2, 1).scale(&QSqrt2::sqrt2_frac(3, 2));
        let c = CompiledPoly::new(&p);
        let v = [0.7, -1.3];
        assert!((c.eval(&v) - p.eval_f64(&v).unwrap()).abs() < 1e-14);
    }
}
