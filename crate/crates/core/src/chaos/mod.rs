//! Chaos expansion of polynomial functionals Λ = Π_j m_{ν_j}(X_{t_j}).
//!
//! Λ is peeled from its latest observation time: m_ν(X_t) equals Q_ν(X_s, s−t)
//! plus Itô integrals over (s, t] of the Hermite integrands. The first part
//! merges into the factor at time s and is rewritten in the m-basis; the
//! integrands are again polynomial functionals and are expanded recursively
//! at the integration variable. Every integrand of the result is a polynomial
//! in the leg times, restricted per leg to an interval between observation times.

mod eval;
mod expand;

pub use eval::{
    hermite_martingale_check, isometry_check, CompiledExpansion, Convention, HermiteCheck, IsometryReport, PathChaos,
};
pub use expand::{chaos_expand, first_peel};

use std::fmt;

use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::poly::Polynomial;

/// A noise coordinate: Brownian components first, then one normal martingale per positive root.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct NoiseIndex(pub usize);

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Noise {
    Brownian(usize),
    Root(usize),
}

impl NoiseIndex {
    pub fn decode(self, dim: usize) -> Noise {
        if self.0 < dim {
            Noise::Brownian(self.0)
        } else {
            Noise::Root(self.0 - dim)
        }
    }

    /// `B1..Bd` or `M1..M|R+|`, one-based.
    pub fn label(self, dim: usize) -> String {
        match self.decode(dim) {
            Noise::Brownian(i) => format!("B{}", i + 1),
            Noise::Root(a) => format!("M{}", a + 1),
        }
    }
}

/// Λ = Π_j m_{ν_j}(X_{t_j}) at observation times 0 ≤ t_1 < … < t_l.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalSpec {
    pub times: Vec<BigRational>,
    pub nus: Vec<Vec<u16>>,
}

impl FunctionalSpec {
    pub fn new(times: Vec<BigRational>, nus: Vec<Vec<u16>>) -> Result<Self> {
        if times.len() != nus.len() || times.is_empty() {
            return Err(Error::InvalidArgument("one multi-index per observation time is required".into()));
        }
        if times[0] < BigRational::zero() || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("observation times must be nonnegative and strictly increasing".into()));
        }
        let d = nus[0].len();
        if nus.iter().any(|n| n.len() != d) {
            return Err(Error::InvalidArgument("multi-indices of different lengths".into()));
        }
        Ok(Self { times, nus })
    }

    /// Single observation.
    pub fn single(t: BigRational, nu: Vec<u16>) -> Result<Self> {
        Self::new(vec![t], vec![nu])
    }

    pub fn total_degree(&self) -> usize {
        self.nus.iter().flatten().map(|&e| e as usize).sum()
    }

    pub fn times_f64(&self) -> Vec<f64> {
        self.times.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect()
    }
}

/// Polynomial in the leg times restricted to a box: leg i ranges over
/// (grid[lo[i]], grid[hi[i]]], or up to the enclosing leg when `hi[i]` is `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct Piece<C: Coeff> {
    pub lo: Vec<usize>,
    pub hi: Vec<Option<usize>>,
    /// Variables u_1 > u_2 > … > u_n, one per leg.
    pub poly: Polynomial<C>,
}

/// Iterated integral ∫_{Δ_n} f(u_1,…,u_n) dZ^{ε_1}_{u_1} ⋯ dZ^{ε_n}_{u_n}, with f = Σ pieces.
#[derive(Clone, Debug, PartialEq)]
pub struct ChaosTerm<C: Coeff> {
    pub legs: Vec<NoiseIndex>,
    pub pieces: Vec<Piece<C>>,
}

impl<C: Coeff> ChaosTerm<C> {
    pub fn order(&self) -> usize {
        self.legs.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChaosExpansion<C: Coeff> {
    pub dim: usize,
    pub num_roots: usize,
    /// 0 followed by the observation times, without duplicates.
    pub grid: Vec<BigRational>,
    /// E[Λ].
    pub constant: C,
    pub terms: Vec<ChaosTerm<C>>,
}

impl<C: Coeff> ChaosExpansion<C> {
    pub fn grid_f64(&self) -> Vec<f64> {
        self.grid.iter().map(|t| t.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// E[I(a)·I(b)] = 𝟙{same legs}·∫_{Δ_n} f_a f_b, computed exactly.
    pub fn inner_product(&self, a: usize, b: usize) -> Result<C> {
        let (ta, tb) = (&self.terms[a], &self.terms[b]);
        if ta.legs != tb.legs {
            return Ok(C::zero());
        }
        let grid: Vec<C> = self.grid.iter().map(C::from_rational).collect();
        let mut total = C::zero();
        for pa in &ta.pieces {
            for pb in &tb.pieces {
                let n = ta.order();
                let lo: Vec<usize> = (0..n).map(|i| pa.lo[i].max(pb.lo[i])).collect();
                let hi: Vec<Option<usize>> = (0..n)
                    .map(|i| match (pa.hi[i], pb.hi[i]) {
                        (Some(x), Some(y)) => Some(x.min(y)),
                        (x, None) | (None, x) => x,
                    })
                    .collect();
                total += box_simplex_integral(&grid, &lo, &hi, &(&pa.poly * &pb.poly))?;
            }
        }
        Ok(total)
    }

    /// ∫_{Δ_n} f² for every term.
    pub fn norms_squared(&self) -> Result<Vec<C>> {
        (0..self.terms.len()).map(|i| self.inner_product(i, i)).collect()
    }

    /// Var(Λ) = Σ_terms ∫ f².
    pub fn variance(&self) -> Result<C> {
        Ok(self.norms_squared()?.into_iter().fold(C::zero(), |a, b| a + b))
    }

    /// Canonical text: the constant, then one line per term and piece.
    pub fn canonical(&self) -> String {
        let grid: Vec<String> = self.grid.iter().map(|t| t.to_string()).collect();
        let mut s = format!("constant: {}\n", self.constant.canonical());
        for t in &self.terms {
            let legs: Vec<String> = t.legs.iter().map(|e| e.label(self.dim)).collect();
            let names: Vec<String> = (1..=t.order()).map(|i| format!("u{i}")).collect();
            for p in &t.pieces {
                let bounds: Vec<String> = (0..t.order())
                    .map(|i| {
                        let hi = match p.hi[i] {
                            Some(h) => grid[h].clone(),
                            None => names[i - 1].clone(),
                        };
                        format!("{} in ({}, {}]", names[i], grid[p.lo[i]], hi)
                    })
                    .collect();
                s.push_str(&format!("term [{}] {}: {}\n", legs.join(","), bounds.join(", "), p.poly.canonical_with(&names)));
            }
        }
        s
    }
}

impl<C: Coeff> fmt::Display for ChaosExpansion<C> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// Substitutes a single variable of `p`.
fn substitute<C: Coeff>(p: &Polynomial<C>, var: usize, value: &Polynomial<C>) -> Result<Polynomial<C>> {
    let n = p.nvars();
    let subs: Vec<Polynomial<C>> = (0..n).map(|i| if i == var { value.clone() } else { Polynomial::var(n, i) }).collect();
    p.compose(&subs)
}

/// ∫ p over {u_1 > … > u_n, grid[lo_i] < u_i ≤ grid[hi_i]}, where a missing
/// upper index leaves only the ordering constraint.
pub(crate) fn box_simplex_integral<C: Coeff>(grid: &[C], lo: &[usize], hi: &[Option<usize>], p: &Polynomial<C>) -> Result<C> {
    let n = lo.len();
    let cells = grid.len() - 1;
    if n == 0 {
        return Ok(p.coeff(&crate::poly::Monomial::one(p.nvars())));
    }
    let mut total = C::zero();
    let mut seq = vec![0usize; n];
    // Non-increasing cell sequences compatible with the boxes.
    fn walk<C: Coeff>(
        i: usize,
        seq: &mut Vec<usize>,
        grid: &[C],
        lo: &[usize],
        hi: &[Option<usize>],
        cells: usize,
        p: &Polynomial<C>,
        total: &mut C,
    ) -> Result<()> {
        let n = lo.len();
        if i == n {
            let mut q = p.clone();
            for j in (0..n).rev() {
                let a = q.antiderivative(j);
                let c = seq[j];
                let nv = q.nvars();
                let upper = if j > 0 && seq[j - 1] == c {
                    Polynomial::var(nv, j - 1)
                } else {
                    Polynomial::constant(nv, grid[c + 1].clone())
                };
                let lower = Polynomial::constant(nv, grid[c].clone());
                q = &substitute(&a, j, &upper)? - &substitute(&a, j, &lower)?;
            }
            *total += q.coeff(&crate::poly::Monomial::one(q.nvars()));
            return Ok(());
        }
        let top = if i == 0 { cells } else { seq[i - 1] + 1 };
        let top = top.min(hi[i].unwrap_or(cells));
        for c in lo[i]..top {
            seq[i] = c;
            walk(i + 1, seq, grid, lo, hi, cells, p, total)?;
        }
        Ok(())
    }
    walk(0, &mut seq, grid, lo, hi, cells, p, &mut total)?;
    Ok(total)
}
