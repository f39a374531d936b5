//! The peeling recursion.

use std::collections::{BTreeMap, HashMap};

use num_rational::BigRational;
use num_traits::Zero;

use super::{ChaosExpansion, ChaosTerm, FunctionalSpec, NoiseIndex, Piece};
use crate::error::{Error, Result};
use crate::field::Coeff;
use crate::intertwine::{HermiteFamily, IntertwineTable};
use crate::poly::{Monomial, Polynomial};

/// Intermediate term: legs from the current depth inward; `poly` lives in the
/// full working variable space.
struct RawTerm<C: Coeff> {
    legs: Vec<usize>,
    pieces: Vec<(Vec<usize>, Vec<Option<usize>>, Polynomial<C>)>,
}

/// Working variables: one block of d space variables per observation time,
/// one block for the state at the current integration variable, then the
/// integration variables u_0 (outermost), u_1, ….
struct Expander<'a, C: Coeff> {
    table: &'a IntertwineTable<C>,
    families: HashMap<Vec<u16>, HermiteFamily<C>>,
    d: usize,
    r: usize,
    l: usize,
    nvars: usize,
    grid: Vec<C>,
    /// Grid index of each observation time.
    slot_grid: Vec<usize>,
    /// Observation slot at each grid index (None only for the origin when t_1 > 0).
    grid_slot: Vec<Option<usize>>,
    x0: Vec<C>,
}

enum Latest {
    Fixed(usize),
    Var,
}

impl<'a, C: Coeff> Expander<'a, C> {
    fn block(&self, slot: usize) -> std::ops::Range<usize> {
        slot * self.d..(slot + 1) * self.d
    }

    fn u(&self, i: usize) -> usize {
        (self.l + 1) * self.d + i
    }

    fn family(&mut self, nu: &[u16]) -> Result<&HermiteFamily<C>> {
        if !self.families.contains_key(nu) {
            let fam = self.table.hermite(nu)?;
            self.families.insert(nu.to_vec(), fam);
        }
        Ok(&self.families[nu])
    }

    fn constant(&self, c: C) -> Polynomial<C> {
        Polynomial::constant(self.nvars, c)
    }

    /// Splits `f` as Σ_ν R_ν(other variables)·m_ν(block `slot`).
    fn split_m_basis(&self, f: &Polynomial<C>, slot: usize) -> Result<BTreeMap<Vec<u16>, Polynomial<C>>> {
        let n = self.nvars;
        let b = self.block(slot);
        // Permutation placing the block first.
        let mut perm = vec![0usize; n];
        let mut next = self.d;
        for (i, p) in perm.iter_mut().enumerate() {
            if b.contains(&i) {
                *p = i - b.start;
            } else {
                *p = next;
                next += 1;
            }
        }
        let mut inv = vec![0usize; n];
        for (i, &p) in perm.iter().enumerate() {
            inv[p] = i;
        }
        let mb = self.table.to_m_basis(&f.remap(n, &perm))?;
        let mut out: BTreeMap<Vec<u16>, Polynomial<C>> = BTreeMap::new();
        for (mon, c) in mb.terms() {
            let nu = mon.0[..self.d].to_vec();
            let mut rest = mon.clone();
            for e in rest.0[..self.d].iter_mut() {
                *e = 0;
            }
            let rest = Polynomial::monomial(rest, c.clone()).remap(n, &inv);
            let entry = out.entry(nu).or_insert_with(|| Polynomial::zero(n));
            *entry = &*entry + &rest;
        }
        Ok(out)
    }

    /// Embeds a polynomial in (x, t) with x ↦ `space`, t ↦ `time`.
    fn embed(&self, p: &Polynomial<C>, space: &[Polynomial<C>], time: &Polynomial<C>) -> Result<Polynomial<C>> {
        let mut subs = space.to_vec();
        subs.push(time.clone());
        p.compose(&subs)
    }

    fn space_at(&self, grid_idx: usize) -> Vec<Polynomial<C>> {
        match self.grid_slot[grid_idx] {
            Some(s) if grid_idx > 0 => self.block(s).map(|v| Polynomial::var(self.nvars, v)).collect(),
            _ => self.x0.iter().map(|c| self.constant(c.clone())).collect(),
        }
    }

    fn leg_integrand(&mut self, nu: &[u16], leg: usize) -> Result<Polynomial<C>> {
        let d = self.d;
        let fam = self.family(nu)?;
        if leg < d {
            Ok(fam.q_c[leg].clone())
        } else {
            Ok(fam.q_delta()?[leg - d].clone())
        }
    }

    /// Integrands of the first peel of `f` at `depth`, one per leg, together
    /// with the lower grid index and the remainder merged into the previous time.
    #[allow(clippy::type_complexity)]
    fn peel(
        &mut self,
        f: &Polynomial<C>,
        depth: usize,
        var_lo: Option<usize>,
    ) -> Result<Option<(Polynomial<C>, usize, Option<usize>, Vec<Polynomial<C>>)>> {
        let var_block = self.block(self.l);
        let latest = if f.degree_in(var_block) > 0 {
            Latest::Var
        } else {
            match (0..self.l).rev().find(|&s| f.degree_in(self.block(s)) > 0) {
                Some(s) => Latest::Fixed(s),
                None => return Ok(None),
            }
        };
        let (slot, tau, prev, hi) = match latest {
            Latest::Var => {
                let lo = var_lo.expect("state block set only inside an integral");
                (self.l, Polynomial::var(self.nvars, self.u(depth - 1)), lo, None)
            }
            Latest::Fixed(s) => {
                let g = self.slot_grid[s];
                if g == 0 {
                    // Observation at time 0: X_0 = x0.
                    let subs: Vec<Polynomial<C>> = (0..self.nvars)
                        .map(|v| {
                            if self.block(s).contains(&v) {
                                self.constant(self.x0[v - s * self.d].clone())
                            } else {
                                Polynomial::var(self.nvars, v)
                            }
                        })
                        .collect();
                    return Ok(Some((f.compose(&subs)?, 0, None, Vec::new())));
                }
                (s, self.constant(self.grid[g].clone()), g - 1, Some(g))
            }
        };
        let parts = self.split_m_basis(f, slot)?;
        let prev_space = self.space_at(prev);
        let lag = &self.constant(self.grid[prev].clone()) - &tau;
        let mut rest = Polynomial::zero(self.nvars);
        for (nu, r) in &parts {
            let q = self.family(nu)?.q.clone();
            rest = &rest + &(r * &self.embed(&q, &prev_space, &lag)?);
        }
        let var_space: Vec<Polynomial<C>> = self.block(self.l).map(|v| Polynomial::var(self.nvars, v)).collect();
        let v_lag = &Polynomial::var(self.nvars, self.u(depth)) - &tau;
        let mut integrands = Vec::with_capacity(self.d + self.r);
        for leg in 0..self.d + self.r {
            let mut g = Polynomial::zero(self.nvars);
            for (nu, r) in &parts {
                let h = self.leg_integrand(nu, leg)?;
                if h.is_zero() {
                    continue;
                }
                g = &g + &(r * &self.embed(&h, &var_space, &v_lag)?);
            }
            integrands.push(g);
        }
        Ok(Some((rest, prev, hi, integrands)))
    }

    fn expand(&mut self, f: Polynomial<C>, depth: usize, var_lo: Option<usize>) -> Result<Vec<RawTerm<C>>> {
        if f.is_zero() {
            return Ok(Vec::new());
        }
        if depth >= self.nvars - (self.l + 1) * self.d {
            return Err(Error::DegreeOverflow { needed: depth + 1, max: depth });
        }
        let Some((rest, prev, hi, integrands)) = self.peel(&f, depth, var_lo)? else {
            return Ok(vec![RawTerm { legs: Vec::new(), pieces: vec![(Vec::new(), Vec::new(), f)] }]);
        };
        let mut out = self.expand(rest, depth, var_lo)?;
        for (leg, g) in integrands.into_iter().enumerate() {
            for inner in self.expand(g, depth + 1, Some(prev))? {
                let mut legs = vec![leg];
                legs.extend(inner.legs);
                let pieces = inner
                    .pieces
                    .into_iter()
                    .map(|(mut lo, mut his, p)| {
                        lo.insert(0, prev);
                        his.insert(0, hi);
                        (lo, his, p)
                    })
                    .collect();
                out.push(RawTerm { legs, pieces });
            }
        }
        Ok(out)
    }
}

fn expander<'a, C: Coeff>(table: &'a IntertwineTable<C>, x0: &[BigRational], spec: &FunctionalSpec) -> Result<Expander<'a, C>> {
    let rs = table.root_system();
    let d = rs.dim();
    if x0.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x0.len() });
    }
    if spec.nus[0].len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: spec.nus[0].len() });
    }
    let deg = spec.total_degree();
    if deg > table.n_max() {
        return Err(Error::DegreeOverflow { needed: deg, max: table.n_max() });
    }
    let l = spec.times.len();
    let mut grid_q = vec![BigRational::zero()];
    let mut slot_grid = Vec::with_capacity(l);
    for t in &spec.times {
        if t.is_zero() {
            slot_grid.push(0);
        } else {
            grid_q.push(t.clone());
            slot_grid.push(grid_q.len() - 1);
        }
    }
    let mut grid_slot = vec![None; grid_q.len()];
    for (s, &g) in slot_grid.iter().enumerate() {
        grid_slot[g] = Some(s);
    }
    Ok(Expander {
        table,
        families: HashMap::new(),
        d,
        r: rs.num_roots(),
        l,
        nvars: (l + 1) * d + deg + 1,
        grid: grid_q.iter().map(C::from_rational).collect(),
        slot_grid,
        grid_slot,
        x0: x0.iter().map(C::from_rational).collect(),
    })
}

fn initial<C: Coeff>(ex: &Expander<'_, C>, spec: &FunctionalSpec) -> Result<Polynomial<C>> {
    let mut f = Polynomial::one(ex.nvars);
    for (s, nu) in spec.nus.iter().enumerate() {
        let map: Vec<usize> = ex.block(s).collect();
        f = &f * &ex.table.m(nu)?.remap(ex.nvars, &map);
    }
    Ok(f)
}

/// Finite chaos representation Λ = E[Λ] + Σ_terms I(term) for x0 and `spec`.
pub fn chaos_expand<C: Coeff>(table: &IntertwineTable<C>, x0: &[BigRational], spec: &FunctionalSpec) -> Result<ChaosExpansion<C>> {
    let mut ex = expander(table, x0, spec)?;
    let f = initial(&ex, spec)?;
    let raw = ex.expand(f, 0, None)?;
    let ubase = (ex.l + 1) * ex.d;
    let mut constant = C::zero();
    let mut merged: BTreeMap<Vec<usize>, Vec<Piece<C>>> = BTreeMap::new();
    for term in raw {
        let n = term.legs.len();
        for (lo, hi, p) in term.pieces {
            if p.degree_in(0..ubase) > 0 {
                return Err(Error::InvalidArgument("integrand still depends on the state".into()));
            }
            if n == 0 {
                constant += p.coeff(&Monomial::one(p.nvars()));
                continue;
            }
            if p.degree_in(ubase + n..p.nvars()) > 0 {
                return Err(Error::InvalidArgument("integrand depends on a variable outside its legs".into()));
            }
            let map: Vec<usize> = (0..p.nvars()).map(|v| if (ubase..ubase + n).contains(&v) { v - ubase } else { 0 }).collect();
            let compact = p.remap(n, &map);
            let pieces = merged.entry(term.legs.clone()).or_default();
            match pieces.iter_mut().find(|q| q.lo == lo && q.hi == hi) {
                Some(q) => q.poly = &q.poly + &compact,
                None => pieces.push(Piece { lo, hi, poly: compact }),
            }
        }
    }
    let terms = merged
        .into_iter()
        .map(|(legs, pieces)| ChaosTerm {
            legs: legs.into_iter().map(NoiseIndex).collect(),
            pieces: pieces.into_iter().filter(|p| !p.poly.is_zero()).collect(),
        })
        .filter(|t| !t.pieces.is_empty())
        .collect();
    let grid = {
        let mut g = vec![BigRational::zero()];
        g.extend(spec.times.iter().filter(|t| !t.is_zero()).cloned());
        g
    };
    Ok(ChaosExpansion { dim: ex.d, num_roots: ex.r, grid, constant, terms })
}

/// Integrands of the first peel of Λ for a single observation, as polynomials
/// in (x_1..x_d, u): the state X_{u−} and the integration time.
pub fn first_peel<C: Coeff>(table: &IntertwineTable<C>, x0: &[BigRational], spec: &FunctionalSpec) -> Result<Vec<Polynomial<C>>> {
    let mut ex = expander(table, x0, spec)?;
    let f = initial(&ex, spec)?;
    let Some((_, _, _, integrands)) = ex.peel(&f, 0, None)? else {
        return Ok(vec![Polynomial::zero(ex.d + 1); ex.d + ex.r]);
    };
    let d = ex.d;
    let map: Vec<usize> = (0..ex.nvars)
        .map(|v| {
            if ex.block(ex.l).contains(&v) {
                v - ex.l * d
            } else {
                d
            }
        })
        .collect();
    Ok(integrands.iter().map(|g| g.remap(d + 1, &map)).collect())
}
