//! Normalized root systems, reflections, orbits and the fundamental chamber.
//!
//! Positive roots are stored with squared length exactly 2, so the reflection
//! is σ_α x = x − ⟨α,x⟩α. Crystallographic systems keep an exact copy of the
//! roots over ℚ(√2); dihedral systems outside that field are float only.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{Coeff, QSqrt2};

/// Largest reflection group enumerated explicitly.
pub const MAX_GROUP_ORDER: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "type", content = "rank", rename_all = "snake_case")]
pub enum RootSystemKind {
    Rank1,
    ProductOfRank1,
    A(usize),
    B(usize),
    D(usize),
    I2(usize),
}

impl fmt::Display for RootSystemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RootSystemKind::Rank1 => write!(f, "rank1"),
            RootSystemKind::ProductOfRank1 => write!(f, "product"),
            RootSystemKind::A(n) => write!(f, "A{n}"),
            RootSystemKind::B(n) => write!(f, "B{n}"),
            RootSystemKind::D(n) => write!(f, "D{n}"),
            RootSystemKind::I2(m) => write!(f, "I2_{m}"),
        }
    }
}

impl std::str::FromStr for RootSystemKind {
    type Err = Error;

    /// Parses `rank1`, `product`, `A2`, `B(2)`, `I2(5)` and similar spellings.
    fn from_str(s: &str) -> Result<Self> {
        let t: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_lowercase();
        match t.as_str() {
            "rank1" | "rank-1" | "a1" => return Ok(RootSystemKind::Rank1),
            "product" | "product_of_rank1" | "product-of-rank1" => return Ok(RootSystemKind::ProductOfRank1),
            _ => {}
        }
        let bad = || Error::InvalidRootSystem(format!("unknown kind `{s}`"));
        let (head, rest) = if let Some(r) = t.strip_prefix("i2") {
            ("i2", r)
        } else if t.len() > 1 {
            t.split_at(1)
        } else {
            return Err(bad());
        };
        let digits = rest.trim_start_matches(['(', '_']).trim_end_matches(')');
        let n: usize = digits.parse().map_err(|_| bad())?;
        match head {
            "a" => Ok(RootSystemKind::A(n)),
            "b" => Ok(RootSystemKind::B(n)),
            "d" => Ok(RootSystemKind::D(n)),
            "i2" => Ok(RootSystemKind::I2(n)),
            _ => Err(bad()),
        }
    }
}

#[derive(Clone, Debug)]
pub struct RootSystem {
    kind: RootSystemKind,
    dim: usize,
    roots: Vec<Vec<f64>>,
    exact_roots: Option<Vec<Vec<QSqrt2>>>,
    orbit_of: Vec<usize>,
    orbit_mult: Vec<BigRational>,
    /// (v, s) with σ_α x = x − s⟨v,x⟩v, chosen so that coordinate reflections
    /// are exact sign flips in floating point.
    refl: Vec<(Vec<f64>, f64)>,
}

impl RootSystem {
    /// Builds a normalized positive system with one multiplicity per orbit.
    pub fn build(kind: RootSystemKind, dim: usize, multiplicities: &[BigRational]) -> Result<Self> {
        let exact_roots = exact_positive_roots(kind, dim)?;
        let roots = match &exact_roots {
            Some(r) => r.iter().map(|v| v.iter().map(|c| c.to_f64()).collect()).collect(),
            None => float_positive_roots(kind, dim)?,
        };
        let orbit_of = compute_orbits(&roots);
        let n_orbits = orbit_of.iter().max().map_or(0, |m| m + 1);
        if multiplicities.len() != n_orbits {
            return Err(Error::MultiplicityMismatch { expected: n_orbits, got: multiplicities.len() });
        }
        if let Some(k) = multiplicities.iter().find(|k| k.is_negative()) {
            return Err(Error::NegativeMultiplicity(k.to_f64().unwrap_or(f64::NAN)));
        }
        let refl = roots
            .iter()
            .map(|a| {
                if a.iter().all(|x| x.fract() == 0.0) {
                    (a.clone(), 1.0)
                } else {
                    (a.iter().map(|x| x / std::f64::consts::SQRT_2).collect(), 2.0)
                }
            })
            .collect();
        Ok(Self { kind, dim, roots, exact_roots, orbit_of, orbit_mult: multiplicities.to_vec(), refl })
    }

    /// Convenience constructor from float multiplicities (converted to small rationals).
    pub fn build_f64(kind: RootSystemKind, dim: usize, multiplicities: &[f64]) -> Result<Self> {
        if let Some(&k) = multiplicities.iter().find(|k| **k < 0.0) {
            return Err(Error::NegativeMultiplicity(k));
        }
        let ks = multiplicities
            .iter()
            .map(|&k| crate::field::rational_from_f64(k))
            .collect::<Result<Vec<_>>>()?;
        Self::build(kind, dim, &ks)
    }

    /// The natural ambient dimension of `kind` (for product systems, the
    /// requested `dim`).
    pub fn natural_dim(kind: RootSystemKind, dim: usize) -> usize {
        match kind {
            RootSystemKind::Rank1 => 1,
            RootSystemKind::ProductOfRank1 => dim,
            RootSystemKind::A(n) => n + 1,
            RootSystemKind::B(n) | RootSystemKind::D(n) => n,
            RootSystemKind::I2(_) => 2,
        }
    }

    pub fn kind(&self) -> RootSystemKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_roots(&self) -> usize {
        self.roots.len()
    }

    pub fn is_exact(&self) -> bool {
        self.exact_roots.is_some()
    }

    pub fn root(&self, i: usize) -> &[f64] {
        &self.roots[i]
    }

    pub fn roots(&self) -> &[Vec<f64>] {
        &self.roots
    }

    pub fn exact_root(&self, i: usize) -> Option<&[QSqrt2]> {
        self.exact_roots.as_ref().map(|r| r[i].as_slice())
    }

    /// Root coordinates in the coefficient field `C`.
    pub fn root_in<C: Coeff>(&self, i: usize) -> Result<Vec<C>> {
        self.check_index(i)?;
        if let Some(r) = &self.exact_roots {
            return Ok(r[i].iter().map(C::from_q2).collect());
        }
        self.roots[i]
            .iter()
            .map(|&x| C::from_f64(x).ok_or_else(|| Error::NotExact(format!("roots of {}", self.kind))))
            .collect()
    }

    pub fn orbit_of(&self, i: usize) -> usize {
        self.orbit_of[i]
    }

    pub fn num_orbits(&self) -> usize {
        self.orbit_mult.len()
    }

    /// Root indices grouped by orbit.
    pub fn orbit_classes(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_orbits()];
        for (i, &o) in self.orbit_of.iter().enumerate() {
            out[o].push(i);
        }
        out
    }

    pub fn orbit_multiplicities(&self) -> &[BigRational] {
        &self.orbit_mult
    }

    pub fn multiplicity(&self, i: usize) -> &BigRational {
        &self.orbit_mult[self.orbit_of[i]]
    }

    pub fn k(&self, i: usize) -> f64 {
        self.multiplicity(i).to_f64().unwrap_or(f64::NAN)
    }

    /// Roots with k(α) > 0: the only ones that drive drift and jumps.
    pub fn active_roots(&self) -> Vec<usize> {
        (0..self.num_roots()).filter(|&i| !self.multiplicity(i).is_zero()).collect()
    }

    /// γ = Σ_{α∈R₊} k(α).
    pub fn gamma(&self) -> BigRational {
        (0..self.num_roots()).fold(BigRational::zero(), |acc, i| acc + self.multiplicity(i))
    }

    pub fn gamma_f64(&self) -> f64 {
        self.gamma().to_f64().unwrap_or(f64::NAN)
    }

    /// Dimension 2γ + d of the Bessel process followed by |X|.
    pub fn bessel_dimension(&self) -> f64 {
        2.0 * self.gamma_f64() + self.dim as f64
    }

    pub fn is_zero_multiplicity(&self) -> bool {
        self.orbit_mult.iter().all(|k| k.is_zero())
    }

    /// Short identifier used in fixture keys and file names.
    pub fn id(&self) -> String {
        match self.kind {
            RootSystemKind::ProductOfRank1 => format!("product{}", self.dim),
            k => k.to_string(),
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.roots.len() {
            return Err(Error::RootIndex { index: i, count: self.roots.len() });
        }
        Ok(())
    }

    fn check_dim(&self, n: usize) -> Result<()> {
        if n != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: n });
        }
        Ok(())
    }

    pub fn pairing(&self, i: usize, x: &[f64]) -> f64 {
        self.roots[i].iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// ⟨α,x⟩ in the field `C`.
    pub fn pairing_in<C: Coeff>(&self, i: usize, x: &[C]) -> Result<C> {
        self.check_dim(x.len())?;
        let a = self.root_in::<C>(i)?;
        Ok(a.into_iter().zip(x).fold(C::zero(), |acc, (ai, xi)| acc + ai * xi.clone()))
    }

    pub fn reflect(&self, i: usize, x: &[f64]) -> Vec<f64> {
        let (v, s) = &self.refl[i];
        let p = s * v.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        x.iter().zip(v).map(|(xj, vj)| xj - p * vj).collect()
    }

    pub fn reflect_in<C: Coeff>(&self, i: usize, x: &[C]) -> Result<Vec<C>> {
        let p = self.pairing_in(i, x)?;
        let a = self.root_in::<C>(i)?;
        Ok(x.iter().zip(a).map(|(xj, aj)| xj.clone() - p.clone() * aj).collect())
    }

    /// Representative of the W-orbit of `x` in the closed fundamental chamber.
    pub fn chamber_project(&self, x: &[f64]) -> Vec<f64> {
        let mut y = x.to_vec();
        // Each reflection in a root with negative pairing strictly increases
        // the pairing with a fixed interior vector, so this terminates.
        for _ in 0..10_000 {
            let worst = (0..self.num_roots())
                .map(|i| (i, self.pairing(i, &y)))
                .filter(|&(_, p)| p < 0.0)
                .min_by(|a, b| a.1.total_cmp(&b.1));
            match worst {
                Some((i, _)) => y = self.reflect(i, &y),
                None => return y,
            }
        }
        y
    }

    /// Whether `x` lies in the closed fundamental chamber.
    pub fn in_closed_chamber(&self, x: &[f64]) -> bool {
        (0..self.num_roots()).all(|i| self.pairing(i, x) >= 0.0)
    }

    /// Index of the positive root equal to ±v, if any (exact comparison).
    pub fn find_root_exact(&self, v: &[QSqrt2]) -> Option<(usize, i32)> {
        let roots = self.exact_roots.as_ref()?;
        for (i, r) in roots.iter().enumerate() {
            if r.as_slice() == v {
                return Some((i, 1));
            }
            if r.iter().zip(v).all(|(a, b)| *a == -b.clone()) {
                return Some((i, -1));
            }
        }
        None
    }

    /// Index of the positive root equal to ±v up to `tol`.
    pub fn find_root_f64(&self, v: &[f64], tol: f64) -> Option<(usize, i32)> {
        find_root(&self.roots, v, tol)
    }

    /// Explicit list of group elements as row-major d×d matrices, by
    /// breadth-first closure under the simple generators σ_α.
    pub fn group_elements(&self) -> Result<Vec<Vec<f64>>> {
        let d = self.dim;
        let gens: Vec<Vec<f64>> = (0..self.num_roots())
            .map(|i| {
                let a = &self.roots[i];
                let mut m = vec![0.0; d * d];
                for r in 0..d {
                    for c in 0..d {
                        m[r * d + c] = if r == c { 1.0 } else { 0.0 } - a[r] * a[c];
                    }
                }
                m
            })
            .collect();
        let key = |m: &[f64]| -> Vec<i64> { m.iter().map(|x| (x * 1e8).round() as i64).collect() };
        let mut id = vec![0.0; d * d];
        for i in 0..d {
            id[i * d + i] = 1.0;
        }
        let mut seen: HashMap<Vec<i64>, usize> = HashMap::new();
        let mut elems = vec![id.clone()];
        seen.insert(key(&id), 0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(e) = queue.pop_front() {
            for g in &gens {
                let prod = matmul(g, &elems[e], d);
                let k = key(&prod);
                if seen.contains_key(&k) {
                    continue;
                }
                if elems.len() >= MAX_GROUP_ORDER {
                    return Err(Error::GroupTooLarge(MAX_GROUP_ORDER));
                }
                seen.insert(k, elems.len());
                elems.push(prod);
                queue.push_back(elems.len() - 1);
            }
        }
        Ok(elems)
    }
}

pub fn apply_matrix(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|r| (0..d).map(|c| m[r * d + c] * x[c]).sum()).collect()
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        for k in 0..d {
            let ark = a[r * d + k];
            if ark == 0.0 {
                continue;
            }
            for c in 0..d {
                out[r * d + c] += ark * b[k * d + c];
            }
        }
    }
    out
}

fn find_root(roots: &[Vec<f64>], v: &[f64], tol: f64) -> Option<(usize, i32)> {
    for (i, r) in roots.iter().enumerate() {
        if r.iter().zip(v).all(|(a, b)| (a - b).abs() <= tol) {
            return Some((i, 1));
        }
        if r.iter().zip(v).all(|(a, b)| (a + b).abs() <= tol) {
            return Some((i, -1));
        }
    }
    None
}

/// Orbit label per root, numbered in order of first appearance.
fn compute_orbits(roots: &[Vec<f64>]) -> Vec<usize> {
    let n = roots.len();
    let mut label = vec![usize::MAX; n];
    let mut next = 0;
    for start in 0..n {
        if label[start] != usize::MAX {
            continue;
        }
        label[start] = next;
        let mut queue = VecDeque::from([start]);
        while let Some(j) = queue.pop_front() {
            for a in roots {
                let p: f64 = a.iter().zip(&roots[j]).map(|(x, y)| x * y).sum();
                let img: Vec<f64> = roots[j].iter().zip(a).map(|(x, y)| x - p * y).collect();
                if let Some((m, _)) = find_root(roots, &img, 1e-9) {
                    if label[m] == usize::MAX {
                        label[m] = next;
                        queue.push_back(m);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

fn bad_dim(kind: RootSystemKind, dim: usize) -> Error {
    Error::InvalidRootSystem(format!("{kind} does not live in dimension {dim}"))
}

fn unit_q2(d: usize, i: usize, c: QSqrt2) -> Vec<QSqrt2> {
    let mut v = vec![QSqrt2::zero(); d];
    v[i] = c;
    v
}

/// e_i ± e_j for i < j, already of squared length 2.
fn pm_pairs(d: usize, with_plus: bool) -> Vec<Vec<QSqrt2>> {
    let mut out = Vec::new();
    for i in 0..d {
        for j in i + 1..d {
            let mut v = unit_q2(d, i, QSqrt2::one());
            v[j] = QSqrt2::int(-1);
            out.push(v);
            if with_plus {
                let mut w = unit_q2(d, i, QSqrt2::one());
                w[j] = QSqrt2::one();
                out.push(w);
            }
        }
    }
    out
}

fn exact_positive_roots(kind: RootSystemKind, dim: usize) -> Result<Option<Vec<Vec<QSqrt2>>>> {
    if dim == 0 || dim != RootSystem::natural_dim(kind, dim) {
        return Err(bad_dim(kind, dim));
    }
    let sqrt2 = QSqrt2::sqrt2_frac(1, 1);
    let roots = match kind {
        RootSystemKind::Rank1 => vec![vec![sqrt2]],
        RootSystemKind::ProductOfRank1 => (0..dim).map(|i| unit_q2(dim, i, sqrt2.clone())).collect(),
        RootSystemKind::A(n) => {
            if n == 0 {
                return Err(bad_dim(kind, dim));
            }
            pm_pairs(dim, false)
        }
        RootSystemKind::B(n) => {
            if n < 2 {
                return Err(Error::InvalidRootSystem("B(n) needs n >= 2".into()));
            }
            let mut r: Vec<_> = (0..dim).map(|i| unit_q2(dim, i, sqrt2.clone())).collect();
            r.extend(pm_pairs(dim, true));
            r
        }
        RootSystemKind::D(n) => {
            if n < 2 {
                return Err(Error::InvalidRootSystem("D(n) needs n >= 2".into()));
            }
            pm_pairs(dim, true)
        }
        RootSystemKind::I2(m) => {
            if m < 2 {
                return Err(Error::InvalidRootSystem("I2(m) needs m >= 2".into()));
            }
            match m {
                2 => vec![vec![sqrt2.clone(), QSqrt2::zero()], vec![QSqrt2::zero(), sqrt2]],
                4 => vec![
                    vec![QSqrt2::one(), QSqrt2::int(-1)],
                    vec![sqrt2.clone(), QSqrt2::zero()],
                    vec![QSqrt2::one(), QSqrt2::one()],
                    vec![QSqrt2::zero(), sqrt2],
                ],
                _ => return Ok(None),
            }
        }
    };
    Ok(Some(roots))
}

/// Dihedral roots √2(cos θ_j, sin θ_j), θ_j = (j+1)π/m − π/2, j = 0..m−1.
fn float_positive_roots(kind: RootSystemKind, dim: usize) -> Result<Vec<Vec<f64>>> {
    match kind {
        RootSystemKind::I2(m) if dim == 2 => Ok((0..m)
            .map(|j| {
                let th = (j as f64 + 1.0) * std::f64::consts::PI / m as f64 - std::f64::consts::FRAC_PI_2;
                // cos and sin of multiples of π/2 come back as ~1e-16; snap them to zero.
                let snap = |v: f64| if v.abs() < 1e-14 { 0.0 } else { v };
                vec![snap(std::f64::consts::SQRT_2 * th.cos()), snap(std::f64::consts::SQRT_2 * th.sin())]
            })
            .collect()),
        _ => Err(bad_dim(kind, dim)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::rat;

    fn ks(v: &[i64]) -> Vec<BigRational> {
        v.iter().map(|&k| rat(k, 1)).collect()
    }

    #[test]
    fn rank1_and_product() {
        let rs = RootSystem::build(RootSystemKind::Rank1, 1, &ks(&[1])).unwrap();
        assert_eq!(rs.exact_root(0).unwrap(), &[QSqrt2::sqrt2_frac(1, 1)]);
        assert_eq!(rs.gamma(), rat(1, 1));
        assert_eq!(rs.reflect(0, &[3.0]), vec![-3.0]);
        assert_eq!(rs.pairing_in(0, &[QSqrt2::one()]).unwrap(), QSqrt2::sqrt2_frac(1, 1));
        let p = RootSystem::build(RootSystemKind::ProductOfRank1, 2, &[rat(1, 2), rat(1, 2)]).unwrap();
        assert_eq!(p.gamma(), rat(1, 1));
        assert_eq!(p.reflect_in(0, &[QSqrt2::int(3), QSqrt2::int(5)]).unwrap(), vec![QSqrt2::int(-3), QSqrt2::int(5)]);
        assert_eq!(p.reflect(0, &[3.0, 5.0]), vec![-3.0, 5.0]);
        assert_eq!(p.chamber_project(&[-3.0, 5.0]), vec![3.0, 5.0]);
    }

    #[test]
    fn b2_orbits() {
        let rs = RootSystem::build(RootSystemKind::B(2), 2, &[rat(1, 1), rat(3, 1)]).unwrap();
        assert_eq!(rs.num_roots(), 4);
        assert_eq!(rs.num_orbits(), 2);
        assert_eq!(rs.gamma(), rat(8, 1));
        // e1 - e2 is long and orthogonal to (1,1)
        let i = rs.find_root_exact(&[QSqrt2::one(), QSqrt2::int(-1)]).unwrap().0;
        assert!(rs.pairing_in(i, &[QSqrt2::one(), QSqrt2::one()]).unwrap().is_zero());
        assert_eq!(rs.group_elements().unwrap().len(), 8);
    }

    #[test]
    fn orbit_counts() {
        let count = |k, d| RootSystem::build(k, d, &ks(&[0, 0, 0])).err();
        assert!(matches!(count(RootSystemKind::A(2), 3), Some(Error::MultiplicityMismatch { expected: 1, .. })));
        assert!(matches!(count(RootSystemKind::D(2), 2), Some(Error::MultiplicityMismatch { expected: 2, .. })));
        assert!(matches!(count(RootSystemKind::D(3), 3), Some(Error::MultiplicityMismatch { expected: 1, .. })));
        assert!(matches!(count(RootSystemKind::I2(5), 2), Some(Error::MultiplicityMismatch { expected: 1, .. })));
        assert!(matches!(count(RootSystemKind::I2(6), 2), Some(Error::MultiplicityMismatch { expected: 2, .. })));
        assert!(matches!(
            RootSystem::build(RootSystemKind::B(2), 3, &ks(&[1, 1])),
            Err(Error::InvalidRootSystem(_))
        ));
        assert!(matches!(
            RootSystem::build(RootSystemKind::Rank1, 1, &[rat(-1, 2)]),
            Err(Error::NegativeMultiplicity(_))
        ));
    }

    #[test]
    fn dihedral_groups() {
        for m in [3usize, 5, 6] {
            let rs = RootSystem::build(RootSystemKind::I2(m), 2, &vec![rat(1, 1); if m % 2 == 0 { 2 } else { 1 }]).unwrap();
            assert!(!rs.is_exact());
            assert_eq!(rs.group_elements().unwrap().len(), 2 * m);
        }
        let rs = RootSystem::build(RootSystemKind::I2(4), 2, &ks(&[1, 2])).unwrap();
        assert!(rs.is_exact());
        assert_eq!(rs.group_elements().unwrap().len(), 8);
    }

    #[test]
    fn kind_parsing() {
        assert_eq!("B(2)".parse::<RootSystemKind>().unwrap(), RootSystemKind::B(2));
        assert_eq!("a2".parse::<RootSystemKind>().unwrap(), RootSystemKind::A(2));
        assert_eq!("I2(5)".parse::<RootSystemKind>().unwrap(), RootSystemKind::I2(5));
        assert_eq!("rank1".parse::<RootSystemKind>().unwrap(), RootSystemKind::Rank1);
        assert!("E8x".parse::<RootSystemKind>().is_err());
    }
}
