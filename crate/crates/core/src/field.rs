//! Coefficient fields for the symbolic layer.
//!
//! The exact field is ℚ(√2): roots normalized to squared length 2 have
//! coordinates in it for every crystallographic system built here, so
//! reflections, pairings and the Dunkl operators stay exact. `f64` is the
//! float mode used for non-crystallographic dihedral systems and for
//! irrational multiplicity square roots.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Relative magnitude below which a float coefficient counts as zero.
pub const FLOAT_ZERO_TOL: f64 = 1e-12;

/// Field operations needed by polynomials, linear algebra and the Dunkl calculus.
pub trait Coeff:
    Clone
    + fmt::Debug
    + PartialEq
    + Send
    + Sync
    + 'static
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
{
    /// Whether arithmetic in this field is exact.
    const EXACT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn is_zero(&self) -> bool;
    fn from_rational(r: &BigRational) -> Self;
    fn from_i64(n: i64) -> Self;
    fn from_q2(q: &QSqrt2) -> Self;
    /// Float input; `None` when the field cannot hold an arbitrary float.
    fn from_f64(x: f64) -> Option<Self>;
    fn inv(&self) -> Option<Self>;
    fn to_f64(&self) -> f64;
    /// √r for a nonnegative rational, when it lies in the field.
    fn sqrt_rational(r: &BigRational) -> Option<Self>;
    /// Zero test relative to a reference magnitude (exact fields ignore `scale`).
    fn negligible(&self, scale: f64) -> bool;
    fn canonical(&self) -> String;

    fn magnitude(&self) -> f64 {
        self.to_f64().abs()
    }
}

/// An element a + b√2 of ℚ(√2).
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QSqrt2 {
    pub a: BigRational,
    pub b: BigRational,
}

impl QSqrt2 {
    pub fn new(a: BigRational, b: BigRational) -> Self {
        Self { a, b }
    }

    pub fn rational(a: BigRational) -> Self {
        Self { a, b: BigRational::zero() }
    }

    pub fn int(n: i64) -> Self {
        Self::rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn frac(p: i64, q: i64) -> Self {
        Self::rational(BigRational::new(BigInt::from(p), BigInt::from(q)))
    }

    /// `p/q · √2`.
    pub fn sqrt2_frac(p: i64, q: i64) -> Self {
        Self {
            a: BigRational::zero(),
            b: BigRational::new(BigInt::from(p), BigInt::from(q)),
        }
    }

    pub fn is_rational(&self) -> bool {
        self.b.is_zero()
    }

    /// Conjugate a − b√2.
    pub fn conj(&self) -> Self {
        Self { a: self.a.clone(), b: -self.b.clone() }
    }

    /// Field norm a² − 2b².
    pub fn norm(&self) -> BigRational {
        &self.a * &self.a - BigRational::from_integer(BigInt::from(2)) * &self.b * &self.b
    }

    pub fn signum(&self) -> i32 {
        if self.is_zero_q() {
            return 0;
        }
        // Sign of a + b√2 without rounding: compare a² with 2b² when signs differ.
        let sa = self.a.signum();
        let sb = self.b.signum();
        if sb.is_zero() {
            return if sa.is_positive() { 1 } else { -1 };
        }
        if sa.is_zero() || sa == sb {
            return if sb.is_positive() { 1 } else { -1 };
        }
        let n = self.norm();
        let a_dominates = n.is_positive();
        match (a_dominates, sa.is_positive()) {
            (true, true) | (false, false) => 1,
            _ => -1,
        }
    }

    fn is_zero_q(&self) -> bool {
        self.a.is_zero() && self.b.is_zero()
    }
}

fn mul_q2(x: &QSqrt2, y: &QSqrt2) -> QSqrt2 {
    let two = BigRational::from_integer(BigInt::from(2));
    QSqrt2 {
        a: &x.a * &y.a + two * &x.b * &y.b,
        b: &x.a * &y.b + &x.b * &y.a,
    }
}

impl Add for QSqrt2 {
    type Output = QSqrt2;
    fn add(self, o: QSqrt2) -> QSqrt2 {
        QSqrt2 { a: self.a + o.a, b: self.b + o.b }
    }
}

impl Sub for QSqrt2 {
    type Output = QSqrt2;
    fn sub(self, o: QSqrt2) -> QSqrt2 {
        QSqrt2 { a: self.a - o.a, b: self.b - o.b }
    }
}

impl Mul for QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, o: QSqrt2) -> QSqrt2 {
        mul_q2(&self, &o)
    }
}

impl<'a> Mul<&'a QSqrt2> for &'a QSqrt2 {
    type Output = QSqrt2;
    fn mul(self, o: &QSqrt2) -> QSqrt2 {
        mul_q2(self, o)
    }
}

impl Neg for QSqrt2 {
    type Output = QSqrt2;
    fn neg(self) -> QSqrt2 {
        QSqrt2 { a: -self.a, b: -self.b }
    }
}

impl AddAssign for QSqrt2 {
    fn add_assign(&mut self, o: QSqrt2) {
        self.a += o.a;
        self.b += o.b;
    }
}

impl SubAssign for QSqrt2 {
    fn sub_assign(&mut self, o: QSqrt2) {
        self.a -= o.a;
        self.b -= o.b;
    }
}

impl fmt::Display for QSqrt2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.b.is_negative() { "-" } else { "+" };
        write!(f, "{}{}{}*sqrt2", self.a, sign, self.b.abs())
    }
}

fn exact_sqrt(n: &BigInt) -> Option<BigInt> {
    if n.is_negative() {
        return None;
    }
    let s = n.sqrt();
    if &(&s * &s) == n {
        Some(s)
    } else {
        None
    }
}

/// √r when r is a perfect rational square.
fn rational_sqrt(r: &BigRational) -> Option<BigRational> {
    let p = exact_sqrt(r.numer())?;
    let q = exact_sqrt(r.denom())?;
    Some(BigRational::new(p, q))
}

impl Coeff for QSqrt2 {
    const EXACT: bool = true;

    fn zero() -> Self {
        Self::int(0)
    }
    fn one() -> Self {
        Self::int(1)
    }
    fn is_zero(&self) -> bool {
        self.is_zero_q()
    }
    fn from_rational(r: &BigRational) -> Self {
        Self::rational(r.clone())
    }
    fn from_i64(n: i64) -> Self {
        Self::int(n)
    }
    fn from_q2(q: &QSqrt2) -> Self {
        q.clone()
    }
    fn from_f64(_x: f64) -> Option<Self> {
        None
    }
    fn inv(&self) -> Option<Self> {
        if self.is_zero_q() {
            return None;
        }
        let n = self.norm();
        let c = self.conj();
        Some(QSqrt2 { a: c.a / &n, b: c.b / n })
    }
    fn to_f64(&self) -> f64 {
        self.a.to_f64().unwrap_or(f64::NAN) + self.b.to_f64().unwrap_or(f64::NAN) * std::f64::consts::SQRT_2
    }
    fn sqrt_rational(r: &BigRational) -> Option<Self> {
        if r.is_negative() {
            return None;
        }
        if let Some(s) = rational_sqrt(r) {
            return Some(Self::rational(s));
        }
        // r = 2 s²  ⇒  √r = s√2
        let half = r / BigRational::from_integer(BigInt::from(2));
        rational_sqrt(&half).map(|s| QSqrt2 { a: BigRational::zero(), b: s })
    }
    fn negligible(&self, _scale: f64) -> bool {
        self.is_zero_q()
    }
    fn canonical(&self) -> String {
        self.to_string()
    }
}

impl Coeff for f64 {
    const EXACT: bool = false;

    fn zero() -> Self {
        0.0
    }
    fn one() -> Self {
        1.0
    }
    fn is_zero(&self) -> bool {
        *self == 0.0
    }
    fn from_rational(r: &BigRational) -> Self {
        r.to_f64().unwrap_or(f64::NAN)
    }
    fn from_i64(n: i64) -> Self {
        n as f64
    }
    fn from_q2(q: &QSqrt2) -> Self {
        q.to_f64()
    }
    fn from_f64(x: f64) -> Option<Self> {
        Some(x)
    }
    fn inv(&self) -> Option<Self> {
        if *self == 0.0 {
            None
        } else {
            Some(1.0 / self)
        }
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn sqrt_rational(r: &BigRational) -> Option<Self> {
        let x = r.to_f64()?;
        (x >= 0.0).then(|| x.sqrt())
    }
    fn negligible(&self, scale: f64) -> bool {
        self.abs() <= FLOAT_ZERO_TOL * scale
    }
    fn canonical(&self) -> String {
        format!("{:e}", self)
    }
}

/// Simplest rational within `1e-12` of `x` (denominator ≤ 10⁹), found by continued fractions.
///
/// Decimal inputs such as `0.6` come back as `3/5` rather than their binary expansion.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    if !x.is_finite() {
        return Err(Error::InvalidArgument(format!("non-finite value {x}")));
    }
    let tol = 1e-12 * x.abs().max(1.0);
    let (mut h0, mut h1) = (BigInt::zero(), BigInt::one());
    let (mut k0, mut k1) = (BigInt::one(), BigInt::zero());
    let mut rem = x;
    for _ in 0..64 {
        let a = rem.floor();
        let ai = BigInt::from(a as i64);
        let h2 = &ai * &h1 + &h0;
        let k2 = &ai * &k1 + &k0;
        h0 = std::mem::replace(&mut h1, h2);
        k0 = std::mem::replace(&mut k1, k2);
        let approx = h1.to_f64().unwrap() / k1.to_f64().unwrap();
        if (approx - x).abs() <= tol || k1 > BigInt::from(1_000_000_000i64) {
            break;
        }
        let frac = rem - a;
        if frac == 0.0 {
            break;
        }
        rem = 1.0 / frac;
    }
    let r = BigRational::new(h1, k1);
    if (r.to_f64().unwrap() - x).abs() > 1e-9 * x.abs().max(1.0) {
        return Ok(BigRational::from_float(x).expect("finite"));
    }
    Ok(r)
}

pub fn rat(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn q2_arithmetic() {
        let s = QSqrt2::sqrt2_frac(1, 1);
        assert_eq!(s.clone() * s.clone(), QSqrt2::int(2));
        let x = QSqrt2::new(rat(3, 2), rat(-1, 3));
        let y = x.inv().unwrap();
        assert_eq!(x * y, QSqrt2::one());
    }

    #[test]
    fn q2_sign() {
        assert_eq!(QSqrt2::new(rat(1, 1), rat(-1, 1)).signum(), -1);
        assert_eq!(QSqrt2::new(rat(2, 1), rat(-1, 1)).signum(), 1);
        assert_eq!(QSqrt2::new(rat(-2, 1), rat(1, 1)).signum(), -1);
        assert_eq!(QSqrt2::new(rat(-1, 1), rat(1, 1)).signum(), 1);
        assert_eq!(QSqrt2::zero().signum(), 0);
    }

    #[test]
    fn sqrt_of_rationals() {
        assert_eq!(QSqrt2::sqrt_rational(&rat(1, 1)), Some(QSqrt2::one()));
        assert_eq!(QSqrt2::sqrt_rational(&rat(1, 2)), Some(QSqrt2::sqrt2_frac(1, 2)));
        assert_eq!(QSqrt2::sqrt_rational(&rat(2, 1)), Some(QSqrt2::sqrt2_frac(1, 1)));
        assert_eq!(QSqrt2::sqrt_rational(&rat(9, 4)), Some(QSqrt2::frac(3, 2)));
        assert_eq!(QSqrt2::sqrt_rational(&rat(3, 5)), None);
    }

    #[test]
    fn canonical_text() {
        assert_eq!(QSqrt2::frac(1, 3).canonical(), "1/3+0*sqrt2");
        assert_eq!(QSqrt2::new(rat(-1, 1), rat(-2, 3)).canonical(), "-1-2/3*sqrt2");
    }

    #[test]
    fn decimals_become_small_rationals() {
        assert_eq!(rational_from_f64(0.6).unwrap(), rat(3, 5));
        assert_eq!(rational_from_f64(0.25).unwrap(), rat(1, 4));
        assert_eq!(rational_from_f64(2.0).unwrap(), rat(2, 1));
        assert_eq!(rational_from_f64(-1.5).unwrap(), rat(-3, 2));
    }
}
