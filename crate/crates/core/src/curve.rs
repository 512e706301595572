//! Curves `y^2 = x^3 + a2 x^2 + a4 x + a6` over Q, the chord-tangent group
//! law, integral rescaling and point counts over prime fields.

use std::fmt;

use num_integer::Integer as _;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::numtheory::{factorize, FactorBudget, Integer, Rational};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum RationalPoint {
    Infinity,
    Affine { x: Rational, y: Rational },
}

impl RationalPoint {
    pub fn affine(x: Rational, y: Rational) -> Self {
        RationalPoint::Affine { x, y }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, RationalPoint::Infinity)
    }

    pub fn x(&self) -> Option<&Rational> {
        match self {
            RationalPoint::Infinity => None,
            RationalPoint::Affine { x, .. } => Some(x),
        }
    }

    pub fn y(&self) -> Option<&Rational> {
        match self {
            RationalPoint::Infinity => None,
            RationalPoint::Affine { y, .. } => Some(y),
        }
    }

    pub fn negate(&self) -> Self {
        match self {
            RationalPoint::Infinity => RationalPoint::Infinity,
            RationalPoint::Affine { x, y } => RationalPoint::affine(x.clone(), -y),
        }
    }
}

impl fmt::Display for RationalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RationalPoint::Infinity => f.write_str("O"),
            RationalPoint::Affine { x, y } => write!(f, "({x}, {y})"),
        }
    }
}

/// Discriminant of the monic cubic `x^3 + a x^2 + b x + c`.
pub fn cubic_discriminant(a: &Rational, b: &Rational, c: &Rational) -> Rational {
    let r = |n: i64| Rational::from_integer(Integer::from(n));
    a * a * b * b - r(4) * b * b * b - r(4) * a * a * a * c - r(27) * c * c
        + r(18) * a * b * c
}

/// `y^2 = x^3 + a2 x^2 + a4 x + a6` with rational coefficients, nonsingular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CubicModel {
    a2: Rational,
    a4: Rational,
    a6: Rational,
}

impl CubicModel {
    pub fn new(a2: Rational, a4: Rational, a6: Rational) -> Result<Self> {
        if cubic_discriminant(&a2, &a4, &a6).is_zero() {
            return Err(Error::SingularModel);
        }
        Ok(Self { a2, a4, a6 })
    }

    /// `y^2 = (x - r1)(x - r2)(x - r3)`.
    pub fn from_roots(r1: &Rational, r2: &Rational, r3: &Rational) -> Result<Self> {
        Self::new(
            -(r1 + r2 + r3),
            r1 * r2 + r1 * r3 + r2 * r3,
            -(r1 * r2 * r3),
        )
    }

    pub fn a2(&self) -> &Rational {
        &self.a2
    }
    pub fn a4(&self) -> &Rational {
        &self.a4
    }
    pub fn a6(&self) -> &Rational {
        &self.a6
    }

    /// Sixteen times the discriminant of the cubic; `16 B^2 (A^2 - 4B)` when
    /// `a6 = 0`.
    pub fn discriminant(&self) -> Rational {
        cubic_discriminant(&self.a2, &self.a4, &self.a6) * Rational::from_integer(16.into())
    }

    /// Right-hand side `x^3 + a2 x^2 + a4 x + a6`.
    pub fn rhs(&self, x: &Rational) -> Rational {
        ((x + &self.a2) * x + &self.a4) * x + &self.a6
    }

    pub fn contains(&self, p: &RationalPoint) -> bool {
        match p {
            RationalPoint::Infinity => true,
            RationalPoint::Affine { x, y } => y * y == self.rhs(x),
        }
    }

    fn check(&self, p: &RationalPoint) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::PointNotOnCurve)
        }
    }

    pub fn add_points(&self, p: &RationalPoint, q: &RationalPoint) -> Result<RationalPoint> {
        self.check(p)?;
        self.check(q)?;
        Ok(self.add_unchecked(p, q))
    }

    pub(crate) fn add_unchecked(&self, p: &RationalPoint, q: &RationalPoint) -> RationalPoint {
        let (x1, y1, x2, y2) = match (p, q) {
            (RationalPoint::Infinity, _) => return q.clone(),
            (_, RationalPoint::Infinity) => return p.clone(),
            (RationalPoint::Affine { x: x1, y: y1 }, RationalPoint::Affine { x: x2, y: y2 }) => {
                (x1, y1, x2, y2)
            }
        };
        let lambda = if x1 != x2 {
            (y2 - y1) / (x2 - x1)
        } else if y1 == y2 && !y1.is_zero() {
            let three = Rational::from_integer(3.into());
            let two = Rational::from_integer(2.into());
            (three * x1 * x1 + &two * &self.a2 * x1 + &self.a4) / (two * y1)
        } else {
            return RationalPoint::Infinity;
        };
        let x3 = &lambda * &lambda - &self.a2 - x1 - x2;
        let y3 = lambda * (x1 - &x3) - y1;
        RationalPoint::affine(x3, y3)
    }

    /// `n P` by double-and-add; negative `n` multiplies `-P`.
    pub fn scalar_multiply(&self, n: &Integer, p: &RationalPoint) -> Result<RationalPoint> {
        self.check(p)?;
        Ok(self.multiply_unchecked(n, p))
    }

    pub(crate) fn multiply_unchecked(&self, n: &Integer, p: &RationalPoint) -> RationalPoint {
        let base = if n.is_negative() { p.negate() } else { p.clone() };
        let n = n.abs();
        let mut acc = RationalPoint::Infinity;
        for i in (0..n.bits()).rev() {
            acc = self.add_unchecked(&acc, &acc);
            if n.bit(i) {
                acc = self.add_unchecked(&acc, &base);
            }
        }
        acc
    }

    /// Model obtained by `x -> x / u^2, y -> y / u^3`: coefficients
    /// `(a2 u^2, a4 u^4, a6 u^6)`. Points map by `(x, y) -> (u^2 x, u^3 y)`.
    pub fn rescale(&self, u: &Rational) -> CubicModel {
        let u2 = u * u;
        let u4 = &u2 * &u2;
        let u6 = &u4 * &u2;
        CubicModel {
            a2: &self.a2 * u2,
            a4: &self.a4 * u4,
            a6: &self.a6 * u6,
        }
    }

    /// Model for the substitution `x = X + t`, so a root `r` of this model
    /// becomes the root `r - t`.
    pub fn translate(&self, t: &Rational) -> CubicModel {
        let three = Rational::from_integer(3.into());
        CubicModel {
            a2: &self.a2 + &three * t,
            a4: &self.a4 + Rational::from_integer(2.into()) * &self.a2 * t + three * t * t,
            a6: self.rhs(t),
        }
    }

    /// Smallest positive integer `u` making `(a2 u^2, a4 u^4, a6 u^6)`
    /// integral.
    pub fn integral_model(&self) -> Result<IntegralModel> {
        self.integral_model_with_base(&Integer::one())
    }

    /// Smallest `u` that is a multiple of `base` and makes the rescaled
    /// coefficients integral.
    pub fn integral_model_with_base(&self, base: &Integer) -> Result<IntegralModel> {
        let scaled = self.rescale(&Rational::from_integer(base.clone()));
        let mut u = base.clone();
        let mut needed: Vec<(Integer, u32)> = Vec::new();
        for (coef, weight) in [(&scaled.a2, 2u32), (&scaled.a4, 4), (&scaled.a6, 6)] {
            if coef.denom().is_one() {
                continue;
            }
            for (p, e) in factorize(coef.denom(), FactorBudget::default())?.factors {
                let need = e.div_ceil(weight);
                match needed.iter_mut().find(|(q, _)| *q == p) {
                    Some((_, cur)) => *cur = (*cur).max(need),
                    None => needed.push((p, need)),
                }
            }
        }
        for (p, e) in needed {
            u *= num_traits::pow(p, e as usize);
        }
        let rescaled = self.rescale(&Rational::from_integer(u.clone()));
        IntegralModel::new(
            rescaled.a2.to_integer(),
            rescaled.a4.to_integer(),
            rescaled.a6.to_integer(),
            u,
        )
    }
}

impl fmt::Display for CubicModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y^2 = x^3 + ({})x^2 + ({})x + ({})", self.a2, self.a4, self.a6)
    }
}

/// Integral coefficients together with the scale `u` relating the model to
/// the rational model it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralModel {
    pub a2: Integer,
    pub a4: Integer,
    pub a6: Integer,
    pub scale: Integer,
    discriminant: Integer,
}

impl IntegralModel {
    pub fn new(a2: Integer, a4: Integer, a6: Integer, scale: Integer) -> Result<Self> {
        let r = |n: &Integer| Rational::from_integer(n.clone());
        let disc: Integer = cubic_discriminant(&r(&a2), &r(&a4), &r(&a6)).to_integer() * 16;
        if disc.is_zero() {
            return Err(Error::SingularModel);
        }
        if !scale.is_positive() {
            return Err(Error::InvalidInput("scale must be positive".into()));
        }
        Ok(Self { a2, a4, a6, scale, discriminant: disc })
    }

    /// Integral model that is its own source (`u = 1`).
    pub fn from_coefficients(a2: i64, a4: i64, a6: i64) -> Result<Self> {
        Self::new(a2.into(), a4.into(), a6.into(), Integer::one())
    }

    pub fn discriminant(&self) -> &Integer {
        &self.discriminant
    }

    /// This model viewed as a rational model.
    pub fn as_cubic(&self) -> CubicModel {
        let r = |n: &Integer| Rational::from_integer(n.clone());
        CubicModel { a2: r(&self.a2), a4: r(&self.a4), a6: r(&self.a6) }
    }

    /// The rational model this was rescaled from.
    pub fn source_model(&self) -> CubicModel {
        self.as_cubic().rescale(&Rational::new(Integer::one(), self.scale.clone()))
    }

    pub fn point_from_source(&self, p: &RationalPoint) -> RationalPoint {
        match p {
            RationalPoint::Infinity => RationalPoint::Infinity,
            RationalPoint::Affine { x, y } => {
                let u = Rational::from_integer(self.scale.clone());
                let u2 = &u * &u;
                RationalPoint::affine(x * &u2, y * u2 * u)
            }
        }
    }

    pub fn point_to_source(&self, p: &RationalPoint) -> RationalPoint {
        match p {
            RationalPoint::Infinity => RationalPoint::Infinity,
            RationalPoint::Affine { x, y } => {
                let u = Rational::from_integer(self.scale.clone());
                let u2 = &u * &u;
                RationalPoint::affine(x / &u2, y / (u2 * u))
            }
        }
    }

    pub fn is_good_prime(&self, p: u64) -> bool {
        !(&self.discriminant % p).is_zero()
    }

    fn residues(&self, p: u64) -> (u64, u64, u64) {
        let pb = Integer::from(p);
        let r = |n: &Integer| n.mod_floor(&pb).to_u64().unwrap();
        (r(&self.a2), r(&self.a4), r(&self.a6))
    }

    /// Reduction modulo a prime of good reduction, with `|E(F_p)|`.
    pub fn reduce_mod_p(&self, p: u64) -> Result<FpCurveSummary> {
        if !self.is_good_prime(p) {
            return Err(Error::BadReduction(p));
        }
        let (a2, a4, a6) = self.residues(p);
        let order = count_points_mod_p(a2, a4, a6, p);
        Ok(FpCurveSummary {
            p,
            a2,
            a4,
            a6,
            order,
            trace: p as i64 + 1 - order as i64,
        })
    }

    /// `a_p = p + 1 - |E(F_p)|`.
    pub fn trace_ap(&self, p: u64) -> Result<i64> {
        self.reduce_mod_p(p).map(|s| s.trace)
    }
}

impl fmt::Display for IntegralModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "y^2 = x^3 + {}x^2 + {}x + {}", self.a2, self.a4, self.a6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FpCurveSummary {
    pub p: u64,
    pub a2: u64,
    pub a4: u64,
    pub a6: u64,
    /// Includes the point at infinity.
    pub order: u64,
    pub trace: i64,
}

/// `|E(F_p)| = 1 + sum_x (1 + chi(f(x)))` with `chi(0) = 0`. Coefficients
/// must already be reduced into `0..p`.
pub fn count_points_mod_p(a2: u64, a4: u64, a6: u64, p: u64) -> u64 {
    assert!((2..(1 << 32)).contains(&p), "prime out of range for word-sized counting");
    let mut is_square = vec![false; p as usize];
    for y in 0..p {
        is_square[(y * y % p) as usize] = true;
    }
    let mut count = 1u64;
    for x in 0..p {
        let fx = (((x + a2) % p * x % p + a4) % p * x % p + a6) % p;
        if fx == 0 {
            count += 1;
        } else if is_square[fx as usize] {
            count += 2;
        }
    }
    count
}
