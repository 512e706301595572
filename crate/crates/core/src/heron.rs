//! The one-parameter family of Heron triangles
//!
//! ```text
//! a(k) = 5k^2 - 4k + 4
//! b(k) = k (k^2 - 4k + 20) / 2
//! c(k) = (k + 2)(k^2 - 4) / 2
//! ```
//!
//! and the curves `y^2 = (x + ab)(x + bc)(x + ac)` built from it. Every
//! model constructed here is cross-checked against the closed forms for the
//! shifted coefficients `A`, `B` and the factored discriminant; a mismatch is
//! a hard error.

use num_traits::{One, Signed, Zero};

use crate::curve::{CubicModel, IntegralModel, RationalPoint};
use crate::error::{Error, Result};
use crate::numtheory::{is_rational_square, Integer, Rational};

/// Integral models of the family always use a multiple of this scale, which
/// clears the halves in `b(k)` and `c(k)`.
pub const FAMILY_SCALE: i64 = 2;

fn r(n: i64) -> Rational {
    Rational::from_integer(Integer::from(n))
}

fn poly(k: &Rational, coeffs: &[i64]) -> Rational {
    // ascending coefficients
    coeffs.iter().rev().fold(Rational::zero(), |acc, &c| acc * k + r(c))
}

/// `k` values where the family degenerates.
pub fn is_singular_parameter(k: &Rational) -> bool {
    k.is_zero() || *k == r(2) || *k == r(-2)
}

fn check_parameter(k: &Rational) -> Result<()> {
    if is_singular_parameter(k) {
        Err(Error::SingularParameter(k.clone()))
    } else {
        Ok(())
    }
}

/// Side lengths without the admissibility check.
pub fn raw_sides(k: &Rational) -> (Rational, Rational, Rational) {
    let half = Rational::new(1.into(), 2.into());
    let a = poly(k, &[4, -4, 5]);
    let b = &half * k * poly(k, &[20, -4, 1]);
    let c = half * (k + r(2)) * poly(k, &[-4, 0, 1]);
    (a, b, c)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeronTriple {
    pub k: Rational,
    pub a: Rational,
    pub b: Rational,
    pub c: Rational,
    pub semiperimeter: Rational,
    pub squared_area: Rational,
    /// All sides positive and the strict triangle inequality holds.
    pub geometric: bool,
}

pub fn heron_sides(k: &Rational) -> Result<HeronTriple> {
    check_parameter(k)?;
    let (a, b, c) = raw_sides(k);
    let s = (&a + &b + &c) / r(2);
    let squared_area = &s * (&s - &a) * (&s - &b) * (&s - &c);
    let geometric = a.is_positive()
        && b.is_positive()
        && c.is_positive()
        && &a + &b > c
        && &a + &c > b
        && &b + &c > a;
    Ok(HeronTriple {
        k: k.clone(),
        a,
        b,
        c,
        semiperimeter: s,
        squared_area,
        geometric,
    })
}

/// Nonnegative square root of `P(P-a)(P-b)(P-c)`.
pub fn heron_area(k: &Rational) -> Result<Rational> {
    let t = heron_sides(k)?;
    is_rational_square(&t.squared_area).ok_or(Error::NotASquare(t.squared_area))
}

/// `y^2 = (x + ab)(x + bc)(x + ac)`.
pub fn product_model(k: &Rational) -> Result<CubicModel> {
    check_parameter(k)?;
    let (a, b, c) = raw_sides(k);
    CubicModel::from_roots(&-(&a * &b), &-(&b * &c), &-(&a * &c))
}

/// `A(k)` from its closed form.
pub fn closed_form_a(k: &Rational) -> Rational {
    // k^6/4 - 3k^5 - 16k^4 + 96k^3 - 44k^2 - 16k + 32
    poly(k, &[32, -16, -44, 96, -16, -3]) + k.pow(6) / r(4)
}

/// `B(k)` from its closed form.
pub fn closed_form_b(k: &Rational) -> Rational {
    let first = poly(k, &[64, -192, -16, 96, -4, -12, 1]);
    let second = poly(k, &[-16, -32, 40, -72, 15]);
    -(first * second) / r(4)
}

/// The factored discriminant of the shifted model, evaluated directly.
pub fn family_discriminant(k: &Rational) -> Rational {
    let sq = |q: Rational| &q * &q;
    let factors = [
        sq(k.clone()),
        sq(poly(k, &[20, -4, 1])),
        sq(poly(k, &[-16, 4, -8, 1])),
        sq(poly(k, &[4, -12, 1])),
        (k - r(2)).pow(4),
        (k + r(2)).pow(4),
        sq(poly(k, &[4, -4, 5])),
        sq(poly(k, &[-4, -12, 3])),
    ];
    factors.into_iter().fold(Rational::new(1.into(), 16.into()), |acc, f| acc * f)
}

/// `y^2 = x^3 + A x^2 + B x`: the product model translated so its root
/// `-ac` sits at 0. The translation result must agree with the closed forms.
pub fn shifted_model(k: &Rational) -> Result<CubicModel> {
    let product = product_model(k)?;
    let (a, _, c) = raw_sides(k);
    let shifted = product.translate(&-(&a * &c));
    if !shifted.a6().is_zero() {
        return Err(Error::Internal("translated model has nonzero a6".into()));
    }
    if *shifted.a2() != closed_form_a(k) {
        return Err(Error::ClosedFormMismatch { what: "A", k: k.clone() });
    }
    if *shifted.a4() != closed_form_b(k) {
        return Err(Error::ClosedFormMismatch { what: "B", k: k.clone() });
    }
    Ok(shifted)
}

/// `(0, abc)` on the product model.
pub fn base_point(k: &Rational) -> Result<RationalPoint> {
    let model = product_model(k)?;
    let (a, b, c) = raw_sides(k);
    let p = RationalPoint::affine(Rational::zero(), a * b * c);
    if !model.contains(&p) {
        return Err(Error::Internal("base point is off the product model".into()));
    }
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SideCoincidence {
    pub a_eq_b: bool,
    pub a_eq_c: bool,
    pub b_eq_c: bool,
}

impl SideCoincidence {
    pub fn any(&self) -> bool {
        self.a_eq_b || self.a_eq_c || self.b_eq_c
    }
}

/// Polynomials (ascending coefficients) vanishing exactly where two sides
/// coincide: `2(a - b)`, `2(a - c)`, `2(b - c)` up to sign.
pub fn coincidence_polynomials() -> [(&'static str, Vec<Rational>); 3] {
    [
        ("a=b", [-8, 28, -14, 1].map(r).to_vec()),
        ("a=c", [-16, 4, -8, 1].map(r).to_vec()),
        ("b=c", [-8, -24, 6].map(r).to_vec()),
    ]
}

/// Which side pairs coincide at `k`. Defined for every `k`, including the
/// singular ones.
pub fn side_coincidence(k: &Rational) -> SideCoincidence {
    let (a, b, c) = raw_sides(k);
    SideCoincidence {
        a_eq_b: a == b,
        a_eq_c: a == c,
        b_eq_c: b == c,
    }
}

/// Which side is the hypotenuse when the Pythagorean relation holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RightAngle {
    /// `b^2 + c^2 = a^2`
    HypotenuseA,
    /// `a^2 + c^2 = b^2`
    HypotenuseB,
    /// `a^2 + b^2 = c^2`
    HypotenuseC,
}

pub fn right_triangle_relation(k: &Rational) -> Result<Option<RightAngle>> {
    let t = heron_sides(k)?;
    let (a2, b2, c2) = (&t.a * &t.a, &t.b * &t.b, &t.c * &t.c);
    Ok(if &b2 + &c2 == a2 {
        Some(RightAngle::HypotenuseA)
    } else if &a2 + &c2 == b2 {
        Some(RightAngle::HypotenuseB)
    } else if a2 + b2 == c2 {
        Some(RightAngle::HypotenuseC)
    } else {
        None
    })
}

/// A member of the family with all of its models, cross-checked.
#[derive(Debug, Clone)]
pub struct FamilyCurve {
    pub k: Rational,
    pub triple: HeronTriple,
    pub product: CubicModel,
    pub shifted: CubicModel,
    pub integral: IntegralModel,
    /// `(0, abc)` on the product model.
    pub base_point: RationalPoint,
}

impl FamilyCurve {
    pub fn new(k: &Rational) -> Result<Self> {
        let triple = heron_sides(k)?;
        let product = product_model(k)?;
        let shifted = shifted_model(k)?;
        let delta = family_discriminant(k);
        if delta != shifted.discriminant() || delta != product.discriminant() {
            return Err(Error::ClosedFormMismatch { what: "discriminant", k: k.clone() });
        }
        let integral = product.integral_model_with_base(&Integer::from(FAMILY_SCALE))?;
        let u12 = Rational::from_integer(num_traits::pow(integral.scale.clone(), 12));
        if Rational::from_integer(integral.discriminant().clone()) != delta * u12 {
            return Err(Error::Internal("integral discriminant is not u^12 times the source".into()));
        }
        let base_point = base_point(k)?;
        Ok(Self {
            k: k.clone(),
            triple,
            product,
            shifted,
            integral,
            base_point,
        })
    }

    /// Roots `-ab, -bc, -ac` of the product model.
    pub fn product_roots(&self) -> [Rational; 3] {
        let HeronTriple { a, b, c, .. } = &self.triple;
        [-(a * b), -(b * c), -(a * c)]
    }

    /// Roots of the integral model: `-u^2 ab, -u^2 bc, -u^2 ac`.
    pub fn integral_roots(&self) -> [Integer; 3] {
        let u = Rational::from_integer(self.integral.scale.clone());
        let u2 = &u * &u;
        self.product_roots().map(|e| {
            let v = e * &u2;
            debug_assert!(v.is_integer());
            v.to_integer()
        })
    }

    /// The product model rescaled by [`FAMILY_SCALE`]; equal to the integral
    /// model whenever that scale already clears denominators.
    pub fn scaled_model(&self) -> CubicModel {
        self.product.rescale(&Rational::from_integer(Integer::from(FAMILY_SCALE)))
    }

    pub fn integral_base_point(&self) -> RationalPoint {
        self.integral.point_from_source(&self.base_point)
    }

    /// `k` in lowest terms, `"p/q"` or `"n"`.
    pub fn k_string(&self) -> String {
        if self.k.denom().is_one() {
            self.k.numer().to_string()
        } else {
            format!("{}/{}", self.k.numer(), self.k.denom())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numtheory::{parse_rational, rational_roots};

    fn k(s: &str) -> Rational {
        parse_rational(s).unwrap()
    }

    #[test]
    fn sides_at_integer_parameters() {
        let t = heron_sides(&k("6")).unwrap();
        assert_eq!((t.a, t.b, t.c), (r(160), r(96), r(128)));
        let t = heron_sides(&k("3")).unwrap();
        assert_eq!((t.a.clone(), t.b.clone(), t.c.clone()), (r(37), k("51/2"), k("25/2")));
        assert_eq!(t.squared_area, r(5625));
        assert!(t.geometric);
    }

    #[test]
    fn singular_parameters_rejected() {
        for s in ["0", "2", "-2"] {
            assert_eq!(heron_sides(&k(s)), Err(Error::SingularParameter(k(s))));
            assert!(product_model(&k(s)).is_err());
            assert!(FamilyCurve::new(&k(s)).is_err());
        }
    }

    #[test]
    fn areas() {
        assert_eq!(heron_area(&k("5")).unwrap(), r(2205));
        assert_eq!(heron_area(&k("6")).unwrap(), r(6144));
        assert_eq!(heron_area(&k("3")).unwrap(), r(75));
        assert_eq!(heron_area(&k("2/3")).unwrap(), k("6144/729"));
        assert!(!heron_sides(&k("2/3")).unwrap().geometric);
    }

    #[test]
    fn product_model_value_at_zero_is_abc_squared() {
        for s in ["3", "7/5", "-11/3"] {
            let m = product_model(&k(s)).unwrap();
            let (a, b, c) = raw_sides(&k(s));
            let abc = a * b * c;
            assert_eq!(m.rhs(&Rational::zero()), &abc * &abc);
        }
    }

    #[test]
    fn shifted_coefficients_at_one() {
        let m = shifted_model(&r(1)).unwrap();
        assert_eq!(m.a2(), &k("197/4"));
        assert_eq!(m.a4(), &k("-4095/4"));
        assert!(m.rhs(&Rational::zero()).is_zero());
        let (a, b, c) = raw_sides(&r(1));
        assert_eq!((a, b, c), (r(5), k("17/2"), k("-9/2")));
    }

    #[test]
    fn discriminant_closed_form() {
        assert!(family_discriminant(&r(2)).is_zero());
        let a = closed_form_a(&r(1));
        let b = closed_form_b(&r(1));
        assert_eq!(family_discriminant(&r(1)), r(16) * &b * &b * (&a * &a - r(4) * &b));
        let d6 = family_discriminant(&r(6));
        assert_eq!(d6, shifted_model(&r(6)).unwrap().discriminant());
        // odd prime support at k = 6 is {3, 5}
        let mut n = d6.to_integer().abs();
        for p in [2u32, 3, 5] {
            while (&n % p).is_zero() {
                n /= p;
            }
        }
        assert!(n.is_one());
    }

    #[test]
    fn base_points() {
        assert_eq!(base_point(&r(6)).unwrap(), RationalPoint::affine(r(0), r(1_966_080)));
        assert_eq!(base_point(&r(3)).unwrap(), RationalPoint::affine(r(0), k("47175/4")));
    }

    #[test]
    fn coincidences() {
        let c = side_coincidence(&r(2));
        assert!(c.a_eq_b && !c.a_eq_c && !c.b_eq_c);
        let (a, b, cc) = raw_sides(&r(2));
        assert_eq!((a, b, cc), (r(16), r(16), r(0)));
        assert!(!side_coincidence(&r(5)).any());
        for (_, p) in coincidence_polynomials() {
            let roots = rational_roots(&p).unwrap();
            assert!(roots.iter().all(|x| *x == r(2)), "{roots:?}");
        }
    }

    #[test]
    fn coincidence_polynomials_are_side_differences() {
        for s in ["1", "3", "-5/7", "13/2", "9"] {
            let x = k(s);
            let (a, b, c) = raw_sides(&x);
            let [(_, pab), (_, pac), (_, pbc)] = coincidence_polynomials();
            let ev = |p: &[Rational]| p.iter().rev().fold(Rational::zero(), |acc, c| acc * &x + c);
            assert_eq!(ev(&pab), r(-2) * (&a - &b));
            assert_eq!(ev(&pac), r(-2) * (&a - &c));
            assert_eq!(ev(&pbc), r(-2) * (&b - &c));
        }
    }

    #[test]
    fn right_triangles() {
        assert_eq!(right_triangle_relation(&r(6)).unwrap(), Some(RightAngle::HypotenuseA));
        assert_eq!(right_triangle_relation(&k("2/3")).unwrap(), Some(RightAngle::HypotenuseB));
        assert_eq!(right_triangle_relation(&r(5)).unwrap(), None);
    }

    #[test]
    fn family_curve_models_cohere() {
        let fc = FamilyCurve::new(&r(6)).unwrap();
        assert_eq!(fc.integral.scale, Integer::from(2));
        let p = fc.integral_base_point();
        assert!(fc.integral.as_cubic().contains(&p));
        assert_eq!(p, RationalPoint::affine(r(0), r(15_728_640)));
        let roots = fc.integral_roots();
        assert_eq!(roots, [(-61440).into(), (-49152).into(), (-81920).into()]);
        // shifted model point = product point moved by ac
        let (a, _, c) = raw_sides(&r(6));
        let shifted_pt = RationalPoint::affine(&a * &c, fc.base_point.y().unwrap().clone());
        assert!(fc.shifted.contains(&shifted_pt));
    }
}
