//! Torsion subgroups of curves with integral coefficients.
//!
//! The torsion order divides `|E(F_p)|` for every odd prime of good
//! reduction, so the gcd of a handful of point counts bounds it from above.
//! When the bound leaves room for more than the 2-torsion, the missing
//! points are searched for exactly: halving for the 2-power part, integer
//! roots of division polynomials for the odd part. On a model with integral
//! coefficients and `a1 = a3 = 0` every torsion point has integral
//! coordinates, which is what makes the integer root search complete.

use std::fmt;

use num_integer::Integer as _;
use num_traits::{One, Zero};

use crate::curve::{CubicModel, IntegralModel, RationalPoint};
use crate::error::{Error, Result};
use crate::numtheory::{exact_sqrt, integer_roots, primes_up_to, Integer, Rational};

/// Default number of good primes in the reduction bound.
pub const DEFAULT_PRIME_BUDGET: usize = 10;
/// The bound is extended until it stays fixed for this many extra primes.
pub const STABLE_RUN: usize = 3;
const MAX_PRIMES: usize = 200;
const PRIME_SEARCH_LIMIT: u64 = 100_000;

/// Torsion structures allowed over Q.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TorsionStructure {
    /// `Z/nZ`
    Cyclic(u32),
    /// `Z/2Z x Z/2mZ`
    TwoByEven(u32),
}

impl TorsionStructure {
    pub fn order(&self) -> u32 {
        match *self {
            TorsionStructure::Cyclic(n) => n,
            TorsionStructure::TwoByEven(m) => 4 * m,
        }
    }

    /// One of the fifteen groups in Mazur's list.
    pub fn is_admissible(&self) -> bool {
        match *self {
            TorsionStructure::Cyclic(n) => (1..=10).contains(&n) || n == 12,
            TorsionStructure::TwoByEven(m) => (1..=4).contains(&m),
        }
    }
}

impl fmt::Display for TorsionStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            TorsionStructure::Cyclic(n) => write!(f, "Z/{n}Z"),
            TorsionStructure::TwoByEven(m) => write!(f, "Z/2Z x Z/{}Z", 2 * m),
        }
    }
}

impl std::str::FromStr for TorsionStructure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("not a torsion structure: {s:?}"));
        let cyclic = |t: &str| -> Result<u32> {
            t.trim()
                .strip_prefix("Z/")
                .and_then(|r| r.strip_suffix('Z'))
                .and_then(|n| n.parse().ok())
                .ok_or_else(bad)
        };
        match s.split_once(" x ") {
            Some((l, r)) if cyclic(l)? == 2 && cyclic(r)? % 2 == 0 => {
                Ok(TorsionStructure::TwoByEven(cyclic(r)? / 2))
            }
            Some(_) => Err(bad()),
            None => Ok(TorsionStructure::Cyclic(cyclic(s)?)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TorsionGroup {
    pub structure: TorsionStructure,
    pub generators: Vec<RationalPoint>,
    /// Every element, identity first.
    pub points: Vec<RationalPoint>,
    /// Reduction bound the group order divides.
    pub order_bound: u64,
}

impl TorsionGroup {
    pub fn order(&self) -> u32 {
        self.structure.order()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PointOrder {
    Finite(u32),
    Infinite,
}

impl fmt::Display for PointOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PointOrder::Finite(n) => write!(f, "{n}"),
            PointOrder::Infinite => f.write_str("infinite"),
        }
    }
}

/// Points `(e, 0)` for the rational roots `e` of the cubic.
pub fn two_torsion(model: &IntegralModel) -> Result<Vec<RationalPoint>> {
    // monic with integer coefficients, so rational roots are integers
    let roots = integer_roots(&[
        model.a6.clone(),
        model.a4.clone(),
        model.a2.clone(),
        Integer::one(),
    ])?;
    Ok(roots
        .into_iter()
        .map(|e| RationalPoint::affine(Rational::from_integer(e), Rational::zero()))
        .collect())
}

fn good_odd_primes(model: &IntegralModel) -> impl Iterator<Item = u64> + '_ {
    primes_up_to(PRIME_SEARCH_LIMIT)
        .into_iter()
        .skip(1)
        .filter(|&p| model.is_good_prime(p))
}

/// gcd of `|E(F_p)|` over the first `prime_budget` odd good primes.
pub fn torsion_order_bound(model: &IntegralModel, prime_budget: usize) -> Result<u64> {
    let mut bound = 0u64;
    let mut used = 0;
    for p in good_odd_primes(model).take(prime_budget) {
        bound = bound.gcd(&model.reduce_mod_p(p)?.order);
        used += 1;
    }
    if used < prime_budget || prime_budget == 0 {
        return Err(Error::InsufficientGoodPrimes {
            needed: prime_budget,
            searched: PRIME_SEARCH_LIMIT,
        });
    }
    Ok(bound)
}

/// The reduction bound, extended past `prime_budget` primes until it has not
/// changed for [`STABLE_RUN`] consecutive primes.
pub fn stable_order_bound(model: &IntegralModel, prime_budget: usize) -> Result<u64> {
    let mut bound = 0u64;
    let mut used = 0;
    let mut unchanged = 0;
    for p in good_odd_primes(model) {
        let next = bound.gcd(&model.reduce_mod_p(p)?.order);
        unchanged = if next == bound { unchanged + 1 } else { 0 };
        bound = next;
        used += 1;
        if (used >= prime_budget && unchanged >= STABLE_RUN) || bound == 1 || used >= MAX_PRIMES {
            return Ok(bound);
        }
    }
    Err(Error::InsufficientGoodPrimes {
        needed: prime_budget.max(STABLE_RUN),
        searched: PRIME_SEARCH_LIMIT,
    })
}

/// Least `n <= 12` with `nP = O`, else infinite: no rational torsion point
/// has order above 12.
pub fn point_order(model: &CubicModel, p: &RationalPoint) -> Result<PointOrder> {
    if !model.contains(p) {
        return Err(Error::PointNotOnCurve);
    }
    let mut acc = p.clone();
    for n in 1..=12 {
        if acc.is_infinity() {
            return Ok(PointOrder::Finite(n));
        }
        acc = model.add_unchecked(&acc, p);
    }
    Ok(PointOrder::Infinite)
}

// ---------------------------------------------------------------------------
// division polynomials over Z, ascending coefficients

type Poly = Vec<Integer>;

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![Integer::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        if x.is_zero() {
            continue;
        }
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

fn poly_sub(a: &Poly, b: &Poly) -> Poly {
    let n = a.len().max(b.len());
    let mut out: Poly = (0..n)
        .map(|i| {
            a.get(i).cloned().unwrap_or_default() - b.get(i).cloned().unwrap_or_default()
        })
        .collect();
    while out.last().is_some_and(Zero::is_zero) {
        out.pop();
    }
    out
}

fn poly_cube(a: &Poly) -> Poly {
    poly_mul(&poly_mul(a, a), a)
}

fn b_invariants(model: &IntegralModel) -> [Integer; 4] {
    let b2: Integer = &model.a2 * 4;
    let b4: Integer = &model.a4 * 2;
    let b6: Integer = &model.a6 * 4;
    let b8: Integer = &model.a2 * &model.a6 * 4 - &model.a4 * &model.a4;
    [b2, b4, b6, b8]
}

/// Univariate division polynomials `f_0..=f_max`: `psi_n = f_n` for odd `n`
/// and `psi_n = 2y f_n` for even `n`.
pub fn division_polynomials(model: &IntegralModel, max: usize) -> Vec<Poly> {
    let [b2, b4, b6, b8] = b_invariants(model);
    let n = |v: i64| Integer::from(v);
    // F = (2y)^2 = 4x^3 + b2 x^2 + 2 b4 x + b6
    let big_f: Poly = vec![b6.clone(), &b4 * 2, b2.clone(), n(4)];
    let f_sq = poly_mul(&big_f, &big_f);

    let mut f: Vec<Poly> = vec![
        Vec::new(),
        vec![n(1)],
        vec![n(1)],
        vec![b8.clone(), &b6 * 3, &b4 * 3, b2.clone(), n(3)],
        vec![
            &b4 * &b8 - &b6 * &b6,
            &b2 * &b8 - &b4 * &b6,
            &b8 * 10,
            &b6 * 10,
            &b4 * 5,
            b2.clone(),
            n(2),
        ],
    ];
    for idx in 5..=max {
        let m = idx / 2;
        let next = if idx % 2 == 1 {
            let lhs = poly_mul(&f[m + 2], &poly_cube(&f[m]));
            let rhs = poly_mul(&f[m - 1], &poly_cube(&f[m + 1]));
            if m % 2 == 0 {
                poly_sub(&poly_mul(&f_sq, &lhs), &rhs)
            } else {
                poly_sub(&lhs, &poly_mul(&f_sq, &rhs))
            }
        } else {
            let lhs = poly_mul(&f[m + 2], &poly_mul(&f[m - 1], &f[m - 1]));
            let rhs = poly_mul(&f[m - 2], &poly_mul(&f[m + 1], &f[m + 1]));
            poly_mul(&f[m], &poly_sub(&lhs, &rhs))
        };
        f.push(next);
    }
    f.truncate(max + 1);
    f
}

fn points_with_x(model: &CubicModel, xs: impl IntoIterator<Item = Integer>) -> Vec<RationalPoint> {
    let mut out = Vec::new();
    for x in xs {
        let x = Rational::from_integer(x);
        let rhs = model.rhs(&x);
        if !rhs.is_integer() {
            continue;
        }
        if let Some(y) = exact_sqrt(&rhs.to_integer()) {
            let y = Rational::from_integer(y);
            out.push(RationalPoint::affine(x.clone(), y.clone()));
            if !y.is_zero() {
                out.push(RationalPoint::affine(x, -y));
            }
        }
    }
    out
}

/// Rational points `Q` with `2Q = P`. `P` must be an integral point.
fn halves(model: &IntegralModel, p: &RationalPoint) -> Result<Vec<RationalPoint>> {
    let cubic = model.as_cubic();
    let target: Integer = match p {
        RationalPoint::Infinity => return Ok(Vec::new()),
        RationalPoint::Affine { x, .. } if x.is_integer() => x.to_integer(),
        RationalPoint::Affine { .. } => return Ok(Vec::new()),
    };
    let [b2, b4, b6, b8] = b_invariants(model);
    // x(2Q) = (x^4 - b4 x^2 - 2 b6 x - b8) / (4x^3 + b2 x^2 + 2 b4 x + b6)
    let two_t: Integer = &target * 2;
    let quartic: Poly = vec![
        -(b8 + &target * &b6),
        -(b6 * 2u32 + &two_t * &b4),
        -(b4 + &target * &b2),
        -(two_t * 2u32),
        Integer::one(),
    ];
    let candidates = points_with_x(&cubic, integer_roots(&quartic)?);
    Ok(candidates
        .into_iter()
        .filter(|q| cubic.add_unchecked(q, q) == *p)
        .collect())
}

fn two_adic(n: u64) -> u64 {
    1 << n.trailing_zeros()
}

/// Exact torsion subgroup of an integral model.
pub fn torsion_subgroup(model: &IntegralModel) -> Result<TorsionGroup> {
    torsion_subgroup_with_budget(model, DEFAULT_PRIME_BUDGET)
}

pub fn torsion_subgroup_with_budget(model: &IntegralModel, prime_budget: usize) -> Result<TorsionGroup> {
    let cubic = model.as_cubic();
    let bound = stable_order_bound(model, prime_budget)?;

    // 2-primary part by repeated halving
    let mut two_part = vec![RationalPoint::Infinity];
    if bound % 2 == 0 {
        two_part.extend(two_torsion(model)?);
    }
    let two_limit = two_adic(bound) as usize;
    let mut frontier: Vec<RationalPoint> = two_part[1..].to_vec();
    while two_part.len() < two_limit && !frontier.is_empty() {
        let mut next = Vec::new();
        for p in &frontier {
            for q in halves(model, p)? {
                if !two_part.contains(&q) {
                    two_part.push(q.clone());
                    next.push(q);
                }
            }
        }
        frontier = next;
    }

    // odd part: x-coordinates of l^e torsion are roots of f_{l^e}
    let odd_bound = bound / two_adic(bound);
    let mut odd_part = vec![RationalPoint::Infinity];
    if odd_bound > 1 {
        let mut orders: Vec<usize> = [3usize, 5, 7, 9]
            .into_iter()
            .filter(|n| odd_bound.is_multiple_of(*n as u64))
            .collect();
        if orders.contains(&9) {
            orders.retain(|&n| n != 3);
        }
        let max = orders.iter().copied().max().unwrap_or(0);
        if max > 0 {
            let divpolys = division_polynomials(model, max.max(4));
            for n in orders {
                for q in points_with_x(&cubic, integer_roots(&divpolys[n])?) {
                    if !odd_part.contains(&q) {
                        odd_part.push(q);
                    }
                }
            }
        }
    }

    let mut points = Vec::with_capacity(two_part.len() * odd_part.len());
    for a in &two_part {
        for b in &odd_part {
            points.push(cubic.add_unchecked(a, b));
        }
    }
    let order = points.len() as u32;
    if bound % order as u64 != 0 {
        return Err(Error::Internal(format!(
            "torsion of order {order} does not divide reduction bound {bound}"
        )));
    }

    let full_two = two_part
        .iter()
        .filter(|p| p.y().is_some_and(Zero::is_zero))
        .count()
        == 3;
    let structure = if full_two {
        TorsionStructure::TwoByEven(order / 4)
    } else {
        TorsionStructure::Cyclic(order)
    };
    if !structure.is_admissible() {
        return Err(Error::Internal(format!("inadmissible torsion structure {structure}")));
    }

    let order_of = |p: &RationalPoint| match point_order(&cubic, p) {
        Ok(PointOrder::Finite(n)) => n,
        _ => 0,
    };
    let exponent = match structure {
        TorsionStructure::Cyclic(n) => n,
        TorsionStructure::TwoByEven(m) => 2 * m,
    };
    let mut generators = Vec::new();
    if exponent > 1 {
        let g = points
            .iter()
            .find(|p| order_of(p) == exponent)
            .cloned()
            .ok_or_else(|| Error::Internal("no point of maximal order".into()))?;
        if let TorsionStructure::TwoByEven(_) = structure {
            let multiples: Vec<RationalPoint> = (0..exponent)
                .map(|i| cubic.multiply_unchecked(&Integer::from(i), &g))
                .collect();
            let h = points
                .iter()
                .find(|p| order_of(p) == 2 && !multiples.contains(p))
                .cloned()
                .ok_or_else(|| Error::Internal("2-torsion is not full".into()))?;
            generators.push(h);
        }
        generators.insert(0, g);
    }

    Ok(TorsionGroup {
        structure,
        generators,
        points,
        order_bound: bound,
    })
}
