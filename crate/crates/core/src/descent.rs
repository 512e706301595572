//! Complete 2-descent for curves `y^2 = (x - e1)(x - e2)(x - e3)` with
//! integral roots.
//!
//! A point maps to the square classes of `(x - e1, x - e2)`. Classes that
//! are locally solvable everywhere form the 2-Selmer group, an F_2-space
//! whose dimension minus two bounds the rank from above. Points found by
//! search bound it from below.
//!
//! Local solvability at a place `v` is decided by membership in the image
//! of `E(Q_v)`, which is built by sampling `Q_v`-points until it reaches its
//! known size: 2 at the real place, 4 at odd primes, 8 at 2. Over the
//! places dividing `2 * disc` plus infinity, the Selmer group is then the
//! kernel of a linear map over F_2.

use std::cmp::Ordering;
use std::fmt;

use num_integer::Integer as _;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::{CubicModel, IntegralModel, RationalPoint};
use crate::error::{Error, Result};
use crate::numtheory::{
    factorize, is_rational_square, jacobi_symbol, valuation, FactorBudget, Integer, Rational,
};
use crate::torsion::two_torsion;

/// Starting height for the homogeneous-space search.
pub const DEFAULT_HEIGHT: u64 = 1 << 12;
/// Largest height any effort level searches to.
pub const MAX_HEIGHT: u64 = 1 << 16;
const DIRECT_SEARCH_CAP: u64 = 1 << 20;
const LOCAL_SAMPLE_LIMIT: usize = 200_000;
const ENUMERATION_CHECK_LIMIT: u32 = 16;
const MAX_SEARCHED_CLASSES: u32 = 12;

/// Search budgets for [`rank_bounds`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Effort {
    pub initial_height: u64,
    /// The search height doubles until it exceeds this.
    pub max_height: u64,
    pub factor_budget: FactorBudget,
    /// Candidates tried by the direct search on `x = m / n^2`.
    pub direct_search_cap: u64,
}

impl Effort {
    /// Level `n` doubles the height `n` times, capped at [`MAX_HEIGHT`].
    pub fn level(n: u32) -> Self {
        let max_height = DEFAULT_HEIGHT
            .checked_shl(n)
            .map_or(MAX_HEIGHT, |h| h.min(MAX_HEIGHT));
        Effort {
            initial_height: DEFAULT_HEIGHT,
            max_height,
            factor_budget: FactorBudget::default(),
            direct_search_cap: DIRECT_SEARCH_CAP,
        }
    }

    pub fn with_height(height: u64) -> Self {
        Effort {
            initial_height: height.min(DEFAULT_HEIGHT),
            max_height: height,
            ..Effort::level(0)
        }
    }
}

impl Default for Effort {
    fn default() -> Self {
        Effort::level(0)
    }
}

/// An element of `(Q*/Q*^2)^2`, stored as squarefree representatives.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SquareClassPair {
    pub b1: Integer,
    pub b2: Integer,
}

impl SquareClassPair {
    pub fn trivial() -> Self {
        SquareClassPair {
            b1: Integer::one(),
            b2: Integer::one(),
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.b1.is_one() && self.b2.is_one()
    }

    /// Componentwise product modulo squares.
    pub fn multiply(&self, other: &SquareClassPair) -> SquareClassPair {
        SquareClassPair {
            b1: squarefree_product(&self.b1, &other.b1),
            b2: squarefree_product(&self.b2, &other.b2),
        }
    }

    fn size_key(&self) -> Integer {
        self.b1.abs() + self.b2.abs()
    }
}

impl fmt::Display for SquareClassPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.b1, self.b2)
    }
}

fn squarefree_product(a: &Integer, b: &Integer) -> Integer {
    let g = a.gcd(b);
    (a / &g) * (b / &g)
}

/// The quadric intersection `b1 z1^2 - b2 z2^2 = e2 - e1`,
/// `b1 z1^2 - b1 b2 z3^2 = e3 - e1` attached to a class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HomogeneousSpace {
    pub b1: Integer,
    pub b2: Integer,
    pub e1: Integer,
    pub e2: Integer,
    pub e3: Integer,
}

impl HomogeneousSpace {
    pub fn new(class: &SquareClassPair, roots: &[Integer; 3]) -> Result<Self> {
        let [e1, e2, e3] = roots.clone();
        if e1 == e2 || e1 == e3 || e2 == e3 {
            return Err(Error::SingularModel);
        }
        Ok(HomogeneousSpace {
            b1: class.b1.clone(),
            b2: class.b2.clone(),
            e1,
            e2,
            e3,
        })
    }

    pub fn class(&self) -> SquareClassPair {
        SquareClassPair {
            b1: self.b1.clone(),
            b2: self.b2.clone(),
        }
    }

    pub fn roots(&self) -> [Integer; 3] {
        [self.e1.clone(), self.e2.clone(), self.e3.clone()]
    }

    /// `(z1, z2, z3)` with `x = e1 + b1 z1^2` for an affine point whose
    /// class is this space's, if the point's x determines such values.
    pub fn z_values(&self, p: &RationalPoint) -> Option<[Rational; 3]> {
        let x = p.x()?;
        let z = |shift: &Integer, d: &Integer| {
            is_rational_square(&((x - Rational::from_integer(shift.clone())) / Rational::from_integer(d.clone())))
        };
        let b12 = &self.b1 * &self.b2;
        Some([z(&self.e1, &self.b1)?, z(&self.e2, &self.b2)?, z(&self.e3, &b12)?])
    }

    pub fn is_solution(&self, z: &[Rational; 3]) -> bool {
        let b1 = Rational::from_integer(self.b1.clone());
        let b2 = Rational::from_integer(self.b2.clone());
        let lhs = &b1 * &z[0] * &z[0];
        lhs.clone() - &b2 * &z[1] * &z[1] == Rational::from_integer(&self.e2 - &self.e1)
            && lhs - &b1 * &b2 * &z[2] * &z[2] == Rational::from_integer(&self.e3 - &self.e1)
    }
}

/// A curve with three integral roots `e1 < e2 < e3` and the primes of bad
/// reduction of its root differences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitCurve {
    roots: [Integer; 3],
    model: CubicModel,
    /// 2 and the primes dividing a root difference, ascending.
    support: Vec<Integer>,
}

impl SplitCurve {
    pub fn new(model: &IntegralModel, budget: FactorBudget) -> Result<Self> {
        let roots: Vec<Integer> = two_torsion(model)?
            .iter()
            .map(|p| p.x().expect("affine 2-torsion").to_integer())
            .collect();
        let roots: [Integer; 3] = roots.try_into().map_err(|_| Error::NotSplit)?;
        Self::from_roots(roots, budget)
    }

    pub fn from_roots(mut roots: [Integer; 3], budget: FactorBudget) -> Result<Self> {
        roots.sort();
        if roots[0] == roots[1] || roots[1] == roots[2] {
            return Err(Error::SingularModel);
        }
        let r = |i: usize| Rational::from_integer(roots[i].clone());
        let model = CubicModel::from_roots(&r(0), &r(1), &r(2))?;
        let product = Integer::from(2)
            * (&roots[1] - &roots[0])
            * (&roots[2] - &roots[0])
            * (&roots[2] - &roots[1]);
        let mut support: Vec<Integer> = factorize(&product, budget)?.primes().cloned().collect();
        support.sort();
        Ok(SplitCurve {
            roots,
            model,
            support,
        })
    }

    pub fn roots(&self) -> &[Integer; 3] {
        &self.roots
    }

    pub fn model(&self) -> &CubicModel {
        &self.model
    }

    pub fn support(&self) -> &[Integer] {
        &self.support
    }

    fn root(&self, i: usize) -> Rational {
        Rational::from_integer(self.roots[i].clone())
    }

    pub fn torsion_points(&self) -> [RationalPoint; 4] {
        [
            RationalPoint::Infinity,
            RationalPoint::affine(self.root(0), Rational::zero()),
            RationalPoint::affine(self.root(1), Rational::zero()),
            RationalPoint::affine(self.root(2), Rational::zero()),
        ]
    }

    /// Squarefree representative of `q` mod squares. `q` must be supported
    /// on [`Self::support`] up to a square.
    fn square_class(&self, q: &Rational) -> Result<Integer> {
        let mut rest = q.numer() * q.denom();
        if rest.is_zero() {
            return Err(Error::Internal("square class of zero".into()));
        }
        let mut class = if rest.is_negative() {
            rest = -rest;
            -Integer::one()
        } else {
            Integer::one()
        };
        for p in &self.support {
            let mut v = 0u32;
            while rest.is_multiple_of(p) {
                rest /= p;
                v += 1;
            }
            if v % 2 == 1 {
                class *= p;
            }
        }
        if rest.sqrt().pow(2) != rest {
            return Err(Error::Internal(format!(
                "class of {q} has a prime outside the bad set"
            )));
        }
        Ok(class)
    }

    /// Image of `p` in `(Q*/Q*^2)^2`.
    pub fn descent_image(&self, p: &RationalPoint) -> Result<SquareClassPair> {
        if !self.model.contains(p) {
            return Err(Error::PointNotOnCurve);
        }
        let x = match p {
            RationalPoint::Infinity => return Ok(SquareClassPair::trivial()),
            RationalPoint::Affine { x, .. } => x,
        };
        let (e1, e2, e3) = (self.root(0), self.root(1), self.root(2));
        let (u, v) = if *x == e1 {
            ((&e1 - &e2) * (&e1 - &e3), &e1 - &e2)
        } else if *x == e2 {
            (&e2 - &e1, (&e2 - &e1) * (&e2 - &e3))
        } else {
            (x - &e1, x - &e2)
        };
        Ok(SquareClassPair {
            b1: self.square_class(&u)?,
            b2: self.square_class(&v)?,
        })
    }

    fn coordinates(&self, c: &SquareClassPair) -> Option<u128> {
        let width = self.support.len() + 1;
        let one = |n: &Integer| -> Option<u128> {
            let mut bits = u128::from(n.is_negative());
            let mut rest = n.abs();
            for (i, p) in self.support.iter().enumerate() {
                if rest.is_multiple_of(p) {
                    rest /= p;
                    bits |= 1 << (i + 1);
                }
            }
            rest.is_one().then_some(bits)
        };
        Some(one(&c.b1)? | (one(&c.b2)? << width))
    }

    fn class_from_coordinates(&self, bits: u128) -> SquareClassPair {
        let width = self.support.len() + 1;
        let one = |bits: u128| {
            let mut n = if bits & 1 == 1 { -Integer::one() } else { Integer::one() };
            for (i, p) in self.support.iter().enumerate() {
                if bits >> (i + 1) & 1 == 1 {
                    n *= p;
                }
            }
            n
        };
        SquareClassPair {
            b1: one(bits & ((1 << width) - 1)),
            b2: one(bits >> width),
        }
    }

    fn generator_count(&self) -> usize {
        2 * (self.support.len() + 1)
    }
}

// ---------------------------------------------------------------------------
// local square classes

#[derive(Debug, Clone, PartialEq, Eq)]
enum Place {
    Real,
    Prime(Integer),
}

impl Place {
    /// Bits per square class: `Q_v* / Q_v*^2` has dimension 1, 2 or 3.
    fn width(&self) -> u32 {
        match self {
            Place::Real => 1,
            Place::Prime(p) if *p == Integer::from(2) => 3,
            Place::Prime(_) => 2,
        }
    }

    /// Dimension of `E(Q_v) / 2E(Q_v)` with full rational 2-torsion.
    fn image_dim(&self) -> u32 {
        self.width()
    }

    /// Class of a nonzero rational in `Q_v* / Q_v*^2`; zero iff a square.
    fn bits(&self, q: &Rational) -> u8 {
        match self {
            Place::Real => u8::from(q.is_negative()),
            Place::Prime(p) => {
                let (mut n, mut d) = (q.numer().abs(), q.denom().clone());
                let vn = valuation(&n, p);
                let vd = valuation(&d, p);
                n /= p.pow(vn);
                d /= p.pow(vd);
                let parity = u8::from((vn + vd) % 2 == 1);
                let mut unit = n * d;
                if q.is_negative() {
                    unit = -unit;
                }
                if *p == Integer::from(2) {
                    let r = unit.mod_floor(&Integer::from(8)).to_u8().expect("residue mod 8");
                    parity | u8::from(r % 4 == 3) << 1 | u8::from(r == 3 || r == 5) << 2
                } else {
                    parity | u8::from(jacobi_symbol(&unit, p) == -1) << 1
                }
            }
        }
    }

    fn pair_bits(&self, a: &Rational, b: &Rational) -> u8 {
        self.bits(a) | self.bits(b) << self.width()
    }
}

/// An F_2-subspace of a small ambient space, in echelon form by highest bit.
#[derive(Debug, Clone, Default)]
struct SmallSpan {
    basis: Vec<u8>,
}

impl SmallSpan {
    fn reduce(&self, mut v: u8) -> u8 {
        for b in &self.basis {
            let pivot = 1u8 << (7 - b.leading_zeros());
            if v & pivot != 0 {
                v ^= b;
            }
        }
        v
    }

    fn insert(&mut self, v: u8) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        self.basis.push(r);
        self.basis.sort_by(|a, b| b.cmp(a));
        // keep pivots distinct: re-reduce lower vectors
        let mut rebuilt: Vec<u8> = Vec::new();
        for &b in &self.basis {
            let mut r = b;
            for &c in &rebuilt {
                let pivot = 1u8 << (7 - c.leading_zeros());
                if r & pivot != 0 {
                    r ^= c;
                }
            }
            if r != 0 {
                rebuilt.push(r);
                rebuilt.sort_by(|a, b| b.cmp(a));
            }
        }
        self.basis = rebuilt;
        true
    }

    fn dim(&self) -> u32 {
        self.basis.len() as u32
    }
}

/// Image of `E(Q_v)` in the local pair classes.
#[derive(Debug, Clone)]
struct LocalImage {
    place: Place,
    span: SmallSpan,
}

impl LocalImage {
    fn contains(&self, bits: u8) -> bool {
        self.span.reduce(bits) == 0
    }
}

fn local_image(curve: &SplitCurve, place: Place) -> Result<LocalImage> {
    let mut span = SmallSpan::default();
    let target = place.image_dim();
    for t in curve.torsion_points().iter().skip(1) {
        let c = curve.descent_image(t)?;
        span.insert(place.pair_bits(
            &Rational::from_integer(c.b1),
            &Rational::from_integer(c.b2),
        ));
    }
    if let Place::Prime(p) = &place {
        let e = curve.roots();
        let diffs = [&e[1] - &e[0], &e[2] - &e[0], &e[2] - &e[1]];
        let depth = diffs.iter().map(|d| valuation(d, p)).max().unwrap_or(0) as i64;
        let precision = 2 * depth + 6;
        let modulus = p.pow(precision as u32);
        let seed = p.to_u64().unwrap_or(u64::MAX) ^ 0x002d_6573_6365_6e74;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = [
            Rational::zero(),
            curve.root(0),
            curve.root(1),
            curve.root(2),
        ];
        let mut samples = 0;
        while span.dim() < target && samples < LOCAL_SAMPLE_LIMIT {
            samples += 1;
            let center = &centers[rng.gen_range(0..centers.len())];
            let shift = rng.gen_range(-4..=precision);
            let unit = num_bigint::RandBigInt::gen_bigint_range(&mut rng, &Integer::one(), &modulus);
            let scale = if shift >= 0 {
                Rational::from_integer(p.pow(shift as u32))
            } else {
                Rational::new(Integer::one(), p.pow((-shift) as u32))
            };
            let x = center + scale * Rational::from_integer(unit);
            let rhs = curve.model.rhs(&x);
            if rhs.is_zero() || place.bits(&rhs) != 0 {
                continue;
            }
            let u = &x - curve.root(0);
            let v = &x - curve.root(1);
            span.insert(place.pair_bits(&u, &v));
        }
    }
    // the real image is spanned by 2-torsion: points with e1 < x < e2
    if span.dim() != target {
        return Err(Error::Internal(format!(
            "local image at {place:?} has dimension {} instead of {target}",
            span.dim()
        )));
    }
    Ok(LocalImage { place, span })
}

// ---------------------------------------------------------------------------
// the Selmer group

/// Cached local data for a split curve.
#[derive(Debug, Clone)]
pub struct DescentContext {
    curve: SplitCurve,
    locals: Vec<LocalImage>,
}

/// The 2-Selmer group as a subspace of the S-supported classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelmerGroup {
    basis: Vec<u128>,
    elements: Vec<SquareClassPair>,
}

impl SelmerGroup {
    pub fn dim(&self) -> u32 {
        self.basis.len() as u32
    }

    /// `dim - 2`: the torsion contributes two dimensions.
    pub fn rank_bound(&self) -> u32 {
        self.dim() - 2
    }

    /// All elements when `dim` is small enough to list them.
    pub fn elements(&self) -> &[SquareClassPair] {
        &self.elements
    }
}

impl DescentContext {
    pub fn new(curve: SplitCurve) -> Result<Self> {
        let mut places = vec![Place::Real];
        places.extend(curve.support.iter().cloned().map(Place::Prime));
        let locals = places
            .into_par_iter()
            .map(|place| local_image(&curve, place))
            .collect::<Result<Vec<_>>>()?;
        Ok(DescentContext { curve, locals })
    }

    pub fn curve(&self) -> &SplitCurve {
        &self.curve
    }

    /// Whether the class lies in every local image over the bad places.
    /// Classes with a prime outside the bad set fail at that prime.
    pub fn is_locally_solvable(&self, class: &SquareClassPair) -> bool {
        if self.curve.coordinates(class).is_none() {
            return false;
        }
        let a = Rational::from_integer(class.b1.clone());
        let b = Rational::from_integer(class.b2.clone());
        self.locals.iter().all(|l| l.contains(l.place.pair_bits(&a, &b)))
    }

    pub fn selmer_group(&self) -> Result<SelmerGroup> {
        let count = self.curve.generator_count();
        if count > 128 {
            return Err(Error::Internal(format!("{count} generators exceed 128")));
        }
        let generators: Vec<SquareClassPair> = (0..count)
            .map(|i| self.curve.class_from_coordinates(1 << i))
            .collect();
        let mut rows: Vec<u128> = Vec::new();
        for local in &self.locals {
            let reduced: Vec<u8> = generators
                .iter()
                .map(|g| {
                    let bits = local.place.pair_bits(
                        &Rational::from_integer(g.b1.clone()),
                        &Rational::from_integer(g.b2.clone()),
                    );
                    local.span.reduce(bits)
                })
                .collect();
            for bit in 0..2 * local.place.width() {
                let row = reduced
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| *r >> bit & 1 == 1)
                    .fold(0u128, |acc, (i, _)| acc | 1 << i);
                rows.push(row);
            }
        }
        let basis = kernel(rows, count);
        let dim = basis.len() as u32;
        if dim < 2 {
            return Err(Error::Internal(format!("Selmer dimension {dim} below torsion")));
        }
        let elements = if dim <= MAX_SEARCHED_CLASSES {
            let mut all: Vec<SquareClassPair> = (0u64..1 << dim)
                .map(|mask| {
                    let v = (0..dim as usize)
                        .filter(|i| mask >> i & 1 == 1)
                        .fold(0u128, |acc, i| acc ^ basis[i]);
                    self.curve.class_from_coordinates(v)
                })
                .collect();
            sort_classes(&mut all);
            all
        } else {
            Vec::new()
        };
        let group = SelmerGroup { basis, elements };

        for t in self.curve.torsion_points() {
            let c = self.curve.descent_image(&t)?;
            if !self.is_locally_solvable(&c) {
                return Err(Error::Internal(format!("torsion class {c} is not in Selmer")));
            }
        }
        if count as u32 <= ENUMERATION_CHECK_LIMIT {
            self.check_by_enumeration(&group)?;
        }
        Ok(group)
    }

    /// Every pair is tested directly; the passing set must be the group.
    fn check_by_enumeration(&self, group: &SelmerGroup) -> Result<()> {
        let count = self.curve.generator_count();
        let passing: Vec<SquareClassPair> = (0u128..1 << count)
            .into_par_iter()
            .map(|v| self.curve.class_from_coordinates(v))
            .filter(|c| self.is_locally_solvable(c))
            .collect();
        let n = passing.len();
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Internal(format!("{n} locally solvable classes")));
        }
        if n != 1 << group.dim() {
            return Err(Error::Internal(format!(
                "enumeration found {n} classes, linear algebra 2^{}",
                group.dim()
            )));
        }
        for a in passing.iter().take(8) {
            for b in &passing {
                if !self.is_locally_solvable(&a.multiply(b)) {
                    return Err(Error::Internal("solvable classes not closed".into()));
                }
            }
        }
        Ok(())
    }
}

fn sort_classes(v: &mut [SquareClassPair]) {
    v.sort_by(|a, b| {
        a.size_key()
            .cmp(&b.size_key())
            .then_with(|| a.b1.cmp(&b.b1))
            .then_with(|| a.b2.cmp(&b.b2))
    });
}

/// Basis of `{x : row . x = 0 for every row}` over F_2.
fn kernel(rows: Vec<u128>, cols: usize) -> Vec<u128> {
    let mut pivots: Vec<(usize, u128)> = Vec::new();
    for mut r in rows {
        for &(c, p) in &pivots {
            if r >> c & 1 == 1 {
                r ^= p;
            }
        }
        if r == 0 {
            continue;
        }
        let c = r.trailing_zeros() as usize;
        for (_, p) in pivots.iter_mut() {
            if *p >> c & 1 == 1 {
                *p ^= r;
            }
        }
        pivots.push((c, r));
    }
    let pivot_cols: u128 = pivots.iter().fold(0, |acc, (c, _)| acc | 1 << c);
    (0..cols)
        .filter(|f| pivot_cols >> f & 1 == 0)
        .map(|f| {
            let mut v = 1u128 << f;
            for &(c, p) in &pivots {
                if p >> f & 1 == 1 {
                    v |= 1 << c;
                }
            }
            v
        })
        .collect()
}

/// F_2 span in the S-supported coordinates.
#[derive(Debug, Clone, Default)]
struct Span {
    rows: Vec<u128>,
}

impl Span {
    fn reduce(&self, mut v: u128) -> u128 {
        for r in &self.rows {
            let pivot = 1u128 << (127 - r.leading_zeros());
            if v & pivot != 0 {
                v ^= r;
            }
        }
        v
    }

    fn insert(&mut self, v: u128) -> bool {
        let r = self.reduce(v);
        if r == 0 {
            return false;
        }
        let pivot = 1u128 << (127 - r.leading_zeros());
        for row in self.rows.iter_mut() {
            if *row & pivot != 0 {
                *row ^= r;
            }
        }
        self.rows.push(r);
        self.rows.sort_by(|a, b| b.cmp(a));
        true
    }

    fn contains(&self, v: u128) -> bool {
        self.reduce(v) == 0
    }

    fn dim(&self) -> u32 {
        self.rows.len() as u32
    }
}

// ---------------------------------------------------------------------------
// point search

const fn square_mask(m: u32) -> u128 {
    let mut mask = 0u128;
    let mut i = 0;
    while i < m {
        mask |= 1 << ((i * i) % m);
        i += 1;
    }
    mask
}

const SQ64: u128 = square_mask(64);
const SQ63: u128 = square_mask(63);
const SQ65: u128 = square_mask(65);
const SQ11: u128 = square_mask(11);

fn isqrt_u128(v: u128) -> u128 {
    if v < 2 {
        return v;
    }
    let mut x = (v as f64).sqrt() as u128;
    loop {
        let next = (x + v / x) / 2;
        if next >= x && next <= x + 1 {
            break;
        }
        x = next;
    }
    while x * x > v {
        x -= 1;
    }
    while (x + 1) * (x + 1) <= v {
        x += 1;
    }
    x
}

fn is_square_i128(v: i128) -> bool {
    if v < 0 {
        return false;
    }
    let u = v as u128;
    if SQ64 >> (u % 64) & 1 == 0
        || SQ63 >> (u % 63) & 1 == 0
        || SQ65 >> (u % 65) & 1 == 0
        || SQ11 >> (u % 11) & 1 == 0
    {
        return false;
    }
    let r = isqrt_u128(u);
    r * r == u
}

fn is_square_big(v: &Integer) -> bool {
    !v.is_negative() && v.sqrt().pow(2) == *v
}

/// `x = e_i + d_i (m/n)^2` makes `x - e_j = (d_i m^2 + c_j n^2) / n^2`, which
/// needs to be `d_j` times a square for both other roots.
struct ClassSearch {
    base: usize,
    d: [Integer; 3],
    c: [Integer; 3],
}

impl ClassSearch {
    fn new(curve: &SplitCurve, class: &SquareClassPair) -> Self {
        let d = [
            class.b1.clone(),
            class.b2.clone(),
            squarefree_product(&class.b1, &class.b2),
        ];
        let base = (0..3).min_by_key(|&i| d[i].abs()).expect("three roots");
        let c = [0, 1, 2].map(|j| &curve.roots[base] - &curve.roots[j]);
        ClassSearch { base, d, c }
    }

    fn others(&self) -> [usize; 2] {
        match self.base {
            0 => [1, 2],
            1 => [0, 2],
            _ => [0, 1],
        }
    }

    fn test_big(&self, m: u64, n: u64) -> bool {
        let (m2, n2) = (Integer::from(m) * m, Integer::from(n) * n);
        self.others().iter().all(|&j| {
            let v = &self.d[self.base] * &m2 + &self.c[j] * &n2;
            let (q, r) = v.div_rem(&self.d[j]);
            !v.is_zero() && r.is_zero() && is_square_big(&q)
        })
    }

    /// First `(m, n)` in the region, scanning `n` upward.
    fn search(&self, n_max: u64, m_lo: u64, m_hi: u64, lower_box: u64) -> Option<(u64, u64)> {
        let [j, k] = self.others();
        let small = |x: &Integer| x.to_i128().filter(|v| v.unsigned_abs() < 1 << 60);
        let fast = match (
            small(&self.d[self.base]),
            small(&self.c[j]),
            small(&self.c[k]),
            small(&self.d[j]),
            small(&self.d[k]),
        ) {
            (Some(di), Some(cj), Some(ck), Some(dj), Some(dk)) => {
                let h = u128::from(n_max.max(m_hi));
                let bound = (di.unsigned_abs() + cj.unsigned_abs() + ck.unsigned_abs())
                    .checked_mul(h * h);
                bound.filter(|b| *b < 1 << 125).map(|_| (di, cj, ck, dj, dk))
            }
            _ => None,
        };
        (1..=n_max).into_par_iter().find_map_first(|n| {
            let m_start = if n <= lower_box { m_lo } else { 1 };
            match fast {
                Some((di, cj, ck, dj, dk)) => {
                    let n2 = i128::from(n) * i128::from(n);
                    let (tj, tk) = (cj * n2, ck * n2);
                    (m_start..=m_hi).find_map(|m| {
                        if (m | n) & 1 == 0 {
                            return None;
                        }
                        let dm = di * i128::from(m) * i128::from(m);
                        let vj = dm + tj;
                        if vj == 0 || vj % dj != 0 || !is_square_i128(vj / dj) {
                            return None;
                        }
                        let vk = dm + tk;
                        if vk == 0 || vk % dk != 0 || !is_square_i128(vk / dk) {
                            return None;
                        }
                        (m.gcd(&n) == 1).then_some((m, n))
                    })
                }
                None => (m_start..=m_hi)
                    .find(|&m| (m | n) & 1 == 1 && self.test_big(m, n) && m.gcd(&n) == 1)
                    .map(|m| (m, n)),
            }
        })
    }

    fn point(&self, curve: &SplitCurve, m: u64, n: u64) -> Result<RationalPoint> {
        let t2 = Rational::new(Integer::from(m) * m, Integer::from(n) * n);
        let x = curve.root(self.base) + Rational::from_integer(self.d[self.base].clone()) * t2;
        let y = is_rational_square(&curve.model.rhs(&x))
            .ok_or_else(|| Error::Internal("search produced a non-point".into()))?;
        Ok(RationalPoint::affine(x, y))
    }
}

/// Searches the class's homogeneous space with numerators and denominators
/// up to `height`; returns a curve point whose image is the class.
pub fn global_point_search(
    curve: &SplitCurve,
    class: &SquareClassPair,
    height: u64,
) -> Result<RationalPoint> {
    search_level(curve, class, 0, height)?.ok_or(Error::SearchExhausted(height))
}

fn search_level(
    curve: &SplitCurve,
    class: &SquareClassPair,
    previous: u64,
    height: u64,
) -> Result<Option<RationalPoint>> {
    for t in curve.torsion_points() {
        if curve.descent_image(&t)? == *class {
            return Ok(Some(t));
        }
    }
    if curve.coordinates(class).is_none() {
        return Ok(None);
    }
    let search = ClassSearch::new(curve, class);
    let hit = search.search(height, previous + 1, height, previous);
    match hit {
        Some((m, n)) => {
            let p = search.point(curve, m, n)?;
            if curve.descent_image(&p)? != *class {
                return Err(Error::Internal(format!("point {p} not in class {class}")));
            }
            Ok(Some(p))
        }
        None => Ok(None),
    }
}

/// Points `x = m / n^2`, `n <= 2`, on the real components, at most `cap`
/// candidates, in a fixed order.
pub fn small_height_points(curve: &SplitCurve, cap: u64) -> Vec<RationalPoint> {
    let per_range = (cap / 4).max(1);
    let mut out = Vec::new();
    for n in 1i64..=2 {
        let n2 = Integer::from(n * n);
        let e: Vec<Integer> = curve.roots.iter().map(|r| r * &n2).collect();
        let span = (&e[1] - &e[0]).to_u64().unwrap_or(u64::MAX).min(per_range);
        let ranges = [(e[0].clone(), span), (e[2].clone(), per_range)];
        for (start, len) in ranges {
            let found: Vec<RationalPoint> = (0..=len)
                .into_par_iter()
                .filter_map(|i| {
                    let m = &start + Integer::from(i);
                    if n == 2 && m.is_even() {
                        return None;
                    }
                    let v = (&m - &e[0]) * (&m - &e[1]) * (&m - &e[2]);
                    if v.is_zero() || !is_square_big(&v) {
                        return None;
                    }
                    let x = Rational::new(m, n2.clone());
                    is_rational_square(&curve.model.rhs(&x)).map(|y| RationalPoint::affine(x, y))
                })
                .collect();
            out.extend(found);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// rank bounds

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RankStatus {
    Determined,
    Interval,
}

impl fmt::Display for RankStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankStatus::Determined => "determined",
            RankStatus::Interval => "interval",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankBounds {
    pub rank_lower: u32,
    pub selmer_upper: u32,
    /// Non-torsion points independent modulo `2E(Q)` and torsion.
    pub witnesses: Vec<(RationalPoint, SquareClassPair)>,
    /// Selmer classes completing the witnesses' span to the Selmer group.
    pub undecided_classes: Vec<SquareClassPair>,
    pub status: RankStatus,
    /// Largest search height used.
    pub height_searched: u64,
}

/// Whether the class's homogeneous space has points over the reals and
/// over `Q_p` for every prime that matters.
pub fn locally_solvable(space: &HomogeneousSpace, budget: FactorBudget) -> Result<bool> {
    let ctx = DescentContext::new(SplitCurve::from_roots(space.roots(), budget)?)?;
    Ok(ctx.is_locally_solvable(&space.class()))
}

pub fn selmer_rank_upper(model: &IntegralModel, budget: FactorBudget) -> Result<u32> {
    let ctx = DescentContext::new(SplitCurve::new(model, budget)?)?;
    Ok(ctx.selmer_group()?.rank_bound())
}

pub fn rank_bounds(model: &IntegralModel, effort: &Effort) -> Result<RankBounds> {
    rank_bounds_with_points(model, &[], effort)
}

/// As [`rank_bounds`], seeding the lower bound with known points.
pub fn rank_bounds_with_points(
    model: &IntegralModel,
    known: &[RationalPoint],
    effort: &Effort,
) -> Result<RankBounds> {
    let curve = SplitCurve::new(model, effort.factor_budget)?;
    let ctx = DescentContext::new(curve)?;
    let selmer = ctx.selmer_group()?;
    let curve = ctx.curve();
    let target = selmer.dim();

    let mut span = Span::default();
    let mut witnesses = Vec::new();
    let offer = |p: &RationalPoint, span: &mut Span, witnesses: &mut Vec<_>| -> Result<()> {
        let class = curve.descent_image(p)?;
        let v = curve
            .coordinates(&class)
            .ok_or_else(|| Error::Internal(format!("class {class} outside the bad set")))?;
        if !ctx.is_locally_solvable(&class) {
            return Err(Error::Internal(format!("point {p} has non-Selmer class {class}")));
        }
        if span.insert(v) && span.dim() > 2 {
            witnesses.push((p.clone(), class));
        }
        Ok(())
    };
    for t in curve.torsion_points() {
        offer(&t, &mut span, &mut witnesses)?;
    }
    if span.dim() != 2 {
        return Err(Error::Internal("torsion classes do not span dimension 2".into()));
    }
    for p in known {
        offer(p, &mut span, &mut witnesses)?;
    }
    if span.dim() < target {
        for p in small_height_points(curve, effort.direct_search_cap) {
            offer(&p, &mut span, &mut witnesses)?;
            if span.dim() == target {
                break;
            }
        }
    }

    let mut previous = 0;
    let mut height = effort.initial_height.min(effort.max_height).max(1);
    let mut searched = 0;
    while span.dim() < target && selmer.dim() <= MAX_SEARCHED_CLASSES {
        for class in selmer.elements() {
            if span.dim() == target {
                break;
            }
            let v = curve.coordinates(class).expect("Selmer classes are supported");
            if span.contains(v) {
                continue;
            }
            if let Some(p) = search_level(curve, class, previous, height)? {
                offer(&p, &mut span, &mut witnesses)?;
            }
        }
        searched = height;
        if height >= effort.max_height {
            break;
        }
        previous = height;
        height = (height * 2).min(effort.max_height);
    }

    let mut undecided = Vec::new();
    let mut full = span.clone();
    let candidates: Vec<SquareClassPair> = if selmer.elements().is_empty() {
        selmer
            .basis
            .iter()
            .map(|&b| curve.class_from_coordinates(b))
            .collect()
    } else {
        selmer.elements().to_vec()
    };
    for class in candidates {
        let v = curve.coordinates(&class).expect("Selmer classes are supported");
        if full.insert(v) {
            undecided.push(class);
        }
    }

    let rank_lower = span.dim() - 2;
    let selmer_upper = selmer.rank_bound();
    debug_assert!(rank_lower <= selmer_upper);
    let status = match rank_lower.cmp(&selmer_upper) {
        Ordering::Equal => RankStatus::Determined,
        Ordering::Less => RankStatus::Interval,
        Ordering::Greater => {
            return Err(Error::Internal(format!(
                "lower bound {rank_lower} exceeds Selmer bound {selmer_upper}"
            )))
        }
    };
    Ok(RankBounds {
        rank_lower,
        selmer_upper,
        witnesses,
        undecided_classes: undecided,
        status,
        height_searched: searched,
    })
}

impl fmt::Display for RankBounds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] {}", self.rank_lower, self.selmer_upper, self.status)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::heron::FamilyCurve;
    use crate::numtheory::parse_rational;

    fn family(k: &str) -> FamilyCurve {
        FamilyCurve::new(&parse_rational(k).unwrap()).unwrap()
    }

    fn congruent(n: i64) -> IntegralModel {
        IntegralModel::from_coefficients(0, -n * n, 0).unwrap()
    }

    fn split(model: &IntegralModel) -> SplitCurve {
        SplitCurve::new(model, FactorBudget::default()).unwrap()
    }

    fn r(n: i64) -> Integer {
        Integer::from(n)
    }

    /// Points from the witnesses of a determined run, combined with torsion.
    fn sample_points(model: &IntegralModel) -> Vec<RationalPoint> {
        let rb = rank_bounds(model, &Effort::default()).unwrap();
        let cubic = model.as_cubic();
        let mut pts: Vec<RationalPoint> = split(model).torsion_points().to_vec();
        for (w, _) in &rb.witnesses {
            pts.push(w.clone());
            pts.push(cubic.add_unchecked(w, &pts[1]));
        }
        pts
    }

    #[test]
    fn image_conventions() {
        let c = split(&congruent(5));
        assert_eq!(c.roots(), &[r(-5), r(0), r(5)]);
        let t = c.torsion_points();
        assert!(c.descent_image(&t[0]).unwrap().is_trivial());
        // (e1,0) -> ((e1-e2)(e1-e3), e1-e2) = (50, -5)
        assert_eq!(
            c.descent_image(&t[1]).unwrap(),
            SquareClassPair { b1: r(2), b2: r(-5) }
        );
        // (e2,0) -> (e2-e1, (e2-e1)(e2-e3)) = (5, -25)
        assert_eq!(c.descent_image(&t[2]).unwrap(), SquareClassPair { b1: r(5), b2: r(-1) });
        assert_eq!(c.descent_image(&t[3]).unwrap(), SquareClassPair { b1: r(10), b2: r(5) });
        let off = RationalPoint::affine(Rational::from_integer(r(1)), Rational::from_integer(r(1)));
        assert_eq!(c.descent_image(&off), Err(Error::PointNotOnCurve));
    }

    #[test]
    fn image_is_a_homomorphism_killing_doubles() {
        for model in [congruent(5), congruent(34), family("3").integral] {
            let c = split(&model);
            let cubic = model.as_cubic();
            let pts = sample_points(&model);
            for p in &pts {
                let doubled = cubic.add_unchecked(p, p);
                assert!(c.descent_image(&doubled).unwrap().is_trivial(), "2P for {p}");
                for q in &pts {
                    let sum = cubic.add_unchecked(p, q);
                    assert_eq!(
                        c.descent_image(&sum).unwrap(),
                        c.descent_image(p).unwrap().multiply(&c.descent_image(q).unwrap())
                    );
                }
            }
        }
    }

    #[test]
    fn trivial_and_real_insolvable_classes() {
        let roots = [r(0), r(1), r(3)];
        let budget = FactorBudget::default();
        let trivial = HomogeneousSpace::new(&SquareClassPair::trivial(), &roots).unwrap();
        assert!(locally_solvable(&trivial, budget).unwrap());
        let negative = SquareClassPair { b1: r(-1), b2: r(1) };
        let space = HomogeneousSpace::new(&negative, &roots).unwrap();
        assert!(!locally_solvable(&space, budget).unwrap());

        let c = SplitCurve::from_roots(roots, budget).unwrap();
        assert_eq!(global_point_search(&c, &SquareClassPair::trivial(), 16).unwrap(), RationalPoint::Infinity);
        assert_eq!(global_point_search(&c, &negative, 64), Err(Error::SearchExhausted(64)));
    }

    #[test]
    fn classes_outside_the_bad_set_fail() {
        let ctx = DescentContext::new(split(&congruent(5))).unwrap();
        assert!(!ctx.is_locally_solvable(&SquareClassPair { b1: r(7), b2: r(1) }));
    }

    #[test]
    fn k6_enumeration_matches_selmer_dimension() {
        let fc = family("6");
        let ctx = DescentContext::new(split(&fc.integral)).unwrap();
        let group = ctx.selmer_group().unwrap();
        let n = ctx.curve().generator_count();
        let passing = (0u128..1 << n)
            .map(|v| ctx.curve().class_from_coordinates(v))
            .filter(|c| ctx.is_locally_solvable(c))
            .count();
        assert_eq!(passing, 1 << (group.rank_bound() + 2));
        assert_eq!(group.rank_bound(), 1);
        assert_eq!(selmer_rank_upper(&fc.integral, FactorBudget::default()).unwrap(), 1);
    }

    /// All classes from `x = a / p^(2j)` with `|a|` below a power of `p`.
    fn exhaustive_local_classes(c: &SplitCurve, place: &Place, p: i64) -> Vec<u8> {
        let mut seen = std::collections::BTreeSet::new();
        for t in c.torsion_points().iter().skip(1) {
            let cl = c.descent_image(t).unwrap();
            seen.insert(place.pair_bits(&Rational::from_integer(cl.b1), &Rational::from_integer(cl.b2)));
        }
        let bound = p.pow(if p == 2 { 9 } else { 5 });
        for j in 0..3u32 {
            let den = Integer::from(p).pow(2 * j);
            for a in -bound..=bound {
                let x = Rational::new(Integer::from(a), den.clone());
                let rhs = c.model().rhs(&x);
                if rhs.is_zero() || place.bits(&rhs) != 0 {
                    continue;
                }
                seen.insert(place.pair_bits(&(&x - c.root(0)), &(&x - c.root(1))));
            }
        }
        seen.into_iter().collect()
    }

    #[test]
    fn sampled_local_images_match_exhaustive_search() {
        for model in [congruent(5), congruent(6), IntegralModel::from_coefficients(-7, 6, 0).unwrap()] {
            let c = split(&model);
            for p in c.support().to_vec() {
                let place = Place::Prime(p.clone());
                let image = local_image(&c, place.clone()).unwrap();
                let expected = exhaustive_local_classes(&c, &place, p.to_i64().unwrap());
                let spanned: Vec<u8> = (0..=u8::MAX >> 2)
                    .filter(|&v| v >> (2 * place.width()) == 0 && image.contains(v))
                    .collect();
                assert_eq!(spanned, expected, "p = {p}");
            }
        }
    }

    #[test]
    fn congruent_number_ranks() {
        for (n, rank) in [(1, 0), (2, 0), (3, 0), (5, 1), (6, 1), (7, 1), (34, 2), (41, 2)] {
            let rb = rank_bounds(&congruent(n), &Effort::default()).unwrap();
            assert_eq!((rb.rank_lower, rb.selmer_upper), (rank, rank), "n = {n}");
            assert_eq!(rb.status, RankStatus::Determined);
        }
    }

    #[test]
    fn witnesses_are_valid() {
        let fc = family("3");
        let c = split(&fc.integral);
        let rb = rank_bounds(&fc.integral, &Effort::default()).unwrap();
        assert_eq!(rb.witnesses.len() as u32, rb.rank_lower);
        for (p, class) in &rb.witnesses {
            assert!(fc.integral.as_cubic().contains(p));
            assert_eq!(&c.descent_image(p).unwrap(), class);
            let space = HomogeneousSpace::new(class, c.roots()).unwrap();
            let z = space.z_values(p).unwrap();
            assert!(space.is_solution(&z));
        }
    }

    #[test]
    fn base_point_class_is_found_by_search() {
        let fc = family("6");
        let c = split(&fc.integral);
        let class = c.descent_image(&fc.integral_base_point()).unwrap();
        let p = global_point_search(&c, &class, DEFAULT_HEIGHT).unwrap();
        assert_eq!(c.descent_image(&p).unwrap(), class);
    }

    #[test]
    fn scaling_preserves_bounds() {
        for model in [congruent(6), family("6").integral] {
            let rescaled = model.as_cubic().rescale(&Rational::from_integer(r(3)));
            let scaled = rescaled.integral_model().unwrap();
            let a = rank_bounds(&model, &Effort::default()).unwrap();
            let b = rank_bounds(&scaled, &Effort::default()).unwrap();
            assert_eq!((a.rank_lower, a.selmer_upper), (b.rank_lower, b.selmer_upper));
        }
    }

    #[test]
    fn selmer_elements_are_closed() {
        let fc = family("4");
        let ctx = DescentContext::new(split(&fc.integral)).unwrap();
        let group = ctx.selmer_group().unwrap();
        let elements = group.elements();
        assert_eq!(elements.len(), 1 << group.dim());
        for a in elements {
            assert!(ctx.is_locally_solvable(a));
            for b in elements {
                assert!(elements.contains(&a.multiply(b)));
            }
        }
    }

    #[test]
    fn kernel_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let cols = rng.gen_range(1..=10usize);
            let rows: Vec<u128> = (0..rng.gen_range(0..8))
                .map(|_| rng.gen_range(0..1u128 << cols))
                .collect();
            let basis = kernel(rows.clone(), cols);
            let brute = (0u128..1 << cols)
                .filter(|x| rows.iter().all(|r| (r & x).count_ones() % 2 == 0))
                .count();
            assert_eq!(1usize << basis.len(), brute);
            for b in basis {
                assert!(rows.iter().all(|r| (r & b).count_ones() % 2 == 0));
            }
        }
    }

    #[test]
    fn integer_square_test() {
        for v in [0i128, 1, 4, 1 << 100, (i128::from(u64::MAX)) * i128::from(u64::MAX >> 2)] {
            let root = isqrt_u128(v as u128);
            assert!(root * root <= v as u128 && (root + 1) * (root + 1) > v as u128);
        }
        for v in 0i128..5000 {
            let root = (v as f64).sqrt().round() as i128;
            assert_eq!(is_square_i128(v), root * root == v);
        }
        assert!(!is_square_i128(-4));
        let big = i128::from(3_037_000_499u64).pow(2);
        assert!(is_square_i128(big) && !is_square_i128(big + 1));
    }
}
