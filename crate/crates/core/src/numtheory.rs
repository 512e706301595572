//! Exact integer and rational utilities shared by the curve code.
//!
//! Everything here is a pure function over immutable big integers. There is
//! no floating point in this module.

use std::fmt;
use std::sync::OnceLock;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_integer::Integer as _;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type Integer = BigInt;
pub type Rational = BigRational;

/// Rounds of Miller-Rabin used above 2^64.
pub const MILLER_RABIN_ROUNDS: u32 = 40;

/// Upper bound on the probability (as a power of two) that a composite
/// above 2^64 is reported prime. Below 2^64 the test is deterministic.
pub const PRIMALITY_ERROR_LOG2: i32 = -80;

const DEFAULT_TRIAL_BOUND: u64 = 1_000_000;

/// Limits for [`factorize`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FactorBudget {
    pub trial_bound: u64,
    pub rho_iterations: u64,
}

impl Default for FactorBudget {
    fn default() -> Self {
        Self {
            trial_bound: DEFAULT_TRIAL_BOUND,
            rho_iterations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Factorization {
    /// +1 or -1.
    pub sign: i8,
    /// Prime powers in strictly increasing prime order.
    pub factors: Vec<(Integer, u32)>,
}

impl Factorization {
    pub fn value(&self) -> Integer {
        let mut acc = Integer::from(self.sign);
        for (p, e) in &self.factors {
            acc *= num_traits::pow(p.clone(), *e as usize);
        }
        acc
    }

    pub fn primes(&self) -> impl Iterator<Item = &Integer> {
        self.factors.iter().map(|(p, _)| p)
    }

    /// All positive divisors, unsorted.
    pub fn divisors(&self) -> Vec<Integer> {
        let mut out = vec![Integer::one()];
        for (p, e) in &self.factors {
            let mut next = Vec::with_capacity(out.len() * (*e as usize + 1));
            for d in &out {
                let mut pk = d.clone();
                next.push(pk.clone());
                for _ in 0..*e {
                    pk *= p;
                    next.push(pk.clone());
                }
            }
            out = next;
        }
        out
    }
}

impl fmt::Display for Factorization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.sign < 0 {
            parts.push("-1".into());
        }
        for (p, e) in &self.factors {
            if *e == 1 {
                parts.push(p.to_string());
            } else {
                parts.push(format!("{p}^{e}"));
            }
        }
        if parts.is_empty() {
            return f.write_str("1");
        }
        f.write_str(&parts.join("*"))
    }
}

/// Primes `<= n` by the sieve of Eratosthenes.
pub fn primes_up_to(n: u64) -> Vec<u64> {
    if n < 2 {
        return Vec::new();
    }
    let n = n as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for i in 2..=n {
        if composite[i] {
            continue;
        }
        out.push(i as u64);
        let mut j = i.saturating_mul(i);
        while j <= n {
            composite[j] = true;
            j += i;
        }
    }
    out
}

fn trial_primes(bound: u64) -> std::borrow::Cow<'static, [u64]> {
    static DEFAULT: OnceLock<Vec<u64>> = OnceLock::new();
    let cached = DEFAULT.get_or_init(|| primes_up_to(DEFAULT_TRIAL_BOUND));
    if bound <= DEFAULT_TRIAL_BOUND {
        let end = cached.partition_point(|&p| p <= bound);
        std::borrow::Cow::Borrowed(&cached[..end])
    } else {
        std::borrow::Cow::Owned(primes_up_to(bound))
    }
}

// ---------------------------------------------------------------------------
// primality

fn mul_mod_u64(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod_u64(mut b: u64, mut e: u64, m: u64) -> u64 {
    let mut r = 1 % m;
    b %= m;
    while e > 0 {
        if e & 1 == 1 {
            r = mul_mod_u64(r, b, m);
        }
        b = mul_mod_u64(b, b, m);
        e >>= 1;
    }
    r
}

fn is_prime_u64(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    const BASES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];
    for p in BASES {
        if n.is_multiple_of(p) {
            return n == p;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    'witness: for a in BASES {
        let mut x = pow_mod_u64(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod_u64(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Miller-Rabin. Deterministic for `n < 2^64`; otherwise
/// [`MILLER_RABIN_ROUNDS`] rounds with bases drawn from a generator seeded
/// by `n`, so the answer is a pure function of `n`.
pub fn is_probable_prime(n: &Integer) -> bool {
    if n.is_negative() {
        return false;
    }
    if let Some(small) = n.to_u64() {
        return is_prime_u64(small);
    }
    let n = n.magnitude();
    for p in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if (n % p).is_zero() {
            return false;
        }
    }
    let one = BigUint::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let seed = n.iter_u64_digits().fold(0x9e37_79b9_7f4a_7c15u64, |h, w| {
        h.rotate_left(17) ^ w.wrapping_mul(0xbf58_476d_1ce4_e5b9)
    });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let two = BigUint::from(2u32);
    'witness: for round in 0..MILLER_RABIN_ROUNDS {
        let a = if round < 12 {
            BigUint::from([2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37][round as usize])
        } else {
            rng.gen_biguint_range(&two, &n_minus_1)
        };
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = (&x * &x) % n;
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

// ---------------------------------------------------------------------------
// factorization

fn gcd_u64(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Brent's cycle-finding variant of Pollard rho on a word-sized composite.
fn rho_u64(n: u64, budget: &mut u64) -> Option<u64> {
    if n.is_multiple_of(2) {
        return Some(2);
    }
    for c in 1..64u64 {
        let f = |x: u64| (mul_mod_u64(x, x, n) + c) % n;
        let (mut x, mut y, mut ys) = (2u64, 2u64, 2u64);
        let (mut g, mut r, mut q) = (1u64, 1u64, 1u64);
        const M: u64 = 128;
        while g == 1 {
            x = y;
            for _ in 0..r {
                y = f(y);
            }
            let mut k = 0;
            while k < r && g == 1 {
                ys = y;
                let steps = M.min(r - k);
                if *budget < steps {
                    return None;
                }
                *budget -= steps;
                for _ in 0..steps {
                    y = f(y);
                    q = mul_mod_u64(q, x.abs_diff(y), n);
                }
                g = gcd_u64(q, n);
                k += M;
            }
            r *= 2;
        }
        if g == n {
            loop {
                ys = f(ys);
                g = gcd_u64(x.abs_diff(ys), n);
                if g > 1 {
                    break;
                }
            }
        }
        if g != n {
            return Some(g);
        }
    }
    None
}

fn rho_big(n: &BigUint, budget: &mut u64) -> Option<BigUint> {
    if n.is_even() {
        return Some(BigUint::from(2u32));
    }
    let one = BigUint::one();
    for c in 1..64u32 {
        let c = BigUint::from(c);
        let f = |x: &BigUint| (x * x + &c) % n;
        let (mut x, mut y, mut ys) = (BigUint::from(2u32), BigUint::from(2u32), BigUint::from(2u32));
        let (mut g, mut r, mut q) = (one.clone(), 1u64, one.clone());
        const M: u64 = 128;
        while g == one {
            x = y.clone();
            for _ in 0..r {
                y = f(&y);
            }
            let mut k = 0;
            while k < r && g == one {
                ys = y.clone();
                let steps = M.min(r - k);
                if *budget < steps {
                    return None;
                }
                *budget -= steps;
                for _ in 0..steps {
                    y = f(&y);
                    let diff = if x > y { &x - &y } else { &y - &x };
                    q = (q * diff) % n;
                }
                g = q.gcd(n);
                k += M;
            }
            r *= 2;
        }
        if &g == n {
            loop {
                ys = f(&ys);
                let diff = if x > ys { &x - &ys } else { &ys - &x };
                g = diff.gcd(n);
                if g > one {
                    break;
                }
            }
        }
        if &g != n {
            return Some(g);
        }
    }
    None
}

fn split_composite(n: &BigUint, budget: &mut u64) -> Option<BigUint> {
    match n.to_u64() {
        Some(small) => rho_u64(small, budget).map(BigUint::from),
        None => rho_big(n, budget),
    }
}

/// Complete factorization of a nonzero integer: trial division up to
/// `budget.trial_bound`, then Pollard-Brent rho with a shared iteration
/// budget. Running out of budget is an error, never a partial answer.
pub fn factorize(n: &Integer, budget: FactorBudget) -> Result<Factorization> {
    if n.is_zero() {
        return Err(Error::InvalidInput("cannot factor zero".into()));
    }
    let sign = if n.is_negative() { -1 } else { 1 };
    let mut m = n.magnitude().clone();
    let mut found: Vec<(BigUint, u32)> = Vec::new();

    let primes = trial_primes(budget.trial_bound);
    let mut last_trial = 1u64;
    for &p in primes.iter() {
        let pb = BigUint::from(p);
        if &pb * &pb > m {
            break;
        }
        last_trial = p;
        let mut e = 0;
        loop {
            let (q, r) = m.div_rem(&pb);
            if !r.is_zero() {
                break;
            }
            m = q;
            e += 1;
        }
        if e > 0 {
            found.push((pb, e));
        }
    }

    let mut stack = Vec::new();
    if m > BigUint::one() {
        stack.push(m);
    }
    let mut iterations = budget.rho_iterations;
    let trial_sq = BigUint::from(last_trial) * BigUint::from(last_trial);
    while let Some(c) = stack.pop() {
        let small_enough = last_trial >= 2 && c <= trial_sq;
        if small_enough || is_probable_prime(&BigInt::from(c.clone())) {
            found.push((c, 1));
            continue;
        }
        match split_composite(&c, &mut iterations) {
            Some(d) => {
                let other = &c / &d;
                stack.push(d);
                stack.push(other);
            }
            None => {
                return Err(Error::FactorizationIncomplete {
                    cofactor: c.to_string(),
                })
            }
        }
    }

    found.sort();
    let mut factors: Vec<(Integer, u32)> = Vec::new();
    for (p, e) in found {
        let p = BigInt::from(p);
        match factors.last_mut() {
            Some((q, f)) if *q == p => *f += e,
            _ => factors.push((p, e)),
        }
    }
    Ok(Factorization { sign, factors })
}

/// The squarefree `d` with `n = d m^2` and `sign(d) = sign(n)`.
pub fn squarefree_part(n: &Integer, budget: FactorBudget) -> Result<Integer> {
    let f = factorize(n, budget)?;
    let mut d = Integer::from(f.sign);
    for (p, e) in f.factors {
        if e % 2 == 1 {
            d *= p;
        }
    }
    Ok(d)
}

// ---------------------------------------------------------------------------
// quadratic residues

/// Jacobi symbol `(a/n)` for odd positive `n`.
pub fn jacobi_symbol(a: &Integer, n: &Integer) -> i8 {
    assert!(n.is_positive() && n.is_odd(), "jacobi symbol needs odd positive modulus");
    let mut a = a.mod_floor(n);
    let mut n = n.clone();
    let mut t = 1i8;
    while !a.is_zero() {
        let z = a.trailing_zeros().unwrap_or(0);
        a >>= z;
        let n8 = (&n % 8u32).to_u32().unwrap();
        if z % 2 == 1 && (n8 == 3 || n8 == 5) {
            t = -t;
        }
        std::mem::swap(&mut a, &mut n);
        if (&a % 4u32).to_u32() == Some(3) && (&n % 4u32).to_u32() == Some(3) {
            t = -t;
        }
        a = a.mod_floor(&n);
    }
    if n.is_one() {
        t
    } else {
        0
    }
}

/// A square root of `a` modulo the prime `p` (Tonelli-Shanks), or `None`
/// when `a` is a non-residue.
pub fn sqrt_mod_p(a: &Integer, p: &Integer) -> Option<Integer> {
    let a = a.mod_floor(p);
    if a.is_zero() {
        return Some(Integer::zero());
    }
    if *p == Integer::from(2) {
        return Some(a);
    }
    if jacobi_symbol(&a, p) != 1 {
        return None;
    }
    let one = Integer::one();
    let p_minus_1 = p - &one;
    let s = p_minus_1.trailing_zeros().unwrap_or(0);
    let q = &p_minus_1 >> s;
    if s == 1 {
        return Some(a.modpow(&((p + &one) >> 2), p));
    }
    let mut z = Integer::from(2);
    while jacobi_symbol(&z, p) != -1 {
        z += 1;
    }
    let mut m = s;
    let mut c = z.modpow(&q, p);
    let mut t = a.modpow(&q, p);
    let mut r = a.modpow(&((&q + &one) >> 1), p);
    while !t.is_one() {
        let mut i = 0;
        let mut t2 = t.clone();
        while !t2.is_one() {
            t2 = (&t2 * &t2) % p;
            i += 1;
        }
        let b = c.modpow(&(Integer::one() << (m - i - 1)), p);
        m = i;
        c = (&b * &b) % p;
        t = (&t * &c) % p;
        r = (&r * &b) % p;
    }
    Some(r)
}

// ---------------------------------------------------------------------------
// squares

/// `Some(r)` with `r >= 0` and `r^2 = n`, if `n` is a perfect square.
pub fn exact_sqrt(n: &Integer) -> Option<Integer> {
    if n.is_negative() {
        return None;
    }
    let r = n.sqrt();
    (&r * &r == *n).then_some(r)
}

/// Nonnegative rational square root, if `q` is the square of a rational.
pub fn is_rational_square(q: &Rational) -> Option<Rational> {
    // numerator and denominator are coprime, so both must be squares
    let n = exact_sqrt(q.numer())?;
    let d = exact_sqrt(q.denom())?;
    Some(Rational::new(n, d))
}

// ---------------------------------------------------------------------------
// polynomial roots

fn eval_homogeneous(coeffs: &[Integer], num: &Integer, den: &Integer) -> Integer {
    // sum c_i num^i den^(n-i), Horner in the numerator
    let n = coeffs.len() - 1;
    let mut acc = coeffs[n].clone();
    let mut den_pow = Integer::one();
    for i in (0..n).rev() {
        den_pow *= den;
        acc = acc * num + &coeffs[i] * &den_pow;
    }
    acc
}

fn clear_denominators(poly: &[Rational]) -> Vec<Integer> {
    let lcm = poly
        .iter()
        .fold(Integer::one(), |acc, c| acc.lcm(c.denom()));
    poly.iter()
        .map(|c| (c * Rational::from_integer(lcm.clone())).to_integer())
        .collect()
}

fn trim(mut coeffs: Vec<Integer>) -> Vec<Integer> {
    while coeffs.len() > 1 && coeffs.last().is_some_and(Zero::is_zero) {
        coeffs.pop();
    }
    coeffs
}

/// All rational roots of `poly`, coefficients in ascending degree order.
///
/// Rational root theorem: after clearing denominators every root `p/q` in
/// lowest terms has `p | c_0` and `q | c_n`. Output is sorted, without
/// multiplicity.
pub fn rational_roots(poly: &[Rational]) -> Result<Vec<Rational>> {
    let mut coeffs = trim(clear_denominators(poly));
    if coeffs.iter().all(Zero::is_zero) {
        return Err(Error::InvalidInput("zero polynomial has no finite root set".into()));
    }
    let mut roots = Vec::new();
    if coeffs[0].is_zero() {
        roots.push(Rational::zero());
        let first = coeffs.iter().position(|c| !c.is_zero()).unwrap();
        coeffs.drain(..first);
    }
    if coeffs.len() > 1 {
        let budget = FactorBudget::default();
        let nums = factorize(&coeffs[0], budget)?.divisors();
        let dens = factorize(coeffs.last().unwrap(), budget)?.divisors();
        for q in &dens {
            for p in &nums {
                if !p.gcd(q).is_one() {
                    continue;
                }
                for cand in [p.clone(), -p] {
                    if eval_homogeneous(&coeffs, &cand, q).is_zero() {
                        roots.push(Rational::new(cand, q.clone()));
                    }
                }
            }
        }
    }
    roots.sort();
    roots.dedup();
    Ok(roots)
}

fn eval_mod(coeffs: &[Integer], x: &Integer, m: &Integer) -> Integer {
    coeffs
        .iter()
        .rev()
        .fold(Integer::zero(), |acc, c| (acc * x + c).mod_floor(m))
}

fn derivative(coeffs: &[Integer]) -> Vec<Integer> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, c)| c * Integer::from(i))
        .collect()
}

fn mod_inverse(a: &Integer, m: &Integer) -> Option<Integer> {
    let e = a.mod_floor(m).extended_gcd(m);
    e.gcd.is_one().then(|| e.x.mod_floor(m))
}

/// Integer roots of an integer polynomial (ascending coefficients) by
/// lifting simple roots modulo a small prime past the Cauchy bound.
///
/// Avoids factoring the constant term, so it stays cheap for the large
/// coefficients of division polynomials. Falls back to [`rational_roots`]
/// if no prime with only simple roots is found (polynomials with repeated
/// roots).
pub fn integer_roots(poly: &[Integer]) -> Result<Vec<Integer>> {
    let mut coeffs = trim(poly.to_vec());
    if coeffs.iter().all(Zero::is_zero) {
        return Err(Error::InvalidInput("zero polynomial has no finite root set".into()));
    }
    let mut roots = Vec::new();
    if coeffs[0].is_zero() {
        roots.push(Integer::zero());
        let first = coeffs.iter().position(|c| !c.is_zero()).unwrap();
        coeffs.drain(..first);
    }
    if coeffs.len() == 1 {
        return Ok(roots);
    }
    let lead = coeffs.last().unwrap().abs();
    let max_ratio = coeffs[..coeffs.len() - 1]
        .iter()
        .map(|c| c.abs().div_ceil(&lead))
        .max()
        .unwrap();
    let bound = (max_ratio + 1u32).min(coeffs[0].abs());
    let deriv = derivative(&coeffs);

    'prime: for p in primes_up_to(2000).into_iter().skip(1) {
        let pb = Integer::from(p);
        if (coeffs.last().unwrap() % &pb).is_zero() {
            continue;
        }
        let mut simple = Vec::new();
        for r in 0..p {
            let r = Integer::from(r);
            if eval_mod(&coeffs, &r, &pb).is_zero() {
                if eval_mod(&deriv, &r, &pb).is_zero() {
                    continue 'prime;
                }
                simple.push(r);
            }
        }
        let target = &bound * 2u32 + 1u32;
        for mut r in simple {
            let mut modulus = pb.clone();
            while modulus <= target {
                modulus = &modulus * &modulus;
                let fr = eval_mod(&coeffs, &r, &modulus);
                let dr = eval_mod(&deriv, &r, &modulus);
                let inv = mod_inverse(&dr, &modulus).expect("simple root derivative is a unit");
                r = (&r - fr * inv).mod_floor(&modulus);
            }
            let half = &modulus >> 1;
            let cand = if r > half { r - &modulus } else { r };
            if eval_homogeneous(&coeffs, &cand, &Integer::one()).is_zero() {
                roots.push(cand);
            }
        }
        roots.sort();
        roots.dedup();
        return Ok(roots);
    }

    let rational: Vec<Rational> = coeffs.iter().cloned().map(Rational::from_integer).collect();
    roots.extend(
        rational_roots(&rational)?
            .into_iter()
            .filter(|r| r.is_integer())
            .map(|r| r.to_integer()),
    );
    roots.sort();
    roots.dedup();
    Ok(roots)
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(n: &Integer, p: &Integer) -> u32 {
    debug_assert!(!n.is_zero());
    let mut n = n.clone();
    let mut v = 0;
    loop {
        let (q, r) = n.div_rem(p);
        if !r.is_zero() {
            return v;
        }
        n = q;
        v += 1;
    }
}

/// Parse `"p/q"` or `"n"` into a rational.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let parse = |t: &str| {
        t.trim()
            .parse::<Integer>()
            .map_err(|_| Error::InvalidInput(format!("not a rational number: {s:?}")))
    };
    let q = match s.split_once('/') {
        Some((n, d)) => {
            let d = parse(d)?;
            if d.is_zero() {
                return Err(Error::InvalidInput(format!("zero denominator in {s:?}")));
            }
            Rational::new(parse(n)?, d)
        }
        None => Rational::from_integer(parse(s)?),
    };
    Ok(q)
}
