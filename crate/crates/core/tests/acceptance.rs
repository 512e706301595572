//! End-to-end acceptance checks, one line of output per criterion.
//!
//! Run with `cargo test -p heron-core --test acceptance`.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use heron_core::curve::count_points_mod_p;
use heron_core::descent::{rank_bounds_with_points, SplitCurve};
use heron_core::heron::{
    closed_form_a, closed_form_b, family_discriminant, heron_area, heron_sides, right_triangle_relation,
    RightAngle,
};
use heron_core::numtheory::{is_rational_square, parse_rational, primes_up_to};
use heron_core::sieve::{rank_distribution, scan, sieve_checkpoints, sieve_score, KRange, RecordStatus, ScanConfig};
use heron_core::torsion::{point_order, torsion_subgroup, PointOrder, TorsionStructure};
use heron_core::{CubicModel, Effort, FactorBudget, FamilyCurve, Integer, IntegralModel, Rational, RationalPoint};
use num_integer::Integer as _;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn q(s: &str) -> Rational {
    parse_rational(s).unwrap()
}

fn family(s: &str) -> FamilyCurve {
    FamilyCurve::new(&q(s)).unwrap()
}

/// Nonsingular parameters `n/d` with `|n| <= num_max`, `1 <= d <= den_max`.
fn random_parameters(seed: u64, count: usize, num_max: i64, den_max: i64) -> Vec<Rational> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.gen_range(-num_max..=num_max);
        let d = rng.gen_range(1..=den_max);
        let k = Rational::new(n.into(), d.into());
        if !(k.is_zero() || k.abs() == Rational::from_integer(2.into())) {
            out.push(k);
        }
    }
    out
}

const TABLE_PARAMETERS: [&str; 6] = ["98/625", "11", "19", "3", "4", "6"];

fn criterion_1() {
    let rows = [
        ("3", "6899", "14152500", "8901922500"),
        ("4", "26432", "225607680", "613652889600"),
        ("6", "192512", "12079595520", "247390116249600"),
        ("11", "4547347", "6818384095380", "3363133863125708100"),
        ("19", "89515187", "2523432520031220", "22674567869155130588100"),
    ];
    for (k, a2, a4, a6) in rows {
        let c = family(k);
        assert_eq!(c.integral.scale, Integer::from(2), "k = {k}");
        assert_eq!(
            (c.integral.a2.to_string(), c.integral.a4.to_string(), c.integral.a6.to_string()),
            (a2.to_string(), a4.to_string(), a6.to_string()),
            "k = {k}"
        );
    }
    for (k, _, _, _) in rows {
        let c = family(k);
        assert_eq!(c.scaled_model(), c.integral.as_cubic(), "k = {k}");
    }
    let c = family("98/625");
    let c = c.scaled_model();
    assert_eq!(*c.a2(), q("-3859986810117979136/59604644775390625"));
    assert_eq!(
        *c.a4(),
        q("-302381696902314690275394654830592/1136868377216160297393798828125")
    );
    assert_eq!(
        *c.a6(),
        q("720840680923373992917188523670698174399532498944/21684043449710088680149056017398834228515625")
    );
}

/// The discriminant as a product of its factors in `k`.
fn factored_discriminant(k: &Rational) -> Rational {
    let p = |coeffs: &[i64]| {
        coeffs
            .iter()
            .rev()
            .fold(Rational::zero(), |acc, &c| acc * k + Rational::from_integer(c.into()))
    };
    let sq = |x: Rational| &x * &x;
    Rational::new(1.into(), 16.into())
        * sq(k.clone())
        * sq(p(&[20, -4, 1]))
        * sq(p(&[-16, 4, -8, 1]))
        * sq(p(&[4, -12, 1]))
        * sq(sq(p(&[-2, 1])))
        * sq(sq(p(&[2, 1])))
        * sq(p(&[4, -4, 5]))
        * sq(p(&[-4, -12, 3]))
}

fn criterion_2() {
    for k in random_parameters(2, 500, 100, 100) {
        let t = heron_sides(&k).unwrap();
        let product = CubicModel::from_roots(&-(&t.a * &t.b), &-(&t.b * &t.c), &-(&t.a * &t.c)).unwrap();
        let moved = product.translate(&-(&t.a * &t.c));
        let (a, b) = (closed_form_a(&k), closed_form_b(&k));
        assert_eq!(*moved.a2(), a, "A at k = {k}");
        assert_eq!(*moved.a4(), b, "B at k = {k}");
        assert!(moved.a6().is_zero());
        let from_ab = Rational::from_integer(16.into()) * &b * &b * (&a * &a - Rational::from_integer(4.into()) * &b);
        let factored = factored_discriminant(&k);
        assert_eq!(factored, from_ab, "k = {k}");
        assert_eq!(factored, product.discriminant(), "k = {k}");
        assert_eq!(family_discriminant(&k), factored, "k = {k}");
    }
}

fn criterion_3() {
    for k in random_parameters(3, 500, 100, 100) {
        let t = heron_sides(&k).unwrap();
        assert!(is_rational_square(&t.squared_area).is_some(), "k = {k}");
    }
    for (k, area) in [("3", "75"), ("5", "2205"), ("6", "6144")] {
        assert_eq!(heron_area(&q(k)).unwrap(), q(area), "k = {k}");
    }
}

fn criteria_4_and_5_sample() -> Vec<Rational> {
    let mut ks: Vec<Rational> = TABLE_PARAMETERS.iter().map(|k| q(k)).collect();
    ks.extend(random_parameters(4, 50, 50, 50));
    ks
}

fn criterion_4() {
    for k in criteria_4_and_5_sample() {
        let c = FamilyCurve::new(&k).unwrap();
        let g = torsion_subgroup(&c.integral).unwrap();
        assert_eq!(g.structure, TorsionStructure::TwoByEven(1), "k = {k}");
        assert_eq!(g.structure.to_string(), "Z/2Z x Z/2Z");
    }
}

fn criterion_5() {
    for k in criteria_4_and_5_sample() {
        let c = FamilyCurve::new(&k).unwrap();
        let order = point_order(&c.integral.as_cubic(), &c.integral_base_point()).unwrap();
        assert_eq!(order, PointOrder::Infinite, "k = {k}");
        let order = point_order(&c.product, &c.base_point).unwrap();
        assert_eq!(order, PointOrder::Infinite, "k = {k}");
    }
}

fn criterion_6() {
    let effort = Effort::default();
    for (k, rank) in [("6", 1), ("4", 2), ("3", 3)] {
        let c = family(k);
        let rb = rank_bounds_with_points(&c.integral, &[c.integral_base_point()], &effort).unwrap();
        println!("      k = {k}: {rb}");
        assert_eq!((rb.rank_lower, rb.selmer_upper), (rank, rank), "k = {k}");
    }
    for (k, rank) in [("11", 5), ("19", 4)] {
        let c = family(k);
        let rb = rank_bounds_with_points(&c.integral, &[c.integral_base_point()], &effort).unwrap();
        println!("      k = {k}: {rb}");
        assert!(rb.selmer_upper >= rank && rb.rank_lower >= 1, "k = {k}");
        assert!(rb.rank_lower <= rb.selmer_upper);
        if rb.rank_lower == rb.selmer_upper {
            assert_eq!(rb.rank_lower, rank, "k = {k}");
        }
    }

    let mut config = ScanConfig::new(KRange::integers(3, 10));
    config.top_fraction = 100.0;
    config.limit = 1000;
    let records = scan(&config).unwrap();
    let d = rank_distribution(&records).unwrap();
    let rounded: f64 = d.ranks.iter().map(|(_, p)| (p * 10.0).round() / 10.0).sum::<f64>()
        + (d.undetermined * 10.0).round() / 10.0;
    assert!((d.percent_sum() - 100.0).abs() < 1e-9);
    assert!((rounded - 100.0).abs() <= 0.05 * (d.ranks.len() + 1) as f64);
    let intervals = records.iter().filter(|r| r.status == RecordStatus::Interval).count();
    assert_eq!(d.undetermined_count, intervals);
    assert_eq!(d.total, records.iter().filter(|r| r.has_rank()).count());
    for line in d.to_string().lines() {
        println!("      {line}");
    }
}

/// Straight-line sieve: direct pair counts, `1 - (p - 1)/|E(F_p)|` form.
fn reference_sieve(model: &IntegralModel, limit: u64) -> f64 {
    let mut total = 0.0;
    for p in primes_up_to(limit) {
        let pi = Integer::from(p);
        if model.discriminant().is_multiple_of(&pi) {
            continue;
        }
        let red = |c: &Integer| c.mod_floor(&pi).to_u64().unwrap();
        let (a2, a4, a6) = (red(&model.a2), red(&model.a4), red(&model.a6));
        let mut squares = vec![0u64; p as usize];
        for y in 0..p {
            squares[(y * y % p) as usize] += 1;
        }
        let affine: u64 = (0..p)
            .map(|x| squares[((((x + a2) % p * x + a4) % p * x + a6) % p) as usize])
            .sum();
        total += (1.0 - (p - 1) as f64 / (affine + 1) as f64) * (p as f64).ln();
    }
    total
}

fn criterion_7() {
    let e6 = family("6").integral;
    let s = sieve_score(&e6, 10).unwrap();
    let expected = 6.0 / 12.0 * 7f64.ln();
    let ulp = f64::from_bits(expected.to_bits() + 1) - expected;
    assert!((s.value - expected).abs() <= ulp, "{} vs {expected}", s.value);

    for k in ["3", "4", "6", "11", "19"] {
        let model = family(k).integral;
        let ours = sieve_score(&model, 1000).unwrap().value;
        let theirs = reference_sieve(&model, 1000);
        assert!((ours - theirs).abs() <= 1e-12 * theirs.abs().max(1.0), "k = {k}: {ours} vs {theirs}");
    }

    for k in ["3", "6", "98/625"] {
        let model = family(k).integral;
        let s = sieve_checkpoints(&model, &[100, 500, 1000]).unwrap();
        for (lo, hi) in [(0, 1), (1, 2), (0, 2)] {
            let mut value = s[lo].value;
            for p in primes_up_to(s[hi].limit) {
                if p > s[lo].limit && model.is_good_prime(p) {
                    value += heron_core::sieve::sieve_term(p, model.trace_ap(p).unwrap());
                }
            }
            assert_eq!(value.to_bits(), s[hi].value.to_bits(), "k = {k}");
            assert_eq!(
                sieve_score(&model, s[hi].limit).unwrap().value.to_bits(),
                s[hi].value.to_bits()
            );
        }
    }
}

fn criterion_8() {
    assert_eq!(right_triangle_relation(&q("6")).unwrap(), Some(RightAngle::HypotenuseA));
    assert_eq!(right_triangle_relation(&q("2/3")).unwrap(), Some(RightAngle::HypotenuseB));
    let t = heron_sides(&q("2/3")).unwrap();
    assert!(t.c.is_negative() && !t.geometric);
    for k in 1..=50i64 {
        if k == 2 || k == 6 {
            continue;
        }
        let k = Rational::from_integer(k.into());
        assert_eq!(right_triangle_relation(&k).unwrap(), None, "k = {k}");
    }
}

fn small_combinations(cubic: &CubicModel, gens: &[RationalPoint]) -> Vec<RationalPoint> {
    let mut out = vec![RationalPoint::Infinity];
    for g in gens {
        let mut next = Vec::new();
        for p in &out {
            for n in -2i64..=2 {
                let m = cubic.scalar_multiply(&Integer::from(n), g).unwrap();
                next.push(cubic.add_points(p, &m).unwrap());
            }
        }
        out = next;
    }
    out
}

fn criterion_9() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // associativity
    let c = family("3");
    let cubic = c.integral.as_cubic();
    let rb = heron_core::rank_bounds(&c.integral, &Effort::default()).unwrap();
    let mut gens: Vec<RationalPoint> = rb.witnesses.iter().map(|(p, _)| p.clone()).collect();
    gens.truncate(2);
    gens.push(RationalPoint::affine(
        Rational::from_integer(c.integral_roots()[0].clone()),
        Rational::zero(),
    ));
    let pool = small_combinations(&cubic, &gens);
    for _ in 0..100 {
        let pick = |rng: &mut ChaCha8Rng| pool[rng.gen_range(0..pool.len())].clone();
        let (a, b, d) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
        let left = cubic.add_points(&cubic.add_points(&a, &b).unwrap(), &d).unwrap();
        let right = cubic.add_points(&a, &cubic.add_points(&b, &d).unwrap()).unwrap();
        assert_eq!(left, right);
    }

    // Hasse bound and torsion injection
    let curves: Vec<IntegralModel> = ["3", "4", "6", "11", "98/625"].iter().map(|k| family(k).integral).collect();
    for model in &curves {
        let torsion = u64::from(torsion_subgroup(model).unwrap().order());
        let mut injected = 0;
        for p in primes_up_to(1000) {
            if !model.is_good_prime(p) {
                continue;
            }
            let s = model.reduce_mod_p(p).unwrap();
            assert!(s.trace * s.trace <= 4 * p as i64, "Hasse at p = {p}");
            if p > 2 && injected < 20 {
                assert_eq!(s.order % torsion, 0, "p = {p}");
                injected += 1;
            }
        }
        assert_eq!(injected, 20);
    }

    // descent homomorphism and soundness sandwich
    for k in ["3", "4", "6"] {
        let c = family(k);
        let split = SplitCurve::new(&c.integral, FactorBudget::default()).unwrap();
        let cubic = c.integral.as_cubic();
        let rb = rank_bounds_with_points(&c.integral, &[c.integral_base_point()], &Effort::default()).unwrap();
        assert!(rb.rank_lower <= rb.selmer_upper);
        let mut pts: Vec<RationalPoint> = split.torsion_points().to_vec();
        pts.extend(rb.witnesses.iter().map(|(p, _)| p.clone()));
        for a in &pts {
            for b in &pts {
                let sum = cubic.add_points(a, b).unwrap();
                let lhs = split.descent_image(&sum).unwrap();
                let rhs = split.descent_image(a).unwrap().multiply(&split.descent_image(b).unwrap());
                assert_eq!(lhs, rhs, "k = {k}");
            }
        }
    }

    // character sum against pair enumeration
    for model in &curves[..3] {
        for p in primes_up_to(200) {
            if !model.is_good_prime(p) {
                continue;
            }
            let pi = Integer::from(p);
            let red = |c: &Integer| c.mod_floor(&pi).to_u64().unwrap();
            let (a2, a4, a6) = (red(&model.a2), red(&model.a4), red(&model.a6));
            let mut pairs = 1u64;
            for x in 0..p {
                let rhs = (((x + a2) % p * x + a4) % p * x + a6) % p;
                pairs += (0..p).filter(|y| y * y % p == rhs).count() as u64;
            }
            assert_eq!(count_points_mod_p(a2, a4, a6, p), pairs, "p = {p}");
        }
    }
}

type Criterion = (&'static str, fn(), Duration);

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("1 integral and rational model coefficients", criterion_1, Duration::from_secs(1)),
        ("2 closed forms and factored discriminant", criterion_2, Duration::from_secs(10)),
        ("3 squared areas are squares", criterion_3, Duration::from_secs(10)),
        ("4 torsion is Z/2Z x Z/2Z", criterion_4, Duration::from_secs(120)),
        ("5 base point has infinite order", criterion_5, Duration::from_secs(120)),
        ("6 rank bounds", criterion_6, Duration::from_secs(600)),
        ("7 sieve scores", criterion_7, Duration::from_secs(30)),
        ("8 right triangles", criterion_8, Duration::from_secs(5)),
        ("9 property suites", criterion_9, Duration::from_secs(600)),
    ];
    panic::set_hook(Box::new(|info| eprintln!("      {info}")));
    let mut failures = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let status = match outcome {
            Ok(()) if elapsed <= budget => "PASS",
            Ok(()) => "FAIL (over time budget)",
            Err(_) => "FAIL",
        };
        if status != "PASS" {
            failures += 1;
        }
        println!("criterion {name}: {status} [{:.2?} of {:?}]", elapsed, budget);
    }
    println!("acceptance: {} of 9 criteria passed", 9 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
