use heron_core::descent::{rank_bounds_with_points, SplitCurve};
use heron_core::heron::{coincidence_polynomials, side_coincidence};
use heron_core::numtheory::is_rational_square;
use heron_core::sieve::{rank_distribution, sieve_checkpoints, sieve_score, RecordStatus, ScanRecord};
use heron_core::torsion::{point_order, stable_order_bound, torsion_subgroup, PointOrder};
use heron_core::{Effort, FactorBudget, FamilyCurve, Integer, Rational, RationalPoint};
use num_traits::Zero;
use proptest::prelude::*;

fn parameter(num: i64, den: i64) -> Option<Rational> {
    let k = Rational::new(num.into(), den.into());
    let two = Rational::from_integer(2.into());
    (!k.is_zero() && k != two && k != -two).then_some(k)
}

fn eval(poly: &[Rational], k: &Rational) -> Rational {
    poly.iter().rev().fold(Rational::zero(), |acc, c| acc * k + c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn family_models_are_coherent(num in -60i64..=60, den in 1i64..=40) {
        let Some(k) = parameter(num, den) else { return Ok(()) };
        let c = FamilyCurve::new(&k).unwrap();
        prop_assert!(is_rational_square(&c.triple.squared_area).is_some());
        prop_assert!(c.product.contains(&c.base_point));
        prop_assert!(c.integral.as_cubic().contains(&c.integral_base_point()));
        prop_assert_eq!(c.integral.point_to_source(&c.integral_base_point()), c.base_point.clone());
        prop_assert_eq!(&c.integral.scale % Integer::from(2), Integer::zero());
        let roots = c.integral_roots();
        for r in &roots {
            let p = RationalPoint::affine(Rational::from_integer(r.clone()), Rational::zero());
            prop_assert!(c.integral.as_cubic().contains(&p));
        }
    }

    #[test]
    fn coincidences_follow_their_polynomials(num in -60i64..=60, den in 1i64..=40) {
        let Some(k) = parameter(num, den) else { return Ok(()) };
        let flags = side_coincidence(&k);
        let [ab, ac, bc] = coincidence_polynomials();
        prop_assert_eq!(flags.a_eq_b, eval(&ab.1, &k).is_zero());
        prop_assert_eq!(flags.a_eq_c, eval(&ac.1, &k).is_zero());
        prop_assert_eq!(flags.b_eq_c, eval(&bc.1, &k).is_zero());
    }

    #[test]
    fn sieve_prefixes_and_determinism(k in 3i64..=40, a in 2u64..=400, b in 2u64..=400) {
        let model = FamilyCurve::new(&Rational::from_integer(k.into())).unwrap().integral;
        let (lo, hi) = (a.min(b), a.max(b));
        let both = sieve_checkpoints(&model, &[hi, lo]).unwrap();
        prop_assert_eq!(both[0].value.to_bits(), sieve_score(&model, hi).unwrap().value.to_bits());
        prop_assert_eq!(both[1].value.to_bits(), sieve_score(&model, lo).unwrap().value.to_bits());
        prop_assert!(both[1].primes_used <= both[0].primes_used);
        prop_assert!(both[0].primes_skipped.iter().all(|&p| !model.is_good_prime(p)));
    }

    #[test]
    fn distribution_percentages_add_up(statuses in proptest::collection::vec((0u8..4, 0u32..6), 1..60)) {
        let records: Vec<ScanRecord> = statuses
            .iter()
            .map(|&(s, rank)| record(s, rank))
            .collect();
        match rank_distribution(&records) {
            Ok(d) => {
                prop_assert!((d.percent_sum() - 100.0).abs() < 1e-9);
                let intervals = records.iter().filter(|r| r.status == RecordStatus::Interval).count();
                prop_assert_eq!(d.undetermined_count, intervals);
            }
            Err(_) => prop_assert!(records.iter().all(|r| !r.has_rank())),
        }
    }

    #[test]
    fn records_round_trip(k in 1i64..1000, lower in 0u32..8, extra in 0u32..4, s in any::<f64>().prop_filter("finite", |v| v.is_finite())) {
        let mut r = record(0, lower);
        r.k = k.to_string();
        r.selmer_upper = Some(lower + extra);
        r.s1000 = Some(s);
        r.timings_ms = Some([("sieve".to_string(), k as u64)].into());
        let line = serde_json::to_string(&r).unwrap();
        prop_assert_eq!(serde_json::from_str::<ScanRecord>(&line).unwrap(), r);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn torsion_is_klein_and_injects(num in -50i64..=50, den in 1i64..=50) {
        let Some(k) = parameter(num, den) else { return Ok(()) };
        let c = FamilyCurve::new(&k).unwrap();
        let g = torsion_subgroup(&c.integral).unwrap();
        prop_assert_eq!(g.order(), 4);
        prop_assert_eq!(stable_order_bound(&c.integral, 10).unwrap() % 4, 0);
        for gen in &g.generators {
            prop_assert_eq!(point_order(&c.integral.as_cubic(), gen).unwrap(), PointOrder::Finite(2));
        }
        prop_assert_eq!(point_order(&c.integral.as_cubic(), &c.integral_base_point()).unwrap(), PointOrder::Infinite);
    }

    #[test]
    fn descent_sandwich_and_homomorphism(k in 3i64..=30) {
        let c = FamilyCurve::new(&Rational::from_integer(k.into())).unwrap();
        let base = c.integral_base_point();
        let effort = Effort::with_height(256);
        let rb = rank_bounds_with_points(&c.integral, std::slice::from_ref(&base), &effort).unwrap();
        prop_assert!(rb.rank_lower >= 1);
        prop_assert!(rb.rank_lower <= rb.selmer_upper);
        let split = SplitCurve::new(&c.integral, FactorBudget::default()).unwrap();
        let cubic = c.integral.as_cubic();
        for (p, class) in &rb.witnesses {
            prop_assert!(cubic.contains(p));
            prop_assert_eq!(&split.descent_image(p).unwrap(), class);
        }
        let mut pts: Vec<RationalPoint> = split.torsion_points().to_vec();
        pts.push(base);
        pts.extend(rb.witnesses.iter().map(|(p, _)| p.clone()));
        for a in &pts {
            for b in &pts {
                let sum = cubic.add_points(a, b).unwrap();
                prop_assert_eq!(
                    split.descent_image(&sum).unwrap(),
                    split.descent_image(a).unwrap().multiply(&split.descent_image(b).unwrap())
                );
            }
            prop_assert!(split.descent_image(&cubic.add_points(a, a).unwrap()).unwrap().is_trivial());
        }
    }
}

fn record(status: u8, rank: u32) -> ScanRecord {
    let status = match status {
        0 => RecordStatus::Determined,
        1 => RecordStatus::Interval,
        2 => RecordStatus::SieveOnly,
        _ => RecordStatus::Error,
    };
    let ranked = matches!(status, RecordStatus::Determined | RecordStatus::Interval);
    ScanRecord {
        k: "1".into(),
        u: "2".into(),
        a2: "-73".into(),
        a4: "-27540".into(),
        a6: "2340900".into(),
        discriminant_odd: None,
        torsion: None,
        s100: None,
        s1000: None,
        s10000: None,
        rank_lower: ranked.then_some(rank),
        selmer_upper: ranked.then_some(rank + u32::from(status == RecordStatus::Interval)),
        status,
        error: None,
        timings_ms: None,
    }
}
