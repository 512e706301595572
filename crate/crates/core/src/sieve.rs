//! Prime-sieve scores, batch scans over the family and rank statistics.
//!
//! The score of a curve up to `N` is the sum over good primes `p <= N` of
//! `(2 - a_p) / (p + 1 - a_p) * ln p`. Each ratio is formed exactly and
//! rounded once; terms are added in increasing `p`, so a score is a pure
//! function of `(curve, N)` and partial sums are prefixes of longer ones.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use num_integer::Integer as _;
use num_traits::One;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curve::IntegralModel;
use crate::descent::{rank_bounds_with_points, Effort, RankStatus};
use crate::error::{Error, Result};
use crate::heron::{is_singular_parameter, FamilyCurve};
use crate::numtheory::{factorize, primes_up_to, Factorization, FactorBudget, Integer, Rational};
use crate::torsion::{torsion_subgroup_with_budget, DEFAULT_PRIME_BUDGET};

/// Limits recorded for every scanned curve.
pub const CHECKPOINTS: [u64; 3] = [100, 1000, 10_000];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveScore {
    pub limit: u64,
    pub value: f64,
    pub primes_used: usize,
    /// Primes up to `limit` dividing the discriminant.
    pub primes_skipped: Vec<u64>,
}

impl SieveScore {
    /// The value to 15 significant digits.
    pub fn display_value(&self) -> String {
        format_significant(self.value)
    }
}

impl fmt::Display for SieveScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "S({}) = {}", self.limit, self.display_value())
    }
}

/// `x` rounded to 15 significant digits, without exponent notation for
/// ordinary magnitudes.
pub fn format_significant(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (14 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Numerator and denominator of `(2 - a_p) / (p + 1 - a_p)`.
pub fn sieve_ratio(p: u64, trace: i64) -> (i64, i64) {
    let num = 2 - trace;
    let den = p as i64 + 1 - trace;
    let g = num.gcd(&den);
    if g == 0 {
        return (0, 1);
    }
    (num / g, den / g)
}

/// The term for one good prime.
pub fn sieve_term(p: u64, trace: i64) -> f64 {
    let (num, den) = sieve_ratio(p, trace);
    (num as f64 / den as f64) * (p as f64).ln()
}

pub fn sieve_score(model: &IntegralModel, limit: u64) -> Result<SieveScore> {
    Ok(sieve_checkpoints(model, &[limit])?.remove(0))
}

/// Scores at several limits from one pass over the primes.
pub fn sieve_checkpoints(model: &IntegralModel, limits: &[u64]) -> Result<Vec<SieveScore>> {
    if let Some(&bad) = limits.iter().find(|&&n| n < 2) {
        return Err(Error::InvalidInput(format!("sieve limit {bad} is below 2")));
    }
    let top = limits.iter().copied().max().unwrap_or(2);
    let primes = primes_up_to(top);
    let terms = primes
        .par_iter()
        .map(|&p| {
            if model.is_good_prime(p) {
                Ok(Some(sieve_term(p, model.trace_ap(p)?)))
            } else {
                Ok(None)
            }
        })
        .collect::<Result<Vec<Option<f64>>>>()?;

    let mut order: Vec<usize> = (0..limits.len()).collect();
    order.sort_by_key(|&i| limits[i]);
    let mut out: Vec<Option<SieveScore>> = vec![None; limits.len()];
    let (mut value, mut used, mut skipped) = (0.0f64, 0usize, Vec::new());
    let mut next = 0;
    for (idx, &p) in primes.iter().enumerate() {
        while next < order.len() && limits[order[next]] < p {
            out[order[next]] = Some(SieveScore {
                limit: limits[order[next]],
                value,
                primes_used: used,
                primes_skipped: skipped.clone(),
            });
            next += 1;
        }
        match terms[idx] {
            Some(t) => {
                value += t;
                used += 1;
            }
            None => skipped.push(p),
        }
    }
    for &i in &order[next..] {
        out[i] = Some(SieveScore {
            limit: limits[i],
            value,
            primes_used: used,
            primes_skipped: skipped.clone(),
        });
    }
    Ok(out.into_iter().map(|s| s.expect("every limit filled")).collect())
}

// ---------------------------------------------------------------------------
// scan records

mod decimal {
    use std::fmt::Display;
    use std::str::FromStr;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &Option<T>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => s.serialize_str(&v.to_string()),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, T, D>(d: D) -> Result<Option<T>, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        Option::<String>::deserialize(d)?
            .map(|s| s.parse().map_err(serde::de::Error::custom))
            .transpose()
    }
}

mod decimal_map {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<BTreeMap<String, u64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(m) => s.collect_map(m.iter().map(|(k, v)| (k, v.to_string()))),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<BTreeMap<String, u64>>, D::Error> {
        Option::<BTreeMap<String, String>>::deserialize(d)?
            .map(|m| {
                m.into_iter()
                    .map(|(k, v)| v.parse().map(|v| (k, v)).map_err(serde::de::Error::custom))
                    .collect()
            })
            .transpose()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordStatus {
    Determined,
    Interval,
    /// Scored but not selected for torsion and descent.
    SieveOnly,
    Error,
}

impl From<RankStatus> for RecordStatus {
    fn from(s: RankStatus) -> Self {
        match s {
            RankStatus::Determined => RecordStatus::Determined,
            RankStatus::Interval => RecordStatus::Interval,
        }
    }
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordStatus::Determined => "determined",
            RecordStatus::Interval => "interval",
            RecordStatus::SieveOnly => "sieve-only",
            RecordStatus::Error => "error",
        })
    }
}

/// One scanned curve. Integers are decimal strings; field order is the
/// serialization order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub k: String,
    pub u: String,
    pub a2: String,
    pub a4: String,
    pub a6: String,
    /// Factorization of the discriminant with the power of 2 removed.
    pub discriminant_odd: Option<String>,
    pub torsion: Option<String>,
    pub s100: Option<f64>,
    pub s1000: Option<f64>,
    pub s10000: Option<f64>,
    #[serde(with = "decimal")]
    pub rank_lower: Option<u32>,
    #[serde(with = "decimal")]
    pub selmer_upper: Option<u32>,
    pub status: RecordStatus,
    pub error: Option<String>,
    #[serde(with = "decimal_map")]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

impl ScanRecord {
    fn failed(k: &Rational, err: &Error) -> Self {
        ScanRecord {
            k: k.to_string(),
            u: String::new(),
            a2: String::new(),
            a4: String::new(),
            a6: String::new(),
            discriminant_odd: None,
            torsion: None,
            s100: None,
            s1000: None,
            s10000: None,
            rank_lower: None,
            selmer_upper: None,
            status: RecordStatus::Error,
            error: Some(err.to_string()),
            timings_ms: None,
        }
    }

    pub fn has_rank(&self) -> bool {
        matches!(self.status, RecordStatus::Determined | RecordStatus::Interval)
    }
}

/// Parameters `p/q` in lowest terms with `lo <= p/q <= hi` and `q <= q_max`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KRange {
    pub lo: Rational,
    pub hi: Rational,
    pub q_max: u64,
}

impl KRange {
    pub fn integers(lo: i64, hi: i64) -> Self {
        KRange {
            lo: Rational::from_integer(lo.into()),
            hi: Rational::from_integer(hi.into()),
            q_max: 1,
        }
    }

    /// Nonsingular parameters in increasing order.
    pub fn parameters(&self) -> Result<Vec<Rational>> {
        if self.q_max == 0 || self.lo > self.hi {
            return Err(Error::InvalidInput(format!(
                "empty range [{}, {}] with q <= {}",
                self.lo, self.hi, self.q_max
            )));
        }
        let mut out = BTreeSet::new();
        for q in 1..=self.q_max {
            let qi = Integer::from(q);
            let first = (&self.lo * &qi).ceil().to_integer();
            let last = (&self.hi * &qi).floor().to_integer();
            let mut p = first;
            while p <= last {
                if p.gcd(&qi).is_one() {
                    let k = Rational::new(p.clone(), qi.clone());
                    if !is_singular_parameter(&k) {
                        out.insert(k);
                    }
                }
                p += 1;
            }
        }
        Ok(out.into_iter().collect())
    }
}

#[derive(Debug, Clone)]
pub struct ScanConfig {
    pub range: KRange,
    /// Sieve limit used to rank curves for phase 2.
    pub limit: u64,
    /// Percent of curves, by score, that get torsion and descent.
    pub top_fraction: f64,
    pub effort: Effort,
    /// Always get torsion and descent.
    pub pinned: Vec<Rational>,
    /// Parameters already recorded; they are scored but not emitted.
    pub skip: BTreeSet<String>,
    pub timings: bool,
}

impl ScanConfig {
    pub fn new(range: KRange) -> Self {
        ScanConfig {
            range,
            limit: 10_000,
            top_fraction: 1.0,
            effort: Effort::default(),
            pinned: Vec::new(),
            skip: BTreeSet::new(),
            timings: false,
        }
    }
}

struct Scored {
    curve: FamilyCurve,
    scores: Vec<SieveScore>,
    selection: f64,
    millis: u64,
}

fn odd_discriminant(curve: &FamilyCurve) -> Option<String> {
    let [r1, r2, r3] = curve.integral_roots();
    let mut merged: BTreeMap<Integer, u32> = BTreeMap::new();
    for d in [&r1 - &r2, &r1 - &r3, &r2 - &r3] {
        let f = factorize(&d, FactorBudget::default()).ok()?;
        for (p, e) in f.factors {
            if p != Integer::from(2) {
                *merged.entry(p).or_default() += 2 * e;
            }
        }
    }
    let f = Factorization {
        sign: 1,
        factors: merged.into_iter().collect(),
    };
    Some(f.to_string())
}

fn phase_one(k: &Rational, limit: u64) -> Result<Scored> {
    let start = Instant::now();
    let curve = FamilyCurve::new(k)?;
    let mut limits = CHECKPOINTS.to_vec();
    limits.push(limit);
    let mut scores = sieve_checkpoints(&curve.integral, &limits)?;
    let selection = scores.pop().expect("limit score").value;
    Ok(Scored {
        curve,
        scores,
        selection,
        millis: start.elapsed().as_millis() as u64,
    })
}

fn build_record(scored: &Scored, deep: bool, config: &ScanConfig) -> ScanRecord {
    let c = &scored.curve;
    let mut timings = BTreeMap::from([("sieve".to_string(), scored.millis)]);
    let mut rec = ScanRecord {
        k: c.k_string(),
        u: c.integral.scale.to_string(),
        a2: c.integral.a2.to_string(),
        a4: c.integral.a4.to_string(),
        a6: c.integral.a6.to_string(),
        discriminant_odd: odd_discriminant(c),
        torsion: None,
        s100: Some(scored.scores[0].value),
        s1000: Some(scored.scores[1].value),
        s10000: Some(scored.scores[2].value),
        rank_lower: None,
        selmer_upper: None,
        status: RecordStatus::SieveOnly,
        error: None,
        timings_ms: None,
    };
    if deep {
        let start = Instant::now();
        match torsion_subgroup_with_budget(&c.integral, DEFAULT_PRIME_BUDGET) {
            Ok(t) => rec.torsion = Some(t.structure.to_string()),
            Err(e) => {
                rec.status = RecordStatus::Error;
                rec.error = Some(e.to_string());
            }
        }
        timings.insert("torsion".into(), start.elapsed().as_millis() as u64);
        if rec.error.is_none() {
            let start = Instant::now();
            match rank_bounds_with_points(&c.integral, &[c.integral_base_point()], &config.effort) {
                Ok(rb) => {
                    rec.rank_lower = Some(rb.rank_lower);
                    rec.selmer_upper = Some(rb.selmer_upper);
                    rec.status = rb.status.into();
                }
                Err(e) => {
                    rec.status = RecordStatus::Error;
                    rec.error = Some(e.to_string());
                }
            }
            timings.insert("descent".into(), start.elapsed().as_millis() as u64);
        }
    }
    if config.timings {
        rec.timings_ms = Some(timings);
    }
    rec
}

/// Number of curves phase 2 selects out of `n` at `percent`.
pub fn selection_count(n: usize, percent: f64) -> usize {
    if percent <= 0.0 || n == 0 {
        return 0;
    }
    ((n as f64 * percent / 100.0).ceil() as usize).clamp(1, n)
}

/// Scans the range, passing records to `emit` in increasing `k`.
pub fn scan_with<F>(config: &ScanConfig, mut emit: F) -> Result<()>
where
    F: FnMut(ScanRecord) -> Result<()>,
{
    if !(0.0..=100.0).contains(&config.top_fraction) {
        return Err(Error::InvalidInput(format!(
            "top fraction {} is not a percentage",
            config.top_fraction
        )));
    }
    if config.limit < 2 {
        return Err(Error::InvalidInput(format!("sieve limit {} is below 2", config.limit)));
    }
    let mut params = config.range.parameters()?;
    for k in &config.pinned {
        if !is_singular_parameter(k) && !params.contains(k) {
            params.push(k.clone());
        }
    }
    params.sort();

    let phase1: Vec<Result<Scored>> = params.par_iter().map(|k| phase_one(k, config.limit)).collect();

    let mut ranked: Vec<(usize, f64)> = phase1
        .iter()
        .enumerate()
        .filter_map(|(i, s)| s.as_ref().ok().map(|s| (i, s.selection)))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut deep = vec![false; params.len()];
    for &(i, _) in ranked.iter().take(selection_count(ranked.len(), config.top_fraction)) {
        deep[i] = true;
    }
    for (i, k) in params.iter().enumerate() {
        if config.pinned.contains(k) {
            deep[i] = true;
        }
    }

    let pending: Vec<usize> = (0..params.len())
        .filter(|&i| !config.skip.contains(&params[i].to_string()))
        .collect();
    let chunk = rayon::current_num_threads().max(1) * 2;
    for block in pending.chunks(chunk) {
        let records: Vec<ScanRecord> = block
            .par_iter()
            .map(|&i| match &phase1[i] {
                Ok(s) => build_record(s, deep[i], config),
                Err(e) => ScanRecord::failed(&params[i], e),
            })
            .collect();
        for r in records {
            emit(r)?;
        }
    }
    Ok(())
}

pub fn scan(config: &ScanConfig) -> Result<Vec<ScanRecord>> {
    let mut out = Vec::new();
    scan_with(config, |r| {
        out.push(r);
        Ok(())
    })?;
    Ok(out)
}

// ---------------------------------------------------------------------------
// rank statistics

#[derive(Debug, Clone, PartialEq)]
pub struct RankDistribution {
    /// `(rank, percent)` for determined records, ascending rank.
    pub ranks: Vec<(u32, f64)>,
    pub undetermined: f64,
    pub total: usize,
    pub undetermined_count: usize,
}

impl RankDistribution {
    pub fn percent_sum(&self) -> f64 {
        self.ranks.iter().map(|(_, p)| p).sum::<f64>() + self.undetermined
    }
}

impl fmt::Display for RankDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<14}{:>8}", "Rank", "Percent")?;
        for (rank, pct) in &self.ranks {
            writeln!(f, "{rank:<14}{pct:>8.1}")?;
        }
        writeln!(f, "{:<14}{:>8.1}", "undetermined", self.undetermined)?;
        write!(f, "{:<14}{:>8}", "curves", self.total)
    }
}

/// Percent of ranked records per determined rank, and undetermined.
/// Records without rank data are ignored.
pub fn rank_distribution(records: &[ScanRecord]) -> Result<RankDistribution> {
    let ranked: Vec<&ScanRecord> = records.iter().filter(|r| r.has_rank()).collect();
    if ranked.is_empty() {
        return Err(Error::EmptyInput);
    }
    let total = ranked.len();
    let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
    let mut undetermined_count = 0;
    for r in &ranked {
        match (r.status, r.rank_lower) {
            (RecordStatus::Determined, Some(rank)) => *counts.entry(rank).or_default() += 1,
            _ => undetermined_count += 1,
        }
    }
    let pct = |n: usize| 100.0 * n as f64 / total as f64;
    Ok(RankDistribution {
        ranks: counts.into_iter().map(|(r, n)| (r, pct(n))).collect(),
        undetermined: pct(undetermined_count),
        total,
        undetermined_count,
    })
}

impl FromStr for RecordStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "determined" => Ok(RecordStatus::Determined),
            "interval" => Ok(RecordStatus::Interval),
            "sieve-only" => Ok(RecordStatus::SieveOnly),
            "error" => Ok(RecordStatus::Error),
            _ => Err(Error::InvalidInput(format!("unknown status {s:?}"))),
        }
    }
}
