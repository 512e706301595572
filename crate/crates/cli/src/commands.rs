//! One function per subcommand. Results go to `out`; the scan summary goes
//! to `err` unless the format is pretty.

use std::collections::BTreeSet;
use std::fs::{self, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use heron_core::descent::{rank_bounds_with_points, DescentContext, SplitCurve};
use heron_core::heron::{family_discriminant, heron_area};
use heron_core::sieve::{rank_distribution, scan_with, sieve_score, RecordStatus, ScanConfig};
use heron_core::torsion::torsion_subgroup;
use heron_core::{
    Error, FamilyCurve, Rational, RationalPoint, RankBounds, RankStatus, ScanRecord, SquareClassPair,
};

use crate::config::{CliError, CliResult, Command, Format, RunConfig};
use crate::render::{record_line, write_distribution, write_records, Table};

pub fn run(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    if let Some(n) = cfg.threads {
        // Fails only if the pool already exists, which leaves it usable.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cfg.command {
        Command::Construct => construct(cfg, out),
        Command::Torsion => torsion(cfg, out),
        Command::Rank => rank(cfg, out),
        Command::Sieve => sieve(cfg, out),
        Command::Descent => descent(cfg, out),
        Command::Scan => scan(cfg, out, err),
        Command::Report { .. } => report(cfg, out),
    }
}

fn family(cfg: &RunConfig) -> CliResult<FamilyCurve> {
    let k = cfg.k.as_ref().ok_or_else(|| CliError::Usage("missing --k".into()))?;
    Ok(FamilyCurve::new(k)?)
}

fn join<T: ToString>(items: &[T]) -> String {
    items.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

fn construct(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let c = family(cfg)?;
    let t = &c.triple;
    let scaled = c.scaled_model();
    let m = &c.integral;
    let table = Table::record([
        ("k", c.k_string()),
        ("a", t.a.to_string()),
        ("b", t.b.to_string()),
        ("c", t.c.to_string()),
        ("semiperimeter", t.semiperimeter.to_string()),
        ("area", heron_area(&c.k)?.to_string()),
        ("triangle", if t.geometric { "yes" } else { "no" }.to_string()),
        ("product_model", c.product.to_string()),
        ("shifted_model", c.shifted.to_string()),
        ("scaled_a2", scaled.a2().to_string()),
        ("scaled_a4", scaled.a4().to_string()),
        ("scaled_a6", scaled.a6().to_string()),
        ("u", m.scale.to_string()),
        ("a2", m.a2.to_string()),
        ("a4", m.a4.to_string()),
        ("a6", m.a6.to_string()),
        ("integral_model", m.to_string()),
        ("discriminant", family_discriminant(&c.k).to_string()),
        ("integral_discriminant", m.discriminant().to_string()),
        ("base_point", c.integral_base_point().to_string()),
    ]);
    table.write(cfg.format, out)
}

fn torsion(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let c = family(cfg)?;
    let g = torsion_subgroup(&c.integral)?;
    let table = Table::record([
        ("k", c.k_string()),
        ("torsion", g.structure.to_string()),
        ("order", g.order().to_string()),
        ("generators", join(&g.generators)),
        ("points", join(&g.points)),
        ("order_bound", g.order_bound.to_string()),
    ]);
    table.write(cfg.format, out)
}

fn rank_result(cfg: &RunConfig, c: &FamilyCurve) -> CliResult<RankBounds> {
    Ok(rank_bounds_with_points(&c.integral, &[c.integral_base_point()], &cfg.effort)?)
}

fn require_determined(cfg: &RunConfig, rb: &RankBounds) -> CliResult<()> {
    if cfg.require_determined && rb.status != RankStatus::Determined {
        return Err(CliError::Policy(format!(
            "rank not determined: bounds [{}, {}]",
            rb.rank_lower, rb.selmer_upper
        )));
    }
    Ok(())
}

fn rank(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let c = family(cfg)?;
    let rb = rank_result(cfg, &c)?;
    let witnesses: Vec<String> = rb.witnesses.iter().map(|(p, class)| format!("{p} in {class}")).collect();
    let table = Table::record([
        ("k", c.k_string()),
        ("rank_lower", rb.rank_lower.to_string()),
        ("selmer_upper", rb.selmer_upper.to_string()),
        ("status", rb.status.to_string()),
        ("bounds", rb.to_string()),
        ("witnesses", join(&witnesses)),
        ("undecided_classes", join(&rb.undecided_classes)),
        ("height_searched", rb.height_searched.to_string()),
    ]);
    table.write(cfg.format, out)?;
    require_determined(cfg, &rb)
}

fn sieve(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let c = family(cfg)?;
    let s = sieve_score(&c.integral, cfg.limit)?;
    let table = Table::record([
        ("k", c.k_string()),
        ("limit", s.limit.to_string()),
        ("score", s.display_value()),
        ("primes_used", s.primes_used.to_string()),
        ("primes_skipped", join(&s.primes_skipped)),
    ]);
    table.write(cfg.format, out)
}

/// Smallest combination of the labelled generators whose classes multiply
/// to `target`, as a `+`-joined label list.
fn explain(target: &SquareClassPair, gens: &[(String, SquareClassPair)]) -> Option<String> {
    let n = gens.len();
    let mut masks: Vec<u32> = (0..1u32 << n).collect();
    masks.sort_by_key(|m| (m.count_ones(), *m));
    masks.into_iter().find_map(|mask| {
        let class = (0..n)
            .filter(|i| mask & (1 << i) != 0)
            .fold(SquareClassPair::trivial(), |acc, i| acc.multiply(&gens[i].1));
        (class == *target).then(|| {
            let labels: Vec<&str> =
                (0..n).filter(|i| mask & (1 << i) != 0).map(|i| gens[i].0.as_str()).collect();
            if labels.is_empty() { "O".to_string() } else { labels.join(" + ") }
        })
    })
}

fn descent(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let c = family(cfg)?;
    let split = SplitCurve::new(&c.integral, cfg.effort.factor_budget)?;
    let roots = split.roots().clone();
    let selmer = DescentContext::new(split.clone())?.selmer_group()?;
    let rb = rank_result(cfg, &c)?;

    let mut gens: Vec<(String, SquareClassPair)> = Vec::new();
    let mut legend: Vec<String> = Vec::new();
    for (i, e) in roots.iter().take(2).enumerate() {
        let t = RationalPoint::affine(Rational::from_integer(e.clone()), Rational::from_integer(0.into()));
        gens.push((format!("T{}", i + 1), split.descent_image(&t)?));
        legend.push(format!("T{} = {t}", i + 1));
    }
    for (i, (p, class)) in rb.witnesses.iter().enumerate() {
        gens.push((format!("P{}", i + 1), class.clone()));
        legend.push(format!("P{} = {p}", i + 1));
    }

    let mut classes = Table::new(["class", "status", "explained_by"]);
    for class in selmer.elements() {
        let (status, by) = match explain(class, &gens) {
            Some(s) => ("image", s),
            None => ("undecided", String::new()),
        };
        classes.push([class.to_string(), status.to_string(), by]);
    }
    if cfg.format == Format::Pretty {
        Table::record([
            ("k", c.k_string()),
            ("roots", join(&roots)),
            ("selmer_dimension", selmer.dim().to_string()),
            ("bounds", rb.to_string()),
            ("points", join(&legend)),
        ])
        .write(Format::Pretty, out)?;
        if selmer.elements().is_empty() {
            writeln!(out, "\n({} classes, too many to list)", 1u64 << selmer.dim())?;
        } else {
            writeln!(out)?;
        }
    }
    classes.write(cfg.format, out)?;
    require_determined(cfg, &rb)
}

/// Complete records of a results file. A trailing line without a newline is
/// an interrupted write; it is ignored, and truncated when `repair` is set.
fn read_records(path: &Path, repair: bool) -> CliResult<Vec<ScanRecord>> {
    let bytes = fs::read(path)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if repair && complete < bytes.len() {
        OpenOptions::new().write(true).open(path)?.set_len(complete as u64)?;
    }
    let mut records = Vec::new();
    for (n, line) in BufReader::new(&bytes[..complete]).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ScanRecord = serde_json::from_str(&line).map_err(|e| {
            io::Error::new(
                io::ErrorKind::InvalidData,
                format!("{} line {}: {e}", path.display(), n + 1),
            )
        })?;
        records.push(r);
    }
    Ok(records)
}

fn summary(records: &[ScanRecord], format: Format, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let target: &mut dyn Write = if format == Format::Pretty { out } else { err };
    match rank_distribution(records) {
        Ok(d) => {
            writeln!(target)?;
            write_distribution(&d, Format::Pretty, target)
        }
        Err(Error::EmptyInput) => Ok(writeln!(target, "\nno curves with rank bounds")?),
        Err(e) => Err(e.into()),
    }
}

fn scan(cfg: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<()> {
    let range = cfg.range.clone().ok_or_else(|| CliError::Usage("missing range".into()))?;
    let path = &cfg.out;
    let mut skip = BTreeSet::new();
    if path.exists() {
        if !cfg.resume {
            return Err(CliError::Usage(format!(
                "{} exists; pass --resume to continue it",
                path.display()
            )));
        }
        skip = read_records(path, true)?.into_iter().map(|r| r.k).collect();
    } else if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }

    let mut config = ScanConfig::new(range);
    config.limit = cfg.limit;
    config.top_fraction = cfg.top_fraction;
    config.effort = cfg.effort;
    config.pinned = cfg.pinned.clone();
    config.skip = skip;
    config.timings = cfg.timings;

    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut io_error: Option<io::Error> = None;
    let result = scan_with(&config, |r| {
        let line = record_line(&r).map_err(|e| Error::Internal(e.to_string()))?;
        // One write per record keeps lines whole.
        let written = file.write_all(format!("{line}\n").as_bytes()).and_then(|_| file.flush());
        written.map_err(|e| {
            let msg = e.to_string();
            io_error = Some(e);
            Error::Internal(msg)
        })
    });
    if let Some(e) = io_error {
        return Err(e.into());
    }
    result?;
    drop(file);

    let records = read_records(path, false)?;
    write_records(&records, cfg.format, out)?;
    summary(&records, cfg.format, out, err)?;
    if cfg.require_determined {
        let open: Vec<&str> = records
            .iter()
            .filter(|r| r.status == RecordStatus::Interval)
            .map(|r| r.k.as_str())
            .collect();
        if !open.is_empty() {
            return Err(CliError::Policy(format!("rank not determined for k = {}", open.join(", "))));
        }
    }
    Ok(())
}

fn report(cfg: &RunConfig, out: &mut dyn Write) -> CliResult<()> {
    let records = read_records(&cfg.out, false)?;
    let d = rank_distribution(&records)?;
    write_distribution(&d, cfg.format, out)
}
