//! Commands on a risk measure read from a definition file.

use serde::Serialize;

use maxstable::ldp::{
    ldp_check, lp_check, rate_from_balls, varadhan_bryc_equivalence, EquivalenceConfig, EquivalenceReport, LdpVerdict,
    LpVerdict, RateFunction,
};
use maxstable::maxitive::{representation_check, RepresentationReport};
use maxstable::risk::{
    check_convexity, check_max_stability, check_monetary_axioms, random_function, trial_rng, AxiomReport,
    ConvexityReport, MaxStabilityReport,
};
use maxstable::{CheckConfig, ConcentrationTable, Mode, RSchedule, RiskMeasure, Subset};

use crate::artifacts::{ext, num, set};
use crate::{CliError, Context, Criterion};

const DEFAULT_TRIALS: usize = 1000;

fn check_config(ctx: &Context) -> CheckConfig {
    CheckConfig { trials: ctx.trials(DEFAULT_TRIALS), seed: ctx.cfg.seed, tolerance: ctx.cfg.tol, ..Default::default() }
}

#[derive(Serialize)]
struct CheckReport {
    measure: String,
    axioms: AxiomReport,
    max_stability: MaxStabilityReport,
    convexity: ConvexityReport,
    representation: RepresentationReport,
    representation_tolerance: f64,
}

pub fn check(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let phi = ctx.risk()?.measure;
    let cfg = check_config(ctx);
    let tol = cfg.tolerance_for(&phi);
    let axioms = check_monetary_axioms(&phi, &cfg).map_err(CliError::input)?;
    let max_stability = check_max_stability(&phi, &cfg).map_err(CliError::input)?;
    let convexity = check_convexity(&phi, &cfg).map_err(CliError::input)?;
    let representation =
        representation_check(&phi, cfg.trials, cfg.seed, cfg.bound, cfg.mode).map_err(CliError::input)?;

    let rows = [
        ("normalization", axioms.normalization),
        ("translation", axioms.translation.amount),
        ("monotonicity", axioms.monotonicity.amount),
        ("max_stability", max_stability.lattice.amount),
        ("acceptance_closure", max_stability.acceptance_closure.amount),
        ("convexity", convexity.violation.amount),
        ("representation", representation.max_gap),
    ];
    ctx.out.csv(
        "check.csv",
        &["check", "worst", "tolerance", "passed"],
        rows.iter().map(|(n, w)| vec![n.to_string(), num(*w), num(tol), (*w <= tol).to_string()]),
    )?;
    let criteria = vec![
        Criterion::new("monetary axioms", axioms.passed, format!("worst translation gap {:?}", axioms.translation.amount)),
        Criterion::new(
            "max-stability",
            max_stability.passed,
            format!("worst |phi(f v g) - phi(f) v phi(g)| = {:?}", max_stability.lattice.amount),
        ),
        Criterion::new("convexity", convexity.passed, format!("worst violation {:?}", convexity.violation.amount)),
        Criterion::new(
            "maxitive representation",
            representation.max_gap <= tol,
            format!("max gap {:?} over {} functions", representation.max_gap, representation.trials),
        ),
    ];
    ctx.out.json(
        "check.json",
        &CheckReport {
            measure: phi.kind_name().to_string(),
            axioms,
            max_stability,
            convexity,
            representation,
            representation_tolerance: tol,
        },
    )?;
    Ok(criteria)
}

/// The rate from the file when present, otherwise the minimal rate.
fn rate_for(phi: &RiskMeasure, given: Option<RateFunction>) -> Result<(RateFunction, &'static str), CliError> {
    match given {
        Some(r) => Ok((r, "input")),
        None => Ok((rate_from_balls(phi, &RSchedule::default(), Mode::Auto).map_err(CliError::input)?, "minimal")),
    }
}

fn write_rate(ctx: &Context, phi: &RiskMeasure, rate: &RateFunction) -> Result<(), CliError> {
    let space = phi.space();
    ctx.out.csv(
        "rate.csv",
        &["point", "rate"],
        (0..space.len()).map(|x| vec![space.label(x).to_string(), ext(rate.get(x))]),
    )
}

#[derive(Serialize)]
struct LdpReport<'a> {
    rate_source: &'a str,
    rate: &'a RateFunction,
    verdict: &'a LdpVerdict,
}

pub fn ldp(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let loaded = ctx.risk()?;
    let phi = loaded.measure;
    let (rate, source) = rate_for(&phi, loaded.rate)?;
    let tol = ctx.tol(phi.tolerance());
    let table = ConcentrationTable::build(&phi, &RSchedule::default(), Mode::Auto).map_err(CliError::input)?;
    let verdict = ldp_check(&table, &rate, &loaded.space, tol, Mode::Auto).map_err(CliError::input)?;
    let k = loaded.space.len();
    ctx.out.csv(
        "ldp.csv",
        &["subset", "lower", "J", "upper"],
        verdict.rows.iter().map(|r| {
            let labels = loaded.space.subset_labels(&Subset::from_mask(k, r.mask));
            vec![set(&labels), ext(r.lower), ext(r.j), ext(r.upper)]
        }),
    )?;
    write_rate(ctx, &phi, &rate)?;
    ctx.out.json("ldp.json", &LdpReport { rate_source: source, rate: &rate, verdict: &verdict })?;
    Ok(vec![Criterion::new(
        "ldp bounds",
        verdict.holds,
        format!(
            "{} subsets, {source} rate, worst lower gap {}, worst upper gap {}",
            verdict.rows.len(),
            ext(verdict.worst_lower_gap),
            ext(verdict.worst_upper_gap)
        ),
    )])
}

#[derive(Serialize)]
struct LpReport<'a> {
    rate_source: &'a str,
    verdict: &'a LpVerdict,
    equivalence: Option<EquivalenceReport>,
}

pub fn lp(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let loaded = ctx.risk()?;
    let phi = loaded.measure;
    let cfg = check_config(ctx);
    let (rate, source) = rate_for(&phi, loaded.rate)?;
    let verdict = lp_check(&phi, &rate, &cfg).map_err(CliError::input)?;
    let k = phi.space().len();
    let mut rows = Vec::with_capacity(cfg.trials);
    for t in 0..cfg.trials {
        // same draws as the checker
        let f = random_function(&mut trial_rng(cfg.seed, t as u64), k, cfg.bound);
        let value = phi.evaluate(&f).map_err(CliError::input)?;
        let dual = rate.dual_value(&f);
        rows.push(vec![t.to_string(), num(value), num(dual), num((value - dual).abs())]);
    }
    ctx.out.csv("lp.csv", &["trial", "phi", "dual", "gap"], rows)?;
    write_rate(ctx, &phi, &rate)?;

    let mut criteria = vec![Criterion::new(
        "laplace principle",
        verdict.holds,
        format!("{source} rate, worst gap {:?} over {} functions", verdict.worst_gap, verdict.trials),
    )];
    let stable = check_max_stability(&phi, &cfg).map_err(CliError::input)?.passed;
    let equivalence = if stable {
        let eq = varadhan_bryc_equivalence(&phi, &EquivalenceConfig { check: cfg, ..Default::default() })
            .map_err(CliError::input)?;
        ctx.out.csv(
            "perturbations.csv",
            &["point", "delta", "rejected", "worst_lower_gap", "worst_upper_gap"],
            eq.perturbations.iter().map(|p| {
                vec![p.point.clone(), num(p.delta), p.rejected.to_string(), ext(p.worst_lower_gap), ext(p.worst_upper_gap)]
            }),
        )?;
        criteria.push(Criterion::new(
            "ldp-lp equivalence",
            eq.equivalence_holds,
            format!("ldp {} and lp {} for the minimal rate", eq.ldp.holds, eq.lp.holds),
        ));
        criteria.push(Criterion::new(
            "uniqueness",
            eq.uniqueness_holds,
            format!("{} perturbed rates, all rejected: {}", eq.perturbations.len(), eq.uniqueness_holds),
        ));
        Some(eq)
    } else {
        None
    };
    ctx.out.json("lp.json", &LpReport { rate_source: source, verdict: &verdict, equivalence })?;
    Ok(criteria)
}
