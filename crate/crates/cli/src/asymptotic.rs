//! Commands on the built-in asymptotic families.

use rand::Rng;
use serde::Serialize;

use maxstable::families::cramer::{bernoulli_rate, cramer_demo, CramerConfig, LatticeLaw};
use maxstable::families::{
    counterexample_naturals, counterexample_rationals, envelope_measure, finite_horizon_lp_gaps,
    outside_concentration_estimate, rate_estimate, ClosedFormFamily, DistributionSequence, Extension, HorizonGrid,
    LpGapRow, Side,
};
use maxstable::ldp::{
    family_tightness_candidates, pair_sandwich_check, tightness_check, two_level_corpus, PairReport, RateFunction,
    TightnessConfig, TightnessReport,
};
use maxstable::numeric::log_sum_exp;
use maxstable::risk::trial_rng;
use maxstable::shortfall::{
    check_shift_condition, default_shift_grid, shortfall_concentration, shortfall_risk, transformed_ldp_demo,
    wrate_formulas, Bijection, LossExponent, ShiftReport, TransformedConfig,
};
use maxstable::{BoundedFunction, ExtReal, Mode, ProbabilityVector, RSchedule, Subset};

use crate::artifacts::{ext, num};
use crate::{CliError, Context, Criterion};

const NATURALS_M_MAX: usize = 64;
const NATURALS_CHECKED: usize = 8;
const NATURALS_CHAIN: usize = 32;
const OUTER_TOL: f64 = 1e-2;
const LP_GAP_MIN: f64 = 0.9;
const RATIONALS_COUNT: usize = 256;
const PAIR_M_MAX: usize = 10;

#[derive(Serialize)]
struct CounterexampleReport {
    naturals_lp_gaps: Vec<LpGapRow>,
    naturals_tightness: TightnessReport,
    naturals_envelope_pair: PairReport,
    rationals_delta: f64,
    rationals_tightness: TightnessReport,
}

fn max_gap(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

pub fn counterexample(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let mode = Mode::Auto;
    let fam = counterexample_naturals(NATURALS_M_MAX);
    let grid = ctx.grid(HorizonGrid::powers(3, 8))?;
    let space = fam.space().clone();
    let rates = rate_estimate(&fam, None, &grid, mode).map_err(CliError::input)?;
    ctx.out.csv(
        "naturals_rates.csv",
        &["point", "rate", "closed_form", "abs_diff"],
        rates.iter().enumerate().map(|(i, r)| {
            let m = (i + 1) as f64;
            vec![space.label(i).to_string(), ext(*r), num(m), num((r.to_f64() - m).abs())]
        }),
    )?;
    let rate_gap = max_gap(rates.iter().take(NATURALS_CHECKED).enumerate().map(|(i, r)| (r.to_f64() - (i + 1) as f64).abs()));

    let chain: Vec<Subset> = (1..=NATURALS_CHAIN).map(|m| Subset::from_fn(NATURALS_M_MAX, |i| i < m)).collect();
    let names: Vec<String> = (1..=NATURALS_CHAIN).map(|m| format!("{{1..{m}}}")).collect();
    let outer: Vec<ExtReal> =
        chain.iter().map(|k| -outside_concentration_estimate(&fam, k, &grid, mode).upper()).collect();
    ctx.out.csv(
        "naturals_outer.csv",
        &["compact", "neg_outer_j"],
        names.iter().zip(&outer).map(|(n, v)| vec![n.clone(), ext(*v)]),
    )?;
    let outer_worst = outer.iter().copied().max().unwrap_or(ExtReal::NegInf);

    let one = BoundedFunction::constant(NATURALS_M_MAX, 1.0);
    let lp_rows = finite_horizon_lp_gaps(&fam, &one, Extension::LastPoint, &grid, mode).map_err(CliError::input)?;
    ctx.out.csv(
        "naturals_lp.csv",
        &["horizon", "value", "dual", "gap"],
        lp_rows.iter().map(|r| vec![r.horizon.to_string(), num(r.value), num(r.dual), num(r.gap)]),
    )?;
    let lp_best = lp_rows.iter().map(|r| r.gap).fold(f64::NEG_INFINITY, f64::max);

    let cands = family_tightness_candidates(&fam, &chain, &names, &grid, None, mode).map_err(CliError::input)?;
    let naturals_tightness = tightness_check(&cands, &TightnessConfig::default());

    let pair_grid = HorizonGrid::default();
    let small = counterexample_naturals(PAIR_M_MAX);
    let pair_rate = RateFunction::new(rate_estimate(&small, None, &pair_grid, mode).map_err(CliError::input)?)
        .map_err(CliError::input)?;
    let upper = envelope_measure(small.clone(), Extension::LastPoint, pair_grid.clone(), Side::Upper);
    let lower = envelope_measure(small, Extension::LastPoint, pair_grid, Side::Lower);
    let pair = pair_sandwich_check(&upper, &lower, &pair_rate, &two_level_corpus(PAIR_M_MAX), &RSchedule::default(), 1e-6, mode)
        .map_err(CliError::input)?;

    let fx = counterexample_rationals(RATIONALS_COUNT);
    let q_rates = rate_estimate(&fx.family, Some(fx.delta), &fx.grid, mode).map_err(CliError::input)?;
    let q_space = fx.family.space().clone();
    ctx.out.csv(
        "rationals_rates.csv",
        &["point", "rate"],
        q_rates.iter().enumerate().map(|(i, r)| vec![q_space.label(i).to_string(), ext(*r)]),
    )?;
    let q_rate_gap = max_gap(q_rates.iter().map(|r| r.to_f64().abs()));
    let q_outer: Vec<ExtReal> =
        fx.prefixes.iter().map(|k| outside_concentration_estimate(&fx.family, k, &fx.grid, mode).upper()).collect();
    ctx.out.csv(
        "rationals_outer.csv",
        &["prefix", "outer_j"],
        q_outer.iter().enumerate().map(|(j, v)| vec![(j + 1).to_string(), ext(*v)]),
    )?;
    let q_names: Vec<String> = (1..=fx.prefixes.len()).map(|j| format!("prefix {j}")).collect();
    let q_cands = family_tightness_candidates(&fx.family, &fx.prefixes, &q_names, &fx.grid, Some(fx.delta), mode)
        .map_err(CliError::input)?;
    let rationals_tightness = tightness_check(&q_cands, &TightnessConfig::default());

    let tightness_rows = naturals_tightness
        .rows
        .iter()
        .map(|r| ("naturals", r))
        .chain(rationals_tightness.rows.iter().map(|r| ("rationals", r)))
        .map(|(fam, r)| {
            let outside = r.rate_outside.map(ext).unwrap_or_default();
            vec![fam.to_string(), r.name.clone(), ext(r.neg_outer_j), outside]
        });
    ctx.out.csv("tightness.csv", &["family", "compact", "neg_outer_j", "rate_outside"], tightness_rows)?;

    let rate_tol = ctx.tol(1e-6);
    let criteria = vec![
        Criterion::new(
            "naturals rates",
            rate_gap <= rate_tol,
            format!("max |I(m) - m| over m <= {NATURALS_CHECKED} is {rate_gap:?}"),
        ),
        Criterion::new(
            "naturals outer concentration",
            outer_worst <= ExtReal::Finite(OUTER_TOL),
            format!("max -J outside {{1..m}} is {}", ext(outer_worst)),
        ),
        Criterion::new("naturals lp gap", lp_best >= LP_GAP_MIN, format!("largest gap for f = 1 is {lp_best:?}")),
        Criterion::new(
            "naturals not tight",
            !naturals_tightness.condition_a && !naturals_tightness.condition_b,
            format!("({}) neither (A) nor (B)", naturals_tightness.evidence),
        ),
        Criterion::new(
            "naturals envelope pair",
            pair.consistent && pair.lower_bound_holds && !pair.agreement_holds,
            format!("lower bound holds, lp gap {:?} at m_max = {PAIR_M_MAX}", pair.upper_lp_gap),
        ),
        Criterion::new(
            "rationals rates",
            q_rate_gap <= 1e-9,
            format!("max |I| over {} points is {q_rate_gap:?}", q_rates.len()),
        ),
        Criterion::new(
            "rationals outer concentration",
            q_outer.iter().all(|v| *v == ExtReal::ZERO),
            format!("J outside each of {} prefixes is exactly 0", q_outer.len()),
        ),
        Criterion::new(
            "rationals condition (B)",
            rationals_tightness.condition_b,
            format!("({}) level {}", rationals_tightness.evidence, ext(rationals_tightness.i_infinity)),
        ),
    ];
    ctx.out.json(
        "counterexample.json",
        &CounterexampleReport {
            naturals_lp_gaps: lp_rows,
            naturals_tightness,
            naturals_envelope_pair: pair,
            rationals_delta: fx.delta,
            rationals_tightness,
        },
    )?;
    Ok(criteria)
}

const BALL_POINTS: [f64; 2] = [0.25, 0.75];
const BALL_TOL: f64 = 5e-2;

pub fn cramer(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let law = LatticeLaw::bernoulli(0.5).map_err(CliError::input)?;
    let grid = ctx.grid(HorizonGrid::default())?;
    let cfg = CramerConfig { horizons: grid.horizons().to_vec(), ..Default::default() };
    let rep = cramer_demo(&law, &cfg).map_err(CliError::input)?;
    let analytic: Vec<ExtReal> = rep.grid.iter().map(|&x| bernoulli_rate(0.5, x)).collect();
    let legendre_gap = max_gap(rep.legendre.iter().zip(&analytic).map(|(a, b)| (a.to_f64() - b.to_f64()).abs()));
    ctx.out.csv(
        "legendre.csv",
        &["x", "numeric", "analytic", "abs_diff"],
        rep.grid.iter().zip(rep.legendre.iter().zip(&analytic)).map(|(x, (a, b))| {
            vec![num(*x), ext(*a), ext(*b), num((a.to_f64() - b.to_f64()).abs())]
        }),
    )?;
    let mut ball_rows = Vec::new();
    for (row, rates) in rep.rows.iter().zip(&rep.ball_rates) {
        for ((x, r), i) in rep.grid.iter().zip(rates).zip(&analytic) {
            ball_rows.push(vec![row.horizon.to_string(), num(*x), ext(*r), ext(*i)]);
        }
    }
    ctx.out.csv("ball_rates.csv", &["horizon", "x", "ball_rate", "rate"], ball_rows)?;
    ctx.out.csv(
        "convergence.csv",
        &["horizon", "delta", "sup_gap", "worst_x"],
        rep.rows.iter().map(|r| vec![r.horizon.to_string(), num(r.delta), num(r.sup_gap), num(r.worst_x)]),
    )?;
    let n = grid.largest();
    let ball_gap = max_gap(BALL_POINTS.iter().map(|&x| {
        let b = rep.ball_rate_at(n, x).expect("grid holds the quartiles");
        (b.to_f64() - bernoulli_rate(0.5, x).to_f64()).abs()
    }));
    ctx.out.json("cramer.json", &rep)?;
    Ok(vec![
        Criterion::new(
            "legendre transform",
            legendre_gap <= ctx.tol(1e-6),
            format!("sup gap {legendre_gap:?} on {} points", rep.grid.len()),
        ),
        Criterion::new(
            "ball rates",
            ball_gap <= BALL_TOL,
            format!("max gap {ball_gap:?} at x in {{0.25, 0.75}}, n = {n}"),
        ),
    ])
}

const COINCIDENCE_LAWS: usize = 100;
const COINCIDENCE_HORIZONS: [f64; 3] = [1.0, 4.0, 16.0];
const TWO_POINT_RATES: [f64; 3] = [0.5, 1.0, 2.0];
const POWERS: [f64; 3] = [0.5, 1.0, 2.0];
const TWO_ORACLE_TOL: f64 = 1e-4;
const TWO_ORACLE_AT: u32 = 1024;

#[derive(Serialize)]
struct ShortfallReport {
    coincidence_gap: f64,
    two_oracle_gap: f64,
    two_oracle_horizon: u32,
    shift: Vec<ShiftReport>,
}

pub fn shortfall(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let mut rows = Vec::new();
    let mut coincidence_gap: f64 = 0.0;
    for i in 0..COINCIDENCE_LAWS {
        let mut rng = trial_rng(ctx.cfg.seed, i as u64);
        let k = rng.gen_range(2..=8);
        let mut weights: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let law = ProbabilityVector::from_weights(&weights).map_err(CliError::input)?;
        for n in COINCIDENCE_HORIZONS {
            let s = shortfall_risk(&z, &law, &LossExponent::LinearScaled, n).map_err(CliError::input)?;
            let e = log_sum_exp(law.log_weights().iter().zip(&z).map(|(lp, z)| lp + n * z)) / n;
            coincidence_gap = coincidence_gap.max((s - e).abs());
            rows.push(vec![i.to_string(), k.to_string(), num(n), num(s), num(e), num((s - e).abs())]);
        }
    }
    ctx.out.csv("coincidence.csv", &["law", "points", "n", "shortfall", "entropic", "abs_diff"], rows)?;

    let grid = ctx.grid(HorizonGrid::powers(6, 10))?;
    let at = if grid.horizons().contains(&TWO_ORACLE_AT) { TWO_ORACLE_AT } else { grid.largest() };
    let subsets = [("{0}", Subset::singleton(2, 0)), ("{1}", Subset::singleton(2, 1)), ("{0 1}", Subset::full(2))];
    let mut rows = Vec::new();
    let mut two_oracle_gap: f64 = 0.0;
    for rate in TWO_POINT_RATES {
        let fam = ClosedFormFamily::two_point(rate);
        for p in POWERS {
            let loss = LossExponent::power(p).map_err(CliError::input)?;
            for (name, b) in &subsets {
                let formula = wrate_formulas(&fam, b, &loss, &grid, Mode::Auto);
                let route = shortfall_concentration(&fam, b, &loss, &grid, &RSchedule::default(), Mode::Auto)
                    .map_err(CliError::input)?;
                for (i, &n) in grid.horizons().iter().enumerate() {
                    let (f, r) = (formula.values[i], route.values[i]);
                    let gap = f.gap(r).abs();
                    if n == at {
                        two_oracle_gap = two_oracle_gap.max(gap);
                    }
                    rows.push(vec![num(rate), num(p), name.to_string(), n.to_string(), ext(f), ext(r), num(gap)]);
                }
            }
        }
    }
    ctx.out.csv("two_oracle.csv", &["rate", "p", "subset", "horizon", "formula", "schedule", "abs_diff"], rows)?;

    let losses = [
        LossExponent::LinearScaled,
        LossExponent::power(0.5).map_err(CliError::input)?,
        LossExponent::power(2.0).map_err(CliError::input)?,
        LossExponent::transform(Bijection::SignedPower { q: 0.5 }).map_err(CliError::input)?,
    ];
    let shift: Vec<ShiftReport> = losses.iter().map(|l| check_shift_condition(l, &default_shift_grid())).collect();
    ctx.out.csv(
        "shift.csv",
        &["loss", "a", "sequence", "shifted", "unshifted", "holds"],
        shift.iter().flat_map(|rep| {
            rep.rows.iter().map(|r| {
                vec![rep.loss.clone(), num(r.a), r.sequence.to_string(), ext(r.shifted), ext(r.unshifted), r.holds.to_string()]
            })
        }),
    )?;
    let shift_holds = shift.iter().all(|r| r.holds);

    let criteria = vec![
        Criterion::new(
            "linear shortfall equals entropic",
            coincidence_gap <= ctx.tol(1e-8),
            format!("max gap {coincidence_gap:?} over {COINCIDENCE_LAWS} laws"),
        ),
        Criterion::new(
            "inverse-loss formula",
            two_oracle_gap <= TWO_ORACLE_TOL,
            format!("max gap {two_oracle_gap:?} at n = {at}"),
        ),
        Criterion::new("shift condition", shift_holds, format!("{} loss kinds", shift.len())),
    ];
    ctx.out.json("shortfall.json", &ShortfallReport { coincidence_gap, two_oracle_gap, two_oracle_horizon: at, shift })?;
    Ok(criteria)
}

pub fn transformed(ctx: &Context) -> Result<Vec<Criterion>, CliError> {
    let law = LatticeLaw::bernoulli(0.5).map_err(CliError::input)?;
    let defaults = TransformedConfig::default();
    let cfg = TransformedConfig {
        horizon: ctx.cfg.horizons.as_ref().and_then(|h| h.last().copied()).unwrap_or(defaults.horizon),
        functions: ctx.trials(defaults.functions),
        seed: ctx.cfg.seed,
        tolerance: ctx.tol(defaults.tolerance),
        ..defaults
    };
    let rep = transformed_ldp_demo(&law, Bijection::SignedPower { q: 0.5 }, &cfg).map_err(CliError::input)?;
    ctx.out.csv(
        "transformed_rates.csv",
        &["x", "cramer_rate", "target", "ball_rate", "shortfall_rate", "formula_rate", "gap"],
        rep.rate_rows.iter().map(|r| {
            vec![
                num(r.x),
                ext(r.entropic_rate),
                ext(r.target),
                ext(r.ball_rate),
                ext(r.shortfall_rate),
                ext(r.formula_rate),
                num(r.gap),
            ]
        }),
    )?;
    ctx.out.csv(
        "transformed_lp.csv",
        &["function", "shortfall", "dual", "gap"],
        rep.lp_rows.iter().map(|r| vec![r.index.to_string(), num(r.shortfall_value), num(r.dual_value), num(r.gap)]),
    )?;
    let criteria = vec![
        Criterion::new(
            "transformed rates",
            rep.rates_hold,
            format!("max gap {:?} against sqrt of the Cramer rate at n = {}", rep.rate_gap, rep.horizon),
        ),
        Criterion::new(
            "transformed laplace",
            rep.lp_holds,
            format!("max gap {:?} over {} functions", rep.lp_gap, rep.lp_rows.len()),
        ),
    ];
    ctx.out.json("transformed.json", &rep)?;
    Ok(criteria)
}
