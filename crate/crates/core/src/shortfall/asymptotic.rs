//! Shortfall risk along a distribution sequence, the inverse-exponent
//! formulas for its concentration and rate, and the transformed Cramér rate.

use rand::Rng;
use serde::Serialize;

use super::{Bijection, LossExponent, ShortfallError, ShortfallProblem};
use crate::ext::ExtReal;
use crate::families::cramer::{default_grid, LatticeLaw, SampleMeanLaw};
use crate::families::{
    DistributionSequence, Extension, FamilyError, HorizonEstimate, HorizonGrid, TruncatedLaw, TRUNCATION_TOL,
};
use crate::maxitive::{concentration_by_schedule, MaxitiveError, RSchedule};
use crate::par::{self, Mode};
use crate::risk::{trial_rng, RiskError};
use crate::space::{BoundedFunction, Subset};

fn shortfall_with_tail(
    law: &TruncatedLaw,
    f: &BoundedFunction,
    beyond: f64,
    loss: &LossExponent,
    n: f64,
) -> Result<f64, ShortfallError> {
    let mut outcomes = f.values().to_vec();
    outcomes.push(beyond);
    let mut log_probs = law.log_weights.clone();
    log_probs.push(law.log_tail);
    ShortfallProblem::from_log_probs(outcomes, log_probs)?.solve(loss, n)
}

/// Shortfall risk of `f(X_n)` under `exp(w_n)` at one horizon.
pub fn shortfall_at(
    law: &TruncatedLaw,
    f: &BoundedFunction,
    n: u32,
    ext: Extension,
    loss: &LossExponent,
) -> Result<f64, FamilyError> {
    let nf = n as f64;
    match ext.value(f) {
        Some(beyond) => Ok(shortfall_with_tail(law, f, beyond, loss, nf)?),
        None if law.log_tail == f64::NEG_INFINITY => Ok(shortfall_with_tail(law, f, 0.0, loss, nf)?),
        None => {
            let lo = shortfall_with_tail(law, f, f.inf(), loss, nf)?;
            let hi = shortfall_with_tail(law, f, f.sup(), loss, nf)?;
            if hi - lo > TRUNCATION_TOL {
                Err(FamilyError::TruncationDominates { horizon: n, spread: hi - lo })
            } else {
                Ok(hi)
            }
        }
    }
}

/// Horizon values of the shortfall risk of `f(X_n)` with their envelopes.
pub fn asymptotic_shortfall(
    family: &dyn DistributionSequence,
    f: &BoundedFunction,
    ext: Extension,
    loss: &LossExponent,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    let expected = family.space().len();
    if f.len() != expected {
        return Err(FamilyError::LengthMismatch { expected, got: f.len() });
    }
    let values = par::map_slice(mode, grid.horizons(), |&n| {
        shortfall_at(&family.law(n), f, n, ext, loss).map(ExtReal::from_f64)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(HorizonEstimate::from_values(grid, values))
}

/// Shortfall risk of `f(mean of n draws)` for a lattice base law.
pub fn asymptotic_shortfall_mean(
    law: &LatticeLaw,
    f: &(dyn Fn(f64) -> f64 + Sync),
    loss: &LossExponent,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    let laws = law.sample_mean_laws(grid.horizons(), mode);
    let values = par::map_slice(mode, &laws, |sm| shortfall_of_mean(sm, f, loss).map(ExtReal::from_f64))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HorizonEstimate::from_values(grid, values))
}

fn shortfall_of_mean(sm: &SampleMeanLaw, f: &dyn Fn(f64) -> f64, loss: &LossExponent) -> Result<f64, FamilyError> {
    let outcomes = (0..sm.len()).map(|k| f(sm.value(k))).collect();
    Ok(ShortfallProblem::from_log_probs(outcomes, sm.log_probs().to_vec())?.solve(loss, sm.n as f64)?)
}

/// `-w_n^{-1}(-log P_n(B))` per horizon: the upper envelope estimates the
/// upper concentration `J_B` of the asymptotic shortfall and the lower
/// envelope the lower one.
pub fn wrate_formulas(
    family: &dyn DistributionSequence,
    b: &Subset,
    loss: &LossExponent,
    grid: &HorizonGrid,
    mode: Mode,
) -> HorizonEstimate {
    let values = par::map_slice(mode, grid.horizons(), |&n| {
        -loss.inverse(n as f64, ExtReal::from_f64(-family.law(n).log_prob(b)))
    });
    HorizonEstimate::from_values(grid, values)
}

/// `w_n^{-1}(-log P_n(B_delta(x)))` per horizon; the lower envelope is the
/// rate estimate at `x`. `delta` defaults to the limit radius.
pub fn wrate_point(
    family: &dyn DistributionSequence,
    x: usize,
    delta: Option<f64>,
    loss: &LossExponent,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    let space = family.space();
    let ball = space.ball(x, delta.unwrap_or_else(|| space.limit_radius()))?;
    Ok(wrate_formulas(family, &ball, loss, grid, mode).map(|v| -v))
}

fn shortfall_err(e: ShortfallError) -> MaxitiveError {
    MaxitiveError::Risk(RiskError::Shortfall(e))
}

/// `inf_r` of the shortfall risk of `r 1_{B^c}` under a law giving `B` the
/// log-mass `log_b` and its complement `log_bc`.
fn two_outcome_concentration(
    log_b: f64,
    log_bc: f64,
    loss: &LossExponent,
    n: f64,
    schedule: &RSchedule,
) -> Result<ExtReal, MaxitiveError> {
    concentration_by_schedule(
        |r| {
            ShortfallProblem::from_log_probs(vec![0.0, r], vec![log_b, log_bc])
                .and_then(|p| p.solve(loss, n))
                .map_err(shortfall_err)
        },
        schedule,
    )
}

/// Concentration `J_B` of the shortfall risk at each horizon, computed by the
/// r-schedule on `r 1_{B^c}`. Mass outside the truncation lies in `B^c`.
pub fn shortfall_concentration(
    family: &dyn DistributionSequence,
    b: &Subset,
    loss: &LossExponent,
    grid: &HorizonGrid,
    schedule: &RSchedule,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    let values = par::map_slice(mode, grid.horizons(), |&n| {
        let law = family.law(n);
        two_outcome_concentration(law.log_prob(b), law.log_prob_outside(b), loss, n as f64, schedule)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(HorizonEstimate::from_values(grid, values))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedConfig {
    pub horizon: u32,
    /// Points where rates are compared; by default 99 interior points.
    pub grid: Option<Vec<f64>>,
    pub functions: usize,
    /// Knots of the random piecewise-linear functions, spread over the support.
    pub knots: usize,
    pub bound: f64,
    pub seed: u64,
    pub tolerance: f64,
    pub mode: Mode,
}

impl Default for TransformedConfig {
    fn default() -> Self {
        Self { horizon: 4096, grid: None, functions: 50, knots: 11, bound: 1.0, seed: 0, tolerance: 5e-2, mode: Mode::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedRateRow {
    pub x: f64,
    /// Legendre transform of the log-moment generating function.
    pub entropic_rate: ExtReal,
    /// `v(I*(x))`.
    pub target: ExtReal,
    /// `-(1/n) log P(ball)`.
    pub ball_rate: ExtReal,
    /// Minus the shortfall concentration of the ball, by the r-schedule.
    pub shortfall_rate: ExtReal,
    /// `w_n^{-1}(-log P(ball))`.
    pub formula_rate: ExtReal,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedLpRow {
    pub index: usize,
    pub knots: Vec<f64>,
    /// Shortfall risk of `f(mean)` at the horizon.
    pub shortfall_value: f64,
    /// `sup_x { f(x) - v(I*(x)) }` over the lattice of the mean.
    pub dual_value: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransformedLdpReport {
    pub transform: String,
    pub horizon: u32,
    pub delta: f64,
    pub tolerance: f64,
    pub rate_rows: Vec<TransformedRateRow>,
    pub rate_gap: f64,
    pub lp_rows: Vec<TransformedLpRow>,
    pub lp_gap: f64,
    pub rates_hold: bool,
    pub lp_holds: bool,
}

fn piecewise_linear(knots: &[f64], lo: f64, hi: f64, x: f64) -> f64 {
    let segments = (knots.len() - 1) as f64;
    let t = ((x - lo) / (hi - lo) * segments).clamp(0.0, segments);
    let i = (t.floor() as usize).min(knots.len() - 2);
    let frac = t - i as f64;
    knots[i] * (1.0 - frac) + knots[i + 1] * frac
}

/// Rates and Laplace values of the shortfall risk with `w_n = n v^{-1}` on
/// sample means of a lattice law, against `v` composed with the Cramér rate.
pub fn transformed_ldp_demo(
    law: &LatticeLaw,
    v: Bijection,
    cfg: &TransformedConfig,
) -> Result<TransformedLdpReport, FamilyError> {
    if let Some(x) = law.degenerate_point() {
        return Err(FamilyError::DegenerateLaw(x));
    }
    if cfg.knots < 2 || cfg.horizon == 0 {
        return Err(FamilyError::InvalidGrid("need a positive horizon and at least two knots".into()));
    }
    let loss = LossExponent::transform(v.clone()).map_err(ShortfallError::from)?;
    let n = cfg.horizon;
    let nf = n as f64;
    let sm = law.sample_mean_law(n);
    let delta = sm.step() / 2.0;
    let points = cfg.grid.clone().unwrap_or_else(|| default_grid(law, 99));
    let schedule = RSchedule::default();

    let rate_rows = par::map_slice(cfg.mode, &points, |&x| -> Result<TransformedRateRow, FamilyError> {
        let entropic_rate = law.legendre(x);
        let target = v.apply_ext(entropic_rate);
        let log_b = sm.ball_log_prob(x, delta);
        let log_bc = sm.log_prob_where(|y| (y - x).abs() >= delta);
        let shortfall_rate = -two_outcome_concentration(log_b, log_bc, &loss, nf, &schedule)?;
        let formula_rate = loss.inverse(nf, ExtReal::from_f64(-log_b));
        Ok(TransformedRateRow {
            x,
            entropic_rate,
            target,
            ball_rate: sm.ball_rate(x, delta),
            shortfall_rate,
            formula_rate,
            gap: shortfall_rate.abs_diff(target),
        })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let rate_gap = rate_rows.iter().map(|r| r.gap).fold(0.0, f64::max);

    let (lo, hi) = (law.support_min(), law.support_max());
    let lattice_rates: Vec<ExtReal> =
        par::map_range(cfg.mode, sm.len(), |k| v.apply_ext(law.legendre(sm.value(k))));
    let lp_rows = par::map_range(cfg.mode, cfg.functions, |i| -> Result<TransformedLpRow, FamilyError> {
        let mut rng = trial_rng(cfg.seed, i as u64);
        let knots: Vec<f64> = (0..cfg.knots).map(|_| rng.gen_range(-cfg.bound..=cfg.bound)).collect();
        let f = |x: f64| piecewise_linear(&knots, lo, hi, x);
        let shortfall_value = shortfall_of_mean(&sm, &f, &loss)?;
        let dual_value = lattice_rates
            .iter()
            .enumerate()
            .map(|(k, &i)| (f(sm.value(k)) - i).to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(TransformedLpRow { index: i, gap: (shortfall_value - dual_value).abs(), knots, shortfall_value, dual_value })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let lp_gap = lp_rows.iter().map(|r| r.gap).fold(0.0, f64::max);

    Ok(TransformedLdpReport {
        transform: format!("{v:?}"),
        horizon: n,
        delta,
        tolerance: cfg.tolerance,
        rates_hold: rate_gap <= cfg.tolerance,
        lp_holds: lp_gap <= cfg.tolerance,
        rate_rows,
        rate_gap,
        lp_rows,
        lp_gap,
    })
}
