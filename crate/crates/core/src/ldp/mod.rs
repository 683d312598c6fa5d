//! Rate functions, large deviation and Laplace principle verdicts, and the
//! equivalence between them for max-stable risk measures.

mod local;
mod pair;
mod tightness;

pub use local::{check_local_max_stability, local_representation_check, LocalRepresentationReport, LocalStabilityReport};
pub use pair::{pair_sandwich_check, PairReport};
pub use tightness::{family_tightness_candidates, tightness_check, TightnessCandidate, TightnessConfig, TightnessReport, TightnessRow};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ext::{ExtReal, PosInf};
use crate::maxitive::{concentration, ConcentrationTable, MaxitiveError, RSchedule};
use crate::par::{self, Mode};
use crate::risk::{check_max_stability, random_function, trial_rng, CheckConfig, RiskError, RiskMeasure};
use crate::space::{BoundedFunction, FiniteMetricSpace, SpaceError, Subset};

/// Rates this far below zero are rounding noise and are clamped to zero.
pub const RATE_CLAMP: f64 = 1e-9;
/// Default perturbation size for uniqueness tests.
pub const PERTURBATION: f64 = 0.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LdpError {
    #[error("invalid rate function: {0}")]
    InvalidRate(String),
    #[error("risk measure is not max-stable: {0}")]
    NotMaxStable(String),
    #[error("lower measure exceeds upper measure by {gap}")]
    OrderViolation { gap: f64, witness: Vec<f64> },
    #[error("function corpus is empty")]
    EmptyCorpus,
    #[error("rate has {got} values but the space has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Maxitive(#[from] MaxitiveError),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// `I : S -> [0, +inf]`, not identically `+inf`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateFunction {
    values: Vec<ExtReal>,
}

impl RateFunction {
    pub fn new(values: Vec<ExtReal>) -> Result<Self, LdpError> {
        if values.is_empty() || values.iter().all(|v| *v == PosInf) {
            return Err(LdpError::InvalidRate("identically +inf".into()));
        }
        let mut out = Vec::with_capacity(values.len());
        for (i, v) in values.into_iter().enumerate() {
            if v < ExtReal::Finite(-RATE_CLAMP) {
                return Err(LdpError::InvalidRate(format!("I({i}) = {v} is negative")));
            }
            out.push(if v < ExtReal::ZERO { ExtReal::ZERO } else { v });
        }
        Ok(Self { values: out })
    }

    pub fn from_finite(values: &[f64]) -> Result<Self, LdpError> {
        Self::new(values.iter().map(|&v| ExtReal::from_f64(v)).collect())
    }

    pub fn values(&self) -> &[ExtReal] {
        &self.values
    }

    pub fn get(&self, x: usize) -> ExtReal {
        self.values[x]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `inf_{x in A} I(x)`, `+inf` on the empty set.
    pub fn inf_over(&self, a: &Subset) -> ExtReal {
        a.iter().map(|x| self.values[x]).min().unwrap_or(PosInf)
    }

    /// `sup_x { f(x) - I(x) }`.
    pub fn dual_value(&self, f: &BoundedFunction) -> f64 {
        f.values().iter().zip(&self.values).map(|(&v, &i)| (v - i).to_f64()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// `I` with `I(x)` moved by `delta`.
    pub fn perturbed(&self, x: usize, delta: f64) -> Result<Self, LdpError> {
        let mut values = self.values.clone();
        values[x] = values[x] + delta;
        Self::new(values)
    }
}

pub(crate) fn check_rate_len(space: &FiniteMetricSpace, rate: &RateFunction) -> Result<(), LdpError> {
    if space.len() != rate.len() {
        return Err(LdpError::LengthMismatch { expected: space.len(), got: rate.len() });
    }
    Ok(())
}

/// `I(x) = -J_{B(x)}` at the limit radius, where balls are singletons.
pub fn rate_from_balls(phi: &RiskMeasure, schedule: &RSchedule, mode: Mode) -> Result<RateFunction, LdpError> {
    let space = phi.space();
    let delta = space.limit_radius();
    let values = par::map_range(mode, space.len(), |x| -> Result<ExtReal, LdpError> {
        Ok(-concentration(phi, &space.ball(x, delta)?, schedule)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    RateFunction::new(values)
}

/// The functions `c 1_{x} + r 1_{x^c}` for every point, `c in {-1, 0, 1}` and
/// `r` in `{0} u {-2^k : k = 0..=40}`.
pub fn two_level_corpus(k: usize) -> Vec<BoundedFunction> {
    let rs: Vec<f64> = std::iter::once(0.0).chain(RSchedule::default().levels).collect();
    let mut out = Vec::with_capacity(k * 3 * rs.len());
    for x in 0..k {
        let point = Subset::singleton(k, x);
        for c in [-1.0, 0.0, 1.0] {
            for &r in &rs {
                out.push(BoundedFunction::two_level(&point, c, r));
            }
        }
    }
    out
}

/// `I(x) = sup_f { f(x) - phi(f) }` over the corpus, together with `f = 0`.
///
/// This is a lower bound on the minimal rate; with [`two_level_corpus`] it
/// recovers finite rates of max-stable measures.
pub fn rate_from_duality(phi: &RiskMeasure, corpus: &[BoundedFunction], mode: Mode) -> Result<RateFunction, LdpError> {
    if corpus.is_empty() {
        return Err(LdpError::EmptyCorpus);
    }
    let k = phi.space().len();
    let values = par::map_slice(mode, corpus, |f| phi.evaluate(f)).into_iter().collect::<Result<Vec<_>, _>>()?;
    let rates = (0..k)
        .map(|x| ExtReal::Finite(corpus.iter().zip(&values).map(|(f, v)| f.get(x) - v).fold(0.0, f64::max)))
        .collect();
    RateFunction::new(rates)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpRow {
    pub mask: u64,
    pub lower: ExtReal,
    pub j: ExtReal,
    pub upper: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LdpVerdict {
    pub holds: bool,
    pub tolerance: f64,
    /// Largest `-inf_{int A} I - J_A`.
    pub worst_lower_gap: ExtReal,
    /// Largest `J_A + inf_{cl A} I`.
    pub worst_upper_gap: ExtReal,
    pub lower_witness: Option<Vec<String>>,
    pub upper_witness: Option<Vec<String>>,
    #[serde(skip)]
    pub rows: Vec<LdpRow>,
}

/// Checks `-inf_{int A} I <= J_A <= -inf_{cl A} I` for every subset.
pub fn ldp_check(
    table: &ConcentrationTable,
    rate: &RateFunction,
    space: &FiniteMetricSpace,
    tol: f64,
    mode: Mode,
) -> Result<LdpVerdict, LdpError> {
    check_rate_len(space, rate)?;
    let k = space.len();
    let rows = par::map_range(mode, 1usize << k, |mask| -> Result<LdpRow, LdpError> {
        let a = Subset::from_mask(k, mask as u64);
        let (int, cl) = space.interior_closure(&a);
        Ok(LdpRow { mask: mask as u64, lower: -rate.inf_over(&int), j: table.get(&a)?, upper: -rate.inf_over(&cl) })
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut lower = (ExtReal::from_f64(f64::NEG_INFINITY), None);
    let mut upper = (ExtReal::from_f64(f64::NEG_INFINITY), None);
    for row in &rows {
        let lg = ExtReal::from_f64(row.lower.gap(row.j));
        let ug = ExtReal::from_f64(row.j.gap(row.upper));
        if lg > lower.0 {
            lower = (lg, Some(row.mask));
        }
        if ug > upper.0 {
            upper = (ug, Some(row.mask));
        }
    }
    let labels = |m: Option<u64>| m.map(|m| space.subset_labels(&Subset::from_mask(k, m)));
    let limit = ExtReal::Finite(tol);
    Ok(LdpVerdict {
        holds: lower.0 <= limit && upper.0 <= limit,
        tolerance: tol,
        worst_lower_gap: lower.0,
        worst_upper_gap: upper.0,
        lower_witness: if lower.0 > limit { labels(lower.1) } else { None },
        upper_witness: if upper.0 > limit { labels(upper.1) } else { None },
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LpVerdict {
    pub holds: bool,
    pub tolerance: f64,
    pub trials: usize,
    /// Largest `|phi(f) - sup_x { f(x) - I(x) }|`.
    pub worst_gap: f64,
    pub witness: Option<Vec<f64>>,
}

/// `phi(f)` against `sup_x { f(x) - I(x) }` on random `f`.
pub fn lp_check(phi: &RiskMeasure, rate: &RateFunction, cfg: &CheckConfig) -> Result<LpVerdict, LdpError> {
    check_rate_len(phi.space(), rate)?;
    let k = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let gaps = par::map_range(cfg.mode, cfg.trials, |t| -> Result<(f64, BoundedFunction), LdpError> {
        let f = random_function(&mut trial_rng(cfg.seed, t as u64), k, cfg.bound);
        Ok(((phi.evaluate(&f)? - rate.dual_value(&f)).abs(), f))
    });
    let mut verdict = LpVerdict { holds: true, tolerance: tol, trials: cfg.trials, worst_gap: 0.0, witness: None };
    for g in gaps {
        let (gap, f) = g?;
        if gap > verdict.worst_gap {
            verdict.worst_gap = gap;
            verdict.witness = Some(f.values().to_vec());
        }
    }
    verdict.holds = verdict.worst_gap <= tol;
    Ok(verdict)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbationRow {
    pub point: String,
    pub delta: f64,
    /// Whether the perturbed rate violates an LDP bound.
    pub rejected: bool,
    pub worst_lower_gap: ExtReal,
    pub worst_upper_gap: ExtReal,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquivalenceReport {
    pub rate: RateFunction,
    pub ldp: LdpVerdict,
    pub lp: LpVerdict,
    /// LDP and LP verdicts agree and both hold.
    pub equivalence_holds: bool,
    pub perturbations: Vec<PerturbationRow>,
    /// Every admissible perturbation was rejected.
    pub uniqueness_holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquivalenceConfig {
    pub check: CheckConfig,
    pub epsilon: f64,
    pub schedule: RSchedule,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self { check: CheckConfig::default(), epsilon: PERTURBATION, schedule: RSchedule::default() }
    }
}

/// For a max-stable `phi`: the minimal rate satisfies both the LDP and the
/// LP, and every rate obtained by moving one value by `+eps` (or by `-eps`
/// where `I > eps`) breaks an LDP bound.
pub fn varadhan_bryc_equivalence(phi: &RiskMeasure, cfg: &EquivalenceConfig) -> Result<EquivalenceReport, LdpError> {
    let stab = check_max_stability(phi, &cfg.check)?;
    if !stab.passed {
        return Err(LdpError::NotMaxStable(format!("phi(f v g) differs from phi(f) v phi(g) by {}", stab.lattice.amount)));
    }
    let space = phi.space();
    let tol = cfg.check.tolerance_for(phi);
    let mode = cfg.check.mode;
    let rate = rate_from_balls(phi, &cfg.schedule, mode)?;
    let table = ConcentrationTable::build(phi, &cfg.schedule, mode)?;
    let ldp = ldp_check(&table, &rate, space, tol, mode)?;
    let lp = lp_check(phi, &rate, &cfg.check)?;

    let mut perturbations = Vec::new();
    for x in 0..space.len() {
        let i = rate.get(x);
        if !i.is_finite() {
            continue;
        }
        let mut deltas = vec![cfg.epsilon];
        if i > ExtReal::Finite(cfg.epsilon) {
            deltas.push(-cfg.epsilon);
        }
        for delta in deltas {
            let v = ldp_check(&table, &rate.perturbed(x, delta)?, space, tol, Mode::Sequential)?;
            perturbations.push(PerturbationRow {
                point: space.label(x).to_string(),
                delta,
                rejected: !v.holds,
                worst_lower_gap: v.worst_lower_gap,
                worst_upper_gap: v.worst_upper_gap,
            });
        }
    }
    let uniqueness_holds = perturbations.iter().all(|p| p.rejected);
    Ok(EquivalenceReport { equivalence_holds: ldp.holds && lp.holds, rate, ldp, lp, perturbations, uniqueness_holds })
}

/// Draws `count` random subsets of a `k`-point space.
pub fn random_subsets(k: usize, count: usize, seed: u64) -> Vec<Subset> {
    (0..count)
        .map(|t| {
            let mut rng = trial_rng(seed, t as u64);
            let bits: Vec<bool> = (0..k).map(|_| rng.gen_bool(0.5)).collect();
            Subset::from_fn(k, |i| bits[i])
        })
        .collect()
}
