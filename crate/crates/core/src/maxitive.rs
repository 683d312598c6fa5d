//! Max-stable penalties, the maxitive integral, and concentration functions.
//!
//! A max-stable penalty on a finite space is determined by its atoms
//! `mu({x}) in [-inf, 0]`; `mu(A) = max_{x in A} mu({x})` and `mu(empty) = -inf`.
//! The concentration `J_A = inf_r phi(r 1_{A^c})` of a max-stable monetary
//! risk measure is such a penalty, and `phi(f) = sup_r { r + J_{f > r} }`.

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ext::{ExtReal, NegInf, PosInf};
use crate::par::{self, Mode};
use crate::risk::{trial_rng, RiskError, RiskKind, RiskMeasure};
use crate::space::{BoundedFunction, Subset};

/// Subset tables are materialized up to this many points.
pub const MAX_MATERIALIZED: usize = 15;
/// All pairs of subsets are compared up to this many points.
pub const MAX_EXHAUSTIVE_PAIRS: usize = 12;
pub const CONCENTRATION_TOL: f64 = 1e-10;
/// Normalization slack on `max mu = 0`.
pub const PENALTY_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MaxitiveError {
    #[error("penalty atom {index} = {value} lies outside [-inf, 0]")]
    AtomOutOfRange { index: usize, value: ExtReal },
    #[error("penalty atoms must attain 0 (max is {0})")]
    NotNormalized(ExtReal),
    #[error("r-schedule exhausted without stabilization (last value {last})")]
    NoConvergence { last: f64 },
    #[error("risk measure is not max-stable: {0}")]
    NotMaxStable(String),
    #[error("{k} points exceed the materialization limit of {MAX_MATERIALIZED}")]
    TooLarge { k: usize },
    #[error(transparent)]
    Risk(#[from] RiskError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxStablePenalty {
    atoms: Vec<ExtReal>,
}

impl MaxStablePenalty {
    pub fn new(atoms: Vec<ExtReal>) -> Result<Self, MaxitiveError> {
        for (index, &value) in atoms.iter().enumerate() {
            if value == PosInf || value > ExtReal::Finite(PENALTY_TOL) {
                return Err(MaxitiveError::AtomOutOfRange { index, value });
            }
        }
        let max = atoms.iter().copied().max().unwrap_or(NegInf);
        if max < ExtReal::Finite(-PENALTY_TOL) {
            return Err(MaxitiveError::NotNormalized(max));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[ExtReal] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `mu(A)`; the empty set gets `-inf` before any maximization.
    pub fn value(&self, a: &Subset) -> ExtReal {
        if a.is_empty() {
            return NegInf;
        }
        a.iter().map(|i| self.atoms[i]).max().unwrap_or(NegInf)
    }
}

/// Closed form on a finite space: `max_x { f(x) + mu({x}) }`.
pub fn maxitive_integral(f: &BoundedFunction, mu: &MaxStablePenalty) -> f64 {
    integral_over_atoms(f, mu.atoms())
}

fn integral_over_atoms(f: &BoundedFunction, atoms: &[ExtReal]) -> f64 {
    f.values().iter().zip(atoms).map(|(&v, &a)| (v + a).to_f64()).fold(f64::NEG_INFINITY, f64::max)
}

/// `sup_r { r + mu({f > r}) }` evaluated at the level jumps. On
/// `[v_{j-1}, v_j)` the superlevel set is `{f >= v_j}`, so the supremum over
/// that piece is the left limit `v_j + mu({f >= v_j})`.
pub fn maxitive_integral_levels(f: &BoundedFunction, mu: &MaxStablePenalty) -> f64 {
    let mut levels: Vec<f64> = f.values().to_vec();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels
        .iter()
        .map(|&v| (v + mu.value(&Subset::from_fn(f.len(), |i| f.get(i) >= v))).to_f64())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// The literal supremum over the grid `{f(x) - eps, f(x)}`; it sits within
/// `eps` below the exact integral.
pub fn maxitive_integral_grid(f: &BoundedFunction, mu: &MaxStablePenalty, eps: f64) -> f64 {
    f.values()
        .iter()
        .flat_map(|&v| [v - eps, v])
        .map(|r| (r + mu.value(&f.superlevel(r))).to_f64())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Decreasing sequence of levels `r_k` for `inf_r phi(r 1_{A^c})`.
#[derive(Debug, Clone, PartialEq)]
pub struct RSchedule {
    pub levels: Vec<f64>,
    pub tolerance: f64,
}

impl Default for RSchedule {
    /// `r_k = -2^k`, `k = 0..=40`.
    fn default() -> Self {
        Self { levels: (0..=40).map(|k| -(2f64.powi(k))).collect(), tolerance: CONCENTRATION_TOL }
    }
}

/// `J_A = inf_r phi(r 1_{A^c})`.
///
/// Atomic and maxitive kinds use the exact value `max_{x in A} -gamma(x)`.
/// Other kinds walk the schedule and stop once two successive values differ
/// by less than the tolerance. If the schedule runs out while `phi(r 1_{A^c})`
/// still tracks `r` with unit slope, `J_A = -inf`; otherwise the last value is
/// returned inside [`MaxitiveError::NoConvergence`].
pub fn concentration(phi: &RiskMeasure, a: &Subset, schedule: &RSchedule) -> Result<ExtReal, MaxitiveError> {
    let k = phi.space().len();
    if a.is_empty() {
        return Ok(NegInf);
    }
    if a.is_full() {
        return Ok(ExtReal::from_f64(phi.evaluate(&BoundedFunction::zero(k))?));
    }
    if let Some(atoms) = phi.closed_form_atoms() {
        return Ok(a.iter().map(|i| atoms[i]).max().unwrap_or(NegInf));
    }
    let outside = a.complement();
    concentration_by_schedule(|r| Ok(phi.evaluate(&BoundedFunction::two_level(&outside, r, 0.0))?), schedule)
}

/// `inf_r value(r)` along the schedule, for a map `r -> phi(r 1_{A^c})`.
pub fn concentration_by_schedule<F>(mut value: F, schedule: &RSchedule) -> Result<ExtReal, MaxitiveError>
where
    F: FnMut(f64) -> Result<f64, MaxitiveError>,
{
    let mut prev: Option<(f64, f64)> = None;
    let mut offsets = [f64::NAN; 2];
    for &r in &schedule.levels {
        let v = value(r)?;
        if let Some((_, pv)) = prev {
            if (v - pv).abs() < schedule.tolerance {
                return Ok(ExtReal::Finite(v));
            }
        }
        offsets = [offsets[1], v - r];
        prev = Some((r, v));
    }
    let (r_last, v_last) = prev.unwrap_or((0.0, 0.0));
    let slack = schedule.tolerance + 8.0 * f64::EPSILON * r_last.abs();
    if (offsets[1] - offsets[0]).abs() <= slack {
        Ok(NegInf)
    } else {
        Err(MaxitiveError::NoConvergence { last: v_last })
    }
}

/// Singleton concentrations `J_{x}`, without any normalization check.
pub fn penalty_atoms(phi: &RiskMeasure, schedule: &RSchedule) -> Result<Vec<ExtReal>, MaxitiveError> {
    let k = phi.space().len();
    (0..k).map(|x| concentration(phi, &Subset::singleton(k, x), schedule)).collect()
}

/// The concentration of `phi` as a max-stable penalty.
///
/// Fails with [`MaxitiveError::NotMaxStable`] when the atoms do not attain 0
/// or, for spaces of at most [`MAX_MATERIALIZED`] points, when some `J_A`
/// differs from the maximum of the atoms in `A`.
pub fn penalty_from_risk(phi: &RiskMeasure, schedule: &RSchedule) -> Result<MaxStablePenalty, MaxitiveError> {
    let atoms = penalty_atoms(phi, schedule)?;
    let tol = phi.tolerance().max(PENALTY_TOL);
    let max = atoms.iter().copied().max().unwrap_or(NegInf);
    if !max.approx_eq(ExtReal::ZERO, tol) {
        return Err(MaxitiveError::NotMaxStable(format!("max_x J_{{x}} = {max}, expected 0")));
    }
    let k = atoms.len();
    if k <= MAX_MATERIALIZED {
        let table = ConcentrationTable::build(phi, schedule, Mode::Auto)?;
        for mask in 0..(1u64 << k) {
            let a = Subset::from_mask(k, mask);
            let from_atoms = a.iter().map(|i| atoms[i]).max().unwrap_or(NegInf);
            let j = table.get(&a)?;
            if !j.approx_eq(from_atoms, tol) {
                return Err(MaxitiveError::NotMaxStable(format!(
                    "J_A = {j} but max of atoms over A = {from_atoms} for A = {}",
                    a.to_bit_string()
                )));
            }
        }
    }
    MaxStablePenalty::new(atoms.into_iter().map(|a| if a > ExtReal::ZERO { ExtReal::ZERO } else { a }).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationReport {
    pub trials: usize,
    pub max_gap: f64,
    pub witness: Option<Vec<f64>>,
}

/// Compares `phi(f)` with `int^max f dJ` on random `f`, using the singleton
/// concentrations as penalty atoms.
pub fn representation_check(
    phi: &RiskMeasure,
    trials: usize,
    seed: u64,
    bound: f64,
    mode: Mode,
) -> Result<RepresentationReport, MaxitiveError> {
    let atoms = penalty_atoms(phi, &RSchedule::default())?;
    let k = atoms.len();
    let gaps = par::map_range(mode, trials, |t| {
        let mut rng = trial_rng(seed, t as u64);
        let f = BoundedFunction::new((0..k).map(|_| rng.gen_range(-bound..=bound)).collect()).expect("finite");
        phi.evaluate(&f).map(|v| ((v - integral_over_atoms(&f, &atoms)).abs(), f))
    });
    let mut report = RepresentationReport { trials, max_gap: 0.0, witness: None };
    for g in gaps {
        let (gap, f) = g?;
        if gap > report.max_gap || report.witness.is_none() {
            report.max_gap = report.max_gap.max(gap);
            if gap >= report.max_gap {
                report.witness = Some(f.values().to_vec());
            }
        }
    }
    Ok(report)
}

/// `J_A` for every subset `A`, indexed by membership mask.
#[derive(Debug, Clone)]
pub enum ConcentrationTable {
    Materialized { k: usize, values: Vec<ExtReal> },
    /// Computed on request for spaces above [`MAX_MATERIALIZED`] points.
    Lazy { measure: Box<RiskMeasure>, schedule: RSchedule },
}

impl ConcentrationTable {
    pub fn build(phi: &RiskMeasure, schedule: &RSchedule, mode: Mode) -> Result<Self, MaxitiveError> {
        let k = phi.space().len();
        if k > MAX_MATERIALIZED {
            return Err(MaxitiveError::TooLarge { k });
        }
        let values = par::map_range(mode, 1usize << k, |mask| concentration(phi, &Subset::from_mask(k, mask as u64), schedule))
            .into_iter()
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::Materialized { k, values })
    }

    /// Materialized when small enough, lazy otherwise.
    pub fn for_measure(phi: &RiskMeasure, schedule: &RSchedule) -> Result<Self, MaxitiveError> {
        if phi.space().len() <= MAX_MATERIALIZED {
            Self::build(phi, schedule, Mode::Auto)
        } else {
            Ok(Self::Lazy { measure: Box::new(phi.clone()), schedule: schedule.clone() })
        }
    }

    pub fn from_values(k: usize, values: Vec<ExtReal>) -> Result<Self, MaxitiveError> {
        if k > MAX_MATERIALIZED {
            return Err(MaxitiveError::TooLarge { k });
        }
        assert_eq!(values.len(), 1 << k, "table must list every subset");
        Ok(Self::Materialized { k, values })
    }

    pub fn from_penalty(mu: &MaxStablePenalty) -> Result<Self, MaxitiveError> {
        let k = mu.len();
        if k > MAX_MATERIALIZED {
            return Err(MaxitiveError::TooLarge { k });
        }
        Ok(Self::Materialized { k, values: (0..1u64 << k).map(|m| mu.value(&Subset::from_mask(k, m))).collect() })
    }

    pub fn points(&self) -> usize {
        match self {
            Self::Materialized { k, .. } => *k,
            Self::Lazy { measure, .. } => measure.space().len(),
        }
    }

    pub fn get(&self, a: &Subset) -> Result<ExtReal, MaxitiveError> {
        match self {
            Self::Materialized { values, .. } => Ok(values[a.mask().expect("small table") as usize]),
            Self::Lazy { measure, schedule } => concentration(measure, a, schedule),
        }
    }

    /// `(mask, J)` rows of a materialized table.
    pub fn rows(&self) -> Option<Vec<(u64, ExtReal)>> {
        match self {
            Self::Materialized { values, .. } => Some(values.iter().enumerate().map(|(m, &v)| (m as u64, v)).collect()),
            Self::Lazy { .. } => None,
        }
    }

    /// Boundary values and monotonicity, checked through single-point
    /// extensions `A -> A + {x}` which generate the inclusion order.
    pub fn check_invariants(&self) -> Result<TableInvariants, MaxitiveError> {
        let Self::Materialized { k, values } = self else {
            return Err(MaxitiveError::TooLarge { k: self.points() });
        };
        let full = values[(1usize << k) - 1];
        let mut worst_monotonicity = 0.0f64;
        for mask in 0..values.len() {
            for x in 0..*k {
                let bigger = mask | 1 << x;
                worst_monotonicity = worst_monotonicity.max(values[mask].gap(values[bigger]).max(0.0));
            }
        }
        Ok(TableInvariants {
            empty_is_neg_inf: values[0] == NegInf,
            full_value: full,
            worst_monotonicity,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableInvariants {
    pub empty_is_neg_inf: bool,
    pub full_value: ExtReal,
    /// Worst `J_A - J_B` over `A subset B`.
    pub worst_monotonicity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltyStabilityReport {
    pub exhaustive: bool,
    pub pairs_checked: u64,
    /// Worst `|J_{A u B} - J_A v J_B|`.
    pub max_violation: f64,
    pub witness: Option<(u64, u64)>,
}

/// Checks `J_{A u B} = J_A v J_B` over all pairs when the space has at most
/// [`MAX_EXHAUSTIVE_PAIRS`] points, over `samples` random pairs otherwise.
pub fn check_penalty_maxstability(
    table: &ConcentrationTable,
    samples: usize,
    seed: u64,
    mode: Mode,
) -> Result<PenaltyStabilityReport, MaxitiveError> {
    let k = table.points();
    let n_sets = 1u64 << k.min(63);
    let exhaustive = k <= MAX_EXHAUSTIVE_PAIRS;
    let check = |a: u64, b: u64| -> Result<f64, MaxitiveError> {
        let ja = table.get(&Subset::from_mask(k, a))?;
        let jb = table.get(&Subset::from_mask(k, b))?;
        let ju = table.get(&Subset::from_mask(k, a | b))?;
        Ok(ju.abs_diff(ja.max(jb)))
    };
    let per_a: Vec<Result<(f64, Option<(u64, u64)>, u64), MaxitiveError>> = if exhaustive {
        par::map_range(mode, n_sets as usize, |a| {
            let mut worst = (0.0f64, None);
            for b in 0..n_sets {
                let v = check(a as u64, b)?;
                if v > worst.0 {
                    worst = (v, Some((a as u64, b)));
                }
            }
            Ok((worst.0, worst.1, n_sets))
        })
    } else {
        par::map_range(mode, samples, |t| {
            let mut rng = trial_rng(seed, t as u64);
            let a = rng.gen_range(0..n_sets);
            let b = rng.gen_range(0..n_sets);
            let v = check(a, b)?;
            Ok((v, if v > 0.0 { Some((a, b)) } else { None }, 1))
        })
    };
    let mut report = PenaltyStabilityReport { exhaustive, pairs_checked: 0, max_violation: 0.0, witness: None };
    for r in per_a {
        let (v, w, count) = r?;
        report.pairs_checked += count;
        if v > report.max_violation {
            report.max_violation = v;
            report.witness = w;
        }
    }
    Ok(report)
}

impl RiskMeasure {
    /// The risk measure `f -> int^max f dmu` on `self`'s space.
    pub fn from_penalty_of(&self, mu: MaxStablePenalty) -> Result<RiskMeasure, RiskError> {
        RiskMeasure::maxitive(self.space().clone(), mu)
    }
}

/// Penalty atoms recovered from a kind that stores them directly.
pub fn stored_penalty(phi: &RiskMeasure) -> Option<&MaxStablePenalty> {
    match phi.kind() {
        RiskKind::Maxitive { penalty } => Some(penalty),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FiniteMetricSpace, ProbabilityVector};
    use std::sync::Arc;

    fn space(k: usize) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::discrete(k).unwrap())
    }

    fn f(v: &[f64]) -> BoundedFunction {
        BoundedFunction::new(v.to_vec()).unwrap()
    }

    fn mu(v: &[f64]) -> MaxStablePenalty {
        MaxStablePenalty::new(v.iter().map(|&x| ExtReal::from_f64(x)).collect()).unwrap()
    }

    #[test]
    fn integral_of_constant_is_the_constant() {
        let m = mu(&[0.0, -1.0, f64::NEG_INFINITY]);
        for route in [maxitive_integral, maxitive_integral_levels] {
            assert_eq!(route(&BoundedFunction::constant(3, 4.2), &m), 4.2);
        }
    }

    #[test]
    fn integral_example_by_both_routes() {
        let m = mu(&[0.0, -1.0, f64::NEG_INFINITY]);
        let g = f(&[1.0, 3.0, 100.0]);
        assert_eq!(maxitive_integral(&g, &m), 2.0);
        assert_eq!(maxitive_integral_levels(&g, &m), 2.0);
        let grid = maxitive_integral_grid(&g, &m, 1e-9);
        assert!((2.0 - 1e-9..=2.0).contains(&grid));
    }

    #[test]
    fn penalty_rejects_bad_atoms() {
        assert!(matches!(
            MaxStablePenalty::new(vec![ExtReal::Finite(-1.0), NegInf]),
            Err(MaxitiveError::NotNormalized(_))
        ));
        assert!(matches!(
            MaxStablePenalty::new(vec![ExtReal::Finite(0.5)]),
            Err(MaxitiveError::AtomOutOfRange { .. })
        ));
        let m = mu(&[0.0, -2.0]);
        assert_eq!(m.value(&Subset::empty(2)), NegInf);
        assert_eq!(m.value(&Subset::singleton(2, 1)), ExtReal::Finite(-2.0));
    }

    #[test]
    fn atomic_concentration_closed_form_matches_schedule() {
        let s = space(3);
        let phi = RiskMeasure::atomic_finite(s.clone(), &[0.0, 1.0, 2.0]).unwrap();
        let a = Subset::from_indices(3, [1, 2]);
        assert_eq!(concentration(&phi, &a, &RSchedule::default()).unwrap(), ExtReal::Finite(-1.0));
        // same measure hidden behind a custom evaluator forces the r-schedule
        let inner = phi.clone();
        let opaque = RiskMeasure::custom(s, "opaque", move |g| inner.evaluate(g).unwrap());
        assert_eq!(concentration(&opaque, &a, &RSchedule::default()).unwrap(), ExtReal::Finite(-1.0));
        assert_eq!(concentration(&opaque, &Subset::full(3), &RSchedule::default()).unwrap(), ExtReal::ZERO);
        assert_eq!(concentration(&opaque, &Subset::empty(3), &RSchedule::default()).unwrap(), NegInf);
    }

    #[test]
    fn entropic_concentration_is_log_probability() {
        let law = ProbabilityVector::from_weights(&[0.25, 0.75, 0.0]).unwrap();
        let phi = RiskMeasure::entropic(space(3), law, 2).unwrap();
        let j = concentration(&phi, &Subset::singleton(3, 0), &RSchedule::default()).unwrap();
        assert!(j.approx_eq(ExtReal::Finite(0.25f64.ln() / 2.0), 1e-10), "{j}");
        // a null set has concentration -inf
        let j = concentration(&phi, &Subset::singleton(3, 2), &RSchedule::default()).unwrap();
        assert_eq!(j, NegInf);
    }

    #[test]
    fn short_schedule_reports_no_convergence() {
        let law = ProbabilityVector::from_weights(&[1e-6, 1.0 - 1e-6]).unwrap();
        let phi = RiskMeasure::entropic(space(2), law, 1).unwrap();
        let schedule = RSchedule { levels: vec![-1.0, -2.0, -4.0], tolerance: 1e-10 };
        assert!(matches!(
            concentration(&phi, &Subset::singleton(2, 0), &schedule),
            Err(MaxitiveError::NoConvergence { .. })
        ));
    }

    #[test]
    fn penalty_of_atomic_is_minus_gamma_and_round_trips() {
        let s = space(3);
        let phi = RiskMeasure::atomic_finite(s.clone(), &[0.0, 1.0, 2.0]).unwrap();
        let m = penalty_from_risk(&phi, &RSchedule::default()).unwrap();
        assert_eq!(m.atoms(), &[ExtReal::ZERO, ExtReal::Finite(-1.0), ExtReal::Finite(-2.0)]);
        let back = phi.from_penalty_of(m.clone()).unwrap();
        let again = penalty_from_risk(&back, &RSchedule::default()).unwrap();
        assert_eq!(again, m);
        assert_eq!(stored_penalty(&back), Some(&m));
    }

    #[test]
    fn finite_horizon_entropic_has_no_max_stable_penalty() {
        let phi = RiskMeasure::entropic(space(2), ProbabilityVector::uniform(2), 1).unwrap();
        assert!(matches!(penalty_from_risk(&phi, &RSchedule::default()), Err(MaxitiveError::NotMaxStable(_))));
        let rep = representation_check(&phi, 100, 1, 5.0, Mode::Auto).unwrap();
        assert!(rep.max_gap > 0.1);
    }

    #[test]
    fn penalty_stability_exhaustive_on_four_points() {
        let phi = RiskMeasure::atomic_finite(space(4), &[0.0, 0.5, 3.0, 1.0]).unwrap();
        let table = ConcentrationTable::build(&phi, &RSchedule::default(), Mode::Auto).unwrap();
        let rep = check_penalty_maxstability(&table, 0, 0, Mode::Auto).unwrap();
        assert!(rep.exhaustive);
        assert_eq!(rep.pairs_checked, 256);
        assert_eq!(rep.max_violation, 0.0);
        let inv = table.check_invariants().unwrap();
        assert!(inv.empty_is_neg_inf);
        assert_eq!(inv.full_value, ExtReal::ZERO);
        assert_eq!(inv.worst_monotonicity, 0.0);
    }

    #[test]
    fn complementary_sets_force_a_zero_atom() {
        let phi = RiskMeasure::atomic_finite(space(3), &[2.0, 0.7, 1.0]).unwrap();
        let table = ConcentrationTable::build(&phi, &RSchedule::default(), Mode::Auto).unwrap();
        for mask in 0..8u64 {
            let a = Subset::from_mask(3, mask);
            let ja = table.get(&a).unwrap();
            let jc = table.get(&a.complement()).unwrap();
            assert_eq!(ja.max(jc), ExtReal::ZERO);
        }
    }

    #[test]
    fn broken_table_is_caught() {
        // J_{0} = J_{1} = -1 but J_{0,1} = 0 on a 2-point space
        let values = vec![NegInf, ExtReal::Finite(-1.0), ExtReal::Finite(-1.0), ExtReal::ZERO];
        let table = ConcentrationTable::from_values(2, values).unwrap();
        let rep = check_penalty_maxstability(&table, 0, 0, Mode::Sequential).unwrap();
        assert_eq!(rep.max_violation, 1.0);
        assert_eq!(rep.witness, Some((1, 2)));
    }
}
