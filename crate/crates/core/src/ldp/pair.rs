//! Sandwich `-inf_{int A} I <= J_lower(A) <= J_upper(A) <= -inf_{cl A} I`
//! for an ordered pair of risk measures, against the Laplace principle for both.

use serde::Serialize;

use super::{check_rate_len, LdpError, RateFunction};
use crate::ext::ExtReal;
use crate::maxitive::{ConcentrationTable, RSchedule};
use crate::par::{self, Mode};
use crate::risk::RiskMeasure;
use crate::space::{BoundedFunction, Subset};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairReport {
    pub tolerance: f64,
    /// Largest `lower(f) - upper(f)` over the corpus; at most the tolerance.
    pub order_gap: f64,
    /// Largest `-inf_{int A} I - J_lower(A)`.
    pub lower_bound_gap: ExtReal,
    /// Largest `J_lower(A) - J_upper(A)`.
    pub middle_gap: ExtReal,
    /// Largest `J_upper(A) + inf_{cl A} I`.
    pub upper_bound_gap: ExtReal,
    pub lower_bound_holds: bool,
    pub upper_bound_holds: bool,
    pub sandwich_holds: bool,
    pub sandwich_witness: Option<Vec<String>>,
    /// Largest `|upper(f) - sup_x { f(x) - I(x) }|` over the corpus.
    pub upper_lp_gap: f64,
    /// Largest `|lower(f) - sup_x { f(x) - I(x) }|` over the corpus.
    pub lower_lp_gap: f64,
    /// Both measures equal the dual value on every corpus function.
    pub agreement_holds: bool,
    pub agreement_witness: Option<Vec<f64>>,
    /// The sandwich and the agreement verdicts coincide.
    pub consistent: bool,
}

fn worst(slot: &mut (ExtReal, Option<u64>), gap: f64, mask: u64) {
    let g = ExtReal::from_f64(gap);
    if g > slot.0 {
        *slot = (g, Some(mask));
    }
}

#[allow(clippy::too_many_arguments)]
pub fn pair_sandwich_check(
    upper: &RiskMeasure,
    lower: &RiskMeasure,
    rate: &RateFunction,
    corpus: &[BoundedFunction],
    schedule: &RSchedule,
    tol: f64,
    mode: Mode,
) -> Result<PairReport, LdpError> {
    if corpus.is_empty() {
        return Err(LdpError::EmptyCorpus);
    }
    let space = upper.space();
    check_rate_len(space, rate)?;
    let values = par::map_slice(mode, corpus, |f| -> Result<(f64, f64), LdpError> {
        Ok((upper.evaluate(f)?, lower.evaluate(f)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut order_gap = f64::NEG_INFINITY;
    let mut order_witness = None;
    for (f, &(u, l)) in corpus.iter().zip(&values) {
        if l - u > order_gap {
            order_gap = l - u;
            order_witness = Some(f);
        }
    }
    if order_gap > tol {
        return Err(LdpError::OrderViolation {
            gap: order_gap,
            witness: order_witness.map(|f| f.values().to_vec()).unwrap_or_default(),
        });
    }

    let k = space.len();
    let upper_table = ConcentrationTable::build(upper, schedule, mode)?;
    let lower_table = ConcentrationTable::build(lower, schedule, mode)?;
    let rows = par::map_range(mode, 1usize << k, |mask| -> Result<_, LdpError> {
        let a = Subset::from_mask(k, mask as u64);
        let (int, cl) = space.interior_closure(&a);
        Ok((mask as u64, -rate.inf_over(&int), lower_table.get(&a)?, upper_table.get(&a)?, -rate.inf_over(&cl)))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let floor = ExtReal::from_f64(f64::NEG_INFINITY);
    let (mut lo, mut mid, mut hi) = ((floor, None), (floor, None), (floor, None));
    for &(mask, lb, jl, ju, ub) in &rows {
        worst(&mut lo, lb.gap(jl), mask);
        worst(&mut mid, jl.gap(ju), mask);
        worst(&mut hi, ju.gap(ub), mask);
    }
    let limit = ExtReal::Finite(tol);
    let lower_bound_holds = lo.0 <= limit;
    let upper_bound_holds = hi.0 <= limit && mid.0 <= limit;
    let sandwich_holds = lower_bound_holds && upper_bound_holds;
    let sandwich_witness = [lo, mid, hi]
        .iter()
        .filter(|s| s.0 > limit)
        .max_by(|a, b| a.0.cmp(&b.0))
        .and_then(|s| s.1)
        .map(|m| space.subset_labels(&Subset::from_mask(k, m)));

    let mut upper_lp_gap = 0.0f64;
    let mut lower_lp_gap = 0.0f64;
    let mut agreement_witness = None;
    let mut worst_any = 0.0f64;
    for (f, &(u, l)) in corpus.iter().zip(&values) {
        let dual = rate.dual_value(f);
        let (gu, gl) = ((u - dual).abs(), (l - dual).abs());
        upper_lp_gap = upper_lp_gap.max(gu);
        lower_lp_gap = lower_lp_gap.max(gl);
        if gu.max(gl) > worst_any {
            worst_any = gu.max(gl);
            agreement_witness = Some(f.values().to_vec());
        }
    }
    let agreement_holds = worst_any <= tol;
    Ok(PairReport {
        tolerance: tol,
        order_gap,
        lower_bound_gap: lo.0,
        middle_gap: mid.0,
        upper_bound_gap: hi.0,
        lower_bound_holds,
        upper_bound_holds,
        sandwich_holds,
        sandwich_witness,
        upper_lp_gap,
        lower_lp_gap,
        agreement_holds,
        agreement_witness: if agreement_holds { None } else { agreement_witness },
        consistent: sandwich_holds == agreement_holds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldp::two_level_corpus;
    use crate::space::FiniteMetricSpace;
    use std::sync::Arc;

    fn atomic(gamma: &[f64]) -> RiskMeasure {
        let s = Arc::new(FiniteMetricSpace::discrete(gamma.len()).unwrap());
        RiskMeasure::atomic_finite(s, gamma).unwrap()
    }

    #[test]
    fn equal_atomic_pair_is_sandwiched() {
        let gamma = [0.0, 1.0, 2.5, 0.5];
        let phi = atomic(&gamma);
        let rate = RateFunction::from_finite(&gamma).unwrap();
        let rep = pair_sandwich_check(&phi, &phi, &rate, &two_level_corpus(4), &RSchedule::default(), 1e-12, Mode::Auto)
            .unwrap();
        assert!(rep.sandwich_holds && rep.agreement_holds && rep.consistent);
        assert_eq!(rep.middle_gap, ExtReal::ZERO);
    }

    #[test]
    fn shifted_rate_fails_both_directions() {
        let gamma = [0.0, 1.0, 2.5, 0.5];
        let phi = atomic(&gamma);
        let shifted: Vec<f64> = gamma.iter().map(|g| g + 0.5).collect();
        let rate = RateFunction::from_finite(&shifted).unwrap();
        let rep = pair_sandwich_check(&phi, &phi, &rate, &two_level_corpus(4), &RSchedule::default(), 1e-12, Mode::Auto)
            .unwrap();
        assert!(!rep.sandwich_holds && !rep.agreement_holds && rep.consistent);
        assert!(rep.lower_bound_holds && !rep.upper_bound_holds);
        assert!(rep.upper_bound_gap.approx_eq(ExtReal::Finite(0.5), 1e-12));
    }

    #[test]
    fn reversed_order_is_rejected() {
        let hi = atomic(&[0.0, 0.0]);
        let lo = atomic(&[0.0, 1.0]);
        let rate = RateFunction::from_finite(&[0.0, 0.0]).unwrap();
        let err = pair_sandwich_check(&lo, &hi, &rate, &two_level_corpus(2), &RSchedule::default(), 1e-12, Mode::Auto)
            .unwrap_err();
        assert!(matches!(err, LdpError::OrderViolation { gap, .. } if gap > 0.5));
    }
}
