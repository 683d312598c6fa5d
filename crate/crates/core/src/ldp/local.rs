//! Max-stability restricted to functions that are constant off a set `K`.

use rand::Rng;
use serde::Serialize;

use super::LdpError;
use crate::ext::{ExtReal, NegInf};
use crate::maxitive::{concentration, RSchedule};
use crate::par;
use crate::risk::{random_function, trial_rng, CheckConfig, RiskMeasure, Violation, Witness};
use crate::space::{BoundedFunction, Subset};

/// `f 1_K + r 1_{K^c}`.
fn restrict(f: &BoundedFunction, k: &Subset, r: f64) -> BoundedFunction {
    BoundedFunction::new((0..f.len()).map(|x| if k.contains(x) { f.get(x) } else { r }).collect())
        .expect("finite values")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalStabilityReport {
    pub compact: Vec<String>,
    pub trials: usize,
    pub tolerance: f64,
    /// Worst `|phi(F v G) - phi(F) v phi(G)|` over the restricted class.
    pub violation: Violation,
    pub passed: bool,
}

/// The max-stability check over pairs `f 1_K + r 1_{K^c}`, `g 1_K + s 1_{K^c}`.
pub fn check_local_max_stability(
    phi: &RiskMeasure,
    k: &Subset,
    cfg: &CheckConfig,
) -> Result<LocalStabilityReport, LdpError> {
    let n = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let trials = par::map_range(cfg.mode, cfg.trials, |t| -> Result<(f64, Witness), LdpError> {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let f = restrict(&random_function(&mut rng, n, cfg.bound), k, rng.gen_range(-cfg.bound..=cfg.bound));
        let g = restrict(&random_function(&mut rng, n, cfg.bound), k, rng.gen_range(-cfg.bound..=cfg.bound));
        let gap = (phi.evaluate(&f.max_with(&g))? - phi.evaluate(&f)?.max(phi.evaluate(&g)?)).abs();
        Ok((gap, Witness { f: f.values().to_vec(), g: Some(g.values().to_vec()), c: None, lambda: None }))
    });
    let mut violation = Violation { amount: 0.0, witness: None };
    for t in trials {
        let (gap, w) = t?;
        if gap > violation.amount {
            violation = Violation { amount: gap, witness: Some(w) };
        }
    }
    Ok(LocalStabilityReport {
        compact: phi.space().subset_labels(k),
        trials: cfg.trials,
        tolerance: tol,
        passed: violation.amount <= tol,
        violation,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LocalRepresentationReport {
    pub compact: Vec<String>,
    /// `I_K(x)` for the points of `K`, in order.
    pub local_rate: Vec<ExtReal>,
    pub outer_concentration: ExtReal,
    pub trials: usize,
    pub max_gap: f64,
    pub witness: Option<(Vec<f64>, f64)>,
    pub passed: bool,
}

/// Compares `phi(f 1_K + r 1_{K^c})` with
/// `max_{x in K} { f(x) - I_K(x) } v (r + J_{K^c})`, where
/// `I_K(x) = sup { h(x) - phi(h) }` over two-level functions
/// `c 1_{x} + r' 1_{x^c}` and `J_{K^c}` comes from the r-schedule.
pub fn local_representation_check(
    phi: &RiskMeasure,
    k: &Subset,
    cfg: &CheckConfig,
    schedule: &RSchedule,
) -> Result<LocalRepresentationReport, LdpError> {
    let n = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let levels: Vec<f64> = std::iter::once(0.0).chain(schedule.levels.iter().copied()).collect();
    let mut local_rate = Vec::with_capacity(k.count());
    for x in k.iter() {
        let point = Subset::singleton(n, x);
        let mut best = 0.0f64;
        for c in [-1.0, 0.0, 1.0] {
            for &r in &levels {
                best = best.max(c - phi.evaluate(&BoundedFunction::two_level(&point, c, r))?);
            }
        }
        local_rate.push(ExtReal::Finite(best));
    }
    let outer = concentration(phi, &k.complement(), schedule)?;
    let members: Vec<usize> = k.iter().collect();
    let trials = par::map_range(cfg.mode, cfg.trials, |t| -> Result<(f64, Vec<f64>, f64), LdpError> {
        let mut rng = trial_rng(cfg.seed, t as u64);
        let f = random_function(&mut rng, n, cfg.bound);
        let r = rng.gen_range(-cfg.bound..=cfg.bound);
        let lhs = phi.evaluate(&restrict(&f, k, r))?;
        let inside = members
            .iter()
            .zip(&local_rate)
            .map(|(&x, &i)| (f.get(x) - i).to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        let rhs = inside.max((r + outer).to_f64());
        Ok(((lhs - rhs).abs(), f.values().to_vec(), r))
    });
    let mut report = LocalRepresentationReport {
        compact: phi.space().subset_labels(k),
        local_rate,
        outer_concentration: if k.is_full() { NegInf } else { outer },
        trials: cfg.trials,
        max_gap: 0.0,
        witness: None,
        passed: true,
    };
    for t in trials {
        let (gap, f, r) = t?;
        if gap > report.max_gap {
            report.max_gap = gap;
            report.witness = Some((f, r));
        }
    }
    report.passed = report.max_gap <= tol;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::{FiniteMetricSpace, ProbabilityVector};
    use std::sync::Arc;

    #[test]
    fn atomic_is_locally_max_stable_and_represented() {
        let s = Arc::new(FiniteMetricSpace::discrete(5).unwrap());
        let phi = RiskMeasure::atomic_finite(s, &[0.0, 1.0, 0.5, 3.0, 2.0]).unwrap();
        let k = Subset::from_indices(5, [0, 2, 4]);
        let cfg = CheckConfig::with_trials(300);
        assert!(check_local_max_stability(&phi, &k, &cfg).unwrap().passed);
        let rep = local_representation_check(&phi, &k, &cfg, &RSchedule::default()).unwrap();
        assert!(rep.passed, "{}", rep.max_gap);
        assert_eq!(rep.local_rate, vec![ExtReal::ZERO, ExtReal::Finite(0.5), ExtReal::Finite(2.0)]);
        assert_eq!(rep.outer_concentration, ExtReal::Finite(-1.0));
    }

    #[test]
    fn entropic_fails_on_a_two_point_compact() {
        let s = Arc::new(FiniteMetricSpace::discrete(3).unwrap());
        let phi = RiskMeasure::entropic(s, ProbabilityVector::uniform(3), 1).unwrap();
        let k = Subset::from_indices(3, [0, 1]);
        let cfg = CheckConfig::with_trials(300);
        assert!(!check_local_max_stability(&phi, &k, &cfg).unwrap().passed);
        assert!(!local_representation_check(&phi, &k, &cfg, &RSchedule::default()).unwrap().passed);
    }
}
