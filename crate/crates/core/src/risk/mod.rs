//! Monetary risk measures on a finite metric space.

mod checks;

pub use checks::{
    check_convexity, check_lipschitz, check_max_stability, check_monetary_axioms, random_function, trial_rng,
    AxiomReport, CheckConfig, ConvexityReport, MaxStabilityReport, Violation, Witness,
};

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::ext::{ExtReal, NegInf, PosInf};
use crate::maxitive::{maxitive_integral_levels, MaxStablePenalty};
use crate::numeric::log_sum_exp;
use crate::shortfall::{LossExponent, ShortfallError, ShortfallProblem};
use crate::space::{BoundedFunction, FiniteMetricSpace, ProbabilityVector, SpaceError};

/// Tolerance for checks on exact max-arithmetic kinds.
pub const EXACT_TOL: f64 = 1e-12;
/// Tolerance for kinds evaluated through `exp`/`log` or root-finding.
pub const FLOAT_TOL: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RiskError {
    #[error("function has {got} values but the space has {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("no law available at horizon {0}")]
    HorizonMissing(u32),
    #[error("horizon must be positive")]
    ZeroHorizon,
    #[error("atomic penalty gamma must be > -inf everywhere and finite somewhere")]
    InvalidGamma,
    #[error("a family of laws must be non-empty")]
    EmptyFamily,
    #[error("components live on different spaces")]
    SpaceMismatch,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Shortfall(#[from] ShortfallError),
}

/// User-supplied evaluator `f -> phi(f)`.
#[derive(Clone)]
pub struct CustomEvaluator {
    pub name: String,
    eval: Arc<dyn Fn(&BoundedFunction) -> f64 + Send + Sync>,
}

impl fmt::Debug for CustomEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CustomEvaluator({})", self.name)
    }
}

#[derive(Debug, Clone)]
pub enum RiskKind {
    /// `phi(f) = max_x { f(x) - gamma(x) }` with `min gamma = 0`.
    Atomic { gamma: Vec<ExtReal> },
    /// `phi(f) = int^max f dmu`, evaluated through the level-set route.
    Maxitive { penalty: MaxStablePenalty },
    /// `phi(f) = (1/n) log E[exp(n f)]`.
    Entropic { law: ProbabilityVector, horizon: u32 },
    /// Shortfall risk of `f` under loss `exp(w_n)`.
    Shortfall { law: ProbabilityVector, loss: LossExponent, horizon: u32 },
    /// Maximum of the entropic values over an explicit family of laws.
    RobustEntropic { laws: Vec<ProbabilityVector>, horizon: u32 },
    /// Pointwise maximum of risk measures on the same space.
    MaxOf(Vec<RiskMeasure>),
    Custom(CustomEvaluator),
}

#[derive(Debug, Clone)]
pub struct RiskMeasure {
    space: Arc<FiniteMetricSpace>,
    kind: RiskKind,
}

impl RiskMeasure {
    /// Atomic measure; `gamma` is shifted so that its minimum is zero.
    pub fn atomic(space: Arc<FiniteMetricSpace>, gamma: Vec<ExtReal>) -> Result<Self, RiskError> {
        check_len(&space, gamma.len())?;
        if gamma.contains(&NegInf) {
            return Err(RiskError::InvalidGamma);
        }
        let min = gamma.iter().copied().min().ok_or(RiskError::InvalidGamma)?;
        let shift = min.finite().ok_or(RiskError::InvalidGamma)?;
        let gamma = gamma.into_iter().map(|g| g - shift).collect();
        Ok(Self { space, kind: RiskKind::Atomic { gamma } })
    }

    pub fn atomic_finite(space: Arc<FiniteMetricSpace>, gamma: &[f64]) -> Result<Self, RiskError> {
        Self::atomic(space, gamma.iter().map(|&g| ExtReal::from_f64(g)).collect())
    }

    pub fn maxitive(space: Arc<FiniteMetricSpace>, penalty: MaxStablePenalty) -> Result<Self, RiskError> {
        check_len(&space, penalty.len())?;
        Ok(Self { space, kind: RiskKind::Maxitive { penalty } })
    }

    pub fn entropic(space: Arc<FiniteMetricSpace>, law: ProbabilityVector, horizon: u32) -> Result<Self, RiskError> {
        check_len(&space, law.len())?;
        if horizon == 0 {
            return Err(RiskError::ZeroHorizon);
        }
        Ok(Self { space, kind: RiskKind::Entropic { law, horizon } })
    }

    /// Entropic measure at horizon `n`, looking the law up in a table of horizons.
    pub fn entropic_from_table(
        space: Arc<FiniteMetricSpace>,
        table: &BTreeMap<u32, ProbabilityVector>,
        horizon: u32,
    ) -> Result<Self, RiskError> {
        let law = table.get(&horizon).ok_or(RiskError::HorizonMissing(horizon))?.clone();
        Self::entropic(space, law, horizon)
    }

    pub fn shortfall(
        space: Arc<FiniteMetricSpace>,
        law: ProbabilityVector,
        loss: LossExponent,
        horizon: u32,
    ) -> Result<Self, RiskError> {
        check_len(&space, law.len())?;
        if horizon == 0 {
            return Err(RiskError::ZeroHorizon);
        }
        Ok(Self { space, kind: RiskKind::Shortfall { law, loss, horizon } })
    }

    pub fn robust_entropic(
        space: Arc<FiniteMetricSpace>,
        laws: Vec<ProbabilityVector>,
        horizon: u32,
    ) -> Result<Self, RiskError> {
        if laws.is_empty() {
            return Err(RiskError::EmptyFamily);
        }
        for law in &laws {
            check_len(&space, law.len())?;
        }
        if horizon == 0 {
            return Err(RiskError::ZeroHorizon);
        }
        Ok(Self { space, kind: RiskKind::RobustEntropic { laws, horizon } })
    }

    pub fn max_of(components: Vec<RiskMeasure>) -> Result<Self, RiskError> {
        let first = components.first().ok_or(RiskError::EmptyFamily)?;
        let space = first.space.clone();
        if components.iter().any(|c| *c.space != *space) {
            return Err(RiskError::SpaceMismatch);
        }
        Ok(Self { space, kind: RiskKind::MaxOf(components) })
    }

    pub fn custom(
        space: Arc<FiniteMetricSpace>,
        name: impl Into<String>,
        eval: impl Fn(&BoundedFunction) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { space, kind: RiskKind::Custom(CustomEvaluator { name: name.into(), eval: Arc::new(eval) }) }
    }

    pub fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    pub fn kind(&self) -> &RiskKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            RiskKind::Atomic { .. } => "atomic",
            RiskKind::Maxitive { .. } => "maxitive",
            RiskKind::Entropic { .. } => "entropic",
            RiskKind::Shortfall { .. } => "shortfall",
            RiskKind::RobustEntropic { .. } => "robust_entropic",
            RiskKind::MaxOf(_) => "max_of",
            RiskKind::Custom(_) => "custom",
        }
    }

    /// Check tolerance: exact for pure max-arithmetic, loose otherwise.
    pub fn tolerance(&self) -> f64 {
        match &self.kind {
            RiskKind::Atomic { .. } | RiskKind::Maxitive { .. } => EXACT_TOL,
            RiskKind::MaxOf(cs) => cs.iter().map(|c| c.tolerance()).fold(EXACT_TOL, f64::max),
            _ => FLOAT_TOL,
        }
    }

    /// Whether the kind is max-stable by construction.
    pub fn is_structurally_max_stable(&self) -> bool {
        match &self.kind {
            RiskKind::Atomic { .. } | RiskKind::Maxitive { .. } => true,
            RiskKind::MaxOf(cs) => cs.iter().all(|c| c.is_structurally_max_stable()),
            _ => false,
        }
    }

    /// Closed-form penalty atoms `J_{x} = -gamma(x)` for max-arithmetic kinds.
    pub fn closed_form_atoms(&self) -> Option<Vec<ExtReal>> {
        match &self.kind {
            RiskKind::Atomic { gamma } => Some(gamma.iter().map(|&g| -g).collect()),
            RiskKind::Maxitive { penalty } => Some(penalty.atoms().to_vec()),
            RiskKind::MaxOf(cs) => {
                let mut acc = vec![NegInf; self.space.len()];
                for c in cs {
                    for (a, b) in acc.iter_mut().zip(c.closed_form_atoms()?) {
                        *a = (*a).max(b);
                    }
                }
                Some(acc)
            }
            _ => None,
        }
    }

    pub fn evaluate(&self, f: &BoundedFunction) -> Result<f64, RiskError> {
        check_len(&self.space, f.len())?;
        match &self.kind {
            RiskKind::Atomic { gamma } => Ok(atomic_value(f, gamma)),
            RiskKind::Maxitive { penalty } => Ok(maxitive_integral_levels(f, penalty)),
            RiskKind::Entropic { law, horizon } => Ok(entropic_value(f, law, *horizon)),
            RiskKind::Shortfall { law, loss, horizon } => {
                Ok(ShortfallProblem::new(f.values().to_vec(), law)?.solve(loss, *horizon as f64)?)
            }
            RiskKind::RobustEntropic { laws, horizon } => {
                Ok(laws.iter().map(|law| entropic_value(f, law, *horizon)).fold(f64::NEG_INFINITY, f64::max))
            }
            RiskKind::MaxOf(cs) => {
                let mut best = f64::NEG_INFINITY;
                for c in cs {
                    best = best.max(c.evaluate(f)?);
                }
                Ok(best)
            }
            RiskKind::Custom(c) => Ok((c.eval)(f)),
        }
    }

    /// `phi(f) <= 0` together with the value.
    pub fn acceptance(&self, f: &BoundedFunction) -> Result<AcceptanceVerdict, RiskError> {
        let value = self.evaluate(f)?;
        Ok(AcceptanceVerdict { accepted: value <= self.tolerance(), value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AcceptanceVerdict {
    pub accepted: bool,
    pub value: f64,
}

fn check_len(space: &FiniteMetricSpace, got: usize) -> Result<(), RiskError> {
    if space.len() == got {
        Ok(())
    } else {
        Err(RiskError::LengthMismatch { expected: space.len(), got })
    }
}

fn atomic_value(f: &BoundedFunction, gamma: &[ExtReal]) -> f64 {
    f.values()
        .iter()
        .zip(gamma)
        .filter_map(|(&v, &g)| match g {
            PosInf => None,
            g => Some(v - g.to_f64()),
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `(1/n) log sum_x exp(n f(x)) P(x)` in log-sum-exp form.
pub fn entropic_value(f: &BoundedFunction, law: &ProbabilityVector, horizon: u32) -> f64 {
    let n = horizon as f64;
    let terms: Vec<f64> = f.values().iter().zip(law.log_weights()).map(|(v, lp)| n * v + lp).collect();
    log_sum_exp(terms) / n
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(k: usize) -> Arc<FiniteMetricSpace> {
        Arc::new(FiniteMetricSpace::discrete(k).unwrap())
    }

    fn f(v: &[f64]) -> BoundedFunction {
        BoundedFunction::new(v.to_vec()).unwrap()
    }

    #[test]
    fn atomic_with_zero_penalty_is_max() {
        let phi = RiskMeasure::atomic_finite(space(3), &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(phi.evaluate(&BoundedFunction::constant(3, 2.5)).unwrap(), 2.5);
    }

    #[test]
    fn atomic_example_value() {
        let phi = RiskMeasure::atomic_finite(space(3), &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(phi.evaluate(&f(&[0.0, 3.0, 1.0])).unwrap(), 2.0);
    }

    #[test]
    fn atomic_gamma_is_normalized() {
        let phi = RiskMeasure::atomic_finite(space(2), &[3.0, 5.0]).unwrap();
        assert_eq!(phi.evaluate(&BoundedFunction::zero(2)).unwrap(), 0.0);
        assert!(matches!(
            RiskMeasure::atomic(space(2), vec![PosInf, PosInf]),
            Err(RiskError::InvalidGamma)
        ));
        assert!(RiskMeasure::atomic(space(2), vec![ExtReal::ZERO, PosInf]).is_ok());
    }

    #[test]
    fn entropic_is_normalized() {
        let phi = RiskMeasure::entropic(space(2), ProbabilityVector::uniform(2), 1).unwrap();
        assert_eq!(phi.evaluate(&BoundedFunction::zero(2)).unwrap(), 0.0);
    }

    #[test]
    fn entropic_horizon_lookup() {
        let mut table = BTreeMap::new();
        table.insert(4, ProbabilityVector::uniform(2));
        assert!(RiskMeasure::entropic_from_table(space(2), &table, 4).is_ok());
        assert_eq!(
            RiskMeasure::entropic_from_table(space(2), &table, 8).unwrap_err(),
            RiskError::HorizonMissing(8)
        );
    }

    #[test]
    fn length_mismatch_is_reported() {
        let phi = RiskMeasure::atomic_finite(space(3), &[0.0, 1.0, 2.0]).unwrap();
        assert!(matches!(phi.evaluate(&f(&[1.0])), Err(RiskError::LengthMismatch { .. })));
    }

    #[test]
    fn robust_entropic_takes_the_largest_law() {
        let s = space(2);
        let p = ProbabilityVector::from_weights(&[0.9, 0.1]).unwrap();
        let q = ProbabilityVector::from_weights(&[0.1, 0.9]).unwrap();
        let phi = RiskMeasure::robust_entropic(s.clone(), vec![p.clone(), q.clone()], 2).unwrap();
        let g = f(&[0.0, 1.0]);
        let expected = entropic_value(&g, &q, 2);
        assert_eq!(phi.evaluate(&g).unwrap(), expected);
        assert!(expected > entropic_value(&g, &p, 2));
    }

    #[test]
    fn acceptance_matches_value_sign() {
        let phi = RiskMeasure::atomic_finite(space(2), &[0.0, 1.0]).unwrap();
        let v = phi.acceptance(&f(&[-0.5, 0.5])).unwrap();
        assert!(v.accepted && v.value == -0.5);
        assert!(!phi.acceptance(&f(&[0.5, 0.0])).unwrap().accepted);
    }
}
