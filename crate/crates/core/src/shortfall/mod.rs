//! Shortfall risk `inf{m : E[exp(w(Z - m))] <= 1}` and its asymptotic versions.

mod asymptotic;
mod loss;
mod shift;

pub use asymptotic::{
    asymptotic_shortfall, asymptotic_shortfall_mean, shortfall_at, shortfall_concentration, transformed_ldp_demo,
    wrate_formulas, wrate_point, TransformedConfig, TransformedLdpReport, TransformedLpRow, TransformedRateRow,
};
pub use loss::{Bijection, BijectionSpec, LossError, LossExponent, LossSpec, StepTable};
pub use shift::{check_shift_condition, default_shift_grid, ShiftReport, ShiftRow};

use thiserror::Error;

use crate::ext::ExtReal;
use crate::numeric::log_sum_exp;
use crate::space::{ProbabilityVector, SpaceError};

/// Absolute tolerance of the shortfall root-find.
pub const BISECTION_TOL: f64 = 1e-10;
pub const BISECTION_MAX_ITER: usize = 200;
const BRACKET_EXPANSIONS: usize = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShortfallError {
    #[error("no bracketing interval: {0}")]
    NoBracket(String),
    #[error("outcomes and law have different lengths ({outcomes} vs {law})")]
    LengthMismatch { outcomes: usize, law: usize },
    #[error("outcome {0} is not finite")]
    NonFiniteOutcome(f64),
    #[error("horizon must be positive, got {0}")]
    InvalidHorizon(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Loss(#[from] LossError),
}

/// A finitely supported loss `Z` with law `P(Z = outcomes[i]) = law[i]`.
#[derive(Debug, Clone)]
pub struct ShortfallProblem {
    outcomes: Vec<f64>,
    log_probs: Vec<f64>,
}

impl ShortfallProblem {
    pub fn new(outcomes: Vec<f64>, law: &ProbabilityVector) -> Result<Self, ShortfallError> {
        Self::from_log_probs(outcomes, law.log_weights().to_vec())
    }

    /// Log-probabilities need not be normalized here; callers that carry a
    /// truncated tail pass it as an extra outcome.
    pub fn from_log_probs(outcomes: Vec<f64>, log_probs: Vec<f64>) -> Result<Self, ShortfallError> {
        if outcomes.len() != log_probs.len() {
            return Err(ShortfallError::LengthMismatch { outcomes: outcomes.len(), law: log_probs.len() });
        }
        if let Some(&z) = outcomes.iter().find(|z| !z.is_finite()) {
            return Err(ShortfallError::NonFiniteOutcome(z));
        }
        // Null outcomes never contribute: exp(+inf) * 0 := 0.
        let (outcomes, log_probs) =
            outcomes.into_iter().zip(log_probs).filter(|(_, lp)| *lp > f64::NEG_INFINITY).unzip();
        Ok(Self { outcomes, log_probs })
    }

    /// `log E[exp(w_n(Z - m))]`.
    pub fn log_expected_loss(&self, loss: &LossExponent, n: f64, m: f64) -> f64 {
        let mut terms = Vec::with_capacity(self.outcomes.len());
        for (&z, &lp) in self.outcomes.iter().zip(&self.log_probs) {
            match loss.eval(n, z - m) {
                ExtReal::PosInf => return f64::INFINITY,
                ExtReal::NegInf => {}
                ExtReal::Finite(w) => terms.push(lp + w),
            }
        }
        log_sum_exp(terms)
    }

    /// Shortfall risk at horizon `n` by bisection on the monotone map
    /// `m -> E[exp(w_n(Z - m))]`.
    pub fn solve(&self, loss: &LossExponent, n: f64) -> Result<f64, ShortfallError> {
        if !(n > 0.0 && n.is_finite()) {
            return Err(ShortfallError::InvalidHorizon(n));
        }
        let (lo_z, hi_z) = self
            .outcomes
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| (lo.min(z), hi.max(z)));
        if lo_z > hi_z {
            return Err(ShortfallError::NoBracket("law has no mass".into()));
        }
        if lo_z == hi_z {
            // E[l(c - m)] <= 1  <=>  w_n(c - m) <= 0  <=>  c - m <= w_n^{-1}(0)
            return match loss.inverse(n, ExtReal::ZERO) {
                ExtReal::Finite(s) => Ok(lo_z - s),
                other => Err(ShortfallError::NoBracket(format!("w^-1(0) = {other}"))),
            };
        }
        let feasible = |m: f64| self.log_expected_loss(loss, n, m) <= 0.0;

        let mut width = 1.0f64;
        let mut hi = hi_z + 1.0;
        let mut expansions = 0;
        while !feasible(hi) {
            expansions += 1;
            if expansions > BRACKET_EXPANSIONS {
                return Err(ShortfallError::NoBracket(format!("E[l(Z - m)] > 1 up to m = {hi}")));
            }
            width *= 2.0;
            hi = hi_z + width;
        }
        width = 1.0;
        let mut lo = lo_z - 1.0;
        expansions = 0;
        while feasible(lo) {
            expansions += 1;
            if expansions > BRACKET_EXPANSIONS {
                return Err(ShortfallError::NoBracket(format!("E[l(Z - m)] <= 1 down to m = {lo}")));
            }
            width *= 2.0;
            lo = lo_z - width;
        }
        for _ in 0..BISECTION_MAX_ITER {
            if hi - lo <= BISECTION_TOL {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }
}

/// Shortfall risk of `outcomes` under `law` with loss `exp(w_n)`.
pub fn shortfall_risk(
    outcomes: &[f64],
    law: &ProbabilityVector,
    loss: &LossExponent,
    n: f64,
) -> Result<f64, ShortfallError> {
    ShortfallProblem::new(outcomes.to_vec(), law)?.solve(loss, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn entropic_oracle(z: &[f64], p: &[f64], n: f64) -> f64 {
        // direct sum, no log-sum-exp: valid for the small magnitudes used here
        (z.iter().zip(p).map(|(z, p)| p * (n * z).exp()).sum::<f64>()).ln() / n
    }

    #[test]
    fn constant_loss_returns_the_constant() {
        let law = ProbabilityVector::uniform(3);
        for loss in [LossExponent::LinearScaled, LossExponent::power(2.0).unwrap(), LossExponent::power(0.5).unwrap()] {
            let v = shortfall_risk(&[1.7, 1.7, 1.7], &law, &loss, 3.0).unwrap();
            assert_eq!(v, 1.7);
        }
    }

    #[test]
    fn linear_loss_fair_coin() {
        let law = ProbabilityVector::uniform(2);
        let v = shortfall_risk(&[0.0, 1.0], &law, &LossExponent::LinearScaled, 1.0).unwrap();
        let expected = ((1.0 + std::f64::consts::E) / 2.0).ln();
        assert!((expected - 0.62011).abs() < 1e-5);
        assert!((v - expected).abs() < 1e-8, "{v} vs {expected}");
    }

    #[test]
    fn linear_loss_matches_direct_entropic_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(2..6);
            let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
            let s: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= s);
            let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let law = ProbabilityVector::from_log_weights(w.iter().map(|x| x.ln()).collect()).unwrap();
            for n in [1.0, 4.0, 16.0] {
                let v = shortfall_risk(&z, &law, &LossExponent::LinearScaled, n).unwrap();
                assert!((v - entropic_oracle(&z, &w, n)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn monotone_in_the_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let loss = LossExponent::power(2.0).unwrap();
        for _ in 0..1000 {
            let k = rng.gen_range(1..5);
            let law = ProbabilityVector::uniform(k);
            let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let z2: Vec<f64> = z.iter().map(|v| v + rng.gen_range(0.0..1.0)).collect();
            let a = shortfall_risk(&z, &law, &loss, 2.0).unwrap();
            let b = shortfall_risk(&z2, &law, &loss, 2.0).unwrap();
            assert!(b >= a - 2.0 * BISECTION_TOL, "{a} > {b}");
        }
    }

    #[test]
    fn infinite_exponent_segments_are_absorbing() {
        // w = 0 on (-inf, 0], +inf on (0, inf): shortfall is the essential supremum
        let step = StepTable::new(vec![0.0], vec![ExtReal::ZERO, ExtReal::PosInf]).unwrap();
        let loss = LossExponent::CustomTable(step);
        let law = ProbabilityVector::from_weights(&[0.2, 0.5, 0.3]).unwrap();
        let v = shortfall_risk(&[-1.0, 0.5, 2.0], &law, &loss, 1.0).unwrap();
        assert!((v - 2.0).abs() <= BISECTION_TOL);
        // a null outcome is ignored even though its loss is infinite
        let law = ProbabilityVector::from_weights(&[0.5, 0.5, 0.0]).unwrap();
        let v = shortfall_risk(&[-1.0, 0.5, 9.0], &law, &loss, 1.0).unwrap();
        assert!((v - 0.5).abs() <= BISECTION_TOL);
    }

    #[test]
    fn flat_loss_has_no_bracket() {
        let step = StepTable::new(vec![-1.0], vec![ExtReal::Finite(-1.0), ExtReal::ZERO]).unwrap();
        let loss = LossExponent::CustomTable(step);
        let law = ProbabilityVector::uniform(2);
        assert!(matches!(shortfall_risk(&[0.0, 1.0], &law, &loss, 1.0), Err(ShortfallError::NoBracket(_))));
    }
}
