//! Loss exponents `w_n` and their generalized inverses.
//!
//! Every kind is a horizon-scaled base exponent, `w_n(x) = n * w(x)`, so that
//! `w_n^{-1}(y) = w^{-1}(y / n)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ext::{ExtReal, NegInf, PosInf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("power exponent must be positive and finite, got {0}")]
    InvalidPower(f64),
    #[error("step table needs exactly one more level than thresholds ({thresholds} thresholds, {levels} levels)")]
    TableShape { thresholds: usize, levels: usize },
    #[error("step table thresholds must be strictly increasing and finite")]
    TableThresholds,
    #[error("step table levels must be non-decreasing and never -inf")]
    TableLevels,
    #[error("step table must satisfy w(0) = 0, found {0}")]
    TableNotZeroAtOrigin(ExtReal),
    #[error("transform is not an increasing bijection with v(0) = 0: {0}")]
    NotABijection(String),
}

/// Increasing bijection `v` of the real line with `v(0) = 0`.
#[derive(Clone)]
pub enum Bijection {
    Identity,
    /// `v(y) = sgn(y) |y|^q`.
    SignedPower { q: f64 },
    Custom {
        name: String,
        forward: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        inverse: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Bijection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bijection::Identity => f.write_str("Identity"),
            Bijection::SignedPower { q } => write!(f, "SignedPower {{ q: {q} }}"),
            Bijection::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Bijection {
    pub fn apply(&self, y: f64) -> f64 {
        match self {
            Bijection::Identity => y,
            Bijection::SignedPower { q } => signed_pow(y, *q),
            Bijection::Custom { forward, .. } => forward(y),
        }
    }

    pub fn invert(&self, x: f64) -> f64 {
        match self {
            Bijection::Identity => x,
            Bijection::SignedPower { q } => signed_pow(x, 1.0 / q),
            Bijection::Custom { inverse, .. } => inverse(x),
        }
    }

    /// Extended by `v(+inf) = +inf`, `v(-inf) = -inf`.
    pub fn apply_ext(&self, y: ExtReal) -> ExtReal {
        match y {
            ExtReal::Finite(v) => ExtReal::from_f64(self.apply(v)),
            inf => inf,
        }
    }

    /// Checks the bijection axioms: `v(0) = 0`, strict increase, inverse
    /// consistency, and unboundedness in both directions. Custom transforms
    /// are probed on a logarithmic grid; named ones are checked symbolically.
    pub fn validate(&self) -> Result<(), LossError> {
        match self {
            Bijection::Identity => Ok(()),
            Bijection::SignedPower { q } => {
                if q.is_finite() && *q > 0.0 {
                    Ok(())
                } else {
                    Err(LossError::NotABijection(format!("signed power with q = {q}")))
                }
            }
            Bijection::Custom { name, .. } => {
                if self.apply(0.0).abs() > 1e-12 {
                    return Err(LossError::NotABijection(format!("{name}: v(0) = {}", self.apply(0.0))));
                }
                let mut grid: Vec<f64> = (-40..=40).map(|k| 2f64.powf(k as f64 / 2.0)).collect();
                grid.extend(grid.clone().iter().map(|y| -y));
                grid.push(0.0);
                grid.sort_by(f64::total_cmp);
                for w in grid.windows(2) {
                    if !(self.apply(w[1]) > self.apply(w[0])) {
                        return Err(LossError::NotABijection(format!("{name}: not increasing on [{}, {}]", w[0], w[1])));
                    }
                }
                for &y in &grid {
                    let back = self.invert(self.apply(y));
                    if (back - y).abs() > 1e-8 * (1.0 + y.abs()) {
                        return Err(LossError::NotABijection(format!("{name}: inverse mismatch at {y}")));
                    }
                }
                let big = 2f64.powi(20);
                if self.apply(big) < 1e3 || self.apply(-big) > -1e3 {
                    return Err(LossError::NotABijection(format!("{name}: bounded range")));
                }
                Ok(())
            }
        }
    }
}

fn signed_pow(x: f64, p: f64) -> f64 {
    x.signum() * x.abs().powf(p)
}

/// Left-continuous non-decreasing step function: `w(x) = levels[i]` where `i`
/// counts the thresholds strictly below `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepTable {
    thresholds: Vec<f64>,
    levels: Vec<ExtReal>,
}

impl StepTable {
    pub fn new(thresholds: Vec<f64>, levels: Vec<ExtReal>) -> Result<Self, LossError> {
        if levels.len() != thresholds.len() + 1 {
            return Err(LossError::TableShape { thresholds: thresholds.len(), levels: levels.len() });
        }
        if thresholds.iter().any(|t| !t.is_finite()) || thresholds.windows(2).any(|w| w[1] <= w[0]) {
            return Err(LossError::TableThresholds);
        }
        if levels.contains(&NegInf) || levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(LossError::TableLevels);
        }
        let table = Self { thresholds, levels };
        let at_zero = table.eval(0.0);
        if at_zero != ExtReal::ZERO {
            return Err(LossError::TableNotZeroAtOrigin(at_zero));
        }
        Ok(table)
    }

    pub fn eval(&self, x: f64) -> ExtReal {
        let i = self.thresholds.partition_point(|&t| t < x);
        self.levels[i]
    }

    /// `sup{x : w(x) <= y}` by binary search over the monotone levels.
    pub fn inverse(&self, y: ExtReal) -> ExtReal {
        let count = self.levels.partition_point(|&l| l <= y);
        if count == 0 {
            NegInf
        } else if count == self.levels.len() {
            PosInf
        } else {
            ExtReal::Finite(self.thresholds[count - 1])
        }
    }
}

/// The exponent sequence of a loss `l_n = exp(w_n)`.
#[derive(Debug, Clone)]
pub enum LossExponent {
    /// `w_n(x) = n x`: the entropic case.
    LinearScaled,
    /// `w_n(x) = n sgn(x) |x|^p`.
    PowerScaled { p: f64 },
    /// `w_n(x) = n v^{-1}(x)` for an increasing bijection `v`.
    TransformScaled { v: Bijection },
    /// `w_n(x) = n * table(x)`. The shift condition on the inverses cannot be
    /// certified for tables; [`LossExponent::is_certified`] reports false.
    CustomTable(StepTable),
}

impl LossExponent {
    pub fn power(p: f64) -> Result<Self, LossError> {
        if p.is_finite() && p > 0.0 {
            Ok(LossExponent::PowerScaled { p })
        } else {
            Err(LossError::InvalidPower(p))
        }
    }

    pub fn transform(v: Bijection) -> Result<Self, LossError> {
        v.validate()?;
        Ok(LossExponent::TransformScaled { v })
    }

    /// Named kinds satisfy the inverse-shift condition; tables are accepted
    /// with a warning only.
    pub fn is_certified(&self) -> bool {
        !matches!(self, LossExponent::CustomTable(_))
    }

    pub fn name(&self) -> String {
        match self {
            LossExponent::LinearScaled => "linear_scaled".into(),
            LossExponent::PowerScaled { p } => format!("power_scaled(p={p})"),
            LossExponent::TransformScaled { v } => format!("transform_scaled({v:?})"),
            LossExponent::CustomTable(_) => "custom_table".into(),
        }
    }

    /// `w_n(x)`.
    pub fn eval(&self, n: f64, x: f64) -> ExtReal {
        let base = match self {
            LossExponent::LinearScaled => ExtReal::Finite(x),
            LossExponent::PowerScaled { p } => ExtReal::Finite(signed_pow(x, *p)),
            LossExponent::TransformScaled { v } => ExtReal::Finite(v.invert(x)),
            LossExponent::CustomTable(t) => t.eval(x),
        };
        match base {
            ExtReal::Finite(b) => ExtReal::from_f64(n * b),
            inf => inf,
        }
    }

    /// Generalized inverse `w_n^{-1}(y) = sup{x : w_n(x) <= y}`, with
    /// `sup(empty) = -inf`.
    pub fn inverse(&self, n: f64, y: ExtReal) -> ExtReal {
        if let LossExponent::CustomTable(t) = self {
            return match y {
                ExtReal::Finite(v) => t.inverse(ExtReal::Finite(v / n)),
                inf => t.inverse(inf),
            };
        }
        let scaled = match y {
            NegInf => return NegInf,
            PosInf => return PosInf,
            ExtReal::Finite(v) => v / n,
        };
        ExtReal::from_f64(match self {
            LossExponent::LinearScaled => scaled,
            LossExponent::PowerScaled { p } => signed_pow(scaled, 1.0 / p),
            LossExponent::TransformScaled { v } => v.apply(scaled),
            LossExponent::CustomTable(_) => unreachable!(),
        })
    }
}

/// JSON form of a loss exponent, e.g. `{"kind": "power_scaled", "p": 2}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LossSpec {
    LinearScaled,
    PowerScaled { p: f64 },
    TransformScaled { v: BijectionSpec },
    CustomTable { thresholds: Vec<f64>, levels: Vec<ExtReal> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BijectionSpec {
    Identity,
    SignedPower { q: f64 },
}

impl TryFrom<LossSpec> for LossExponent {
    type Error = LossError;

    fn try_from(spec: LossSpec) -> Result<Self, LossError> {
        match spec {
            LossSpec::LinearScaled => Ok(LossExponent::LinearScaled),
            LossSpec::PowerScaled { p } => LossExponent::power(p),
            LossSpec::TransformScaled { v } => LossExponent::transform(match v {
                BijectionSpec::Identity => Bijection::Identity,
                BijectionSpec::SignedPower { q } => Bijection::SignedPower { q },
            }),
            LossSpec::CustomTable { thresholds, levels } => {
                Ok(LossExponent::CustomTable(StepTable::new(thresholds, levels)?))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_inverses_at_unit_horizon() {
        let lin = LossExponent::LinearScaled;
        assert_eq!(lin.inverse(1.0, ExtReal::Finite(3.0)), ExtReal::Finite(3.0));
        let sq = LossExponent::power(2.0).unwrap();
        assert_eq!(sq.inverse(1.0, ExtReal::Finite(4.0)), ExtReal::Finite(2.0));
        assert_eq!(sq.inverse(1.0, ExtReal::Finite(-9.0)), ExtReal::Finite(-3.0));
        assert_eq!(sq.inverse(1.0, PosInf), PosInf);
    }

    #[test]
    fn empty_sup_is_negative_infinity() {
        let step = StepTable::new(vec![0.0], vec![ExtReal::ZERO, PosInf]).unwrap();
        let w = LossExponent::CustomTable(step);
        assert_eq!(w.inverse(1.0, ExtReal::Finite(-1.0)), NegInf);
        assert_eq!(w.inverse(1.0, ExtReal::Finite(0.0)), ExtReal::Finite(0.0));
        assert_eq!(w.inverse(1.0, ExtReal::Finite(5.0)), ExtReal::Finite(0.0));
        assert_eq!(w.eval(1.0, 0.0), ExtReal::ZERO);
        assert_eq!(w.eval(3.0, 1e-9), PosInf);
        assert!(!w.is_certified());
    }

    #[test]
    fn table_requires_zero_at_origin() {
        let err = StepTable::new(vec![-1.0], vec![ExtReal::Finite(-1.0), ExtReal::Finite(1.0)]).unwrap_err();
        assert!(matches!(err, LossError::TableNotZeroAtOrigin(_)));
    }

    #[test]
    fn horizon_scaling_of_inverse() {
        let w = LossExponent::power(0.5).unwrap();
        // w_n(x) = n sgn(x)|x|^{1/2}, so w_n^{-1}(y) = (y/n)^2
        let y = w.eval(16.0, 0.25).finite().unwrap();
        assert!((y - 8.0).abs() < 1e-12);
        assert!((w.inverse(16.0, ExtReal::Finite(8.0)).finite().unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn custom_bijection_validation() {
        let cube = Bijection::Custom {
            name: "cube".into(),
            forward: Arc::new(|y: f64| y * y * y),
            inverse: Arc::new(|x: f64| x.cbrt()),
        };
        assert!(cube.validate().is_ok());
        let bounded = Bijection::Custom {
            name: "tanh".into(),
            forward: Arc::new(|y: f64| y.tanh()),
            inverse: Arc::new(|x: f64| x.atanh()),
        };
        assert!(matches!(bounded.validate(), Err(LossError::NotABijection(_))));
    }

    #[test]
    fn json_specs_parse() {
        let w: LossSpec = serde_json::from_str(r#"{"kind": "power_scaled", "p": 2}"#).unwrap();
        assert_eq!(w, LossSpec::PowerScaled { p: 2.0 });
        let w: LossSpec =
            serde_json::from_str(r#"{"kind": "custom_table", "thresholds": [0], "levels": [0, "inf"]}"#).unwrap();
        assert!(LossExponent::try_from(w).is_ok());
        assert!(serde_json::from_str::<LossSpec>(r#"{"kind": "power_scaled", "p": 2, "q": 1}"#).is_err());
    }
}
