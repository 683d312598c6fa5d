//! JSON definitions of spaces, risk measures and families.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ext::ExtReal;
use crate::families::{counterexample_naturals, counterexample_rationals, ClosedFormFamily};
use crate::ldp::{LdpError, RateFunction};
use crate::maxitive::{MaxStablePenalty, MaxitiveError};
use crate::risk::{RiskError, RiskMeasure};
use crate::shortfall::{LossError, LossExponent, LossSpec};
use crate::space::{FiniteMetricSpace, ProbabilityVector, SpaceError};

#[derive(Debug, Error)]
pub enum IoError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("malformed definition: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Risk(#[from] RiskError),
    #[error(transparent)]
    Maxitive(#[from] MaxitiveError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Ldp(#[from] LdpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SpaceSpec {
    /// `k` points at mutual distance 1.
    Discrete { k: usize },
    /// Points on the real line.
    Line {
        #[serde(default)]
        labels: Option<Vec<String>>,
        coords: Vec<f64>,
    },
    Matrix { labels: Vec<String>, dist: Vec<Vec<f64>> },
}

impl SpaceSpec {
    pub fn build(&self) -> Result<FiniteMetricSpace, SpaceError> {
        match self {
            SpaceSpec::Discrete { k } => FiniteMetricSpace::discrete(*k),
            SpaceSpec::Line { labels: Some(l), coords } => FiniteMetricSpace::line(l.clone(), coords.clone()),
            SpaceSpec::Line { labels: None, coords } => FiniteMetricSpace::line_from_coords(coords.clone()),
            SpaceSpec::Matrix { labels, dist } => FiniteMetricSpace::build(labels.clone(), dist.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureSpec {
    Atomic { gamma: Vec<ExtReal> },
    Maxitive { atoms: Vec<ExtReal> },
    Entropic { weights: Vec<f64>, horizon: u32 },
    Shortfall { weights: Vec<f64>, loss: LossSpec, horizon: u32 },
    RobustEntropic { laws: Vec<Vec<f64>>, horizon: u32 },
    MaxOf { components: Vec<MeasureSpec> },
}

impl MeasureSpec {
    pub fn build(&self, space: &Arc<FiniteMetricSpace>) -> Result<RiskMeasure, IoError> {
        let s = space.clone();
        Ok(match self {
            MeasureSpec::Atomic { gamma } => RiskMeasure::atomic(s, gamma.clone())?,
            MeasureSpec::Maxitive { atoms } => RiskMeasure::maxitive(s, MaxStablePenalty::new(atoms.clone())?)?,
            MeasureSpec::Entropic { weights, horizon } => {
                RiskMeasure::entropic(s, ProbabilityVector::from_weights(weights)?, *horizon)?
            }
            MeasureSpec::Shortfall { weights, loss, horizon } => RiskMeasure::shortfall(
                s,
                ProbabilityVector::from_weights(weights)?,
                LossExponent::try_from(loss.clone())?,
                *horizon,
            )?,
            MeasureSpec::RobustEntropic { laws, horizon } => RiskMeasure::robust_entropic(
                s,
                laws.iter().map(|w| ProbabilityVector::from_weights(w)).collect::<Result<_, _>>()?,
                *horizon,
            )?,
            MeasureSpec::MaxOf { components } => {
                RiskMeasure::max_of(components.iter().map(|c| c.build(space)).collect::<Result<_, _>>()?)?
            }
        })
    }
}

/// A risk measure on a space, optionally with a candidate rate function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskFile {
    pub space: SpaceSpec,
    pub measure: MeasureSpec,
    #[serde(default)]
    pub rate: Option<Vec<ExtReal>>,
}

#[derive(Debug, Clone)]
pub struct LoadedRisk {
    pub space: Arc<FiniteMetricSpace>,
    pub measure: RiskMeasure,
    pub rate: Option<RateFunction>,
}

impl RiskFile {
    pub fn parse(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| IoError::Read { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    pub fn build(&self) -> Result<LoadedRisk, IoError> {
        let space = Arc::new(self.space.build()?);
        let measure = self.measure.build(&space)?;
        let rate = match &self.rate {
            Some(r) if r.len() != space.len() => {
                return Err(LdpError::LengthMismatch { expected: space.len(), got: r.len() }.into())
            }
            Some(r) => Some(RateFunction::new(r.clone())?),
            None => None,
        };
        Ok(LoadedRisk { space, measure, rate })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    CounterexampleNaturals { m_max: usize },
    CounterexampleRationals { q_count: usize },
    /// `P_n(x1) = exp(-n rate)` on two points.
    TwoPoint { rate: f64 },
    /// The same law at every horizon.
    Stationary { space: SpaceSpec, weights: Vec<f64> },
}

impl FamilySpec {
    pub fn build(&self) -> Result<ClosedFormFamily, IoError> {
        Ok(match self {
            FamilySpec::CounterexampleNaturals { m_max } if *m_max < 2 => {
                return Err(IoError::Json(serde::de::Error::custom("m_max must be at least 2")))
            }
            FamilySpec::CounterexampleNaturals { m_max } => counterexample_naturals(*m_max),
            FamilySpec::CounterexampleRationals { q_count } if *q_count < 1 => {
                return Err(IoError::Json(serde::de::Error::custom("q_count must be at least 1")))
            }
            FamilySpec::CounterexampleRationals { q_count } => counterexample_rationals(*q_count).family,
            FamilySpec::TwoPoint { rate } => ClosedFormFamily::two_point(*rate),
            FamilySpec::Stationary { space, weights } => {
                ClosedFormFamily::stationary(Arc::new(space.build()?), ProbabilityVector::from_weights(weights)?)
            }
        })
    }
}
