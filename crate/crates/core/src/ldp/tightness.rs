//! Finite-horizon evidence for the tightness conditions (A) and (B).

use serde::Serialize;

use crate::ext::{ExtReal, NegInf};
use crate::families::{
    outside_concentration_estimate, rate_estimate, DistributionSequence, FamilyError, HorizonEstimate, HorizonGrid,
};
use crate::par::Mode;
use crate::space::Subset;

pub const EVIDENCE_LABEL: &str = "finite-horizon evidence";

/// One set `K` of a nested chain.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessCandidate {
    pub name: String,
    /// `(1/n) log P_n(K^c)` per horizon.
    pub outer: HorizonEstimate,
    /// `sup_{x not in K} I(x)` when the complement is fully visible.
    pub rate_outside: Option<ExtReal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TightnessConfig {
    /// Level `-J_{K^c}` must reach at the end of the chain for (A).
    pub threshold: f64,
    pub epsilon: f64,
}

impl Default for TightnessConfig {
    fn default() -> Self {
        Self { threshold: 3.0, epsilon: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessRow {
    pub name: String,
    /// `-J_{K^c}`, minus the upper envelope.
    pub neg_outer_j: ExtReal,
    pub rate_outside: Option<ExtReal>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TightnessReport {
    pub evidence: &'static str,
    pub rows: Vec<TightnessRow>,
    /// `-J_{K^c}` non-decreasing along the chain and above the threshold at its end.
    pub condition_a: bool,
    /// Some candidate has `-J_{K^c} >= I(inf) - eps` and `sup_{x not in K} I <= I(inf) + eps`.
    pub condition_b: bool,
    /// Last value of `-J_{K^c}`, the proxy for `I(inf)`.
    pub i_infinity: ExtReal,
    pub horizons: Vec<u32>,
    pub window: usize,
    pub config: TightnessConfig,
}

pub fn tightness_check(candidates: &[TightnessCandidate], cfg: &TightnessConfig) -> TightnessReport {
    let rows: Vec<TightnessRow> = candidates
        .iter()
        .map(|c| TightnessRow { name: c.name.clone(), neg_outer_j: -c.outer.upper(), rate_outside: c.rate_outside })
        .collect();
    let values: Vec<ExtReal> = rows.iter().map(|r| r.neg_outer_j).collect();
    let i_infinity = values.last().copied().unwrap_or(NegInf);
    let non_decreasing = values.windows(2).all(|w| w[1] >= w[0] - 1e-9);
    let condition_a = !values.is_empty() && non_decreasing && i_infinity >= ExtReal::Finite(cfg.threshold);
    let condition_b = i_infinity.is_finite()
        && rows.iter().any(|r| {
            r.neg_outer_j >= i_infinity - cfg.epsilon
                && r.rate_outside.is_some_and(|s| s <= i_infinity + cfg.epsilon)
        });
    let (horizons, window) =
        candidates.first().map(|c| (c.outer.horizons.clone(), c.outer.window)).unwrap_or_default();
    TightnessReport { evidence: EVIDENCE_LABEL, rows, condition_a, condition_b, i_infinity, horizons, window, config: *cfg }
}

/// Candidates for a nested chain of subsets of the family's truncation.
/// `sup_{x not in K} I` is taken over the truncation and left unknown when
/// the complement inside the truncation is empty.
pub fn family_tightness_candidates(
    family: &dyn DistributionSequence,
    chain: &[Subset],
    names: &[String],
    grid: &HorizonGrid,
    delta: Option<f64>,
    mode: Mode,
) -> Result<Vec<TightnessCandidate>, FamilyError> {
    if chain.len() != names.len() {
        return Err(FamilyError::LengthMismatch { expected: chain.len(), got: names.len() });
    }
    let rates = rate_estimate(family, delta, grid, mode)?;
    Ok(chain
        .iter()
        .zip(names)
        .map(|(k, name)| {
            let outside = k.complement();
            let rate_outside =
                if outside.is_empty() { None } else { outside.iter().map(|x| rates[x]).max() };
            TightnessCandidate {
                name: name.clone(),
                outer: outside_concentration_estimate(family, k, grid, mode),
                rate_outside,
            }
        })
        .collect())
}
