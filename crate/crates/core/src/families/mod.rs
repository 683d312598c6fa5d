//! Sequences of laws `P_n` and their asymptotic entropic functionals,
//! approximated by envelopes over a finite horizon grid.

mod counterexamples;
pub mod cramer;

pub use counterexamples::{counterexample_naturals, counterexample_rationals, RationalsFixture};

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::ext::{ExtReal, NegInf};
use crate::numeric::log_sum_exp;
use crate::par::{self, Mode};
use crate::risk::{trial_rng, RiskMeasure};
use crate::shortfall::ShortfallError;
use crate::space::{BoundedFunction, FiniteMetricSpace, ProbabilityVector, SpaceError, Subset};

/// A tail mass changing a horizon value by more than this is an error when
/// the function has no extension beyond the truncation.
pub const TRUNCATION_TOL: f64 = 1e-9;
pub const DEFAULT_WINDOW: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FamilyError {
    #[error("mass outside the truncation moves the value at n = {horizon} by {spread}")]
    TruncationDominates { horizon: u32, spread: f64 },
    #[error("invalid horizon grid: {0}")]
    InvalidGrid(String),
    #[error("function has {got} values but the family lives on {expected} points")]
    LengthMismatch { expected: usize, got: usize },
    #[error("base law is a point mass at {0}")]
    DegenerateLaw(f64),
    #[error("invalid base law: {0}")]
    InvalidLaw(String),
    #[error("family set is empty")]
    EmptyFamilySet,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Shortfall(#[from] ShortfallError),
    #[error(transparent)]
    Maxitive(#[from] crate::maxitive::MaxitiveError),
}

/// `P_n` on a finite truncation plus the log-mass that fell outside it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedLaw {
    pub log_weights: Vec<f64>,
    pub log_tail: f64,
}

impl TruncatedLaw {
    pub fn exact(log_weights: Vec<f64>) -> Self {
        Self { log_weights, log_tail: f64::NEG_INFINITY }
    }

    pub fn from_law(law: &ProbabilityVector) -> Self {
        Self::exact(law.log_weights().to_vec())
    }

    /// `log P_n(A)` for `A` inside the truncation.
    pub fn log_prob(&self, a: &Subset) -> f64 {
        log_sum_exp(a.iter().map(|i| self.log_weights[i]).collect::<Vec<_>>())
    }

    /// `log P_n(A^c)`, counting the mass outside the truncation.
    pub fn log_prob_outside(&self, a: &Subset) -> f64 {
        let mut terms: Vec<f64> = a.complement().iter().map(|i| self.log_weights[i]).collect();
        terms.push(self.log_tail);
        log_sum_exp(terms)
    }

    pub fn tail_mass(&self) -> f64 {
        self.log_tail.exp()
    }
}

pub trait DistributionSequence: Send + Sync {
    fn name(&self) -> String;
    fn space(&self) -> &Arc<FiniteMetricSpace>;
    fn law(&self, n: u32) -> TruncatedLaw;
}

type LawFn = Arc<dyn Fn(u32) -> TruncatedLaw + Send + Sync>;

/// A family given by a closed-form generator `n -> P_n`.
#[derive(Clone)]
pub struct ClosedFormFamily {
    name: String,
    space: Arc<FiniteMetricSpace>,
    law: LawFn,
}

impl std::fmt::Debug for ClosedFormFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ClosedFormFamily").field("name", &self.name).field("points", &self.space.len()).finish()
    }
}

impl ClosedFormFamily {
    pub fn new(
        name: impl Into<String>,
        space: Arc<FiniteMetricSpace>,
        law: impl Fn(u32) -> TruncatedLaw + Send + Sync + 'static,
    ) -> Self {
        Self { name: name.into(), space, law: Arc::new(law) }
    }

    /// Two points with `P_n(x_1) = exp(-n rate)`.
    pub fn two_point(rate: f64) -> Self {
        assert!(rate > 0.0, "two-point rate must be positive");
        let space = Arc::new(FiniteMetricSpace::discrete(2).expect("two points"));
        Self::new(format!("two_point(rate={rate})"), space, move |n| {
            let lp = -(n as f64) * rate;
            TruncatedLaw::exact(vec![crate::numeric::log1m_exp(lp), lp])
        })
    }

    /// `X_n = x` for every `n`.
    pub fn deterministic(space: Arc<FiniteMetricSpace>, x: usize) -> Self {
        let k = space.len();
        Self::new(format!("deterministic({})", space.label(x)), space, move |_| {
            TruncatedLaw::from_law(&ProbabilityVector::point_mass(k, x))
        })
    }

    /// The same law at every horizon.
    pub fn stationary(space: Arc<FiniteMetricSpace>, law: ProbabilityVector) -> Self {
        Self::new("stationary", space, move |_| TruncatedLaw::from_law(&law))
    }
}

impl DistributionSequence for ClosedFormFamily {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn space(&self) -> &Arc<FiniteMetricSpace> {
        &self.space
    }

    fn law(&self, n: u32) -> TruncatedLaw {
        (self.law)(n)
    }
}

/// Empirical laws drawn from another family, for exploratory runs only.
/// The mass outside the truncation is sampled as one extra category.
pub struct MonteCarloFamily<F> {
    inner: F,
    samples: usize,
    seed: u64,
}

impl<F: DistributionSequence> MonteCarloFamily<F> {
    pub fn new(inner: F, samples: usize, seed: u64) -> Self {
        assert!(samples > 0, "need at least one sample");
        Self { inner, samples, seed }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    fn counts(&self, n: u32) -> Vec<usize> {
        let law = self.inner.law(n);
        let mut cumulative: Vec<f64> = Vec::with_capacity(law.log_weights.len() + 1);
        let mut acc = 0.0;
        for &lw in law.log_weights.iter().chain(std::iter::once(&law.log_tail)) {
            acc += lw.exp();
            cumulative.push(acc);
        }
        let mut counts = vec![0usize; cumulative.len()];
        let mut rng = trial_rng(self.seed, n as u64);
        for _ in 0..self.samples {
            let u = rng.gen::<f64>() * acc;
            let i = cumulative.partition_point(|&c| c <= u).min(counts.len() - 1);
            counts[i] += 1;
        }
        counts
    }

    /// Binomial standard error `sqrt(p (1 - p) / N)` per point, tail last.
    pub fn standard_errors(&self, n: u32) -> Vec<f64> {
        let total = self.samples as f64;
        self.counts(n)
            .into_iter()
            .map(|c| {
                let p = c as f64 / total;
                (p * (1.0 - p) / total).sqrt()
            })
            .collect()
    }
}

impl<F: DistributionSequence> DistributionSequence for MonteCarloFamily<F> {
    fn name(&self) -> String {
        format!("monte_carlo({}, samples={})", self.inner.name(), self.samples)
    }

    fn space(&self) -> &Arc<FiniteMetricSpace> {
        self.inner.space()
    }

    fn law(&self, n: u32) -> TruncatedLaw {
        let counts = self.counts(n);
        let total = (self.samples as f64).ln();
        let mut logs: Vec<f64> = counts.iter().map(|&c| (c as f64).ln() - total).collect();
        let log_tail = logs.pop().unwrap_or(f64::NEG_INFINITY);
        TruncatedLaw { log_weights: logs, log_tail }
    }
}

/// Increasing horizons and the number of trailing horizons that stand in
/// for `n -> infinity`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HorizonGrid {
    horizons: Vec<u32>,
    window: usize,
}

impl Default for HorizonGrid {
    /// `n = 2^3, ..., 2^12` with a window of four.
    fn default() -> Self {
        Self::powers(3, 12)
    }
}

impl HorizonGrid {
    pub fn new(horizons: Vec<u32>, window: usize) -> Result<Self, FamilyError> {
        if horizons.is_empty() {
            return Err(FamilyError::InvalidGrid("no horizons".into()));
        }
        if horizons[0] == 0 || horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FamilyError::InvalidGrid("horizons must be positive and strictly increasing".into()));
        }
        if window == 0 || window > horizons.len() {
            return Err(FamilyError::InvalidGrid(format!("window {window} for {} horizons", horizons.len())));
        }
        Ok(Self { horizons, window })
    }

    /// `2^lo, ..., 2^hi` with the default window, shortened for short grids.
    pub fn powers(lo: u32, hi: u32) -> Self {
        let horizons: Vec<u32> = (lo..=hi).map(|k| 1u32 << k).collect();
        let window = DEFAULT_WINDOW.min(horizons.len());
        Self::new(horizons, window).expect("powers of two are increasing")
    }

    pub fn horizons(&self) -> &[u32] {
        &self.horizons
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn largest(&self) -> u32 {
        *self.horizons.last().expect("nonempty grid")
    }

    pub fn with_window(mut self, window: usize) -> Result<Self, FamilyError> {
        self.window = window;
        Self::new(self.horizons, self.window)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Upper,
    Lower,
}

/// Per-horizon values with running tail envelopes. `upper_env[i]` is the max
/// and `lower_env[i]` the min of `values[i..]`; the limsup/liminf proxies are
/// the envelopes at the start of the tail window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HorizonEstimate {
    pub horizons: Vec<u32>,
    pub values: Vec<ExtReal>,
    pub upper_env: Vec<ExtReal>,
    pub lower_env: Vec<ExtReal>,
    pub window: usize,
}

impl HorizonEstimate {
    pub fn from_values(grid: &HorizonGrid, values: Vec<ExtReal>) -> Self {
        assert_eq!(values.len(), grid.horizons.len(), "one value per horizon");
        let len = values.len();
        let mut upper_env = values.clone();
        let mut lower_env = values.clone();
        for i in (0..len.saturating_sub(1)).rev() {
            upper_env[i] = upper_env[i].max(upper_env[i + 1]);
            lower_env[i] = lower_env[i].min(lower_env[i + 1]);
        }
        Self { horizons: grid.horizons.clone(), values, upper_env, lower_env, window: grid.window }
    }

    fn tail_start(&self) -> usize {
        self.values.len() - self.window
    }

    /// limsup proxy.
    pub fn upper(&self) -> ExtReal {
        self.upper_env[self.tail_start()]
    }

    /// liminf proxy.
    pub fn lower(&self) -> ExtReal {
        self.lower_env[self.tail_start()]
    }

    pub fn estimate(&self, side: Side) -> ExtReal {
        match side {
            Side::Upper => self.upper(),
            Side::Lower => self.lower(),
        }
    }

    pub fn at(&self, n: u32) -> Option<ExtReal> {
        self.horizons.iter().position(|&h| h == n).map(|i| self.values[i])
    }

    pub fn last(&self) -> ExtReal {
        *self.values.last().expect("nonempty estimate")
    }

    /// `(n, value, upper_env, lower_env)` rows.
    pub fn rows(&self) -> Vec<(u32, ExtReal, ExtReal, ExtReal)> {
        (0..self.values.len()).map(|i| (self.horizons[i], self.values[i], self.upper_env[i], self.lower_env[i])).collect()
    }

    /// Applies `g` to every value and rebuilds the envelopes.
    pub fn map(&self, g: impl Fn(ExtReal) -> ExtReal) -> Self {
        let grid = HorizonGrid { horizons: self.horizons.clone(), window: self.window };
        Self::from_values(&grid, self.values.iter().map(|&v| g(v)).collect())
    }
}

/// How a function on the truncation is extended to the mass outside it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Extension {
    /// Fails with [`FamilyError::TruncationDominates`] when the tail matters.
    Forbid,
    Constant(f64),
    /// The value at the last point of the truncation.
    LastPoint,
}

impl Extension {
    pub fn value(self, f: &BoundedFunction) -> Option<f64> {
        match self {
            Extension::Forbid => None,
            Extension::Constant(c) => Some(c),
            Extension::LastPoint => f.values().last().copied(),
        }
    }
}

fn check_len(family: &dyn DistributionSequence, k: usize) -> Result<(), FamilyError> {
    let expected = family.space().len();
    if expected != k {
        return Err(FamilyError::LengthMismatch { expected, got: k });
    }
    Ok(())
}

fn entropic_terms(law: &TruncatedLaw, f: &BoundedFunction, n: f64, beyond: f64) -> f64 {
    let mut terms: Vec<f64> = law.log_weights.iter().zip(f.values()).map(|(lw, v)| lw + n * v).collect();
    terms.push(law.log_tail + n * beyond);
    log_sum_exp(terms) / n
}

/// `(1/n) log E[exp(n f(X_n))]` at one horizon.
pub fn entropy_at(law: &TruncatedLaw, f: &BoundedFunction, n: u32, ext: Extension) -> Result<f64, FamilyError> {
    let nf = n as f64;
    match ext.value(f) {
        Some(beyond) => Ok(entropic_terms(law, f, nf, beyond)),
        None if law.log_tail == f64::NEG_INFINITY => Ok(entropic_terms(law, f, nf, 0.0)),
        None => {
            let lo = entropic_terms(law, f, nf, f.inf());
            let hi = entropic_terms(law, f, nf, f.sup());
            if hi - lo > TRUNCATION_TOL {
                Err(FamilyError::TruncationDominates { horizon: n, spread: hi - lo })
            } else {
                Ok(hi)
            }
        }
    }
}

/// Horizon values of `(1/n) log E[exp(n f(X_n))]` with their envelopes.
pub fn asymptotic_entropy(
    family: &dyn DistributionSequence,
    f: &BoundedFunction,
    ext: Extension,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    robust_asymptotic_entropy(&[family], f, ext, grid, mode)
}

/// Per horizon, the largest entropic value over the families.
pub fn robust_asymptotic_entropy(
    families: &[&dyn DistributionSequence],
    f: &BoundedFunction,
    ext: Extension,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<HorizonEstimate, FamilyError> {
    if families.is_empty() {
        return Err(FamilyError::EmptyFamilySet);
    }
    for fam in families {
        check_len(*fam, f.len())?;
    }
    let values = par::map_slice(mode, grid.horizons(), |&n| {
        let mut best = f64::NEG_INFINITY;
        for fam in families {
            best = best.max(entropy_at(&fam.law(n), f, n, ext)?);
        }
        Ok(ExtReal::from_f64(best))
    })
    .into_iter()
    .collect::<Result<Vec<_>, FamilyError>>()?;
    Ok(HorizonEstimate::from_values(grid, values))
}

/// `(1/n) log P_n(A)` per horizon; its upper envelope estimates `J_A` of the
/// upper asymptotic entropy. Mass outside the truncation is not in `A`.
pub fn concentration_estimate(
    family: &dyn DistributionSequence,
    a: &Subset,
    grid: &HorizonGrid,
    mode: Mode,
) -> HorizonEstimate {
    let values = par::map_slice(mode, grid.horizons(), |&n| ExtReal::from_f64(family.law(n).log_prob(a) / n as f64));
    HorizonEstimate::from_values(grid, values)
}

/// `(1/n) log P_n(K^c)` per horizon, where `K^c` includes the mass outside
/// the truncation.
pub fn outside_concentration_estimate(
    family: &dyn DistributionSequence,
    k: &Subset,
    grid: &HorizonGrid,
    mode: Mode,
) -> HorizonEstimate {
    let values =
        par::map_slice(mode, grid.horizons(), |&n| ExtReal::from_f64(family.law(n).log_prob_outside(k) / n as f64));
    HorizonEstimate::from_values(grid, values)
}

/// `-(1/n) log P_n(B_delta(x))` per point and horizon. The rate estimate at
/// `x` is the lower envelope, i.e. minus the upper concentration of the ball.
/// `delta` defaults to the limit radius of the space.
pub fn ball_rate_estimates(
    family: &dyn DistributionSequence,
    delta: Option<f64>,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<Vec<HorizonEstimate>, FamilyError> {
    let space = family.space();
    let delta = delta.unwrap_or_else(|| space.limit_radius());
    let balls = (0..space.len()).map(|x| space.ball(x, delta)).collect::<Result<Vec<_>, _>>()?;
    let laws = par::map_slice(mode, grid.horizons(), |&n| family.law(n));
    Ok(balls
        .iter()
        .map(|b| {
            let values = laws
                .iter()
                .zip(grid.horizons())
                .map(|(law, &n)| ExtReal::from_f64(-law.log_prob(b) / n as f64))
                .collect();
            HorizonEstimate::from_values(grid, values)
        })
        .collect())
}

/// Liminf rate estimates `I(x)` from [`ball_rate_estimates`].
pub fn rate_estimate(
    family: &dyn DistributionSequence,
    delta: Option<f64>,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<Vec<ExtReal>, FamilyError> {
    Ok(ball_rate_estimates(family, delta, grid, mode)?.iter().map(|e| e.lower()).collect())
}

/// Largest rate that is still finite, or `NegInf` if none is.
pub fn finite_sup(values: &[ExtReal]) -> ExtReal {
    values.iter().copied().filter(|v| v.is_finite()).max().unwrap_or(NegInf)
}

/// Per horizon, `phi_n(f) - max_x { f(x) - I_n(x) }` with `I_n` the ball rate
/// at that same horizon on the truncation.
pub fn finite_horizon_lp_gaps(
    family: &dyn DistributionSequence,
    f: &BoundedFunction,
    ext: Extension,
    grid: &HorizonGrid,
    mode: Mode,
) -> Result<Vec<LpGapRow>, FamilyError> {
    check_len(family, f.len())?;
    let space = family.space();
    let delta = space.limit_radius();
    let balls = (0..space.len()).map(|x| space.ball(x, delta)).collect::<Result<Vec<_>, _>>()?;
    par::map_slice(mode, grid.horizons(), |&n| {
        let law = family.law(n);
        let value = entropy_at(&law, f, n, ext)?;
        let dual = balls
            .iter()
            .enumerate()
            .map(|(x, b)| (f.get(x) + ExtReal::from_f64(law.log_prob(b) / n as f64)).to_f64())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(LpGapRow { horizon: n, value, dual, gap: value - dual })
    })
    .into_iter()
    .collect()
}

/// The envelope of the asymptotic entropy as an opaque risk measure on the
/// family's truncation.
pub fn envelope_measure<F: DistributionSequence + 'static>(
    family: F,
    ext: Extension,
    grid: HorizonGrid,
    side: Side,
) -> RiskMeasure {
    let space = family.space().clone();
    let name = format!("{}:{}", family.name(), if side == Side::Upper { "upper" } else { "lower" });
    RiskMeasure::custom(space, name, move |f| {
        asymptotic_entropy(&family, f, ext, &grid, Mode::Sequential)
            .unwrap_or_else(|e| panic!("envelope measure: {e}"))
            .estimate(side)
            .to_f64()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpGapRow {
    pub horizon: u32,
    /// `(1/n) log E[exp(n f(X_n))]`.
    pub value: f64,
    /// `max_x { f(x) - I_n(x) }`.
    pub dual: f64,
    pub gap: f64,
}
