//! Randomized checks of the monetary axioms, max-stability and convexity.
//!
//! Each trial draws from its own ChaCha stream keyed by `(seed, trial)`, so
//! reports are reproducible and independent of how trials are scheduled.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{RiskError, RiskMeasure};
use crate::par::{self, Mode};
use crate::space::BoundedFunction;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckConfig {
    pub trials: usize,
    pub seed: u64,
    /// Values of random test functions are uniform in `[-bound, bound]`.
    pub bound: f64,
    /// Overrides the kind-specific tolerance when set.
    pub tolerance: Option<f64>,
    pub mode: Mode,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { trials: 1000, seed: 0, bound: 5.0, tolerance: None, mode: Mode::Auto }
    }
}

impl CheckConfig {
    pub fn with_trials(trials: usize) -> Self {
        Self { trials, ..Self::default() }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn tolerance_for(&self, phi: &RiskMeasure) -> f64 {
        self.tolerance.unwrap_or_else(|| phi.tolerance())
    }
}

/// RNG for trial `trial` under `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn random_function(rng: &mut impl Rng, k: usize, bound: f64) -> BoundedFunction {
    BoundedFunction::new((0..k).map(|_| rng.gen_range(-bound..=bound)).collect()).expect("finite draws")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub f: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl Witness {
    fn pair(f: &BoundedFunction, g: &BoundedFunction) -> Self {
        Self { f: f.values().to_vec(), g: Some(g.values().to_vec()), c: None, lambda: None }
    }
}

/// Worst violation over a battery of trials, with the trial that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub amount: f64,
    pub witness: Option<Witness>,
}

impl Violation {
    fn none() -> Self {
        Self { amount: 0.0, witness: None }
    }

    /// Keeps the first largest amount, so the result does not depend on scheduling.
    fn worst(items: Vec<(f64, Witness)>) -> Self {
        let mut best = Self::none();
        for (amount, w) in items {
            if amount > best.amount || (best.witness.is_none() && amount >= best.amount) {
                best = Self { amount, witness: Some(w) };
            }
        }
        best
    }
}

type Trial = Result<(f64, Witness), RiskError>;

fn run_trials<F>(cfg: &CheckConfig, f: F) -> Result<Violation, RiskError>
where
    F: Fn(&mut ChaCha8Rng) -> Trial + Sync + Send,
{
    let results = par::map_range(cfg.mode, cfg.trials, |t| f(&mut trial_rng(cfg.seed, t as u64)));
    Ok(Violation::worst(results.into_iter().collect::<Result<Vec<_>, _>>()?))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxiomReport {
    pub trials: usize,
    pub tolerance: f64,
    /// `|phi(0)|`.
    pub normalization: f64,
    /// Worst `|phi(f + c) - phi(f) - c|`.
    pub translation: Violation,
    /// Worst `phi(f) - phi(g)` over `f <= g`.
    pub monotonicity: Violation,
    pub passed: bool,
}

pub fn check_monetary_axioms(phi: &RiskMeasure, cfg: &CheckConfig) -> Result<AxiomReport, RiskError> {
    let k = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let normalization = phi.evaluate(&BoundedFunction::zero(k))?.abs();
    let translation = run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        let c = rng.gen_range(-cfg.bound..=cfg.bound);
        let gap = (phi.evaluate(&f.shift(c))? - phi.evaluate(&f)? - c).abs();
        Ok((gap, Witness { f: f.values().to_vec(), g: None, c: Some(c), lambda: None }))
    })?;
    let monotonicity = run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        // raise a random subset of coordinates; the rest stay equal
        let g = BoundedFunction::new(
            f.values().iter().map(|&v| if rng.gen_bool(0.5) { v + rng.gen_range(0.0..=cfg.bound) } else { v }).collect(),
        )
        .expect("finite");
        let gap = (phi.evaluate(&f)? - phi.evaluate(&g)?).max(0.0);
        Ok((gap, Witness::pair(&f, &g)))
    })?;
    let passed = normalization <= tol && translation.amount <= tol && monotonicity.amount <= tol;
    Ok(AxiomReport { trials: cfg.trials, tolerance: tol, normalization, translation, monotonicity, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxStabilityReport {
    pub trials: usize,
    pub tolerance: f64,
    /// Worst `|phi(f v g) - phi(f) v phi(g)|`.
    pub lattice: Violation,
    /// Worst `phi(f' v g')` over accepted `f' = f - phi(f)`, `g' = g - phi(g)`.
    pub acceptance_closure: Violation,
    pub passed: bool,
}

pub fn check_max_stability(phi: &RiskMeasure, cfg: &CheckConfig) -> Result<MaxStabilityReport, RiskError> {
    let k = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let lattice = run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        let g = random_function(rng, k, cfg.bound);
        let joint = phi.evaluate(&f.max_with(&g))?;
        let separate = phi.evaluate(&f)?.max(phi.evaluate(&g)?);
        Ok(((joint - separate).abs(), Witness::pair(&f, &g)))
    })?;
    let acceptance_closure = run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        let g = random_function(rng, k, cfg.bound);
        let fa = f.shift(-phi.evaluate(&f)?);
        let ga = g.shift(-phi.evaluate(&g)?);
        Ok((phi.evaluate(&fa.max_with(&ga))?.max(0.0), Witness::pair(&fa, &ga)))
    })?;
    let passed = lattice.amount <= tol && acceptance_closure.amount <= tol;
    Ok(MaxStabilityReport { trials: cfg.trials, tolerance: tol, lattice, acceptance_closure, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub tolerance: f64,
    /// Worst `phi(l f + (1-l) g) - l phi(f) - (1-l) phi(g)`.
    pub violation: Violation,
    pub passed: bool,
}

pub fn check_convexity(phi: &RiskMeasure, cfg: &CheckConfig) -> Result<ConvexityReport, RiskError> {
    let k = phi.space().len();
    let tol = cfg.tolerance_for(phi);
    let violation = run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        let g = random_function(rng, k, cfg.bound);
        let lambda: f64 = rng.gen_range(0.0..=1.0);
        let lhs = phi.evaluate(&f.mix(&g, lambda))?;
        let rhs = lambda * phi.evaluate(&f)? + (1.0 - lambda) * phi.evaluate(&g)?;
        let mut w = Witness::pair(&f, &g);
        w.lambda = Some(lambda);
        Ok(((lhs - rhs).max(0.0), w))
    })?;
    Ok(ConvexityReport { trials: cfg.trials, tolerance: tol, passed: violation.amount <= tol, violation })
}

/// Worst excess of `|phi(f) - phi(g)|` over `sup |f - g|`.
pub fn check_lipschitz(phi: &RiskMeasure, cfg: &CheckConfig) -> Result<Violation, RiskError> {
    let k = phi.space().len();
    run_trials(cfg, |rng| {
        let f = random_function(rng, k, cfg.bound);
        let g = random_function(rng, k, cfg.bound);
        let excess = (phi.evaluate(&f)? - phi.evaluate(&g)?).abs() - f.sup_distance(&g);
        Ok((excess.max(0.0), Witness::pair(&f, &g)))
    })
}
