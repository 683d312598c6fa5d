//! Sample means of i.i.d. lattice variables: the log moment generating
//! function, its numerical Legendre transform, and exact ball probabilities.

use serde::Serialize;

use super::{FamilyError, HorizonEstimate, HorizonGrid};
use crate::ext::{ExtReal, PosInf};
use crate::numeric::log_sum_exp;
use crate::par::{self, Mode};
use crate::space::MASS_TOL;

const GOLDEN_TOL: f64 = 1e-12;
const BRACKET_DOUBLINGS: usize = 80;

/// A law on the lattice `origin + spacing * k`, `k = 0..len`.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeLaw {
    origin: f64,
    spacing: f64,
    log_probs: Vec<f64>,
}

impl LatticeLaw {
    pub fn new(origin: f64, spacing: f64, weights: &[f64]) -> Result<Self, FamilyError> {
        if !(spacing > 0.0 && spacing.is_finite() && origin.is_finite()) {
            return Err(FamilyError::InvalidLaw(format!("origin {origin}, spacing {spacing}")));
        }
        if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(FamilyError::InvalidLaw("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(FamilyError::InvalidLaw(format!("weights sum to {sum}")));
        }
        Ok(Self { origin, spacing, log_probs: weights.iter().map(|w| w.ln()).collect() })
    }

    pub fn bernoulli(p: f64) -> Result<Self, FamilyError> {
        if !(0.0..=1.0).contains(&p) {
            return Err(FamilyError::InvalidLaw(format!("Bernoulli parameter {p}")));
        }
        Self::new(0.0, 1.0, &[1.0 - p, p])
    }

    /// Gaussian weights on `spacing * {-half, ..., half}`, renormalized.
    pub fn truncated_gaussian(half: usize, spacing: f64, sigma: f64) -> Result<Self, FamilyError> {
        let raw: Vec<f64> = (0..=2 * half)
            .map(|k| {
                let x = (k as f64 - half as f64) * spacing;
                (-0.5 * (x / sigma).powi(2)).exp()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let sum: f64 = weights.iter().sum();
        // push the rounding residue onto the centre so the sum check passes
        let mut weights = weights;
        weights[half] += 1.0 - sum;
        Self::new(-(half as f64) * spacing, spacing, &weights)
    }

    fn value(&self, k: usize) -> f64 {
        self.origin + self.spacing * k as f64
    }

    fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + Clone + '_ {
        self.log_probs.iter().enumerate().filter(|(_, lp)| **lp > f64::NEG_INFINITY).map(|(k, &lp)| (self.value(k), lp))
    }

    pub fn support_min(&self) -> f64 {
        self.atoms().map(|(x, _)| x).fold(f64::INFINITY, f64::min)
    }

    pub fn support_max(&self) -> f64 {
        self.atoms().map(|(x, _)| x).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        self.atoms().map(|(x, lp)| x * lp.exp()).sum()
    }

    /// The single support point of a point mass.
    pub fn degenerate_point(&self) -> Option<f64> {
        let lo = self.support_min();
        (lo == self.support_max()).then_some(lo)
    }

    /// `Lambda(y) = log E[exp(y X)]`.
    pub fn log_mgf(&self, y: f64) -> f64 {
        log_sum_exp(self.atoms().map(move |(x, lp)| lp + y * x))
    }

    /// `Lambda'(y)`, the mean under the exponentially tilted law.
    pub fn tilted_mean(&self, y: f64) -> f64 {
        let z = self.log_mgf(y);
        self.atoms().map(|(x, lp)| x * (lp + y * x - z).exp()).sum()
    }

    fn log_prob_at(&self, x: f64) -> f64 {
        self.atoms().find(|(v, _)| *v == x).map_or(f64::NEG_INFINITY, |(_, lp)| lp)
    }

    /// `I*(x) = sup_y { x y - Lambda(y) }`.
    ///
    /// Interior points use golden-section search on the concave objective.
    /// At a support endpoint the supremum is the limit `-log P(X = x)`;
    /// outside the convex hull of the support it is `+inf`.
    pub fn legendre(&self, x: f64) -> ExtReal {
        let (lo, hi) = (self.support_min(), self.support_max());
        if x < lo || x > hi {
            return PosInf;
        }
        if x == lo || x == hi {
            return ExtReal::Finite(-self.log_prob_at(x));
        }
        if x == self.mean() {
            return ExtReal::ZERO;
        }
        let g = |y: f64| x * y - self.log_mgf(y);
        let (mut a, mut b) = (-1.0f64, 1.0f64);
        for _ in 0..BRACKET_DOUBLINGS {
            if self.tilted_mean(a) < x {
                break;
            }
            a *= 2.0;
        }
        for _ in 0..BRACKET_DOUBLINGS {
            if self.tilted_mean(b) > x {
                break;
            }
            b *= 2.0;
        }
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut gc, mut gd) = (g(c), g(d));
        while b - a > GOLDEN_TOL * (1.0 + a.abs().max(b.abs())) {
            if gc >= gd {
                b = d;
                d = c;
                gd = gc;
                c = b - ratio * (b - a);
                gc = g(c);
            } else {
                a = c;
                c = d;
                gc = gd;
                d = a + ratio * (b - a);
                gd = g(d);
            }
        }
        ExtReal::Finite(gc.max(gd).max(g(0.5 * (a + b))).max(0.0))
    }

    /// Law of the sample mean of `n` independent copies.
    pub fn sample_mean_law(&self, n: u32) -> SampleMeanLaw {
        if self.log_probs.len() == 2 {
            return self.binomial_mean(n);
        }
        let mut acc = vec![0.0];
        for _ in 0..n {
            acc = convolve(&acc, &self.log_probs);
        }
        SampleMeanLaw { n, origin: self.origin, step: self.spacing / n as f64, log_probs: acc }
    }

    /// Sample-mean laws at every horizon, reusing the running convolution.
    pub fn sample_mean_laws(&self, horizons: &[u32], mode: Mode) -> Vec<SampleMeanLaw> {
        if self.log_probs.len() == 2 {
            return par::map_slice(mode, horizons, |&n| self.binomial_mean(n));
        }
        let mut out = Vec::with_capacity(horizons.len());
        let mut acc = vec![0.0];
        let mut done = 0u32;
        for &n in horizons {
            while done < n {
                acc = convolve(&acc, &self.log_probs);
                done += 1;
            }
            out.push(SampleMeanLaw { n, origin: self.origin, step: self.spacing / n as f64, log_probs: acc.clone() });
        }
        out
    }

    fn binomial_mean(&self, n: u32) -> SampleMeanLaw {
        let (lq, lp) = (self.log_probs[0], self.log_probs[1]);
        let lf = log_factorials(n as usize);
        let nn = n as usize;
        let log_probs = (0..=nn)
            .map(|k| {
                let mut v = lf[nn] - lf[k] - lf[nn - k];
                if k > 0 {
                    v += k as f64 * lp;
                }
                if k < nn {
                    v += (nn - k) as f64 * lq;
                }
                v
            })
            .collect();
        SampleMeanLaw { n, origin: self.origin, step: self.spacing / n as f64, log_probs }
    }
}

fn log_factorials(n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n + 1];
    for i in 1..=n {
        out[i] = out[i - 1] + (i as f64).ln();
    }
    out
}

fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    (0..a.len() + b.len() - 1)
        .map(|j| {
            let lo = j.saturating_sub(a.len() - 1);
            let hi = j.min(b.len() - 1);
            log_sum_exp((lo..=hi).map(|i| a[j - i] + b[i]).collect::<Vec<_>>())
        })
        .collect()
}

/// Law of `(X_1 + ... + X_n) / n` on the lattice `origin + step * k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMeanLaw {
    pub n: u32,
    origin: f64,
    step: f64,
    log_probs: Vec<f64>,
}

impl SampleMeanLaw {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }

    pub fn value(&self, k: usize) -> f64 {
        self.origin + self.step * k as f64
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_probs
    }

    /// `log P(value in pred)`.
    pub fn log_prob_where(&self, pred: impl Fn(f64) -> bool) -> f64 {
        log_sum_exp((0..self.len()).filter(|&k| pred(self.value(k))).map(|k| self.log_probs[k]).collect::<Vec<_>>())
    }

    /// `log P(|mean - x| < delta)`.
    pub fn ball_log_prob(&self, x: f64, delta: f64) -> f64 {
        let first = ((x - delta - self.origin) / self.step).floor().max(0.0) as usize;
        let last = (((x + delta - self.origin) / self.step).ceil().max(0.0) as usize).min(self.len().saturating_sub(1));
        if first > last {
            return f64::NEG_INFINITY;
        }
        log_sum_exp(
            (first..=last).filter(|&k| (self.value(k) - x).abs() < delta).map(|k| self.log_probs[k]).collect::<Vec<_>>(),
        )
    }

    /// `-(1/n) log P(|mean - x| < delta)`.
    pub fn ball_rate(&self, x: f64, delta: f64) -> ExtReal {
        ExtReal::from_f64(-self.ball_log_prob(x, delta) / self.n as f64)
    }
}

/// Bernoulli rate `x log(x/p) + (1-x) log((1-x)/(1-p))`, with the usual
/// conventions at the endpoints.
pub fn bernoulli_rate(p: f64, x: f64) -> ExtReal {
    if !(0.0..=1.0).contains(&x) {
        return PosInf;
    }
    let term = |a: f64, b: f64| if a == 0.0 { 0.0 } else { a * (a / b).ln() };
    ExtReal::from_f64(term(x, p) + term(1.0 - x, 1.0 - p))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CramerConfig {
    /// Points where the rate is evaluated; by default 99 equally spaced
    /// interior points of the support hull.
    pub grid: Option<Vec<f64>>,
    pub horizons: Vec<u32>,
    /// Ball radius; by default half the lattice spacing of the sample mean.
    pub delta: Option<f64>,
    /// Half-width and step of the `Lambda` table.
    pub y_range: (f64, f64),
    pub mode: Mode,
}

impl Default for CramerConfig {
    fn default() -> Self {
        Self { grid: None, horizons: HorizonGrid::default().horizons().to_vec(), delta: None, y_range: (10.0, 0.5), mode: Mode::Auto }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRow {
    pub horizon: u32,
    pub delta: f64,
    /// Largest `|ball rate - I*|` over grid points with finite values.
    pub sup_gap: f64,
    pub worst_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerReport {
    /// `(y, Lambda(y))`.
    pub log_mgf: Vec<(f64, f64)>,
    pub grid: Vec<f64>,
    pub legendre: Vec<ExtReal>,
    pub rows: Vec<CramerRow>,
    /// `ball_rates[h][i]` at horizon `rows[h].horizon` and grid point `i`.
    pub ball_rates: Vec<Vec<ExtReal>>,
}

impl CramerReport {
    pub fn ball_rate_at(&self, n: u32, x: f64) -> Option<ExtReal> {
        let h = self.rows.iter().position(|r| r.horizon == n)?;
        let i = self.grid.iter().position(|&g| (g - x).abs() < 1e-12)?;
        Some(self.ball_rates[h][i])
    }
}

pub fn default_grid(law: &LatticeLaw, points: usize) -> Vec<f64> {
    let (lo, hi) = (law.support_min(), law.support_max());
    (1..=points).map(|i| lo + (hi - lo) * i as f64 / (points + 1) as f64).collect()
}

/// Rate function of the sample mean two ways: the Legendre transform of
/// `Lambda`, and exact ball probabilities at each horizon.
pub fn cramer_demo(law: &LatticeLaw, cfg: &CramerConfig) -> Result<CramerReport, FamilyError> {
    if let Some(x) = law.degenerate_point() {
        return Err(FamilyError::DegenerateLaw(x));
    }
    if cfg.horizons.is_empty() || cfg.horizons.contains(&0) {
        return Err(FamilyError::InvalidGrid("horizons must be positive".into()));
    }
    let grid = cfg.grid.clone().unwrap_or_else(|| default_grid(law, 99));
    let (half, step) = cfg.y_range;
    let steps = (2.0 * half / step).round() as usize;
    let log_mgf = (0..=steps)
        .map(|i| {
            let y = -half + step * i as f64;
            (y, law.log_mgf(y))
        })
        .collect();
    let legendre = par::map_slice(cfg.mode, &grid, |&x| law.legendre(x));
    let laws = law.sample_mean_laws(&cfg.horizons, cfg.mode);
    let per_horizon = par::map_slice(cfg.mode, &laws, |sm| {
        let delta = cfg.delta.unwrap_or(0.5 * sm.step());
        let rates: Vec<ExtReal> = grid.iter().map(|&x| sm.ball_rate(x, delta)).collect();
        let mut row = CramerRow { horizon: sm.n, delta, sup_gap: 0.0, worst_x: f64::NAN };
        for (i, r) in rates.iter().enumerate() {
            let gap = r.abs_diff(legendre[i]);
            if gap > row.sup_gap || row.worst_x.is_nan() {
                row.sup_gap = row.sup_gap.max(gap);
                row.worst_x = grid[i];
            }
        }
        (row, rates)
    });
    let (rows, ball_rates) = per_horizon.into_iter().unzip();
    Ok(CramerReport { log_mgf, grid, legendre, rows, ball_rates })
}

/// `(1/n) log P(|mean - E X| > r)` per radius and horizon: the outer
/// concentrations of the nested compacts `[E X - r, E X + r]`.
pub fn outside_interval_estimates(law: &LatticeLaw, radii: &[f64], grid: &HorizonGrid, mode: Mode) -> Vec<HorizonEstimate> {
    let mean = law.mean();
    let laws = law.sample_mean_laws(grid.horizons(), mode);
    radii
        .iter()
        .map(|&r| {
            let values = laws
                .iter()
                .map(|sm| ExtReal::from_f64(sm.log_prob_where(|v| (v - mean).abs() > r) / sm.n as f64))
                .collect();
            HorizonEstimate::from_values(grid, values)
        })
        .collect()
}
