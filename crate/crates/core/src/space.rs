//! Finite metric spaces, their subsets, and functions and laws on them.
//!
//! On a finite metric space every function is bounded and continuous and every
//! subset is Borel, so statements about `C_b(S)` and `B_b(S)` coincide and can
//! be checked exactly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numeric::log_sum_exp;

/// Absolute tolerance for the metric-axiom checks.
pub const METRIC_TOL: f64 = 1e-12;
/// Absolute tolerance on the total mass of a probability vector.
pub const MASS_TOL: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("a space needs at least one point")]
    Empty,
    #[error("distance matrix has {rows} rows but {labels} labels were given")]
    DimensionMismatch { labels: usize, rows: usize },
    #[error("row {row} of the distance matrix has {len} entries, expected {expected}")]
    RaggedRow { row: usize, len: usize, expected: usize },
    #[error("distance d({i},{j}) = {value} is not a finite non-negative real")]
    InvalidDistance { i: usize, j: usize, value: f64 },
    #[error("d({i},{j}) = {dij} differs from d({j},{i}) = {dji}")]
    AsymmetricDistance { i: usize, j: usize, dij: f64, dji: f64 },
    #[error("d({i},{i}) = {value} must be zero")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("distinct points {i} and {j} are at distance zero")]
    ZeroDistance { i: usize, j: usize },
    #[error("triangle inequality fails: d({i},{k}) = {dik} > d({i},{j}) + d({j},{k}) = {via}")]
    TriangleViolation { i: usize, j: usize, k: usize, dik: f64, via: f64 },
    #[error("duplicate label {0:?}")]
    DuplicateLabel(String),
    #[error("unknown point {0:?}")]
    UnknownPoint(String),
    #[error("ball radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("expected {expected} values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("value at point {index} is not finite: {value}")]
    NonFiniteValue { index: usize, value: f64 },
    #[error("weight at point {index} is negative or not finite: {value}")]
    InvalidWeight { index: usize, value: f64 },
    #[error("weights sum to {sum}, expected 1")]
    NotNormalized { sum: f64 },
}

#[derive(Debug, Clone, PartialEq)]
enum Metric {
    /// Row-major `K x K` distance matrix, validated on construction.
    Matrix(Vec<f64>),
    /// Points on the real line, `d(x, y) = |x - y|`.
    Line(Vec<f64>),
    /// `d(x, y) = 1` for `x != y`.
    Discrete,
}

/// A non-empty finite metric space with labelled points.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteMetricSpace {
    labels: Vec<String>,
    metric: Metric,
}

impl FiniteMetricSpace {
    /// Validates an explicit distance matrix.
    pub fn build(labels: Vec<String>, dist: Vec<Vec<f64>>) -> Result<Self, SpaceError> {
        let k = labels.len();
        if k == 0 {
            return Err(SpaceError::Empty);
        }
        check_unique(&labels)?;
        if dist.len() != k {
            return Err(SpaceError::DimensionMismatch { labels: k, rows: dist.len() });
        }
        let mut flat = Vec::with_capacity(k * k);
        for (row, r) in dist.iter().enumerate() {
            if r.len() != k {
                return Err(SpaceError::RaggedRow { row, len: r.len(), expected: k });
            }
            flat.extend_from_slice(r);
        }
        let d = |i: usize, j: usize| flat[i * k + j];
        for i in 0..k {
            for j in 0..k {
                let v = d(i, j);
                if !v.is_finite() || v < 0.0 {
                    return Err(SpaceError::InvalidDistance { i, j, value: v });
                }
            }
        }
        for i in 0..k {
            if d(i, i).abs() > METRIC_TOL {
                return Err(SpaceError::NonzeroDiagonal { i, value: d(i, i) });
            }
            for j in (i + 1)..k {
                if (d(i, j) - d(j, i)).abs() > METRIC_TOL {
                    return Err(SpaceError::AsymmetricDistance { i, j, dij: d(i, j), dji: d(j, i) });
                }
                if d(i, j) <= METRIC_TOL {
                    return Err(SpaceError::ZeroDistance { i, j });
                }
            }
        }
        for i in 0..k {
            for j in 0..k {
                for l in 0..k {
                    let via = d(i, j) + d(j, l);
                    if d(i, l) > via + METRIC_TOL {
                        return Err(SpaceError::TriangleViolation { i, j, k: l, dik: d(i, l), via });
                    }
                }
            }
        }
        Ok(Self { labels, metric: Metric::Matrix(flat) })
    }

    /// `K` points at mutual distance one, labelled `x0 .. x{K-1}`.
    pub fn discrete(k: usize) -> Result<Self, SpaceError> {
        if k == 0 {
            return Err(SpaceError::Empty);
        }
        Ok(Self { labels: default_labels(k), metric: Metric::Discrete })
    }

    /// Points of the real line with the absolute-value distance.
    pub fn line(labels: Vec<String>, coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.is_empty() {
            return Err(SpaceError::Empty);
        }
        if labels.len() != coords.len() {
            return Err(SpaceError::LengthMismatch { expected: coords.len(), got: labels.len() });
        }
        check_unique(&labels)?;
        for (i, &c) in coords.iter().enumerate() {
            if !c.is_finite() {
                return Err(SpaceError::NonFiniteValue { index: i, value: c });
            }
        }
        let mut sorted: Vec<(f64, usize)> = coords.iter().copied().zip(0..).collect();
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in sorted.windows(2) {
            if w[1].0 - w[0].0 <= METRIC_TOL {
                return Err(SpaceError::ZeroDistance { i: w[0].1, j: w[1].1 });
            }
        }
        Ok(Self { labels, metric: Metric::Line(coords) })
    }

    /// Line space whose labels are the coordinates themselves.
    pub fn line_from_coords(coords: Vec<f64>) -> Result<Self, SpaceError> {
        let labels = coords.iter().map(|c| format!("{c}")).collect();
        Self::line(labels, coords)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Result<usize, SpaceError> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| SpaceError::UnknownPoint(label.to_string()))
    }

    /// Coordinates when the space lives on the real line.
    pub fn coords(&self) -> Option<&[f64]> {
        match &self.metric {
            Metric::Line(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_discrete_metric(&self) -> bool {
        match &self.metric {
            Metric::Discrete => true,
            Metric::Line(_) => false,
            Metric::Matrix(m) => {
                let k = self.len();
                (0..k).all(|i| (0..k).all(|j| i == j || (m[i * k + j] - 1.0).abs() <= METRIC_TOL))
            }
        }
    }

    pub fn dist(&self, i: usize, j: usize) -> f64 {
        match &self.metric {
            Metric::Matrix(m) => m[i * self.len() + j],
            Metric::Line(c) => (c[i] - c[j]).abs(),
            Metric::Discrete => {
                if i == j {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Full distance matrix (used for serialization).
    pub fn distance_matrix(&self) -> Vec<Vec<f64>> {
        let k = self.len();
        (0..k).map(|i| (0..k).map(|j| self.dist(i, j)).collect()).collect()
    }

    /// Smallest distance between two distinct points, `None` for a singleton.
    pub fn min_positive_distance(&self) -> Option<f64> {
        let k = self.len();
        if k < 2 {
            return None;
        }
        match &self.metric {
            Metric::Discrete => Some(1.0),
            Metric::Line(c) => {
                let mut s = c.clone();
                s.sort_by(f64::total_cmp);
                s.windows(2).map(|w| w[1] - w[0]).reduce(f64::min)
            }
            Metric::Matrix(_) => (0..k)
                .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
                .map(|(i, j)| self.dist(i, j))
                .reduce(f64::min),
        }
    }

    /// Radius at which every ball is the singleton `{x}`: half the minimum
    /// positive distance (one for a singleton space). Limits `delta -> 0` are
    /// attained at this radius.
    pub fn limit_radius(&self) -> f64 {
        self.min_positive_distance().map_or(1.0, |d| d / 2.0)
    }

    pub fn check_point(&self, x: usize) -> Result<(), SpaceError> {
        if x < self.len() {
            Ok(())
        } else {
            Err(SpaceError::UnknownPoint(format!("#{x}")))
        }
    }

    /// Open ball `{y : d(x, y) < delta}`.
    pub fn ball(&self, x: usize, delta: f64) -> Result<Subset, SpaceError> {
        self.check_point(x)?;
        if !(delta > 0.0) {
            return Err(SpaceError::NonPositiveRadius(delta));
        }
        Ok(Subset::from_fn(self.len(), |y| self.dist(x, y) < delta))
    }

    /// Radii at which the balls around `x` can change: half the smallest
    /// positive distance, every realized distance from `x`, and the midpoints
    /// between consecutive realized distances. Ascending.
    pub fn radius_candidates(&self, x: usize) -> Vec<f64> {
        let mut ds: Vec<f64> = (0..self.len()).filter(|&y| y != x).map(|y| self.dist(x, y)).collect();
        ds.sort_by(f64::total_cmp);
        ds.dedup_by(|a, b| (*a - *b).abs() <= METRIC_TOL);
        let mut out = vec![self.limit_radius()];
        out.extend(ds.iter().copied());
        out.extend(ds.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Interior and closure of `a`. A point is interior when some ball with a
    /// candidate radius fits inside `a`; the closure is the complement of the
    /// interior of the complement.
    pub fn interior_closure(&self, a: &Subset) -> (Subset, Subset) {
        let interior = self.interior(a);
        let closure = self.interior(&a.complement()).complement();
        (interior, closure)
    }

    fn interior(&self, a: &Subset) -> Subset {
        Subset::from_fn(self.len(), |x| {
            a.contains(x)
                && self
                    .radius_candidates(x)
                    .into_iter()
                    .any(|delta| Subset::from_fn(self.len(), |y| self.dist(x, y) < delta).is_subset_of(a))
        })
    }

    pub fn subset_from_labels<S: AsRef<str>>(&self, labels: &[S]) -> Result<Subset, SpaceError> {
        let mut s = Subset::empty(self.len());
        for l in labels {
            s.insert(self.index_of(l.as_ref())?);
        }
        Ok(s)
    }

    pub fn subset_labels(&self, a: &Subset) -> Vec<String> {
        a.iter().map(|i| self.labels[i].clone()).collect()
    }
}

fn default_labels(k: usize) -> Vec<String> {
    (0..k).map(|i| format!("x{i}")).collect()
}

fn check_unique(labels: &[String]) -> Result<(), SpaceError> {
    let mut seen = std::collections::HashSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(SpaceError::DuplicateLabel(l.clone()));
        }
    }
    Ok(())
}

/// A subset of a `K`-point space, stored as a membership mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Subset {
    members: Vec<bool>,
}

impl Subset {
    pub fn empty(k: usize) -> Self {
        Self { members: vec![false; k] }
    }

    pub fn full(k: usize) -> Self {
        Self { members: vec![true; k] }
    }

    pub fn singleton(k: usize, x: usize) -> Self {
        let mut s = Self::empty(k);
        s.insert(x);
        s
    }

    pub fn from_fn(k: usize, f: impl Fn(usize) -> bool) -> Self {
        Self { members: (0..k).map(f).collect() }
    }

    pub fn from_indices(k: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(k);
        for i in idx {
            s.insert(i);
        }
        s
    }

    /// Bit `i` of `mask` decides membership of point `i`.
    pub fn from_mask(k: usize, mask: u64) -> Self {
        debug_assert!(k <= 64);
        Self::from_fn(k, |i| mask >> i & 1 == 1)
    }

    /// Inverse of [`Subset::from_mask`]; `None` above 64 points.
    pub fn mask(&self) -> Option<u64> {
        if self.members.len() > 64 {
            return None;
        }
        Some(self.iter().fold(0u64, |m, i| m | 1 << i))
    }

    pub fn universe(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, x: usize) -> bool {
        self.members[x]
    }

    pub fn insert(&mut self, x: usize) {
        self.members[x] = true;
    }

    pub fn count(&self) -> usize {
        self.members.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.members.iter().any(|&b| b)
    }

    pub fn is_full(&self) -> bool {
        self.members.iter().all(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn complement(&self) -> Self {
        Self { members: self.members.iter().map(|b| !b).collect() }
    }

    pub fn union(&self, other: &Self) -> Self {
        Self { members: self.members.iter().zip(&other.members).map(|(a, b)| *a || *b).collect() }
    }

    pub fn intersection(&self, other: &Self) -> Self {
        Self { members: self.members.iter().zip(&other.members).map(|(a, b)| *a && *b).collect() }
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.members.iter().zip(&other.members).all(|(a, b)| !a || *b)
    }

    /// Bit-string rendering, point 0 first (`"1010"`).
    pub fn to_bit_string(&self) -> String {
        self.members.iter().map(|&b| if b { '1' } else { '0' }).collect()
    }
}

/// A real-valued function on the points of a finite space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BoundedFunction {
    values: Vec<f64>,
}

impl BoundedFunction {
    pub fn new(values: Vec<f64>) -> Result<Self, SpaceError> {
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(SpaceError::NonFiniteValue { index, value });
        }
        Ok(Self { values })
    }

    pub fn constant(k: usize, c: f64) -> Self {
        Self::new(vec![c; k]).expect("constant must be finite")
    }

    pub fn zero(k: usize) -> Self {
        Self::constant(k, 0.0)
    }

    /// `inside` on `a`, `outside` on its complement.
    pub fn two_level(a: &Subset, inside: f64, outside: f64) -> Self {
        Self::new((0..a.universe()).map(|i| if a.contains(i) { inside } else { outside }).collect())
            .expect("levels must be finite")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn sup(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn inf(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn shift(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v + c).collect() }
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * a).collect() }
    }

    /// Pointwise maximum `f v g`.
    pub fn max_with(&self, other: &Self) -> Self {
        Self { values: self.values.iter().zip(&other.values).map(|(a, b)| a.max(*b)).collect() }
    }

    /// `lambda f + (1 - lambda) g`.
    pub fn mix(&self, other: &Self, lambda: f64) -> Self {
        Self {
            values: self.values.iter().zip(&other.values).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
        }
    }

    /// `sup_x |f(x) - g(x)|`.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Strict superlevel set `{f > r}`.
    pub fn superlevel(&self, r: f64) -> Subset {
        Subset::from_fn(self.len(), |i| self.values[i] > r)
    }

    pub fn le(&self, other: &Self) -> bool {
        self.values.iter().zip(&other.values).all(|(a, b)| a <= b)
    }
}

impl TryFrom<Vec<f64>> for BoundedFunction {
    type Error = SpaceError;

    fn try_from(v: Vec<f64>) -> Result<Self, SpaceError> {
        Self::new(v)
    }
}

impl From<BoundedFunction> for Vec<f64> {
    fn from(f: BoundedFunction) -> Vec<f64> {
        f.values
    }
}

/// A probability vector, stored by log-weights so that masses such as
/// `exp(-16384)` stay representable.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityVector {
    log_weights: Vec<f64>,
}

impl ProbabilityVector {
    pub fn from_weights(weights: &[f64]) -> Result<Self, SpaceError> {
        if weights.is_empty() {
            return Err(SpaceError::Empty);
        }
        if let Some((index, &value)) = weights.iter().enumerate().find(|(_, w)| !w.is_finite() || **w < 0.0) {
            return Err(SpaceError::InvalidWeight { index, value });
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > MASS_TOL {
            return Err(SpaceError::NotNormalized { sum });
        }
        Ok(Self { log_weights: weights.iter().map(|w| w.ln()).collect() })
    }

    pub fn from_log_weights(log_weights: Vec<f64>) -> Result<Self, SpaceError> {
        if log_weights.is_empty() {
            return Err(SpaceError::Empty);
        }
        if let Some((index, &value)) =
            log_weights.iter().enumerate().find(|(_, w)| w.is_nan() || **w == f64::INFINITY || **w > MASS_TOL)
        {
            return Err(SpaceError::InvalidWeight { index, value });
        }
        let total = log_sum_exp(log_weights.iter().copied());
        if total.abs() > MASS_TOL {
            return Err(SpaceError::NotNormalized { sum: total.exp() });
        }
        Ok(Self { log_weights })
    }

    pub fn uniform(k: usize) -> Self {
        Self { log_weights: vec![-(k as f64).ln(); k] }
    }

    pub fn point_mass(k: usize, x: usize) -> Self {
        Self { log_weights: (0..k).map(|i| if i == x { 0.0 } else { f64::NEG_INFINITY }).collect() }
    }

    pub fn len(&self) -> usize {
        self.log_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_weights.is_empty()
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// `log P(A)`, `-inf` for null sets.
    pub fn log_prob(&self, a: &Subset) -> f64 {
        log_sum_exp(a.iter().map(|i| self.log_weights[i]).collect::<Vec<_>>())
    }

    /// Whether the law is concentrated on one point.
    pub fn is_degenerate(&self) -> bool {
        self.log_weights.iter().filter(|w| **w > f64::NEG_INFINITY).count() == 1
    }
}
