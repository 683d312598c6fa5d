//! Closed-form families for which the rate function exists but the Laplace
//! principle or the tightness conditions fail.

use std::sync::Arc;

use super::{ClosedFormFamily, HorizonGrid, TruncatedLaw};
use crate::numeric::{log_add_exp, log_sub_exp};
use crate::space::{FiniteMetricSpace, Subset};

/// `log P(X_n = n) = log(1 - e^{-n}/(1 - e^{-n}) + e^{-n^2})`.
fn log_mass_at_horizon(n: f64) -> f64 {
    (-1.0 / n.exp_m1() + (-n * n).exp()).ln_1p()
}

/// `X_n` on the naturals with `P(X_n = m) = e^{-nm}` for `m != n` and the
/// remaining mass at `m = n`, truncated to `{1, ..., m_max}`. The mass of
/// `{m > m_max}` is carried as the tail.
pub fn counterexample_naturals(m_max: usize) -> ClosedFormFamily {
    assert!(m_max >= 2, "truncation needs at least two points");
    let labels = (1..=m_max).map(|m| m.to_string()).collect();
    let coords = (1..=m_max).map(|m| m as f64).collect();
    let space = Arc::new(FiniteMetricSpace::line(labels, coords).expect("distinct naturals"));
    ClosedFormFamily::new(format!("naturals(m_max={m_max})"), space, move |n| {
        let nf = n as f64;
        let log_weights = (1..=m_max)
            .map(|m| if m == n as usize { log_mass_at_horizon(nf) } else { -nf * m as f64 })
            .collect();
        // sum_{m > m_max} e^{-nm} = e^{-n(m_max+1)} / (1 - e^{-n})
        let mut log_tail = -nf * (m_max as f64 + 1.0) - crate::numeric::log1m_exp(-nf);
        if n as usize > m_max {
            log_tail = log_add_exp(log_sub_exp(log_tail, -nf * nf), log_mass_at_horizon(nf));
        }
        TruncatedLaw { log_weights, log_tail }
    })
}

/// Reduced fractions `p/q` in `[-10, 10]`, by increasing `q` then `p`.
fn rational_enumeration(count: usize) -> Vec<(i64, i64)> {
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 {
            a.abs()
        } else {
            gcd(b, a % b)
        }
    }
    let mut out = Vec::with_capacity(count);
    let mut q = 1i64;
    while out.len() < count {
        for p in -10 * q..=10 * q {
            if gcd(p, q) == 1 {
                out.push((p, q));
                if out.len() == count {
                    break;
                }
            }
        }
        q += 1;
    }
    out
}

/// The deterministic enumeration `X_n = q_n` together with the grid, ball
/// radius and compact candidates that make its finite-horizon estimates
/// meaningful.
#[derive(Debug, Clone)]
pub struct RationalsFixture {
    pub family: ClosedFormFamily,
    /// Horizons `1..=q_count`; the tail window is the second half.
    pub grid: HorizonGrid,
    /// Smallest radius (slightly inflated) such that every ball contains a
    /// point visited inside the tail window.
    pub delta: f64,
    /// Nested finite prefixes `{q_1, ..., q_j}` of the enumeration.
    pub prefixes: Vec<Subset>,
    /// Intervals `[-a, a]` intersected with the enumerated points.
    pub intervals: Vec<(f64, Subset)>,
}

/// `X_n = q_n` for the first `q_count` rationals of the enumeration; for
/// `n > q_count` the point lies outside the truncation.
pub fn counterexample_rationals(q_count: usize) -> RationalsFixture {
    assert!(q_count >= 1, "need at least one rational");
    let fractions = rational_enumeration(q_count);
    let coords: Vec<f64> = fractions.iter().map(|&(p, q)| p as f64 / q as f64).collect();
    let labels = fractions.iter().map(|&(p, q)| if q == 1 { p.to_string() } else { format!("{p}/{q}") }).collect();
    let space = Arc::new(FiniteMetricSpace::line(labels, coords.clone()).expect("reduced fractions are distinct"));
    let family = ClosedFormFamily::new(format!("rationals(q_count={q_count})"), space, move |n| {
        let idx = n as usize;
        let log_weights =
            (1..=q_count).map(|i| if i == idx { 0.0 } else { f64::NEG_INFINITY }).collect();
        let log_tail = if idx >= 1 && idx <= q_count { f64::NEG_INFINITY } else { 0.0 };
        TruncatedLaw { log_weights, log_tail }
    });

    let window = (q_count / 2).max(1);
    let grid = HorizonGrid::new((1..=q_count as u32).collect(), window).expect("increasing horizons");
    let visited = &coords[q_count - window..];
    let reach = coords
        .iter()
        .map(|x| visited.iter().map(|v| (x - v).abs()).fold(f64::INFINITY, f64::min))
        .fold(0.0, f64::max);
    let delta = reach * (1.0 + 1e-9) + 1e-12;

    let mut prefixes = Vec::new();
    let mut j = 1;
    while j <= q_count - window {
        prefixes.push(Subset::from_fn(q_count, |i| i < j));
        j *= 2;
    }
    let intervals = [1.0, 2.5, 5.0, 7.5, 9.5]
        .iter()
        .map(|&a| (a, Subset::from_fn(q_count, |i| coords[i].abs() <= a)))
        .collect();
    RationalsFixture { family, grid, delta, prefixes, intervals }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ext::ExtReal;
    use crate::families::{outside_concentration_estimate, rate_estimate, DistributionSequence};
    use crate::numeric::log_sum_exp;
    use crate::par::Mode;

    #[test]
    fn naturals_mass_sums_to_one_before_truncation() {
        let fam = counterexample_naturals(64);
        for n in [1u32, 2, 3, 8, 63, 64, 65, 256, 4096] {
            let law = fam.law(n);
            let mut terms = law.log_weights.clone();
            terms.push(law.log_tail);
            assert!(log_sum_exp(terms).abs() < 1e-12, "n = {n}");
        }
    }

    #[test]
    fn naturals_geometric_identity() {
        // sum_{m != n} e^{-nm} = e^{-n}/(1 - e^{-n}) - e^{-n^2}, checked by direct summation
        for n in 1..6 {
            let nf = n as f64;
            let direct: f64 = (1..200).filter(|&m| m != n).map(|m| (-nf * m as f64).exp()).sum();
            let closed = (-nf).exp() / (1.0 - (-nf).exp()) - (-nf * nf).exp();
            assert!((direct - closed).abs() < 1e-15);
        }
    }

    #[test]
    fn naturals_rates_and_outer_concentration() {
        let fam = counterexample_naturals(64);
        let grid = HorizonGrid::powers(3, 8);
        let rates = rate_estimate(&fam, None, &grid, Mode::Auto).unwrap();
        for m in 1..=8 {
            assert!(rates[m - 1].approx_eq(ExtReal::Finite(m as f64), 1e-6), "m = {m}: {}", rates[m - 1]);
        }
        for m in 1..=32 {
            let k = Subset::from_fn(64, |i| i < m);
            let j = outside_concentration_estimate(&fam, &k, &grid, Mode::Auto).upper();
            assert!(j.approx_eq(ExtReal::ZERO, 1e-2), "m = {m}: {j}");
        }
    }

    #[test]
    fn rationals_enumeration_is_reduced_and_bounded() {
        let e = rational_enumeration(256);
        assert_eq!(e.len(), 256);
        assert_eq!(&e[..3], &[(-10, 1), (-9, 1), (-8, 1)]);
        assert_eq!(e[21], (-19, 2));
        assert!(e.iter().all(|&(p, q)| (p as f64 / q as f64).abs() <= 10.0));
    }

    #[test]
    fn rationals_rates_vanish_and_outer_sets_are_charged() {
        let fx = counterexample_rationals(256);
        let rates = rate_estimate(&fx.family, Some(fx.delta), &fx.grid, Mode::Auto).unwrap();
        assert!(rates.iter().all(|r| *r == ExtReal::ZERO));
        for k in fx.prefixes.iter().chain(fx.intervals.iter().map(|(_, s)| s)) {
            assert_eq!(outside_concentration_estimate(&fx.family, k, &fx.grid, Mode::Auto).upper(), ExtReal::ZERO);
        }
    }
}
