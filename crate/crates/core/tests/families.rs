use std::sync::Arc;

use maxstable::families::cramer::{bernoulli_rate, cramer_demo, CramerConfig, LatticeLaw};
use maxstable::families::{
    asymptotic_entropy, counterexample_naturals, counterexample_rationals, finite_horizon_lp_gaps,
    outside_concentration_estimate, rate_estimate, ClosedFormFamily, DistributionSequence, Extension, HorizonGrid,
};
use maxstable::par::Mode;
use maxstable::{BoundedFunction, ExtReal, FiniteMetricSpace, ProbabilityVector, Subset};

#[test]
fn naturals_entropy_of_one_is_one_but_the_dual_is_zero() {
    // the tail window (32..256) lies past the truncation, so no horizon hits a kept point
    let fam = counterexample_naturals(16);
    let grid = HorizonGrid::powers(3, 8);
    let one = BoundedFunction::constant(16, 1.0);
    let est = asymptotic_entropy(&fam, &one, Extension::LastPoint, &grid, Mode::Auto).unwrap();
    assert!(est.at(256).unwrap() >= ExtReal::Finite(0.9));
    let rates = rate_estimate(&fam, None, &grid, Mode::Auto).unwrap();
    let dual = rates.iter().map(|&i| (1.0 - i).to_f64()).fold(f64::NEG_INFINITY, f64::max);
    assert!((est.upper().to_f64() - dual) >= 0.9);
    let rows = finite_horizon_lp_gaps(&fam, &one, Extension::LastPoint, &grid, Mode::Auto).unwrap();
    assert!(rows.last().unwrap().gap >= 0.9);
}

#[test]
fn naturals_rates_follow_the_closed_form() {
    let fam = counterexample_naturals(64);
    let grid = HorizonGrid::powers(3, 8);
    let rates = rate_estimate(&fam, None, &grid, Mode::Auto).unwrap();
    // -(1/n) log P_n(m) = m whenever n != m
    for (m, r) in rates.iter().enumerate().take(8) {
        assert!(r.approx_eq(ExtReal::Finite(m as f64 + 1.0), 1e-6));
    }
    for m in 1..=32 {
        let j = outside_concentration_estimate(&fam, &Subset::from_fn(64, |i| i < m), &grid, Mode::Auto).upper();
        assert!(-j <= ExtReal::Finite(1e-2));
    }
}

#[test]
fn rationals_entropy_tracks_the_visited_points() {
    let fx = counterexample_rationals(64);
    let fam = &fx.family;
    let coords: Vec<f64> = (0..64).map(|i| fam.space().dist(0, i) - 10.0).collect();
    let f = BoundedFunction::new(coords.iter().map(|x| (x * 0.7).sin()).collect()).unwrap();
    let est = asymptotic_entropy(fam, &f, Extension::Forbid, &fx.grid, Mode::Auto).unwrap();
    // X_n = q_n, so the value at horizon n is f(q_n)
    for (i, &n) in fx.grid.horizons().iter().enumerate() {
        assert!(est.values[i].approx_eq(ExtReal::Finite(f.get(n as usize - 1)), 1e-12));
    }
    let c = BoundedFunction::constant(64, 2.5);
    let est = asymptotic_entropy(fam, &c, Extension::Forbid, &fx.grid, Mode::Auto).unwrap();
    assert!(est.values.iter().all(|v| v.approx_eq(ExtReal::Finite(2.5), 1e-12)));
}

#[test]
fn rationals_rates_and_outer_concentrations_vanish() {
    let fx = counterexample_rationals(256);
    let rates = rate_estimate(&fx.family, Some(fx.delta), &fx.grid, Mode::Auto).unwrap();
    assert!(rates.iter().all(|r| r.approx_eq(ExtReal::ZERO, 1e-9)));
    for k in &fx.prefixes {
        assert_eq!(outside_concentration_estimate(&fx.family, k, &fx.grid, Mode::Auto).upper(), ExtReal::ZERO);
    }
}

#[test]
fn envelope_max_stability_is_off_by_at_most_log_two_over_the_tail_horizon() {
    let grid = HorizonGrid::default();
    let n_tail = grid.horizons()[grid.horizons().len() - grid.window()] as f64;
    let slack = std::f64::consts::LN_2 / n_tail + 1e-6;
    let coin = ClosedFormFamily::stationary(Arc::new(FiniteMetricSpace::discrete(2).unwrap()), ProbabilityVector::uniform(2));
    let families: Vec<(Box<dyn DistributionSequence>, Extension)> = vec![
        (Box::new(coin), Extension::Forbid),
        (Box::new(ClosedFormFamily::two_point(0.8)), Extension::Forbid),
        (Box::new(counterexample_naturals(16)), Extension::LastPoint),
    ];
    let mut worst: f64 = 0.0;
    for (fam, ext) in &families {
        let k = fam.space().len();
        for s in 0..20 {
            let f = BoundedFunction::new((0..k).map(|i| ((i * 7 + s) % 5) as f64 * 0.5).collect()).unwrap();
            let g = BoundedFunction::new((0..k).map(|i| ((i * 3 + 2 * s) % 4) as f64 * 0.6).collect()).unwrap();
            let joint = asymptotic_entropy(fam.as_ref(), &f.max_with(&g), *ext, &grid, Mode::Auto).unwrap().upper();
            let a = asymptotic_entropy(fam.as_ref(), &f, *ext, &grid, Mode::Auto).unwrap().upper();
            let b = asymptotic_entropy(fam.as_ref(), &g, *ext, &grid, Mode::Auto).unwrap().upper();
            let gap = joint.to_f64() - a.max(b).to_f64();
            assert!(gap <= slack, "{}: {gap}", fam.name());
            worst = worst.max(gap);
        }
    }
    // the fair coin with f = (1, 0), g = (0, 1) nearly attains the slack at n = 4096
    assert!(worst > 0.0);
}

#[test]
fn bernoulli_legendre_and_ball_rates() {
    let law = LatticeLaw::bernoulli(0.5).unwrap();
    let cfg = CramerConfig { horizons: vec![1024, 4096], ..Default::default() };
    let rep = cramer_demo(&law, &cfg).unwrap();
    assert_eq!(rep.grid.len(), 99);
    for (x, i) in rep.grid.iter().zip(&rep.legendre) {
        let oracle = std::f64::consts::LN_2 + x * x.ln() + (1.0 - x) * (1.0 - x).ln();
        assert!(i.approx_eq(ExtReal::Finite(oracle), 1e-6));
    }
    for x in [0.25, 0.75] {
        let b = rep.ball_rate_at(4096, x).unwrap();
        assert!(b.approx_eq(law.legendre(x), 5e-2));
    }
    assert!(rep.rows[1].sup_gap < rep.rows[0].sup_gap);
}

#[test]
fn biased_coin_matches_relative_entropy() {
    let law = LatticeLaw::bernoulli(0.3).unwrap();
    for i in 1..20 {
        let x = i as f64 / 20.0;
        let oracle = x * (x / 0.3).ln() + (1.0 - x) * ((1.0 - x) / 0.7).ln();
        assert!(law.legendre(x).approx_eq(ExtReal::Finite(oracle), 1e-9));
        assert!(bernoulli_rate(0.3, x).approx_eq(ExtReal::Finite(oracle), 1e-12));
    }
    assert_eq!(law.legendre(0.3), ExtReal::ZERO);
}

#[test]
fn point_mass_is_degenerate() {
    let law = LatticeLaw::new(2.0, 1.0, &[1.0]).unwrap();
    assert!(cramer_demo(&law, &CramerConfig::default()).is_err());
}
