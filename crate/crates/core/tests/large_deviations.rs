use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maxstable::families::cramer::{outside_interval_estimates, LatticeLaw};
use maxstable::families::{
    counterexample_naturals, counterexample_rationals, envelope_measure, rate_estimate, Extension, HorizonGrid, Side,
};
use maxstable::ldp::{
    check_local_max_stability, family_tightness_candidates, ldp_check, lp_check, pair_sandwich_check,
    rate_from_balls, tightness_check, two_level_corpus, varadhan_bryc_equivalence, EquivalenceConfig,
    RateFunction, TightnessCandidate, TightnessConfig,
};
use maxstable::maxitive::{ConcentrationTable, RSchedule};
use maxstable::par::Mode;
use maxstable::{CheckConfig, ExtReal, FiniteMetricSpace, RiskMeasure, Subset};

fn random_atomic(rng: &mut ChaCha8Rng, k: usize) -> (RiskMeasure, Vec<f64>) {
    let mut g: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..3.0)).collect();
    g[rng.gen_range(0..k)] = 0.0;
    let phi = RiskMeasure::atomic_finite(Arc::new(FiniteMetricSpace::discrete(k).unwrap()), &g).unwrap();
    (phi, g)
}

#[test]
fn equivalence_and_uniqueness_on_random_atomic_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = EquivalenceConfig { check: CheckConfig::with_trials(200), ..Default::default() };
    for trial in 0..200 {
        let k = rng.gen_range(1..=8);
        let (phi, gamma) = random_atomic(&mut rng, k);
        let rep = varadhan_bryc_equivalence(&phi, &cfg).unwrap();
        assert!(rep.equivalence_holds, "trial {trial}");
        assert!(rep.uniqueness_holds, "trial {trial}");
        for x in 0..k {
            assert!(rep.rate.get(x).approx_eq(ExtReal::Finite(gamma[x]), 1e-12));
        }
        // J_A = -min_A I exactly on every nonempty subset
        for row in &rep.ldp.rows {
            assert_eq!(row.lower, row.j);
            assert_eq!(row.j, row.upper);
        }
    }
}

#[test]
fn shifted_rate_breaks_the_upper_bound() {
    let gamma = [0.4, 0.0, 1.2, 0.9];
    let s = Arc::new(FiniteMetricSpace::discrete(4).unwrap());
    let phi = RiskMeasure::atomic_finite(s.clone(), &gamma).unwrap();
    let table = ConcentrationTable::build(&phi, &RSchedule::default(), Mode::Auto).unwrap();
    let shifted = RateFunction::from_finite(&gamma.map(|g| g + 1.0)).unwrap();
    let v = ldp_check(&table, &shifted, &s, 1e-12, Mode::Auto).unwrap();
    assert!(!v.holds);
    assert!(v.worst_upper_gap.approx_eq(ExtReal::Finite(1.0), 1e-12));
    // a uniform shift ties every set at gap 1
    assert!(v.upper_witness.is_some());
}

#[test]
fn any_rate_passing_the_laplace_check_dominates_the_minimal_rate() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut accepted = 0;
    for _ in 0..300 {
        let k = rng.gen_range(2..=5);
        let (phi, gamma) = random_atomic(&mut rng, k);
        let candidate: Vec<f64> = gamma
            .iter()
            .map(|g| if rng.gen_bool(0.5) { g + rng.gen_range(-0.5..0.5f64) } else { *g })
            .map(|v| v.max(0.0))
            .collect();
        let rate = RateFunction::from_finite(&candidate).unwrap();
        if lp_check(&phi, &rate, &CheckConfig::with_trials(200)).unwrap().holds {
            accepted += 1;
            for x in 0..k {
                assert!(candidate[x] >= gamma[x] - 1e-12);
            }
        }
    }
    assert!(accepted > 0);
}

#[test]
fn lower_bound_holds_for_non_max_stable_measures() {
    let s = Arc::new(FiniteMetricSpace::discrete(3).unwrap());
    let law = maxstable::ProbabilityVector::from_weights(&[0.5, 0.3, 0.2]).unwrap();
    let phi = RiskMeasure::entropic(s.clone(), law, 2).unwrap();
    let rate = rate_from_balls(&phi, &RSchedule::default(), Mode::Auto).unwrap();
    let table = ConcentrationTable::build(&phi, &RSchedule::default(), Mode::Auto).unwrap();
    let v = ldp_check(&table, &rate, &s, 1e-9, Mode::Auto).unwrap();
    assert!(v.worst_lower_gap <= ExtReal::Finite(1e-9));
    assert!(!lp_check(&phi, &rate, &CheckConfig::with_trials(200)).unwrap().holds);
}

#[test]
fn local_max_stability_of_atomic_measures() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let k = rng.gen_range(2..=6);
        let (phi, _) = random_atomic(&mut rng, k);
        let kset = Subset::from_fn(k, |i| i % 2 == 0);
        assert!(check_local_max_stability(&phi, &kset, &CheckConfig::with_trials(100)).unwrap().passed);
    }
}

#[test]
fn tightness_fails_for_the_naturals_family() {
    let fam = counterexample_naturals(64);
    let chain: Vec<Subset> = (1..=32).map(|m| Subset::from_fn(64, |i| i < m)).collect();
    let names: Vec<String> = (1..=32).map(|m| format!("{{1..{m}}}")).collect();
    let cands = family_tightness_candidates(&fam, &chain, &names, &HorizonGrid::default(), None, Mode::Auto).unwrap();
    let rep = tightness_check(&cands, &TightnessConfig::default());
    assert!(!rep.condition_a && !rep.condition_b);
    for row in &rep.rows {
        assert!(row.neg_outer_j.approx_eq(ExtReal::ZERO, 1e-2));
    }
}

#[test]
fn rationals_satisfy_condition_b_with_zero_level() {
    let fx = counterexample_rationals(256);
    let names: Vec<String> = (0..fx.prefixes.len()).map(|j| format!("prefix {j}")).collect();
    let cands = family_tightness_candidates(&fx.family, &fx.prefixes, &names, &fx.grid, Some(fx.delta), Mode::Auto)
        .unwrap();
    let rep = tightness_check(&cands, &TightnessConfig::default());
    assert!(rep.condition_b);
    assert!(!rep.condition_a);
    assert_eq!(rep.i_infinity, ExtReal::ZERO);
}

#[test]
fn gaussian_sample_means_show_growth() {
    let law = LatticeLaw::truncated_gaussian(8, 0.25, 1.0).unwrap();
    let radii = [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 1.875];
    let grid = HorizonGrid::powers(3, 9);
    let outer = outside_interval_estimates(&law, &radii, &grid, Mode::Auto);
    let cands: Vec<TightnessCandidate> = radii
        .iter()
        .zip(outer)
        .map(|(r, o)| TightnessCandidate { name: format!("[-{r}, {r}]"), outer: o, rate_outside: None })
        .collect();
    let rep = tightness_check(&cands, &TightnessConfig::default());
    assert!(rep.condition_a, "{:?}", rep.rows);
    // Chernoff: P(|mean| > r) <= 2 exp(-n I(r)) for the symmetric law
    let n_tail = grid.horizons()[grid.horizons().len() - grid.window()] as f64;
    for (row, r) in rep.rows.iter().zip(radii) {
        let bound = law.legendre(r).finite().unwrap() - std::f64::consts::LN_2 / n_tail;
        assert!(row.neg_outer_j >= ExtReal::Finite(bound - 1e-9), "{}: {} < {bound}", row.name, row.neg_outer_j);
    }
}

#[test]
fn envelope_pair_for_the_naturals_family_fails_agreement_only() {
    let grid = HorizonGrid::default();
    let upper = envelope_measure(counterexample_naturals(10), Extension::LastPoint, grid.clone(), Side::Upper);
    let lower = envelope_measure(counterexample_naturals(10), Extension::LastPoint, grid.clone(), Side::Lower);
    let rate = RateFunction::new(rate_estimate(&counterexample_naturals(10), None, &grid, Mode::Auto).unwrap()).unwrap();
    for m in 0..10 {
        assert!(rate.get(m).approx_eq(ExtReal::Finite(m as f64 + 1.0), 1e-9));
    }
    let rep = pair_sandwich_check(&upper, &lower, &rate, &two_level_corpus(10), &RSchedule::default(), 1e-6, Mode::Auto)
        .unwrap();
    assert!(rep.lower_bound_holds);
    assert!(!rep.agreement_holds);
    assert!(rep.consistent);
}
