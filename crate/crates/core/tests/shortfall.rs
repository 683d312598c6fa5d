use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use maxstable::families::cramer::LatticeLaw;
use maxstable::families::{asymptotic_entropy, ClosedFormFamily, Extension, HorizonGrid};
use maxstable::maxitive::RSchedule;
use maxstable::par::Mode;
use maxstable::shortfall::{
    asymptotic_shortfall, asymptotic_shortfall_mean, check_shift_condition, default_shift_grid,
    shortfall_concentration, shortfall_risk, transformed_ldp_demo, wrate_formulas, wrate_point, Bijection,
    LossExponent, TransformedConfig,
};
use maxstable::{BoundedFunction, ExtReal, ProbabilityVector, Subset};

// (1/n) log sum p e^{n z}, shifted by the max for stability
fn entropic_oracle(z: &[f64], p: &[f64], n: f64) -> f64 {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    m + z.iter().zip(p).map(|(z, p)| p * (n * (z - m)).exp()).sum::<f64>().ln() / n
}

#[test]
fn linear_shortfall_equals_entropic_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..100 {
        let k = rng.gen_range(2..=8);
        let mut w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= total);
        let law = ProbabilityVector::from_log_weights(w.iter().map(|v| v.ln()).collect()).unwrap();
        let z: Vec<f64> = (0..k).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for n in [1.0, 4.0, 16.0] {
            let v = shortfall_risk(&z, &law, &LossExponent::LinearScaled, n).unwrap();
            assert!((v - entropic_oracle(&z, &w, n)).abs() <= 1e-8);
        }
    }
}

#[test]
fn linear_asymptotic_shortfall_matches_asymptotic_entropy() {
    let fam = ClosedFormFamily::two_point(1.3);
    let grid = HorizonGrid::default();
    let f = BoundedFunction::new(vec![0.2, 1.5]).unwrap();
    let a = asymptotic_shortfall(&fam, &f, Extension::Forbid, &LossExponent::LinearScaled, &grid, Mode::Auto).unwrap();
    let b = asymptotic_entropy(&fam, &f, Extension::Forbid, &grid, Mode::Auto).unwrap();
    for (x, y) in a.values.iter().zip(&b.values) {
        assert!(x.approx_eq(*y, 1e-8));
    }
    let c = BoundedFunction::constant(2, -0.4);
    let est = asymptotic_shortfall(&fam, &c, Extension::Forbid, &LossExponent::power(2.0).unwrap(), &grid, Mode::Auto)
        .unwrap();
    assert!(est.values.iter().all(|v| *v == ExtReal::Finite(-0.4)));
}

#[test]
fn inverse_formula_and_schedule_route_agree() {
    let grid = HorizonGrid::powers(6, 10);
    for rate in [0.5, 1.0, 2.0] {
        let fam = ClosedFormFamily::two_point(rate);
        for p in [0.5, 1.0, 2.0] {
            let loss = LossExponent::power(p).unwrap();
            for b in [Subset::singleton(2, 0), Subset::singleton(2, 1), Subset::full(2)] {
                let formula = wrate_formulas(&fam, &b, &loss, &grid, Mode::Auto);
                let route = shortfall_concentration(&fam, &b, &loss, &grid, &RSchedule::default(), Mode::Auto).unwrap();
                assert!(formula.at(1024).unwrap().approx_eq(route.at(1024).unwrap(), 1e-4));
                assert!(formula.upper().approx_eq(route.upper(), 1e-4));
            }
            // closed form: w_n^{-1}(n rate) = rate^{1/p}
            let at = wrate_formulas(&fam, &Subset::singleton(2, 1), &loss, &grid, Mode::Auto).at(1024).unwrap();
            assert!(at.approx_eq(ExtReal::Finite(-rate.powf(1.0 / p)), 1e-12));
        }
    }
}

#[test]
fn power_two_rate_on_the_two_point_family() {
    let fam = ClosedFormFamily::two_point(1.0);
    let loss = LossExponent::power(2.0).unwrap();
    let est = wrate_point(&fam, 1, None, &loss, &HorizonGrid::default(), Mode::Auto).unwrap();
    assert!(est.lower().approx_eq(ExtReal::Finite(1.0), 1e-12));
    let linear = wrate_point(&fam, 1, None, &LossExponent::LinearScaled, &HorizonGrid::default(), Mode::Auto).unwrap();
    assert!(linear.lower().approx_eq(ExtReal::Finite(1.0), 1e-12));
}

#[test]
fn transformed_rates_are_square_roots_of_cramer_rates() {
    let law = LatticeLaw::bernoulli(0.5).unwrap();
    let rep = transformed_ldp_demo(&law, Bijection::SignedPower { q: 0.5 }, &TransformedConfig::default()).unwrap();
    assert!(rep.rates_hold && rep.lp_holds, "{} {}", rep.rate_gap, rep.lp_gap);
    for row in &rep.rate_rows {
        // sqrt of the exact ball rate, independently of the shortfall solver
        let oracle = row.ball_rate.to_f64().sqrt();
        assert!(row.shortfall_rate.approx_eq(ExtReal::Finite(oracle), 1e-6), "{row:?}");
    }
}

#[test]
fn shortfall_of_sample_means_is_bracketed_by_the_outcomes() {
    let law = LatticeLaw::bernoulli(0.5).unwrap();
    let f = |x: f64| (3.0 * x).sin();
    let loss = LossExponent::power(2.0).unwrap();
    let est = asymptotic_shortfall_mean(&law, &f, &loss, &HorizonGrid::powers(3, 8), Mode::Auto).unwrap();
    for v in &est.values {
        assert!(*v <= ExtReal::Finite(3f64.sin().max(1.0)) && *v >= ExtReal::Finite(0.0));
    }
}

#[test]
fn shift_condition_for_named_kinds() {
    for loss in [LossExponent::LinearScaled, LossExponent::power(0.5).unwrap(), LossExponent::power(2.0).unwrap()] {
        assert!(check_shift_condition(&loss, &default_shift_grid()).holds);
    }
}
