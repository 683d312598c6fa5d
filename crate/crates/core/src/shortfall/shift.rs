//! Numerical check of `limsup w_n^{-1}(a + a_n) = limsup w_n^{-1}(a_n)`.

use serde::Serialize;

use super::LossExponent;
use crate::ext::ExtReal;
use crate::families::HorizonGrid;

pub const SHIFT_TOL: f64 = 1e-2;
pub const SHIFTS: [f64; 4] = [-10.0, -1.0, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftRow {
    pub a: f64,
    pub sequence: &'static str,
    /// Tail max of `w_n^{-1}(a + a_n)`.
    pub shifted: ExtReal,
    /// Tail max of `w_n^{-1}(a_n)`.
    pub unshifted: ExtReal,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftReport {
    pub loss: String,
    pub certified: bool,
    pub warning: Option<String>,
    pub horizons: Vec<u32>,
    pub rows: Vec<ShiftRow>,
    pub holds: bool,
}

fn sequences() -> [(&'static str, fn(f64) -> f64); 6] {
    [
        ("zero", |_| 0.0),
        ("1/n", |n| 1.0 / n),
        ("1+1/n", |n| 1.0 + 1.0 / n),
        ("n", |n| n),
        ("sqrt(n)", |n| n.sqrt()),
        ("n^2", |n| n * n),
    ]
}

fn close(a: ExtReal, b: ExtReal) -> bool {
    if a == b {
        return true;
    }
    match (a, b) {
        (ExtReal::Finite(x), ExtReal::Finite(y)) => {
            let d = (x - y).abs();
            d <= SHIFT_TOL || d <= SHIFT_TOL * x.abs().max(y.abs())
        }
        _ => false,
    }
}

/// Compares the tail-window maxima of both sides for every shift in
/// [`SHIFTS`] and a set of bounded and divergent sequences. The default
/// horizons are `2^10 .. 2^20`.
pub fn check_shift_condition(loss: &LossExponent, grid: &HorizonGrid) -> ShiftReport {
    let tail = &grid.horizons()[grid.horizons().len() - grid.window()..];
    let tail_max = |g: &dyn Fn(f64) -> f64| {
        tail.iter().map(|&n| loss.inverse(n as f64, ExtReal::from_f64(g(n as f64)))).max().expect("nonempty window")
    };
    let mut rows = Vec::new();
    for (name, seq) in sequences() {
        let unshifted = tail_max(&seq);
        for a in SHIFTS {
            let shifted = tail_max(&|n| a + seq(n));
            rows.push(ShiftRow { a, sequence: name, shifted, unshifted, holds: close(shifted, unshifted) });
        }
    }
    let certified = loss.is_certified();
    ShiftReport {
        loss: loss.name(),
        certified,
        warning: (!certified).then(|| "the shift condition cannot be certified for tabulated exponents".to_string()),
        horizons: grid.horizons().to_vec(),
        holds: rows.iter().all(|r| r.holds),
        rows,
    }
}

pub fn default_shift_grid() -> HorizonGrid {
    HorizonGrid::powers(10, 20)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shortfall::{Bijection, StepTable};

    #[test]
    fn named_kinds_satisfy_the_shift_condition() {
        let grid = default_shift_grid();
        for loss in [
            LossExponent::LinearScaled,
            LossExponent::power(0.5).unwrap(),
            LossExponent::power(2.0).unwrap(),
            LossExponent::transform(Bijection::SignedPower { q: 0.5 }).unwrap(),
        ] {
            let rep = check_shift_condition(&loss, &grid);
            assert!(rep.holds && rep.certified, "{}: {:?}", rep.loss, rep.rows.iter().find(|r| !r.holds));
            assert_eq!(rep.rows.len(), 24);
        }
    }

    #[test]
    fn tables_carry_a_warning() {
        let step = StepTable::new(vec![0.0], vec![ExtReal::ZERO, ExtReal::PosInf]).unwrap();
        let rep = check_shift_condition(&LossExponent::CustomTable(step), &default_shift_grid());
        assert!(!rep.certified && rep.warning.is_some());
    }
}
