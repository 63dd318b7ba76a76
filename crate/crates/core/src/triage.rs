//! Testing-capacity lift from pre-screening.
//!
//! Screening `n` people at prevalence `rho` with sensitivity `sn` and
//! specificity `sp` clears `TN = sp (1 - rho) n` and `FN = (1 - sn) rho n`
//! without a confirmatory test, so the same test budget covers
//! `L = n / (n - (TN + FN)) = 1 / (1 - [(1 - rho) sp + rho (1 - sn)])`
//! times as many people.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{spec_at_sens, RocCurve};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriageParams {
    pub prevalence: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

impl TriageParams {
    pub fn new(prevalence: f64, sensitivity: f64, specificity: f64) -> Self {
        Self { prevalence, sensitivity, specificity }
    }

    /// Fraction of the screened population still referred for testing.
    pub fn referred_fraction(&self) -> f64 {
        1.0 - ((1.0 - self.prevalence) * self.specificity + self.prevalence * (1.0 - self.sensitivity))
    }

    /// `(TN, FN)` for a population of `n`.
    pub fn cleared(&self, n: f64) -> (f64, f64) {
        (self.specificity * (1.0 - self.prevalence) * n, self.prevalence * n * (1.0 - self.sensitivity))
    }
}

/// Capacity lift. A zero or negative referred fraction is reported before
/// any range violation, since it is the condition callers usually hit.
pub fn lift(p: &TriageParams) -> Result<f64> {
    let denominator = p.referred_fraction();
    if !(denominator > 0.0) {
        return Err(Error::DegenerateTriage { denominator });
    }
    if !(p.prevalence > 0.0 && p.prevalence < 1.0) {
        return Err(Error::InvalidTriageParams(format!("prevalence {} outside (0, 1)", p.prevalence)));
    }
    for (name, v) in [("sensitivity", p.sensitivity), ("specificity", p.specificity)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidTriageParams(format!("{name} {v} outside [0, 1]")));
        }
    }
    Ok(1.0 / denominator)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftRow {
    pub prevalence: f64,
    pub lift: f64,
    /// `L - 1` as a whole percentage.
    pub percent: i64,
}

pub fn lift_row(sensitivity: f64, specificity: f64, prevalence: f64) -> Result<LiftRow> {
    let lift = lift(&TriageParams::new(prevalence, sensitivity, specificity))?;
    Ok(LiftRow { prevalence, lift, percent: ((lift - 1.0) * 100.0).round() as i64 })
}

pub fn lift_table(sensitivity: f64, specificity: f64, prevalences: &[f64]) -> Vec<Result<LiftRow>> {
    prevalences.iter().map(|&rho| lift_row(sensitivity, specificity, rho)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    /// `None` where nobody would be referred.
    pub lift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub prevalence: f64,
    pub rows: Vec<SweepRow>,
    /// Best specificity at sensitivity >= 0.9.
    pub operating_point: SweepRow,
}

pub fn sweep(curve: &RocCurve, prevalence: f64) -> Sweep {
    let row = |threshold, sensitivity, specificity| SweepRow {
        threshold,
        sensitivity,
        specificity,
        lift: lift(&TriageParams::new(prevalence, sensitivity, specificity)).ok(),
    };
    let rows = curve.points.iter().map(|p| row(p.threshold, p.sensitivity, p.specificity)).collect();
    let op = spec_at_sens(curve, 0.9);
    Sweep { prevalence, rows, operating_point: row(op.threshold, op.sensitivity, op.specificity) }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc;

    #[test]
    fn capacity_table() {
        let rows: Vec<LiftRow> = lift_table(0.90, 0.31, &[0.01, 0.05, 0.10, 0.30]).into_iter().map(|r| r.unwrap()).collect();
        let pct: Vec<i64> = rows.iter().map(|r| r.percent).collect();
        assert_eq!(pct, vec![44, 43, 41, 33]);
        for (r, want) in rows.iter().zip([1.4449, 1.4276, 1.4065, 1.3280]) {
            assert!((r.lift - want).abs() < 5e-3);
        }
        // 1 / (1 - (0.99 * 0.31 + 0.01 * 0.10)) = 1 / 0.6921
        assert!((rows[0].lift - 1.0 / 0.6921).abs() < 1e-12);
    }

    #[test]
    fn no_specificity_no_gain() {
        assert_eq!(lift(&TriageParams::new(0.2, 1.0, 0.0)).unwrap(), 1.0);
        assert!(lift_table(1.0, 0.0, &[0.01, 0.05, 0.10, 0.30]).into_iter().all(|r| r.unwrap().percent == 0));
        // With imperfect sensitivity, missed positives skip testing too.
        assert_eq!(lift_row(0.9, 0.0, 0.30).unwrap().percent, 3);
    }

    #[test]
    fn degenerate_before_range() {
        assert!(matches!(lift(&TriageParams::new(0.0, 0.9, 1.0)), Err(Error::DegenerateTriage { .. })));
        assert!(matches!(lift(&TriageParams::new(0.0, 0.9, 0.5)), Err(Error::InvalidTriageParams(_))));
        assert!(matches!(lift(&TriageParams::new(0.1, 1.2, 0.5)), Err(Error::InvalidTriageParams(_))));
    }

    #[test]
    fn population_identity() {
        let p = TriageParams::new(0.05, 0.9, 0.31);
        let n = 10_000.0;
        let (tn, fn_) = p.cleared(n);
        let l = lift(&p).unwrap();
        assert!((n * (1.0 - 1.0 / l) - (tn + fn_)).abs() < 1e-9);
    }

    #[test]
    fn sweep_perfect_and_random() {
        let c = roc(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false]).unwrap();
        let s = sweep(&c, 0.05);
        let perfect = s.rows.iter().find(|r| r.sensitivity == 1.0 && r.specificity == 1.0).unwrap();
        assert!((perfect.lift.unwrap() - 20.0).abs() < 1e-9);
        assert_eq!(s.operating_point.specificity, 1.0);
        assert!(s.rows[0].lift.is_none(), "nobody referred at +inf threshold");

        let random = lift(&TriageParams::new(0.05, 0.9, 0.1)).unwrap();
        assert!((random - 1.0 / (1.0 - (0.95 * 0.1 + 0.05 * 0.1))).abs() < 1e-15);
        assert!((random - 1.111_111_1).abs() < 1e-6);
    }
}
