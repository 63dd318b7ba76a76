//! ROC analysis, operating points, fold statistics and a one-sample t-test.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Predict positive when `score >= threshold`.
    pub threshold: f64,
    pub sensitivity: f64,
    pub specificity: f64,
}

/// Points sorted by descending threshold, bracketed by `+inf` (everyone
/// negative) and `-inf` (everyone positive).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
    pub positives: usize,
    pub negatives: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn at(scores: &[f64], labels: &[bool], threshold: f64) -> Self {
        let mut c = ConfusionCounts { tp: 0, tn: 0, fp: 0, fn_: 0 };
        for (&s, &y) in scores.iter().zip(labels) {
            match (s >= threshold, y) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        c
    }

    pub fn sensitivity(&self) -> f64 {
        self.tp as f64 / (self.tp + self.fn_) as f64
    }

    pub fn specificity(&self) -> f64 {
        self.tn as f64 / (self.tn + self.fp) as f64
    }
}

pub fn roc(scores: &[f64], labels: &[bool]) -> Result<RocCurve> {
    if scores.len() != labels.len() {
        return Err(Error::InvalidPredictions(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidPredictions("NaN score".into()));
    }
    let p = labels.iter().filter(|&&y| y).count();
    let n = labels.len() - p;
    if p == 0 || n == 0 {
        return Err(Error::SingleClassInput { positives: p, negatives: n });
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint { threshold: f64::INFINITY, sensitivity: 0.0, specificity: 1.0 }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut auc2 = 0.0; // twice the area, in units of 1/(p n)
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        auc2 += ((fp - fp0) * (tp + tp0)) as f64;
        points.push(RocPoint { threshold: s, sensitivity: tp as f64 / p as f64, specificity: 1.0 - fp as f64 / n as f64 });
    }
    points.push(RocPoint { threshold: f64::NEG_INFINITY, sensitivity: 1.0, specificity: 0.0 });
    Ok(RocCurve { points, auc: auc2 / (2.0 * p as f64 * n as f64), positives: p, negatives: n })
}

/// Best specificity among points with sensitivity `>= target`, taking the
/// largest threshold on ties. Returns the qualifying point.
pub fn spec_at_sens(curve: &RocCurve, target: f64) -> RocPoint {
    let mut best: Option<RocPoint> = None;
    for pt in &curve.points {
        if pt.sensitivity + 1e-12 >= target && best.is_none_or(|b| pt.specificity > b.specificity) {
            best = Some(*pt);
        }
    }
    best.unwrap_or(*curve.points.last().expect("curve has endpoints"))
}

pub fn write_roc_csv(path: &Path, curve: &RocCurve) -> Result<()> {
    crate::io_util::write_csv(path, &["threshold", "sensitivity", "specificity"], |w| {
        for pt in &curve.points {
            w.write_record([pt.threshold.to_string(), pt.sensitivity.to_string(), pt.specificity.to_string()])?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub mean: f64,
    pub std: f64,
}

impl std::fmt::Display for FoldSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:.2} ± {:.2}", self.mean, self.std)
    }
}

/// Mean and sample (n - 1) standard deviation.
pub fn fold_summary(values: &[f64]) -> Result<FoldSummary> {
    if values.len() < 2 {
        return Err(Error::TooFewFolds(values.len()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(FoldSummary { mean, std: var.sqrt() })
}

/// `ln Gamma(x)` for `x > 0` (Lanczos, g = 7, 9 terms).
pub fn ln_gamma(x: f64) -> f64 {
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = C[0];
    let t = x + G + 0.5;
    for (i, &c) in C.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let front = (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` for Student's t with `df`.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    inc_beta(df / 2.0, 0.5, df / (df + t * t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t_stat: f64,
    pub p_value: f64,
    pub df: usize,
}

/// One-sample two-sided t-test of `values` against `null`. With zero sample
/// variance the test is only defined when the mean equals the null
/// (`t = 0, p = 1`).
pub fn t_test(values: &[f64], null: f64) -> Result<TTest> {
    let s = fold_summary(values)?;
    let df = values.len() - 1;
    if s.std == 0.0 {
        if s.mean == null {
            return Ok(TTest { t_stat: 0.0, p_value: 1.0, df });
        }
        return Err(Error::ZeroVariance { mean: s.mean, null });
    }
    let t = (s.mean - null) / (s.std / (values.len() as f64).sqrt());
    Ok(TTest { t_stat: t, p_value: student_t_two_sided(t, df as f64), df })
}

/// Two-sided Student-t confidence interval for the mean.
pub fn t_interval(values: &[f64], confidence: f64) -> Result<(f64, f64)> {
    let s = fold_summary(values)?;
    let df = (values.len() - 1) as f64;
    let alpha = 1.0 - confidence;
    // Bisection on the tail probability, which is decreasing in t.
    let (mut lo, mut hi) = (0.0, 1e3);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_two_sided(mid, df) > alpha {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let half = 0.5 * (lo + hi) * s.std / (values.len() as f64).sqrt();
    Ok((s.mean - half, s.mean + half))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_and_tied() {
        let c = roc(&[0.9, 0.1], &[true, false]).unwrap();
        assert_eq!(c.auc, 1.0);
        assert_eq!(spec_at_sens(&c, 0.9).specificity, 1.0);
        let t = roc(&[0.4; 6], &[true, false, true, false, false, true]).unwrap();
        assert_eq!(t.auc, 0.5);
        assert_eq!(spec_at_sens(&t, 0.9).specificity, 0.0);
        assert!(matches!(roc(&[0.1, 0.2], &[true, true]), Err(Error::SingleClassInput { .. })));
    }

    #[test]
    fn endpoints_and_row_count() {
        let s = [0.1, 0.4, 0.4, 0.8, 0.3];
        let c = roc(&s, &[false, true, false, true, false]).unwrap();
        assert_eq!(c.points.len(), 4 + 2);
        assert_eq!((c.points[0].sensitivity, c.points[0].specificity), (0.0, 1.0));
        let last = c.points.last().unwrap();
        assert_eq!((last.sensitivity, last.specificity), (1.0, 0.0));
        assert!(c.points.windows(2).all(|w| w[0].threshold > w[1].threshold));
    }

    #[test]
    fn hand_built_operating_point() {
        // Ten positives, ten negatives. Scores chosen so sensitivity steps
        // through 0.1 .. 1 while specificity steps down.
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for k in 0..10 {
            scores.push(1.0 - k as f64 * 0.05);
            labels.push(true);
        }
        for k in 0..10 {
            scores.push(0.62 - k as f64 * 0.05);
            labels.push(false);
        }
        let c = roc(&scores, &labels).unwrap();
        let op = spec_at_sens(&c, 0.9);
        // Positives at 1.00 .. 0.55, negatives at 0.62 .. 0.17. Thresholding
        // at the 9th positive (0.60) admits one negative (0.62).
        assert_eq!(op.sensitivity, 0.9);
        assert!((op.specificity - 0.9).abs() < 1e-12);
        assert!((op.threshold - 0.6).abs() < 1e-12);
    }

    #[test]
    fn confusion_counts_totals() {
        let s = [0.2, 0.5, 0.7, 0.9];
        let y = [false, true, false, true];
        for th in [0.0, 0.5, 0.8, 1.0] {
            let c = ConfusionCounts::at(&s, &y, th);
            assert_eq!(c.tp + c.fn_, 2);
            assert_eq!(c.tn + c.fp, 2);
        }
    }

    #[test]
    fn summaries() {
        let s = fold_summary(&[0.7; 5]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-15 && s.std == 0.0);
        let s = fold_summary(&[0.6, 0.8]).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-15);
        assert!((s.std - 0.1f64 * 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(FoldSummary { mean: 0.6812, std: 0.0712 }.to_string(), "0.68 ± 0.07");
        assert!(matches!(fold_summary(&[0.5]), Err(Error::TooFewFolds(1))));
    }

    #[test]
    fn t_test_edge_cases() {
        let t = t_test(&[0.5; 5], 0.5).unwrap();
        assert_eq!((t.t_stat, t.p_value), (0.0, 1.0));
        assert!(matches!(t_test(&[0.7; 5], 0.5), Err(Error::ZeroVariance { .. })));
        let x = [0.72, 0.721, 0.719, 0.7205, 0.7195];
        let a = t_test(&x, 0.5).unwrap();
        assert!(a.p_value < 0.01);
        let mirrored: Vec<f64> = x.iter().map(|v| 1.0 - v).collect();
        let b = t_test(&mirrored, 0.5).unwrap();
        assert!((a.t_stat + b.t_stat).abs() < 1e-9);
        assert!((a.p_value - b.p_value).abs() < 1e-15);
    }

    #[test]
    fn t_table_values() {
        // Two-sided critical values, df = 4: t = 2.776 at 0.05, 4.604 at 0.01.
        assert!((student_t_two_sided(2.776445105, 4.0) - 0.05).abs() < 1e-6);
        assert!((student_t_two_sided(4.604094871, 4.0) - 0.01).abs() < 1e-6);
        assert!((student_t_two_sided(0.0, 4.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ln_gamma_values() {
        assert!(ln_gamma(1.0).abs() < 1e-13);
        assert!((ln_gamma(5.0) - 24f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-12);
    }

    #[test]
    fn interval_brackets_mean() {
        let x = [0.6, 0.7, 0.8, 0.65, 0.75];
        let (lo, hi) = t_interval(&x, 0.95).unwrap();
        // half width = 2.776445 * s / sqrt(5), s = 0.0790569
        let half = 2.776445105 * 0.07905694150420949 / 5f64.sqrt();
        assert!((lo - (0.7 - half)).abs() < 1e-6 && (hi - (0.7 + half)).abs() < 1e-6);
    }
}
