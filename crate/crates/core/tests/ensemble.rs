//! Rank averaging and out-of-fold stacking on generated predictions.

use std::collections::BTreeMap;

use cac_core::dataset::FoldSplit;
use cac_core::ensemble::{stack, LogisticStacker, MetaModel, PredictionMatrix};
use cac_core::eval::roc;
use cac_core::rng::stream;
use rand::Rng as _;

const N: usize = 100;
const K: usize = 5;

fn folds() -> Vec<FoldSplit> {
    (0..K)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..N).partition(|i| i % K == f);
            FoldSplit {
                fold_index: f,
                train_ids: train.iter().map(|i| format!("i{i}")).collect(),
                val_ids: val.iter().map(|i| format!("i{i}")).collect(),
                upsample_multiplicity: BTreeMap::new(),
            }
        })
        .collect()
}

fn labels() -> Vec<bool> {
    (0..N).map(|i| (i / K) % 2 == 0).collect()
}

fn matrix(cols: &[(&str, Vec<f64>)]) -> PredictionMatrix {
    let y = labels();
    let columns: Vec<(String, Vec<(String, f64, bool)>)> = cols
        .iter()
        .map(|(name, v)| (name.to_string(), v.iter().enumerate().map(|(i, &p)| (format!("i{i}"), p, y[i])).collect()))
        .collect();
    PredictionMatrix::from_columns(&columns).unwrap()
}

fn noisy(seed: u64, signal: f64) -> Vec<f64> {
    let mut rng = stream(seed, &[]);
    labels().iter().map(|&l| (if l { signal } else { 0.0 }) + rng.random_range(0.0..1.0)).collect()
}

fn fold_aucs(scores: &[f64], folds: &[FoldSplit]) -> Vec<f64> {
    let y = labels();
    folds
        .iter()
        .map(|f| {
            let idx: Vec<usize> = f.val_ids.iter().map(|id| id[1..].parse().unwrap()).collect();
            let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let l: Vec<bool> = idx.iter().map(|&i| y[i]).collect();
            roc(&s, &l).unwrap().auc
        })
        .collect()
}

#[test]
fn single_model_stack_keeps_fold_aucs() {
    let base = noisy(1, 0.5);
    let m = matrix(&[("a", base.clone())]);
    let folds = folds();
    let st = stack(&m, &folds, &LogisticStacker::default()).unwrap();
    for (a, b) in fold_aucs(&st.oof_scores, &folds).iter().zip(fold_aucs(&base, &folds)) {
        assert!((a - b).abs() < 1e-6);
    }
    let full: Vec<f64> = m.values.iter().map(|r| st.full_model.predict(r)).collect();
    assert!((roc(&full, &labels()).unwrap().auc - roc(&base, &labels()).unwrap().auc).abs() < 1e-6);
}

#[test]
fn perfect_plus_random_stays_near_perfect() {
    let perfect: Vec<f64> = labels().iter().map(|&l| if l { 0.9 } else { 0.1 }).collect();
    let m = matrix(&[("perfect", perfect), ("random", noisy(2, 0.0))]);
    let st = stack(&m, &folds(), &LogisticStacker::default()).unwrap();
    let auc = roc(&st.oof_scores, &labels()).unwrap().auc;
    assert!(auc >= 1.0 - 0.02, "stacked AUC {auc}");
}

#[test]
fn duplicated_column_changes_nothing() {
    let (a, b) = (noisy(3, 0.4), noisy(4, 0.2));
    let folds = folds();
    let two = stack(&matrix(&[("a", a.clone()), ("b", b.clone())]), &folds, &LogisticStacker::default()).unwrap();
    let three = stack(&matrix(&[("a", a.clone()), ("b", b), ("a2", a)]), &folds, &LogisticStacker::default()).unwrap();
    assert_eq!(two.oof_scores, three.oof_scores);
}
