//! Combining per-individual predictions of several base models: average
//! normalised ranks, or an out-of-fold stacked meta-classifier.

use std::collections::{HashMap, HashSet};

use crate::dataset::FoldSplit;
use crate::error::{Error, Result};
use crate::models::{train_linear, LinearConfig, LogisticModel};

/// Rows are individuals, columns base models.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMatrix {
    pub ids: Vec<String>,
    pub model_names: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<bool>,
}

impl PredictionMatrix {
    /// Aligns per-model `(id, p_pos, label)` lists on the first model's id
    /// order. Every model must cover exactly the same individuals with the
    /// same labels.
    pub fn from_columns(columns: &[(String, Vec<(String, f64, bool)>)]) -> Result<Self> {
        let (_, first) = columns.first().ok_or(Error::SingleModel)?;
        let ids: Vec<String> = first.iter().map(|r| r.0.clone()).collect();
        let labels: Vec<bool> = first.iter().map(|r| r.2).collect();
        let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
        if index.len() != ids.len() {
            return Err(Error::InvalidPredictions("duplicate individual in prediction column".into()));
        }
        let mut values = vec![vec![f64::NAN; columns.len()]; ids.len()];
        for (j, (name, col)) in columns.iter().enumerate() {
            if col.len() != ids.len() {
                return Err(Error::InvalidPredictions(format!("model {name} has {} rows, expected {}", col.len(), ids.len())));
            }
            for (id, p, label) in col {
                let &i = index.get(id.as_str()).ok_or_else(|| Error::InvalidPredictions(format!("model {name}: unknown individual {id}")))?;
                if labels[i] != *label {
                    return Err(Error::InvalidPredictions(format!("model {name}: label disagreement for {id}")));
                }
                if !p.is_finite() {
                    return Err(Error::InvalidPredictions(format!("model {name}: non-finite score for {id}")));
                }
                values[i][j] = *p;
            }
        }
        if values.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::InvalidPredictions("missing cell in prediction matrix".into()));
        }
        Ok(Self { ids, model_names: columns.iter().map(|c| c.0.clone()).collect(), values, labels })
    }

    pub fn n_models(&self) -> usize {
        self.model_names.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }
}

/// 1-based ranks with ties sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Mean over models of ranks rescaled to `[0, 1]` by `(r - 1) / (n - 1)`.
pub fn rank_ensemble(m: &PredictionMatrix) -> Result<Vec<f64>> {
    if m.n_models() < 2 {
        return Err(Error::SingleModel);
    }
    let n = m.ids.len();
    let mut out = vec![0.0; n];
    for j in 0..m.n_models() {
        for (o, r) in out.iter_mut().zip(average_ranks(&m.column(j))) {
            *o += if n > 1 { (r - 1.0) / (n - 1) as f64 } else { 0.5 };
        }
    }
    Ok(out.into_iter().map(|v| v / m.n_models() as f64).collect())
}

/// A meta-classifier over base-model probabilities.
pub trait MetaLearner {
    type Model: MetaModel;
    fn fit(&self, features: &[Vec<f64>], labels: &[bool]) -> Result<Self::Model>;
}

pub trait MetaModel {
    fn predict(&self, row: &[f64]) -> f64;
}

/// L2-regularised logistic stacker. Columns that exactly duplicate an
/// earlier column are ignored, so adding a copy of a base model leaves the
/// stacked output unchanged.
#[derive(Debug, Clone, Default)]
pub struct LogisticStacker {
    pub cfg: LinearConfig,
}

#[derive(Debug, Clone)]
pub struct FittedStacker {
    pub columns: Vec<usize>,
    pub model: LogisticModel,
}

impl MetaModel for FittedStacker {
    fn predict(&self, row: &[f64]) -> f64 {
        let x: Vec<f64> = self.columns.iter().map(|&c| row[c]).collect();
        self.model.predict_proba(&x)
    }
}

impl MetaLearner for LogisticStacker {
    type Model = FittedStacker;

    fn fit(&self, features: &[Vec<f64>], labels: &[bool]) -> Result<FittedStacker> {
        let d = features.first().map_or(0, Vec::len);
        let mut columns: Vec<usize> = Vec::new();
        for c in 0..d {
            let dup = columns.iter().any(|&k| features.iter().all(|r| r[k] == r[c]));
            if !dup {
                columns.push(c);
            }
        }
        let x: Vec<Vec<f64>> = features.iter().map(|r| columns.iter().map(|&c| r[c]).collect()).collect();
        let (model, _) = train_linear(&x, labels, &self.cfg)?;
        Ok(FittedStacker { columns, model })
    }
}

/// Validation fold of every row. Fails if an individual was never validated
/// or appears in the training split of the fold that scored it.
pub fn source_folds(m: &PredictionMatrix, folds: &[FoldSplit]) -> Result<Vec<usize>> {
    let val: Vec<HashSet<&str>> = folds.iter().map(|f| f.val_ids.iter().map(String::as_str).collect()).collect();
    let train: Vec<HashSet<&str>> = folds.iter().map(|f| f.train_ids.iter().map(String::as_str).collect()).collect();
    m.ids
        .iter()
        .map(|id| {
            let f = val.iter().position(|v| v.contains(id.as_str())).ok_or_else(|| Error::LeakageDetected { id: id.clone(), fold: None })?;
            if train[f].contains(id.as_str()) {
                return Err(Error::LeakageDetected { id: id.clone(), fold: Some(f) });
            }
            Ok(f)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct StackResult<M> {
    /// Stacked score of each row from a meta-model that never saw its fold.
    pub oof_scores: Vec<f64>,
    pub source_fold: Vec<usize>,
    /// Meta-model refit on all rows, for scoring new individuals.
    pub full_model: M,
}

pub fn stack<L: MetaLearner>(m: &PredictionMatrix, folds: &[FoldSplit], learner: &L) -> Result<StackResult<L::Model>> {
    let source_fold = source_folds(m, folds)?;
    let mut oof = vec![f64::NAN; m.ids.len()];
    for f in 0..folds.len() {
        let (fit_rows, pred_rows): (Vec<usize>, Vec<usize>) = (0..m.ids.len()).partition(|&i| source_fold[i] != f);
        if pred_rows.is_empty() {
            continue;
        }
        let x: Vec<Vec<f64>> = fit_rows.iter().map(|&i| m.values[i].clone()).collect();
        let y: Vec<bool> = fit_rows.iter().map(|&i| m.labels[i]).collect();
        let meta = learner.fit(&x, &y)?;
        for i in pred_rows {
            oof[i] = meta.predict(&m.values[i]);
        }
    }
    let full_model = learner.fit(&m.values, &m.labels)?;
    Ok(StackResult { oof_scores: oof, source_fold, full_model })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(cols: &[&[f64]], labels: &[bool]) -> PredictionMatrix {
        let n = labels.len();
        PredictionMatrix {
            ids: (0..n).map(|i| format!("i{i}")).collect(),
            model_names: (0..cols.len()).map(|j| format!("m{j}")).collect(),
            values: (0..n).map(|i| cols.iter().map(|c| c[i]).collect()).collect(),
            labels: labels.to_vec(),
        }
    }

    #[test]
    fn hand_rank_table() {
        let m = matrix(&[&[0.1, 0.2, 0.3], &[0.3, 0.1, 0.2]], &[false, false, true]);
        // ranks [1,2,3] -> [0, .5, 1]; [3,1,2] -> [1, 0, .5]; means [.5, .25, .75]
        assert_eq!(rank_ensemble(&m).unwrap(), vec![0.5, 0.25, 0.75]);
    }

    #[test]
    fn ties_share_rank() {
        assert_eq!(average_ranks(&[0.3, 0.1, 0.3, 0.2]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn single_model_rejected() {
        let m = matrix(&[&[0.1, 0.2]], &[false, true]);
        assert!(matches!(rank_ensemble(&m), Err(Error::SingleModel)));
    }

    #[test]
    fn from_columns_checks_alignment() {
        let a = vec![("x".to_string(), 0.1, true), ("y".to_string(), 0.2, false)];
        let b = vec![("y".to_string(), 0.7, false), ("x".to_string(), 0.9, true)];
        let m = PredictionMatrix::from_columns(&[("a".into(), a.clone()), ("b".into(), b)]).unwrap();
        assert_eq!(m.values, vec![vec![0.1, 0.9], vec![0.2, 0.7]]);
        let bad = vec![("y".to_string(), 0.7, true), ("x".to_string(), 0.9, true)];
        assert!(PredictionMatrix::from_columns(&[("a".into(), a.clone()), ("b".into(), bad)]).is_err());
        let short = vec![("x".to_string(), 0.9, true)];
        assert!(PredictionMatrix::from_columns(&[("a".into(), a), ("b".into(), short)]).is_err());
    }
}
