//! Triple-stratified cross-validation: individual-disjoint splits, per-facility
//! class-balanced validation sets and per-facility 1:1 training upsampling.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::IndividualRecord;
use crate::error::{Error, Result};
use crate::rng::{stream, tag_str};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FoldConfig {
    pub k: usize,
    pub val_frac: f64,
    pub seed: u64,
    /// Facilities allowed to contribute validation individuals. `None` selects
    /// every facility with at least `k` of each class and no more positives
    /// than negatives (testing facilities rather than isolation wards).
    pub eligible: Option<Vec<String>>,
}

impl Default for FoldConfig {
    fn default() -> Self {
        Self { k: 5, val_frac: 0.10, seed: crate::rng::DEFAULT_SEED, eligible: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSplit {
    pub fold_index: usize,
    pub train_ids: Vec<String>,
    pub val_ids: Vec<String>,
    /// Copies of each training individual per epoch (minority-class
    /// individuals get more than one).
    pub upsample_multiplicity: BTreeMap<String, u32>,
}

impl FoldSplit {
    /// Training ids expanded by multiplicity, in manifest order.
    pub fn expanded_train(&self) -> Vec<&str> {
        self.train_ids
            .iter()
            .flat_map(|id| std::iter::repeat_n(id.as_str(), self.upsample_multiplicity.get(id).copied().unwrap_or(1) as usize))
            .collect()
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct ClassCount {
    pos: usize,
    neg: usize,
}

fn facility_counts(records: &[IndividualRecord]) -> BTreeMap<&str, ClassCount> {
    let mut m: BTreeMap<&str, ClassCount> = BTreeMap::new();
    for r in records {
        let c = m.entry(r.facility.as_str()).or_default();
        if r.rtpcr_positive {
            c.pos += 1;
        } else {
            c.neg += 1;
        }
    }
    m
}

/// Facilities that contribute validation individuals under `cfg`.
pub fn eligible_facilities(records: &[IndividualRecord], cfg: &FoldConfig) -> Result<Vec<String>> {
    let counts = facility_counts(records);
    match &cfg.eligible {
        Some(list) => {
            for f in list {
                let c = counts.get(f.as_str()).copied().unwrap_or_default();
                if c.pos < cfg.k || c.neg < cfg.k {
                    return Err(Error::InsufficientClassCount { facility: f.clone(), positives: c.pos, negatives: c.neg, required: cfg.k });
                }
            }
            let mut v = list.clone();
            v.sort();
            v.dedup();
            Ok(v)
        }
        None => {
            let v: Vec<String> = counts
                .iter()
                .filter(|(_, c)| c.pos >= cfg.k && c.neg >= cfg.k && c.neg >= c.pos)
                .map(|(f, _)| f.to_string())
                .collect();
            if v.is_empty() {
                let (f, c) = counts.iter().max_by_key(|(_, c)| c.pos.min(c.neg)).map(|(f, c)| (f.to_string(), *c)).unwrap_or_default();
                return Err(Error::InsufficientClassCount { facility: f, positives: c.pos, negatives: c.neg, required: cfg.k });
            }
            Ok(v)
        }
    }
}

/// Validation individuals per class per fold for each eligible facility.
///
/// With `T = round(val_frac * N)` over all `N` individuals and `N_e` the
/// eligible population, a facility with `n_f` individuals gets
/// `q = clamp(round(T * n_f / N_e / 2), 1, min(pos, neg) / k)`.
pub fn val_quota(records: &[IndividualRecord], eligible: &[String], cfg: &FoldConfig) -> BTreeMap<String, usize> {
    let counts = facility_counts(records);
    let target = (cfg.val_frac * records.len() as f64).round();
    let n_elig: usize = eligible.iter().map(|f| counts.get(f.as_str()).map_or(0, |c| c.pos + c.neg)).sum();
    eligible
        .iter()
        .map(|f| {
            let c = counts[f.as_str()];
            let cap = c.pos.min(c.neg) / cfg.k;
            let q = (target * (c.pos + c.neg) as f64 / n_elig as f64 / 2.0).round() as usize;
            (f.clone(), q.clamp(1, cap.max(1)))
        })
        .collect()
}

/// Builds `k` folds. Each fold's validation set takes `q` positives and `q`
/// negatives from every eligible facility; individuals never used for
/// validation always train. Validation slices come from a seeded shuffle of
/// each facility/class group, so the `k` validation sets are disjoint.
pub fn make_folds(records: &[IndividualRecord], cfg: &FoldConfig) -> Result<Vec<FoldSplit>> {
    if cfg.k < 2 {
        return Err(Error::TooFewFolds(cfg.k));
    }
    if !(cfg.val_frac > 0.0 && cfg.val_frac < 1.0) {
        return Err(Error::InvalidConfig(format!("val_frac {} outside (0, 1)", cfg.val_frac)));
    }
    let eligible = eligible_facilities(records, cfg)?;
    let quota = val_quota(records, &eligible, cfg);

    let mut val_sets: Vec<HashSet<&str>> = vec![HashSet::new(); cfg.k];
    for (facility, &q) in &quota {
        for label in [true, false] {
            let mut group: Vec<&str> = records
                .iter()
                .filter(|r| &r.facility == facility && r.rtpcr_positive == label)
                .map(|r| r.individual_id.as_str())
                .collect();
            let mut rng = stream(cfg.seed, &[tag_str("folds"), tag_str(facility), label as u64]);
            group.shuffle(&mut rng);
            for (i, set) in val_sets.iter_mut().enumerate() {
                set.extend(&group[i * q..(i + 1) * q]);
            }
        }
    }

    let mut folds = Vec::with_capacity(cfg.k);
    for (i, val) in val_sets.iter().enumerate() {
        let val_ids: Vec<String> = records.iter().filter(|r| val.contains(r.individual_id.as_str())).map(|r| r.individual_id.clone()).collect();
        let train: Vec<&IndividualRecord> = records.iter().filter(|r| !val.contains(r.individual_id.as_str())).collect();
        let upsample_multiplicity = upsample(&train, cfg.seed, i);
        folds.push(FoldSplit {
            fold_index: i,
            train_ids: train.iter().map(|r| r.individual_id.clone()).collect(),
            val_ids,
            upsample_multiplicity,
        });
    }
    Ok(folds)
}

/// Per facility, duplicates the minority class until both classes have the
/// majority count: every minority individual gets `M / m` copies and a seeded
/// selection of `M % m` of them one extra. Single-class facilities are left
/// at multiplicity 1.
fn upsample(train: &[&IndividualRecord], seed: u64, fold: usize) -> BTreeMap<String, u32> {
    let mut mult: BTreeMap<String, u32> = train.iter().map(|r| (r.individual_id.clone(), 1)).collect();
    let facilities: BTreeSet<&str> = train.iter().map(|r| r.facility.as_str()).collect();
    for f in facilities {
        let pos: Vec<&str> = train.iter().filter(|r| r.facility == f && r.rtpcr_positive).map(|r| r.individual_id.as_str()).collect();
        let neg: Vec<&str> = train.iter().filter(|r| r.facility == f && !r.rtpcr_positive).map(|r| r.individual_id.as_str()).collect();
        let (mut minority, majority) = if pos.len() <= neg.len() { (pos, neg.len()) } else { (neg, pos.len()) };
        if minority.is_empty() || minority.len() == majority {
            continue;
        }
        let base = (majority / minority.len()) as u32;
        let extra = majority % minority.len();
        let mut rng = stream(seed, &[tag_str("upsample"), tag_str(f), fold as u64]);
        minority.shuffle(&mut rng);
        for (j, id) in minority.iter().enumerate() {
            mult.insert(id.to_string(), base + u32::from(j < extra));
        }
    }
    mult
}

pub fn write_folds(path: &Path, folds: &[FoldSplit]) -> Result<()> {
    crate::io_util::write_json(path, &folds)
}

pub fn read_folds(path: &Path) -> Result<Vec<FoldSplit>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(serde_json::from_str(&text)?)
}
