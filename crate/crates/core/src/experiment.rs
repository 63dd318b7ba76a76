//! Run configuration and the train / eval / infer / ensemble drivers.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! run_config.toml                       resolved configuration
//! folds.json                            fold membership
//! checkpoints/fold{i}_{model}.cmdl      conv nets (with dsp config and rescale)
//! checkpoints/fold{i}_linear.json       logistic baseline
//! predictions/fold{i}_{model}_segments.csv
//! predictions/{model}_individuals.csv   out-of-fold individual scores
//! metrics.json                          per-fold training metrics
//! summary.json, roc/{model}.csv         written by eval
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{load_canonical, AudioClip};
use crate::augment::{mix_noise, spec_mask, AugmentConfig, NoiseBank};
use crate::dataset::{extract, load_manifest, make_folds, read_folds, sample_segment, write_folds, FoldConfig, FoldSplit, IndividualRecord};
use crate::dsp::{apply_rescale, fit_rescale, handcrafted, log_mel, DspConfig, LogMelPatch};
use crate::ensemble::{rank_ensemble, stack, LogisticStacker, PredictionMatrix};
use crate::error::{Error, Result};
use crate::eval::{fold_summary, roc, spec_at_sens, t_interval, t_test, write_roc_csv};
use crate::inference::{
    read_individual_csv, score_clips, windows, write_individual_csv, write_segment_csv, Aggregator, ConvScorer, LinearScorer, ScoredIndividual,
    SegmentScorer,
};
use crate::io_util::{write_atomic, write_json};
use crate::models::checkpoint::ConvCheckpoint;
use crate::models::{train_linear_weighted, train_step, ConvNet, ConvNetSpec, LinearConfig, LogisticModel, Sgd, TrainConfig};
use crate::rng::{stream, tag_str};

/// Base models trained per fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    /// Conv net trained with label smoothing.
    #[serde(rename = "conv_ls")]
    ConvSmoothed,
    /// Conv net trained with hard targets.
    #[serde(rename = "conv_nols")]
    ConvPlain,
    /// Logistic regression over hand-crafted features.
    #[serde(rename = "linear")]
    Linear,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::ConvSmoothed, ModelKind::ConvPlain, ModelKind::Linear];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ConvSmoothed => "conv_ls",
            ModelKind::ConvPlain => "conv_nols",
            ModelKind::Linear => "linear",
        }
    }

    pub fn is_conv(self) -> bool {
        self != ModelKind::Linear
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown model '{s}' (conv_ls, conv_nols, linear)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub out_dir: PathBuf,
    /// Defaults to `noise/` next to the manifest.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_dir: Option<PathBuf>,
    pub seed: u64,
    pub aggregator: Aggregator,
    pub net: String,
    pub models: Vec<ModelKind>,
    pub dsp: DspConfig,
    pub augment: AugmentConfig,
    pub train: TrainConfig,
    pub folds: FoldConfig,
    pub linear: LinearConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: PathBuf::from("data/manifest.csv"),
            out_dir: PathBuf::from("runs/default"),
            noise_dir: None,
            seed: crate::rng::DEFAULT_SEED,
            aggregator: Aggregator::Max,
            net: QUICKSTART_NET.to_string(),
            models: ModelKind::ALL.to_vec(),
            dsp: DspConfig::default(),
            augment: AugmentConfig::default(),
            train: quickstart_train_config(),
            folds: FoldConfig::default(),
            linear: LinearConfig::default(),
        }
    }
}

/// Desk-scale network: the default layout with a stride-2 first convolution,
/// about four times cheaper per sample.
pub const QUICKSTART_NET: &str = "conv16s2-pool-conv32-pool-conv64-gap-dense64-dropout0.5-dense2";

/// Desk-scale schedule: 15 epochs of small-batch SGD with momentum and a
/// larger step than the 110-epoch plain-SGD clinical schedule in
/// [`TrainConfig::default`].
pub fn quickstart_train_config() -> TrainConfig {
    TrainConfig { epochs: 15, lr0: 0.02, momentum: 0.9, batch_size: 8, ..TrainConfig::default() }
}

impl RunConfig {
    /// Parses a config document. Keys it omits, including keys inside
    /// tables it does mention, keep the values of [`RunConfig::default`].
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse()?;
        let mut base = toml::Table::try_from(RunConfig::default()).expect("default config serialises");
        merge(&mut base, user);
        Ok(base.try_into()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading config {}", path.display()), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serialises")
    }

    /// Copies the run seed into every stochastic component.
    pub fn propagate_seed(&mut self) {
        self.train.seed = self.seed;
        self.folds.seed = self.seed;
        self.augment.rng_seed = self.seed;
    }

    /// Applies `CAC_SEED` if set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var("CAC_SEED") {
            self.seed = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("CAC_SEED '{v}' is not an unsigned integer")))?;
        }
        Ok(())
    }

    pub fn net_spec(&self) -> Result<ConvNetSpec> {
        self.net.parse()
    }

    pub fn noise_dir(&self) -> PathBuf {
        self.noise_dir.clone().unwrap_or_else(|| self.manifest.parent().unwrap_or(Path::new(".")).join("noise"))
    }

    pub fn validate(&self) -> Result<()> {
        self.dsp.validate()?;
        self.augment.validate()?;
        self.net_spec()?.validate()?;
        if self.train.epochs > 0 {
            self.train.validate()?;
        }
        if self.models.is_empty() {
            return Err(Error::InvalidConfig("no models selected".into()));
        }
        if !self.manifest.is_file() {
            return Err(Error::InvalidConfig(format!("manifest {} does not exist", self.manifest.display())));
        }
        Ok(())
    }

    fn uses_noise(&self) -> bool {
        self.augment.enabled && self.augment.noise_prob > 0.0 && self.models.iter().any(|m| m.is_conv())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn checkpoint_path(out: &Path, fold: usize, model: ModelKind) -> PathBuf {
    let ext = if model.is_conv() { "cmdl" } else { "json" };
    out.join("checkpoints").join(format!("fold{fold}_{model}.{ext}"))
}

fn individuals_csv(out: &Path, name: &str) -> PathBuf {
    out.join("predictions").join(format!("{name}_individuals.csv"))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinearCheckpoint {
    pub model: LogisticModel,
    pub dsp: DspConfig,
}

/// Loads every individual's three clips at the canonical rate, in manifest
/// order.
pub fn load_clips(records: &[IndividualRecord]) -> Result<HashMap<String, Vec<AudioClip>>> {
    let loaded: Vec<(String, Vec<AudioClip>)> = records
        .par_iter()
        .map(|r| Ok((r.individual_id.clone(), r.cough_paths.iter().map(|p| load_canonical(p)).collect::<Result<Vec<_>>>()?)))
        .collect::<Result<_>>()?;
    Ok(loaded.into_iter().collect())
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ModelFoldMetrics {
    pub auc: f64,
    pub spec_at_90sens: f64,
    pub threshold_at_90sens: f64,
    /// Mean training loss per epoch (conv models) or final objective (linear).
    pub train_loss: Vec<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub n_train: usize,
    pub n_train_expanded: usize,
    pub n_val: usize,
    pub rescale: f64,
    pub models: BTreeMap<String, ModelFoldMetrics>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrainMetrics {
    pub seed: u64,
    pub epochs: usize,
    pub net: String,
    pub folds: Vec<FoldMetrics>,
    pub auc_mean: BTreeMap<String, f64>,
}

struct FoldData<'a> {
    records: Vec<&'a IndividualRecord>,
    clips: &'a HashMap<String, Vec<AudioClip>>,
}

fn conv_train_config(cfg: &RunConfig, model: ModelKind) -> TrainConfig {
    let mut t = cfg.train.clone();
    if model == ModelKind::ConvPlain {
        t.label_smooth_min = 0.0;
        t.label_smooth_max = 0.0;
    }
    t
}

/// Trains one conv net on a fold's (upsampled) training individuals.
fn train_conv(
    cfg: &RunConfig,
    model: ModelKind,
    fold: &FoldSplit,
    data: &FoldData<'_>,
    rescale: f64,
    noise: &NoiseBank,
) -> Result<(ConvCheckpoint, Vec<f64>)> {
    let spec = cfg.net_spec()?;
    let tcfg = conv_train_config(cfg, model);
    let input = (1, cfg.dsp.n_mels, cfg.dsp.n_frames(crate::augment::SEGMENT_SAMPLES));
    let model_tag = tag_str(model.name());
    let fi = fold.fold_index as u64;
    let mut net = ConvNet::<f32>::new(&spec, input, &mut stream(cfg.seed, &[tag_str("init"), fi, model_tag]))?;
    let mut opt = Sgd::new();

    let by_id: HashMap<&str, &IndividualRecord> = data.records.iter().map(|r| (r.individual_id.as_str(), *r)).collect();
    let mut examples: Vec<(&str, usize, bool)> = Vec::new();
    for id in fold.expanded_train() {
        let label = by_id[id].rtpcr_positive;
        examples.extend((0..data.clips[id].len()).map(|k| (id, k, label)));
    }

    let aug = &cfg.augment;
    let mut history = Vec::with_capacity(tcfg.epochs);
    for epoch in 0..tcfg.epochs {
        let e = epoch as u64;
        let mut order = examples.clone();
        order.shuffle(&mut stream(cfg.seed, &[tag_str("shuffle"), fi, model_tag, e]));
        let patches: Vec<(LogMelPatch, bool)> = order
            .par_iter()
            .enumerate()
            .map(|(j, &(id, k, label))| {
                let mut rng = stream(aug.rng_seed, &[tag_str("augment"), fi, model_tag, e, j as u64]);
                let clip = &data.clips[id][k];
                let seg = sample_segment(clip.len(), &mut rng);
                let mut audio = AudioClip::new(extract(clip, &seg), clip.sample_rate_hz, id);
                if aug.enabled && aug.noise_prob > 0.0 && rng.random_bool(aug.noise_prob) {
                    audio = mix_noise(&audio, noise, aug, &mut rng)?;
                }
                let mut patch = apply_rescale(&log_mel(&audio, &cfg.dsp)?, rescale)?;
                if aug.enabled {
                    patch = spec_mask(&patch, aug, &mut rng)?;
                }
                Ok((patch, label))
            })
            .collect::<Result<_>>()?;
        let mut step_rng = stream(tcfg.seed, &[tag_str("step"), fi, model_tag, e]);
        let mut losses = Vec::new();
        for (b, chunk) in patches.chunks(tcfg.batch_size).enumerate() {
            let batch: Vec<(&LogMelPatch, bool)> = chunk.iter().map(|(p, y)| (p, *y)).collect();
            losses.push(train_step(&mut net, &mut opt, &batch, &tcfg, epoch, b, &mut step_rng)?);
        }
        let mean = losses.iter().sum::<f64>() / losses.len().max(1) as f64;
        log::info!("fold {} {model} epoch {epoch}: loss {mean:.4}", fold.fold_index);
        history.push(mean);
    }
    Ok((ConvCheckpoint { net, rescale, dsp: cfg.dsp.clone() }, history))
}

/// Fits the logistic baseline on hand-crafted features of every sliding
/// window of the training clips, weighted by upsampling multiplicity.
fn train_linear_model(cfg: &RunConfig, fold: &FoldSplit, data: &FoldData<'_>) -> Result<(LinearCheckpoint, Vec<f64>)> {
    let rows: Vec<(Vec<f64>, bool, f64)> = data
        .records
        .par_iter()
        .map(|r| {
            let w = fold.upsample_multiplicity.get(&r.individual_id).copied().unwrap_or(1) as f64;
            let mut out = Vec::new();
            for clip in &data.clips[&r.individual_id] {
                for win in windows(clip.len()) {
                    let seg = AudioClip::new(extract(clip, &win), clip.sample_rate_hz, "w");
                    out.push((handcrafted(&seg, &cfg.dsp)?.0, r.rtpcr_positive, w));
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    let x: Vec<Vec<f64>> = rows.iter().map(|r| r.0.clone()).collect();
    let y: Vec<bool> = rows.iter().map(|r| r.1).collect();
    let w: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let (model, report) = train_linear_weighted(&x, &y, &w, &cfg.linear)?;
    let last = *report.loss_history.last().expect("history has the initial loss");
    Ok((LinearCheckpoint { model, dsp: cfg.dsp.clone() }, vec![last]))
}

/// Scores individuals (ordered as given) with one segment scorer.
pub fn score_individuals(
    scorer: &dyn SegmentScorer,
    records: &[&IndividualRecord],
    clips: &HashMap<String, Vec<AudioClip>>,
    agg: Aggregator,
) -> Result<Vec<ScoredIndividual>> {
    records.par_iter().map(|r| score_clips(scorer, &r.individual_id, &clips[&r.individual_id], r.rtpcr_positive, agg)).collect()
}

fn fold_model_metrics(scored: &[ScoredIndividual], train_loss: Vec<f64>) -> Result<ModelFoldMetrics> {
    let scores: Vec<f64> = scored.iter().map(|s| s.score.indiv_prob).collect();
    let labels: Vec<bool> = scored.iter().map(|s| s.label).collect();
    let curve = roc(&scores, &labels)?;
    let op = spec_at_sens(&curve, 0.9);
    Ok(ModelFoldMetrics { auc: curve.auc, spec_at_90sens: op.specificity, threshold_at_90sens: op.threshold, train_loss })
}

/// Trains every configured model on every fold and writes checkpoints,
/// validation predictions and `metrics.json`.
pub fn train_run(cfg: &RunConfig) -> Result<TrainMetrics> {
    cfg.validate()?;
    let out = &cfg.out_dir;
    write_atomic(&out.join("run_config.toml"), cfg.to_toml().as_bytes())?;
    let manifest = load_manifest(&cfg.manifest)?;
    let folds = make_folds(&manifest.records, &cfg.folds)?;
    write_folds(&out.join("folds.json"), &folds)?;
    let clips = load_clips(&manifest.records)?;
    let noise = if cfg.uses_noise() {
        let bank = NoiseBank::load_dir(&cfg.noise_dir())?;
        if bank.is_empty() {
            return Err(Error::EmptyNoiseBank);
        }
        bank
    } else {
        NoiseBank::default()
    };
    let by_id = manifest.by_id();

    let mut fold_metrics = Vec::new();
    let mut oof: BTreeMap<ModelKind, Vec<ScoredIndividual>> = BTreeMap::new();
    for fold in &folds {
        let train_records: Vec<&IndividualRecord> = fold.train_ids.iter().map(|id| by_id[id.as_str()]).collect();
        let val_records: Vec<&IndividualRecord> = fold.val_ids.iter().map(|id| by_id[id.as_str()]).collect();
        let data = FoldData { records: train_records, clips: &clips };

        let train_patches: Vec<LogMelPatch> = data
            .records
            .par_iter()
            .flat_map_iter(|r| clips[&r.individual_id].iter().map(|c| log_mel(c, &cfg.dsp)))
            .collect::<Result<_>>()?;
        let rescale = fit_rescale(train_patches.iter())?;
        drop(train_patches);

        let mut fm = FoldMetrics {
            fold: fold.fold_index,
            n_train: fold.train_ids.len(),
            n_train_expanded: fold.expanded_train().len(),
            n_val: fold.val_ids.len(),
            rescale,
            models: BTreeMap::new(),
        };
        for &model in &cfg.models {
            let (scored, loss) = if model.is_conv() {
                let (ck, loss) = train_conv(cfg, model, fold, &data, rescale, &noise)?;
                ck.save(&checkpoint_path(out, fold.fold_index, model))?;
                (score_individuals(&ConvScorer(&ck), &val_records, &clips, cfg.aggregator)?, loss)
            } else {
                let (ck, loss) = train_linear_model(cfg, fold, &data)?;
                write_json(&checkpoint_path(out, fold.fold_index, model), &ck)?;
                (score_individuals(&LinearScorer { model: &ck.model, dsp: &ck.dsp }, &val_records, &clips, cfg.aggregator)?, loss)
            };
            write_segment_csv(&out.join("predictions").join(format!("fold{}_{model}_segments.csv", fold.fold_index)), &scored)?;
            let m = fold_model_metrics(&scored, loss)?;
            log::info!("fold {} {model}: val AUC {:.3}", fold.fold_index, m.auc);
            fm.models.insert(model.name().to_string(), m);
            oof.entry(model).or_default().extend(scored);
        }
        fold_metrics.push(fm);
    }

    let order: HashMap<&str, usize> = manifest.records.iter().enumerate().map(|(i, r)| (r.individual_id.as_str(), i)).collect();
    let mut auc_mean = BTreeMap::new();
    for (model, mut scored) in oof {
        scored.sort_by_key(|s| order[s.score.individual_id.as_str()]);
        write_individual_csv(&individuals_csv(out, model.name()), &scored)?;
        let aucs: Vec<f64> = fold_metrics.iter().map(|f| f.models[model.name()].auc).collect();
        auc_mean.insert(model.name().to_string(), aucs.iter().sum::<f64>() / aucs.len() as f64);
    }
    let metrics = TrainMetrics { seed: cfg.seed, epochs: cfg.train.epochs, net: cfg.net.clone(), folds: fold_metrics, auc_mean };
    write_json(&out.join("metrics.json"), &metrics)?;
    Ok(metrics)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub fold_auc: Vec<f64>,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub auc_report: String,
    pub spec_at_90sens: f64,
    pub spec_at_90sens_std: f64,
    pub pooled_auc: f64,
    pub t_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub auc_ci95: Option<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalSummary {
    /// Headline model (first configured).
    pub primary: String,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub spec_at_90sens: f64,
    pub models: BTreeMap<String, ModelSummary>,
    pub best_single_auc: f64,
}

fn summarize(name: &str, scored: &[(String, f64, bool)], fold_of: &HashMap<&str, usize>, n_folds: usize, out: &Path) -> Result<ModelSummary> {
    let mut fold_auc = Vec::new();
    let mut fold_spec = Vec::new();
    for f in 0..n_folds {
        let rows: Vec<&(String, f64, bool)> = scored.iter().filter(|r| fold_of.get(r.0.as_str()) == Some(&f)).collect();
        if rows.is_empty() {
            continue;
        }
        let s: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let y: Vec<bool> = rows.iter().map(|r| r.2).collect();
        let c = roc(&s, &y)?;
        fold_auc.push(c.auc);
        fold_spec.push(spec_at_sens(&c, 0.9).specificity);
    }
    let auc = fold_summary(&fold_auc)?;
    let spec = fold_summary(&fold_spec)?;
    let s: Vec<f64> = scored.iter().map(|r| r.1).collect();
    let y: Vec<bool> = scored.iter().map(|r| r.2).collect();
    let pooled = roc(&s, &y)?;
    write_roc_csv(&out.join("roc").join(format!("{name}.csv")), &pooled)?;
    let tt = t_test(&fold_auc, 0.5).ok();
    Ok(ModelSummary {
        auc_report: auc.to_string(),
        fold_auc: fold_auc.clone(),
        auc_mean: auc.mean,
        auc_std: auc.std,
        spec_at_90sens: spec.mean,
        spec_at_90sens_std: spec.std,
        pooled_auc: pooled.auc,
        t_stat: tt.map(|t| t.t_stat),
        p_value: tt.map(|t| t.p_value),
        auc_ci95: t_interval(&fold_auc, 0.95).ok(),
    })
}

/// Re-scores validation individuals from saved checkpoints (unless
/// `from_predictions`), then writes ROC curves, ensemble predictions and
/// `summary.json`.
pub fn eval_run(out: &Path, from_predictions: bool) -> Result<EvalSummary> {
    let cfg = RunConfig::load(&out.join("run_config.toml"))?;
    let folds = read_folds(&out.join("folds.json"))?;
    if !from_predictions {
        let manifest = load_manifest(&cfg.manifest)?;
        let by_id = manifest.by_id();
        let clips = load_clips(&manifest.records)?;
        for &model in &cfg.models {
            let mut all: Vec<ScoredIndividual> = Vec::new();
            for fold in &folds {
                let val: Vec<&IndividualRecord> = fold.val_ids.iter().map(|id| by_id[id.as_str()]).collect();
                let path = checkpoint_path(out, fold.fold_index, model);
                let scored = if model.is_conv() {
                    let ck = ConvCheckpoint::load(&path)?;
                    score_individuals(&ConvScorer(&ck), &val, &clips, cfg.aggregator)?
                } else {
                    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
                    let ck: LinearCheckpoint = serde_json::from_str(&text)?;
                    score_individuals(&LinearScorer { model: &ck.model, dsp: &ck.dsp }, &val, &clips, cfg.aggregator)?
                };
                all.extend(scored);
            }
            let order: HashMap<&str, usize> = manifest.records.iter().enumerate().map(|(i, r)| (r.individual_id.as_str(), i)).collect();
            all.sort_by_key(|s| order[s.score.individual_id.as_str()]);
            write_individual_csv(&individuals_csv(out, model.name()), &all)?;
        }
    }

    let fold_of: HashMap<&str, usize> = folds.iter().flat_map(|f| f.val_ids.iter().map(move |id| (id.as_str(), f.fold_index))).collect();
    let mut columns = Vec::new();
    let mut models = BTreeMap::new();
    for &model in &cfg.models {
        let rows = read_individual_csv(&individuals_csv(out, model.name()))?;
        models.insert(model.name().to_string(), summarize(model.name(), &rows, &fold_of, folds.len(), out)?);
        columns.push((model.name().to_string(), rows));
    }
    let best_single_auc = models.values().map(|m| m.auc_mean).fold(f64::NEG_INFINITY, f64::max);

    if columns.len() >= 2 {
        let matrix = PredictionMatrix::from_columns(&columns)?;
        let ranked = rank_ensemble(&matrix)?;
        let stacked = stack(&matrix, &folds, &LogisticStacker::default())?.oof_scores;
        for (name, scores) in [("rank_ensemble", ranked), ("stacked", stacked)] {
            let rows: Vec<(String, f64, bool)> = matrix.ids.iter().cloned().zip(scores).zip(&matrix.labels).map(|((id, s), &y)| (id, s, y)).collect();
            write_score_rows(&individuals_csv(out, name), &rows)?;
            models.insert(name.to_string(), summarize(name, &rows, &fold_of, folds.len(), out)?);
        }
    }

    let primary = cfg.models[0].name().to_string();
    let p = &models[&primary];
    let summary = EvalSummary {
        primary: primary.clone(),
        auc_mean: p.auc_mean,
        auc_std: p.auc_std,
        spec_at_90sens: p.spec_at_90sens,
        best_single_auc,
        models,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Writes `individual_id,indiv_prob,label` rows.
pub fn write_score_rows(path: &Path, rows: &[(String, f64, bool)]) -> Result<()> {
    crate::io_util::write_csv(path, &["individual_id", "indiv_prob", "label"], |w| {
        for (id, p, y) in rows {
            w.write_record([id.clone(), format!("{p:.17}"), u8::from(*y).to_string()])?;
        }
        Ok(())
    })
}

/// Scores every individual in `manifest` with a saved conv checkpoint and
/// writes segment and individual CSVs into `out`.
pub fn infer_run(checkpoint: &Path, manifest: &Path, agg: Aggregator, out: &Path) -> Result<Vec<ScoredIndividual>> {
    let ck = ConvCheckpoint::load(checkpoint)?;
    let manifest = load_manifest(manifest)?;
    let clips = load_clips(&manifest.records)?;
    let records: Vec<&IndividualRecord> = manifest.records.iter().collect();
    let scored = score_individuals(&ConvScorer(&ck), &records, &clips, agg)?;
    write_segment_csv(&out.join("segments.csv"), &scored)?;
    write_individual_csv(&out.join("individuals.csv"), &scored)?;
    Ok(scored)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub models: Vec<String>,
    pub base_auc: BTreeMap<String, f64>,
    pub rank_auc: f64,
    pub stacked_auc: f64,
}

/// Rank and out-of-fold stacked ensembles over prediction CSVs.
pub fn ensemble_run(predictions: &[PathBuf], folds_path: &Path, out: &Path) -> Result<EnsembleReport> {
    let folds = read_folds(folds_path)?;
    let columns: Vec<(String, Vec<(String, f64, bool)>)> = predictions
        .iter()
        .map(|p| {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("model").trim_end_matches("_individuals").to_string();
            Ok((name, read_individual_csv(p)?))
        })
        .collect::<Result<_>>()?;
    let matrix = PredictionMatrix::from_columns(&columns)?;
    let auc = |s: &[f64]| roc(s, &matrix.labels).map(|c| c.auc);
    let base_auc = (0..matrix.n_models()).map(|j| Ok((matrix.model_names[j].clone(), auc(&matrix.column(j))?))).collect::<Result<_>>()?;
    let ranked = rank_ensemble(&matrix)?;
    let stacked = stack(&matrix, &folds, &LogisticStacker::default())?.oof_scores;
    let rows = |s: &[f64]| -> Vec<(String, f64, bool)> { matrix.ids.iter().cloned().zip(s.iter().copied()).zip(&matrix.labels).map(|((i, p), &y)| (i, p, y)).collect() };
    write_score_rows(&out.join("rank_ensemble_individuals.csv"), &rows(&ranked))?;
    write_score_rows(&out.join("stacked_individuals.csv"), &rows(&stacked))?;
    let report = EnsembleReport { models: matrix.model_names.clone(), base_auc, rank_auc: auc(&ranked)?, stacked_auc: auc(&stacked)? };
    write_json(&out.join("ensemble.json"), &report)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_roundtrip_and_defaults() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        let partial = RunConfig::from_toml("seed = 7\n[train]\nepochs = 3\n").unwrap();
        assert_eq!(partial.seed, 7);
        assert_eq!(partial.train.epochs, 3);
        assert_eq!(partial.train.batch_size, quickstart_train_config().batch_size);
        assert_eq!(partial.train.momentum, quickstart_train_config().momentum);
        assert_eq!(partial.aggregator, Aggregator::Max);
    }

    #[test]
    fn seed_propagates() {
        let mut cfg = RunConfig { seed: 9, ..Default::default() };
        cfg.propagate_seed();
        assert_eq!((cfg.train.seed, cfg.folds.seed, cfg.augment.rng_seed), (9, 9, 9));
    }

    #[test]
    fn model_names() {
        for m in ModelKind::ALL {
            assert_eq!(m.name().parse::<ModelKind>().unwrap(), m);
        }
        assert!("svm".parse::<ModelKind>().is_err());
    }
}
