//! Deterministic scoring: 2 s sliding windows with a 0.5 s hop, median over
//! window probabilities per file, then an aggregator (default max) over an
//! individual's three files.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::audio_io::AudioClip;
use crate::augment::SEGMENT_SAMPLES;
use crate::dataset::{extract, Segment};
use crate::dsp::{apply_rescale, handcrafted, log_mel};
use crate::error::{Error, Result};
use crate::models::checkpoint::ConvCheckpoint;
use crate::models::LogisticModel;
use crate::DspConfig;

pub const HOP_SAMPLES: usize = SEGMENT_SAMPLES / 4;
pub const FILES_PER_INDIVIDUAL: usize = 3;

/// Full windows only: starts `0, hop, 2*hop, ...` with `start + 2 s <= len`.
/// Clips of 2 s or less yield one window at 0 (zero-padded if shorter);
/// trailing audio after the last full window is not scored.
pub fn windows(clip_len: usize) -> Vec<Segment> {
    if clip_len <= SEGMENT_SAMPLES {
        return vec![Segment { start_sample: 0, real_samples: clip_len, padded: clip_len < SEGMENT_SAMPLES }];
    }
    (0..=(clip_len - SEGMENT_SAMPLES) / HOP_SAMPLES)
        .map(|i| Segment { start_sample: i * HOP_SAMPLES, real_samples: SEGMENT_SAMPLES, padded: false })
        .collect()
}

/// Anything that maps a 2 s canonical-rate window to `p_pos`.
pub trait SegmentScorer: Sync {
    fn score_segment(&self, samples: &[f32]) -> Result<f64>;
}

/// Conv net scorer using the rescale stored with the checkpoint.
pub struct ConvScorer<'a>(pub &'a ConvCheckpoint);

impl SegmentScorer for ConvScorer<'_> {
    fn score_segment(&self, samples: &[f32]) -> Result<f64> {
        let ck = self.0;
        let clip = AudioClip::new(samples.to_vec(), ck.dsp.sample_rate_hz, "segment");
        let patch = apply_rescale(&log_mel(&clip, &ck.dsp)?, ck.rescale)?;
        ck.net.predict_pos(&patch)
    }
}

/// Logistic baseline over hand-crafted features of each window.
pub struct LinearScorer<'a> {
    pub model: &'a LogisticModel,
    pub dsp: &'a DspConfig,
}

impl SegmentScorer for LinearScorer<'_> {
    fn score_segment(&self, samples: &[f32]) -> Result<f64> {
        let clip = AudioClip::new(samples.to_vec(), self.dsp.sample_rate_hz, "segment");
        Ok(self.model.predict_proba(&handcrafted(&clip, self.dsp)?.0))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileScore {
    pub segment_probs: Vec<f64>,
    pub file_prob: f64,
}

/// Median; an even count averages the two middle values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn file_score_from_probs(segment_probs: Vec<f64>) -> Result<FileScore> {
    if segment_probs.is_empty() {
        return Err(Error::InvalidPredictions("file has no scored segments".into()));
    }
    if segment_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidPredictions(format!("segment probability outside [0, 1]: {segment_probs:?}")));
    }
    let file_prob = median(&segment_probs);
    Ok(FileScore { segment_probs, file_prob })
}

/// Scores every window of a canonical clip.
pub fn score_file(scorer: &dyn SegmentScorer, clip: &AudioClip) -> Result<FileScore> {
    let probs = windows(clip.len()).iter().map(|w| scorer.score_segment(&extract(clip, w))).collect::<Result<Vec<_>>>()?;
    file_score_from_probs(probs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    Min,
    Mean,
    Median,
    #[default]
    Max,
}

impl Aggregator {
    pub const ALL: [Aggregator; 4] = [Aggregator::Min, Aggregator::Mean, Aggregator::Median, Aggregator::Max];

    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Aggregator::Min => values.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Mean => values.iter().sum::<f64>() / values.len() as f64,
            Aggregator::Median => median(values),
        }
    }
}

impl fmt::Display for Aggregator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregator::Min => "min",
            Aggregator::Mean => "mean",
            Aggregator::Median => "median",
            Aggregator::Max => "max",
        })
    }
}

impl FromStr for Aggregator {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Aggregator::ALL
            .into_iter()
            .find(|a| a.to_string() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::InvalidConfig(format!("unknown aggregator '{s}' (min, mean, median, max)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualScore {
    pub individual_id: String,
    pub file_probs: Vec<f64>,
    pub indiv_prob: f64,
}

pub fn score_individual(individual_id: &str, file_scores: &[FileScore], agg: Aggregator) -> Result<IndividualScore> {
    if file_scores.len() != FILES_PER_INDIVIDUAL {
        return Err(Error::WrongFileCount { expected: FILES_PER_INDIVIDUAL, got: file_scores.len() });
    }
    let file_probs: Vec<f64> = file_scores.iter().map(|f| f.file_prob).collect();
    Ok(IndividualScore { individual_id: individual_id.to_owned(), indiv_prob: agg.apply(&file_probs), file_probs })
}

/// One scored individual with its per-file detail and label.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredIndividual {
    pub score: IndividualScore,
    pub files: Vec<FileScore>,
    pub label: bool,
}

pub fn score_clips(scorer: &dyn SegmentScorer, id: &str, clips: &[AudioClip], label: bool, agg: Aggregator) -> Result<ScoredIndividual> {
    let files = clips.iter().map(|c| score_file(scorer, c)).collect::<Result<Vec<_>>>()?;
    Ok(ScoredIndividual { score: score_individual(id, &files, agg)?, files, label })
}

/// `individual_id,file_index,segment_index,p_pos`
pub fn write_segment_csv(path: &Path, scored: &[ScoredIndividual]) -> Result<()> {
    crate::io_util::write_csv(path, &["individual_id", "file_index", "segment_index", "p_pos"], |w| {
        for s in scored {
            for (fi, f) in s.files.iter().enumerate() {
                for (si, p) in f.segment_probs.iter().enumerate() {
                    w.write_record([s.score.individual_id.clone(), fi.to_string(), si.to_string(), format!("{p:.17}")])?;
                }
            }
        }
        Ok(())
    })
}

/// `individual_id,indiv_prob,label`
pub fn write_individual_csv(path: &Path, scored: &[ScoredIndividual]) -> Result<()> {
    crate::io_util::write_csv(path, &["individual_id", "indiv_prob", "label"], |w| {
        for s in scored {
            w.write_record([s.score.individual_id.clone(), format!("{:.17}", s.score.indiv_prob), u8::from(s.label).to_string()])?;
        }
        Ok(())
    })
}

/// Reads `individual_id,indiv_prob,label` rows.
pub fn read_individual_csv(path: &Path) -> Result<Vec<(String, f64, bool)>> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 2;
        let bad = |m: String| Error::SchemaError { row, message: m };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, got {}", rec.len())));
        }
        let p: f64 = rec[1].parse().map_err(|_| bad(format!("bad probability '{}'", &rec[1])))?;
        let label = match &rec[2] {
            "0" => false,
            "1" => true,
            o => return Err(bad(format!("label must be 0 or 1, got '{o}'"))),
        };
        out.push((rec[0].to_owned(), p, label));
    }
    Ok(out)
}
