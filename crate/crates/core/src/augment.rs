//! Training-time augmentation: additive background noise (waveform domain)
//! and SpecAugment-style time/frequency masking.

use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::audio_io::{self, AudioClip};
use crate::dsp::LogMelPatch;
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::CANONICAL_RATE_HZ;

/// Two seconds at the canonical rate.
pub const SEGMENT_SAMPLES: usize = 2 * CANONICAL_RATE_HZ as usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub enabled: bool,
    pub noise_prob: f64,
    pub amp_min: f64,
    pub amp_max: f64,
    pub n_time_masks: usize,
    pub max_time_mask_frames: usize,
    pub n_freq_masks: usize,
    pub max_freq_mask_bins: usize,
    pub rng_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            noise_prob: 0.5,
            amp_min: 0.4,
            amp_max: 0.75,
            n_time_masks: 1,
            max_time_mask_frames: 20,
            n_freq_masks: 1,
            max_freq_mask_bins: 8,
            rng_seed: crate::rng::DEFAULT_SEED,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.noise_prob) {
            return Err(Error::InvalidConfig(format!("noise_prob {} outside [0, 1]", self.noise_prob)));
        }
        if !(0.0 <= self.amp_min && self.amp_min <= self.amp_max) {
            return Err(Error::InvalidConfig(format!("need 0 <= amp_min <= amp_max, got {}..{}", self.amp_min, self.amp_max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct NoiseClip {
    pub clip: AudioClip,
    pub category: String,
}

/// Background noise corpus; every clip is at least two seconds long.
#[derive(Debug, Clone, Default)]
pub struct NoiseBank {
    pub clips: Vec<NoiseClip>,
}

impl NoiseBank {
    /// Adds a clip, canonicalising its rate and tiling it to two seconds.
    pub fn push(&mut self, clip: &AudioClip, category: impl Into<String>) {
        let mut clip = audio_io::canonicalize(clip);
        if clip.samples.len() < SEGMENT_SAMPLES {
            let base = std::mem::take(&mut clip.samples);
            clip.samples = base.iter().copied().cycle().take(SEGMENT_SAMPLES).collect();
        }
        self.clips.push(NoiseClip { clip, category: category.into() });
    }

    /// Loads every `*.wav` in `dir` (sorted by file name). The category is the
    /// file stem up to the first `-`.
    pub fn load_dir(dir: &Path) -> Result<Self> {
        let entries = std::fs::read_dir(dir).map_err(|e| Error::io(format!("reading noise dir {}", dir.display()), e))?;
        let mut paths: Vec<_> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("wav")))
            .collect();
        paths.sort();
        let mut bank = Self::default();
        for p in paths {
            let clip = audio_io::read_wav(&p)?;
            let stem = p.file_stem().and_then(|s| s.to_str()).unwrap_or("noise");
            bank.push(&clip, stem.split('-').next().unwrap_or(stem));
        }
        Ok(bank)
    }

    pub fn is_empty(&self) -> bool {
        self.clips.is_empty()
    }

    pub fn len(&self) -> usize {
        self.clips.len()
    }
}

/// Adds a random two-second noise crop scaled by `a ~ U[amp_min, amp_max]`,
/// clamping the result to `[-1, 1]`.
pub fn mix_noise(segment: &AudioClip, bank: &NoiseBank, cfg: &AugmentConfig, rng: &mut Rng) -> Result<AudioClip> {
    if bank.is_empty() {
        return Err(Error::EmptyNoiseBank);
    }
    if segment.samples.len() != SEGMENT_SAMPLES || segment.sample_rate_hz != CANONICAL_RATE_HZ {
        return Err(Error::ShapeMismatch {
            expected: format!("{SEGMENT_SAMPLES} samples at {CANONICAL_RATE_HZ} Hz"),
            got: format!("{} samples at {} Hz", segment.samples.len(), segment.sample_rate_hz),
        });
    }
    let noise = &bank.clips[rng.random_range(0..bank.len())].clip.samples;
    let start = rng.random_range(0..=noise.len() - SEGMENT_SAMPLES);
    let amp = if cfg.amp_max > cfg.amp_min { rng.random_range(cfg.amp_min..=cfg.amp_max) } else { cfg.amp_min } as f32;
    let samples = segment
        .samples
        .iter()
        .zip(&noise[start..start + SEGMENT_SAMPLES])
        .map(|(&s, &n)| (s + amp * n).clamp(-1.0, 1.0))
        .collect();
    Ok(AudioClip { samples, sample_rate_hz: segment.sample_rate_hz, source_id: segment.source_id.clone() })
}

/// Replaces `n_time_masks` column bands and `n_freq_masks` row bands with the
/// patch mean. Widths are uniform in `[0, max]`, positions uniform over the
/// valid range; untouched cells are copied verbatim.
pub fn spec_mask(patch: &LogMelPatch, cfg: &AugmentConfig, rng: &mut Rng) -> Result<LogMelPatch> {
    let (rows, cols) = patch.dim();
    if cfg.max_time_mask_frames > cols {
        return Err(Error::MaskWiderThanPatch { axis: "time", width: cfg.max_time_mask_frames, extent: cols });
    }
    if cfg.max_freq_mask_bins > rows {
        return Err(Error::MaskWiderThanPatch { axis: "frequency", width: cfg.max_freq_mask_bins, extent: rows });
    }
    let mut out = patch.clone();
    if patch.values.is_empty() {
        return Ok(out);
    }
    let fill = (patch.values.iter().map(|&v| v as f64).sum::<f64>() / patch.values.len() as f64) as f32;
    for _ in 0..cfg.n_time_masks {
        let w = rng.random_range(0..=cfg.max_time_mask_frames);
        let start = rng.random_range(0..=cols - w);
        out.values.slice_mut(ndarray::s![.., start..start + w]).fill(fill);
    }
    for _ in 0..cfg.n_freq_masks {
        let w = rng.random_range(0..=cfg.max_freq_mask_bins);
        let start = rng.random_range(0..=rows - w);
        out.values.slice_mut(ndarray::s![start..start + w, ..]).fill(fill);
    }
    Ok(out)
}
