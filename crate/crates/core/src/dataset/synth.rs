//! Synthetic cough corpus for desk-scale experiments.
//!
//! Every clip is a train of exponentially decaying, low-passed noise bursts
//! over a faint background. Positive individuals additionally carry a tone
//! between 300 and 600 Hz, loud inside bursts and as a quieter hum between
//! them, whose pitch, vibrato and level are drawn per clip; weak draws overlap
//! with the negative class.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::{encode_wav_pcm16, AudioClip};
use crate::dataset::manifest::{write_manifest, IndividualRecord, Sex, Symptoms};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::rng::{stream, tag_str, Rng};
use crate::CANONICAL_RATE_HZ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthFacility {
    pub name: String,
    /// Relative share of individuals.
    pub share: f64,
    /// Relative positive rate; combined with `share` to apportion positives.
    pub pos_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_individuals: usize,
    pub pos_frac: f64,
    pub facilities: Vec<SynthFacility>,
    pub seed: u64,
    pub min_clip_s: f64,
    pub max_clip_s: f64,
    /// Range of the tone level relative to the burst level (positives only).
    pub tone_ratio_min: f64,
    pub tone_ratio_max: f64,
    /// Background noise clips written to `noise/` for augmentation.
    pub n_noise_clips: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        // 120 individuals split 45/35/30/10 with 18/30/10/2 positives: two
        // testing sites, one mostly-positive ward, one tiny site.
        let f = |name: &str, share: f64, pos: f64| SynthFacility { name: name.into(), share, pos_rate: pos / share };
        Self {
            n_individuals: 120,
            pos_frac: 0.5,
            facilities: vec![f("F1", 45.0, 18.0), f("F2", 35.0, 30.0), f("F3", 30.0, 10.0), f("F4", 10.0, 2.0)],
            seed: crate::rng::DEFAULT_SEED,
            min_clip_s: 1.5,
            max_clip_s: 4.0,
            tone_ratio_min: 0.1,
            tone_ratio_max: 0.6,
            n_noise_clips: 6,
        }
    }
}

/// Largest-remainder apportionment of `total` over `weights`, with each
/// share capped at `caps[i]`.
pub fn apportion(total: usize, weights: &[f64], caps: &[usize]) -> Vec<usize> {
    let mut out = vec![0usize; weights.len()];
    let mut remaining = total.min(caps.iter().sum());
    let mut open: Vec<usize> = (0..weights.len()).filter(|&i| caps[i] > 0 && weights[i] > 0.0).collect();
    while remaining > 0 && !open.is_empty() {
        let wsum: f64 = open.iter().map(|&i| weights[i]).sum();
        let mut quotas: Vec<(usize, f64)> = open.iter().map(|&i| (i, remaining as f64 * weights[i] / wsum)).collect();
        let before = remaining;
        for &(i, q) in &quotas {
            let add = (q.floor() as usize).min(caps[i] - out[i]);
            out[i] += add;
            remaining -= add;
        }
        quotas.sort_by(|a, b| (b.1 - b.1.floor()).total_cmp(&(a.1 - a.1.floor())).then(a.0.cmp(&b.0)));
        for &(i, _) in &quotas {
            if remaining > 0 && out[i] < caps[i] {
                out[i] += 1;
                remaining -= 1;
            }
        }
        open.retain(|&i| out[i] < caps[i]);
        if remaining == before {
            break;
        }
    }
    out
}

fn gauss(rng: &mut Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn one_pole_lowpass(x: &mut [f64], cutoff_hz: f64) {
    let a = (-2.0 * PI * cutoff_hz / CANONICAL_RATE_HZ as f64).exp();
    let mut y = 0.0;
    for v in x.iter_mut() {
        y = (1.0 - a) * *v + a * y;
        *v = y;
    }
}

/// Level of the sustained hum per unit tone ratio.
const HUM_LEVEL: f64 = 0.05;

/// Generates one cough clip.
pub fn synth_clip(positive: bool, cfg: &SynthConfig, rng: &mut Rng) -> Vec<f32> {
    let sr = CANONICAL_RATE_HZ as f64;
    let dur = rng.random_range(cfg.min_clip_s..=cfg.max_clip_s);
    let n = (dur * sr).round() as usize;
    let mut x: Vec<f64> = (0..n).map(|_| 0.003 * gauss(rng)).collect();

    let f0 = rng.random_range(320.0..580.0);
    let vib_hz = rng.random_range(3.0..7.0);
    let vib_depth = rng.random_range(0.0..15.0);
    let tone_ratio = if positive { rng.random_range(cfg.tone_ratio_min..=cfg.tone_ratio_max) } else { 0.0 };
    let cutoff = rng.random_range(1500.0..4000.0);

    let mut t0 = rng.random_range(0.05..0.4);
    while t0 < dur - 0.1 {
        let amp = rng.random_range(0.2..0.6);
        let tau = rng.random_range(0.05..0.15);
        let start = (t0 * sr) as usize;
        let len = ((5.0 * tau * sr) as usize).min(n - start);
        let mut burst: Vec<f64> = (0..len).map(|_| gauss(rng)).collect();
        one_pole_lowpass(&mut burst, cutoff);
        let rms = (burst.iter().map(|v| v * v).sum::<f64>() / len.max(1) as f64).sqrt().max(1e-12);
        let mut phase = rng.random_range(0.0..2.0 * PI);
        for (j, b) in burst.iter().enumerate() {
            let t = j as f64 / sr;
            let env = (-t / tau).exp() * (1.0 - (-t / 0.005).exp());
            let f = f0 + vib_depth * (2.0 * PI * vib_hz * t).sin();
            phase += 2.0 * PI * f / sr;
            x[start + j] += amp * env * (0.5 * b / rms + tone_ratio * phase.sin());
        }
        t0 += rng.random_range(0.35..0.9);
    }
    if positive {
        // A quieter hum at the same pitch runs under the whole clip.
        let level = HUM_LEVEL * tone_ratio;
        let mut phase = rng.random_range(0.0..2.0 * PI);
        for (i, v) in x.iter_mut().enumerate() {
            let t = i as f64 / sr;
            phase += 2.0 * PI * (f0 + vib_depth * (2.0 * PI * vib_hz * t).sin()) / sr;
            *v += level * (0.7 + 0.3 * (2.0 * PI * 0.5 * t).sin()) * phase.sin();
        }
    }
    x.into_iter().map(|v| v.clamp(-1.0, 1.0) as f32).collect()
}

fn synth_noise(kind: usize, rng: &mut Rng) -> Vec<f32> {
    let sr = CANONICAL_RATE_HZ as f64;
    let n = (5.0 * sr) as usize;
    match kind % 3 {
        0 => {
            let mut x: Vec<f64> = (0..n).map(|_| gauss(rng)).collect();
            one_pole_lowpass(&mut x, rng.random_range(800.0..3000.0));
            x.iter().map(|v| (0.3 * v) as f32).collect()
        }
        1 => {
            let f = if rng.random_bool(0.5) { 50.0 } else { 60.0 };
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    let s: f64 = (1..=4).map(|h| (2.0 * PI * f * h as f64 * t).sin() / h as f64).sum();
                    (0.2 * s + 0.01 * gauss(rng)) as f32
                })
                .collect()
        }
        _ => {
            let rate = rng.random_range(2.0..5.0);
            (0..n)
                .map(|i| {
                    let t = i as f64 / sr;
                    let env = 0.5 + 0.5 * (2.0 * PI * rate * t).sin();
                    (0.2 * env * gauss(rng)) as f32
                })
                .collect()
        }
    }
}

pub const NOISE_CATEGORIES: [&str; 3] = ["wind", "hum", "chatter"];

/// Writes `manifest.csv`, `audio/*.wav` and `noise/*.wav` under `out_dir`
/// and returns the manifest path. Output is byte-identical for a given
/// config.
pub fn synth_dataset(cfg: &SynthConfig, out_dir: &Path) -> Result<PathBuf> {
    let n = cfg.n_individuals;
    if n < 20 {
        return Err(Error::InvalidConfig(format!("synthetic set needs at least 20 individuals, got {n}")));
    }
    if !(0.0..=1.0).contains(&cfg.pos_frac) || cfg.facilities.is_empty() {
        return Err(Error::InvalidConfig("pos_frac must lie in [0, 1] and at least one facility is required".into()));
    }
    if !(cfg.min_clip_s > 0.0 && cfg.min_clip_s <= cfg.max_clip_s) || cfg.tone_ratio_min > cfg.tone_ratio_max {
        return Err(Error::InvalidConfig("inverted synthetic ranges".into()));
    }
    let shares: Vec<f64> = cfg.facilities.iter().map(|f| f.share).collect();
    let sizes = apportion(n, &shares, &vec![n; shares.len()]);
    let pos_weights: Vec<f64> = cfg.facilities.iter().map(|f| f.share * f.pos_rate).collect();
    let n_pos = (cfg.pos_frac * n as f64).round() as usize;
    let pos = apportion(n_pos, &pos_weights, &sizes);

    let mut people: Vec<(usize, bool)> = Vec::with_capacity(n);
    for (fi, (&size, &p)) in sizes.iter().zip(&pos).enumerate() {
        people.extend((0..size).map(|i| (fi, i < p)));
    }
    people.shuffle(&mut stream(cfg.seed, &[tag_str("synth-order")]));

    let audio_dir = out_dir.join("audio");
    let records: Vec<IndividualRecord> = people
        .par_iter()
        .enumerate()
        .map(|(i, &(fi, positive))| -> Result<IndividualRecord> {
            let id = format!("ind{i:04}");
            let mut rng = stream(cfg.seed, &[tag_str("synth-person"), i as u64]);
            let age = rng.random_range(18..=85) as f64;
            let sex = match rng.random_range(0..100) {
                0..48 => Sex::M,
                48..97 => Sex::F,
                _ => Sex::Other,
            };
            let symptoms = Symptoms {
                cough: rng.random_bool(if positive { 0.6 } else { 0.3 }),
                fever: rng.random_bool(if positive { 0.4 } else { 0.1 }),
                dyspnea: rng.random_bool(if positive { 0.2 } else { 0.05 }),
            };
            let mut paths: [PathBuf; 3] = Default::default();
            for (k, p) in paths.iter_mut().enumerate() {
                let mut crng = stream(cfg.seed, &[tag_str("synth-clip"), i as u64, k as u64]);
                let samples = synth_clip(positive, cfg, &mut crng);
                *p = audio_dir.join(format!("{id}_{k}.wav"));
                write_atomic(p, &encode_wav_pcm16(&AudioClip::new(samples, CANONICAL_RATE_HZ, id.clone())))?;
            }
            Ok(IndividualRecord {
                individual_id: id,
                facility: cfg.facilities[fi].name.clone(),
                age,
                sex,
                symptoms,
                rtpcr_positive: positive,
                cough_paths: paths,
            })
        })
        .collect::<Result<_>>()?;

    let noise_dir = out_dir.join("noise");
    for j in 0..cfg.n_noise_clips {
        let mut rng = stream(cfg.seed, &[tag_str("synth-noise"), j as u64]);
        let samples = synth_noise(j, &mut rng);
        let name = format!("{}-{j}.wav", NOISE_CATEGORIES[j % NOISE_CATEGORIES.len()]);
        write_atomic(&noise_dir.join(name), &encode_wav_pcm16(&AudioClip::new(samples, CANONICAL_RATE_HZ, "noise")))?;
    }

    let manifest = out_dir.join("manifest.csv");
    write_manifest(&manifest, &records)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_default_facilities() {
        let cfg = SynthConfig::default();
        let shares: Vec<f64> = cfg.facilities.iter().map(|f| f.share).collect();
        let sizes = apportion(120, &shares, &[120; 4]);
        assert_eq!(sizes, vec![45, 35, 30, 10]);
        let w: Vec<f64> = cfg.facilities.iter().map(|f| f.share * f.pos_rate).collect();
        assert_eq!(apportion(60, &w, &sizes), vec![18, 30, 10, 2]);
    }

    #[test]
    fn apportion_respects_caps() {
        let a = apportion(10, &[1.0, 1.0, 8.0], &[5, 5, 2]);
        assert_eq!(a.iter().sum::<usize>(), 10);
        assert_eq!(a[2], 2);
        assert!(a[0] <= 5 && a[1] <= 5);
        assert_eq!(apportion(7, &[1.0, 2.0], &[1, 2]), vec![1, 2]);
        assert_eq!(apportion(3, &[1.0, 1.0, 1.0], &[9, 9, 9]), vec![1, 1, 1]);
    }

    #[test]
    fn clip_lengths_and_range() {
        let cfg = SynthConfig::default();
        for k in 0..10 {
            let x = synth_clip(k % 2 == 0, &cfg, &mut stream(3, &[k]));
            let d = x.len() as f64 / 16000.0;
            assert!((1.5..=4.0).contains(&d));
            assert!(x.iter().all(|v| v.abs() <= 1.0));
            assert!(x.iter().map(|v| v.abs()).fold(0.0, f32::max) > 0.05);
        }
    }
}
