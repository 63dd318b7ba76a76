//! Fixed-length summary features for the shallow baseline.
//!
//! Layout (86 values):
//!
//! | range   | content                                   |
//! |---------|-------------------------------------------|
//! | 0..13   | MFCC 1..=13 mean                          |
//! | 13..26  | MFCC std                                  |
//! | 26..39  | MFCC median                               |
//! | 39..78  | same three statistics for the deltas      |
//! | 78, 79  | frame RMS mean, std                       |
//! | 80, 81  | zero-crossing rate (per sample) mean, std |
//! | 82      | spectral centroid mean (Hz)               |
//! | 83      | spectral rolloff (85%) mean (Hz)          |
//! | 84      | spectral bandwidth mean (Hz)              |
//! | 85      | onset rate (spectral-flux peaks / second) |

use ndarray::Array2;

use super::stft::frame_samples;
use super::{mel_project, stft_magnitude, DspConfig};
use crate::audio_io::AudioClip;
use crate::error::{Error, Result};

pub const N_MFCC: usize = 13;
pub const HANDCRAFTED_LEN: usize = N_MFCC * 2 * 3 + 2 + 2 + 3 + 1;
const ROLLOFF: f64 = 0.85;

#[derive(Debug, Clone, PartialEq)]
pub struct HandcraftedFeatures(pub Vec<f64>);

impl HandcraftedFeatures {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn names() -> Vec<String> {
        let mut names = Vec::with_capacity(HANDCRAFTED_LEN);
        for base in ["mfcc", "delta"] {
            for stat in ["mean", "std", "median"] {
                names.extend((1..=N_MFCC).map(|k| format!("{base}{k}_{stat}")));
            }
        }
        names.extend(
            ["rms_mean", "rms_std", "zcr_mean", "zcr_std", "centroid_mean", "rolloff_mean", "bandwidth_mean", "onset_rate"]
                .map(String::from),
        );
        names
    }
}

/// Orthonormal DCT-II of each column, keeping coefficients `1..=N_MFCC`.
fn mfcc(log_mel: &Array2<f32>) -> Array2<f64> {
    let (m, t) = log_mel.dim();
    let mut basis = Array2::<f64>::zeros((N_MFCC, m));
    let norm = (2.0 / m as f64).sqrt();
    for k in 1..=N_MFCC {
        for j in 0..m {
            basis[[k - 1, j]] = norm * (std::f64::consts::PI * k as f64 * (2 * j + 1) as f64 / (2 * m) as f64).cos();
        }
    }
    let x = log_mel.mapv(|v| v as f64);
    debug_assert_eq!(x.ncols(), t);
    basis.dot(&x)
}

/// Central difference along time with edge replication.
fn deltas(c: &Array2<f64>) -> Array2<f64> {
    let (rows, t) = c.dim();
    Array2::from_shape_fn((rows, t), |(r, i)| {
        let prev = c[[r, i.saturating_sub(1)]];
        let next = c[[r, (i + 1).min(t - 1)]];
        (next - prev) / 2.0
    })
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn std(x: &[f64]) -> f64 {
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

fn median(x: &[f64]) -> f64 {
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn row_stats(m: &Array2<f64>, out: &mut Vec<f64>) {
    let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
    out.extend(rows.iter().map(|r| mean(r)));
    out.extend(rows.iter().map(|r| std(r)));
    out.extend(rows.iter().map(|r| median(r)));
}

/// Zero-crossing count with zero treated as positive.
pub(crate) fn zero_crossings(x: &[f64]) -> usize {
    x.windows(2).filter(|w| (w[0] >= 0.0) != (w[1] >= 0.0)).count()
}

pub fn handcrafted(clip: &AudioClip, cfg: &DspConfig) -> Result<HandcraftedFeatures> {
    let win = cfg.win_len();
    if clip.samples.len() < win {
        return Err(Error::ClipTooShort { len: clip.samples.len(), frame: win });
    }
    let spec = stft_magnitude(clip, cfg)?;
    let log_mel = mel_project(&spec, cfg)?;
    let c = mfcc(&log_mel.values);
    let d = deltas(&c);

    let mut out = Vec::with_capacity(HANDCRAFTED_LEN);
    row_stats(&c, &mut out);
    row_stats(&d, &mut out);

    let n_frames = spec.n_frames();
    let mut frame = vec![0.0; win];
    let mut rms = Vec::with_capacity(n_frames);
    let mut zcr = Vec::with_capacity(n_frames);
    for t in 0..n_frames {
        frame_samples(&clip.samples, cfg, t, &mut frame);
        rms.push((frame.iter().map(|v| v * v).sum::<f64>() / win as f64).sqrt());
        zcr.push(zero_crossings(&frame) as f64 / win as f64);
    }
    out.extend([mean(&rms), std(&rms), mean(&zcr), std(&zcr)]);

    let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_size as f64;
    let (mut centroid, mut rolloff, mut bandwidth) = (Vec::new(), Vec::new(), Vec::new());
    for col in spec.values.columns() {
        let total: f64 = col.sum();
        if total <= 0.0 {
            centroid.push(0.0);
            rolloff.push(0.0);
            bandwidth.push(0.0);
            continue;
        }
        let cen = col.iter().enumerate().map(|(k, &m)| k as f64 * bin_hz * m).sum::<f64>() / total;
        let bw = (col.iter().enumerate().map(|(k, &m)| m * (k as f64 * bin_hz - cen).powi(2)).sum::<f64>() / total).sqrt();
        let mut acc = 0.0;
        let mut roll = (col.len() - 1) as f64 * bin_hz;
        for (k, &m) in col.iter().enumerate() {
            acc += m;
            if acc >= ROLLOFF * total {
                roll = k as f64 * bin_hz;
                break;
            }
        }
        centroid.push(cen);
        rolloff.push(roll);
        bandwidth.push(bw);
    }
    out.extend([mean(&centroid), mean(&rolloff), mean(&bandwidth)]);
    out.push(onset_rate(&spec.values, clip.duration_s()));

    debug_assert_eq!(out.len(), HANDCRAFTED_LEN);
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateFeatures(format!("non-finite handcrafted feature for {}", clip.source_id)));
    }
    Ok(HandcraftedFeatures(out))
}

/// Tempo proxy: peaks of positive spectral flux above mean + std, per second.
fn onset_rate(spec: &Array2<f64>, duration_s: f64) -> f64 {
    let t = spec.ncols();
    if t < 3 {
        return 0.0;
    }
    let flux: Vec<f64> = (0..t)
        .map(|i| {
            if i == 0 {
                return 0.0;
            }
            spec.column(i).iter().zip(spec.column(i - 1)).map(|(a, b)| (a - b).max(0.0)).sum()
        })
        .collect();
    let thresh = mean(&flux) + std(&flux);
    let peaks = (1..t - 1).filter(|&i| flux[i] > thresh && flux[i] > flux[i - 1] && flux[i] >= flux[i + 1]).count();
    peaks as f64 / duration_s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_length() {
        assert_eq!(HANDCRAFTED_LEN, 86);
        assert_eq!(HandcraftedFeatures::names().len(), 86);
    }

    #[test]
    fn silent_clip() {
        let f = handcrafted(&AudioClip::new(vec![0.0; 16000], 16000, "s"), &DspConfig::default()).unwrap();
        assert_eq!(f.0.len(), 86);
        assert_eq!(f.0[78], 0.0);
        assert_eq!(f.0[80], 0.0);
        // constant log-mel rows: all cepstral coefficients above c0 vanish
        assert!(f.0[..13].iter().all(|v| v.abs() < 1e-4));
    }

    #[test]
    fn square_wave_zero_crossing_rate() {
        // 100 Hz square wave at 16 kHz, half period 80 samples, no sample is zero.
        let samples: Vec<f32> = (0..16000).map(|n| if (n / 80) % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let direct = zero_crossings(&samples.iter().map(|&v| v as f64).collect::<Vec<_>>()) as f64;
        assert_eq!(direct, 199.0);

        // Oracle: explicit reflect padding, then sign changes counted per frame.
        let x: Vec<f64> = samples.iter().map(|&v| v as f64).collect();
        let mut padded: Vec<f64> = (1..=256).rev().map(|k| x[k]).collect();
        padded.extend(&x);
        padded.extend((1..=256).map(|k| x[x.len() - 1 - k]));
        let n_frames = x.len() / 160 + 1;
        let oracle = (0..n_frames)
            .map(|t| {
                let f = &padded[t * 160..t * 160 + 512];
                f.windows(2).filter(|w| w[0].signum() != w[1].signum()).count() as f64 / 512.0
            })
            .sum::<f64>()
            / n_frames as f64;

        let f = handcrafted(&AudioClip::new(samples, 16000, "sq"), &DspConfig::default()).unwrap();
        assert!((f.0[80] - oracle).abs() < 1e-12, "{} vs {oracle}", f.0[80]);
        // The hop equals the wave period, so every frame sees the same phase
        // (7 crossings per 512 samples); the rate stays within 10% of 200/s.
        let nominal = 200.0 / 16000.0;
        assert!((f.0[80] - nominal).abs() / nominal < 0.10);
    }

    #[test]
    fn too_short() {
        let r = handcrafted(&AudioClip::new(vec![0.1; 100], 16000, "s"), &DspConfig::default());
        assert!(matches!(r, Err(Error::ClipTooShort { .. })));
    }

    #[test]
    fn dct_is_orthonormal() {
        // Rows of the basis are orthonormal: a unit impulse in mel space has
        // total cepstral energy <= 1.
        let mut x = Array2::<f32>::zeros((64, 1));
        x[[10, 0]] = 1.0;
        let c = mfcc(&x);
        let e: f64 = c.iter().map(|v| v * v).sum();
        assert!(e <= 1.0 + 1e-12 && e > 0.1);
    }
}
