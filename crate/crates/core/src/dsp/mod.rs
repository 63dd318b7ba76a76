//! Feature front end: STFT magnitude, log-mel projection, train-set
//! rescaling and hand-crafted summary features.

pub mod cache;
pub mod features;
pub mod fft;
pub mod mel;
pub mod stft;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use features::{handcrafted, HandcraftedFeatures, HANDCRAFTED_LEN};
pub use mel::{apply_rescale, fit_rescale, hz_to_mel, mel_filterbank, mel_project, mel_to_hz, LogMelPatch, LOG_FLOOR};
pub use stft::{stft_magnitude, Spectrogram};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DspConfig {
    pub sample_rate_hz: u32,
    pub win_ms: f64,
    pub hop_ms: f64,
    pub fft_size: usize,
    pub n_mels: usize,
    pub f_min_hz: f64,
    pub f_max_hz: f64,
    /// Reflection-pad by half a window on both ends so that
    /// `frames = floor(len / hop) + 1`.
    pub center_pad: bool,
}

impl Default for DspConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            win_ms: 32.0,
            hop_ms: 10.0,
            fft_size: 512,
            n_mels: 64,
            f_min_hz: 125.0,
            f_max_hz: 7500.0,
            center_pad: true,
        }
    }
}

impl DspConfig {
    pub fn win_len(&self) -> usize {
        (self.win_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn hop_len(&self) -> usize {
        (self.hop_ms * self.sample_rate_hz as f64 / 1000.0).round() as usize
    }

    pub fn n_bins(&self) -> usize {
        self.fft_size / 2 + 1
    }

    /// Number of STFT frames for a signal of `len` samples.
    pub fn n_frames(&self, len: usize) -> usize {
        if self.center_pad {
            len / self.hop_len() + 1
        } else if len >= self.win_len() {
            (len - self.win_len()) / self.hop_len() + 1
        } else {
            0
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.sample_rate_hz == 0 || self.win_len() == 0 || self.hop_len() == 0 {
            return bad("sample rate, window and hop must be positive".into());
        }
        if self.fft_size < self.win_len() {
            return bad(format!("fft_size {} shorter than window {}", self.fft_size, self.win_len()));
        }
        if !(self.f_min_hz >= 0.0 && self.f_min_hz < self.f_max_hz && self.f_max_hz <= self.sample_rate_hz as f64 / 2.0) {
            return bad(format!("need 0 <= f_min < f_max <= Nyquist, got {}..{}", self.f_min_hz, self.f_max_hz));
        }
        if self.n_mels < 2 {
            return bad("n_mels must be at least 2".into());
        }
        Ok(())
    }
}

/// Convenience: waveform straight to an unscaled log-mel patch.
pub fn log_mel(clip: &crate::AudioClip, cfg: &DspConfig) -> Result<LogMelPatch> {
    mel_project(&stft_magnitude(clip, cfg)?, cfg)
}

/// Symmetric Hamming window `0.54 - 0.46 cos(2 pi n / (N - 1))`.
pub fn hamming(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![1.0];
    }
    (0..n).map(|i| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry() {
        let c = DspConfig::default();
        assert_eq!((c.win_len(), c.hop_len(), c.n_bins()), (512, 160, 257));
        assert_eq!(c.n_frames(32000), 201);
        c.validate().unwrap();
        let raw = DspConfig { center_pad: false, ..c };
        assert_eq!(raw.n_frames(32000), 197);
    }

    #[test]
    fn invalid_configs() {
        let c = DspConfig { fft_size: 256, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DspConfig { f_max_hz: 9000.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = DspConfig { n_mels: 1, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hamming_endpoints() {
        let w = hamming(512);
        assert!((w[0] - 0.08).abs() < 1e-12 && (w[511] - 0.08).abs() < 1e-12);
        assert!(w[255] > 0.999);
    }
}
