use ndarray::Array2;

use super::{DspConfig, Spectrogram};
use crate::error::{Error, Result};

/// Added before the log so silent bins stay finite.
pub const LOG_FLOOR: f64 = 1e-10;

/// Log-mel matrix, `n_mels x frames`; the classifier input.
#[derive(Debug, Clone, PartialEq)]
pub struct LogMelPatch {
    pub values: Array2<f32>,
    /// Train-set scale the values were divided by, once rescaled.
    pub scale_applied: Option<f64>,
}

impl LogMelPatch {
    pub fn new(values: Array2<f32>) -> Self {
        Self { values, scale_applied: None }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.values.dim()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, &v| m.max((v as f64).abs()))
    }
}

/// HTK mel scale.
pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// Triangular unit-peak filters, `n_mels x n_bins`, with peaks equally spaced
/// in mel between `f_min` and `f_max`.
pub fn mel_filterbank(cfg: &DspConfig) -> Array2<f64> {
    let (lo, hi) = (hz_to_mel(cfg.f_min_hz), hz_to_mel(cfg.f_max_hz));
    let n_pts = cfg.n_mels + 2;
    let edges: Vec<f64> = (0..n_pts).map(|i| mel_to_hz(lo + (hi - lo) * i as f64 / (n_pts - 1) as f64)).collect();
    let bin_hz = cfg.sample_rate_hz as f64 / cfg.fft_size as f64;
    let mut fb = Array2::<f64>::zeros((cfg.n_mels, cfg.n_bins()));
    for m in 0..cfg.n_mels {
        let (left, center, right) = (edges[m], edges[m + 1], edges[m + 2]);
        for k in 0..cfg.n_bins() {
            let f = k as f64 * bin_hz;
            let w = if f > left && f <= center {
                (f - left) / (center - left)
            } else if f > center && f < right {
                (right - f) / (right - center)
            } else {
                0.0
            };
            fb[[m, k]] = w;
        }
    }
    fb
}

/// `ln(filterbank . magnitudes + LOG_FLOOR)`.
pub fn mel_project(spec: &Spectrogram, cfg: &DspConfig) -> Result<LogMelPatch> {
    if spec.n_bins() != cfg.n_bins() {
        return Err(Error::ShapeMismatch {
            expected: format!("{} frequency bins", cfg.n_bins()),
            got: format!("{}", spec.n_bins()),
        });
    }
    let mel = mel_filterbank(cfg).dot(&spec.values);
    Ok(LogMelPatch::new(mel.mapv(|v| (v + LOG_FLOOR).ln() as f32)))
}

/// Largest absolute log-mel value over the training patches.
pub fn fit_rescale<'a, I>(train_patches: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a LogMelPatch>,
{
    let mut any = false;
    let mut max = 0.0f64;
    for p in train_patches {
        any = true;
        max = max.max(p.max_abs());
    }
    if !any {
        return Err(Error::EmptyTrainingSet);
    }
    Ok(if max > 0.0 { max } else { LOG_FLOOR.ln().abs() })
}

/// Divides by the train-set scale. Values that land outside `[-1, 1]` (possible
/// for validation data) are clamped.
pub fn apply_rescale(patch: &LogMelPatch, scale: f64) -> Result<LogMelPatch> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::NonPositiveScale(scale));
    }
    Ok(LogMelPatch {
        values: patch.values.mapv(|v| ((v as f64 / scale).clamp(-1.0, 1.0)) as f32),
        scale_applied: Some(scale),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn mel_formula_values() {
        assert_eq!(hz_to_mel(0.0), 0.0);
        // 2595 * log10(2)
        assert!((hz_to_mel(700.0) - 781.172_838_748_031_2).abs() < 1e-9);
        assert!((mel_to_hz(hz_to_mel(3210.5)) - 3210.5).abs() < 1e-9);
    }

    #[test]
    fn filterbank_shape_and_coverage() {
        let cfg = DspConfig::default();
        let fb = mel_filterbank(&cfg);
        assert_eq!(fb.dim(), (64, 257));
        assert!(fb.iter().all(|&w| (0.0..=1.0).contains(&w)));
        let bin_hz = 16000.0 / 512.0;
        for k in 0..257 {
            let f = k as f64 * bin_hz;
            let total: f64 = fb.column(k).sum();
            if f > cfg.f_min_hz && f < cfg.f_max_hz {
                assert!(total > 0.0, "bin {k} ({f} Hz) uncovered");
            } else {
                assert_eq!(total, 0.0, "bin {k} ({f} Hz) outside range");
            }
        }
        // Peak positions strictly increasing.
        let peaks: Vec<usize> =
            (0..64).map(|m| (0..257).max_by(|&a, &b| fb[[m, a]].total_cmp(&fb[[m, b]])).unwrap()).collect();
        assert!(peaks.windows(2).all(|w| w[0] < w[1]), "{peaks:?}");
    }

    #[test]
    fn rescale_examples() {
        let p = LogMelPatch::new(array![[-23.0f32, 1.0]]);
        assert_eq!(fit_rescale([&p]).unwrap(), 23.0);
        let a = LogMelPatch::new(array![[-5.0f32]]);
        let b = LogMelPatch::new(array![[7.0f32]]);
        assert_eq!(fit_rescale([&a, &b]).unwrap(), 7.0);
        assert!(matches!(fit_rescale(std::iter::empty()), Err(Error::EmptyTrainingSet)));

        let r = apply_rescale(&LogMelPatch::new(array![[-4.0f32, 2.0]]), 4.0).unwrap();
        assert_eq!(r.values, array![[-1.0f32, 0.5]]);
        assert_eq!(r.scale_applied, Some(4.0));
        let v = apply_rescale(&LogMelPatch::new(array![[-9.0f32]]), 4.0).unwrap();
        assert_eq!(v.values[[0, 0]], -1.0);
        let z = apply_rescale(&LogMelPatch::new(Array2::zeros((3, 3))), 2.5).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        assert!(matches!(apply_rescale(&z, 0.0), Err(Error::NonPositiveScale(_))));
    }

    #[test]
    fn silent_input_hits_the_floor() {
        let cfg = DspConfig::default();
        let spec = Spectrogram { values: Array2::zeros((257, 3)), frame_times: vec![0.0; 3] };
        let p = mel_project(&spec, &cfg).unwrap();
        assert_eq!(p.dim(), (64, 3));
        let floor = LOG_FLOOR.ln() as f32;
        assert!(p.values.iter().all(|&v| v == floor));
        assert!((fit_rescale([&p]).unwrap() - 23.025_850_9).abs() < 1e-5);
    }
}
