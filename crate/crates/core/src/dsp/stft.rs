use ndarray::Array2;
use rustfft::num_complex::Complex64;

use super::{fft, hamming, DspConfig};
use crate::audio_io::AudioClip;
use crate::error::{Error, Result};

/// Magnitude spectrogram, `bins x frames`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub values: Array2<f64>,
    /// Frame offsets in seconds.
    pub frame_times: Vec<f64>,
}

impl Spectrogram {
    pub fn n_bins(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.ncols()
    }
}

/// Index into a signal reflected about its end points (no edge repeat),
/// valid for any offset even when the padding exceeds the signal length.
fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = i.rem_euclid(period);
    (if m < len as isize { m } else { period - m }) as usize
}

/// Extracts frame `t` (unwindowed) into `out`.
pub(crate) fn frame_samples(samples: &[f32], cfg: &DspConfig, t: usize, out: &mut [f64]) {
    let (win, hop) = (cfg.win_len(), cfg.hop_len());
    let start = (t * hop) as isize - if cfg.center_pad { (win / 2) as isize } else { 0 };
    let len = samples.len();
    for (j, o) in out.iter_mut().enumerate().take(win) {
        let idx = start + j as isize;
        *o = if idx >= 0 && (idx as usize) < len {
            samples[idx as usize] as f64
        } else {
            samples[reflect_index(idx, len)] as f64
        };
    }
}

/// Hamming-windowed STFT magnitude, rows `0..=fft_size/2`.
pub fn stft_magnitude(clip: &AudioClip, cfg: &DspConfig) -> Result<Spectrogram> {
    if clip.sample_rate_hz != cfg.sample_rate_hz {
        return Err(Error::ConfigMismatch { clip_hz: clip.sample_rate_hz, config_hz: cfg.sample_rate_hz });
    }
    if clip.samples.is_empty() {
        return Err(Error::EmptyAudio);
    }
    let (win, nfft) = (cfg.win_len(), cfg.fft_size);
    let n_frames = cfg.n_frames(clip.samples.len());
    if n_frames == 0 {
        return Err(Error::ClipTooShort { len: clip.samples.len(), frame: win });
    }
    let window = hamming(win);
    let n_bins = cfg.n_bins();
    let plan = fft::plan(nfft);
    let mut values = Array2::<f64>::zeros((n_bins, n_frames));
    let mut frame = vec![0.0; win];
    let mut buf = vec![Complex64::new(0.0, 0.0); nfft];
    let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
    for t in 0..n_frames {
        frame_samples(&clip.samples, cfg, t, &mut frame);
        buf.iter_mut().for_each(|c| *c = Complex64::new(0.0, 0.0));
        for ((c, v), w) in buf.iter_mut().zip(&frame).zip(&window) {
            c.re = v * w;
        }
        plan.process_with_scratch(&mut buf, &mut scratch);
        for (k, c) in buf[..n_bins].iter().enumerate() {
            values[[k, t]] = (c.re * c.re + c.im * c.im).sqrt();
        }
    }
    let hop_s = cfg.hop_len() as f64 / cfg.sample_rate_hz as f64;
    Ok(Spectrogram { values, frame_times: (0..n_frames).map(|t| t as f64 * hop_s).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflect_index_matches_numpy_reflect() {
        // numpy.pad([0,1,2,3], 3, mode="reflect") -> 3 2 1 | 0 1 2 3 | 2 1 0
        let got: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(got, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
    }

    #[test]
    fn two_second_clip_geometry() {
        let clip = AudioClip::new(vec![0.0; 32000], 16000, "z");
        let s = stft_magnitude(&clip, &DspConfig::default()).unwrap();
        assert_eq!(s.values.dim(), (257, 201));
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!((s.frame_times[200] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn rate_mismatch() {
        let clip = AudioClip::new(vec![0.0; 100], 8000, "z");
        assert!(matches!(stft_magnitude(&clip, &DspConfig::default()), Err(Error::ConfigMismatch { .. })));
    }

    #[test]
    fn short_clip_without_padding() {
        let cfg = DspConfig { center_pad: false, ..Default::default() };
        let clip = AudioClip::new(vec![0.1; 100], 16000, "z");
        assert!(matches!(stft_magnitude(&clip, &cfg), Err(Error::ClipTooShort { .. })));
        // With padding even a single sample yields one frame.
        let one = AudioClip::new(vec![0.5], 16000, "z");
        assert_eq!(stft_magnitude(&one, &DspConfig::default()).unwrap().n_frames(), 1);
    }

    #[test]
    fn tone_peaks_at_closed_form_bin() {
        let clip = AudioClip::new(
            (0..32000).map(|n| (2.0 * std::f64::consts::PI * 1000.0 * n as f64 / 16000.0).sin() as f32 * 0.5).collect(),
            16000,
            "tone",
        );
        let s = stft_magnitude(&clip, &DspConfig::default()).unwrap();
        let expected = (1000.0f64 * 512.0 / 16000.0).round() as usize;
        for t in 2..199 {
            let col = s.values.column(t);
            let arg = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
            assert_eq!(arg, expected, "frame {t}");
        }
    }
}
