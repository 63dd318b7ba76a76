//! Random 2-second training segments.

use rand::Rng as _;

use crate::audio_io::AudioClip;
use crate::augment::SEGMENT_SAMPLES;
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start_sample: usize,
    /// Real (non-padding) samples in the segment.
    pub real_samples: usize,
    pub padded: bool,
}

impl Segment {
    pub fn start_s(&self, sample_rate_hz: u32) -> f64 {
        self.start_sample as f64 / sample_rate_hz as f64
    }

    pub fn duration_s(&self, sample_rate_hz: u32) -> f64 {
        SEGMENT_SAMPLES as f64 / sample_rate_hz as f64
    }
}

/// Uniform start in `[0, len - 2 s]`; shorter clips start at 0 and are padded.
pub fn sample_segment(clip_len: usize, rng: &mut Rng) -> Segment {
    if clip_len <= SEGMENT_SAMPLES {
        return Segment { start_sample: 0, real_samples: clip_len, padded: clip_len < SEGMENT_SAMPLES };
    }
    let start = rng.random_range(0..=clip_len - SEGMENT_SAMPLES);
    Segment { start_sample: start, real_samples: SEGMENT_SAMPLES, padded: false }
}

/// Copies the segment out of `clip`, zero-filling past the end.
pub fn extract(clip: &AudioClip, seg: &Segment) -> Vec<f32> {
    let mut out = vec![0.0f32; SEGMENT_SAMPLES];
    let end = (seg.start_sample + SEGMENT_SAMPLES).min(clip.samples.len());
    if seg.start_sample < end {
        out[..end - seg.start_sample].copy_from_slice(&clip.samples[seg.start_sample..end]);
    }
    out
}
