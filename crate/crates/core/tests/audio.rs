//! WAV decoding against a hand-rolled writer, and resampler behaviour.

use std::f64::consts::PI;

use cac_core::audio_io::{decode_wav, encode_wav_pcm16, resample};
use cac_core::dsp::fft::rfft_magnitude;
use cac_core::AudioClip;
use proptest::prelude::*;

/// Minimal PCM16 RIFF writer, independent of the library's encoder.
fn pcm16_wav(rate: u32, channels: u16, interleaved: &[i16]) -> Vec<u8> {
    let data_len = (interleaved.len() * 2) as u32;
    let mut b = Vec::new();
    b.extend_from_slice(b"RIFF");
    b.extend_from_slice(&(36 + data_len).to_le_bytes());
    b.extend_from_slice(b"WAVEfmt ");
    b.extend_from_slice(&16u32.to_le_bytes());
    b.extend_from_slice(&1u16.to_le_bytes());
    b.extend_from_slice(&channels.to_le_bytes());
    b.extend_from_slice(&rate.to_le_bytes());
    b.extend_from_slice(&(rate * channels as u32 * 2).to_le_bytes());
    b.extend_from_slice(&(channels * 2).to_le_bytes());
    b.extend_from_slice(&16u16.to_le_bytes());
    b.extend_from_slice(b"data");
    b.extend_from_slice(&data_len.to_le_bytes());
    for s in interleaved {
        b.extend_from_slice(&s.to_le_bytes());
    }
    b
}

fn sine(freq: f64, rate: u32, n: usize, amp: f64) -> Vec<f64> {
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect()
}

#[test]
fn decodes_hand_written_sine() {
    let x = sine(440.0, 44100, 44100, 0.8);
    let ints: Vec<i16> = x.iter().map(|v| (v * 32767.0).round() as i16).collect();
    let clip = decode_wav(&pcm16_wav(44100, 1, &ints)).unwrap();
    assert_eq!((clip.len(), clip.sample_rate_hz), (44100, 44100));
    for (a, b) in clip.samples.iter().zip(&x) {
        assert!((*a as f64 - b).abs() <= 1.0 / 32768.0);
    }
    let peak = clip.samples.iter().fold(0.0f32, |m, v| m.max(v.abs()));
    assert!((peak as f64 - 0.8).abs() < 1e-3);
}

#[test]
fn stereo_is_averaged() {
    let clip = decode_wav(&pcm16_wav(8000, 2, &[32767, 0, -16384, 16384])).unwrap();
    assert_eq!(clip.len(), 2);
    assert!((clip.samples[0] - 0.5).abs() < 1e-4);
    assert!(clip.samples[1].abs() < 1e-6);
}

#[test]
fn resampled_sine_keeps_its_pitch() {
    let x = sine(440.0, 44100, 44100, 0.5);
    let clip = AudioClip::new(x.iter().map(|&v| v as f32).collect(), 44100, "s");
    let out = resample(&clip, 16000);
    assert!((out.len() as i64 - 16000).abs() <= 1);
    // 16000-point spectrum: one bin per hertz.
    let frame: Vec<f64> = out.samples.iter().take(16000).map(|&v| v as f64).collect();
    let mag = rfft_magnitude(&frame);
    let peak = (0..mag.len()).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    assert!((peak as i64 - 440).abs() <= 1, "peak at bin {peak}");
}

#[test]
fn resample_lengths_and_identity() {
    let clip = AudioClip::new(sine(300.0, 48000, 48000, 0.3).iter().map(|&v| v as f32).collect(), 48000, "d");
    assert!((resample(&clip, 16000).len() as i64 - 16000).abs() <= 1);
    assert_eq!(resample(&clip, 48000).samples, clip.samples);
}

proptest! {
    #[test]
    fn pcm16_round_trip(samples in prop::collection::vec(-1.0f32..1.0, 1..400), rate in 8000u32..48000) {
        let clip = AudioClip::new(samples, rate, "p");
        let back = decode_wav(&encode_wav_pcm16(&clip)).unwrap();
        prop_assert_eq!(back.sample_rate_hz, rate);
        prop_assert_eq!(back.len(), clip.len());
        for (a, b) in back.samples.iter().zip(&clip.samples) {
            prop_assert!((a - b).abs() <= 1.0 / 32768.0 + 1e-7);
        }
    }
}
