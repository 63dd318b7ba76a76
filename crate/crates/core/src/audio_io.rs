//! WAV ingestion and sample-rate conversion.
//!
//! Everything downstream works on [`AudioClip`]: mono `f32` samples in
//! `[-1, 1]`. Decoding keeps the file's native rate; [`canonicalize`] brings a
//! clip to the 16 kHz working rate.

use std::f64::consts::PI;
use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::CANONICAL_RATE_HZ;

/// Decoded mono audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f32>,
    pub sample_rate_hz: u32,
    /// Opaque link back to the manifest entry (usually the file path).
    pub source_id: String,
}

impl AudioClip {
    pub fn new(samples: Vec<f32>, sample_rate_hz: u32, source_id: impl Into<String>) -> Self {
        Self { samples, sample_rate_hz, source_id: source_id.into() }
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate_hz as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

fn map_hound(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported | hound::Error::TooWide | hound::Error::InvalidSampleFormat => {
            Error::UnsupportedEncoding(e.to_string())
        }
        other => Error::MalformedContainer(other.to_string()),
    }
}

/// Decodes a RIFF/WAVE byte stream: 8/16/24/32-bit integer PCM or 32-bit
/// float, one or two channels. Stereo is averaged down to mono; integer PCM is
/// divided by the format's largest positive value and clamped at -1.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(map_hound)?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::UnsupportedEncoding(format!("{channels} channels")));
    }
    if spec.sample_rate == 0 {
        return Err(Error::MalformedContainer("sample rate 0".into()));
    }
    let interleaved: Vec<f32> = match spec.sample_format {
        hound::SampleFormat::Int => {
            if !matches!(spec.bits_per_sample, 8 | 16 | 24 | 32) {
                return Err(Error::UnsupportedEncoding(format!("{}-bit PCM", spec.bits_per_sample)));
            }
            let max = ((1i64 << (spec.bits_per_sample - 1)) - 1) as f64;
            reader
                .into_samples::<i32>()
                .map(|s| s.map(|v| (v as f64 / max).max(-1.0) as f32))
                .collect::<std::result::Result<_, _>>()
                .map_err(map_hound)?
        }
        hound::SampleFormat::Float => {
            if spec.bits_per_sample != 32 {
                return Err(Error::UnsupportedEncoding(format!("{}-bit float", spec.bits_per_sample)));
            }
            let raw: Vec<f32> = reader.into_samples::<f32>().collect::<std::result::Result<_, _>>().map_err(map_hound)?;
            if raw.iter().any(|v| !v.is_finite()) {
                return Err(Error::MalformedContainer("non-finite float sample".into()));
            }
            raw.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect()
        }
    };
    let frames = interleaved.len() / channels;
    if frames == 0 {
        return Err(Error::EmptyAudio);
    }
    let samples = if channels == 1 {
        interleaved
    } else {
        interleaved.chunks_exact(2).map(|lr| (lr[0] + lr[1]) * 0.5).collect()
    };
    Ok(AudioClip::new(samples, spec.sample_rate, ""))
}

/// Reads and decodes a WAV file; `source_id` is set to the path.
pub fn read_wav(path: &Path) -> Result<AudioClip> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let mut clip = decode_wav(&bytes)?;
    clip.source_id = path.display().to_string();
    Ok(clip)
}

/// Encodes a clip as mono 16-bit PCM.
pub fn encode_wav_pcm16(clip: &AudioClip) -> Vec<u8> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut buf = Cursor::new(Vec::with_capacity(44 + clip.samples.len() * 2));
    {
        // Writing into memory cannot fail.
        let mut w = hound::WavWriter::new(&mut buf, spec).expect("in-memory wav writer");
        for &s in &clip.samples {
            let q = (s.clamp(-1.0, 1.0) as f64 * 32767.0).round() as i16;
            w.write_sample(q).expect("in-memory wav write");
        }
        w.finalize().expect("in-memory wav finalize");
    }
    buf.into_inner()
}

/// Reads a WAV file and converts it to the canonical 16 kHz rate.
pub fn load_canonical(path: &Path) -> Result<AudioClip> {
    Ok(canonicalize(&read_wav(path)?))
}

pub fn canonicalize(clip: &AudioClip) -> AudioClip {
    resample(clip, CANONICAL_RATE_HZ)
}

const KAISER_BETA: f64 = 8.6;
const ZERO_CROSSINGS: usize = 64;
/// Above this many polyphase branches the taps are computed per output sample.
const MAX_TABLE_PHASES: usize = 4096;

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..200 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

struct SincKernel {
    /// Cutoff relative to the input Nyquist rate (<= 1).
    gain: f64,
    half_taps: usize,
    half_width: f64,
    i0_beta: f64,
}

impl SincKernel {
    fn new(in_hz: u32, out_hz: u32) -> Self {
        let gain = (out_hz as f64 / in_hz as f64).min(1.0);
        let half_width = ZERO_CROSSINGS as f64 / gain;
        Self { gain, half_taps: half_width.ceil() as usize, half_width, i0_beta: bessel_i0(KAISER_BETA) }
    }

    /// Impulse response at a distance of `dt` input samples.
    fn eval(&self, dt: f64) -> f64 {
        let u = dt / self.half_width;
        if u.abs() >= 1.0 {
            return 0.0;
        }
        let x = self.gain * dt;
        let sinc = if x.abs() < 1e-12 { 1.0 } else { (PI * x).sin() / (PI * x) };
        let window = bessel_i0(KAISER_BETA * (1.0 - u * u).sqrt()) / self.i0_beta;
        self.gain * sinc * window
    }

    /// Taps for input offsets `-half_taps..=half_taps` around the base index.
    fn taps(&self, frac: f64) -> Vec<f64> {
        let k = self.half_taps as i64;
        (-k..=k).map(|j| self.eval(frac - j as f64)).collect()
    }
}

/// Band-limited sample-rate conversion with a Kaiser-windowed sinc
/// (beta 8.6, 64 zero crossings per side) evaluated in polyphase form. The
/// cutoff sits at the lower of the two Nyquist frequencies.
pub fn resample(clip: &AudioClip, target_hz: u32) -> AudioClip {
    assert!(target_hz > 0, "target rate must be positive");
    let in_hz = clip.sample_rate_hz;
    if in_hz == target_hz || clip.samples.is_empty() {
        return AudioClip { sample_rate_hz: target_hz, ..clip.clone() };
    }
    let n_in = clip.samples.len() as u64;
    let n_out = ((n_in * target_hz as u64 + in_hz as u64 / 2) / in_hz as u64).max(1) as usize;
    let g = gcd(in_hz as u64, target_hz as u64);
    let (step, phases) = (in_hz as u64 / g, target_hz as u64 / g);

    let kernel = SincKernel::new(in_hz, target_hz);
    let table: Option<Vec<Vec<f64>>> = (phases as usize <= MAX_TABLE_PHASES)
        .then(|| (0..phases).map(|p| kernel.taps(p as f64 / phases as f64)).collect());

    let x = &clip.samples;
    let half = kernel.half_taps as i64;
    let mut out = Vec::with_capacity(n_out);
    for n in 0..n_out as u64 {
        let pos = n * step;
        let base = (pos / phases) as i64;
        let phase = pos % phases;
        let owned;
        let taps: &[f64] = match &table {
            Some(t) => &t[phase as usize],
            None => {
                owned = kernel.taps(phase as f64 / phases as f64);
                &owned
            }
        };
        let lo = (base - half).max(0);
        let hi = (base + half).min(n_in as i64 - 1);
        let mut acc = 0.0;
        for idx in lo..=hi {
            acc += x[idx as usize] as f64 * taps[(idx - base + half) as usize];
        }
        out.push(acc.clamp(-1.0, 1.0) as f32);
    }
    AudioClip { samples: out, sample_rate_hz: target_hz, source_id: clip.source_id.clone() }
}
