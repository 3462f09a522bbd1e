//! Procedural drum audio and per-frame log-magnitude spectra.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ContactEvent, DrumKit};

pub const FFT_SIZE: usize = 512;
pub const SPEC_BINS: usize = 128;
/// Hits are silent after this many decay constants.
pub const SUPPORT_TAUS: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimbreKind {
    Tone,
    Noise,
    HipassNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimbreSpec {
    pub kind: TimbreKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freq_hz: Option<f64>,
    pub decay_tau_s: f64,
    pub amplitude: f64,
}

impl TimbreSpec {
    pub fn tone(freq_hz: f64, decay_tau_s: f64, amplitude: f64) -> Self {
        Self {
            kind: TimbreKind::Tone,
            freq_hz: Some(freq_hz),
            decay_tau_s,
            amplitude,
        }
    }

    pub fn noise(decay_tau_s: f64, amplitude: f64) -> Self {
        Self {
            kind: TimbreKind::Noise,
            freq_hz: None,
            decay_tau_s,
            amplitude,
        }
    }

    pub fn hipass_noise(decay_tau_s: f64, amplitude: f64) -> Self {
        Self {
            kind: TimbreKind::HipassNoise,
            ..Self::noise(decay_tau_s, amplitude)
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.decay_tau_s > 0.0) {
            return Err("decay tau must be positive".into());
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return Err("amplitude must lie in (0, 1]".into());
        }
        if self.kind == TimbreKind::Tone && !self.freq_hz.is_some_and(|f| f > 0.0) {
            return Err("a tone needs a positive frequency".into());
        }
        Ok(())
    }

    /// Support length in samples (inclusive of the onset sample).
    pub fn support_samples(&self, sample_rate: f64) -> usize {
        (SUPPORT_TAUS * self.decay_tau_s * sample_rate).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioClock {
    pub sample_rate: u32,
    pub frame_rate: u32,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AudioError {
    #[error("sample rate {sample_rate} is not a multiple of frame rate {frame_rate}")]
    Indivisible { sample_rate: u32, frame_rate: u32 },
    #[error("expected a window of {expected} samples, got {got}")]
    WindowLength { expected: usize, got: usize },
}

impl AudioClock {
    pub fn new(sample_rate: u32, frame_rate: u32) -> Result<Self, AudioError> {
        if frame_rate == 0 || sample_rate % frame_rate != 0 {
            return Err(AudioError::Indivisible {
                sample_rate,
                frame_rate,
            });
        }
        Ok(Self {
            sample_rate,
            frame_rate,
        })
    }

    pub fn samples_per_frame(&self) -> usize {
        (self.sample_rate / self.frame_rate) as usize
    }
}

impl Default for AudioClock {
    fn default() -> Self {
        Self {
            sample_rate: 8000,
            frame_rate: 25,
        }
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform(-1, 1) noise addressable by sample index.
fn noise_at(hit_seed: u64, index: usize) -> f64 {
    let bits = splitmix64(hit_seed ^ splitmix64(index as u64));
    // 53 random mantissa bits mapped onto [0, 1), then onto [-1, 1).
    let unit = (bits >> 11) as f64 / (1u64 << 53) as f64;
    2.0 * unit - 1.0
}

/// One sample of a drum hit, `index` samples after the onset.
pub fn synth_hit(timbre: &TimbreSpec, index: usize, sample_rate: f64, hit_seed: u64) -> f64 {
    let t = index as f64 / sample_rate;
    if t > SUPPORT_TAUS * timbre.decay_tau_s {
        return 0.0;
    }
    let env = timbre.amplitude * (-t / timbre.decay_tau_s).exp();
    let source = match timbre.kind {
        TimbreKind::Tone => (2.0 * std::f64::consts::PI * timbre.freq_hz.unwrap_or(0.0) * t).sin(),
        TimbreKind::Noise => noise_at(hit_seed, index),
        TimbreKind::HipassNoise => {
            let prev = if index == 0 { 0.0 } else { noise_at(hit_seed, index - 1) };
            // The difference of two uniform(-1, 1) values spans [-2, 2].
            0.5 * (noise_at(hit_seed, index) - prev)
        }
    };
    env * source
}

/// Seed of one hit, derived from the record seed and the hit's identity so
/// that rendering a subset of hits reproduces the same samples.
pub fn hit_seed(seed: u64, onset_sample: usize, pad_index: usize) -> u64 {
    splitmix64(seed ^ splitmix64((onset_sample as u64) << 8 | pad_index as u64))
}

pub fn onset_sample(time_s: f64, sample_rate: f64) -> usize {
    (time_s * sample_rate).round().max(0.0) as usize
}

/// Noise-free, unclipped sum of all hits over `n_samples` samples.
pub fn mix_hits(contacts: &[ContactEvent], kit: &DrumKit, n_samples: usize, sample_rate: f64, seed: u64) -> Vec<f64> {
    let mut out = vec![0.0; n_samples];
    for c in contacts {
        let Some(pad_index) = kit.pad_index(&c.drum_id) else {
            continue;
        };
        let timbre = &kit.pads[pad_index].timbre;
        let onset = onset_sample(c.time_s, sample_rate);
        let hs = hit_seed(seed, onset, pad_index);
        let end = (onset + timbre.support_samples(sample_rate)).min(n_samples);
        for (i, slot) in out.iter_mut().enumerate().take(end).skip(onset) {
            *slot += synth_hit(timbre, i - onset, sample_rate, hs);
        }
    }
    out
}

/// Hits plus Gaussian white noise, hard-clipped to `[-1, 1]`.
pub fn render_audio(
    contacts: &[ContactEvent],
    kit: &DrumKit,
    n_samples: usize,
    clock: &AudioClock,
    noise_sigma: f64,
    seed: u64,
) -> Vec<f64> {
    let sr = f64::from(clock.sample_rate);
    let mut out = mix_hits(contacts, kit, n_samples, sr, seed);
    if noise_sigma > 0.0 {
        let normal = Normal::new(0.0, noise_sigma).expect("finite sigma");
        let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x6e6f_6973_65));
        for v in &mut out {
            *v += normal.sample(&mut rng);
        }
    }
    for v in &mut out {
        *v = v.clamp(-1.0, 1.0);
    }
    out
}

/// Hann window, zero padding to 512 points and a real FFT, reduced to
/// `log1p |X_k|` for the lowest 128 bins.
#[derive(Clone)]
pub struct SpectrogramExtractor {
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectrogramExtractor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrogramExtractor")
            .field("window_len", &self.window.len())
            .finish()
    }
}

/// Periodic Hann window of length `n`.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

impl SpectrogramExtractor {
    pub fn new(samples_per_frame: usize) -> Self {
        assert!(samples_per_frame <= FFT_SIZE, "frame longer than the FFT");
        Self {
            window: hann(samples_per_frame),
            fft: FftPlanner::new().plan_fft_forward(FFT_SIZE),
        }
    }

    pub fn window_len(&self) -> usize {
        self.window.len()
    }

    /// Full 512-bin complex spectrum of the windowed, zero-padded frame.
    pub fn spectrum(&self, samples: &[f64]) -> Result<Vec<Complex<f64>>, AudioError> {
        if samples.len() != self.window.len() {
            return Err(AudioError::WindowLength {
                expected: self.window.len(),
                got: samples.len(),
            });
        }
        let mut buf = vec![Complex::new(0.0, 0.0); FFT_SIZE];
        for ((b, s), w) in buf.iter_mut().zip(samples).zip(&self.window) {
            b.re = s * w;
        }
        self.fft.process(&mut buf);
        Ok(buf)
    }

    pub fn frame(&self, samples: &[f64]) -> Result<Vec<f64>, AudioError> {
        let spec = self.spectrum(samples)?;
        Ok(spec[..SPEC_BINS].iter().map(|c| c.norm().ln_1p()).collect())
    }

    pub fn sequence(&self, waveform: &[f64]) -> Vec<Vec<f64>> {
        let spf = self.window.len();
        let frames = waveform.len().div_ceil(spf);
        let mut padded = waveform.to_vec();
        padded.resize(frames * spf, 0.0);
        padded
            .chunks_exact(spf)
            .map(|w| self.frame(w).expect("chunk has window length"))
            .collect()
    }
}

pub fn spectrogram_frame(samples: &[f64], clock: &AudioClock) -> Result<Vec<f64>, AudioError> {
    let spf = clock.samples_per_frame();
    if samples.len() != spf {
        return Err(AudioError::WindowLength {
            expected: spf,
            got: samples.len(),
        });
    }
    SpectrogramExtractor::new(spf).frame(samples)
}

pub fn spectrogram_sequence(waveform: &[f64], clock: &AudioClock) -> Vec<Vec<f64>> {
    SpectrogramExtractor::new(clock.samples_per_frame()).sequence(waveform)
}
