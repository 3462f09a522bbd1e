use std::f64::consts::PI;

use drumsense::audio::{hann, mix_hits, SpectrogramExtractor, FFT_SIZE, SPEC_BINS};
use drumsense::planner::ArmId;
use drumsense::world::{ContactEvent, DrumKit};
use drumsense::DrumId;

const SAMPLE_RATE: f64 = 8000.0;
const SPF: usize = 320;

/// Plain O(N²) DFT of the windowed, zero-padded frame.
fn naive_dft(samples: &[f64]) -> Vec<(f64, f64)> {
    let w = hann(samples.len());
    (0..FFT_SIZE)
        .map(|k| {
            samples.iter().zip(&w).enumerate().fold((0.0, 0.0), |(re, im), (n, (x, wn))| {
                let phi = -2.0 * PI * (k * n) as f64 / FFT_SIZE as f64;
                (re + x * wn * phi.cos(), im + x * wn * phi.sin())
            })
        })
        .collect()
}

fn sine(freq: f64) -> Vec<f64> {
    (0..SPF).map(|n| (2.0 * PI * freq * n as f64 / SAMPLE_RATE).sin()).collect()
}

#[test]
fn sine_peaks_at_its_bin() {
    let ex = SpectrogramExtractor::new(SPF);
    // 250 Hz at 8 kHz with a 512-point transform lands on bin 16.
    let spec = ex.frame(&sine(250.0)).unwrap();
    assert_eq!(spec.len(), SPEC_BINS);
    let argmax = (0..SPEC_BINS).max_by(|a, b| spec[*a].total_cmp(&spec[*b])).unwrap();
    assert_eq!(argmax, 16);
}

#[test]
fn fft_matches_naive_dft() {
    let ex = SpectrogramExtractor::new(SPF);
    let x: Vec<f64> = (0..SPF).map(|n| ((n * 7919) % 101) as f64 / 50.0 - 1.0).collect();
    let fast = ex.spectrum(&x).unwrap();
    for (k, (re, im)) in naive_dft(&x).into_iter().enumerate() {
        assert!((fast[k].re - re).abs() < 1e-9 && (fast[k].im - im).abs() < 1e-9, "bin {k}");
    }
}

#[test]
fn parseval_holds() {
    let ex = SpectrogramExtractor::new(SPF);
    let x: Vec<f64> = sine(437.0).iter().enumerate().map(|(n, v)| v + 0.3 * ((n % 13) as f64 / 13.0)).collect();
    let spectrum = ex.spectrum(&x).unwrap();
    let time: f64 = x.iter().zip(hann(SPF)).map(|(v, w)| (v * w).powi(2)).sum();
    let freq: f64 = spectrum.iter().map(|c| c.norm_sqr()).sum::<f64>() / FFT_SIZE as f64;
    assert!(((time - freq) / time).abs() <= 1e-9);
}

#[test]
fn overlapping_hits_superpose() {
    let kit = DrumKit::default();
    let a = ContactEvent { time_s: 0.1, drum_id: DrumId::from("SN"), arm: ArmId::Left };
    let b = ContactEvent { time_s: 0.13, drum_id: DrumId::from("TM"), arm: ArmId::Right };
    let n = 4000;
    let both = mix_hits(&[a.clone(), b.clone()], &kit, n, SAMPLE_RATE, 9);
    let sa = mix_hits(&[a], &kit, n, SAMPLE_RATE, 9);
    let sb = mix_hits(&[b], &kit, n, SAMPLE_RATE, 9);
    for i in 0..n {
        assert!((both[i] - sa[i] - sb[i]).abs() < 1e-12, "sample {i}");
    }
}
