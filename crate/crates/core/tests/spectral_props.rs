mod common;

use common::direct_psd;
use proptest::prelude::*;
use pulsegram::spectral::{dominant_frequency, periodogram, Detrend, PsdOptions, Refine, Window};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FS: f64 = 50.0;
const BAND: (f64, f64) = (0.667, 3.333);

fn white_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()
}

fn tone(f: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n).map(|i| (std::f64::consts::TAU * f * i as f64 / FS + phase).sin()).collect()
}

#[test]
fn fft_path_matches_direct_dft() {
    for (n, seed) in [(750usize, 1u64), (749, 2), (101, 3), (64, 4)] {
        let x = white_noise(n, seed);
        let fast = periodogram(&x, FS, PsdOptions::default()).unwrap();
        let slow = direct_psd(&x, FS);
        assert_eq!(fast.psd.len(), slow.len());
        for (a, b) in fast.psd.iter().zip(&slow) {
            assert!((a - b).abs() <= 1e-9 * b.abs().max(1e-6), "n={n}: {a} vs {b}");
        }
    }
}

#[test]
fn parseval_on_white_noise() {
    for seed in 0..5 {
        let x = white_noise(750, seed);
        let mean = x.iter().sum::<f64>() / 750.0;
        let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 750.0;
        let p = periodogram(&x, FS, PsdOptions::default()).unwrap();
        assert!((p.total_power() - variance).abs() <= 1e-9 * variance);
    }
}

#[test]
fn parseval_with_hann_window() {
    let x = white_noise(600, 9);
    let w = Window::Hann.coefficients::<f64>(600);
    let energy: f64 = w.iter().map(|v| v * v).sum();
    let mean = x.iter().sum::<f64>() / 600.0;
    let windowed: f64 = x.iter().zip(&w).map(|(v, w)| ((v - mean) * w).powi(2)).sum();
    let opts = PsdOptions { window: Window::Hann, detrend: Detrend::Constant };
    let p = periodogram(&x, FS, opts).unwrap();
    assert!((p.total_power() - windowed / energy).abs() <= 1e-9 * windowed / energy);
}

#[test]
fn off_bin_tone_refined_within_tolerance() {
    for f in [1.2, 0.8333, 1.23, 2.05, 2.9917, 3.0] {
        let x = tone(f, 750, 0.4);
        let p = periodogram(&x, FS, PsdOptions::default()).unwrap();
        let peak = dominant_frequency(&p, BAND, Refine::Parabolic).unwrap().unwrap();
        assert!((peak.f_hz - f).abs() <= 0.02, "{f}: got {}", peak.f_hz);
    }
}

#[test]
fn refinement_beats_raw_bin_on_average() {
    let mut raw_err = 0.0;
    let mut refined_err = 0.0;
    for i in 0..40 {
        let f = 0.9 + i as f64 * 0.0503;
        let p = periodogram(&tone(f, 750, 0.1), FS, PsdOptions::default()).unwrap();
        let refined = dominant_frequency(&p, BAND, Refine::Parabolic).unwrap().unwrap();
        let raw = dominant_frequency(&p, BAND, Refine::None).unwrap().unwrap();
        raw_err += (raw.f_hz - f).abs();
        refined_err += (refined.f_hz - f).abs();
    }
    assert!(refined_err < raw_err);
}

#[test]
fn out_of_band_tone_leaves_noise_floor() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut snrs = Vec::new();
    for seed in 0..40u64 {
        let noise = white_noise(750, 100 + seed);
        let phase = rng.random::<f64>();
        let x: Vec<f64> = tone(10.0, 750, phase).iter().zip(&noise).map(|(a, b)| 5.0 * a + b).collect();
        let p = periodogram(&x, FS, PsdOptions::default()).unwrap();
        let peak = dominant_frequency(&p, BAND, Refine::Parabolic).unwrap().unwrap();
        snrs.push(peak.snr);
    }
    snrs.sort_by(|a, b| a.total_cmp(b));
    // Max/median of ~39 exponential ordinates: typically 4-10, never the
    // hundreds a leaked 10 Hz line would produce.
    assert!(snrs[snrs.len() - 1] < 20.0, "{snrs:?}");
    assert!(snrs[0] > 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn circular_shift_invariance(seed in 0u64..1000, shift in 1usize..200) {
        let x = white_noise(300, seed);
        let mut shifted = x.clone();
        shifted.rotate_left(shift);
        let a = periodogram(&x, FS, PsdOptions::default()).unwrap();
        let b = periodogram(&shifted, FS, PsdOptions::default()).unwrap();
        let scale = a.psd.iter().cloned().fold(0.0, f64::max);
        for (u, v) in a.psd.iter().zip(&b.psd) {
            prop_assert!((u - v).abs() <= 1e-9 * scale);
        }
    }

    #[test]
    fn exact_bin_tone_has_zero_offset(k in 11usize..50, phase in 0.0f64..std::f64::consts::TAU) {
        let f = k as f64 * FS / 750.0;
        let p = periodogram(&tone(f, 750, phase), FS, PsdOptions::default()).unwrap();
        let peak = dominant_frequency(&p, BAND, Refine::Parabolic).unwrap().unwrap();
        prop_assert_eq!(peak.bin, k);
        if k > 11 && k < 49 {
            prop_assert_eq!(peak.offset, 0.0);
        }
        prop_assert!((peak.f_hz - f).abs() < 1e-12);
    }

    #[test]
    fn scale_invariance_of_frequency_and_snr(seed in 0u64..1000, scale in 0.01f64..100.0) {
        let x: Vec<f64> = tone(1.37, 750, 0.0).iter().zip(white_noise(750, seed)).map(|(a, b)| a + b).collect();
        let y: Vec<f64> = x.iter().map(|v| v * scale).collect();
        let a = dominant_frequency(&periodogram(&x, FS, PsdOptions::default()).unwrap(), BAND, Refine::Parabolic).unwrap().unwrap();
        let b = dominant_frequency(&periodogram(&y, FS, PsdOptions::default()).unwrap(), BAND, Refine::Parabolic).unwrap().unwrap();
        prop_assert_eq!(a.bin, b.bin);
        prop_assert!((a.f_hz - b.f_hz).abs() <= 1e-9);
        prop_assert!((a.snr - b.snr).abs() <= 1e-9 * a.snr);
        prop_assert!((b.peak_power / a.peak_power - scale * scale).abs() <= 1e-9 * scale * scale);
    }

    #[test]
    fn psd_is_nonnegative_and_freqs_increase(seed in 0u64..1000, n in 4usize..300) {
        let p = periodogram(&white_noise(n, seed), FS, PsdOptions::default()).unwrap();
        prop_assert!(p.psd.iter().all(|&v| v >= 0.0));
        prop_assert!(p.freqs_hz.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(p.freqs_hz[0], 0.0);
        prop_assert!(p.nyquist_hz() <= FS / 2.0 + 1e-12);
    }
}
