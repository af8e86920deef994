#![allow(dead_code)]

use std::path::PathBuf;

use pulsegram::heatmap::Heatmap;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

/// O(N²) one-sided density periodogram of the mean-removed series with a
/// rectangular window. Independent of the FFT path.
pub fn direct_psd(x: &[f64], fs: f64) -> Vec<f64> {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    (0..=n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &v) in x.iter().enumerate() {
                let phase = std::f64::consts::TAU * (k * i % n) as f64 / n as f64;
                re += (v - mean) * phase.cos();
                im -= (v - mean) * phase.sin();
            }
            let p = (re * re + im * im) / (fs * n as f64);
            if k > 0 && 2 * k < n {
                2.0 * p
            } else {
                p
            }
        })
        .collect()
}

/// Frequency of the strongest direct-DFT bin within `[lo, hi]`.
pub fn direct_peak_hz(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let psd = direct_psd(x, fs);
    let df = fs / x.len() as f64;
    let (k, _) = psd
        .iter()
        .enumerate()
        .filter(|&(k, _)| (lo..=hi).contains(&(k as f64 * df)))
        .fold((0, f64::MIN), |b, (k, &p)| if p > b.1 { (k, p) } else { b });
    k as f64 * df
}

/// Counts per bin of the given events, binned from t = 0.
pub fn bin_times(times_us: impl Iterator<Item = u64>, bin_us: u64, n_bins: usize) -> Vec<f64> {
    let mut out = vec![0.0; n_bins];
    for t in times_us {
        let b = (t / bin_us) as usize;
        if b < n_bins {
            out[b] += 1.0;
        }
    }
    out
}

/// Exhaustive window search: maximal sum, ties to the smallest (y0, x0).
pub fn brute_force_aoi(map: &Heatmap, side: usize) -> (usize, usize, u64) {
    let mut best: Option<(usize, usize, u64)> = None;
    for y0 in 0..=map.height() - side {
        for x0 in 0..=map.width() - side {
            let mut sum = 0u64;
            for y in y0..y0 + side {
                for x in x0..x0 + side {
                    sum += map.get(x, y) as u64;
                }
            }
            let better = match best {
                None => true,
                Some((bx, by, bs)) => sum > bs || (sum == bs && (y0, x0) < (by, bx)),
            };
            if better {
                best = Some((x0, y0, sum));
            }
        }
    }
    best.unwrap()
}

/// Tremor and flicker each at twice the aggregate spot event rate.
pub fn with_confounds(cfg: pulsegram::SynthConfig) -> pulsegram::SynthConfig {
    let spot_rate = cfg.base_rate * cfg.spot_pixels().len() as f64;
    let edge_px = cfg.tremor_pixels().len() as f64;
    let frame_px = cfg.geometry.pixel_count() as f64;
    pulsegram::SynthConfig {
        tremor_hz: 8.0,
        tremor_rate: 2.0 * spot_rate / edge_px,
        flicker_hz: 11.0,
        flicker_rate: 2.0 * spot_rate / frame_px,
        ..cfg
    }
}
