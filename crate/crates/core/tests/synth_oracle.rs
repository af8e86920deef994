mod common;

use common::{bin_times, direct_peak_hz, direct_psd};
use pulsegram::heatmap::{compute_heatmap, find_aoi, tile_aoi};
use pulsegram::pipeline::DEFAULT_SNR_THRESHOLD;
use pulsegram::spectral::{bin_events, PolarityMode};
use pulsegram::{generate, SynthConfig};

const BAND: (f64, f64) = (0.667, 3.333);

fn spot_series(cfg: &SynthConfig) -> Vec<f64> {
    let stream = generate(cfg).unwrap();
    let spot: std::collections::HashSet<_> = cfg.spot_pixels().into_iter().collect();
    let n_bins = (cfg.duration_s / 0.02) as usize;
    bin_times(
        stream
            .events()
            .iter()
            .filter(|e| spot.contains(&(e.x, e.y)))
            .map(|e| e.t_us),
        20_000,
        n_bins,
    )
}

#[test]
fn spot_series_peaks_at_pulse_rate() {
    let cfg = SynthConfig {
        pulse_hz: 1.2,
        duration_s: 15.0,
        spot_radius: 8,
        base_rate: 200.0,
        modulation_depth: 0.8,
        seed: 42,
        ..SynthConfig::default()
    };
    let f = direct_peak_hz(&spot_series(&cfg), 50.0, BAND.0, BAND.1);
    assert!((f - 1.2).abs() <= 1.0 / 15.0, "peak at {f} Hz");
}

fn in_band_peak_ratio(series: &[f64]) -> f64 {
    let psd = direct_psd(series, 50.0);
    let df = 50.0 / series.len() as f64;
    let mut band: Vec<f64> = psd
        .iter()
        .enumerate()
        .filter(|&(k, _)| (BAND.0..=BAND.1).contains(&(k as f64 * df)))
        .map(|(_, &p)| p)
        .collect();
    band.sort_by(|a, b| a.total_cmp(b));
    let n = band.len();
    let median = if n % 2 == 1 { band[n / 2] } else { 0.5 * (band[n / 2 - 1] + band[n / 2]) };
    band[n - 1] / median
}

// Over ~39 in-band bins the max/median ratio of a noise periodogram exceeds
// 4 most of the time; 15 bounds it with per-run probability ≈ 0.999.
const NOISE_PEAK_RATIO_BOUND: f64 = 15.0;

#[test]
fn homogeneous_spot_has_no_stable_peak() {
    let ratios: Vec<f64> = (0..100)
        .map(|seed| {
            let cfg = SynthConfig { modulation_depth: 0.0, seed, ..SynthConfig::default() };
            in_band_peak_ratio(&spot_series(&cfg))
        })
        .collect();
    let below_bound = ratios.iter().filter(|&&r| r <= NOISE_PEAK_RATIO_BOUND).count();
    assert!(below_bound >= 99, "{below_bound}/100 within bound");
    let below_default = ratios.iter().filter(|&&r| r < DEFAULT_SNR_THRESHOLD).count();
    assert!(below_default >= 90, "{below_default}/100 below the default gate");
}

#[test]
fn event_count_matches_rate_integral() {
    for (seed, depth, f) in [(1u64, 0.8, 1.2), (2, 0.0, 1.0), (3, 0.5, 2.37)] {
        let cfg = SynthConfig {
            duration_s: 4.3,
            modulation_depth: depth,
            pulse_hz: f,
            background_rate: 0.01,
            seed,
            ..SynthConfig::default()
        };
        let stream = generate(&cfg).unwrap();
        let spot = cfg.spot_pixels().len() as f64;
        let omega = std::f64::consts::TAU * f;
        let d = cfg.duration_s;
        let spot_mean = cfg.base_rate * spot * (d + depth * (1.0 - (omega * d).cos()) / omega);
        let bg_mean = cfg.background_rate * (cfg.geometry.pixel_count() as f64 - spot) * d;
        let mean = spot_mean + bg_mean;
        let n = stream.len() as f64;
        // Poisson total; 4.5 sigma keeps the false-failure rate negligible.
        assert!((n - mean).abs() <= 4.5 * mean.sqrt(), "seed {seed}: {n} vs {mean}");
    }
}

#[test]
fn stream_spans_configured_duration() {
    let stream = generate(&SynthConfig::default()).unwrap();
    let first = stream.events().first().unwrap().t_us;
    let last = stream.events().last().unwrap().t_us;
    assert!(first < 1_000 && last > 14_999_000 && last < 15_000_000);
    assert!((stream.duration_s() - 15.0).abs() < 1e-3);
}

#[test]
fn heatmap_and_aoi_find_the_spot() {
    let cfg = SynthConfig { background_rate: 0.2, ..SynthConfig::default() };
    let stream = generate(&cfg).unwrap();
    let map = compute_heatmap(&stream);
    assert_eq!(map.total(), stream.len() as u64);
    let (x, y) = map.argmax().unwrap();
    let (cx, cy) = (cfg.spot_center.0 as f64, cfg.spot_center.1 as f64);
    assert!(((x as f64 - cx).powi(2) + (y as f64 - cy).powi(2)).sqrt() <= cfg.spot_radius as f64);
    let aoi = find_aoi(&map, 100).unwrap();
    assert!(aoi.contains(400, 300), "{aoi:?}");
}

#[test]
fn spot_tile_series_peaks_at_pulse_rate() {
    let cfg = SynthConfig::default().with_pulse_bpm(93.0);
    let stream = generate(&cfg).unwrap();
    let aoi = find_aoi(&compute_heatmap(&stream), 100).unwrap();
    let grid = tile_aoi(&aoi, 5).unwrap();
    let series = bin_events::<f64>(&stream, &grid, 0.02, PolarityMode::Unsigned).unwrap();
    let center = grid.tile_of(400, 300).unwrap();
    let f = direct_peak_hz(&series[center].counts, 50.0, BAND.0, BAND.1);
    assert!((f - 1.55).abs() <= 1.0 / 15.0, "peak at {f} Hz");
}
