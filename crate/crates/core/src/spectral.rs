//! Per-tile event binning, one-sided PSD and in-band peak picking.

use std::io::Write;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::EventStream;
use crate::heatmap::TileGrid;
use crate::scalar::{median, Real};

/// How event polarity enters the bin counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum PolarityMode {
    /// Every event adds one.
    #[default]
    Unsigned,
    /// ON adds one, OFF subtracts one.
    Signed,
}

/// Binned event counts of one tile.
#[derive(Debug, Clone, PartialEq)]
pub struct TileSeries<T> {
    pub tile_index: usize,
    pub bin_width_s: f64,
    pub counts: Vec<T>,
    /// Events that fell into a counted bin.
    pub n_events: u64,
}

impl<T: Real> TileSeries<T> {
    pub fn fs_hz(&self) -> f64 {
        1.0 / self.bin_width_s
    }

    pub fn periodogram(&self, opts: PsdOptions) -> Result<Periodogram<T>> {
        periodogram(&self.counts, T::from_f64_lossy(self.fs_hz()), opts)
    }
}

pub(crate) fn bin_width_us(bin_width_s: f64) -> Result<u64> {
    if !(bin_width_s.is_finite() && bin_width_s > 0.0) {
        return Err(Error::Config(format!("bin width must be positive, got {bin_width_s}")));
    }
    let us = (bin_width_s * 1e6).round();
    if us < 1.0 {
        return Err(Error::Config(format!("bin width {bin_width_s} s is below 1 µs")));
    }
    Ok(us as u64)
}

/// Quantizes the events of every tile into fixed-width bins.
///
/// Bins start at t = 0, so callers normally pass a rebased stream. Bin `i`
/// covers `[i·w, (i+1)·w)`; the partial bin holding the last event is dropped.
pub fn bin_events<T: Real>(
    stream: &EventStream,
    grid: &TileGrid,
    bin_width_s: f64,
    mode: PolarityMode,
) -> Result<Vec<TileSeries<T>>> {
    bin_events_from(stream, grid, bin_width_s, mode, 0)
}

/// Like [`bin_events`], with bins starting at `origin_us` instead of 0.
pub fn bin_events_from<T: Real>(
    stream: &EventStream,
    grid: &TileGrid,
    bin_width_s: f64,
    mode: PolarityMode,
    origin_us: u64,
) -> Result<Vec<TileSeries<T>>> {
    let bin_us = bin_width_us(bin_width_s)?;
    let end_us = stream.events().last().map_or(0, |ev| ev.t_us.saturating_sub(origin_us));
    let n_bins = (end_us / bin_us) as usize;
    if n_bins < 2 {
        return Err(Error::TooShort { len: n_bins, min: 2 });
    }

    let mut counts = vec![0i64; grid.len() * n_bins];
    let mut n_events = vec![0u64; grid.len()];
    for ev in stream.events() {
        let Some(rel) = ev.t_us.checked_sub(origin_us) else {
            continue;
        };
        let bin = (rel / bin_us) as usize;
        if bin >= n_bins {
            break;
        }
        if let Some(tile) = grid.tile_of(ev.x as usize, ev.y as usize) {
            counts[tile * n_bins + bin] += match mode {
                PolarityMode::Unsigned => 1,
                PolarityMode::Signed => ev.polarity.sign() as i64,
            };
            n_events[tile] += 1;
        }
    }

    Ok(counts
        .chunks(n_bins)
        .zip(n_events)
        .enumerate()
        .map(|(tile_index, (row, n_events))| TileSeries {
            tile_index,
            bin_width_s: bin_us as f64 / 1e6,
            counts: row.iter().map(|&c| T::from_f64_lossy(c as f64)).collect(),
            n_events,
        })
        .collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Window {
    #[default]
    Rectangular,
    /// Periodic Hann window.
    Hann,
}

impl Window {
    pub fn coefficients<T: Real>(self, n: usize) -> Vec<T> {
        match self {
            Window::Rectangular => vec![T::one(); n],
            Window::Hann => {
                let half = T::from_f64_lossy(0.5);
                let step = T::TAU() / T::from_usize_lossy(n);
                (0..n)
                    .map(|i| half - half * (step * T::from_usize_lossy(i)).cos())
                    .collect()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Detrend {
    None,
    /// Subtract the mean.
    #[default]
    Constant,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PsdOptions {
    pub window: Window,
    pub detrend: Detrend,
}

/// One-sided power spectral density, bins `k = 0..=N/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Periodogram<T> {
    pub freqs_hz: Vec<T>,
    pub psd: Vec<T>,
    /// Bin spacing `fs / N`.
    pub resolution_hz: T,
}

impl<T: Real> Periodogram<T> {
    pub fn nyquist_hz(&self) -> T {
        *self.freqs_hz.last().expect("periodogram has at least 3 bins")
    }

    /// `Σ psd · Δf`, the mean power of the (windowed, detrended) input.
    pub fn total_power(&self) -> T {
        self.psd.iter().fold(T::zero(), |acc, &p| acc + p) * self.resolution_hz
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = std::io::BufWriter::new(writer);
        writeln!(w, "freq_hz,psd")?;
        for (f, p) in self.freqs_hz.iter().zip(&self.psd) {
            writeln!(w, "{},{}", f.to_f64_lossy(), p.to_f64_lossy())?;
        }
        w.flush()?;
        Ok(())
    }
}

pub const MIN_PSD_LEN: usize = 4;

/// A planned periodogram for series of one fixed length; reusable across
/// threads.
pub struct PsdPlan<T: Real> {
    len: usize,
    fs: T,
    opts: PsdOptions,
    window: Vec<T>,
    scale: T,
    fft: Arc<dyn Fft<T>>,
}

impl<T: Real> PsdPlan<T> {
    pub fn new(len: usize, fs: T, opts: PsdOptions) -> Result<Self> {
        if len < MIN_PSD_LEN {
            return Err(Error::TooShort { len, min: MIN_PSD_LEN });
        }
        if !(fs.is_finite() && fs.is_sign_positive() && !fs.is_zero()) {
            return Err(Error::Config("sampling rate must be positive".into()));
        }
        let window = opts.window.coefficients::<T>(len);
        let energy = window.iter().fold(T::zero(), |acc, &w| acc + w * w);
        let fft = FftPlanner::new().plan_fft_forward(len);
        Ok(Self {
            len,
            fs,
            opts,
            window,
            scale: T::one() / (fs * energy),
            fft,
        })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn compute(&self, series: &[T]) -> Result<Periodogram<T>> {
        if series.len() != self.len {
            return Err(Error::Config(format!(
                "series has {} samples, plan expects {}",
                series.len(),
                self.len
            )));
        }
        let n = self.len;
        let offset = match self.opts.detrend {
            Detrend::None => T::zero(),
            Detrend::Constant => {
                series.iter().fold(T::zero(), |acc, &x| acc + x) / T::from_usize_lossy(n)
            }
        };
        let mut buf: Vec<Complex<T>> = series
            .iter()
            .zip(&self.window)
            .map(|(&x, &w)| Complex::new((x - offset) * w, T::zero()))
            .collect();
        self.fft.process(&mut buf);

        let two = T::one() + T::one();
        let bins = n / 2 + 1;
        let resolution_hz = self.fs / T::from_usize_lossy(n);
        let psd = buf[..bins]
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let p = c.norm_sqr() * self.scale;
                // Nyquist (k = N/2, even N) and DC are not mirrored.
                if k > 0 && 2 * k < n {
                    p * two
                } else {
                    p
                }
            })
            .collect();
        let freqs_hz = (0..bins)
            .map(|k| T::from_usize_lossy(k) * resolution_hz)
            .collect();
        Ok(Periodogram {
            freqs_hz,
            psd,
            resolution_hz,
        })
    }
}

/// Density-scaled one-sided periodogram of `series` sampled at `fs`.
pub fn periodogram<T: Real>(series: &[T], fs: T, opts: PsdOptions) -> Result<Periodogram<T>> {
    PsdPlan::new(series.len(), fs, opts)?.compute(series)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Refine {
    None,
    #[default]
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralPeak<T> {
    pub f_hz: T,
    pub peak_power: T,
    /// Peak power over the median in-band power; 0 when that median is 0.
    pub snr: T,
    pub bin: usize,
    /// Sub-bin offset applied by refinement, in bins.
    pub offset: T,
}

pub fn check_band<T: Real>(band: (T, T), nyquist: T) -> Result<()> {
    let (lo, hi) = band;
    if !(lo > T::zero() && hi > lo && hi <= nyquist) {
        return Err(Error::BadBand {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
            nyquist: nyquist.to_f64_lossy(),
        });
    }
    Ok(())
}

/// Strongest bin inside `band` (inclusive), optionally refined by a
/// three-point parabola through the power values.
///
/// Returns `None` when no bin falls inside the band. Equal powers resolve to
/// the lower frequency.
pub fn dominant_frequency<T: Real>(
    p: &Periodogram<T>,
    band: (T, T),
    refine: Refine,
) -> Result<Option<SpectralPeak<T>>> {
    check_band(band, p.nyquist_hz())?;
    let (lo, hi) = band;
    let Some(first) = p.freqs_hz.iter().position(|&f| f >= lo) else {
        return Ok(None);
    };
    let Some(last) = p.freqs_hz.iter().rposition(|&f| f <= hi) else {
        return Ok(None);
    };
    if last < first {
        return Ok(None);
    }
    let in_band = &p.psd[first..=last];

    let mut k = first;
    for (i, &v) in in_band.iter().enumerate() {
        if v > p.psd[k] {
            k = first + i;
        }
    }
    let peak_power = p.psd[k];

    let mut offset = T::zero();
    if refine == Refine::Parabolic && k > first && k < last {
        let (a, b, c) = (p.psd[k - 1], peak_power, p.psd[k + 1]);
        let curvature = a - (b + b) + c;
        // Neighbour asymmetry below the rounding floor of the peak is no offset.
        let floor = b * T::epsilon() * T::from_usize_lossy(p.psd.len());
        if curvature < T::zero() && curvature.is_finite() && (a - c).abs() > floor {
            let half = T::from_f64_lossy(0.5);
            offset = (half * (a - c) / curvature).max(-half).min(half);
        }
    }

    let floor = median(in_band);
    let snr = if floor > T::zero() {
        peak_power / floor
    } else {
        T::zero()
    };
    Ok(Some(SpectralPeak {
        f_hz: p.freqs_hz[k] + offset * p.resolution_hz,
        peak_power,
        snr,
        bin: k,
        offset,
    }))
}
