//! Synthetic pulsatile event streams with tremor and flicker confounds.
//!
//! Every component is an inhomogeneous Poisson process with per-pixel rate
//! `rate · (1 + depth · sin(2π f t))`, sampled by thinning within 1 ms slices.
//! Each component draws from its own ChaCha stream, so switching one
//! component on or off leaves the events of the others unchanged.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::event::{Event, EventStream, Polarity, RecordingMeta, SensorGeometry};

const SLICE_US: u64 = 1_000;

/// Vertical one-pixel-wide segment `x, y_start..=y_end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSegment {
    pub x: u16,
    pub y_start: u16,
    pub y_end: u16,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub pulse_hz: f64,
    pub duration_s: f64,
    pub geometry: SensorGeometry,
    pub spot_center: (u16, u16),
    pub spot_radius: u16,
    /// Events/s/pixel inside the spot.
    pub base_rate: f64,
    pub modulation_depth: f64,
    /// Events/s/pixel outside the spot, unmodulated.
    pub background_rate: f64,
    pub tremor_hz: f64,
    /// Events/s/pixel along the tremor edge.
    pub tremor_rate: f64,
    /// Defaults to a 100 px segment 2·radius + 4 px right of the spot.
    pub tremor_edge: Option<EdgeSegment>,
    pub flicker_hz: f64,
    /// Events/s/pixel over the full frame.
    pub flicker_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            pulse_hz: 1.2,
            duration_s: 15.0,
            geometry: SensorGeometry::EVK4,
            spot_center: (400, 300),
            spot_radius: 8,
            base_rate: 200.0,
            modulation_depth: 0.8,
            background_rate: 0.0,
            tremor_hz: 0.0,
            tremor_rate: 0.0,
            tremor_edge: None,
            flicker_hz: 0.0,
            flicker_rate: 0.0,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn with_pulse_bpm(mut self, bpm: f64) -> Self {
        self.pulse_hz = bpm / 60.0;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.geometry.width == 0 || self.geometry.height == 0 {
            return Err(Error::EmptyGeometry);
        }
        if !(self.pulse_hz > 0.0 && self.pulse_hz < 25.0) {
            return bad(format!("pulse_hz {} outside (0, 25)", self.pulse_hz));
        }
        if !(self.duration_s.is_finite() && self.duration_s >= 0.0) {
            return bad(format!("duration_s {} must be finite and >= 0", self.duration_s));
        }
        if !(0.0..=1.0).contains(&self.modulation_depth) {
            return bad(format!("modulation_depth {} outside [0, 1]", self.modulation_depth));
        }
        for (name, v) in [
            ("base_rate", self.base_rate),
            ("background_rate", self.background_rate),
            ("tremor_rate", self.tremor_rate),
            ("flicker_rate", self.flicker_rate),
            ("tremor_hz", self.tremor_hz),
            ("flicker_hz", self.flicker_hz),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(format!("{name} {v} must be finite and >= 0"));
            }
        }
        let (cx, cy) = self.spot_center;
        if !self.geometry.contains(cx as u32, cy as u32) {
            return bad(format!("spot center ({cx}, {cy}) outside the sensor"));
        }
        if let Some(edge) = self.tremor_edge {
            if edge.y_start > edge.y_end
                || !self.geometry.contains(edge.x as u32, edge.y_end as u32)
            {
                return bad(format!("tremor edge {edge:?} outside the sensor"));
            }
        }
        Ok(())
    }

    /// In-bounds pixels within `spot_radius` of the spot center.
    pub fn spot_pixels(&self) -> Vec<(u16, u16)> {
        let (cx, cy) = (self.spot_center.0 as i64, self.spot_center.1 as i64);
        let r = self.spot_radius as i64;
        let mut out = Vec::new();
        for y in (cy - r).max(0)..=(cy + r).min(self.geometry.height as i64 - 1) {
            for x in (cx - r).max(0)..=(cx + r).min(self.geometry.width as i64 - 1) {
                if (x - cx).pow(2) + (y - cy).pow(2) <= r * r {
                    out.push((x as u16, y as u16));
                }
            }
        }
        out
    }

    pub fn resolved_tremor_edge(&self) -> EdgeSegment {
        self.tremor_edge.unwrap_or_else(|| {
            let g = self.geometry;
            let x = (self.spot_center.0 as u32 + 2 * self.spot_radius as u32 + 4)
                .min(g.width as u32 - 1) as u16;
            let y_start = self.spot_center.1.saturating_sub(50);
            let y_end = (self.spot_center.1 as u32 + 49).min(g.height as u32 - 1) as u16;
            EdgeSegment { x, y_start, y_end }
        })
    }

    pub fn tremor_pixels(&self) -> Vec<(u16, u16)> {
        let edge = self.resolved_tremor_edge();
        (edge.y_start..=edge.y_end).map(|y| (edge.x, y)).collect()
    }
}

enum Region {
    Pixels(Vec<(u16, u16)>),
    /// Whole frame, optionally excluding a mask of pixels.
    Frame { exclude: Option<Vec<bool>> },
}

struct Component {
    stream_id: u64,
    region: Region,
    rate: f64,
    depth: f64,
    freq_hz: f64,
}

impl Component {
    fn pixel_count(&self, g: SensorGeometry) -> usize {
        match &self.region {
            Region::Pixels(px) => px.len(),
            Region::Frame { .. } => g.pixel_count(),
        }
    }

    /// Appends `(t_us, x, y)` samples for `[0, duration_us)`.
    fn sample(&self, g: SensorGeometry, duration_us: u64, seed: u64, out: &mut Vec<(u64, u16, u16)>) {
        let n_pix = self.pixel_count(g);
        if self.rate <= 0.0 || n_pix == 0 {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(self.stream_id);
        let peak_rate = self.rate * (1.0 + self.depth) * n_pix as f64;
        let omega = std::f64::consts::TAU * self.freq_hz;

        let mut start = 0u64;
        while start < duration_us {
            let len = SLICE_US.min(duration_us - start);
            let mean = peak_rate * len as f64 / 1e6;
            let k = Poisson::new(mean).map_or(0, |d| d.sample(&mut rng) as u64);
            for _ in 0..k {
                let t = start as f64 + rng.random::<f64>() * len as f64;
                let (x, y) = match &self.region {
                    Region::Pixels(px) => px[rng.random_range(0..px.len())],
                    Region::Frame { .. } => (
                        rng.random_range(0..g.width),
                        rng.random_range(0..g.height),
                    ),
                };
                let accept = (1.0 + self.depth * (omega * t / 1e6).sin()) / (1.0 + self.depth);
                if rng.random::<f64>() >= accept {
                    continue;
                }
                if let Region::Frame { exclude: Some(mask) } = &self.region {
                    if mask[y as usize * g.width as usize + x as usize] {
                        continue;
                    }
                }
                out.push((t as u64, x, y));
            }
            start += len;
        }
    }
}

/// Generates a synthetic recording. Deterministic for a fixed config.
pub fn generate(config: &SynthConfig) -> Result<EventStream> {
    config.validate()?;
    let g = config.geometry;
    let duration_us = (config.duration_s * 1e6).round() as u64;
    let meta = RecordingMeta {
        subject_id: Some(format!("synth-{}", config.seed)),
        ..RecordingMeta::default()
    };
    if duration_us == 0 {
        return EventStream::build(Vec::new(), g, meta);
    }

    let spot = config.spot_pixels();
    let mut spot_mask = vec![false; g.pixel_count()];
    for &(x, y) in &spot {
        spot_mask[y as usize * g.width as usize + x as usize] = true;
    }
    let components = [
        Component {
            stream_id: 0,
            region: Region::Pixels(spot),
            rate: config.base_rate,
            depth: config.modulation_depth,
            freq_hz: config.pulse_hz,
        },
        Component {
            stream_id: 1,
            region: Region::Frame { exclude: Some(spot_mask) },
            rate: config.background_rate,
            depth: 0.0,
            freq_hz: 0.0,
        },
        Component {
            stream_id: 2,
            region: Region::Pixels(config.tremor_pixels()),
            rate: config.tremor_rate,
            depth: 1.0,
            freq_hz: config.tremor_hz,
        },
        Component {
            stream_id: 3,
            region: Region::Frame { exclude: None },
            rate: config.flicker_rate,
            depth: 1.0,
            freq_hz: config.flicker_hz,
        },
    ];

    let mut raw = Vec::new();
    for c in &components {
        c.sample(g, duration_us, config.seed, &mut raw);
    }
    raw.sort_by_key(|&(t, _, _)| t);

    // Each pixel alternates ON, OFF, ON, ... in time order.
    let mut next_on = vec![true; g.pixel_count()];
    let events = raw
        .into_iter()
        .map(|(t, x, y)| {
            let state = &mut next_on[y as usize * g.width as usize + x as usize];
            let polarity = if *state { Polarity::On } else { Polarity::Off };
            *state = !*state;
            Event::new(t, x, y, polarity)
        })
        .collect();
    EventStream::build(events, g, meta)
}
