//! Event-camera domain types.
//!
//! An [`EventStream`] is immutable once built: events are sorted by timestamp
//! and every event is known to lie inside the sensor geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sign of the brightness change that triggered an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Polarity {
    On,
    Off,
}

impl Polarity {
    /// +1 for ON, -1 for OFF.
    pub fn sign(self) -> i32 {
        match self {
            Polarity::On => 1,
            Polarity::Off => -1,
        }
    }
}

/// One pixel activation. Timestamps are microseconds from recording start.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Event {
    pub t_us: u64,
    pub x: u16,
    pub y: u16,
    pub polarity: Polarity,
}

impl Event {
    pub fn new(t_us: u64, x: u16, y: u16, polarity: Polarity) -> Self {
        Self { t_us, x, y, polarity }
    }
}

/// Sensor resolution in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SensorGeometry {
    pub width: u16,
    pub height: u16,
}

impl SensorGeometry {
    pub const EVK4: SensorGeometry = SensorGeometry { width: 1280, height: 720 };

    pub fn new(width: u16, height: u16) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyGeometry);
        }
        Ok(Self { width, height })
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x < self.width as u32 && y < self.height as u32
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self::EVK4
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Condition {
    Resting,
    Elevated,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::Resting => "resting",
            Condition::Elevated => "elevated",
        }
    }
}

impl std::str::FromStr for Condition {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "resting" | "rest" => Ok(Condition::Resting),
            "elevated" | "active" => Ok(Condition::Elevated),
            other => Err(Error::Config(format!("unknown condition `{other}`"))),
        }
    }
}

/// Descriptive metadata. Never read by the estimator.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingMeta {
    pub subject_id: Option<String>,
    pub condition: Option<Condition>,
    pub bias_profile: Option<String>,
    pub source_path: Option<String>,
}

/// Side-channel information gathered while building a stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamDiagnostics {
    /// Events whose timestamp was earlier than some event preceding them in the input.
    pub reordered: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventStream {
    geometry: SensorGeometry,
    events: Vec<Event>,
    meta: RecordingMeta,
    diagnostics: StreamDiagnostics,
}

impl EventStream {
    /// Validates and stably sorts `events` by timestamp.
    pub fn build(
        mut events: Vec<Event>,
        geometry: SensorGeometry,
        meta: RecordingMeta,
    ) -> Result<Self> {
        if geometry.width == 0 || geometry.height == 0 {
            return Err(Error::EmptyGeometry);
        }
        let mut reordered = 0usize;
        let mut running_max = 0u64;
        for ev in &events {
            if !geometry.contains(ev.x as u32, ev.y as u32) {
                return Err(Error::OutOfBounds {
                    x: ev.x as u32,
                    y: ev.y as u32,
                    width: geometry.width,
                    height: geometry.height,
                });
            }
            if ev.t_us < running_max {
                reordered += 1;
            } else {
                running_max = ev.t_us;
            }
        }
        if reordered > 0 {
            events.sort_by_key(|ev| ev.t_us);
        }
        Ok(Self {
            geometry,
            events,
            meta,
            diagnostics: StreamDiagnostics { reordered },
        })
    }

    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            events: Vec::new(),
            meta: RecordingMeta::default(),
            diagnostics: StreamDiagnostics::default(),
        }
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn meta(&self) -> &RecordingMeta {
        &self.meta
    }

    pub fn diagnostics(&self) -> StreamDiagnostics {
        self.diagnostics
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    pub fn with_meta(mut self, meta: RecordingMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn duration_us(&self) -> u64 {
        match (self.events.first(), self.events.last()) {
            (Some(first), Some(last)) => last.t_us - first.t_us,
            _ => 0,
        }
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_us() as f64 / 1e6
    }

    /// Shifts all timestamps so the first event sits at t = 0.
    pub fn rebased(&self) -> EventStream {
        let origin = self.events.first().map_or(0, |ev| ev.t_us);
        let events = self
            .events
            .iter()
            .map(|ev| Event { t_us: ev.t_us - origin, ..*ev })
            .collect();
        EventStream {
            geometry: self.geometry,
            events,
            meta: self.meta.clone(),
            diagnostics: self.diagnostics,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample_events() -> Vec<Event> {
        vec![
            Event::new(235_034, 346, 142, Polarity::Off),
            Event::new(237_174, 346, 142, Polarity::On),
            Event::new(238_514, 346, 142, Polarity::Off),
        ]
    }

    #[test]
    fn three_pixel_activations() {
        let s = EventStream::build(sample_events(), SensorGeometry::EVK4, RecordingMeta::default())
            .unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.duration_us(), 3480);
        assert!((s.duration_s() - 0.003480).abs() < 1e-12);
        assert_eq!(s.diagnostics().reordered, 0);
    }

    #[test]
    fn empty_stream_has_zero_duration() {
        let s = EventStream::build(vec![], SensorGeometry::EVK4, RecordingMeta::default()).unwrap();
        assert!(s.is_empty());
        assert_eq!(s.duration_us(), 0);
        assert_eq!(s.duration_s(), 0.0);
    }

    #[test]
    fn single_event_has_zero_duration() {
        let s = EventStream::build(
            vec![Event::new(500, 1, 1, Polarity::On)],
            SensorGeometry::EVK4,
            RecordingMeta::default(),
        )
        .unwrap();
        assert_eq!(s.duration_s(), 0.0);
    }

    #[test]
    fn swapped_pair_is_sorted_and_counted() {
        let evs = vec![
            Event::new(20, 0, 0, Polarity::On),
            Event::new(10, 1, 1, Polarity::Off),
        ];
        let s = EventStream::build(evs, SensorGeometry::EVK4, RecordingMeta::default()).unwrap();
        assert_eq!(s.events()[0].t_us, 10);
        assert_eq!(s.events()[1].t_us, 20);
        assert_eq!(s.diagnostics().reordered, 1);
    }

    #[test]
    fn out_of_bounds_rejected() {
        let evs = vec![Event::new(0, 1280, 0, Polarity::On)];
        let err = EventStream::build(evs, SensorGeometry::EVK4, RecordingMeta::default());
        assert!(matches!(err, Err(Error::OutOfBounds { x: 1280, y: 0, .. })));
    }

    #[test]
    fn zero_geometry_rejected() {
        assert_eq!(SensorGeometry::new(0, 720), Err(Error::EmptyGeometry));
        let g = SensorGeometry { width: 10, height: 0 };
        assert_eq!(
            EventStream::build(vec![], g, RecordingMeta::default()),
            Err(Error::EmptyGeometry)
        );
    }

    #[test]
    fn rebase_moves_first_event_to_origin() {
        let s = EventStream::build(sample_events(), SensorGeometry::EVK4, RecordingMeta::default())
            .unwrap()
            .rebased();
        assert_eq!(s.events()[0].t_us, 0);
        assert_eq!(s.events()[2].t_us, 3480);
    }

    fn arb_events() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec(
            (0u64..1_000, 0u16..64, 0u16..48, any::<bool>()).prop_map(|(t, x, y, on)| {
                Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off })
            }),
            0..200,
        )
    }

    proptest! {
        #[test]
        fn sorting_is_idempotent_and_count_preserving(evs in arb_events()) {
            let g = SensorGeometry::new(64, 48).unwrap();
            let once = EventStream::build(evs.clone(), g, RecordingMeta::default()).unwrap();
            prop_assert_eq!(once.len(), evs.len());
            prop_assert!(once.events().windows(2).all(|w| w[0].t_us <= w[1].t_us));
            let twice = EventStream::build(once.events().to_vec(), g, RecordingMeta::default()).unwrap();
            prop_assert_eq!(twice.events(), once.events());
            prop_assert_eq!(twice.diagnostics().reordered, 0);
        }
    }
}
