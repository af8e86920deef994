//! Heart-rate estimation from event-camera recordings of the wrist.
//!
//! The pipeline builds a per-pixel activation heatmap, picks the most active
//! square window, splits it into tiles, bins each tile's events into a
//! count signal and reads the dominant in-band frequency off its
//! periodogram. Tile frequencies are fused into one estimate or an explicit
//! non-detection.
//!
//! The spectral and metric code is generic over [`Real`] (`f32`/`f64`); the
//! aliases below fix the common double-precision instantiations.

pub mod cli;
pub mod error;
pub mod eval;
pub mod event;
pub mod heatmap;
pub mod ingest;
pub mod pipeline;
pub mod scalar;
pub mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{evaluate_manifest, mae, rmse, EvalReport, SelectionMode};
pub use event::{Condition, Event, EventStream, Polarity, RecordingMeta, SensorGeometry};
pub use heatmap::{compute_heatmap, find_aoi, tile_aoi, AreaOfInterest, Heatmap, TileGrid};
pub use ingest::{parse_csv_events, parse_paren_events, write_csv_events, GroundTruthRecord};
pub use pipeline::{estimate_hr, HrEstimate, NdReason, PipelineConfig, TileVote};
pub use scalar::Real;
pub use spectral::{bin_events, dominant_frequency, periodogram};
pub use synth::{generate, SynthConfig};

pub type Periodogram = spectral::Periodogram<f64>;
pub type Periodogram32 = spectral::Periodogram<f32>;
pub type TileSeries = spectral::TileSeries<f64>;
pub type TileSeries32 = spectral::TileSeries<f32>;
pub type SpectralPeak = spectral::SpectralPeak<f64>;
pub type SpectralPeak32 = spectral::SpectralPeak<f32>;
pub type EvalPair = eval::EvalPair<f64>;
pub type EvalPair32 = eval::EvalPair<f32>;
