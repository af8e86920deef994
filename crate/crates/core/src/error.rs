use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("event at ({x}, {y}) lies outside the {width}x{height} sensor")]
    OutOfBounds { x: u32, y: u32, width: u16, height: u16 },

    #[error("sensor geometry has a zero dimension")]
    EmptyGeometry,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{field} = {value} bpm is outside [30, 250]")]
    Range { field: String, value: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("window side {side} exceeds the {width}x{height} heatmap")]
    SideTooLarge { side: usize, width: usize, height: usize },

    #[error("tile side {tile} does not divide window side {side}")]
    NonDivisible { side: usize, tile: usize },

    #[error("series too short: {len} samples, need at least {min}")]
    TooShort { len: usize, min: usize },

    #[error("frequency band [{lo}, {hi}] Hz is not inside (0, {nyquist}] Hz")]
    BadBand { lo: f64, hi: f64, nyquist: f64 },

    #[error("event stream is empty")]
    EmptyStream,

    #[error("no detected pairs to aggregate")]
    NoDetections,

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
