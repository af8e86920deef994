//! `pulsegram` command-line frontend.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 non-detection
//! (`estimate` only).

use std::ffi::OsString;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::eval::{read_manifest, evaluate_manifest, SelectionMode};
use crate::event::SensorGeometry;
use crate::heatmap::AreaOfInterest;
use crate::ingest::{parse_events, read_events_file, write_csv_events, write_paren_events, EventFormat};
use crate::pipeline::{estimate_prepared, prepare, tile_periodogram, PipelineConfig};
use crate::spectral::{PolarityMode, Window};
use crate::synth::{generate, SynthConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_ND: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "pulsegram", version, about = "Heart rate from event-camera recordings")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic pulsatile recording.
    Synth(SynthArgs),
    /// Estimate heart rate from a recording.
    Estimate(EstimateArgs),
    /// Evaluate a manifest of recordings against actual heart rates.
    Eval(EvalArgs),
    /// Export the activation heatmap as sparse `y,x,count` CSV.
    Heatmap(HeatmapArgs),
    /// Export one tile's periodogram as `freq_hz,psd` CSV.
    Spectrum(SpectrumArgs),
    /// Convert between event formats.
    Convert(ConvertArgs),
}

#[derive(Debug, Args)]
struct GeometryArgs {
    /// Sensor width in pixels.
    #[arg(long, default_value_t = 1280)]
    width: u16,
    /// Sensor height in pixels.
    #[arg(long, default_value_t = 720)]
    height: u16,
}

impl GeometryArgs {
    fn geometry(&self) -> Result<SensorGeometry> {
        SensorGeometry::new(self.width, self.height)
    }
}

#[derive(Debug, Args)]
struct InputArgs {
    /// Event recording (`-` for stdin).
    input: PathBuf,
    /// Input format; inferred from the extension when omitted.
    #[arg(long, value_parser = ["csv", "paren"])]
    format: Option<String>,
    #[command(flatten)]
    geometry: GeometryArgs,
}

impl InputArgs {
    fn read(&self) -> Result<crate::event::EventStream> {
        let geometry = self.geometry.geometry()?;
        let format = match &self.format {
            Some(f) => f.parse()?,
            None => EventFormat::from_path(&self.input),
        };
        if self.input == Path::new("-") {
            return parse_events(std::io::stdin().lock(), format, geometry);
        }
        read_events_file(&self.input, format, geometry)
    }
}

/// Pipeline settings: a JSON file, then individual flag overrides.
#[derive(Debug, Args)]
struct ConfigArgs {
    /// JSON pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    aoi_side: Option<usize>,
    #[arg(long)]
    tile_side: Option<usize>,
    /// Bin width in seconds.
    #[arg(long)]
    bin_width: Option<f64>,
    /// Lower search-band edge in Hz.
    #[arg(long)]
    band_lo: Option<f64>,
    /// Upper search-band edge in Hz.
    #[arg(long)]
    band_hi: Option<f64>,
    #[arg(long)]
    snr_threshold: Option<f64>,
    #[arg(long)]
    min_tile_events: Option<u64>,
    #[arg(long)]
    min_qualified_tiles: Option<usize>,
    #[arg(long)]
    max_iqr_bpm: Option<f64>,
    #[arg(long, value_parser = ["rectangular", "hann"])]
    window: Option<String>,
    #[arg(long, value_parser = ["unsigned", "signed"])]
    polarity: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
                serde_json::from_str(&text)
                    .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
            }
            None => PipelineConfig::default(),
        };
        if let Some(v) = self.aoi_side {
            cfg.aoi_side = v;
        }
        if let Some(v) = self.tile_side {
            cfg.tile_side = v;
        }
        if let Some(v) = self.bin_width {
            cfg.bin_width_s = v;
        }
        if let Some(v) = self.band_lo {
            cfg.band_hz.0 = v;
        }
        if let Some(v) = self.band_hi {
            cfg.band_hz.1 = v;
        }
        if let Some(v) = self.snr_threshold {
            cfg.snr_threshold = v;
        }
        if let Some(v) = self.min_tile_events {
            cfg.min_tile_events = v;
        }
        if let Some(v) = self.min_qualified_tiles {
            cfg.min_qualified_tiles = v;
        }
        if let Some(v) = self.max_iqr_bpm {
            cfg.max_iqr_bpm = v;
        }
        if let Some(w) = &self.window {
            cfg.psd.window = if w == "hann" { Window::Hann } else { Window::Rectangular };
        }
        if let Some(p) = &self.polarity {
            cfg.polarity_mode = if p == "signed" { PolarityMode::Signed } else { PolarityMode::Unsigned };
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 72.0)]
    pulse_bpm: f64,
    /// Duration in seconds.
    #[arg(long, default_value_t = 15.0)]
    duration: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output path (`-` for stdout).
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[arg(long, value_parser = ["csv", "paren"], default_value = "csv")]
    format: String,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long, default_value_t = 400)]
    spot_x: u16,
    #[arg(long, default_value_t = 300)]
    spot_y: u16,
    #[arg(long, default_value_t = 8)]
    spot_radius: u16,
    /// Events/s/pixel inside the spot.
    #[arg(long, default_value_t = 200.0)]
    base_rate: f64,
    #[arg(long, default_value_t = 0.8)]
    depth: f64,
    #[arg(long, default_value_t = 0.0)]
    background_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    tremor_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    tremor_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    flicker_hz: f64,
    #[arg(long, default_value_t = 0.0)]
    flicker_rate: f64,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the full JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, value_parser = ["oracle", "blind"], default_value = "oracle")]
    mode: String,
    #[command(flatten)]
    config: ConfigArgs,
    #[command(flatten)]
    geometry: GeometryArgs,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct HeatmapArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(short, long)]
    output: PathBuf,
    /// Also write a JSON summary (totals, AoI, hottest pixel).
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    config: ConfigArgs,
    /// Row-major tile index inside the area of interest.
    #[arg(long)]
    tile: usize,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long, value_parser = ["csv", "paren"])]
    from: String,
    #[arg(long, value_parser = ["csv", "paren"])]
    to: String,
    #[arg(short, long, default_value = "-")]
    input: PathBuf,
    #[arg(short, long, default_value = "-")]
    output: PathBuf,
    #[command(flatten)]
    geometry: GeometryArgs,
}

fn open_output(path: &Path, stdout: &mut dyn Write, f: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    if path == Path::new("-") {
        return f(stdout);
    }
    let file = std::fs::File::create(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T, stdout: &mut dyn Write) -> Result<()> {
    open_output(path, stdout, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(|e| Error::Io(e.to_string()))?;
        writeln!(w)?;
        Ok(())
    })
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

#[derive(Serialize)]
struct HeatmapSummary {
    width: usize,
    height: usize,
    total_events: u64,
    aoi: AreaOfInterest,
    hottest_pixel: Option<(usize, usize, u32)>,
}

fn synth(args: SynthArgs, stdout: &mut dyn Write) -> Result<i32> {
    let cfg = SynthConfig {
        pulse_hz: args.pulse_bpm / 60.0,
        duration_s: args.duration,
        geometry: args.geometry.geometry()?,
        spot_center: (args.spot_x, args.spot_y),
        spot_radius: args.spot_radius,
        base_rate: args.base_rate,
        modulation_depth: args.depth,
        background_rate: args.background_rate,
        tremor_hz: args.tremor_hz,
        tremor_rate: args.tremor_rate,
        tremor_edge: None,
        flicker_hz: args.flicker_hz,
        flicker_rate: args.flicker_rate,
        seed: args.seed,
    };
    let stream = generate(&cfg)?;
    let format: EventFormat = args.format.parse()?;
    open_output(&args.output, stdout, |w| match format {
        EventFormat::Csv => write_csv_events(&stream, w),
        EventFormat::Paren => write_paren_events(&stream, w),
    })?;
    Ok(EXIT_OK)
}

fn estimate(args: EstimateArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = args.config.resolve()?;
    let stream = args.input.read()?;
    let est = with_threads(args.threads, || {
        prepare(&stream, &config).and_then(|p| estimate_prepared(&p, &config))
    })??;
    writeln!(stdout, "{}", est.summary_line())?;
    if let Some(path) = &args.json {
        write_json(path, &est, stdout)?;
    }
    Ok(if est.is_detected() { EXIT_OK } else { EXIT_ND })
}

fn eval(args: EvalArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = args.config.resolve()?;
    let mode: SelectionMode = args.mode.parse()?;
    let rows = read_manifest(&args.manifest)?;
    let geometry = args.geometry.geometry()?;
    let report = with_threads(args.threads, || evaluate_manifest(&rows, &config, mode, geometry))??;
    write!(stdout, "{}", report.to_table())?;
    for row in &report.rows {
        for d in &row.diagnostics {
            writeln!(stdout, "# {} {}: {d}", row.subject_id, row.condition.as_str())?;
        }
    }
    if let Some(path) = &args.json {
        write_json(path, &report, stdout)?;
    }
    Ok(EXIT_OK)
}

fn heatmap(args: HeatmapArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = args.config.resolve()?;
    let stream = args.input.read()?;
    let prepared = prepare(&stream, &config)?;
    open_output(&args.output, stdout, |w| prepared.heatmap.write_sparse_csv(w))?;
    if let Some(path) = &args.json {
        let map = &prepared.heatmap;
        let summary = HeatmapSummary {
            width: map.width(),
            height: map.height(),
            total_events: map.total(),
            aoi: prepared.aoi,
            hottest_pixel: map.argmax().map(|(x, y)| (x, y, map.get(x, y))),
        };
        write_json(path, &summary, stdout)?;
    }
    Ok(EXIT_OK)
}

fn spectrum(args: SpectrumArgs, stdout: &mut dyn Write) -> Result<i32> {
    let config = args.config.resolve()?;
    let stream = args.input.read()?;
    let prepared = prepare(&stream, &config)?;
    let p = tile_periodogram(&prepared, &config, args.tile)?;
    open_output(&args.output, stdout, |w| p.write_csv(w))?;
    Ok(EXIT_OK)
}

fn convert(args: ConvertArgs, stdout: &mut dyn Write) -> Result<i32> {
    let geometry = args.geometry.geometry()?;
    let from: EventFormat = args.from.parse()?;
    let to: EventFormat = args.to.parse()?;
    let stream = if args.input == Path::new("-") {
        parse_events(std::io::stdin().lock(), from, geometry)?
    } else {
        let file = std::fs::File::open(&args.input)
            .map_err(|e| Error::Io(format!("{}: {e}", args.input.display())))?;
        let reader: Box<dyn BufRead> = Box::new(std::io::BufReader::new(file));
        parse_events(reader, from, geometry)?
    };
    open_output(&args.output, stdout, |w| match to {
        EventFormat::Csv => write_csv_events(&stream, w),
        EventFormat::Paren => write_paren_events(&stream, w),
    })?;
    Ok(EXIT_OK)
}

/// Runs the CLI against explicit output sinks and returns the exit code.
pub fn run_with<I, T>(argv: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a, stdout),
        Command::Estimate(a) => estimate(a, stdout),
        Command::Eval(a) => eval(a, stdout),
        Command::Heatmap(a) => heatmap(a, stdout),
        Command::Spectrum(a) => spectrum(a, stdout),
        Command::Convert(a) => convert(a, stdout),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    let code = run_with(argv, &mut out, &mut err);
    let _ = out.flush();
    code
}
