//! `ledcam` command line.
//!
//! Exit codes: 0 success, 1 usage or parameter error, 2 frame processed
//! but nothing decoded, 3 I/O error (including malformed input files).

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::camera::{
    band_width_px, decodability_bound_px, expected_blob_diameter_px, render, Bloom, CameraParams, Emitter,
    LinkGeometry, RenderOptions, TxParams, DEFAULT_READOUT_S,
};
use crate::codec::{build_packet, FramingConfig, Payload};
use crate::experiment::{self, SweepConfig};
use crate::frame::Frame;
use crate::imaging::{decode_stages, preprocess, DecodeConfig};
use crate::ranging::{
    conventional_distance, fit_regression, mean_squared_error, predict_distance, read_samples, write_samples,
    FeatureKind, RangeModel,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_UNDECODED: i32 = 2;
pub const EXIT_IO: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(_) => EXIT_IO,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

fn usage(e: impl std::fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn io_err(e: impl std::fmt::Display) -> CliError {
    CliError::Io(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "ledcam",
    version,
    about = "LED-to-camera visible light link simulator and decoder"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the packet for a payload as a 0/1 symbol string.
    Encode(EncodeArgs),
    /// Render a rolling-shutter frame of one or more looping LEDs to PGM.
    Simulate(SimulateArgs),
    /// Decode every LED in a PGM frame; prints a JSON report.
    Decode(DecodeArgs),
    /// Fit a distance model from a training CSV.
    Train(TrainArgs),
    /// Estimate distance for a blob diameter.
    Range(RangeArgs),
    /// Sweep ISO and distance; writes per-point statistics as CSV.
    Sweep(SweepArgs),
    /// Synthesize and measure frames to produce a training CSV.
    Collect(CollectArgs),
}

fn parse_hex(s: &str) -> Result<u64, String> {
    let t = s.trim();
    let t = t.strip_prefix("0x").or_else(|| t.strip_prefix("0X")).unwrap_or(t);
    u64::from_str_radix(t, 16).map_err(|e| format!("bad hex {s:?}: {e}"))
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    #[arg(long, value_parser = parse_hex)]
    pub payload: u64,
    #[arg(long, default_value_t = 8)]
    pub bits: usize,
}

#[derive(Debug, Clone, Args)]
pub struct LinkArgs {
    #[arg(long = "freq-hz", default_value_t = 2500.0)]
    pub freq_hz: f64,
    #[arg(long, default_value_t = 0.40)]
    pub duty: f64,
    #[arg(long = "readout-us", default_value_t = DEFAULT_READOUT_S * 1e6)]
    pub readout_us: f64,
    /// Exposure per row; defaults to one readout time.
    #[arg(long = "exposure-us")]
    pub exposure_us: Option<f64>,
    #[arg(long = "pixel-pitch-nm", default_value_t = 70.0)]
    pub pixel_pitch_nm: f64,
    /// Slope of the ISO size gain 1 + k·log2(iso/100).
    #[arg(long, default_value_t = 0.15)]
    pub kappa: f64,
}

impl LinkArgs {
    fn tx(&self) -> TxParams {
        TxParams {
            mod_freq_hz: self.freq_hz,
            duty_cycle: self.duty,
            ..Default::default()
        }
    }

    fn camera(&self, iso: u32) -> CameraParams {
        let readout = self.readout_us * 1e-6;
        CameraParams {
            iso,
            readout_time_s: readout,
            exposure_time_s: self.exposure_us.map_or(readout, |e| e * 1e-6),
            pixel_pitch_m: self.pixel_pitch_nm * 1e-9,
            iso_size_kappa: self.kappa,
            ..Default::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Repeat for several LEDs; they are centred in equal-width vertical strips.
    #[arg(long, value_parser = parse_hex, required = true)]
    pub payload: Vec<u64>,
    #[arg(long, default_value_t = 8)]
    pub bits: usize,
    #[arg(long = "distance-cm", default_value_t = 20.0)]
    pub distance_cm: f64,
    #[arg(long, default_value_t = 100)]
    pub iso: u32,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long = "no-bloom")]
    pub no_bloom: bool,
    #[command(flatten)]
    pub link: LinkArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long = "in")]
    pub input: PathBuf,
    #[arg(long = "freq-hz", default_value_t = 2500.0)]
    pub freq_hz: f64,
    #[arg(long = "readout-us", default_value_t = DEFAULT_READOUT_S * 1e6)]
    pub readout_us: f64,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub offset: f64,
    #[arg(long, default_value_t = 8)]
    pub bits: usize,
    /// Estimate the band width from each column instead of using f and T_r.
    #[arg(long = "estimate-clock")]
    pub estimate_clock: bool,
    #[arg(long = "pixel-pitch-nm", default_value_t = 70.0)]
    pub pixel_pitch_nm: f64,
    /// Write the stretched, blurred and binary frames here as PGM.
    #[arg(long = "debug-dir")]
    pub debug_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum FeatureArg {
    Reciprocal,
    Raw,
}

impl From<FeatureArg> for FeatureKind {
    fn from(f: FeatureArg) -> Self {
        match f {
            FeatureArg::Reciprocal => FeatureKind::ReciprocalDiameter,
            FeatureArg::Raw => FeatureKind::RawDiameter,
        }
    }
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub csv: PathBuf,
    /// Keep only rows at this ISO.
    #[arg(long)]
    pub iso: Option<u32>,
    #[arg(long, value_enum, default_value_t = FeatureArg::Reciprocal)]
    pub feature: FeatureArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct RangeArgs {
    #[arg(long = "diameter-px")]
    pub diameter_px: f64,
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long = "pixel-pitch-nm", default_value_t = 70.0)]
    pub pixel_pitch_nm: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [100u32, 400, 800])]
    pub iso: Vec<u32>,
    #[arg(long = "dmin-cm", default_value_t = 10.0)]
    pub dmin_cm: f64,
    #[arg(long = "dmax-cm", default_value_t = 100.0)]
    pub dmax_cm: f64,
    #[arg(long = "step-cm", default_value_t = 5.0)]
    pub step_cm: f64,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2.0)]
    pub noise: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub link: LinkArgs,
}

impl GridArgs {
    fn config(&self) -> SweepConfig {
        let camera = self.link.camera(100);
        SweepConfig {
            isos: self.iso.clone(),
            dmin_cm: self.dmin_cm,
            dmax_cm: self.dmax_cm,
            step_cm: self.step_cm,
            trials: self.trials,
            seed: self.seed,
            noise_sigma: self.noise,
            tx: self.link.tx(),
            decode: DecodeConfig::with_band_width(band_width_px(&self.link.tx(), &camera)),
            camera,
        }
    }
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub grid: GridArgs,
    #[arg(long)]
    pub model: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CollectArgs {
    #[command(flatten)]
    pub grid: GridArgs,
}

/// One detected blob in a [`DecodeReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobRecord {
    pub center_x: f64,
    pub center_y: f64,
    pub radius_px: f64,
    /// Hex payload, absent when decoding failed.
    pub payload: Option<String>,
    pub error: Option<String>,
    pub conventional_distance_cm: f64,
    pub regression_distance_cm: Option<f64>,
    pub decode_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodeReport {
    pub width: usize,
    pub height: usize,
    pub band_width_px: Option<f64>,
    pub preprocess_ms: f64,
    pub total_ms: f64,
    pub blobs: Vec<BlobRecord>,
}

impl DecodeReport {
    pub fn decoded_count(&self) -> usize {
        self.blobs.iter().filter(|b| b.payload.is_some()).count()
    }
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match run(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: &Command) -> Result<i32, CliError> {
    match cmd {
        Command::Encode(a) => {
            println!("{}", encode(a)?);
            Ok(EXIT_OK)
        }
        Command::Simulate(a) => simulate(a).map(|_| EXIT_OK),
        Command::Decode(a) => {
            let report = decode(a)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(io_err)?);
            Ok(if report.decoded_count() > 0 {
                EXIT_OK
            } else {
                EXIT_UNDECODED
            })
        }
        Command::Train(a) => {
            let (model, mse) = train(a)?;
            println!(
                "{}",
                serde_json::json!({ "trained_on": model.trained_on, "mse_cm2": mse })
            );
            Ok(EXIT_OK)
        }
        Command::Range(a) => {
            println!("{}", range(a)?);
            Ok(EXIT_OK)
        }
        Command::Sweep(a) => sweep(a).map(|_| EXIT_OK),
        Command::Collect(a) => collect(a).map(|_| EXIT_OK),
    }
}

pub fn encode(a: &EncodeArgs) -> Result<String, CliError> {
    let framing = FramingConfig::with_payload_bits(a.bits);
    let payload = Payload::from_value(a.payload, a.bits).map_err(usage)?;
    Ok(build_packet(&payload, &framing).map_err(usage)?.to_string())
}

/// Renders the frame described by `a` without writing it.
pub fn simulate_frame(a: &SimulateArgs) -> Result<Frame, CliError> {
    let tx = a.link.tx();
    let cam = a.link.camera(a.iso);
    let framing = FramingConfig::with_payload_bits(a.bits);
    let n = a.payload.len();
    let distance_m = a.distance_cm / 100.0;
    let emitters = a
        .payload
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let payload = Payload::from_value(v, a.bits).map_err(usage)?;
            let x = cam.width_px as f64 * (2 * i + 1) as f64 / (2 * n) as f64;
            Ok(Emitter {
                stream: build_packet(&payload, &framing).map_err(usage)?,
                geom: LinkGeometry {
                    distance_m,
                    center_px: (x.round(), ((cam.height_px - 1) as f64 / 2.0).round()),
                },
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut opts = RenderOptions::new(a.noise, a.seed);
    opts.bloom = (!a.no_bloom).then(Bloom::default);
    render(&emitters, &tx, &cam, &opts).map_err(usage)
}

pub fn simulate(a: &SimulateArgs) -> Result<(), CliError> {
    let frame = simulate_frame(a)?;
    let tx = a.link.tx();
    let cam = a.link.camera(a.iso);
    let geom = LinkGeometry::centered(a.distance_cm / 100.0, &cam);
    let dia = expected_blob_diameter_px(&geom, &tx, &cam).map_err(usage)?;
    let bound = decodability_bound_px(a.bits, &tx, &cam).map_err(usage)?;
    frame.write_pgm(&a.out).map_err(io_err)?;
    eprintln!("expected blob diameter: {dia:.2} px");
    eprintln!("decodability bound: {bound:.2} px");
    Ok(())
}

pub fn decode_frame_report(frame: &Frame, a: &DecodeArgs) -> Result<DecodeReport, CliError> {
    let start = Instant::now();
    let model = a
        .model
        .as_ref()
        .map(|p| RangeModel::load(p).map_err(io_err))
        .transpose()?;
    let tx = TxParams {
        mod_freq_hz: a.freq_hz,
        ..Default::default()
    };
    let cam = CameraParams {
        readout_time_s: a.readout_us * 1e-6,
        pixel_pitch_m: a.pixel_pitch_nm * 1e-9,
        ..Default::default()
    };
    tx.validate().map_err(usage)?;
    cam.validate().map_err(usage)?;
    let w = (!a.estimate_clock).then(|| band_width_px(&tx, &cam));
    let cfg = DecodeConfig {
        band_width_px: w,
        offset_fraction: a.offset,
        framing: FramingConfig::with_payload_bits(a.bits),
        ..Default::default()
    };
    if !(0.0..1.0).contains(&a.offset) {
        return Err(usage(format!("offset must be in [0, 1), got {}", a.offset)));
    }
    let stages = preprocess(frame, &cfg).map_err(usage)?;
    if let Some(dir) = &a.debug_dir {
        std::fs::create_dir_all(dir).map_err(io_err)?;
        stages
            .stretched
            .frame
            .write_pgm(dir.join("stretched.pgm"))
            .map_err(io_err)?;
        stages.blurred.write_pgm(dir.join("blurred.pgm")).map_err(io_err)?;
        stages.binary.write_pgm(dir.join("binary.pgm")).map_err(io_err)?;
    }
    let preprocess_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut blobs = Vec::new();
    for d in decode_stages(&stages, &cfg) {
        let t = Instant::now();
        let dia = d.blob.diameter_px();
        let conventional = conventional_distance(dia, &tx, &cam).map_err(usage)? * 100.0;
        let regression = model
            .as_ref()
            .map(|m| predict_distance(m, dia).map(|v| v * 100.0))
            .transpose()
            .map_err(usage)?;
        let (payload, error) = match &d.result {
            Ok(p) => (Some(p.to_hex()), None),
            Err(e) => (None, Some(e.to_string())),
        };
        blobs.push(BlobRecord {
            center_x: d.blob.center_x,
            center_y: d.blob.center_y,
            radius_px: d.blob.radius_px,
            payload,
            error,
            conventional_distance_cm: conventional,
            regression_distance_cm: regression,
            decode_ms: preprocess_ms + t.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(DecodeReport {
        width: frame.width(),
        height: frame.height(),
        band_width_px: w,
        preprocess_ms,
        total_ms: start.elapsed().as_secs_f64() * 1e3,
        blobs,
    })
}

pub fn decode(a: &DecodeArgs) -> Result<DecodeReport, CliError> {
    let frame = Frame::read_pgm(&a.input).map_err(io_err)?;
    decode_frame_report(&frame, a)
}

/// Fits and saves the model; returns it with its training MSE in cm².
pub fn train(a: &TrainArgs) -> Result<(RangeModel, f64), CliError> {
    let file = std::fs::File::open(&a.csv).map_err(io_err)?;
    let mut samples = read_samples(file).map_err(usage)?;
    if let Some(iso) = a.iso {
        samples.retain(|s| s.iso == iso);
    }
    let model = fit_regression(&samples, a.feature.into()).map_err(usage)?;
    let predicted: Vec<f64> = samples
        .iter()
        .map(|s| predict_distance(&model, s.blob_diameter_px).map(|d| d * 100.0))
        .collect::<Result<_, _>>()
        .map_err(usage)?;
    let truth: Vec<f64> = samples.iter().map(|s| s.distance_m * 100.0).collect();
    let mse = mean_squared_error(&predicted, &truth).map_err(usage)?;
    model.save(&a.out).map_err(io_err)?;
    Ok((model, mse))
}

pub fn range(a: &RangeArgs) -> Result<serde_json::Value, CliError> {
    let cam = CameraParams {
        pixel_pitch_m: a.pixel_pitch_nm * 1e-9,
        ..Default::default()
    };
    let conventional = conventional_distance(a.diameter_px, &TxParams::default(), &cam).map_err(usage)?;
    let regression = match &a.model {
        Some(p) => {
            let m = RangeModel::load(p).map_err(io_err)?;
            Some(predict_distance(&m, a.diameter_px).map_err(usage)? * 100.0)
        }
        None => None,
    };
    Ok(serde_json::json!({
        "diameter_px": a.diameter_px,
        "conventional_distance_cm": conventional * 100.0,
        "regression_distance_cm": regression,
    }))
}

fn check_link(link: &LinkArgs) -> Result<(), CliError> {
    link.tx().validate().map_err(usage)?;
    link.camera(100).validate().map_err(usage)
}

pub fn sweep(a: &SweepArgs) -> Result<Vec<experiment::SweepRow>, CliError> {
    check_link(&a.grid.link)?;
    let model = a
        .model
        .as_ref()
        .map(|p| RangeModel::load(p).map_err(io_err))
        .transpose()?;
    let rows = experiment::sweep(&a.grid.config(), model.as_ref()).map_err(usage)?;
    let file = std::fs::File::create(&a.grid.out).map_err(io_err)?;
    experiment::write_sweep_csv(file, &rows).map_err(io_err)?;
    Ok(rows)
}

pub fn collect(a: &CollectArgs) -> Result<usize, CliError> {
    check_link(&a.grid.link)?;
    let samples = experiment::collect_samples(&a.grid.config()).map_err(usage)?;
    let file = std::fs::File::create(&a.grid.out).map_err(io_err)?;
    write_samples(file, &samples).map_err(io_err)?;
    Ok(samples.len())
}
