//! Rolling-shutter camera model.
//!
//! Rows are read out one after another, `readout_time_s` apart, so a light
//! switching faster than the frame rate is recorded as horizontal bands.
//! One channel symbol lasts half a modulation period, `1 / (2f)`, which is
//! exactly one band of `W = 1 / (2 f T_r)` rows.
//!
//! The blob diameter follows the pinhole relation between LED radius,
//! focal length, pixel pitch and distance, scaled by a sensor gain that
//! grows with ISO. That gain and the blooming model are simulation choices
//! calibrated to reproduce the measured trends; they are not derived from
//! sensor physics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use thiserror::Error;

use crate::codec::{packet_size, CodecError, FramingConfig, SymbolStream};
use crate::frame::Frame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CameraError {
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("link distance {distance_m} m must exceed the focal length {focal_length_m} m")]
    BehindLens { distance_m: f64, focal_length_m: f64 },
    #[error("blob of radius {radius_px:.1} px at ({cx:.1}, {cy:.1}) does not fit in a {width}x{height} frame")]
    BlobOutOfFrame {
        cx: f64,
        cy: f64,
        radius_px: f64,
        width: usize,
        height: usize,
    },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Receiver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraParams {
    pub width_px: usize,
    pub height_px: usize,
    /// Time to read out one sensor row (`T_r`).
    pub readout_time_s: f64,
    pub exposure_time_s: f64,
    pub iso: u32,
    /// Effective pixel pitch (`S_p`). The default is calibrated so that a
    /// 10.9 mm LED crosses the 276 px packet bound at desk distances with
    /// the 0.28 mm focal length below; it is not a datasheet value.
    pub pixel_pitch_m: f64,
    /// Focal length (`f_L`).
    pub focal_length_m: f64,
    /// Slope `κ` of the ISO size gain `1 + κ·log2(iso/100)`.
    pub iso_size_kappa: f64,
}

pub const DEFAULT_READOUT_S: f64 = 16.67e-6;

impl Default for CameraParams {
    fn default() -> Self {
        CameraParams {
            width_px: 1280,
            height_px: 720,
            readout_time_s: DEFAULT_READOUT_S,
            exposure_time_s: DEFAULT_READOUT_S,
            iso: 100,
            pixel_pitch_m: 70e-9,
            focal_length_m: 0.28e-3,
            iso_size_kappa: 0.15,
        }
    }
}

impl CameraParams {
    pub fn with_iso(iso: u32) -> Self {
        CameraParams {
            iso,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let positive = [
            ("readout_time_s", self.readout_time_s),
            ("exposure_time_s", self.exposure_time_s),
            ("pixel_pitch_m", self.pixel_pitch_m),
            ("focal_length_m", self.focal_length_m),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(CameraError::InvalidParam(format!("{name} must be > 0, got {v}")));
            }
        }
        if self.width_px == 0 || self.height_px == 0 {
            return Err(CameraError::InvalidParam("resolution must be non-zero".into()));
        }
        if self.iso < 100 {
            return Err(CameraError::InvalidParam(format!(
                "iso must be >= 100, got {}",
                self.iso
            )));
        }
        if !(self.iso_size_kappa.is_finite() && self.iso_size_kappa >= 0.0) {
            return Err(CameraError::InvalidParam("iso_size_kappa must be >= 0".into()));
        }
        Ok(())
    }

    /// Apparent size multiplier at the configured ISO; 1 at ISO 100.
    pub fn iso_gain(&self) -> f64 {
        1.0 + self.iso_size_kappa * (f64::from(self.iso) / 100.0).log2()
    }
}

/// Transmitter settings.
#[derive(Debug, Clone, PartialEq)]
pub struct TxParams {
    pub mod_freq_hz: f64,
    /// Lit fraction of one modulation period for an isolated `1`.
    pub duty_cycle: f64,
    /// Physical LED radius (`S_r`).
    pub led_radius_m: f64,
}

impl Default for TxParams {
    fn default() -> Self {
        TxParams {
            mod_freq_hz: 2500.0,
            duty_cycle: 0.40,
            led_radius_m: 10.9e-3,
        }
    }
}

impl TxParams {
    pub fn validate(&self) -> Result<(), CameraError> {
        if !(self.mod_freq_hz.is_finite() && self.mod_freq_hz > 0.0) {
            return Err(CameraError::InvalidParam(format!(
                "mod_freq_hz must be > 0, got {}",
                self.mod_freq_hz
            )));
        }
        if !(self.duty_cycle > 0.0 && self.duty_cycle < 1.0) {
            return Err(CameraError::InvalidParam(format!(
                "duty_cycle must be in (0, 1), got {}",
                self.duty_cycle
            )));
        }
        if !(self.led_radius_m.is_finite() && self.led_radius_m > 0.0) {
            return Err(CameraError::InvalidParam("led_radius_m must be > 0".into()));
        }
        Ok(())
    }

    /// Duration of one channel symbol.
    pub fn symbol_time_s(&self) -> f64 {
        0.5 / self.mod_freq_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    /// Blob centre `(x, y)` in pixel coordinates.
    pub center_px: (f64, f64),
}

impl LinkGeometry {
    /// Centred in the default 1280x720 frame.
    pub fn centered(distance_m: f64, cam: &CameraParams) -> Self {
        LinkGeometry {
            distance_m,
            center_px: ((cam.width_px as f64 - 1.0) / 2.0, (cam.height_px as f64 - 1.0) / 2.0),
        }
    }
}

/// Height in rows of one band: `1 / (2 f T_r)`.
pub fn band_width_px(tx: &TxParams, cam: &CameraParams) -> f64 {
    1.0 / (2.0 * tx.mod_freq_hz * cam.readout_time_s)
}

/// Expected blob diameter in pixels at `geom.distance_m`.
pub fn expected_blob_diameter_px(geom: &LinkGeometry, tx: &TxParams, cam: &CameraParams) -> Result<f64, CameraError> {
    if !(geom.distance_m > cam.focal_length_m) {
        return Err(CameraError::BehindLens {
            distance_m: geom.distance_m,
            focal_length_m: cam.focal_length_m,
        });
    }
    Ok(cam.iso_gain() * tx.led_radius_m * cam.focal_length_m
        / (cam.pixel_pitch_m * (geom.distance_m - cam.focal_length_m)))
}

/// Minimum blob extent, in pixels, that holds one whole packet.
pub fn decodability_bound_px(n_bits: usize, tx: &TxParams, cam: &CameraParams) -> Result<f64, CameraError> {
    let symbols = packet_size(n_bits, &FramingConfig::with_payload_bits(n_bits))?;
    Ok(band_width_px(tx, cam) * symbols as f64)
}

/// Light output of a looping symbol stream as on-intervals within one cycle.
#[derive(Debug, Clone)]
pub struct Waveform {
    cycle_s: f64,
    /// Sorted, disjoint `[start, end)` intervals inside `[0, cycle_s)`.
    on: Vec<(f64, f64)>,
    on_per_cycle: f64,
}

impl Waveform {
    pub fn new(stream: &SymbolStream, tx: &TxParams) -> Self {
        let s = stream.symbols();
        let n = s.len();
        let slot = tx.symbol_time_s();
        let cycle_s = slot * n as f64;
        // falling edges move earlier for duty < 0.5, later above it
        let trim = (1.0 - 2.0 * tx.duty_cycle) * slot;

        let mut on = Vec::new();
        if s.iter().all(|&v| v == 1) {
            on.push((0.0, cycle_s));
        } else if s.contains(&1) {
            // start scanning at a dark slot so no run straddles the scan start
            let start = s.iter().position(|&v| v == 0).unwrap();
            let mut i = 0;
            while i < n {
                let idx = (start + i) % n;
                if s[idx] == 1 {
                    let mut k = 0;
                    while i + k < n && s[(start + i + k) % n] == 1 {
                        k += 1;
                    }
                    let a = idx as f64 * slot;
                    let b = a + k as f64 * slot - trim;
                    push_wrapped(&mut on, a, b, cycle_s);
                    i += k;
                } else {
                    i += 1;
                }
            }
            on.sort_by(|x, y| x.0.total_cmp(&y.0));
        }
        let on_per_cycle = on.iter().map(|(a, b)| b - a).sum();
        Waveform {
            cycle_s,
            on,
            on_per_cycle,
        }
    }

    pub fn cycle_s(&self) -> f64 {
        self.cycle_s
    }

    fn cumulative(&self, t: f64) -> f64 {
        let cycles = (t / self.cycle_s).floor();
        let r = t - cycles * self.cycle_s;
        let mut partial = 0.0;
        for &(a, b) in &self.on {
            if r <= a {
                break;
            }
            partial += r.min(b) - a;
        }
        cycles * self.on_per_cycle + partial
    }

    /// Seconds the light is on during `[t0, t1]`.
    pub fn on_time(&self, t0: f64, t1: f64) -> f64 {
        (self.cumulative(t1) - self.cumulative(t0)).max(0.0)
    }

    pub fn is_on(&self, t: f64) -> bool {
        let r = t.rem_euclid(self.cycle_s);
        self.on.iter().any(|&(a, b)| r >= a && r < b)
    }
}

fn push_wrapped(on: &mut Vec<(f64, f64)>, a: f64, b: f64, cycle: f64) {
    if b <= cycle {
        on.push((a, b));
    } else {
        on.push((a, cycle));
        on.push((0.0, b - cycle));
    }
}

/// Overexposure around the blob centre.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bloom {
    /// Rows a bright band spills into at the very centre (ISO 100).
    pub spill_rows: f64,
    /// Additive offset at the centre as a fraction of full scale.
    pub strength: f64,
}

impl Default for Bloom {
    fn default() -> Self {
        Bloom {
            spill_rows: 6.0,
            strength: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Falloff {
    #[default]
    Uniform,
    /// `cos(π/3 · d/R)`: half intensity at the rim.
    Cosine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderOptions {
    /// Noise standard deviation at ISO 100, in grey levels.
    pub noise_sigma: f64,
    pub seed: u64,
    pub dark_level: u8,
    pub bloom: Option<Bloom>,
    pub falloff: Falloff,
}

impl RenderOptions {
    pub fn new(noise_sigma: f64, seed: u64) -> Self {
        RenderOptions {
            noise_sigma,
            seed,
            dark_level: 10,
            bloom: Some(Bloom::default()),
            falloff: Falloff::Uniform,
        }
    }

    pub fn without_bloom(mut self) -> Self {
        self.bloom = None;
        self
    }
}

/// One LED in the scene.
#[derive(Debug, Clone)]
pub struct Emitter {
    pub stream: SymbolStream,
    pub geom: LinkGeometry,
}

struct Placed {
    wave: Waveform,
    phase_s: f64,
    cx: f64,
    cy: f64,
    radius: f64,
}

/// Renders a single LED transmitting `stream` on a loop.
pub fn synthesize_frame(
    stream: &SymbolStream,
    geom: &LinkGeometry,
    tx: &TxParams,
    cam: &CameraParams,
    noise_sigma: f64,
    seed: u64,
) -> Result<Frame, CameraError> {
    let emitter = Emitter {
        stream: stream.clone(),
        geom: *geom,
    };
    render(
        std::slice::from_ref(&emitter),
        tx,
        cam,
        &RenderOptions::new(noise_sigma, seed),
    )
}

/// Renders any number of LEDs into one frame.
///
/// Each emitter starts at an independent phase drawn from `opts.seed`;
/// noise rows use their own ChaCha stream so the parallel row loop is
/// bit-identical to a sequential one.
pub fn render(
    emitters: &[Emitter],
    tx: &TxParams,
    cam: &CameraParams,
    opts: &RenderOptions,
) -> Result<Frame, CameraError> {
    tx.validate()?;
    cam.validate()?;
    if !(opts.noise_sigma.is_finite() && opts.noise_sigma >= 0.0) {
        return Err(CameraError::InvalidParam("noise sigma must be >= 0".into()));
    }

    let mut phase_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut placed = Vec::with_capacity(emitters.len());
    for e in emitters {
        let diameter = expected_blob_diameter_px(&e.geom, tx, cam)?;
        let radius = diameter / 2.0;
        let (cx, cy) = e.geom.center_px;
        if cx - radius < 0.0
            || cy - radius < 0.0
            || cx + radius > (cam.width_px - 1) as f64
            || cy + radius > (cam.height_px - 1) as f64
        {
            return Err(CameraError::BlobOutOfFrame {
                cx,
                cy,
                radius_px: radius,
                width: cam.width_px,
                height: cam.height_px,
            });
        }
        let wave = Waveform::new(&e.stream, tx);
        let phase_s = phase_rng.gen::<f64>() * wave.cycle_s();
        placed.push(Placed {
            wave,
            phase_s,
            cx,
            cy,
            radius,
        });
    }

    let sigma = opts.noise_sigma * f64::from(cam.iso) / 100.0;
    let noise = (sigma > 0.0).then(|| Normal::new(0.0, sigma).expect("finite sigma"));
    let bloom = opts.bloom.map(|b| Bloom {
        spill_rows: b.spill_rows * cam.iso_gain(),
        ..b
    });
    let width = cam.width_px;
    let mut pixels = vec![0u8; width * cam.height_px];

    pixels.par_chunks_mut(width).enumerate().for_each(|(y, row)| {
        let mut signal = vec![0.0f64; width];
        for p in &placed {
            render_row(p, y, cam, bloom, opts.falloff, &mut signal);
        }
        let mut rng = noise.map(|_| {
            let mut r = ChaCha8Rng::seed_from_u64(opts.seed);
            r.set_stream(y as u64 + 1);
            r
        });
        for (out, s) in row.iter_mut().zip(&signal) {
            let mut v = f64::from(opts.dark_level) + s;
            if let (Some(n), Some(r)) = (noise.as_ref(), rng.as_mut()) {
                v += n.sample(r);
            }
            *out = v.round().clamp(0.0, 255.0) as u8;
        }
    });

    Ok(Frame::new(width, cam.height_px, pixels).expect("buffer sized from params"))
}

fn render_row(p: &Placed, y: usize, cam: &CameraParams, bloom: Option<Bloom>, falloff: Falloff, signal: &mut [f64]) {
    let dy = y as f64 - p.cy;
    let r2 = p.radius * p.radius;
    if dy * dy > r2 {
        return;
    }
    let half = (r2 - dy * dy).sqrt();
    let x0 = (p.cx - half).ceil().max(0.0) as usize;
    let x1 = ((p.cx + half).floor() as usize).min(signal.len() - 1);

    let t0 = p.phase_s + y as f64 * cam.readout_time_s;
    let t1 = t0 + cam.exposure_time_s;
    let lit = p.wave.on_time(t0, t1) / cam.exposure_time_s;
    let core = p.radius / 2.0;

    for (x, s) in signal.iter_mut().enumerate().take(x1 + 1).skip(x0) {
        let dx = x as f64 - p.cx;
        let d = (dx * dx + dy * dy).sqrt();
        let shade = match falloff {
            Falloff::Uniform => 1.0,
            Falloff::Cosine => (std::f64::consts::FRAC_PI_3 * d / p.radius).cos(),
        };
        let mut v = 255.0 * lit * shade;
        if let Some(b) = bloom {
            if d < core {
                let a = 1.0 - d / core;
                let spill = b.spill_rows * a * cam.readout_time_s;
                if p.wave.on_time(t0 - spill, t1 + spill) > 0.0 {
                    v += 255.0 * b.strength * a;
                }
            }
        }
        *s += v;
    }
}
