//! Seeded simulation runs: distance/ISO sweeps and training-set collection.
//!
//! Every trial gets its own seed derived from `(base, iso, distance index,
//! trial index)`, so trials can run in any order or in parallel and still
//! produce identical output.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::{band_width_px, render, CameraError, CameraParams, Emitter, LinkGeometry, RenderOptions, TxParams};
use crate::codec::{build_packet, Payload};
use crate::imaging::{decode_frame, DecodeConfig};
use crate::ranging::{conventional_distance, predict_distance, RangeModel, RangeSample};

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn trial_seed(base: u64, iso: u32, distance_index: usize, trial: usize) -> u64 {
    let mut s = splitmix(base);
    for part in [u64::from(iso), distance_index as u64, trial as u64] {
        s = splitmix(s ^ part);
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub isos: Vec<u32>,
    pub dmin_cm: f64,
    pub dmax_cm: f64,
    pub step_cm: f64,
    pub trials: usize,
    pub seed: u64,
    pub noise_sigma: f64,
    pub tx: TxParams,
    /// ISO is overridden per sweep point.
    pub camera: CameraParams,
    pub decode: DecodeConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            isos: vec![100, 400, 800],
            dmin_cm: 10.0,
            dmax_cm: 100.0,
            step_cm: 5.0,
            trials: 3,
            seed: 0,
            noise_sigma: 2.0,
            tx: TxParams::default(),
            camera: CameraParams::default(),
            decode: DecodeConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.isos.is_empty() {
            return Err("at least one ISO is required".into());
        }
        if !(self.dmin_cm > 0.0 && self.dmin_cm < self.dmax_cm) {
            return Err(format!(
                "need 0 < dmin < dmax, got {} and {}",
                self.dmin_cm, self.dmax_cm
            ));
        }
        if !(self.step_cm > 0.0) {
            return Err(format!("step must be > 0, got {}", self.step_cm));
        }
        if self.trials == 0 {
            return Err("trials must be >= 1".into());
        }
        Ok(())
    }

    pub fn distances_cm(&self) -> Vec<f64> {
        let n = ((self.dmax_cm - self.dmin_cm) / self.step_cm + 1e-9).floor() as usize;
        (0..=n).map(|i| self.dmin_cm + i as f64 * self.step_cm).collect()
    }
}

/// Outcome of one synthesized frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Trial {
    /// Diameter of the largest detected blob.
    pub diameter_px: Option<f64>,
    pub decoded: bool,
}

/// Synthesizes one centred LED with a seeded random payload, then runs the
/// receiver pipeline on it.
pub fn run_trial(
    distance_m: f64,
    tx: &TxParams,
    cam: &CameraParams,
    noise_sigma: f64,
    seed: u64,
    decode: &DecodeConfig,
) -> Result<Trial, CameraError> {
    let framing = &decode.framing;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bits = framing.payload_bits.min(64);
    let value = if bits == 64 {
        rng.gen()
    } else {
        rng.gen_range(0..1u64 << bits)
    };
    let payload = Payload::from_value(value, bits)?;
    let stream = build_packet(&payload, framing)?;
    let emitter = Emitter {
        stream,
        geom: LinkGeometry::centered(distance_m, cam),
    };
    let frame = render(&[emitter], tx, cam, &RenderOptions::new(noise_sigma, rng.gen()))?;
    let blobs = decode_frame(&frame, decode).map_err(|e| CameraError::InvalidParam(e.to_string()))?;
    Ok(match blobs.first() {
        Some(b) => Trial {
            diameter_px: Some(b.blob.diameter_px()),
            decoded: b.result.as_ref().is_ok_and(|p| *p == payload),
        },
        None => Trial {
            diameter_px: None,
            decoded: false,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub iso: u32,
    pub distance_cm: f64,
    pub mean_diameter_px: Option<f64>,
    pub decode_rate: f64,
    pub conv_err_cm: Option<f64>,
    pub reg_err_cm: Option<f64>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs every `(iso, distance, trial)` point. A point whose blob does not
/// fit the frame reports no diameter and a zero decode rate.
pub fn sweep(cfg: &SweepConfig, model: Option<&RangeModel>) -> Result<Vec<SweepRow>, String> {
    cfg.validate()?;
    let decode = DecodeConfig {
        band_width_px: cfg.decode.band_width_px.or(Some(band_width_px(&cfg.tx, &cfg.camera))),
        ..cfg.decode.clone()
    };
    let distances = cfg.distances_cm();
    let points: Vec<(u32, usize, f64)> = cfg
        .isos
        .iter()
        .flat_map(|&iso| distances.iter().enumerate().map(move |(i, &d)| (iso, i, d)))
        .collect();

    points
        .par_iter()
        .map(|&(iso, di, d_cm)| {
            let cam = CameraParams {
                iso,
                ..cfg.camera.clone()
            };
            let d_m = d_cm / 100.0;
            let mut diameters = Vec::new();
            let mut decoded = 0usize;
            for t in 0..cfg.trials {
                let seed = trial_seed(cfg.seed, iso, di, t);
                match run_trial(d_m, &cfg.tx, &cam, cfg.noise_sigma, seed, &decode) {
                    Ok(trial) => {
                        diameters.extend(trial.diameter_px);
                        decoded += trial.decoded as usize;
                    }
                    Err(CameraError::BlobOutOfFrame { .. }) => {}
                    Err(e) => return Err(e.to_string()),
                }
            }
            let conv: Vec<f64> = diameters
                .iter()
                .filter_map(|&dia| conventional_distance(dia, &cfg.tx, &cam).ok())
                .map(|est| (est - d_m).abs() * 100.0)
                .collect();
            let reg = model.map(|m| {
                diameters
                    .iter()
                    .filter_map(|&dia| predict_distance(m, dia).ok())
                    .map(|est| (est - d_m).abs() * 100.0)
                    .collect::<Vec<f64>>()
            });
            Ok(SweepRow {
                iso,
                distance_cm: d_cm,
                mean_diameter_px: mean(&diameters),
                decode_rate: decoded as f64 / cfg.trials as f64,
                conv_err_cm: mean(&conv),
                reg_err_cm: reg.as_deref().and_then(mean),
            })
        })
        .collect()
}

/// Measured training samples: one row per trial with a detected blob.
pub fn collect_samples(cfg: &SweepConfig) -> Result<Vec<RangeSample>, String> {
    cfg.validate()?;
    let decode = DecodeConfig {
        band_width_px: cfg.decode.band_width_px.or(Some(band_width_px(&cfg.tx, &cfg.camera))),
        ..cfg.decode.clone()
    };
    let distances = cfg.distances_cm();
    let points: Vec<(u32, usize, f64, usize)> = cfg
        .isos
        .iter()
        .flat_map(|&iso| {
            distances
                .iter()
                .enumerate()
                .flat_map(move |(i, &d)| (0..cfg.trials).map(move |t| (iso, i, d, t)))
        })
        .collect();
    let out: Result<Vec<Option<RangeSample>>, String> = points
        .par_iter()
        .map(|&(iso, di, d_cm, t)| {
            let cam = CameraParams {
                iso,
                ..cfg.camera.clone()
            };
            let seed = trial_seed(cfg.seed, iso, di, t);
            match run_trial(d_cm / 100.0, &cfg.tx, &cam, cfg.noise_sigma, seed, &decode) {
                Ok(trial) => Ok(trial.diameter_px.map(|dia| RangeSample {
                    distance_m: d_cm / 100.0,
                    blob_diameter_px: dia,
                    iso,
                })),
                Err(CameraError::BlobOutOfFrame { .. }) => Ok(None),
                Err(e) => Err(e.to_string()),
            }
        })
        .collect();
    Ok(out?.into_iter().flatten().collect())
}

/// First distance at which the ISO's mean diameter falls below `bound_px`,
/// linearly interpolated between sweep points.
pub fn crossing_distance_cm(rows: &[SweepRow], iso: u32, bound_px: f64) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.iso == iso)
        .filter_map(|r| r.mean_diameter_px.map(|d| (r.distance_cm, d)))
        .collect();
    pts.windows(2).find_map(|w| {
        let ((d0, s0), (d1, s1)) = (w[0], w[1]);
        (s0 >= bound_px && s1 < bound_px).then(|| d0 + (s0 - bound_px) / (s0 - s1) * (d1 - d0))
    })
}

pub fn write_sweep_csv(writer: impl std::io::Write, rows: &[SweepRow]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep_csv(reader: impl std::io::Read) -> Result<Vec<SweepRow>, csv::Error> {
    csv::Reader::from_reader(reader).deserialize().collect()
}
