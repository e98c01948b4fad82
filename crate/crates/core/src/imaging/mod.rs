//! Receiver image processing.
//!
//! The stages run in a fixed order: contrast stretch, 3x3 blur, adaptive
//! threshold, blob detection, then one column per blob (taken from the
//! thresholded image, half a radius right of centre to dodge the
//! overexposed core) is turned into symbols and parsed as a packet.

mod blobs;
mod column;
mod filters;

use std::ops::Deref;

use thiserror::Error;

pub use blobs::{
    close_vertical, closing_height, detect_blobs, detect_blobs_with, enclosing_circle, Blob, DetectOptions,
    RadiusEstimator,
};
pub use column::{column_to_symbols, estimate_band_width, extract_column};
pub use filters::{
    adaptive_threshold, adaptive_threshold_with_floor, box_blur_3x3, contrast_stretch, contrast_stretch_limited,
    histogram, percentile, Stretched, DEFAULT_BLOCK, DEFAULT_C, DEFAULT_FLOOR, DEFAULT_MIN_STRETCH_RANGE,
};

use crate::codec::{parse_packet, CodecError, FramingConfig, Payload};
use crate::frame::Frame;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ImagingError {
    #[error("percentiles must satisfy 0 <= lo < hi <= 100, got {lo_pct}, {hi_pct}")]
    Percentiles { lo_pct: f64, hi_pct: f64 },
    #[error("frame {width}x{height} is smaller than the 3x3 kernel")]
    FrameTooSmall { width: usize, height: usize },
    #[error("adaptive threshold block must be odd and >= 3, got {0}")]
    BlockSize(usize),
    #[error("offset fraction must be in [0, 1), got {0}")]
    OffsetFraction(f64),
    #[error("offset column misses the blob")]
    OffsetOutsideBlob,
    #[error("band width must be >= 2 px, got {0}")]
    BandWidth(f64),
    #[error("column of {len} px is shorter than three bands ({needed} px)")]
    ColumnTooShort { len: usize, needed: usize },
    #[error("column has no transitions")]
    NoTransitions,
    #[error("frame contains values other than 0 and 255")]
    NotBinary,
}

/// A frame whose pixels are all 0 or 255.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame(Frame);

impl BinaryFrame {
    pub fn new(frame: Frame) -> Result<Self, ImagingError> {
        if frame.pixels().iter().all(|&v| v == 0 || v == 255) {
            Ok(BinaryFrame(frame))
        } else {
            Err(ImagingError::NotBinary)
        }
    }

    pub fn into_frame(self) -> Frame {
        self.0
    }
}

impl Deref for BinaryFrame {
    type Target = Frame;

    fn deref(&self) -> &Frame {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeConfig {
    /// Band width in rows; `None` estimates it per blob from the column.
    pub band_width_px: Option<f64>,
    pub offset_fraction: f64,
    pub lo_pct: f64,
    pub hi_pct: f64,
    /// Minimum grey-level span of the stretch; 0 gives the plain remap.
    pub min_stretch_range: u8,
    pub block: usize,
    pub c: f64,
    pub floor: i32,
    /// `None` uses `(2W)²`.
    pub min_area_px: Option<usize>,
    pub estimator: RadiusEstimator,
    pub framing: FramingConfig,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            band_width_px: Some(12.0),
            offset_fraction: 0.5,
            lo_pct: 2.0,
            hi_pct: 98.0,
            min_stretch_range: DEFAULT_MIN_STRETCH_RANGE,
            block: DEFAULT_BLOCK,
            c: DEFAULT_C,
            floor: DEFAULT_FLOOR,
            min_area_px: None,
            estimator: RadiusEstimator::default(),
            framing: FramingConfig::default(),
        }
    }
}

impl DecodeConfig {
    pub fn with_band_width(band_width_px: f64) -> Self {
        DecodeConfig {
            band_width_px: Some(band_width_px),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeFailure {
    #[error(transparent)]
    Imaging(#[from] ImagingError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("could not estimate the band width")]
    UnknownBandWidth,
}

#[derive(Debug, Clone)]
pub struct BlobDecode {
    pub blob: Blob,
    pub result: Result<Payload, DecodeFailure>,
}

/// Intermediate images, kept for debugging.
#[derive(Debug, Clone)]
pub struct Stages {
    pub stretched: Stretched,
    pub blurred: Frame,
    pub binary: BinaryFrame,
}

/// Preprocessing up to the binary image.
pub fn preprocess(frame: &Frame, cfg: &DecodeConfig) -> Result<Stages, ImagingError> {
    let stretched = contrast_stretch_limited(frame, cfg.lo_pct, cfg.hi_pct, cfg.min_stretch_range)?;
    let blurred = box_blur_3x3(&stretched.frame)?;
    let binary = adaptive_threshold_with_floor(&blurred, cfg.block, cfg.c, cfg.floor)?;
    Ok(Stages {
        stretched,
        blurred,
        binary,
    })
}

/// Runs the full receiver pipeline and decodes every detected blob.
pub fn decode_frame(frame: &Frame, cfg: &DecodeConfig) -> Result<Vec<BlobDecode>, ImagingError> {
    let stages = preprocess(frame, cfg)?;
    Ok(decode_stages(&stages, cfg))
}

pub fn decode_stages(stages: &Stages, cfg: &DecodeConfig) -> Vec<BlobDecode> {
    let binary = &stages.binary;
    // closing needs some band width even when the clock is unknown
    let w_detect = cfg.band_width_px.unwrap_or(12.0);
    let mut opts = DetectOptions::for_band_width(w_detect);
    opts.estimator = cfg.estimator;
    if let Some(a) = cfg.min_area_px {
        opts.min_area_px = a;
    }
    detect_blobs_with(binary, &opts)
        .into_iter()
        .map(|blob| BlobDecode {
            blob,
            result: decode_blob(binary, &blob, cfg),
        })
        .collect()
}

pub fn decode_blob(binary: &BinaryFrame, blob: &Blob, cfg: &DecodeConfig) -> Result<Payload, DecodeFailure> {
    let column = extract_column(binary, blob, cfg.offset_fraction)?;
    let w = match cfg.band_width_px {
        Some(w) => w,
        None => estimate_band_width(&column).ok_or(DecodeFailure::UnknownBandWidth)?,
    };
    let symbols = column_to_symbols(&column, w)?;
    Ok(parse_packet(symbols.symbols(), &cfg.framing, cfg.framing.payload_bits)?)
}
