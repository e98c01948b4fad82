//! Pixel-level filters: percentile contrast stretch, 3x3 box blur and
//! mean-based adaptive threshold. All borders replicate the edge pixel.

use super::{BinaryFrame, ImagingError};
use crate::frame::Frame;

#[derive(Debug, Clone)]
pub struct Stretched {
    pub frame: Frame,
    /// Set when the two percentiles coincide; `frame` is then the input.
    pub degenerate: bool,
    pub lo: u8,
    pub hi: u8,
}

/// Intensity at percentile `pct` (nearest rank).
pub fn percentile(hist: &[u64; 256], total: u64, pct: f64) -> u8 {
    let rank = ((pct / 100.0) * total as f64).ceil().max(1.0) as u64;
    let mut acc = 0;
    for (v, &n) in hist.iter().enumerate() {
        acc += n;
        if acc >= rank {
            return v as u8;
        }
    }
    255
}

pub fn histogram(frame: &Frame) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &p in frame.pixels() {
        hist[p as usize] += 1;
    }
    hist
}

/// Linear remap sending the `lo_pct` percentile to 0 and `hi_pct` to 255.
pub fn contrast_stretch(frame: &Frame, lo_pct: f64, hi_pct: f64) -> Result<Stretched, ImagingError> {
    contrast_stretch_limited(frame, lo_pct, hi_pct, 0)
}

/// As [`contrast_stretch`], but the mapped range is widened to at least
/// `min_range` grey levels (by raising the upper end), capping the gain at
/// `255 / min_range`. A small blob on a noisy background otherwise leaves
/// both percentiles inside the noise, which is then blown up to full scale.
pub fn contrast_stretch_limited(
    frame: &Frame,
    lo_pct: f64,
    hi_pct: f64,
    min_range: u8,
) -> Result<Stretched, ImagingError> {
    if !(0.0..100.0).contains(&lo_pct) || !(lo_pct < hi_pct && hi_pct <= 100.0) {
        return Err(ImagingError::Percentiles { lo_pct, hi_pct });
    }
    let hist = histogram(frame);
    let total = frame.pixels().len() as u64;
    let lo = percentile(&hist, total, lo_pct);
    let hi = percentile(&hist, total, hi_pct);
    if lo >= hi {
        return Ok(Stretched {
            frame: frame.clone(),
            degenerate: true,
            lo,
            hi,
        });
    }
    let hi = hi.max(lo.saturating_add(min_range));
    let scale = 255.0 / f64::from(hi - lo);
    let lut: Vec<u8> = (0..=255u8)
        .map(|v| ((f64::from(v) - f64::from(lo)) * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    let pixels = frame.pixels().iter().map(|&p| lut[p as usize]).collect();
    Ok(Stretched {
        frame: Frame::new(frame.width(), frame.height(), pixels).expect("same size"),
        degenerate: false,
        lo,
        hi,
    })
}

/// Sum over a `block`×`block` window around every pixel, edges replicated.
fn window_sums(frame: &Frame, block: usize) -> Vec<u32> {
    let (w, h) = (frame.width(), frame.height());
    let half = (block / 2) as isize;
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;

    let mut horiz = vec![0u32; w * h];
    let mut prefix = vec![0u32; w + block];
    for y in 0..h {
        let row = frame.row(y);
        for i in 0..w + block - 1 {
            prefix[i + 1] = prefix[i] + u32::from(row[clamp(i as isize - half, w)]);
        }
        for x in 0..w {
            horiz[y * w + x] = prefix[x + block] - prefix[x];
        }
    }

    let mut out = vec![0u32; w * h];
    let mut col_prefix = vec![0u32; (h + block) * w];
    for i in 0..h + block - 1 {
        let src = clamp(i as isize - half, h);
        for x in 0..w {
            col_prefix[(i + 1) * w + x] = col_prefix[i * w + x] + horiz[src * w + x];
        }
    }
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = col_prefix[(y + block) * w + x] - col_prefix[y * w + x];
        }
    }
    out
}

/// Rounded mean of each 3×3 neighbourhood.
pub fn box_blur_3x3(frame: &Frame) -> Result<Frame, ImagingError> {
    if frame.width() < 3 || frame.height() < 3 {
        return Err(ImagingError::FrameTooSmall {
            width: frame.width(),
            height: frame.height(),
        });
    }
    let pixels = window_sums(frame, 3).into_iter().map(|s| ((s + 4) / 9) as u8).collect();
    Ok(Frame::new(frame.width(), frame.height(), pixels).expect("same size"))
}

pub const DEFAULT_BLOCK: usize = 15;
pub const DEFAULT_C: f64 = 5.0;
pub const DEFAULT_FLOOR: i32 = 80;
pub const DEFAULT_MIN_STRETCH_RANGE: u8 = 128;

/// `255` where the pixel exceeds its local mean minus `c` and also exceeds
/// the absolute `floor`; `0` elsewhere.
///
/// A negative `floor` disables the absolute test, which maps every flat
/// region to 255.
pub fn adaptive_threshold_with_floor(
    frame: &Frame,
    block: usize,
    c: f64,
    floor: i32,
) -> Result<BinaryFrame, ImagingError> {
    if block < 3 || block.is_multiple_of(2) {
        return Err(ImagingError::BlockSize(block));
    }
    let n = (block * block) as f64;
    let sums = window_sums(frame, block);
    let pixels = frame
        .pixels()
        .iter()
        .zip(&sums)
        .map(|(&v, &s)| {
            let above_mean = (f64::from(v) + c) * n > f64::from(s);
            if above_mean && i32::from(v) > floor {
                255
            } else {
                0
            }
        })
        .collect();
    Ok(BinaryFrame(
        Frame::new(frame.width(), frame.height(), pixels).expect("same size"),
    ))
}

pub fn adaptive_threshold(frame: &Frame, block: usize, c: f64) -> Result<BinaryFrame, ImagingError> {
    adaptive_threshold_with_floor(frame, block, c, DEFAULT_FLOOR)
}
