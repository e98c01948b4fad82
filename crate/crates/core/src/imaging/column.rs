//! Column sampling and run-length clock recovery.

use super::{Blob, ImagingError};
use crate::codec::SymbolStream;
use crate::frame::Frame;

/// The pixel column at `x = round(cx + offset·r)`, limited to the rows
/// inside the blob circle.
pub fn extract_column(frame: &Frame, blob: &Blob, offset_fraction: f64) -> Result<Vec<u8>, ImagingError> {
    if !(0.0..1.0).contains(&offset_fraction) {
        return Err(ImagingError::OffsetFraction(offset_fraction));
    }
    let x = (blob.center_x + offset_fraction * blob.radius_px).round();
    let dx = x - blob.center_x;
    let h2 = blob.radius_px * blob.radius_px - dx * dx;
    if h2 < 0.0 || x < 0.0 || x >= frame.width() as f64 {
        return Err(ImagingError::OffsetOutsideBlob);
    }
    let half = h2.sqrt();
    let y0 = (blob.center_y - half).ceil().max(0.0) as usize;
    let y1 = (blob.center_y + half).floor().min(frame.height() as f64 - 1.0);
    if y1 < y0 as f64 {
        return Err(ImagingError::OffsetOutsideBlob);
    }
    let x = x as usize;
    Ok((y0..=y1 as usize).map(|y| frame.get(x, y)).collect())
}

/// Trims 2 px per end and splits the column into `(level, length)` runs,
/// binarised at the midpoint of its range.
fn runs(column: &[u8]) -> Result<Vec<(u8, usize)>, ImagingError> {
    let core = if column.len() > 4 {
        &column[2..column.len() - 2]
    } else {
        column
    };
    let lo = core.iter().copied().min().unwrap_or(0);
    let hi = core.iter().copied().max().unwrap_or(0);
    if lo == hi {
        return Err(ImagingError::NoTransitions);
    }
    let mid = (u16::from(lo) + u16::from(hi)) as f64 / 2.0;
    let mut out: Vec<(u8, usize)> = Vec::new();
    for &v in core {
        let s = (f64::from(v) > mid) as u8;
        match out.last_mut() {
            Some((level, n)) if *level == s => *n += 1,
            _ => out.push((s, 1)),
        }
    }
    Ok(out)
}

/// Converts an intensity column into channel symbols using a known band
/// width `w_px`.
///
/// Every run contributes `round(run / w_px)` symbols, at least one. The
/// first and last runs are cut by the blob edge and are kept only when
/// they still round to a whole symbol.
pub fn column_to_symbols(column: &[u8], w_px: f64) -> Result<SymbolStream, ImagingError> {
    if !(w_px >= 2.0) {
        return Err(ImagingError::BandWidth(w_px));
    }
    if (column.len() as f64) < 3.0 * w_px {
        return Err(ImagingError::ColumnTooShort {
            len: column.len(),
            needed: (3.0 * w_px).ceil() as usize,
        });
    }
    let runs = runs(column)?;
    let last = runs.len() - 1;
    let mut symbols = Vec::new();
    for (i, &(level, n)) in runs.iter().enumerate() {
        let count = (n as f64 / w_px).round() as usize;
        let count = if i == 0 || i == last { count } else { count.max(1) };
        symbols.extend(std::iter::repeat_n(level, count));
    }
    SymbolStream::new(symbols).map_err(|_| ImagingError::NoTransitions)
}

/// Band width guess for an unknown modulation frequency.
///
/// Duty-cycle trimming moves the bright/dark boundary but not the period,
/// so each adjacent pair of interior runs spans a whole number of bands.
/// The shortest quartile of pair lengths is dominated by one-bright,
/// one-dark pairs; half its median is the estimate.
pub fn estimate_band_width(column: &[u8]) -> Option<f64> {
    let runs = runs(column).ok()?;
    if runs.len() < 4 {
        return None;
    }
    let interior = &runs[1..runs.len() - 1];
    let mut pairs: Vec<usize> = interior.windows(2).map(|w| w[0].1 + w[1].1).collect();
    pairs.sort_unstable();
    let quartile = &pairs[..pairs.len().div_ceil(4)];
    let m = quartile.len();
    let median = if m % 2 == 1 {
        quartile[m / 2] as f64
    } else {
        (quartile[m / 2 - 1] + quartile[m / 2]) as f64 / 2.0
    };
    Some(median / 2.0)
}
