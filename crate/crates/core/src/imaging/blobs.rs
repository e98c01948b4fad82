//! Light blob detection on a thresholded frame.
//!
//! Rolling-shutter bands break one LED into a stack of horizontal strips.
//! A vertical closing bridges the dark gaps between them, then 8-connected
//! components are measured.

use serde::{Deserialize, Serialize};

use super::BinaryFrame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blob {
    pub center_x: f64,
    pub center_y: f64,
    pub radius_px: f64,
    /// Pixel count of the closed component.
    pub area_px: usize,
}

impl Blob {
    pub fn diameter_px(&self) -> f64 {
        2.0 * self.radius_px
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RadiusEstimator {
    /// Smallest circle containing every component pixel.
    #[default]
    EnclosingCircle,
    /// Centroid, and the largest centroid-to-pixel distance.
    CentroidMaxDistance,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    pub min_area_px: usize,
    pub band_width_px: f64,
    pub estimator: RadiusEstimator,
}

impl DetectOptions {
    /// Defaults tied to the band width: minimum area `(2W)²`.
    pub fn for_band_width(band_width_px: f64) -> Self {
        let side = (2.0 * band_width_px).ceil() as usize;
        DetectOptions {
            min_area_px: side * side,
            band_width_px,
            estimator: RadiusEstimator::default(),
        }
    }
}

/// Height of the vertical closing element: `4·⌈W⌉ + 1` rows, enough to
/// bridge the three-symbol dark run of the preamble.
pub fn closing_height(band_width_px: f64) -> usize {
    4 * band_width_px.max(1.0).ceil() as usize + 1
}

/// Vertical closing: fills, per column, every background gap no longer
/// than `height - 1` rows that has foreground on both ends.
pub fn close_vertical(binary: &BinaryFrame, height: usize) -> Vec<bool> {
    let (w, h) = (binary.width(), binary.height());
    let max_gap = height.saturating_sub(1);
    let mut out: Vec<bool> = binary.pixels().iter().map(|&v| v != 0).collect();
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if out[y * w + x] {
                if let Some(prev) = last {
                    let gap = y - prev - 1;
                    if gap > 0 && gap <= max_gap {
                        for yy in prev + 1..y {
                            out[yy * w + x] = true;
                        }
                    }
                }
                last = Some(y);
            }
        }
    }
    out
}

pub fn detect_blobs(binary: &BinaryFrame, min_area_px: usize, band_width_px: f64) -> Vec<Blob> {
    detect_blobs_with(
        binary,
        &DetectOptions {
            min_area_px,
            band_width_px,
            estimator: RadiusEstimator::default(),
        },
    )
}

pub fn detect_blobs_with(binary: &BinaryFrame, opts: &DetectOptions) -> Vec<Blob> {
    let (w, h) = (binary.width(), binary.height());
    let mask = close_vertical(binary, closing_height(opts.band_width_px));
    let mut seen = vec![false; w * h];
    let mut blobs = Vec::new();
    let mut stack = Vec::new();
    let mut pixels: Vec<(usize, usize)> = Vec::new();

    for start in 0..w * h {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        pixels.clear();
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            pixels.push((x, y));
            for ny in y.saturating_sub(1)..=(y + 1).min(h - 1) {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let j = ny * w + nx;
                    if mask[j] && !seen[j] {
                        seen[j] = true;
                        stack.push(j);
                    }
                }
            }
        }
        if pixels.len() < opts.min_area_px.max(1) {
            continue;
        }
        let (cx, cy, r) = match opts.estimator {
            RadiusEstimator::EnclosingCircle => enclosing_circle(&hull_candidates(&pixels)),
            RadiusEstimator::CentroidMaxDistance => centroid_max_distance(&pixels),
        };
        blobs.push(Blob {
            center_x: cx,
            center_y: cy,
            radius_px: r.max(0.5),
            area_px: pixels.len(),
        });
    }
    blobs.sort_by(|a, b| b.area_px.cmp(&a.area_px).then(a.center_x.total_cmp(&b.center_x)));
    blobs
}

fn centroid_max_distance(pixels: &[(usize, usize)]) -> (f64, f64, f64) {
    let n = pixels.len() as f64;
    let (sx, sy) = pixels
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(x, y)| (sx + x as f64, sy + y as f64));
    let (cx, cy) = (sx / n, sy / n);
    let r2 = pixels
        .iter()
        .map(|&(x, y)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2))
        .fold(0.0, f64::max);
    (cx, cy, r2.sqrt())
}

/// Leftmost and rightmost pixel of every row; their hull is the hull of
/// the whole component.
fn hull_candidates(pixels: &[(usize, usize)]) -> Vec<(f64, f64)> {
    let y0 = pixels.iter().map(|p| p.1).min().unwrap_or(0);
    let y1 = pixels.iter().map(|p| p.1).max().unwrap_or(0);
    let mut ext = vec![(usize::MAX, 0usize); y1 - y0 + 1];
    for &(x, y) in pixels {
        let e = &mut ext[y - y0];
        e.0 = e.0.min(x);
        e.1 = e.1.max(x);
    }
    let mut pts = Vec::with_capacity(ext.len() * 2);
    for (i, &(lo, hi)) in ext.iter().enumerate() {
        if lo == usize::MAX {
            continue;
        }
        let y = (y0 + i) as f64;
        pts.push((lo as f64, y));
        if hi != lo {
            pts.push((hi as f64, y));
        }
    }
    convex_hull(pts)
}

fn cross(o: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Andrew's monotone chain.
fn convex_hull(mut pts: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len() * 2);
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

type Circle = (f64, f64, f64);

fn contains(c: Circle, p: (f64, f64)) -> bool {
    let d2 = (p.0 - c.0).powi(2) + (p.1 - c.1).powi(2);
    d2 <= c.2 * c.2 + 1e-7 * (1.0 + c.2 * c.2)
}

fn circle2(a: (f64, f64), b: (f64, f64)) -> Circle {
    let (cx, cy) = ((a.0 + b.0) / 2.0, (a.1 + b.1) / 2.0);
    (cx, cy, ((a.0 - cx).powi(2) + (a.1 - cy).powi(2)).sqrt())
}

fn circle3(a: (f64, f64), b: (f64, f64), c: (f64, f64)) -> Circle {
    let (bx, by) = (b.0 - a.0, b.1 - a.1);
    let (cx, cy) = (c.0 - a.0, c.1 - a.1);
    let d = 2.0 * (bx * cy - by * cx);
    if d.abs() < 1e-12 {
        // collinear: the widest pair spans the circle
        let pairs = [circle2(a, b), circle2(a, c), circle2(b, c)];
        return pairs
            .into_iter()
            .fold((0.0, 0.0, -1.0), |m, p| if p.2 > m.2 { p } else { m });
    }
    let b2 = bx * bx + by * by;
    let c2 = cx * cx + cy * cy;
    let ux = (cy * b2 - by * c2) / d;
    let uy = (bx * c2 - cx * b2) / d;
    (a.0 + ux, a.1 + uy, (ux * ux + uy * uy).sqrt())
}

/// Minimum enclosing circle (incremental Welzl). Points are visited in a
/// fixed pseudo-random order so the result is reproducible.
pub fn enclosing_circle(points: &[(f64, f64)]) -> Circle {
    let mut pts = points.to_vec();
    match pts.len() {
        0 => return (0.0, 0.0, 0.0),
        1 => return (pts[0].0, pts[0].1, 0.0),
        _ => {}
    }
    // xorshift shuffle
    let mut s: u64 = 0x9e37_79b9_7f4a_7c15;
    for i in (1..pts.len()).rev() {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        pts.swap(i, (s % (i as u64 + 1)) as usize);
    }
    let mut c = (pts[0].0, pts[0].1, 0.0);
    for i in 1..pts.len() {
        if contains(c, pts[i]) {
            continue;
        }
        c = (pts[i].0, pts[i].1, 0.0);
        for j in 0..i {
            if contains(c, pts[j]) {
                continue;
            }
            c = circle2(pts[i], pts[j]);
            for k in 0..j {
                if !contains(c, pts[k]) {
                    c = circle3(pts[i], pts[j], pts[k]);
                }
            }
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::Frame;

    fn disc(w: usize, h: usize, discs: &[(f64, f64, f64)]) -> BinaryFrame {
        BinaryFrame::new(Frame::from_fn(w, h, |x, y| {
            let inside = discs
                .iter()
                .any(|&(cx, cy, r)| (x as f64 - cx).powi(2) + (y as f64 - cy).powi(2) <= r * r);
            if inside {
                255
            } else {
                0
            }
        }))
        .unwrap()
    }

    #[test]
    fn solid_disc_both_estimators() {
        let b = disc(200, 160, &[(100.0, 80.0, 50.0)]);
        for estimator in [RadiusEstimator::EnclosingCircle, RadiusEstimator::CentroidMaxDistance] {
            let opts = DetectOptions {
                estimator,
                ..DetectOptions::for_band_width(12.0)
            };
            let blobs = detect_blobs_with(&b, &opts);
            assert_eq!(blobs.len(), 1);
            let blob = blobs[0];
            assert!((blob.center_x - 100.0).abs() <= 1.0);
            assert!((blob.center_y - 80.0).abs() <= 1.0);
            assert!(
                (blob.radius_px - 50.0).abs() <= 2.0,
                "{estimator:?}: {}",
                blob.radius_px
            );
        }
    }

    #[test]
    fn two_discs_sorted_by_area() {
        let b = disc(300, 120, &[(60.0, 60.0, 30.0), (200.0, 60.0, 45.0)]);
        let blobs = detect_blobs(&b, 100, 12.0);
        assert_eq!(blobs.len(), 2);
        assert!((blobs[0].center_x - 200.0).abs() <= 1.0);
        assert!((blobs[1].center_x - 60.0).abs() <= 1.0);
    }

    #[test]
    fn empty_and_speckle() {
        let empty = BinaryFrame::new(Frame::filled(50, 50, 0)).unwrap();
        assert!(detect_blobs(&empty, 1, 12.0).is_empty());
        let mut f = Frame::filled(50, 50, 0);
        f.set(10, 10, 255);
        let speck = BinaryFrame::new(f).unwrap();
        assert!(detect_blobs(&speck, 576, 12.0).is_empty());
        assert_eq!(detect_blobs(&speck, 1, 12.0).len(), 1);
    }

    #[test]
    fn closing_bridges_band_gaps_only() {
        // strips 10 rows tall separated by 30-row gaps, plus a 60-row gap
        let f = Frame::from_fn(40, 200, |_, y| {
            let on = (y < 10) || (40..50).contains(&y) || (110..120).contains(&y);
            if on {
                255
            } else {
                0
            }
        });
        let b = BinaryFrame::new(f).unwrap();
        let blobs = detect_blobs(&b, 1, 12.0);
        assert_eq!(blobs.len(), 2);
        assert_eq!(blobs[0].area_px, 40 * 50);
    }

    #[test]
    fn enclosing_circle_of_square() {
        let pts = [(0.0, 0.0), (2.0, 0.0), (0.0, 2.0), (2.0, 2.0), (1.0, 1.0)];
        let (cx, cy, r) = enclosing_circle(&pts);
        assert!((cx - 1.0).abs() < 1e-9 && (cy - 1.0).abs() < 1e-9);
        assert!((r - 2f64.sqrt()).abs() < 1e-9);
    }
}
