//! 8-bit grayscale rasters and binary PGM (`P5`) I/O.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("not a binary PGM (magic {0:?})")]
    BadMagic(String),
    #[error("malformed PGM header: {0}")]
    Header(&'static str),
    #[error("unsupported maxval {0}, only 255 is supported")]
    MaxVal(u32),
    #[error("pixel data truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("pixel buffer of {len} bytes does not match {width}x{height}")]
pub struct FrameSizeError {
    pub width: usize,
    pub height: usize,
    pub len: usize,
}

/// Row-major 8-bit intensity raster.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self, FrameSizeError> {
        if pixels.len() != width * height {
            return Err(FrameSizeError {
                width,
                height,
                len: pixels.len(),
            });
        }
        Ok(Frame { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Frame {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> u8) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Frame { width, height, pixels }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [u8] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<u8> {
        self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.pixels[y * self.width + x] = v;
    }

    pub fn row(&self, y: usize) -> &[u8] {
        &self.pixels[y * self.width..(y + 1) * self.width]
    }

    pub fn to_pgm_bytes(&self) -> Vec<u8> {
        let header = format!("P5\n{} {}\n255\n", self.width, self.height);
        let mut out = Vec::with_capacity(header.len() + self.pixels.len());
        out.extend_from_slice(header.as_bytes());
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn from_pgm_bytes(data: &[u8]) -> Result<Self, PgmError> {
        let mut pos = 0;
        let magic = next_token(data, &mut pos).ok_or(PgmError::Header("missing magic"))?;
        if magic != b"P5" {
            return Err(PgmError::BadMagic(String::from_utf8_lossy(magic).into_owned()));
        }
        let width = parse_u32(next_token(data, &mut pos), "width")? as usize;
        let height = parse_u32(next_token(data, &mut pos), "height")? as usize;
        let maxval = parse_u32(next_token(data, &mut pos), "maxval")?;
        if maxval != 255 {
            return Err(PgmError::MaxVal(maxval));
        }
        if width == 0 || height == 0 {
            return Err(PgmError::Header("zero dimension"));
        }
        // exactly one whitespace byte separates maxval from the raster
        if pos >= data.len() || !data[pos].is_ascii_whitespace() {
            return Err(PgmError::Header("missing separator before raster"));
        }
        pos += 1;
        let expected = width * height;
        let raster = &data[pos..];
        if raster.len() < expected {
            return Err(PgmError::Truncated {
                expected,
                found: raster.len(),
            });
        }
        Ok(Frame {
            width,
            height,
            pixels: raster[..expected].to_vec(),
        })
    }

    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<(), PgmError> {
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        f.write_all(&self.to_pgm_bytes())?;
        f.flush()?;
        Ok(())
    }

    pub fn read_pgm(path: impl AsRef<Path>) -> Result<Self, PgmError> {
        Frame::from_pgm_bytes(&fs::read(path)?)
    }
}

fn next_token<'a>(data: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (*pos > start).then(|| &data[start..*pos])
}

fn parse_u32(tok: Option<&[u8]>, what: &'static str) -> Result<u32, PgmError> {
    tok.and_then(|t| std::str::from_utf8(t).ok())
        .and_then(|s| s.parse().ok())
        .ok_or(PgmError::Header(what))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_with_comment() {
        let f = Frame::from_fn(5, 3, |x, y| (x * 40 + y) as u8);
        let bytes = f.to_pgm_bytes();
        assert!(bytes.starts_with(b"P5\n5 3\n255\n"));
        assert_eq!(Frame::from_pgm_bytes(&bytes).unwrap(), f);

        let mut commented = b"P5\n# made by hand\n5 3\n255\n".to_vec();
        commented.extend_from_slice(f.pixels());
        assert_eq!(Frame::from_pgm_bytes(&commented).unwrap(), f);
    }

    #[test]
    fn pgm_rejects_malformed() {
        assert!(matches!(
            Frame::from_pgm_bytes(b"P2\n1 1\n255\n0"),
            Err(PgmError::BadMagic(_))
        ));
        assert!(matches!(
            Frame::from_pgm_bytes(b"P5\n2 2\n255\n\x00\x01"),
            Err(PgmError::Truncated { expected: 4, found: 2 })
        ));
        assert!(matches!(
            Frame::from_pgm_bytes(b"P5\n1 1\n65535\n\x00\x00"),
            Err(PgmError::MaxVal(65535))
        ));
        assert!(matches!(
            Frame::from_pgm_bytes(b"P5\nx 1\n255\n\x00"),
            Err(PgmError::Header("width"))
        ));
        assert!(Frame::from_pgm_bytes(b"").is_err());
    }

    #[test]
    fn size_checked() {
        assert!(Frame::new(3, 3, vec![0; 8]).is_err());
        assert!(Frame::new(3, 3, vec![0; 9]).is_ok());
    }
}
