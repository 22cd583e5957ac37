//! The "CIMG1" complex image file: an ASCII header line
//! `CIMG1 <rows> <cols>\n` followed by rows*cols interleaved (real, imag)
//! little-endian f64 pairs in row-major order.

use std::io::Read;
use std::path::Path;

use gksm_core::{Complex64, ComplexVector};

use crate::error::{HarnessError, Result};

pub fn write_cimg(path: &Path, rows: usize, cols: usize, data: &ComplexVector) -> Result<()> {
    if data.len() != rows * cols {
        return Err(HarnessError::Numeric(format!(
            "image length {} does not match {rows} x {cols}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(32 + 16 * data.len());
    out.extend_from_slice(format!("CIMG1 {rows} {cols}\n").as_bytes());
    for z in data.iter() {
        out.extend_from_slice(&z.re.to_le_bytes());
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    std::fs::write(path, out).map_err(|e| HarnessError::io(path.display().to_string(), e))
}

pub fn read_cimg(path: &Path) -> Result<(usize, usize, ComplexVector)> {
    let mut file = std::fs::File::open(path)
        .map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    let mut bytes = Vec::new();
    file.read_to_end(&mut bytes)
        .map_err(|e| HarnessError::io(path.display().to_string(), e))?;
    let newline = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| HarnessError::Numeric("missing CIMG1 header line".into()))?;
    let header = std::str::from_utf8(&bytes[..newline])
        .map_err(|_| HarnessError::Numeric("non-UTF8 CIMG1 header".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("CIMG1") {
        return Err(HarnessError::Numeric("not a CIMG1 file".into()));
    }
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::Numeric("bad CIMG1 rows".into()))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| HarnessError::Numeric("bad CIMG1 cols".into()))?;
    let payload = &bytes[newline + 1..];
    if payload.len() != rows * cols * 16 {
        return Err(HarnessError::Numeric(format!(
            "CIMG1 payload has {} bytes, expected {}",
            payload.len(),
            rows * cols * 16
        )));
    }
    let mut data = Vec::with_capacity(rows * cols);
    for chunk in payload.chunks_exact(16) {
        let re = f64::from_le_bytes(chunk[0..8].try_into().unwrap());
        let im = f64::from_le_bytes(chunk[8..16].try_into().unwrap());
        data.push(Complex64::new(re, im));
    }
    Ok((rows, cols, ComplexVector::new(data)?))
}

/// Writes a PNG of the image magnitude (linear gray scale), for quick looks.
pub fn write_magnitude_png(path: &Path, rows: usize, cols: usize, data: &ComplexVector) -> Result<()> {
    let peak = data.max_abs().max(f64::MIN_POSITIVE);
    let pixels: Vec<u8> = data
        .iter()
        .map(|z| ((z.norm() / peak).clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let img = image::GrayImage::from_raw(cols as u32, rows as u32, pixels)
        .ok_or_else(|| HarnessError::Numeric("image buffer size mismatch".into()))?;
    img.save(path)
        .map_err(|e| HarnessError::Numeric(format!("png write failed: {e}")))
}
