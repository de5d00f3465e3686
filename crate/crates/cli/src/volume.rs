//! Cost volumes on disk and 16-bit disparity maps.
//!
//! Volume layout, little endian: `MCV1`, width, height and label count as
//! `u32`, the label range `a`, `b` as `f64`, then `width * height * labels`
//! `f32` costs in row-major pixel order with the label varying fastest.

use crate::error::{CliError, Result};
use moment_mrf::poly::Interval;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"MCV1";
const HEADER_LEN: usize = 4 + 3 * 4 + 2 * 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub labels: usize,
    pub range: Interval,
    pub values: Vec<f32>,
}

impl CostVolume {
    pub fn new(width: usize, height: usize, labels: usize, range: Interval, values: Vec<f32>) -> Result<Self> {
        if labels < 2 {
            return Err(CliError::Malformed("need at least two labels".into()));
        }
        if values.len() != width * height * labels {
            return Err(CliError::Malformed(format!("{} values for {width}x{height}x{labels}", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CliError::Malformed("non-finite cost".into()));
        }
        Ok(Self { width, height, labels, range, values })
    }

    /// Position of label `l` in `[a, b]`.
    pub fn label_value(&self, l: usize) -> f64 {
        if l + 1 == self.labels {
            return self.range.b;
        }
        self.range.a + self.range.width() * l as f64 / (self.labels - 1) as f64
    }

    pub fn cost(&self, row: usize, col: usize, l: usize) -> f32 {
        self.values[(row * self.width + col) * self.labels + l]
    }

    /// `(label value, cost)` pairs of one pixel.
    pub fn samples(&self, row: usize, col: usize) -> Vec<(f64, f64)> {
        (0..self.labels).map(|l| (self.label_value(l), self.cost(row, col, l) as f64)).collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.values.len());
        out.extend_from_slice(MAGIC);
        for d in [self.width, self.height, self.labels] {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.range.a.to_le_bytes());
        out.extend_from_slice(&self.range.b.to_le_bytes());
        for v in &self.values {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(CliError::Malformed("missing MCV1 header".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
        let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let (w, h, l) = (u32_at(4), u32_at(8), u32_at(12));
        let range = Interval::new(f64_at(16), f64_at(24)).map_err(|_| CliError::Malformed("bad label range".into()))?;
        let n = w
            .checked_mul(h)
            .and_then(|x| x.checked_mul(l))
            .ok_or_else(|| CliError::Malformed("dimensions overflow".into()))?;
        let body = &bytes[HEADER_LEN..];
        if body.len() != 4 * n {
            return Err(CliError::Malformed(format!("expected {} payload bytes, found {}", 4 * n, body.len())));
        }
        let values = body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(w, h, l, range, values)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::File::create(path)?.write_all(&self.to_bytes())?;
        Ok(())
    }
}

/// Binary 16-bit PGM of labels in row-major order, `[a, b]` mapped onto
/// `[0, 65535]`.
pub fn pgm_bytes(labels: &[f64], width: usize, height: usize, range: &Interval) -> Vec<u8> {
    let mut out = format!("P5\n{width} {height}\n65535\n").into_bytes();
    for &x in labels {
        let t = ((x - range.a) / range.width()).clamp(0.0, 1.0);
        out.extend_from_slice(&((t * 65535.0).round() as u16).to_be_bytes());
    }
    out
}
