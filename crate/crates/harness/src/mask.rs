//! k-space sampling masks over the unshifted DFT grid (DC at index (0,0)).
//! Geometry (center bands, radial lines) is specified in the centered view
//! and mapped back with an fftshift.

use crate::error::{HarnessError, Result};
use crate::rng::{Purpose, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskKind {
    /// Fully sampled center rows plus variable-density random rows.
    CartesianVd,
    /// Equally spaced diameters through the k-space center, rasterized.
    PseudoRadial,
    Full,
}

/// Maps a centered row index to the unshifted grid.
fn unshift(idx: usize, len: usize) -> usize {
    (idx + len - len / 2) % len
}

/// Builds the retained-sample bitmap, row-major over the h x w grid.
/// Deterministic per seed; the retained fraction for `cartesian_vd` is the
/// rounded row count `h / acceleration`.
pub fn generate_mask(
    height: usize,
    width: usize,
    kind: MaskKind,
    acceleration: f64,
    seed: u64,
) -> Result<Vec<bool>> {
    if acceleration < 1.0 || !acceleration.is_finite() {
        return Err(HarnessError::Config {
            key: "problem.acceleration".into(),
            reason: "must be at least 1".into(),
        });
    }
    let n = height * width;
    match kind {
        MaskKind::Full => Ok(vec![true; n]),
        MaskKind::CartesianVd => {
            let target_rows = (height as f64 / acceleration).round() as usize;
            let band = ((height as f64) * 0.08).ceil() as usize;
            let band = band.max(1);
            if target_rows < band || target_rows == 0 {
                return Err(HarnessError::Config {
                    key: "problem.acceleration".into(),
                    reason: format!(
                        "acceleration {acceleration} leaves fewer rows than the {band}-row center band"
                    ),
                });
            }
            let mut keep_row = vec![false; height];
            // Center band around DC in the shifted view.
            let half = height / 2;
            let lo = half - band / 2;
            for i in 0..band {
                keep_row[unshift(lo + i, height)] = true;
            }
            // Variable-density extra rows: weight falls off with distance
            // from the center; sample without replacement.
            let mut stream = Stream::new(seed, Purpose::Mask);
            let mut kept = band;
            let mut weights: Vec<(usize, f64)> = (0..height)
                .filter(|&shifted| {
                    let row = unshift(shifted, height);
                    !keep_row[row]
                })
                .map(|shifted| {
                    let d = (shifted as f64 - half as f64).abs() / half as f64;
                    (shifted, (-(d * d) / 0.25).exp() + 0.02)
                })
                .collect();
            while kept < target_rows && !weights.is_empty() {
                let total: f64 = weights.iter().map(|&(_, w)| w).sum();
                let mut draw = stream.uniform() * total;
                let mut pick = weights.len() - 1;
                for (i, &(_, w)) in weights.iter().enumerate() {
                    if draw < w {
                        pick = i;
                        break;
                    }
                    draw -= w;
                }
                let (shifted, _) = weights.swap_remove(pick);
                keep_row[unshift(shifted, height)] = true;
                kept += 1;
            }
            let mut mask = vec![false; n];
            for r in 0..height {
                if keep_row[r] {
                    for c in 0..width {
                        mask[r * width + c] = true;
                    }
                }
            }
            Ok(mask)
        }
        MaskKind::PseudoRadial => {
            let n_lines = ((height as f64 * std::f64::consts::FRAC_PI_2) / acceleration).ceil()
                as usize;
            if n_lines == 0 {
                return Err(HarnessError::Config {
                    key: "problem.acceleration".into(),
                    reason: "acceleration too high: no radial lines remain".into(),
                });
            }
            let mut mask = vec![false; n];
            let cx = width as f64 / 2.0;
            let cy = height as f64 / 2.0;
            let radius = (width.max(height)) as f64 * std::f64::consts::FRAC_1_SQRT_2;
            let steps = 4 * width.max(height);
            for j in 0..n_lines {
                let theta = std::f64::consts::PI * j as f64 / n_lines as f64;
                let (s, c) = theta.sin_cos();
                for t in 0..=steps {
                    let tt = -1.0 + 2.0 * t as f64 / steps as f64;
                    let px = cx + tt * radius * c;
                    let py = cy + tt * radius * s;
                    let col = px.round() as isize;
                    let row = py.round() as isize;
                    if row >= 0 && row < height as isize && col >= 0 && col < width as isize {
                        let rr = unshift(row as usize, height);
                        let cc = unshift(col as usize, width);
                        mask[rr * width + cc] = true;
                    }
                }
            }
            Ok(mask)
        }
    }
}

pub fn retained_fraction(mask: &[bool]) -> f64 {
    mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64
}
