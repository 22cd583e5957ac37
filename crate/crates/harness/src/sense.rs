//! Synthetic coil sensitivity maps: smooth Gaussian magnitude bumps with a
//! linear phase per coil, normalized so the pointwise sum of squares is one.

use gksm_core::{Complex64, ComplexVector};

use crate::error::{HarnessError, Result};
use crate::rng::{Purpose, Stream};

pub fn generate_sensitivities(
    height: usize,
    width: usize,
    num_coils: usize,
    seed: u64,
) -> Result<Vec<ComplexVector>> {
    if num_coils == 0 {
        return Err(HarnessError::Config {
            key: "problem.num_coils".into(),
            reason: "at least one coil required".into(),
        });
    }
    let mut stream = Stream::new(seed, Purpose::Sensitivities);
    let n = height * width;

    // Coil centers roughly around the field of view; widths broad enough
    // that no pixel is left uncovered.
    let params: Vec<(f64, f64, f64, f64, f64)> = (0..num_coils)
        .map(|c| {
            let angle = std::f64::consts::TAU * (c as f64 / num_coils as f64)
                + stream.uniform_in(-0.2, 0.2);
            let cx = 0.8 * angle.cos();
            let cy = 0.8 * angle.sin();
            let sigma = stream.uniform_in(0.6, 1.0);
            let px = stream.uniform_in(-1.5, 1.5);
            let py = stream.uniform_in(-1.5, 1.5);
            (cx, cy, sigma, px, py)
        })
        .collect();

    let mut maps: Vec<Vec<Complex64>> = vec![vec![Complex64::new(0.0, 0.0); n]; num_coils];
    for p in 0..n {
        let (r, cc) = (p / width, p % width);
        let u = -1.0 + 2.0 * (cc as f64 + 0.5) / width as f64;
        let v = 1.0 - 2.0 * (r as f64 + 0.5) / height as f64;
        let mut sos = 0.0;
        for (c, &(cx, cy, sigma, px, py)) in params.iter().enumerate() {
            let d2 = (u - cx).powi(2) + (v - cy).powi(2);
            let mag = (-d2 / (2.0 * sigma * sigma)).exp();
            let phase = px * u + py * v;
            let z = Complex64::from_polar(mag, phase);
            maps[c][p] = z;
            sos += z.norm_sqr();
        }
        let scale = sos.sqrt();
        for map in maps.iter_mut() {
            map[p] /= scale;
        }
    }

    maps.into_iter()
        .map(|m| ComplexVector::new(m).map_err(HarnessError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coil_has_unit_magnitude() {
        let maps = generate_sensitivities(16, 16, 1, 0).unwrap();
        for z in maps[0].iter() {
            assert!((z.norm() - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn sum_of_squares_is_one_pointwise() {
        let maps = generate_sensitivities(24, 20, 4, 3).unwrap();
        let n = 24 * 20;
        for p in 0..n {
            let sos: f64 = maps.iter().map(|m| m[p].norm_sqr()).sum();
            assert!((sos - 1.0).abs() <= 1e-12, "pixel {p}: sos {sos}");
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_sensitivities(16, 16, 3, 9).unwrap();
        let b = generate_sensitivities(16, 16, 3, 9).unwrap();
        assert_eq!(a, b);
    }
}
