//! Measurement noise and reconstruction quality metrics.

use gksm_core::ComplexVector;

use crate::error::{HarnessError, Result};
use crate::rng::{Purpose, Stream};

/// Adds i.i.d. circular complex Gaussian noise scaled to the requested SNR
/// in dB: `10 log10(||y||^2 / E||n||^2) = snr_db`. An infinite `snr_db`
/// returns the input unchanged.
pub fn add_noise(y: &ComplexVector, snr_db: f64, seed: u64) -> Result<ComplexVector> {
    if snr_db.is_infinite() && snr_db > 0.0 {
        return Ok(y.clone());
    }
    if !snr_db.is_finite() {
        return Err(HarnessError::Config {
            key: "problem.noise_snr_db".into(),
            reason: "must be finite or 'inf'".into(),
        });
    }
    let signal_power = y.norm_sqr();
    if signal_power == 0.0 {
        return Err(HarnessError::Numeric(
            "cannot scale noise to a zero signal".into(),
        ));
    }
    let sigma_sq = signal_power / (y.len() as f64 * 10f64.powf(snr_db / 10.0));
    let sigma = sigma_sq.sqrt();
    let mut stream = Stream::new(seed, Purpose::Noise);
    let data = y
        .iter()
        .map(|&z| z + stream.complex_normal() * sigma)
        .collect();
    Ok(ComplexVector::new(data)?)
}

/// Peak signal-to-noise ratio in dB against a reference normalized to unit
/// peak magnitude: `-10 log10(mean |x - ref|^2)`. Returns +inf on an exact
/// match.
pub fn psnr(x: &ComplexVector, reference: &ComplexVector) -> Result<f64> {
    if x.len() != reference.len() {
        return Err(HarnessError::Core(gksm_core::Error::DimensionMismatch {
            context: "psnr",
            expected: reference.len(),
            actual: x.len(),
        }));
    }
    let mse: f64 = x
        .iter()
        .zip(reference.iter())
        .map(|(a, b)| (a - b).norm_sqr())
        .sum::<f64>()
        / x.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}
