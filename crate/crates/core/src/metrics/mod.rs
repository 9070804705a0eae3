//! Objective evaluation metrics: SI-SDR, multi-resolution spectrogram MSE,
//! dynamics statistics and model cost counters.

mod cost;
mod dynamics;
mod spectral;

pub use cost::{conv1d_macs, conv1d_params, conv_transpose1d_macs, count_macs, count_macs_for_samples, count_params};
pub use dynamics::{dynamics_report, DynamicsReport};
pub use spectral::{magnitude_spectrogram, multires_spec_mse, SpecConfig, Window};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

/// Reported SI-SDR values are clamped to `[-SI_SDR_CAP_DB, SI_SDR_CAP_DB]`.
pub const SI_SDR_CAP_DB: f64 = 100.0;

/// Uncapped SI-SDR in dB between two equally long vectors. Perfect
/// reconstruction gives `+inf`.
pub fn si_sdr_raw(estimate: &[f64], reference: &[f64]) -> Result<f64> {
    if estimate.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "estimate has {} samples, reference {}",
            estimate.len(),
            reference.len()
        )));
    }
    let ref_energy: f64 = reference.iter().map(|s| s * s).sum();
    if ref_energy == 0.0 {
        return Err(Error::UndefinedMetric("SI-SDR reference is all zeros".into()));
    }
    let dot: f64 = estimate.iter().zip(reference).map(|(e, s)| e * s).sum();
    let alpha = dot / ref_energy;
    let target_energy = alpha * alpha * ref_energy;
    let noise_energy: f64 = estimate
        .iter()
        .zip(reference)
        .map(|(e, s)| {
            let d = alpha * s - e;
            d * d
        })
        .sum();
    Ok(10.0 * (target_energy / noise_energy).log10())
}

/// SI-SDR in dB with channels concatenated into one vector, clamped to
/// +/-[`SI_SDR_CAP_DB`].
pub fn si_sdr(estimate: &AudioBuffer, reference: &AudioBuffer) -> Result<f64> {
    if estimate.channels() != reference.channels() || estimate.len() != reference.len() {
        return Err(Error::Dimension(format!(
            "SI-SDR shapes {}x{} vs {}x{}",
            estimate.channels(),
            estimate.len(),
            reference.channels(),
            reference.len()
        )));
    }
    let raw = si_sdr_raw(&estimate.concatenated(), &reference.concatenated())?;
    Ok(cap(raw))
}

pub(crate) fn cap(db: f64) -> f64 {
    if db.is_nan() {
        -SI_SDR_CAP_DB
    } else {
        db.clamp(-SI_SDR_CAP_DB, SI_SDR_CAP_DB)
    }
}
