use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    /// Periodic Hann.
    Hann,
    Rectangular,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / len as f64).cos())
                .collect(),
            Window::Rectangular => vec![1.0; len],
        }
    }
}

/// Resolutions of the multi-resolution spectrogram distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecConfig {
    pub fft_sizes: Vec<usize>,
    /// Hop as a fraction of the window length.
    pub hop_ratio: f64,
    pub window: Window,
}

impl Default for SpecConfig {
    fn default() -> Self {
        Self {
            fft_sizes: vec![512, 1024, 2048],
            hop_ratio: 0.25,
            window: Window::Hann,
        }
    }
}

impl SpecConfig {
    pub fn validate(&self) -> Result<()> {
        if self.fft_sizes.is_empty() || self.fft_sizes.iter().any(|&n| !n.is_power_of_two()) {
            return Err(Error::Config(format!(
                "FFT sizes must be a non-empty set of powers of two, got {:?}",
                self.fft_sizes
            )));
        }
        if !(self.hop_ratio > 0.0 && self.hop_ratio <= 1.0) {
            return Err(Error::Config(format!("hop ratio {} outside (0, 1]", self.hop_ratio)));
        }
        Ok(())
    }

    pub fn hop(&self, fft_size: usize) -> usize {
        ((fft_size as f64 * self.hop_ratio).round() as usize).max(1)
    }
}

/// Magnitudes `[frame][bin]` of one channel; frames start at `0, hop, ...`
/// and must fit entirely inside the signal. Bins run `0..=fft_size / 2`.
pub fn magnitude_spectrogram(
    samples: &[f64],
    fft_size: usize,
    hop: usize,
    window: Window,
    planner: &mut FftPlanner<f64>,
) -> Vec<Vec<f64>> {
    if samples.len() < fft_size {
        return Vec::new();
    }
    let fft = planner.plan_fft_forward(fft_size);
    let taper = window.coefficients(fft_size);
    let mut scratch = vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    let mut frame = vec![Complex::new(0.0, 0.0); fft_size];
    (0..=(samples.len() - fft_size) / hop)
        .map(|i| {
            let start = i * hop;
            for ((slot, s), w) in frame.iter_mut().zip(&samples[start..start + fft_size]).zip(&taper) {
                *slot = Complex::new(s * w, 0.0);
            }
            fft.process_with_scratch(&mut frame, &mut scratch);
            frame[..=fft_size / 2].iter().map(|c| c.norm()).collect()
        })
        .collect()
}

/// Mean over resolutions of the mean squared difference between magnitude
/// spectrograms (all bins, frames and channels).
pub fn multires_spec_mse(estimate: &AudioBuffer, reference: &AudioBuffer, cfg: &SpecConfig) -> Result<f64> {
    cfg.validate()?;
    estimate.check_same_shape(reference, "multi-resolution spectrogram MSE")?;
    let largest = *cfg.fft_sizes.iter().max().unwrap();
    if reference.len() < largest {
        return Err(Error::Metric(format!(
            "signal of {} samples shorter than the {largest}-sample window",
            reference.len()
        )));
    }
    let mut planner = FftPlanner::new();
    let mut total = 0.0;
    for &size in &cfg.fft_sizes {
        let hop = cfg.hop(size);
        let mut sum = 0.0;
        let mut count = 0usize;
        for c in 0..reference.channels() {
            let est = magnitude_spectrogram(estimate.channel(c), size, hop, cfg.window, &mut planner);
            let refr = magnitude_spectrogram(reference.channel(c), size, hop, cfg.window, &mut planner);
            for (fe, fr) in est.iter().zip(&refr) {
                for (a, b) in fe.iter().zip(fr) {
                    sum += (a - b) * (a - b);
                    count += 1;
                }
            }
        }
        total += sum / count as f64;
    }
    Ok(total / cfg.fft_sizes.len() as f64)
}
