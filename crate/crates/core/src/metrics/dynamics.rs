use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::spectral::{magnitude_spectrogram, Window};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::loudness;

const LEVEL_FRAME_SECONDS: f64 = 1.0;
const LEVEL_FLOOR_DBFS: f64 = -60.0;
const CENTROID_FFT: usize = 2048;
const CENTROID_HOP: usize = CENTROID_FFT / 4;

/// Dynamic and spectral statistics of one signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub rms: f64,
    pub crest_factor: f64,
    /// Mean absolute deviation of 1 s frame levels from their mean, in dB.
    pub dynamic_complexity: f64,
    /// EBU loudness range in LU.
    pub lra: f64,
    pub spectral_centroid: f64,
}

fn level_db(mean_square: f64) -> f64 {
    10.0 * mean_square.log10()
}

fn frame_mean_square(buffer: &AudioBuffer, start: usize, len: usize) -> f64 {
    let sum: f64 = buffer
        .data()
        .iter()
        .map(|c| c[start..start + len].iter().map(|s| s * s).sum::<f64>())
        .sum();
    sum / (len * buffer.channels()) as f64
}

/// Frame levels in dBFS over back-to-back 1 s frames, quiet frames dropped.
fn frame_levels(buffer: &AudioBuffer) -> Vec<f64> {
    let width = (LEVEL_FRAME_SECONDS * f64::from(buffer.sample_rate())).round() as usize;
    if width == 0 || buffer.len() < width {
        return Vec::new();
    }
    (0..buffer.len() / width)
        .map(|i| level_db(frame_mean_square(buffer, i * width, width)))
        .filter(|&l| l >= LEVEL_FLOOR_DBFS)
        .collect()
}

fn dynamic_complexity(buffer: &AudioBuffer) -> f64 {
    let levels = frame_levels(buffer);
    if levels.is_empty() {
        return 0.0;
    }
    let mean = levels.iter().sum::<f64>() / levels.len() as f64;
    levels.iter().map(|l| (l - mean).abs()).sum::<f64>() / levels.len() as f64
}

fn spectral_centroid(buffer: &AudioBuffer) -> Result<f64> {
    let mut planner = FftPlanner::new();
    let per_channel: Vec<Vec<Vec<f64>>> = buffer
        .data()
        .iter()
        .map(|c| magnitude_spectrogram(c, CENTROID_FFT, CENTROID_HOP, Window::Hann, &mut planner))
        .collect();
    let frames = per_channel[0].len();
    let bin_hz = f64::from(buffer.sample_rate()) / CENTROID_FFT as f64;
    let mut sum = 0.0;
    let mut used = 0usize;
    for f in 0..frames {
        let start = f * CENTROID_HOP;
        if level_db(frame_mean_square(buffer, start, CENTROID_FFT)) < LEVEL_FLOOR_DBFS {
            continue;
        }
        let (mut weighted, mut total) = (0.0, 0.0);
        for k in 0..=CENTROID_FFT / 2 {
            let m: f64 = per_channel.iter().map(|ch| ch[f][k]).sum();
            weighted += m * k as f64 * bin_hz;
            total += m;
        }
        if total > 0.0 {
            sum += weighted / total;
            used += 1;
        }
    }
    if used == 0 {
        return Err(Error::UndefinedMetric(
            "spectral centroid needs at least one non-silent 2048-sample frame".into(),
        ));
    }
    Ok(sum / used as f64)
}

pub fn dynamics_report(buffer: &AudioBuffer) -> Result<DynamicsReport> {
    let n = (buffer.len() * buffer.channels()) as f64;
    let energy: f64 = buffer.data().iter().flatten().map(|s| s * s).sum();
    if energy == 0.0 || n == 0.0 {
        return Err(Error::UndefinedMetric(
            "crest factor and centroid are undefined for silence".into(),
        ));
    }
    let rms = (energy / n).sqrt();
    let crest_factor = (buffer.peak() / rms).max(1.0);
    Ok(DynamicsReport {
        rms,
        crest_factor,
        dynamic_complexity: dynamic_complexity(buffer),
        lra: loudness::loudness_range(buffer).lu,
        spectral_centroid: spectral_centroid(buffer)?,
    })
}
