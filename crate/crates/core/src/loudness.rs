//! ITU-R BS.1770 integrated loudness, loudness normalization and EBU loudness
//! range.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::audio::AudioBuffer;
use crate::error::{Error, Result};

const ABSOLUTE_GATE_LUFS: f64 = -70.0;
const RELATIVE_GATE_LU: f64 = -10.0;
const LRA_RELATIVE_GATE_LU: f64 = -20.0;
const BLOCK_SECONDS: f64 = 0.4;
const SHORT_TERM_SECONDS: f64 = 3.0;
const STRIDE_SECONDS: f64 = 0.1;

/// Result of a loudness measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct LoudnessReading {
    /// Gated integrated loudness in LUFS; `None` when every block is gated
    /// out or the input is shorter than one block.
    pub integrated: Option<f64>,
    /// Loudness range in LU (0 when not measurable).
    pub lra: f64,
    /// Ungated short-term loudness, one value per 100 ms stride.
    pub short_term: Vec<f64>,
    pub measurable: bool,
}

impl LoudnessReading {
    pub fn record(&self) -> LoudnessRecord {
        LoudnessRecord {
            integrated_lufs: self.integrated,
            lra_lu: self.lra,
            measurable: self.measurable,
        }
    }
}

/// Serialized form of a [`LoudnessReading`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoudnessRecord {
    pub integrated_lufs: Option<f64>,
    pub lra_lu: f64,
    pub measurable: bool,
}

/// Loudness range and whether enough gated material existed to compute it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoudnessRange {
    pub lu: f64,
    pub measurable: bool,
}

/// Direct-form biquad, `a0` normalized to one.
#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

impl Biquad {
    /// First K-weighting stage: the head-related high shelf.
    fn high_shelf(sample_rate: f64) -> Self {
        let gain_db = 3.999_843_853_973_347;
        let q = 0.707_175_236_955_419_3;
        let center = 1_681.974_450_955_531_9;
        let k = (PI * center / sample_rate).tan();
        let vh = 10f64.powf(gain_db / 20.0);
        let vb = vh.powf(0.499_666_774_154_541_6);
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: (vh + vb * k / q + k * k) / a0,
            b1: 2.0 * (k * k - vh) / a0,
            b2: (vh - vb * k / q + k * k) / a0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    /// Second K-weighting stage: the RLB high-pass.
    fn high_pass(sample_rate: f64) -> Self {
        let q = 0.500_327_037_325_395_3;
        let center = 38.135_470_876_139_82;
        let k = (PI * center / sample_rate).tan();
        let a0 = 1.0 + k / q + k * k;
        Self {
            b0: 1.0,
            b1: -2.0,
            b2: 1.0,
            a1: 2.0 * (k * k - 1.0) / a0,
            a2: (1.0 - k / q + k * k) / a0,
        }
    }

    fn run(&self, input: &[f64]) -> Vec<f64> {
        let (mut x1, mut x2, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0);
        input
            .iter()
            .map(|&x| {
                let y = self.b0 * x + self.b1 * x1 + self.b2 * x2 - self.a1 * y1 - self.a2 * y2;
                x2 = x1;
                x1 = x;
                y2 = y1;
                y1 = y;
                y
            })
            .collect()
    }
}

/// Running sums of the channel-weighted, K-weighted power.
struct WeightedPower {
    prefix: Vec<f64>,
    rate: f64,
}

impl WeightedPower {
    fn new(buffer: &AudioBuffer) -> Self {
        let rate = f64::from(buffer.sample_rate());
        let shelf = Biquad::high_shelf(rate);
        let pass = Biquad::high_pass(rate);
        let mut power = vec![0.0; buffer.len()];
        // Left and right both carry weight 1.
        for channel in buffer.data() {
            let filtered = pass.run(&shelf.run(channel));
            for (p, y) in power.iter_mut().zip(filtered) {
                *p += y * y;
            }
        }
        let mut prefix = Vec::with_capacity(power.len() + 1);
        let mut acc = 0.0;
        prefix.push(0.0);
        for p in power {
            acc += p;
            prefix.push(acc);
        }
        Self { prefix, rate }
    }

    fn len(&self) -> usize {
        self.prefix.len() - 1
    }

    /// Mean weighted power of every `window`-second block, stepping `stride`.
    fn blocks(&self, window: f64, stride: f64) -> Vec<f64> {
        let width = (window * self.rate).round() as usize;
        let step = ((stride * self.rate).round() as usize).max(1);
        if width == 0 || self.len() < width {
            return Vec::new();
        }
        (0..=(self.len() - width) / step)
            .map(|i| {
                let start = i * step;
                (self.prefix[start + width] - self.prefix[start]).max(0.0) / width as f64
            })
            .collect()
    }
}

fn power_to_lufs(power: f64) -> f64 {
    -0.691 + 10.0 * power.log10()
}

fn lufs_to_power(lufs: f64) -> f64 {
    10f64.powf((lufs + 0.691) / 10.0)
}

/// Gated integrated loudness of pre-computed 400 ms block powers.
fn gated_loudness(blocks: &[f64]) -> Option<f64> {
    let above_abs: Vec<f64> = blocks
        .iter()
        .copied()
        .filter(|&p| power_to_lufs(p) > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_abs.is_empty() {
        return None;
    }
    let ungated_mean = above_abs.iter().sum::<f64>() / above_abs.len() as f64;
    let relative_gate = power_to_lufs(ungated_mean) + RELATIVE_GATE_LU;
    let kept: Vec<f64> = above_abs
        .into_iter()
        .filter(|&p| power_to_lufs(p) > relative_gate)
        .collect();
    if kept.is_empty() {
        return None;
    }
    Some(power_to_lufs(kept.iter().sum::<f64>() / kept.len() as f64))
}

/// Percentile with linear interpolation between closest ranks.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn range_of(short_term: &[f64]) -> LoudnessRange {
    let above_abs: Vec<f64> = short_term
        .iter()
        .copied()
        .filter(|&l| l > ABSOLUTE_GATE_LUFS)
        .collect();
    if above_abs.is_empty() {
        return LoudnessRange {
            lu: 0.0,
            measurable: false,
        };
    }
    let mean_power =
        above_abs.iter().map(|&l| lufs_to_power(l)).sum::<f64>() / above_abs.len() as f64;
    let gate = power_to_lufs(mean_power) + LRA_RELATIVE_GATE_LU;
    let mut kept: Vec<f64> = above_abs.into_iter().filter(|&l| l > gate).collect();
    if kept.is_empty() {
        return LoudnessRange {
            lu: 0.0,
            measurable: false,
        };
    }
    kept.sort_by(f64::total_cmp);
    LoudnessRange {
        lu: (percentile(&kept, 95.0) - percentile(&kept, 10.0)).max(0.0),
        measurable: true,
    }
}

/// Full BS.1770 measurement: integrated loudness, short-term series and LRA.
pub fn integrated_loudness(buffer: &AudioBuffer) -> LoudnessReading {
    let power = WeightedPower::new(buffer);
    let integrated = gated_loudness(&power.blocks(BLOCK_SECONDS, STRIDE_SECONDS));
    let short_term: Vec<f64> = power
        .blocks(SHORT_TERM_SECONDS, STRIDE_SECONDS)
        .into_iter()
        .map(power_to_lufs)
        .collect();
    let lra = range_of(&short_term).lu;
    LoudnessReading {
        integrated,
        lra,
        short_term,
        measurable: integrated.is_some(),
    }
}

/// EBU loudness range over 3 s short-term windows with a 100 ms stride.
pub fn loudness_range(buffer: &AudioBuffer) -> LoudnessRange {
    let power = WeightedPower::new(buffer);
    let short_term: Vec<f64> = power
        .blocks(SHORT_TERM_SECONDS, STRIDE_SECONDS)
        .into_iter()
        .map(power_to_lufs)
        .collect();
    range_of(&short_term)
}

/// Scales `buffer` to `target` LUFS. Returns the scaled buffer and the applied
/// gain in dB. No clipping is applied.
pub fn loudness_normalize_with_gain(buffer: &AudioBuffer, target: f64) -> Result<(AudioBuffer, f64)> {
    let power = WeightedPower::new(buffer);
    let measured = gated_loudness(&power.blocks(BLOCK_SECONDS, STRIDE_SECONDS)).ok_or_else(|| {
        Error::Normalization("input has no measurable loudness (silent or shorter than 400 ms)".into())
    })?;
    let gain_db = target - measured;
    Ok((buffer.scaled(10f64.powf(gain_db / 20.0)), gain_db))
}

pub fn loudness_normalize(buffer: &AudioBuffer, target: f64) -> Result<AudioBuffer> {
    loudness_normalize_with_gain(buffer, target).map(|(b, _)| b)
}
