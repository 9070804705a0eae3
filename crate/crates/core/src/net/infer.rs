use serde::{Deserialize, Serialize};

use super::model::Model;
use super::train::{stack, unstack};
use crate::audio::AudioBuffer;
use crate::dynamics::parallel_mix;
use crate::error::{Error, Result};
use crate::loudness::loudness_normalize;

pub const DEFAULT_TARGET_LUFS: f64 = -14.0;
pub const CHUNK_SECONDS: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferOptions {
    pub target_lufs: f64,
    /// Share of the limited input in the final blend.
    pub parallel_ratio: Option<f64>,
    /// Estimated activation memory above which inference runs in chunks.
    pub memory_budget_bytes: u64,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self {
            target_lufs: DEFAULT_TARGET_LUFS,
            parallel_ratio: None,
            memory_budget_bytes: 1 << 30,
        }
    }
}

/// Rough size of the activations kept by one forward pass.
pub fn activation_bytes(model: &Model, samples: usize) -> u64 {
    let c = model.config();
    let frames = c.frames(samples) as u64;
    let blocks = (c.blocks * c.repeats) as u64;
    let per_frame = 4 * c.basis as u64 + c.bottleneck as u64 * (1 + 4 * blocks) + c.hidden as u64 * 6 * blocks;
    let per_sample = 6 * c.channels as u64;
    8 * (frames * per_frame + samples as u64 * per_sample)
}

fn check_input(model: &Model, buffer: &AudioBuffer) -> Result<()> {
    let c = model.config();
    if buffer.sample_rate() != c.sample_rate {
        return Err(Error::Config(format!(
            "input is {} Hz but the checkpoint was trained at {} Hz",
            buffer.sample_rate(),
            c.sample_rate
        )));
    }
    if buffer.channels() != c.channels {
        return Err(Error::Config(format!(
            "input has {} channels but the checkpoint expects {}",
            buffer.channels(),
            c.channels
        )));
    }
    Ok(())
}

fn single_pass(model: &Model, buffer: &AudioBuffer) -> Result<AudioBuffer> {
    let (y, _) = model.forward(&stack(&[buffer])?)?;
    Ok(unstack(&y, buffer.sample_rate())?.remove(0))
}

/// Network output before loudness normalization. Runs over the whole signal
/// at once unless that exceeds `budget` bytes, in which case it processes
/// 30 s chunks with 50% overlap joined by linear crossfades.
pub fn delimit(model: &Model, buffer: &AudioBuffer, budget: u64) -> Result<AudioBuffer> {
    check_input(model, buffer)?;
    let chunk = (CHUNK_SECONDS * f64::from(buffer.sample_rate())) as usize;
    if activation_bytes(model, buffer.len()) <= budget || buffer.len() <= chunk {
        return single_pass(model, buffer);
    }
    log::warn!(
        "input of {:.1} s exceeds the single-pass memory budget; processing {CHUNK_SECONDS} s chunks with 50% overlap",
        buffer.duration_secs()
    );
    let hop = chunk / 2;
    let len = buffer.len();
    let mut starts: Vec<usize> = (0..).map(|k| k * hop).take_while(|&s| s + chunk < len).collect();
    starts.push(len.saturating_sub(chunk));
    starts.dedup();

    let channels = buffer.channels();
    let mut acc = vec![vec![0.0; len]; channels];
    let mut weight = vec![0.0; len];
    for (k, &start) in starts.iter().enumerate() {
        let piece = buffer.slice(start, chunk.min(len - start))?;
        let out = single_pass(model, &piece)?;
        let n = out.len();
        let fade_in = if k == 0 { 0 } else { (starts[k - 1] + chunk).saturating_sub(start).min(n) };
        let fade_out = match starts.get(k + 1) {
            Some(&next) => (start + n).saturating_sub(next).min(n),
            None => 0,
        };
        for i in 0..n {
            let mut w = 1.0;
            if i < fade_in {
                w *= (i as f64 + 0.5) / fade_in as f64;
            }
            if i >= n - fade_out {
                w *= (n - i) as f64 / (fade_out as f64 + 0.5);
            }
            weight[start + i] += w;
            for (c, row) in acc.iter_mut().enumerate() {
                row[start + i] += w * out.channel(c)[i];
            }
        }
    }
    for row in &mut acc {
        for (v, w) in row.iter_mut().zip(&weight) {
            *v /= w;
        }
    }
    AudioBuffer::new(buffer.sample_rate(), acc)
}

/// De-limits `buffer`, normalizes to the target loudness and optionally
/// blends with the normalized input.
pub fn infer(model: &Model, buffer: &AudioBuffer, options: &InferOptions) -> Result<AudioBuffer> {
    let raw = delimit(model, buffer, options.memory_budget_bytes)?;
    let out = loudness_normalize(&raw, options.target_lufs)?;
    match options.parallel_ratio {
        None => Ok(out),
        Some(ratio) => {
            let input = loudness_normalize(buffer, options.target_lufs)?;
            let mixed = parallel_mix(&input, &out, ratio)?;
            loudness_normalize(&mixed, options.target_lufs)
        }
    }
}
