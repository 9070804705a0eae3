use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::NetConfig;
use super::model::{build_model, Model};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::metrics::si_sdr;
use crate::tensor::{adam_step, AdamConfig, AdamState, Tensor};

/// One (limited, original) training example.
#[derive(Debug, Clone, PartialEq)]
pub struct Pair {
    pub limited: AudioBuffer,
    pub target: AudioBuffer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainHyper {
    pub lr: f64,
    pub batch: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Fraction of the pairs held out for validation.
    pub validation_split: f64,
    /// Global gradient-norm clip.
    pub grad_clip: Option<f64>,
}

impl Default for TrainHyper {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch: 8,
            epochs: 10,
            seed: 0,
            validation_split: 0.1,
            grad_clip: Some(5.0),
        }
    }
}

impl TrainHyper {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.lr)));
        }
        if self.batch == 0 || self.epochs == 0 {
            return Err(Error::Config("batch size and epochs must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.validation_split) {
            return Err(Error::Config(format!(
                "validation split {} outside [0, 1)",
                self.validation_split
            )));
        }
        if matches!(self.grad_clip, Some(c) if !(c > 0.0)) {
            return Err(Error::Config("gradient clip must be positive".into()));
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: u64,
    pub train_loss: f64,
    /// Mean validation SI-SDR, present on the last step of each epoch.
    pub val_si_sdr: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Best-validation checkpoint (the final one without a validation set).
    pub best: Checkpoint,
    pub last: Checkpoint,
    pub log: Vec<LogEntry>,
    /// Validation SI-SDR of the untrained model.
    pub initial_val_si_sdr: Option<f64>,
    pub best_val_si_sdr: Option<f64>,
    pub train_indices: Vec<usize>,
    pub validation_indices: Vec<usize>,
}

/// Splits `count` examples into (train, validation) index sets.
pub fn split_indices(count: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut n_val = (count as f64 * fraction).round() as usize;
    if fraction > 0.0 && count > 1 {
        n_val = n_val.clamp(1, count - 1);
    } else {
        n_val = 0;
    }
    let train = order.split_off(n_val);
    (train, order)
}

/// Stacks equally shaped buffers into `[batch, channels, time]`.
pub fn stack(buffers: &[&AudioBuffer]) -> Result<Tensor> {
    let first = buffers
        .first()
        .ok_or_else(|| Error::Training("empty batch".into()))?;
    let (c, t) = (first.channels(), first.len());
    let mut data = Vec::with_capacity(buffers.len() * c * t);
    for b in buffers {
        if b.channels() != c || b.len() != t {
            return Err(Error::Dimension(format!(
                "batch mixes shapes {c}x{t} and {}x{}",
                b.channels(),
                b.len()
            )));
        }
        for ch in b.data() {
            data.extend_from_slice(ch);
        }
    }
    Tensor::new(vec![buffers.len(), c, t], data)
}

/// Splits `[batch, channels, time]` back into buffers.
pub fn unstack(tensor: &Tensor, sample_rate: u32) -> Result<Vec<AudioBuffer>> {
    let (b, c, t) = tensor.dims3()?;
    (0..b)
        .map(|i| {
            let data = (0..c)
                .map(|ch| tensor.data()[(i * c + ch) * t..][..t].to_vec())
                .collect();
            AudioBuffer::new(sample_rate, data)
        })
        .collect()
}

/// Mean SI-SDR of the model on `indices`, one example at a time.
pub fn evaluate_si_sdr(model: &Model, pairs: &[Pair], indices: &[usize]) -> Result<f64> {
    let mut total = 0.0;
    for &i in indices {
        let pair = &pairs[i];
        let (y, _) = model.forward(&stack(&[&pair.limited])?)?;
        let est = unstack(&y, pair.target.sample_rate())?.remove(0);
        total += si_sdr(&est, &pair.target)?;
    }
    Ok(total / indices.len() as f64)
}

fn check_pairs(config: &NetConfig, pairs: &[Pair]) -> Result<()> {
    if pairs.is_empty() {
        return Err(Error::Training("empty dataset".into()));
    }
    for (i, p) in pairs.iter().enumerate() {
        p.limited.check_same_shape(&p.target, "training pair")?;
        if p.limited.channels() != config.channels || p.limited.sample_rate() != config.sample_rate {
            return Err(Error::Config(format!(
                "pair {i} is {} ch at {} Hz, model expects {} ch at {} Hz",
                p.limited.channels(),
                p.limited.sample_rate(),
                config.channels,
                config.sample_rate
            )));
        }
    }
    Ok(())
}

/// Minimizes the negative SI-SDR of `model(limited)` against `target` with
/// Adam. `on_log` sees every log entry as it is produced.
pub fn train(
    config: &NetConfig,
    pairs: &[Pair],
    hyper: &TrainHyper,
    dataset_seed: Option<u64>,
    mut on_log: impl FnMut(&LogEntry),
) -> Result<TrainOutcome> {
    hyper.validate()?;
    let mut model = build_model(config)?;
    check_pairs(config, pairs)?;
    let (train_idx, val_idx) = split_indices(pairs.len(), hyper.validation_split, hyper.seed);
    let adam = AdamConfig {
        lr: hyper.lr,
        ..Default::default()
    };
    let mut state = AdamState::zeros_like(model.params());
    let validate = |m: &Model| -> Result<Option<f64>> {
        if val_idx.is_empty() {
            Ok(None)
        } else {
            evaluate_si_sdr(m, pairs, &val_idx).map(Some)
        }
    };
    let initial = validate(&model)?;
    let mut best: Option<(f64, Checkpoint)> = None;
    let mut log = Vec::new();
    let mut step = 0u64;
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed);

    for epoch in 0..hyper.epochs {
        rng.set_stream(epoch as u64 + 1);
        let mut order = train_idx.clone();
        order.shuffle(&mut rng);
        let batches: Vec<&[usize]> = order.chunks(hyper.batch).collect();
        for (bi, batch) in batches.iter().enumerate() {
            let limited: Vec<&AudioBuffer> = batch.iter().map(|&i| &pairs[i].limited).collect();
            let targets: Vec<&AudioBuffer> = batch.iter().map(|&i| &pairs[i].target).collect();
            let mut traced = model.trace(&stack(&limited)?, true)?;
            let reference = traced.graph.constant(stack(&targets)?);
            let loss = traced.graph.neg_si_sdr(traced.output, reference)?;
            let loss_value = traced.graph.value(loss).data()[0];
            if !loss_value.is_finite() {
                return Err(Error::Training(format!(
                    "loss became {loss_value} at step {step} (epoch {epoch}); lower the learning rate"
                )));
            }
            traced.graph.backward(loss)?;
            let mut grads: Vec<Tensor> = traced
                .params
                .iter()
                .zip(model.params())
                .map(|(&v, p)| traced.graph.take_grad(v).unwrap_or_else(|| Tensor::zeros(p.shape())))
                .collect();
            let norm = grads.iter().flat_map(|g| g.data()).map(|v| v * v).sum::<f64>().sqrt();
            if !norm.is_finite() {
                return Err(Error::Training(format!("non-finite gradient at step {step}")));
            }
            if let Some(clip) = hyper.grad_clip {
                if norm > clip {
                    let scale = clip / norm;
                    for g in &mut grads {
                        g.data_mut().iter_mut().for_each(|v| *v *= scale);
                    }
                }
            }
            model.update_running(&traced);
            adam_step(model.params_mut(), &grads, &mut state, &adam)?;
            step += 1;

            let val_si_sdr = if bi + 1 == batches.len() { validate(&model)? } else { None };
            let entry = LogEntry {
                step,
                train_loss: loss_value,
                val_si_sdr,
            };
            on_log(&entry);
            log.push(entry);
            if let Some(v) = val_si_sdr {
                if best.as_ref().is_none_or(|(b, _)| v > *b) {
                    best = Some((v, Checkpoint::from_model(&model, step, Some(state.clone()), dataset_seed)));
                }
            }
        }
    }
    let last = Checkpoint::from_model(&model, step, Some(state), dataset_seed);
    let (best_val, best) = match best {
        Some((v, ckpt)) => (Some(v), ckpt),
        None => (None, last.clone()),
    };
    Ok(TrainOutcome {
        best,
        last,
        log,
        initial_val_si_sdr: initial,
        best_val_si_sdr: best_val,
        train_indices: train_idx,
        validation_indices: val_idx,
    })
}
