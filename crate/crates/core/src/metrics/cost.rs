//! Analytic parameter and multiply-accumulate counts for the de-limiter
//! network.

use crate::net::{Head, NetConfig};

/// Learnable scalars of a 1-D convolution.
pub fn conv1d_params(c_in: usize, c_out: usize, kernel: usize, groups: usize, bias: bool) -> u64 {
    let weights = kernel * (c_in / groups) * c_out;
    (weights + if bias { c_out } else { 0 }) as u64
}

/// `kernel · c_in · c_out · t_out / groups`.
pub fn conv1d_macs(kernel: usize, c_in: usize, c_out: usize, t_out: usize, groups: usize) -> u64 {
    (kernel * c_in * c_out * t_out / groups) as u64
}

/// Every input frame contributes `kernel · c_out` products per input channel.
pub fn conv_transpose1d_macs(kernel: usize, c_in: usize, c_out: usize, frames: usize) -> u64 {
    (kernel * c_in * c_out * frames) as u64
}

pub fn count_params(config: &NetConfig) -> u64 {
    let (n, l, b, h, p, c) = (
        config.basis,
        config.kernel_len,
        config.bottleneck,
        config.hidden,
        config.block_kernel,
        config.channels,
    );
    let encoder = conv1d_params(c, n, l, 1, false);
    let bottleneck = conv1d_params(n, b, 1, 1, true);
    let norm = 2 * h as u64;
    let block = conv1d_params(b, h, 1, 1, true)
        + 1
        + norm
        + conv1d_params(h, h, p, h, true)
        + 1
        + norm
        + 2 * conv1d_params(h, b, 1, 1, true);
    let blocks = (config.blocks * config.repeats) as u64;
    let head = 1 + conv1d_params(b, n, 1, 1, true);
    let decoder = (n * c * l + c) as u64;
    encoder + bottleneck + blocks * block + head + decoder
}

/// MACs of one forward pass over `samples` samples per channel.
pub fn count_macs_for_samples(config: &NetConfig, samples: usize) -> u64 {
    let (n, l, b, h, p, c) = (
        config.basis,
        config.kernel_len,
        config.bottleneck,
        config.hidden,
        config.block_kernel,
        config.channels,
    );
    let f = config.frames(samples);
    let encoder = conv1d_macs(l, c, n, f, 1);
    let bottleneck = conv1d_macs(1, n, b, f, 1);
    let block = conv1d_macs(1, b, h, f, 1)
        + 2 * (h * f) as u64
        + conv1d_macs(p, h, h, f, h)
        + 2 * conv1d_macs(1, h, b, f, 1);
    let blocks = (config.blocks * config.repeats) as u64;
    let head = conv1d_macs(1, b, n, f, 1);
    let decoder = conv_transpose1d_macs(l, n, c, f);
    let output = match config.head {
        Head::Synthesis => 0,
        Head::Masking => (n * f) as u64,
        Head::Sgi => (c * samples) as u64,
    };
    encoder + bottleneck + blocks * block + head + decoder + output
}

/// MACs for `input_seconds` of audio at `sample_rate`.
pub fn count_macs(config: &NetConfig, input_seconds: f64, sample_rate: u32) -> u64 {
    let samples = (input_seconds * f64::from(sample_rate)).round() as usize;
    count_macs_for_samples(config, samples)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pointwise_with_bias() {
        assert_eq!(conv1d_params(4, 8, 1, 1, true), 40);
    }

    #[test]
    fn small_conv_macs() {
        assert_eq!(conv1d_macs(3, 2, 2, 100, 1), 1200);
    }

    #[test]
    fn macs_linear_in_duration() {
        let c = NetConfig::default();
        let one = count_macs(&c, 60.0, 44100);
        assert_eq!(count_macs(&c, 120.0, 44100), 2 * one);
    }

    #[test]
    fn deeper_costs_more() {
        let shallow = NetConfig { blocks: 2, repeats: 1, ..Default::default() };
        let deep = NetConfig { blocks: 3, repeats: 2, ..Default::default() };
        assert!(count_params(&shallow) < count_params(&deep));
    }
}
