//! Normalization layers over `[batch, channels, time]` activations.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Added to the variance inside the square root.
pub const NORM_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Global layer norm: statistics over all channels and time steps of an
    /// example.
    Gln,
    /// Layer norm: statistics over channels, separately per time step.
    Ln,
    /// Batch norm: statistics per channel over batch and time, with running
    /// estimates for inference.
    Bn,
    /// Feature-wise global layer norm: statistics over time, separately per
    /// channel.
    Fgln,
}

impl NormKind {
    pub const ALL: [NormKind; 4] = [NormKind::Gln, NormKind::Ln, NormKind::Bn, NormKind::Fgln];

    pub fn name(self) -> &'static str {
        match self {
            NormKind::Gln => "gln",
            NormKind::Ln => "ln",
            NormKind::Bn => "bn",
            NormKind::Fgln => "fgln",
        }
    }

    pub(crate) fn groups(self, batch: usize, channels: usize, time: usize) -> usize {
        match self {
            NormKind::Gln => batch,
            NormKind::Ln => batch * time,
            NormKind::Bn => channels,
            NormKind::Fgln => batch * channels,
        }
    }

    #[inline]
    pub(crate) fn group(self, b: usize, c: usize, t: usize, channels: usize, time: usize) -> usize {
        match self {
            NormKind::Gln => b,
            NormKind::Ln => b * time + t,
            NormKind::Bn => c,
            NormKind::Fgln => b * channels + c,
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        NormKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown norm {s:?} (expected gln, ln, bn or fgln)")))
    }
}

/// Whether batch norm uses batch statistics or frozen running estimates. The
/// other kinds ignore the mode.
#[derive(Debug, Clone, PartialEq)]
pub enum NormMode {
    Train,
    Eval { mean: Vec<f64>, var: Vec<f64> },
}

/// Values saved by the forward pass for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct NormCache {
    pub normalized: Vec<f64>,
    pub inv_std: Vec<f64>,
    /// Per-group statistics (batch norm: per channel). `frozen` marks
    /// statistics that do not depend on the input.
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
    pub frozen: bool,
}

pub(crate) fn forward(
    kind: NormKind,
    mode: &NormMode,
    x: &[f64],
    dims: (usize, usize, usize),
    gain: &[f64],
    bias: &[f64],
) -> (Vec<f64>, NormCache) {
    let (batch, channels, time) = dims;
    let (mean, var, frozen) = match (kind, mode) {
        (NormKind::Bn, NormMode::Eval { mean, var }) => (mean.clone(), var.clone(), true),
        _ => {
            let groups = kind.groups(batch, channels, time);
            let mut sum = vec![0.0; groups];
            let mut count = vec![0usize; groups];
            for_each(dims, |i, b, c, t| {
                let g = kind.group(b, c, t, channels, time);
                sum[g] += x[i];
                count[g] += 1;
            });
            let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &n)| s / n as f64).collect();
            let mut sq = vec![0.0; groups];
            for_each(dims, |i, b, c, t| {
                let g = kind.group(b, c, t, channels, time);
                let d = x[i] - mean[g];
                sq[g] += d * d;
            });
            let var = sq.iter().zip(&count).map(|(s, &n)| s / n as f64).collect();
            (mean, var, false)
        }
    };
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + NORM_EPSILON).sqrt()).collect();
    let frozen_bn = frozen;
    let mut normalized = vec![0.0; x.len()];
    let mut out = vec![0.0; x.len()];
    for_each(dims, |i, b, c, t| {
        let g = if frozen_bn { c } else { kind.group(b, c, t, channels, time) };
        let n = (x[i] - mean[g]) * inv_std[g];
        normalized[i] = n;
        out[i] = gain[c] * n + bias[c];
    });
    (
        out,
        NormCache {
            normalized,
            inv_std,
            mean,
            var,
            frozen,
        },
    )
}

/// Returns `(dx, dgain, dbias)`.
pub(crate) fn backward(
    kind: NormKind,
    cache: &NormCache,
    dy: &[f64],
    dims: (usize, usize, usize),
    gain: &[f64],
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (batch, channels, time) = dims;
    let xn = &cache.normalized;
    let mut dgain = vec![0.0; channels];
    let mut dbias = vec![0.0; channels];
    let mut dxn = vec![0.0; dy.len()];
    for_each(dims, |i, _, c, _| {
        dgain[c] += dy[i] * xn[i];
        dbias[c] += dy[i];
        dxn[i] = dy[i] * gain[c];
    });

    let mut dx = vec![0.0; dy.len()];
    if cache.frozen {
        for_each(dims, |i, _, c, _| dx[i] = dxn[i] * cache.inv_std[c]);
        return (dx, dgain, dbias);
    }

    let groups = kind.groups(batch, channels, time);
    let mut m1 = vec![0.0; groups];
    let mut m2 = vec![0.0; groups];
    let mut count = vec![0usize; groups];
    for_each(dims, |i, b, c, t| {
        let g = kind.group(b, c, t, channels, time);
        m1[g] += dxn[i];
        m2[g] += dxn[i] * xn[i];
        count[g] += 1;
    });
    for g in 0..groups {
        m1[g] /= count[g] as f64;
        m2[g] /= count[g] as f64;
    }
    for_each(dims, |i, b, c, t| {
        let g = kind.group(b, c, t, channels, time);
        dx[i] = cache.inv_std[g] * (dxn[i] - m1[g] - xn[i] * m2[g]);
    });
    (dx, dgain, dbias)
}

#[inline]
fn for_each(dims: (usize, usize, usize), mut f: impl FnMut(usize, usize, usize, usize)) {
    let (batch, channels, time) = dims;
    let mut i = 0;
    for b in 0..batch {
        for c in 0..channels {
            for t in 0..time {
                f(i, b, c, t);
                i += 1;
            }
        }
    }
}
