//! Tape-based computation graph. Nodes are appended in evaluation order, so a
//! reverse sweep over the tape visits every node after all of its consumers.

use std::f64::consts::LN_10;

use super::kernels::{self, ConvGeom, TransposeGeom};
use super::norm::{self, NormCache, NormKind, NormMode};
use super::Tensor;
use crate::error::{Error, Result};
use crate::metrics::SI_SDR_CAP_DB;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// Stride, dilation, symmetric zero padding and channel groups of a
/// convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub groups: usize,
}

impl Default for ConvSpec {
    fn default() -> Self {
        Self {
            stride: 1,
            dilation: 1,
            padding: 0,
            groups: 1,
        }
    }
}

type CustomBackward = Box<dyn Fn(&Tensor, &[&Tensor]) -> Vec<Tensor>>;

enum Op {
    Leaf,
    Conv1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: ConvGeom,
    },
    ConvTranspose1d {
        x: Var,
        w: Var,
        b: Option<Var>,
        geom: TransposeGeom,
    },
    Relu(Var),
    Sigmoid(Var),
    PRelu {
        x: Var,
        slope: Var,
    },
    Norm {
        x: Var,
        gain: Var,
        bias: Var,
        kind: NormKind,
        cache: NormCache,
    },
    Add(Var, Var),
    Mul(Var, Var),
    Pad {
        x: Var,
        left: usize,
    },
    Slice {
        x: Var,
        start: usize,
    },
    Sum(Var),
    NegSiSdr {
        estimate: Var,
        reference: Var,
        /// Per example: `(alpha, target energy, noise energy, active)`.
        terms: Vec<(f64, f64, f64, bool)>,
    },
    Custom {
        inputs: Vec<Var>,
        backward: CustomBackward,
    },
}

struct Node {
    value: Tensor,
    grad: Option<Tensor>,
    requires_grad: bool,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, requires_grad: bool, op: Op) -> Var {
        self.nodes.push(Node {
            value,
            grad: None,
            requires_grad,
            op,
        });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// Constant input; no gradient is tracked.
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, false, Op::Leaf)
    }

    /// Leaf whose gradient is accumulated by [`Graph::backward`].
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, true, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn grad(&self, v: Var) -> Option<&Tensor> {
        self.nodes[v.0].grad.as_ref()
    }

    pub fn take_grad(&mut self, v: Var) -> Option<Tensor> {
        self.nodes[v.0].grad.take()
    }

    /// Batch statistics `(mean, var)` computed by a training-mode batch norm
    /// node.
    pub fn batch_stats(&self, v: Var) -> Option<(&[f64], &[f64])> {
        match &self.nodes[v.0].op {
            Op::Norm {
                kind: NormKind::Bn,
                cache,
                ..
            } if !cache.frozen => Some((&cache.mean, &cache.var)),
            _ => None,
        }
    }

    pub fn conv1d(&mut self, x: Var, w: Var, b: Option<Var>, spec: ConvSpec) -> Result<Var> {
        let (batch, c_in, t_in) = self.value(x).dims3()?;
        let (c_out, cig, kernel) = self.value(w).dims3()?;
        let groups = spec.groups.max(1);
        if spec.stride == 0 || spec.dilation == 0 {
            return Err(Error::Dimension("stride and dilation must be positive".into()));
        }
        if c_in % groups != 0 || c_out % groups != 0 || cig != c_in / groups || kernel == 0 {
            return Err(Error::Dimension(format!(
                "conv1d: input channels {c_in}, weight {:?}, groups {groups}",
                self.value(w).shape()
            )));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(Error::Dimension(format!(
                    "conv1d bias {:?} for {c_out} outputs",
                    self.value(b).shape()
                )));
            }
        }
        let span = spec.dilation * (kernel - 1) + 1;
        let padded = t_in + 2 * spec.padding;
        if padded < span {
            return Err(Error::Dimension(format!(
                "conv1d: padded length {padded} shorter than receptive span {span}"
            )));
        }
        let t_out = (padded - span) / spec.stride + 1;
        let geom = ConvGeom {
            batch,
            c_in,
            c_out,
            t_in,
            t_out,
            kernel,
            stride: spec.stride,
            dilation: spec.dilation,
            padding: spec.padding,
            groups,
        };
        let bias = b.map(|b| self.value(b).data());
        let out = kernels::conv1d_forward(self.value(x).data(), self.value(w).data(), bias, &geom);
        let value = Tensor::new(vec![batch, c_out, t_out], out)?;
        let rg = self.needs(&[x, w]) || b.is_some_and(|b| self.needs(&[b]));
        Ok(self.push(value, rg, Op::Conv1d { x, w, b, geom }))
    }

    /// Transposed convolution with weights `[c_in, c_out, kernel]`, output
    /// length `(frames - 1) * stride + kernel`.
    pub fn conv_transpose1d(&mut self, x: Var, w: Var, b: Option<Var>, stride: usize) -> Result<Var> {
        let (batch, c_in, frames) = self.value(x).dims3()?;
        let (wi, c_out, kernel) = self.value(w).dims3()?;
        if wi != c_in || frames == 0 || kernel == 0 || stride == 0 {
            return Err(Error::Dimension(format!(
                "conv_transpose1d: input {:?}, weight {:?}, stride {stride}",
                self.value(x).shape(),
                self.value(w).shape()
            )));
        }
        if let Some(b) = b {
            if self.value(b).shape() != [c_out] {
                return Err(Error::Dimension("conv_transpose1d bias shape".into()));
            }
        }
        let geom = TransposeGeom {
            batch,
            c_in,
            c_out,
            frames,
            kernel,
            stride,
        };
        let bias = b.map(|b| self.value(b).data());
        let out = kernels::conv_transpose1d_forward(self.value(x).data(), self.value(w).data(), bias, &geom);
        let value = Tensor::new(vec![batch, c_out, geom.t_out()], out)?;
        let rg = self.needs(&[x, w]) || b.is_some_and(|b| self.needs(&[b]));
        Ok(self.push(value, rg, Op::ConvTranspose1d { x, w, b, geom }))
    }

    fn map(&mut self, x: Var, f: impl Fn(f64) -> f64, op: Op) -> Var {
        let src = self.value(x);
        let value = Tensor {
            shape: src.shape.clone(),
            data: src.data.iter().map(|&v| f(v)).collect(),
        };
        let rg = self.needs(&[x]);
        self.push(value, rg, op)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        self.map(x, |v| v.max(0.0), Op::Relu(x))
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        self.map(x, sigmoid, Op::Sigmoid(x))
    }

    /// Parametric ReLU with a single learnable slope (shape `[1]`).
    pub fn prelu(&mut self, x: Var, slope: Var) -> Result<Var> {
        if self.value(slope).numel() != 1 {
            return Err(Error::Dimension("PReLU slope must be a single value".into()));
        }
        let a = self.value(slope).data[0];
        let src = self.value(x);
        let value = Tensor {
            shape: src.shape.clone(),
            data: src.data.iter().map(|&v| if v >= 0.0 { v } else { a * v }).collect(),
        };
        let rg = self.needs(&[x, slope]);
        Ok(self.push(value, rg, Op::PRelu { x, slope }))
    }

    /// Normalization followed by a per-channel affine map.
    pub fn normalize(&mut self, kind: NormKind, x: Var, gain: Var, bias: Var, mode: &NormMode) -> Result<Var> {
        let dims = self.value(x).dims3()?;
        let channels = dims.1;
        if self.value(gain).shape() != [channels] || self.value(bias).shape() != [channels] {
            return Err(Error::Dimension(format!(
                "norm affine parameters must have {channels} entries"
            )));
        }
        if let NormMode::Eval { mean, var } = mode {
            if kind == NormKind::Bn && (mean.len() != channels || var.len() != channels) {
                return Err(Error::Dimension("batch norm running statistics".into()));
            }
        }
        let (out, cache) = norm::forward(
            kind,
            mode,
            self.value(x).data(),
            dims,
            self.value(gain).data(),
            self.value(bias).data(),
        );
        let value = Tensor::new(self.value(x).shape.clone(), out)?;
        let rg = self.needs(&[x, gain, bias]);
        Ok(self.push(
            value,
            rg,
            Op::Norm {
                x,
                gain,
                bias,
                kind,
                cache,
            },
        ))
    }

    fn check_same(&self, a: Var, b: Var, what: &str) -> Result<()> {
        if self.value(a).shape != self.value(b).shape {
            return Err(Error::Dimension(format!(
                "{what}: {:?} vs {:?}",
                self.value(a).shape,
                self.value(b).shape
            )));
        }
        Ok(())
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "add")?;
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x + y).collect();
        let value = Tensor::new(self.value(a).shape.clone(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, rg, Op::Add(a, b)))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.check_same(a, b, "mul")?;
        let data = self.value(a).data.iter().zip(&self.value(b).data).map(|(x, y)| x * y).collect();
        let value = Tensor::new(self.value(a).shape.clone(), data)?;
        let rg = self.needs(&[a, b]);
        Ok(self.push(value, rg, Op::Mul(a, b)))
    }

    /// Zero-pads the time axis.
    pub fn pad_time(&mut self, x: Var, left: usize, right: usize) -> Result<Var> {
        let (batch, channels, time) = self.value(x).dims3()?;
        let t_out = time + left + right;
        let mut data = vec![0.0; batch * channels * t_out];
        for (row, src) in data.chunks_exact_mut(t_out).zip(self.value(x).data.chunks_exact(time.max(1))) {
            row[left..left + time].copy_from_slice(&src[..time]);
        }
        let value = Tensor::new(vec![batch, channels, t_out], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, rg, Op::Pad { x, left }))
    }

    /// Time steps `[start, start + len)`.
    pub fn slice_time(&mut self, x: Var, start: usize, len: usize) -> Result<Var> {
        let (batch, channels, time) = self.value(x).dims3()?;
        if start + len > time {
            return Err(Error::Dimension(format!(
                "slice {start}..{} of {time} steps",
                start + len
            )));
        }
        let data = self
            .value(x)
            .data
            .chunks_exact(time)
            .flat_map(|row| row[start..start + len].iter().copied())
            .collect();
        let value = Tensor::new(vec![batch, channels, len], data)?;
        let rg = self.needs(&[x]);
        Ok(self.push(value, rg, Op::Slice { x, start }))
    }

    /// Sum of all entries, shape `[1]`.
    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data.iter().sum();
        let rg = self.needs(&[x]);
        self.push(Tensor::scalar(s), rg, Op::Sum(x))
    }

    /// Mean over the batch of `-SI-SDR` (channels concatenated per example),
    /// each term clamped at the SI-SDR cap. Only the estimate receives a
    /// gradient.
    pub fn neg_si_sdr(&mut self, estimate: Var, reference: Var) -> Result<Var> {
        self.check_same(estimate, reference, "SI-SDR loss")?;
        let (batch, channels, time) = self.value(estimate).dims3()?;
        let n = channels * time;
        let mut total = 0.0;
        let mut terms = Vec::with_capacity(batch);
        for b in 0..batch {
            let e = &self.value(estimate).data[b * n..(b + 1) * n];
            let s = &self.value(reference).data[b * n..(b + 1) * n];
            let ref_energy: f64 = s.iter().map(|v| v * v).sum();
            if ref_energy == 0.0 {
                return Err(Error::Loss(format!("reference {b} is all zeros")));
            }
            let alpha = e.iter().zip(s).map(|(x, y)| x * y).sum::<f64>() / ref_energy;
            let target = alpha * alpha * ref_energy;
            let noise: f64 = e
                .iter()
                .zip(s)
                .map(|(x, y)| {
                    let d = alpha * y - x;
                    d * d
                })
                .sum();
            let sdr = 10.0 * (target / noise).log10();
            let active = sdr.is_finite() && sdr.abs() < SI_SDR_CAP_DB;
            total -= crate::metrics::cap(sdr);
            terms.push((alpha, target, noise, active));
        }
        let rg = self.needs(&[estimate]);
        Ok(self.push(
            Tensor::scalar(total / batch as f64),
            rg,
            Op::NegSiSdr {
                estimate,
                reference,
                terms,
            },
        ))
    }

    /// Node with a caller-supplied value and backward rule. `backward`
    /// receives the output gradient and the input values and returns one
    /// gradient per input.
    pub fn custom(
        &mut self,
        inputs: &[Var],
        value: Tensor,
        backward: impl Fn(&Tensor, &[&Tensor]) -> Vec<Tensor> + 'static,
    ) -> Var {
        let rg = self.needs(inputs);
        self.push(
            value,
            rg,
            Op::Custom {
                inputs: inputs.to_vec(),
                backward: Box::new(backward),
            },
        )
    }

    fn accumulate(&mut self, v: Var, g: Tensor) {
        let node = &mut self.nodes[v.0];
        if !node.requires_grad {
            return;
        }
        match node.grad.as_mut() {
            Some(acc) => acc.add_assign(&g),
            None => node.grad = Some(g),
        }
    }

    /// Reverse sweep from a single-entry `loss`.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Dimension("backward needs a scalar loss".into()));
        }
        if !self.nodes[loss.0].requires_grad {
            return Ok(());
        }
        self.nodes[loss.0].grad = Some(Tensor::scalar(1.0));
        for i in (0..=loss.0).rev() {
            let node = &mut self.nodes[i];
            if !node.requires_grad || matches!(node.op, Op::Leaf) {
                continue;
            }
            // Interior gradients are released once propagated; leaves keep theirs.
            let Some(dy) = node.grad.take() else {
                continue;
            };
            for (v, g) in self.local_grads(i, &dy) {
                self.accumulate(v, g);
            }
        }
        Ok(())
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn like(&self, v: Var, data: Vec<f64>) -> Tensor {
        Tensor {
            shape: self.value(v).shape.clone(),
            data,
        }
    }

    fn local_grads(&self, i: usize, dy: &Tensor) -> Vec<(Var, Tensor)> {
        let node = &self.nodes[i];
        let mut out = Vec::new();
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { x, w, b, geom } => {
                let want = (self.rg(*x), self.rg(*w), b.is_some_and(|b| self.rg(b)));
                let (dx, dw, db) =
                    kernels::conv1d_backward(self.value(*x).data(), self.value(*w).data(), &dy.data, geom, want);
                if let Some(dx) = dx {
                    out.push((*x, self.like(*x, dx)));
                }
                if let Some(dw) = dw {
                    out.push((*w, self.like(*w, dw)));
                }
                if let (Some(b), Some(db)) = (b, db) {
                    out.push((*b, self.like(*b, db)));
                }
            }
            Op::ConvTranspose1d { x, w, b, geom } => {
                let want = (self.rg(*x), self.rg(*w), b.is_some_and(|b| self.rg(b)));
                let (dx, dw, db) = kernels::conv_transpose1d_backward(
                    self.value(*x).data(),
                    self.value(*w).data(),
                    &dy.data,
                    geom,
                    want,
                );
                if let Some(dx) = dx {
                    out.push((*x, self.like(*x, dx)));
                }
                if let Some(dw) = dw {
                    out.push((*w, self.like(*w, dw)));
                }
                if let (Some(b), Some(db)) = (b, db) {
                    out.push((*b, self.like(*b, db)));
                }
            }
            Op::Relu(x) => {
                let data = self
                    .value(*x)
                    .data
                    .iter()
                    .zip(&dy.data)
                    .map(|(&v, &g)| if v > 0.0 { g } else { 0.0 })
                    .collect();
                out.push((*x, self.like(*x, data)));
            }
            Op::Sigmoid(x) => {
                let data = node
                    .value
                    .data
                    .iter()
                    .zip(&dy.data)
                    .map(|(&s, &g)| g * s * (1.0 - s))
                    .collect();
                out.push((*x, self.like(*x, data)));
            }
            Op::PRelu { x, slope } => {
                let a = self.value(*slope).data[0];
                let xv = &self.value(*x).data;
                if self.rg(*x) {
                    let data = xv
                        .iter()
                        .zip(&dy.data)
                        .map(|(&v, &g)| if v >= 0.0 { g } else { a * g })
                        .collect();
                    out.push((*x, self.like(*x, data)));
                }
                if self.rg(*slope) {
                    let da: f64 = xv
                        .iter()
                        .zip(&dy.data)
                        .filter(|(v, _)| **v < 0.0)
                        .map(|(v, g)| v * g)
                        .sum();
                    out.push((*slope, Tensor::scalar(da)));
                }
            }
            Op::Norm {
                x,
                gain,
                bias,
                kind,
                cache,
            } => {
                let dims = self.value(*x).dims3().expect("validated in forward");
                let (dx, dg, db) = norm::backward(*kind, cache, &dy.data, dims, self.value(*gain).data());
                out.push((*x, self.like(*x, dx)));
                out.push((*gain, self.like(*gain, dg)));
                out.push((*bias, self.like(*bias, db)));
            }
            Op::Add(a, b) => {
                out.push((*a, dy.clone()));
                out.push((*b, dy.clone()));
            }
            Op::Mul(a, b) => {
                let av = &self.value(*a).data;
                let bv = &self.value(*b).data;
                if self.rg(*a) {
                    out.push((*a, self.like(*a, bv.iter().zip(&dy.data).map(|(y, g)| y * g).collect())));
                }
                if self.rg(*b) {
                    out.push((*b, self.like(*b, av.iter().zip(&dy.data).map(|(x, g)| x * g).collect())));
                }
            }
            Op::Pad { x, left } => {
                let (_, _, time) = self.value(*x).dims3().expect("validated in forward");
                let t_out = node.value.shape[2];
                let data = dy
                    .data
                    .chunks_exact(t_out)
                    .flat_map(|row| row[*left..*left + time].iter().copied())
                    .collect();
                out.push((*x, self.like(*x, data)));
            }
            Op::Slice { x, start } => {
                let (_, _, time) = self.value(*x).dims3().expect("validated in forward");
                let len = node.value.shape[2];
                let mut data = vec![0.0; self.value(*x).numel()];
                for (row, src) in data.chunks_exact_mut(time).zip(dy.data.chunks_exact(len.max(1))) {
                    row[*start..*start + len].copy_from_slice(&src[..len]);
                }
                out.push((*x, self.like(*x, data)));
            }
            Op::Sum(x) => {
                let g = dy.data[0];
                out.push((*x, self.like(*x, vec![g; self.value(*x).numel()])));
            }
            Op::NegSiSdr {
                estimate,
                reference,
                terms,
            } => {
                let batch = terms.len();
                let n = self.value(*estimate).numel() / batch;
                let scale = dy.data[0] / batch as f64;
                let mut data = vec![0.0; self.value(*estimate).numel()];
                for (b, &(alpha, target, noise, active)) in terms.iter().enumerate() {
                    if !active {
                        continue;
                    }
                    let e = &self.value(*estimate).data[b * n..(b + 1) * n];
                    let s = &self.value(*reference).data[b * n..(b + 1) * n];
                    // d SDR / d e = 10/ln10 * (2 t / |t|^2 - 2 (e - t) / |e - t|^2), t = alpha s
                    let k = -scale * 10.0 / LN_10;
                    for j in 0..n {
                        let t = alpha * s[j];
                        data[b * n + j] = k * (2.0 * t / target - 2.0 * (e[j] - t) / noise);
                    }
                }
                out.push((*estimate, self.like(*estimate, data)));
            }
            Op::Custom { inputs, backward } => {
                let values: Vec<&Tensor> = inputs.iter().map(|v| self.value(*v)).collect();
                for (v, g) in inputs.iter().zip(backward(dy, &values)) {
                    out.push((*v, g));
                }
            }
        }
        out
    }
}

/// Logistic function, kept strictly inside `(0, 1)` even where `f64` would
/// round to an endpoint.
pub(crate) fn sigmoid(v: f64) -> f64 {
    let s = if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    };
    s.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}
