use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Head, NetConfig};
use crate::error::{Error, Result};
use crate::tensor::{ConvSpec, Graph, NormKind, NormMode, Tensor, Var};

/// Momentum of the batch-norm running estimates.
pub const BN_MOMENTUM: f64 = 0.1;

/// How a parameter tensor is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    /// Uniform in `±1/sqrt(fan_in)`.
    FanIn(usize),
    Const(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub shape: Vec<usize>,
    init: Init,
}

fn spec(name: String, shape: Vec<usize>, init: Init) -> ParamSpec {
    ParamSpec { name, shape, init }
}

/// Names, shapes and initializers of every learnable tensor, in a fixed order.
pub fn param_layout(c: &NetConfig) -> Vec<ParamSpec> {
    let (n, l, b, h, p, ch) = (c.basis, c.kernel_len, c.bottleneck, c.hidden, c.block_kernel, c.channels);
    let mut out = vec![
        spec("encoder.weight".into(), vec![n, ch, l], Init::FanIn(ch * l)),
        spec("bottleneck.weight".into(), vec![b, n, 1], Init::FanIn(n)),
        spec("bottleneck.bias".into(), vec![b], Init::FanIn(n)),
    ];
    for i in 0..c.blocks * c.repeats {
        let pre = format!("blocks.{i}");
        out.extend([
            spec(format!("{pre}.pw_in.weight"), vec![h, b, 1], Init::FanIn(b)),
            spec(format!("{pre}.pw_in.bias"), vec![h], Init::FanIn(b)),
            spec(format!("{pre}.prelu1.slope"), vec![1], Init::Const(0.25)),
            spec(format!("{pre}.norm1.gain"), vec![h], Init::Const(1.0)),
            spec(format!("{pre}.norm1.bias"), vec![h], Init::Const(0.0)),
            spec(format!("{pre}.depthwise.weight"), vec![h, 1, p], Init::FanIn(p)),
            spec(format!("{pre}.depthwise.bias"), vec![h], Init::FanIn(p)),
            spec(format!("{pre}.prelu2.slope"), vec![1], Init::Const(0.25)),
            spec(format!("{pre}.norm2.gain"), vec![h], Init::Const(1.0)),
            spec(format!("{pre}.norm2.bias"), vec![h], Init::Const(0.0)),
            spec(format!("{pre}.residual.weight"), vec![b, h, 1], Init::FanIn(h)),
            spec(format!("{pre}.residual.bias"), vec![b], Init::FanIn(h)),
            spec(format!("{pre}.skip.weight"), vec![b, h, 1], Init::FanIn(h)),
            spec(format!("{pre}.skip.bias"), vec![b], Init::FanIn(h)),
        ]);
    }
    out.extend([
        spec("head.prelu.slope".into(), vec![1], Init::Const(0.25)),
        spec("head.weight".into(), vec![n, b, 1], Init::FanIn(b)),
        spec("head.bias".into(), vec![n], Init::FanIn(b)),
        spec("decoder.weight".into(), vec![n, ch, l], Init::FanIn(ch * l)),
        spec("decoder.bias".into(), vec![ch], Init::FanIn(ch * l)),
    ]);
    out
}

/// Names and shapes of the batch-norm running estimates (empty for the
/// other norms).
pub fn buffer_layout(c: &NetConfig) -> Vec<(String, Vec<usize>)> {
    if c.norm != NormKind::Bn {
        return Vec::new();
    }
    let mut out = Vec::new();
    for i in 0..c.blocks * c.repeats {
        for k in 1..=2 {
            out.push((format!("blocks.{i}.norm{k}.running_mean"), vec![c.hidden]));
            out.push((format!("blocks.{i}.norm{k}.running_var"), vec![c.hidden]));
        }
    }
    out
}

/// Batch-norm running estimates of one norm layer.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: NetConfig,
    params: Vec<Tensor>,
    running: Vec<RunningStats>,
}

/// A traced forward pass.
pub struct Traced {
    pub graph: Graph,
    /// One variable per parameter tensor, in layout order.
    pub params: Vec<Var>,
    pub input: Var,
    pub output: Var,
    /// SGI gains aligned with the input.
    pub gains: Option<Var>,
    /// Training-mode batch-norm nodes, in running-stats order.
    pub norm_nodes: Vec<Var>,
}

/// Parameter cursor that hands out variables in layout order.
struct Cursor<'a> {
    vars: &'a [Var],
    next: usize,
}

impl Cursor<'_> {
    fn take(&mut self) -> Var {
        let v = self.vars[self.next];
        self.next += 1;
        v
    }
}

fn vector(data: Vec<f64>) -> Tensor {
    Tensor::new(vec![data.len()], data).expect("rank-1 shape matches its data")
}

pub fn build_model(config: &NetConfig) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.init_seed);
    let params = param_layout(config)
        .into_iter()
        .map(|p| {
            let len = p.shape.iter().product();
            let data = match p.init {
                Init::FanIn(fan) => {
                    let bound = 1.0 / (fan as f64).sqrt();
                    (0..len).map(|_| rng.gen_range(-bound..bound)).collect()
                }
                Init::Const(v) => vec![v; len],
            };
            Tensor::new(p.shape, data)
        })
        .collect::<Result<Vec<_>>>()?;
    let running = (0..buffer_layout(config).len() / 2)
        .map(|_| RunningStats {
            mean: vec![0.0; config.hidden],
            var: vec![1.0; config.hidden],
        })
        .collect();
    Ok(Model {
        config: config.clone(),
        params,
        running,
    })
}

impl Model {
    /// Assembles a model from stored tensors, checking names and shapes
    /// against the layout of `config`.
    pub fn from_named(config: &NetConfig, tensors: Vec<(String, Tensor)>) -> Result<Self> {
        config.validate()?;
        let layout = param_layout(config);
        let buffers = buffer_layout(config);
        let expected = layout.len() + buffers.len();
        if tensors.len() != expected {
            return Err(Error::ShapeMismatch(format!(
                "{} tensors stored, config expects {expected}",
                tensors.len()
            )));
        }
        let names = layout.iter().map(|p| (&p.name, &p.shape)).chain(buffers.iter().map(|(n, s)| (n, s)));
        for ((name, shape), (got_name, got)) in names.zip(&tensors) {
            if name != got_name || shape.as_slice() != got.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "stored {got_name} {:?}, config expects {name} {shape:?}",
                    got.shape()
                )));
            }
        }
        let mut it = tensors.into_iter().map(|(_, t)| t);
        let params: Vec<Tensor> = it.by_ref().take(layout.len()).collect();
        let rest: Vec<Tensor> = it.collect();
        let running = rest
            .chunks(2)
            .map(|pair| RunningStats {
                mean: pair[0].data().to_vec(),
                var: pair[1].data().to_vec(),
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            params,
            running,
        })
    }

    /// Parameters followed by running estimates, with their names.
    pub fn named_tensors(&self) -> Vec<(String, Tensor)> {
        let mut out: Vec<(String, Tensor)> = param_layout(&self.config)
            .into_iter()
            .map(|p| p.name)
            .zip(self.params.iter().cloned())
            .collect();
        let names = buffer_layout(&self.config);
        for (i, stats) in self.running.iter().enumerate() {
            out.push((names[2 * i].0.clone(), vector(stats.mean.clone())));
            out.push((names[2 * i + 1].0.clone(), vector(stats.var.clone())));
        }
        out
    }

    pub fn config(&self) -> &NetConfig {
        &self.config
    }

    pub fn params(&self) -> &[Tensor] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Tensor] {
        &mut self.params
    }

    pub fn running_stats(&self) -> &[RunningStats] {
        &self.running
    }

    pub fn param_count(&self) -> u64 {
        self.params.iter().map(|t| t.numel() as u64).sum()
    }

    /// Folds the batch statistics of a training pass into the running
    /// estimates.
    pub fn update_running(&mut self, traced: &Traced) {
        for (stats, &node) in self.running.iter_mut().zip(&traced.norm_nodes) {
            if let Some((mean, var)) = traced.graph.batch_stats(node) {
                for (r, m) in stats.mean.iter_mut().zip(mean) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * m;
                }
                for (r, v) in stats.var.iter_mut().zip(var) {
                    *r = (1.0 - BN_MOMENTUM) * *r + BN_MOMENTUM * v;
                }
            }
        }
    }

    /// Builds the graph for `input` (`[batch, channels, time]`). `training`
    /// selects batch statistics for batch norm; parameters are trainable
    /// leaves either way.
    pub fn trace(&self, input: &Tensor, training: bool) -> Result<Traced> {
        let mut graph = Graph::new();
        let x = graph.constant(input.clone());
        self.trace_into(&mut graph, x, training)
            .map(|(params, output, gains, norm_nodes)| Traced {
                graph,
                params,
                input: x,
                output,
                gains,
                norm_nodes,
            })
    }

    /// Adds the network to an existing graph with input `x`, creating one
    /// parameter leaf per weight tensor.
    #[allow(clippy::type_complexity)]
    pub fn trace_into(
        &self,
        g: &mut Graph,
        x: Var,
        training: bool,
    ) -> Result<(Vec<Var>, Var, Option<Var>, Vec<Var>)> {
        let vars: Vec<Var> = self.params.iter().map(|t| g.param(t.clone())).collect();
        let (output, gains, norm_nodes) = self.trace_with(g, x, &vars, training)?;
        Ok((vars, output, gains, norm_nodes))
    }

    /// Like [`Model::trace_into`] but with caller-supplied weight variables
    /// (in layout order). Returns `(output, gains, batch-norm nodes)`.
    pub fn trace_with(
        &self,
        g: &mut Graph,
        x: Var,
        vars: &[Var],
        training: bool,
    ) -> Result<(Var, Option<Var>, Vec<Var>)> {
        if vars.len() != self.params.len() {
            return Err(Error::Dimension(format!(
                "{} weight variables for {} parameters",
                vars.len(),
                self.params.len()
            )));
        }
        let c = &self.config;
        let (_, channels, time) = g.value(x).dims3()?;
        if channels != c.channels {
            return Err(Error::Config(format!(
                "input has {channels} channels, model expects {}",
                c.channels
            )));
        }
        if time < c.kernel_len {
            return Err(Error::Dimension(format!(
                "input of {time} samples is shorter than the encoder kernel ({})",
                c.kernel_len
            )));
        }
        let mut cur = Cursor { vars, next: 0 };

        let stride = c.stride();
        let frames = c.frames(time);
        let left = stride / 2;
        let right = frames * stride - time + stride - left;
        let xp = g.pad_time(x, left, right)?;

        let enc_w = cur.take();
        let enc = g.conv1d(xp, enc_w, None, ConvSpec { stride, ..Default::default() })?;
        let enc = g.relu(enc);

        let (w, b) = (cur.take(), cur.take());
        let mut h = g.conv1d(enc, w, Some(b), ConvSpec::default())?;

        let mut skip_sum: Option<Var> = None;
        let mut norm_nodes = Vec::new();
        let mut norm_index = 0;
        for i in 0..c.blocks * c.repeats {
            let dilation = c.dilation(i % c.blocks);
            let mut norm = |g: &mut Graph, v: Var, gain: Var, bias: Var| -> Result<Var> {
                let mode = match (c.norm, training) {
                    (NormKind::Bn, false) => {
                        let s = &self.running[norm_index];
                        NormMode::Eval {
                            mean: s.mean.clone(),
                            var: s.var.clone(),
                        }
                    }
                    _ => NormMode::Train,
                };
                norm_index += 1;
                let out = g.normalize(c.norm, v, gain, bias, &mode)?;
                if c.norm == NormKind::Bn {
                    norm_nodes.push(out);
                }
                Ok(out)
            };
            let (w, b) = (cur.take(), cur.take());
            let mut y = g.conv1d(h, w, Some(b), ConvSpec::default())?;
            y = g.prelu(y, cur.take())?;
            let (gain, bias) = (cur.take(), cur.take());
            y = norm(g, y, gain, bias)?;
            let (w, b) = (cur.take(), cur.take());
            y = g.conv1d(
                y,
                w,
                Some(b),
                ConvSpec {
                    dilation,
                    padding: dilation * (c.block_kernel - 1) / 2,
                    groups: c.hidden,
                    ..Default::default()
                },
            )?;
            y = g.prelu(y, cur.take())?;
            let (gain, bias) = (cur.take(), cur.take());
            y = norm(g, y, gain, bias)?;
            let (w, b) = (cur.take(), cur.take());
            let residual = g.conv1d(y, w, Some(b), ConvSpec::default())?;
            let (w, b) = (cur.take(), cur.take());
            let skip = g.conv1d(y, w, Some(b), ConvSpec::default())?;
            h = g.add(h, residual)?;
            skip_sum = Some(match skip_sum {
                Some(s) => g.add(s, skip)?,
                None => skip,
            });
        }
        let features = skip_sum.expect("at least one block");
        let f = g.prelu(features, cur.take())?;
        let (w, b) = (cur.take(), cur.take());
        let f = g.conv1d(f, w, Some(b), ConvSpec::default())?;

        let decoder_in = match c.head {
            Head::Masking => {
                let mask = g.sigmoid(f);
                g.mul(mask, enc)?
            }
            Head::Synthesis | Head::Sgi => f,
        };
        let (w, b) = (cur.take(), cur.take());
        let decoded = g.conv_transpose1d(decoder_in, w, Some(b), stride)?;
        let trimmed = g.slice_time(decoded, left, time)?;
        let (output, gains) = match c.head {
            Head::Sgi => {
                let gains = g.sigmoid(trimmed);
                (g.mul(gains, x)?, Some(gains))
            }
            _ => (trimmed, None),
        };
        debug_assert_eq!(cur.next, vars.len());
        Ok((output, gains, norm_nodes))
    }

    /// Inference forward pass on `[batch, channels, time]`; returns the
    /// output and, for the SGI head, the gains.
    pub fn forward(&self, input: &Tensor) -> Result<(Tensor, Option<Tensor>)> {
        let traced = self.trace(input, false)?;
        let y = traced.graph.value(traced.output).clone();
        let gains = traced.gains.map(|v| traced.graph.value(v).clone());
        Ok((y, gains))
    }
}
