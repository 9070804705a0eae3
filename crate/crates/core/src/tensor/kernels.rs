//! Dense 1-D convolution kernels on `[batch, channels, time]` buffers.

/// Geometry of a grouped, dilated, strided 1-D convolution.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ConvGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub kernel: usize,
    pub stride: usize,
    pub dilation: usize,
    pub padding: usize,
    pub groups: usize,
}

impl ConvGeom {
    fn in_per_group(&self) -> usize {
        self.c_in / self.groups
    }

    fn out_per_group(&self) -> usize {
        self.c_out / self.groups
    }

    /// Input offset of tap `k` and the output range `[lo, hi)` whose taps land
    /// inside the input.
    fn tap_range(&self, k: usize) -> (isize, usize, usize) {
        let off = (k * self.dilation) as isize - self.padding as isize;
        let s = self.stride as isize;
        let lo = if off >= 0 { 0 } else { ((-off) + s - 1) / s };
        let limit = self.t_in as isize - off;
        let hi = if limit <= 0 { 0 } else { (limit + s - 1) / s };
        let lo = (lo as usize).min(self.t_out);
        let hi = (hi as usize).min(self.t_out);
        (off, lo, hi.max(lo))
    }
}

pub(crate) fn conv1d_forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: &ConvGeom) -> Vec<f64> {
    let mut out = vec![0.0; g.batch * g.c_out * g.t_out];
    let cig = g.in_per_group();
    let cog = g.out_per_group();
    for b in 0..g.batch {
        for co in 0..g.c_out {
            let row = &mut out[(b * g.c_out + co) * g.t_out..][..g.t_out];
            if let Some(bias) = bias {
                row.fill(bias[co]);
            }
            let group = co / cog;
            for cil in 0..cig {
                let ci = group * cig + cil;
                let xr = &x[(b * g.c_in + ci) * g.t_in..][..g.t_in];
                for k in 0..g.kernel {
                    let wv = w[(co * cig + cil) * g.kernel + k];
                    let (off, lo, hi) = g.tap_range(k);
                    if lo == hi {
                        continue;
                    }
                    if g.stride == 1 {
                        let start = (lo as isize + off) as usize;
                        let src = &xr[start..start + (hi - lo)];
                        for (o, s) in row[lo..hi].iter_mut().zip(src) {
                            *o += wv * s;
                        }
                    } else {
                        for t in lo..hi {
                            row[t] += wv * xr[(t as isize * g.stride as isize + off) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

/// Gradients `(dx, dw, db)`; each is computed only when requested.
pub(crate) fn conv1d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    g: &ConvGeom,
    want: (bool, bool, bool),
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let cig = g.in_per_group();
    let cog = g.out_per_group();
    let mut dx = want.0.then(|| vec![0.0; x.len()]);
    let mut dw = want.1.then(|| vec![0.0; w.len()]);
    let mut db = want.2.then(|| vec![0.0; g.c_out]);
    for b in 0..g.batch {
        for co in 0..g.c_out {
            let dyr = &dy[(b * g.c_out + co) * g.t_out..][..g.t_out];
            if let Some(db) = db.as_mut() {
                db[co] += dyr.iter().sum::<f64>();
            }
            let group = co / cog;
            for cil in 0..cig {
                let ci = group * cig + cil;
                let base = (b * g.c_in + ci) * g.t_in;
                for k in 0..g.kernel {
                    let widx = (co * cig + cil) * g.kernel + k;
                    let (off, lo, hi) = g.tap_range(k);
                    if lo == hi {
                        continue;
                    }
                    if g.stride == 1 {
                        let start = base + (lo as isize + off) as usize;
                        let n = hi - lo;
                        if let Some(dw) = dw.as_mut() {
                            let xs = &x[start..start + n];
                            dw[widx] += dyr[lo..hi].iter().zip(xs).map(|(a, b)| a * b).sum::<f64>();
                        }
                        if let Some(dx) = dx.as_mut() {
                            let wv = w[widx];
                            for (d, gy) in dx[start..start + n].iter_mut().zip(&dyr[lo..hi]) {
                                *d += wv * gy;
                            }
                        }
                    } else {
                        let wv = w[widx];
                        let mut acc = 0.0;
                        for t in lo..hi {
                            let i = base + (t as isize * g.stride as isize + off) as usize;
                            acc += dyr[t] * x[i];
                            if let Some(dx) = dx.as_mut() {
                                dx[i] += wv * dyr[t];
                            }
                        }
                        if let Some(dw) = dw.as_mut() {
                            dw[widx] += acc;
                        }
                    }
                }
            }
        }
    }
    (dx, dw, db)
}

/// Geometry of a transposed convolution with weights `[c_in, c_out, kernel]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct TransposeGeom {
    pub batch: usize,
    pub c_in: usize,
    pub c_out: usize,
    pub frames: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl TransposeGeom {
    pub fn t_out(&self) -> usize {
        (self.frames - 1) * self.stride + self.kernel
    }
}

pub(crate) fn conv_transpose1d_forward(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: &TransposeGeom) -> Vec<f64> {
    let t_out = g.t_out();
    let mut out = vec![0.0; g.batch * g.c_out * t_out];
    for b in 0..g.batch {
        for co in 0..g.c_out {
            let row = &mut out[(b * g.c_out + co) * t_out..][..t_out];
            if let Some(bias) = bias {
                row.fill(bias[co]);
            }
            for ci in 0..g.c_in {
                let xr = &x[(b * g.c_in + ci) * g.frames..][..g.frames];
                for k in 0..g.kernel {
                    let wv = w[(ci * g.c_out + co) * g.kernel + k];
                    for (f, &xv) in xr.iter().enumerate() {
                        row[f * g.stride + k] += wv * xv;
                    }
                }
            }
        }
    }
    out
}

pub(crate) fn conv_transpose1d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    g: &TransposeGeom,
    want: (bool, bool, bool),
) -> (Option<Vec<f64>>, Option<Vec<f64>>, Option<Vec<f64>>) {
    let t_out = g.t_out();
    let mut dx = want.0.then(|| vec![0.0; x.len()]);
    let mut dw = want.1.then(|| vec![0.0; w.len()]);
    let mut db = want.2.then(|| vec![0.0; g.c_out]);
    for b in 0..g.batch {
        for co in 0..g.c_out {
            let dyr = &dy[(b * g.c_out + co) * t_out..][..t_out];
            if let Some(db) = db.as_mut() {
                db[co] += dyr.iter().sum::<f64>();
            }
            for ci in 0..g.c_in {
                let xbase = (b * g.c_in + ci) * g.frames;
                for k in 0..g.kernel {
                    let widx = (ci * g.c_out + co) * g.kernel + k;
                    let wv = w[widx];
                    let mut acc = 0.0;
                    for f in 0..g.frames {
                        let gy = dyr[f * g.stride + k];
                        acc += x[xbase + f] * gy;
                        if let Some(dx) = dx.as_mut() {
                            dx[xbase + f] += wv * gy;
                        }
                    }
                    if let Some(dw) = dw.as_mut() {
                        dw[widx] += acc;
                    }
                }
            }
        }
    }
    (dx, dw, db)
}
