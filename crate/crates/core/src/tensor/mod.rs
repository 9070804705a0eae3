//! Minimal reverse-mode automatic differentiation over dense `f64` arrays,
//! with exactly the layers the de-limiter networks use.

mod adam;
mod gradcheck;
mod graph;
mod kernels;
mod norm;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, GRAD_CHECK_FLOOR};
pub use graph::{ConvSpec, Graph, Var};
pub use norm::{NormKind, NormMode, NORM_EPSILON};

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Dense row-major array of up to three axes (batch, channel, time).
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        if shape.is_empty() || shape.len() > 3 {
            return Err(Error::Dimension(format!("tensor rank {} not in 1..=3", shape.len())));
        }
        let numel: usize = shape.iter().product();
        if numel != data.len() {
            return Err(Error::Dimension(format!(
                "shape {shape:?} needs {numel} values, got {}",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            shape: vec![1],
            data: vec![value],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    /// `(batch, channels, time)` of a rank-3 tensor.
    pub fn dims3(&self) -> Result<(usize, usize, usize)> {
        match self.shape[..] {
            [b, c, t] => Ok((b, c, t)),
            _ => Err(Error::Dimension(format!(
                "expected [batch, channels, time], got {:?}",
                self.shape
            ))),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub(crate) fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Shape header (`u32` rank, `u64` dims) followed by little-endian `f64`s.
    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(&(self.shape.len() as u32).to_le_bytes())?;
        for &d in &self.shape {
            out.write_all(&(d as u64).to_le_bytes())?;
        }
        for v in &self.data {
            out.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from(input: &mut impl Read) -> Result<Self> {
        let mut u32b = [0u8; 4];
        let mut u64b = [0u8; 8];
        input.read_exact(&mut u32b)?;
        let rank = u32::from_le_bytes(u32b) as usize;
        if rank == 0 || rank > 3 {
            return Err(Error::Corrupt(format!("tensor rank {rank}")));
        }
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            input.read_exact(&mut u64b)?;
            shape.push(u64::from_le_bytes(u64b) as usize);
        }
        let numel = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .filter(|&n| n <= 1 << 32)
            .ok_or_else(|| Error::Corrupt(format!("tensor shape {shape:?} too large")))?;
        let mut data = Vec::with_capacity(numel);
        for _ in 0..numel {
            input.read_exact(&mut u64b)?;
            data.push(f64::from_le_bytes(u64b));
        }
        Tensor::new(shape, data)
    }
}
