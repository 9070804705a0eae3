use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::NormKind;

/// What the network's decoder output means.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Head {
    /// The decoder output is the waveform estimate.
    Synthesis,
    /// A sigmoid mask multiplies the encoder output before decoding.
    Masking,
    /// The decoder output passes a sigmoid and gains the input sample-wise.
    Sgi,
}

impl Head {
    pub const ALL: [Head; 3] = [Head::Synthesis, Head::Masking, Head::Sgi];

    pub fn name(self) -> &'static str {
        match self {
            Head::Synthesis => "synthesis",
            Head::Masking => "masking",
            Head::Sgi => "sgi",
        }
    }
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Head::ALL
            .into_iter()
            .find(|h| h.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown head {s:?} (expected synthesis, masking or sgi)")))
    }
}

/// Encoder / separator / decoder hyperparameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetConfig {
    /// Encoder basis count (N).
    pub basis: usize,
    /// Encoder kernel length in samples (L); the stride is `L / 2`.
    pub kernel_len: usize,
    /// Bottleneck channels (B).
    pub bottleneck: usize,
    /// Hidden channels inside each block (H).
    pub hidden: usize,
    /// Depthwise kernel size (P).
    pub block_kernel: usize,
    /// Blocks per repeat (X).
    pub blocks: usize,
    /// Repeats (R).
    pub repeats: usize,
    pub norm: NormKind,
    pub head: Head,
    pub sample_rate: u32,
    pub channels: usize,
    /// Seed of the weight initializer.
    pub init_seed: u64,
}

impl Default for NetConfig {
    fn default() -> Self {
        Self {
            basis: 128,
            kernel_len: 32,
            bottleneck: 32,
            hidden: 64,
            block_kernel: 3,
            blocks: 2,
            repeats: 1,
            norm: NormKind::Gln,
            head: Head::Sgi,
            sample_rate: 44100,
            channels: 2,
            init_seed: 0,
        }
    }
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("basis (N)", self.basis),
            ("kernel length (L)", self.kernel_len),
            ("bottleneck (B)", self.bottleneck),
            ("hidden (H)", self.hidden),
            ("block kernel (P)", self.block_kernel),
            ("blocks per repeat (X)", self.blocks),
            ("repeats (R)", self.repeats),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if self.kernel_len % 2 != 0 {
            return Err(Error::Config(format!(
                "kernel length {} must be even (stride is L/2)",
                self.kernel_len
            )));
        }
        if self.block_kernel % 2 == 0 {
            return Err(Error::Config(format!(
                "block kernel {} must be odd for length-preserving padding",
                self.block_kernel
            )));
        }
        if self.blocks > 20 {
            return Err(Error::Config("more than 20 blocks per repeat".into()));
        }
        if !(1..=2).contains(&self.channels) {
            return Err(Error::Config(format!("{} channels (expected 1 or 2)", self.channels)));
        }
        if self.sample_rate == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn stride(&self) -> usize {
        self.kernel_len / 2
    }

    /// Dilation of block `index` within its repeat.
    pub fn dilation(&self, index: usize) -> usize {
        1 << index
    }

    /// Encoder frames produced for `samples` input samples.
    pub fn frames(&self, samples: usize) -> usize {
        samples.div_ceil(self.stride())
    }

    /// Receptive field of one decoder frame, in samples.
    pub fn receptive_field_samples(&self) -> usize {
        let per_repeat: usize = (0..self.blocks).map(|i| (self.block_kernel - 1) * self.dilation(i)).sum();
        let frames = 1 + self.repeats * per_repeat;
        self.kernel_len + (frames - 1) * self.stride()
    }

    /// Receptive field in milliseconds at the configured sample rate.
    pub fn receptive_field_ms(&self) -> f64 {
        self.receptive_field_samples() as f64 * 1000.0 / f64::from(self.sample_rate)
    }

    /// `(X, R)`-style label.
    pub fn depth_label(&self) -> String {
        format!("({},{})", self.blocks, self.repeats)
    }
}

/// Receptive field in milliseconds.
pub fn receptive_field(config: &NetConfig) -> f64 {
    config.receptive_field_ms()
}
