//! De-limiter workbench: a lookahead limiter with exact gain envelopes,
//! BS.1770 loudness, objective metrics, a small reverse-mode autodiff engine
//! and Conv-TasNet-style de-limiter networks with sample-wise gain inversion.

pub mod audio;
pub mod dataset;
pub mod dynamics;
pub mod error;
pub mod loudness;
pub mod metrics;
pub mod net;
pub mod tensor;

pub use audio::{read_wav, write_wav, AudioBuffer, BitDepth};
pub use dynamics::{
    apply_limiter, oracle_inverse, parallel_mix, sgi_target, transfer_gains, GainEnvelope, LimiterParams,
};
pub use error::{Error, Result};
pub use loudness::{integrated_loudness, loudness_normalize, loudness_range, LoudnessReading};
pub use metrics::{dynamics_report, multires_spec_mse, si_sdr, DynamicsReport, SpecConfig};
pub use tensor::{NormKind, Tensor};
