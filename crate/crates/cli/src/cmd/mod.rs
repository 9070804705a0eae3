pub mod data;
pub mod dsp;
pub mod infer;
pub mod report;
pub mod train;
