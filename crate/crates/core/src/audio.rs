//! Canonical in-memory signal representation and RIFF/WAVE file I/O.
//!
//! Samples are held as `f64` for all DSP and metric work; files carry 16/24-bit
//! integer PCM or 32-bit float.

use std::fs::File;
use std::io::{self, BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Multichannel sampled audio. Every channel has the same length and every
/// sample is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    sample_rate: u32,
    data: Vec<Vec<f64>>,
}

impl AudioBuffer {
    pub fn new(sample_rate: u32, data: Vec<Vec<f64>>) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::Format("sample rate must be positive".into()));
        }
        if data.is_empty() || data.len() > 2 {
            return Err(Error::Format(format!(
                "expected 1 or 2 channels, got {}",
                data.len()
            )));
        }
        let len = data[0].len();
        if data.iter().any(|c| c.len() != len) {
            return Err(Error::Dimension("channels differ in length".into()));
        }
        if data.iter().flatten().any(|s| !s.is_finite()) {
            return Err(Error::Format("non-finite sample".into()));
        }
        Ok(Self { sample_rate, data })
    }

    pub fn mono(sample_rate: u32, samples: Vec<f64>) -> Result<Self> {
        Self::new(sample_rate, vec![samples])
    }

    pub fn silence(sample_rate: u32, channels: usize, len: usize) -> Result<Self> {
        Self::new(sample_rate, vec![vec![0.0; len]; channels])
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn channels(&self) -> usize {
        self.data.len()
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.data[0].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate as f64
    }

    pub fn channel(&self, index: usize) -> &[f64] {
        &self.data[index]
    }

    pub fn data(&self) -> &[Vec<f64>] {
        &self.data
    }

    pub fn into_data(self) -> Vec<Vec<f64>> {
        self.data
    }

    /// Largest absolute sample over all channels.
    pub fn peak(&self) -> f64 {
        self.data
            .iter()
            .flatten()
            .fold(0.0_f64, |acc, s| acc.max(s.abs()))
    }

    pub fn scaled(&self, gain: f64) -> Self {
        self.map(|s| s * gain)
    }

    /// Apply `f` to every sample. The result must stay finite.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        let data = self
            .data
            .iter()
            .map(|c| c.iter().map(|&s| f(s)).collect())
            .collect();
        Self {
            sample_rate: self.sample_rate,
            data,
        }
    }

    /// Samples of all channels, channel after channel.
    pub fn concatenated(&self) -> Vec<f64> {
        self.data.iter().flatten().copied().collect()
    }

    /// Copy of samples `[start, start + len)` of every channel.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if start + len > self.len() {
            return Err(Error::Dimension(format!(
                "slice {start}..{} exceeds length {}",
                start + len,
                self.len()
            )));
        }
        let data = self
            .data
            .iter()
            .map(|c| c[start..start + len].to_vec())
            .collect();
        Ok(Self {
            sample_rate: self.sample_rate,
            data,
        })
    }

    /// Same rate, channel count and length.
    pub fn same_shape(&self, other: &Self) -> bool {
        self.sample_rate == other.sample_rate
            && self.channels() == other.channels()
            && self.len() == other.len()
    }

    pub(crate) fn check_same_shape(&self, other: &Self, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::Dimension(format!(
                "{what}: {}ch x {} @ {} Hz vs {}ch x {} @ {} Hz",
                self.channels(),
                self.len(),
                self.sample_rate,
                other.channels(),
                other.len(),
                other.sample_rate
            )))
        }
    }

    pub(crate) fn from_parts_unchecked(sample_rate: u32, data: Vec<Vec<f64>>) -> Self {
        debug_assert!(data.iter().flatten().all(|s| s.is_finite()));
        Self { sample_rate, data }
    }
}

/// Sample encoding of a WAV file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BitDepth {
    #[serde(rename = "16")]
    Pcm16,
    #[serde(rename = "24")]
    Pcm24,
    Float32,
}

impl BitDepth {
    fn int_bits(self) -> Option<u16> {
        match self {
            BitDepth::Pcm16 => Some(16),
            BitDepth::Pcm24 => Some(24),
            BitDepth::Float32 => None,
        }
    }
}

impl std::str::FromStr for BitDepth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "16" => Ok(BitDepth::Pcm16),
            "24" => Ok(BitDepth::Pcm24),
            "float32" | "f32" | "32f" => Ok(BitDepth::Float32),
            other => Err(Error::Format(format!(
                "unknown bit depth {other:?} (expected 16, 24 or float32)"
            ))),
        }
    }
}

impl std::fmt::Display for BitDepth {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            BitDepth::Pcm16 => "16",
            BitDepth::Pcm24 => "24",
            BitDepth::Float32 => "float32",
        })
    }
}

/// Outcome of an integer-PCM export.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteReport {
    /// Samples outside nominal full scale that were saturated.
    pub clipped: usize,
}

fn map_hound(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e)
            if e.kind() == io::ErrorKind::UnexpectedEof || e.to_string().contains("enough bytes") =>
        {
            Error::Corrupt(format!("truncated file ({e})"))
        }
        hound::Error::IoError(e) => Error::Io(e),
        hound::Error::FormatError(msg) => Error::Corrupt(msg.to_string()),
        hound::Error::Unsupported => Error::Format("unsupported WAV encoding".into()),
        hound::Error::TooWide => Error::Format("sample width too large".into()),
        hound::Error::UnfinishedSample => Error::Corrupt("unfinished sample".into()),
        hound::Error::InvalidSampleFormat => Error::Format("invalid sample format".into()),
    }
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioBuffer> {
    read_wav_with_depth(path).map(|(buffer, _)| buffer)
}

/// Reads a WAV file and reports the encoding it was stored with.
pub fn read_wav_with_depth(path: impl AsRef<Path>) -> Result<(AudioBuffer, BitDepth)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::at(path, e))?;
    let mut reader = hound::WavReader::new(BufReader::new(file)).map_err(map_hound)?;
    let spec = reader.spec();
    let declared = reader.len() as usize;
    let channels = spec.channels as usize;
    if !(1..=2).contains(&channels) {
        return Err(Error::Format(format!(
            "{}: {channels} channels (only mono and stereo are supported)",
            path.display()
        )));
    }

    let (depth, interleaved): (BitDepth, Vec<f64>) = match (spec.sample_format, spec.bits_per_sample)
    {
        (hound::SampleFormat::Float, 32) => {
            let samples = reader
                .samples::<f32>()
                .map(|s| s.map(f64::from))
                .collect::<Result<Vec<_>, _>>()
                .map_err(map_hound)?;
            (BitDepth::Float32, samples)
        }
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let scale = f64::from(1u32 << (bits - 1));
            let samples = reader
                .samples::<i32>()
                .map(|s| s.map(|v| f64::from(v) / scale))
                .collect::<Result<Vec<_>, _>>()
                .map_err(map_hound)?;
            let depth = if bits == 16 {
                BitDepth::Pcm16
            } else {
                BitDepth::Pcm24
            };
            (depth, samples)
        }
        (format, bits) => {
            return Err(Error::Format(format!(
                "{}: {bits}-bit {format:?} samples",
                path.display()
            )))
        }
    };

    if interleaved.len() < declared {
        return Err(Error::Corrupt(format!(
            "{}: data chunk holds {} of {declared} declared samples",
            path.display(),
            interleaved.len()
        )));
    }
    if interleaved.len() % channels != 0 {
        return Err(Error::Corrupt("partial sample frame".into()));
    }
    let frames = interleaved.len() / channels;
    let mut data = vec![Vec::with_capacity(frames); channels];
    for frame in interleaved.chunks_exact(channels) {
        for (c, &s) in frame.iter().enumerate() {
            data[c].push(s);
        }
    }
    let buffer = AudioBuffer::new(spec.sample_rate, data)?;
    Ok((buffer, depth))
}

/// Writes `buffer` as WAV. Integer depths saturate; the report counts samples
/// that were outside `[-1, 1)` and got clipped.
pub fn write_wav(buffer: &AudioBuffer, path: impl AsRef<Path>, depth: BitDepth) -> Result<WriteReport> {
    let path = path.as_ref();
    let spec = hound::WavSpec {
        channels: buffer.channels() as u16,
        sample_rate: buffer.sample_rate(),
        bits_per_sample: depth.int_bits().unwrap_or(32),
        sample_format: match depth {
            BitDepth::Float32 => hound::SampleFormat::Float,
            _ => hound::SampleFormat::Int,
        },
    };
    let file = File::create(path).map_err(|e| Error::at(path, e))?;
    let mut writer = hound::WavWriter::new(BufWriter::new(file), spec).map_err(map_hound)?;
    let mut report = WriteReport::default();

    match depth.int_bits() {
        None => {
            for n in 0..buffer.len() {
                for c in 0..buffer.channels() {
                    writer
                        .write_sample(buffer.data[c][n] as f32)
                        .map_err(map_hound)?;
                }
            }
        }
        Some(bits) => {
            let scale = f64::from(1u32 << (bits - 1));
            let max = scale - 1.0;
            let min = -scale;
            for n in 0..buffer.len() {
                for c in 0..buffer.channels() {
                    let x = buffer.data[c][n];
                    if !(-1.0..1.0).contains(&x) {
                        report.clipped += 1;
                    }
                    let code = (x * scale).round().clamp(min, max) as i32;
                    writer.write_sample(code).map_err(map_hound)?;
                }
            }
        }
    }
    writer.finalize().map_err(map_hound)?;
    Ok(report)
}
