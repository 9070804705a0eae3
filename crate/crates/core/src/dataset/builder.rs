use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::pool::{StemPool, STEM_ROLES};
use crate::audio::{read_wav, write_wav, AudioBuffer, BitDepth};
use crate::dynamics::{apply_limiter, GainEnvelope, LimiterParams};
use crate::error::{Error, Result};
use crate::net::Pair;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";

/// Augmentation settings of [`random_mix`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixOptions {
    /// Stem gains are uniform in `±max_gain_db`.
    pub max_gain_db: f64,
    pub swap_probability: f64,
    /// Mixtures peaking above this are scaled down to it.
    pub peak_guard: f64,
    /// Without augmentation all four stems come from one track at 0 dB.
    pub augment: bool,
}

impl Default for MixOptions {
    fn default() -> Self {
        Self {
            max_gain_db: 6.0,
            swap_probability: 0.5,
            peak_guard: 0.99,
            augment: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemDraw {
    pub role: String,
    pub track_id: usize,
    pub track: String,
    pub offset_samples: usize,
    pub gain_db: f64,
    pub swapped: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixProvenance {
    pub stems: Vec<StemDraw>,
    /// Peak-guard factor applied to the summed stems (1 when not needed).
    pub peak_scale: f64,
}

fn db_to_gain(db: f64) -> f64 {
    10f64.powf(db / 20.0)
}

/// Sums the stems a provenance describes.
pub fn mix_from_provenance(
    pool: &StemPool,
    prov: &MixProvenance,
    segment_samples: usize,
) -> Result<AudioBuffer> {
    let channels = pool.channels();
    let mut data = vec![vec![0.0; segment_samples]; channels];
    for draw in &prov.stems {
        let role = STEM_ROLES
            .iter()
            .position(|r| *r == draw.role)
            .ok_or_else(|| Error::Build(format!("unknown stem role {:?}", draw.role)))?;
        let track = pool
            .tracks()
            .get(draw.track_id)
            .ok_or_else(|| Error::Build(format!("track {} not in pool", draw.track_id)))?;
        if draw.offset_samples + segment_samples > track.len() {
            return Err(Error::Build(format!("{}: segment runs past the end", track.name)));
        }
        let gain = db_to_gain(draw.gain_db);
        for (c, out) in data.iter_mut().enumerate() {
            let src = if draw.swapped { channels - 1 - c } else { c };
            let stem = &track.stems[role].channel(src)[draw.offset_samples..][..segment_samples];
            for (o, s) in out.iter_mut().zip(stem) {
                *o += gain * s;
            }
        }
    }
    for c in &mut data {
        for v in c.iter_mut() {
            *v *= prov.peak_scale;
        }
    }
    AudioBuffer::new(pool.sample_rate(), data)
}

/// Draws one augmented mixture of `segment_samples` samples.
pub fn random_mix(
    pool: &StemPool,
    rng: &mut impl Rng,
    segment_samples: usize,
    options: &MixOptions,
) -> Result<(AudioBuffer, MixProvenance)> {
    let eligible = pool.eligible(segment_samples);
    if eligible.is_empty() {
        return Err(Error::Build(format!(
            "no track is at least {segment_samples} samples long"
        )));
    }
    let pick = |rng: &mut dyn rand::RngCore| eligible[rng.gen_range(0..eligible.len())];
    let shared = (!options.augment).then(|| {
        let track = pick(rng);
        let offset = rng.gen_range(0..=pool.tracks()[track].len() - segment_samples);
        (track, offset)
    });
    let stems = STEM_ROLES
        .iter()
        .map(|role| {
            let (track_id, offset_samples, gain_db, swapped) = match shared {
                Some((track, offset)) => (track, offset, 0.0, false),
                None => {
                    let track = pick(rng);
                    let offset = rng.gen_range(0..=pool.tracks()[track].len() - segment_samples);
                    let gain = if options.max_gain_db > 0.0 {
                        rng.gen_range(-options.max_gain_db..=options.max_gain_db)
                    } else {
                        0.0
                    };
                    let swap = pool.channels() == 2 && rng.gen_bool(options.swap_probability);
                    (track, offset, gain, swap)
                }
            };
            StemDraw {
                role: role.to_string(),
                track_id,
                track: pool.tracks()[track_id].name.clone(),
                offset_samples,
                gain_db,
                swapped,
            }
        })
        .collect();
    let mut prov = MixProvenance { stems, peak_scale: 1.0 };
    let raw = mix_from_provenance(pool, &prov, segment_samples)?;
    let peak = raw.peak();
    if peak > options.peak_guard {
        prov.peak_scale = options.peak_guard / peak;
        let mix = mix_from_provenance(pool, &prov, segment_samples)?;
        return Ok((mix, prov));
    }
    Ok((raw, prov))
}

/// Randomized limiter settings for one training pair.
pub fn sample_limiter_params(rng: &mut impl Rng) -> LimiterParams {
    let input_gain_db = rng.gen_range(2.0..=12.0);
    let attack_ms = rng.gen_range(1.0..=5.0);
    let release_ms = (rng.gen_range(30f64.ln()..=300f64.ln())).exp();
    LimiterParams {
        input_gain_db,
        ceiling: 0.98,
        attack_ms,
        release_ms,
        lookahead_ms: attack_ms + 1.0,
    }
}

/// Generator state of segment `id`; independent of build order.
pub fn segment_rng(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub schema_version: u32,
    pub segment_id: u64,
    pub seed: u64,
    pub segment_samples: usize,
    pub sample_rate: u32,
    pub stems: Vec<StemDraw>,
    pub peak_scale: f64,
    pub limiter: LimiterParams,
    /// Paths relative to the dataset directory.
    pub input: String,
    pub target: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub record: SegmentRecord,
    pub limited: AudioBuffer,
    pub target: AudioBuffer,
    pub envelope: GainEnvelope,
}

impl Segment {
    pub fn pair(&self) -> Pair {
        Pair {
            limited: self.limited.clone(),
            target: self.target.clone(),
        }
    }
}

fn segment_paths(id: u64) -> (String, String) {
    (format!("input/{id:06}.wav"), format!("target/{id:06}.wav"))
}

pub fn build_segment(
    pool: &StemPool,
    seed: u64,
    id: u64,
    segment_samples: usize,
    options: &MixOptions,
) -> Result<Segment> {
    let mut rng = segment_rng(seed, id);
    let (target, prov) = random_mix(pool, &mut rng, segment_samples, options)?;
    let limiter = sample_limiter_params(&mut rng);
    let (limited, envelope) = apply_limiter(&target, &limiter)?;
    let (input, target_path) = segment_paths(id);
    Ok(Segment {
        record: SegmentRecord {
            schema_version: MANIFEST_SCHEMA_VERSION,
            segment_id: id,
            seed,
            segment_samples,
            sample_rate: pool.sample_rate(),
            stems: prov.stems,
            peak_scale: prov.peak_scale,
            limiter,
            input,
            target: target_path,
        },
        limited,
        target,
        envelope,
    })
}

/// Reproduces a segment from its record alone.
pub fn rebuild_segment(pool: &StemPool, record: &SegmentRecord) -> Result<Segment> {
    let prov = MixProvenance {
        stems: record.stems.clone(),
        peak_scale: record.peak_scale,
    };
    let target = mix_from_provenance(pool, &prov, record.segment_samples)?;
    let (limited, envelope) = apply_limiter(&target, &record.limiter)?;
    Ok(Segment {
        record: record.clone(),
        limited,
        target,
        envelope,
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub records: Vec<SegmentRecord>,
}

impl DatasetManifest {
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::at(path, e))?;
        let mut out = BufWriter::new(file);
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n").map_err(|e| Error::at(path, e))?;
        }
        out.flush().map_err(|e| Error::at(path, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::at(path, e))?;
        let mut records = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(|e| Error::at(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let record: SegmentRecord = serde_json::from_str(&line)?;
            if record.schema_version != MANIFEST_SCHEMA_VERSION {
                return Err(Error::Format(format!(
                    "manifest schema {} (expected {MANIFEST_SCHEMA_VERSION})",
                    record.schema_version
                )));
            }
            records.push(record);
        }
        Ok(Self { records })
    }
}

/// Writes `count` (limited, original) pairs plus the manifest into `out_dir`.
/// On failure every file written so far is removed.
pub fn build_dataset(
    pool: &StemPool,
    out_dir: impl AsRef<Path>,
    count: usize,
    segment_seconds: f64,
    seed: u64,
    options: &MixOptions,
) -> Result<DatasetManifest> {
    let out_dir = out_dir.as_ref();
    if count == 0 {
        return Err(Error::Config("dataset count must be at least 1".into()));
    }
    let segment_samples = (segment_seconds * f64::from(pool.sample_rate())).round() as usize;
    if segment_samples == 0 {
        return Err(Error::Config(format!("segment of {segment_seconds} s is empty")));
    }
    let skipped = pool.tracks().len() - pool.eligible(segment_samples).len();
    if skipped > 0 {
        log::warn!("skipping {skipped} track(s) shorter than {segment_seconds} s");
    }
    let mut written: Vec<PathBuf> = Vec::new();
    let result = write_all(pool, out_dir, count, segment_samples, seed, options, &mut written);
    if result.is_err() {
        for p in written.iter().rev() {
            let _ = fs::remove_file(p);
        }
        for sub in ["input", "target"] {
            let _ = fs::remove_dir(out_dir.join(sub));
        }
    }
    result
}

fn write_all(
    pool: &StemPool,
    out_dir: &Path,
    count: usize,
    segment_samples: usize,
    seed: u64,
    options: &MixOptions,
    written: &mut Vec<PathBuf>,
) -> Result<DatasetManifest> {
    for sub in ["input", "target"] {
        let d = out_dir.join(sub);
        fs::create_dir_all(&d).map_err(|e| Error::at(&d, e))?;
    }
    let mut manifest = DatasetManifest::default();
    for id in 0..count as u64 {
        let seg = build_segment(pool, seed, id, segment_samples, options)?;
        let input = out_dir.join(&seg.record.input);
        written.push(input.clone());
        write_wav(&seg.limited, &input, BitDepth::Float32)?;
        let target = out_dir.join(&seg.record.target);
        written.push(target.clone());
        write_wav(&seg.target, &target, BitDepth::Float32)?;
        manifest.records.push(seg.record);
    }
    let path = out_dir.join(MANIFEST_FILE);
    written.push(path.clone());
    manifest.write(&path)?;
    Ok(manifest)
}

/// Reads a built dataset back as training pairs, in manifest order.
pub fn load_dataset(dir: impl AsRef<Path>) -> Result<(DatasetManifest, Vec<Pair>)> {
    let dir = dir.as_ref();
    let manifest = DatasetManifest::read(dir.join(MANIFEST_FILE))?;
    let pairs = manifest
        .records
        .iter()
        .map(|r| {
            Ok(Pair {
                limited: read_wav(dir.join(&r.input))?,
                target: read_wav(dir.join(&r.target))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((manifest, pairs))
}

/// Endless stream of freshly mixed pairs; batch `i` depends only on the
/// seed and `i`.
#[derive(Debug, Clone)]
pub struct OnTheFlySampler<'a> {
    pool: &'a StemPool,
    seed: u64,
    batch_size: usize,
    segment_samples: usize,
    options: MixOptions,
}

impl<'a> OnTheFlySampler<'a> {
    pub fn new(pool: &'a StemPool, seed: u64, batch_size: usize, segment_samples: usize, options: MixOptions) -> Result<Self> {
        if batch_size == 0 || segment_samples == 0 {
            return Err(Error::Config("batch size and segment length must be positive".into()));
        }
        if pool.eligible(segment_samples).is_empty() {
            return Err(Error::Build(format!("no track is at least {segment_samples} samples long")));
        }
        Ok(Self {
            pool,
            seed,
            batch_size,
            segment_samples,
            options,
        })
    }

    pub fn batch(&self, index: u64) -> Result<Vec<Segment>> {
        let first = index * self.batch_size as u64;
        (first..first + self.batch_size as u64)
            .map(|id| build_segment(self.pool, self.seed, id, self.segment_samples, &self.options))
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Result<Vec<Segment>>> + '_ {
        (0..).map(move |i| self.batch(i))
    }
}
