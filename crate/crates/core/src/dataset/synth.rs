//! Procedural four-stem tracks so everything runs without licensed audio.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::pool::{StemPool, Track, STEM_ROLES};
use crate::audio::{write_wav, AudioBuffer, BitDepth};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub tracks: usize,
    pub seconds: f64,
    pub sample_rate: u32,
    pub channels: usize,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            tracks: 8,
            seconds: 20.0,
            sample_rate: 16000,
            channels: 2,
            seed: 0,
        }
    }
}

/// Overall stem level; mixtures usually exceed the peak guard.
const STEM_LEVEL: f64 = 2.5;

struct Ctx {
    rate: f64,
    len: usize,
    beat: f64,
}

impl Ctx {
    fn secs(&self, n: usize) -> f64 {
        n as f64 / self.rate
    }

    fn at(&self, t: f64) -> usize {
        (t * self.rate) as usize
    }
}

/// Adds `f(dt)` for `dt` in `[0, dur)` starting at time `start`.
fn add_event(out: &mut [f64], ctx: &Ctx, start: f64, dur: f64, mut f: impl FnMut(f64) -> f64) {
    let from = ctx.at(start);
    let to = ctx.at(start + dur).min(ctx.len);
    for n in from..to {
        out[n] += f(ctx.secs(n - from));
    }
}

fn drums(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; ctx.len];
    let steps = (ctx.secs(ctx.len) / (ctx.beat / 2.0)) as usize;
    for s in 0..steps {
        let t = s as f64 * ctx.beat / 2.0;
        let vel = rng.gen_range(0.6..1.0);
        let on_beat = s % 2 == 0;
        let beat = s / 2;
        if on_beat && (beat % 2 == 0 || rng.gen_bool(0.2)) {
            let mut phase = 0.0;
            add_event(&mut out, ctx, t, 0.4, |dt| {
                let f = 45.0 + 70.0 * (-dt / 0.03).exp();
                phase += 2.0 * PI * f / ctx.rate;
                0.7 * vel * (-dt / 0.12).exp() * phase.sin()
            });
        }
        if on_beat && beat % 2 == 1 {
            let noise: Vec<f64> = (0..ctx.at(0.25) + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut i = 0;
            add_event(&mut out, ctx, t, 0.25, |dt| {
                i += 1;
                vel * (0.4 * noise[i - 1] * (-dt / 0.07).exp() + 0.25 * (2.0 * PI * 185.0 * dt).sin() * (-dt / 0.04).exp())
            });
        }
        let mut prev = 0.0;
        let hat: Vec<f64> = (0..ctx.at(0.06) + 1).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut i = 0;
        add_event(&mut out, ctx, t, 0.06, |dt| {
            let v = hat[i];
            i += 1;
            let hp = v - prev;
            prev = v;
            0.08 * vel * hp * (-dt / 0.015).exp()
        });
    }
    out
}

fn bass(ctx: &Ctx, rng: &mut ChaCha8Rng, root: f64) -> Vec<f64> {
    let mut out = vec![0.0; ctx.len];
    let steps = (ctx.secs(ctx.len) / ctx.beat) as usize;
    let intervals = [0.0, 0.0, 3.0, 5.0, 7.0, 10.0, 12.0];
    for s in 0..steps {
        let semis = intervals[rng.gen_range(0..intervals.len())];
        let f = root * 2f64.powf(semis / 12.0);
        let dur = ctx.beat * rng.gen_range(0.5..1.0);
        let amp = rng.gen_range(0.25..0.4);
        add_event(&mut out, ctx, s as f64 * ctx.beat, dur, |dt| {
            let env = (dt / 0.005).min(1.0) * (-dt / 0.4).exp() * (1.0 - dt / dur).max(0.0).sqrt();
            let w = 2.0 * PI * f * dt;
            amp * env * (w.sin() + 0.4 * (2.0 * w).sin() + 0.2 * (3.0 * w).sin())
        });
    }
    out
}

fn vocals(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = vec![0.0; ctx.len];
    let total = ctx.secs(ctx.len);
    let mut t = rng.gen_range(0.0..1.0);
    while t < total {
        let dur = rng.gen_range(1.0..3.0);
        let f0 = rng.gen_range(180.0..360.0);
        let amp = rng.gen_range(0.12..0.3);
        let glide = rng.gen_range(-0.1..0.1);
        let mut phase = 0.0;
        add_event(&mut out, ctx, t, dur, |dt| {
            let f = f0 * (1.0 + glide * dt / dur) * (1.0 + 0.01 * (2.0 * PI * 5.5 * dt).sin());
            phase += 2.0 * PI * f / ctx.rate;
            let env = (dt / 0.08).min(1.0) * ((dur - dt) / 0.15).clamp(0.0, 1.0);
            let voice: f64 = (1..=6)
                .map(|h| {
                    let hf = f * h as f64;
                    let formant = (-((hf - 700.0) / 400.0).powi(2)).exp() + 0.5 * (-((hf - 1200.0) / 500.0).powi(2)).exp();
                    (0.3 + formant) / h as f64 * (h as f64 * phase).sin()
                })
                .sum();
            amp * env * voice
        });
        t += dur + rng.gen_range(0.2..1.5);
    }
    out
}

fn other(ctx: &Ctx, rng: &mut ChaCha8Rng, root: f64) -> Vec<f64> {
    let mut out = vec![0.0; ctx.len];
    let bar = 4.0 * ctx.beat;
    let bars = (ctx.secs(ctx.len) / bar).ceil() as usize;
    let chords = [[0.0, 4.0, 7.0], [5.0, 9.0, 12.0], [7.0, 11.0, 14.0], [-3.0, 0.0, 4.0]];
    for b in 0..bars {
        let chord = chords[rng.gen_range(0..chords.len())];
        let amp = rng.gen_range(0.05..0.1);
        let trem = rng.gen_range(2.0..6.0);
        add_event(&mut out, ctx, b as f64 * bar, bar, |dt| {
            let env = (dt / 0.05).min(1.0) * ((bar - dt) / 0.05).clamp(0.0, 1.0);
            let tone: f64 = chord
                .iter()
                .map(|s| (2.0 * PI * 4.0 * root * 2f64.powf(s / 12.0) * dt).sin())
                .sum();
            amp * env * (1.0 + 0.3 * (2.0 * PI * trem * dt).sin()) * tone
        });
        for k in 0..8 {
            if rng.gen_bool(0.4) {
                let f = 8.0 * root * 2f64.powf(chord[rng.gen_range(0..3)] / 12.0);
                let a = rng.gen_range(0.05..0.15);
                add_event(&mut out, ctx, b as f64 * bar + k as f64 * ctx.beat / 2.0, 0.3, |dt| {
                    a * (-dt / 0.08).exp() * (2.0 * PI * f * dt).sin()
                });
            }
        }
    }
    out
}

/// Slow section-level loudness changes so tracks have some macro dynamics.
fn sections(ctx: &Ctx, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let width = ctx.at(4.0 * ctx.beat * 2.0).max(1);
    let levels: Vec<f64> = (0..ctx.len / width + 2).map(|_| rng.gen_range(0.5..1.0)).collect();
    (0..ctx.len)
        .map(|n| {
            let pos = n as f64 / width as f64;
            let i = pos as usize;
            let frac = pos - i as f64;
            levels[i] * (1.0 - frac) + levels[i + 1] * frac
        })
        .collect()
}

fn spread(mono: Vec<f64>, channels: usize, pan: f64, delay: usize) -> Vec<Vec<f64>> {
    if channels == 1 {
        return vec![mono];
    }
    let theta = pan * PI / 2.0;
    let (l, r) = (theta.cos() * 2f64.sqrt(), theta.sin() * 2f64.sqrt());
    let left = mono.iter().map(|v| v * l).collect();
    let right = (0..mono.len())
        .map(|n| if n >= delay { mono[n - delay] * r } else { 0.0 })
        .collect();
    vec![left, right]
}

/// Stored as float32, so generated samples are rounded to that precision up
/// front; a pool written to disk and read back is identical.
fn quantize(data: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    data.into_iter()
        .map(|c| c.into_iter().map(|v| f64::from(v as f32)).collect())
        .collect()
}

pub fn synth_track(options: &SynthOptions, index: usize) -> Result<Track> {
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    rng.set_stream(index as u64);
    let ctx = Ctx {
        rate: f64::from(options.sample_rate),
        len: (options.seconds * f64::from(options.sample_rate)).round() as usize,
        beat: 60.0 / rng.gen_range(90.0..140.0),
    };
    let root = 41.2 * 2f64.powf(rng.gen_range(0..7) as f64 / 12.0);
    let macro_env = sections(&ctx, &mut rng);
    let raw = [
        vocals(&ctx, &mut rng),
        bass(&ctx, &mut rng, root),
        drums(&ctx, &mut rng),
        other(&ctx, &mut rng, root),
    ];
    let stems = raw
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let pan = 0.5 + rng.gen_range(-0.25..0.25);
            let delay = if i == 3 { rng.gen_range(0..12) } else { 0 };
            let shaped: Vec<f64> = s.iter().zip(&macro_env).map(|(v, e)| STEM_LEVEL * v * e).collect();
            AudioBuffer::new(options.sample_rate, quantize(spread(shaped, options.channels, pan, delay)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Track {
        name: format!("synth_{index:03}"),
        stems,
        mixture: None,
    })
}

pub fn synth_pool(options: &SynthOptions) -> Result<StemPool> {
    if options.tracks == 0 || !(options.seconds > 0.0) {
        return Err(Error::Config("synthetic pool needs at least one track of positive length".into()));
    }
    StemPool::new((0..options.tracks).map(|i| synth_track(options, i)).collect::<Result<Vec<_>>>()?)
}

/// Writes a pool in the layout [`StemPool::load`] reads.
pub fn write_pool(pool: &StemPool, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    for track in pool.tracks() {
        let track_dir = dir.join(&track.name);
        fs::create_dir_all(&track_dir).map_err(|e| Error::at(&track_dir, e))?;
        for (role, stem) in STEM_ROLES.iter().zip(&track.stems) {
            write_wav(stem, track_dir.join(format!("{role}.wav")), BitDepth::Float32)?;
        }
    }
    Ok(())
}
