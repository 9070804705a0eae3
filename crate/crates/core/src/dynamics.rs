//! Lookahead peak limiter with exact gain-envelope export, and the operations
//! built on that envelope: oracle inversion, gain-inversion targets, parallel
//! mixing and stem-wise gain transfer.

use std::collections::VecDeque;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::audio::{self, AudioBuffer, BitDepth};
use crate::error::{Error, Result};

/// Forward limiter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimiterParams {
    /// Pre-limiter drive in dB.
    pub input_gain_db: f64,
    /// Output sample-peak ceiling, linear.
    pub ceiling: f64,
    pub attack_ms: f64,
    pub release_ms: f64,
    pub lookahead_ms: f64,
}

impl Default for LimiterParams {
    fn default() -> Self {
        Self {
            input_gain_db: 0.0,
            ceiling: 0.98,
            attack_ms: 2.0,
            release_ms: 100.0,
            lookahead_ms: 3.0,
        }
    }
}

impl LimiterParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.input_gain_db,
            self.ceiling,
            self.attack_ms,
            self.release_ms,
            self.lookahead_ms,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("limiter parameters must be finite".into()));
        }
        if !(self.ceiling > 0.0 && self.ceiling <= 1.0) {
            return Err(Error::Config(format!(
                "ceiling {} outside (0, 1]",
                self.ceiling
            )));
        }
        if self.attack_ms <= 0.0 || self.release_ms <= 0.0 {
            return Err(Error::Config("attack and release must be positive".into()));
        }
        if self.lookahead_ms < self.attack_ms {
            return Err(Error::Config(format!(
                "lookahead {} ms shorter than attack {} ms",
                self.lookahead_ms, self.attack_ms
            )));
        }
        Ok(())
    }

    pub fn input_gain(&self) -> f64 {
        10f64.powf(self.input_gain_db / 20.0)
    }

    pub fn lookahead_samples(&self, sample_rate: u32) -> usize {
        ms_to_samples(self.lookahead_ms, sample_rate).max(1)
    }

    /// One-pole coefficients `(attack, release)` at `sample_rate`.
    pub fn smoothing_coefficients(&self, sample_rate: u32) -> (f64, f64) {
        let coef = |ms: f64| (-1.0 / (ms * 1e-3 * f64::from(sample_rate))).exp();
        (coef(self.attack_ms), coef(self.release_ms))
    }
}

fn ms_to_samples(ms: f64, sample_rate: u32) -> usize {
    (ms * 1e-3 * f64::from(sample_rate)).round() as usize
}

/// Stereo-linked per-sample linear gains, each in `(0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GainEnvelope {
    gains: Vec<f64>,
}

impl GainEnvelope {
    pub fn new(gains: Vec<f64>) -> Result<Self> {
        if let Some((i, g)) = gains
            .iter()
            .enumerate()
            .find(|(_, g)| !(g.is_finite() && **g > 0.0 && **g <= 1.0))
        {
            return Err(Error::Format(format!("gain {g} at index {i} outside (0, 1]")));
        }
        Ok(Self { gains })
    }

    pub fn unity(len: usize) -> Self {
        Self {
            gains: vec![1.0; len],
        }
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn len(&self) -> usize {
        self.gains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gains.is_empty()
    }

    /// Smallest gain, `1.0` for an empty envelope.
    pub fn min(&self) -> f64 {
        self.gains.iter().copied().fold(1.0, f64::min)
    }

    /// Single-channel float32 WAV.
    pub fn write_wav(&self, path: impl AsRef<Path>, sample_rate: u32) -> Result<()> {
        let buffer = AudioBuffer::mono(sample_rate, self.gains.clone())?;
        audio::write_wav(&buffer, path, BitDepth::Float32)?;
        Ok(())
    }

    /// Headerless little-endian float32.
    pub fn write_raw(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let bytes: Vec<u8> = self
            .gains
            .iter()
            .flat_map(|&g| (g as f32).to_le_bytes())
            .collect();
        fs::write(path, bytes).map_err(|e| Error::at(path, e))
    }

    pub fn read_raw(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::at(path, e))?;
        if bytes.len() % 4 != 0 {
            return Err(Error::Corrupt(format!(
                "{}: length {} is not a multiple of 4",
                path.display(),
                bytes.len()
            )));
        }
        let gains = bytes
            .chunks_exact(4)
            .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])))
            .collect();
        Self::new(gains)
    }

    pub fn read_wav(path: impl AsRef<Path>) -> Result<Self> {
        let buffer = audio::read_wav(path)?;
        if buffer.channels() != 1 {
            return Err(Error::Format("gain envelope must be single-channel".into()));
        }
        Self::new(buffer.into_data().swap_remove(0))
    }

    /// Picks the format from the extension: `.wav` or anything else as raw f32.
    pub fn write(&self, path: impl AsRef<Path>, sample_rate: u32) -> Result<()> {
        if is_wav(path.as_ref()) {
            self.write_wav(path, sample_rate)
        } else {
            self.write_raw(path)
        }
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        if is_wav(path.as_ref()) {
            Self::read_wav(path)
        } else {
            Self::read_raw(path)
        }
    }
}

fn is_wav(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("wav"))
}

/// `out[n] = op` over the window `values[n .. n + width)`, truncated at the end.
fn forward_window(values: &[f64], width: usize, keep_first: impl Fn(f64, f64) -> bool) -> Vec<f64> {
    let len = values.len();
    let mut out = vec![0.0; len];
    // Indices whose values are monotone under `keep_first`; front is the extremum.
    let mut window: VecDeque<usize> = VecDeque::with_capacity(width + 1);
    for n in (0..len).rev() {
        while let Some(&back) = window.back() {
            if keep_first(values[n], values[back]) {
                window.pop_back();
            } else {
                break;
            }
        }
        window.push_back(n);
        while let Some(&front) = window.front() {
            if front >= n + width {
                window.pop_front();
            } else {
                break;
            }
        }
        out[n] = values[*window.front().unwrap()];
    }
    out
}

/// `ceiling / peak` capped at 1, rounded down so that `peak * gain <= ceiling`
/// holds in floating point.
fn target_gain(peak: f64, ceiling: f64) -> f64 {
    if peak <= ceiling {
        return 1.0;
    }
    let mut g = ceiling / peak;
    while peak * g > ceiling {
        g = g.next_down();
    }
    g
}

/// Runs the limiter. Returns the limited signal and the gain envelope such that
/// `output[c][n] == input_gain * input[c][n] * g[n]`.
pub fn apply_limiter(buffer: &AudioBuffer, params: &LimiterParams) -> Result<(AudioBuffer, GainEnvelope)> {
    params.validate()?;
    let rate = buffer.sample_rate();
    let len = buffer.len();
    let drive = params.input_gain();

    let boosted: Vec<Vec<f64>> = buffer
        .data()
        .iter()
        .map(|c| c.iter().map(|s| s * drive).collect())
        .collect();
    let instant_peak: Vec<f64> = (0..len)
        .map(|n| boosted.iter().fold(0.0_f64, |acc, c| acc.max(c[n].abs())))
        .collect();

    let lookahead = params.lookahead_samples(rate);
    let window_peak = forward_window(&instant_peak, lookahead, |a, b| a >= b);
    let target: Vec<f64> = window_peak
        .iter()
        .map(|&p| target_gain(p, params.ceiling))
        .collect();
    let held = forward_window(&target, lookahead, |a, b| a <= b);

    let (attack, release) = params.smoothing_coefficients(rate);
    let mut gains = Vec::with_capacity(len);
    let mut state = 1.0_f64;
    for n in 0..len {
        let goal = held[n];
        let coef = if goal < state { attack } else { release };
        state = goal + (state - goal) * coef;
        // The one-pole never quite reaches its goal; the hard floor keeps the
        // current sample under the ceiling.
        let g = state.min(target_gain(instant_peak[n], params.ceiling));
        state = g;
        gains.push(g);
    }

    let data = boosted
        .into_iter()
        .map(|c| c.iter().zip(&gains).map(|(s, g)| s * g).collect())
        .collect();
    let output = AudioBuffer::from_parts_unchecked(rate, data);
    Ok((output, GainEnvelope { gains }))
}

/// Divides the limiter's gains back out: `y = limited / max(g, gain_floor)`.
pub fn oracle_inverse(limited: &AudioBuffer, env: &GainEnvelope, gain_floor: f64) -> Result<AudioBuffer> {
    if env.len() != limited.len() {
        return Err(Error::Dimension(format!(
            "envelope length {} vs buffer length {}",
            env.len(),
            limited.len()
        )));
    }
    if !(gain_floor > 0.0) {
        return Err(Error::Config(format!("gain floor {gain_floor} must be positive")));
    }
    let data = limited
        .data()
        .iter()
        .map(|c| {
            c.iter()
                .zip(env.gains())
                .map(|(s, g)| s / g.max(gain_floor))
                .collect()
        })
        .collect();
    AudioBuffer::new(limited.sample_rate(), data)
}

/// Ideal gain-inversion target `min(g) / g[n]`, the quantity a gain-inversion
/// network estimates.
pub fn sgi_target(env: &GainEnvelope) -> GainEnvelope {
    let floor = env.min();
    let gains = env
        .gains()
        .iter()
        .map(|&g| (floor / g).min(1.0))
        .collect();
    GainEnvelope { gains }
}

/// `ratio * limited + (1 - ratio) * delimited`.
pub fn parallel_mix(limited: &AudioBuffer, delimited: &AudioBuffer, ratio: f64) -> Result<AudioBuffer> {
    limited.check_same_shape(delimited, "parallel mix")?;
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!("mix ratio {ratio} outside [0, 1]")));
    }
    let data = limited
        .data()
        .iter()
        .zip(delimited.data())
        .map(|(a, b)| {
            a.iter()
                .zip(b)
                .map(|(x, y)| ratio * x + (1.0 - ratio) * y)
                .collect()
        })
        .collect();
    Ok(AudioBuffer::from_parts_unchecked(limited.sample_rate(), data))
}

/// Default guard below which the mix ratio is undefined and forced to 1.
pub const TRANSFER_EPSILON: f64 = 1e-8;

/// Tolerance on `sum(stems) == limited_mix`.
pub const STEM_SUM_TOLERANCE: f64 = 1e-6;

/// Applies the per-sample ratio `delimited / limited` of a mixture to each of
/// its stems.
pub fn transfer_gains(
    limited_mix: &AudioBuffer,
    delimited_mix: &AudioBuffer,
    stems: &[AudioBuffer],
    epsilon: f64,
) -> Result<Vec<AudioBuffer>> {
    limited_mix.check_same_shape(delimited_mix, "stem transfer")?;
    for stem in stems {
        limited_mix.check_same_shape(stem, "stem transfer")?;
    }
    let max_error = stem_sum_error(limited_mix, stems);
    if max_error > STEM_SUM_TOLERANCE {
        return Err(Error::StemSum { max_error });
    }

    let ratio: Vec<Vec<f64>> = limited_mix
        .data()
        .iter()
        .zip(delimited_mix.data())
        .map(|(l, d)| {
            l.iter()
                .zip(d)
                .map(|(&l, &d)| if l.abs() > epsilon { d / l } else { 1.0 })
                .collect()
        })
        .collect();

    stems
        .iter()
        .map(|stem| {
            let data = stem
                .data()
                .iter()
                .zip(&ratio)
                .map(|(s, r)| s.iter().zip(r).map(|(s, r)| s * r).collect())
                .collect();
            AudioBuffer::new(stem.sample_rate(), data)
        })
        .collect()
}

/// Max abs difference between `mix` and the sample-wise sum of `stems`.
pub fn stem_sum_error(mix: &AudioBuffer, stems: &[AudioBuffer]) -> f64 {
    let mut worst = 0.0_f64;
    for c in 0..mix.channels() {
        for n in 0..mix.len() {
            let sum: f64 = stems.iter().map(|s| s.channel(c)[n]).sum();
            worst = worst.max((sum - mix.channel(c)[n]).abs());
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::si_sdr;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Straight-line simulation of the gain computer, quadratic in the
    /// lookahead.
    fn reference_gains(buffer: &AudioBuffer, p: &LimiterParams) -> Vec<f64> {
        let rate = buffer.sample_rate();
        let len = buffer.len();
        let drive = 10f64.powf(p.input_gain_db / 20.0);
        let la = ((p.lookahead_ms * 1e-3 * rate as f64).round() as usize).max(1);
        let mut q = vec![0.0_f64; len];
        for n in 0..len {
            for c in 0..buffer.channels() {
                q[n] = q[n].max((buffer.channel(c)[n] * drive).abs());
            }
        }
        let t_of = |peak: f64| {
            if peak <= p.ceiling {
                1.0
            } else {
                let mut g = p.ceiling / peak;
                while peak * g > p.ceiling {
                    g = g.next_down();
                }
                g
            }
        };
        let mut t = vec![0.0; len];
        for n in 0..len {
            let mut m = 0.0_f64;
            for k in n..(n + la).min(len) {
                m = m.max(q[k]);
            }
            t[n] = t_of(m);
        }
        let a = (-1.0 / (p.attack_ms * 1e-3 * rate as f64)).exp();
        let r = (-1.0 / (p.release_ms * 1e-3 * rate as f64)).exp();
        let mut g = Vec::with_capacity(len);
        let mut prev = 1.0;
        for n in 0..len {
            let mut h = 1.0_f64;
            for k in n..(n + la).min(len) {
                h = h.min(t[k]);
            }
            let coef = if h < prev { a } else { r };
            let s = h + (prev - h) * coef;
            let v = s.min(t_of(q[n]));
            g.push(v);
            prev = v;
        }
        g
    }

    fn music_like(rng: &mut ChaCha8Rng, rate: u32, len: usize, channels: usize) -> AudioBuffer {
        let f1 = rng.gen_range(50.0..400.0);
        let f2 = rng.gen_range(400.0..3000.0);
        let hit = rng.gen_range(0.05..0.3);
        let data = (0..channels)
            .map(|c| {
                (0..len)
                    .map(|n| {
                        let t = n as f64 / rate as f64;
                        let beat = (t / hit).fract();
                        let env = (-beat * 20.0).exp();
                        0.4 * (2.0 * std::f64::consts::PI * f1 * t).sin()
                            + 0.3 * env * (2.0 * std::f64::consts::PI * f2 * t + c as f64).sin()
                            + 0.2 * env * rng.gen_range(-1.0..1.0)
                    })
                    .collect()
            })
            .collect();
        AudioBuffer::new(rate, data).unwrap()
    }

    #[test]
    fn below_threshold_is_pure_gain() {
        let buffer = AudioBuffer::mono(44100, vec![0.1, -0.2, 0.3, 0.0]).unwrap();
        let params = LimiterParams {
            input_gain_db: 6.0,
            ..Default::default()
        };
        let (out, env) = apply_limiter(&buffer, &params).unwrap();
        assert!(env.gains().iter().all(|&g| g == 1.0));
        let drive = params.input_gain();
        for (o, i) in out.channel(0).iter().zip(buffer.channel(0)) {
            assert_eq!(*o, drive * i);
        }
    }

    #[test]
    fn dc_steady_state_halves_gain() {
        let params = LimiterParams {
            input_gain_db: 0.0,
            ceiling: 0.5,
            attack_ms: 1.0,
            release_ms: 50.0,
            lookahead_ms: 2.0,
        };
        let buffer = AudioBuffer::mono(44100, vec![1.0; 44100]).unwrap();
        let (out, env) = apply_limiter(&buffer, &params).unwrap();
        let tail = &env.gains()[40000..];
        assert!(tail.iter().all(|g| (g - 0.5).abs() < 1e-12));
        assert!(out.channel(0)[40000..].iter().all(|s| (s - 0.5).abs() < 1e-12));
    }

    #[test]
    fn impulse_matches_reference_simulation() {
        let rate = 44100;
        let mut x = vec![0.0; 4000];
        x[1000] = 2.0 * 0.8;
        let buffer = AudioBuffer::mono(rate, x).unwrap();
        let params = LimiterParams {
            input_gain_db: 0.0,
            ceiling: 0.8,
            attack_ms: 1.0,
            release_ms: 20.0,
            lookahead_ms: 2.0,
        };
        let (out, env) = apply_limiter(&buffer, &params).unwrap();
        assert!(out.peak() <= params.ceiling);
        let reference = reference_gains(&buffer, &params);
        assert_eq!(env.gains(), &reference[..]);
        // gain starts dropping before the peak and recovers after it
        assert!(env.gains()[990] < 1.0);
        assert!(env.gains()[1000] <= 0.5);
        assert!(env.gains()[1500] > env.gains()[1001]);
    }

    #[test]
    fn random_signals_match_reference_simulation() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let buffer = music_like(&mut rng, 8000, 3000, 2);
            let params = LimiterParams {
                input_gain_db: rng.gen_range(0.0..12.0),
                ceiling: rng.gen_range(0.3..1.0),
                attack_ms: rng.gen_range(0.5..5.0),
                release_ms: rng.gen_range(10.0..300.0),
                lookahead_ms: 6.0,
            };
            let (_, env) = apply_limiter(&buffer, &params).unwrap();
            assert_eq!(env.gains(), &reference_gains(&buffer, &params)[..]);
        }
    }

    #[test]
    fn empty_buffer_gives_empty_outputs() {
        let buffer = AudioBuffer::silence(44100, 2, 0).unwrap();
        let (out, env) = apply_limiter(&buffer, &LimiterParams::default()).unwrap();
        assert!(out.is_empty());
        assert!(env.is_empty());
    }

    #[test]
    fn rejects_invalid_params() {
        let buffer = AudioBuffer::mono(44100, vec![0.0; 10]).unwrap();
        let bad = [
            LimiterParams { ceiling: 0.0, ..Default::default() },
            LimiterParams { ceiling: 1.5, ..Default::default() },
            LimiterParams { attack_ms: 0.0, ..Default::default() },
            LimiterParams { release_ms: -1.0, ..Default::default() },
            LimiterParams { attack_ms: 5.0, lookahead_ms: 4.0, ..Default::default() },
        ];
        for p in bad {
            assert!(matches!(apply_limiter(&buffer, &p), Err(Error::Config(_))), "{p:?}");
        }
    }

    #[test]
    fn oracle_inverse_examples() {
        let x = AudioBuffer::new(100, vec![vec![0.1, -0.2], vec![0.3, 0.4]]).unwrap();
        let same = oracle_inverse(&x, &GainEnvelope::unity(2), 1e-7).unwrap();
        assert_eq!(same, x);
        let half = GainEnvelope::new(vec![0.5, 0.5]).unwrap();
        let doubled = oracle_inverse(&x, &half, 1e-7).unwrap();
        assert_eq!(doubled, x.scaled(2.0));
        assert!(matches!(
            oracle_inverse(&x, &GainEnvelope::unity(3), 1e-7),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn oracle_round_trip_on_music_like_signal() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = music_like(&mut rng, 44100, 44100, 2);
        let params = LimiterParams {
            input_gain_db: 9.0,
            ..Default::default()
        };
        let (limited, env) = apply_limiter(&x, &params).unwrap();
        assert!(env.min() < 0.7);
        let restored = oracle_inverse(&limited, &env, 1e-7).unwrap();
        let sdr = si_sdr(&restored, &x.scaled(params.input_gain())).unwrap();
        assert!(sdr >= 60.0, "{sdr}");
    }

    #[test]
    fn sgi_target_examples() {
        let flat = GainEnvelope::new(vec![0.3; 5]).unwrap();
        assert!(sgi_target(&flat).gains().iter().all(|&g| g == 1.0));
        let two = GainEnvelope::new(vec![1.0, 0.5]).unwrap();
        assert_eq!(sgi_target(&two).gains(), &[0.5, 1.0]);
    }

    #[test]
    fn sgi_target_restores_up_to_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let original = music_like(&mut rng, 16000, 8000, 1);
        let env = GainEnvelope::new((0..8000).map(|_| rng.gen_range(0.2..=1.0)).collect()).unwrap();
        let limited = original.map(|s| s);
        let limited = AudioBuffer::mono(
            16000,
            limited.channel(0).iter().zip(env.gains()).map(|(s, g)| s * g).collect(),
        )
        .unwrap();
        let target = sgi_target(&env);
        let restored = AudioBuffer::mono(
            16000,
            limited.channel(0).iter().zip(target.gains()).map(|(s, g)| s * g).collect(),
        )
        .unwrap();
        assert!(si_sdr(&restored, &original).unwrap() >= 60.0);
    }

    #[test]
    fn parallel_mix_examples() {
        let a = AudioBuffer::mono(10, vec![1.0, -2.0, 0.5]).unwrap();
        let b = AudioBuffer::mono(10, vec![0.25, 4.0, -1.0]).unwrap();
        assert_eq!(parallel_mix(&a, &b, 1.0).unwrap(), a);
        assert_eq!(parallel_mix(&a, &b, 0.0).unwrap(), b);
        assert_eq!(parallel_mix(&a, &a, 0.5).unwrap(), a);
        let c = AudioBuffer::mono(10, vec![0.0; 2]).unwrap();
        assert!(matches!(parallel_mix(&a, &c, 0.5), Err(Error::Dimension(_))));
    }

    #[test]
    fn transfer_identity_and_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let stems: Vec<AudioBuffer> = (0..4).map(|_| music_like(&mut rng, 8000, 4000, 2)).collect();
        let mix = sum(&stems);
        let unchanged = transfer_gains(&mix, &mix, &stems, TRANSFER_EPSILON).unwrap();
        assert_eq!(unchanged, stems);

        let delimited = mix.map(|s| s * 1.5 + 0.01 * s.signum());
        let moved = transfer_gains(&mix, &delimited, &stems, TRANSFER_EPSILON).unwrap();
        let total = sum(&moved);
        for c in 0..2 {
            for n in 0..mix.len() {
                if mix.channel(c)[n].abs() > TRANSFER_EPSILON {
                    assert!((total.channel(c)[n] - delimited.channel(c)[n]).abs() <= 1e-5);
                }
            }
        }
    }

    #[test]
    fn transfer_rejects_inconsistent_stems() {
        let a = AudioBuffer::mono(10, vec![1.0, 1.0]).unwrap();
        let stems = vec![a.clone(), a.clone()];
        assert!(matches!(
            transfer_gains(&a, &a, &stems, TRANSFER_EPSILON),
            Err(Error::StemSum { .. })
        ));
    }

    #[test]
    fn envelope_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let env = GainEnvelope::new(vec![1.0, 0.5, 0.25, 0.75]).unwrap();
        for name in ["e.wav", "e.f32"] {
            let path = dir.path().join(name);
            env.write(&path, 44100).unwrap();
            assert_eq!(GainEnvelope::read(&path).unwrap(), env);
        }
    }

    pub(crate) fn sum(stems: &[AudioBuffer]) -> AudioBuffer {
        let mut data = stems[0].data().to_vec();
        for stem in &stems[1..] {
            for (acc, c) in data.iter_mut().zip(stem.data()) {
                for (a, s) in acc.iter_mut().zip(c) {
                    *a += s;
                }
            }
        }
        AudioBuffer::new(stems[0].sample_rate(), data).unwrap()
    }

    fn arb_case() -> impl Strategy<Value = (AudioBuffer, LimiterParams)> {
        (
            prop::collection::vec(-4.0f64..4.0, 1..600),
            any::<bool>(),
            0.0f64..18.0,
            0.05f64..=1.0,
            0.1f64..5.0,
            1.0f64..400.0,
            0.0f64..3.0,
        )
            .prop_map(|(samples, stereo, gain_db, ceiling, attack, release, extra)| {
                let data = if stereo {
                    let right = samples.iter().rev().map(|s| s * 0.7).collect();
                    vec![samples, right]
                } else {
                    vec![samples]
                };
                let params = LimiterParams {
                    input_gain_db: gain_db,
                    ceiling,
                    attack_ms: attack,
                    release_ms: release,
                    lookahead_ms: attack + extra,
                };
                (AudioBuffer::new(8000, data).unwrap(), params)
            })
    }

    proptest! {
        #[test]
        fn limiter_contract((buffer, params) in arb_case()) {
            let (out, env) = apply_limiter(&buffer, &params).unwrap();
            prop_assert!(out.peak() <= params.ceiling);
            prop_assert!(env.gains().iter().all(|&g| g > 0.0 && g <= 1.0));
            let drive = params.input_gain();
            for c in 0..buffer.channels() {
                for n in 0..buffer.len() {
                    prop_assert!(out.channel(c)[n].abs() <= (drive * buffer.channel(c)[n]).abs());
                }
            }
        }

        #[test]
        fn parallel_mix_is_affine(
            a in prop::collection::vec(-1.0f64..1.0, 16),
            b in prop::collection::vec(-1.0f64..1.0, 16),
            r in 0.0f64..=1.0,
        ) {
            let a = AudioBuffer::mono(10, a).unwrap();
            let b = AudioBuffer::mono(10, b).unwrap();
            let ab = parallel_mix(&a, &b, r).unwrap();
            let ba = parallel_mix(&b, &a, r).unwrap();
            for n in 0..16 {
                let lhs = ab.channel(0)[n] + ba.channel(0)[n];
                let rhs = a.channel(0)[n] + b.channel(0)[n];
                prop_assert!((lhs - rhs).abs() < 1e-12);
            }
        }
    }
}
