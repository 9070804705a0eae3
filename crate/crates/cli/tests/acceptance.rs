//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure. Criteria 7 and 8 train two networks and take several minutes.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use delimiter_core::dataset::{load_dataset, synth_track, SynthOptions};
use delimiter_core::dynamics::{stem_sum_error, TRANSFER_EPSILON};
use delimiter_core::metrics::{count_macs, count_macs_for_samples, count_params};
use delimiter_core::net::{build_model, evaluate_si_sdr, load_checkpoint, param_layout, Head, NetConfig};
use delimiter_core::tensor::{grad_check, ConvSpec, Graph, NormKind, NormMode, Tensor, Var};
use delimiter_core::{
    apply_limiter, dynamics_report, integrated_loudness, loudness_normalize, loudness_range, oracle_inverse, si_sdr,
    transfer_gains, AudioBuffer, LimiterParams,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn main() {
    let criteria: Vec<(&str, fn() -> Check)> = vec![
        ("C1 oracle round trip", c1_oracle_round_trip),
        ("C2 limiter contract", c2_limiter_contract),
        ("C3 loudness calibration", c3_loudness_calibration),
        ("C4 loudness range", c4_loudness_range),
        ("C5 gradient suite", c5_gradients),
        ("C6 SGI invariants", c6_sgi_invariants),
        ("C9 dynamics direction", c9_dynamics_direction),
        ("C10 stem transfer", c10_stem_transfer),
        ("C11 determinism", c11_determinism),
        ("C12 cost counters", c12_cost_counters),
        ("C7 desk-scale training", c7_desk_training),
        ("C8 head comparison", c8_head_comparison),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} ({secs:.1} s)"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {name}: {detail} ({secs:.1} s)");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
    println!("all criteria passed");
}

/// Tones, noise bursts and amplitude steps, 0.25 to 1.5 s.
fn random_signal(rng: &mut ChaCha8Rng) -> AudioBuffer {
    let rate = [8000, 16000, 22050, 44100][rng.gen_range(0..4)];
    let channels = rng.gen_range(1..=2);
    let len = (rng.gen_range(0.25..1.5) * f64::from(rate)) as usize;
    let partials: Vec<(f64, f64)> = (0..rng.gen_range(1..5))
        .map(|_| (rng.gen_range(40.0..4000.0), rng.gen_range(0.05..0.6)))
        .collect();
    let burst_start = rng.gen_range(0..len);
    let burst_len = rng.gen_range(1..len / 4 + 2);
    let burst_amp = rng.gen_range(0.0..1.5);
    let data = (0..channels)
        .map(|c| {
            (0..len)
                .map(|n| {
                    let t = n as f64 / f64::from(rate);
                    let tonal: f64 = partials
                        .iter()
                        .map(|(f, a)| a * (2.0 * PI * f * t + c as f64).sin())
                        .sum();
                    let env = if (n / (len / 3 + 1)) % 2 == 0 { 1.0 } else { 0.3 };
                    let burst = if (burst_start..burst_start + burst_len).contains(&n) {
                        burst_amp * rng.gen_range(-1.0..1.0)
                    } else {
                        0.0
                    };
                    env * tonal + burst
                })
                .collect()
        })
        .collect();
    AudioBuffer::new(rate, data).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng) -> LimiterParams {
    let attack = rng.gen_range(0.1..10.0);
    LimiterParams {
        input_gain_db: rng.gen_range(0.0..24.0),
        ceiling: rng.gen_range(0.1..=1.0),
        attack_ms: attack,
        release_ms: rng.gen_range(5.0..1000.0),
        lookahead_ms: attack + rng.gen_range(0.0..5.0),
    }
}

fn c1_oracle_round_trip() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = f64::INFINITY;
    for case in 0..50 {
        let x = random_signal(&mut rng);
        let params = random_params(&mut rng);
        let (limited, env) = apply_limiter(&x, &params).map_err(|e| e.to_string())?;
        let restored = oracle_inverse(&limited, &env, 1e-12).map_err(|e| e.to_string())?;
        let score = si_sdr(&restored, &x.scaled(params.input_gain())).map_err(|e| e.to_string())?;
        worst = worst.min(score);
        ensure(score >= 60.0, || format!("case {case}: {score:.2} dB with {params:?}"))?;
    }
    Ok(format!("50 cases, worst SI-SDR {worst:.1} dB"))
}

fn c2_limiter_contract() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut reduced = 0usize;
    for case in 0..1000 {
        let mut x = random_signal(&mut rng);
        if x.len() > 4000 {
            x = x.slice(0, 4000).unwrap();
        }
        let mut params = random_params(&mut rng);
        params.input_gain_db = rng.gen_range(-6.0..40.0);
        let (y, env) = apply_limiter(&x, &params).map_err(|e| e.to_string())?;
        ensure(y.peak() <= params.ceiling, || {
            format!("case {case}: peak {} above ceiling {}", y.peak(), params.ceiling)
        })?;
        ensure(env.gains().iter().all(|&g| g > 0.0 && g <= 1.0), || format!("case {case}: gain outside (0, 1]"))?;
        reduced += env.gains().iter().any(|&g| g < 1.0) as usize;
    }
    Ok(format!("1000 cases, {reduced} with gain reduction"))
}

fn sine(rate: u32, freq: f64, amp: f64, seconds: f64) -> Vec<f64> {
    let n = (seconds * f64::from(rate)) as usize;
    (0..n).map(|i| amp * (2.0 * PI * freq * i as f64 / f64::from(rate)).sin()).collect()
}

fn lufs(b: &AudioBuffer) -> f64 {
    integrated_loudness(b).integrated.expect("measurable")
}

fn c3_loudness_calibration() -> Check {
    let full = AudioBuffer::mono(48000, sine(48000, 997.0, 1.0, 10.0)).unwrap();
    let level = lufs(&full);
    ensure((level + 3.01).abs() <= 0.1, || format!("997 Hz full scale measured {level:.3} LUFS"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut signals = vec![full];
    for _ in 0..5 {
        let mut s = random_signal(&mut rng);
        while s.len() < s.sample_rate() as usize {
            s = random_signal(&mut rng);
        }
        signals.push(s);
    }
    let opts = SynthOptions { tracks: 1, seconds: 5.0, sample_rate: 44100, channels: 2, seed: 3 };
    signals.push(mix(&synth_track(&opts, 0).unwrap().stems));
    let mut worst_shift = 0.0_f64;
    let mut worst_norm = 0.0_f64;
    for s in &signals {
        let shift = lufs(&s.scaled(0.5)) - lufs(s);
        worst_shift = worst_shift.max((shift + 6.02).abs());
        let normalized = loudness_normalize(s, -14.0).map_err(|e| e.to_string())?;
        worst_norm = worst_norm.max((lufs(&normalized) + 14.0).abs());
    }
    ensure(worst_shift <= 0.05, || format!("halving shift off by {worst_shift:.4} LU"))?;
    ensure(worst_norm <= 0.05, || format!("normalization off by {worst_norm:.4} LU"))?;
    Ok(format!(
        "sine {level:.3} LUFS, halving error {worst_shift:.4} LU, -14 LUFS error {worst_norm:.2e} LU"
    ))
}

fn c4_loudness_range() -> Check {
    let steady = AudioBuffer::mono(48000, sine(48000, 1000.0, 0.5, 30.0)).unwrap();
    let lra_steady = loudness_range(&steady).lu;
    ensure(lra_steady.abs() <= 0.1, || format!("steady sine LRA {lra_steady:.3} LU"))?;
    let mut step = sine(48000, 1000.0, 0.5, 20.0);
    step.extend(sine(48000, 1000.0, 0.5 * 10f64.powf(-0.5), 20.0));
    let lra_step = loudness_range(&AudioBuffer::mono(48000, step).unwrap()).lu;
    ensure((lra_step - 10.0).abs() <= 0.5, || format!("10 dB step LRA {lra_step:.3} LU"))?;
    Ok(format!("steady {lra_steady:.3} LU, 10 dB step {lra_step:.3} LU"))
}

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize], away_from_zero: bool) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n)
        .map(|_| {
            if away_from_zero {
                rng.gen_range(0.05..1.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }
            } else {
                rng.gen_range(-1.0..1.0)
            }
        })
        .collect();
    Tensor::new(shape.to_vec(), data).unwrap()
}

fn project(g: &mut Graph, y: Var, seed: u64) -> Var {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shape = g.value(y).shape().to_vec();
    let w = g.constant(rand_tensor(&mut rng, &shape, false));
    let p = g.mul(y, w).unwrap();
    g.sum(p)
}

fn c5_gradients() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut results: Vec<(String, f64)> = Vec::new();
    let mut record = |name: &str, err: delimiter_core::Result<f64>| -> Result<(), String> {
        let err = err.map_err(|e| format!("{name}: {e}"))?;
        results.push((name.to_string(), err));
        Ok(())
    };
    let h = 1e-5;

    let convs = [
        ("conv1d", ConvSpec { stride: 2, padding: 1, ..Default::default() }, 2, 4, 4),
        ("dilated conv1d", ConvSpec { dilation: 2, padding: 2, ..Default::default() }, 3, 3, 3),
        ("depthwise", ConvSpec { dilation: 4, padding: 4, groups: 4, ..Default::default() }, 4, 4, 3),
        ("pointwise", ConvSpec::default(), 5, 3, 1),
    ];
    for (i, (name, spec, c_in, c_out, k)) in convs.into_iter().enumerate() {
        let inputs = [
            rand_tensor(&mut rng, &[2, c_in, 11], false),
            rand_tensor(&mut rng, &[c_out, c_in / spec.groups, k], false),
            rand_tensor(&mut rng, &[c_out], false),
        ];
        record(
            name,
            grad_check(
                |g, v| {
                    let y = g.conv1d(v[0], v[1], Some(v[2]), spec)?;
                    Ok(project(g, y, 100 + i as u64))
                },
                &inputs,
                h,
            ),
        )?;
    }
    let inputs = [
        rand_tensor(&mut rng, &[2, 4, 5], false),
        rand_tensor(&mut rng, &[4, 2, 6], false),
        rand_tensor(&mut rng, &[2], false),
    ];
    record(
        "transposed conv1d",
        grad_check(
            |g, v| {
                let y = g.conv_transpose1d(v[0], v[1], Some(v[2]), 3)?;
                Ok(project(g, y, 110))
            },
            &inputs,
            h,
        ),
    )?;
    let inputs = [rand_tensor(&mut rng, &[2, 3, 6], true), Tensor::new(vec![1], vec![0.25]).unwrap()];
    record(
        "prelu",
        grad_check(
            |g, v| {
                let y = g.prelu(v[0], v[1])?;
                Ok(project(g, y, 111))
            },
            &inputs,
            h,
        ),
    )?;
    let inputs = [rand_tensor(&mut rng, &[1, 3, 8], false)];
    record(
        "sigmoid",
        grad_check(
            |g, v| {
                let y = g.sigmoid(v[0]);
                Ok(project(g, y, 112))
            },
            &inputs,
            h,
        ),
    )?;
    let modes = NormKind::ALL
        .into_iter()
        .map(|k| (k, NormMode::Train))
        .chain([(NormKind::Bn, NormMode::Eval { mean: vec![0.1, -0.2, 0.0, 0.3], var: vec![0.5, 1.5, 1.0, 0.2] })]);
    for (i, (kind, mode)) in modes.enumerate() {
        let inputs = [
            rand_tensor(&mut rng, &[3, 4, 5], false),
            rand_tensor(&mut rng, &[4], false),
            rand_tensor(&mut rng, &[4], false),
        ];
        let name = format!("{} ({})", kind.name(), if matches!(mode, NormMode::Train) { "train" } else { "eval" });
        record(
            &name,
            grad_check(
                |g, v| {
                    let y = g.normalize(kind, v[0], v[1], v[2], &mode)?;
                    Ok(project(g, y, 120 + i as u64))
                },
                &inputs,
                h,
            ),
        )?;
    }
    for (i, norm) in NormKind::ALL.into_iter().enumerate() {
        let config = NetConfig {
            basis: 6,
            kernel_len: 4,
            bottleneck: 4,
            hidden: 6,
            block_kernel: 3,
            blocks: 2,
            repeats: 1,
            norm,
            head: Head::Sgi,
            sample_rate: 8000,
            channels: 2,
            init_seed: 30 + i as u64,
        };
        let model = build_model(&config).unwrap();
        let x = rand_tensor(&mut rng, &[2, 2, 24], false);
        let target = rand_tensor(&mut rng, &[2, 2, 24], false);
        record(
            &format!("SGI network + loss ({})", norm.name()),
            grad_check(
                |g, v| {
                    let xv = g.constant(x.clone());
                    let (y, _, _) = model.trace_with(g, xv, v, true)?;
                    let t = g.constant(target.clone());
                    g.neg_si_sdr(y, t)
                },
                model.params(),
                h,
            ),
        )?;
    }
    let (worst_name, worst) = results
        .iter()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .cloned()
        .unwrap();
    if let Some((name, err)) = results.iter().find(|(_, e)| !(*e < 1e-5)) {
        return Err(format!("{name}: max relative error {err:.3e}"));
    }
    Ok(format!("{} checks, worst {worst:.2e} ({worst_name})", results.len()))
}

fn c6_sgi_invariants() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut checked = 0usize;
    for case in 0..200u64 {
        let channels = rng.gen_range(1..=2);
        let config = NetConfig {
            basis: rng.gen_range(2..12),
            kernel_len: 2 * rng.gen_range(1..6),
            bottleneck: rng.gen_range(1..8),
            hidden: rng.gen_range(1..10),
            block_kernel: 2 * rng.gen_range(0..3) + 1,
            blocks: rng.gen_range(1..4),
            repeats: rng.gen_range(1..3),
            norm: NormKind::ALL[rng.gen_range(0..4)],
            head: Head::Sgi,
            sample_rate: 8000,
            channels,
            init_seed: case,
        };
        let model = build_model(&config).map_err(|e| e.to_string())?;
        let len = rng.gen_range(config.kernel_len..200);
        let scale = 10f64.powf(rng.gen_range(-3.0..2.0));
        let batch = rng.gen_range(1..3);
        let x = rand_tensor(&mut rng, &[batch, channels, len], false);
        let x = Tensor::new(x.shape().to_vec(), x.data().iter().map(|v| v * scale).collect()).unwrap();
        let (y, _) = model.forward(&x).map_err(|e| e.to_string())?;
        for (n, (&xv, &yv)) in x.data().iter().zip(y.data()).enumerate() {
            ensure(yv.abs() <= xv.abs() && yv * xv >= 0.0, || {
                format!("case {case}, sample {n}: x={xv:e}, y={yv:e}")
            })?;
        }
        checked += x.data().len();
    }
    Ok(format!("200 random networks, {checked} samples"))
}

fn mix(stems: &[AudioBuffer]) -> AudioBuffer {
    let mut data = stems[0].data().to_vec();
    for s in &stems[1..] {
        for (acc, ch) in data.iter_mut().zip(s.data()) {
            acc.iter_mut().zip(ch).for_each(|(a, b)| *a += b);
        }
    }
    AudioBuffer::new(stems[0].sample_rate(), data).unwrap()
}

fn c9_dynamics_direction() -> Check {
    let opts = SynthOptions { tracks: 4, seconds: 10.0, sample_rate: 16000, channels: 2, seed: 9 };
    let params = LimiterParams { input_gain_db: 9.0, ..LimiterParams::default() };
    let crest = |b: &AudioBuffer| -> Result<f64, String> {
        let n = loudness_normalize(b, -14.0).map_err(|e| e.to_string())?;
        Ok(dynamics_report(&n).map_err(|e| e.to_string())?.crest_factor)
    };
    let mut lines = Vec::new();
    for i in 0..opts.tracks {
        let original = mix(&synth_track(&opts, i).unwrap().stems);
        let (limited, env) = apply_limiter(&original, &params).map_err(|e| e.to_string())?;
        let restored = oracle_inverse(&limited, &env, 1e-12).map_err(|e| e.to_string())?;
        let (co, cl, cr) = (crest(&original)?, crest(&limited)?, crest(&restored)?);
        ensure(cl < co, || format!("track {i}: limited crest {cl:.3} not below original {co:.3}"))?;
        ensure((cr - co).abs() <= 0.1 * co, || format!("track {i}: restored crest {cr:.3} vs original {co:.3}"))?;
        lines.push(format!("{co:.2}/{cl:.2}/{cr:.2}"));
    }
    Ok(format!("crest original/limited/restored: {}", lines.join(", ")))
}

fn c10_stem_transfer() -> Check {
    let opts = SynthOptions { tracks: 3, seconds: 6.0, sample_rate: 16000, channels: 2, seed: 10 };
    let params = LimiterParams { input_gain_db: 8.0, ..LimiterParams::default() };
    let mut worst_sum = 0.0_f64;
    let mut gains = Vec::new();
    for i in 0..opts.tracks {
        let stems = synth_track(&opts, i).unwrap().stems;
        let (limited_mix, env) = apply_limiter(&mix(&stems), &params).map_err(|e| e.to_string())?;
        let boost = params.input_gain();
        let limited_stems: Vec<AudioBuffer> = stems
            .iter()
            .map(|s| {
                let data = s
                    .data()
                    .iter()
                    .map(|c| c.iter().zip(env.gains()).map(|(x, g)| x * boost * g).collect())
                    .collect();
                AudioBuffer::new(s.sample_rate(), data).unwrap()
            })
            .collect();
        ensure(stem_sum_error(&limited_mix, &limited_stems) <= 1e-9, || "limited stems do not sum".into())?;
        let delimited = oracle_inverse(&limited_mix, &env, 1e-12).map_err(|e| e.to_string())?;
        let transferred =
            transfer_gains(&limited_mix, &delimited, &limited_stems, TRANSFER_EPSILON).map_err(|e| e.to_string())?;
        let total = mix(&transferred);
        for c in 0..total.channels() {
            for n in 0..total.len() {
                if limited_mix.channel(c)[n].abs() > TRANSFER_EPSILON {
                    worst_sum = worst_sum.max((total.channel(c)[n] - delimited.channel(c)[n]).abs());
                }
            }
        }
        for (role, ((orig, lim), out)) in ["vocals", "bass", "drums", "other"]
            .iter()
            .zip(stems.iter().zip(&limited_stems).zip(&transferred))
        {
            let before = si_sdr(lim, orig).map_err(|e| e.to_string())?;
            let after = si_sdr(out, orig).map_err(|e| e.to_string())?;
            ensure(after > before, || format!("track {i} {role}: {after:.2} dB not above {before:.2} dB"))?;
            gains.push(after - before);
        }
    }
    ensure(worst_sum <= 1e-5, || format!("transferred stems miss the mix by {worst_sum:e}"))?;
    let min_gain = gains.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(format!("sum error {worst_sum:.1e}, smallest per-stem SI-SDR gain {min_gain:.2} dB over {} stems", gains.len()))
}

fn cli(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_delimiter"))
        .current_dir(dir)
        .env_remove("DELIMITER_CONFIG")
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr).trim()))
    }
}

fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                files.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    files.sort();
    files
}

fn c11_determinism() -> Check {
    let pipeline = |d: &Path| -> Result<(), String> {
        cli(d, &["synth-pool", "--out", "pool", "--tracks", "2", "--seconds", "3", "--sample-rate", "8000", "--seed", "4"])?;
        cli(d, &["build-data", "--pool", "pool", "--out", "data", "--count", "16", "--segment-seconds", "0.5", "--seed", "11"])?;
        cli(d, &[
            "train", "--data", "data", "--out", "run", "--basis", "16", "--bottleneck", "8", "--hidden", "16",
            "--epochs", "2", "--batch", "4", "--seed", "3",
        ])?;
        cli(d, &[
            "infer", "--checkpoint", "run/best.ckpt", "--input", "data/input", "--output", "out", "--report",
            "infer.jsonl",
        ])
    };
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    pipeline(a.path())?;
    pipeline(b.path())?;
    let mut compared = 0;
    for sub in ["data", "run", "out"] {
        let (ta, tb) = (tree(&a.path().join(sub)), tree(&b.path().join(sub)));
        ensure(ta.len() == tb.len() && !ta.is_empty(), || format!("{sub}: file sets differ"))?;
        for ((na, ba), (nb, bb)) in ta.iter().zip(&tb) {
            ensure(na == nb && ba == bb, || format!("{sub}/{na} differs between runs"))?;
            compared += 1;
        }
    }
    ensure(
        std::fs::read(a.path().join("infer.jsonl")).ok() == std::fs::read(b.path().join("infer.jsonl")).ok(),
        || "infer report differs".into(),
    )?;
    Ok(format!("build-data, train and infer outputs byte-identical ({compared} files)"))
}

/// MACs read off the parameter layout: every weight element is used once per
/// encoder frame, every normalization gain once per frame, plus the output
/// stage of the head.
fn enumerated_macs(c: &NetConfig, samples: usize) -> u64 {
    let frames = samples.div_ceil(c.kernel_len / 2) as u64;
    let mut macs: u64 = param_layout(c)
        .iter()
        .filter(|p| p.name.ends_with(".weight") || (p.name.contains(".norm") && p.name.ends_with(".gain")))
        .map(|p| p.shape.iter().product::<usize>() as u64 * frames)
        .sum();
    macs += match c.head {
        Head::Synthesis => 0,
        Head::Masking => c.basis as u64 * frames,
        Head::Sgi => (c.channels * samples) as u64,
    };
    macs
}

fn c12_cost_counters() -> Check {
    let configs = [
        NetConfig { basis: 8, kernel_len: 4, bottleneck: 4, hidden: 8, sample_rate: 8000, ..NetConfig::default() },
        NetConfig {
            basis: 16,
            kernel_len: 8,
            bottleneck: 8,
            hidden: 12,
            block_kernel: 5,
            blocks: 3,
            repeats: 2,
            norm: NormKind::Bn,
            head: Head::Masking,
            sample_rate: 16000,
            channels: 1,
            init_seed: 0,
        },
        NetConfig { head: Head::Synthesis, norm: NormKind::Fgln, ..NetConfig::default() },
    ];
    let mut lines = Vec::new();
    for c in &configs {
        let model = build_model(c).map_err(|e| e.to_string())?;
        let layout: u64 = param_layout(c).iter().map(|p| p.shape.iter().product::<usize>() as u64).sum();
        let stored: u64 = model.params().iter().map(|t| t.data().len() as u64).sum();
        ensure(count_params(c) == layout && layout == stored, || {
            format!("params {} vs layout {layout} vs stored {stored}", count_params(c))
        })?;
        for samples in [c.kernel_len, 1000, 44100] {
            let (counted, enumerated) = (count_macs_for_samples(c, samples), enumerated_macs(c, samples));
            ensure(counted == enumerated, || format!("{} samples: MACs {counted} vs {enumerated}", samples))?;
        }
        // Exactly linear on whole encoder frames. Otherwise each call rounds up
        // to whole frames, so k one-second counts differ by at most k frames.
        let stride = c.kernel_len / 2;
        let base = count_macs_for_samples(c, 500 * stride);
        for k in [2u64, 3, 7] {
            let scaled = count_macs_for_samples(c, 500 * stride * k as usize);
            ensure(scaled == k * base, || format!("{k}x duration: {scaled} vs {}", k * base))?;
        }
        let frame = count_macs_for_samples(c, 501 * stride) - base;
        let one = count_macs(c, 1.0, c.sample_rate);
        for k in [2u64, 5] {
            let macs = count_macs(c, k as f64, c.sample_rate);
            ensure(macs.abs_diff(k * one) <= k * frame, || format!("{k} s: {macs} vs {}", k * one))?;
        }
        lines.push(format!("{} params / {} MACs per s", layout, one));
    }
    Ok(lines.join("; "))
}

struct DeskRun {
    head: Head,
    baseline: f64,
    delimited: f64,
    seconds: f64,
}

static DESK: std::sync::OnceLock<Result<Vec<DeskRun>, String>> = std::sync::OnceLock::new();

/// Trains the SGI and synthesis heads on 1000 pairs (0.5 s at 8 kHz) from
/// the synthetic pool and scores the best checkpoints on 200 pairs mixed from
/// unseen tracks.
fn desk_runs() -> &'static Result<Vec<DeskRun>, String> {
    DESK.get_or_init(|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let d = dir.path();
        cli(d, &["synth-pool", "--out", "pool", "--tracks", "8", "--seconds", "20", "--sample-rate", "8000", "--seed", "7"])?;
        cli(d, &["synth-pool", "--out", "test_pool", "--tracks", "4", "--seconds", "20", "--sample-rate", "8000", "--seed", "1007"])?;
        cli(d, &["build-data", "--pool", "pool", "--out", "train", "--count", "1000", "--segment-seconds", "0.5", "--seed", "1"])?;
        cli(d, &["build-data", "--pool", "test_pool", "--out", "test", "--count", "200", "--segment-seconds", "0.5", "--seed", "2"])?;
        let (_, test) = load_dataset(d.join("test")).map_err(|e| e.to_string())?;
        let all: Vec<usize> = (0..test.len()).collect();
        let mut baseline = 0.0;
        for p in &test {
            baseline += si_sdr(&p.limited, &p.target).map_err(|e| e.to_string())?;
        }
        baseline /= test.len() as f64;
        let mut runs = Vec::new();
        for head in [Head::Sgi, Head::Synthesis] {
            let start = Instant::now();
            let out = format!("run_{head}");
            cli(d, &[
                "train", "--data", "train", "--out", &out, "--head", head.name(), "--xr", "2,1", "--epochs", "10",
                "--lr", "1e-3", "--batch", "8", "--seed", "1", "--init-seed", "0",
            ])?;
            let seconds = start.elapsed().as_secs_f64();
            let model = load_checkpoint(d.join(&out).join("best.ckpt"))
                .and_then(|c| c.model())
                .map_err(|e| e.to_string())?;
            let delimited = evaluate_si_sdr(&model, &test, &all).map_err(|e| e.to_string())?;
            let run: Value = serde_json::from_str(&std::fs::read_to_string(d.join(&out).join("run.json")).unwrap())
                .map_err(|e| e.to_string())?;
            println!(
                "    {head}: validation {:.2} dB (limited {:.2} dB), unseen tracks {delimited:.2} dB (limited {baseline:.2} dB), {seconds:.0} s",
                run["best_val_si_sdr"].as_f64().unwrap_or(f64::NAN),
                run["baseline_val_si_sdr"].as_f64().unwrap_or(f64::NAN),
            );
            runs.push(DeskRun { head, baseline, delimited, seconds });
        }
        Ok(runs)
    })
}

fn c7_desk_training() -> Check {
    let runs = desk_runs().as_ref().map_err(|e| e.clone())?;
    let sgi = runs.iter().find(|r| r.head == Head::Sgi).unwrap();
    let gain = sgi.delimited - sgi.baseline;
    ensure(sgi.seconds <= 1800.0, || format!("training took {:.0} s", sgi.seconds))?;
    ensure(gain >= 3.0, || {
        format!("SGI {:.2} dB vs limited {:.2} dB (+{gain:.2} dB, need +3)", sgi.delimited, sgi.baseline)
    })?;
    Ok(format!("SGI {:.2} dB vs limited {:.2} dB (+{gain:.2} dB) in {:.0} s", sgi.delimited, sgi.baseline, sgi.seconds))
}

fn c8_head_comparison() -> Check {
    let runs = desk_runs().as_ref().map_err(|e| e.clone())?;
    let score = |h: Head| runs.iter().find(|r| r.head == h).unwrap().delimited;
    let (sgi, synth) = (score(Head::Sgi), score(Head::Synthesis));
    ensure(sgi >= synth - 0.5, || format!("SGI {sgi:.2} dB trails synthesis {synth:.2} dB"))?;
    Ok(format!("SGI {sgi:.2} dB, synthesis {synth:.2} dB"))
}
