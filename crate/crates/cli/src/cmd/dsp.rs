use delimiter_core::audio::read_wav_with_depth;
use delimiter_core::{apply_limiter, oracle_inverse, read_wav, write_wav, BitDepth, GainEnvelope, LimiterParams};
use serde_json::json;

use crate::report::{ensure_parent, provenance, write_json};
use crate::{CmdResult, LimitArgs, OracleInvertArgs};

pub fn limit(args: &LimitArgs) -> CmdResult {
    let (buffer, input_depth) = read_wav_with_depth(&args.input)?;
    let params = LimiterParams {
        input_gain_db: args.input_gain_db,
        ceiling: args.ceiling,
        attack_ms: args.attack_ms,
        release_ms: args.release_ms,
        lookahead_ms: args.lookahead_ms,
    };
    let (limited, envelope) = apply_limiter(&buffer, &params)?;
    let depth = args.bit_depth.map_or(input_depth, BitDepth::from);
    ensure_parent(&args.output)?;
    let written = write_wav(&limited, &args.output, depth)?;
    if written.clipped > 0 {
        log::warn!("{} samples clipped while writing {}", written.clipped, args.output.display());
    }
    if let Some(path) = &args.envelope {
        ensure_parent(path)?;
        envelope.write(path, buffer.sample_rate())?;
    }
    let reduced = envelope.gains().iter().filter(|&&g| g < 1.0).count();
    let min_gain = envelope.min();
    if let Some(path) = &args.report {
        write_json(
            path,
            &provenance("limit", None, args),
            json!({
                "samples": limited.len(),
                "bit_depth": depth,
                "reduced_samples": reduced,
                "min_gain": min_gain,
                "max_reduction_db": -20.0 * min_gain.log10() + 0.0,
                "output_peak": limited.peak(),
            }),
        )?;
    }
    println!(
        "{}: {} of {} samples reduced, max reduction {:.2} dB",
        args.output.display(),
        reduced,
        limited.len(),
        -20.0 * min_gain.log10() + 0.0
    );
    Ok(())
}

pub fn oracle_invert(args: &OracleInvertArgs) -> CmdResult {
    let limited = read_wav(&args.input)?;
    let envelope = GainEnvelope::read(&args.envelope)?;
    let restored = oracle_inverse(&limited, &envelope, args.gain_floor)?;
    ensure_parent(&args.output)?;
    let written = write_wav(&restored, &args.output, args.bit_depth.into())?;
    if written.clipped > 0 {
        log::warn!(
            "{} samples exceed full scale in {}; use --bit-depth float32 to keep them",
            written.clipped,
            args.output.display()
        );
    }
    println!("{}: peak {:.4}", args.output.display(), restored.peak());
    Ok(())
}
