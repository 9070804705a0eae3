use std::path::{Path, PathBuf};

use delimiter_core::net::{infer as run_model, load_checkpoint, InferOptions, Model};
use delimiter_core::{integrated_loudness, read_wav, write_wav, BitDepth};
use serde::Serialize;

use crate::report::{ensure_dir, ensure_parent, list_wavs, provenance, write_report};
use crate::{CmdResult, Failure, InferArgs};

#[derive(Serialize)]
struct Row {
    input: String,
    output: String,
    samples: usize,
    integrated_lufs: Option<f64>,
}

fn jobs(args: &InferArgs) -> Result<Vec<(PathBuf, PathBuf)>, Failure> {
    if args.input.is_dir() {
        let names = list_wavs(&args.input)?;
        if names.is_empty() {
            return Err(Failure::data(format!("{}: no WAV files", args.input.display())));
        }
        ensure_dir(&args.output)?;
        Ok(names
            .iter()
            .map(|n| (args.input.join(n), args.output.join(n)))
            .collect())
    } else {
        ensure_parent(&args.output)?;
        Ok(vec![(args.input.clone(), args.output.clone())])
    }
}

fn process(model: &Model, input: &Path, output: &Path, options: &InferOptions, depth: BitDepth) -> Result<Row, Failure> {
    let buffer = read_wav(input)?;
    let c = model.config();
    if buffer.sample_rate() != c.sample_rate || buffer.channels() != c.channels {
        return Err(Failure::data(format!(
            "{}: {} Hz / {} ch, but the checkpoint expects {} Hz / {} ch",
            input.display(),
            buffer.sample_rate(),
            buffer.channels(),
            c.sample_rate,
            c.channels
        )));
    }
    let out = run_model(model, &buffer, options)?;
    let report = write_wav(&out, output, depth)?;
    if report.clipped > 0 {
        log::warn!("{}: {} samples clipped at full scale", output.display(), report.clipped);
    }
    Ok(Row {
        input: input.display().to_string(),
        output: output.display().to_string(),
        samples: out.len(),
        integrated_lufs: integrated_loudness(&out).integrated,
    })
}

pub fn infer(args: &InferArgs) -> CmdResult {
    let checkpoint = load_checkpoint(&args.checkpoint)?;
    let model = checkpoint.model()?;
    let options = InferOptions {
        target_lufs: args.target_lufs,
        parallel_ratio: args.parallel_mix,
        memory_budget_bytes: args.memory_budget_mb.saturating_mul(1 << 20),
    };
    let depth = BitDepth::from(args.bit_depth);
    let mut rows = Vec::new();
    for (input, output) in jobs(args)? {
        let row = process(&model, &input, &output, &options, depth)?;
        println!(
            "{} -> {} ({} LUFS)",
            row.input,
            row.output,
            crate::report::fmt_opt(row.integrated_lufs, 2)
        );
        rows.push(row);
    }
    write_report(args.report.as_deref(), &provenance("infer", None, args), &rows)
}
