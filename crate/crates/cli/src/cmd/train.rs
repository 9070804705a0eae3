use delimiter_core::dataset::load_dataset;
use delimiter_core::metrics::{count_macs, si_sdr};
use delimiter_core::net::{self, save_checkpoint, NetConfig, TrainHyper};
use serde_json::json;

use crate::report::{ensure_dir, provenance, write_json, JsonLines};
use crate::{CmdResult, Failure, TrainArgs};

pub const LOG_FILE: &str = "train_log.jsonl";
pub const RUN_FILE: &str = "run.json";

pub fn train(args: &TrainArgs) -> CmdResult {
    let mut pairs = Vec::new();
    let mut dataset_seed = None;
    for dir in &args.data {
        let (manifest, mut more) = load_dataset(dir)?;
        dataset_seed = dataset_seed.or(manifest.records.first().map(|r| r.seed));
        pairs.append(&mut more);
    }
    let first = pairs.first().ok_or_else(|| Failure::data("dataset has no segments"))?;
    // Batches are stacked, so sets built with different settings cannot be mixed.
    let shape = |p: &net::Pair| (p.limited.sample_rate(), p.limited.channels(), p.limited.len());
    if let Some(odd) = pairs.iter().find(|p| shape(p) != shape(first)) {
        let (r0, c0, n0) = shape(first);
        let (r1, c1, n1) = shape(odd);
        return Err(Failure::data(format!(
            "datasets disagree on segment shape: {r0} Hz x{c0} x{n0} vs {r1} Hz x{c1} x{n1}"
        )));
    }
    let config = NetConfig {
        basis: args.basis,
        kernel_len: args.kernel_len,
        bottleneck: args.bottleneck,
        hidden: args.hidden,
        block_kernel: args.block_kernel,
        blocks: args.xr.blocks,
        repeats: args.xr.repeats,
        norm: args.norm.into(),
        head: args.head.into(),
        sample_rate: first.limited.sample_rate(),
        channels: first.limited.channels(),
        init_seed: args.init_seed.unwrap_or(args.seed),
    };
    config.validate()?;
    let hyper = TrainHyper {
        lr: args.lr,
        batch: args.batch,
        epochs: args.epochs,
        seed: args.seed,
        validation_split: args.val_split,
        grad_clip: (args.grad_clip > 0.0).then_some(args.grad_clip),
    };
    hyper.validate()?;

    ensure_dir(&args.out)?;
    let header = provenance("train", Some(args.seed), args);
    let param_count = delimiter_core::metrics::count_params(&config);
    let macs_per_minute = count_macs(&config, 60.0, config.sample_rate);
    let mut log = JsonLines::create(&args.out.join(LOG_FILE), &header)?;
    log.row(&json!({
        "model": config,
        "param_count": param_count,
        "macs_per_minute": macs_per_minute,
        "receptive_field_ms": config.receptive_field_ms(),
    }))?;
    let mut write_error = None;
    let outcome = net::train(&config, &pairs, &hyper, dataset_seed, |entry| {
        if write_error.is_none() {
            write_error = log.row(entry).err();
        }
        if let Some(v) = entry.val_si_sdr {
            log::info!("step {} loss {:.3} val SI-SDR {:.2} dB", entry.step, entry.train_loss, v);
        }
    })?;
    if let Some(e) = write_error {
        return Err(e);
    }
    log.finish()?;

    save_checkpoint(&outcome.best, args.out.join("best.ckpt"))?;
    save_checkpoint(&outcome.last, args.out.join("last.ckpt"))?;

    let baseline = if outcome.validation_indices.is_empty() {
        None
    } else {
        let mut total = 0.0;
        for &i in &outcome.validation_indices {
            total += si_sdr(&pairs[i].limited, &pairs[i].target)?;
        }
        Some(total / outcome.validation_indices.len() as f64)
    };
    write_json(
        &args.out.join(RUN_FILE),
        &header,
        json!({
            "model": config,
            "param_count": param_count,
            "macs_per_minute": macs_per_minute,
            "receptive_field_ms": config.receptive_field_ms(),
            "steps": outcome.last.step,
            "train_examples": outcome.train_indices.len(),
            "validation_examples": outcome.validation_indices.len(),
            "baseline_val_si_sdr": baseline,
            "initial_val_si_sdr": outcome.initial_val_si_sdr,
            "best_val_si_sdr": outcome.best_val_si_sdr,
            "best_step": outcome.best.step,
        }),
    )?;
    println!(
        "{} {}, {} params: validation SI-SDR {} dB (limited input {} dB)",
        config.head,
        config.depth_label(),
        param_count,
        crate::report::fmt_opt(outcome.best_val_si_sdr, 2),
        crate::report::fmt_opt(baseline, 2),
    );
    Ok(())
}
