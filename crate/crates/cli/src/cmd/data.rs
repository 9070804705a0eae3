use delimiter_core::dataset::{build_dataset, synth_pool as synth, write_pool, MixOptions, StemPool, SynthOptions};
use serde_json::json;

use crate::report::{ensure_dir, provenance, write_json};
use crate::{BuildDataArgs, CmdResult, SynthPoolArgs};

pub fn synth_pool(args: &SynthPoolArgs) -> CmdResult {
    let options = SynthOptions {
        tracks: args.tracks as usize,
        seconds: args.seconds,
        sample_rate: args.sample_rate,
        channels: args.channels as usize,
        seed: args.seed,
    };
    let pool = synth(&options)?;
    ensure_dir(&args.out)?;
    write_pool(&pool, &args.out)?;
    let header = provenance("synth-pool", Some(args.seed), args);
    let names: Vec<&str> = pool.tracks().iter().map(|t| t.name.as_str()).collect();
    write_json(&args.out.join("pool.json"), &header, json!({ "tracks": names }))?;
    println!("wrote {} tracks to {}", names.len(), args.out.display());
    Ok(())
}

pub fn build_data(args: &BuildDataArgs) -> CmdResult {
    let pool = StemPool::load(&args.pool)?;
    let options = MixOptions {
        max_gain_db: args.max_gain_db,
        swap_probability: args.swap_probability,
        augment: !args.no_augment,
        ..MixOptions::default()
    };
    ensure_dir(&args.out)?;
    let manifest = build_dataset(&pool, &args.out, args.count as usize, args.segment_seconds, args.seed, &options)?;
    let segment_samples = manifest.records.first().map_or(0, |r| r.segment_samples);
    let header = provenance("build-data", Some(args.seed), args);
    write_json(
        &args.out.join("build.json"),
        &header,
        json!({
            "segments": manifest.records.len(),
            "segment_samples": segment_samples,
            "sample_rate": pool.sample_rate(),
            "channels": pool.channels(),
            "mix_options": options,
        }),
    )?;
    println!("wrote {} segments to {}", manifest.records.len(), args.out.display());
    Ok(())
}
