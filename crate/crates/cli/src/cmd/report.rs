//! Table-shaped reports: evaluation, dynamics analysis and stem transfer.

use std::collections::BTreeSet;
use std::path::Path;

use delimiter_core::dynamics::transfer_gains;
use delimiter_core::metrics::{count_macs, count_params};
use delimiter_core::net::load_checkpoint;
use delimiter_core::{
    dynamics_report, integrated_loudness, loudness_normalize, multires_spec_mse, read_wav, si_sdr, write_wav,
    AudioBuffer, BitDepth, DynamicsReport, Error, SpecConfig,
};
use serde_json::{json, Value};

use crate::report::{ensure_dir, fmt_f, fmt_opt, list_wavs, par_map, provenance, write_report, Table};
use crate::{AnalyzeArgs, CmdResult, EvaluateArgs, Failure, StemsTransferArgs};

fn mean(values: impl IntoIterator<Item = f64>) -> f64 {
    let (sum, n) = values.into_iter().fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

/// An undefined metric (silent reference) is reported as missing.
fn optional_metric(r: delimiter_core::Result<f64>) -> Result<Option<f64>, Failure> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::UndefinedMetric(_)) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn normalized(buffer: &AudioBuffer, lufs: Option<f64>) -> AudioBuffer {
    match lufs {
        Some(target) => loudness_normalize(buffer, target).unwrap_or_else(|_| buffer.clone()),
        None => buffer.clone(),
    }
}

fn collect<T>(results: Vec<Result<T, Failure>>) -> Result<Vec<T>, Failure> {
    results.into_iter().collect()
}

struct Scores {
    si_sdr: Option<f64>,
    /// Missing when the clip is shorter than the largest analysis window.
    mse: Option<f64>,
}

fn score(estimate: &Path, reference: &Path, lufs: Option<f64>, spec: &SpecConfig) -> Result<Scores, Failure> {
    let est = read_wav(estimate)?;
    let refr = read_wav(reference)?;
    if !est.same_shape(&refr) {
        return Err(Failure::data(format!(
            "{} and {} differ in shape ({} ch x {} @ {} Hz vs {} ch x {} @ {} Hz)",
            estimate.display(),
            reference.display(),
            est.channels(),
            est.len(),
            est.sample_rate(),
            refr.channels(),
            refr.len(),
            refr.sample_rate()
        )));
    }
    let si = optional_metric(si_sdr(&est, &refr))?;
    let mse = match multires_spec_mse(&normalized(&est, lufs), &normalized(&refr, lufs), spec) {
        Ok(v) => Some(v),
        Err(Error::Metric(msg)) => {
            log::warn!("{}: spectral distance skipped: {msg}", estimate.display());
            None
        }
        Err(e) => return Err(e.into()),
    };
    Ok(Scores { si_sdr: si, mse })
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    let mut sets = vec![
        (args.estimates.as_path(), list_wavs(&args.estimates)?),
        (args.references.as_path(), list_wavs(&args.references)?),
    ];
    if let Some(inputs) = &args.inputs {
        sets.push((inputs.as_path(), list_wavs(inputs)?));
    }
    let all: BTreeSet<&String> = sets.iter().flat_map(|(_, n)| n).collect();
    let mut unmatched = Vec::new();
    for name in &all {
        let missing: Vec<String> = sets
            .iter()
            .filter(|(_, names)| !names.contains(name))
            .map(|(dir, _)| dir.display().to_string())
            .collect();
        if !missing.is_empty() {
            unmatched.push(format!("{name} (missing from {})", missing.join(", ")));
        }
    }
    if !unmatched.is_empty() {
        return Err(Failure::data(format!("unmatched files:\n  {}", unmatched.join("\n  "))));
    }
    let names: Vec<String> = all.into_iter().cloned().collect();
    if names.is_empty() {
        return Err(Failure::data(format!("{}: no WAV files", args.estimates.display())));
    }

    let lufs = (!args.no_normalize).then_some(args.lufs);
    let spec = SpecConfig::default();
    let scored = collect(par_map(&names, |name| {
        let est = score(&args.estimates.join(name), &args.references.join(name), lufs, &spec)?;
        let base = match &args.inputs {
            Some(dir) => Some(score(&dir.join(name), &args.references.join(name), lufs, &spec)?),
            None => None,
        };
        Ok((est, base))
    }))?;

    let cost = match &args.checkpoint {
        Some(path) => {
            let config = load_checkpoint(path)?.config;
            Some((count_params(&config), count_macs(&config, 60.0, config.sample_rate)))
        }
        None => None,
    };

    let mut rows: Vec<Value> = Vec::new();
    let baseline_label = "input (unprocessed)";
    for (name, (est, base)) in names.iter().zip(&scored) {
        if let Some(b) = base {
            rows.push(json!({"kind": "track", "method": baseline_label, "name": name, "si_sdr": b.si_sdr, "multi_spec_mse": b.mse}));
        }
        rows.push(json!({"kind": "track", "method": args.label, "name": name, "si_sdr": est.si_sdr, "multi_spec_mse": est.mse}));
    }
    let summarize = |pick: &dyn Fn(&(Scores, Option<Scores>)) -> Option<&Scores>| {
        let chosen: Vec<&Scores> = scored.iter().filter_map(pick).collect();
        let si: Vec<f64> = chosen.iter().filter_map(|s| s.si_sdr).collect();
        let mse: Vec<f64> = chosen.iter().filter_map(|s| s.mse).collect();
        ((!si.is_empty()).then(|| mean(si)), (!mse.is_empty()).then(|| mean(mse)))
    };
    let mut table = Table::new(&["Method", "SI-SDR [dB]", "Multi-spec MSE", "# params", "MACs / min"]);
    if args.inputs.is_some() {
        let (si, mse) = summarize(&|s| s.1.as_ref());
        rows.push(json!({"kind": "mean", "method": baseline_label, "tracks": names.len(), "si_sdr": si, "multi_spec_mse": mse, "params": null, "macs_per_minute": null}));
        table.push(vec![baseline_label.into(), fmt_opt(si, 2), fmt_opt(mse, 5), "-".into(), "-".into()]);
    }
    let (si, mse) = summarize(&|s| Some(&s.0));
    rows.push(json!({
        "kind": "mean",
        "method": args.label,
        "tracks": names.len(),
        "si_sdr": si,
        "multi_spec_mse": mse,
        "params": cost.map(|c| c.0),
        "macs_per_minute": cost.map(|c| c.1),
    }));
    table.push(vec![
        args.label.clone(),
        fmt_opt(si, 2),
        fmt_opt(mse, 5),
        cost.map_or("-".into(), |c| c.0.to_string()),
        cost.map_or("-".into(), |c| format!("{:.3}G", c.1 as f64 / 1e9)),
    ]);
    print!("{}", table.render());
    write_report(args.report.as_deref(), &provenance("evaluate", None, args), &rows)
}

fn dynamics_row(kind: &str, name: &str, r: &DynamicsReport, lufs: Option<f64>) -> Value {
    json!({
        "kind": kind,
        "name": name,
        "rms": r.rms,
        "crest_factor": r.crest_factor,
        "dynamic_complexity": r.dynamic_complexity,
        "lra": r.lra,
        "spectral_centroid": r.spectral_centroid,
        "integrated_lufs": lufs,
    })
}

fn dynamics_cells(name: &str, r: &DynamicsReport) -> Vec<String> {
    vec![
        name.to_string(),
        fmt_f(r.rms, 4),
        fmt_f(r.crest_factor, 2),
        fmt_f(r.dynamic_complexity, 2),
        fmt_f(r.lra, 2),
        fmt_f(r.spectral_centroid, 1),
    ]
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let names = list_wavs(&args.dir)?;
    if names.is_empty() {
        return Err(Failure::data(format!("{}: no WAV files to analyze", args.dir.display())));
    }
    let results = collect(par_map(&names, |name| {
        let buffer = read_wav(args.dir.join(name))?;
        let buffer = match args.lufs {
            Some(target) => loudness_normalize(&buffer, target)?,
            None => buffer,
        };
        let report = dynamics_report(&buffer)?;
        Ok((report, integrated_loudness(&buffer).integrated))
    }))?;

    let mean_report = DynamicsReport {
        rms: mean(results.iter().map(|r| r.0.rms)),
        crest_factor: mean(results.iter().map(|r| r.0.crest_factor)),
        dynamic_complexity: mean(results.iter().map(|r| r.0.dynamic_complexity)),
        lra: mean(results.iter().map(|r| r.0.lra)),
        spectral_centroid: mean(results.iter().map(|r| r.0.spectral_centroid)),
    };
    let mut rows: Vec<Value> = names
        .iter()
        .zip(&results)
        .map(|(n, (r, l))| dynamics_row("file", n, r, *l))
        .collect();
    rows.push(dynamics_row("mean", "mean", &mean_report, None));

    let mut table = Table::new(&["File", "RMS", "Crest factor", "Dyn. complexity", "LRA [LU]", "Centroid [Hz]"]);
    for (n, (r, _)) in names.iter().zip(&results) {
        table.push(dynamics_cells(n, r));
    }
    table.push(dynamics_cells("mean", &mean_report));
    print!("{}", table.render());
    write_report(args.report.as_deref(), &provenance("analyze", None, args), &rows)
}

pub fn stems_transfer(args: &StemsTransferArgs) -> CmdResult {
    let limited = read_wav(&args.limited_mix)?;
    let delimited = read_wav(&args.delimited_mix)?;
    let names = list_wavs(&args.stems)?;
    if names.is_empty() {
        return Err(Failure::data(format!("{}: no stem WAV files", args.stems.display())));
    }
    let stems = names
        .iter()
        .map(|n| read_wav(args.stems.join(n)))
        .collect::<delimiter_core::Result<Vec<_>>>()?;
    let references = match &args.references {
        Some(dir) => Some(
            names
                .iter()
                .map(|n| read_wav(dir.join(n)))
                .collect::<delimiter_core::Result<Vec<_>>>()?,
        ),
        None => None,
    };
    let transferred = transfer_gains(&limited, &delimited, &stems, args.epsilon)?;
    ensure_dir(&args.out)?;
    for (name, stem) in names.iter().zip(&transferred) {
        write_wav(stem, args.out.join(name), BitDepth::Float32)?;
    }

    let mut rows = Vec::new();
    let mut table = Table::new(&["Stem", "SI-SDR limited [dB]", "SI-SDR transferred [dB]", "Delta dyn. complexity"]);
    for (i, name) in names.iter().enumerate() {
        let delta = dynamics_report(&transferred[i])?.dynamic_complexity - dynamics_report(&stems[i])?.dynamic_complexity;
        let (baseline, after) = match &references {
            Some(refs) => (
                optional_metric(si_sdr(&stems[i], &refs[i]))?,
                optional_metric(si_sdr(&transferred[i], &refs[i]))?,
            ),
            None => (None, None),
        };
        let stem = name.trim_end_matches(".wav").trim_end_matches(".WAV");
        rows.push(json!({
            "kind": "stem",
            "stem": stem,
            "baseline_si_sdr": baseline,
            "si_sdr": after,
            "delta_dynamic_complexity": delta,
        }));
        table.push(vec![stem.to_string(), fmt_opt(baseline, 2), fmt_opt(after, 2), fmt_f(delta, 3)]);
    }
    print!("{}", table.render());
    write_report(args.report.as_deref(), &provenance("stems-transfer", None, args), &rows)
}
