//! Config-file support: values from the `[<subcommand>]` table of a TOML file
//! become flags placed before the command-line flags, so the command line wins.

use std::ffi::OsString;
use std::path::PathBuf;

pub const CONFIG_ENV: &str = "DELIMITER_CONFIG";

/// Returns the config path given by `--config` (or the environment) and the
/// arguments with the file's values spliced in after the subcommand.
pub fn expand(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut explicit: Option<PathBuf> = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    if let Some(bin) = it.next() {
        rest.push(bin);
    }
    while let Some(a) = it.next() {
        let s = a.to_string_lossy().into_owned();
        if s == "--config" {
            let v = it.next().ok_or("--config needs a path")?;
            explicit = Some(PathBuf::from(v));
        } else if let Some(v) = s.strip_prefix("--config=") {
            explicit = Some(PathBuf::from(v));
        } else {
            rest.push(a);
        }
    }
    let path = explicit.or_else(|| std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
    let Some(path) = path else {
        return Ok(rest);
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("config {}: {e}", path.display()))?;
    let table: toml::Table = text
        .parse()
        .map_err(|e| format!("config {}: {e}", path.display()))?;

    // The subcommand is the first argument that is not a flag.
    let Some(pos) = rest.iter().skip(1).position(|a| !a.to_string_lossy().starts_with('-')) else {
        return Ok(rest);
    };
    let pos = pos + 1;
    let command = rest[pos].to_string_lossy().into_owned();
    let Some(section) = table.get(&command) else {
        return Ok(rest);
    };
    let section = section
        .as_table()
        .ok_or_else(|| format!("config {}: [{command}] is not a table", path.display()))?;
    let given: Vec<String> = rest[pos + 1..]
        .iter()
        .filter_map(|a| {
            let a = a.to_string_lossy();
            a.starts_with("--").then(|| a.split('=').next().unwrap_or_default().to_owned())
        })
        .collect();
    let mut injected = Vec::new();
    for (key, value) in section {
        let flag = format!("--{}", key.replace('_', "-"));
        // Skipping flags the user gave matters for list flags, which append.
        if given.contains(&flag) {
            continue;
        }
        match value {
            toml::Value::Boolean(true) => injected.push(flag),
            toml::Value::Boolean(false) => {}
            toml::Value::String(s) => injected.extend([flag, s.clone()]),
            toml::Value::Integer(i) => injected.extend([flag, i.to_string()]),
            toml::Value::Float(f) => injected.extend([flag, f.to_string()]),
            toml::Value::Array(items) => {
                let parts: Vec<String> = items
                    .iter()
                    .map(|v| match v {
                        toml::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    })
                    .collect();
                injected.extend([flag, parts.join(",")]);
            }
            other => return Err(format!("config key {key}: unsupported value {other}")),
        }
    }
    let mut out: Vec<OsString> = rest[..=pos].to_vec();
    out.extend(injected.into_iter().map(OsString::from));
    out.extend(rest[pos + 1..].iter().cloned());
    Ok(out)
}
