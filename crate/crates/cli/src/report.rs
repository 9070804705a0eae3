//! Provenance headers, JSON-lines reports, plain-text tables and a small
//! worker pool for per-file jobs.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::Failure;

pub const TOOL: &str = "delimiter";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `{"provenance": {...}}`, the first line of every JSON output.
pub fn provenance(command: &str, seed: Option<u64>, config: &impl Serialize) -> Value {
    json!({
        "provenance": {
            "tool": TOOL,
            "version": VERSION,
            "command": command,
            "seed": seed,
            "config": config,
        }
    })
}

/// JSON-lines file whose first line is a provenance header.
pub struct JsonLines {
    path: PathBuf,
    out: BufWriter<File>,
}

impl JsonLines {
    pub fn create(path: &Path, header: &Value) -> Result<Self, Failure> {
        ensure_parent(path)?;
        let file = File::create(path).map_err(|e| Failure::data(format!("{}: {e}", path.display())))?;
        let mut lines = Self {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        lines.row(header)?;
        Ok(lines)
    }

    pub fn row(&mut self, row: &impl Serialize) -> Result<(), Failure> {
        let text = serde_json::to_string(row).map_err(|e| Failure::runtime(e.to_string()))?;
        writeln!(self.out, "{text}").map_err(|e| Failure::data(format!("{}: {e}", self.path.display())))
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.out
            .flush()
            .map_err(|e| Failure::data(format!("{}: {e}", self.path.display())))
    }
}

/// Writes `rows` to `path` (when given) after a provenance header.
pub fn write_report<T: Serialize>(path: Option<&Path>, header: &Value, rows: &[T]) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let mut lines = JsonLines::create(path, header)?;
    for r in rows {
        lines.row(r)?;
    }
    lines.finish()
}

/// Pretty-printed single JSON document: the provenance header merged with `body`.
pub fn write_json(path: &Path, header: &Value, body: Value) -> Result<(), Failure> {
    let mut doc = header.clone();
    if let (Value::Object(d), Value::Object(b)) = (&mut doc, body) {
        d.extend(b);
    }
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Failure::runtime(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

pub fn ensure_parent(path: &Path) -> Result<(), Failure> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => {
            fs::create_dir_all(p).map_err(|e| Failure::data(format!("{}: {e}", p.display())))
        }
        _ => Ok(()),
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))
}

/// File names of the `.wav` files directly inside `dir`, sorted.
pub fn list_wavs(dir: &Path) -> Result<Vec<String>, Failure> {
    let entries = fs::read_dir(dir).map_err(|e| Failure::data(format!("{}: {e}", dir.display())))?;
    let mut names: Vec<String> = entries
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.to_ascii_lowercase().ends_with(".wav"))
        .collect();
    names.sort();
    Ok(names)
}

/// Maps `f` over `items` on a pool of scoped threads; results keep input order.
pub fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(items.len());
    if workers <= 1 {
        return items.iter().map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<R>> = std::iter::repeat_with(|| None).take(items.len()).collect();
    let done: Vec<Vec<(usize, R)>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut out = Vec::new();
                    loop {
                        let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                        if i >= items.len() {
                            break out;
                        }
                        out.push((i, f(&items[i])));
                    }
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
    });
    for (i, r) in done.into_iter().flatten() {
        slots[i] = Some(r);
    }
    slots.into_iter().map(|r| r.expect("every item processed")).collect()
}

/// Left-aligned first column, right-aligned numeric columns.
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let cols = self.header.len();
        let mut width = vec![0; cols];
        for row in std::iter::once(&self.header).chain(&self.rows) {
            for (w, cell) in width.iter_mut().zip(row) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |row: &[String]| -> String {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(i, c)| {
                    if i == 0 {
                        format!("{c:<w$}", w = width[i])
                    } else {
                        format!("{c:>w$}", w = width[i])
                    }
                })
                .collect();
            cells.join("  ").trim_end().to_string()
        };
        let mut out = line(&self.header);
        out.push('\n');
        out.push_str(&"-".repeat(width.iter().sum::<usize>() + 2 * (cols - 1)));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
            out.push('\n');
        }
        out
    }
}

pub fn fmt_f(v: f64, digits: usize) -> String {
    if v.is_finite() {
        format!("{v:.digits$}")
    } else {
        "n/a".into()
    }
}

pub fn fmt_opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(|| "-".into(), |v| fmt_f(v, digits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn par_map_keeps_order() {
        let items: Vec<u64> = (0..97).collect();
        assert_eq!(par_map(&items, |x| x * x), items.iter().map(|x| x * x).collect::<Vec<_>>());
    }

    #[test]
    fn table_aligns_columns() {
        let mut t = Table::new(&["name", "value"]);
        t.push(vec!["a".into(), "1.0".into()]);
        t.push(vec!["longer".into(), "10.25".into()]);
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[2].ends_with("  1.0"));
        assert_eq!(lines[2].len(), lines[3].len());
    }

    #[test]
    fn provenance_carries_config() {
        let v = provenance("x", Some(3), &json!({"a": 1}));
        assert_eq!(v["provenance"]["seed"], 3);
        assert_eq!(v["provenance"]["config"]["a"], 1);
        assert_eq!(v["provenance"]["version"], VERSION);
    }
}
