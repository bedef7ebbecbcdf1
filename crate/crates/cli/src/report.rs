//! Table output. CSV floats carry 17 significant digits; JSON uses the
//! shortest representation that parses back to the same `f64`.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::Format;

pub trait Row: Serialize {
    fn header() -> Vec<String>;
    fn record(&self) -> Vec<String>;
}

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn render<R: Row>(rows: &[R], format: Format) -> anyhow::Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(R::header())?;
            for r in rows {
                w.write_record(r.record())?;
            }
            Ok(w.into_inner().context("flushing csv")?)
        }
        Format::Json => json_bytes(rows),
    }
}

pub fn json_bytes<T: Serialize + ?Sized>(value: &T) -> anyhow::Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(value)?;
    out.push(b'\n');
    Ok(out)
}

/// Writes to `out`, or to stdout when absent.
pub fn emit(bytes: &[u8], out: Option<&Path>) -> anyhow::Result<()> {
    match out {
        Some(p) => std::fs::write(p, bytes).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            Ok(stdout.flush()?)
        }
    }
}

/// Writes a summary next to the report (`<out>.summary.json`), or to stderr.
pub fn emit_summary<T: Serialize>(summary: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let bytes = json_bytes(summary)?;
    match out {
        Some(p) => {
            let path = summary_path(p);
            std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))
        }
        None => Ok(std::io::stderr().write_all(&bytes)?),
    }
}

pub fn summary_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".summary.json");
    PathBuf::from(s)
}
