//! CSV and JSON writers for traces, summaries and certificates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::solve::IterationTrace;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Renders a trace as CSV, one row per iterate `x_n`.
///
/// Row `n` carries `‖x_n - x_{n-1}‖`, the ratio of that step to the
/// previous one, and the a priori / a posteriori bounds on `‖x_n - p‖`;
/// fields that do not exist for `n` are left empty.
pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = String::from("iter,components,step_norm,ratio,apriori,aposteriori\n");
    for (n, x) in trace.iterates.iter().enumerate() {
        let comps = x
            .as_slice()
            .iter()
            .map(|v| fmt_f64(*v))
            .collect::<Vec<_>>()
            .join(";");
        let (step, ratio, pri, post) = if n == 0 {
            (None, None, None, None)
        } else {
            let i = n - 1;
            (
                trace.step_norms.get(i).copied(),
                trace.ratios.get(i).copied().flatten(),
                trace.apriori.as_ref().and_then(|v| v.get(i).copied()),
                trace.aposteriori.as_ref().and_then(|v| v.get(i).copied()),
            )
        };
        let _ = writeln!(
            out,
            "{n},{comps},{},{},{},{}",
            opt(step),
            opt(ratio),
            opt(pri),
            opt(post)
        );
    }
    out
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    write_text(path, &text)
}
