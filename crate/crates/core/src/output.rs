//! CSV output with a provenance comment line, and companion plot scripts.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// First line of every CSV: tool version, subcommand, seed and resolved
/// configuration as compact JSON.
pub fn comment_line<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<String> {
    let json = serde_json::to_string(config).map_err(|e| Error::Io(e.to_string()))?;
    Ok(format!(
        "# ebw {TOOL_VERSION} command={command} seed={seed} config={json}"
    ))
}

/// A small in-memory CSV table.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn render(&self, comment: &str) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{comment}");
        let _ = writeln!(s, "{}", self.columns.join(","));
        for r in &self.rows {
            let _ = writeln!(s, "{}", r.join(","));
        }
        s
    }
}

/// Shortest round-trip text for a float; empty for `None`.
pub fn num(x: f64) -> String {
    format!("{x}")
}

pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Write `text` to `path`, or to `stdout` when `path` is `None`.
pub fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            std::fs::write(p, text)?;
        }
        None => stdout.write_all(text.as_bytes())?,
    }
    Ok(())
}

/// `dir/stem<suffix>.ext` next to `path`.
pub fn sibling(path: &Path, suffix: &str, ext: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}{suffix}.{ext}"))
}

/// Kind of figure a plot script draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    /// Polar and linear plots of `gain` and `gain_starred` against `theta`.
    Pattern,
    /// Log-log `w_b` against `n`, one line per `curve`.
    Sweep,
    /// Binned success rate with its bracket.
    Bins,
    /// Log-log throughput against network size.
    Capacity,
}

const PLOT_PRELUDE: &str = r##"import csv
import sys
from collections import defaultdict

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def load(path):
    with open(path) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    head, body = rows[0], rows[1:]
    return [dict(zip(head, r)) for r in body]


def col(rows, key):
    return [float(r[key]) if r[key] != "" else float("nan") for r in rows]

"##;

fn plot_body(kind: PlotKind) -> &'static str {
    match kind {
        PlotKind::Pattern => {
            r#"rows = load(CSV)
theta, g, gs = col(rows, "theta"), col(rows, "gain"), col(rows, "gain_starred")
fig = plt.figure(figsize=(10, 4.5))
ax = fig.add_subplot(1, 2, 1, projection="polar")
ax.plot(theta, g, label="G")
ax.plot(theta, gs, label="G*")
ax.legend(loc="lower right")
ax = fig.add_subplot(1, 2, 2)
ax.plot(theta, g, label="G")
ax.plot(theta, gs, label="G*")
ax.set_xlabel("theta [rad]")
ax.set_ylabel("normalized gain")
ax.legend()
"#
        }
        PlotKind::Sweep => {
            r#"rows = load(CSV)
curves = defaultdict(list)
for r in rows:
    curves[r["curve"]].append((float(r["n"]), float(r["w_b"])))
fig, ax = plt.subplots(figsize=(6, 4.5))
for name, pts in curves.items():
    pts.sort()
    ax.loglog([p[0] for p in pts], [p[1] for p in pts], "o-", label=name)
ax.set_xlabel("N")
ax.set_ylabel("W_B")
ax.grid(True, which="both", alpha=0.3)
ax.legend(fontsize="small")
"#
        }
        PlotKind::Bins => {
            r#"rows = load(CSV)
mid = [(a + b) / 2 for a, b in zip(col(rows, "bin_lo"), col(rows, "bin_hi"))]
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(mid, col(rows, "p_emp"), "o", label="empirical")
ax.plot(mid, col(rows, "bound_lo"), "--", label="lower bound")
ax.plot(mid, col(rows, "bound_hi"), "--", label="upper bound")
ax.set_xlabel("link length")
ax.set_ylabel("success probability")
ax.legend()
"#
        }
        PlotKind::Capacity => {
            r#"rows = load(CSV)
fig, ax = plt.subplots(figsize=(6, 4.5))
ax.loglog(col(rows, "n"), col(rows, "eta_tt"), "o-", label="eta_tt")
ax.loglog(col(rows, "n"), col(rows, "eta_tr"), "s-", label="eta_tr")
ax.set_xlabel("n")
ax.set_ylabel("per-slot throughput")
ax.grid(True, which="both", alpha=0.3)
ax.legend()
"#
        }
    }
}

/// Write a standalone matplotlib script next to `csv_path` that reads the CSV
/// and saves a PNG beside it. Returns the script path.
pub fn write_plot_script(csv_path: &Path, kind: PlotKind) -> Result<PathBuf> {
    let script = csv_path.with_extension("py");
    let name = csv_path
        .file_name()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Error::invalid("plot emission needs a file output path"))?;
    let png = csv_path.with_extension("png");
    let png = png.file_name().and_then(|s| s.to_str()).unwrap_or("plot.png");
    let text = format!(
        "#!/usr/bin/env python3\n\"\"\"Plot {name}. Generated by ebw {TOOL_VERSION}.\"\"\"\n{PLOT_PRELUDE}\n\
         import os\n\nHERE = os.path.dirname(os.path.abspath(__file__))\n\
         CSV = sys.argv[1] if len(sys.argv) > 1 else os.path.join(HERE, {name:?})\n\
         OUT = sys.argv[2] if len(sys.argv) > 2 else os.path.join(HERE, {png:?})\n\n{body}\
         fig.tight_layout()\nfig.savefig(OUT, dpi=120)\n",
        body = plot_body(kind)
    );
    std::fs::write(&script, text)?;
    Ok(script)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Cfg {
        a: u32,
        b: &'static str,
    }

    #[test]
    fn comment_records_config() {
        let c = comment_line("ebw", 7, &Cfg { a: 1, b: "x" }).unwrap();
        assert!(c.starts_with("# ebw "));
        assert!(c.contains("seed=7") && c.contains(r#"{"a":1,"b":"x"}"#));
    }

    #[test]
    fn table_render() {
        let mut t = Table::new(&["n", "w"]);
        t.push(vec!["2".into(), num(0.5)]);
        assert_eq!(t.render("# c"), "# c\nn,w\n2,0.5\n");
        assert_eq!(opt(None), "");
    }

    #[test]
    fn plot_script_is_written() {
        let dir = tempfile::tempdir().unwrap();
        let csv = dir.path().join("p.csv");
        let s = write_plot_script(&csv, PlotKind::Pattern).unwrap();
        assert_eq!(s, dir.path().join("p.py"));
        let text = std::fs::read_to_string(s).unwrap();
        assert!(text.contains("\"p.csv\"") && text.contains("savefig"));
        assert_eq!(sibling(&csv, "_summary", "csv"), dir.path().join("p_summary.csv"));
    }
}
