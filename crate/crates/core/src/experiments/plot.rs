//! Plot scripts for result tables. Nothing is rendered here; the emitted
//! Python script reads the CSV with pandas and draws with matplotlib.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlotKind {
    /// Oracle vs Monte Carlo scatter with a 3σ band.
    Moments,
    /// Survival probability vs horizon.
    Coexistence,
    /// Transform gap vs `n` with error bars.
    Fss,
    /// `p_t` and `g_t` against the site index.
    Kernels,
}

impl PlotKind {
    pub fn required_columns(self) -> &'static [&'static str] {
        match self {
            PlotKind::Moments => &["quantity", "oracle", "mc_mean", "mc_stderr"],
            PlotKind::Coexistence => &["horizon", "estimate", "stderr"],
            PlotKind::Fss => &["n", "a", "b", "gap", "combined_stderr"],
            PlotKind::Kernels => &["t", "site_index", "p_t", "g_t"],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PlotKind::Moments => "moments",
            PlotKind::Coexistence => "coexistence",
            PlotKind::Fss => "fss",
            PlotKind::Kernels => "kernels",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            PlotKind::Moments,
            PlotKind::Coexistence,
            PlotKind::Fss,
            PlotKind::Kernels,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn body(self) -> &'static str {
        match self {
            PlotKind::Moments => {
                r#"fig, ax = plt.subplots(figsize=(6, 6))
ax.errorbar(df["oracle"], df["mc_mean"], yerr=3 * df["mc_stderr"], fmt="o", capsize=3)
lo = min(df["oracle"].min(), df["mc_mean"].min())
hi = max(df["oracle"].max(), df["mc_mean"].max())
ax.plot([lo, hi], [lo, hi], "k--", lw=1)
for _, r in df.iterrows():
    ax.annotate(r["quantity"], (r["oracle"], r["mc_mean"]), fontsize=7)
ax.set_xlabel("oracle")
ax.set_ylabel("Monte Carlo mean (3 sigma bars)")
"#
            }
            PlotKind::Coexistence => {
                r#"fig, ax = plt.subplots()
ax.errorbar(df["horizon"], df["estimate"], yerr=3 * df["stderr"], fmt="o-", capsize=3)
ax.set_xlabel("horizon")
ax.set_ylabel("P(both types alive)")
ax.set_ylim(bottom=0)
"#
            }
            PlotKind::Fss => {
                r#"fig, ax = plt.subplots()
for (a, b), g in df.groupby(["a", "b"]):
    ax.errorbar(g["n"], g["gap"], yerr=3 * g["combined_stderr"], fmt="o-", capsize=3, label=f"a={a}, b={b}")
ax.axhline(0.05, color="k", ls="--", lw=1)
ax.set_xticks(sorted(df["n"].unique()))
ax.set_xlabel("n")
ax.set_ylabel("|particle - limit|")
ax.legend(fontsize=7)
"#
            }
            PlotKind::Kernels => {
                r#"fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
for t, g in df.groupby("t"):
    ax1.plot(g["site_index"], g["p_t"], "o-", label=f"t={t}")
    ax2.plot(g["site_index"], g["g_t"], "o-", label=f"t={t}")
ax1.set_ylabel("p_t")
ax2.set_ylabel("g_t")
for ax in (ax1, ax2):
    ax.set_xlabel("site index")
    ax.legend(fontsize=7)
"#
            }
        }
    }
}

/// Column names of a CSV written by [`super::OutputDir`], skipping the
/// leading schema comment.
pub fn csv_columns(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path)?;
    let header = text
        .lines()
        .find(|l| !l.starts_with('#'))
        .ok_or_else(|| Error::Schema(vec!["<header row>".into()]))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_reader(header.as_bytes());
    let rec = rdr.records().next().transpose()?.unwrap_or_default();
    Ok(rec.iter().map(str::to_string).collect())
}

/// Write `plot_<kind>.py` next to the CSV and return its path.
pub fn emit_plot_script(csv_path: &Path, kind: PlotKind) -> Result<PathBuf> {
    let cols = csv_columns(csv_path)?;
    let missing: Vec<String> = kind
        .required_columns()
        .iter()
        .filter(|c| !cols.iter().any(|h| h == *c))
        .map(|c| c.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Schema(missing));
    }
    let file_name = csv_path
        .file_name()
        .and_then(|f| f.to_str())
        .ok_or_else(|| Error::misuse("csv path has no file name"))?;
    let script = format!(
        r##"#!/usr/bin/env python3
# Plot for {file_name}. Run from any directory.
import pathlib

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

here = pathlib.Path(__file__).resolve().parent
df = pd.read_csv(here / "{file_name}", comment="#")
{body}ax = fig.axes[0]
ax.set_title("{kind}")
fig.tight_layout()
fig.savefig(here / "{kind}.png", dpi=150)
"##,
        body = kind.body(),
        kind = kind.name(),
    );
    let out = csv_path.with_file_name(format!("plot_{}.py", kind.name()));
    fs::write(&out, script)?;
    Ok(out)
}
