//! Standalone plot-script emission. No plotting happens in-process: each
//! function writes a python script that reads only the named CSV files.

use cavity_core::{CavityError, Result};
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    PhaseDiagram,
    Trajectory,
    SelfAveraging,
}

impl PlotKind {
    pub fn parse(name: &str) -> Result<PlotKind> {
        match name {
            "phase-diagram" => Ok(PlotKind::PhaseDiagram),
            "trajectory" => Ok(PlotKind::Trajectory),
            "selfavg" => Ok(PlotKind::SelfAveraging),
            other => Err(CavityError::invalid(format!("unknown plot kind {other:?}"))),
        }
    }
}

pub fn emit_plot_script(csv: &Path, kind: PlotKind, out: &Path) -> Result<()> {
    if !csv.exists() {
        return Err(CavityError::invalid(format!(
            "csv {} does not exist",
            csv.display()
        )));
    }
    let csv_name = csv.file_name().unwrap().to_string_lossy().to_string();
    let body = match kind {
        PlotKind::PhaseDiagram => phase_diagram_script(&csv_name),
        PlotKind::Trajectory => trajectory_script(&csv_name),
        PlotKind::SelfAveraging => selfavg_script(&csv_name),
    };
    std::fs::write(out, body)?;
    Ok(())
}

fn phase_diagram_script(csv: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
"""Critical field line with region labels; reads {csv} from this directory."""
import csv as csvmod
import matplotlib.pyplot as plt

beta, hc, beta_c = [], [], None
with open("{csv}") as fh:
    for row in csvmod.DictReader(fh):
        beta.append(float(row["beta"]))
        hc.append(float(row["htilde_c"]))
        if row["beta_c_flag"] == "1" and beta_c is None:
            beta_c = float(row["beta"])

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.plot(beta, hc, "k-", lw=1.5, label=r"$\tilde h_c(\beta)$")
top = max(hc) * 1.05
ax.annotate("A: identical pairs", xy=(beta[len(beta)//2], top * 0.85))
if beta_c is not None:
    ax.axvline(beta_c, color="gray", ls="--", lw=1, label=r"$\beta_c$")
    ax.annotate("C: free disjoint pairs", xy=(beta[2], min(hc) * 0.4))
    ax.annotate("B: locked pairs", xy=(beta_c * 1.1, min(hc) * 0.4))
ax.set_xlabel(r"$\beta$")
ax.set_ylabel(r"$\tilde h$")
ax.set_ylim(0, top)
ax.legend(loc="upper right")
fig.tight_layout()
fig.savefig("phase_diagram.png", dpi=150)
print("wrote phase_diagram.png")
"#
    )
}

fn trajectory_script(csv: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
"""Energy and overlap traces of one chain; reads {csv} from this directory."""
import csv as csvmod
import matplotlib.pyplot as plt

step, energy, overlap = [], [], []
with open("{csv}") as fh:
    for row in csvmod.DictReader(fh):
        step.append(int(row["step"]))
        energy.append(float(row["energy"]))
        overlap.append(float(row["overlap"]))

fig, (ax1, ax2) = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
ax1.plot(step, energy, lw=0.8)
ax1.set_ylabel("step energy")
ax2.plot(step, overlap, lw=0.8, color="tab:orange")
ax2.set_ylabel("successive overlap")
ax2.set_xlabel("step")
fig.tight_layout()
fig.savefig("trajectory.png", dpi=150)
print("wrote trajectory.png")
"#
    )
}

fn selfavg_script(csv: &str) -> String {
    format!(
        r#"#!/usr/bin/env python3
"""Variance ratio against the n^-2 reference; reads {csv} from this directory."""
import csv as csvmod
import matplotlib.pyplot as plt

k, ratio, ref = [], [], []
with open("{csv}") as fh:
    for row in csvmod.DictReader(fh):
        k.append(int(row["k"]))
        ratio.append(float(row["variance_ratio"]))
        ref.append(float(row["n_ref"]))

fig, ax = plt.subplots(figsize=(6, 4.5))
ax.semilogy(k, ratio, "o-", label=r"var $Z$ / (mean $Z)^2$")
ax.semilogy(k, ref, "s--", color="gray", label=r"$n^{{-2}}$ reference")
ax.set_xlabel("k")
ax.set_ylabel("ratio")
ax.legend()
fig.tight_layout()
fig.savefig("selfavg.png", dpi=150)
print("wrote selfavg.png")
"#
    )
}
