"""Figure builders. Everything here draws what the CSV says, nothing more.

Rendering is deterministic: fixed figure geometry, no timestamps in the
saved files (PNG carries only matplotlib's constant Software tag).
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .csvio import read_table

FIGSIZE = (7.0, 4.2)
DPI = 130


def _save(fig, out: str) -> None:
    fig.savefig(out, dpi=DPI)
    plt.close(fig)


def render_path_with_tent(csv_path: str, out: str, title: str) -> None:
    """Log-amplitude path with its fitted tent (fig1 and fig2 share this)."""
    cols = read_table(csv_path, "figure")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(cols["n"], cols["log_norm"], lw=0.7, color="#1f77b4",
            label="log amplitude")
    ax.plot(cols["n"], cols["fit"], lw=1.6, ls="--", color="#d62728",
            label="tent fit")
    ax.set_xlabel("site $n$")
    ax.set_ylabel(r"$\log r_n$")
    ax.set_title(title)
    ax.legend(frameon=False, loc="lower center")
    _save(fig, out)


def render_fig1(csv_path: str, out: str) -> None:
    render_path_with_tent(csv_path, out,
                          "localized eigenvector, Dirichlet chain")


def render_fig2(csv_path: str, out: str) -> None:
    render_path_with_tent(csv_path, out,
                          "localized eigenvector, periodic ring")


def render_dos_overlay(csv_path: str, out: str) -> None:
    """Both DOS routes on one axis, one series per method tag."""
    cols = read_table(csv_path, "dos")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    styles = {"counting": dict(lw=0.0, marker=".", ms=3.5, color="#1f77b4"),
              "invariant": dict(lw=1.4, color="#d62728")}
    for method in sorted(set(cols["method"])):
        sel = cols["method"] == method
        style = styles.get(method, dict(lw=1.0))
        ax.plot(cols["lambda_bin_center"][sel], cols["density"][sel],
                label=method, **style)
    ax.set_xlabel(r"$\lambda$")
    ax.set_ylabel("density of states")
    ax.set_title("eigenvalue density, two routes")
    ax.legend(frameon=False)
    _save(fig, out)


def render_temperature_step(csv_path: str, out: str) -> None:
    cols = read_table(csv_path, "temperature")
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.errorbar(cols["x"], cols["measured"], yerr=cols["stderr"], fmt="o",
                ms=3.5, lw=0.9, capsize=2, color="#1f77b4", label="measured")
    ax.plot(cols["x"], cols["predicted"], lw=1.4, color="#d62728",
            label="predicted step")
    ax.set_xlabel("site $x$")
    ax.set_ylabel(r"$T(x)$")
    ax.set_title("temperature profile across the chain")
    ax.legend(frameon=False)
    _save(fig, out)


def render_tail_ensemble(csv_path: str, out: str, max_samples: int = 40) -> None:
    """Rescaled profiles q(s) for the first samples, overlaid."""
    cols = read_table(csv_path, "tails")
    ids = cols["sample_id"].astype(int)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    shown = 0
    for sid in np.unique(ids):
        if shown >= max_samples:
            break
        sel = ids == sid
        ax.plot(cols["s"][sel], cols["q"][sel], lw=0.6, alpha=0.45,
                color="#1f77b4")
        shown += 1
    ax.set_xlabel("$s$")
    ax.set_ylabel("$q(s)$")
    ax.set_title(f"rescaled eigenvector profiles ({shown} samples)")
    _save(fig, out)


RENDERERS = {
    "fig1": render_fig1,
    "fig2": render_fig2,
    "dos-overlay": render_dos_overlay,
    "temperature-step": render_temperature_step,
    "tail-ensemble": render_tail_ensemble,
}
