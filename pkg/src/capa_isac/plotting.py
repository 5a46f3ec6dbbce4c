"""Figures rendered next to the CSV outputs (the CSV files stay authoritative)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps PNG bytes reproducible across runs
_META = {"Software": None}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=110, metadata=_META)
    plt.close(fig)
    return path


def plot_beampattern(grid, targets, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(7, 4))
    mesh = ax.pcolormesh(grid.azimuth_deg, grid.elevation_deg, grid.gain.T, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="beam gain")
    for d in targets:
        a, e = d.degrees
        ax.plot(a, e, "rx", ms=9, mew=2)
    ax.set_xlabel(r"$\theta$ (deg)")
    ax.set_ylabel(r"$\phi$ (deg)")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_cut(azimuth_deg, gain, path, title: str = "") -> Path:
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(azimuth_deg, gain)
    ax.set_xlabel(r"$\theta$ (deg)")
    ax.set_ylabel("beam gain")
    ax.grid(True, alpha=0.3)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_ber(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["array_type"], r["rho"], r["constellation"]) for r in rows})
    for key in keys:
        sel = sorted((r for r in rows if (r["array_type"], r["rho"], r["constellation"]) == key), key=lambda r: r["snr_db"])
        ber = np.array([r["ber"] for r in sel])
        ax.plot([r["snr_db"] for r in sel], 10 * np.log10(np.maximum(ber, 1e-12)), "o-",
                label=f"{key[0]} rho={key[1]:g} {key[2]}")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("BER (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_tradeoff(rows, variable: str, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for arr in sorted({r["array_type"] for r in rows}):
        sel = [r for r in rows if r["array_type"] == arr]
        x = [r["value"] for r in sel]
        ax.plot(x, [r["f_c"] for r in sel], "o-", label=f"{arr} MUI")
        ax.plot(x, [r["f_s"] for r in sel], "s--", label=f"{arr} mismatch")
        ax.plot(x, [r["objective"] for r in sel], "^:", label=f"{arr} objective")
    ax.set_xlabel(variable)
    ax.set_yscale("log")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_ismr(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for arr in sorted({r["array_type"] for r in rows}):
        sel = sorted((r for r in rows if r["array_type"] == arr), key=lambda r: r["rho"])
        ax.plot([r["rho"] for r in sel], [r["ismr_db"] for r in sel], "o-", label=arr)
    ax.set_xlabel(r"$\rho$")
    ax.set_ylabel("ISMR (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    return _save(fig, path)
