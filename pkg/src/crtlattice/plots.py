"""Figure rendering for CLI artifacts.

Each report command writes a PNG next to its delimited output.  Rendering is
headless and deterministic for a fixed matplotlib version (fixed size, dpi,
and no embedded timestamps), so figures participate in byte-level
reproducibility checks alongside the CSV files.
"""

from __future__ import annotations

import math
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .lattice import SPHERE_BOUND, QuantizationSweepRow
from .sim import ComplexityRow, ErrorRatePoint, NestedSummary, RateCurvePoint

_DPI = 140


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)


def plot_cosets(reps: np.ndarray, q: int, path) -> None:
    """Scatter of coset representatives; 2-d lattices also show one tiling ring."""
    fig, ax = plt.subplots(figsize=(5.2, 5.0))
    if reps.shape[1] == 2:
        for dx in (-q, 0, q):
            for dy in (-q, 0, q):
                shifted = reps + np.array([dx, dy])
                inner = dx == 0 and dy == 0
                ax.scatter(
                    shifted[:, 0],
                    shifted[:, 1],
                    s=26 if inner else 10,
                    c="tab:blue" if inner else "lightgray",
                    zorder=3 if inner else 2,
                )
        ax.add_patch(
            plt.Rectangle((0, 0), q, q, fill=False, edgecolor="tab:red", linestyle="--", lw=1.0)
        )
        ax.set_xlabel("coordinate 1")
        ax.set_ylabel("coordinate 2")
        ax.set_aspect("equal")
    else:
        ax.plot(reps[:, 0], np.zeros(len(reps)), "o")
        ax.set_xlabel("coordinate 1")
        ax.set_yticks([])
    ax.set_title(f"{len(reps)} coset representatives (mod {q})")
    _save(fig, path)


def plot_error_rates(points: Sequence[ErrorRatePoint], path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    decoders = sorted({p.decoder for p in points})
    floor = 1e-6
    for name in decoders:
        rows = [p for p in points if p.decoder == name]
        snr = [p.snr_db for p in rows]
        wer = [max(p.wer, floor) for p in rows]
        lo = [max(p.wer_lo, floor) for p in rows]
        hi = [max(p.wer_hi, floor) for p in rows]
        ax.semilogy(snr, wer, "o-", label=name)
        ax.fill_between(snr, lo, hi, alpha=0.15)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("word-error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_rate_curve(points: Sequence[RateCurvePoint], q: int, path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    snr = [p.snr_db for p in points]
    ax.plot(snr, [p.r_msd for p in points], "o-", label="multistage")
    ax.plot(snr, [p.r_smd for p in points], "s-", label="serial modulo")
    ax.plot(snr, [p.r_pmd for p in points], "^-", label="parallel modulo")
    finite = [s for s in snr if math.isfinite(s)]
    if finite:
        grid = np.linspace(min(finite), max(finite), 200)
        ax.plot(grid, 0.5 * np.log2(1 + 10 ** (grid / 10)), "k--", lw=0.9, label="1/2 log2(1+SNR)")
    ax.axhline(math.log2(q), color="gray", lw=0.8, linestyle=":", label=f"log2({q})")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("rate (bits/dim)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_quantization_sweep(rows: Sequence[QuantizationSweepRow], path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    ens = [r for r in rows if r.kind == "ensemble"]
    ax.errorbar(
        [r.n for r in ens],
        [r.nsm_mean for r in ens],
        yerr=[2 * r.nsm_se for r in ens],
        fmt="o-",
        label="ensemble mean",
    )
    ax.axhline(1 / 12, color="tab:orange", lw=0.9, linestyle="--", label="cubic 1/12")
    ax.axhline(SPHERE_BOUND, color="gray", lw=0.9, linestyle=":", label="sphere bound 1/(2 pi e)")
    ax.set_xlabel("dimension n")
    ax.set_ylabel("normalized second moment")
    ax.grid(True, alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_complexity(rows: Sequence[ComplexityRow], path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    q = [r.q for r in rows]
    ax.loglog(q, [r.single_level_cost for r in rows], "o-", label="single code over Z_q")
    ax.loglog(q, [r.multilevel_cost for r in rows], "s-", label="per-level sum")
    ax.set_xlabel("q")
    ax.set_ylabel("decoding cost (model)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)


def plot_nested_summary(rows: Sequence[NestedSummary], path) -> None:
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    floor = 1e-6
    snr = [r.snr_db for r in rows]
    ax.semilogy(snr, [max(r.wer, floor) for r in rows], "o-", label="word-error rate")
    ax.fill_between(
        snr,
        [max(r.wer_lo, floor) for r in rows],
        [max(r.wer_hi, floor) for r in rows],
        alpha=0.15,
    )
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("word-error rate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    _save(fig, path)
