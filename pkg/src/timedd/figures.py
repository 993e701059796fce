"""PNG renderings of the report tables (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# Fixed metadata keeps the files byte-identical between runs.
_PNG_METADATA = {"Software": None}
_STYLES = {"DN1": "-", "ND1": "--", "DN2": "-", "ND2": "--", "DN3": "-", "ND3": "--"}
_COLOURS = {"DN1": "C0", "ND1": "C1", "DN2": "C2", "ND2": "C3", "DN3": "C4", "ND3": "C5"}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=110, metadata=_PNG_METADATA)
    plt.close(fig)
    return path


def plot_rho_curves(table, path, title: str = "") -> Path:
    """One panel per theta block of an analyze table; limit rows are skipped."""
    header = table.header
    algs = header[2:]
    blocks = {}
    for row in table.rows:
        d = float(row[1])
        if d <= 0 or not np.isfinite(d):
            continue
        blocks.setdefault(row[0], []).append(row)
    ncols = len(blocks)
    fig, axes = plt.subplots(1, ncols, figsize=(5.5 * ncols, 4.2), squeeze=False)
    for ax, (label, rows) in zip(axes[0], blocks.items()):
        d = np.array([float(r[1]) for r in rows])
        for j, alg in enumerate(algs):
            vals = np.array([float(r[2 + j]) for r in rows])
            ax.plot(d, vals, _STYLES.get(alg, "-"), color=_COLOURS.get(alg), label=alg, lw=1.4)
        ax.axhline(1.0, color="0.5", lw=0.8, ls=":")
        ax.set_xscale("log")
        ax.set_xlabel("eigenvalue d")
        ax.set_ylabel("convergence factor")
        ax.set_title(f"theta = {label}")
        ax.set_ylim(bottom=0.0)
        ax.legend(fontsize=8)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_theta_opt(table, grid, curves, path) -> Path:
    """Convergence factor at the numeric optimum, one curve per algorithm."""
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for alg, vals in curves.items():
        ax.plot(grid, vals, _STYLES.get(alg, "-"), color=_COLOURS.get(alg), lw=1.4,
                label=f"{alg} (theta={float(table.column('theta_numeric')[table.column('algorithm').index(alg)]):.4f})")
    ax.set_xscale("log")
    ax.set_xlabel("eigenvalue d")
    ax.set_ylabel("convergence factor at optimal theta")
    ax.set_ylim(bottom=0.0)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def plot_residuals(results, path) -> Path:
    fig, ax = plt.subplots(figsize=(6.5, 4.2))
    for r in results:
        res = np.asarray(r.history.residual_norms, dtype=float)
        k = np.arange(1, res.size + 1)
        ok = np.isfinite(res) & (res > 0)
        alg = r.algorithm.value
        ax.semilogy(k[ok], res[ok], _STYLES.get(alg, "-"), color=_COLOURS.get(alg), marker=".",
                    label=f"{alg} ({r.history.status})")
    ax.set_xlabel("iteration")
    ax.set_ylabel("interface residual")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)
