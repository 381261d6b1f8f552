"""Matplotlib figures written next to the CSV reports.

Only the CLI report path imports this module; the numerical core has no
graphics dependency.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def _finish(fig, ax, path):
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_bond_profile(profiles: dict, path, title=None):
    """``profiles`` maps a label to a list of ``{"bond", "chi"}`` records."""
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    markers = iter("osd^v<>")
    for label, records in profiles.items():
        ax.plot([r["bond"] for r in records], [r["chi"] for r in records],
                marker=next(markers, "o"), label=label)
    ax.set_xlabel("bond $l$")
    ax.set_ylabel(r"$\chi_l$")
    if title:
        ax.set_title(title)
    ax.legend()
    return _finish(fig, ax, path)


def plot_svd_sweep(curve, path, title=None):
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    tol = [c["svd_tolerance"] for c in curve]
    ax.loglog(tol, [c["e_TT"] for c in curve], marker="o", label="mean abs error")
    ax.loglog(tol, [c["e_TT_max"] for c in curve], marker="s", label="max abs error")
    ax.set_xlabel(r"SVD tolerance ($\phi$, $\hat v$)")
    ax.set_ylabel(r"$e_{\mathrm{TT}}$")
    if title:
        ax.set_title(title)
    ax.legend()
    return _finish(fig, ax, path)


def plot_table(rows, path, title=None):
    """Operation counts of the TT query against Monte Carlo, per asset count."""
    rows = [r for r in rows if r.status != "failed"]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ds = [r.d for r in rows]
    ax.semilogy(ds, [r.c_TT for r in rows], marker="o", label=r"$c_{\mathrm{TT}}$")
    ax.semilogy(ds, [r.c_MC for r in rows], marker="s", label=r"$c_{\mathrm{MC}}$")
    ax.set_xlabel("number of assets $d$")
    ax.set_ylabel("operations per price")
    if title:
        ax.set_title(title)
    ax.legend()
    return _finish(fig, ax, path)
