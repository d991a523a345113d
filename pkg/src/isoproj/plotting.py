"""Figures written next to the CSV outputs (PNG, Agg backend)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.figsize": (4.5, 3.2),
    "figure.dpi": 100,
    "savefig.dpi": 150,
    "svg.hashsalt": "isoproj",
}


def _save(fig, path):
    # no Software/date metadata so repeated runs give identical bytes
    fig.savefig(path, metadata={"Software": None}, bbox_inches="tight")
    plt.close(fig)


def plot_fit(summary, data, path, max_points: int = 2000):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        step = max(1, data.n // max_points)
        ax.plot(data.xs[::step], data.ys[::step], ".", ms=2, color="0.6", label="data")
        ax.fill_between(summary.grid, summary.lower_band, summary.upper_band, step="mid",
                        alpha=0.3, color="C0", lw=0,
                        label=f"{100 * (1 - summary.alpha):g}% band")
        ax.plot(summary.grid, summary.median_curve, color="C0", label="median")
        ax.plot(summary.grid, summary.mean_curve, "--", color="C1", lw=1, label="mean")
        ax.set_xlabel("x")
        ax.set_ylabel("f(x)")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_rates(report, path):
    ns = np.asarray(report.n_grid, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        err = np.vstack([report.median_error - report.q25, report.q75 - report.median_error])
        ax.errorbar(ns, report.median_error, yerr=err, fmt="o-", ms=3, capsize=2,
                    label=f"median error (slope {report.slope:.3f})")
        ref = report.median_error[0] * (ns / ns[0]) ** (-1.0 / 3.0)
        ax.plot(ns, ref, ":", color="0.4", label="n^(-1/3)")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("n")
        ax.set_ylabel(report.metric)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_power(rows, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        truths = list(dict.fromkeys(r["truth"] for r in rows))
        for truth in truths:
            sel = [r for r in rows if r["truth"] == truth]
            ax.errorbar([r["n"] for r in sel], [r["rejection_rate"] for r in sel],
                        yerr=[2 * r["mc_se"] for r in sel], fmt="o-", ms=3, capsize=2, label=truth)
        ax.set_xscale("log")
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("n")
        ax.set_ylabel("rejection rate")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_separation(rows, path, tau=None):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        s = [r[0] for r in rows]
        ax.errorbar(s, [r[1] for r in rows], yerr=[2 * r[2] for r in rows], fmt="o-", ms=3, capsize=2)
        if tau is not None:
            ax.axvline(tau, ls=":", color="0.4", label="tau_n")
            ax.legend(frameon=False)
        ax.set_ylim(-0.05, 1.05)
        ax.set_xlabel("L1 distance to the monotone cone")
        ax.set_ylabel("power")
        _save(fig, path)
