"""Figure rendering for CLI reports.

Only the command-line layer imports this module; the computational core
stays free of any rendering dependency.  Figures are written next to the
CSV artifacts they illustrate.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "plot_kernel",
    "plot_family",
    "plot_growth",
    "plot_trace",
    "plot_field",
    "plot_association",
    "plot_convergence",
]


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_kernel(kernel, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.4))
    ax.plot(kernel.samples_x, kernel.samples_chi, lw=1.4)
    ax.axhline(0.0, color="0.6", lw=0.6)
    ax.set_xlabel("x")
    ax.set_ylabel("kernel value")
    ax.set_title("moment order %d, radius %g"
                 % (kernel.moment_order, kernel.support_radius))
    return _save(fig, path)


def plot_family(samples: dict, path: str, xlabel: str = "x") -> str:
    """samples: {eps: (xs, values)} curves of the family."""
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for eps, (xs, vals) in samples.items():
        ax.plot(xs, vals, lw=1.1, label="eps=%g" % eps)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("value")
    ax.legend(fontsize=7)
    return _save(fig, path)


def plot_growth(report, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    eps = np.asarray(report.epsilon_schedule)
    sups = np.asarray(report.sup_norms)
    ax.plot(1.0 / eps, sups, "o-", lw=1.2)
    ax.set_xscale("log")
    if np.all(sups > 0):
        ax.set_yscale("log")
    ax.set_xlabel("1/eps")
    ax.set_ylabel("sampled sup")
    ax.set_title("%s  (residual %.2e)" % (report.fitted_class, report.fit_residual))
    return _save(fig, path)


def plot_trace(trace, path: str) -> str:
    fig, ax = plt.subplots(figsize=(4.6, 4.0))
    ax.plot(trace.gamma, trace.tau, lw=1.3)
    ax.plot([trace.origin[0]], [trace.origin[1]], "ko", ms=4)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("backward characteristic")
    return _save(fig, path)


def plot_field(fieldsol, path: str) -> str:
    ncomp = fieldsol.ncomp
    fig, axes = plt.subplots(1, ncomp, figsize=(4.2 * ncomp, 3.4),
                             squeeze=False)
    for i in range(ncomp):
        ax = axes[0][i]
        pm = ax.pcolormesh(fieldsol.x, fieldsol.t, fieldsol.component(i),
                           shading="auto")
        fig.colorbar(pm, ax=ax)
        ax.set_xlabel("x")
        ax.set_ylabel("t")
        ax.set_title("component %d" % (i + 1))
    return _save(fig, path)


def plot_association(reports, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    for rep in reports:
        eps = np.asarray(rep.epsilon_schedule)
        mags = np.abs(np.asarray(rep.integrals))
        label = "component %d" % (rep.component + 1)
        ax.plot(eps, np.maximum(mags, 1e-300), "o-", lw=1.2, label=label)
        ax.axhline(rep.tolerance, ls="--", lw=0.8, color="0.4")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("|pairing|")
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_convergence(report, path: str) -> str:
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    rows = report.rows
    eps = [r[0] for r in rows]
    ax.plot(eps, [r[2] for r in rows], "o-", label="traced foot")
    ax.plot(eps, [r[3] for r in rows], "s--", lw=0.9, label="lower bracket")
    ax.plot(eps, [r[4] for r in rows], "s--", lw=0.9, label="upper bracket")
    ax.axhline(report.limit_foot, color="k", lw=0.8, label="sharp limit")
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_xlabel("eps")
    ax.set_ylabel("foot position")
    ax.legend(fontsize=8)
    return _save(fig, path)
