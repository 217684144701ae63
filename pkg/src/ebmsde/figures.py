"""Figure rendering for the report path: one or two PNGs per run kind.

Figures are a convenience layer over the CSV tables; the delimited output
remains the primary artifact and the only byte-deterministic one.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_RC = {
    "figure.figsize": (6.4, 4.2),
    "figure.dpi": 130,
    "savefig.dpi": 130,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "axes.titlesize": 10,
    "lines.linewidth": 1.4,
}


def _save(fig, out_dir: str, name: str) -> str:
    path = os.path.join(out_dir, name)
    fig.savefig(path, bbox_inches="tight")
    plt.close(fig)
    return path


def _fig_simulate(summary, tables, data, out_dir):
    paths = []
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
        times, nodal = data["times"], data["nodal"]
        mesh = ax0.pcolormesh(data["nodes"], times, nodal, shading="nearest",
                              cmap="coolwarm")
        fig.colorbar(mesh, ax=ax0, label="temperature")
        ax0.set_xlabel("x = sin(latitude)")
        ax0.set_ylabel("t")
        ax0.set_title("field evolution")
        ax1.plot(times, data["nodal_min"], label="nodal min")
        ax1.plot(times, data["nodal_max"], label="nodal max")
        ax1.plot(times, data["l2"], label="L2 norm", ls="--")
        ax1.axhline(-10.0, color="k", lw=0.8, ls=":")
        ax1.set_xlabel("t")
        ax1.legend()
        ax1.set_title("diagnostics")
        paths.append(_save(fig, out_dir, "simulate.png"))
    return paths


def _fig_isometry(summary, tables, data, out_dir):
    rows = data["rows"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        idx = np.arange(len(rows))
        mc = [r[1] for r in rows]
        target = [r[2] for r in rows]
        err = [4.0 * r[3] for r in rows]
        ax.errorbar(idx, mc, yerr=err, fmt="o", capsize=4,
                    label="Monte Carlo (4 s.e.)")
        ax.plot(idx, target, "k_", ms=18, label="analytic target")
        ax.set_xticks(idx, [f"t={r[0]:g}" for r in rows])
        ax.set_ylabel("E||z_t||^2")
        ax.set_title("noise-integral second moment vs target")
        ax.legend()
        return [_save(fig, out_dir, "isometry.png")]


def _fig_convolution(summary, tables, data, out_dir):
    with plt.rc_context(_RC):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(10, 4))
        rows = data["rows"]
        idx = np.arange(len(rows))
        ax0.errorbar(idx, [r[1] for r in rows], yerr=[4 * r[3] for r in rows],
                     fmt="o", capsize=4, label="Monte Carlo (4 s.e.)")
        ax0.plot(idx, [r[2] for r in rows], "k_", ms=18, label="trace formula")
        ax0.set_xticks(idx, [f"t={r[0]:g}" for r in rows])
        ax0.set_title("convolution second moment")
        ax0.legend()
        bk = data["burkholder"]
        ax1.plot([r[0] for r in bk], [r[3] for r in bk], "o-")
        ax1.set_xlabel("horizon T")
        ax1.set_ylabel("E[sup ||.||^2] / trace(T)")
        ax1.set_title("running-sup ratio")
        return [_save(fig, out_dir, "convolution.png")]


def _fig_compare(summary, tables, data, out_dir):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        if "result" in data:
            res = data["result"]
            ax.semilogy(res.times, np.maximum(res.gap, 1e-300), label="gap")
            ax.semilogy(res.times, np.maximum(res.bound, 1e-300), "--",
                        label="exponential bound")
            ax.set_xlabel("t")
            ax.set_title("pathwise comparison")
            ax.legend()
        else:
            rows = data["rows"]
            ax.bar([r[0] for r in rows], [r[4] for r in rows])
            ax.set_xlabel("config")
            ax.set_ylabel("sup gap")
            ax.set_title(f"ordered-data suite ({len(rows)} configs)")
        return [_save(fig, out_dir, "compare.png")]


def _fig_ladder(name, xlabel):
    def render(summary, tables, data, out_dir):
        res = data["ladder"]
        with plt.rc_context(_RC):
            fig, ax = plt.subplots()
            if name == "eps_convergence":
                x = res.values
                ax.loglog(x, np.maximum(res.distances, 1e-300), "o-",
                          label="sup-time distance")
                guide = [res.distances[0] * v / x[0] for v in x]
                ax.loglog(x, guide, "k:", label="slope 1")
            else:
                x = res.values[1:]
                ax.loglog(x, np.maximum(res.distances, 1e-300), "o-",
                          label="consecutive distance")
            ax.set_xlabel(xlabel)
            ax.set_ylabel("sup-time L2 distance")
            ax.invert_xaxis()
            ax.legend()
            return [_save(fig, out_dir, f"{name}.png")]

    return render


def _fig_stationary(summary, tables, data, out_dir):
    basis, branch = data["basis"], data["branch"]
    from .basis import to_nodal

    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for eq in branch.equilibria:
            ax.plot(basis.nodes, to_nodal(eq.coeffs, basis),
                    label=f"u(0)={eq.u_at_center:.3f} [{eq.classification}]")
        for field, style in ((data["u_min"], ":"), (data["u_max"], ":")):
            ax.plot(basis.nodes, to_nodal(field, basis), "k" + style, lw=0.9)
        ax.axhline(-10.0, color="gray", lw=0.8)
        ax.set_xlabel("x = sin(latitude)")
        ax.set_ylabel("temperature")
        ax.set_title(f"equilibria at Q={branch.Q:g} (dotted: min/max branches)")
        ax.legend(fontsize=8)
        return [_save(fig, out_dir, "stationary.png")]


def _fig_scan(summary, tables, data, out_dir):
    branches, th = data["branches"], data["thresholds"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        style = {"below": "s", "above": "o", "mixed": "^"}
        seen = set()
        for b in branches:
            for eq in b.equilibria:
                label = eq.classification if eq.classification not in seen else None
                seen.add(eq.classification)
                ax.plot(b.Q, eq.u_at_center, style[eq.classification],
                        color="C0", label=label)
        for q, name in ((th.q1, "Q1"), (th.q2, "Q2"), (th.q3, "Q3"),
                        (th.q4, "Q4")):
            ax.axvline(q, color="gray", lw=0.8, ls="--")
            ax.text(q, ax.get_ylim()[1], name, fontsize=8, ha="center",
                    va="bottom")
        ax.axhline(-10.0, color="k", lw=0.8, ls=":")
        ax.set_xlabel("Q")
        ax.set_ylabel("equilibrium value at x=0")
        ax.set_title("stationary branches over the solar constant")
        if seen:
            ax.legend()
        return [_save(fig, out_dir, "bifurcation.png")]


def _fig_longtime(summary, tables, data, out_dir):
    times, min_dist = data["times"], data["min_dist"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        med = np.median(min_dist, axis=1)
        q10 = np.quantile(min_dist, 0.1, axis=1)
        q90 = np.quantile(min_dist, 0.9, axis=1)
        ax.fill_between(times, np.maximum(q10, 1e-300),
                        np.maximum(q90, 1e-300), alpha=0.3,
                        label="10-90% band")
        ax.semilogy(times, np.maximum(med, 1e-300), label="median")
        ax.axhline(data["tol"], color="k", ls=":", lw=0.9, label="tolerance")
        ax.set_xlabel("t")
        ax.set_ylabel("distance to nearest equilibrium")
        ax.set_title(f"stabilization ({min_dist.shape[1]} paths)")
        ax.legend()
        return [_save(fig, out_dir, "longtime.png")]


def _fig_resolution(summary, tables, data, out_dir):
    chain = data["chain"]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.loglog(chain, data["yu_gaps"], "o-", label="y-form vs u-form")
        ax.loglog(chain[:-1], data["self_errs"], "s-", label="self convergence")
        ref = [data["yu_gaps"][0] * dt / chain[0] for dt in chain]
        ax.loglog(chain, ref, "k:", label="slope 1")
        ax.set_xlabel("dt")
        ax.set_ylabel("sup-time L2 discrepancy")
        ax.set_title("step-size study")
        ax.legend()
        return [_save(fig, out_dir, "resolution.png")]


_RENDERERS = {
    "simulate": _fig_simulate,
    "isometry": _fig_isometry,
    "convolution": _fig_convolution,
    "compare": _fig_compare,
    "converge-eps": _fig_ladder("eps_convergence", "noise amplitude"),
    "converge-lambda": _fig_ladder("lambda_convergence", "regularization"),
    "stationary": _fig_stationary,
    "scan-q": _fig_scan,
    "longtime": _fig_longtime,
    "resolution-study": _fig_resolution,
}


def render_figures(kind: str, summary: dict, tables: dict, data: dict,
                   out_dir: str) -> list[str]:
    renderer = _RENDERERS.get(kind)
    if renderer is None:
        return []
    os.makedirs(out_dir, exist_ok=True)
    return renderer(summary, tables, data, out_dir)
