"""Figure rendering for study, cross-validation and frontier outputs.

Each function takes already-computed tables and writes a PNG next to the
delimited output; nothing here recomputes statistics.  The Agg backend
is forced so rendering works headless.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SCEN_ORDER = ("own", "other", "both")


def _scenario_label(pred, co):
    return pred + ("+target" if co else "")


def plot_study(long_rows, table, path, level=0.95):
    """Replicate RMSE boxplots per scenario and mean coverage bars."""
    families = sorted({r["family"] for r in long_rows if r["family"] != "null"})
    scens = [(p, co) for p in _SCEN_ORDER for co in (0, 1)]
    fig, axes = plt.subplots(2, 2, figsize=(12, 8))
    for col, resp in enumerate((0, 1)):
        ax = axes[0][col]
        data, labels, colors = [], [], []
        palette = plt.rcParams["axes.prop_cycle"].by_key()["color"]
        for si, (pred, co) in enumerate(scens):
            for fi, fam in enumerate(families):
                vals = [r["rmse"] for r in long_rows
                        if r["family"] == fam and r["response"] == resp
                        and r["predictors"] == pred
                        and r["other_at_target"] == co
                        and np.isfinite(r["rmse"])]
                data.append(vals if vals else [np.nan])
                labels.append(f"{_scenario_label(pred, co)}\n{fam}")
                colors.append(palette[fi % len(palette)])
        bp = ax.boxplot(data, tick_labels=labels, patch_artist=True)
        for patch, c in zip(bp["boxes"], colors):
            patch.set_facecolor(c)
        null_vals = [r["rmse"] for r in long_rows
                     if r["family"] == "null" and r["response"] == resp]
        if null_vals:
            ax.axhline(float(np.mean(null_vals)), ls="--", c="gray",
                       label="null (predict 0)")
            ax.legend(fontsize=8)
        ax.set_title(f"RMSE, response variable {resp}")
        ax.tick_params(axis="x", labelsize=7, rotation=45)
        ax = axes[1][col]
        xs = np.arange(len(scens))
        width = 0.8 / max(len(families), 1)
        for fi, fam in enumerate(families):
            cov = []
            for pred, co in scens:
                rows = [t for t in table
                        if t["family"] == fam and t["response"] == resp
                        and t["predictors"] == pred
                        and t["other_at_target"] == co]
                cov.append(rows[0]["mean_coverage"] if rows else np.nan)
            ax.bar(xs + fi * width, cov, width, label=fam,
                   color=palette[fi % len(palette)])
        ax.axhline(100.0 * level, ls="--", c="k", lw=0.8)
        ax.set_xticks(xs + 0.5 * width * (len(families) - 1))
        ax.set_xticklabels([_scenario_label(p, c) for p, c in scens],
                           fontsize=7, rotation=45)
        ax.set_ylim(0, 105)
        ax.set_title(f"coverage (%), response variable {resp}")
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_cv(summary, path):
    """Pooled cross-validation metrics as grouped bars."""
    metrics = ("rmse", "mae", "coverage", "median_interval_length")
    keys = [(s["family"], s["variant"]) for s in summary]
    fig, axes = plt.subplots(1, len(metrics), figsize=(4 * len(metrics), 3.5))
    xs = np.arange(len(keys))
    for ax, m in zip(axes, metrics):
        ax.bar(xs, [s[m] for s in summary], 0.6)
        ax.set_xticks(xs)
        ax.set_xticklabels([f"{f}\n{v}" for f, v in keys], fontsize=8)
        ax.set_title(m)
        if m == "coverage":
            ax.axhline(95.0, ls="--", c="k", lw=0.8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_frontier(grid_a, grid_b, bound, path, labels=("alpha_2", "nu_2")):
    """Heatmap of the maximal cross-correlation over a parameter grid."""
    fig, ax = plt.subplots(figsize=(6, 5))
    im = ax.pcolormesh(grid_a, grid_b, bound, shading="auto", vmin=0.0,
                       vmax=1.0)
    fig.colorbar(im, ax=ax, label="max |corr|")
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title("admissible cross-correlation frontier")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
