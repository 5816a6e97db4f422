"""Delimited outputs and the figures rendered next to them.

Everything written here is deterministic for a given input: floats are
serialized with ``repr`` (shortest round-trip form), JSON keys are sorted,
and SVG output carries no timestamps and uses a fixed hash salt, so repeated
runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "ptmmd"

import matplotlib.pyplot as plt  # noqa: E402

_SIGMOID_STYLE = {
    "true": ("#1f77b4", "o"),
    "plan": ("#2ca02c", "s"),
    "ramp": ("#d62728", "^"),
    "as": ("#9467bd", "d"),
}


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_csv(path: str | os.PathLike) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as f:
        reader = csv.reader(f)
        rows = list(reader)
    if not rows:
        return [], []
    return rows[0], rows[1:]


def write_json(path: str | os.PathLike, payload: dict) -> None:
    with open(path, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
        f.write("\n")


def _save(fig, path: str | os.PathLike) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def sweep_chart(
    path: str | os.PathLike,
    summary_rows: list[tuple[str, int, str, float, float]],
    distance: str,
    alpha: float,
) -> None:
    """Mean p-value against bitwidth, one line per sigmoid, rule at alpha.

    ``summary_rows`` are (distance, bitwidth, sigmoid, mean_p, ci_half_width)
    tuples; only rows matching ``distance`` are drawn.
    """
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    by_sigmoid: dict[str, list[tuple[int, float, float]]] = {}
    for dist, bitwidth, sigmoid, mean_p, half in summary_rows:
        if dist == distance:
            by_sigmoid.setdefault(sigmoid, []).append((bitwidth, mean_p, half))
    for sigmoid in sorted(by_sigmoid):
        pts = sorted(by_sigmoid[sigmoid])
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        errs = [p[2] for p in pts]
        color, marker = _SIGMOID_STYLE.get(sigmoid, ("#7f7f7f", "x"))
        ax.errorbar(
            xs, ys, yerr=errs, label=sigmoid, color=color, marker=marker, capsize=3
        )
    ax.axhline(alpha, color="black", linestyle="--", linewidth=1, label=f"alpha={alpha:g}")
    ax.set_xscale("log", base=2)
    ax.set_xticks(sorted({r[1] for r in summary_rows}))
    ax.get_xaxis().set_major_formatter(matplotlib.ticker.ScalarFormatter())
    ax.set_xlabel("total bitwidth")
    ax.set_ylabel("mean p-value")
    ax.set_title(f"{distance} kernel")
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def cdf_chart(
    path: str | os.PathLike,
    baseline_pairs: list[tuple[float, float]],
    permuted_pairs: list[tuple[float, float]],
) -> None:
    """Overlayed empirical CDFs of baseline and permutation statistics."""
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for pairs, name, color in (
        (permuted_pairs, "permutation", "#1f77b4"),
        (baseline_pairs, "baseline", "#d62728"),
    ):
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
        # anchor the first step at probability 0 for a conventional staircase
        ax.step([xs[0]] + xs, [0.0] + ys, where="post", label=name, color=color)
    ax.set_xlabel("squared MMD statistic")
    ax.set_ylabel("cumulative probability")
    ax.set_ylim(-0.02, 1.02)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)
