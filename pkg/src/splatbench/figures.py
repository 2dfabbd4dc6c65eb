"""Matplotlib report figures written alongside the CSV outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

_BUCKET_COLORS = {"e_g": "#4878cf", "e_n": "#6acc65", "e_p": "#d65f5f"}


def save_compare_figure(rows: list[dict], path) -> None:
    """Pair counts and cost buckets per culling mode, as two bar panels."""
    modes = [row["mode"] for row in rows]
    fig, (ax_pairs, ax_cost) = plt.subplots(1, 2, figsize=(9, 3.6))

    pairs = [row["pairs"] for row in rows]
    ax_pairs.bar(modes, pairs, color="#4878cf")
    ax_pairs.set_ylabel("Gaussian-tile pairs")
    ax_pairs.set_title("Pairs per culling mode")
    for i, value in enumerate(pairs):
        ax_pairs.annotate(f"{value:,}", (i, value), ha="center", va="bottom", fontsize=8)

    bottom = [0.0] * len(rows)
    for bucket in ("e_g", "e_n", "e_p"):
        values = [row[bucket] * 1e3 for row in rows]
        ax_cost.bar(modes, values, bottom=bottom, label=bucket,
                    color=_BUCKET_COLORS[bucket])
        bottom = [b + v for b, v in zip(bottom, values)]
    ax_cost.set_ylabel("time (ms)")
    ax_cost.set_title("Stage cost buckets")
    ax_cost.legend(fontsize=8)

    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)


def save_bench_figure(stage_medians: dict[str, float], path, title: str = "") -> None:
    """Median per-stage wall time, one bar per pipeline stage."""
    names = list(stage_medians)
    values = [stage_medians[name] * 1e3 for name in names]
    fig, ax = plt.subplots(figsize=(7, 3.4))
    ax.bar(names, values, color="#4878cf")
    ax.set_ylabel("median time (ms)")
    if title:
        ax.set_title(title)
    ax.tick_params(axis="x", labelrotation=20)
    fig.tight_layout()
    fig.savefig(Path(path), dpi=120)
    plt.close(fig)
