"""Render search traces and bench aggregates to figures plus TSV summaries.

Everything is written to files under an output directory; nothing opens a
window (the Agg backend is forced before pyplot loads). Rendering is kept
deterministic so reruns produce byte-identical PNGs: fixed dpi, no Software
metadata line, and all values come from the input files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ContractError
from .fmqa import read_trace

_DPI = 150
_ORIGIN_COLORS = {
    "initial": "tab:gray",
    "annealer": "tab:blue",
    "neighbor": "tab:orange",
}

TRACE_SUMMARY_HEADER = "iteration\torigin\tloci\tcer\tbest_so_far"


def _save(fig, path: Path) -> None:
    fig.savefig(path, dpi=_DPI, metadata={"Software": None})
    plt.close(fig)


def render_trace_report(trace_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Convergence figure plus a per-record TSV with the running best."""
    rows = read_trace(trace_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    best = np.minimum.accumulate([r.cer for r in rows])

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for origin, color in _ORIGIN_COLORS.items():
        pts = [(r.iteration, r.cer) for r in rows if r.origin == origin]
        if pts:
            xs, ys = zip(*pts)
            ax.scatter(xs, ys, s=14, color=color, label=origin, alpha=0.7)
    ax.step(
        [r.iteration for r in rows],
        best,
        where="post",
        color="black",
        linewidth=1.2,
        label="best so far",
    )
    ax.set_xlabel("iteration")
    ax.set_ylabel("classification error rate")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    figure_path = out / "convergence.png"
    _save(fig, figure_path)

    summary_path = out / "summary.tsv"
    lines = [TRACE_SUMMARY_HEADER]
    for row, running in zip(rows, best):
        loci = ",".join(str(i) for i in row.loci)
        lines.append(f"{row.iteration}\t{row.origin}\t{loci}\t{row.cer!r}\t{float(running)!r}")
    summary_path.write_text("\n".join(lines) + "\n")
    return [figure_path, summary_path]


def _load_bench_rows(path: str | Path) -> list[dict]:
    import json

    rows = json.loads(Path(path).read_text())
    if not isinstance(rows, list) or not rows:
        raise ContractError("bench rows file must hold a non-empty JSON array")
    needed = {
        "n_loci",
        "d",
        "model",
        "runs",
        "success_rate",
        "avg_success_iteration",
        "max_success_iteration",
        "repairs",
    }
    for i, row in enumerate(rows):
        missing = needed - set(row)
        if missing:
            raise ContractError(f"bench row {i} is missing keys: {sorted(missing)}")
    return rows


def render_bench_report(rows_path: str | Path, out_dir: str | Path) -> list[Path]:
    """Success-rate and iteration figures plus the aggregate table as TSV."""
    rows = _load_bench_rows(rows_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    labels = [f"N={r['n_loci']} d={r['d']}\n{r['model']}" for r in rows]
    x = np.arange(len(rows))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(x, [r["success_rate"] for r in rows], color="tab:blue", width=0.6)
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("success rate")
    fig.tight_layout()
    rate_path = out / "success_rate.png"
    _save(fig, rate_path)

    # None (no successful run) plots as a gap, matching the "-" in the table.
    avg = np.array(
        [np.nan if r["avg_success_iteration"] is None else r["avg_success_iteration"] for r in rows],
        dtype=np.float64,
    )
    top = np.array(
        [np.nan if r["max_success_iteration"] is None else r["max_success_iteration"] for r in rows],
        dtype=np.float64,
    )
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.bar(x, avg, color="tab:blue", width=0.6, label="average")
    ax.scatter(x, top, color="tab:red", marker="_", s=400, label="maximum")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("success iteration")
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    iter_path = out / "iterations.png"
    _save(fig, iter_path)

    summary_path = out / "summary.tsv"
    from .bench import BENCH_HEADER

    lines = [BENCH_HEADER]
    for r in rows:
        avg_txt = "-" if r["avg_success_iteration"] is None else f"{r['avg_success_iteration']:.1f}"
        top_txt = "-" if r["max_success_iteration"] is None else str(r["max_success_iteration"])
        lines.append(
            f"{r['n_loci']}\t{r['d']}\t{r['model']}\t{r['runs']}"
            f"\t{r['success_rate']:.2f}\t{avg_txt}\t{top_txt}\t{r['repairs']}"
        )
    summary_path.write_text("\n".join(lines) + "\n")
    return [rate_path, iter_path, summary_path]
