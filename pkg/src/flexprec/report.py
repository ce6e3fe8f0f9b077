"""Delimited output and figure rendering.

CSV is RFC-4180-style: UTF-8, LF line endings, one header row, constant
column count.  Floats are written with repr, the shortest digit string
that round-trips, so re-running with the same seed reproduces
non-timing columns byte for byte.

Figures are rendered headless (Agg) and saved as standalone SVG
documents.  matplotlib is imported lazily: plain CSV paths must not pay
its startup cost.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple
from typing import Iterable, Optional, Sequence

import numpy as np

from .sherlog import EXP_MAX, EXP_MIN, LogHistogram, subnormal_fraction, suggest_scale

AXPY_HEADER = ("kind", "size", "t_min_s", "t_median_s", "gflops")
DIAG_HEADER = ("step", "t", "mean_eta", "mean_ke", "max_u")
SWEEP_HEADER = ("kind", "nx", "ny", "steps", "t_wall_s", "speedup",
                "rmse_eta", "comp_overhead", "status")
NET_HEADER = ("op", "ranks", "size_bytes", "t_min_us", "t_avg_us",
              "t_max_us", "throughput_MBps")
SHERLOG_HEADER = ("exponent", "count")


def format_cell(value) -> str:
    """One CSV cell: repr for floats, empty for missing."""
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(stream, header: Sequence[str], rows: Iterable) -> None:
    """Write header + rows; each row is a flat value sequence or a
    dataclass instance."""
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        values = astuple(row) if hasattr(row, "__dataclass_fields__") else row
        w.writerow([format_cell(v) for v in values])


def csv_text(header: Sequence[str], rows: Iterable) -> str:
    buf = io.StringIO()
    write_csv(buf, header, rows)
    return buf.getvalue()


def sherlog_rows(hist: LogHistogram) -> list:
    """Histogram as (exponent, count) rows.

    Nonzero magnitude bins come first, ascending; the zero/inf/nan
    rows are always present so the tail shape is fixed.
    """
    rows = [(str(e), c) for e, c in hist.exponent_counts() if c > 0]
    rows.append(("zero", hist.zero_count))
    rows.append(("inf", hist.inf_count))
    rows.append(("nan", hist.nan_count))
    return rows


def sherlog_summary(hist: LogHistogram) -> str:
    """One line with the binary16 subnormal share and the scale
    suggestion."""
    frac = subnormal_fraction(hist)
    scale = suggest_scale(hist)
    return ("subnormal_fraction=%s suggest_scale=%s total=%d"
            % (repr(frac), repr(scale), hist.total))


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def save_svg(fig, path: str) -> None:
    fig.savefig(path, format="svg")
    _plt().close(fig)


def fig_axpy(rows) -> "object":
    """Throughput against vector length, one curve per kind."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds = []
    for r in rows:
        if r.kind not in kinds:
            kinds.append(r.kind)
    for kind in kinds:
        pts = [(r.size, r.gflops) for r in rows if r.kind == kind]
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=kind)
    ax.set_xscale("log", base=2)
    ax.set_xlabel("vector length")
    ax.set_ylabel("GFLOP/s")
    ax.set_title("axpy throughput")
    ax.legend()
    fig.tight_layout()
    return fig


def fig_eta_heatmap(eta: np.ndarray, Lx: float, Ly: float) -> "object":
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 3.5))
    im = ax.imshow(np.asarray(eta, dtype=np.float64).T, origin="lower",
                   extent=(0.0, Lx / 1e3, 0.0, Ly / 1e3),
                   aspect="auto", cmap="RdBu_r")
    fig.colorbar(im, ax=ax, label="surface displacement (m)")
    ax.set_xlabel("x (km)")
    ax.set_ylabel("y (km)")
    fig.tight_layout()
    return fig


def fig_speedup(rows) -> "object":
    """Speedup against grid size, one curve per kind; diverged rows
    (NaN speedup) drop out of their curve."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6, 4))
    kinds = []
    for r in rows:
        if r.kind not in kinds:
            kinds.append(r.kind)
    for kind in kinds:
        pts = [(r.nx * r.ny, r.speedup) for r in rows
               if r.kind == kind and np.isfinite(r.speedup)]
        if not pts:
            continue
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=kind)
    ax.axhline(1.0, color="grey", lw=0.8, ls=":")
    ax.set_xscale("log", base=2)
    ax.set_xlabel("grid cells")
    ax.set_ylabel("speedup vs f64")
    ax.set_title("precision ladder")
    ax.legend()
    fig.tight_layout()
    return fig


def fig_sherlog(hist: LogHistogram) -> "object":
    plt = _plt()
    fig, ax = plt.subplots(figsize=(7, 3.5))
    exps = list(range(EXP_MIN, EXP_MAX + 1))
    counts = [c for _, c in hist.exponent_counts()]
    ax.bar(exps, counts, width=1.0)
    ax.set_yscale("symlog")
    ax.set_xlabel("magnitude exponent (floor log2 |x|)")
    ax.set_ylabel("count")
    ax.set_title("arithmetic result magnitudes")
    fig.tight_layout()
    return fig
