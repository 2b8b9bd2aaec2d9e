"""Figure builders for the harness CSV schema.

Supported kinds:

  heatmap    two swept axes -> BER map, minimum cell annotated
  benchmark  BER versus window size, one series per processing mode
  distance   BER versus fiber length, one series per mode
  power      BER versus received-power attenuation
  osnr       BER versus optical SNR target
  eye        folded two-bit-period traces from the eye CSV
  histogram  sampled-level histogram CSV

BER axes are log-scaled.  Values at or below the measurement floor
(2.4e-5 by default, including exact zeros) are censored: clipped to the
floor and drawn as downward arrows.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotSpec", "read_csv", "build_figure", "render", "PLOT_KINDS",
           "heatmap_minimum"]

PLOT_KINDS = ("heatmap", "benchmark", "distance", "power", "osnr", "eye",
              "histogram")

_RESULT_COLUMNS = ("mode", "repetition", "mask_id", "ber", "threshold",
                   "train_ber", "wall_time")

BER_FLOOR = 2.4e-5

# fixed series styling, one per processing mode (stable across renders)
_MODE_STYLE = {
    "Bypass": {"color": "black", "marker": "s"},
    "NoMask": {"color": "tab:green", "marker": "D"},
    "ELM": {"color": "tab:blue", "marker": "^"},
    "RC": {"color": "tab:red", "marker": "o"},
    "Direct": {"color": "dimgray", "marker": "x"},
}


@dataclass(slots=True)
class PlotSpec:
    csv_path: str
    kind: str
    out_path: str
    x: str | None = None
    y: str = "ber"
    series: str = "mode"
    log_y: bool = True
    title: str | None = None
    ber_floor: float = BER_FLOOR

    def __post_init__(self) -> None:
        if self.kind not in PLOT_KINDS:
            raise ValueError(f"unknown plot kind {self.kind!r}; one of {PLOT_KINDS}")


def read_csv(path) -> tuple[list[str], list[dict]]:
    """Read a harness CSV (comment lines stripped), numbers parsed."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no data")
    reader = csv.DictReader(lines)
    rows = []
    for raw in reader:
        row = {}
        for key, value in raw.items():
            try:
                row[key] = float(value)
            except (TypeError, ValueError):
                row[key] = value
        rows.append(row)
    if not rows:
        raise ValueError(f"{path}: header only, no rows")
    return list(reader.fieldnames), rows


def _axis_columns(header: list[str]) -> list[str]:
    return [c for c in header if c not in _RESULT_COLUMNS]


def _require_columns(header: list[str], needed: list[str], path) -> None:
    missing = [c for c in needed if c not in header]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")


def _censor(values: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    values = np.asarray(values, dtype=float)
    censored = values <= floor
    return np.maximum(values, floor), censored


def heatmap_minimum(rows: list[dict], x: str, y: str,
                    value: str = "ber") -> dict:
    """The row with minimum value; ties resolve to the first CSV row."""
    best = None
    for row in rows:
        if best is None or row[value] < best[value]:
            best = row
    if best is None:
        raise ValueError("no rows")
    return best


# ---------------------------------------------------------------------------
# kind handlers; each returns (figure, meta)


def _series_plot(ax, rows, x_col, series_col, y_col, floor):
    series_names = []
    for name in dict.fromkeys(row[series_col] for row in rows):
        sel = [r for r in rows if r[series_col] == name]
        xs = sorted(set(r[x_col] for r in sel))
        med = np.array([np.median([r[y_col] for r in sel if r[x_col] == xv])
                        for xv in xs])
        clipped, censored = _censor(med, floor)
        style = _MODE_STYLE.get(name, {})
        line, = ax.plot(xs, clipped, label=str(name), **style)
        if censored.any():
            ax.plot(np.asarray(xs)[censored], clipped[censored], linestyle="",
                    marker=r"$\downarrow$", markersize=11, color=line.get_color())
        series_names.append(name)
    return series_names


def _build_benchmark(spec: PlotSpec):
    header, rows = read_csv(spec.csv_path)
    _require_columns(header, ["window.past_bits", "window.future_bits",
                              "mode", "ber"], spec.csv_path)
    for row in rows:
        row["window_bits"] = row["window.past_bits"] + row["window.future_bits"] + 1
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    names = _series_plot(ax, rows, "window_bits", "mode", spec.y, spec.ber_floor)
    ax.set_xlabel("bits considered for training")
    ax.set_ylabel("BER")
    if spec.log_y:
        ax.set_yscale("log")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return fig, {"series": names}


def _build_xy(spec: PlotSpec, default_x: str, xlabel: str):
    header, rows = read_csv(spec.csv_path)
    x_col = spec.x or default_x
    _require_columns(header, [x_col, spec.series, spec.y], spec.csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    names = _series_plot(ax, rows, x_col, spec.series, spec.y, spec.ber_floor)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("BER")
    if spec.log_y:
        ax.set_yscale("log")
    ax.axhline(1e-3, color="gray", linewidth=0.8, linestyle="--")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return fig, {"series": names, "x": x_col}


def _build_heatmap(spec: PlotSpec):
    header, rows = read_csv(spec.csv_path)
    axes = _axis_columns(header)
    if spec.x:
        x_col = spec.x
        others = [c for c in axes if c != x_col]
        y_col = others[0] if others else None
    else:
        if len(axes) < 2:
            raise ValueError(
                f"{spec.csv_path}: heatmap needs two swept axes, found {axes}")
        x_col, y_col = axes[0], axes[1]
    if y_col is None:
        raise ValueError(f"{spec.csv_path}: heatmap needs a second axis")
    _require_columns(header, [x_col, y_col, spec.y], spec.csv_path)
    xs = sorted(set(row[x_col] for row in rows))
    ys = sorted(set(row[y_col] for row in rows))
    grid = np.full((len(ys), len(xs)), np.nan)
    for i, yv in enumerate(ys):
        for j, xv in enumerate(xs):
            vals = [r[spec.y] for r in rows if r[x_col] == xv and r[y_col] == yv]
            if vals:
                grid[i, j] = min(vals)
    best = heatmap_minimum(rows, x_col, y_col, spec.y)
    clipped = np.maximum(grid, spec.ber_floor)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    mesh = ax.pcolormesh(
        np.arange(len(xs) + 1) - 0.5, np.arange(len(ys) + 1) - 0.5, clipped,
        norm=matplotlib.colors.LogNorm(vmin=np.nanmin(clipped),
                                       vmax=np.nanmax(clipped)),
        cmap="viridis")
    ax.set_xticks(range(len(xs)), [f"{v:g}" for v in xs])
    ax.set_yticks(range(len(ys)), [f"{v:g}" for v in ys])
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    fig.colorbar(mesh, ax=ax, label=spec.y)
    bi, bj = ys.index(best[y_col]), xs.index(best[x_col])
    annotation = f"min {best[spec.y]:.2e}"
    ax.annotate(annotation, xy=(bj, bi), xytext=(bj, bi),
                ha="center", va="center", color="white", fontsize=8,
                fontweight="bold")
    ax.plot([bj], [bi], marker="*", color="white", markersize=14,
            markeredgecolor="black", linestyle="")
    meta = {"x": x_col, "y": y_col, "min_row": best,
            "min_cell": (best[x_col], best[y_col]),
            "annotation": annotation,
            "grid_shape": (len(ys), len(xs)),
            "cells": int(np.sum(~np.isnan(grid)))}
    return fig, meta


def _build_eye(spec: PlotSpec):
    header, rows = read_csv(spec.csv_path)
    _require_columns(header, ["segment", "phase", "value"], spec.csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    segments = {}
    for row in rows:
        segments.setdefault(int(row["segment"]), []).append(
            (row["phase"], row["value"]))
    for pts in segments.values():
        pts.sort()
        ax.plot([p for p, _ in pts], [v for _, v in pts], color="tab:blue",
                alpha=0.08, linewidth=0.7)
    ax.set_xlabel("bit periods")
    ax.set_ylabel("normalized level")
    return fig, {"segments": len(segments)}


def _build_histogram(spec: PlotSpec):
    header, rows = read_csv(spec.csv_path)
    _require_columns(header, ["bin_left", "bin_right", "count"], spec.csv_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.2))
    lefts = [row["bin_left"] for row in rows]
    widths = [row["bin_right"] - row["bin_left"] for row in rows]
    ax.bar(lefts, [row["count"] for row in rows], width=widths, align="edge",
           color="tab:blue", edgecolor="none")
    ax.set_xlabel("sampled level")
    ax.set_ylabel("count")
    return fig, {"bins": len(rows)}


_BUILDERS = {
    "heatmap": _build_heatmap,
    "benchmark": _build_benchmark,
    "eye": _build_eye,
    "histogram": _build_histogram,
}


def build_figure(spec: PlotSpec):
    """Build the matplotlib figure; returns (figure, metadata dict)."""
    plt.rcParams.update({"svg.hashsalt": "fiberrc"})
    if spec.kind in _BUILDERS:
        fig, meta = _BUILDERS[spec.kind](spec)
    elif spec.kind == "distance":
        fig, meta = _build_xy(spec, "link.total_ssmf_km", "SSMF length (km)")
    elif spec.kind == "power":
        fig, meta = _build_xy(spec, "link.received_power_attenuation_db",
                              "received-power attenuation (dB)")
    elif spec.kind == "osnr":
        fig, meta = _build_xy(spec, "link.added_osnr_db", "OSNR (dB)")
    else:  # pragma: no cover - guarded by PlotSpec validation
        raise ValueError(spec.kind)
    if spec.title:
        fig.axes[0].set_title(spec.title)
    fig.tight_layout()
    return fig, meta


def render(spec: PlotSpec) -> dict:
    """Render to ``spec.out_path``; deterministic for identical inputs."""
    fig, meta = build_figure(spec)
    # strip volatile metadata so identical inputs give identical bytes
    if str(spec.out_path).endswith(".svg"):
        fig.savefig(spec.out_path, metadata={"Date": None})
    else:
        fig.savefig(spec.out_path, metadata={"Software": None})
    plt.close(fig)
    return meta
