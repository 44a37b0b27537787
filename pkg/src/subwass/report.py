"""Run artifacts: CSV tables, JSON records and static SVG plots."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, Optional, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "subwass"


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def write_json(path: Path, record: dict) -> None:
    Path(path).write_text(json.dumps(_jsonable(record), indent=2, sort_keys=True) + "\n")


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def loglog_plot(path: Path, x, y, yerr=None, fit: Optional[tuple[float, float]] = None,
                xlabel: str = "t", ylabel: str = "E W2^2", title: str = "") -> None:
    """Points with error bars on log-log axes; ``fit`` is (slope, intercept) of log y on log x."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.errorbar(x, y, yerr=yerr, fmt="o", ms=4, capsize=3, label="data")
    if fit is not None:
        slope, icpt = fit
        xx = np.geomspace(x.min(), x.max(), 100)
        ax.plot(xx, np.exp(icpt) * xx**slope, "-", label=f"fit slope {slope:.4f}")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def line_plot(path: Path, x, y, xlabel: str, ylabel: str, title: str = "",
              logx: bool = False, fit: Optional[tuple[float, float]] = None, y2=None, labels=("data", "")) -> None:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    ax.plot(x, y, "o-" if y2 is None else "-", ms=4, label=labels[0])
    if y2 is not None:
        ax.plot(x, y2, "--", label=labels[1])
    if fit is not None:
        slope, icpt = fit
        xv = np.asarray(x, float)
        ax.plot(xv, icpt + slope * xv, "-", label=f"fit slope {slope:.4f}")
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.legend()
    _save(fig, path)
