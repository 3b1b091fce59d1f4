"""Deterministic rendering of audit curves to PNG files.

The Agg backend plus a pinned metadata block keeps the bytes stable across
repeated runs and thread counts, which the CLI's reproducibility contract
requires.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import UsageError

_METADATA = {"Software": "meshgauge"}
_FLOOR = 1e-18  # display floor so exact zeros survive log axes


def _finish(fig, path: str) -> None:
    fig.tight_layout()
    fig.savefig(path, metadata=_METADATA)
    plt.close(fig)


def _new_axes(title: str):
    fig, ax = plt.subplots(figsize=(6.4, 4.0), dpi=120)
    ax.set_title(title)
    return fig, ax


def render_audit_figure(payload: dict, tolerance: float, path: str) -> None:
    """Render the curve belonging to one audit payload to a PNG file."""
    kind = payload.get("audit")
    if kind == "gauge":
        devs = np.maximum(payload["per_gauge_max_deviation"], _FLOOR)
        fig, ax = _new_axes("Output deviation across gauge draws")
        ax.bar(range(len(devs)), devs, color="#3465a4")
        ax.set_yscale("log")
        ax.set_xlabel("gauge draw (0 = reference)")
        ax.set_ylabel("max |output - reference output|")
        ax.axhline(tolerance, color="#cc0000", linestyle="--", label="tolerance")
        ax.legend(loc="upper right")
    elif kind == "ambient":
        devs = np.maximum(payload["per_transform_max_deviation"], _FLOOR)
        fig, ax = _new_axes("Output deviation across rigid motions")
        ax.plot(range(len(devs)), devs, color="#3465a4", linewidth=1.0)
        ax.set_yscale("log")
        ax.set_xlabel("rigid motion index")
        ax.set_ylabel("max |output - unmoved output|")
        ax.axhline(tolerance, color="#cc0000", linestyle="--", label="tolerance")
        ax.legend(loc="upper right")
    elif kind == "isometry":
        ratios = np.maximum(payload["per_isometry_ratio"], _FLOOR)
        fig, ax = _new_axes("Equivariance error per mesh symmetry")
        ax.bar(range(len(ratios)), ratios, color="#3465a4")
        ax.set_yscale("log")
        ax.set_xlabel("symmetry index")
        ax.set_ylabel("normalized error ratio")
        ax.axhline(tolerance, color="#cc0000", linestyle="--", label="tolerance")
        ax.legend(loc="upper right")
    elif kind == "nonlinearity":
        counts = [row["n_samples"] for row in payload["per_n"]]
        measured = np.maximum([row["median_measured"] for row in payload["per_n"]], _FLOOR)
        bounds = np.maximum([row["median_bound"] for row in payload["per_n"]], _FLOOR)
        full_band = np.maximum(payload["scaling"]["medians"], _FLOOR)
        fig, ax = _new_axes("Sampled nonlinearity: measured error vs bound")
        ax.loglog(counts, measured, "o-", color="#3465a4", label="median measured (fixed band)")
        ax.loglog(counts, bounds, "s--", color="#cc0000", label="median bound")
        ax.loglog(
            payload["scaling"]["sample_counts"],
            full_band,
            "^-",
            color="#4e9a06",
            label=f"median measured (full band), slope {payload['scaling']['loglog_slope']:.2f}",
        )
        ax.set_xlabel("sample count N")
        ax.set_ylabel("L1 commutator error")
        ax.legend(loc="lower left")
    else:
        raise UsageError(f"no figure defined for audit kind {kind!r}")
    _finish(fig, path)
