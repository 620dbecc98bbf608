"""Self-contained SVG line charts with byte-stable output."""

from __future__ import annotations

import io

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {"svg.hashsalt": "robust-indi", "svg.fonttype": "path", "path.simplify": False}


def line_chart(x, series: dict, xlabel: str, ylabel: str, title: str = "",
               logx: bool = False, bands: dict | None = None) -> str:
    """SVG text for ``series`` (label -> y) against ``x``.

    ``bands`` maps a label to ``(lower, upper)`` drawn as a shaded region.
    """
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7, 4))
        for i, (label, (lo, hi)) in enumerate((bands or {}).items()):
            ax.fill_between(x, lo, hi, alpha=0.25, color=f"C{i}", label=label, lw=0)
        for i, (label, y) in enumerate(series.items()):
            ax.plot(x, y, color=f"C{i}", lw=1.2, label=label)
        if logx:
            ax.set_xscale("log")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.grid(True, which="both", lw=0.3)
        if series or bands:
            ax.legend(fontsize="small", loc="best")
        fig.tight_layout()
        buf = io.StringIO()
        fig.savefig(buf, format="svg", metadata={"Date": None})
        plt.close(fig)
    return buf.getvalue()


def magnitude_db(values: np.ndarray) -> np.ndarray:
    return 20.0 * np.log10(np.maximum(np.abs(values), 1e-300))
