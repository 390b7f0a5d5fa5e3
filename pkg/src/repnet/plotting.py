"""PNG figures for attack sweeps, rendered off-screen next to the CSV output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiment import EvalRow  # noqa: E402

_STYLE = {
    "figure.figsize": (5.5, 3.8),
    "figure.dpi": 100,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "legend.fontsize": 8,
    "font.size": 9,
}
# fixed so the same rows always give the same file
_METADATA = {"Software": None}


def _series(rows: Sequence[EvalRow], attr: str) -> dict[str, tuple[list[float], list[float]]]:
    out: dict[str, tuple[list[float], list[float]]] = {}
    for row in rows:
        v = getattr(row, attr)
        if v is None:
            continue
        xs, ys = out.setdefault(row.method, ([], []))
        xs.append(row.fraction)
        ys.append(v)
    return out


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, format="png", metadata=_METADATA)
    plt.close(fig)
    return path


def plot_robustness(rows: Sequence[EvalRow], path: Path, title: str = "") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        for method, (xs, ys) in _series(rows, "robustness").items():
            ax.plot(xs, ys, marker="o", label=method)
        ax.set_xlabel("fraction of attackers")
        ax.set_ylabel("robustness (Kendall tau)")
        ax.set_ylim(-1.05, 1.05)
        if title:
            ax.set_title(title)
        ax.legend(loc="lower left")
        return _save(fig, path)


def plot_target(rows: Sequence[EvalRow], path: Path, title: str = "") -> Path:
    """Displayed target ranking per method; dashed lines give the largest-cluster value."""
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        largest = _series(rows, "largest_attacked")
        for method, (xs, ys) in _series(rows, "target_attacked").items():
            (line,) = ax.plot(xs, ys, marker="o", label=method)
            if method in largest:
                lx, ly = largest[method]
                ax.plot(lx, ly, ls="--", color=line.get_color(), label=f"{method} largest cluster")
        ax.set_xlabel("fraction of attackers")
        ax.set_ylabel("target ranking")
        ax.set_ylim(0, 1.05)
        if title:
            ax.set_title(title)
        ax.legend(loc="best")
        return _save(fig, path)


def render_sweep(rows: Sequence[EvalRow], out_dir: Path, title: str = "") -> list[Path]:
    out_dir = Path(out_dir)
    return [
        plot_robustness(rows, out_dir / "robustness.png", title),
        plot_target(rows, out_dir / "target.png", title),
    ]
