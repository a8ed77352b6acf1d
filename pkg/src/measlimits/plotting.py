"""Two-column data files, a manifest and matplotlib figures for scenario series."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


@dataclass
class Series:
    """One curve: ``y`` against ``x``; series sharing a ``figure`` are drawn together."""

    name: str
    x: np.ndarray
    y: np.ndarray
    xlabel: str = "x"
    ylabel: str = "y"
    figure: str = ""
    style: str = "line"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.x.shape != self.y.shape or self.x.ndim != 1:
            raise ValueError(f"series {self.name!r}: x and y must be 1-D of equal length")
        self.figure = self.figure or self.name


def write_data(series: Series, path: Path) -> Path:
    header = f"{series.xlabel}\t{series.ylabel}"
    np.savetxt(path, np.column_stack([series.x, series.y]), fmt="%.12g", delimiter="\t",
               header=header, comments="# ")
    return path


def render(figure: str, members: list[Series], path: Path) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5.5, 3.6))
    for s in members:
        if s.style == "points":
            ax.plot(s.x, s.y, "o", ms=4, label=s.name)
        elif s.style == "step":
            ax.step(s.x, s.y, where="mid", label=s.name)
        else:
            ax.plot(s.x, s.y, label=s.name)
    ax.set_xlabel(members[0].xlabel)
    ax.set_ylabel(members[0].ylabel)
    ax.set_title(figure)
    if len(members) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes reproducible
    fig.savefig(path, dpi=110, metadata={"Software": None})
    plt.close(fig)
    return path


def emit_series(series: list[Series], out_dir: Path, figures: bool = True) -> dict:
    """Write ``data/<name>.dat`` per series, ``figures/<figure>.png`` and ``manifest.json``."""
    out_dir = Path(out_dir)
    data_dir = out_dir / "data"
    data_dir.mkdir(parents=True, exist_ok=True)
    manifest = {"series": [], "figures": []}
    groups: dict[str, list[Series]] = {}
    for s in series:
        p = write_data(s, data_dir / f"{s.name}.dat")
        manifest["series"].append({"name": s.name, "file": str(p.relative_to(out_dir)),
                                   "columns": [s.xlabel, s.ylabel], "figure": s.figure,
                                   "points": int(s.x.size), **s.meta})
        groups.setdefault(s.figure, []).append(s)
    if figures and groups:
        fig_dir = out_dir / "figures"
        fig_dir.mkdir(exist_ok=True)
        for name, members in groups.items():
            p = render(name, members, fig_dir / f"{name}.png")
            manifest["figures"].append({"name": name, "file": str(p.relative_to(out_dir)),
                                        "series": [m.name for m in members]})
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest
