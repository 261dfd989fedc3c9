"""Static SVG plots built from the CSV outputs only, never from a rerun."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .records import read_csv  # noqa: E402

# experiment -> list of (csv stem, x column, y columns, group column, log x, log y)
PLOTS = {
    "variance": [("variance", "t", ("variance", "discrete_oracle"), "domain", True, True)],
    "smoothing": [("smoothing", "t", ("mean", "closed_form"), None, True, True)],
    "besov": [("blocks", "j", ("weighted",), ("case", "p"), False, True),
              ("smoothing", "eps", ("sup_norm", "closed_form"), None, True, True)],
    "stability": [("ladder", "n", ("median_D", "q90_D"), "base", True, True)],
    "comparison": [("violations", "pair", ("max_excess",), None, False, False)],
    "scaling": [("besov", "lambda", ("distance",), "case", True, True),
                ("field", "lambda", ("median_sup_distance", "floor"), "case", True, True)],
    "vclass": [("increments", "gap", ("norm",), ("channel", "s"), True, True)],
    "sewing": [("levels", "level", ("occupation_diff", "riemann_diff"), None, False, True)],
    "regularization": [("occupation", "scale", ("value",), None, True, True),
                       ("offsets", "scale", ("value",), None, True, True)],
}


def _num(v: str):
    try:
        return float(v)
    except ValueError:
        return v


def _groups(rows, key):
    if key is None:
        return {"": rows}
    keys = (key,) if isinstance(key, str) else key
    out = {}
    for r in rows:
        out.setdefault(", ".join(f"{k}={r[k]}" for k in keys), []).append(r)
    return out


def plot_table(rows, x, ys, group, logx, logy, title, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 4.0))
    categorical = rows and isinstance(_num(rows[0][x]), str)
    for label, rs in _groups(rows, group).items():
        xs = [r[x] if categorical else _num(r[x]) for r in rs]
        for y in ys:
            vals = [_num(r[y]) for r in rs]
            keep = [(a, b) for a, b in zip(xs, vals) if isinstance(b, float) and math.isfinite(b)
                    and (not logy or b > 0)]
            if not keep:
                continue
            name = " ".join(s for s in (label, y) if s)
            ax.plot(*zip(*keep), marker="o", ms=3, lw=1, label=name)
    if logx and not categorical:
        ax.set_xscale("log", base=2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(x)
    ax.set_title(title, fontsize=9)
    if ax.get_legend_handles_labels()[0]:
        ax.legend(fontsize=6)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_result_dir(d: Path) -> list:
    """Write one SVG per plot spec of the experiment stored in ``d``."""
    d = Path(d)
    experiment = d.parent.name
    out = []
    for stem, x, ys, group, logx, logy in PLOTS.get(experiment, []):
        csv_path = d / f"{stem}.csv"
        if not csv_path.exists():
            continue
        rows = read_csv(csv_path)
        if not rows:
            continue
        out.append(plot_table(rows, x, ys, group, logx, logy, f"{experiment}: {stem}", d / f"{stem}.svg"))
    return out


def plot_outdir(outdir) -> list:
    plt.rcParams["svg.hashsalt"] = "shelab"
    paths = []
    for summary in sorted(Path(outdir).glob("*/*/summary.json")):
        paths += plot_result_dir(summary.parent)
    return paths
