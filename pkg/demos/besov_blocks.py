"""Littlewood-Paley blocks of delta_0, p.v. 1/x and a one-sided power law.

At the critical index the weighted block norms 2^{j gamma} ||Delta_j f||_p
level off; one quarter above it they grow like 2^{j/4}.

    python demos/besov_blocks.py [outdir]
"""
import math
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from artifact.besov import SpectralFunction, besov_norm, growth, plateau
from artifact.drifts import BesovIndex

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output")
out.mkdir(parents=True, exist_ok=True)

cases = {
    "delta": (SpectralFunction.dirac(), -1.0),
    "p.v. 1/x": (SpectralFunction.principal_value(), -1.0),
    "x_+^(-1/2)": (SpectralFunction.power_law(-0.5, 1.0, 1), -0.5),
}

fig, axes = plt.subplots(1, 2, figsize=(9, 3.6), sharey=True)
for ax, p in zip(axes, (2.0, math.inf)):
    for label, (f, a) in cases.items():
        idx = BesovIndex(a + 1 / p, p)
        at = besov_norm(f, idx)
        up = besov_norm(f, idx.shifted(0.25))
        js = [r["j"] for r in at.rows() if r["complete"]]
        ax.plot(js, [r["weighted"] for r in at.rows() if r["complete"]], "o-", ms=3, label=f"{label}, critical")
        ax.plot(js, [r["weighted"] for r in up.rows() if r["complete"]], "x:", ms=3, label=f"{label}, +1/4")
        print(f"p={p:<4} {label:<11} plateau ratio {plateau(at)['ratio']:.4f}  growth rate {growth(up)['rate']:.3f}")
    ax.set_yscale("log")
    ax.set_xlabel("j")
    ax.set_title(f"p = {p}")
axes[0].set_ylabel("2^(j gamma) ||Delta_j f||_p")
axes[1].legend(fontsize=6)
fig.tight_layout()
fig.savefig(out / "besov_blocks.svg")
