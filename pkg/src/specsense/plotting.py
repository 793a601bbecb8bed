"""Detection and identification probability curves as SVG."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .harness import SweepResult  # noqa: E402

PANELS = (("p_detect", "Probability of detection"), ("p_ident", "Probability of identification"))


def plot_sweep(result: SweepResult, out_path) -> None:
    schemes = list(dict.fromkeys(p.scheme for p in result.points))
    fig, axes = plt.subplots(1, 2, figsize=(11, 4.2))
    for ax, (metric, title) in zip(axes, PANELS):
        for scheme in schemes:
            xs, ys = zip(*result.curve(scheme, metric))
            ax.plot(xs, ys, marker="o", label=scheme)
        ax.set_xlabel("StNrR [dB]")
        ax.set_ylabel(title)
        ax.set_ylim(-0.02, 1.02)
        ax.grid(True, alpha=0.4)
        ax.legend()
    fig.tight_layout()
    # fixed metadata keeps the output stable across runs
    fig.savefig(out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
