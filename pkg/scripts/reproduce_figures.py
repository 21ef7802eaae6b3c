"""Phase and concurrence traces for the static and pi-gate scenarios.

    python3 scripts/reproduce_figures.py [--out DIR]

Writes the four CSV series and prints a short summary of each.  With
matplotlib installed (not a package dependency) it also saves a PNG.
"""
import argparse
from pathlib import Path

import numpy as np

from buckygate.cli import FIGURES, main as cli_main, read_trajectory_csv


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", type=Path, default=Path("figures"))
    args = parser.parse_args()

    cli_main(["figures", "--out", str(args.out)])
    series = {}
    for name, (_, column) in FIGURES.items():
        cols = read_trajectory_csv(args.out / name)
        series[name] = (cols["t_ns"], cols[column])
        y = cols[column]
        print(f"{name:24s} n = {len(y):6d}  min {y.min():+.4f}  max {y.max():+.4f}  mean {y.mean():+.4f}")

    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return
    fig, axes = plt.subplots(2, 2, figsize=(9, 6))
    for ax, (name, (t, y)) in zip(axes.ravel(), series.items()):
        ax.plot(t, y, lw=0.8)
        ax.set_title(name.removesuffix(".csv"))
        ax.set_xlabel("t (ns)")
    axes[1, 0].axhline(-np.pi, color="grey", lw=0.5, ls="--")
    fig.tight_layout()
    fig.savefig(args.out / "figures.png", dpi=120)


if __name__ == "__main__":
    main()
