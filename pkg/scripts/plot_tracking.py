"""Plot tracking errors and rod shapes from an exported run.

    python scripts/plot_tracking.py out/reference [--save out/reference/tracking.png]

Needs matplotlib (``pip install artifact[plot]``).
"""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from softrod.export import BUNDLE, SNAPSHOT_DIR, read_timeseries


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("run_dir", type=Path)
    parser.add_argument("--save", type=Path)
    args = parser.parse_args()

    _, data = read_timeseries(args.run_dir / BUNDLE)
    fig, (ax_err, ax_shape) = plt.subplots(1, 2, figsize=(10, 4))
    ax_err.semilogy(data[:, 0], data[:, 1], "-", label=r"$\|\tilde p\|_{L^2}$")
    ax_err.semilogy(data[:, 0], data[:, 2], "--", label=r"$\|\tilde p_t\|_{L^2}$")
    ax_err.set_xlabel("t [s]")
    ax_err.legend()

    frames = sorted((args.run_dir / SNAPSHOT_DIR).glob("*.csv"))
    for i, path in enumerate(frames):
        _, snap = read_timeseries(path)
        ax_shape.plot(snap[:, 1], snap[:, 2], color=plt.cm.viridis(i / max(len(frames) - 1, 1)), lw=1)
    ax_shape.set_xlabel("y [m]")
    ax_shape.set_ylabel("z [m]")
    ax_shape.set_aspect("equal")
    fig.tight_layout()
    out = args.save or args.run_dir / "tracking.png"
    fig.savefig(out, dpi=150)
    print(f"saved {out}")


if __name__ == "__main__":
    main()
