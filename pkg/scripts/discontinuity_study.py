"""Jump retention of a step-shaped k0 as the diffusion budget moves from local to nonlocal.

For each split ``alpha = (1 - s) * budget``, ``beta = s * budget`` the retained
fraction ``max|k_{i+1} - k_i|(T/2) / max|k_{i+1} - k_i|(0)`` is written to
``discontinuity.csv``.
"""
import argparse
from pathlib import Path

import numpy as np

from nlramsey.config import build, load_shipped
from nlramsey.forward import solve_forward
from nlramsey.io import write_table


def retained(cfg) -> float:
    sc = build(cfg).scenario
    traj = solve_forward(sc)
    jump = [float(np.max(np.abs(np.diff(traj.states[n])))) for n in (0, sc.time.steps // 2)]
    return jump[1] / jump[0]


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--budget", type=float, default=1.0)
    ap.add_argument("--points", type=int, default=256)
    ap.add_argument("--out", default="runs/discontinuity")
    args = ap.parse_args()
    base = load_shipped("step")
    shares = np.linspace(0.0, 1.0, 11)
    rows = []
    for s in shares:
        alpha = max((1 - s) * args.budget, 1e-6)
        beta = s * args.budget
        mu = base["model.mu"] if beta > 0 else base["model.eps"]
        cfg = base.with_overrides(model__alpha=alpha, model__beta=beta, model__mu=mu,
                                  grid__points=args.points, time__steps=200)
        rows.append((s, alpha, beta, retained(cfg)))
        print(f"nonlocal share {s:.1f}: alpha={alpha:.2g} beta={beta:.2g} retained jump {rows[-1][3]:.3f}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_table(Path(args.out) / "discontinuity.csv", ["nonlocal_share", "alpha", "beta", "retained"],
                [list(c) for c in zip(*rows)])


if __name__ == "__main__":
    main()
