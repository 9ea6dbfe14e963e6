"""Self-convergence of the forward solver in space (fixed dt) and in time (fixed grid).

Fine solutions are restricted to the coarse grid by averaging cell pairs.
Observed orders are printed and written to ``convergence.csv``.
"""
import argparse
from pathlib import Path

import numpy as np

from nlramsey.config import build, load_shipped
from nlramsey.forward import solve_forward
from nlramsey.io import write_table


def terminal(cfg):
    setup = build(cfg)
    sc = setup.scenario
    c = np.broadcast_to(0.5 * setup.admissible.c_max.values, (sc.time.steps,) + sc.grid.shape)
    return solve_forward(sc, c).terminal.values, sc.grid.h


def restrict(k, times):
    for _ in range(times):
        k = 0.5 * (k[0::2] + k[1::2])
    return k


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scenario", default="default")
    ap.add_argument("--out", default="runs/convergence")
    args = ap.parse_args()
    base = load_shipped(args.scenario)
    if base["grid.dim"] != 1:
        raise SystemExit("the study restricts along one axis; use a 1D scenario")

    levels = [64, 128, 256, 512]
    finals = [terminal(base.with_overrides(grid__points=n)) for n in levels]
    coarse_h = finals[0][1]
    on_coarse = [restrict(k, i) for i, (k, _) in enumerate(finals)]
    space = [np.sqrt(coarse_h * np.sum((a - b) ** 2)) for a, b in zip(on_coarse, on_coarse[1:])]

    steps = [40, 80, 160, 320]
    ts = [terminal(base.with_overrides(time__steps=s))[0] for s in steps]
    h = finals[0][1]
    time_diff = [np.sqrt(h * np.sum((a - b) ** 2)) for a, b in zip(ts, ts[1:])]

    for label, diffs in (("space", space), ("time", time_diff)):
        orders = np.log2(np.array(diffs[:-1]) / np.array(diffs[1:]))
        print(f"{label}: successive differences {', '.join(f'{d:.2e}' for d in diffs)}; "
              f"observed orders {', '.join(f'{o:.2f}' for o in orders)}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    write_table(Path(args.out) / "convergence.csv", ["level", "space_diff", "time_diff"],
                [list(range(len(space))), space, time_diff])


if __name__ == "__main__":
    main()
