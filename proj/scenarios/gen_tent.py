#!/usr/bin/env python3
"""Regenerates the 41-cell tent grid bundle (chain, features).

A lazy reflecting random walk over 41 equal cells of [0, 1], paired with a
single tent-shaped feature peaked at 1/sqrt(2). Files are written with 17
significant digits so the bundle is reproducible bit for bit.
"""

import json
import math

N = 41
PEAK = 1.0 / math.sqrt(2.0)


def fmt(x):
    return float(f"{x:.17g}")


def main():
    # Lazy reflecting walk: stay 1/2, step 1/4 each way (reflected at the ends).
    transition = []
    for i in range(N):
        row = [0.0] * N
        row[i] = 0.5
        row[max(i - 1, 0)] += 0.25
        row[min(i + 1, N - 1)] += 0.25
        transition.append([fmt(p) for p in row])

    mdp = {
        "schema": "pbelab-mdp/1",
        "n_states": N,
        "gamma": 0.99,
        "lambda": 0.0,
        "transition": transition,
        "reward": [0.0] * N,
        "grid": {"cell_widths": [fmt(1.0 / N)] * N},
    }
    with open("tent_mdp.json", "w") as f:
        json.dump(mdp, f, indent=1)
        f.write("\n")

    # Tent over cell midpoints: rises to 1 at the peak, back to 0 at x = 1.
    tent = []
    for i in range(N):
        x = (i + 0.5) / N
        v = x / PEAK if x <= PEAK else (1.0 - x) / (1.0 - PEAK)
        tent.append(fmt(v))
    features = {
        "schema": "pbelab-features/1",
        "k": 1,
        "n_states": N,
        "table": [tent],
    }
    with open("tent_features.json", "w") as f:
        json.dump(features, f, indent=1)
        f.write("\n")

    # Constant test function, already normalized for the walk's uniform
    # stationary weights.
    psi = {
        "schema": "pbelab-features/1",
        "k": 1,
        "n_states": N,
        "table": [[1.0] * N],
    }
    with open("tent_psi.json", "w") as f:
        json.dump(psi, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
