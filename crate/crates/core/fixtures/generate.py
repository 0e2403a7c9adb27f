#!/usr/bin/env python3
"""Regenerate the synthetic problem fixtures (S1, S2, S3).

Run from this directory:  python3 generate.py [--check]

Each file is a whitespace-separated decimal table whose first line is
`rows cols`, followed by the values in row-major order. The forward model
shared by all three problems is

    F_j(x) = sum_i A[j, i] * sin(pi * xn_i / 2) + b[j]

with xn the min-max normalised state. The target observation is F(x*),
so x* reconstructs the target exactly. `--check` prints the Monte Carlo
feasible fraction of uniform states at epsilon = 0.075 for S1.
"""
import sys
import numpy as np

SEED = 20231107


def write_table(path, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    with open(path, "w") as fh:
        fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
        for row in arr:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def forward(a, b, xn):
    return np.sin(np.pi * xn / 2.0) @ a.T + b


def postprocess(raw):
    out = np.empty_like(raw)
    out[..., 0] = raw[..., 0]
    csum = np.cumsum(raw, axis=-1)
    sig = 1.0 / (1.0 + np.exp(-csum[..., 1:]))
    out[..., 1:] = raw[..., :1] + sig * (1.0 - raw[..., :1])
    return out


def make_forward(rng, dim, target, scale, xstar_n):
    a = rng.uniform(0.2, 1.0, size=(2, dim)) * rng.choice([-1.0, 1.0], size=(2, dim))
    a *= scale * np.abs(np.asarray(target))[:, None]
    b = np.asarray(target) - np.sin(np.pi * xstar_n / 2.0) @ a.T
    return a, b


def s1(rng):
    lo = np.array([5, 1.3, 1.2, 8, 1300, 0.85, 0.82, 0.84, 0.95, 0.86, 0.87])
    hi = np.array([6, 2.5, 2.0, 15, 1800, 0.95, 0.92, 0.94, 0.995, 0.96, 0.97])
    xstar_n = np.clip(rng.normal(0.5, 0.08, size=11), 0.1, 0.9)
    a, b = make_forward(rng, 11, [121.0, 10.63], 0.4, xstar_n)
    return {"bounds": np.vstack([lo, hi]), "A": a, "b": b[:, None],
            "xstar": (lo + xstar_n * (hi - lo))[None, :]}


def s2(rng):
    lo = rng.uniform(0.5, 5.0, size=20)
    hi = lo * rng.uniform(1.5, 4.0, size=20)
    xstar_n = np.clip(rng.normal(0.5, 0.1, size=20), 0.1, 0.9)
    a, b = make_forward(rng, 20, [48.0, 2.5], 0.09, xstar_n)
    c = rng.uniform(0.0, 1.0, size=(7, 20))
    margin = rng.uniform(0.2, 0.8, size=7)
    d = (c * xstar_n[None, :] ** 2).sum(axis=1) + margin
    return {"bounds": np.vstack([lo, hi]), "A": a, "b": b[:, None],
            "C": c, "d": d[:, None], "xstar": (lo + xstar_n * (hi - lo))[None, :]}


def s3(rng):
    lo = np.zeros(30)
    hi = np.full(30, np.pi / 2.0)
    raw = rng.uniform(0.02, 0.3, size=30)
    xstar_n = postprocess(raw)
    a, b = make_forward(rng, 30, [0.8, 0.35], 0.05, xstar_n)
    return {"bounds": np.vstack([lo, hi]), "A": a, "b": b[:, None],
            "xstar": (lo + xstar_n * (hi - lo))[None, :]}


def s1_accumulated(fx, xn):
    y = forward(fx["A"], fx["b"][:, 0], (fx["xstar"][0] - fx["bounds"][0]) /
                (fx["bounds"][1] - fx["bounds"][0]))
    f = forward(fx["A"], fx["b"][:, 0], xn)
    rec = (np.abs(f - y) / (2 * np.abs(y))).sum(axis=-1)
    bal = xn.std(axis=-1)
    return rec + 0.1 * bal


def main():
    rng = np.random.default_rng(SEED)
    problems = {"S1": s1(rng), "S2": s2(rng), "S3": s3(rng)}
    if "--check" in sys.argv:
        xn = np.random.default_rng(1).uniform(size=(100_000, 11))
        acc = s1_accumulated(problems["S1"], xn)
        for eps in (0.05, 0.075, 0.1):
            print(f"S1 eps={eps}: feasible fraction {np.mean(acc <= eps):.4f}")
        return
    for name, tables in problems.items():
        for key, arr in tables.items():
            write_table(f"{name}.{key}", arr)


if __name__ == "__main__":
    main()
