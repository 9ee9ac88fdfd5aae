#!/usr/bin/env python3
"""Regenerates the bundled 8-bus example (feeder, DER capabilities, scenarios)."""
import csv
import json
import pathlib

import numpy as np

out = pathlib.Path(__file__).resolve().parent.parent / "data"
out.mkdir(exist_ok=True)

# substation "0"; main trunk 1-2-3-4-5, laterals 2-6-7 and 4-8
lines = [
    ("0", "1", 0.0030, 0.0050),
    ("1", "2", 0.0038, 0.0055),
    ("2", "3", 0.0045, 0.0062),
    ("3", "4", 0.0035, 0.0050),
    ("4", "5", 0.0050, 0.0070),
    ("2", "6", 0.0055, 0.0060),
    ("6", "7", 0.0062, 0.0075),
    ("4", "8", 0.0048, 0.0065),
]
feeder = {"root": "0", "v0": 1.0,
          "lines": [{"from": a, "to": b, "r": r, "x": x} for a, b, r, x in lines]}
(out / "feeder8.json").write_text(json.dumps(feeder, indent=2) + "\n")

n = 8
parent = {b: a for a, b, _, _ in lines}
imp = {b: (r, x) for a, b, r, x in lines}
def path(k):
    p = []
    while k != "0":
        p.append(k)
        k = parent[k]
    return set(p)
names = [str(i) for i in range(1, n + 1)]
R = np.zeros((n, n)); X = np.zeros((n, n))
for i, a in enumerate(names):
    for j, b in enumerate(names):
        common = path(a) & path(b)
        R[i, j] = 2 * sum(imp[k][0] for k in common)
        X[i, j] = 2 * sum(imp[k][1] for k in common)

ders = [False, False, True, False, True, False, True, True]
qhat = [0.15 if d else 0.0 for d in ders]
rules = {"parameterization": "vref,delta,sigma,qbar",
         "vref": [1.0] * n, "delta": [0.02] * n, "sigma": [0.08] * n,
         "qbar": qhat, "qhat": qhat, "der_mask": ders}
(out / "ders8.json").write_text(json.dumps(rules, indent=2) + "\n")

# Midday solar surplus: generation above load everywhere, light reactive load.
rng = np.random.default_rng(20240607)
rows = []
for s in range(20):
    level = 0.6 + 0.4 * s / 19
    p_g = np.where(ders, level * rng.uniform(0.56, 0.88, n), level * rng.uniform(0.20, 0.32, n))
    p_l = rng.uniform(0.08, 0.24, n)
    q_l = rng.uniform(0.0, 0.08, n)
    vt = R @ (p_g - p_l) - X @ q_l + 1.0
    rows.append((p_g, p_l, q_l, vt))
with open(out / "scenarios8.csv", "w", newline="") as f:
    w = csv.writer(f)
    w.writerow([f"p_g_{i}" for i in range(1, n + 1)] + [f"p_l_{i}" for i in range(1, n + 1)]
               + [f"q_l_{i}" for i in range(1, n + 1)])
    for p_g, p_l, q_l, _ in rows:
        w.writerow([f"{v:.6f}" for v in np.concatenate([p_g, p_l, q_l])])
vts = np.array([r[3] for r in rows])
print("vtilde range", vts.min(), vts.max(), "||X||", np.linalg.norm(X, 2))
print("row sums", X.sum(1))
