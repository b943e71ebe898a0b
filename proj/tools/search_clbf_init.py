#!/usr/bin/env python3
"""Grid search for a start behind the (-1,-1) obstacle where the CLBF run
violates safety in [3, 6] s and the FCCBF run stays safe.

usage: search_clbf_init.py path/to/fccbf [--step 0.25]
"""
import argparse
import json
import os
import subprocess
import tempfile

BASE = {
    "schema_version": 1,
    "name": "clbf_compare_1obs",
    "system": "single-integrator-2d",
    "goal": {"center": [0.0, 0.0], "radius": 1.0},
    "obstacles": [{"center": [-1.0, -1.0], "radius": 1.0}],
    "safety_slopes": [2.0],
    "bounds": {"u_min": [-2.0, -2.0], "u_max": [2.0, 2.0]},
    "controller": [
        {"type": "clbf", "p": "auto", "q_exp": 1.0 / 3.0},
        {"type": "fccbf", "r": "auto", "k": "auto"},
    ],
    "t_f": 6.0,
    "horizon": 6.0,
    "sim": {"dt": 0.01},
    "design": {"monotone_worst_case": True},
}


def frange(a, b, step):
    n = int(round((b - a) / step))
    return [a + i * step for i in range(n + 1)]


def evaluate(cli, x0, tmp):
    sc = dict(BASE, init={"fixed": x0})
    path = os.path.join(tmp, "sc.json")
    with open(path, "w") as f:
        json.dump(sc, f)
    out = os.path.join(tmp, "out")
    proc = subprocess.run([cli, "run", path, "--out", out], capture_output=True, text=True)
    if proc.returncode == 2:
        return None
    with open(os.path.join(out, "summary.json")) as f:
        runs = {r["controller"]: r for r in json.load(f)["runs"]}
    return runs


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("cli")
    ap.add_argument("--step", type=float, default=0.1)
    ap.add_argument("--lo", type=float, default=-4.0)
    ap.add_argument("--hi", type=float, default=-1.0)
    args = ap.parse_args()
    best = None
    with tempfile.TemporaryDirectory() as tmp:
        for x in frange(args.lo, args.hi, args.step):
            for y in frange(args.lo, args.hi, args.step):
                x0 = [round(x, 6), round(y, 6)]
                runs = evaluate(args.cli, x0, tmp)
                if runs is None:
                    continue
                c, f = runs["clbf"], runs["fccbf"]
                fccbf_ok = f["safety_violated_time"] is None and f["verdict"] == "pass"
                tv = c["safety_violated_time"]
                if fccbf_ok and tv is not None and 3.0 <= tv <= 6.0 and c["control_bound_max_violation"] <= 1e-9:
                    print(f"MATCH {x0} clbf violation at t = {tv}")
                    return 0
                if fccbf_ok and (best is None or c["min_b"] < best[1]):
                    best = (x0, c["min_b"])
    if best:
        print(f"no match; closest start {best[0]} with clbf min_b = {best[1]:.6g}")
    else:
        print("no match")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
