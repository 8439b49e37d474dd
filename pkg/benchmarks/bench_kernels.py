"""Compare the compiled kernel backend against the plain NumPy fallback.

The package selects its backend from the MOBIPLAN_JIT environment variable
at import time; this script ignores that and loads both side by side, times
the hot paths, and checks that the two produce identical numbers.

Usage:
    python benchmarks/bench_kernels.py [--repeats N] [--states S]
"""

import argparse
import time

import numpy as np

from mobiplan import (AxisBox, CostContext, CostWeights, Scene, Sphere,
                      build_field, default_chain)
from mobiplan.kernels import load_backend
from mobiplan.scene import sample_query_points

BASE_BODY = AxisBox([-0.25, -0.20, 0.0], [0.25, 0.20, 0.25])


def build_inputs(states):
    chain = default_chain()
    scene = Scene((Sphere([0.9, 0.4, 0.4], 0.2),
                   Sphere([-0.6, -0.5, 0.3], 0.25)),
                  AxisBox([-2, -2, -0.1], [2, 2, 1.5]))
    ctx = CostContext(chain, build_field(scene, 0.05),
                      sample_query_points(chain, BASE_BODY, 64, 0),
                      CostWeights())
    rng = np.random.default_rng(11)
    bases = np.zeros((states, 3))
    bases[:, 0] = np.linspace(0.0, 0.4, states)
    tpos = np.column_stack([np.linspace(0.78, 1.0, states),
                            np.linspace(0.0, 0.3, states),
                            np.full(states, 0.32)])
    tquat = np.tile([1.0, 0.0, 0.0, 0.0], (states, 1))
    joints = rng.uniform(-1.0, 1.0, (2000, chain.n_joints))
    points = rng.uniform(-1.5, 1.5, (100_000, 3))
    return ctx, bases, tpos, tquat, joints, points


def run_backend(mod, ctx, bases, tpos, tquat, joints, points, repeats):
    """Returns {workload: (seconds, checksum)} for one backend module."""
    seg_args = ctx.segment_args()
    sol_args = ctx.solver_args()
    fk_args = seg_args[:5]
    values, origin, inv_res = seg_args[7], seg_args[8], seg_args[9]
    seed = np.zeros(joints.shape[1])
    out = {}

    t0 = time.perf_counter()
    acc = 0.0
    for q in joints:
        pos, _ = mod.fk_ee(*fk_args, q)
        acc += pos[0]
    out["fk_ee x2000"] = (time.perf_counter() - t0, acc)

    t0 = time.perf_counter()
    total, min_d = mod.collision_terms(values, origin, inv_res, points, 0.1)
    out["collision_terms 100k pts"] = (time.perf_counter() - t0,
                                       total + min_d)
    t0 = time.perf_counter()
    for _ in range(repeats):
        reach, smooth, collide, *_ = mod.eval_segment(
            *seg_args, bases, tpos, tquat, seed, *sol_args)
    out[f"eval_segment x{repeats}"] = (time.perf_counter() - t0,
                                       reach + smooth + collide)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeats", type=int, default=50,
                    help="eval_segment calls per backend")
    ap.add_argument("--states", type=int, default=12,
                    help="trajectory samples per eval_segment call")
    args = ap.parse_args()

    inputs = build_inputs(args.states)
    plain = load_backend(use_jit=False)
    jit = load_backend(use_jit=True)
    if not jit.JIT_ENABLED:
        print("numba unavailable: both backends are plain NumPy")

    t0 = time.perf_counter()
    run_backend(jit, *inputs, 1)
    print(f"jit compile + first call: {time.perf_counter() - t0:.1f}s\n")

    res_p = run_backend(plain, *inputs, args.repeats)
    res_j = run_backend(jit, *inputs, args.repeats)

    width = max(len(k) for k in res_p)
    print(f"{'workload':<{width}}  {'numpy':>9}  {'jit':>9}  speedup")
    for key in res_p:
        tp, cp = res_p[key]
        tj, cj = res_j[key]
        if abs(cp - cj) > 1e-9 * max(1.0, abs(cp)):
            raise SystemExit(f"backend mismatch on {key}: {cp} vs {cj}")
        print(f"{key:<{width}}  {tp * 1e3:>7.1f}ms  {tj * 1e3:>7.1f}ms  "
              f"{tp / tj:>6.1f}x")
    print("\nbackend outputs agree")


if __name__ == "__main__":
    main()
