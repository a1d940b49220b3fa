"""Time the numba and numpy kernels on the default workloads.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""
import argparse
import time

import numpy as np

from patchmeso import _kernels
from patchmeso.gl2d import _held_sources, coupling_coefficients, initial_field, reference_config
from patchmeso.geometry import PatchGeometry
from patchmeso.operator import assemble_operator


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args()
    if not _kernels.USE_NUMBA:
        raise SystemExit("numba backend disabled; unset PATCHMESO_NUMBA to compare")

    op = assemble_operator(PatchGeometry(20, 5, 41), 0.91)
    K = op.reduced()
    G = op.L[1:-1][:, [0, -1]] @ op.edge_solver()[:, -2:]
    F = np.random.default_rng(0).normal(size=(500, 3, 2))
    u0 = np.zeros(K.shape[0])

    cfg = reference_config()
    u = initial_field(cfg)
    C = coupling_coefficients(cfg)
    held = _held_sources(u)

    cases = {
        "rk4 patch n=20, 500 steps": (
            lambda: _kernels.rk4_forced_numba(K, G, u0, F, 1e-3),
            lambda: _kernels.rk4_forced_numpy(K, G, u0, F, 1e-3),
        ),
        "gl2d 4x4 patches n=6, 200 steps": (
            lambda: _kernels.gl_advance_numba(u, 200, 1e-3, 1.0, 2.0, C, held, True),
            lambda: _kernels.gl_advance_numpy(u, 200, 1e-3, 1.0, 2.0, C, held, True),
        ),
    }
    print(f"{'kernel':34s} {'numba s':>10s} {'numpy s':>10s} {'speedup':>8s}")
    for name, (fa, fb) in cases.items():
        ta, tb = best_of(fa, args.repeat), best_of(fb, args.repeat)
        print(f"{name:34s} {ta:10.4f} {tb:10.4f} {tb / ta:8.1f}")


if __name__ == "__main__":
    main()
