"""Numba vs. pure-numpy timings for the hot kernels.

    python benchmarks/bench_kernels.py [--repeat N]

Both flavours are imported directly, so the CRIMESCOPE_DISABLE_NUMBA flag
does not matter here. The first numba call (JIT compile / cache load) is
excluded from the timings.
"""
import argparse
import timeit

import numpy as np

from crimescope import kernels
from crimescope.solvers import overcomplete_dct
from crimescope.transforms import patch_origins


def cases(rng):
    D = overcomplete_dct(8, 128)
    X = rng.standard_normal((64, 4000)) + 1j * rng.standard_normal((64, 4000))
    oy, ox = patch_origins((256, 256), 8, 2)
    P = rng.standard_normal((64, oy.size)) + 0j
    return {
        "uniform_grid 512x512": (kernels.uniform_grid_numba, kernels.uniform_grid_numpy,
                                 (12345, (512, 512))),
        "omp K=5, 4000x64, P=128": (kernels.omp_batch_numba, kernels.omp_batch_numpy, (D, X, 5)),
        "accumulate b=8 on 256x256": (kernels.accumulate_patches_numba,
                                      kernels.accumulate_patches_numpy, (P, oy, ox, 8, (256, 256))),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':<28}{'numba [ms]':>12}{'numpy [ms]':>12}{'speedup':>10}")
    for name, (nb, npy, a) in cases(rng).items():
        nb(*a)  # warm-up
        t_nb = min(timeit.repeat(lambda: nb(*a), number=1, repeat=args.repeat))
        t_np = min(timeit.repeat(lambda: npy(*a), number=1, repeat=args.repeat))
        print(f"{name:<28}{1e3 * t_nb:>12.2f}{1e3 * t_np:>12.2f}{t_np / t_nb:>9.1f}x")


if __name__ == "__main__":
    main()
