"""Compare the compiled and numpy visibility kernels on a realistic workload.

Usage: python benchmarks/bench_kernels.py [--poses 90] [--repeat 3]
"""

import argparse
import time

import numpy as np

from nbvrecon import _pykernels
from nbvrecon.camera import fov_candidates, relevant_occluders
from nbvrecon.geometry import FovShape, camera_position
from nbvrecon.world import Flower, discretize

try:
    from nbvrecon import _ckernels
except ImportError:
    _ckernels = None


def workload(n_poses):
    surface = discretize(Flower(5, 2.0), 0.1)
    shape = FovShape(10.0, 10.0, np.radians(35.0))
    xy = surface.xy
    jobs = []
    for theta in 2 * np.pi * np.arange(n_poses) / n_poses:
        cand = np.flatnonzero(fov_candidates(theta, xy, shape))
        cx, cy = camera_position(theta, shape.d_cam)
        reach = float(np.max(np.hypot(xy[cand, 0] - cx, xy[cand, 1] - cy)))
        occ = relevant_occluders(theta, surface.pixel_ids, surface.h, shape, reach)
        jobs.append((cx, cy, xy[cand], surface.pixel_ids[cand], occ, surface.h, 1))
    return jobs


def timed(fn, jobs, repeat):
    best = np.inf
    for _ in range(repeat):
        start = time.perf_counter()
        out = [fn(*job) for job in jobs]
        best = min(best, time.perf_counter() - start)
    return best, out


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--poses", type=int, default=90)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()
    jobs = workload(args.poses)
    pairs = sum(len(j[2]) * len(j[4]) for j in jobs)
    t_py, out_py = timed(_pykernels.segments_clear, jobs, args.repeat)
    print(f"segment/pixel pairs per pass: {pairs}")
    print(f"python   {t_py * 1e3:9.1f} ms")
    if _ckernels is None:
        print("cython   not built")
        return
    t_c, out_c = timed(_ckernels.segments_clear, jobs, args.repeat)
    same = all(np.array_equal(a, b) for a, b in zip(out_py, out_c))
    print(f"cython   {t_c * 1e3:9.1f} ms   speedup {t_py / t_c:.1f}x   identical={same}")


if __name__ == "__main__":
    main()
