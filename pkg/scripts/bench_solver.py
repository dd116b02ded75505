"""Time exact W2 solves on a few representative instances.

    python scripts/bench_solver.py --repeat 3
"""

import argparse
import time

import numpy as np

from wassmap.measure import DiscreteMeasure, translate
from wassmap.synth import Frame, ShapeSpec, base_measure, dilation_family, rotation_family
from wassmap.transport import solve_w2


def instances(rng):
    disk = base_measure(ShapeSpec.disk(), Frame.square(1, 64))
    yield "translated disk", disk, translate(disk, [0.7, -0.3])
    a, b = dilation_family(disk, [[0.5, 1.0], [2.0, 1.5]])
    yield "dilated disk", a, b
    ell = base_measure(ShapeSpec.ellipse([1, 0.5], [3, 2]), Frame((1.9, 1.4), (4.1, 2.6), (44, 24)))
    yield "off-center rotation", *rotation_family(ell, [0.0, 2.0])
    yield "random weights", *(DiscreteMeasure(rng.normal(size=(1500, 2)), rng.random(1500) + 0.05) for _ in range(2))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = np.random.default_rng(0)
    solve_w2(*[DiscreteMeasure([[0, 0], [1, 1]], [1, 1])] * 2)  # compile
    for name, mu, nu in instances(rng):
        times = []
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            plan = solve_w2(mu, nu)
            times.append(time.perf_counter() - t0)
        print(f"{name:20s} {mu.size:5d} x {nu.size:5d}  W2^2 {plan.cost:.6g}  "
              f"pivots {plan.pivots:7d}  best {min(times):.3f} s")


if __name__ == "__main__":
    main()
