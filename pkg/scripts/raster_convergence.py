"""Recovery error of the rasterized dilation family as the raster step shrinks.

Unit disk dilated by a 4x4 grid on [0.5,2]x[0.5,4]; each dilate is
rasterized on a common frame. Prints the recovered scale and the
normalized error against 0.5 * theta for each step.

    python scripts/raster_convergence.py 0.2 0.1 0.07
"""

import argparse
import time

from wassmap.embedding import wassmap
from wassmap.evalign import procrustes
from wassmap.synth import Frame, ShapeSpec, dilation_family, uniform_grid


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("steps", nargs="*", type=float, default=[0.2, 0.1])
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()
    thetas = uniform_grid((0.5, 2, 4), (0.5, 4, 4))
    print("step  atoms(max)  seconds  scale     error")
    for h in args.steps:
        frame = Frame((-2.1, -4.1), (2.1, 4.1), (round(4.2 / h), round(8.2 / h)))
        fam = dilation_family(ShapeSpec.disk(), thetas, "raster", frame)
        t0 = time.perf_counter()
        emb = wassmap(fam, 2, threads=args.threads)
        dt = time.perf_counter() - t0
        err = procrustes(emb, 0.5 * thetas, with_scale=True).normalized_error
        scale = procrustes(thetas, emb, with_scale=True).scale
        print(f"{h:<5g} {max(m.size for m in fam):>10d} {dt:8.1f}  {scale:.5f}  {err:.3e}")


if __name__ == "__main__":
    main()
