"""Convert per-digit JSON dumps of MNIST into an IDX image/label pair.

Expects a directory with files ``0.json`` .. ``9.json``, each holding
``{"data": [...]}``: the concatenated 28x28 images of that digit with
intensities scaled to [0, 1] (the layout of the ``mnist`` npm package).
Intensities are mapped back to bytes by ``round(255 * v)``.
"""

import argparse
import json
import os

import numpy as np

from wassmap.ingest import LabeledImageSet, write_idx


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("digits_dir", help="directory containing 0.json .. 9.json")
    ap.add_argument("--out", default="data/mnist", help="output directory")
    args = ap.parse_args(argv)
    pixels, labels = [], []
    for d in range(10):
        with open(os.path.join(args.digits_dir, f"{d}.json")) as fh:
            flat = np.asarray(json.load(fh)["data"], dtype=np.float64)
        if flat.size % 784:
            raise SystemExit(f"{d}.json: {flat.size} values is not a multiple of 784")
        imgs = np.clip(np.rint(flat * 255.0), 0, 255).astype(np.uint8).reshape(-1, 28, 28)
        pixels.append(imgs)
        labels.append(np.full(imgs.shape[0], d, dtype=np.uint8))
    s = LabeledImageSet(np.concatenate(pixels), np.concatenate(labels))
    os.makedirs(args.out, exist_ok=True)
    img = os.path.join(args.out, "train-images-idx3-ubyte")
    lab = os.path.join(args.out, "train-labels-idx1-ubyte")
    write_idx(s, img, lab)
    print(f"wrote {len(s)} images to {img} and {lab}")


if __name__ == "__main__":
    main()
