"""Classical multidimensional scaling and the Wassmap pipeline."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionTooLarge
from .transport import SquaredDistanceMatrix, pairwise_w2_squared


@dataclass(frozen=True, eq=False)
class Embedding:
    """N x d coordinates with their spectrum diagnostics.

    Attributes
    ----------
    points : ndarray, shape (N, d)
    eigenvalues : ndarray, shape (d,)
        Retained eigenvalues of the centered Gram matrix after clamping at 0.
    discarded_top : float
        Largest eigenvalue not retained (0 when d == N).
    raw_eigenvalues : ndarray, shape (d,)
        Top-d eigenvalues before clamping; negative entries were zeroed.
    """

    points: np.ndarray
    eigenvalues: np.ndarray
    discarded_top: float = 0.0
    raw_eigenvalues: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.raw_eigenvalues is None:
            object.__setattr__(self, "raw_eigenvalues", np.asarray(self.eigenvalues, dtype=np.float64))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def clamped(self) -> list[int]:
        """Indices of top-d eigenvalues that were negative and set to zero."""
        return [int(k) for k in np.flatnonzero(self.raw_eigenvalues < 0)]

    def diagnostics(self) -> dict:
        return {
            "n": self.n,
            "d": self.dim,
            "eigenvalues": self.eigenvalues.tolist(),
            "raw_eigenvalues": self.raw_eigenvalues.tolist(),
            "discarded_top": float(self.discarded_top),
            "clamped": self.clamped,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        for row in self.points:
            wr.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    def sidecar_json(self) -> str:
        return json.dumps(self.diagnostics(), indent=2)

    @classmethod
    def from_files(cls, csv_text: str, json_text: str) -> "Embedding":
        pts = np.array([[float(v) for v in r] for r in csv.reader(io.StringIO(csv_text)) if r])
        doc = json.loads(json_text)
        pts = pts.reshape(doc["n"], doc["d"])
        return cls(pts, np.array(doc["eigenvalues"]), doc["discarded_top"], np.array(doc["raw_eigenvalues"]))


def _entries(W):
    return W.entries if isinstance(W, SquaredDistanceMatrix) else np.asarray(W, dtype=np.float64)


def double_center(W) -> np.ndarray:
    """B = -1/2 H W H with H = I - (1/N) ones."""
    w = _entries(W)
    # H W H without forming H: subtract row and column means, add grand mean
    r = w.mean(axis=1, keepdims=True)
    c = w.mean(axis=0, keepdims=True)
    b = -0.5 * (w - r - c + w.mean())
    return 0.5 * (b + b.T)


def classical_mds(W, d: int) -> Embedding:
    """Top-d eigenpairs of the double-centered matrix, scaled by sqrt(eigenvalue).

    Negative eigenvalues among the top d are clamped to zero (the column
    becomes zero) and reported through ``Embedding.clamped``. Each
    eigenvector is signed so its largest-magnitude entry is positive.
    """
    w = _entries(W)
    n = w.shape[0]
    if not 1 <= d < n:
        raise DimensionTooLarge(f"embedding dimension must satisfy 1 <= d < N={n}, got {d}")
    b = double_center(w)
    vals, vecs = np.linalg.eigh(b)
    # descending, stable with respect to eigh's ascending order
    order = np.argsort(-vals, kind="stable")
    vals, vecs = vals[order], vecs[:, order]
    raw = vals[:d].copy()
    lam = np.clip(raw, 0.0, None)
    v = vecs[:, :d]
    pivot = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivot, np.arange(d)])
    signs[signs == 0] = 1.0
    v = v * signs
    pts = v * np.sqrt(lam)
    # exact centering; eigh leaves O(1e-16) drift
    pts = pts - pts.mean(axis=0)
    return Embedding(pts, lam, float(vals[d]) if d < n else 0.0, raw)


def wassmap(measures, d: int, *, threads: int = 1, cache=None) -> Embedding:
    """Embed measures by classical MDS of their pairwise W2^2 matrix."""
    measures = list(measures)
    if not 1 <= d < len(measures):
        raise DimensionTooLarge(f"embedding dimension must satisfy 1 <= d < N={len(measures)}, got {d}")
    return classical_mds(pairwise_w2_squared(measures, threads=threads, cache=cache), d)
