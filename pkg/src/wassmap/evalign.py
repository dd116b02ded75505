"""Rigid alignment and recovery metrics for embeddings."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .embedding import Embedding
from .errors import DegenerateLabels, ShapeMismatch


@dataclass(frozen=True, eq=False)
class RigidAlignment:
    """Map x -> scale * rotation @ x + translation fitted to a target set."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float
    rmse: float
    normalized_error: float = float("nan")

    def apply(self, x) -> np.ndarray:
        return self.scale * np.asarray(x, dtype=np.float64) @ self.rotation.T + self.translation

    def to_json(self) -> str:
        return json.dumps(
            {
                "rotation": self.rotation.tolist(),
                "translation": self.translation.tolist(),
                "scale": self.scale,
                "rmse": self.rmse,
                "normalized_error": self.normalized_error,
            }
        )


def _points(x):
    return x.points if isinstance(x, Embedding) else np.asarray(x, dtype=np.float64)


def rms_radius(x) -> float:
    x = _points(x)
    return float(np.sqrt(np.mean(np.sum((x - x.mean(0)) ** 2, axis=1))))


def procrustes(X, Y, with_scale: bool = False) -> RigidAlignment:
    """Least-squares fit of Y by s R X + t with R orthogonal (reflections allowed)."""
    x = _points(X)
    y = _points(Y)
    if x.ndim != 2 or x.shape != y.shape or x.shape[0] < 1:
        raise ShapeMismatch(f"cannot align {x.shape} to {y.shape}")
    mx, my = x.mean(0), y.mean(0)
    xc, yc = x - mx, y - my
    u, sig, vt = np.linalg.svd(yc.T @ xc)
    r = u @ vt
    s = 1.0
    if with_scale:
        nx = float(np.sum(xc**2))
        s = float(sig.sum() / nx) if nx > 0 else 1.0
        if s <= 0:
            s = 1.0
    t = my - s * r @ mx
    resid = s * xc @ r.T - yc
    rmse = float(np.sqrt(np.mean(np.sum(resid**2, axis=1))))
    rad = rms_radius(y)
    return RigidAlignment(r, t, s, rmse, rmse / rad if rad > 0 else float("inf"))


def recovery_error(embedding, truth, with_scale: bool = False) -> float:
    """Procrustes rmse divided by the truth's root-mean-square radius."""
    return procrustes(embedding, truth, with_scale).normalized_error


def knn_separation(points, labels, k: int = 1) -> float:
    """Leave-one-out k-NN accuracy; vote ties go to the nearest tied class."""
    x = _points(points)
    y = np.asarray(labels)
    if x.shape[0] != y.shape[0]:
        raise ShapeMismatch("points and labels differ in length")
    if np.unique(y).size < 2:
        raise DegenerateLabels("need at least two classes")
    if not 1 <= k < x.shape[0]:
        raise ValueError("k must satisfy 1 <= k < N")
    d = np.sum((x[:, None, :] - x[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d, np.inf)
    nbr = np.argsort(d, axis=1, kind="stable")[:, :k]
    correct = 0
    for i in range(x.shape[0]):
        votes = y[nbr[i]]
        cls, counts = np.unique(votes, return_counts=True)
        winners = set(cls[counts == counts.max()].tolist())
        pred = next(v for v in votes if v in winners)
        correct += int(pred == y[i])
    return correct / x.shape[0]


def circle_fit(points):
    """Least-squares circle through 2-D points (algebraic fit).

    Returns ``(center, radius, max_relative_deviation)`` where the last
    value is ``max_i | |p_i - center| - radius | / radius``.
    """
    x = _points(points)
    if x.ndim != 2 or x.shape[1] != 2 or x.shape[0] < 3:
        raise ShapeMismatch("circle fit needs at least three planar points")
    a = np.column_stack([2 * x, np.ones(x.shape[0])])
    rhs = np.sum(x**2, axis=1)
    sol, *_ = np.linalg.lstsq(a, rhs, rcond=None)
    center = sol[:2]
    radius = float(np.sqrt(max(sol[2] + center @ center, 0.0)))
    r = np.linalg.norm(x - center, axis=1)
    dev = float(np.max(np.abs(r - radius)) / radius) if radius > 0 else float("inf")
    return center, radius, dev
