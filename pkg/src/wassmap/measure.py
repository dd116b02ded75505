"""Discrete probability measures, raster images and affine pushforwards."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import AllZeroImage, AxisOutOfRange, DimensionMismatch

WEIGHT_TOL = 1e-12


def _frozen(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite weighted sum of Dirac masses in R^m.

    Weights are renormalized on construction and zero-weight atoms are
    dropped, so ``weights`` is always strictly positive and sums to one.
    """

    locations: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64).ravel()
        if loc.ndim == 1:
            loc = loc.reshape(-1, 1) if w.size != 1 else loc.reshape(1, -1)
        if loc.ndim != 2 or loc.shape[0] != w.size:
            raise DimensionMismatch(
                f"{loc.shape[0] if loc.ndim == 2 else '?'} locations for {w.size} weights"
            )
        if not np.all(np.isfinite(loc)) or not np.all(np.isfinite(w)):
            raise ValueError("locations and weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        keep = w > 0
        if not np.any(keep):
            raise ValueError("measure needs at least one positive weight")
        loc, w = loc[keep], w[keep]
        w = w / w.sum()
        object.__setattr__(self, "locations", _frozen(loc))
        object.__setattr__(self, "weights", _frozen(w))

    @property
    def ambient_dim(self) -> int:
        return self.locations.shape[1]

    @property
    def size(self) -> int:
        return self.weights.size

    def __len__(self):
        return self.size

    def mean(self) -> np.ndarray:
        return self.weights @ self.locations

    def digest(self) -> str:
        """Content hash of (locations, weights); used as a cache key."""
        h = hashlib.sha256()
        h.update(np.int64(self.ambient_dim).tobytes())
        h.update(np.ascontiguousarray(self.locations).tobytes())
        h.update(np.ascontiguousarray(self.weights).tobytes())
        return h.hexdigest()

    def same_atoms(self, other: "DiscreteMeasure", tol: float = 0.0) -> bool:
        """True when both measures place the same mass at the same points."""
        if self.ambient_dim != other.ambient_dim:
            return False
        a = _merged(self)
        b = _merged(other)
        if a[0].shape != b[0].shape:
            return False
        return bool(np.all(np.abs(a[0] - b[0]) <= tol) and np.all(np.abs(a[1] - b[1]) <= max(tol, 1e-12)))

    def to_dict(self) -> dict:
        atoms = np.column_stack([self.locations, self.weights])
        return {"dim": self.ambient_dim, "atoms": atoms.tolist()}

    @classmethod
    def from_dict(cls, doc: dict) -> "DiscreteMeasure":
        atoms = np.asarray(doc["atoms"], dtype=np.float64)
        dim = int(doc["dim"])
        if atoms.ndim != 2 or atoms.shape[1] != dim + 1:
            raise DimensionMismatch(f"atoms do not match declared dim {dim}")
        return cls(atoms[:, :dim], atoms[:, dim])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DiscreteMeasure":
        return cls.from_dict(json.loads(text))


def _merged(mu):
    # collapse duplicate atoms so comparisons ignore atom order/splitting
    loc, inv = np.unique(mu.locations, axis=0, return_inverse=True)
    w = np.zeros(loc.shape[0])
    np.add.at(w, inv.ravel(), mu.weights)
    return loc, w


@dataclass(frozen=True, eq=False)
class GridImage:
    """Nonnegative raster on a regular grid.

    Pixel ``idx`` sits at physical position ``origin + (idx + 0.5) * spacing``.
    """

    values: np.ndarray
    origin: np.ndarray = None
    spacing: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        m = v.ndim
        origin = np.zeros(m) if self.origin is None else np.asarray(self.origin, dtype=np.float64)
        spacing = np.ones(m) if self.spacing is None else np.asarray(self.spacing, dtype=np.float64)
        if origin.shape != (m,) or spacing.shape != (m,):
            raise DimensionMismatch("origin/spacing must have one entry per image axis")
        if np.any(spacing <= 0):
            raise ValueError("pixel spacing must be strictly positive")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("pixel values must be finite and nonnegative")
        object.__setattr__(self, "values", _frozen(v))
        object.__setattr__(self, "origin", _frozen(origin))
        object.__setattr__(self, "spacing", _frozen(spacing))

    @property
    def shape(self):
        return self.values.shape

    def pixel_centers(self) -> np.ndarray:
        """(D, m) array of pixel centers in row-major order."""
        axes = [
            self.origin[k] + (np.arange(n) + 0.5) * self.spacing[k]
            for k, n in enumerate(self.shape)
        ]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g.ravel() for g in grids])


@dataclass(frozen=True)
class AffineMap:
    """x -> matrix @ x + offset."""

    matrix: np.ndarray
    offset: np.ndarray = field(default=None)

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.matrix, dtype=np.float64))
        if a.shape[0] != a.shape[1]:
            raise DimensionMismatch(f"affine matrix must be square, got {a.shape}")
        b = np.zeros(a.shape[0]) if self.offset is None else np.asarray(self.offset, dtype=np.float64).ravel()
        if b.shape != (a.shape[0],):
            raise DimensionMismatch("offset length must match matrix size")
        object.__setattr__(self, "matrix", _frozen(a))
        object.__setattr__(self, "offset", _frozen(b))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, points):
        return np.asarray(points, dtype=np.float64) @ self.matrix.T + self.offset

    @classmethod
    def translation(cls, theta):
        theta = np.asarray(theta, dtype=np.float64).ravel()
        return cls(np.eye(theta.size), theta)

    @classmethod
    def dilation(cls, theta):
        """Atom map of a dilation-manifold element: x -> diag(theta) x."""
        theta = np.asarray(theta, dtype=np.float64).ravel()
        return cls(np.diag(theta))

    @classmethod
    def rotation(cls, angle):
        c, s = np.cos(angle), np.sin(angle)
        return cls(np.array([[c, -s], [s, c]]))


def image_to_measure(img: GridImage) -> DiscreteMeasure:
    """Normalized intensities placed at pixel centers; zero pixels are dropped."""
    v = img.values.ravel()
    nz = np.flatnonzero(v > 0)
    if nz.size == 0:
        raise AllZeroImage()
    idx = np.column_stack(np.unravel_index(nz, img.shape)).astype(np.float64)
    loc = img.origin + (idx + 0.5) * img.spacing
    return DiscreteMeasure(loc, v[nz] / v[nz].sum())


def pushforward(mu: DiscreteMeasure, T: AffineMap) -> DiscreteMeasure:
    if T.dim != mu.ambient_dim:
        raise DimensionMismatch(f"map acts on R^{T.dim}, measure lives in R^{mu.ambient_dim}")
    return DiscreteMeasure(T(mu.locations), mu.weights)


def translate(mu: DiscreteMeasure, theta) -> DiscreteMeasure:
    return pushforward(mu, AffineMap.translation(theta))


def second_moment(mu: DiscreteMeasure) -> float:
    return float(mu.weights @ np.sum(mu.locations**2, axis=1))


def marginal_second_moment(mu: DiscreteMeasure, axis: int) -> float:
    if not 0 <= axis < mu.ambient_dim:
        raise AxisOutOfRange(f"axis {axis} outside 0..{mu.ambient_dim - 1}")
    return float(mu.weights @ mu.locations[:, axis] ** 2)


def marginal_second_moments(mu: DiscreteMeasure) -> np.ndarray:
    return np.array([marginal_second_moment(mu, k) for k in range(mu.ambient_dim)])
