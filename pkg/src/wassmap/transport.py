"""Exact quadratic Wasserstein distances between discrete measures.

The exact solver is a transportation network simplex (see ``_simplex``).
Every solve returns dual potentials, so optimality can be certified
independently of the solver.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import logsumexp

from ._simplex import network_simplex
from .errors import (
    DimensionMismatch,
    MaxIterExceeded,
    NonConvergence,
    PairSolveError,
    UnsupportedInstance,
)
from .measure import AffineMap, DiscreteMeasure, pushforward

DUAL_TOL = 1e-8
GAP_TOL = 1e-7
# pricing scans the NEIGHBORS nearest target atoms of each row's partner
NEIGHBORS = 16


def sq_cost(x, y) -> np.ndarray:
    """Dense matrix of squared Euclidean distances between two point sets."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = x[:, None, :] - y[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Sparse optimal coupling plus the dual potentials that certify it.

    Attributes
    ----------
    rows, cols : int
        Source and target atom counts.
    i, j, mass : ndarray
        Support of the coupling; ``mass`` is strictly positive.
    cost : float
        ``sum(mass * |x_i - y_j|^2)``.
    phi, psi : ndarray
        Dual potentials for source and target atoms.
    pivots : int
        Simplex pivots used by the solve.
    """

    rows: int
    cols: int
    i: np.ndarray
    j: np.ndarray
    mass: np.ndarray
    cost: float
    phi: np.ndarray
    psi: np.ndarray
    pivots: int = 0

    @property
    def nnz(self) -> int:
        return self.mass.size

    def to_dense(self) -> np.ndarray:
        p = np.zeros((self.rows, self.cols))
        np.add.at(p, (self.i, self.j), self.mass)
        return p

    def row_sums(self) -> np.ndarray:
        return np.bincount(self.i, weights=self.mass, minlength=self.rows)

    def col_sums(self) -> np.ndarray:
        return np.bincount(self.j, weights=self.mass, minlength=self.cols)

    def dual_value(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        return float(self.phi @ mu.weights + self.psi @ nu.weights)

    def duality_gap(self, mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
        """Relative gap between primal cost and dual objective."""
        return abs(self.cost - self.dual_value(mu, nu)) / max(1.0, abs(self.cost))

    def dual_violation(self, mu: DiscreteMeasure, nu: DiscreteMeasure, chunk: int = 256) -> float:
        """Largest ``phi_i + psi_j - c_ij`` over all pairs (<= 0 when feasible)."""
        worst = -np.inf
        y = nu.locations
        for s in range(0, mu.size, chunk):
            c = sq_cost(mu.locations[s : s + chunk], y)
            worst = max(worst, float(np.max(self.phi[s : s + chunk, None] + self.psi[None, :] - c)))
        return worst


def solve_w2(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    *,
    certify: bool = True,
    max_pivots: int | None = None,
    block_size: int = 0,
    neighbors: int = NEIGHBORS,
) -> TransportPlan:
    """Optimal coupling for the squared Euclidean cost.

    Parameters
    ----------
    mu, nu : DiscreteMeasure
        Measures in the same ambient dimension; atom counts may differ.
    certify : bool
        Check dual feasibility (1e-8) and the duality gap (1e-7 relative)
        after the solve. Costs O(n1 * n2) extra work.
    max_pivots : int, optional
        Pivot budget; exceeding it raises ``NonConvergence``.
    block_size : int
        Pricing candidate-list length, 0 for automatic.
    neighbors : int
        Size of the target-side neighbor lists used for local pricing;
        0 prices against full rows only. Affects speed, not the result.
    """
    if mu.ambient_dim != nu.ambient_dim:
        raise DimensionMismatch(f"cannot couple R^{mu.ambient_dim} with R^{nu.ambient_dim}")
    x = np.ascontiguousarray(mu.locations)
    y = np.ascontiguousarray(nu.locations)
    n1, n2 = mu.size, nu.size
    lo = np.minimum(x.min(0), y.min(0))
    hi = np.maximum(x.max(0), y.max(0))
    diam2 = float(np.sum((hi - lo) ** 2))
    eps = 1e-12 * max(1.0, diam2)
    if max_pivots is None:
        max_pivots = 10**6 + 200 * (n1 + n2) * int(math.isqrt(n1 * n2) + 1)
    streak = max(10**4, 20 * (n1 + n2))
    k = min(int(neighbors), n2)
    if k > 1:
        nbr = cKDTree(y).query(y, k=k)[1].astype(np.int64).reshape(n2, k)
    else:
        nbr = np.zeros((n2, 0), dtype=np.int64)
    r, c, f, u, v, status, pivots = network_simplex(
        mu.weights, nu.weights, x, y, eps, int(max_pivots), streak, int(block_size), True, nbr
    )
    if status != 0:
        raise NonConvergence(f"network simplex hit the pivot limit ({max_pivots}) on {n1}x{n2}")
    keep = f > 0
    r, c, f = r[keep], c[keep], f[keep]
    order = np.lexsort((c, r))
    r, c, f = r[order], c[order], f[order]
    d = x[r] - y[c]
    cost = float(f @ np.einsum("ij,ij->i", d, d))
    plan = TransportPlan(n1, n2, r, c, f, max(cost, 0.0), u, v, int(pivots))
    if certify:
        viol = plan.dual_violation(mu, nu)
        gap = plan.duality_gap(mu, nu)
        if viol > DUAL_TOL or gap > GAP_TOL:
            raise NonConvergence(f"optimality certificate failed: dual violation {viol:.3g}, gap {gap:.3g}")
    return plan


def w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return math.sqrt(solve_w2(mu, nu, certify=False).cost)


def permutation_oracle(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    """Brute-force W2^2 over all assignments; uniform weights and n <= 8 only."""
    n = mu.size
    if nu.size != n:
        raise UnsupportedInstance("permutation oracle needs equal atom counts")
    if n > 8:
        raise UnsupportedInstance(f"permutation oracle limited to n <= 8, got {n}")
    for m in (mu, nu):
        if np.max(np.abs(m.weights - 1.0 / n)) > 1e-12:
            raise UnsupportedInstance("permutation oracle needs uniform weights")
    if mu.ambient_dim != nu.ambient_dim:
        raise DimensionMismatch("measures live in different dimensions")
    c = sq_cost(mu.locations, nu.locations)
    perms = np.array(list(itertools.permutations(range(n))))
    totals = c[np.arange(n), perms].sum(axis=1)
    return float(totals.min() / n)


def rotation_displacement(mu: DiscreteMeasure, angle: float) -> float:
    """sum_n w_n |R x_n - x_n|^2, an upper bound on W2^2(mu, R# mu)."""
    moved = AffineMap.rotation(angle)(mu.locations)
    return float(mu.weights @ np.sum((moved - mu.locations) ** 2, axis=1))


def rotate(mu: DiscreteMeasure, angle: float) -> DiscreteMeasure:
    return pushforward(mu, AffineMap.rotation(angle))


@dataclass(frozen=True, eq=False)
class SquaredDistanceMatrix:
    """Symmetric matrix of squared distances with zero diagonal."""

    entries: np.ndarray
    kind: str = "w2_squared"

    def __post_init__(self):
        w = np.array(self.entries, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionMismatch(f"distance matrix must be square, got {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("distance matrix has non-finite entries")
        if np.any(np.diag(w) != 0):
            raise ValueError("distance matrix diagonal must be zero")
        if np.any(w < 0):
            raise ValueError("squared distances must be nonnegative")
        if not np.array_equal(w, w.T):
            raise ValueError("distance matrix must be symmetric")
        w.setflags(write=False)
        object.__setattr__(self, "entries", w)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def triangle_violation(self) -> float:
        """max over (i,j,k) of d_ij - d_ik - d_kj for d = sqrt(entries)."""
        d = np.sqrt(self.entries)
        worst = 0.0
        for k in range(self.size):
            worst = max(worst, float(np.max(d - d[:, k : k + 1] - d[k : k + 1, :])))
        return worst

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        for row in self.entries:
            wr.writerow([f"{v:.17g}" for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, kind: str = "w2_squared") -> "SquaredDistanceMatrix":
        rows = [[float(v) for v in r] for r in csv.reader(io.StringIO(text)) if r]
        return cls(np.array(rows), kind)

    def to_json(self) -> str:
        return json.dumps({"n": self.size, "kind": self.kind, "entries": self.entries.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "SquaredDistanceMatrix":
        doc = json.loads(text)
        w = np.asarray(doc["entries"], dtype=np.float64)
        if w.shape != (doc["n"], doc["n"]):
            raise DimensionMismatch(f"envelope says n={doc['n']}, entries are {w.shape}")
        return cls(w, doc["kind"])


class PairCache:
    """Persistent W2^2 cache keyed by the unordered pair of measure digests.

    Stored as JSON lines ``{"a": digest, "b": digest, "w2sq": value}`` with
    ``a < b``; appended as results arrive so interrupted runs can resume.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = path
        self._data: dict[tuple[str, str], float] = {}
        self._lock = threading.Lock()
        if path is not None and os.path.exists(path):
            with open(path) as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        rec = json.loads(line)
                        self._data[(rec["a"], rec["b"])] = float(rec["w2sq"])

    @staticmethod
    def key(da: str, db: str) -> tuple[str, str]:
        return (da, db) if da <= db else (db, da)

    def __len__(self):
        return len(self._data)

    def get(self, da: str, db: str):
        return self._data.get(self.key(da, db))

    def put(self, da: str, db: str, value: float):
        k = self.key(da, db)
        with self._lock:
            self._data[k] = value
            if self.path is not None:
                with open(self.path, "a") as fh:
                    fh.write(json.dumps({"a": k[0], "b": k[1], "w2sq": repr(value)}) + "\n")


def pairwise_w2_squared(
    measures,
    *,
    threads: int = 1,
    cache: PairCache | None = None,
    solver=None,
) -> SquaredDistanceMatrix:
    """All pairwise W2^2 values.

    Each pair is solved with its two measures ordered by content digest, so
    the matrix does not depend on input order, thread count or cache state.
    ``solver(mu, nu) -> float`` may replace the exact solve (tests use this
    to count calls).
    """
    measures = list(measures)
    n = len(measures)
    if n < 2:
        raise ValueError("need at least two measures")
    dim = measures[0].ambient_dim
    for k, m in enumerate(measures):
        if m.ambient_dim != dim:
            raise DimensionMismatch(f"measure {k} lives in R^{m.ambient_dim}, expected R^{dim}")
    if solver is None:
        def solver(a, b):
            return solve_w2(a, b, certify=False).cost
    digests = [m.digest() for m in measures]
    out = np.zeros((n, n))

    def work(pair):
        i, j = pair
        if digests[i] == digests[j]:
            return pair, 0.0
        if cache is not None:
            hit = cache.get(digests[i], digests[j])
            if hit is not None:
                return pair, hit
        a, b = (i, j) if digests[i] <= digests[j] else (j, i)
        try:
            val = float(solver(measures[a], measures[b]))
        except Exception as exc:
            raise PairSolveError(pair, exc) from exc
        if cache is not None:
            cache.put(digests[i], digests[j], val)
        return pair, val

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    if threads <= 1:
        results = map(work, pairs)
    else:
        pool = ThreadPoolExecutor(max_workers=threads)
        results = pool.map(work, pairs)
    try:
        for (i, j), val in results:
            out[i, j] = out[j, i] = val
    finally:
        if threads > 1:
            pool.shutdown(cancel_futures=True)
    return SquaredDistanceMatrix(out, "w2_squared")


class SinkhornResult(NamedTuple):
    value: float
    iterations: int
    marginal_error: float


def sinkhorn_w2(
    mu: DiscreteMeasure,
    nu: DiscreteMeasure,
    regularization: float,
    tol: float = 1e-9,
    max_iter: int = 10000,
) -> SinkhornResult:
    """Entropic approximation of W2 by log-domain Sinkhorn iterations.

    ``value`` is the square root of the transport cost of the entropic
    plan. It is biased upward: the plan is (nearly) feasible but not
    optimal, and the bias shrinks as ``regularization`` goes to 0.
    """
    if regularization <= 0:
        raise ValueError("regularization must be positive")
    if mu.ambient_dim != nu.ambient_dim:
        raise DimensionMismatch("measures live in different dimensions")
    c = sq_cost(mu.locations, nu.locations)
    la, lb = np.log(mu.weights), np.log(nu.weights)
    f = np.zeros(mu.size)
    g = np.zeros(nu.size)
    eps = regularization
    err = np.inf
    for it in range(1, max_iter + 1):
        f = eps * (la - logsumexp((g[None, :] - c) / eps, axis=1))
        g = eps * (lb - logsumexp((f[:, None] - c) / eps, axis=0))
        # after the g-update the column marginals are exact; check rows
        logp = (f[:, None] + g[None, :] - c) / eps
        err = float(np.abs(np.exp(logsumexp(logp, axis=1)) - mu.weights).sum())
        if err <= tol:
            p = np.exp(logp)
            return SinkhornResult(math.sqrt(max(float(np.sum(p * c)), 0.0)), it, err)
    raise MaxIterExceeded(f"Sinkhorn marginal error {err:.3g} > {tol:g} after {max_iter} iterations")
