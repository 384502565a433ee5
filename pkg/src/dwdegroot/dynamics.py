"""Degree-weighted DeGroot updating: T = D1^-1 A D2 and its iterates.

With w_j = phi(alpha, d_j), the update weights neighbour j of vertex i by
A_ij w_j / sum_k A_ik w_k. ``diag1`` holds the row normalisers
D1_ii = sum_j A_ij w_j and ``diag2`` the weights D2_ii = w_i. Because A is
symmetric, T is similar to the symmetric matrix
S = D1^-1/2 D2^1/2 A D2^1/2 D1^-1/2 through M = (D1 D2)^1/2.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csgraph

from .netgen import degrees

__all__ = [
    "LearningMatrix",
    "BeliefVector",
    "ConsensusWeights",
    "build_learning_matrix",
    "iterate_beliefs",
    "consensus_limit",
    "convergence_distance",
    "matrix_power",
    "write_trajectory_csv",
    "ConstructionError",
    "ConsensusError",
]

# Matrix powers above this exponent go through the eigendecomposition.
MAX_DIRECT_POWER = 64


class ConstructionError(ValueError):
    """The learning matrix has an empty row."""


class ConsensusError(ValueError):
    """T**t has no limit: the graph is disconnected or periodic."""


@dataclass(frozen=True, eq=False)
class LearningMatrix:
    entries: np.ndarray
    diag1: np.ndarray
    diag2: np.ndarray
    adjacency: np.ndarray
    source: str
    alpha: float

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def metric(self):
        """Diagonal of D1 D2, the weights of the inner product that makes T self-adjoint."""
        return self.diag1 * self.diag2

    def symmetrized(self):
        s = np.sqrt(self.diag2 / self.diag1)
        return self.adjacency * np.outer(s, s)

    def condition(self):
        """cond((D1 D2)^1/2): bounds Euclidean against weighted operator norms."""
        W = self.metric
        return float(np.sqrt(W.max() / W.min()))


@dataclass(frozen=True, eq=False)
class BeliefVector:
    values: np.ndarray
    time: int = 0

    def __post_init__(self):
        v = np.array(self.values, dtype=float).reshape(-1)
        if not np.all(np.isfinite(v)):
            raise ValueError("beliefs must be finite")
        if self.time < 0:
            raise ValueError("time must be nonnegative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class ConsensusWeights:
    weights: np.ndarray

    def limit_matrix(self):
        """T_inf = 1 w^T."""
        return np.broadcast_to(self.weights, (self.weights.size, self.weights.size)).copy()


def build_learning_matrix(g, phi):
    """Row-stochastic update matrix of ``g`` under weight function ``phi``.

    Built from the expected adjacency this is the expectation-level matrix T*.
    """
    A = g.weights
    d = degrees(g)
    w = np.asarray(phi(d), dtype=float)
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ConstructionError(f"phi produced invalid weights at alpha={phi.alpha:g}")
    d1 = A @ w
    empty = np.flatnonzero(~(d1 > 0))
    if empty.size:
        raise ConstructionError(
            f"{empty.size} vertices have no weighted neighbours (e.g. {empty[:10].tolist()})"
        )
    T = A * w[None, :] / d1[:, None]
    for arr in (T, d1, w):
        arr.setflags(write=False)
    return LearningMatrix(T, d1, w, A, g.kind, phi.alpha)


def iterate_beliefs(T, b0, t):
    """b(t) = T**t b0 by repeated matrix-vector products."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    b = b0.values if isinstance(b0, BeliefVector) else np.asarray(b0, dtype=float)
    start = b0.time if isinstance(b0, BeliefVector) else 0
    if b.shape != (T.n,):
        raise ValueError(f"belief vector has length {b.shape}, expected {T.n}")
    for _ in range(t):
        b = T.entries @ b
    return BeliefVector(b, start + t)


def _check_limit_exists(A, check_aperiodic=True):
    positive = A > 0
    n_comp, labels = csgraph.connected_components(positive, directed=False)
    if n_comp > 1:
        sizes = np.bincount(labels)
        raise ConsensusError(
            f"graph is disconnected: {n_comp} components with sizes {sorted(sizes.tolist(), reverse=True)[:10]}"
        )
    if not check_aperiodic or np.any(np.diag(positive)):
        return
    dist = csgraph.shortest_path(positive, unweighted=True, indices=0)
    color = dist.astype(np.int64) % 2
    for c in (0, 1):
        idx = np.flatnonzero(color == c)
        if np.any(positive[np.ix_(idx, idx)]):
            return
    raise ConsensusError("graph is bipartite without self-loops: T is periodic and T**t has no limit")


def consensus_limit(g, phi, check_aperiodic=True):
    """Common row of T_inf: w_j proportional to phi(d_j) sum_i A_ij phi(d_i).

    These are the stationary weights of T for any connected graph; with
    ``check_aperiodic=False`` periodic graphs are accepted, although T**t
    then oscillates instead of converging.
    """
    _check_limit_exists(g.weights, check_aperiodic)
    T = build_learning_matrix(g, phi)
    return _stationary(T)


def _stationary(T):
    W = T.metric
    return ConsensusWeights(W / W.sum())


def matrix_power(T, t):
    """T**t, directly for small t and through S's eigendecomposition beyond."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if t <= MAX_DIRECT_POWER:
        return np.linalg.matrix_power(T.entries, t)
    lam, U = np.linalg.eigh(T.symmetrized())
    m = np.sqrt(T.metric)
    return (U / m[:, None]) @ ((lam**t)[:, None] * (U.T * m[None, :]))


def convergence_distance(T, t, norm="d_weighted", check_aperiodic=True):
    """Worst-case distance to consensus max ||(T**t - T_inf) b|| over unit b.

    ``d_weighted`` measures vectors in the norm ||x||^2 = sum_i (D1 D2)_ii x_i^2,
    in which the distance equals |lambda_2|**t exactly; ``euclidean`` uses
    the plain 2-norm.
    """
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    if norm not in ("d_weighted", "euclidean"):
        raise ValueError(f"unknown norm {norm!r}")
    _check_limit_exists(T.adjacency, check_aperiodic)
    B = matrix_power(T, t) - _stationary(T).limit_matrix()
    if norm == "d_weighted":
        m = np.sqrt(T.metric)
        B = m[:, None] * B / m[None, :]
    return float(np.linalg.norm(B, 2))


def write_trajectory_csv(T, b0, t_max, f):
    """Write beliefs b(0..t_max) as CSV rows ``t,vertex_id,belief``."""
    if isinstance(f, str) or hasattr(f, "__fspath__"):
        with open(f, "w", newline="") as fh:
            return write_trajectory_csv(T, b0, t_max, fh)
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(["t", "vertex_id", "belief"])
    b = b0 if isinstance(b0, BeliefVector) else BeliefVector(b0)
    for step in range(t_max + 1):
        for i, x in enumerate(b.values):
            writer.writerow([b.time, i, repr(float(x))])
        if step < t_max:
            b = iterate_beliefs(T, b, 1)
