"""scikit-learn style wrapper: fit on an adjacency matrix, transform beliefs."""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .dynamics import build_learning_matrix, consensus_limit, matrix_power
from .netgen import Graph
from .spectra import eigen_symmetrized
from .weightfn import custom, power


def check_adjacency(A):
    """Validate a square, symmetric adjacency matrix with entries in [0, 1]."""
    A = check_array(A, dtype=np.float64, ensure_min_samples=1, ensure_min_features=1)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"adjacency must be square, got shape {A.shape}")
    if not np.array_equal(A, A.T):
        raise ValueError("adjacency must be symmetric")
    if A.min() < 0.0 or A.max() > 1.0:
        raise ValueError("adjacency entries must lie in [0, 1]")
    return A


class DegreeWeightedDeGroot(TransformerMixin, BaseEstimator):
    """Degree-weighted DeGroot learning on a fixed network.

    ``fit`` takes an n x n adjacency matrix and builds T = D1^-1 A D2 with
    weights ``phi(alpha, degree)``. Rows passed to ``transform`` are belief
    vectors over the n agents and come back after ``t`` updates;
    ``predict`` returns each row's consensus belief.

    Parameters
    ----------
    alpha : float
        Degree-dependence parameter.
    weight_func : callable or None
        Vectorized ``func(alpha, d)``; None means ``d ** alpha``.
    t : int
        Number of updates applied by ``transform``.
    check_aperiodic : bool
        Reject periodic (bipartite, loop-free) graphs when computing the
        consensus weights.

    Attributes
    ----------
    learning_matrix_ : LearningMatrix
    spectrum_ : SpectralReport
    lambda2_ : float
        Second-largest-magnitude eigenvalue of T (signed).
    consensus_weights_ : ndarray of shape (n,)
    """

    def __init__(self, alpha=0.0, weight_func=None, t=1, check_aperiodic=True):
        self.alpha = alpha
        self.weight_func = weight_func
        self.t = t
        self.check_aperiodic = check_aperiodic

    def _phi(self):
        if self.weight_func is None:
            return power(self.alpha)
        return custom(self.weight_func, self.alpha)

    def fit(self, X, y=None):
        if int(self.t) != self.t or self.t < 0:
            raise ValueError(f"t must be a nonnegative integer, got {self.t!r}")
        A = check_adjacency(X)
        graph = Graph.from_adjacency(A)
        phi = self._phi()
        self.learning_matrix_ = build_learning_matrix(graph, phi)
        self.spectrum_ = eigen_symmetrized(self.learning_matrix_)
        self.lambda2_ = self.spectrum_.lambda2
        self.consensus_weights_ = consensus_limit(graph, phi, self.check_aperiodic).weights
        self.n_features_in_ = A.shape[0]
        return self

    def _beliefs(self, X):
        check_is_fitted(self, "learning_matrix_")
        B = check_array(X, dtype=np.float64)
        if B.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} agents per row, got {B.shape[1]}")
        return B

    def transform(self, X):
        """Beliefs after ``t`` updates, one row per initial belief vector."""
        B = self._beliefs(X)
        return B @ matrix_power(self.learning_matrix_, int(self.t)).T

    def predict(self, X):
        """Consensus belief reached from each row of initial beliefs."""
        return self._beliefs(X) @ self.consensus_weights_
