"""Spectra of learning matrices and the Elite-Grassroots closed forms.

Numeric spectra always go through the symmetric matrix S similar to T.
For Elite-Grassroots specs, T* collapses to an m x m block matrix

    [[a, b, ..., b],
     [e, c, d, ..., d],
     ...
     [e, d, ..., d, c]]

whose nontrivial eigenvalues are a - e and c - d (the latter with
multiplicity m - 2). Which one has the larger magnitude switches where
g(alpha) = n1 / n2.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .netgen import EliteGrassrootsSpec, _group_degrees, as_block_spec
from .weightfn import g_inverse

__all__ = [
    "SpectralReport",
    "FBlockMatrix",
    "RegimeClassification",
    "WorstBeliefs",
    "eigen_symmetrized",
    "reduce_block_matrix",
    "lambda2_closed_form",
    "classify_regime",
    "worst_initial_beliefs",
]

MULTIPLICITY_TOL = 1e-12


class DegenerateSpecError(ValueError):
    """d1* == d2*: no elite/grassroots case applies."""


@dataclass(frozen=True, eq=False)
class SpectralReport:
    lambda2: float
    method: str
    eigenvalues: Optional[np.ndarray] = None
    second_eigenvector: Optional[np.ndarray] = None
    multiplicity: int = 1
    branch: str = ""
    case_id: int = 0
    alpha: float = float("nan")

    @property
    def abs_lambda2(self):
        return abs(self.lambda2)


def _sort_by_magnitude(lam):
    # descending |lambda|, positive first on ties
    return np.lexsort((-lam, -np.abs(lam)))


def eigen_symmetrized(T, vectors=True):
    """Full spectrum of T from the symmetric similar matrix S.

    The second eigenvector is mapped back through (D1 D2)^-1/2, scaled to
    unit Euclidean norm and signed so its largest entry is positive.
    """
    if T.n < 2:
        raise ValueError("need at least two vertices for a second eigenvalue")
    if not (np.all(T.diag1 > 0) and np.all(T.diag2 > 0)):
        raise ValueError("symmetrization needs strictly positive D1 and D2")
    S = T.symmetrized()
    if vectors:
        lam, U = np.linalg.eigh(S)
    else:
        lam, U = np.linalg.eigvalsh(S), None
    order = _sort_by_magnitude(lam)
    lam = lam[order]
    lam2 = float(lam[1])
    mult = int(np.sum(np.abs(np.abs(lam[1:]) - abs(lam2)) <= MULTIPLICITY_TOL))
    v2 = None
    if U is not None:
        v2 = U[:, order[1]] / np.sqrt(T.metric)
        v2 /= np.linalg.norm(v2)
        if v2[np.argmax(np.abs(v2))] < 0:
            v2 = -v2
    return SpectralReport(
        lambda2=lam2,
        method="dense_numeric",
        eigenvalues=lam,
        second_eigenvector=v2,
        multiplicity=mult,
        alpha=T.alpha,
    )


@dataclass(frozen=True, eq=False)
class FBlockMatrix:
    """Group-level reduction of T*: F_kl = n_l P_kl phi(D_l) / sum_l n_l P_kl phi(D_l)."""

    matrix: np.ndarray

    @property
    def m(self):
        return self.matrix.shape[0]

    a = property(lambda self: float(self.matrix[0, 0]))
    b = property(lambda self: float(self.matrix[0, 1]))
    e = property(lambda self: float(self.matrix[1, 0]))
    c = property(lambda self: float(self.matrix[1, 1]))

    @property
    def d(self):
        return float(self.matrix[1, 2]) if self.m >= 3 else None

    def eigenvalues(self):
        lam = np.linalg.eigvals(self.matrix)
        return lam[_sort_by_magnitude(lam.real)]


def reduce_block_matrix(spec, phi):
    """m x m matrix sharing the nonzero spectrum of T* for any block model."""
    block = as_block_spec(spec)
    sizes = np.asarray(block.group_sizes, dtype=float)
    w = phi(np.array(_group_degrees(block)))
    W = block.link_probs * (sizes * w)[None, :]
    F = W / W.sum(axis=1, keepdims=True)
    F.setflags(write=False)
    return FBlockMatrix(F)


@dataclass(frozen=True)
class _Entries:
    a: float
    b: float
    c: float
    d: float
    e: float


def _eg_entries(spec, phi):
    """a..e of the Elite-Grassroots block matrix, with phi rescaled to avoid overflow."""
    n1, n2, m, p, q = spec.n1, spec.n2, spec.m, spec.p, spec.q
    f1, f2 = float(phi(spec.d1)), float(phi(spec.d2))
    s = max(f1, f2)
    f1, f2 = f1 / s, f2 / s
    den1 = n1 * p * f1 + (m - 1) * n2 * q * f2
    den2 = n1 * q * f1 + n2 * p * f2 + (m - 2) * n2 * q * f2
    return _Entries(
        a=n1 * p * f1 / den1,
        b=n2 * q * f2 / den1,
        c=n2 * p * f2 / den2,
        d=n2 * q * f2 / den2,
        e=n1 * q * f1 / den2,
    )


def _threshold(spec, phi):
    return g_inverse(phi, spec.n1 / spec.n2, spec.d1, spec.d2)


def _case_id(spec):
    if spec.m == 2:
        return 1
    if spec.d1 == spec.d2:
        raise DegenerateSpecError(f"d1* == d2* == {spec.d1}: no case applies for m >= 3")
    return 2 if spec.d1 > spec.d2 else 3


def _require_eg(spec):
    if not isinstance(spec, EliteGrassrootsSpec):
        raise TypeError("closed forms need an EliteGrassrootsSpec")


def lambda2_closed_form(spec, phi):
    """|lambda_2(T*)| from the Elite-Grassroots formulas.

    For m >= 3 the a - e branch applies on the side of g^-1(n1/n2) where
    n1 phi(d1*) >= n2 phi(d2*) and c - d on the other side. When p < q both
    branches are negative and the same rule still picks the larger magnitude.
    """
    _require_eg(spec)
    case = _case_id(spec)
    ent = _eg_entries(spec, phi)
    ae = ent.a - ent.e
    if spec.m == 2:
        return SpectralReport(
            lambda2=ae,
            method="closed_form",
            eigenvalues=np.array([1.0, ae]),
            branch="a-e",
            case_id=1,
            alpha=phi.alpha,
        )
    cd = ent.c - ent.d
    thr = _threshold(spec, phi)
    if case == 2:
        use_ae = phi.alpha >= thr
    else:
        use_ae = phi.alpha <= thr
    lam2 = ae if use_ae else cd
    eig = np.array([1.0, ae] + [cd] * (spec.m - 2))
    eig = eig[_sort_by_magnitude(eig)]
    mult = 1 if use_ae else spec.m - 2
    if abs(abs(ae) - abs(cd)) <= MULTIPLICITY_TOL:
        mult = spec.m - 1
    return SpectralReport(
        lambda2=lam2,
        method="closed_form",
        eigenvalues=eig,
        multiplicity=mult,
        branch="a-e" if use_ae else "c-d",
        case_id=case,
        alpha=phi.alpha,
    )


@dataclass(frozen=True)
class RegimeClassification:
    """Where |lambda_2(T*)| decreases in alpha.

    ``intervals`` is a tuple of ``(lo, hi, lo_closed, hi_closed)``.
    """

    case_id: int
    alpha_threshold: float
    secondary_threshold: float
    intervals: tuple

    def contains(self, alpha):
        for lo, hi, lo_closed, hi_closed in self.intervals:
            above = alpha >= lo if lo_closed else alpha > lo
            below = alpha <= hi if hi_closed else alpha < hi
            if above and below:
                return True
        return False

    @property
    def thresholds(self):
        return tuple(sorted({self.alpha_threshold, self.secondary_threshold}))

    def distance_to_threshold(self, alpha):
        return min(abs(alpha - t) for t in self.thresholds)

    def describe(self):
        """Interval notation, e.g. ``(-inf, -6.2319] U [2.2512, inf)``."""
        parts = []
        for lo, hi, lo_closed, hi_closed in self.intervals:
            parts.append(f"{'[' if lo_closed else '('}{lo:.6g}, {hi:.6g}{']' if hi_closed else ')'}")
        return " U ".join(parts)


def classify_regime(spec, phi):
    """Decreasing set of |lambda_2(T*)| in alpha, case by case.

    Case 1 (m = 2): [t1, inf); case 2 (m >= 3, d1* > d2*): (-inf, t1] and
    [t2, inf); case 3 (m >= 3, d1* < d2*): (t2, t1], where t1 = g^-1(n1/n2)
    and t2 = g^-1(n1/n2 * sqrt(p / ((m-1)(p + (m-2) q)))).
    """
    _require_eg(spec)
    case = _case_id(spec)
    n1, n2, m, p, q = spec.n1, spec.n2, spec.m, spec.p, spec.q
    t1 = _threshold(spec, phi)
    ratio = n1 / n2 * math.sqrt(p / ((m - 1) * (p + (m - 2) * q)))
    t2 = g_inverse(phi, ratio, spec.d1, spec.d2) if spec.d1 != spec.d2 else t1
    inf = math.inf
    if case == 1:
        intervals = ((t1, inf, True, False),)
    elif case == 2:
        intervals = ((-inf, t1, False, True), (t2, inf, True, False))
    else:
        intervals = ((t2, t1, False, True),)
    return RegimeClassification(case, t1, t2, intervals)


@dataclass(frozen=True, eq=False)
class WorstBeliefs:
    """Slowest-converging initial beliefs for T*.

    ``vector`` is a unit-norm eigenvector for ``eigenvalue``. In the
    degenerate (c - d) branch it is one representative of an eigenspace:
    ``constraints`` lists the vectors it is orthogonal to after the change
    of metric by ``sqrt(metric)``.
    """

    vector: np.ndarray
    eigenvalue: float
    branch: str
    degenerate: bool
    metric: np.ndarray
    block_values: Optional[np.ndarray] = None
    constraints: tuple = ()
    block_residual: float = 0.0


def _group_metric(spec, phi):
    sizes = np.asarray(spec.group_sizes, dtype=float)
    w = phi(np.array([spec.d1] + [spec.d2] * (spec.m - 1)))
    d1 = spec.link_probs @ (sizes * w)
    return d1 * w


def worst_initial_beliefs(spec, phi, branch=None):
    """Second eigenvector of T* in block form, or a representative of its eigenspace.

    ``branch`` forces ``'a-e'`` (elite vs grassroots split) or ``'c-d'``
    (dissent among the m - 1 equal-sized groups); by default the branch
    carrying |lambda_2| is used.
    """
    _require_eg(spec)
    m, n1, n2 = spec.m, spec.n1, spec.n2
    closed = lambda2_closed_form(spec, phi)
    if branch is None:
        branch = closed.branch
    if branch not in ("a-e", "c-d"):
        raise ValueError(f"branch must be 'a-e' or 'c-d', got {branch!r}")
    if branch == "c-d" and m == 2:
        raise ValueError("m = 2 has no c - d eigenspace: multi-group dissent needs m >= 3")
    ent = _eg_entries(spec, phi)
    labels = spec.labels()
    metric = _group_metric(spec, phi)[labels]
    degenerate = m >= 3 and abs(abs(ent.a - ent.e) - abs(ent.c - ent.d)) <= MULTIPLICITY_TOL

    # Block vector for a - e: v1 = -(m-1) b / e * v2 from the first row of F.
    b, e = ent.b, ent.e
    k = m - 1
    v21 = -k * b / (e * k * n2 + n1 * k**2 * b**2 / e)
    v22 = 1.0 / (k * n2 + n1 * k**2 * b**2 / e**2)
    ae_block = np.array([v21] + [v22] * k)

    if branch == "a-e":
        F = reduce_block_matrix(spec, phi).matrix
        lam = ent.a - ent.e
        resid = float(np.linalg.norm(F @ ae_block - lam * ae_block) / np.linalg.norm(ae_block))
        v = ae_block[labels]
        v = v / np.linalg.norm(v)
        return WorstBeliefs(
            vector=v,
            eigenvalue=lam,
            branch="a-e",
            degenerate=degenerate,
            metric=metric,
            block_values=ae_block / np.linalg.norm(ae_block[labels]),
            block_residual=resid,
        )

    M = np.sqrt(metric)
    rep = (labels == 1).astype(float) - (labels == 2).astype(float)
    u = M * rep
    basis = []
    for c in (ae_block[labels], np.ones_like(rep)):
        t = M * c
        for q in basis:
            t = t - (q @ t) * q
        basis.append(t / np.linalg.norm(t))
    for q in basis:
        u = u - (q @ u) * q
    v = u / M
    v /= np.linalg.norm(v)
    return WorstBeliefs(
        vector=v,
        eigenvalue=ent.c - ent.d,
        branch="c-d",
        degenerate=True,
        metric=metric,
        constraints=(ae_block[labels], np.ones_like(rep)),
    )
