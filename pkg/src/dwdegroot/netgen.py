"""Stochastic block model networks: specs, samples, expectations, perturbations.

Graphs are dense symmetric ``float64`` matrices. A realized draw has entries
in {0, 1}; the expected adjacency holds the linking probabilities; a
perturbed graph mixes either of them with symmetric noise on [0, 1].
"""

import io
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._rng import make_rng

__all__ = [
    "BlockModelSpec",
    "EliteGrassrootsSpec",
    "Graph",
    "PerturbationSpec",
    "AssumptionReport",
    "elite_grassroots_spec",
    "sample_adjacency",
    "expected_adjacency",
    "perturb",
    "degrees",
    "check_assumptions",
    "write_graph",
    "read_graph",
]

GRAPH_KINDS = ("realized", "expected", "perturbed")


class SpecError(ValueError):
    """Invalid block model or perturbation parameters."""


@dataclass(frozen=True, eq=False)
class BlockModelSpec:
    """Generative stochastic block model: group sizes and linking matrix."""

    group_sizes: tuple
    link_probs: np.ndarray

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.group_sizes)
        if any(s != g for s, g in zip(sizes, self.group_sizes)):
            raise SpecError("group sizes must be integers")
        if len(sizes) < 1 or any(s < 1 for s in sizes):
            raise SpecError(f"every group needs at least one vertex, got {sizes}")
        P = np.array(self.link_probs, dtype=float)
        if P.shape != (len(sizes), len(sizes)):
            raise SpecError(f"link_probs must be {len(sizes)}x{len(sizes)}, got {P.shape}")
        if not np.all(np.isfinite(P)) or P.min() < 0.0 or P.max() > 1.0:
            raise SpecError("linking probabilities must lie in [0, 1]")
        if not np.array_equal(P, P.T):
            raise SpecError("link_probs must be symmetric")
        P.setflags(write=False)
        object.__setattr__(self, "group_sizes", sizes)
        object.__setattr__(self, "link_probs", P)

    @property
    def m(self):
        return len(self.group_sizes)

    @property
    def n(self):
        return sum(self.group_sizes)

    def labels(self):
        """Group label of every vertex, groups laid out contiguously."""
        return np.repeat(np.arange(self.m), self.group_sizes)

    def perturbed(self, delta, noise_mean=0.5):
        """Spec whose linking matrix is the expectation of the perturbed graph."""
        _check_delta(delta)
        P = (1.0 - delta) * self.link_probs + delta * noise_mean
        return BlockModelSpec(self.group_sizes, P)

    def __repr__(self):
        return f"BlockModelSpec(group_sizes={self.group_sizes}, link_probs={self.link_probs.tolist()})"


@dataclass(frozen=True)
class EliteGrassrootsSpec:
    """One group of ``n1`` vertices and ``m - 1`` groups of ``n2`` vertices.

    Within-group links have probability ``p`` and between-group links ``q``.
    ``d1`` and ``d2`` are the expected degrees of the first group and of the
    remaining groups; ``elite`` is 1 when the first group has the larger one.
    """

    n1: int
    n2: int
    m: int
    p: float
    q: float
    block: BlockModelSpec = field(init=False, repr=False, compare=False)
    d1: float = field(init=False, compare=False)
    d2: float = field(init=False, compare=False)

    def __post_init__(self):
        for name in ("n1", "n2", "m"):
            value = getattr(self, name)
            if int(value) != value:
                raise SpecError(f"{name} must be an integer, got {value!r}")
            object.__setattr__(self, name, int(value))
        if self.m < 2:
            raise SpecError(f"m must be at least 2, got {self.m}")
        if self.n1 < 1 or self.n2 < 1:
            raise SpecError("group sizes must be positive")
        if self.n1 == self.n2:
            raise SpecError(f"n1 == n2 == {self.n1}: the two group sizes must differ")
        for name in ("p", "q"):
            value = float(getattr(self, name))
            if not (0.0 < value <= 1.0):
                raise SpecError(f"{name} must lie in (0, 1], got {value}")
            object.__setattr__(self, name, value)
        P = np.full((self.m, self.m), self.q)
        np.fill_diagonal(P, self.p)
        block = BlockModelSpec((self.n1,) + (self.n2,) * (self.m - 1), P)
        object.__setattr__(self, "block", block)
        # Row sums of the expected adjacency, correctly rounded so that they
        # match degrees(expected_adjacency(...)) bit for bit.
        d = _group_degrees(block)
        object.__setattr__(self, "d1", d[0])
        object.__setattr__(self, "d2", d[1])

    @property
    def n(self):
        return self.n1 + (self.m - 1) * self.n2

    @property
    def group_sizes(self):
        return self.block.group_sizes

    @property
    def link_probs(self):
        return self.block.link_probs

    def labels(self):
        return self.block.labels()

    @property
    def elite(self):
        """1 if the first group is the elite, 2 if the other groups are, 0 if tied."""
        if self.d1 > self.d2:
            return 1
        if self.d1 < self.d2:
            return 2
        return 0

    def perturbed(self, delta, noise_mean=0.5):
        _check_delta(delta)
        return EliteGrassrootsSpec(
            self.n1,
            self.n2,
            self.m,
            (1.0 - delta) * self.p + delta * noise_mean,
            (1.0 - delta) * self.q + delta * noise_mean,
        )

    def scaled(self, n):
        """Same group fractions and probabilities at total size ``n``."""
        frac = self.n1 / self.n
        n1 = int(round(frac * n))
        rest = n - n1
        if rest % (self.m - 1):
            raise SpecError(f"n={n} cannot be split into groups with fraction {frac:g}")
        return EliteGrassrootsSpec(n1, rest // (self.m - 1), self.m, self.p, self.q)


def as_block_spec(spec):
    if isinstance(spec, EliteGrassrootsSpec):
        return spec.block
    if isinstance(spec, BlockModelSpec):
        return spec
    raise TypeError(f"expected a block model spec, got {type(spec).__name__}")


def _group_degrees(block):
    sizes = block.group_sizes
    out = []
    for k in range(block.m):
        row = np.repeat(block.link_probs[k], sizes)
        out.append(math.fsum(row))
    return out


def elite_grassroots_spec(n1, n2, m, p, q):
    """Build an Elite-Grassroots spec and require a strict elite/grassroots split."""
    spec = EliteGrassrootsSpec(n1, n2, m, p, q)
    if spec.elite == 0:
        raise SpecError(
            f"expected degrees coincide (d1 = d2 = {spec.d1}): no elite/grassroots distinction"
        )
    return spec


@dataclass(frozen=True, eq=False)
class Graph:
    """Symmetric weighted adjacency with group labels.

    ``kind`` is one of ``realized``, ``expected`` or ``perturbed``.
    """

    weights: np.ndarray
    group_of: np.ndarray
    kind: str = "realized"

    def __post_init__(self):
        W = np.array(self.weights, dtype=float)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ValueError(f"weights must be a square matrix, got shape {W.shape}")
        if not np.array_equal(W, W.T):
            raise ValueError("weights must be exactly symmetric")
        if not np.all(np.isfinite(W)) or (W.size and (W.min() < 0.0 or W.max() > 1.0)):
            raise ValueError("weights must lie in [0, 1]")
        if self.kind not in GRAPH_KINDS:
            raise ValueError(f"kind must be one of {GRAPH_KINDS}, got {self.kind!r}")
        if self.kind == "realized" and not np.all((W == 0.0) | (W == 1.0)):
            raise ValueError("a realized graph must have 0/1 entries")
        labels = np.asarray(self.group_of, dtype=np.int64).reshape(-1)
        if labels.shape[0] != W.shape[0]:
            raise ValueError("group_of must have one label per vertex")
        W.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "weights", W)
        object.__setattr__(self, "group_of", labels)

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def m(self):
        return int(self.group_of.max()) + 1 if self.n else 0

    @classmethod
    def from_adjacency(cls, A, group_of=None, kind=None):
        """Wrap a plain 0/1 or weighted matrix; kind is inferred when omitted."""
        A = np.asarray(A, dtype=float)
        if group_of is None:
            group_of = np.zeros(A.shape[0], dtype=np.int64)
        if kind is None:
            kind = "realized" if np.all((A == 0.0) | (A == 1.0)) else "perturbed"
        return cls(A, group_of, kind)


def sample_adjacency(spec, seed, *key, self_loops=True):
    """Draw A(P, n) with independent Bernoulli entries on and above the diagonal.

    Extra ``key`` integers (e.g. alpha and trial indices) select an
    independent stream under ``seed``. ``self_loops=False`` zeroes the
    diagonal after drawing; the random stream is the same either way.
    """
    block = as_block_spec(spec)
    rng = make_rng(seed, *key)
    labels = block.labels()
    R = block.link_probs[np.ix_(labels, labels)]
    U = rng.random(R.shape)
    upper = np.triu(U < R)
    A = (upper | upper.T).astype(float)
    if not self_loops:
        np.fill_diagonal(A, 0.0)
    return Graph(A, labels, "realized")


def expected_adjacency(spec):
    """R = E[A]: entry (i, j) is the linking probability of their groups."""
    block = as_block_spec(spec)
    labels = block.labels()
    return Graph(block.link_probs[np.ix_(labels, labels)], labels, "expected")


@dataclass(frozen=True)
class PerturbationSpec:
    """Mixing weight ``delta`` and a noise law on [0, 1].

    ``noise(rng, size)`` returns an array of draws; ``noise_mean`` is its mean,
    used for the perturbed expectation.
    """

    delta: float
    noise: Optional[Callable] = None
    seed: int = 0
    noise_mean: float = 0.5

    def __post_init__(self):
        _check_delta(self.delta)
        if not (0.0 <= self.noise_mean <= 1.0):
            raise SpecError("noise_mean must lie in [0, 1]")


def _check_delta(delta):
    if not (0.0 <= delta <= 1.0):
        raise SpecError(f"delta must lie in [0, 1], got {delta}")


def _uniform_noise(rng, size):
    return rng.random(size)


def perturb(g, pert, *key):
    """Return (1 - delta) * A + delta * eps with symmetric noise ``eps``.

    Noise is drawn on and above the diagonal and mirrored. Extra ``key``
    integers select an independent noise stream under ``pert.seed``.
    """
    if g.kind not in ("realized", "expected"):
        raise ValueError(f"can only perturb realized or expected graphs, got {g.kind!r}")
    delta = float(pert.delta)
    if delta == 0.0:
        return Graph(g.weights.copy(), g.group_of, "perturbed")
    rng = make_rng(pert.seed, *key)
    noise = pert.noise or _uniform_noise
    eps = np.asarray(noise(rng, (g.n, g.n)), dtype=float)
    if eps.shape != (g.n, g.n):
        raise ValueError(f"noise sampler returned shape {eps.shape}")
    if eps.min() < 0.0 or eps.max() > 1.0:
        raise ValueError("noise draws must lie in [0, 1]")
    eps = np.triu(eps)
    eps = eps + np.triu(eps, 1).T
    W = (1.0 - delta) * g.weights + delta * eps
    # Mixing two [0, 1] values cannot leave [0, 1] except by rounding.
    np.clip(W, 0.0, 1.0, out=W)
    return Graph(W, g.group_of, "perturbed")


def degrees(g):
    """Weighted degree d_i = sum_j w_ij of every vertex.

    Expected graphs are summed with correct rounding, so the result equals
    the derived d1/d2 of an Elite-Grassroots spec exactly.
    """
    W = g.weights
    if g.kind != "expected" or g.n == 0:
        return W.sum(axis=1)
    out = np.empty(g.n)
    for k in np.unique(g.group_of):
        rows = np.flatnonzero(g.group_of == k)
        first = math.fsum(W[rows[0]])
        if np.array_equal(W[rows], np.broadcast_to(W[rows[0]], (rows.size, g.n))):
            out[rows] = first
        else:
            out[rows] = [math.fsum(W[i]) for i in rows]
    return out


@dataclass(frozen=True)
class AssumptionReport:
    """Finite-n proxies for the density, group-size and density-ratio assumptions."""

    n: int
    tau_n: float
    density_score: float
    min_group_fraction: float
    density_ratio: float
    has_zero_probs: bool
    density_ok: bool
    no_vanishing_ok: bool
    comparable_ok: bool
    density_threshold: float = 5.0

    @property
    def verdicts(self):
        return {
            "density": self.density_ok,
            "no_vanishing_groups": self.no_vanishing_ok,
            "comparable_densities": self.comparable_ok,
        }

    def summary(self):
        lines = [
            f"n = {self.n}",
            f"tau_n = {self.tau_n:.6g}",
            f"density_score = {self.density_score:.6g} (threshold {self.density_threshold:g})",
            f"min_group_fraction = {self.min_group_fraction:.6g}",
            f"density_ratio = {self.density_ratio:.6g}"
            + (" (zero linking probabilities present)" if self.has_zero_probs else ""),
        ]
        for name, ok in self.verdicts.items():
            lines.append(f"{name}: {'pass' if ok else 'FAIL'}")
        return "\n".join(lines)


def check_assumptions(spec, density_threshold=5.0, min_fraction=0.01, max_ratio=100.0, warn=False):
    """Audit a spec against finite-n versions of the standing assumptions.

    Verdicts are reported, never enforced; ``warn=True`` additionally emits a
    ``UserWarning`` per failed verdict.
    """
    block = as_block_spec(spec)
    n = block.n
    d = _group_degrees(block)
    tau = min(d) / n
    scale = math.sqrt(math.log(n) / n) if n > 1 else float("nan")
    score = tau / scale if n > 1 else float("inf")
    frac = min(block.group_sizes) / n
    P = block.link_probs
    positive = P[P > 0]
    has_zero = bool(np.any(P == 0))
    ratio = float(P.max() / positive.min()) if positive.size else float("inf")
    report = AssumptionReport(
        n=n,
        tau_n=tau,
        density_score=score,
        min_group_fraction=frac,
        density_ratio=ratio,
        has_zero_probs=has_zero,
        density_ok=bool(score >= density_threshold),
        no_vanishing_ok=bool(frac >= min_fraction),
        comparable_ok=bool(not has_zero and ratio <= max_ratio),
        density_threshold=density_threshold,
    )
    if warn:
        for name, ok in report.verdicts.items():
            if not ok:
                warnings.warn(f"assumption '{name}' fails for {spec!r}", stacklevel=2)
    return report


def write_graph(g, f):
    """Serialize ``g`` as text: header ``n m kind``, labels, then the rows."""
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f, "w") as fh:
            return write_graph(g, fh)
    f.write(f"{g.n} {g.m} {g.kind}\n")
    f.write(" ".join(str(int(k)) for k in g.group_of) + "\n")
    if g.kind == "realized":
        fmt = lambda x: "1" if x else "0"  # noqa: E731
    else:
        fmt = repr
    for row in g.weights:
        f.write(" ".join(fmt(float(x)) for x in row) + "\n")


def read_graph(f):
    if isinstance(f, (str, bytes)) or hasattr(f, "__fspath__"):
        with open(f) as fh:
            return read_graph(fh)
    header = f.readline().split()
    if len(header) != 3:
        raise ValueError(f"bad graph header: {' '.join(header)!r}")
    n, m, kind = int(header[0]), int(header[1]), header[2]
    labels = np.array(f.readline().split(), dtype=np.int64)
    W = np.loadtxt(io.StringIO(f.read()), dtype=float, ndmin=2) if n else np.zeros((0, 0))
    if W.shape != (n, n) or labels.shape != (n,):
        raise ValueError(f"graph body does not match header n={n}")
    g = Graph(W, labels, kind)
    if n and g.m != m:
        raise ValueError(f"header declares {m} groups, labels have {g.m}")
    return g
