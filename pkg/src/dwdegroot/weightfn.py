"""Degree-dependence functions phi(alpha, d) and the weight ratio g.

The canonical family is the power law ``phi(alpha, d) = d**alpha``. Custom
families are registered programmatically by passing a vectorized callable
``func(alpha, d)``.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

__all__ = [
    "WeightFunction",
    "PropertyReport",
    "power",
    "custom",
    "evaluate",
    "validate_properties",
    "g",
    "g_inverse",
]

FAMILIES = ("power", "custom")


class WeightDomainError(ValueError):
    """phi evaluated outside its domain (zero degree with negative alpha)."""


class NoSolutionError(ValueError):
    pass


@dataclass(frozen=True)
class WeightFunction:
    family: str = "power"
    alpha: float = 0.0
    func: Optional[Callable] = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; choose from {FAMILIES}")
        if self.family == "custom" and self.func is None:
            raise ValueError("a custom family needs an evaluator func(alpha, d)")
        object.__setattr__(self, "alpha", float(self.alpha))
        if not self.name:
            label = "d**alpha" if self.family == "power" else getattr(self.func, "__name__", "custom")
            object.__setattr__(self, "name", label)

    def with_alpha(self, alpha):
        return replace(self, alpha=float(alpha))

    def raw(self, alpha, d):
        """phi(alpha, d) for arbitrary alpha, broadcasting over arrays."""
        d = np.asarray(d, dtype=float)
        if self.family == "power":
            if alpha == 0.0:
                # phi(0, d) == 1 on [0, inf), including 0**0.
                return np.ones_like(d)
            if alpha < 0.0 and np.any(d == 0.0):
                bad = np.flatnonzero(np.atleast_1d(d) == 0.0)
                raise WeightDomainError(
                    f"phi(alpha={alpha:g}, d=0) is undefined; zero degree at index {bad.tolist()[:10]}"
                )
            return np.power(d, alpha)
        return np.asarray(self.func(alpha, d), dtype=float)

    def __call__(self, d):
        return self.raw(self.alpha, d)


def power(alpha=0.0):
    return WeightFunction("power", alpha)


def custom(func, alpha=0.0, name=""):
    return WeightFunction("custom", alpha, func, name)


def evaluate(phi, d):
    """phi(alpha, d) at the function's own alpha."""
    if np.any(np.asarray(d) < 0):
        raise WeightDomainError("degrees must be nonnegative")
    return phi(d)


@dataclass(frozen=True)
class PropertyReport:
    """Grid-based check of the three structural properties of phi.

    Each ``*_worst`` entry is ``(alpha, d, magnitude)`` of the largest
    violation, or ``None`` when the property holds on the grid. Passing is
    evidence only: asymptotic conditions cannot be proved on a finite grid.
    """

    alpha_grid: np.ndarray
    d_grid: np.ndarray
    property1: bool
    property2: bool
    property3: bool
    property1_worst: Optional[tuple] = None
    property2_worst: Optional[tuple] = None
    property3_worst: Optional[tuple] = None

    @property
    def all_pass(self):
        return self.property1 and self.property2 and self.property3


def _step(x, rel=1e-5):
    return rel * np.maximum(np.abs(x), 1.0)


def _worst(current, candidate):
    if candidate is None:
        return current
    if current is None or candidate[2] > current[2]:
        return candidate
    return current


def validate_properties(phi, alpha_grid, d_grid, rel_step=1e-5, bound_factor=10.0):
    """Check the properties of ``phi`` with central differences on grids.

    Property 1: phi(0, d) = 1, phi >= 0, phi nondecreasing in alpha, and in d
    nondecreasing for alpha > 0, nonincreasing for alpha < 0.
    Property 2: phi(alpha, d2) / phi(alpha, d1) strictly decreasing in alpha
    for d1 > d2.
    Property 3: the quotients d phi_d / phi and d phi_dd / phi_d stay within
    ``bound_factor`` times their magnitude at the median degree.
    """
    A = np.asarray(alpha_grid, dtype=float)
    D = np.asarray(d_grid, dtype=float)
    if A.ndim != 1 or D.ndim != 1 or A.size < 1 or D.size < 2:
        raise ValueError("grids must be one-dimensional and nonempty")
    if np.any(np.diff(A) <= 0) or np.any(np.diff(D) <= 0):
        raise ValueError("grids must be strictly increasing")
    if D[0] <= 0:
        raise ValueError("d_grid must be positive")
    # Overflow and underflow show up as non-finite quotients in the report.
    with np.errstate(all="ignore"):
        return _validate(phi.raw, A, D, rel_step, bound_factor)


def _validate(f, A, D, rel_step, bound_factor):

    # Property 1
    worst1 = None
    dev = np.abs(f(0.0, D) - 1.0)
    if dev.max() > 1e-12:
        i = int(dev.argmax())
        worst1 = (0.0, float(D[i]), float(dev[i]))
    hd = rel_step * D
    for a in A:
        vals = f(a, D)
        if np.any(vals < 0):
            i = int(vals.argmin())
            worst1 = _worst(worst1, (float(a), float(D[i]), float(-vals[i])))
        ha = float(_step(a, rel_step))
        up, down = f(a + ha, D), f(a - ha, D)
        drop = (down - up) / np.maximum(np.abs(vals), 1e-300)
        i = int(drop.argmax())
        if drop[i] > 1e-12:
            worst1 = _worst(worst1, (float(a), float(D[i]), float(drop[i])))
        if a != 0.0:
            up, down = f(a, D + hd), f(a, D - hd)
            slope = (up - down) * np.sign(a) / np.maximum(np.abs(vals), 1e-300)
            i = int(slope.argmin())
            if slope[i] < -1e-12:
                worst1 = _worst(worst1, (float(a), float(D[i]), float(-slope[i])))

    # Property 2: pairs (d1 > d2) from an evenly thinned subset of the grid.
    worst2 = None
    sub = D[np.unique(np.linspace(0, D.size - 1, min(D.size, 12)).round().astype(int))]
    small, large = np.triu_indices(sub.size, 1)
    d1, d2 = sub[large], sub[small]
    for a in A:
        ha = float(_step(a, rel_step))
        r_up = f(a + ha, d2) / f(a + ha, d1)
        r_down = f(a - ha, d2) / f(a - ha, d1)
        rise = (r_up - r_down) / np.maximum(np.abs(r_down), 1e-300)
        i = int(rise.argmax())
        if not rise[i] < 0:
            worst2 = _worst(worst2, (float(a), float(d2[i]), float(rise[i])))

    # Property 3
    worst3 = None
    med = float(np.median(D))
    for a in A:
        q1, q2 = _property3_quotients(f, a, D, rel_step)
        m1, m2 = _property3_quotients(f, a, np.array([med]), rel_step)
        for q, ref in ((q1, m1[0]), (q2, m2[0])):
            limit = bound_factor * abs(ref) + 1e-4
            excess = np.abs(q) - limit
            i = int(np.nanargmax(excess)) if np.any(np.isfinite(excess)) else 0
            if np.isfinite(excess[i]) and excess[i] > 0:
                worst3 = _worst(worst3, (float(a), float(D[i]), float(abs(q[i]) / max(abs(ref), 1e-300))))
            elif not np.all(np.isfinite(q)):
                j = int(np.flatnonzero(~np.isfinite(q))[0])
                worst3 = _worst(worst3, (float(a), float(D[j]), float("inf")))

    return PropertyReport(
        alpha_grid=A,
        d_grid=D,
        property1=worst1 is None,
        property2=worst2 is None,
        property3=worst3 is None,
        property1_worst=worst1,
        property2_worst=worst2,
        property3_worst=worst3,
    )


def _property3_quotients(f, a, D, rel_step):
    h = rel_step * D
    mid = f(a, D)
    up, down = f(a, D + h), f(a, D - h)
    d1 = (up - down) / (2 * h)
    d2 = (up - 2 * mid + down) / (h * h)
    q1 = D * d1 / mid
    q2 = D * d2 / d1
    # A flat phi has no meaningful second quotient; treat it as zero.
    flat = np.abs(q1) < 1e-8
    q2 = np.where(flat, 0.0, q2)
    return q1, q2


def _check_degrees(d1, d2):
    if d1 <= 0 or d2 <= 0:
        raise ValueError(f"degrees must be positive, got d1={d1}, d2={d2}")
    if d1 == d2:
        raise ValueError(f"d1 == d2 == {d1}: g is identically 1 and not invertible")


def g(phi, alpha, d1, d2):
    """Weight ratio phi(alpha, d2) / phi(alpha, d1)."""
    _check_degrees(d1, d2)
    return float(phi.raw(alpha, d2) / phi.raw(alpha, d1))


def g_inverse(phi, x, d1, d2, rtol=1e-12, max_alpha=1e6):
    """The alpha with g(alpha) = x.

    Closed form for the power family; otherwise bisection on log g with a
    bracket doubled outward from [-1, 1].
    """
    _check_degrees(d1, d2)
    if not x > 0:
        raise ValueError(f"g takes positive values only, got x={x}")
    if x == 1.0:
        return 0.0
    if phi.family == "power":
        return math.log(x) / math.log(d2 / d1)

    target = math.log(x)

    def h(a):
        return math.log(g(phi, a, d1, d2)) - target

    lo, hi = -1.0, 1.0
    increasing = h(hi) > h(lo)
    while True:
        f_lo, f_hi = h(lo), h(hi)
        if (f_lo <= 0 <= f_hi) if increasing else (f_hi <= 0 <= f_lo):
            break
        if hi > max_alpha:
            raise NoSolutionError(f"no alpha with g(alpha) = {x} within |alpha| <= {max_alpha:g}")
        lo, hi = 2 * lo, 2 * hi
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f_mid = h(mid)
        if abs(f_mid) <= rtol or mid in (lo, hi):
            return mid
        if (f_mid < 0) == increasing:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
