"""Alpha sweeps and Monte Carlo studies over Elite-Grassroots networks.

Random trials are independent tasks keyed by integer indices under a master
seed, so results do not depend on ``n_jobs`` or on execution order.
"""

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np
from scipy import stats
from scipy.sparse import csgraph

from ._rng import make_rng
from .dynamics import ConstructionError, build_learning_matrix, matrix_power
from .netgen import PerturbationSpec, check_assumptions, expected_adjacency, perturb, sample_adjacency
from .spectra import classify_regime, eigen_symmetrized, lambda2_closed_form, worst_initial_beliefs
from .weightfn import WeightDomainError, power

log = logging.getLogger(__name__)

__all__ = [
    "SweepConfig",
    "SweepRow",
    "ConcentrationRow",
    "SpeedupResult",
    "PerturbationStudy",
    "ProbeReport",
    "MonotonicityReport",
    "alpha_sweep",
    "concentration_study",
    "speedup_detection",
    "perturbation_study",
    "slowest_convergence_probe",
    "monotonicity_check",
    "alpha_grid",
    "worst_case_probe",
    "sweep_records",
    "dataclass_records",
    "write_csv",
    "csv_text",
    "svg_line_plot",
    "RegimeError",
]


class RegimeError(ValueError):
    """Alpha values outside the decreasing set of |lambda_2(T*)|."""


def alpha_grid(start, stop, step):
    """Inclusive grid built by integer index, not by repeated addition."""
    if step <= 0:
        raise ValueError("step must be positive")
    if stop < start:
        raise ValueError("stop must not be below start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.array([start + i * step for i in range(count)])


def _pmap(fn, items, n_jobs):
    items = list(items)
    if n_jobs is None or n_jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, items))


def random_abs_lambda2(graph, phi):
    """|lambda_2(T)| of one realized (or perturbed) graph, None if unusable.

    Disconnected draws and construction failures count as failed trials.
    """
    n_comp, _ = csgraph.connected_components(graph.weights > 0, directed=False)
    if n_comp > 1:
        return None
    try:
        T = build_learning_matrix(graph, phi)
    except (ConstructionError, WeightDomainError):
        return None
    return eigen_symmetrized(T, vectors=False).abs_lambda2


@dataclass(frozen=True)
class SweepConfig:
    spec: object
    alphas: np.ndarray
    trials: int = 0
    seed: int = 0
    phi: object = field(default_factory=power)
    numeric: bool = True
    self_loops: bool = True
    distance_t: tuple = ()
    norm: str = "d_weighted"

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=float).reshape(-1)
        if a.size == 0 or np.any(np.diff(a) <= 0):
            raise ValueError("alpha grid must be nonempty and strictly increasing")
        if self.trials < 0:
            raise ValueError("trials must be nonnegative")
        object.__setattr__(self, "alphas", a)


@dataclass
class SweepRow:
    alpha: float
    case_id: int = 0
    branch: str = ""
    lambda2_closed: Optional[float] = None
    lambda2_numeric_expected: Optional[float] = None
    lambda2_random_mean: Optional[float] = None
    lambda2_random_std: Optional[float] = None
    random_gap_median: Optional[float] = None
    n_failed: int = 0
    error: str = ""
    distances: dict = field(default_factory=dict)


def _expectation_row(spec, phi, alpha, R, numeric, distance_t=(), norm="d_weighted"):
    from .dynamics import convergence_distance

    row = SweepRow(alpha=float(alpha))
    phi_a = phi.with_alpha(alpha)
    try:
        closed = lambda2_closed_form(spec, phi_a)
        row.case_id, row.branch, row.lambda2_closed = closed.case_id, closed.branch, closed.abs_lambda2
        if numeric or distance_t:
            T = build_learning_matrix(R, phi_a)
            if numeric:
                row.lambda2_numeric_expected = eigen_symmetrized(T, vectors=False).abs_lambda2
            for t in distance_t:
                row.distances[int(t)] = convergence_distance(T, int(t), norm)
    except (ValueError, ArithmeticError) as exc:
        row.error = f"{type(exc).__name__}: {exc}"
    return row


def _fill_random(row, values, reference):
    ok = [v for v in values if v is not None]
    row.n_failed += len(values) - len(ok)
    if ok:
        row.lambda2_random_mean = float(np.mean(ok))
        row.lambda2_random_std = float(np.std(ok))
        if reference is not None:
            row.random_gap_median = float(np.median(np.abs(np.asarray(ok) - reference)))


def alpha_sweep(cfg, n_jobs=1):
    """One row per alpha: closed form, dense expectation and random-graph |lambda_2|.

    Trial t at alpha index i draws its graph from key (i, t) under ``cfg.seed``.
    """
    spec, phi = cfg.spec, cfg.phi
    R = expected_adjacency(spec)
    rows = _pmap(
        lambda a: _expectation_row(spec, phi, a, R, cfg.numeric, cfg.distance_t, cfg.norm),
        cfg.alphas,
        n_jobs,
    )
    if cfg.trials:
        tasks = [(i, t) for i in range(len(rows)) for t in range(cfg.trials)]

        def trial(task):
            i, t = task
            graph = sample_adjacency(spec, cfg.seed, i, t, self_loops=cfg.self_loops)
            return random_abs_lambda2(graph, phi.with_alpha(cfg.alphas[i]))

        values = _pmap(trial, tasks, n_jobs)
        for i, row in enumerate(rows):
            _fill_random(row, values[i * cfg.trials : (i + 1) * cfg.trials], row.lambda2_closed)
    return rows


@dataclass
class ConcentrationRow:
    n: int
    trials: int
    median_abs_gap: Optional[float]
    rate_scale: float
    ratio: Optional[float]
    lambda2_expected: float
    n_failed: int = 0


def concentration_study(base, n_grid, trials, seed, alpha=1.0, phi=None, self_loops=True, n_jobs=1):
    """Median over trials of | |lambda_2(T)| - |lambda_2(T*)| | as n grows.

    ``base`` is rescaled to each n keeping group fractions, p and q fixed.
    The ratio divides the median gap by sqrt(log n) / (tau_n sqrt(n)).
    """
    grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("n_grid must be strictly increasing")
    if trials < 1:
        raise ValueError("trials must be positive")
    phi = (phi or power()).with_alpha(alpha)
    rows = []
    for k, n in enumerate(grid):
        spec = base.scaled(n)
        expected = lambda2_closed_form(spec, phi).abs_lambda2
        values = _pmap(
            lambda t: random_abs_lambda2(sample_adjacency(spec, seed, k, t, self_loops=self_loops), phi),
            range(trials),
            n_jobs,
        )
        ok = np.array([v for v in values if v is not None])
        tau = check_assumptions(spec).tau_n
        scale = math.sqrt(math.log(n)) / (tau * math.sqrt(n))
        med = float(np.median(np.abs(ok - expected))) if ok.size else None
        rows.append(
            ConcentrationRow(
                n=n,
                trials=trials,
                median_abs_gap=med,
                rate_scale=scale,
                ratio=None if med is None else med / scale,
                lambda2_expected=expected,
                n_failed=int(trials - ok.size),
            )
        )
    return rows


@dataclass(frozen=True)
class SpeedupResult:
    fraction: float
    successes: int
    trials: int
    n_failed: int
    ci_low: float
    ci_high: float
    alpha0: float
    alpha1: float
    expected_gap: float


def speedup_detection(spec, phi, alpha0, alpha1, trials, seed, self_loops=True, confidence=0.95, n_jobs=1):
    """Share of graphs on which |lambda_2(T(alpha0))| > |lambda_2(T(alpha1))|.

    Both alphas are evaluated on the same realized graph per trial; the
    interval is a Wilson score interval.
    """
    if alpha0 > alpha1:
        raise ValueError(f"alpha0={alpha0} must not exceed alpha1={alpha1}")
    regime = classify_regime(spec, phi)
    for a in (alpha0, alpha1):
        if not regime.contains(a):
            raise RegimeError(
                f"alpha={a} is outside the decreasing set {regime.intervals} (case {regime.case_id})"
            )
    phi0, phi1 = phi.with_alpha(alpha0), phi.with_alpha(alpha1)

    def trial(t):
        graph = sample_adjacency(spec, seed, t, self_loops=self_loops)
        l0 = random_abs_lambda2(graph, phi0)
        l1 = random_abs_lambda2(graph, phi1)
        if l0 is None or l1 is None:
            return None
        return l0 - l1 > 0

    outcomes = _pmap(trial, range(trials), n_jobs)
    valid = [o for o in outcomes if o is not None]
    k = int(sum(valid))
    n_valid = len(valid)
    if n_valid:
        ci = stats.binomtest(k, n_valid).proportion_ci(confidence_level=confidence, method="wilson")
        lo, hi = float(ci.low), float(ci.high)
    else:
        lo, hi = 0.0, 1.0
    gap = lambda2_closed_form(spec, phi0).abs_lambda2 - lambda2_closed_form(spec, phi1).abs_lambda2
    return SpeedupResult(
        fraction=k / n_valid if n_valid else float("nan"),
        successes=k,
        trials=n_valid,
        n_failed=trials - n_valid,
        ci_low=lo,
        ci_high=hi,
        alpha0=float(alpha0),
        alpha1=float(alpha1),
        expected_gap=gap,
    )


@dataclass(frozen=True)
class MonotonicityReport:
    checked: int
    violations: int
    worst: Optional[tuple] = None

    @property
    def ok(self):
        return self.violations == 0


def monotonicity_check(spec, phi, alphas, step=1e-4, exclude=1e-3, numeric=False, tol=1e-12):
    """Finite-difference sign of |lambda_2(T*)| against the decreasing set.

    Inside the set the central difference must be <= tol, outside >= -tol.
    Points within ``exclude`` of a threshold are skipped. ``numeric=True``
    differentiates the dense spectrum of T* instead of the closed form.
    """
    regime = classify_regime(spec, phi)
    R = expected_adjacency(spec) if numeric else None

    def lam(a):
        phi_a = phi.with_alpha(a)
        if numeric:
            return eigen_symmetrized(build_learning_matrix(R, phi_a), vectors=False).abs_lambda2
        return lambda2_closed_form(spec, phi_a).abs_lambda2

    checked = violations = 0
    worst = None
    for a in np.asarray(alphas, dtype=float):
        if regime.distance_to_threshold(a) <= exclude:
            continue
        slope = (lam(a + step) - lam(a - step)) / (2 * step)
        bad = slope > tol if regime.contains(a) else slope < -tol
        checked += 1
        if bad:
            violations += 1
            if worst is None or abs(slope) > abs(worst[1]):
                worst = (float(a), float(slope))
    return MonotonicityReport(checked, violations, worst)


@dataclass
class PerturbationStudy:
    rows: list
    checks: dict

    def rows_for(self, delta):
        return [r for d, r in self.rows if d == delta]


def perturbation_study(
    spec,
    phi,
    alpha_grid,
    delta_grid,
    trials,
    seed,
    noise=None,
    noise_mean=0.5,
    numeric=True,
    self_loops=True,
    n_jobs=1,
):
    """Repeat the alpha sweep on perturbed graphs and their expectation.

    The random graph for (alpha index i, trial t) is the same draw as in
    :func:`alpha_sweep`; its noise comes from key (delta index, i, t) under
    ``seed + 1``. Per delta the monotonicity check is re-run on the
    perturbed expectation, whose thresholds come from its own degrees.
    """
    alphas = np.asarray(alpha_grid, dtype=float)
    deltas = [float(d) for d in delta_grid]
    for d in deltas:
        if not 0.0 <= d <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {d}")
    rows, checks = [], {}
    for k, delta in enumerate(deltas):
        pspec = spec.perturbed(delta, noise_mean)
        R = expected_adjacency(pspec)
        block = _pmap(lambda a: _expectation_row(pspec, phi, a, R, numeric), alphas, n_jobs)
        if trials:
            pert = PerturbationSpec(delta, noise=noise, seed=seed + 1, noise_mean=noise_mean)
            tasks = [(i, t) for i in range(len(alphas)) for t in range(trials)]

            def trial(task):
                i, t = task
                graph = sample_adjacency(spec, seed, i, t, self_loops=self_loops)
                graph = perturb(graph, pert, k, i, t)
                return random_abs_lambda2(graph, phi.with_alpha(alphas[i]))

            values = _pmap(trial, tasks, n_jobs)
            for i, row in enumerate(block):
                _fill_random(row, values[i * trials : (i + 1) * trials], row.lambda2_closed)
        rows.extend((delta, r) for r in block)
        checks[delta] = monotonicity_check(pspec, phi, alphas)
    return PerturbationStudy(rows, checks)


@dataclass
class ProbeReport:
    t: int
    worst_distance: float
    sample_distances: np.ndarray
    rank: int
    max_ratio: Optional[float]
    worst_curve: np.ndarray


def slowest_convergence_probe(T, worst, samples, t, seed, rtol=1e-9):
    """Compare the decay of ``worst`` with random initial beliefs.

    Distances ||(T**s - T_inf) b|| / ||b|| are measured in the (D1 D2)
    weighted norm. ``rank`` is 1 plus the number of random probes that end
    up strictly farther from consensus than ``worst`` at time ``t``.
    """
    from .dynamics import _stationary

    b = worst.values if hasattr(worst, "values") else np.asarray(worst, dtype=float)
    if abs(np.linalg.norm(b) - 1.0) > 1e-12:
        raise ValueError("worst-case probe must have unit Euclidean norm")
    m = np.sqrt(T.metric)
    Tinf = _stationary(T).limit_matrix()

    def wnorm(x):
        return np.linalg.norm(m[:, None] * x if x.ndim == 2 else m * x, axis=0)

    curve = np.array([wnorm((matrix_power(T, s) - Tinf) @ b) / wnorm(b) for s in range(t + 1)])
    if samples:
        rng = make_rng(seed)
        X = rng.standard_normal((T.n, samples))
        X /= wnorm(X)[None, :]
        dist = wnorm((matrix_power(T, t) - Tinf) @ X)
    else:
        dist = np.zeros(0)
    w = curve[-1]
    rank = 1 + int(np.sum(dist > w * (1 + rtol) + 1e-300))
    return ProbeReport(
        t=t,
        worst_distance=float(w),
        sample_distances=dist,
        rank=rank,
        max_ratio=float(dist.max() / w) if samples and w > 0 else None,
        worst_curve=curve,
    )


def worst_case_probe(spec, phi, t, samples, seed, branch=None):
    """Run :func:`slowest_convergence_probe` on T* from its worst initial beliefs."""
    T = build_learning_matrix(expected_adjacency(spec), phi)
    worst = worst_initial_beliefs(spec, phi, branch)
    return worst, slowest_convergence_probe(T, worst.vector, samples, t, seed)


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


SWEEP_HEADER = [
    "alpha",
    "case_id",
    "branch",
    "lambda2_closed",
    "lambda2_numeric",
    "abs_gap",
    "lambda2_random_mean",
    "lambda2_random_std",
    "random_gap_median",
    "n_failed",
    "error",
]


def sweep_records(rows, delta=None):
    out = []
    for r in rows:
        gap = None
        if r.lambda2_closed is not None and r.lambda2_numeric_expected is not None:
            gap = abs(r.lambda2_closed - r.lambda2_numeric_expected)
        rec = {
            "alpha": r.alpha,
            "case_id": r.case_id,
            "branch": r.branch,
            "lambda2_closed": r.lambda2_closed,
            "lambda2_numeric": r.lambda2_numeric_expected,
            "abs_gap": gap,
            "lambda2_random_mean": r.lambda2_random_mean,
            "lambda2_random_std": r.lambda2_random_std,
            "random_gap_median": r.random_gap_median,
            "n_failed": r.n_failed,
            "error": r.error,
        }
        for t, v in sorted(r.distances.items()):
            rec[f"distance_t{t}"] = v
        if delta is not None:
            rec = {"delta": delta, **rec}
        out.append(rec)
    return out


def dataclass_records(rows):
    return [{f.name: getattr(r, f.name) for f in fields(r)} for r in rows]


def write_csv(records, f, header=None):
    """Write dict records as comma-separated text with a header line.

    Floats use ``repr`` so output is byte-identical for identical inputs.
    """
    if isinstance(f, str) or hasattr(f, "__fspath__"):
        with open(f, "w", newline="") as fh:
            return write_csv(records, fh, header)
    if header is None:
        header = []
        for rec in records:
            header.extend(k for k in rec if k not in header)
    writer = csv.writer(f, lineterminator="\n")
    writer.writerow(header)
    for rec in records:
        writer.writerow([_fmt(rec.get(k)) for k in header])


def csv_text(records, header=None):
    buf = io.StringIO()
    write_csv(records, buf, header)
    return buf.getvalue()


def svg_line_plot(series, title="", xlabel="", ylabel="", width=640, height=400):
    """Minimal SVG line chart: one polyline per series plus axes and labels.

    ``series`` maps a label to ``(x, y)`` sequences; missing y values
    (None/NaN) break the line.
    """
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
    left, right, top, bottom = 70, 20, 40, 50
    pts = [
        (float(x), float(y))
        for xs, ys in series.values()
        for x, y in zip(xs, ys)
        if y is not None and np.isfinite(y)
    ]
    if not pts:
        raise ValueError("nothing to plot")
    xs_all, ys_all = zip(*pts)
    x0, x1 = min(xs_all), max(xs_all)
    y0, y1 = min(0.0, min(ys_all)), max(ys_all)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.2f}" y="{top + ph + 16}" text-anchor="middle">{xv:.3g}</text>')
        out.append(f'<text x="{left - 6}" y="{sy(yv) + 4:.2f}" text-anchor="end">{yv:.3g}</text>')
    for k, (label, (xs, ys)) in enumerate(series.items()):
        color = colors[k % len(colors)]
        segment = []
        for x, y in list(zip(xs, ys)) + [(None, None)]:
            if y is None or not np.isfinite(y):
                if len(segment) > 1:
                    out.append(
                        f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{" ".join(segment)}"/>'
                    )
                segment = []
                continue
            segment.append(f"{sx(float(x)):.2f},{sy(float(y)):.2f}")
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 * (k + 1)}" text-anchor="end" fill="{color}">{_xml(label)}</text>')
    out.append(f'<text x="{width / 2}" y="{top / 2 + 4}" text-anchor="middle" font-size="14">{_xml(title)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 10}" text-anchor="middle">{_xml(xlabel)}</text>')
    out.append(
        f'<text x="16" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 16 {top + ph / 2})">{_xml(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _xml(s):
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
