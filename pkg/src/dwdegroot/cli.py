"""Command-line front end for the degree-weighted DeGroot experiments.

Every subcommand writes its CSV output, an optional SVG plot and a
``manifest.txt`` into the output directory. The manifest holds the fully
resolved configuration as ``key=value`` lines and can be passed back with
``--config`` to reproduce the run byte for byte.

All numbers come from the library modules; this module only parses,
validates, dispatches and writes files.
"""

import argparse
import os
import sys
from dataclasses import dataclass, field

from . import __version__, experiments, netgen, spectra, weightfn

__all__ = ["ConfigError", "RunConfig", "parse_config", "run", "main"]

SUBCOMMANDS = ("sweep", "concentration", "speedup", "perturb", "audit", "probe")

EXIT_OK = 0
EXIT_FAILURES = 1
EXIT_CONFIG = 2
EXIT_OUTPUT = 3


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


def _int(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"expected an integer, got {text!r}")
    return int(value)


def _float(text):
    return float(text)


def _bool(text):
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _grid(text):
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValueError(f"expected start:stop:step, got {text!r}")
    return tuple(float(x) for x in parts)


def _floats(text):
    return tuple(float(x) for x in str(text).split(",") if x.strip())


def _ints(text):
    return tuple(_int(x) for x in str(text).split(",") if x.strip())


def _show(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_show(v) for v in value)
    return str(value)


def _show_grid(value):
    return ":".join(repr(float(v)) for v in value)


# key -> (parser, subcommands using it, help)
_ALL = SUBCOMMANDS
KEYS = {
    "n1": (_int, _ALL, "size of the first group"),
    "n2": (_int, _ALL, "size of each of the other m - 1 groups"),
    "n": (_int, _ALL, "total size; alternative to --n2"),
    "m": (_int, _ALL, "number of groups"),
    "p": (_float, _ALL, "within-group link probability"),
    "q": (_float, _ALL, "between-group link probability"),
    "family": (str, _ALL, "weight family (only 'power' is available here)"),
    "seed": (_int, _ALL, "master seed"),
    "jobs": (_int, _ALL, "worker threads"),
    "alpha": (None, ("sweep", "perturb", "concentration", "probe"), "grid start:stop:step, or one value"),
    "alpha0": (_float, ("speedup",), "smaller alpha"),
    "alpha1": (_float, ("speedup",), "larger alpha"),
    "trials": (_int, ("sweep", "concentration", "speedup", "perturb"), "random graphs per point"),
    "delta": (_floats, ("perturb",), "comma-separated perturbation weights"),
    "noise_mean": (_float, ("perturb",), "mean of the uniform noise"),
    "n_grid": (_ints, ("concentration",), "comma-separated network sizes"),
    "t": (_ints, ("sweep", "probe"), "time step(s) for distance probes"),
    "norm": (str, ("sweep",), "d_weighted or euclidean"),
    "samples": (_int, ("probe",), "random unit probes"),
    "svg": (_bool, ("sweep", "concentration", "perturb", "probe"), "write an SVG plot"),
}

DEFAULTS = {
    "family": "power",
    "seed": 0,
    "jobs": 1,
    "trials": {"sweep": 20, "concentration": 20, "speedup": 100, "perturb": 20},
    "alpha": {"sweep": "-10:10:0.25", "perturb": "-10:10:0.25", "concentration": "1", "probe": "1"},
    "delta": "0,0.1,0.3",
    "noise_mean": 0.5,
    "n_grid": "250,500,1000,2000",
    "t": {"sweep": "", "probe": "10"},
    "norm": "d_weighted",
    "samples": 200,
    "svg": True,
}

@dataclass(frozen=True)
class RunConfig:
    subcommand: str
    values: dict = field(default_factory=dict)
    out: str = "."

    def __getattr__(self, name):
        try:
            return self.__dict__["values"][name]
        except KeyError:
            raise AttributeError(name) from None

    def spec(self):
        v = self.values
        return netgen.EliteGrassrootsSpec(v["n1"], v["n2"], v["m"], v["p"], v["q"])

    def phi(self, alpha=0.0):
        return weightfn.WeightFunction(self.values["family"], alpha)

    def manifest_lines(self):
        lines = [f"subcommand={self.subcommand}", f"version={__version__}"]
        for key in sorted(self.values):
            value = self.values[key]
            text = _show_grid(value) if key == "alpha" and isinstance(value, tuple) else _show(value)
            lines.append(f"{key}={text}")
        return lines


def read_config_file(path):
    """Flat ``key=value`` lines; ``#`` starts a comment, dashes equal underscores."""
    items = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None
    with fh:
        for number, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("config", f"{path}:{number}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            items[key.replace("-", "_")] = value
    return items


def build_parser():
    parser = argparse.ArgumentParser(prog="dwdegroot", description="Degree-weighted DeGroot experiments.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="subcommand", metavar="SUBCOMMAND")
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--out", help="output directory (DEGROOT_OUT overrides)")
        for key, (_, used_by, help_text) in KEYS.items():
            if name not in used_by:
                continue
            flag = "--" + key.replace("_", "-")
            if key == "svg":
                p.add_argument(flag, dest=key, action="store_const", const="true", default=argparse.SUPPRESS, help=help_text)
                p.add_argument("--no-svg", dest=key, action="store_const", const="false", default=argparse.SUPPRESS, help="skip the SVG plot")
            else:
                p.add_argument(flag, dest=key, default=argparse.SUPPRESS, help=help_text)
    return parser


def _default(key, subcommand):
    value = DEFAULTS.get(key)
    if isinstance(value, dict):
        return value.get(subcommand)
    return value


def _parse_alpha(text, subcommand):
    if ":" in str(text):
        if subcommand in ("concentration", "probe"):
            raise ValueError("expected a single value")
        start, stop, step = _grid(text)
        if step <= 0:
            raise ValueError("step must be positive")
        if stop < start:
            raise ValueError("stop must not be below start")
        return (start, stop, step)
    value = float(text)
    if subcommand in ("sweep", "perturb"):
        return (value, value, 1.0)
    return value


def _validate(sub, v):
    def need(key, ok, message):
        if not ok:
            raise ConfigError(key, message)

    for key in ("n1", "m", "p", "q"):
        need(key, key in v, "missing required value")
    need("n2", "n2" in v or "n" in v, "missing required value (give n2 or n)")
    need("m", v["m"] >= 2, f"must be at least 2, got {v['m']}")
    need("n1", v["n1"] >= 1, f"must be positive, got {v['n1']}")
    if "n" in v:
        rest = v["n"] - v["n1"]
        need("n", rest > 0 and rest % (v["m"] - 1) == 0, f"n - n1 = {rest} does not split into {v['m'] - 1} equal groups")
        n2 = rest // (v["m"] - 1)
        need("n", v.get("n2", n2) == n2, f"inconsistent with n2={v.get('n2')}")
        v["n2"] = n2
        del v["n"]
    need("n2", v["n2"] >= 1, f"must be positive, got {v['n2']}")
    need("n2", v["n2"] != v["n1"], "group sizes n1 and n2 must differ")
    for key in ("p", "q"):
        need(key, 0.0 < v[key] <= 1.0, f"must lie in (0, 1], got {v[key]}")
    need("family", v["family"] == "power", f"only 'power' is available from the command line, got {v['family']!r}")
    need("seed", v["seed"] >= 0, f"must be nonnegative, got {v['seed']}")
    need("jobs", v["jobs"] >= 1, f"must be at least 1, got {v['jobs']}")
    if "trials" in v:
        need("trials", v["trials"] >= (1 if sub in ("concentration", "speedup") else 0), f"out of range: {v['trials']}")
    if sub == "speedup":
        for key in ("alpha0", "alpha1"):
            need(key, key in v, "missing required value")
        need("alpha1", v["alpha0"] <= v["alpha1"], f"must be at least alpha0={v['alpha0']}")
    if "delta" in v:
        need("delta", len(v["delta"]) > 0, "needs at least one value")
        need("delta", all(0.0 <= d <= 1.0 for d in v["delta"]), f"values must lie in [0, 1], got {v['delta']}")
    if "noise_mean" in v:
        need("noise_mean", 0.0 <= v["noise_mean"] <= 1.0, "must lie in [0, 1]")
    if "n_grid" in v:
        grid = v["n_grid"]
        need("n_grid", len(grid) > 0 and all(b > a for a, b in zip(grid, grid[1:])), "must be strictly increasing")
        need("n_grid", grid[0] > 1, "sizes must exceed 1")
    if "t" in v:
        need("t", all(t >= 0 for t in v["t"]), "time steps must be nonnegative")
        if sub == "probe":
            need("t", len(v["t"]) == 1, "probe takes a single time step")
    if "norm" in v:
        need("norm", v["norm"] in ("d_weighted", "euclidean"), f"must be d_weighted or euclidean, got {v['norm']!r}")
    if "samples" in v:
        need("samples", v["samples"] >= 0, "must be nonnegative")
    return v


_VALUE_FLAGS = {"--config", "--out"} | {"--" + k.replace("_", "-") for k in KEYS if k != "svg"}


def _attach_values(argv):
    # argparse reads "--alpha -10:10:0.25" as two flags; glue values on.
    out, i = [], 0
    while i < len(argv):
        token = argv[i]
        if token in _VALUE_FLAGS and i + 1 < len(argv):
            out.append(f"{token}={argv[i + 1]}")
            i += 2
        else:
            out.append(token)
            i += 1
    return out


def parse_config(argv=None, environ=None):
    """Parse argv (and an optional ``--config`` file) into a validated RunConfig.

    Raises ConfigError naming the first offending key.
    """
    environ = os.environ if environ is None else environ
    argv = _attach_values(list(sys.argv[1:] if argv is None else argv))
    parser = build_parser()
    ns = vars(parser.parse_args(argv))
    sub = ns.pop("subcommand", None)
    if sub is None:
        raise ConfigError("subcommand", f"choose one of {', '.join(SUBCOMMANDS)}")
    config_path = ns.pop("config", None)
    out_flag = ns.pop("out", None)

    raw = {}
    out = None
    if config_path:
        items = read_config_file(config_path)
        declared = items.pop("subcommand", sub)
        if declared != sub:
            raise ConfigError("subcommand", f"config is for {declared!r}, not {sub!r}")
        items.pop("version", None)
        out = items.pop("out", None)
        for key in items:
            if key not in KEYS or sub not in KEYS[key][1]:
                raise ConfigError(key, f"unknown key for {sub!r}")
        raw.update(items)
    raw.update(ns)
    out = environ.get("DEGROOT_OUT") or out_flag or out or "."

    values = {}
    for key, (parse, used_by, _) in KEYS.items():
        if sub not in used_by:
            continue
        text = raw.get(key, _default(key, sub))
        if text is None:
            continue
        try:
            if key == "alpha":
                values[key] = _parse_alpha(text, sub)
            else:
                values[key] = parse(text)
        except ValueError as exc:
            raise ConfigError(key, str(exc)) from None
    values = _validate(sub, values)
    return RunConfig(sub, values, out)


def _alphas(cfg):
    return experiments.alpha_grid(*cfg.alpha)


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def _run_sweep(cfg, out):
    spec = cfg.spec()
    sweep = experiments.SweepConfig(
        spec,
        _alphas(cfg),
        trials=cfg.trials,
        seed=cfg.seed,
        phi=cfg.phi(),
        distance_t=cfg.t,
        norm=cfg.norm,
    )
    rows = experiments.alpha_sweep(sweep, n_jobs=cfg.jobs)
    records = experiments.sweep_records(rows)
    header = experiments.SWEEP_HEADER + [f"distance_t{t}" for t in cfg.t]
    _write(os.path.join(out, "sweep.csv"), experiments.csv_text(records, header))
    if cfg.svg:
        xs = [r.alpha for r in rows]
        series = {"T* closed form": (xs, [r.lambda2_closed for r in rows])}
        if cfg.trials:
            series["T random mean"] = (xs, [r.lambda2_random_mean for r in rows])
        _write(os.path.join(out, "sweep.svg"), experiments.svg_line_plot(series, str(spec), "alpha", "|lambda_2|"))
    errors = sum(1 for r in rows if r.error)
    failed = sum(r.n_failed for r in rows)
    return {"rows": len(rows), "rows_with_errors": errors, "failed_trials": failed}


def _run_concentration(cfg, out):
    rows = experiments.concentration_study(
        cfg.spec(), cfg.n_grid, cfg.trials, cfg.seed, alpha=cfg.alpha, phi=cfg.phi(), n_jobs=cfg.jobs
    )
    _write(os.path.join(out, "concentration.csv"), experiments.csv_text(experiments.dataclass_records(rows)))
    if cfg.svg:
        ns = [r.n for r in rows]
        series = {
            "median gap": (ns, [r.median_abs_gap for r in rows]),
            "rate scale": (ns, [r.rate_scale for r in rows]),
        }
        _write(os.path.join(out, "concentration.svg"), experiments.svg_line_plot(series, "concentration", "n", "gap"))
    failed = sum(r.n_failed for r in rows)
    return {"rows": len(rows), "rows_with_errors": sum(r.median_abs_gap is None for r in rows), "failed_trials": failed}


def _run_speedup(cfg, out):
    try:
        res = experiments.speedup_detection(
            cfg.spec(), cfg.phi(), cfg.alpha0, cfg.alpha1, cfg.trials, cfg.seed, n_jobs=cfg.jobs
        )
    except experiments.RegimeError as exc:
        raise ConfigError("alpha0", str(exc)) from None
    _write(os.path.join(out, "speedup.csv"), experiments.csv_text(experiments.dataclass_records([res])))
    print(f"fraction = {res.fraction!r} ({res.successes}/{res.trials}), CI [{res.ci_low!r}, {res.ci_high!r}]")
    return {"rows": 1, "rows_with_errors": 0, "failed_trials": res.n_failed}


def _run_perturb(cfg, out):
    study = experiments.perturbation_study(
        cfg.spec(),
        cfg.phi(),
        _alphas(cfg),
        cfg.delta,
        cfg.trials,
        cfg.seed,
        noise_mean=cfg.noise_mean,
        n_jobs=cfg.jobs,
    )
    records = []
    for delta in cfg.delta:
        records.extend(experiments.sweep_records(study.rows_for(delta), delta=delta))
    _write(os.path.join(out, "perturb.csv"), experiments.csv_text(records, ["delta"] + experiments.SWEEP_HEADER))
    checks = [
        {"delta": d, "checked": c.checked, "violations": c.violations, "ok": c.ok} for d, c in study.checks.items()
    ]
    _write(os.path.join(out, "perturb_checks.csv"), experiments.csv_text(checks))
    if cfg.svg:
        series = {}
        for delta in cfg.delta:
            rows = study.rows_for(delta)
            series[f"delta={delta:g}"] = ([r.alpha for r in rows], [r.lambda2_closed for r in rows])
        _write(os.path.join(out, "perturb.svg"), experiments.svg_line_plot(series, "perturbed expectation", "alpha", "|lambda_2|"))
    rows = [r for _, r in study.rows]
    errors = sum(1 for r in rows if r.error) + sum(not c.ok for c in study.checks.values())
    return {"rows": len(rows), "rows_with_errors": errors, "failed_trials": sum(r.n_failed for r in rows)}


def _run_audit(cfg, out):
    spec = cfg.spec()
    report = netgen.check_assumptions(spec)
    lines = [str(spec), report.summary()]
    if spec.elite:
        regime = spectra.classify_regime(spec, cfg.phi())
        lines.append(f"case = {regime.case_id}")
        lines.append(f"decreasing set = {regime.describe()}")
    else:
        lines.append("expected degrees coincide: no regime classification")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    _write(os.path.join(out, "audit.txt"), text)
    return {"rows": 1, "rows_with_errors": 0, "failed_trials": 0}


def _run_probe(cfg, out):
    (t,) = cfg.t
    worst, report = experiments.worst_case_probe(cfg.spec(), cfg.phi(cfg.alpha), t, cfg.samples, cfg.seed)
    records = [{"t": s, "worst_distance": d} for s, d in enumerate(report.worst_curve)]
    _write(os.path.join(out, "probe.csv"), experiments.csv_text(records))
    summary = {
        "branch": worst.branch,
        "eigenvalue": worst.eigenvalue,
        "t": t,
        "worst_distance": report.worst_distance,
        "samples": cfg.samples,
        "rank": report.rank,
        "max_ratio": report.max_ratio,
    }
    _write(os.path.join(out, "probe_summary.csv"), experiments.csv_text([summary]))
    if cfg.svg:
        series = {"worst beliefs": (list(range(t + 1)), list(report.worst_curve))}
        _write(os.path.join(out, "probe.svg"), experiments.svg_line_plot(series, "distance to consensus", "t", "distance"))
    print(f"rank = {report.rank}, max ratio = {report.max_ratio!r}")
    return {"rows": t + 1, "rows_with_errors": int(report.rank != 1 and cfg.samples > 0), "failed_trials": 0}


RUNNERS = {
    "sweep": _run_sweep,
    "concentration": _run_concentration,
    "speedup": _run_speedup,
    "perturb": _run_perturb,
    "audit": _run_audit,
    "probe": _run_probe,
}


def run(cfg):
    """Execute a validated config; returns the process exit status."""
    out = cfg.out
    try:
        os.makedirs(out, exist_ok=True)
        _write(os.path.join(out, "manifest.txt"), "\n".join(cfg.manifest_lines()) + "\n")
    except OSError as exc:
        print(f"error: out: cannot write to {out}: {exc.strerror}", file=sys.stderr)
        return EXIT_OUTPUT
    try:
        status = RUNNERS[cfg.subcommand](cfg, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: out: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    if status["rows_with_errors"] or status["failed_trials"]:
        print(
            f"{status['rows_with_errors']} of {status['rows']} rows failed, {status['failed_trials']} failed trials",
            file=sys.stderr,
        )
        return EXIT_FAILURES
    return EXIT_OK


def main(argv=None):
    try:
        cfg = parse_config(argv)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
