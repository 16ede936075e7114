"""Config-driven experiment runner and the ``varmcf-run`` command.

Experiments are described by INI files with an ``[experiment]`` section
naming the kind and kind-specific sections for parameters. Each run
writes three files into the output directory: ``results.csv`` (17
significant digits), ``summary.txt``, and ``manifest.json`` recording the
config digest, package version, seed, and resolved parameters, with no
timestamps so reruns are byte-identical.

Exit codes: 0 success, 2 invalid configuration, 3 mesh-kernel hypothesis
violation, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .brakke import (
    ConstantsLedger,
    GammaHypothesisError,
    RadialBump,
    brakke_residual,
    measure_curvature_consistency,
)
from .curvature import (
    CurvatureQuery,
    DenominatorTooSmall,
    approx_mean_curvature,
)
from .discretization import Mesh, discretize
from .flow import ShrinkingCircle, ShrinkingSphere
from .geometry import make_shape
from .kernels import make_kernel_pair
from .metrics import ahlfors_scan, atomize, bounded_lipschitz_distance
from .varifold import SampledManifoldVarifold

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "diagnostics",
    "main",
    "run",
    "validate",
]

KINDS = (
    "curvature-convergence",
    "discretization-stability",
    "brakke-residual",
    "distance-check",
    "ahlfors-scan",
    "constants-ledger",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_HYPOTHESIS = 3
EXIT_RUNTIME = 4


class ConfigError(ValueError):
    pass


class ExperimentConfig:
    """Parsed experiment description plus the raw bytes it came from."""

    def __init__(self, parser, raw_bytes, path=None):
        self.parser = parser
        self.raw_bytes = raw_bytes
        self.path = path
        try:
            self.kind = parser.get("experiment", "kind")
        except (configparser.NoSectionError, configparser.NoOptionError):
            raise ConfigError(
                "config needs an [experiment] section with a kind"
            ) from None
        self.seed = parser.getint("experiment", "seed", fallback=0)

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            raw = path.read_bytes()
        except OSError as err:
            raise ConfigError(f"cannot read config: {err}") from None
        parser = configparser.ConfigParser()
        try:
            parser.read_string(raw.decode("utf-8"))
        except (UnicodeDecodeError, configparser.Error) as err:
            raise ConfigError(f"cannot parse config: {err}") from None
        return cls(parser, raw, path)

    def get(self, section, option, fallback=None):
        return self.parser.get(section, option, fallback=fallback)

    def getfloat(self, section, option, fallback=None):
        try:
            return self.parser.getfloat(section, option, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"[{section}] {option} must be a number"
            ) from None

    def getint(self, section, option, fallback=None):
        try:
            return self.parser.getint(section, option, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"[{section}] {option} must be an integer"
            ) from None

    def getboolean(self, section, option, fallback=None):
        try:
            return self.parser.getboolean(section, option, fallback=fallback)
        except ValueError:
            raise ConfigError(
                f"[{section}] {option} must be a boolean"
            ) from None

    def getfloats(self, section, option, fallback=None):
        text = self.get(section, option)
        if text is None:
            return fallback
        try:
            return [float(tok) for tok in text.split()]
        except ValueError:
            raise ConfigError(
                f"[{section}] {option} must be space-separated numbers"
            ) from None

    def parameters(self):
        """Every config entry as section.option -> string, sorted."""
        out = {}
        for section in self.parser.sections():
            for option, value in self.parser.items(section):
                out[f"{section}.{option}"] = value
        return dict(sorted(out.items()))


def _shape_from_config(cfg):
    name = cfg.get("shape", "name")
    if name is None:
        raise ConfigError("config needs a [shape] section with a name")
    params = {
        opt: cfg.getfloat("shape", opt)
        for opt, _ in cfg.parser.items("shape")
        if opt != "name"
    }
    try:
        return make_shape(name, **params)
    except (ValueError, TypeError) as err:
        raise ConfigError(f"bad shape: {err}") from None


def _pair_from_config(cfg, n, d):
    name = cfg.get("kernel", "name", fallback="natural")
    exponent = cfg.getint("kernel", "exponent", fallback=4)
    try:
        return make_kernel_pair(name, n, d, exponent=exponent)
    except ValueError as err:
        raise ConfigError(f"bad kernel: {err}") from None


def _flow_from_config(cfg):
    name = cfg.get("flow", "shape", fallback="circle")
    radius = cfg.getfloat("flow", "radius", fallback=1.0)
    if name == "circle":
        return ShrinkingCircle(radius)
    if name == "sphere":
        return ShrinkingSphere(radius)
    raise ConfigError(f"unknown flow shape {name!r}")


def _bump_from_config(cfg, n):
    section = "test-function"
    center_text = cfg.get(section, "center", fallback=None)
    if center_text is None:
        center = np.zeros(n)
    else:
        center = np.array([float(tok) for tok in center_text.split()])
        if len(center) != n:
            raise ConfigError(
                f"[{section}] center must have {n} coordinates"
            )
    inner = cfg.getfloat(section, "inner_radius", fallback=0.2)
    outer = cfg.getfloat(section, "outer_radius", fallback=1.4)
    try:
        return RadialBump(center, inner, outer)
    except ValueError as err:
        raise ConfigError(f"bad test function: {err}") from None


def validate(cfg):
    """List of configuration problems; empty when the config is runnable."""
    problems = []
    if cfg.kind not in KINDS:
        problems.append(
            f"unknown kind {cfg.kind!r}; expected one of {', '.join(KINDS)}"
        )
        return problems
    try:
        if cfg.kind in ("curvature-convergence", "discretization-stability",
                        "distance-check", "ahlfors-scan"):
            _shape_from_config(cfg)
        if cfg.kind == "curvature-convergence":
            eps = cfg.getfloats("curvature-convergence", "epsilons")
            if not eps:
                problems.append("[curvature-convergence] epsilons is required")
            elif any(not 0 < e <= 1 for e in eps):
                problems.append("epsilons must lie in (0, 1]")
        if cfg.kind == "discretization-stability":
            eps = cfg.getfloat("discretization-stability", "epsilon")
            if eps is None or not 0 < eps <= 1:
                problems.append("[discretization-stability] epsilon in (0, 1]"
                                " is required")
            edges = cfg.getfloats("discretization-stability", "edges")
            if not edges:
                problems.append("[discretization-stability] edges is required")
            elif any(e <= 0 for e in edges):
                problems.append("edges must be positive")
        if cfg.kind == "brakke-residual":
            flow = _flow_from_config(cfg)
            t_end = cfg.getfloat("brakke-residual", "t_end", fallback=0.125)
            if t_end >= flow.extinction_time:
                problems.append(
                    f"t_end = {t_end:g} reaches extinction at "
                    f"{flow.extinction_time:g}"
                )
            panels = cfg.getint("brakke-residual", "panels", fallback=16)
            rule = cfg.get("brakke-residual", "time_rule", fallback="simpson")
            if rule not in ("simpson", "trapezoid"):
                problems.append(f"unknown time rule {rule!r}")
            if rule == "simpson" and panels % 2 != 0:
                problems.append("the simpson rule needs an even panel count")
            eps = cfg.getfloats("brakke-residual", "epsilons")
            if not eps:
                problems.append("[brakke-residual] epsilons is required")
            elif any(not 0 < e <= 1 for e in eps):
                problems.append("epsilons must lie in (0, 1]")
            n_amb = 3 if cfg.get("flow", "shape", fallback="circle") \
                == "sphere" else 2
            _bump_from_config(cfg, n_amb)
        if cfg.kind == "ahlfors-scan":
            radii = cfg.getfloats("ahlfors-scan", "radii")
            if not radii:
                problems.append("[ahlfors-scan] radii is required")
            elif any(r <= 0 for r in radii):
                problems.append("radii must be positive")
        if cfg.kind == "constants-ledger":
            _ledger_from_config(cfg)
    except ConfigError as err:
        problems.append(str(err))
    return problems


def diagnostics(cfg):
    """Non-fatal warnings: things the run will reject later, not now."""
    warnings = []
    if cfg.kind != "brakke-residual" or validate(cfg):
        return warnings
    gamma = cfg.getfloat("brakke-residual", "gamma", fallback=None)
    if gamma is None:
        return warnings
    n_amb = 3 if cfg.get("flow", "shape", fallback="circle") == "sphere" \
        else 2
    for e in cfg.getfloats("brakke-residual", "epsilons"):
        h = _edge_for(cfg, e) * np.sqrt(n_amb)
        if 2.0 * h > gamma * e:
            warnings.append(
                f"2h > gamma*eps at eps = {e:g} "
                f"(2h = {2 * h:g}, gamma*eps = {gamma * e:g}); "
                "the run will stop unless enforcement is off"
            )
    return warnings


def _edge_for(cfg, epsilon):
    """Cell edge for one kernel scale: explicit, or from h = eps^power."""
    edge = cfg.getfloat("brakke-residual", "edge", fallback=None)
    if edge is not None:
        return edge
    power = cfg.getfloat("brakke-residual", "h_power", fallback=4.0)
    n_amb = 3 if cfg.get("flow", "shape", fallback="circle") == "sphere" \
        else 2
    return epsilon**power / np.sqrt(n_amb)


def _ledger_from_config(cfg):
    section = "constants-ledger"
    if not cfg.parser.has_section(section):
        raise ConfigError(f"config needs a [{section}] section")
    required = ConstantsLedger.INPUT_FIELDS
    values = {}
    for name in required:
        if name == "d":
            values["d"] = cfg.getint(section, "d")
        else:
            values[name] = cfg.getfloat(section, name)
        if values[name] is None:
            raise ConfigError(f"[{section}] {name} is required")
    try:
        return ConstantsLedger(**values)
    except ValueError as err:
        raise ConfigError(str(err)) from None


def _fmt(value):
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _log_slope(xs, ys):
    """Least-squares slope of log(y) against log(x)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def _run_curvature_convergence(cfg):
    shape = _shape_from_config(cfg)
    pair = _pair_from_config(cfg, shape.n, shape.d)
    resolution = cfg.getint("curvature-convergence", "resolution",
                            fallback=8192)
    probes = cfg.getint("curvature-convergence", "probes", fallback=32)
    epsilons = cfg.getfloats("curvature-convergence", "epsilons")
    estimate, pairs = measure_curvature_consistency(
        shape, resolution, pair, epsilons, probe_count=probes
    )
    rows = [(eps, err, err / eps) for eps, err in pairs]
    slope = _log_slope([r[0] for r in rows], [r[1] for r in rows])
    summary = [
        f"kind = {cfg.kind}",
        f"slope = {_fmt(slope)}",
        f"consistency_estimate = {_fmt(estimate)}",
    ]
    return ("epsilon,max_error,error_over_epsilon".split(","), rows, summary)


def _run_discretization_stability(cfg):
    shape = _shape_from_config(cfg)
    pair = _pair_from_config(cfg, shape.n, shape.d)
    section = "discretization-stability"
    epsilon = cfg.getfloat(section, "epsilon")
    edges = cfg.getfloats(section, "edges")
    resolution = cfg.getint(section, "resolution", fallback=65536)
    probe_count = cfg.getint(section, "probes", fallback=16)
    sample = shape.sample(resolution)
    reference = SampledManifoldVarifold(sample)
    probes = shape.sample(probe_count).positions
    query = CurvatureQuery(pair, epsilon)
    h_ref = approx_mean_curvature(reference, query, probes)
    lo, hi = shape.bounding_box(margin=0.05)
    rows = []
    for edge in edges:
        vol = discretize(sample, Mesh(lo, hi, edge))
        h_vol = approx_mean_curvature(vol, query, probes)
        diff = float(np.max(np.linalg.norm(h_vol - h_ref, axis=1)))
        rows.append((vol.h, diff, diff / vol.h))
    slope = _log_slope([r[0] for r in rows], [r[1] for r in rows])
    summary = [
        f"kind = {cfg.kind}",
        f"epsilon = {_fmt(epsilon)}",
        f"slope = {_fmt(slope)}",
    ]
    return ("h,max_difference,difference_over_h".split(","), rows, summary)


def _run_brakke_residual(cfg):
    flow = _flow_from_config(cfg)
    section = "brakke-residual"
    t_start = cfg.getfloat(section, "t_start", fallback=0.0)
    t_end = cfg.getfloat(section, "t_end", fallback=0.125)
    panels = cfg.getint(section, "panels", fallback=16)
    resolution = cfg.getint(section, "resolution", fallback=16384)
    rule = cfg.get(section, "time_rule", fallback="simpson")
    gamma = cfg.getfloat(section, "gamma", fallback=None)
    enforce = cfg.getboolean(section, "enforce_gamma", fallback=True)
    epsilons = cfg.getfloats(section, "epsilons")
    shape0 = flow.shape_at(t_start)
    pair = _pair_from_config(cfg, shape0.n, shape0.d)
    phi = _bump_from_config(cfg, shape0.n)
    trajectory = flow.trajectory(t_start, t_end, panels, resolution)
    rows = []
    for eps in epsilons:
        edge = _edge_for(cfg, eps)
        report = brakke_residual(
            trajectory, edge, pair, eps, phi, time_rule=rule,
            gamma=gamma, enforce_gamma=enforce,
        )
        rows.append((
            eps,
            report.h,
            report.residual,
            report.abs_residual,
            report.mass_difference,
            report.flux_integral,
            report.hypothesis_satisfied
            if report.hypothesis_satisfied is not None else "",
            report.failed_nodes,
        ))
    summary = [
        f"kind = {cfg.kind}",
        f"time_rule = {rule}",
        f"panels = {panels}",
        f"max_abs_residual = "
        f"{_fmt(max(float(r[3]) for r in rows))}",
    ]
    header = ("epsilon,h,residual,abs_residual,mass_difference,"
              "flux_integral,hypothesis_satisfied,failed_nodes").split(",")
    return (header, rows, summary)


def _run_distance_check(cfg):
    shape = _shape_from_config(cfg)
    section = "distance-check"
    resolution = cfg.getint(section, "resolution", fallback=256)
    edge = cfg.getfloat(section, "edge", fallback=0.1)
    sample = shape.sample(resolution)
    mesh = Mesh(*shape.bounding_box(margin=0.05), edge)
    vol = discretize(sample, mesh)
    distance = bounded_lipschitz_distance(
        atomize(SampledManifoldVarifold(sample)), atomize(vol)
    )
    total = float(np.sum(sample.weights))
    bound = mesh.h * total
    rows = [(mesh.h, distance, bound, bool(distance <= bound))]
    summary = [
        f"kind = {cfg.kind}",
        f"distance = {_fmt(distance)}",
        f"bound = {_fmt(bound)}",
        f"within_bound = {'yes' if distance <= bound else 'no'}",
    ]
    return ("h,distance,bound,within_bound".split(","), rows, summary)


def _run_ahlfors_scan(cfg):
    shape = _shape_from_config(cfg)
    section = "ahlfors-scan"
    resolution = cfg.getint(section, "resolution", fallback=4096)
    radii = cfg.getfloats(section, "radii")
    max_probes = cfg.getint(section, "max_probes", fallback=64)
    v = SampledManifoldVarifold.from_shape(shape, resolution)
    scan = ahlfors_scan(v, shape.d, radii, max_probes=max_probes)
    rows = []
    for probe, radius, ball, ratio in scan:
        rows.append(tuple(probe) + (radius, ball, ratio))
    estimate = max(r[-1] for r in rows)
    header = [f"x{i + 1}" for i in range(shape.n)] + [
        "radius", "ball_mass", "ratio"
    ]
    summary = [
        f"kind = {cfg.kind}",
        f"regularity_estimate = {_fmt(estimate)}",
    ]
    return (header, rows, summary)


def _run_constants_ledger(cfg):
    ledger = _ledger_from_config(cfg)
    rows = [(name, value) for name, value in ledger.as_dict().items()]
    summary = [
        f"kind = {cfg.kind}",
        f"combined_rate_coeff = {_fmt(ledger.combined_rate_coeff)}",
        f"weak_bound_coeff = {_fmt(ledger.weak_bound_coeff)}",
    ]
    return (["name", "value"], rows, summary)


_RUNNERS = {
    "curvature-convergence": _run_curvature_convergence,
    "discretization-stability": _run_discretization_stability,
    "brakke-residual": _run_brakke_residual,
    "distance-check": _run_distance_check,
    "ahlfors-scan": _run_ahlfors_scan,
    "constants-ledger": _run_constants_ledger,
}


def run(cfg, out_dir, seed=None):
    """Execute a validated config; writes results, summary, and manifest.

    Returns the process exit code.
    """
    problems = validate(cfg)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return EXIT_CONFIG
    seed = cfg.seed if seed is None else int(seed)
    out_dir = Path(out_dir)
    try:
        header, rows, summary = _RUNNERS[cfg.kind](cfg)
    except GammaHypothesisError as err:
        print(f"hypothesis violation: {err}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except (DenominatorTooSmall, ConfigError, ValueError,
            RuntimeError) as err:
        print(f"runtime failure: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "results.csv", header, rows)
    summary = summary + [f"seed = {seed}", f"rows = {len(rows)}"]
    (out_dir / "summary.txt").write_text("\n".join(summary) + "\n")
    manifest = {
        "config_sha256": hashlib.sha256(cfg.raw_bytes).hexdigest(),
        "kind": cfg.kind,
        "parameters": cfg.parameters(),
        "seed": seed,
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return EXIT_OK


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="varmcf-run",
        description="Run a varmcf experiment described by an INI config.",
    )
    parser.add_argument("config", help="path to the experiment config")
    parser.add_argument(
        "--out", default=None,
        help="output directory (default: <config stem>_out)",
    )
    parser.add_argument(
        "--seed", type=int, default=None,
        help="override the seed recorded in the manifest",
    )
    parser.add_argument(
        "--validate-only", action="store_true",
        help="check the config and exit without running",
    )
    args = parser.parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    if args.validate_only:
        problems = validate(cfg)
        if problems:
            for p in problems:
                print(f"config error: {p}", file=sys.stderr)
            return EXIT_CONFIG
        for w in diagnostics(cfg):
            print(f"warning: {w}")
        print("config ok")
        return EXIT_OK
    out_dir = args.out
    if out_dir is None:
        out_dir = Path(args.config).stem + "_out"
    code = run(cfg, out_dir, seed=args.seed)
    if code == EXIT_OK:
        print(f"wrote {out_dir}/results.csv")
        print(f"wrote {out_dir}/summary.txt")
        print(f"wrote {out_dir}/manifest.json")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
