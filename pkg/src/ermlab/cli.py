"""Command line front end.

    ermlab run CONFIG.json [--plot] [--seed N] [--threads N] [--out DIR]
    ermlab plot CURVE.csv OUT.svg [--factor F]

Exit status is 0 on success, 2 when an experiment ran but a validation
threshold failed, and 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .classes import StarHull, bernstein_certificate
from .complexity import empirical_xi_curve, fixed_point, xi_curve
from .empirical import draw_sample
from .errors import ErmlabError
from .io import dumps_report, atomic_write_text, load_nested, load_problem, write_csv, write_curve_csv
from .rng import make_stream, set_threads
from .scenarios import (Scenario, build_gap_class, classification_hull, gap_experiment, gap_scenario,
                        nested_classification_problem)
from .selection import implication_audit, select
from .theorems import concentration_profile, validate_theorem12, validate_theorem31

EXPERIMENTS = ("xi-curve", "fixed-point", "bernstein-check", "validate-t12", "validate-t31",
               "model-select", "gap-demo", "concentration")

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


class ConfigError(ErmlabError, ValueError):
    pass


class Config:
    """A parsed experiment configuration with typed parameter access."""

    def __init__(self, doc: dict, base_dir: Path):
        if not isinstance(doc, dict):
            raise ConfigError("config must be a JSON object")
        self.doc = doc
        self.base_dir = base_dir
        self.experiment = doc.get("experiment")
        if self.experiment is None:
            raise ConfigError("config missing required field 'experiment'")
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose one of {', '.join(EXPERIMENTS)}")
        self.params = doc.get("parameters", {})
        self.inputs = doc.get("inputs", {})
        self.master_seed = int(doc.get("master_seed", 0))
        self.output_dir = doc.get("output_dir", "out")

    def get(self, name, default=None, kind=float, required=False, low=None, high=None):
        if name not in self.params:
            if required:
                raise ConfigError(f"config missing required field 'parameters.{name}'")
            return default
        value = self.params[name]
        try:
            value = kind(value)
        except (TypeError, ValueError):
            raise ConfigError(f"parameters.{name} must be {kind.__name__}, got {value!r}") from None
        if low is not None and value < low:
            raise ConfigError(f"parameters.{name} = {value} is below the minimum {low}")
        if high is not None and value > high:
            raise ConfigError(f"parameters.{name} = {value} is above the maximum {high}")
        return value

    def path(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def _load_input(cfg: Config, default_n=None):
    """Resolve the class under study: (F, P, label, n or None)."""
    inputs = cfg.inputs
    if "scenario" in inputs:
        sc = inputs["scenario"]
        name = sc.get("name")
        if name == "gap":
            n = int(sc.get("n", default_n or 0))
            if n < 1:
                raise ConfigError("gap scenario needs n (inputs.scenario.n or parameters.n)")
            spec = build_gap_class(n, sc.get("m"), sc.get("N"))
            return spec.hull, spec.measure, gap_scenario(spec).label, spec
        if name == "classification":
            s = classification_hull(float(sc.get("margin", 0.2)), int(sc.get("atoms", 16)),
                                    int(sc.get("seed", 0)), sc.get("labelings", "thresholds"))
            return s.hull, s.measure, s.label, None
        raise ConfigError(f"unknown scenario {name!r}; use 'gap' or 'classification'")
    if "problem" not in inputs:
        raise ConfigError("config missing required field 'inputs.problem' (or 'inputs.scenario')")
    src = inputs["problem"]
    if isinstance(src, str):
        path = cfg.path(src)
        if not path.exists():
            raise ConfigError(f"input file not found: {path}")
        src = path
    P, classes = load_problem(src)
    k = int(inputs.get("class_index", 0))
    if not 0 <= k < len(classes):
        raise ConfigError(f"inputs.class_index = {k} but the problem has {len(classes)} classes")
    F = classes[k]
    if inputs.get("hull", True):
        F = StarHull(F)
    return F, P, getattr(F, "label", ""), None


def _grid(cfg: Config):
    g = cfg.params.get("grid")
    if g is None:
        return None
    if isinstance(g, list):
        return np.array(g, dtype=float)
    try:
        return np.geomspace(float(g["lower"]), float(g["upper"]), int(g.get("points", 64)))
    except (KeyError, TypeError, ValueError):
        raise ConfigError("parameters.grid must be a list of levels or {lower, upper, points}") from None


def _curve_summary(curve):
    return {"kind": curve.kind, "points": int(curve.grid.size), "K": curve.replicates, "n": curve.n,
            "grid": [float(curve.grid[0]), float(curve.grid[-1])]}


def run_xi_curve(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=1)
    F, P, label, _ = _load_input(cfg, n)
    K = cfg.get("K", 1000, int, low=2)
    factor = cfg.get("factor", 0.25, low=1e-12)
    slope = cfg.get("slope", 0.0, low=0.0)
    resolution = cfg.get("resolution", None)
    curve = xi_curve(F, P, n, _grid(cfg), K, cfg.master_seed, resolution, factor)
    out.csv("xi_curve.csv", curve)
    out.plot("xi_curve.svg", curve, factor, slope)
    fp = fixed_point(curve, factor, slope)
    results = {"class": label, "curve": _curve_summary(curve), "fixed_point": fp.as_dict(),
               "stderr_at_fixed_point": float(
                   curve.stderr[min(np.searchsorted(curve.grid, fp.r_star), curve.grid.size - 1)])}
    if cfg.experiment == "fixed-point" and cfg.params.get("empirical", False):
        s = draw_sample(P, n, make_stream(cfg.master_seed, "fixed-point-sample", 0))
        c1, c2 = cfg.get("c1", 0.5), cfg.get("c2", 2.0)
        c3 = cfg.get("c3", 1 / 16, low=0.0)
        draws = cfg.params.get("draws", "exact" if n <= 20 else 2000)
        ecurve = empirical_xi_curve(F, s, c1, c2, _grid(cfg), draws, cfg.master_seed)
        out.csv("empirical_curve.csv", ecurve)
        out.plot("empirical_curve.svg", ecurve, factor, c3)
        results["empirical"] = {"sample_seed": s.seed, "c1": c1, "c2": c2, "c3": c3,
                                "fixed_point": fixed_point(ecurve, factor, c3).as_dict()}
    return results, True


def run_bernstein(cfg, out):
    F, P, label, _ = _load_input(cfg, cfg.params.get("n"))
    beta = cfg.get("beta", 1.0, low=1e-12, high=1.0)
    cert = bernstein_certificate(F, P, beta)
    return {"class": label, "certificate": cert.as_dict()}, cert.satisfied


def run_bound_check(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=1)
    x = cfg.get("x", required=True, low=1e-12)
    F, P, label, _ = _load_input(cfg, n)
    rep = validate_theorem12(F, P, n, x, cfg.get("replicates", 1000, int, low=100), cfg.master_seed,
                             c=cfg.get("c", 1.0, low=1e-12), K=cfg.get("K", 1000, int, low=2))
    return {"class": label, "report": rep.as_dict()}, bool(rep.passed)


def run_bracket_check(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=1)
    F, P, label, _ = _load_input(cfg, n)

    eps = cfg.get("epsilon", None)
    rep = validate_theorem31(Scenario(F, P, label, n), eps, cfg.get("x", 3.0, low=0.0), cfg.get("replicates", 500, int, low=1),
                             cfg.master_seed, n=n, K=cfg.get("K", 1000, int, low=2),
                             c=cfg.get("c", 1.0, low=1e-12), c1=cfg.get("c1", 1.0, low=1e-12),
                             resolution=cfg.get("resolution", None))
    out.csv("xi_curve.csv", rep.curve)
    out.plot("xi_curve.svg", rep.curve, 0.25, 0.0)
    out.table("pfhat.csv", ("replicate", "pfhat"), enumerate(rep.pfhat))
    return {"class": label, "report": rep.as_dict()}, rep.passed is not False


def run_model_select(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=1)
    src = cfg.inputs.get("problem")
    sc = cfg.inputs.get("scenario")
    if src is None and sc is not None and sc.get("name") == "nested":
        problem = nested_classification_problem(int(sc.get("atoms", 6)), float(sc.get("margin", 0.1)), n,
                                                float(sc.get("x", 3.0)), float(sc.get("scale", 1.0)),
                                                int(sc.get("seed", 3)))
    elif src is None:
        raise ConfigError("config missing required field 'inputs.problem'")
    else:
        if isinstance(src, str):
            if not cfg.path(src).exists():
                raise ConfigError(f"input file not found: {cfg.path(src)}")
            src = cfg.path(src)
        problem = load_nested(src)
    s = draw_sample(problem.measure, n, make_stream(cfg.master_seed, "model-select-sample", 0))
    sel = select(problem, s)
    out.table("selection.csv", ("k", "index", "emp_risk", "penalty", "penalized", "risk"),
              ((r["k"], r["index"], r["emp_risk"], r["penalty"], r["penalized"], r["risk"])
               for r in sel.per_class))
    audit = implication_audit(problem, n, cfg.get("replicates", 1000, int, low=1), cfg.master_seed)
    return {"sample_seed": s.seed, "selection": sel.as_dict(), "audit": audit.as_dict()}, audit.passed


def run_gap(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=2)
    sc = dict(cfg.inputs.get("scenario", {}))
    spec = build_gap_class(n, cfg.params.get("m", sc.get("m")), cfg.params.get("N", sc.get("N")))
    rep = gap_experiment(spec, cfg.get("replicates", 500, int, low=2), cfg.get("rho", 0.1),
                         cfg.get("delta", 0.05, low=0.0, high=1.0), cfg.master_seed,
                         cfg.get("resolution", 0.01, low=1e-9))
    out.csv("xi_curve.csv", rep.curve)
    out.plot("xi_curve.svg", rep.curve, 0.25, 0.0)
    out.table("pfhat.csv", ("replicate", "pfhat_exact", "pfhat_low", "pfhat_high"),
              ((i, a, b, c) for i, (a, b, c) in enumerate(zip(rep.pfhat_exact, rep.pfhat_low, rep.pfhat_high))))
    res = rep.as_dict()
    checks = {
        "witness_all_replicates": rep.witness_exact,
        "fixed_point_contains_quarter": res["contains_quarter"],
        "fixed_point_resolution_ok": (rep.fixed_point.resolution or math.inf) <= cfg.get("resolution", 0.01),
        "exact_pfhat_le_inv_n_all": rep.exact_le_inv_n == 1.0,
        "headline_ratio_ge_n_over_8": rep.headline_ratio >= n / 8,
    }
    res["checks"] = checks
    return res, all(checks.values())


def run_concentration(cfg, out):
    n = cfg.get("n", kind=int, required=True, low=1)
    F, P, label, _ = _load_input(cfg, n)
    K = cfg.params.get("K", 1000)
    if K != "exact":
        K = cfg.get("K", 1000, int, low=100)
    prof = concentration_profile(F, P, n, K, cfg.master_seed)
    out.table("quantiles.csv", ("stat", "value"), prof.rows())
    return {"class": label, "profile": prof.as_dict()}, True


RUNNERS = {
    "xi-curve": run_xi_curve,
    "fixed-point": run_xi_curve,
    "bernstein-check": run_bernstein,
    "validate-t12": run_bound_check,
    "validate-t31": run_bracket_check,
    "model-select": run_model_select,
    "gap-demo": run_gap,
    "concentration": run_concentration,
}


class Outputs:
    def __init__(self, directory: Path, plot: bool):
        self.dir = directory
        self.plot_enabled = plot
        self.files = []

    def csv(self, name, curve):
        self.files.append(name)
        write_curve_csv(self.dir / name, curve)

    def table(self, name, header, rows):
        self.files.append(name)
        write_csv(self.dir / name, header, rows)

    def plot(self, name, curve, factor, slope):
        if not self.plot_enabled:
            return
        from .plotting import curve_figure, save_svg

        self.files.append(name)
        save_svg(curve_figure(curve, factor, slope), self.dir / name)


def run(config_path, plot=False, seed=None, threads=None, out=None) -> int:
    started = time.perf_counter()
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None
    cfg = Config(doc, path.parent)
    if seed is not None:
        cfg.master_seed = int(seed)
    set_threads(threads)
    out_dir = Path(out) if out is not None else cfg.path(cfg.output_dir)
    outputs = Outputs(out_dir, plot)
    results, passed = RUNNERS[cfg.experiment](cfg, outputs)
    report = {
        "artifact": "ermlab",
        "version": __version__,
        "experiment": cfg.experiment,
        "config": doc,
        "master_seed": cfg.master_seed,
        "results": results,
        "passed": bool(passed),
        "files": outputs.files,
        "wall_clock_seconds": round(time.perf_counter() - started, 3),
    }
    atomic_write_text(out_dir / "report.json", dumps_report(report))
    return EXIT_OK if passed else EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ermlab", description="Localized complexity laboratory")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("config")
    r.add_argument("--plot", action="store_true", help="also write SVG curve plots")
    r.add_argument("--seed", type=int, help="override master_seed")
    r.add_argument("--threads", type=int, help="worker threads (falls back to ERMLAB_THREADS)")
    r.add_argument("--out", help="override output_dir")
    pl = sub.add_parser("plot", help="render a curve CSV to SVG")
    pl.add_argument("csv")
    pl.add_argument("svg")
    pl.add_argument("--factor", type=float, default=0.25)
    pl.add_argument("--slope", type=float, default=0.0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run(args.config, args.plot, args.seed, args.threads, args.out)
        from .plotting import plot_curve

        plot_curve(args.csv, args.svg, args.factor, args.slope)
        return EXIT_OK
    except (ErmlabError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
