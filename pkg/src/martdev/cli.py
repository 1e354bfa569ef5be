"""Command-line experiment runner.

Configs are TOML files checked against an explicit schema; every run
writes ``<name>.csv`` and ``<name>.json`` into the output directory and
prints the requested format on stdout.

Exit codes: 0 success, 1 at least one FAIL cell, 2 config error,
3 runtime error.
"""

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import bounds as B
from . import experiments as X
from . import verify as V
from .errors import DomainError, HypothesisError
from .laws import law_from_dict
from .models import MartingaleModel, ModelKind, sample_paths
from .regression import RegressionConfig, berry_esseen_envelope, weight_moment

SCHEMA_VERSION = 1
ENV_PREFIX = "MARTDEV_"

COLUMNS = (
    "experiment",
    "model",
    "n",
    "alpha",
    "p",
    "delta",
    "x",
    "statistic",
    "bound_name",
    "bound_value",
    "bound_branch",
    "p_hat",
    "ci_low",
    "ci_high",
    "verdict",
    "seed",
)

VERDICTS = ("PASS", "WEAK-PASS", "FAIL", "N/A")

EXPERIMENTS = ("bound-table", "domination", "ldp-rate", "fuk-comparison", "regression", "berry-esseen", "invariance")

SUBCOMMANDS = {
    "bound": ("bound-table", "ldp-rate", "fuk-comparison"),
    "simulate": ("domination",),
    "verify": ("domination",),
    "regression": ("regression", "berry-esseen"),
    "invariance": ("invariance",),
}

_NUM = (int, float)
_LAW = dict
_LIST = list

SCHEMA = {
    "experiment": {
        "kind": str,
        "name": str,
        "bounds": _LIST,
        "statistic": str,
        "seed": int,
        "reps": int,
        "threads": int,
        "ci_level": float,
    },
    "model": {
        "kind": str,
        "n": int,
        "alpha": _NUM,
        "p": _NUM,
        "delta": _NUM,
        "base": _LAW,
        "weight_law": _LAW,
        "design_law": _LAW,
        "scales": _LIST,
        "scale_probs": _LIST,
    },
    "regression": {
        "theta": _NUM,
        "sigma": _NUM,
        "phi_law": _LAW,
        "noise": _LAW,
        "alpha": _NUM,
        "p": _NUM,
        "delta": _NUM,
        "p_low": _NUM,
    },
    "grid": {
        "x": _LIST,
        "x_start": _NUM,
        "x_stop": _NUM,
        "x_num": int,
        "tail_levels": _LIST,
        "n": _LIST,
        "t": _LIST,
        "lambdas": _LIST,
    },
    "bound": {
        k: _NUM
        for k in (
            "alpha",
            "u",
            "c_n",
            "p",
            "delta",
            "quad_sup",
            "pmom_sup",
            "per_step_quad_sum",
            "per_step_pmom_sum",
            "v",
            "w",
            "y",
            "n",
            "K",
            "e_moment",
            "tail_max_prob",
            "trunc_sum",
            "quad_char_moment",
            "D",
            "E",
            "F",
            "A",
            "B",
            "eps",
        )
    },
    "berry_esseen": {"p": _NUM, "z": _NUM, "C": _NUM},
    "output": {"dir": str, "name": str, "format": str},
}


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------------------
# config parsing


def _key_line(text, section, key):
    """1-based line of ``key`` inside ``[section]`` (best effort)."""
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        m = re.match(r"\[\s*([^\]]+?)\s*\]", s)
        if m:
            current = m.group(1)
            continue
        if re.match(rf"{re.escape(key)}\s*=", s) and (section is None or current == section or current is None):
            return i
        if section is None and m is None and s.startswith(f"[{key}"):
            return i
    for i, line in enumerate(text.splitlines(), 1):
        if re.match(rf"\s*\[\s*{re.escape(key)}\s*\]", line):
            return i
    return None


def _where(path, text, section, key):
    line = _key_line(text, section, key) if text else None
    loc = f"{path}:{line}" if line else str(path)
    return loc


def parse_config(text, path="<config>"):
    """Parse and schema-check a TOML config; returns the raw dict."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section, body in data.items():
        if section not in SCHEMA:
            raise ConfigError(f"{_where(path, text, None, section)}: unknown section [{section}]")
        if not isinstance(body, dict):
            raise ConfigError(f"{_where(path, text, None, section)}: [{section}] must be a table")
        allowed = SCHEMA[section]
        for key, value in body.items():
            if key not in allowed:
                raise ConfigError(
                    f"{_where(path, text, section, key)}: unknown key {key!r} in [{section}];"
                    f" allowed: {', '.join(sorted(allowed))}"
                )
            want = allowed[key]
            ok = isinstance(value, want) and not (want in (int, _NUM) and isinstance(value, bool))
            if want is float:
                ok = isinstance(value, _NUM) and not isinstance(value, bool)
            if not ok:
                raise ConfigError(f"{_where(path, text, section, key)}: [{section}].{key} has the wrong type")
    return data


@dataclass
class ExperimentConfig:
    kind: str
    name: str
    seed: int
    reps: int
    threads: int
    ci_level: float
    bounds: tuple
    statistic: str
    model: MartingaleModel = None
    regression: RegressionConfig = None
    regression_hyper: dict = field(default_factory=dict)
    x_grid: tuple = None
    tail_levels: tuple = None
    n_list: tuple = ()
    t_grid: tuple = ()
    lambdas: tuple = ()
    bound_params: dict = field(default_factory=dict)
    be: dict = field(default_factory=dict)
    out_dir: str = "."
    out_format: str = "csv"
    raw: dict = field(default_factory=dict)


def build_config(data, subcommand=None, overrides=None):
    """Turn a parsed config into an :class:`ExperimentConfig`; CLI flags in
    ``overrides`` take precedence over the file."""
    overrides = overrides or {}
    exp = data.get("experiment", {})
    kind = exp.get("kind")
    if kind is None:
        if subcommand is None:
            raise ConfigError("[experiment].kind is required")
        kind = SUBCOMMANDS[subcommand][0]
    if kind not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENTS}")
    if subcommand is not None and kind not in SUBCOMMANDS[subcommand]:
        raise ConfigError(f"experiment kind {kind!r} is not run by the {subcommand!r} subcommand")
    seed = overrides.get("seed")
    seed = int(exp.get("seed", 0) if seed is None else seed)
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    reps = overrides.get("reps")
    reps = int(exp.get("reps", 10_000) if reps is None else reps)
    if reps < 1:
        raise ConfigError("reps must be at least 1")
    out = data.get("output", {})
    fmt = overrides.get("format") or out.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"format must be csv or json, got {fmt!r}")
    grid = data.get("grid", {})
    try:
        model = MartingaleModel.from_dict(data["model"]) if "model" in data else None
        reg = None
        hyper = {}
        if "regression" in data:
            r = dict(data["regression"])
            hyper = {k: r.pop(k) for k in ("alpha", "p", "delta", "p_low") if k in r}
            if "phi_law" not in r or "noise" not in r:
                raise ConfigError("[regression] needs phi_law and noise")
            reg = RegressionConfig(
                theta=float(r.get("theta", 0.0)),
                n=int(grid.get("n", [100])[0]),
                phi_law=law_from_dict(r["phi_law"]),
                eps_model=law_from_dict(r["noise"]),
                sigma=float(r.get("sigma", 1.0)),
            )
    except (DomainError, TypeError) as exc:
        raise ConfigError(f"invalid model: {exc}") from None
    x_grid = None
    if "x" in grid:
        x_grid = tuple(float(v) for v in grid["x"])
    elif "x_start" in grid:
        if "x_stop" not in grid or "x_num" not in grid:
            raise ConfigError("x_start needs x_stop and x_num")
        x_grid = tuple(float(v) for v in np.linspace(grid["x_start"], grid["x_stop"], grid["x_num"]))
    levels = tuple(float(v) for v in grid["tail_levels"]) if "tail_levels" in grid else None
    if x_grid is not None and not x_grid:
        raise ConfigError("x grid is empty")
    n_list = tuple(int(v) for v in grid.get("n", [model.n] if model is not None else []))
    if any(v < 1 for v in n_list):
        raise ConfigError("grid n values must be positive")
    bounds = exp.get("bounds", [])
    for b in bounds:
        if b not in X.BOUNDS:
            raise ConfigError(f"unknown bound {b!r}; expected one of {sorted(X.BOUNDS)}")
    cfg = ExperimentConfig(
        kind=kind,
        name=exp.get("name", kind),
        seed=seed,
        reps=reps,
        threads=int(overrides.get("threads") or exp.get("threads", 1)),
        ci_level=float(exp.get("ci_level", V.CI_LEVEL)),
        bounds=tuple(bounds),
        statistic=exp.get("statistic"),
        model=model,
        regression=reg,
        regression_hyper=hyper,
        x_grid=x_grid,
        tail_levels=levels,
        n_list=n_list,
        t_grid=tuple(float(v) for v in grid.get("t", [0.0, 0.25, 0.5, 0.75, 1.0])),
        lambdas=tuple(float(v) for v in grid.get("lambdas", [2, 3, 4, 5])),
        bound_params=dict(data.get("bound", {})),
        be=dict(data.get("berry_esseen", {})),
        out_dir=overrides.get("out") or out.get("dir", "."),
        out_format=fmt,
        raw=data,
    )
    _check_needs(cfg)
    return cfg


def _check_needs(cfg):
    k = cfg.kind
    if k in ("domination", "ldp-rate", "fuk-comparison", "invariance") and cfg.model is None:
        raise ConfigError(f"{k} experiments need a [model] section")
    if k in ("regression", "berry-esseen") and cfg.regression is None:
        raise ConfigError(f"{k} experiments need a [regression] section")
    if k in ("bound-table", "domination", "regression", "ldp-rate", "fuk-comparison") and cfg.x_grid is None:
        if not (k in ("domination", "regression") and cfg.tail_levels):
            raise ConfigError(f"{k} experiments need [grid].x (or x_start/x_stop/x_num)")
    if k in ("bound-table", "domination", "regression") and not cfg.bounds:
        raise ConfigError("[experiment].bounds must list at least one bound")
    if k in ("ldp-rate", "berry-esseen", "invariance") and not cfg.n_list:
        raise ConfigError(f"{k} experiments need [grid].n")


# ---------------------------------------------------------------------------
# report


@dataclass
class Report:
    experiment: str
    name: str
    seed: int
    config: dict
    cells: list
    notes: list = field(default_factory=list)
    version: str = __version__
    wall_clock_s: float = None

    @property
    def verdict_counts(self):
        counts = {v: 0 for v in VERDICTS}
        for c in self.cells:
            counts[c["verdict"]] += 1
        return counts

    @property
    def failed(self):
        return any(c["verdict"] == "FAIL" for c in self.cells)

    def to_dict(self):
        # wall-clock is kept out of the serialised form so output bytes only
        # depend on the config, the seed and the version
        return {
            "schema_version": SCHEMA_VERSION,
            "experiment": self.experiment,
            "name": self.name,
            "seed": self.seed,
            "versions": {"martdev": self.version, "numpy": np.__version__},
            "config": self.config,
            "cells": self.cells,
            "notes": self.notes,
            "summary": self.verdict_counts,
        }

    @classmethod
    def from_dict(cls, d):
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            experiment=d["experiment"],
            name=d["name"],
            seed=d["seed"],
            config=d["config"],
            cells=d["cells"],
            notes=d.get("notes", []),
            version=d["versions"]["martdev"],
        )


def _clean(v):
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return None if math.isnan(v) else v
    if isinstance(v, np.integer):
        return int(v)
    return v


def make_cell(cfg, n=None, x=None, statistic=None, bound_name=None, bound=None, est=None, verdict="N/A", **extra):
    if verdict not in VERDICTS:
        raise ValueError(verdict)
    m = cfg.model
    hyper = cfg.regression_hyper
    model_name = m.kind.value if m is not None else ("regression" if cfg.regression is not None else "")
    cell = {
        "experiment": cfg.kind,
        "model": model_name,
        "n": n,
        "alpha": extra.pop("alpha", m.alpha if m is not None else hyper.get("alpha")),
        "p": extra.pop("p", m.p if m is not None else hyper.get("p")),
        "delta": extra.pop("delta", m.delta if m is not None else hyper.get("delta")),
        "x": x,
        "statistic": statistic,
        "bound_name": bound_name,
        "bound_value": None,
        "bound_branch": None,
        "p_hat": None,
        "ci_low": None,
        "ci_high": None,
        "verdict": verdict,
        "seed": cfg.seed,
    }
    if isinstance(bound, B.BoundResult):
        cell["bound_value"] = bound.value
        cell["bound_branch"] = bound.branch.value
    elif bound is not None:
        cell["bound_value"] = bound
    if est is not None:
        cell["p_hat"], cell["ci_low"], cell["ci_high"] = est.p_hat, est.ci_low, est.ci_high
    cell.update(extra)
    return {k: _clean(cell[k]) for k in COLUMNS}


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def emit(report: Report, fmt):
    """Serialise a report as CSV or JSON bytes."""
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for c in report.cells:
            w.writerow([_fmt(c[k]) for k in COLUMNS])
        return buf.getvalue().encode()
    if fmt == "json":
        return (json.dumps(report.to_dict(), sort_keys=True, indent=2, allow_nan=False) + "\n").encode()
    raise DomainError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# experiment runners


def _params_for(cfg, name, target, batch=None):
    try:
        params = X.auto_params(name, target, batch, **cfg.regression_hyper) if target is not None else {}
    except (HypothesisError, DomainError):
        if not cfg.bound_params:
            raise
        params = {}
    params = dict(params)
    params.update(cfg.bound_params)
    return params


def _x_grid(cfg, values=None):
    if cfg.x_grid is not None:
        return cfg.x_grid
    return tuple(X.quantile_grid(values, cfg.tail_levels))


def run_bound_table(cfg, report):
    n_list = cfg.n_list or (None,)
    for n in n_list:
        target = cfg.model.with_n(n) if (cfg.model is not None and n is not None) else cfg.model
        for name in cfg.bounds:
            try:
                params = _params_for(cfg, name, target)
            except (HypothesisError, DomainError) as exc:
                report.notes.append(f"{name} (n={n}): {exc}")
                continue
            if n is not None and "n" not in cfg.bound_params:
                params.setdefault("n", n)
            for x in cfg.x_grid:
                try:
                    b = X.evaluate(name, x, params)
                except (HypothesisError, DomainError) as exc:
                    report.notes.append(f"{name} at x={x}: {exc}")
                    report.cells.append(make_cell(cfg, n=n, x=x, bound_name=name))
                    continue
                report.cells.append(make_cell(cfg, n=n, x=x, statistic=X.default_statistic(name), bound_name=name, bound=b))


def run_domination(cfg, report, judge=True):
    targets = []
    if cfg.kind == "regression":
        for n in cfg.n_list or (cfg.regression.n,):
            targets.append((n, replace(cfg.regression, n=n)))
    else:
        for n in cfg.n_list or (cfg.model.n,):
            targets.append((n, cfg.model.with_n(n)))
    for n, target in targets:
        by_stat = {}
        for name in cfg.bounds:
            stat = cfg.statistic or X.default_statistic(name)
            by_stat.setdefault(stat, []).append(name)
        for stat, names in by_stat.items():
            values = V.simulate_statistic(target, stat, cfg.reps, cfg.seed, cfg.threads)
            xs = _x_grid(cfg, values)
            ests = [V.tail_from_values(values, x, cfg.ci_level) for x in xs]
            batch = None
            if isinstance(target, MartingaleModel) and not target.extendable:
                batch = sample_paths(target, cfg.seed, np.arange(min(cfg.reps, 10_000)))
            for name in names:
                try:
                    params = _params_for(cfg, name, target, batch)
                except (HypothesisError, DomainError) as exc:
                    report.notes.append(f"{name} (n={n}): {exc}")
                    for e in ests:
                        report.cells.append(make_cell(cfg, n=n, x=e.x, statistic=stat, bound_name=name, est=e))
                    continue
                for e in ests:
                    b = X.evaluate(name, e.x, params)
                    verdict = V.cell_verdict(b.value, e) if judge else "N/A"
                    report.cells.append(
                        make_cell(cfg, n=n, x=e.x, statistic=stat, bound_name=name, bound=b, est=e, verdict=verdict)
                    )


def run_ldp(cfg, report):
    m = cfg.model
    if m.kind not in (ModelKind.IID_SUBEXP, ModelKind.IID_MOMENT) or m.alpha is None:
        raise HypothesisError("ldp-rate needs an i.i.d. model with alpha")
    eps = float(cfg.bound_params.get("eps", 0.01))
    for n in cfg.n_list:
        params = X.ldp_params(m.base, m.alpha, n)
        for x in cfg.x_grid:
            b = B.theorem21_bound(n * x, params)
            rate = B.ldp_rate(m.alpha, x, n, b)
            report.cells.append(
                make_cell(cfg, n=n, x=x, statistic="max_partial", bound_name="theorem21-rate", bound=rate)
            )
            if hasattr(m.base, "log_sf"):
                jr = B.single_jump_rate(m.base, m.alpha, x, eps, n)
                report.cells.append(
                    make_cell(cfg, n=n, x=x, statistic="max_partial", bound_name="single-jump-rate", bound=jr)
                )


def run_fuk_comparison(cfg, report):
    m = cfg.model
    batch = sample_paths(m, cfg.seed, np.arange(cfg.reps))
    po = _params_for(cfg, "fuk-original", m, batch)
    for x in cfg.x_grid:
        for name in ("fuk-nagaev", "fuk-original"):
            b = X.evaluate(name, x, po)
            report.cells.append(make_cell(cfg, n=m.n, x=x, statistic="max_partial", bound_name=name, bound=b))
    report.notes.append(
        f"pmom_sup={po['pmom_sup']!r} per_step_pmom_sum={po['per_step_pmom_sum']!r}"
        f" quad_sup={po['quad_sup']!r} per_step_quad_sum={po['per_step_quad_sum']!r}"
    )


def berry_esseen_fit(cfg, n, p, z, x_grid):
    """Pilot fit: the smallest ``C`` whose envelope covers the gap plus
    ``z`` standard errors at every grid point."""
    phi, _, err = V.simulate_statistic_with_design(replace(cfg.regression, n=n), cfg.reps, cfg.seed)
    wm = weight_moment(phi, p)
    band = V.nonuniform_gap_band(err / cfg.regression.sigma, p, x_grid, z)
    return float(np.max(band / wm ** (1.0 / (1.0 + p)))), wm


def run_berry_esseen(cfg, report):
    p = float(cfg.be.get("p", 3.0))
    z = float(cfg.be.get("z", 4.0))
    xs = np.asarray(cfg.x_grid if cfg.x_grid is not None else np.arange(-4.0, 4.0001, 0.25))
    pilot, rest = cfg.n_list[0], cfg.n_list[1:]
    C = cfg.be.get("C")
    if C is None:
        C, _ = berry_esseen_fit(cfg, pilot, p, z, xs)
        report.notes.append(f"fitted C={C!r} at n={pilot} with z={z!r}")
        rest = cfg.n_list[1:]
    else:
        rest = cfg.n_list
    for n in rest:
        phi, _, err = V.simulate_statistic_with_design(replace(cfg.regression, n=n), cfg.reps, cfg.seed + n)
        wm = weight_moment(phi, p)
        # the envelope bounds the raw gap |F_hat - Phi|, so undo the (1 + |x|^p) weight
        gap = V.nonuniform_cdf_gap(err / cfg.regression.sigma, p, xs) / (1.0 + np.abs(xs) ** p)
        env = berry_esseen_envelope(xs, p, wm, C)
        for x, g, e in zip(xs, gap, env):
            report.cells.append(
                make_cell(
                    cfg,
                    n=n,
                    x=float(x),
                    statistic="cdf_gap",
                    bound_name="berry-esseen",
                    bound=float(e),
                    p_hat=float(g),
                    verdict="PASS" if g <= e else "FAIL",
                    p=p,
                )
            )


def run_invariance(cfg, report):
    m = cfg.model
    t_grid = np.asarray(cfg.t_grid)
    if not (np.isclose(t_grid, 0).any() and np.isclose(t_grid, 1).any()):
        raise ConfigError("[grid].t must include 0 and 1")
    for n in cfg.n_list:
        ens = V.invariance_paths(m, n, t_grid, cfg.reps, cfg.seed)
        ks = V.ks_statistic(ens.H[:, -1])
        report.cells.append(make_cell(cfg, n=n, x=1.0, statistic="ks_H1", bound_name="ks", bound=ks))
        if len(t_grid) >= 5:
            pairs = ((t_grid[0], t_grid[1]), (t_grid[-2], t_grid[-1]))
            r, se = V.increment_correlation(ens.H, t_grid, pairs)
            report.cells.append(
                make_cell(
                    cfg,
                    n=n,
                    x=None,
                    statistic="increment_corr",
                    bound_name="4se",
                    bound=4 * se,
                    p_hat=r,
                    verdict="PASS" if abs(r) <= 4 * se else "FAIL",
                )
            )
        for lam, val, lo, hi in V.tightness_profile(ens.max_abs_partial, n, cfg.lambdas):
            report.cells.append(
                make_cell(
                    cfg, n=n, x=lam, statistic="tightness", bound_name="lambda2_tail", p_hat=val, ci_low=lo, ci_high=hi
                )
            )


RUNNERS = {
    "bound-table": run_bound_table,
    "domination": run_domination,
    "regression": run_domination,
    "ldp-rate": run_ldp,
    "fuk-comparison": run_fuk_comparison,
    "berry-esseen": run_berry_esseen,
    "invariance": run_invariance,
}


def run(cfg: ExperimentConfig, subcommand=None):
    t0 = time.perf_counter()
    report = Report(cfg.kind, cfg.name, cfg.seed, cfg.raw, [])
    if subcommand == "simulate":
        run_domination(cfg, report, judge=False)
    else:
        RUNNERS[cfg.kind](cfg, report)
    report.wall_clock_s = time.perf_counter() - t0
    return report


def write_artifacts(report, out_dir, name):
    os.makedirs(out_dir, exist_ok=True)
    for fmt in ("csv", "json"):
        with open(os.path.join(out_dir, f"{name}.{fmt}"), "wb") as fh:
            fh.write(emit(report, fmt))


# ---------------------------------------------------------------------------
# entry point


def _env(name, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def build_parser():
    ap = argparse.ArgumentParser(prog="martdev", description="Martingale deviation bound experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in ("bound", "simulate", "verify", "regression", "invariance", "report"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", default=_env("config"), help="TOML config (report: a JSON report)")
        sp.add_argument("--seed", type=int, default=_env("seed"))
        sp.add_argument("--reps", type=int, default=_env("reps"))
        sp.add_argument("--out", default=_env("out"))
        sp.add_argument("--format", choices=("csv", "json"), default=_env("format"))
        sp.add_argument("--threads", type=int, default=_env("threads"))
    return ap


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        if not args.config:
            raise ConfigError("--config is required")
        try:
            with open(args.config, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {args.config}: {exc}") from None
        if args.command == "report":
            try:
                report = Report.from_dict(json.loads(text))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ConfigError(f"{args.config}: not a report: {exc}") from None
            sys.stdout.buffer.write(emit(report, args.format or "csv"))
            return 1 if report.failed else 0
        data = parse_config(text, args.config)
        cfg = build_config(data, args.command, vars(args))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        report = run(cfg, args.command)
        write_artifacts(report, cfg.out_dir, cfg.name)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - any failure inside a run maps to exit 3
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    sys.stdout.buffer.write(emit(report, cfg.out_format))
    print(f"{report.name}: {report.verdict_counts}  ({report.wall_clock_s:.2f}s)", file=sys.stderr)
    return 1 if report.failed else 0


if __name__ == "__main__":
    sys.exit(main())
