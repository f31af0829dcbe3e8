"""Batch experiments driven by a JSON config.

A config names one experiment ``kind`` plus the parameters it needs.  Work
is split into jobs; job ``i`` draws from RNG streams keyed by
``(seed, i, ...)`` so results do not depend on how many jobs run at once.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hypercol import __version__, bounds, geometry, percolation, render, sampling

KINDS = ("bounds", "phase-scan", "decay", "walk-bound", "certificate", "render")
LAMBDA_UNITS = ("absolute", "lambda_lower", "lambda_upper")

CSV_COLUMNS = {
    "phase-scan": ["lambda", "crossing_freq", "crossing_se", "mean_crossing_clusters",
                   "vacant_freq", "vacant_se"],
    "decay": ["distance", "conn_prob", "conn_se"],
    "walk-bound": ["k", "p_walk", "p_sum", "chernoff_bound"],
}

_FIELDS = {
    "kind": str, "n": int, "R": float, "lambda": float, "lambdas": list,
    "lambda_unit": str, "rho": float, "rho1": float, "rho2": float,
    "distances": list, "k_max": int, "trials": int, "seed": int, "eps": list,
    "t": float, "grid_step": float, "out": str,
}

_DEFAULTS = {
    "n": 2, "R": 1.0, "lambda_unit": "absolute", "trials": 100, "seed": 0,
    "eps": [0.1, 0.3], "t": 1.1, "k_max": 10, "out": "results",
}


class ConfigError(ValueError):
    def __init__(self, violations):
        super().__init__("; ".join(violations))
        self.violations = list(violations)


@dataclass
class ExperimentConfig:
    kind: str
    n: int = 2
    R: float = 1.0
    lam: float | None = None
    lambdas: list | None = None
    lambda_unit: str = "absolute"
    rho: float | None = None
    rho1: float | None = None
    rho2: float | None = None
    distances: list | None = None
    k_max: int = 10
    trials: int = 100
    seed: int = 0
    eps: list = field(default_factory=lambda: [0.1, 0.3])
    t: float = 1.1
    grid_step: float | None = None
    out: str = "results"

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        problems = validate(raw)
        if problems:
            raise ConfigError(problems)
        values = {**_DEFAULTS, **raw}
        values["lam"] = values.pop("lambda", None)
        return cls(**values)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return {k: v for k, v in d.items() if v is not None}

    def scale(self) -> float:
        if self.lambda_unit == "lambda_lower":
            return bounds.lambda_lower(self.n, self.R)
        if self.lambda_unit == "lambda_upper":
            return bounds.lambda_upper(self.n, self.R)
        return 1.0


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    return raw


def _is_number(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(raw: dict) -> list[str]:
    """Everything wrong with a config; empty iff :func:`run` would accept it."""
    if not isinstance(raw, dict):
        return ["config must be a JSON object"]
    unknown = [f"unknown key {key!r}" for key in raw if key not in _FIELDS]
    raw = {k: val for k, val in raw.items() if k in _FIELDS}
    v = []
    kind = raw.get("kind")
    if kind not in KINDS:
        v.append(f"kind: must be one of {', '.join(KINDS)}")
    for key, typ in _FIELDS.items():
        if key not in raw:
            continue
        val = raw[key]
        if typ is int and (not isinstance(val, int) or isinstance(val, bool)):
            v.append(f"{key}: must be an integer")
        elif typ is float and not _is_number(val):
            v.append(f"{key}: must be a finite number")
        elif typ is list and not (isinstance(val, list) and val and all(_is_number(x) for x in val)):
            v.append(f"{key}: must be a nonempty list of numbers")
        elif typ is str and not isinstance(val, str):
            v.append(f"{key}: must be a string")
    if v:
        return unknown + v

    cfg = {**_DEFAULTS, **raw}
    n, R = cfg["n"], cfg["R"]
    if n < 2:
        v.append("n: dimension must be >= 2")
    if R <= 0:
        v.append("R: ball radius must be positive")
    if cfg["trials"] < 1:
        v.append("trials: must be >= 1")
    if not 0 <= cfg["seed"] < 2 ** 64:
        v.append("seed: must be a 64-bit nonnegative integer")
    if cfg["lambda_unit"] not in LAMBDA_UNITS:
        v.append(f"lambda_unit: must be one of {', '.join(LAMBDA_UNITS)}")
    if any(not 0 < e < 1 for e in cfg["eps"]):
        v.append("eps: values must lie in (0, 1)")
    if "lambda" in raw and raw["lambda"] < 0:
        v.append("lambda: intensity must be nonnegative")
    if "lambdas" in raw and any(x < 0 for x in raw["lambdas"]):
        v.append("lambdas: intensities must be nonnegative")
    if cfg["lambda_unit"] == "lambda_upper" and R <= 0.5:
        v.append("lambda_unit: lambda_upper needs R > 1/2")
    if v:
        return unknown + v

    def need(*keys):
        for key in keys:
            if key not in raw:
                v.append(f"{key}: required for kind {kind!r}")

    if kind == "bounds" and 2 * R - 1 <= 0:
        v.append("R: bounds need 2R - 1 > 0")
    if kind == "certificate" and cfg["t"] <= 1:
        v.append("t: must exceed 1")
    if kind == "phase-scan":
        need("lambdas", "rho1", "rho2")
        if n != 2:
            v.append("n: phase scans are defined for n = 2")
        if "rho1" in raw and "rho2" in raw:
            if not raw["rho1"] < raw["rho2"]:
                v.append("rho2: must exceed rho1")
            if raw["rho1"] < 2 * R:
                v.append("rho1: must be at least 2R")
        gs = raw.get("grid_step", R / 4)
        if not 0 < gs <= R / 4:
            v.append("grid_step: must lie in (0, R/4]")
    if kind == "decay":
        need("lambda", "distances")
        if "distances" in raw:
            if any(d < 0 for d in raw["distances"]):
                v.append("distances: must be nonnegative")
            elif "rho" in raw and raw["rho"] < max(raw["distances"]) / 2 + 2 * R:
                v.append("rho: window must contain both points with a 2R margin")
    if kind == "walk-bound" and cfg["k_max"] < 2:
        v.append("k_max: must be >= 2")
    if kind == "render":
        need("lambda", "rho")
        if n != 2:
            v.append("n: rendering is available for n = 2 only")
    if "rho" in raw and raw["rho"] <= 0:
        v.append("rho: window radius must be positive")
    return unknown + v


# --------------------------------------------------------------------------
# jobs (module level so that they pickle)

def _job_phase(args):
    cfg, index, lam = args
    row = percolation.phase_row(sampling.ModelParams(cfg.n, cfg.R, lam), cfg.rho1, cfg.rho2,
                                cfg.trials, cfg.seed, index,
                                cfg.grid_step if cfg.grid_step is not None else cfg.R / 4)
    return [row.lam, row.crossing_freq, row.crossing_se, row.mean_crossing_clusters,
            row.vacant_freq, row.vacant_se]


def _decay_window(cfg) -> float:
    return cfg.rho if cfg.rho is not None else max(cfg.distances) / 2 + 2 * cfg.R


def _job_decay(args):
    cfg, index, dist = args
    u = geometry.from_polar(dist / 2.0, np.eye(cfg.n)[0])
    v = geometry.from_polar(dist / 2.0, -np.eye(cfg.n)[0])
    params = sampling.ModelParams(cfg.n, cfg.R, cfg.lam * cfg.scale())
    est = percolation.connection_prob(u, v, params, _decay_window(cfg), cfg.trials, cfg.seed,
                                      stream_key=index)
    return [dist, est.mean, est.stderr]


def _job_walk(args):
    cfg, _index, _ = args
    ks = list(range(2, cfg.k_max + 1))
    rows = bounds.walk_domination_table(cfg.n, cfg.R, ks, cfg.trials, cfg.seed)
    return [[r.k, r.p_walk, r.p_sum, bounds.chernoff_chain_bound(cfg.n, cfg.R, r.k - 1)]
            for r in rows]


def _job_bounds(args):
    cfg, _index, _ = args
    rep = bounds.bounds_report(cfg.n, cfg.R, tuple(cfg.eps))
    row = {"n": rep.n, "R": rep.R, "mu_2R": rep.mu_2R, "mu_cell": rep.mu_cell,
           "lambda_lower": rep.lambda_lower, "lambda_upper": rep.lambda_upper, "mgf": rep.mgf}
    for e in cfg.eps:
        row[f"h_eps_{e}"] = rep.h_eps[e]
        row[f"a4_eps_{e}"] = rep.a4[e]
    return row


def _job_certificate(args):
    cfg, _index, _ = args
    cert = bounds.nonuniqueness_certificate(cfg.n, cfg.t)
    if cert is None:
        return {"n": cfg.n, "t": cfg.t, "R": "none"}
    row = {"n": cert.n, "t": cert.t, "R": cert.R, "lambda": cert.lam, "q": cert.q,
           "margin": cert.margin}
    for k in (1, 10, 50):
        row[f"tail_k{k}"] = bounds.chain_tail_series(cert.lam, cert.n, cert.R, k)
    return row


def _job_render(args):
    cfg, _index, _ = args
    params = sampling.ModelParams(cfg.n, cfg.R, cfg.lam * cfg.scale())
    real = sampling.sample_realization(params, cfg.rho, cfg.seed, 0)
    clusters = percolation.build_clusters(real)
    return {"centers": len(real), "clusters": clusters.cluster_count,
            "svg": render.render_svg(real, clusters)}


def _jobs(cfg: ExperimentConfig):
    if cfg.kind == "phase-scan":
        scale = cfg.scale()
        return _job_phase, [(cfg, i, lam * scale) for i, lam in enumerate(cfg.lambdas)]
    if cfg.kind == "decay":
        return _job_decay, [(cfg, i, float(d)) for i, d in enumerate(cfg.distances)]
    table = {"walk-bound": _job_walk, "bounds": _job_bounds,
             "certificate": _job_certificate, "render": _job_render}
    return table[cfg.kind], [(cfg, 0, None)]


def _timed(fn, args):
    start = time.perf_counter()
    out = fn(args)
    return out, time.perf_counter() - start


def _run_jobs(fn, arglist, jobs: int):
    if jobs > 1 and len(arglist) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_timed, [fn] * len(arglist), arglist))
    return [_timed(fn, a) for a in arglist]


# --------------------------------------------------------------------------
# output

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in row])
    return buf.getvalue()


def _write_atomic(path: Path, text: str):
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    return x


def run(cfg: ExperimentConfig, out_dir=None, jobs: int = 1, force_render: bool = False) -> dict:
    """Run a config, write results.csv / report.json (/ realization.svg), return the report."""
    if force_render:
        cfg = ExperimentConfig(**{**asdict(cfg), "kind": "render"})
    fn, arglist = _jobs(cfg)
    outputs = _run_jobs(fn, arglist, max(1, int(jobs)))
    results = [o for o, _ in outputs]
    timings = {f"job{i}": t for i, (_, t) in enumerate(outputs)}
    files = {}
    if cfg.kind in CSV_COLUMNS:
        rows = results[0] if cfg.kind == "walk-bound" else results
        files["results.csv"] = _csv_text(CSV_COLUMNS[cfg.kind], rows)
        json_rows = [dict(zip(CSV_COLUMNS[cfg.kind], r)) for r in rows]
    else:
        row = dict(results[0])
        svg = row.pop("svg", None)
        if svg is not None:
            files["realization.svg"] = svg
        files["results.csv"] = _csv_text(list(row), [list(row.values())])
        json_rows = [row]
    report = {
        "config": cfg.to_dict(),
        "results": json_rows,
        "timings": timings,
        "version": __version__,
        "seed": {"master": cfg.seed, "streams": "job i, trial t -> SeedSequence(seed, (i, t))"},
    }
    files["report.json"] = json.dumps(_json_safe(report), indent=2, sort_keys=True) + "\n"

    out = Path(out_dir if out_dir is not None else cfg.out)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            _write_atomic(out / name, text)
            written.append(out / name)
    except OSError:
        for p in written:
            p.unlink(missing_ok=True)
        raise
    return report
