"""Command-line entry point: ``fkrigidity <subcommand> [--config PATH] [overrides]``.

Every subcommand writes ``<name>.csv`` plus a ``<name>.json`` sidecar into the
output directory.  Files are staged in a temporary directory inside it and
moved into place only after the whole computation succeeded.  Exit status is
0 on success, 2 for bad configuration or input, 3 for numeric or statistical
failures; errors print one JSON line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import shutil
import sys
import tempfile
from typing import Optional

import jsonschema
import numpy as np

from . import __version__
from .airy import variance_closed_form, variance_quadrature
from .domain import domain_from_config, potential_from_config
from .errors import ConfigurationError, InputError, RigidityError
from .feynman_kac import SimParams, trace_moments, variance_scan
from .localtime import gamma_lt_scaling, scaling_study
from .noise import d_exponent, model_from_config, psd_factor, seminorm_sq, uniform_gram, StepFunction
from .rigidity import ScanResult, rigidity_report
from .spectrum import direct_trace, direct_variance, discretize, eigenvalues

__all__ = ["main", "run", "CONFIG_SCHEMA", "SUBCOMMANDS", "load_config"]

SUBCOMMANDS = ("noise-check", "lt-scaling", "trace", "variance-scan", "spectrum", "airy", "report")
SEEDED = {"lt-scaling", "trace", "variance-scan", "report"}

_BOUNDARY = {"oneOf": [{"type": "number"}, {"enum": ["dirichlet", "neumann"]}]}
_PRESET = {
    "type": "object",
    "required": ["name"],
    "properties": {"name": {"type": "string"}},
    "additionalProperties": {"type": ["number", "boolean"]},
}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "subcommand": {"enum": list(SUBCOMMANDS)},
        "domain": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "case": {"enum": ["full_line", "half_line", "interval"]},
                "b": {"type": "number", "exclusiveMinimum": 0},
                "alpha_bar": _BOUNDARY,
                "beta_bar": _BOUNDARY,
            },
        },
        "potential": _PRESET,
        "noise": _PRESET,
        "t_list": {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
        "n_paths": {"type": "integer", "minimum": 2},
        "n_steps": {"type": "integer", "minimum": 8},
        "bin_width": {"type": "number", "exclusiveMinimum": 0},
        "dx": {"type": "number", "exclusiveMinimum": 0},
        "R": {"type": "number", "exclusiveMinimum": 0},
        "n_realizations": {"type": "integer", "minimum": 100},
        "n_grid": {"type": "integer", "minimum": 16},
        "k": {"type": "integer", "minimum": 1},
        "q": {"type": "number", "minimum": 1, "maximum": 2},
        "mode": {"enum": ["lq", "gamma"]},
        "symmetric": {"type": "boolean"},
        "seed": {"type": "integer", "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "out": {"type": "string", "minLength": 1},
    },
}

DEFAULT_T = {
    "lt-scaling": [2.0**-k for k in range(8, 1, -1)],
    "trace": [0.5],
    "variance-scan": [0.05, 0.1, 0.2, 0.3, 0.4],
    "report": [0.05, 0.1, 0.2, 0.3, 0.4],
    "spectrum": [0.5],
    "airy": [0.25, 0.5, 1.0, 2.0],
    "noise-check": [1.0],
}


class _Output:
    """Collects files in memory; ``commit`` writes them all or nothing."""

    def __init__(self):
        self.files: dict[str, str] = {}

    def csv(self, name: str, header, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
        self.files[name] = buf.getvalue()

    def json(self, name: str, doc: dict):
        self.files[name] = json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"

    def text(self, name: str, s: str):
        self.files[name] = s

    def commit(self, out_dir: str):
        created = not os.path.isdir(out_dir)
        os.makedirs(out_dir, exist_ok=True)
        stage = tempfile.mkdtemp(prefix=".staging-", dir=out_dir)
        try:
            for name, content in self.files.items():
                with open(os.path.join(stage, name), "w", encoding="utf-8") as fh:
                    fh.write(content)
            for name in self.files:
                os.replace(os.path.join(stage, name), os.path.join(out_dir, name))
        except OSError:
            shutil.rmtree(stage, ignore_errors=True)
            if created:
                shutil.rmtree(out_dir, ignore_errors=True)
            raise
        os.rmdir(stage)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return v


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------


def load_config(path: Optional[str]) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config is not valid JSON: {exc.msg} at line {exc.lineno}") from None
    if not isinstance(cfg, dict):
        raise ConfigurationError("config must be a JSON object")
    return cfg


def _validate(cfg: dict):
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigurationError(f"config invalid at {where}: {exc.message}") from None


def _merge(cfg: dict, args) -> dict:
    cfg = dict(cfg)
    if cfg.get("subcommand", args.subcommand) != args.subcommand:
        raise ConfigurationError(f"config is for {cfg['subcommand']!r}, not {args.subcommand!r}")
    cfg["subcommand"] = args.subcommand
    if args.t is not None:
        try:
            cfg["t_list"] = [float(s) for s in args.t.split(",") if s.strip()]
        except ValueError:
            raise ConfigurationError(f"--t expects comma-separated numbers, got {args.t!r}") from None
    for key in ("seed", "threads", "out", "q", "n_paths"):
        v = getattr(args, key)
        if v is not None:
            cfg[key] = v
    cfg.setdefault("t_list", DEFAULT_T[args.subcommand])
    cfg.setdefault("threads", 1)
    cfg.setdefault("out", ".")
    _validate(cfg)
    if args.subcommand in SEEDED and "seed" not in cfg:
        raise ConfigurationError(f"{args.subcommand} needs a seed (config 'seed' or --seed)")
    if args.subcommand == "spectrum" and "seed" not in cfg and "noise" in cfg:
        raise ConfigurationError("spectrum with noise needs a seed")
    return cfg


def _setup(cfg):
    spec = domain_from_config(cfg.get("domain", {"case": "interval", "b": 1.0}))
    potential = potential_from_config(cfg.get("potential"), spec)
    model = model_from_config(cfg.get("noise", {"name": "none"}))
    return spec, potential, model


def _params(cfg) -> SimParams:
    return SimParams(
        n_paths=cfg.get("n_paths", 2000),
        n_steps=cfg.get("n_steps"),
        bin_width=cfg.get("bin_width"),
        dx=cfg.get("dx"),
        R=cfg.get("R"),
        threads=cfg["threads"],
        symmetric=cfg.get("symmetric", False),
    )


def _metadata(cfg) -> dict:
    # the output location is left out so artifacts do not depend on where they land
    echo = {k: v for k, v in cfg.items() if k != "out"}
    canon = json.dumps(echo, sort_keys=True, separators=(",", ":"))
    return {"config": echo, "version": __version__, "run_id": hashlib.sha1(canon.encode()).hexdigest()}


def _scan_doc(scan: ScanResult) -> dict:
    return {
        "label": scan.label,
        "fit": scan.fit.to_dict() if scan.fit else None,
        "slope": scan.fit.slope if scan.fit else None,
        "meta": {k: v for k, v in scan.meta.items() if k != "normalized"},
    }


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def _noise_check(cfg, out: _Output):
    model = model_from_config(cfg.get("noise", {"name": "white"}))
    rows = []
    for h in (0.5, 0.1, 0.02):
        n = 64
        W = uniform_gram(n, h, model)
        ev = np.linalg.eigvalsh(W)
        scale = max(float(np.abs(ev).max()), 1e-300)
        psd_factor(W)
        f = StepFunction(0.0, h, np.ones(n))
        rows.append((h, n, float(ev[0]), float(ev[-1]), bool(ev[0] >= -1e-10 * scale), seminorm_sq(f, model)))
    out.csv("noise-check.csv", ["bin_width", "n_cells", "min_eigenvalue", "max_eigenvalue", "psd", "indicator_seminorm_sq"], rows)
    out.json("noise-check.json", {**_metadata(cfg), "d_exponent": d_exponent(model), "support_radius": model.support_radius})


def _lt_scaling(cfg, out: _Output):
    rng = np.random.default_rng(cfg["seed"])
    n = cfg.get("n_paths", 10000)
    if cfg.get("mode", "lq") == "gamma":
        spec, _, model = _setup(cfg)
        scan = gamma_lt_scaling(model, spec, cfg["t_list"], n, rng)
    else:
        scan = scaling_study(cfg.get("q", 2.0), cfg["t_list"], n, rng)
    out.csv("lt-scaling.csv", ["t", "estimate", "stderr", "n"], scan.rows())
    out.json("lt-scaling.json", {**_metadata(cfg), **_scan_doc(scan)})


def _trace(cfg, out: _Output):
    spec, potential, model = _setup(cfg)
    rng = np.random.default_rng(cfg["seed"])
    params = _params(cfg)
    rows = []
    for t in cfg["t_list"]:
        m, v = trace_moments(t, spec, potential, model, params, rng)
        rows.append((t, m.mean, m.stderr_mean, v.variance, v.stderr_variance, params.n_paths))
    out.csv("trace.csv", ["t", "mean", "mean_stderr", "var_estimate", "var_stderr", "n_paths"], rows)
    out.json("trace.json", _metadata(cfg))


def _variance_scan(cfg, out: _Output, name="variance-scan"):
    spec, potential, model = _setup(cfg)
    rng = np.random.default_rng(cfg["seed"])
    scan = variance_scan(cfg["t_list"], spec, potential, model, _params(cfg), rng)
    out.csv(f"{name}.csv", ["t", "var_estimate", "stderr", "n_paths"], scan.rows())
    out.json(f"{name}.json", {**_metadata(cfg), **_scan_doc(scan)})
    return spec, potential, model, scan


def _spectrum(cfg, out: _Output):
    spec, potential, model = _setup(cfg)
    n = cfg.get("n_grid", 512)
    rng = np.random.default_rng(cfg["seed"]) if "seed" in cfg else None
    op = discretize(spec, potential, model, n, cfg.get("R"), rng)
    k = min(cfg.get("k", 10), op.n)
    lam = eigenvalues(op, k)
    out.csv("spectrum.csv", ["k", "eigenvalue"], [(i + 1, float(v)) for i, v in enumerate(lam)])
    doc = {**_metadata(cfg), "grid": {"lo": op.lo, "hi": op.hi, "h": op.h, "left": op.left, "right": op.right}}
    doc["traces"] = [{"t": t, "trace": direct_trace(op, t)} for t in cfg["t_list"]]
    if "n_realizations" in cfg:
        doc["moments"] = [
            direct_variance(t, spec, potential, model, cfg["n_realizations"], rng, n, cfg.get("R"), cfg["threads"]).to_dict()
            for t in cfg["t_list"]
        ]
    out.json("spectrum.json", doc)


def _airy(cfg, out: _Output):
    rows = []
    for t in cfg["t_list"]:
        c = variance_closed_form(t)
        qd = variance_quadrature(t)
        rows.append((t, c, qd, abs(qd - c) / c))
    out.csv("airy.csv", ["t", "closed_form", "quadrature", "rel_diff"], rows)
    out.json("airy.json", _metadata(cfg))


def _report(cfg, out: _Output):
    spec, potential, model, scan = _variance_scan(cfg, out, name="report-scan")
    doc, text = rigidity_report(spec, model, potential.growth, [scan])
    rows = [
        (e["label"], e["fit"]["slope"], e["fit"]["slope_ci_95"][0], e["fit"]["slope_ci_95"][1], e["status"])
        for e in doc["scans"]
    ]
    out.csv("report.csv", ["label", "slope", "ci_low", "ci_high", "status"], rows)
    out.json("report.json", {**_metadata(cfg), "report": doc})
    out.text("report.txt", text)


_DISPATCH = {
    "noise-check": _noise_check,
    "lt-scaling": _lt_scaling,
    "trace": _trace,
    "variance-scan": _variance_scan,
    "spectrum": _spectrum,
    "airy": _airy,
    "report": _report,
}


def run(cfg: dict) -> None:
    """Execute a validated, merged config and write its artifacts."""
    out = _Output()
    _DISPATCH[cfg["subcommand"]](cfg, out)
    out.commit(cfg["out"])


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fkrigidity", description="Trace-variance experiments for random Schroedinger operators.")
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--t", help="comma-separated t values")
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--q", type=float, help="L^q exponent for lt-scaling")
    p.add_argument("--n-paths", dest="n_paths", type=int)
    return p


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (ConfigurationError, InputError)):
        return 2
    if isinstance(exc, RigidityError):
        return 3
    if isinstance(exc, (ValueError, TypeError)):
        return 2
    return 3


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _merge(load_config(args.config), args)
        run(cfg)
    except (RigidityError, ValueError, TypeError, ArithmeticError, OSError) as exc:
        code = _exit_code(exc)
        if isinstance(exc, OSError):
            code = 2
        sys.stderr.write(json.dumps({"error": type(exc).__name__, "message": str(exc), "exit_status": code}) + "\n")
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
