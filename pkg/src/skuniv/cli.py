"""Batch experiment driver.

    skuniv compare-fe --env-a rademacher --env-b gaussian --n 6,8,10 --beta 1 --replicas 2000 --seed 7

Every command sweeps the cartesian product of its list flags, prints a CSV
table to stdout and, with ``--output-dir``, writes ``<command>.csv`` and a
``<command>.json`` report (config echo plus per-cell records).

Exit codes: 0 ok, 1 usage/validation error, 2 a comparison was ``violated``,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import time
from pathlib import Path

from . import estimators, universality
from .disorder import CATALOG, analytic_moments, environment
from .errors import NumericalError, ValidationError
from .spin_model import ModelParams

SCHEMA_VERSION = 1

COMMANDS = ("free-energy", "ground-state", "compare-fe", "compare-gs", "interpolate", "ibp-check",
            "fluctuations", "bounds-table")

DEFAULTS = {
    "env": "gaussian",
    "env_a": "rademacher",
    "env_b": "gaussian",
    "n": "8",
    "p": 2,
    "beta": "1",
    "h": "0",
    "replicas": 1000,
    "seed": 0,
    "grid_points": 21,
    "t0": 1.0,
    "function": "all",
    "c_theorem2": 16.0,
    "c_prop2": 16.0,
    "c_lemma3": 16.0,
    "c_prop2_ground_state": 16.0,
    "output_dir": None,
    "format": "both",
    "jobs": None,
    "sharper": False,
    "scaled_beta": False,
    "rate": "third",
    "limit": None,
    "bootstrap": 0,
}


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(v):
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, float):
        return f"{v:.17g}"
    if v is None:
        return ""
    return str(v)


def _floats(text) -> list[float]:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError as exc:
        raise ValidationError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def _ints(text) -> list[int]:
    vals = _floats(text)
    if any(v != int(v) for v in vals):
        raise ValidationError(f"expected integers, got {text!r}")
    return [int(v) for v in vals]


def _envs(text):
    if isinstance(text, dict):
        return [environment(text)]
    if str(text).strip() == "catalog":
        return [environment(name) for name in CATALOG]
    return [environment(text)]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="skuniv", description="Exact SK / p-spin disorder-universality experiments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with any of the flags below (flags win)")
        sp.add_argument("--env", help="catalog name, JSON object, or 'catalog'")
        sp.add_argument("--env-a", dest="env_a")
        sp.add_argument("--env-b", dest="env_b")
        sp.add_argument("--n", help="comma-separated list")
        sp.add_argument("--p", type=int)
        sp.add_argument("--beta", help="comma-separated list")
        sp.add_argument("--h", help="comma-separated list")
        sp.add_argument("--replicas", type=int)
        sp.add_argument("--seed", type=int)
        sp.add_argument("--grid-points", dest="grid_points", type=int)
        sp.add_argument("--t0", type=float)
        sp.add_argument("--function", help="sin, cos, cubic_over_quadratic, gibbs, identity or all")
        sp.add_argument("--c-theorem2", dest="c_theorem2", type=float)
        sp.add_argument("--c-prop2", dest="c_prop2", type=float)
        sp.add_argument("--c-lemma3", dest="c_lemma3", type=float)
        sp.add_argument("--c-prop2-ground-state", dest="c_prop2_ground_state", type=float)
        sp.add_argument("--output-dir", dest="output_dir")
        sp.add_argument("--format", choices=("csv", "json", "both"))
        sp.add_argument("--jobs", type=int)
        sp.add_argument("--sharper", action="store_const", const=True,
                        help="compare-fe: use the symmetric-class beta^4/n rate")
        sp.add_argument("--scaled-beta", dest="scaled_beta", action="store_const", const=True,
                        help="interpret --beta as beta/sqrt(n^(p-1))")
        sp.add_argument("--rate", choices=("third", "fourth"), help="compare-gs bound rate")
        sp.add_argument("--limit", type=int, help="override the exact-enumeration n limit")
        sp.add_argument("--bootstrap", type=int, help="free-energy: bootstrap resamples for the stderr (0 = plain)")
    return parser


def resolve_config(argv) -> dict:
    args = vars(build_parser().parse_args(argv))
    config = dict(DEFAULTS)
    path = args.pop("config")
    if path:
        try:
            loaded = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from exc
        unknown = set(loaded) - set(DEFAULTS) - {"command"}
        if unknown:
            raise UsageError(f"unknown config fields: {sorted(unknown)}")
        loaded.pop("command", None)
        config.update(loaded)
    for key, value in args.items():
        if value is not None:
            config[key] = value
    return _validate(config)


def _validate(cfg: dict) -> dict:
    cfg["n"] = _ints(cfg["n"])
    cfg["beta"] = _floats(cfg["beta"])
    cfg["h"] = _floats(cfg["h"])
    if any(n < 1 for n in cfg["n"]):
        raise ValidationError("n must be >= 1")
    if cfg["p"] < 2:
        raise ValidationError("p must be >= 2")
    if cfg["replicas"] < 2:
        raise ValidationError("replicas must be >= 2")
    if cfg["jobs"] is not None and cfg["jobs"] < 1:
        raise ValidationError("jobs must be >= 1")
    cfg["bounds"] = universality.BoundSpec(cfg["c_theorem2"], cfg["c_prop2"], cfg["c_lemma3"],
                                           cfg["c_prop2_ground_state"])
    if cfg["command"] in ("free-energy", "ground-state", "interpolate", "ibp-check", "fluctuations", "bounds-table"):
        cfg["envs"] = _envs(cfg["env"])
    else:
        cfg["envs"] = [environment(cfg["env_a"]), environment(cfg["env_b"])]
    return cfg


def _beta_for(cfg, b, n):
    if cfg["scaled_beta"]:
        return b * math.sqrt(float(n) ** (cfg["p"] - 1))
    return b


def _cells(cfg):
    return itertools.product(cfg["envs"], cfg["n"], cfg["beta"], cfg["h"])


def _run_free_energy(cfg):
    rows, records = [], []
    for env, n, b, h in _cells(cfg):
        params = ModelParams(n, cfg["p"], _beta_for(cfg, b, n), h)
        est = estimators.estimate_free_energy(env, params, cfg["replicas"], cfg["seed"], jobs=cfg["jobs"],
                                              bootstrap=cfg["bootstrap"], limit=cfg["limit"])
        rows.append({"env": env.env_id, "n": n, "p": params.p, "beta": params.beta, "h": h,
                     "replicas": est.replicas, "seed": cfg["seed"], "alpha_hat": est.alpha_hat,
                     "stderr": est.stderr})
        records.append(est.to_json())
    return rows, records, False


def _run_ground_state(cfg):
    rows, records = [], []
    for env, n in itertools.product(cfg["envs"], cfg["n"]):
        est = estimators.estimate_ground_state_density(env, n, cfg["replicas"], cfg["seed"], p=cfg["p"],
                                                       jobs=cfg["jobs"], limit=cfg["limit"])
        rows.append({"env": env.env_id, "n": n, "p": cfg["p"], "replicas": est.replicas, "seed": cfg["seed"],
                     "density_hat": est.density_hat, "stderr": est.stderr})
        records.append(est.to_json())
    return rows, records, False


def _run_compare_fe(cfg):
    env_a, env_b = cfg["envs"]
    rows, records, violated = [], [], False
    for n, b, h in itertools.product(cfg["n"], cfg["beta"], cfg["h"]):
        params = ModelParams(n, cfg["p"], _beta_for(cfg, b, n), h)
        rep = universality.compare_free_energy(env_a, env_b, params, cfg["replicas"], cfg["seed"], cfg["bounds"],
                                               sharper=cfg["sharper"], jobs=cfg["jobs"], limit=cfg["limit"])
        violated |= rep.verdict == "violated"
        rows.append(rep.csv_row())
        records.append(rep.to_json())
    return rows, records, violated


def _run_compare_gs(cfg):
    env_a, env_b = cfg["envs"]
    rows, records, violated = [], [], False
    for n in cfg["n"]:
        rep = universality.compare_ground_state(env_a, env_b, n, cfg["replicas"], cfg["seed"], cfg["bounds"],
                                                rate=cfg["rate"], jobs=cfg["jobs"], limit=cfg["limit"])
        violated |= rep.verdict == "violated"
        rows.append(rep.csv_row())
        records.append(rep.to_json())
    return rows, records, violated


def _run_interpolate(cfg):
    rows, records = [], []
    for env, n, h in itertools.product(cfg["envs"], cfg["n"], cfg["h"]):
        scan = estimators.scan_interpolation_path(env, n, cfg["t0"], p=cfg["p"], h=h, grid_points=cfg["grid_points"],
                                                  replicas=cfg["replicas"], master_seed=cfg["seed"],
                                                  jobs=cfg["jobs"], limit=cfg["limit"])
        bound = scan.path_bound(analytic_moments(env).abs_third)
        for smp in scan.samples:
            rows.append({"env": env.env_id, "n": n, "p": cfg["p"], "h": h, "t0": cfg["t0"],
                         "replicas": scan.replicas, "seed": cfg["seed"], "s": smp.s, "alpha_s": smp.alpha_s,
                         "alpha_stderr": smp.alpha_stderr, "deriv_fd": smp.deriv_fd,
                         "deriv_stderr": smp.deriv_stderr, "path_bound": bound,
                         "fd_bias_allowance": scan.fd_bias_allowance})
        records.append(scan.to_json())
    return rows, records, False


def _ibp_functions(name):
    catalog = {"sin": estimators.SIN, "cos": estimators.COS, "cubic_over_quadratic": estimators.RATIONAL,
               "identity": estimators.IDENTITY}
    if name == "all":
        return estimators.test_function_catalog()
    if name == "gibbs":
        return [estimators.gibbs_test_function()]
    if name not in catalog:
        raise ValidationError(f"unknown test function {name!r}")
    return [catalog[name]]


def _run_ibp(cfg):
    rows, records = [], []
    for env in cfg["envs"]:
        for fn in _ibp_functions(cfg["function"]):
            rep = estimators.ibp_defect(env, fn)
            rows.append({"env": rep.env_id, "function": rep.function_id, "method": rep.method,
                         "defect": rep.defect, "bound3": rep.bound3, "bound4": rep.bound4})
            records.append(rep.to_json())
    return rows, records, False


def _run_fluctuations(cfg):
    rows, records = [], []
    for env, n, b, h in _cells(cfg):
        params = ModelParams(n, cfg["p"], _beta_for(cfg, b, n), h)
        est = estimators.estimate_fluctuation_moment(env, params, cfg["replicas"], cfg["seed"], jobs=cfg["jobs"],
                                                     limit=cfg["limit"])
        rows.append({"env": env.env_id, "n": n, "p": params.p, "beta": params.beta, "h": h, "d": est.d,
                     "beta_scaled": est.beta_scaled, "replicas": est.replicas, "seed": cfg["seed"],
                     "third_abs_central": est.third_abs_central, "stderr": est.stderr,
                     "lemma3_bound": universality.lemma3_bound(env, est.d, est.beta_scaled, cfg["bounds"])})
        records.append(est.to_json())
    return rows, records, False


def _run_bounds(cfg):
    rows = []
    for env, n, b in itertools.product(cfg["envs"], cfg["n"], cfg["beta"]):
        beta = _beta_for(cfg, b, n)
        mom = analytic_moments(env)
        row = {"env": env.env_id, "n": n, "p": cfg["p"], "beta": beta,
               "free_energy_bound": universality.pspin_bound(env, n, cfg["p"], beta),
               "symmetric_bound": None, "ground_state_bound": universality.theorem2_bound(env, n, cfg["bounds"]),
               "ground_state_bound_fourth": None}
        if mom.symmetric_class:
            row["symmetric_bound"] = universality.symmetric_bound(env, n, beta, cfg["bounds"])
            row["ground_state_bound_fourth"] = universality.theorem2_bound(env, n, cfg["bounds"], rate="fourth")
        rows.append(row)
    return rows, list(rows), False


RUNNERS = {
    "free-energy": _run_free_energy,
    "ground-state": _run_ground_state,
    "compare-fe": _run_compare_fe,
    "compare-gs": _run_compare_gs,
    "interpolate": _run_interpolate,
    "ibp-check": _run_ibp,
    "fluctuations": _run_fluctuations,
    "bounds-table": _run_bounds,
}


def render_csv(rows) -> str:
    buf = io.StringIO()
    if not rows:
        return ""
    fields = ["schema_version"] + list(rows[0])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([SCHEMA_VERSION] + [_fmt(row[k]) for k in fields[1:]])
    return buf.getvalue()


def _config_echo(cfg):
    out = {k: v for k, v in cfg.items() if k not in ("bounds", "envs")}
    out["envs"] = [e.to_json() for e in cfg["envs"]]
    return out


def run(argv=None, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    try:
        cfg = resolve_config(argv)
        rows, records, violated = RUNNERS[cfg["command"]](cfg)
        text = render_csv(rows)
        stdout.write(text)
        if cfg["output_dir"]:
            out = Path(cfg["output_dir"])
            out.mkdir(parents=True, exist_ok=True)
            if cfg["format"] in ("csv", "both"):
                (out / f"{cfg['command']}.csv").write_text(text)
            if cfg["format"] in ("json", "both"):
                report = {"generated_at": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
                          "schema_version": SCHEMA_VERSION, "config": _config_echo(cfg), "results": records}
                (out / f"{cfg['command']}.json").write_text(json.dumps(report, indent=2, default=_json_default))
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 2 if violated else 0


def _json_default(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "tolist"):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
