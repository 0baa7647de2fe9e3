"""Command-line front end: reproduce figure data, analyze cause-effect
pairs, run simulations, verify the permutation-equality theorem, fetch data.

Exit codes: 0 success, 2 validation error, 3 numeric failure, 4 I/O or
network failure. Every output is byte-identical for identical flags and
seed, independent of --jobs.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .errors import (
    ContractError,
    DegenerateIntervalError,
    DomainError,
    FetchError,
    ParseError,
    QuadratureError,
    UnsupportedPairError,
    ZeroDensityError,
)
from .hsic import direction_by_dependence
from .pairs import (
    DEFAULT_BASE_URL,
    PairMeta,
    fetch_pairs,
    load_pair,
    load_pair_by_id,
    resolve_data_dir,
    restrict_days,
)
from .population import (
    DEFAULT_CONFIG,
    HETEROSKEDASTIC,
    HOMOSKEDASTIC,
    SCENARIOS,
    curve_point,
    scenario_model,
    scenario_param_name,
)
from .scoring import gaussian_direction, verify_theorem1
from .sem import random_linear_sem, sample_bivariate

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_NUMERIC = 3
EXIT_IO = 4

_RESTRICT_MODES = {"none": "none", "summer": "summer_window", "first183": "first_183"}
_FIT_FLAGS = {"homo": HOMOSKEDASTIC, "het": HETEROSKEDASTIC}


def _derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence((int(seed), int(index))).generate_state(1)[0])


def _parse_grid(spec: str) -> np.ndarray:
    parts = spec.split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] != "log"):
        raise DomainError(f"grid must be lo:hi:count[:log], got {spec!r}")
    try:
        lo, hi, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError as exc:
        raise DomainError(f"grid must be lo:hi:count[:log], got {spec!r}") from exc
    if count < 1 or hi < lo:
        raise DomainError(f"grid needs lo <= hi and count >= 1, got {spec!r}")
    if len(parts) == 4:
        if lo <= 0.0:
            raise DomainError("log grids require lo > 0")
        return np.geomspace(lo, hi, count)
    return np.linspace(lo, hi, count)


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, float):
        return format(v, ".17g")
    return str(v)


def _write_text(out: str | None, text: str) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_csv(out, header, rows, meta: dict) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    lines.append("# " + ", ".join(f"{k}={v}" for k, v in meta.items()))
    _write_text(out, "\n".join(lines) + "\n")


def _write_json(out, obj) -> None:
    _write_text(out, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _pmap(fn, tasks, jobs: int):
    tasks = list(tasks)
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


def _curve_task(task):
    scenario, param, fit, beta = task
    return curve_point(scenario, float(param), fit, DEFAULT_CONFIG, beta)


def cmd_curves(ns) -> int:
    fit = _FIT_FLAGS[ns.fit] if ns.fit else None
    grid = _parse_grid(ns.grid)
    tasks = [(ns.scenario, p, fit, ns.beta) for p in grid]
    points = _pmap(_curve_task, tasks, ns.jobs)
    meta = {
        "seed": ns.seed if ns.seed is not None else "none",
        "version": __version__,
        "method": points[0].method if points else "population",
    }
    param_name = scenario_param_name(ns.scenario)
    if ns.format == "json":
        _write_json(ns.out, {
            "meta": dict(meta, scenario=ns.scenario, param=param_name),
            "rows": [vars(p) for p in points],
        })
    else:
        _write_csv(
            ns.out,
            ["param", "delta", "exp_delta_sq", "method", "fit"],
            [(p.param, p.delta, p.exp_delta_sq, p.method, p.fit) for p in points],
            meta,
        )
    return EXIT_OK


def _load_cli_pair(ns):
    if ns.file:
        meta = PairMeta(pair_id=ns.id or 0, cause_col=1, effect_col=2, weight=1.0)
        return load_pair(ns.file, meta), str(ns.file)
    if ns.id is None:
        raise DomainError("pair analysis needs --file or --id")
    data_dir = resolve_data_dir(ns.data_dir)
    if data_dir is None:
        raise DomainError("--id requires --data-dir or CAUSAL_GAP_DATA_DIR")
    return load_pair_by_id(data_dir, ns.id), str(data_dir / f"pair{ns.id:04d}.txt")


def cmd_pair(ns) -> int:
    if ns.format == "csv":
        raise DomainError("pair reports are JSON; use --format json")
    methods = [ns.method] if ns.method != "all" else ["gauss", "gauss-het", "hsic"]
    if "hsic" in methods and ns.seed is None:
        raise DomainError("--seed is required when HSIC is among the methods")
    pair, source = _load_cli_pair(ns)
    restricted = restrict_days(pair, _RESTRICT_MODES[ns.restrict])
    report: dict = {
        "pair": {
            "id": pair.id,
            "source": source,
            "rows_in": pair.rows_in,
            "rows_dropped_nonfinite": pair.rows_dropped,
            "restriction": _RESTRICT_MODES[ns.restrict],
            "rows_used": restricted.rows_used,
        },
        "methods": {},
        "seed": ns.seed,
        "version": __version__,
    }
    for method in methods:
        if method in ("gauss", "gauss-het"):
            fit = HOMOSKEDASTIC if method == "gauss" else HETEROSKEDASTIC
            rep = gaussian_direction(restricted.x, restricted.y, fit)
            report["methods"][method] = {
                "score_fwd": rep.score_fwd,
                "score_bwd": rep.score_bwd,
                "exp_delta_sq_hat": rep.exp_delta_sq_hat,
                "decision": rep.decision,
                "fit": rep.fit,
                "smoother": rep.smoother,
            }
        else:
            rep = direction_by_dependence(restricted.x, restricted.y, ns.perms, ns.seed)
            report["methods"]["hsic"] = {
                "decision": rep.decision,
                "forward": vars(rep.fwd),
                "backward": vars(rep.bwd),
            }
    _write_json(ns.out, report)
    return EXIT_OK


def _simulate_task(task):
    scenario, param, beta, n, rep, rep_seed, methods, perms = task
    model, _ = scenario_model(scenario, param, beta)
    data = sample_bivariate(model, n, rep_seed)
    rows = []
    for method in methods:
        if method in ("gauss", "gauss-het"):
            fit = HOMOSKEDASTIC if method == "gauss" else HETEROSKEDASTIC
            rep_out = gaussian_direction(data[:, 0], data[:, 1], fit)
            rows.append({
                "rep": rep, "method": method, "decision": rep_out.decision,
                "exp_delta_sq_hat": rep_out.exp_delta_sq_hat,
                "score_fwd": rep_out.score_fwd, "score_bwd": rep_out.score_bwd,
                "p_value_fwd": "", "p_value_bwd": "",
            })
        else:
            dep = direction_by_dependence(data[:, 0], data[:, 1], perms, rep_seed)
            rows.append({
                "rep": rep, "method": method, "decision": dep.decision,
                "exp_delta_sq_hat": "",
                "score_fwd": dep.fwd.statistic, "score_bwd": dep.bwd.statistic,
                "p_value_fwd": dep.fwd.p_value, "p_value_bwd": dep.bwd.p_value,
            })
    return rows


_SIM_HEADER = [
    "rep", "method", "decision", "exp_delta_sq_hat", "score_fwd", "score_bwd",
    "p_value_fwd", "p_value_bwd",
    "forward_freq", "backward_freq", "tie_freq", "mean_exp_delta_sq", "se_exp_delta_sq",
]


def cmd_simulate(ns) -> int:
    if ns.seed is None:
        raise DomainError("--seed is required for simulation")
    param_name = scenario_param_name(ns.scenario)
    param = ns.beta if param_name == "beta" else ns.nu
    if param is None:
        raise DomainError(f"scenario {ns.scenario!r} needs --{param_name}")
    scenario_model(ns.scenario, param, ns.beta)  # validate early
    methods = [ns.method] if ns.method != "all" else ["gauss", "gauss-het", "hsic"]
    tasks = [
        (ns.scenario, param, ns.beta, ns.n, rep, _derive_seed(ns.seed, rep), methods, ns.perms)
        for rep in range(ns.reps)
    ]
    per_rep = [row for rows in _pmap(_simulate_task, tasks, ns.jobs) for row in rows]
    table = [[r[k] for k in _SIM_HEADER[:8]] + [""] * 5 for r in per_rep]
    for method in methods:
        rows = [r for r in per_rep if r["method"] == method]
        freqs = {d: sum(r["decision"] == d for r in rows) / len(rows)
                 for d in ("forward", "backward", "tie")}
        est = np.array([r["exp_delta_sq_hat"] for r in rows if r["exp_delta_sq_hat"] != ""])
        mean = float(est.mean()) if est.size else ""
        se = float(est.std(ddof=1) / np.sqrt(est.size)) if est.size > 1 else ""
        table.append(
            ["summary", method, "", "", "", "", "", "",
             freqs["forward"], freqs["backward"], freqs["tie"], mean, se]
        )
    meta = {"seed": ns.seed, "version": __version__, "method": "+".join(methods)}
    if ns.format == "json":
        _write_json(ns.out, {
            "meta": dict(meta, scenario=ns.scenario, n=ns.n, reps=ns.reps),
            "rows": [dict(zip(_SIM_HEADER, row)) for row in table],
        })
    else:
        _write_csv(ns.out, _SIM_HEADER, table, meta)
    return EXIT_OK


def cmd_verify_theorem1(ns) -> int:
    if ns.seed is None:
        raise DomainError("--seed is required for verification")
    sem = random_linear_sem(ns.p, ns.noise, ns.seed)
    report = verify_theorem1(sem, n=ns.n, seed=_derive_seed(ns.seed, 1))
    rows = [
        (
            " ".join(str(j) for j in chk.pi.pi),
            chk.total,
            chk.deviation,
            "|".join(str(j) for j in chk.witnesses),
            "yes" if not chk.witnesses else "no",
        )
        for chk in report.checks
    ]
    meta = {"seed": ns.seed, "version": __version__, "method": "population+sample"}
    if ns.format == "json":
        _write_json(ns.out, {
            "meta": dict(meta, p=ns.p, noise=ns.noise, n=ns.n),
            "true_total": report.true_total,
            "max_abs_deviation": report.max_abs_deviation,
            "all_equal": report.all_equal,
            "rows": [dict(zip(("pi", "total", "deviation", "witnesses", "equality"), r)) for r in rows],
        })
    else:
        _write_csv(ns.out, ["pi", "total", "deviation", "witnesses", "equality"], rows, meta)
    if not report.all_equal:
        print(
            f"permutation totals deviate by {report.max_abs_deviation:.3e} (> 1e-8)",
            file=sys.stderr,
        )
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_fetch(ns) -> int:
    dest = resolve_data_dir(ns.data_dir) or Path(".")
    files = fetch_pairs(ns.ids, ns.base_url, dest)
    for f in files:
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="causalgap",
        description="Gaussian-likelihood scoring gaps for causal direction problems",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, *, seed=True, jobs=True):
        p.add_argument("--out", default=None, help="output path (default stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        if seed:
            p.add_argument("--seed", type=int, default=None)
        if jobs:
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("curves", help="population gap curves over a parameter grid")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--grid", required=True, help="lo:hi:count[:log]")
    p.add_argument("--fit", choices=tuple(_FIT_FLAGS), default=None)
    p.add_argument("--beta", type=float, default=None)
    common(p)
    p.set_defaults(handler=cmd_curves, format_default="csv")

    p = sub.add_parser("pair", help="analyze a cause-effect pair")
    p.add_argument("--file", default=None, help="two-column pair file")
    p.add_argument("--id", type=int, default=None, help="pair id within --data-dir")
    p.add_argument("--restrict", choices=tuple(_RESTRICT_MODES), default="none")
    p.add_argument("--method", choices=("gauss", "gauss-het", "hsic", "all"), default="all")
    p.add_argument("--perms", type=int, default=499)
    p.add_argument("--data-dir", default=None)
    common(p, jobs=False)
    p.set_defaults(handler=cmd_pair, format_default="json")

    p = sub.add_parser("simulate", help="Monte Carlo direction decisions for a model")
    p.add_argument("--scenario", required=True, choices=SCENARIOS)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--nu", type=float, default=None)
    p.add_argument("--n", type=int, default=10_000)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--method", choices=("gauss", "gauss-het", "hsic", "all"), default="gauss")
    p.add_argument("--perms", type=int, default=499)
    common(p)
    p.set_defaults(handler=cmd_simulate, format_default="csv")

    p = sub.add_parser("verify-theorem1", help="permutation score equality and witnesses")
    p.add_argument("--p", type=int, default=4)
    p.add_argument("--noise", choices=("uniform", "gaussian", "chi2", "mixed"), default="uniform")
    p.add_argument("--n", type=int, default=100_000)
    common(p, jobs=False)
    p.set_defaults(handler=cmd_verify_theorem1, format_default="csv")

    p = sub.add_parser("fetch", help="download pair files and metadata")
    p.add_argument("ids", nargs="+", type=int)
    p.add_argument("--base-url", default=DEFAULT_BASE_URL)
    p.add_argument("--data-dir", default=None, help="destination directory")
    p.set_defaults(handler=cmd_fetch, format_default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    if getattr(ns, "format", None) is None:
        ns.format = ns.format_default
    if getattr(ns, "p", None) is not None and ns.command == "verify-theorem1" and ns.p > 6:
        print("verify-theorem1 supports p <= 6", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        return ns.handler(ns)
    except (DomainError, ContractError, ParseError, UnsupportedPairError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (QuadratureError, ZeroDensityError, DegenerateIntervalError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (FetchError, OSError) as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
