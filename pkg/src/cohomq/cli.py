"""Command-line front end.

    cohomq geometry list | describe NAME
    cohomq soliton solve [--step S] [--out-dir DIR]
    cohomq partition solve --geometry NAME --ell L --method dp|refine|segregation
    cohomq curvature q-soliton | coercivity | product-check

Options may also come from a JSON file given with ``--config``; flags on the
command line win.  Exit codes: 0 success, 2 configuration error, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .curvature import (
    OperatorCoefficients,
    constant_coefficients,
    einstein_gjms_coefficients,
    paneitz_coercivity_sufficient,
    product_check,
    yamabe_coefficients,
)
from .errors import ConfigError, NumericalError
from .geometry import Profile, catalog, profile_from_name, validate
from .koiso_cao import solve_soliton, summary, write_csv
from .partition import (
    METHODS,
    attach_solutions,
    default_eta_schedule,
    dp_partition,
    energy_table,
    refine,
    segregation_flow,
    stitch_nodal,
)
from .reduced import critical_exponent

log = logging.getLogger("cohomq")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
CACHE_ENV = "COHOMQ_CACHE_DIR"


@dataclass
class RunConfig:
    command: str
    action: str
    geometry: str | None = None
    operator: str = "yamabe"
    p: float | None = None
    n: int = 200
    G: int = 24
    ell: int = 2
    method: str = "dp"
    eta_start: float = -10.0
    eta_steps: int = 14
    flow_steps: int = 400
    flow_n: int = 400
    tol: float = 1e-10
    step: float = 1e-3
    out_dir: str | None = None
    cache_dir: str | None = None
    jobs: int = 1
    nodal: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.n < 16:
            raise ConfigError("n must be at least 16")
        if self.G < 8:
            raise ConfigError("G must be at least 8")
        if self.ell < 1:
            raise ConfigError("ell must be at least 1")
        if self.ell > self.G - 1:
            raise ConfigError(f"ell = {self.ell} needs more than G - 1 = {self.G - 1} candidate points")
        if self.method not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if self.method == "segregation" and self.ell < 2:
            raise ConfigError("segregation needs ell >= 2")
        if not self.eta_start < 0 or self.eta_steps < 1:
            raise ConfigError("eta schedule needs a negative start and at least one step")
        if self.jobs < 1:
            raise ConfigError("jobs must be positive")
        if not 0 < self.step <= 0.05:
            raise ConfigError("soliton step must lie in (0, 0.05]")
        if self.p is not None and not self.p > 2:
            raise ConfigError("p must exceed 2")


def parse_operator(spec: str, profile: Profile) -> OperatorCoefficients:
    """``yamabe`` | ``const:ALPHA0`` | ``einstein:C1[,C2]``."""
    kind, _, args = spec.partition(":")
    try:
        if kind == "yamabe":
            return yamabe_coefficients(profile)
        if kind == "const":
            return constant_coefficients(float(args))
        if kind in ("einstein", "einstein-factors"):
            cs = [float(x) for x in args.split(",")]
            return einstein_gjms_coefficients(len(cs), cs)
    except ValueError as exc:
        raise ConfigError(f"bad operator arguments in {spec!r}") from exc
    raise ConfigError(f"unknown operator {spec!r}")


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_dump(doc) + "\n")


def _write_columns(path: Path, header, columns) -> int:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in zip(*columns):
            writer.writerow([f"{v:.17g}" for v in row])
    return len(columns[0])


# --- commands ---------------------------------------------------------------


def cmd_geometry(cfg: RunConfig) -> int:
    if cfg.action == "list":
        for name, text in catalog().items():
            print(f"{name:14s} {text}")
        return EXIT_OK
    if not cfg.geometry:
        raise ConfigError("geometry describe needs a name")
    profile = profile_from_name(cfg.geometry, soliton_step=cfg.step)
    report = validate(profile)
    doc = {"profile": profile.to_dict(), "validation": report.to_dict()}
    print(_dump(doc))
    if cfg.out_dir:
        _write_json(Path(cfg.out_dir) / "profile.json", doc)
    return EXIT_OK


def cmd_soliton(cfg: RunConfig) -> int:
    sol = solve_soliton(step=cfg.step)
    doc = summary(sol)
    doc["volume_over_pi_sq"] = doc["volume"] / math.pi**2
    doc["sixQ_start"] = float(6 * sol.Q[0])
    doc["sixQ_end"] = float(6 * sol.Q[-1])
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        doc["rows"] = write_csv(sol, out / "soliton.csv")
        _write_json(out / "summary.json", doc)
    print(_dump(doc))
    return EXIT_OK


def _read_soliton_csv(run_dir: Path) -> dict[str, np.ndarray]:
    path = run_dir / "soliton.csv" if run_dir.is_dir() else run_dir
    if not path.exists():
        raise ConfigError(f"no soliton CSV at {path}")
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ConfigError(f"{path} has no rows")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def cmd_curvature(cfg: RunConfig) -> int:
    x = cfg.extra
    if cfg.action == "coercivity":
        if x.get("Qmin") is None or x.get("Rmin") is None or x.get("N") is None:
            raise ConfigError("coercivity needs --Qmin, --Rmin and --N")
        verdict = paneitz_coercivity_sufficient(float(x["Qmin"]), float(x["Rmin"]), int(x["N"]))
        print(_dump({"verdict": verdict, "Qmin": x["Qmin"], "Rmin": x["Rmin"], "N": x["N"]}))
        return EXIT_OK
    if cfg.action == "product-check":
        if x.get("n2") is None:
            raise ConfigError("product-check needs --n2")
        verdict = product_check(int(x["n2"]), solve_soliton(step=cfg.step))
        print(_dump(verdict.to_dict()))
        return EXIT_OK
    # q-soliton
    if x.get("from_run"):
        data = _read_soliton_csv(Path(x["from_run"]))
        t, Q = data["t"], data["Q"]
        source = str(x["from_run"])
    else:
        sol = solve_soliton(step=cfg.step)
        t, Q = sol.t_grid, sol.Q
        source = f"solve step={cfg.step:g}"
    i = int(np.argmin(Q))
    doc = {
        "source": source,
        "min_Q": float(Q[i]),
        "argmin_t": float(t[i]),
        "max_Q": float(np.max(Q)),
        "sixQ_start": float(6 * Q[0]),
        "sixQ_end": float(6 * Q[-1]),
        "positive": bool(np.all(Q > 0)),
    }
    print(_dump(doc))
    return EXIT_OK


def cmd_partition(cfg: RunConfig) -> int:
    if not cfg.geometry:
        raise ConfigError("partition solve needs --geometry")
    profile = profile_from_name(cfg.geometry, soliton_step=cfg.step)
    coeffs = parse_operator(cfg.operator, profile)
    p = cfg.p if cfg.p is not None else critical_exponent(profile.dim_N, coeffs.m)
    if cfg.nodal and coeffs.m != 1:
        raise ConfigError("--nodal needs a second-order (m = 1) operator")

    table = None
    if cfg.method in ("dp", "refine"):
        table = energy_table(profile, coeffs, p, cfg.G, cfg.n, cache_dir=cfg.cache_dir, jobs=cfg.jobs)
        part = dp_partition(table, cfg.ell)
        # kept out of the output so cached and fresh runs write identical files
        log.info("energy table %s", "loaded from cache" if table.from_cache else "computed")
        if cfg.method == "refine":
            part = refine(profile, coeffs, p, part, tol=cfg.tol, n=cfg.n, window=table.cell)
    else:
        schedule = default_eta_schedule(cfg.eta_steps, cfg.eta_start)
        trajectory, part = segregation_flow(profile, coeffs, p, cfg.ell, schedule, steps=cfg.flow_steps,
                                            n=cfg.flow_n, n_interval=cfg.n)
        part.diagnostics["trajectory"] = [s.to_dict() for s in trajectory]

    if part.solutions is None:
        attach_solutions(part, profile, coeffs, p, cfg.n)
    doc = {"geometry": cfg.geometry, "operator": coeffs.to_dict(), "p": p, "n": cfg.n,
           "partition": part.to_dict()}
    if table is not None:
        doc["G"] = table.G

    if cfg.nodal:
        nodal = stitch_nodal(part, profile, coeffs)
        doc["nodal"] = nodal.diagnostics()
    if cfg.out_dir:
        out = Path(cfg.out_dir)
        _write_json(out / "partition.json", doc)
        for k, sol in enumerate(part.solutions, start=1):
            _write_columns(out / f"interval_{k}.csv", ["t", "w"], [sol.nodes, sol.w])
        if cfg.nodal:
            _write_columns(out / "nodal.csv", ["t", "u"], [nodal.nodes, nodal.u])
    print(_dump(doc))
    return EXIT_OK


COMMANDS = {
    "geometry": cmd_geometry,
    "soliton": cmd_soliton,
    "curvature": cmd_curvature,
    "partition": cmd_partition,
}


# --- argument handling ------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cohomq", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"cohomq {__version__}")
    parser.add_argument("--config", help="JSON file with option values (flags override)")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", required=True)

    geo = sub.add_parser("geometry", help="profile catalog")
    geo_sub = geo.add_subparsers(dest="action", required=True)
    geo_sub.add_parser("list")
    desc = geo_sub.add_parser("describe")
    desc.add_argument("geometry")
    desc.add_argument("--out-dir")
    desc.add_argument("--step", type=float)

    sol = sub.add_parser("soliton", help="Koiso-Cao soliton")
    sol_sub = sol.add_subparsers(dest="action", required=True)
    solve = sol_sub.add_parser("solve")
    solve.add_argument("--step", type=float)
    solve.add_argument("--out-dir", "--out")

    cur = sub.add_parser("curvature", help="curvature predicates")
    cur_sub = cur.add_subparsers(dest="action", required=True)
    qs = cur_sub.add_parser("q-soliton")
    qs.add_argument("--step", type=float)
    qs.add_argument("--from-run", help="directory (or CSV) written by `soliton solve`")
    co = cur_sub.add_parser("coercivity")
    co.add_argument("--Qmin", type=float)
    co.add_argument("--Rmin", type=float)
    co.add_argument("--N", type=int)
    pc = cur_sub.add_parser("product-check")
    pc.add_argument("--n2", type=int)
    pc.add_argument("--step", type=float)

    part = sub.add_parser("partition", help="optimal ell-partitions")
    part_sub = part.add_subparsers(dest="action", required=True)
    ps = part_sub.add_parser("solve")
    ps.add_argument("--geometry")
    ps.add_argument("--operator", help="yamabe | const:ALPHA0 | einstein:C1[,C2]")
    ps.add_argument("--p", type=float)
    ps.add_argument("--n", type=int, help="cells per interval")
    ps.add_argument("--G", type=int, help="candidate breakpoints in the energy table")
    ps.add_argument("--ell", type=int)
    ps.add_argument("--method", choices=METHODS)
    ps.add_argument("--eta-start", type=float)
    ps.add_argument("--eta-steps", type=int)
    ps.add_argument("--flow-steps", type=int)
    ps.add_argument("--flow-n", type=int)
    ps.add_argument("--tol", type=float)
    ps.add_argument("--step", type=float, help="soliton step for koiso-cao")
    ps.add_argument("--out-dir", "--out")
    ps.add_argument("--cache-dir")
    ps.add_argument("--jobs", type=int)
    ps.add_argument("--nodal", action="store_true", default=None)
    ps.add_argument("--seed", type=int)
    return parser


_EXTRA_KEYS = ("Qmin", "Rmin", "N", "n2", "from_run")


def make_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        values.update({k.replace("-", "_"): v for k, v in loaded.items()})
    for key, val in vars(args).items():
        if key in ("config", "log_level") or val is None:
            continue
        values[key] = val
    extra = {k: values.pop(k) for k in _EXTRA_KEYS if k in values}
    known = {f for f in RunConfig.__dataclass_fields__}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown configuration keys: {sorted(unknown)}")
    if values.get("cache_dir") is None and os.environ.get(CACHE_ENV):
        values["cache_dir"] = os.environ[CACHE_ENV]
    cfg = RunConfig(**values, extra=extra)
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = make_config(args)
        log.info("run config: %s", asdict(cfg))
        return COMMANDS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
