"""pluripot command line.

Exit status: 0 success, 1 unreadable scenario or arguments, 2 failed preset
check, 3 a ladder that did not converge.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import builtins as B
from . import indicator as ind
from .convex import TOL_ENV, convexity_defect, envelope, monotonicity_defect, pointwise_min
from .geodesics import DeviationMetric, connectivity_test, toric_geodesic
from .grid import write_csv, write_grid
from .ladder import LadderConfig
from .presets import PRESETS
from .residual import asymptotic_rooftop, residual, residual_green, residual_poisson
from .scenario import COMMANDS, Scenario, ScenarioError, build_input, load, parse_gamma

SCHEMA = "report-v1"
EXIT_OK, EXIT_CONFIG, EXIT_CHECK, EXIT_NONCONVERGED = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="scenario TOML file")
    p.add_argument("--domain", choices=["ball", "polydisk", "disk"], help="grid kind")
    p.add_argument("--n", type=int, help="toric dimension")
    p.add_argument("--nodes", type=int, help="toric nodes per axis")
    p.add_argument("--size", type=int, help="disk grid nodes per axis")
    p.add_argument("--t-min", type=float, help="truncation depth in log units")
    p.add_argument("--floor", type=float, help="value standing for -infinity")
    p.add_argument("--tol-env", type=float, help="override the envelope tolerance")
    p.add_argument("--ladder-max", type=int, help="maximal number of ladder rungs")
    p.add_argument("--tail", help="recession set attached to toric inputs, e.g. '[[1,0]]'")
    p.add_argument("--serial", action="store_true", help="single worker, fixed order")
    p.add_argument("--out", help="output directory (else $PLURIPOT_OUT)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pluripot", description="Envelopes, residual functions and geodesics on model domains.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in COMMANDS:
        p = sub.add_parser(cmd)
        _common(p)
        if cmd == "experiment":
            p.add_argument("preset", nargs="?", choices=sorted(PRESETS))
        elif cmd == "indicator":
            p.add_argument("--gamma", help="generator rows, e.g. '[[1,0],[0,1]]'")
            p.add_argument("--gamma2", help="second set for the semiring operations")
        else:
            for name in COMMANDS[cmd]:
                p.add_argument(f"--{name}", help=f"input {name}: built-in key or file:<path>")
            if "phi" in COMMANDS[cmd]:
                p.add_argument("--input", dest="phi_alias", help="same as --phi")
            if cmd == "geodesic":
                p.add_argument("--times", type=int, default=9, help="number of time slices")
    return parser


def _scenario(args) -> Scenario:
    if args.config:
        try:
            sc = load(args.config)
        except OSError as exc:
            raise ScenarioError(f"cannot read {args.config}: {exc}") from exc
        if sc.command != args.command:
            raise ScenarioError(f"config is for {sc.command!r}, not {args.command!r}")
    else:
        kind = args.domain or "ball"
        sc = Scenario(args.command, {}, B.GridSpec(kind=kind), LadderConfig())
    over = {k: v for k, v in (("kind", args.domain), ("n", args.n), ("nodes", args.nodes), ("size", args.size),
                              ("t_min", args.t_min), ("floor", args.floor)) if v is not None}
    if over:
        sc.grid = dataclasses.replace(sc.grid, **over)
    if args.ladder_max is not None:
        try:
            sc.ladder = dataclasses.replace(sc.ladder, k_max=args.ladder_max)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from exc
    if args.command == "experiment":
        if args.preset:
            sc.options["preset"] = args.preset
        if "preset" not in sc.options:
            raise ScenarioError("experiment needs a preset name")
        if sc.options["preset"] not in PRESETS:
            raise ScenarioError(f"unknown preset {sc.options['preset']!r}")
    elif args.command == "indicator":
        for name in ("gamma", "gamma2"):
            val = getattr(args, name)
            if val is not None:
                sc.inputs[name] = json.loads(val)
        if "gamma" not in sc.inputs:
            raise ScenarioError("indicator needs --gamma")
    else:
        for name in COMMANDS[args.command]:
            val = getattr(args, name, None)
            if name == "phi" and val is None:
                val = getattr(args, "phi_alias", None)
            if val is not None:
                sc.inputs[name] = val
            if name not in sc.inputs:
                raise ScenarioError(f"{args.command} needs --{name}")
    return sc


def _inputs(sc: Scenario, args) -> dict:
    tail = None
    if args.tail:
        try:
            tail = parse_gamma(json.loads(args.tail))
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"--tail is not a JSON list: {exc}") from exc
    out = {}
    for name in COMMANDS[sc.command]:
        u = build_input(sc.inputs[name], sc.grid, sc.source)
        if tail is not None and not u.is_disk:
            u = u.replace(tail=None if tail.is_orthant() else tail)
        out[name] = u
    return out


class Output:
    def __init__(self, directory: Path):
        self.dir = directory
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files = []

    def grid(self, name, u):
        write_grid(u, self.dir / f"{name}.pgf")
        write_csv(u, self.dir / f"{name}.csv")
        self.files += [f"{name}.pgf", f"{name}.csv"]

    def table(self, name, rows):
        with open(self.dir / f"{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            for row in rows:
                w.writerow([repr(x) if isinstance(x, float) else x for x in row])
        self.files.append(f"{name}.csv")

    def report(self, body: dict):
        body = {"schema": SCHEMA, **body, "files": sorted(self.files)}
        text = json.dumps(_jsonable(body), indent=2, sort_keys=True, allow_nan=True)
        (self.dir / "report.json").write_text(text + "\n")
        return body


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.generic):
        return x.item()
    return x


def _grid_report(u) -> dict:
    inside = u.mask
    return {"min": float(u.values[inside].min()), "max": float(u.values[inside].max()),
            "floor_nodes": int(u.floor_set.sum())}


def run(sc: Scenario, args, out: Output) -> int:
    cmd = sc.command
    workers = 1 if args.serial else 2
    body = {"command": cmd, "grid": dataclasses.asdict(sc.grid), "ladder": dataclasses.asdict(sc.ladder)}
    status = EXIT_OK
    if cmd == "experiment":
        key = sc.options["preset"]
        fn = PRESETS[key]
        res = fn(sc.ladder, workers=workers) if key == "two-pole" else fn(sc.ladder)
        for name, u in res.grids.items():
            out.grid(name, u)
        for name, rows in res.tables.items():
            out.table(name, rows)
        body.update(preset=key, result=res.report, checks=[c.as_dict() for c in res.checks],
                    passed=res.passed, converged=res.converged)
        for c in res.checks:
            if c.volatile:
                print(f"{c.name}: {c.value:.3g} ({'ok' if c.passed else 'FAILED'})", file=sys.stderr)
        status = EXIT_CHECK if not res.passed else (EXIT_NONCONVERGED if not res.converged else EXIT_OK)
        out.report(body)
        return status
    if cmd == "indicator":
        return _indicator(sc, body, out)

    fx = _inputs(sc, args)
    if cmd == "envelope":
        env, info = envelope(fx["h"], info=True)
        out.grid("envelope", env)
        body.update(degenerate=info.degenerate, clipped_fraction=info.clipped_fraction, result=_grid_report(env))
        if not env.is_disk:
            body.update(convexity_defect=convexity_defect(env), monotonicity_defect=monotonicity_defect(env))
    elif cmd == "rooftop":
        roof = envelope(pointwise_min(fx["u"], fx["v"]))
        out.grid("rooftop", roof)
        body.update(result=_grid_report(roof))
    elif cmd in ("residual", "residual-green", "residual-poisson"):
        fn = {"residual": residual, "residual-green": residual_green, "residual-poisson": residual_poisson}[cmd]
        rep = fn(fx["phi"], cfg=sc.ladder) if cmd != "residual" else residual(fx["phi"], sc.ladder)
        out.grid(cmd.replace("-", "_"), rep.g)
        body.update(ladder_report=rep.summary(), result=_grid_report(rep.g))
        status = EXIT_OK if rep.converged else EXIT_NONCONVERGED
    elif cmd == "asymptotic-rooftop":
        rep = asymptotic_rooftop(fx["phi"], fx["psi"], sc.ladder)
        out.grid("asymptotic_rooftop", rep.g)
        body.update(ladder_report=rep.summary(), result=_grid_report(rep.g))
        status = EXIT_OK if rep.converged else EXIT_NONCONVERGED
    elif cmd == "geodesic":
        times = np.linspace(0.0, 1.0, max(2, args.times))
        fam = toric_geodesic(fx["u0"], fx["u1"], times)
        rows = [("t", "chord_residual", "dev_u0_0.01", "dev_u1_0.01")]
        for k, (t, u) in enumerate(zip(fam.times, fam.slices)):
            out.grid(f"slice_{k:03d}", u)
            chord = float(np.max(u.values - ((1 - t) * fam.u0.values + t * fam.u1.values)))
            d0 = DeviationMetric.between(u, fam.u0).as_dict()["0.01"]
            d1 = DeviationMetric.between(u, fam.u1).as_dict()["0.01"]
            rows.append((t, chord, d0, d1))
        out.table("geodesic_metrics", rows)
        body.update(times=list(fam.times), chord_defect=fam.chord_defect(),
                    convexity_defect=fam.convexity_defect(), endpoints=fam.endpoint_metrics())
    elif cmd == "connectivity":
        rep = connectivity_test(fx["u0"], fx["u1"], sc.ladder, workers=workers)
        body.update(result=rep.summary())
        status = EXIT_OK if rep.converged else EXIT_NONCONVERGED
    out.report(body)
    return status


def _indicator(sc: Scenario, body: dict, out: Output) -> int:
    g1 = parse_gamma(sc.inputs["gamma"], sc.source)
    spec = sc.grid if sc.grid.kind != "disk" else B.GridSpec(kind="polydisk")
    spec = dataclasses.replace(spec, n=g1.n)
    key = "indicator:" + json.dumps(g1.to_literal())
    out.grid("indicator", B.make(key, spec))
    res = {"gamma": g1.to_literal(), "covolume": None if g1.covolume() is None else str(g1.covolume()),
           "touches_boundary": g1.touches_boundary(),
           "lelong_axes": [str(ind.lelong_directional(g1, [int(i == j) for i in range(g1.n)]))
                           for j in range(g1.n)]}
    if "gamma2" in sc.inputs:
        g2 = parse_gamma(sc.inputs["gamma2"], sc.source)
        try:
            res.update(intersect=ind.intersect(g1, g2).to_literal(),
                       hull_union=ind.hull_union(g1, g2).to_literal(),
                       minkowski_sum=ind.minkowski_sum(g1, g2).to_literal())
        except ind.DimensionError as exc:
            raise ScenarioError(str(exc)) from exc
    body["result"] = res
    out.report(body)
    return EXIT_OK


def _out_dir(args, sc: Scenario) -> Path:
    return Path(args.out or os.environ.get("PLURIPOT_OUT") or sc.output or "pluripot-out")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    token = TOL_ENV.set(args.tol_env) if args.tol_env is not None else None
    try:
        sc = _scenario(args)
        out = Output(_out_dir(args, sc))
        status = run(sc, args, out)
    except ScenarioError as exc:
        print(f"pluripot: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    finally:
        if token is not None:
            TOL_ENV.reset(token)
    print(json.dumps({"status": status, "report": str(out.dir / "report.json")}))
    return status


if __name__ == "__main__":
    sys.exit(main())
