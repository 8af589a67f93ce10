"""Scenario files: one TOML document naming a command, its inputs and grid.

Example::

    command = "residual"

    [grid]
    kind = "ball"
    nodes = 257

    [inputs]
    phi = "gball"

    [ladder]
    k_max = 40

Inputs are built-in keys (see :mod:`pluripot.builtins`), or tables holding a
``gamma`` literal (toric indicator), a PGF1 ``file`` with an optional
``tail`` literal, or Riesz data (``atoms``, ``boundary_atoms``, ``density``
file reference) on the disk.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import tomli

from . import builtins
from .grid import GridFunction, read_grid
from .indicator import GammaSet
from .ladder import LadderConfig

COMMANDS = {
    "envelope": ("h",),
    "rooftop": ("u", "v"),
    "residual": ("phi",),
    "residual-green": ("phi",),
    "residual-poisson": ("phi",),
    "asymptotic-rooftop": ("phi", "psi"),
    "geodesic": ("u0", "u1"),
    "connectivity": ("u0", "u1"),
    "indicator": ("gamma",),
    "experiment": (),
}


class ScenarioError(ValueError):
    """A scenario that cannot be run; ``line`` points into the source text."""

    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line else msg)


@dataclass
class Scenario:
    command: str
    inputs: dict
    grid: builtins.GridSpec
    ladder: LadderConfig
    output: str | None = None
    options: dict = field(default_factory=dict)
    source: str = ""

    def function(self, name: str) -> GridFunction:
        return build_input(self.inputs[name], self.grid, self.source)


def _line_of(text: str, key: str) -> int | None:
    pat = re.compile(rf"^\s*\[?\s*[\w.\"-]*{re.escape(key)}\b")
    for i, line in enumerate(text.splitlines(), 1):
        if pat.search(line):
            return i
    return None


def _grid_spec(table: dict, text: str) -> builtins.GridSpec:
    known = {"kind", "n", "nodes", "t_min", "size", "floor"}
    for k in table:
        if k not in known:
            raise ScenarioError(f"unknown grid key {k!r}", _line_of(text, k))
    kind = table.get("kind", "ball")
    if kind not in ("ball", "polydisk", "disk"):
        raise ScenarioError(f"grid kind must be ball, polydisk or disk, not {kind!r}", _line_of(text, "kind"))
    try:
        spec = builtins.GridSpec(
            kind=kind,
            n=int(table.get("n", 2)),
            nodes=int(table.get("nodes", 257)),
            t_min=float(table.get("t_min", builtins.DEFAULT_TMIN)),
            size=int(table.get("size", 256)),
            floor=float(table.get("floor", builtins.DEFAULT_FLOOR)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"bad grid value: {exc}", _line_of(text, "grid")) from exc
    if spec.t_min >= 0 or spec.floor >= 0 or spec.nodes < 3 or spec.size < 8:
        raise ScenarioError("grid needs t_min < 0, floor < 0, nodes >= 3 and size >= 8", _line_of(text, "grid"))
    return spec


def _ladder(table: dict, text: str) -> LadderConfig:
    try:
        return LadderConfig(
            c0=float(table.get("c0", 1.0)),
            k_max=int(table.get("k_max", 40)),
            eps=float(table.get("eps", 1e-6)),
            floor_check=bool(table.get("floor_check", False)),
        )
    except (TypeError, ValueError) as exc:
        raise ScenarioError(str(exc), _line_of(text, "ladder")) from exc


def build_input(spec, grid: builtins.GridSpec, text: str = "") -> GridFunction:
    """Turn one input entry into a grid function."""
    if isinstance(spec, str):
        if spec.startswith("file:") and not Path(spec[5:]).exists():
            raise ScenarioError(f"input file {spec[5:]} does not exist", _line_of(text, spec[5:]))
        try:
            return builtins.make(spec, grid)
        except builtins.UnknownFunctionError as exc:
            raise ScenarioError(f"unknown built-in {spec!r}", _line_of(text, spec)) from exc
        except ValueError as exc:
            raise ScenarioError(str(exc), _line_of(text, spec)) from exc
    if isinstance(spec, dict):
        if "file" in spec:
            path = Path(spec["file"])
            if not path.exists():
                raise ScenarioError(f"input file {path} does not exist", _line_of(text, "file"))
            u = read_grid(path)
            if "tail" in spec:
                u = u.replace(tail=parse_gamma(spec["tail"], text))
            return u
        if "gamma" in spec:
            gamma = parse_gamma(spec["gamma"], text)
            key = "indicator:" + str(gamma.to_literal()).replace("'", '"')
            return builtins.make(key, grid if grid.kind != "disk" else builtins.GridSpec(kind="polydisk"))
        if any(k in spec for k in ("atoms", "boundary_atoms", "density")):
            if grid.kind != "disk":
                raise ScenarioError("Riesz data needs a disk grid", _line_of(text, "atoms"))
            density = None
            if "density" in spec:
                path = Path(spec["density"])
                if not path.exists():
                    raise ScenarioError(f"density file {path} does not exist", _line_of(text, "density"))
                density = np.loadtxt(path, delimiter=",") if path.suffix == ".csv" else np.load(path)
            try:
                return builtins.disk_function(spec.get("atoms", ()), spec.get("boundary_atoms", ()),
                                              density, grid.size, grid.floor)
            except (TypeError, ValueError) as exc:
                raise ScenarioError(str(exc), _line_of(text, "atoms")) from exc
    raise ScenarioError(f"cannot read input {spec!r}")


def parse_gamma(rows, text: str = "") -> GammaSet:
    try:
        return GammaSet.parse(rows)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise ScenarioError(f"bad gamma literal: {exc}", _line_of(text, "gamma")) from exc


def parse(text: str) -> Scenario:
    """Parse and validate scenario text; raises ScenarioError with a line number."""
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise ScenarioError(f"TOML syntax: {exc}", int(m.group(1)) if m else None) from exc
    cmd = doc.get("command")
    if cmd is None:
        raise ScenarioError("missing 'command'")
    if cmd not in COMMANDS:
        raise ScenarioError(f"unknown command {cmd!r}", _line_of(text, "command"))
    inputs = doc.get("inputs", {})
    if not isinstance(inputs, dict):
        raise ScenarioError("'inputs' must be a table", _line_of(text, "inputs"))
    for name in COMMANDS[cmd]:
        if name not in inputs:
            raise ScenarioError(f"command {cmd!r} needs input {name!r}", _line_of(text, "inputs"))
    extra = set(inputs) - set(COMMANDS[cmd]) - {"gamma2"}
    if extra:
        raise ScenarioError(f"unexpected inputs {sorted(extra)}", _line_of(text, sorted(extra)[0]))
    grid = _grid_spec(doc.get("grid", {}), text)
    ladder = _ladder(doc.get("ladder", {}), text)
    options = doc.get("options", {})
    if cmd == "experiment" and "preset" not in options:
        raise ScenarioError("experiment needs options.preset", _line_of(text, "options"))
    if cmd == "indicator":
        parse_gamma(inputs["gamma"], text)
        if "gamma2" in inputs:
            parse_gamma(inputs["gamma2"], text)
    else:
        for name, entry in inputs.items():
            if isinstance(entry, str) and entry.startswith("file:") and not Path(entry[5:]).exists():
                raise ScenarioError(f"input file {entry[5:]} does not exist", _line_of(text, entry[5:]))
    return Scenario(cmd, dict(inputs), grid, ladder, doc.get("output"), dict(options), text)


def load(path) -> Scenario:
    return parse(Path(path).read_text())


def dump(command: str, inputs: dict, grid: builtins.GridSpec | None = None, options: dict | None = None) -> str:
    """Scenario text for a run, used to make failures reproducible."""
    grid = grid or builtins.GridSpec()
    lines = [f'command = "{command}"', "", "[grid]", f'kind = "{grid.kind}"', f"n = {grid.n}",
             f"nodes = {grid.nodes}", f"t_min = {grid.t_min!r}", f"size = {grid.size}",
             f"floor = {grid.floor!r}", "", "[inputs]"]
    for name, entry in inputs.items():
        lines.append(f"{name} = {_toml_value(entry)}")
    if options:
        lines += ["", "[options]"] + [f"{k} = {_toml_value(v)}" for k, v in options.items()]
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{ " + ", ".join(f"{k} = {_toml_value(x)}" for k, x in v.items()) + " }"
    raise TypeError(f"cannot write {type(v).__name__} to a scenario")
