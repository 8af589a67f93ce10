"""Registry of the built-in example functions, addressed by key.

Keys: ``gball``, ``poisson-kernel``, ``exaas2``, ``exaas3``, ``exaas3-psi``,
``exaas4``, ``exincr``, ``two-pole:a0``, ``two-pole:a1``, ``indicator:<gamma>``
and ``file:<path>``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from . import disk
from .grid import (
    DEFAULT_FLOOR,
    DEFAULT_TMIN,
    Atom,
    DiskDomain,
    GridFunction,
    LogDomain,
    disk_grid,
    log_grid,
    read_grid,
)
from .indicator import GammaSet, support_float

SIMPLEX = GammaSet([[1, 0], [0, 1]])
TWO_POLES = (0.0, 0.5)


class UnknownFunctionError(KeyError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Where a built-in gets sampled."""

    kind: str = "ball"
    n: int = 2
    nodes: int = 257
    t_min: float = DEFAULT_TMIN
    size: int = 256
    floor: float = DEFAULT_FLOOR

    def domain(self):
        if self.kind == "disk":
            return DiskDomain(self.size)
        return LogDomain(self.kind, self.n, (self.t_min,) * self.n)


def toric(values_fn, spec: GridSpec, tail=None) -> GridFunction:
    dom = spec.domain()
    grid = log_grid(dom, spec.nodes)
    vals = values_fn(grid.points())
    inside = dom.contains(grid.points())
    vals = np.where(inside, np.clip(vals, spec.floor, 0.0), 0.0)
    return GridFunction(grid, vals, dom, spec.floor, tail)


def log_norm(t: np.ndarray) -> np.ndarray:
    """Toric log|z| = 1/2 log sum exp(2 t_j)."""
    return 0.5 * logsumexp(2.0 * t, axis=-1)


def gball_exact(t: np.ndarray) -> np.ndarray:
    """Closed-form residual of t_1 on the ball: t_1 - 1/2 log(1 - |z'|^2)."""
    rest = np.sum(np.exp(2.0 * t[..., 1:]), axis=-1)
    return t[..., 0] - 0.5 * np.log1p(-rest)


def _need(spec: GridSpec, kinds, key):
    if spec.kind not in kinds:
        raise ValueError(f"{key} lives on {' or '.join(kinds)} grids, not {spec.kind}")


def _disk_spec(spec: GridSpec) -> GridSpec:
    return spec if spec.kind == "disk" else GridSpec(kind="disk", size=spec.size, floor=spec.floor)


def make(key: str, spec: GridSpec | None = None) -> GridFunction:
    """Sample the built-in function ``key``."""
    spec = spec or GridSpec()
    if key.startswith("file:"):
        return read_grid(key[5:])
    if key.startswith("indicator:"):
        gamma = GammaSet.parse(json.loads(key[len("indicator:"):].replace("'", '"')))
        s = spec if spec.kind != "disk" else GridSpec(kind="polydisk", n=gamma.n)
        if s.n != gamma.n:
            s = GridSpec(s.kind, gamma.n, s.nodes, s.t_min, s.size, s.floor)
        return toric(lambda t: support_float(gamma, t), s, None if gamma.is_orthant() else gamma)
    if key == "gball":
        _need(spec, ("ball",), key)
        tail = GammaSet([[1] + [0] * (spec.n - 1)])
        return toric(lambda t: t[..., 0], spec, tail)
    if key == "exincr":
        _need(spec, ("ball", "polydisk"), key)
        return toric(lambda t: np.max(t, axis=-1), spec, _simplex(spec.n))
    if key == "exaas2":
        _need(spec, ("ball",), key)
        # nodes outside the ball have log_norm > 0; they are masked out anyway
        return toric(lambda t: log_norm(t) - np.sqrt(np.maximum(-log_norm(t), 0.0)), spec, _simplex(spec.n))
    if key == "exaas3-psi":
        _need(spec, ("ball", "polydisk"), key)
        return toric(_exaas3_psi, spec, None)
    if key == "exaas3":
        _need(spec, ("ball", "polydisk"), key)
        return toric(lambda t: log_norm(t) + _exaas3_psi(t), spec, _simplex(spec.n))
    if key == "poisson-kernel":
        return disk.poisson_integral(disk.RieszData(boundary_atoms=[(0.0, 1.0)]),
                                     _disk_spec(spec).domain(), spec.floor)
    if key == "exaas4":
        dom = _disk_spec(spec).domain()
        z = disk.nodes(dom)
        with np.errstate(divide="ignore"):
            vals = np.log(np.abs(z - 1.0)) - math.log(2.0)
        grid = disk_grid(dom)
        inside = np.abs(z) < 1.0
        return GridFunction(grid, np.where(inside, np.clip(vals, spec.floor, 0.0), 0.0), dom, spec.floor)
    if key in ("two-pole:a0", "two-pole:a1"):
        a = TWO_POLES[int(key[-1])]
        return disk.green_potential(disk.RieszData(atoms=[(a, 0.0, 1.0)]), _disk_spec(spec).domain(),
                                    spec.floor)
    raise UnknownFunctionError(key)


def _simplex(n: int) -> GammaSet:
    return GammaSet([[int(i == j) for i in range(n)] for j in range(n)])


def _exaas3_psi(t: np.ndarray) -> np.ndarray:
    return np.maximum(t[..., 0], -np.sqrt(-t[..., 1]))


def disk_function(atoms=(), boundary_atoms=(), density=None, size: int = 256,
                  floor: float = DEFAULT_FLOOR) -> GridFunction:
    """Green potential plus negative Poisson integral of literal Riesz data."""
    mu = disk.RieszData(atoms=atoms, density=density, boundary_atoms=boundary_atoms)
    return disk.riesz_function(mu, DiskDomain(size), floor)


KEYS = ("gball", "poisson-kernel", "exaas2", "exaas3", "exaas3-psi", "exaas4", "exincr",
        "two-pole:a0", "two-pole:a1", "indicator:<gamma>", "file:<path>")

__all__ = ["Atom", "GridSpec", "KEYS", "SIMPLEX", "disk_function", "gball_exact", "log_norm", "make",
           "toric"]
