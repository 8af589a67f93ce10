"""Domains, grids, grid functions, singular masks and the PGF1 file format."""

from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .indicator import GammaSet

DEFAULT_FLOOR = -1.0e6
DEFAULT_TMIN = -16.0
INSPECTION_DEPTH = -8.0


class SignError(ValueError):
    """A function that must be <= 0 is positive somewhere."""


class ShapeError(ValueError):
    pass


class ThresholdError(ValueError):
    pass


class PGFError(ValueError):
    pass


class PGFHeaderError(PGFError):
    pass


class PGFShapeError(PGFError):
    pass


class PGFPayloadError(PGFError):
    pass


# ---------------------------------------------------------------- domains


@dataclass(frozen=True)
class LogDomain:
    """Logarithmic image of a Reinhardt domain, truncated to a box.

    ``kind`` is ``"polydisk"`` (all t_j < 0), ``"ball"`` (sum exp(2 t_j) < 1)
    or ``"custom"``; a custom domain supplies its own membership predicate and
    support function, and defaults to the polydisk ones.
    """

    kind: str
    n: int
    t_min: tuple = ()
    member: Optional[Callable] = field(default=None, compare=False)
    support_fn: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("polydisk", "ball", "custom"):
            raise ValueError(f"unknown log-domain kind {self.kind!r}")
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        t_min = self.t_min or (DEFAULT_TMIN,) * self.n
        if len(t_min) != self.n or any(t >= 0 for t in t_min):
            raise ValueError("truncation box needs n negative lower ends")
        object.__setattr__(self, "t_min", tuple(float(t) for t in t_min))

    @property
    def pdf_kind(self) -> str:
        return self.kind

    def contains(self, t: np.ndarray) -> np.ndarray:
        """Membership of points of shape (..., n)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "ball":
            return np.sum(np.exp(2.0 * t), axis=-1) < 1.0
        if self.kind == "custom" and self.member is not None:
            return np.asarray(self.member(t), dtype=bool)
        return np.all(t < 0.0, axis=-1)

    def support(self, p: np.ndarray) -> np.ndarray:
        """sup of <p, t> over the domain, for slopes p >= 0 of shape (..., n).

        This is the exact boundary obstacle: an affine function with slope p
        stays <= 0 on the domain iff its constant is <= -support(p).
        """
        p = np.asarray(p, dtype=float)
        if self.kind == "ball":
            tot = np.sum(p, axis=-1, keepdims=True)
            with np.errstate(divide="ignore", invalid="ignore"):
                terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0) / np.where(tot > 0, tot, 1.0)), 0.0)
            return 0.5 * np.sum(terms, axis=-1)
        if self.kind == "custom" and self.support_fn is not None:
            return np.asarray(self.support_fn(p), dtype=float)
        return np.zeros(p.shape[:-1])


@dataclass(frozen=True)
class DiskDomain:
    """Unit disk sampled on a Cartesian grid over [-1, 1]^2."""

    size: int = 256

    def __post_init__(self):
        if self.size < 8:
            raise ValueError("disk grids need at least 8 nodes per axis")

    kind = "disk"
    n = 2

    @property
    def pdf_kind(self) -> str:
        return "disk"

    def circle(self, m: int) -> np.ndarray:
        """Ordered boundary discretization: m equally spaced angles."""
        return 2.0 * np.pi * np.arange(m) / m


# ------------------------------------------------------------------ grids


@dataclass(frozen=True)
class Grid:
    shape: tuple
    origin: tuple
    spacing: tuple

    def __post_init__(self):
        if not (len(self.shape) == len(self.origin) == len(self.spacing)):
            raise ShapeError("shape, origin and spacing must have equal length")
        if any(h <= 0 for h in self.spacing):
            raise ShapeError("spacing must be positive on every axis")
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def axis(self, j: int) -> np.ndarray:
        return self.origin[j] + self.spacing[j] * np.arange(self.shape[j])

    def points(self) -> np.ndarray:
        """Node coordinates, shape (*shape, ndim)."""
        axes = [self.axis(j) for j in range(self.ndim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    @property
    def h_max(self) -> float:
        return max(self.spacing)


def log_grid(domain: LogDomain, nodes: int | tuple) -> Grid:
    """Nodes t_min + k*h, k = 0..N-1, with h = |t_min| / N (last node at -h)."""
    if isinstance(nodes, int):
        nodes = (nodes,) * domain.n
    spacing = tuple(-t / m for t, m in zip(domain.t_min, nodes))
    return Grid(tuple(nodes), domain.t_min, spacing)


def disk_grid(domain: DiskDomain) -> Grid:
    h = 2.0 / (domain.size - 1)
    return Grid((domain.size, domain.size), (-1.0, -1.0), (h, h))


# -------------------------------------------------------- grid functions


@dataclass(frozen=True)
class Atom:
    x: float
    y: float
    mass: float

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True)
class BoundaryAtom:
    angle: float
    mass: float

    @property
    def zeta(self) -> complex:
        return complex(math.cos(self.angle), math.sin(self.angle))


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Sampled function <= 0 with a finite floor standing for -infinity.

    Toric functions carry ``tail``, the recession set of admissible slopes
    (``None`` means bounded beyond the box). Disk functions carry ``atoms``
    and ``boundary_atoms``, the exact singular part that a grid cannot hold.
    Nodes outside the domain store 0 and are ignored by every operation.
    """

    grid: Grid
    values: np.ndarray
    domain: object
    floor: float = DEFAULT_FLOOR
    tail: Optional[GammaSet] = None
    atoms: tuple = ()
    boundary_atoms: tuple = ()

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            raise ShapeError(f"values shape {vals.shape} != grid shape {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("grid values must be finite; use the floor for -inf")
        if self.floor >= 0:
            raise ValueError("the floor must be negative")
        scale = 1e-9 * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
        if np.any(vals > scale):
            raise SignError(f"function is positive somewhere (max {vals.max():.3g})")
        vals = np.clip(vals, self.floor, 0.0)
        vals[~self.mask] = 0.0
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.tail is not None and self.tail.n != self.grid.ndim:
            raise ShapeError("tail dimension does not match the grid")
        if self.is_disk and self.tail is not None:
            raise ValueError("disk functions carry atoms, not a tail")

    @property
    def is_disk(self) -> bool:
        return isinstance(self.domain, DiskDomain)

    @property
    def mask(self) -> np.ndarray:
        return domain_mask(self.grid, self.domain)

    @property
    def floor_set(self) -> np.ndarray:
        return self.mask & (self.values <= self.floor)

    @property
    def recession(self) -> GammaSet:
        return self.tail if self.tail is not None else GammaSet.origin(self.grid.ndim)

    def replace(self, **kw) -> "GridFunction":
        return dataclasses.replace(self, **kw)

    def with_values(self, values, **kw) -> "GridFunction":
        return dataclasses.replace(self, values=values, **kw)

    def same_grid(self, other: "GridFunction") -> bool:
        return self.grid == other.grid and type(self.domain) is type(other.domain) and self.domain == other.domain


_MASK_CACHE: dict = {}


def domain_mask(grid: Grid, domain) -> np.ndarray:
    key = (grid, domain)
    m = _MASK_CACHE.get(key)
    if m is None:
        pts = grid.points()
        if isinstance(domain, DiskDomain):
            m = pts[..., 0] ** 2 + pts[..., 1] ** 2 < 1.0
        else:
            m = domain.contains(pts)
        m.setflags(write=False)
        _MASK_CACHE[key] = m
    return m


def boundary_ring(grid: Grid, domain) -> np.ndarray:
    """Domain nodes with a neighbour outside the domain (the outer boundary).

    For log-domains only the upper side counts: the lower truncation faces
    stand for points deep inside the domain, not for its boundary.
    """
    m = domain_mask(grid, domain)
    ring = np.zeros_like(m)
    for ax in range(grid.ndim):
        for step in ((+1, -1) if isinstance(domain, DiskDomain) else (+1,)):
            shifted = np.zeros_like(m)
            src = [slice(None)] * grid.ndim
            dst = [slice(None)] * grid.ndim
            if step > 0:
                src[ax], dst[ax] = slice(1, None), slice(None, -1)
            else:
                src[ax], dst[ax] = slice(None, -1), slice(1, None)
            shifted[tuple(dst)] = m[tuple(src)]
            ring |= m & ~shifted
    return ring


def inspection_mask(u: GridFunction, depth: float = INSPECTION_DEPTH) -> np.ndarray:
    """Nodes of the inspection box [depth, 0)^n inside the domain."""
    pts = u.grid.points()
    return u.mask & np.all(pts >= depth, axis=-1)


def lipschitz_estimate(u: GridFunction, values: np.ndarray | None = None) -> float:
    """Largest forward-difference slope over non-floor domain nodes."""
    v = u.values if values is None else values
    ok = u.mask & (v > u.floor)
    best = 0.0
    for ax in range(u.grid.ndim):
        a = [slice(None)] * u.grid.ndim
        b = [slice(None)] * u.grid.ndim
        a[ax], b[ax] = slice(1, None), slice(None, -1)
        both = ok[tuple(a)] & ok[tuple(b)]
        if np.any(both):
            d = np.abs(v[tuple(a)] - v[tuple(b)])[both] / u.grid.spacing[ax]
            best = max(best, float(d.max()))
    return best


# -------------------------------------------------------- singular masks


@dataclass(frozen=True)
class SingularMask:
    L: np.ndarray
    BL: np.ndarray
    tau: float


def detect_loci(u: GridFunction, tau: float | None = None) -> SingularMask:
    """Threshold scan for the unbounded locus and the boundary locus."""
    if tau is None:
        tau = u.floor / 2.0
    if tau <= u.floor:
        raise ThresholdError(f"threshold {tau} must lie above the floor {u.floor}")
    inside = u.mask
    low = inside & (u.values < tau)
    ring = boundary_ring(u.grid, u.domain)
    # inward neighbourhood: the node itself and its 3^n box neighbours
    near = low.copy()
    for ax in range(u.grid.ndim):
        grown = near.copy()
        grown[tuple(slice(1, None) if j == ax else slice(None) for j in range(u.grid.ndim))] |= \
            near[tuple(slice(None, -1) if j == ax else slice(None) for j in range(u.grid.ndim))]
        grown[tuple(slice(None, -1) if j == ax else slice(None) for j in range(u.grid.ndim))] |= \
            near[tuple(slice(1, None) if j == ax else slice(None) for j in range(u.grid.ndim))]
        near = grown
    return SingularMask(L=low, BL=ring & near, tau=float(tau))


# ------------------------------------------------------------------ PGF1


def _domain_from_header(kind: str, grid: Grid):
    if kind == "disk":
        if grid.ndim != 2 or grid.shape[0] != grid.shape[1]:
            raise PGFHeaderError("disk grids must be square and two-dimensional")
        return DiskDomain(grid.shape[0])
    if kind in ("polydisk", "ball", "custom"):
        return LogDomain(kind, grid.ndim, grid.origin)
    raise PGFHeaderError(f"unknown domain {kind!r}")


def write_grid(u: GridFunction, path) -> None:
    g = u.grid
    lines = [
        "PGF1",
        f"ndim {g.ndim}",
        "shape " + " ".join(str(s) for s in g.shape),
        "origin " + " ".join(repr(o) for o in g.origin),
        "spacing " + " ".join(repr(h) for h in g.spacing),
        f"domain {u.domain.pdf_kind}",
        f"floor {u.floor!r}",
        "",
        "",
    ]
    payload = np.ascontiguousarray(u.values, dtype="<f8").tobytes(order="C")
    Path(path).write_bytes("\n".join(lines).encode("ascii") + payload)


def read_grid(path) -> GridFunction:
    data = Path(path).read_bytes()
    head_end = data.find(b"\n\n")
    if head_end < 0:
        raise PGFHeaderError("missing blank line after header")
    try:
        lines = data[:head_end].decode("ascii").split("\n")
    except UnicodeDecodeError as exc:
        raise PGFHeaderError("header is not ASCII") from exc
    payload = data[head_end + 2:]
    keys = ["PGF1", "ndim", "shape", "origin", "spacing", "domain", "floor"]
    if len(lines) != len(keys) or lines[0] != "PGF1":
        raise PGFHeaderError("header must be PGF1 followed by six fields")
    fields = {}
    for key, line in zip(keys[1:], lines[1:]):
        parts = line.split()
        if not parts or parts[0] != key:
            raise PGFHeaderError(f"expected field {key!r}, got {line!r}")
        fields[key] = parts[1:]
    try:
        ndim = int(fields["ndim"][0])
        shape = tuple(int(s) for s in fields["shape"])
        origin = tuple(float(s) for s in fields["origin"])
        spacing = tuple(float(s) for s in fields["spacing"])
        floor = float(fields["floor"][0])
        kind = fields["domain"][0]
    except (ValueError, IndexError) as exc:
        raise PGFHeaderError(f"unparsable header field: {exc}") from exc
    if len(fields["ndim"]) != 1 or len(fields["floor"]) != 1 or len(fields["domain"]) != 1:
        raise PGFHeaderError("ndim, domain and floor take one value each")
    if not (len(shape) == len(origin) == len(spacing) == ndim):
        raise PGFHeaderError(f"ndim {ndim} disagrees with shape/origin/spacing lengths")
    if any(s < 1 for s in shape) or any(h <= 0 for h in spacing):
        raise PGFHeaderError("shape entries must be >= 1 and spacing > 0")
    count = int(np.prod(shape))
    if len(payload) != 8 * count:
        raise PGFShapeError(f"payload holds {len(payload)} bytes, shape needs {8 * count}")
    values = np.frombuffer(payload, dtype="<f8").reshape(shape).astype(float)
    if not np.all(np.isfinite(values)):
        raise PGFPayloadError("payload contains non-finite values")
    grid = Grid(shape, origin, spacing)
    return GridFunction(grid, values, _domain_from_header(kind, grid), floor=floor)


def write_csv(u: GridFunction, path) -> None:
    """Sidecar export: node coordinates then value, one node per row."""
    pts = u.grid.points().reshape(-1, u.grid.ndim)
    vals = u.values.reshape(-1)
    inside = u.mask.reshape(-1)
    names = ["x", "y"] if u.is_disk else [f"t{j + 1}" for j in range(u.grid.ndim)]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(",".join(names + ["value"]) + "\n")
        for p, v, ok in zip(pts, vals, inside):
            if ok:
                fh.write(",".join(repr(float(x)) for x in p) + f",{float(v)!r}\n")


def warn(msg: str) -> None:
    warnings.warn(msg, stacklevel=3)
