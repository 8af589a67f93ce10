"""Convex envelopes, Legendre transforms and Alexandrov measures in log coordinates.

A toric psh function on a Reinhardt domain is a convex function of
t = (log|z_1|, ..., log|z_n|) that is nondecreasing in every t_j. The envelope
of an obstacle h is the supremum of the affine functions <p, t> + c with p >= 0
that stay below h at the grid nodes, below 0 on the domain boundary, and whose
slope p is admissible for the recession set (tail) of h. It is computed as a
double discrete Legendre transform over a product slope grid, one axis at a
time.
"""

from __future__ import annotations

import contextvars
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import reduce

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from . import indicator
from .grid import (
    DiskDomain,
    GridFunction,
    LogDomain,
    ShapeError,
    boundary_ring,
    lipschitz_estimate,
)
from .indicator import GammaSet


class ContractError(ValueError):
    """Input violates an operation's precondition (e.g. not convex)."""


class UnsupportedDomainError(ValueError):
    pass


class CoverageWarning(UserWarning):
    """The slope grid is too small for the observed gradients."""


_CHUNK = 1 << 22


# ------------------------------------------------------------ slope grids


@dataclass(frozen=True)
class SlopeGrid:
    """Product grid of slopes; ``monotone[j]`` restricts axis j to p_j >= 0."""

    axes: tuple
    monotone: tuple

    @property
    def shape(self):
        return tuple(len(a) for a in self.axes)

    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    @property
    def steps(self):
        return tuple(float(a[1] - a[0]) if len(a) > 1 else 1.0 for a in self.axes)


def _tail_denominator(tail: GammaSet | None) -> int:
    if tail is None:
        return 1
    dens = [x.denominator for g in tail.generators for x in g]
    return reduce(lambda a, b: a * b // math.gcd(a, b), dens, 1)


def default_slopes(h: GridFunction, step: float | None = None, p_max: float | None = None) -> SlopeGrid:
    """Slope grid covering [0, p_max] per axis with a step tied to the spacing.

    The step is 1/k with k a multiple of the tail's denominators, so every tail
    generator is a grid slope. The default reach covers the observed gradient,
    the tail, and the steepest slope 1/(2h) a log-domain node can need next to
    the boundary.
    """
    lip = lipschitz_estimate(h)
    tail_max = float(h.tail.max_coordinate()) if h.tail is not None else 0.0
    den = _tail_denominator(h.tail)
    axes = []
    for hj in h.grid.spacing:
        target = step if step is not None else min(hj, 1.0 / 16.0)
        k = den * max(1, math.ceil(1.0 / (den * target) - 1e-9))
        dp = 1.0 / k
        reach = p_max if p_max is not None else max(1.0, tail_max + 1.0, lip, 0.5 / hj)
        m = int(math.ceil(reach / dp - 1e-9)) + 1
        axes.append(np.arange(m) * dp)
    return SlopeGrid(tuple(axes), (True,) * h.grid.ndim)


# ----------------------------------------------------- max-plus transform


def _maxplus(a: np.ndarray, x: np.ndarray, y: np.ndarray, axis: int) -> np.ndarray:
    """out[..., j, ...] = max_i a[..., i, ...] + x_i * y_j along ``axis``."""
    a = np.moveaxis(a, axis, -1)
    lead = a.shape[:-1]
    flat = a.reshape(-1, a.shape[-1])
    out = np.empty((flat.shape[0], len(y)))
    xy = x[:, None] * y[None, :]
    rows = max(1, _CHUNK // max(1, xy.size))
    for s in range(0, flat.shape[0], rows):
        blk = flat[s:s + rows]
        out[s:s + rows] = np.max(blk[:, :, None] + xy[None, :, :], axis=1)
    return np.moveaxis(out.reshape(*lead, len(y)), -1, axis)


# ------------------------------------------------------------- Legendre


@dataclass(frozen=True)
class LegendreTransform:
    """u*(p) = sup_t <p,t> - u(t) on a slope grid; +inf marks excluded slopes."""

    slopes: SlopeGrid
    values: np.ndarray
    domain: object
    tail: GammaSet | None


def legendre(u: GridFunction, slopes: SlopeGrid | None = None, *, boundary: bool = True,
             use_tail: bool = True) -> LegendreTransform:
    """Discrete Legendre transform over the domain nodes of ``u``.

    With ``boundary`` the domain's support function is folded in, which encodes
    the constraint u <= 0 on the boundary; with ``use_tail`` slopes outside the
    tail are excluded (their transform is +inf).
    """
    if u.is_disk:
        raise UnsupportedDomainError("Legendre transforms need a log-domain grid")
    slopes = slopes or default_slopes(u)
    a = np.where(u.mask, -u.values, -np.inf)
    for j in range(u.grid.ndim):
        a = _maxplus(a, u.grid.axis(j), slopes.axes[j], j)
    star = a
    pts = None
    if boundary:
        pts = slopes.points()
        clip = np.where(np.array(slopes.monotone), np.maximum(pts, 0.0), pts)
        star = np.maximum(star, u.domain.support(clip))
    if use_tail and u.tail is not None and not u.tail.is_orthant():
        pts = slopes.points() if pts is None else pts
        star = np.where(u.tail.contains_float(pts), star, np.inf)
    return LegendreTransform(slopes, star, u.domain, u.tail)


def legendre_inverse(lt: LegendreTransform, like: GridFunction) -> np.ndarray:
    """u(t) = max_p <p,t> - u*(p), evaluated at the nodes of ``like``."""
    a = -lt.values
    for j in range(like.grid.ndim):
        a = _maxplus(a, lt.slopes.axes[j], like.grid.axis(j), j)
    return a


# -------------------------------------------------------------- envelope


@dataclass(frozen=True)
class EnvelopeInfo:
    degenerate: bool
    clipped_fraction: float
    slopes: SlopeGrid | None


def _finish(h: GridFunction, raw: np.ndarray) -> np.ndarray:
    v = np.minimum(raw, h.values)
    close = np.abs(v - h.values) <= 1e-9 * (1.0 + np.abs(h.values))
    v = np.where(close, h.values, v)
    v = np.maximum(v, h.floor)
    v = np.where(h.floor_set, h.floor, v)
    return np.where(h.mask, v, 0.0)


def _clipped_fraction(h: GridFunction, v: np.ndarray, slopes: SlopeGrid) -> float:
    ok = h.mask & (v > h.floor)
    hit = np.zeros_like(ok)
    for j in range(h.grid.ndim):
        top = slopes.axes[j][-1] - slopes.steps[j]
        a = [slice(None)] * h.grid.ndim
        b = [slice(None)] * h.grid.ndim
        a[j], b[j] = slice(1, None), slice(None, -1)
        d = (v[tuple(a)] - v[tuple(b)]) / h.grid.spacing[j]
        both = ok[tuple(a)] & ok[tuple(b)]
        hit[tuple(b)] |= both & (d >= top)
    n_ok = int(ok.sum())
    return float(hit.sum()) / n_ok if n_ok else 0.0


def envelope(h: GridFunction, slopes: SlopeGrid | None = None, *, info: bool = False, **disk_kw):
    """Largest convex, componentwise nondecreasing function below h.

    Disk functions are delegated to the subharmonic obstacle solver. Returns
    the envelope, or ``(envelope, EnvelopeInfo)`` when ``info`` is set.
    """
    if h.is_disk:
        from .disk import subharmonic_envelope
        out = subharmonic_envelope(h, **disk_kw)
        return (out, EnvelopeInfo(False, 0.0, None)) if info else out
    inside = h.mask
    if not np.any(inside & (h.values > h.floor)):
        out = h.with_values(np.where(inside, h.floor, 0.0))
        return (out, EnvelopeInfo(True, 0.0, None)) if info else out
    slopes = slopes or default_slopes(h)
    raw = legendre_inverse(legendre(h, slopes), h)
    v = _finish(h, raw)
    frac = _clipped_fraction(h, v, slopes)
    if frac > 0:
        warnings.warn(f"slope grid clips {frac:.3%} of the gradients", CoverageWarning, stacklevel=2)
    out = h.with_values(v)
    return (out, EnvelopeInfo(False, frac, slopes)) if info else out


def merge_side_data(u: GridFunction, v: GridFunction, how: str) -> dict:
    """Combine singular side data for min ("min"), sum ("sum") or max ("max")."""
    if u.is_disk:
        from .disk import merge_atoms
        return merge_atoms(u, v, how)
    if u.tail is None and v.tail is None:
        return {"tail": None}
    a, b = u.recession, v.recession
    op = {"min": indicator.intersect, "sum": indicator.minkowski_sum, "max": indicator.hull_union}[how]
    out = op(a, b)
    return {"tail": None if out.is_orthant() else out}


def _check_pair(u: GridFunction, v: GridFunction):
    if not u.same_grid(v):
        raise ShapeError("functions live on different grids or domains")


def pointwise_min(u: GridFunction, v: GridFunction) -> GridFunction:
    _check_pair(u, v)
    return u.with_values(np.minimum(u.values, v.values), **merge_side_data(u, v, "min"))


def pointwise_max(u: GridFunction, v: GridFunction) -> GridFunction:
    _check_pair(u, v)
    return u.with_values(np.maximum(u.values, v.values), **merge_side_data(u, v, "max"))


def pointwise_sum(u: GridFunction, v: GridFunction) -> GridFunction:
    _check_pair(u, v)
    s = np.maximum(u.values + v.values, u.floor)
    s = np.where(u.floor_set | v.floor_set, u.floor, s)
    return u.with_values(s, **merge_side_data(u, v, "sum"))


def scaled(u: GridFunction, c: float) -> GridFunction:
    """c * u for c > 0, with the floor kept fixed."""
    if c <= 0:
        raise ValueError("scale must be positive")
    vals = np.where(u.floor_set, u.floor, np.maximum(c * u.values, u.floor))
    if u.is_disk:
        from .disk import scale_atoms
        return u.with_values(vals, **scale_atoms(u, c))
    tail = u.tail.scale(Fraction(c).limit_denominator(10**6)) if u.tail is not None else None
    return u.with_values(vals, tail=tail)


def shifted(u: GridFunction, c: float, cap: bool = True) -> GridFunction:
    """min(u + c, 0) (or u + c clipped at 0); floor nodes stay at the floor."""
    vals = np.where(u.floor_set, u.floor, np.minimum(u.values + c, 0.0) if cap else u.values + c)
    return u.with_values(vals)


def rooftop(u: GridFunction, v: GridFunction, **kw) -> GridFunction:
    """P(u, v): the envelope of min(u, v)."""
    return envelope(pointwise_min(u, v), **kw)


# ------------------------------------------------------------- checks


TOL_ENV: contextvars.ContextVar = contextvars.ContextVar("tol_env", default=None)


def eps_env(u: GridFunction) -> float:
    """10 * h_max * Lipschitz estimate of the regular (grid) part, at least 1.

    A value set in ``TOL_ENV`` takes precedence.
    """
    fixed = TOL_ENV.get()
    if fixed is not None:
        return float(fixed)
    if u.is_disk:
        from .disk import regular_part
        lip = lipschitz_estimate(u, regular_part(u))
    else:
        lip = lipschitz_estimate(u)
    return 10.0 * u.grid.h_max * max(1.0, lip)


def convexity_defect(u: GridFunction) -> float:
    """Worst violation of midpoint convexity over axis and diagonal node triples."""
    v = u.values
    ok = u.mask & (v > u.floor)
    nd = u.grid.ndim
    dirs = []
    for j in range(nd):
        e = [0] * nd
        e[j] = 1
        dirs.append(tuple(e))
    for i in range(nd):
        for j in range(i + 1, nd):
            for s in (1, -1):
                e = [0] * nd
                e[i], e[j] = 1, s
                dirs.append(tuple(e))
    worst = 0.0
    for d in dirs:
        lo = [slice(None)] * nd
        mid = [slice(None)] * nd
        hi = [slice(None)] * nd
        for k, dk in enumerate(d):
            if dk == 1:
                lo[k], mid[k], hi[k] = slice(0, -2), slice(1, -1), slice(2, None)
            elif dk == -1:
                lo[k], mid[k], hi[k] = slice(2, None), slice(1, -1), slice(0, -2)
            else:
                lo[k] = mid[k] = hi[k] = slice(None)
        a, b, c = v[tuple(lo)], v[tuple(mid)], v[tuple(hi)]
        good = ok[tuple(lo)] & ok[tuple(mid)] & ok[tuple(hi)]
        if np.any(good):
            worst = max(worst, float(np.max((b - 0.5 * (a + c))[good])))
    return worst


def monotonicity_defect(u: GridFunction) -> float:
    v = u.values
    ok = u.mask & (v > u.floor)
    worst = 0.0
    for j in range(u.grid.ndim):
        a = [slice(None)] * u.grid.ndim
        b = [slice(None)] * u.grid.ndim
        a[j], b[j] = slice(1, None), slice(None, -1)
        good = ok[tuple(a)] & ok[tuple(b)]
        if np.any(good):
            worst = max(worst, float(np.max((v[tuple(b)] - v[tuple(a)])[good])))
    return worst


def is_convex(u: GridFunction, eps: float | None = None) -> bool:
    eps = 1e-8 * (1.0 + float(np.max(np.abs(u.values)))) if eps is None else eps
    return convexity_defect(u) <= eps and monotonicity_defect(u) <= eps


# ------------------------------------------------------- Alexandrov measure


@dataclass(frozen=True)
class DiscreteMeasure:
    """Nonnegative masses on grid nodes."""

    mass: np.ndarray

    @property
    def support(self):
        return [tuple(int(i) for i in idx) for idx in np.argwhere(self.mass > 0)]

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    def restrict(self, mask: np.ndarray) -> "DiscreteMeasure":
        return DiscreteMeasure(np.where(mask, self.mass, 0.0))


def _interior_nodes(u: GridFunction) -> np.ndarray:
    valid = u.mask & (u.values > u.floor)
    inner = np.zeros_like(valid)
    core = tuple(slice(1, -1) for _ in range(u.grid.ndim))
    inner[core] = True
    out = valid & inner & ~boundary_ring(u.grid, u.domain)
    for j in range(u.grid.ndim):
        for s in (1, -1):
            out &= np.roll(valid, s, axis=j)
    return out


def _cell_volume(grads: np.ndarray, n: int) -> float:
    g = np.unique(np.round(grads, 12), axis=0)
    if len(g) <= n:
        if n == 1 and len(g) == 2:
            return float(abs(g[1, 0] - g[0, 0]))
        return 0.0
    if n == 1:
        return float(g[:, 0].max() - g[:, 0].min())
    try:
        return float(ConvexHull(g).volume)
    except QhullError:
        return 0.0


def ma_measure(u: GridFunction, check: bool = True) -> DiscreteMeasure:
    """Monge-Ampere measure: n! times Alexandrov subgradient-cell volumes.

    Cells are computed for interior nodes from the lower convex hull of the
    lifted samples. The mass at the pole, n! times the covolume of the tail,
    sits on the corner node nearest the pole. Disk functions use the discrete
    Laplacian instead.
    """
    if u.is_disk:
        from .disk import laplacian_measure
        return laplacian_measure(u)
    n = u.grid.ndim
    if check:
        eps = 1e-8 * (1.0 + float(np.max(np.abs(u.values))))
        if convexity_defect(u) > eps:
            raise ContractError("ma_measure needs a convex input")
    mass = np.zeros(u.grid.shape)
    ok = u.mask & (u.values > u.floor)
    idx = np.argwhere(ok)
    pts = np.concatenate([u.grid.points()[ok], u.values[ok][:, None]], axis=1)
    interior = _interior_nodes(u)
    fact = math.factorial(n)
    if len(pts) > n + 1:
        try:
            hull = ConvexHull(pts)
        except QhullError:
            hull = None
        if hull is not None:
            eq = hull.equations
            lower = eq[:, n] < -1e-12
            grads = -eq[lower, :n] / eq[lower, n][:, None]
            incident: dict[int, list[int]] = {}
            for f, simplex in zip(np.flatnonzero(lower), hull.simplices[lower]):
                for vtx in simplex:
                    incident.setdefault(int(vtx), []).append(f)
            row = {int(f): i for i, f in enumerate(np.flatnonzero(lower))}
            for vtx, faces in incident.items():
                node = tuple(idx[vtx])
                if not interior[node]:
                    continue
                cell = np.maximum(grads[[row[f] for f in faces]], 0.0)
                mass[node] = fact * _cell_volume(cell, n)
    if u.tail is not None:
        cov = u.tail.covolume()
        if cov:
            mass[(0,) * n] += fact * float(cov)
    return DiscreteMeasure(mass)


# ------------------------------------------------------------ homogenize


def homogenize(u: GridFunction) -> GridFunction:
    """Positively homogeneous hull: the limit of u(m t) / m as m grows.

    With a known tail the limit is its support function. Without one, the
    limit is read off the data at the largest m keeping m*t in the box.
    """
    if u.is_disk or u.domain.kind != "polydisk":
        raise UnsupportedDomainError("homogenize needs a polydisk log-domain")
    pts = u.grid.points()
    if u.tail is not None:
        vals = indicator.support_float(u.tail, pts)
        return u.with_values(np.maximum(vals, u.floor), tail=u.tail)
    from scipy.interpolate import RegularGridInterpolator
    t_min = np.array(u.domain.t_min)
    with np.errstate(divide="ignore"):
        m = np.min(np.where(pts < 0, t_min / pts, np.inf), axis=-1)
    m = np.maximum(m, 1.0)
    interp = RegularGridInterpolator([u.grid.axis(j) for j in range(u.grid.ndim)], u.values,
                                     bounds_error=False, fill_value=None)
    far = np.clip(pts * m[..., None], t_min, None)
    vals = interp(far.reshape(-1, u.grid.ndim)).reshape(u.grid.shape) / m
    return u.with_values(np.clip(vals, u.floor, 0.0))
