"""Weak geodesics between toric potentials and the connectivity test.

A toric geodesic is built slice by slice from the endpoint Legendre transforms:
u_t* = (1 - t) u_0* + t u_1*. The Perron oracle solves the same problem as one
envelope over the product of the log-domain with the annulus variable
s in [0, 1], which is convex (but not monotone) in s.
"""

from __future__ import annotations

import contextvars
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .convex import (
    LegendreTransform,
    SlopeGrid,
    _maxplus,
    default_slopes,
    eps_env,
    envelope,
    legendre,
    legendre_inverse,
    merge_side_data,
)
from .grid import GridFunction, ShapeError
from .ladder import LadderConfig
from .residual import asymptotic_rooftop

ORACLE_NODES = 1_000_000
ORACLE_SLOPES = 5_000_000


class OracleSizeError(ValueError):
    pass


@dataclass
class DeviationMetric:
    """Share of domain nodes where |u - target| exceeds each level."""

    levels: tuple
    fractions: tuple

    @classmethod
    def between(cls, u: GridFunction, target: GridFunction, levels=(1e-1, 3e-2, 1e-2, 3e-3)):
        ok = u.mask & ~u.floor_set & ~target.floor_set
        d = np.abs(u.values - target.values)[ok]
        levels = tuple(sorted(levels))
        fr = tuple(float(np.mean(d > e)) if d.size else 0.0 for e in levels)
        return cls(levels, fr)

    def as_dict(self) -> dict:
        return {f"{e:g}": f for e, f in zip(self.levels, self.fractions)}


@dataclass
class GeodesicFamily:
    u0: GridFunction
    u1: GridFunction
    times: tuple
    slices: list
    construction: str

    def at(self, t: float) -> GridFunction:
        return self.slices[self.times.index(t)]

    def chord_defect(self) -> float:
        """Largest u_t - ((1 - t) u_0 + t u_1) over slices and nodes."""
        worst = 0.0
        for t, u in zip(self.times, self.slices):
            ok = u.mask & ~self.u0.floor_set & ~self.u1.floor_set
            d = u.values - ((1 - t) * self.u0.values + t * self.u1.values)
            if np.any(ok):
                worst = max(worst, float(d[ok].max()))
        return worst

    def convexity_defect(self) -> float:
        """Largest violation of convexity in t over consecutive slice triples."""
        worst = 0.0
        ts = self.times
        for i in range(1, len(ts) - 1):
            a, b, c = ts[i - 1], ts[i], ts[i + 1]
            lam = (c - b) / (c - a)
            mid = lam * self.slices[i - 1].values + (1 - lam) * self.slices[i + 1].values
            ok = self.slices[i].mask & ~self.slices[i].floor_set
            if np.any(ok):
                worst = max(worst, float((self.slices[i].values - mid)[ok].max()))
        return worst

    def endpoint_metrics(self) -> dict:
        return {
            "u0": DeviationMetric.between(self.slices[0], self.u0).as_dict(),
            "u1": DeviationMetric.between(self.slices[-1], self.u1).as_dict(),
        }


def _common_slopes(u0: GridFunction, u1: GridFunction) -> SlopeGrid:
    a, b = default_slopes(u0), default_slopes(u1)
    axes = []
    for x, y in zip(a.axes, b.axes):
        step = min(x[1], y[1])
        m = int(round(max(x[-1], y[-1]) / step)) + 1
        axes.append(np.arange(m) * step)
    return SlopeGrid(tuple(axes), a.monotone)


def _check(u0, u1):
    if not u0.same_grid(u1):
        raise ShapeError("endpoints live on different grids")
    if u0.is_disk:
        raise ShapeError("geodesics are built on toric grids")


def _slice_tail(u0, u1):
    side = merge_side_data(u0, u1, "min")
    return side["tail"]


def toric_geodesic(u0: GridFunction, u1: GridFunction, times=None,
                   slopes: SlopeGrid | None = None) -> GeodesicFamily:
    """Legendre interpolation between two toric endpoints."""
    _check(u0, u1)
    times = tuple(float(t) for t in (times if times is not None else np.linspace(0.0, 1.0, 9)))
    slopes = slopes or _common_slopes(u0, u1)
    l0 = legendre(u0, slopes).values
    l1 = legendre(u1, slopes).values
    tail = _slice_tail(u0, u1)
    slices = []
    for t in times:
        with np.errstate(invalid="ignore"):
            star = np.where(np.isinf(l0) | np.isinf(l1), np.inf, (1 - t) * l0 + t * l1)
        raw = legendre_inverse(LegendreTransform(slopes, star, u0.domain, tail), u0)
        vals = np.where(u0.mask, np.clip(raw, u0.floor, 0.0), 0.0)
        vals = np.where(u0.floor_set & u1.floor_set, u0.floor, vals)
        slices.append(u0.with_values(vals, tail=tail))
    return GeodesicFamily(u0, u1, times, slices, "legendre")


def perron_oracle(u0: GridFunction, u1: GridFunction, times=None, slopes: SlopeGrid | None = None,
                  dq: float = 1.0 / 64.0, q_max: float | None = None) -> GeodesicFamily:
    """Largest U(t, s) convex in (t, s), nondecreasing in t, with U(., j) <= u_j.

    One max-plus envelope over the product grid; the s-axis gets free slopes
    q in [-q_max, q_max].
    """
    _check(u0, u1)
    times = tuple(float(t) for t in (times if times is not None else np.linspace(0.0, 1.0, 9)))
    s = np.array(times)
    slopes = slopes or _common_slopes(u0, u1)
    if q_max is None:
        ok = u0.mask & ~u0.floor_set & ~u1.floor_set
        q_max = float(np.max(np.abs(u1.values - u0.values)[ok])) + 1.0 if np.any(ok) else 1.0
    q = np.arange(-np.ceil(q_max / dq), np.ceil(q_max / dq) + 1) * dq
    nd = u0.grid.ndim
    n_nodes = int(np.prod(u0.grid.shape)) * len(s)
    n_slopes = int(np.prod([len(a) for a in slopes.axes])) * len(q)
    if n_nodes > ORACLE_NODES or n_slopes > ORACLE_SLOPES:
        raise OracleSizeError(f"product grid too large for the Perron oracle ({n_nodes} nodes, {n_slopes} slopes)")

    # obstacle on the product grid: u_j at s = j, 0 in between
    h = np.zeros(u0.grid.shape + (len(s),))
    for k, sk in enumerate(s):
        if sk == 0.0:
            h[..., k] = u0.values
        elif sk == 1.0:
            h[..., k] = u1.values
    a = np.where(u0.mask[..., None], -h, -np.inf)
    for j in range(nd):
        a = _maxplus(a, u0.grid.axis(j), slopes.axes[j], j)
    a = _maxplus(a, s, q, nd)
    p = slopes.points()
    bound = u0.domain.support(p)[..., None] + np.maximum(q, 0.0)
    star = np.maximum(a, bound)
    tail = _slice_tail(u0, u1)
    if tail is not None:
        star = np.where(tail.contains_float(p)[..., None], star, np.inf)
    b = -star
    for j in range(nd):
        b = _maxplus(b, slopes.axes[j], u0.grid.axis(j), j)
    b = _maxplus(b, q, s, nd)
    slices = []
    for k in range(len(s)):
        vals = np.where(u0.mask, np.clip(b[..., k], u0.floor, 0.0), 0.0)
        vals = np.where(u0.floor_set & u1.floor_set, u0.floor, vals)
        slices.append(u0.with_values(vals, tail=tail))
    return GeodesicFamily(u0, u1, times, slices, "perron-oracle")


def subgeodesic_bound(u0: GridFunction, u1: GridFunction, c: float, t: float, **kw) -> GridFunction:
    """P(u_0, u_1 + C) - C t, a subgeodesic lower bound at time t."""
    if c < 0 or not 0.0 <= t <= 1.0:
        raise ValueError("need C >= 0 and t in [0, 1]")
    if not u0.same_grid(u1):
        raise ShapeError("endpoints live on different grids")
    low = np.minimum(u0.values, u1.values + c)
    low = np.where(u0.floor_set | u1.floor_set, u0.floor, low)
    roof = envelope(u0.with_values(low, **merge_side_data(u0, u1, "min")), **kw)
    vals = np.where(roof.floor_set, roof.floor, np.maximum(roof.values - c * t, roof.floor))
    return roof.with_values(vals)


def darvas_bound(u0: GridFunction, u1: GridFunction, t: float, shifts=None, **kw) -> GridFunction:
    """Pointwise sup over C of the subgeodesic bounds at time t."""
    shifts = shifts if shifts is not None else [0.0] + [2.0**k for k in range(8)]
    best = None
    for c in shifts:
        cur = subgeodesic_bound(u0, u1, c, t, **kw)
        best = cur if best is None else best.with_values(np.maximum(best.values, cur.values))
    return best


@dataclass
class ConnectivityReport:
    verdict: str
    gap0: np.ndarray
    gap1: np.ndarray
    margin_plus: float
    margin_minus: float
    share0: float
    share1: float
    converged: bool
    metrics: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "max_gap_u0": float(self.gap0.max()) if self.gap0.size else 0.0,
            "max_gap_u1": float(self.gap1.max()) if self.gap1.size else 0.0,
            "margin_plus": self.margin_plus,
            "margin_minus": self.margin_minus,
            "share_above_margin_u0": self.share0,
            "share_above_margin_u1": self.share1,
            "converged": self.converged,
            "metrics": self.metrics,
        }


def connectivity_test(u0: GridFunction, u1: GridFunction, cfg: LadderConfig = LadderConfig(),
                      rho: float = 0.01, workers: int = 2, **kw) -> ConnectivityReport:
    """Decide whether P[u_1](u_0) = u_0 and P[u_0](u_1) = u_1, with margins.

    The two ladders are independent; ``workers=1`` runs them one after the other.
    """
    if not u0.same_grid(u1):
        raise ShapeError("endpoints live on different grids")
    eps = max(eps_env(u0), eps_env(u1))
    m_plus, m_minus = 3.0 * eps, 10.0 * eps
    if workers > 1:
        ctx = contextvars.copy_context()
        with ThreadPoolExecutor(2) as pool:
            f0 = pool.submit(ctx.copy().run, asymptotic_rooftop, u1, u0, cfg, **kw)
            f1 = pool.submit(ctx.copy().run, asymptotic_rooftop, u0, u1, cfg, **kw)
            r0, r1 = f0.result(), f1.result()
    else:
        r0 = asymptotic_rooftop(u1, u0, cfg, **kw)
        r1 = asymptotic_rooftop(u0, u1, cfg, **kw)
    ok = u0.mask & ~u0.floor_set & ~u1.floor_set
    gap0 = (u0.values - r0.g.values)[ok]
    gap1 = (u1.values - r1.g.values)[ok]
    share0 = float(np.mean(gap0 > m_minus)) if gap0.size else 0.0
    share1 = float(np.mean(gap1 > m_minus)) if gap1.size else 0.0
    converged = r0.converged and r1.converged
    if not converged:
        verdict = "inconclusive"
    elif share0 > rho or share1 > rho:
        verdict = "not-connectable"
    elif gap0.max(initial=0.0) <= m_plus and gap1.max(initial=0.0) <= m_plus:
        verdict = "connectable"
    else:
        verdict = "inconclusive"
    metrics = {}
    if not u0.is_disk:
        fam = toric_geodesic(u0, u1, times=(0.0, 1.0 / 64.0, 2.0 / 64.0, 62.0 / 64.0, 63.0 / 64.0, 1.0))
        near0 = _richardson(fam.slices[1], fam.slices[2])
        near1 = _richardson(fam.slices[4], fam.slices[3])
        metrics = {"u0": DeviationMetric.between(near0, u0).as_dict(),
                   "u1": DeviationMetric.between(near1, u1).as_dict()}
    return ConnectivityReport(verdict, gap0, gap1, m_plus, m_minus, share0, share1, converged, metrics)


def _richardson(a: GridFunction, b: GridFunction) -> GridFunction:
    """Linear extrapolation to the endpoint from slices at distance 1/64 and 2/64."""
    vals = np.clip(2.0 * a.values - b.values, a.floor, 0.0)
    return a.with_values(np.where(a.floor_set, a.floor, vals))
