"""Residual functions: g_phi, its interior and boundary splits, asymptotic rooftops.

Every construction is a ladder over shifts C_k of envelopes of obstacles built
from phi. The singular side data (toric tail, disk atoms) decides which part of
the singularity a construction keeps; grid constraints only see what the box
can hold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import disk
from .convex import default_slopes, envelope, eps_env, pointwise_min, shifted
from .grid import (
    Grid,
    GridFunction,
    LogDomain,
    boundary_ring,
    detect_loci,
    SingularMask,
)
from .ladder import LadderConfig, ResidualReport, run_ladder


def _with_floor(u: GridFunction, floor: float) -> GridFunction:
    vals = np.where(u.floor_set, floor, u.values)
    return u.replace(values=vals, floor=floor)


def _floor_check(phi: GridFunction, rep: ResidualReport, run) -> ResidualReport:
    other = run(_with_floor(phi, 2.0 * phi.floor))
    ok = rep.g.mask & ~rep.g.floor_set & ~other.g.floor_set
    diff = float(np.max(np.abs(rep.g.values - other.g.values)[ok])) if np.any(ok) else 0.0
    rep.floor_stable = diff <= eps_env(rep.g)
    return rep


def residual(phi: GridFunction, cfg: LadderConfig = LadderConfig(), **kw) -> ResidualReport:
    """g_phi as the limit of envelope(min(phi + C, 0))."""
    def run(u):
        if u.is_disk:
            return disk.residual_1d(u, cfg, **kw)
        return run_ladder(lambda c, prev: envelope(shifted(u, c), **kw), cfg)

    rep = run(phi)
    return _floor_check(phi, rep, run) if cfg.floor_check else rep


# ------------------------------------------------------- collar ladders


def _dilate(mask: np.ndarray, steps: int) -> np.ndarray:
    out = mask.copy()
    for _ in range(steps):
        grown = out.copy()
        for ax in range(mask.ndim):
            lo = [slice(None)] * mask.ndim
            hi = [slice(None)] * mask.ndim
            lo[ax], hi[ax] = slice(1, None), slice(None, -1)
            grown[tuple(lo)] |= out[tuple(hi)]
            grown[tuple(hi)] |= out[tuple(lo)]
        out = grown
    return out


def _fixed_slopes(base: GridFunction, kw: dict):
    """Size the slope grid from phi itself: the cut-off obstacles have jumps
    whose difference quotients say nothing about the slopes the envelope needs."""
    if not base.is_disk and kw.get("slopes") is None:
        kw["slopes"] = default_slopes(base)


def _collar_ladder(phi: GridFunction, region, side: dict, cfg: LadderConfig, delta0: float,
                   m_max: int = 12, **kw) -> ResidualReport:
    """Ladder with phi + C imposed on region(delta) only, then delta -> 0.

    ``region(delta)`` returns a node mask; the obstacle is 0 elsewhere and the
    result keeps the side data in ``side``.
    """
    base = phi.replace(**side)
    _fixed_slopes(base, kw)
    prev = None
    rep = None
    last_mask = None
    for m in range(m_max):
        delta = delta0 * 2.0 ** (-m)
        mask = region(delta)
        if last_mask is not None and np.array_equal(mask, last_mask):
            continue
        last_mask = mask

        def step(c, _prev, mask=mask):
            vals = np.where(mask, np.minimum(phi.values + c, 0.0), 0.0)
            vals = np.where(phi.floor_set & mask, phi.floor, vals)
            return envelope(base.with_values(vals), **kw)

        rep = run_ladder(step, cfg)
        if prev is not None:
            ok = rep.g.mask
            gap = float(np.max(np.abs(rep.g.values - prev.values)[ok])) if np.any(ok) else 0.0
            if gap <= eps_env(rep.g):
                break
        prev = rep.g
    return rep


def _ambient_distance(u: GridFunction, points) -> np.ndarray:
    z = disk.nodes(u.domain)
    d = np.full(u.grid.shape, np.inf)
    for p in points:
        d = np.minimum(d, np.abs(z - p))
    return d


def _lower_faces(u: GridFunction) -> np.ndarray:
    """Log-distance to the truncation faces t_j = t_min_j (the z_j = 0 axes)."""
    pts = u.grid.points()
    return np.min(pts - np.array(u.domain.t_min), axis=-1)


def _outer_distance(u: GridFunction) -> np.ndarray:
    """Log-distance to the outer boundary of the domain, measured along t."""
    if u.domain.kind == "ball":
        pts = u.grid.points()
        return -0.5 * np.log(np.sum(np.exp(2.0 * pts), axis=-1))
    return -np.max(u.grid.points(), axis=-1)


def residual_green(phi: GridFunction, mask: SingularMask | None = None,
                   cfg: LadderConfig = LadderConfig(), delta0: float = 0.5, **kw) -> ResidualReport:
    """g^o: constraints only near the interior unbounded locus."""
    mask = mask or detect_loci(phi)
    h = phi.grid.h_max
    if phi.is_disk:
        centers = [a.z for a in phi.atoms]
        dist = _ambient_distance(phi, centers)

        def region(delta):
            return phi.mask & ((dist < max(delta, 1.5 * h)) | _dilate(mask.L, 1))

        side = {"atoms": phi.atoms, "boundary_atoms": ()}
    else:
        depth = _lower_faces(phi)

        def region(delta):
            return phi.mask & ((depth < max(delta, 0.5 * h)) | _dilate(mask.L, 1))

        side = {"tail": phi.tail}
    return _collar_ladder(phi, region, side, cfg, delta0, **kw)


def residual_poisson(phi: GridFunction, mask: SingularMask | None = None,
                     cfg: LadderConfig = LadderConfig(), delta0: float = 0.5, **kw) -> ResidualReport:
    """g^b: constraints only near the boundary locus."""
    mask = mask or detect_loci(phi)
    h = phi.grid.h_max
    ring = boundary_ring(phi.grid, phi.domain)
    if phi.is_disk:
        dist = _ambient_distance(phi, [b.zeta for b in phi.boundary_atoms])

        def region(delta):
            near = (dist < max(delta, 1.5 * h)) | _dilate(mask.BL, int(np.ceil(delta / h)))
            return phi.mask & near

        side = {"atoms": (), "boundary_atoms": phi.boundary_atoms}
    else:
        out = _outer_distance(phi)

        def region(delta):
            collar = (out < max(delta, 1.5 * h)) & _dilate(mask.BL | ring, int(np.ceil(delta / h)))
            return phi.mask & collar

        keep = phi.tail is not None and phi.tail.touches_boundary()
        side = {"tail": phi.tail if keep else None}
    return _collar_ladder(phi, region, side, cfg, delta0, **kw)


def asymptotic_rooftop(phi: GridFunction, psi: GridFunction, cfg: LadderConfig = LadderConfig(),
                       **kw) -> ResidualReport:
    """P[phi](psi): the limit of P(psi, phi + C)."""
    def step(c, prev):
        return envelope(pointwise_min(psi, shifted(phi, c)), **kw)

    return run_ladder(step, cfg)


def least_maximal_majorant(phi: GridFunction, steps: int = 8, delta0: float = 2.0,
                           **kw) -> ResidualReport:
    """Increasing limit of envelopes constrained by phi only near the outer boundary."""
    h = phi.grid.h_max
    if phi.is_disk:
        r = np.abs(disk.nodes(phi.domain))
        dist = 1.0 - r
        side = {"atoms": (), "boundary_atoms": phi.boundary_atoms}
        delta0 = min(delta0, 0.5)
    else:
        dist = _outer_distance(phi)
        keep = phi.tail is not None and phi.tail.touches_boundary()
        side = {"tail": phi.tail if keep else None}
    base = phi.replace(**side)
    _fixed_slopes(base, kw)
    prev = None
    gaps = []
    out = None
    last = None
    converged = False
    for j in range(steps):
        collar = phi.mask & (dist < max(delta0 * 2.0 ** (-j), 1.5 * h))
        if last is not None and np.array_equal(collar, last):
            converged = True
            break
        last = collar
        vals = np.where(collar, phi.values, 0.0)
        out = envelope(base.with_values(vals), **kw)
        if prev is not None:
            gaps.append(float(np.max(np.abs(out.values - prev.values)[out.mask])))
        prev = out
    # the exhaustion is run to the end; eps_env only judges the last step
    converged = converged or (bool(gaps) and gaps[-1] <= eps_env(out))
    return ResidualReport(out, converged, len(gaps) + 1, gaps[-1] if gaps else 0.0, gaps)


# ----------------------------------------------------- second term r_phi


@dataclass
class SecondTermReport:
    r: GridFunction
    g_r: ResidualReport
    common_floor: np.ndarray
    mismatched_floor: np.ndarray
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "r_min": float(self.r.values[self.r.mask].min()),
            "g_r_sup_abs": float(np.max(np.abs(self.g_r.g.values))),
            "g_r": self.g_r.summary(),
            "common_floor_nodes": int(self.common_floor.sum()),
            "mismatched_floor_nodes": int(self.mismatched_floor.sum()),
            "notes": list(self.notes),
        }


def residual_second_term(phi: GridFunction, cfg: LadderConfig = LadderConfig(),
                         g: GridFunction | None = None, **kw) -> SecondTermReport:
    """r_phi = envelope(min(0, phi - g_phi)) and the residual of r_phi."""
    g = g if g is not None else residual(phi, cfg, **kw).g
    both = phi.floor_set & g.floor_set
    mismatch = phi.floor_set ^ g.floor_set
    diff = np.where(both, 0.0, phi.values - g.values)
    diff = np.clip(np.minimum(diff, 0.0), phi.floor, 0.0)
    diff = np.where(phi.mask, diff, 0.0)
    notes = []
    if both.any():
        notes.append(f"{int(both.sum())} common floor nodes read as 0")
    if mismatch.any():
        notes.append(f"{int(mismatch.sum())} nodes on only one floor set")
    if phi.is_disk:
        side = disk.subtract_atoms(phi, g)
    else:
        side = {"tail": None}
    base = phi.replace(values=diff, **side)
    r = envelope(base, **kw)
    return SecondTermReport(r, residual(r, cfg, **kw), both, mismatch, notes)


# -------------------------------------------------------- classification


@dataclass
class Classification:
    verdict: str
    model: bool
    approximately_model: bool | None
    depth_gaps: list
    ratio_trace: list
    half_box_trace: list
    axis_ratio: float
    notes: list = field(default_factory=list)

    def summary(self) -> dict:
        return {
            "verdict": self.verdict,
            "model": self.model,
            "approximately_model": self.approximately_model,
            "depth_gaps": [float(x) for x in self.depth_gaps],
            "ratio_trace": [[float(r), None if v is None else float(v)] for r, v in self.ratio_trace],
            "half_box_trace": [[float(r), None if v is None else float(v)] for r, v in self.half_box_trace],
            "axis_ratio": float(self.axis_ratio),
            "notes": list(self.notes),
        }


def subbox(u: GridFunction, depth: float) -> GridFunction:
    """Restriction of a toric function to the nodes with all t_j >= depth."""
    starts = []
    for j in range(u.grid.ndim):
        ax = u.grid.axis(j)
        starts.append(int(np.searchsorted(ax, depth - 1e-9 * abs(depth))))
    sl = tuple(slice(s, None) for s in starts)
    origin = tuple(float(u.grid.axis(j)[s]) for j, s in enumerate(starts))
    shape = tuple(n - s for n, s in zip(u.grid.shape, starts))
    grid = Grid(shape, origin, u.grid.spacing)
    dom = LogDomain(u.domain.kind, u.domain.n, origin, u.domain.member, u.domain.support_fn)
    return GridFunction(grid, u.values[sl], dom, u.floor, u.tail)


def _ratio_trace(phi, g, rungs, min_share):
    ok = phi.mask & ~phi.floor_set & (phi.values < 0)
    total = int(ok.sum())
    trace = []
    for k in range(rungs):
        r = 2.0 ** k
        deep = ok & (g.values < -r)
        if total == 0 or deep.sum() < min_share * total:
            trace.append((r, None))
            continue
        trace.append((r, float(np.min(g.values[deep] / phi.values[deep]))))
    return trace


def _valid(trace):
    return [(r, v) for r, v in trace if v is not None]


def classify_singularity(phi: GridFunction, cfg: LadderConfig = LadderConfig(),
                         g: GridFunction | None = None, *, threshold: float = 0.95,
                         stability: float = 0.02, min_share: float = 0.10, **kw) -> Classification:
    """Model / approximately model / neither, with the traces behind the verdict.

    model: sup(g - phi) does not grow over the nested boxes [-T/2^k, 0)^n.
    approximately model: min g/phi over {g < -R} exceeds ``threshold`` at the
    deepest rung holding at least ``min_share`` of the nodes, increases over
    the last three such rungs, and moves by at most ``stability`` when the box
    is halved.
    """
    if phi.is_disk:
        raise ValueError("classification works on toric grids")
    g = g if g is not None else residual(phi, cfg, **kw).g
    depth = abs(min(phi.domain.t_min))
    gaps = []
    for k in range(3):
        box = phi.mask & ~phi.floor_set & np.all(phi.grid.points() >= -depth / 2.0 ** k, axis=-1)
        gaps.append(float(np.max((g.values - phi.values)[box])) if np.any(box) else 0.0)
    model = gaps[0] <= 1.1 * gaps[1] + 0.5 and gaps[1] <= 1.1 * gaps[2] + 0.5

    rungs = int(np.ceil(np.log2(depth))) + 1
    trace = _ratio_trace(phi, g, rungs, min_share)
    half_phi = subbox(phi, -depth / 2.0)
    half_g = residual(half_phi, cfg, **kw).g
    half = _ratio_trace(half_phi, half_g, rungs, min_share)

    # ratio phi/g on the truncation faces, the trace of the coordinate axes
    face = np.zeros(phi.grid.shape, dtype=bool)
    for j in range(phi.grid.ndim):
        idx = [slice(None)] * phi.grid.ndim
        idx[j] = 0
        face[tuple(idx)] = True
    sel = face & phi.mask & ~phi.floor_set & (g.values <= -1.0)
    axis_ratio = float(np.max(phi.values[sel] / g.values[sel])) if np.any(sel) else float("nan")

    notes = []
    valid = _valid(trace)
    approx = None
    if model:
        verdict = "model"
        approx = True
    elif len(valid) < 3:
        verdict = "inconclusive"
        notes.append("fewer than three ratio rungs hold enough nodes")
    else:
        last = [v for _, v in valid[-3:]]
        monotone = all(b >= a - 1e-12 for a, b in zip(last, last[1:]))
        hv = dict(_valid(half))
        common = [r for r, _ in valid if r in hv][-3:]
        stable = bool(common) and all(abs(dict(valid)[r] - hv[r]) <= stability for r in common)
        approx = last[-1] > threshold and monotone and stable
        if not monotone:
            notes.append("ratio trace not monotone over the last three rungs")
        if not stable:
            notes.append("ratio trace moves when the box is halved")
        if last[-1] <= threshold:
            notes.append(f"deepest ratio {last[-1]:.4f} <= {threshold}")
        verdict = "approximately_model" if approx else "neither"
    return Classification(verdict, model, approx, gaps, trace, half, axis_ratio, notes)
