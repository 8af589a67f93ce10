"""Unit-disk potentials: Green potentials, Poisson integrals, obstacle envelopes.

Disk functions keep their singular part (interior atoms a with mass m, boundary
atoms zeta with mass c) as exact side data:

    s(z) = sum m log|(z - a) / (1 - conj(a) z)| + sum c Omega_zeta(z).

Obstacle problems are solved for the grid remainder w = v - s, which has no
poles, by projected SOR with red-black ordering.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .grid import (
    Atom,
    BoundaryAtom,
    DiskDomain,
    GridFunction,
    boundary_ring,
    disk_grid,
    domain_mask,
)
from .ladder import LadderConfig, ResidualReport, run_ladder


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RieszData:
    """Riesz data of a negative subharmonic function on the disk.

    ``density`` is a nonnegative array on the disk grid (mass per unit area);
    ``boundary_density`` is a nonnegative array of values at equally spaced
    angles (mass per dtheta / 2pi).
    """

    atoms: tuple = ()
    density: np.ndarray | None = None
    boundary_atoms: tuple = ()
    boundary_density: np.ndarray | None = None

    def __post_init__(self):
        atoms = tuple(a if isinstance(a, Atom) else Atom(*map(float, a)) for a in self.atoms)
        batoms = tuple(b if isinstance(b, BoundaryAtom) else BoundaryAtom(*map(float, b))
                       for b in self.boundary_atoms)
        for a in atoms:
            if a.mass <= 0 or abs(a.z) >= 1.0:
                raise ValueError("atoms need positive mass and a location inside the disk")
        for b in batoms:
            if b.mass < 0:
                raise ValueError("boundary atoms need nonnegative mass")
        if self.density is not None and np.any(np.asarray(self.density) < 0):
            raise ValueError("density must be nonnegative")
        if self.boundary_density is not None and np.any(np.asarray(self.boundary_density) < 0):
            raise ValueError("boundary density must be nonnegative")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "boundary_atoms", batoms)


def nodes(domain: DiskDomain) -> np.ndarray:
    p = disk_grid(domain).points()
    return p[..., 0] + 1j * p[..., 1]


def green_kernel(z: np.ndarray, a: complex) -> np.ndarray:
    """log|(z - a) / (1 - conj(a) z)|, the disk Green function with pole a."""
    with np.errstate(divide="ignore"):
        return np.log(np.abs(z - a)) - np.log(np.abs(1.0 - np.conj(a) * z))


def poisson_kernel(z: np.ndarray, zeta: complex) -> np.ndarray:
    """Omega_zeta(z) = (|z|^2 - 1) / |1 - z conj(zeta)|^2."""
    return (np.abs(z) ** 2 - 1.0) / np.abs(1.0 - z * np.conj(zeta)) ** 2


def singular_values(u: GridFunction) -> np.ndarray:
    """The exact singular part s sampled on the grid (0 outside the disk)."""
    z = nodes(u.domain)
    s = np.zeros(u.grid.shape)
    for a in u.atoms:
        s += a.mass * green_kernel(z, a.z)
    for b in u.boundary_atoms:
        s += b.mass * poisson_kernel(z, b.zeta)
    return np.where(u.mask, s, 0.0)


def regular_part(u: GridFunction) -> np.ndarray:
    return np.where(u.mask, u.values - singular_values(u), 0.0)


def _shift_off_nodes(a: complex, domain: DiskDomain) -> complex:
    h = 2.0 / (domain.size - 1)
    i = (a.real + 1.0) / h
    j = (a.imag + 1.0) / h
    if abs(i - round(i)) < 1e-9 and abs(j - round(j)) < 1e-9:
        warnings.warn(f"atom {a} sits on a grid node; moved to the nearest half-node", stacklevel=3)
        return a + complex(h / 2, h / 2)
    return a


def green_potential(mu: RieszData, domain: DiskDomain = DiskDomain(), floor: float = -1.0e6) -> GridFunction:
    """Green potential of the interior part of ``mu`` on the disk grid."""
    grid = disk_grid(domain)
    z = nodes(domain)
    inside = domain_mask(grid, domain)
    atoms = tuple(Atom(_shift_off_nodes(a.z, domain).real, _shift_off_nodes(a.z, domain).imag, a.mass)
                  for a in mu.atoms)
    u = np.zeros(grid.shape)
    for a in atoms:
        u += a.mass * green_kernel(z, a.z)
    if mu.density is not None:
        u += _density_potential(np.asarray(mu.density, dtype=float), z, inside, grid.spacing[0])
    u = np.where(inside, np.maximum(u, floor), 0.0)
    return GridFunction(grid, np.minimum(u, 0.0), domain, floor=floor, atoms=atoms)


def _density_potential(rho, z, inside, h):
    """Midpoint quadrature of the Green kernel against a cell density."""
    src = np.flatnonzero((rho > 0) & inside)
    out = np.zeros(z.size)
    zf = z.reshape(-1)
    tgt = np.flatnonzero(inside.reshape(-1))
    w = rho.reshape(-1)[src] * h * h
    ws = zf[src]
    self_mean = math.log(h) + _UNIT_SQUARE_LOG
    block = max(1, (1 << 22) // max(1, len(src)))
    for s in range(0, len(tgt), block):
        t = tgt[s:s + block]
        d = np.abs(zf[t][:, None] - ws[None, :])
        same = d < 1e-14
        logd = np.log(np.where(same, 1.0, d))
        logd = np.where(same, self_mean, logd)
        mob = np.log(np.abs(1.0 - np.conj(ws)[None, :] * zf[t][:, None]))
        out[t] = (logd - mob) @ w
    return out.reshape(z.shape)


# mean of log r over the unit square [-1/2, 1/2]^2
_UNIT_SQUARE_LOG = (math.pi / 4.0 - 1.5) + 0.5 * math.log(0.5)


def poisson_integral(nu: RieszData, domain: DiskDomain = DiskDomain(), floor: float = -1.0e6) -> GridFunction:
    """Negative Poisson integral of the boundary part of ``nu``."""
    grid = disk_grid(domain)
    z = nodes(domain)
    inside = domain_mask(grid, domain)
    u = np.zeros(grid.shape)
    for b in nu.boundary_atoms:
        u += b.mass * poisson_kernel(z, b.zeta)
    if nu.boundary_density is not None:
        dens = np.asarray(nu.boundary_density, dtype=float)
        angles = 2.0 * np.pi * (np.arange(len(dens)) + 0.5) / len(dens)
        for th, val in zip(angles, dens):
            if val:
                zeta = complex(math.cos(th), math.sin(th))
                u += np.where(inside, val * poisson_kernel(z, zeta), 0.0) / len(dens)
    u = np.where(inside, np.maximum(u, floor), 0.0)
    batoms = tuple(b for b in nu.boundary_atoms if b.mass > 0)
    return GridFunction(grid, np.minimum(u, 0.0), domain, floor=floor, boundary_atoms=batoms)


def riesz_function(mu: RieszData, domain: DiskDomain = DiskDomain(), floor: float = -1.0e6) -> GridFunction:
    """green_potential(mu) + poisson_integral(mu)."""
    a = green_potential(mu, domain, floor)
    b = poisson_integral(mu, domain, floor)
    vals = np.maximum(a.values + b.values, floor)
    return a.with_values(vals, boundary_atoms=b.boundary_atoms)


# ------------------------------------------------------------ side data


def _key(z: complex):
    return (round(z.real, 9), round(z.imag, 9))


def merge_atoms(u: GridFunction, v: GridFunction, how: str) -> dict:
    def combine(xs, ys, loc, make):
        a = {loc(x): x.mass for x in xs}
        b = {loc(y): y.mass for y in ys}
        if how == "min":
            keys = sorted(set(a) | set(b))
            vals = {k: max(a.get(k, 0.0), b.get(k, 0.0)) for k in keys}
        elif how == "sum":
            keys = sorted(set(a) | set(b))
            vals = {k: a.get(k, 0.0) + b.get(k, 0.0) for k in keys}
        else:
            keys = sorted(set(a) & set(b))
            vals = {k: min(a[k], b[k]) for k in keys}
        return tuple(make(k, m) for k, m in vals.items() if m > 0)

    atoms = combine(u.atoms, v.atoms, lambda x: _key(x.z), lambda k, m: Atom(k[0], k[1], m))
    batoms = combine(u.boundary_atoms, v.boundary_atoms, lambda x: round(x.angle % (2 * math.pi), 9),
                     lambda k, m: BoundaryAtom(k, m))
    return {"atoms": atoms, "boundary_atoms": batoms}


def scale_atoms(u: GridFunction, c: float) -> dict:
    return {"atoms": tuple(Atom(a.x, a.y, c * a.mass) for a in u.atoms),
            "boundary_atoms": tuple(BoundaryAtom(b.angle, c * b.mass) for b in u.boundary_atoms)}


def subtract_atoms(u: GridFunction, g: GridFunction) -> dict:
    """Side data of u - g, keeping only positive leftovers."""
    gm = {_key(a.z): a.mass for a in g.atoms}
    gb = {round(b.angle % (2 * math.pi), 9): b.mass for b in g.boundary_atoms}
    atoms = tuple(Atom(a.x, a.y, a.mass - gm.get(_key(a.z), 0.0)) for a in u.atoms
                  if a.mass - gm.get(_key(a.z), 0.0) > 1e-12)
    batoms = tuple(BoundaryAtom(b.angle, b.mass - gb.get(round(b.angle % (2 * math.pi), 9), 0.0))
                   for b in u.boundary_atoms
                   if b.mass - gb.get(round(b.angle % (2 * math.pi), 9), 0.0) > 1e-12)
    return {"atoms": atoms, "boundary_atoms": batoms}


# ------------------------------------------------------------------ PSOR


def interior_mask(u: GridFunction) -> np.ndarray:
    return u.mask & ~boundary_ring(u.grid, u.domain)


@dataclass
class PSORStats:
    sweeps: int
    residual: float
    converged: bool


def _laplace_mean(w):
    m = np.zeros_like(w)
    m[1:-1, 1:-1] = 0.25 * (w[2:, 1:-1] + w[:-2, 1:-1] + w[1:-1, 2:] + w[1:-1, :-2])
    return m


def psor(psi: np.ndarray, interior: np.ndarray, fixed: np.ndarray, w0: np.ndarray | None = None,
         omega: float = 1.8, tol: float = 1e-10, max_sweeps: int = 200000):
    """Largest w <= psi with w <= mean of its 4 neighbours on ``interior``.

    Nodes outside ``interior`` keep the values in ``fixed``.
    """
    if not 0.0 < omega < 2.0:
        raise ConfigError(f"relaxation factor {omega} outside (0, 2)")
    w = np.where(interior, psi if w0 is None else np.minimum(w0, psi), fixed)
    ii, jj = np.indices(w.shape)
    colors = [interior & ((ii + jj) % 2 == c) for c in (0, 1)]
    res = np.inf
    sweeps = 0
    while sweeps < max_sweeps:
        sweeps += 1
        res = 0.0
        for mask in colors:
            mean = _laplace_mean(w)
            new = np.minimum(psi, w + omega * (mean - w))
            delta = np.abs(new - w)[mask]
            if delta.size:
                res = max(res, float(delta.max()))
            w = np.where(mask, new, w)
        if res < tol:
            break
    return w, PSORStats(sweeps, res, res < tol)


def _active_set(psi, interior, fixed, max_iter=200):
    """Primal-dual active set solve of the discrete obstacle problem.

    Used only to warm-start PSOR; the monotone M-matrix structure makes the
    active set settle in a handful of sparse solves.
    """
    idx = -np.ones(psi.shape, dtype=np.int64)
    ii, jj = np.nonzero(interior)
    n = len(ii)
    if n == 0:
        return np.where(interior, psi, fixed)
    idx[ii, jj] = np.arange(n)
    rows, cols = [np.arange(n)], [np.arange(n)]
    vals = [np.full(n, 4.0)]
    b = np.zeros(n)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        ni, nj = ii + di, jj + dj
        k = idx[ni, nj]
        inner = k >= 0
        rows.append(np.arange(n)[inner])
        cols.append(k[inner])
        vals.append(-np.ones(inner.sum()))
        b[~inner] += fixed[ni[~inner], nj[~inner]]
    m = sparse.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    p = psi[ii, jj]
    active = np.zeros(n, dtype=bool)
    w = p.copy()
    for _ in range(max_iter):
        free = ~active
        w = p.copy()
        if free.any():
            rhs = b[free] - m[free][:, active] @ p[active]
            w[free] = spsolve(m[free][:, free].tocsc(), rhs)
        lam = b - m @ w
        new = lam + (w - p) > 0
        if np.array_equal(new, active):
            break
        active = new
    out = fixed.copy()
    out[ii, jj] = np.minimum(w, p)
    return out


def subharmonic_envelope(h: GridFunction, omega: float = 1.8, tol: float = 1e-10,
                         max_sweeps: int = 200000, stats: bool = False):
    """Largest subharmonic grid function below h (five-point stencil)."""
    s = singular_values(h)
    psi = np.where(h.mask, h.values - s, 0.0)
    interior = interior_mask(h)
    fixed = np.where(h.mask, np.minimum(psi, 0.0), 0.0)
    w0 = _active_set(psi, interior, fixed)
    w, st = psor(psi, interior, fixed, w0, omega, tol, max_sweeps)
    v = np.where(h.mask, np.clip(s + w, h.floor, 0.0), 0.0)
    v = np.where(h.floor_set, h.floor, v)
    out = h.with_values(v)
    return (out, st) if stats else out


def complementarity(h: GridFunction, u: GridFunction) -> dict:
    """Worst violations of u <= h, Laplacian >= 0 and (u = h or Laplacian = 0)."""
    s = singular_values(h)
    w = np.where(h.mask, u.values - s, 0.0)
    psi = np.where(h.mask, h.values - s, 0.0)
    inner = interior_mask(h)
    lap = (_laplace_mean(w) - w)[inner]
    gap = (psi - w)[inner]
    return {
        "above_obstacle": float(max(0.0, (-gap).max())) if gap.size else 0.0,
        "negative_laplacian": float(max(0.0, (-lap).max())) if lap.size else 0.0,
        "complementarity": float(np.max(np.minimum(np.abs(gap), np.abs(lap)))) if gap.size else 0.0,
    }


def residual_1d(u: GridFunction, cfg: LadderConfig = LadderConfig(), **kw) -> ResidualReport:
    """Ladder of subharmonic envelopes of min(u + C, 0)."""
    def step(c, prev):
        hk = u.with_values(np.where(u.floor_set, u.floor, np.minimum(u.values + c, 0.0)))
        return subharmonic_envelope(hk, **kw)

    return run_ladder(step, cfg)


# ------------------------------------------------------------ measures


def laplacian(u: GridFunction, values: np.ndarray | None = None) -> np.ndarray:
    """Five-point Laplacian on interior nodes, 0 elsewhere."""
    v = u.values if values is None else values
    h = u.grid.spacing[0]
    lap = 4.0 * (_laplace_mean(v) - v) / (h * h)
    return np.where(interior_mask(u), lap, 0.0)


def mass_density(u: GridFunction) -> np.ndarray:
    """Signed Riesz mass per node: Laplacian * h^2 / (2 pi)."""
    h = u.grid.spacing[0]
    return laplacian(u) * h * h / (2.0 * math.pi)


def laplacian_measure(u: GridFunction):
    from .convex import DiscreteMeasure
    return DiscreteMeasure(np.maximum(mass_density(u), 0.0))


def mass_near(u: GridFunction, center: complex, radius: float) -> float:
    z = nodes(u.domain)
    return float(mass_density(u)[np.abs(z - center) < radius].sum())


# ---------------------------------------------------------- domination


@dataclass
class DominationReport:
    holds: bool
    max_violation: float
    max_violation_off_e: float
    precondition_ok: bool
    notes: list = field(default_factory=list)


def domination_check(u: GridFunction, v: GridFunction, exceptional=(), tol: float = 1e-8,
                     halo: int = 3) -> DominationReport:
    """Check u <= v in the interior given Lap v <= Lap u and u <= v on the ring off E."""
    notes = []
    inner = interior_mask(u)
    ring = u.mask & ~inner
    exc = np.zeros(u.grid.shape, dtype=bool)
    for idx in exceptional:
        exc[tuple(idx)] = True
    near = exc.copy()
    for _ in range(halo):
        grown = near.copy()
        grown[1:, :] |= near[:-1, :]
        grown[:-1, :] |= near[1:, :]
        grown[:, 1:] |= near[:, :-1]
        grown[:, :-1] |= near[:, 1:]
        near = grown
    lap_gap = float(np.max((laplacian(v) - laplacian(u))[inner])) if np.any(inner) else 0.0
    scale = 1.0 + float(np.max(np.abs(laplacian(u))))
    ok = True
    if lap_gap > tol * scale:
        ok = False
        notes.append(f"Laplacian of v exceeds that of u by {lap_gap:.3g}")
    bd = (u.values - v.values)[ring & ~exc]
    if bd.size and bd.max() > tol:
        ok = False
        notes.append(f"boundary inequality fails off E by {bd.max():.3g}")
    diff = u.values - v.values
    worst = float(max(0.0, diff[inner].max())) if np.any(inner) else 0.0
    off = inner & ~near
    worst_off = float(max(0.0, diff[off].max())) if np.any(off) else 0.0
    return DominationReport(worst_off <= tol, worst, worst_off, ok, notes)
