"""Exact polyhedral sets Gamma = conv{a_i} + R^n_+ and their support functions.

Everything here works in :class:`fractions.Fraction`, so the semiring identities
(intersection for rooftops, Minkowski sum for sums, hull of the union for maxima)
hold with exact equality.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import cached_property

import numpy as np


class DimensionError(ValueError):
    pass


class DomainError(ValueError):
    pass


def to_fraction(x) -> Fraction:
    """Parse ints, floats, ``Fraction`` or ``"p/q"`` strings exactly."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        return Fraction(x).limit_denominator(10**12) if x != int(x) else Fraction(int(x))
    return Fraction(x)


def _dot(a, b) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _solve(rows, rhs):
    """Exact Gaussian elimination; returns None for singular systems."""
    n = len(rows)
    m = [list(r) + [v] for r, v in zip(rows, rhs)]
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return None
        m[col], m[piv] = m[piv], m[col]
        p = m[col][col]
        m[col] = [v / p for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                f = m[r][col]
                m[r] = [a - f * b for a, b in zip(m[r], m[col])]
    return tuple(m[r][n] for r in range(n))


def _nullvector(vectors, n):
    """A nonzero vector orthogonal to ``vectors`` (which span n-1 dims), or None."""
    k = len(vectors)
    for free in range(n):
        rows = [[v[j] for j in range(n) if j != free] for v in vectors]
        rhs = [-v[free] for v in vectors]
        if k != n - 1:
            return None
        sol = _solve(rows, rhs) if n > 1 else ()
        if sol is None:
            continue
        nu = list(sol)
        nu.insert(free, Fraction(1))
        return tuple(nu)
    return None


class GammaSet:
    """Convex set conv{a_i} + R^n_+ inside the positive orthant.

    Generators are kept irredundant: no generator lies in the set spanned
    by the others.
    """

    def __init__(self, generators):
        gens = [tuple(to_fraction(x) for x in g) for g in generators]
        if not gens:
            raise ValueError("a GammaSet needs at least one generator")
        n = len(gens[0])
        if n < 1 or any(len(g) != n for g in gens):
            raise DimensionError("generators must share one dimension >= 1")
        if any(x < 0 for g in gens for x in g):
            raise DomainError("generators must lie in the positive orthant")
        self.n = n
        self.generators = _prune(sorted(set(gens)), n)

    @classmethod
    def origin(cls, n: int) -> "GammaSet":
        """The whole orthant; the recession set of a bounded function."""
        return cls([(0,) * n])

    @classmethod
    def parse(cls, rows) -> "GammaSet":
        return cls([[to_fraction(x) for x in row] for row in rows])

    def __eq__(self, other):
        return isinstance(other, GammaSet) and self.generators == other.generators

    def __hash__(self):
        return hash(self.generators)

    def __repr__(self):
        return f"GammaSet({[[str(x) for x in g] for g in self.generators]})"

    def to_literal(self):
        """Rows of strings, the scenario-file literal."""
        return [[str(x) for x in g] for g in self.generators]

    @cached_property
    def halfspaces(self):
        """Inequalities <nu, x> >= c with nu >= 0 describing the set."""
        return _halfspaces(self.generators, self.n)

    def contains(self, x) -> bool:
        x = [to_fraction(v) for v in x]
        return all(_dot(nu, x) >= c for nu, c in self.halfspaces)

    def contains_float(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Vectorised membership for float points of shape (..., n)."""
        pts = np.asarray(points, dtype=float)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for nu, c in self.halfspaces:
            nuf = np.array([float(v) for v in nu])
            ok &= pts @ nuf >= float(c) - tol * (1.0 + np.abs(pts).sum(axis=-1))
        return ok

    def scale(self, c) -> "GammaSet":
        c = to_fraction(c)
        if c <= 0:
            raise ValueError("scale factor must be positive")
        return GammaSet([[c * x for x in g] for g in self.generators])

    def is_orthant(self) -> bool:
        return self.generators == ((Fraction(0),) * self.n,)

    def touches_boundary(self) -> bool:
        """Whether {Psi = -inf} meets the boundary of the ball or polydisk.

        That happens exactly when some coordinate k has no generator supported
        on {k} alone: then the whole z_k axis is singular.
        """
        for k in range(self.n):
            if not any(all(g[j] == 0 for j in range(self.n) if j != k) for g in self.generators):
                return True
        return False

    def covolume(self):
        """Exact volume of R^n_+ minus the set, or None when it is infinite."""
        return _covolume(self)

    def max_coordinate(self) -> Fraction:
        return max(max(g) for g in self.generators)


def _prune(gens, n):
    keep = list(gens)
    changed = True
    while changed and len(keep) > 1:
        changed = False
        for i, a in enumerate(keep):
            others = keep[:i] + keep[i + 1:]
            # cheap domination test first
            if any(all(o[j] <= a[j] for j in range(n)) for o in others):
                keep = others
                changed = True
                break
            if all(_dot(nu, a) >= c for nu, c in _halfspaces(tuple(others), n)):
                keep = others
                changed = True
                break
    return tuple(keep)


def _halfspaces(gens, n):
    """Facet candidates through generators and recession directions e_j."""
    units = [tuple(Fraction(int(i == j)) for i in range(n)) for j in range(n)]
    found = set()
    for k in range(1, n + 1):
        for pts in itertools.combinations(gens, k):
            for dirs in itertools.combinations(units, n - k):
                vecs = [tuple(p[j] - pts[0][j] for j in range(n)) for p in pts[1:]] + list(dirs)
                if n == 1:
                    nu = (Fraction(1),)
                else:
                    nu = _nullvector(vecs, n)
                if nu is None:
                    continue
                if all(v <= 0 for v in nu):
                    nu = tuple(-v for v in nu)
                if any(v < 0 for v in nu):
                    continue
                scale = max(nu)
                nu = tuple(v / scale for v in nu)
                c = min(_dot(nu, g) for g in gens)
                if _dot(nu, pts[0]) != c:
                    continue
                found.add((nu, c))
    for u in units:
        found.add((u, Fraction(0)))
    return tuple(sorted(found))


def _vertices(halfspaces, n):
    verts = set()
    for combo in itertools.combinations(halfspaces, n):
        sol = _solve([nu for nu, _ in combo], [c for _, c in combo])
        if sol is None:
            continue
        if all(_dot(nu, sol) >= c for nu, c in halfspaces):
            verts.add(sol)
    return sorted(verts)


def _check_dims(g1: GammaSet, g2: GammaSet):
    if g1.n != g2.n:
        raise DimensionError(f"dimension mismatch: {g1.n} vs {g2.n}")


def support(gamma: GammaSet, t) -> Fraction:
    """psi_Gamma(t) = max_i <a_i, t> for t <= 0."""
    t = [to_fraction(v) for v in t]
    if len(t) != gamma.n:
        raise DimensionError("point dimension does not match the set")
    if any(v > 0 for v in t):
        raise DomainError("support is +inf off the negative orthant")
    return max(_dot(a, t) for a in gamma.generators)


def support_float(gamma: GammaSet, points: np.ndarray) -> np.ndarray:
    """Float evaluation of psi_Gamma on an array of shape (..., n)."""
    a = np.array([[float(x) for x in g] for g in gamma.generators])
    return np.max(np.asarray(points, dtype=float) @ a.T, axis=-1)


def intersect(g1: GammaSet, g2: GammaSet) -> GammaSet:
    """The set realizing the rooftop P(Psi_1, Psi_2)."""
    _check_dims(g1, g2)
    hs = tuple(sorted(set(g1.halfspaces) | set(g2.halfspaces)))
    return GammaSet(_vertices(hs, g1.n))


def hull_union(g1: GammaSet, g2: GammaSet) -> GammaSet:
    """The set realizing max(Psi_1, Psi_2)."""
    _check_dims(g1, g2)
    return GammaSet(list(g1.generators) + list(g2.generators))


def minkowski_sum(g1: GammaSet, g2: GammaSet) -> GammaSet:
    """The set realizing Psi_1 + Psi_2."""
    _check_dims(g1, g2)
    return GammaSet([tuple(x + y for x, y in zip(a, b))
                     for a in g1.generators for b in g2.generators])


def lelong_directional(gamma: GammaSet, a) -> Fraction:
    """min_i <a_i, a>, the directional Lelong number in direction a."""
    a = [to_fraction(v) for v in a]
    if len(a) != gamma.n:
        raise DimensionError("direction dimension does not match the set")
    if any(v < 0 for v in a):
        raise DomainError("direction must be nonnegative")
    if all(v == 0 for v in a):
        raise DomainError("zero direction")
    return min(_dot(g, a) for g in gamma.generators)


def _covolume(gamma: GammaSet):
    """Volume of R^n_+ minus Gamma: a union of pyramids with apex 0.

    Finite only when Gamma meets every coordinate axis; otherwise None.
    """
    n = gamma.n
    if gamma.is_orthant():
        return Fraction(0)
    if gamma.touches_boundary():
        return None
    if n == 1:
        return gamma.generators[0][0]
    if n > 3:
        raise NotImplementedError("covolume is implemented for n <= 3")
    total = Fraction(0)
    for nu, c in gamma.halfspaces:
        if c <= 0:
            continue
        face = [g for g in gamma.generators if _dot(nu, g) == c]
        if n == 2:
            a, b = face[0], face[-1]
            total += abs(a[0] * b[1] - a[1] * b[0]) / 2
            continue
        ctr = tuple(sum(v[j] for v in face) / len(face) for j in range(3))
        e1 = tuple(face[0][j] - ctr[j] for j in range(3))
        e2 = (nu[1] * e1[2] - nu[2] * e1[1], nu[2] * e1[0] - nu[0] * e1[2],
              nu[0] * e1[1] - nu[1] * e1[0])

        def angle(v):
            d = tuple(v[j] - ctr[j] for j in range(3))
            return math.atan2(float(_dot(d, e2)), float(_dot(d, e1)))

        ring = sorted(face, key=angle)
        for i, p in enumerate(ring):
            q = ring[(i + 1) % len(ring)]
            det = (ctr[0] * (p[1] * q[2] - p[2] * q[1])
                   - ctr[1] * (p[0] * q[2] - p[2] * q[0])
                   + ctr[2] * (p[0] * q[1] - p[1] * q[0]))
            total += abs(det) / 6
    return total


def indicator_values(gamma: GammaSet, points: np.ndarray) -> np.ndarray:
    """Sample psi_Gamma at float points (..., n), all assumed <= 0."""
    return support_float(gamma, points)
