from fractions import Fraction as F

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pluripot import builtins as B
from pluripot.convex import envelope, homogenize
from pluripot.indicator import (
    DimensionError, DomainError, GammaSet, hull_union, indicator_values, intersect,
    lelong_directional, minkowski_sum, support,
)
from pluripot.residual import residual

fractions = st.builds(F, st.integers(0, 6), st.integers(1, 3))


def gammas(n):
    gen = st.lists(fractions, min_size=n, max_size=n)
    return st.lists(gen, min_size=1, max_size=4).filter(
        lambda gs: any(x != 0 for g in gs for x in g)).map(GammaSet)


points = st.builds(lambda a, b: -F(a, b), st.integers(0, 12), st.integers(1, 4))


def test_support_examples():
    assert support(GammaSet([[1, 2]]), [-1, -1]) == -3
    assert support(GammaSet([[1, 0], [0, 1]]), [-1, -1]) == -1
    assert support(GammaSet([[F(1, 3), 5]]), [0, 0]) == 0
    with pytest.raises(DomainError):
        support(GammaSet([[1, 0]]), [1, -1])
    with pytest.raises(DimensionError):
        support(GammaSet([[1, 0]]), [-1])


def test_semiring_examples():
    e1, e2 = GammaSet([[1, 0]]), GammaSet([[0, 1]])
    assert intersect(e1, e2) == GammaSet([[1, 1]])
    assert minkowski_sum(e1, e2) == GammaSet([[1, 1]])
    assert intersect(e1, e1) == hull_union(e1, e1) == e1
    with pytest.raises(DimensionError):
        intersect(e1, GammaSet([[1, 0, 0]]))


def test_lelong_examples():
    assert lelong_directional(GammaSet([[1, 1]]), [1, 1]) == 2
    assert lelong_directional(GammaSet([[2, 0], [0, 2]]), [1, 1]) == 2
    g = GammaSet([[3, 1], [1, 4]])
    assert lelong_directional(g, [1, 0]) == 1
    with pytest.raises(DomainError):
        lelong_directional(g, [0, 0])


def test_generators_are_irredundant():
    g = GammaSet([[2, 0], [0, 2], [1, 1], [2, 2], [3, 0]])
    assert g.generators == ((F(0), F(2)), (F(2), F(0)))
    with pytest.raises(DomainError):
        GammaSet([[-1, 0]])


def test_covolume_and_boundary_contact():
    assert GammaSet([[1, 0], [0, 1]]).covolume() == F(1, 2)
    assert GammaSet([[1, 0, 0], [0, 1, 0], [0, 0, 1]]).covolume() == F(1, 6)
    assert GammaSet([[1, 0]]).covolume() is None
    assert GammaSet([[1, 1]]).touches_boundary()


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 3).flatmap(lambda n: st.tuples(gammas(n), gammas(n), st.lists(points, min_size=n, max_size=n))))
def test_semiring_is_exact(args):
    g1, g2, t = args
    s1, s2 = support(g1, t), support(g2, t)
    assert support(minkowski_sum(g1, g2), t) == s1 + s2
    assert support(hull_union(g1, g2), t) == max(s1, s2)
    assert support(intersect(g1, g2), t) <= min(s1, s2)
    assert intersect(g1, g2) == intersect(g2, g1)
    assert minkowski_sum(g1, g2) == minkowski_sum(g2, g1)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 3).flatmap(lambda n: st.tuples(gammas(n), gammas(n), gammas(n))))
def test_intersect_and_sum_associate(args):
    a, b, c = args
    assert intersect(intersect(a, b), c) == intersect(a, intersect(b, c))
    assert minkowski_sum(minkowski_sum(a, b), c) == minkowski_sum(a, minkowski_sum(b, c))


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 3).flatmap(lambda n: st.tuples(gammas(n), gammas(n),
                                                     st.lists(fractions, min_size=n, max_size=n))))
def test_intersect_is_the_set_intersection(args):
    g1, g2, x = args
    assert intersect(g1, g2).contains(x) == (g1.contains(x) and g2.contains(x))


@settings(max_examples=60, deadline=None)
@given(gammas(2), st.lists(points, min_size=2, max_size=2), st.builds(F, st.integers(1, 5), st.integers(1, 5)))
def test_support_is_homogeneous(g, t, c):
    assert support(g, [c * v for v in t]) == c * support(g, t)
    assert support(g.scale(c), t) == c * support(g, t)


def test_indicator_samples_are_envelope_and_residual_fixed_points():
    spec = B.GridSpec(kind="polydisk", nodes=65, t_min=-8.0)
    for gens in ([[1, 0]], [[1, 0], [0, 1]], [[F(1, 2), 2], [3, 0]]):
        g = GammaSet(gens)
        u = B.toric(lambda t: indicator_values(g, t), spec, g)
        assert np.max(np.abs(envelope(u).values - u.values)) < 1e-9
        assert np.max(np.abs(residual(u).g.values - u.values)) < 1e-9
        assert np.max(np.abs(homogenize(u).values - u.values)) < 1e-9


def test_indicator_to_grid_examples():
    spec = B.GridSpec(kind="polydisk", nodes=9, t_min=-4.0)
    t = B.toric(lambda t: t[..., 0], spec).grid.points()
    assert np.array_equal(B.make("indicator:[[1,0]]", spec).values, t[..., 0])
    assert np.array_equal(B.make("indicator:[[1,0],[0,1]]", spec).values, np.max(t, axis=-1))
