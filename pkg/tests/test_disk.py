import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pluripot import builtins as B
from pluripot import disk
from pluripot.grid import Atom, DiskDomain, GridFunction
from pluripot.ladder import LadderConfig
from pluripot.residual import residual_green, residual_poisson

DOM = DiskDomain(128)


def green(*atoms, dom=DOM):
    return disk.green_potential(disk.RieszData(atoms=atoms), dom)


def test_green_potential_at_origin_is_log_modulus():
    u = green((0.0, 0.0, 1.0))
    z = disk.nodes(DOM)
    with np.errstate(divide="ignore"):
        want = np.log(np.abs(z))
    assert np.max(np.abs(u.values - want)[u.mask]) < 1e-12
    assert u.atoms == (Atom(0.0, 0.0, 1.0),)


def test_green_potential_is_the_moebius_log():
    a = complex(0.3, -0.2)
    u = green((a.real, a.imag, 2.0))
    z = disk.nodes(DOM)[u.mask]
    want = 2.0 * np.log(np.abs((z - a) / (1 - np.conj(a) * z)))
    assert np.max(np.abs(u.values[u.mask] - want)) < 1e-12


def test_green_potential_of_uniform_density_matches_radial_formula():
    r0 = 0.25
    z = disk.nodes(DOM)
    rho = np.where(np.abs(z) < r0, 1.0 / (math.pi * r0 * r0), 0.0)
    u = disk.green_potential(disk.RieszData(density=rho), DOM)
    r = np.abs(z)
    with np.errstate(divide="ignore"):
        want = np.where(r >= r0, np.log(r), math.log(r0) + (r * r - r0 * r0) / (2 * r0 * r0))
    assert np.max(np.abs(u.values - want)[u.mask]) < 2e-2


def test_poisson_integral_examples():
    z = disk.nodes(DOM)
    u = disk.poisson_integral(disk.RieszData(boundary_atoms=[(0.0, 1.0)]), DOM)
    assert np.max(np.abs(u.values - disk.poisson_kernel(z, 1.0))[u.mask]) < 1e-12
    flat = disk.poisson_integral(disk.RieszData(boundary_density=np.ones(512)), DOM)
    near0 = u.mask & (np.abs(z) < 0.05)
    assert np.max(np.abs(flat.values[near0] + 1.0)) < 1e-9
    both = disk.poisson_integral(disk.RieszData(boundary_atoms=[(0.0, 1.0), (1.0, 0.5)]), DOM)
    one = disk.poisson_integral(disk.RieszData(boundary_atoms=[(1.0, 0.5)]), DOM)
    assert np.max(np.abs(both.values - u.values - one.values)[u.mask]) < 1e-12


def test_riesz_data_validation():
    with pytest.raises(ValueError):
        disk.RieszData(atoms=[(0.0, 0.0, -1.0)])
    with pytest.raises(ValueError):
        disk.RieszData(atoms=[(1.0, 0.0, 1.0)])
    with pytest.raises(ValueError):
        disk.RieszData(density=-np.ones((4, 4)))


def test_atom_on_a_node_is_shifted_with_a_warning():
    with pytest.warns(UserWarning, match="grid node"):
        u = green((0.0, 0.0, 1.0), dom=DiskDomain(65))
    assert np.all(np.isfinite(u.values)) and u.values.min() > -10


def test_envelope_keeps_harmonic_functions():
    h = B.make("poisson-kernel", B.GridSpec(kind="disk", size=96))
    v = disk.subharmonic_envelope(h)
    assert np.max(np.abs(v.values - h.values)) < 1e-12


def test_envelope_of_clipped_log_is_log():
    g = green((0.0, 0.0, 1.0))
    h = g.with_values(np.minimum(0.0, g.values + 3.0))
    v = disk.subharmonic_envelope(h)
    assert np.max(np.abs(v.values - g.values)[v.mask]) < 1e-8
    z = disk.nodes(DOM)
    ring = v.mask & (np.abs(np.abs(z) - math.exp(-1)) < 0.004)
    assert np.max(np.abs(v.values[ring] + 1.0)) < 0.02


def _random_obstacle(seed, size=48):
    rng = np.random.default_rng(seed)
    dom = DiskDomain(size)
    z = disk.nodes(dom)
    vals = -1.0 - 0.5 * np.abs(z) ** 2
    for _ in range(4):
        c, a, k = rng.uniform(-0.6, 0.6, 2), rng.uniform(0.2, 1.0), rng.uniform(2, 8)
        vals -= a * np.exp(-k * np.abs(z - complex(*c)) ** 2) * (1 + np.cos(k * z.real))
    grid = disk.disk_grid(dom)
    inside = np.abs(z) < 1
    return GridFunction(grid, np.where(inside, vals, 0.0), dom)


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10_000))
def test_envelope_solves_the_obstacle_problem(seed):
    h = _random_obstacle(seed)
    v = disk.subharmonic_envelope(h)
    rep = disk.complementarity(h, v)
    assert rep["above_obstacle"] < 1e-8
    assert rep["negative_laplacian"] < 1e-8
    assert rep["complementarity"] < 1e-8


def test_plain_psor_agrees_with_warm_start():
    h = _random_obstacle(7, size=32)
    v, stats = disk.subharmonic_envelope(h, stats=True)
    assert stats.converged
    psi = np.where(h.mask, h.values, 0.0)
    inner = disk.interior_mask(h)
    fixed = np.where(h.mask, np.minimum(psi, 0.0), 0.0)
    w, st2 = disk.psor(psi, inner, fixed)
    assert st2.converged and st2.sweeps > stats.sweeps
    assert np.max(np.abs(w - v.values)[h.mask]) < 1e-8


def test_relaxation_factor_must_lie_in_open_interval():
    h = _random_obstacle(1, size=16)
    for omega in (0.0, 2.0, -1.0):
        with pytest.raises(disk.ConfigError):
            disk.subharmonic_envelope(h, omega=omega)


def test_residual_1d_examples():
    g = green((0.2, 0.1, 1.0), dom=DiskDomain(96))
    rep = disk.residual_1d(g)
    assert rep.converged and np.max(np.abs(rep.g.values - g.values)) < 1e-9
    flat = _random_obstacle(3, size=48)
    rep = disk.residual_1d(flat, LadderConfig(k_max=8))
    assert np.max(np.abs(rep.g.values)) < 1e-9


def test_riesz_mass_is_recovered_from_the_laplacian():
    g = green((0.1, 0.05, 2.0))
    assert disk.mass_near(g, complex(0.1, 0.05), 0.3) == pytest.approx(2.0, abs=1e-4)
    z = disk.nodes(DOM)
    rho = np.where(np.abs(z - 0.3) < 0.2, 3.0, 0.0)
    u = disk.green_potential(disk.RieszData(density=rho), DOM)
    want = 3.0 * math.pi * 0.04
    assert disk.mass_near(u, 0.3, 0.35) == pytest.approx(want, rel=0.05)


def test_domination_check_examples():
    g = green((0.1, 0.05, 1.0))
    # linear functions are exactly harmonic for the five-point stencil
    z = disk.nodes(DOM)
    u = g.with_values(np.where(g.mask, np.maximum(g.values - 1.0 + 0.3 * z.real, g.floor), 0.0))
    rep = disk.domination_check(u, g, tol=1e-6)
    assert rep.precondition_ok and rep.holds
    rep = disk.domination_check(g.with_values(0.5 * g.values), g)
    assert not rep.precondition_ok and not rep.holds


def test_exaas4_has_no_collar_residuals():
    u = B.make("exaas4", B.GridSpec(kind="disk", size=64))
    assert np.max(np.abs(residual_poisson(u).g.values)) == 0.0
    assert np.max(np.abs(residual_green(u).g.values)) == 0.0


def test_poisson_collar_residual_recovers_the_kernel():
    u = B.make("poisson-kernel", B.GridSpec(kind="disk", size=64))
    rep = residual_poisson(u)
    assert np.max(np.abs(rep.g.values - u.values)) < 1e-9
    assert np.max(np.abs(residual_green(u).g.values)) < 1e-9
