#!/usr/bin/env python3
"""
Discrete-ordinates reference solver and moment extraction tests

Usage:
    uv run pytest test_kinetic.py
"""

import math

import numpy as np
import pytest

from closure_modules.closure import PNClosure
from closure_modules.errors import DimensionError, NumericError, QuadratureExactnessError, UsageError
from closure_modules.fields import KineticField, MediumCoeffs, MomentField, grid_points
from closure_modules.kinetic import (
    KineticConfig,
    extract_moments,
    isotropic_field,
    kinetic_rhs,
    kinetic_solve,
    spatial_derivative,
    total_mass,
)
from closure_modules.momsolver import moment_rhs
from closure_modules.polyalg import gauss_legendre, legendre_eval


def test_constant_field_has_no_tendency_without_absorption():
    f = isotropic_field(np.ones(16), 8)
    rhs = kinetic_rhs(f, MediumCoeffs.constant(16, 1.0, 0.0))
    np.testing.assert_allclose(rhs, 0.0, atol=1e-13)


def test_pure_absorption_tendency():
    f = isotropic_field(np.full(16, 2.5), 8)
    rhs = kinetic_rhs(f, MediumCoeffs.constant(16, 0.0, 1.0))
    np.testing.assert_allclose(rhs, -2.5, atol=1e-13)


def test_rhs_rejects_mismatched_medium():
    with pytest.raises(UsageError):
        kinetic_rhs(isotropic_field(np.ones(16), 4), MediumCoeffs.constant(12, 1.0, 0.0))


def test_pure_decay():
    nx = 32
    ic = isotropic_field(np.ones(nx), 4)
    solution = kinetic_solve(ic, MediumCoeffs.constant(nx, 0.0, 1.0), 1.0,
                             config=KineticConfig(n_v=4))
    final = solution.at(1.0)
    np.testing.assert_allclose(final.values, math.exp(-1.0), rtol=1e-6)


def test_free_transport_translates_each_ordinate():
    nx, n_v, t_end = 128, 2, 0.25
    x = grid_points(nx)
    ic = isotropic_field(np.sin(2 * math.pi * x), n_v)
    solution = kinetic_solve(ic, MediumCoeffs.constant(nx, 0.0, 0.0), t_end,
                             config=KineticConfig(n_v=n_v))
    v = gauss_legendre(n_v).nodes
    exact = np.sin(2 * math.pi * (x[None, :] - v[:, None] * t_end))
    np.testing.assert_allclose(solution.at(t_end).values, exact, atol=1e-4)


def test_snapshots_hit_requested_times():
    nx = 16
    ic = isotropic_field(1.0 + 0.5 * np.sin(2 * math.pi * grid_points(nx)), 4)
    solution = kinetic_solve(ic, MediumCoeffs.constant(nx, 1.0, 0.0), 0.3, [0.1, 0.2],
                             config=KineticConfig(n_v=4))
    assert solution.times == [0.1, 0.2, 0.3]
    assert solution.steps > 0
    with pytest.raises(KeyError):
        solution.at(0.15)


def test_mass_conserved_without_absorption():
    nx = 64
    x = grid_points(nx)
    ic = isotropic_field(1.0 + np.exp(-100 * (x - 0.5) ** 2), 8)
    solution = kinetic_solve(ic, MediumCoeffs.constant(nx, 2.0, 0.0), 0.2,
                             config=KineticConfig(n_v=8))
    assert total_mass(solution.at(0.2)) == pytest.approx(total_mass(ic), rel=1e-11)


def test_solve_rejects_bad_times():
    ic = isotropic_field(np.ones(8), 4)
    med = MediumCoeffs.constant(8, 1.0, 0.0)
    with pytest.raises(UsageError):
        kinetic_solve(ic, med, 0.0)
    with pytest.raises(UsageError):
        kinetic_solve(ic, med, 0.5, [0.7])


def test_negative_intensity_is_reported():
    ic = isotropic_field(np.full(8, -1.0), 4)
    with pytest.raises(NumericError):
        kinetic_solve(ic, MediumCoeffs.constant(8, 0.0, 0.0), 0.1, config=KineticConfig(n_v=4))


def test_config_validation():
    with pytest.raises(UsageError):
        KineticConfig(cfl=0.0)
    with pytest.raises(UsageError):
        KineticConfig(weno_variant="eno")


def test_moments_of_uniform_intensity():
    m = extract_moments(isotropic_field(np.ones(10), 16), 6)
    assert m.order == 6
    np.testing.assert_allclose(m.values[0], 1.0, atol=1e-14)
    np.testing.assert_allclose(m.values[1:], 0.0, atol=1e-14)


def test_moments_of_legendre_mode():
    v = gauss_legendre(16).nodes
    f = KineticField(np.tile(legendre_eval(2, v)[:, None], (1, 10)))
    m = extract_moments(f, 4)
    np.testing.assert_allclose(m.values[2], 0.2, atol=1e-14)
    np.testing.assert_allclose(m.values[[0, 1, 3, 4]], 0.0, atol=1e-14)


def test_moment_order_limited_by_ordinates():
    f = isotropic_field(np.ones(10), 4)
    extract_moments(f, 3)
    with pytest.raises(QuadratureExactnessError):
        extract_moments(f, 4)


def test_spatial_derivative_default_spacing():
    x = grid_points(64)
    d = spatial_derivative(np.sin(2 * math.pi * x)[None, :])
    np.testing.assert_allclose(d[0], 2 * math.pi * np.cos(2 * math.pi * x), atol=1e-4)


def test_grid_and_field_helpers():
    np.testing.assert_allclose(grid_points(5), [0.1, 0.3, 0.5, 0.7, 0.9])
    with pytest.raises(DimensionError):
        grid_points(4)

    med = MediumCoeffs.from_functions(10, lambda x: 1.0 + x, lambda x: 0.5)
    np.testing.assert_allclose(med.sigma_s, 1.0 + grid_points(10))
    np.testing.assert_array_equal(med.sigma_a, 0.5)
    np.testing.assert_allclose(med.source_diagonal(2)[1], -(1.5 + grid_points(10)))
    with pytest.raises(ValueError):
        MediumCoeffs.constant(8, -1.0, 0.0)

    m = extract_moments(isotropic_field(np.ones(10), 8), 5)
    assert m.truncate(2).order == 2
    with pytest.raises(DimensionError):
        m.truncate(6)
    assert m.check_realizability()
    assert not MomentField(np.array([[1.0] * 5, [2.0] * 5])).check_realizability()


def smooth_intensity(nx: int, n_v: int) -> np.ndarray:
    """Positive intensity with x-v coupling and no mirror symmetry"""
    x = grid_points(nx)[None, :]
    v = gauss_legendre(n_v).nodes[:, None]
    return 1.0 + 0.3 * np.sin(2 * math.pi * x + v) + 0.2 * np.cos(4 * math.pi * x) * v ** 2


def test_mirrored_problem_gives_mirrored_solution():
    nx, n_v, t_end = 32, 8, 0.2
    x = grid_points(nx)
    sigma_s = 1.0 + 0.5 * np.sin(2 * math.pi * x) ** 2 + 0.3 * np.cos(2 * math.pi * x)
    sigma_a = 0.2 + 0.1 * np.sin(2 * math.pi * x)
    f0 = smooth_intensity(nx, n_v)
    config = KineticConfig(n_v=n_v)

    forward = kinetic_solve(KineticField(f0), MediumCoeffs(sigma_s, sigma_a), t_end, config=config)
    # x -> 1 - x and v -> -v reverse both axes on the cell-centred grid
    mirrored = kinetic_solve(KineticField(f0[::-1, ::-1].copy()),
                             MediumCoeffs(sigma_s[::-1].copy(), sigma_a[::-1].copy()), t_end,
                             config=config)
    np.testing.assert_allclose(mirrored.at(t_end).values, forward.at(t_end).values[::-1, ::-1],
                               rtol=0, atol=1e-12)


def test_moment_hierarchy_matches_kinetic_moments():
    nx, n_v, N = 128, 16, 4
    f = KineticField(smooth_intensity(nx, n_v))
    med = MediumCoeffs.constant(nx, 1.5, 0.5)
    from_kinetic = extract_moments(KineticField(kinetic_rhs(f, med)), N).values
    from_moments = moment_rhs(extract_moments(f, N), PNClosure(N), med)
    # rows below N do not depend on the closure
    np.testing.assert_allclose(from_moments[:N], from_kinetic[:N], atol=1e-3)
    assert np.max(np.abs(from_kinetic[:N])) > 0.1
