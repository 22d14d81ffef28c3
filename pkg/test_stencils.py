#!/usr/bin/env python3
"""
WENO5, central-difference and SSP-RK3 tests on periodic grids

Usage:
    uv run pytest test_stencils.py
"""

import math

import numpy as np
import pytest

from closure_modules.errors import UsageError
from closure_modules.fields import grid_points
from closure_modules.stencils import (
    central_difference4,
    frozen_flux_derivative,
    lf_split_derivative,
    ssp_rk3_step,
    weno5_upwind_derivative,
)


def sine_error(derivative, nx: int) -> float:
    x = grid_points(nx)
    approx = derivative(np.sin(2 * math.pi * x), 1.0 / nx)
    return float(np.max(np.abs(approx - 2 * math.pi * np.cos(2 * math.pi * x))))


def test_central_difference_accuracy():
    assert sine_error(central_difference4, 256) <= 2e-7


def test_central_difference_is_fourth_order():
    ratio = sine_error(central_difference4, 128) / sine_error(central_difference4, 256)
    assert 14.0 < ratio < 18.0


def test_central_difference_batched_along_last_axis():
    x = grid_points(64)
    u = np.stack([np.sin(2 * math.pi * x), np.cos(2 * math.pi * x)])
    d = central_difference4(u, 1.0 / 64)
    np.testing.assert_allclose(d[1], central_difference4(u[1], 1.0 / 64))


@pytest.mark.parametrize("variant", ["z", "js"])
def test_weno_of_constant_is_zero(variant):
    u = np.full(16, 3.7)
    np.testing.assert_array_equal(weno5_upwind_derivative(u, 1 / 16, 1, variant), 0.0)
    np.testing.assert_array_equal(weno5_upwind_derivative(u, 1 / 16, -1, variant), 0.0)


@pytest.mark.parametrize("direction", [1, -1])
def test_weno_z_smooth_accuracy(direction):
    def derivative(u, dx):
        return weno5_upwind_derivative(u, dx, direction, "z")

    assert sine_error(derivative, 128) <= 1e-5
    assert sine_error(derivative, 256) < sine_error(derivative, 128)


def test_weno_rejects_unknown_variant():
    with pytest.raises(UsageError):
        weno5_upwind_derivative(np.ones(8), 0.125, 1, "eno")


def test_frozen_flux_matches_conservative_scheme_for_constant_matrix():
    nx = 40
    rng = np.random.default_rng(3)
    A0 = np.array([[0.0, 1.0, 0.0], [1 / 3, 0.0, 2 / 3], [0.0, 2 / 5, 0.0]])
    A = np.broadcast_to(A0, (nx, 3, 3))
    m = rng.normal(size=(3, nx))
    alpha = 0.8
    frozen = frozen_flux_derivative(A, m, alpha, 1.0 / nx)
    conservative = lf_split_derivative(A0 @ m, m, alpha, 1.0 / nx)
    np.testing.assert_allclose(frozen, conservative, rtol=1e-12, atol=1e-10)


def test_lf_split_of_linear_advection():
    nx = 128
    x = grid_points(nx)
    u = np.sin(2 * math.pi * x)
    d = lf_split_derivative(0.5 * u, u, 0.5, 1.0 / nx)
    np.testing.assert_allclose(d, 0.5 * 2 * math.pi * np.cos(2 * math.pi * x), atol=1e-5)


def test_ssp_rk3_is_third_order():
    def final_error(dt):
        y = np.array([1.0])
        for _ in range(round(1.0 / dt)):
            y = ssp_rk3_step(lambda u: -u, y, dt)
        return abs(float(y[0]) - math.exp(-1.0))

    ratio = final_error(0.1) / final_error(0.05)
    assert 7.0 < ratio < 9.0


def test_ssp_rk3_exact_for_constant_rhs():
    y = ssp_rk3_step(lambda u: np.full_like(u, 2.0), np.zeros(3), 0.25)
    np.testing.assert_allclose(y, 0.5, atol=1e-15)
