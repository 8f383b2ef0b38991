import math

import numpy as np
import pytest
from scipy import special

from mixedop.grid import build_box, build_disc, build_interval, build_strip
from mixedop.kernel import Field, apply, assemble, interior_matrix, normalization_constant
from mixedop.oracle import (
    MAX_DENSE_NODES,
    QuadratureError,
    dense_matrix,
    dense_reference,
    direct_solve,
    pointwise_fraclap,
)
from mixedop.spectral import lambda1

gauss = lambda y: np.exp(-np.asarray(y, float) ** 2)
gauss2 = lambda p: np.exp(-np.sum(np.asarray(p, float) ** 2, axis=-1))


def test_constant_function_gives_zero():
    r = pointwise_fraclap(lambda y: np.ones_like(np.asarray(y, float)), 0.3, 0.5)
    assert abs(r.value) <= 1e-14


def test_odd_function_gives_zero():
    x0 = 0.7
    u = lambda y: np.sin(3 * (np.asarray(y, float) - x0)) * np.exp(-((np.asarray(y, float) - x0) ** 2))
    assert abs(pointwise_fraclap(u, x0, 0.5).value) <= 1e-12


def test_two_refinement_depths_agree():
    a = pointwise_fraclap(gauss, 0.0, 0.5, tol=1e-13)
    b = pointwise_fraclap(gauss, 0.0, 0.5, tol=1e-10, r_min=2.5e-4)
    assert abs(a.value - b.value) <= 1e-8 * abs(a.value)
    assert a.error_estimate >= 0 and a.truncation_bound <= 1e-12


@pytest.mark.parametrize("s", [0.25, 0.5, 0.75])
def test_gaussian_closed_form_1d(s):
    # integral of (1 - exp(-y^2)) |y|^{-1-2s} over the line equals Gamma(1 - s) / s
    r = pointwise_fraclap(gauss, 0.0, s)
    assert r.value == pytest.approx(special.gamma(1 - s) / s, rel=1e-10)


@pytest.mark.parametrize("s", [0.3, 0.6])
def test_gaussian_closed_form_2d(s):
    r = pointwise_fraclap(gauss2, [0.0, 0.0], s, n_theta=64)
    assert r.value == pytest.approx(math.pi * special.gamma(1 - s) / s, rel=1e-9)


def test_standard_mode_scales_by_constant():
    p = pointwise_fraclap(gauss, 0.4, 0.5)
    q = pointwise_fraclap(gauss, 0.4, 0.5, "standard")
    assert q.value == pytest.approx(normalization_constant(1, 0.5) * p.value, rel=1e-14)


def test_standard_mode_matches_fourier_symbol():
    # with the standard constant, (-Lap)^{1/2} exp(-y^2) at 0 = (1/sqrt(pi)) int |xi| exp(-xi^2/4) dxi / 2 ... = 2/sqrt(pi)
    r = pointwise_fraclap(gauss, 0.0, 0.5, "standard")
    assert r.value == pytest.approx(2 / math.sqrt(math.pi), rel=1e-10)


def test_oracle_errors():
    with pytest.raises(ValueError):
        pointwise_fraclap(gauss, 0.0, 1.0)
    with pytest.raises(ValueError, match="mode"):
        pointwise_fraclap(gauss, 0.0, 0.5, "other")
    blowup = lambda y: np.where(np.asarray(y) > 0.3, np.inf, 0.0)
    with pytest.raises(QuadratureError):
        pointwise_fraclap(blowup, 0.0, 0.5)


def test_jump_is_integrated_exactly():
    # 2u(0) - u(r) - u(-r) is -2 beyond r = 0.3 and 0 inside, so the integral is -2 / 0.3 at s = 1/2
    r = pointwise_fraclap(lambda y: np.sign(np.asarray(y, float) - 0.3), 0.0, 0.5)
    assert r.value == pytest.approx(-2 / 0.3, rel=1e-12)


def test_oracle_is_deterministic_and_cached(tmp_path):
    a = pointwise_fraclap(gauss, 0.25, 0.4, cache_dir=tmp_path, cache_key="gauss")
    assert len(list(tmp_path.glob("*.json"))) == 1
    b = pointwise_fraclap(gauss, 0.25, 0.4, cache_dir=tmp_path, cache_key="gauss")
    c = pointwise_fraclap(gauss, 0.25, 0.4)
    assert a == b and a.value == c.value


def test_dense_matrix_symmetric_small():
    op = assemble(build_interval(0.0, 1.0, 18), 0.5)
    ref = dense_reference(op)
    assert ref.matrix.shape == (16, 16)
    assert np.max(np.abs(ref.matrix - ref.matrix.T)) <= 1e-15 * np.max(np.abs(ref.matrix))
    assert ref.eigenvalues[0] > 0


@pytest.mark.parametrize("grid", [
    build_interval(-1.0, 1.0, 34),
    build_disc(1.0, 17),
    build_box((0.0, 0.0), (1.0, 0.75), 13),
    build_strip(0.5, 1.0, 0.125),
], ids=["interval", "disc", "box", "strip"])
def test_dense_columns_reproduce_apply(grid):
    op = assemble(grid, 0.35)
    a, nodes = dense_matrix(op)
    assert np.array_equal(a, interior_matrix(op)) or np.max(np.abs(a - interior_matrix(op))) <= 1e-12
    for j in range(0, len(nodes), max(1, len(nodes) // 12)):
        e = np.zeros(grid.shape)
        e[tuple(nodes[j])] = 1.0
        col = apply(op, Field(grid, e)).values[grid.interior_mask]
        assert np.max(np.abs(col - a[:, j])) <= 1e-12


def test_dense_eigenvalue_matches_inverse_iteration():
    op = assemble(build_interval(-1.0, 1.0, 42), 0.5)
    assert op.grid.n_interior == 40
    ref = dense_reference(op)
    assert lambda1(op).lambda1 == pytest.approx(ref.lambda_min, rel=1e-9)


def test_dense_refuses_large_grids():
    op = assemble(build_interval(-1.0, 1.0, MAX_DENSE_NODES + 10), 0.5)
    with pytest.raises(ValueError, match="refuses"):
        dense_matrix(op)


def test_direct_solve_linear_problem():
    op = assemble(build_disc(1.0, 15), 0.5)
    n = op.grid.n_interior
    u = direct_solve(op, np.ones(n), shift=0.5)
    a = interior_matrix(op)
    assert np.max(np.abs(a @ u - 0.5 * u - 1.0)) <= 1e-10
