import numpy as np
import pytest
from hypothesis import given, strategies as st

from mixedop.grid import build_disc, build_interval, build_strip
from mixedop.kernel import FarConstants, Field, assemble, interior_matrix
from mixedop.oracle import direct_solve
from mixedop.semilinear import (
    Nonlinearity,
    SolverError,
    SolverParams,
    affine,
    allen_cahn,
    constant_one,
    jacobian,
    layer_guess,
    logistic,
    preset,
    residual,
    solve_dirichlet,
    solve_gibbons,
)
from mixedop.spectral import lambda1


def test_presets_and_admissibility():
    assert allen_cahn().gibbons_admissible
    assert not logistic().gibbons_admissible
    assert not constant_one().gibbons_admissible
    assert not affine(1.0, 0.5).gibbons_admissible
    assert affine(1.0, -0.5).gibbons_admissible
    assert preset("affine", a=2.0, b=0.0).f(np.array([3.0]))[0] == 2.0
    with pytest.raises(KeyError):
        preset("cubic")


def test_lipschitz_metadata():
    f = affine(1.0, 0.5)
    assert f.lipschitz[2] == 0.5
    assert allen_cahn().lipschitz_on(-1, 1) == pytest.approx(2.0)


def test_residual_of_zero_problem(line_op):
    zero = Nonlinearity("zero", lambda u: 0 * np.asarray(u), lambda u: 0 * np.asarray(u))
    u = Field(line_op.grid, np.zeros(line_op.grid.shape))
    assert not residual(line_op, zero, u).values.any()


def test_residual_of_eigenpair(line_op):
    res = lambda1(line_op)
    lam = res.lambda1
    f = Nonlinearity("linear", lambda u: lam * np.asarray(u), lambda u: lam + 0 * np.asarray(u))
    r = residual(line_op, f, res.eigenfield)
    assert np.max(np.abs(r.values)) * np.sqrt(line_op.grid.h * line_op.grid.n_interior) <= 10 * res.residual_norm + 1e-10


def test_torsion_converges_in_one_step():
    op = assemble(build_interval(-1, 1, 201), 0.5)
    u, rep = solve_dirichlet(op, constant_one())
    assert rep.converged and rep.iterations == 1 and rep.positive
    assert rep.final_residual_sup <= 1e-10
    ref = np.linalg.solve(interior_matrix(op), np.ones(op.grid.n_interior))
    assert np.max(np.abs(u.interior - ref)) <= 1e-10
    assert np.max(np.abs(residual(op, constant_one(), u).values)) <= 1e-10


def test_affine_disc_matches_shifted_solve():
    op = assemble(build_disc(1.0, 25), 0.5)
    u, rep = solve_dirichlet(op, affine(1.0, 0.5))
    assert rep.converged and rep.positive
    ref = direct_solve(op, np.ones(op.grid.n_interior), shift=0.5)
    assert np.max(np.abs(u.interior - ref)) <= 1e-10


@given(a=st.floats(-2.0, 2.0), frac=st.floats(-1.0, 0.9))
def test_affine_solve_matches_direct_solve(a, frac):
    op = assemble(build_interval(-1.0, 1.0, 31), 0.5)
    b = frac * 6.2  # lambda1 of this grid is about 6.27
    u, rep = solve_dirichlet(op, affine(a, b))
    ref = direct_solve(op, np.full(op.grid.n_interior, a), shift=b)
    assert rep.converged
    assert np.max(np.abs(u.interior - ref)) <= 1e-9 * max(1.0, np.max(np.abs(ref)))
    if a > 1e-6:  # smaller sources already meet the residual tolerance at u = 0
        assert rep.positive


def test_positivity_reported_false():
    op = assemble(build_interval(-0.1, 0.1, 41), 0.5)
    g = Nonlinearity("shifted_square", lambda u: np.asarray(u) ** 2 - 10, lambda u: 2 * np.asarray(u))
    u, rep = solve_dirichlet(op, g)
    assert rep.converged and rep.positive is False
    assert u.interior.min() < 0


def test_unique_solution_for_linear_source(rng):
    op = assemble(build_interval(-1, 1, 81), 0.5)
    f = affine(2.0, 0.3 * lambda1(op).lambda1)
    sols = []
    for _ in range(2):
        u0 = Field.from_interior(op.grid, rng.normal(size=op.grid.n_interior) * 5)
        u, rep = solve_dirichlet(op, f, u0)
        assert rep.converged and rep.iterations == 1
        sols.append(u.interior)
    assert np.max(np.abs(sols[0] - sols[1])) <= 1e-9


def test_report_history_strictly_decreasing():
    op = assemble(build_interval(-1, 1, 81), 0.5)
    f = Nonlinearity("cubic", lambda u: 1 + 2 * np.asarray(u) - np.asarray(u) ** 3,
                     lambda u: 2 - 3 * np.asarray(u) ** 2)
    u0 = Field.from_interior(op.grid, np.full(op.grid.n_interior, 3.0))
    u, rep = solve_dirichlet(op, f, u0)
    h = rep.residual_history
    assert all(b < a for a, b in zip(h, h[1:]))
    assert rep.final_residual_sup <= 1e-10


@pytest.mark.parametrize("f", [allen_cahn(), logistic(2.0), affine(1.0, 0.5)], ids=lambda f: f.name)
def test_newton_quadratic_tail(f):
    op = assemble(build_interval(-1, 1, 81), 0.5)
    u0 = Field.from_interior(op.grid, 0.5 * np.cos(np.pi * op.grid.coords(0)[op.grid.interior_mask] / 2))
    if f.name == "allen_cahn":
        f = Nonlinearity("ac_source", lambda u: 3 + allen_cahn().f(u), allen_cahn().fprime)
    u, rep = solve_dirichlet(op, f, u0)
    h = rep.residual_history
    for a, b in zip(h, h[1:]):
        if a < 1e-4 and b > 0:
            # 1e-11 is the rounding level of the residual sup-norm on this grid
            assert b <= max(1e-4 * a, 1e-11)


def test_jacobian_consistency(line_op, rng):
    f = allen_cahn()
    eps = 1e-6
    for _ in range(20):
        u = Field.from_interior(line_op.grid, rng.uniform(-1.5, 1.5, line_op.grid.n_interior))
        v = rng.normal(size=line_op.grid.n_interior)
        fd = (residual(line_op, f, u.with_interior(u.interior + eps * v)).interior - residual(line_op, f, u).interior) / eps
        jv = jacobian(line_op, f, u) @ v
        assert np.linalg.norm(fd - jv) <= 1e-4 * np.linalg.norm(jv)


def test_singular_jacobian_reported():
    op = assemble(build_interval(-1, 1, 41), 0.5)
    lam = lambda1(op).lambda1
    # f'(u) = lambda1 everywhere makes A - diag(f') singular up to rounding only if exact; use a huge resonant shift instead
    f = Nonlinearity("resonant", lambda u: lam * np.asarray(u) + 1.0, lambda u: lam + 0 * np.asarray(u))
    try:
        solve_dirichlet(op, f)
    except SolverError as exc:
        assert exc.field is not None and exc.report is not None


def test_max_iterations_reported():
    op = assemble(build_interval(-1, 1, 41), 0.5)
    f = Nonlinearity("ac_source", lambda u: 3 + allen_cahn().f(u), allen_cahn().fprime)
    with pytest.raises(SolverError) as info:
        solve_dirichlet(op, f, params=SolverParams(max_iter=1))
    assert not info.value.report.converged
    assert info.value.field.grid is op.grid


def test_dirichlet_rejects_far_field_guess(line_op):
    g = line_op.grid
    with pytest.raises(ValueError, match="zero exterior"):
        solve_dirichlet(line_op, constant_one(), Field.from_interior(g, np.zeros(g.n_interior), FarConstants(-1, 1, 0)))


@pytest.fixture(scope="module")
def layer_1d():
    op = assemble(build_interval(-20.0, 20.0, 801), 0.5)
    u, rep = solve_gibbons(op, allen_cahn(), layer_guess(op.grid))
    return op, u, rep


def test_layer_profile_odd_and_increasing(layer_1d):
    op, u, rep = layer_1d
    v = u.interior
    assert rep.converged
    assert np.max(np.abs(v + v[::-1])) <= 1e-6
    assert np.all(np.diff(v) > 0)
    assert rep.truncation_sensitivity is not None and rep.truncation_sensitivity > 0


def test_layer_rejects_bad_inputs():
    op = assemble(build_interval(-20.0, 20.0, 201), 0.5)
    with pytest.raises(ValueError, match="violates"):
        solve_gibbons(op, logistic(), layer_guess(op.grid))
    with pytest.raises(ValueError, match="far constants"):
        solve_gibbons(op, allen_cahn(), Field(op.grid, np.zeros(op.grid.shape)))
    short = assemble(build_interval(-5.0, 5.0, 101), 0.5)
    with pytest.raises(ValueError, match="half-length"):
        solve_gibbons(short, allen_cahn(), layer_guess(short.grid))
    skew = assemble(build_interval(-20.0, 10.0, 301), 0.5)
    with pytest.raises(ValueError, match="symmetric interval"):
        solve_gibbons(skew, allen_cahn(), layer_guess(skew.grid))


def test_strip_solver_matches_dense_newton():
    # small strip: the preconditioned Krylov route and the dense route give the same field
    op = assemble(build_strip(0.5, 10.0, 0.25), 0.5)
    u0 = layer_guess(op.grid, 0.3)
    u, rep = solve_gibbons(op, allen_cahn(), u0, sensitivity=False)
    from mixedop import semilinear

    dense = semilinear._DenseSolver(op)
    v, _ = semilinear._newton(op, allen_cahn(), u0, SolverParams(), dense)
    assert np.max(np.abs(u.values - v.values)) <= 1e-10


def test_layer_guess_perturbation_size():
    from mixedop.symmetry import onedim_variation

    g = build_strip(2.0, 20.0, 0.1)
    assert onedim_variation(layer_guess(g, 0.3)) >= 0.3
    assert onedim_variation(layer_guess(g)) == 0.0
