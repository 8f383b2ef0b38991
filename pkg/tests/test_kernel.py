import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from mixedop.grid import build_box, build_disc, build_interval, build_strip
from mixedop.kernel import (
    FarConstants,
    Field,
    ZERO,
    apply,
    assemble,
    bilinear_form,
    dump_operator,
    interior_matrix,
    load_triplets,
    negative_part,
    nonlocal_only,
    normalization_constant,
    positive_part,
    reduce_strip,
    rho_cross_terms,
    rho_energy,
)
from mixedop.oracle import pointwise_fraclap

GRIDS = {
    "interval": lambda: build_interval(-1.0, 1.0, 41),
    "disc": lambda: build_disc(1.0, 21),
    "box": lambda: build_box((-1.0, -0.5), (1.0, 0.5), 17),
    "strip": lambda: build_strip(1.0, 2.0, 0.125),
}


def random_field(grid, rng, scale=1.0):
    return Field.from_interior(grid, scale * rng.normal(size=grid.n_interior))


@pytest.mark.parametrize("name", sorted(GRIDS))
@pytest.mark.parametrize("mode", ["paper", "standard"])
def test_constant_kill(name, mode):
    g = GRIDS[name]()
    op = assemble(g, 0.4, mode)
    one = Field.from_interior(g, np.ones(g.shape), FarConstants(1.0, 1.0, g.t_axis))
    assert np.max(np.abs(apply(op, one).values)) <= 1e-12


@pytest.mark.parametrize("name", sorted(GRIDS))
def test_weight_table_invariants(name):
    op = assemble(GRIDS[name](), 0.3)
    w = op.weights
    assert np.array_equal(w, w[::-1] if w.ndim == 1 else w[::-1, ::-1])
    assert w[op.center] == 0.0
    assert (w >= 0).all()
    assert (op.tail_weight > 0).all()


def test_kernel_strictly_decreasing_along_axes():
    op = assemble(build_interval(-1, 1, 41), 0.6)
    c = op.center[0]
    assert np.all(np.diff(op.weights[c + 1 :]) < 0)
    op2 = assemble(build_box((-1, -1), (1, 1), 15), 0.6)
    cx, cy = op2.center
    assert np.all(np.diff(op2.weights[cx + 1 :, cy]) < 0)
    assert np.all(np.diff(op2.weights[cx, cy + 1 :]) < 0)


def test_odd_field_has_zero_nonlocal_action_at_center():
    g = build_interval(-1.0, 1.0, 201)
    op = nonlocal_only(assemble(g, 0.5))
    u = Field.from_interior(g, g.coords(0))
    lu = apply(op, u).values
    assert abs(lu[np.argmin(abs(g.coords(0)))]) <= 1e-12


def _bump(z):
    out = np.zeros_like(z)
    inside = np.abs(z) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z[inside] ** 2))
    return out


def test_windowed_plane_wave_matches_quadrature():
    c, R = 0.3, 3.0
    u = lambda y: np.sin(4 * np.asarray(y, float)) * _bump((np.asarray(y, float) - c) / R)
    g = build_interval(c - R, c + R, 1201)
    assert g.h == pytest.approx(0.005)
    op = nonlocal_only(assemble(g, 0.5))
    lu = apply(op, Field.from_interior(g, u(g.coords(0)))).values
    i = int(np.argmin(abs(g.coords(0) - c)))
    ref = pointwise_fraclap(u, g.coords(0)[i], 0.5)
    assert abs(lu[i] - ref.value) <= 0.02 * abs(ref.value)


def test_zero_field_maps_to_zero(line_op):
    z = Field(line_op.grid, np.zeros(line_op.grid.shape))
    assert not apply(line_op, z).values.any()


@given(seed=st.integers(0, 2**32 - 1), a=st.floats(-3, 3), b=st.floats(-3, 3))
def test_linearity(seed, a, b):
    rng = np.random.default_rng(seed)
    op = assemble(GRIDS["disc"](), 0.5)
    u, v = random_field(op.grid, rng), random_field(op.grid, rng)
    w = Field.from_interior(op.grid, a * u.values + b * v.values)
    lhs = apply(op, w).values
    rhs = a * apply(op, u).values + b * apply(op, v).values
    assert np.max(np.abs(lhs - rhs)) <= 1e-12 * max(1.0, np.max(np.abs(lhs)))


def test_linearity_sum(line_op, rng):
    u, v = random_field(line_op.grid, rng), random_field(line_op.grid, rng)
    s = Field(line_op.grid, u.values + v.values)
    d = apply(line_op, s).values - apply(line_op, u).values - apply(line_op, v).values
    assert np.max(np.abs(d)) <= 1e-12


def test_normalization_modes_differ_by_constant(rng):
    g = build_disc(1.0, 15)
    for s in (0.25, 0.7):
        p, st_ = assemble(g, s, "paper"), assemble(g, s, "standard")
        u = random_field(g, rng)
        local = apply(p, u).values - apply(nonlocal_only(p), u).values
        expect = local + normalization_constant(2, s) * apply(nonlocal_only(p), u).values
        assert np.max(np.abs(apply(st_, u).values - expect)) <= 1e-12 * max(1, np.max(np.abs(expect)))


def test_normalization_constant_known_value():
    # C(1, 1/2) = 1 / pi
    assert normalization_constant(1, 0.5) == pytest.approx(1 / math.pi, rel=1e-14)


def test_assemble_errors():
    g = build_interval(-1, 1, 11)
    with pytest.raises(ValueError, match="s must lie"):
        assemble(g, 1.5)
    with pytest.raises(ValueError, match="mode"):
        assemble(g, 0.5, "weird")


def test_apply_grid_mismatch(line_op):
    other = build_interval(-1, 1, 43)
    with pytest.raises(ValueError, match="different grid"):
        apply(line_op, Field(other, np.zeros(other.shape)))


def test_field_validation():
    g = build_interval(-1, 1, 11)
    with pytest.raises(ValueError, match="exact zeros"):
        Field(g, np.ones(g.shape))
    with pytest.raises(ValueError, match="finite"):
        Field.from_interior(g, np.full(g.shape, np.nan))
    with pytest.raises(ValueError, match="far-field"):
        Field(g, np.zeros(g.shape), FarConstants(-1.0, 1.0, 0))


@pytest.mark.parametrize("name", ["interval", "disc", "box", "strip"])
def test_bilinear_form_matches_operator(name, rng):
    op = assemble(GRIDS[name](), 0.5)
    vol = op.grid.h ** op.grid.dim
    for _ in range(5):
        u, v = random_field(op.grid, rng), random_field(op.grid, rng)
        b = bilinear_form(op, u, v)
        dot = vol * float(np.sum(v.values * apply(op, u).values))
        assert abs(b - dot) <= 1e-10 * max(1.0, abs(b))
        assert abs(b - bilinear_form(op, v, u)) <= 1e-12 * max(1.0, abs(b))


def test_bilinear_form_expanded_route_agrees(rng):
    # large enough to switch to the expanded-sum evaluation
    g = build_disc(1.0, 71)
    op = assemble(g, 0.5)
    u, v = random_field(g, rng), random_field(g, rng)
    vol = g.h**2
    dot = vol * float(np.sum(v.values * apply(op, u).values))
    assert bilinear_form(op, u, v) == pytest.approx(dot, rel=1e-10)


def test_bilinear_form_nonnegative_and_coercive(line_op, rng):
    grad_only = assemble(line_op.grid, 0.5)
    a_local = interior_matrix(grad_only, part="local")
    vol = line_op.grid.h
    for _ in range(1000):
        u = random_field(line_op.grid, rng, scale=rng.uniform(0.1, 10))
        b = bilinear_form(line_op, u, u)
        g = vol * float(u.interior @ a_local @ u.interior)
        assert b >= g - 1e-10 * abs(b)
        assert g >= 0


def test_bilinear_form_rejects_far_fields(line_op):
    g = line_op.grid
    u = Field.from_interior(g, np.zeros(g.n_interior), FarConstants(-1.0, 1.0, 0))
    with pytest.raises(ValueError, match="zero-exterior"):
        bilinear_form(line_op, u, u)


def test_parts_examples():
    g = build_interval(0.0, 3.0, 4)
    u = Field.from_interior(g, np.array([-1.0, 2.0]))
    assert positive_part(u).interior.tolist() == [0.0, 2.0]
    assert negative_part(u).interior.tolist() == [1.0, 0.0]


@given(arrays(np.float64, 39, elements=st.floats(-1e3, 1e3)))
def test_parts_decomposition(vals):
    g = build_interval(-1, 1, 41)
    u = Field.from_interior(g, vals)
    p, n = positive_part(u), negative_part(u)
    assert np.array_equal(p.values - n.values, u.values)
    assert not np.any(p.values * n.values)
    assert p.exterior == ZERO


def test_rho_constant_field_is_zero(disc_op):
    g = disc_op.grid
    u = Field.from_interior(g, np.full(g.n_interior, 3.7))
    e = rho_energy(disc_op, u, g.interior_mask)
    assert e.total == 0.0 and e.gradient_part == 0.0


def test_rho_breakdown_total(disc_op, rng):
    u = random_field(disc_op.grid, rng)
    e = rho_energy(disc_op, u, disc_op.grid.interior_mask)
    assert e.total == e.gradient_part + e.seminorm_part
    assert e.gradient_part >= 0 and e.seminorm_part >= 0


def test_rho_empty_subdomain(disc_op):
    with pytest.raises(ValueError, match="empty"):
        rho_energy(disc_op, Field(disc_op.grid, np.zeros(disc_op.grid.shape)), np.zeros(disc_op.grid.shape, bool))


@pytest.mark.parametrize("grid_name", ["interval", "disc", "strip"])
def test_rho_parts_identity(grid_name, rng):
    op = assemble(GRIDS[grid_name](), 0.5)
    g = op.grid
    for _ in range(10):
        sub = g.interior_mask & (rng.uniform(size=g.shape) < 0.7)
        if not sub.any():
            continue
        u = random_field(g, rng)
        whole = rho_energy(op, u, sub).total
        parts = rho_energy(op, positive_part(u), sub).total + rho_energy(op, negative_part(u), sub).total
        assert abs(whole - parts - rho_cross_terms(op, u, sub)) <= 1e-10 * max(1.0, whole)
        # the seminorm part on its own obeys the double-sum identity with both orderings
        idx = np.argwhere(sub)
        w = op.weights[tuple((idx[None, :, :] - idx[:, None, :] + np.array(op.center)).transpose(2, 0, 1))]
        a, b = np.maximum(u.values[sub], 0), np.maximum(-u.values[sub], 0)
        cross = 2 * np.sum(w * (a[:, None] * b[None, :] + a[None, :] * b[:, None]))
        semi = [rho_energy(op, f, sub).seminorm_part for f in (u, positive_part(u), negative_part(u))]
        assert abs(semi[0] - semi[1] - semi[2] - g.h**g.dim * cross) <= 1e-10 * max(1.0, semi[0])


def test_dump_roundtrip(tmp_path, line_op):
    csv_path, json_path = dump_operator(line_op, tmp_path / "op")
    header, a = load_triplets(tmp_path / "op")
    ref = interior_matrix(line_op)
    assert header["s"] == 0.5 and header["grid"]["descriptor"]["kind"] == "interval"
    assert np.max(np.abs(a - ref) / np.maximum(np.abs(ref), 1e-300)) <= 1e-15


def test_strip_reduction_acts_like_strip_on_y_constant_profiles():
    g = build_strip(1.0, 3.0, 0.125)
    op = assemble(g, 0.5)
    red = reduce_strip(op)
    t = red.grid.coords(0)
    rule = FarConstants(-1.0, 1.0, 0)
    prof = Field.from_interior(red.grid, np.tanh(t), rule)
    full = Field.from_interior(g, np.broadcast_to(np.tanh(t), g.shape), FarConstants(-1.0, 1.0, 1))
    a = apply(op, full).values
    b = apply(red, prof).values
    assert np.max(np.abs(a - b[None, :])) <= 1e-12
    assert np.max(np.ptp(a, axis=0)) <= 1e-12
