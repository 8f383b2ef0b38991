"""Reflection-based diagnostics: moving planes, symmetry metrics and a discrete maximum principle."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, ndimage

from .grid import Disc, Grid, Strip, is_reflection_symmetric, reflect
from .kernel import Field, MixedOperator, Zero, apply, interior_matrix
from .semilinear import Nonlinearity
from .spectral import lambda1

ANTISYMMETRY_TOL = 1e-12
SUPERSOLUTION_SLACK = 1e-10
VERDICT_SLACK = 1e-10


# --------------------------------------------------------------------------- moving planes


@dataclass(frozen=True, eq=False)
class MovingPlaneSnapshot:
    lam: float
    w_lambda: Field
    sup_violation: float
    c_field: Field | None


def _require_zero_rule(u: Field):
    if not isinstance(u.exterior, Zero):
        raise ValueError("field must use the zero exterior rule")


def difference_quotient(f: Nonlinearity, u: np.ndarray, u_ref: np.ndarray) -> np.ndarray:
    """(f(u_ref) - f(u)) / (u_ref - u), set to 0 where the two agree."""
    d = u_ref - u
    same = d == 0.0
    num = np.asarray(f.f(u_ref), dtype=float) - np.asarray(f.f(u), dtype=float)
    return np.where(same, 0.0, num / np.where(same, 1.0, d))


def snapshot(u: Field, axis: int, lam: float, f: Nonlinearity | None = None) -> MovingPlaneSnapshot:
    """Compare u with its reflection about {x_axis = lam}; Sigma is the side x_axis < lam."""
    _require_zero_rule(u)
    grid = u.grid
    q = reflect(grid, axis, lam)
    u_lam = q.reflected(u.values, fill=0.0)
    d = u.values - u_lam
    x = grid.mesh()[axis]
    sigma = x < lam - 1e-12 * grid.h
    w = np.where(sigma, np.maximum(d, 0.0), np.minimum(d, 0.0))
    w = np.where(grid.interior_mask, w, 0.0)
    inside = sigma & grid.interior_mask
    sup_v = float(np.max(np.maximum(d[inside], 0.0))) if inside.any() else 0.0
    c = None
    if f is not None:
        cv = difference_quotient(f, u.values, u_lam)
        c = Field(grid, np.where(grid.interior_mask, cv, 0.0))
    return MovingPlaneSnapshot(float(lam), Field(grid, w), sup_v, c)


def plane_positions(grid: Grid, axis: int) -> np.ndarray:
    """Node and midpoint positions from the last exterior node on the left up to 0."""
    x = grid.mesh()[axis][grid.interior_mask]
    left = float(x.min()) - grid.h
    k = int(round(-left / (0.5 * grid.h)))
    return -0.5 * grid.h * np.arange(k, -1, -1) + 0.0


def moving_plane_scan(u: Field, axis: int, f: Nonlinearity | None = None) -> list[MovingPlaneSnapshot]:
    _require_zero_rule(u)
    if not is_reflection_symmetric(u.grid, axis, 0.0):
        raise ValueError("domain not reflection-symmetric")
    return [snapshot(u, axis, lam, f) for lam in plane_positions(u.grid, axis)]


# --------------------------------------------------------------------------- metrics


def plane_symmetry_metric(u: Field, axis: int) -> float:
    q = reflect(u.grid, axis, 0.0)
    ok = q.paired
    diff = np.abs(u.values - q.reflected(u.values))
    return float(np.max(diff[ok])) if ok.any() else 0.0


def monotonicity_check(u: Field, axis: int) -> float:
    """Largest decrease of u between consecutive nodes along ``axis`` within the domain's left half."""
    grid = u.grid
    m = grid.interior_mask
    x = grid.mesh()[axis]
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[axis], hi[axis] = slice(0, -1), slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    ok = m[lo] & m[hi] & (x[lo] < 0) & (x[hi] <= 1e-12 * grid.h)
    diffs = (u.values[hi] - u.values[lo])[ok]
    return float(max(0.0, -diffs.min())) if diffs.size else 0.0


def onedim_variation(u: Field, t_axis: int | None = None) -> float:
    """max over t-slices of the spread of u across the remaining axis."""
    grid = u.grid
    if grid.dim == 1:
        return 0.0
    t_axis = grid.t_axis if t_axis is None else t_axis
    m = np.moveaxis(grid.interior_mask, t_axis, 0)
    vals = np.moveaxis(u.values, t_axis, 0)
    spread = [np.ptp(vals[k][m[k]]) for k in range(m.shape[0]) if m[k].any()]
    return float(max(spread)) if spread else 0.0


def radial_asymmetry(u: Field) -> float:
    """Largest spread of u over interior nodes at equal distance from the disc center.

    Informational only: lattice nodes at equal radius are not related by a symmetry of the grid
    unless they are mirror images, so this does not vanish for discrete solutions.
    """
    grid = u.grid
    if not isinstance(grid.descriptor, Disc):
        raise ValueError("radial asymmetry is defined on disc grids")
    c = np.array(grid.descriptor.center)
    m = grid.interior_mask
    half = [np.rint(2 * (grid.coords(a) - c[a]) / grid.h).astype(np.int64) for a in range(2)]
    r2 = (half[0][:, None] ** 2 + half[1][None, :] ** 2)[m]
    vals = u.values[m]
    order = np.argsort(r2, kind="stable")
    r2, vals = r2[order], vals[order]
    starts = np.flatnonzero(np.r_[True, np.diff(r2) != 0])
    spread = np.maximum.reduceat(vals, starts) - np.minimum.reduceat(vals, starts)
    return float(spread.max())


@dataclass
class SymmetryReport:
    radial_asymmetry: float | None
    plane_asymmetry: dict[int, float]
    monotonicity_violation: float
    onedim_variation: float
    max_sup_violation: float | None
    tolerances: dict[str, float]
    verdicts: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())

    def to_dict(self) -> dict:
        return {
            "radial_asymmetry": self.radial_asymmetry,
            "plane_asymmetry": {str(k): v for k, v in self.plane_asymmetry.items()},
            "monotonicity_violation": self.monotonicity_violation,
            "onedim_variation": self.onedim_variation,
            "max_sup_violation": self.max_sup_violation,
            "tolerances": dict(self.tolerances),
            "verdicts": dict(self.verdicts),
        }


def symmetry_report(u: Field, f: Nonlinearity | None = None, *, plane_tol: float = 1e-8,
                    monotone_tol: float = 1e-12, onedim_tol: float = 1e-6, scan: bool = True) -> SymmetryReport:
    """Metrics for symmetric-domain solutions (interval, disc, box) or strip layer solutions."""
    grid = u.grid
    tols = {"plane": plane_tol, "monotonicity": monotone_tol, "onedim": onedim_tol, "sup_violation": plane_tol}
    if isinstance(grid.descriptor, Strip):
        var = onedim_variation(u)
        rep = SymmetryReport(None, {}, 0.0, var, None, tols)
        rep.verdicts["onedim"] = var <= onedim_tol
        return rep
    axes = range(grid.dim)
    planes = {a: plane_symmetry_metric(u, a) for a in axes}
    mono = max(monotonicity_check(u, a) for a in axes)
    radial = radial_asymmetry(u) if isinstance(grid.descriptor, Disc) else None
    sup_v = None
    if scan:
        sup_v = max(s.sup_violation for a in axes for s in moving_plane_scan(u, a, f))
    rep = SymmetryReport(radial, planes, mono, 0.0, sup_v, tols)
    rep.verdicts["plane"] = max(planes.values()) <= plane_tol
    rep.verdicts["monotonicity"] = mono <= monotone_tol
    if sup_v is not None:
        rep.verdicts["sup_violation"] = sup_v <= plane_tol
    return rep


# --------------------------------------------------------------------------- maximum principle


@dataclass
class MPVerdict:
    nonnegative: bool
    min_on_halfspace: float
    hypothesis_holds: bool
    c_plus_sup: float
    lambda1_u: float
    supersolution_ok: bool
    supersolution_slack: float
    exterior_ok: bool
    nontrivial: bool
    strong_mp_minima: list[float]

    @property
    def strong_mp_positive(self) -> bool:
        return all(m > 0 for m in self.strong_mp_minima)


def _halfspace(grid: Grid, axis: int, lam: float) -> np.ndarray:
    return grid.mesh()[axis] < lam - 1e-12 * grid.h


def nested_submasks(mask: np.ndarray, depth: int = 3) -> list[np.ndarray]:
    """Successive erosions of ``mask``; each level stays a positive distance inside the previous one."""
    out = []
    cur = mask
    for _ in range(depth):
        cur = ndimage.binary_erosion(cur, structure=np.ones((3,) * mask.ndim, dtype=bool))
        if not cur.any():
            break
        out.append(cur)
    return out


def antisymmetric_mp_check(op: MixedOperator, u_mask: np.ndarray, axis: int, lam: float,
                           c: Field, v: Field) -> MPVerdict:
    """Check the hypotheses and conclusion of the small-domain maximum principle for antisymmetric v.

    H is the half-space {x_axis < lam}; U must lie in H and in the interior.
    """
    grid = op.grid
    _require_zero_rule(v)
    u_mask = np.asarray(u_mask, dtype=bool)
    h_mask = _halfspace(grid, axis, lam)
    if not u_mask.any():
        raise ValueError("empty subdomain")
    if np.any(u_mask & ~(h_mask & grid.interior_mask)):
        raise ValueError("U must be a subset of the half-space and of the interior")
    q = reflect(grid, axis, lam)
    scale = max(1.0, float(np.max(np.abs(v.values))))
    vals = v.values
    if np.any(vals[~q.paired] != 0.0) or np.max(np.abs(vals + q.reflected(vals))[q.paired]) > ANTISYMMETRY_TOL * scale:
        raise ValueError("v is not antisymmetric under the reflection")
    exterior_ok = bool(np.all(vals[h_mask & ~u_mask] >= 0.0))
    lv = apply(op, v).values
    slack = (lv - c.values * vals)[u_mask]
    sup_slack = float(slack.min())
    c_plus = float(np.max(np.maximum(c.values[u_mask], 0.0)))
    lam1 = lambda1(op, u_mask).lambda1
    min_h = float(vals[h_mask].min()) if h_mask.any() else 0.0
    nontrivial = bool(np.any(vals[h_mask] != 0.0))
    strong = [float(vals[k].min()) for k in nested_submasks(u_mask)] if nontrivial else []
    return MPVerdict(
        nonnegative=min_h >= -VERDICT_SLACK,
        min_on_halfspace=min_h,
        hypothesis_holds=c_plus < lam1,
        c_plus_sup=c_plus,
        lambda1_u=lam1,
        supersolution_ok=sup_slack >= -SUPERSOLUTION_SLACK,
        supersolution_slack=sup_slack,
        exterior_ok=exterior_ok,
        nontrivial=nontrivial,
        strong_mp_minima=strong,
    )


def antisymmetric_instance(op: MixedOperator, u_mask: np.ndarray, axis: int, lam: float,
                           c_ratio: float, rng: np.random.Generator) -> tuple[Field, Field]:
    """Construct (c, v) with v = w - w o Q, w supported in U, and L v = c v + g on U for some g >= 0.

    c takes values in [-c_ratio * lambda1(U), c_ratio * lambda1(U)] with the upper end attained.
    """
    grid = op.grid
    u_mask = np.asarray(u_mask, dtype=bool)
    q = reflect(grid, axis, lam)
    if np.any(u_mask & ~q.paired):
        raise ValueError("reflection of U leaves the grid")
    lam1 = lambda1(op, u_mask).lambda1
    n = int(u_mask.sum())
    cu = c_ratio * lam1 * rng.uniform(-1.0, 1.0, n)
    cu[rng.integers(n)] = c_ratio * lam1
    g = rng.uniform(0.0, 1.0, n)
    # columns of the reflected block: L applied to -e_{Qj} for j in U
    refl_mask = q.reflected(u_mask.astype(float)) > 0.5
    both = u_mask | refl_mask
    a_full = interior_matrix(op, both & grid.interior_mask)
    nodes = np.flatnonzero((both & grid.interior_mask).reshape(-1))
    pos = {k: i for i, k in enumerate(nodes)}
    u_idx = np.flatnonzero(u_mask.reshape(-1))
    rows = np.array([pos[k] for k in u_idx])
    mirror = np.array([pos[int(q.pairing.reshape(-1)[k])] for k in u_idx])
    block = a_full[np.ix_(rows, rows)] - a_full[np.ix_(rows, mirror)] - np.diag(cu)
    w = linalg.solve(block, g)
    wf = np.zeros(grid.shape)
    wf[u_mask] = w
    v = wf - q.reflected(wf)
    cf = np.zeros(grid.shape)
    cf[u_mask] = cu
    return Field(grid, cf), Field(grid, v)


# --------------------------------------------------------------------------- commutation


def central_difference(grid: Grid, v: np.ndarray, axis: int) -> np.ndarray:
    if grid.periodic[axis]:
        return (np.roll(v, -1, axis=axis) - np.roll(v, 1, axis=axis)) / (2 * grid.h)
    pad = [(0, 0)] * grid.dim
    pad[axis] = (1, 1)
    p = np.pad(v, pad)
    lo = [slice(None)] * grid.dim
    hi = [slice(None)] * grid.dim
    lo[axis], hi[axis] = slice(0, -2), slice(2, None)
    return (p[tuple(hi)] - p[tuple(lo)]) / (2 * grid.h)


def _raw_action(op: MixedOperator, v: np.ndarray) -> np.ndarray:
    from .kernel import _neg_laplacian

    return op.local_scale * _neg_laplacian(op.grid, v) + op.diag * v - op.convolve(v)


def doubly_interior(grid: Grid, axis: int) -> np.ndarray:
    m = grid.interior_mask
    if grid.periodic[axis]:
        return m & np.roll(m, 1, axis=axis) & np.roll(m, -1, axis=axis)
    out = m.copy()
    for sh in (1, -1):
        pad = [(0, 0)] * grid.dim
        pad[axis] = (1, 1)
        p = np.pad(m, pad)
        sl = [slice(None)] * grid.dim
        sl[axis] = slice(1 + sh, 1 + sh + grid.shape[axis])
        out &= p[tuple(sl)]
    return out


def commutation_check(op: MixedOperator, phi: Field, axis: int) -> float:
    """sup over doubly-interior nodes of |L(D phi) - D(L phi)| with the central difference D."""
    _require_zero_rule(phi)
    if not op.grid.same_as(phi.grid):
        raise ValueError("field lives on a different grid")
    grid = op.grid
    left = _raw_action(op, central_difference(grid, phi.values, axis))
    right = central_difference(grid, _raw_action(op, phi.values), axis)
    keep = doubly_interior(grid, axis)
    return float(np.max(np.abs(left - right)[keep])) if keep.any() else 0.0
