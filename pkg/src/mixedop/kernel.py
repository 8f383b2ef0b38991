"""Discrete mixed operator L = -Lap + (-Lap)^s on uniform grids.

The nonlocal part is stored as an offset table ``weights`` so that for every
pair of grid nodes i, j the coupling is ``weights[j - i + center]``.  The
operator acts as

    (L u)_i = (-Lap_h u)_i + diag_i * u_i - sum_j w(j - i) u_j - far_i

where ``diag_i`` collects every off-node interaction (grid cells and the
analytic tail beyond the grid) and ``far_i`` is the tail integral weighted by
the prescribed far-field values (zero for the Dirichlet exterior rule).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
import json
import math
from pathlib import Path

import numpy as np
from scipy import integrate, signal, special

from .grid import Grid, descriptor_dict

MODES = ("paper", "standard")
_DIRECT_CONV_LIMIT = 5e7  # dense Toeplitz product cost cap, in multiply-adds; FFT above it
_PAIR_MATRIX_LIMIT = 4500  # nodes; above this the forms switch to the expanded sums
_STRIP_EXTRA_OFFSETS = 16  # explicit line sums past the strip ends before the zeta remainder


# --------------------------------------------------------------------------- fields


@dataclass(frozen=True)
class Zero:
    kind: str = field(default="zero", init=False)


@dataclass(frozen=True)
class FarConstants:
    minus: float
    plus: float
    axis: int
    kind: str = field(default="far_constants", init=False)


ExteriorRule = Zero | FarConstants
ZERO = Zero()


def far_values(grid: Grid, rule: FarConstants) -> np.ndarray:
    """Far-field value at every node, chosen by the sign of the node's coordinate on ``rule.axis``."""
    t = grid.mesh()[rule.axis]
    return np.where(t < 0, rule.minus, np.where(t > 0, rule.plus, 0.5 * (rule.minus + rule.plus)))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    exterior: ExteriorRule = ZERO

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"field shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        outside = ~self.grid.interior_mask
        if isinstance(self.exterior, Zero):
            if np.any(v[outside] != 0.0):
                raise ValueError("zero exterior rule requires exact zeros off the interior")
        else:
            expected = far_values(self.grid, self.exterior)
            if np.any(v[outside] != expected[outside]):
                raise ValueError("far-field exterior values do not match the rule")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_interior(cls, grid: Grid, values, exterior: ExteriorRule = ZERO) -> "Field":
        """Build a field from values on the whole grid (or a flat interior vector); exterior is overwritten."""
        values = np.asarray(values, dtype=float)
        full = np.zeros(grid.shape) if isinstance(exterior, Zero) else far_values(grid, exterior)
        if values.shape == grid.shape:
            full[grid.interior_mask] = values[grid.interior_mask]
        elif values.shape == (grid.n_interior,):
            full[grid.interior_mask] = values
        else:
            raise ValueError("values must have the grid shape or one entry per interior node")
        return cls(grid, full, exterior)

    @property
    def interior(self) -> np.ndarray:
        return self.values[self.grid.interior_mask]

    def with_interior(self, values) -> "Field":
        return Field.from_interior(self.grid, values, self.exterior)


def positive_part(u: Field) -> Field:
    return Field(u.grid, np.maximum(u.values, 0.0), _part_rule(u))


def negative_part(u: Field) -> Field:
    return Field(u.grid, np.maximum(-u.values, 0.0), _part_rule(u))


def _part_rule(u: Field) -> ExteriorRule:
    if isinstance(u.exterior, Zero):
        return ZERO
    r = u.exterior
    return FarConstants(max(r.minus, 0.0), max(r.plus, 0.0), r.axis)


# --------------------------------------------------------------------------- weights


def normalization_constant(dim: int, s: float) -> float:
    """C(N, s) making the singular integral agree with the Fourier symbol |xi|^{2s}."""
    return 4.0**s * special.gamma(dim / 2 + s) / (math.pi ** (dim / 2) * abs(special.gamma(-s)))


def strip_reduction_factor(s: float) -> float:
    """Integral over y in R of (tau^2 + y^2)^(-1-s), divided by tau^(-1-2s)."""
    return math.sqrt(math.pi) * special.gamma(s + 0.5) / special.gamma(1.0 + s)


def _fold_weight(dim: int, h: float, s: float) -> float:
    """Nearest-neighbour weight that absorbs the self-cell second-order Taylor term."""
    if dim == 1:
        moment = 2.0 * (h / 2) ** (2 - 2 * s) / (2 - 2 * s)
    else:
        moment = 0.5 * h ** (2 - 2 * s) * _unit_square_moment(s)
    return moment / (2.0 * h * h)


@lru_cache(maxsize=64)
def _unit_square_moment(s: float) -> float:
    # integral of |z|^{-2s} over [-1/2, 1/2]^2, in polar coordinates
    val, _ = integrate.quad(
        lambda th: (0.5 / math.cos(th)) ** (2 - 2 * s) / (2 - 2 * s), 0.0, math.pi / 4,
        epsabs=0.0, epsrel=1e-13,
    )
    return 8.0 * val


@lru_cache(maxsize=64)
def _near_cells(s: float) -> tuple[float, float]:
    """Exact integrals of |z|^{-2-2s} over the unit cells centred at (1,0) and (1,1)."""
    out = []
    for cx, cy in ((1.0, 0.0), (1.0, 1.0)):
        val, _ = integrate.dblquad(
            lambda y, x: (x * x + y * y) ** (-1 - s),
            cx - 0.5, cx + 0.5, cy - 0.5, cy + 0.5,
            epsabs=0.0, epsrel=1e-13,
        )
        out.append(val)
    return out[0], out[1]


def weights_1d(h: float, s: float, offsets: np.ndarray) -> np.ndarray:
    """Exact cell integrals of |z|^{-1-2s} for integer offsets, fold included at +-1."""
    k = np.abs(np.asarray(offsets, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        w = (((k - 0.5) * h) ** (-2 * s) - ((k + 0.5) * h) ** (-2 * s)) / (2 * s)
    w = np.where(k == 0, 0.0, w)
    return w + np.where(k == 1, _fold_weight(1, h, s), 0.0)


def weights_2d(h: float, s: float, kx: np.ndarray, ky: np.ndarray) -> np.ndarray:
    """Cell weights of |z|^{-2-2s}: midpoint rule, exact on the 8 nearest cells, fold on axis neighbours."""
    ax, ay = np.abs(kx), np.abs(ky)
    r2 = (ax * ax + ay * ay).astype(float)
    with np.errstate(divide="ignore"):
        w = h ** (-2 * s) * r2 ** (-1 - s)
    cheb = np.maximum(ax, ay)
    edge, corner = _near_cells(s)
    w = np.where(cheb == 1, np.where((ax == 0) | (ay == 0), edge, corner) * h ** (-2 * s), w)
    w = np.where(cheb == 0, 0.0, w)
    return w + np.where(r2 == 1, _fold_weight(2, h, s), 0.0)


def _hyp_tail(a: np.ndarray, b: np.ndarray, s: float) -> np.ndarray:
    """Integral over y in (a, inf) of (y^2 + b^2)^(-1-s), for a > |b|."""
    z = -(b * b) / (a * a)
    return a ** (-1 - 2 * s) / (1 + 2 * s) * special.hyp2f1(1 + s, 0.5 + s, 1.5 + s, z)


def _periodized_strip_weights(h: float, s: float, ny: int, kt: np.ndarray, n_periods: int = 64) -> np.ndarray:
    """w_per[r, kt] = sum over all integer m of the cell weight at (r + m*ny, kt)."""
    r = np.arange(ny)[:, None]
    kt2 = kt[None, :]
    out = np.zeros((ny, kt.size))
    for m in range(-n_periods, n_periods + 1):
        out += weights_2d(h, s, r + m * ny, np.broadcast_to(kt2, out.shape))
    hi = (n_periods + 1) * ny - 0.5  # first uncovered offset above, minus half a cell
    lo = n_periods * ny + 0.5
    tail = h ** (-2 * s) * (_hyp_tail(np.full(kt.shape, hi), kt.astype(float), s)
                            + _hyp_tail(np.full(kt.shape, lo), kt.astype(float), s))
    return out + tail[None, :] / ny


# --------------------------------------------------------------------------- operator


def _toeplitz_convolve(values: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Same result as the sliced full convolution, summed through BLAS with one Toeplitz block per row offset."""
    if values.ndim == 1:
        n = values.shape[0]
        k = np.arange(n)
        return weights[k[:, None] - k[None, :] + n - 1] @ values
    swap = values.shape[0] > values.shape[1]
    if swap:
        values, weights = values.T, weights.T
    nx, ny = values.shape
    k = np.arange(ny)
    # blocks[a, l, m] = w(nx - 1 - a, m - l): row offset i - j with j = i + a - (nx - 1)
    blocks = weights[::-1, k[None, :] - k[:, None] + ny - 1]
    padded = np.zeros((3 * nx - 2, ny))
    padded[nx - 1 : 2 * nx - 1] = values
    windows = np.lib.stride_tricks.sliding_window_view(padded, 2 * nx - 1, axis=0)
    out = np.tensordot(windows, blocks, axes=([2, 1], [0, 1]))
    return out.T if swap else out


@dataclass(frozen=True, eq=False)
class MixedOperator:
    grid: Grid
    s: float
    mode: str
    weights: np.ndarray  # offset table, centre at index shape-1 on every axis
    diag: np.ndarray  # nonlocal diagonal per node
    tail_minus: np.ndarray  # tail integral over the far region with t < 0
    tail_plus: np.ndarray
    local_scale: float = 1.0  # 0 disables the local part (used for diagnostics)

    @property
    def center(self) -> tuple[int, ...]:
        return tuple(n - 1 for n in self.grid.shape)

    @property
    def tail_weight(self) -> np.ndarray:
        return self.tail_minus + self.tail_plus

    def weight(self, offset) -> float:
        idx = tuple(int(o) + c for o, c in zip(offset, self.center))
        return float(self.weights[idx])

    def convolve(self, values: np.ndarray) -> np.ndarray:
        """sum_j w(j - i) values_j over grid nodes j, for every node i."""
        shape = self.grid.shape
        cost = float(np.prod(shape)) * float(np.prod(self.weights.shape))
        if cost <= _DIRECT_CONV_LIMIT:
            return _toeplitz_convolve(values, self.weights)
        full = signal.fftconvolve(values, self.weights, mode="full")
        sl = tuple(slice(n - 1, 2 * n - 1) for n in shape)
        return full[sl]

    def row_sums(self) -> np.ndarray:
        return self.convolve(np.ones(self.grid.shape))


def assemble(grid: Grid, s: float, mode: str = "paper") -> MixedOperator:
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if mode not in MODES:
        raise ValueError(f"unknown normalization mode {mode!r}")
    if any(n < 3 for n in grid.shape):
        raise ValueError("grid too small for the self-cell correction")
    h = grid.h
    scale = normalization_constant(grid.dim, s) if mode == "standard" else 1.0
    shape = grid.shape

    if grid.dim == 1:
        (m,) = shape
        k = np.arange(-(m - 1), m)
        table = weights_1d(h, s, k)
        # every node sees all of R minus its own cell: the diagonal is the same everywhere
        d = 2 * (h / 2) ** (-2 * s) / (2 * s) + 2 * _fold_weight(1, h, s)
        diag = np.full(shape, d)
        x = grid.coords(0)
        left, right = x[0] - h / 2, x[-1] + h / 2
        t_minus = (x - left) ** (-2 * s) / (2 * s)
        t_plus = (right - x) ** (-2 * s) / (2 * s)
    elif grid.periodic == (True, False):
        ny, mt = shape
        extra = _STRIP_EXTRA_OFFSETS
        kt = np.arange(-(mt - 1), mt + extra)
        per = _periodized_strip_weights(h, s, ny, kt)
        per = 0.5 * (per + per[np.mod(-np.arange(ny), ny)])  # exact y-evenness despite summation order
        ky = np.arange(-(ny - 1), ny)
        table = per[np.mod(ky, ny), : 2 * mt - 1]
        table[ny - 1, mt - 1] = 0.0
        # line sums over one period; beyond the computed range the line sum is kappa k^{-1-2s} h^{-2s}
        # up to terms of order exp(-2 pi k), and the remainder is a Hurwitz zeta value
        line = per[:, mt - 1 :].sum(axis=0)
        line[0] -= per[0, mt - 1]
        k_last = mt - 1 + extra
        far = strip_reduction_factor(s) * h ** (-2 * s) * float(special.zeta(1 + 2 * s, k_last + 1))
        beyond = np.cumsum(line[::-1])[::-1]  # beyond[k] = sum of line[k:]
        i = np.arange(mt)
        t_minus = np.broadcast_to(beyond[i + 1] + far, shape).copy()
        t_plus = np.broadcast_to(beyond[mt - i] + far, shape).copy()
        diag = np.full(shape, line[0] + 2.0 * (beyond[1] + far))
    elif grid.dim == 2 and not any(grid.periodic):
        mx, my = shape
        kx, ky = np.meshgrid(np.arange(-(mx - 1), mx), np.arange(-(my - 1), my), indexing="ij")
        table = weights_2d(h, s, kx, ky)
        # window: lattice disc that contains every on-grid offset; analytic tail beyond it
        rho = math.ceil(math.hypot(mx - 1, my - 1))
        wx, wy = np.meshgrid(np.arange(-rho, rho + 1), np.arange(-rho, rho + 1), indexing="ij")
        inside = wx * wx + wy * wy <= rho * rho
        window_sum = float(np.sum(weights_2d(h, s, wx[inside], wy[inside])))
        r_eff = h * math.sqrt(inside.sum() / math.pi)
        d = window_sum + math.pi * r_eff ** (-2 * s) / s
        diag = np.full(shape, d)
        t_minus = t_plus = None
    else:
        raise ValueError("unsupported grid layout")

    table = table * scale
    op = MixedOperator(grid, float(s), mode, table, np.zeros(shape), np.zeros(shape), np.zeros(shape))
    rows = op.row_sums()
    if diag is None:
        diag = rows + (t_minus + t_plus) * scale
    else:
        diag = diag * scale
    if t_minus is None:
        # box grids: the off-grid region is not split; keep the total tail on both halves
        tail = diag - rows
        t_minus = t_plus = 0.5 * tail
    else:
        t_minus, t_plus = t_minus * scale, t_plus * scale
    for a in (table, diag, t_minus, t_plus):
        a.setflags(write=False)
    return MixedOperator(grid, float(s), mode, table, diag, t_minus, t_plus)


def _far_load(op: MixedOperator, rule: ExteriorRule) -> np.ndarray:
    if isinstance(rule, Zero):
        return np.zeros(op.grid.shape)
    if op.grid.dim == 2 and not op.grid.periodic[0] and rule.minus != rule.plus:
        raise ValueError("split far constants need an interval or strip grid")
    if rule.axis != op.grid.t_axis:
        raise ValueError("far constants must be split along the last axis")
    return op.tail_minus * rule.minus + op.tail_plus * rule.plus


def _neg_laplacian(grid: Grid, v: np.ndarray) -> np.ndarray:
    out = np.zeros_like(v)
    for a in range(grid.dim):
        out += 2.0 * v - np.roll(v, 1, axis=a) - np.roll(v, -1, axis=a)
    return out / (grid.h * grid.h)


def apply(op: MixedOperator, u: Field) -> Field:
    """Evaluate L u at interior nodes; the result is zero elsewhere."""
    if not op.grid.same_as(u.grid):
        raise ValueError("field lives on a different grid")
    v = u.values
    out = op.local_scale * _neg_laplacian(op.grid, v) + op.diag * v - op.convolve(v) - _far_load(op, u.exterior)
    out = np.where(op.grid.interior_mask, out, 0.0)
    return Field(op.grid, out, ZERO)


def with_local_scale(op: MixedOperator, scale: float) -> MixedOperator:
    return MixedOperator(op.grid, op.s, op.mode, op.weights, op.diag, op.tail_minus, op.tail_plus, scale)


def nonlocal_only(op: MixedOperator) -> MixedOperator:
    return with_local_scale(op, 0.0)


def interior_matrix(op: MixedOperator, mask: np.ndarray | None = None, part: str = "full") -> np.ndarray:
    """Dense matrix of L on the nodes of ``mask`` (default: interior), zero exterior on the rest."""
    grid = op.grid
    mask = grid.interior_mask if mask is None else np.asarray(mask, dtype=bool)
    if np.any(mask & ~grid.interior_mask):
        raise ValueError("mask must be a subset of the interior")
    idx = np.argwhere(mask)
    n = len(idx)
    a = np.zeros((n, n))
    if part in ("full", "nonlocal"):
        offs = idx[None, :, :] - idx[:, None, :] + np.array(op.center)
        a -= op.weights[tuple(offs[..., d] for d in range(grid.dim))]
        a[np.diag_indices(n)] = op.diag[mask]
    if part in ("full", "local") and op.local_scale != 0.0:
        flat = -np.ones(grid.shape, dtype=int)
        flat[mask] = np.arange(n)
        inv_h2 = op.local_scale / grid.h**2
        a[np.diag_indices(n)] += 2 * grid.dim * inv_h2
        for d in range(grid.dim):
            for step in (-1, 1):
                nb = idx.copy()
                nb[:, d] += step
                if grid.periodic[d]:
                    nb[:, d] %= grid.shape[d]
                j = flat[tuple(nb.T)]
                ok = j >= 0
                a[np.arange(n)[ok], j[ok]] -= inv_h2
    if part not in ("full", "nonlocal", "local"):
        raise ValueError(f"unknown part {part!r}")
    return a


def _pair_weights(op: MixedOperator, idx: np.ndarray) -> np.ndarray:
    offs = idx[None, :, :] - idx[:, None, :] + np.array(op.center)
    return op.weights[tuple(offs[..., d] for d in range(op.grid.dim))]


def _edge_products(grid: Grid, u: np.ndarray, v: np.ndarray, mask: np.ndarray | None = None) -> float:
    total = 0.0
    for a in range(grid.dim):
        if grid.periodic[a]:
            du = np.roll(u, -1, axis=a) - u
            dv = np.roll(v, -1, axis=a) - v
            ok = np.ones(u.shape, dtype=bool) if mask is None else mask & np.roll(mask, -1, axis=a)
        else:
            du, dv = np.diff(u, axis=a), np.diff(v, axis=a)
            if mask is None:
                ok = np.ones(du.shape, dtype=bool)
            else:
                lo = [slice(None)] * grid.dim
                hi = [slice(None)] * grid.dim
                lo[a], hi[a] = slice(0, -1), slice(1, None)
                ok = mask[tuple(lo)] & mask[tuple(hi)]
        total += float(np.sum((du * dv)[ok]))
    return total / grid.h**2


def bilinear_form(op: MixedOperator, u: Field, v: Field) -> float:
    """Discrete B(u, v): gradient pairing plus the halved double sum of the kernel form and tail terms."""
    for f in (u, v):
        if not isinstance(f.exterior, Zero):
            raise ValueError("the bilinear form is defined for zero-exterior fields only")
        if not op.grid.same_as(f.grid):
            raise ValueError("field lives on a different grid")
    grid = op.grid
    vol = grid.h**grid.dim
    grad = op.local_scale * _edge_products(grid, u.values, v.values)
    uu, vv = u.values.reshape(-1), v.values.reshape(-1)
    if grid.size <= _PAIR_MATRIX_LIMIT:
        w = _pair_weights(op, np.argwhere(np.ones(grid.shape, dtype=bool)))
        du = uu[:, None] - uu[None, :]
        dv = vv[:, None] - vv[None, :]
        pairs = 0.5 * float(np.sum(w * du * dv))
    else:
        rows = op.row_sums().reshape(-1)
        pairs = float(np.sum(rows * uu * vv) - np.sum(uu * op.convolve(v.values).reshape(-1)))
    tail = float(np.sum(op.tail_weight.reshape(-1) * uu * vv))
    return vol * (grad + pairs + tail)


@dataclass(frozen=True)
class EnergyBreakdown:
    gradient_part: float
    seminorm_part: float

    @property
    def total(self) -> float:
        return self.gradient_part + self.seminorm_part


def rho_energy(op: MixedOperator, u: Field, subdomain_mask: np.ndarray) -> EnergyBreakdown:
    """Localized energy on U: gradient over edges inside U plus the U x U Gagliardo double sum."""
    mask = np.asarray(subdomain_mask, dtype=bool)
    if mask.shape != op.grid.shape:
        raise ValueError("subdomain mask must have the grid shape")
    if not mask.any():
        raise ValueError("empty subdomain")
    grid = op.grid
    vol = grid.h**grid.dim
    grad = _edge_products(grid, u.values, u.values, mask)
    idx = np.argwhere(mask)
    vals = u.values[mask]
    w = _pair_weights(op, idx)
    semi = float(np.sum(w * (vals[:, None] - vals[None, :]) ** 2))
    return EnergyBreakdown(vol * grad, vol * semi)


def rho_cross_terms(op: MixedOperator, u: Field, subdomain_mask: np.ndarray) -> float:
    """rho(v) - rho(v+) - rho(v-): the nonnegative interaction between positive and negative parts."""
    mask = np.asarray(subdomain_mask, dtype=bool)
    grid = op.grid
    a = np.maximum(u.values, 0.0)
    b = np.maximum(-u.values, 0.0)
    grad = 0.0
    for ax in range(grid.dim):
        for sh in (1, -1):
            if grid.periodic[ax]:
                ok = mask & np.roll(mask, -sh, axis=ax)
                grad += float(np.sum((a * np.roll(b, -sh, axis=ax))[ok]))
            else:
                lo = [slice(None)] * grid.dim
                hi = [slice(None)] * grid.dim
                lo[ax], hi[ax] = slice(0, -1), slice(1, None)
                i, j = (tuple(lo), tuple(hi)) if sh == 1 else (tuple(hi), tuple(lo))
                ok = mask[i] & mask[j]
                grad += float(np.sum((a[i] * b[j])[ok]))
    idx = np.argwhere(mask)
    w = _pair_weights(op, idx)
    av, bv = a[mask], b[mask]
    semi = float(np.sum(w * (av[:, None] * bv[None, :] + av[None, :] * bv[:, None])))
    vol = grid.h**grid.dim
    return vol * (2.0 * grad / grid.h**2 + 2.0 * semi)


def reduce_strip(op: MixedOperator) -> MixedOperator:
    """1D operator in t whose action on t-only profiles equals the strip operator's action on y-constant fields."""
    grid = op.grid
    if grid.periodic != (True, False):
        raise ValueError("reduction needs a periodic strip grid")
    from .grid import build_interval

    ny, mt = grid.shape
    desc = grid.descriptor
    line = build_interval(-desc.half_length, desc.half_length, mt - 4)
    if line.shape != (mt,) or abs(line.h - grid.h) > 1e-12 * grid.h:
        raise ValueError("strip and line grids disagree")
    # each node sees every y residue exactly once: sum one period of the offset table
    period = op.weights[ny - 1 : 2 * ny - 1]
    table = period.sum(axis=0)
    table[mt - 1] = 0.0
    diag = op.diag[0] - period[:, mt - 1].sum()
    for a in (table, diag):
        a.setflags(write=False)
    return MixedOperator(line, op.s, op.mode, table, diag, op.tail_minus[0].copy(), op.tail_plus[0].copy(), op.local_scale)


# --------------------------------------------------------------------------- persistence


def dump_operator(op: MixedOperator, prefix: str | Path) -> tuple[Path, Path]:
    """Write the interior matrix as (row, col, weight) CSV plus a JSON header."""
    prefix = Path(prefix)
    a = interior_matrix(op)
    rows, cols = np.nonzero(a)
    csv_path = prefix.with_suffix(".csv")
    with open(csv_path, "w") as fh:
        fh.write("row,col,weight\n")
        for i, j in zip(rows, cols):
            fh.write(f"{i},{j},{float(a[i, j])!r}\n")
    header = {
        "s": op.s,
        "mode": op.mode,
        "grid": {
            "descriptor": descriptor_dict(op.grid.descriptor),
            "shape": list(op.grid.shape),
            "h": op.grid.h,
            "origin": op.grid.origin.tolist(),
            "periodic": list(op.grid.periodic),
        },
        "n_interior": int(a.shape[0]),
        "interior_nodes": np.flatnonzero(op.grid.interior_mask).tolist(),
    }
    json_path = prefix.with_suffix(".json")
    json_path.write_text(json.dumps(header, indent=2))
    return csv_path, json_path


def load_triplets(prefix: str | Path) -> tuple[dict, np.ndarray]:
    prefix = Path(prefix)
    header = json.loads(prefix.with_suffix(".json").read_text())
    data = np.loadtxt(prefix.with_suffix(".csv"), delimiter=",", skiprows=1, ndmin=2)
    n = header["n_interior"]
    a = np.zeros((n, n))
    a[data[:, 0].astype(int), data[:, 1].astype(int)] = data[:, 2]
    return header, a
