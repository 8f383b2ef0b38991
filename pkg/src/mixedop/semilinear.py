"""Damped Newton solvers for L u = f(u).

Two settings are covered: the Dirichlet problem (u = 0 off the domain) and the
layer problem on a truncated line or periodic strip with u -> -1 / +1 in the
far field along the last axis.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import logging
import math
from typing import Callable

import numpy as np
from scipy import linalg
from scipy.sparse import linalg as spla

from .grid import Grid, Interval, Strip, build_interval, build_strip
from .kernel import (
    FarConstants,
    Field,
    MixedOperator,
    Zero,
    _neg_laplacian,
    apply,
    assemble,
    interior_matrix,
)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------- nonlinearities


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    f: Callable[[np.ndarray], np.ndarray]
    fprime: Callable[[np.ndarray], np.ndarray]
    lipschitz: tuple[float, float, float] | None = None  # (lo, hi, L): |f'| <= L on [lo, hi]
    params: dict = field(default_factory=dict)
    anchor: str = ""

    @property
    def gibbons_admissible(self) -> bool:
        """sup of f' over 1 <= |r| <= 10, sampled every 1e-3, is negative."""
        r = np.linspace(1.0, 10.0, 9001)
        vals = np.concatenate([np.broadcast_to(self.fprime(r), r.shape),
                               np.broadcast_to(self.fprime(-r), r.shape)])
        return bool(np.all(np.isfinite(vals)) and vals.max() < 0)

    def lipschitz_on(self, lo: float, hi: float, samples: int = 2001) -> float:
        """Sampled sup of |f'| over [lo, hi]."""
        r = np.linspace(lo, hi, samples)
        return float(np.max(np.abs(np.broadcast_to(self.fprime(r), r.shape))))


def _const(c):
    return lambda u: np.full(np.shape(u), float(c))


def constant_one() -> Nonlinearity:
    return Nonlinearity("constant_one", _const(1.0), _const(0.0), (-np.inf, np.inf, 0.0),
                        anchor="torsion problem; f = 1 is Lipschitz, so positive solutions on symmetric convex domains are symmetric")


def affine(a: float = 1.0, b: float = 0.5) -> Nonlinearity:
    return Nonlinearity("affine", lambda u: a + b * np.asarray(u), _const(b), (-np.inf, np.inf, abs(b)),
                        {"a": a, "b": b}, anchor="f(u) = a + b u; unique solution while b < lambda1")


def allen_cahn() -> Nonlinearity:
    return Nonlinearity("allen_cahn", lambda u: np.asarray(u) - np.asarray(u) ** 3,
                        lambda u: 1.0 - 3.0 * np.asarray(u) ** 2, None,
                        anchor="f(u) = u - u^3; sup_{|r|>=1} f'(r) = -2 < 0, layer problem admissible")


def logistic(a: float = 1.0) -> Nonlinearity:
    return Nonlinearity("logistic", lambda u: a * np.asarray(u) * (1 - np.asarray(u)),
                        lambda u: a * (1 - 2 * np.asarray(u)), None, {"a": a},
                        anchor="f(u) = a u (1 - u); locally Lipschitz, not admissible for the layer problem")


PRESETS: dict[str, Callable[..., Nonlinearity]] = {
    "constant_one": constant_one,
    "affine": affine,
    "allen_cahn": allen_cahn,
    "logistic": logistic,
}


def preset(name: str, **params) -> Nonlinearity:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown nonlinearity preset {name!r}") from None
    return factory(**params)


# --------------------------------------------------------------------------- reports


@dataclass(frozen=True)
class SolverParams:
    tol: float = 1e-10
    max_iter: int = 50
    max_halvings: int = 30
    gmres_rtol: float = 1e-13


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    final_residual_sup: float
    damping_events: int
    positive: bool | None = None
    truncation_sensitivity: float | None = None
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": list(self.residual_history),
            "final_residual_sup": self.final_residual_sup,
            "damping_events": self.damping_events,
            "positive": self.positive,
            "truncation_sensitivity": self.truncation_sensitivity,
            "message": self.message,
        }


class SolverError(RuntimeError):
    def __init__(self, message: str, field: Field, report: SolveReport):
        super().__init__(message)
        self.field = field
        self.report = report


# --------------------------------------------------------------------------- residual & Jacobian


def residual(op: MixedOperator, f: Nonlinearity, u: Field) -> Field:
    lu = apply(op, u).values
    r = np.where(op.grid.interior_mask, lu - f.f(u.values), 0.0)
    return Field(op.grid, r)


def jacobian(op: MixedOperator, f: Nonlinearity, u: Field) -> np.ndarray:
    """Dense Jacobian A - diag(f'(u)) on the interior nodes."""
    a = interior_matrix(op)
    a[np.diag_indices_from(a)] -= np.broadcast_to(f.fprime(u.interior), (a.shape[0],))
    return a


def _linear_action(op: MixedOperator, v: np.ndarray) -> np.ndarray:
    """A v for a full-grid array with zeros off the interior."""
    out = op.local_scale * _neg_laplacian(op.grid, v) + op.diag * v - op.convolve(v)
    return np.where(op.grid.interior_mask, out, 0.0)


class _DenseSolver:
    def __init__(self, op: MixedOperator):
        self.op = op
        self.a = interior_matrix(op)

    def __call__(self, fp: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        j = self.a - np.diag(fp)
        lu, piv = linalg.lu_factor(j, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise linalg.LinAlgError("singular Jacobian")
        x = linalg.lu_solve((lu, piv), rhs)
        if not np.all(np.isfinite(x)):
            raise linalg.LinAlgError("singular Jacobian")
        return x


class _StripSolver:
    """GMRES on the strip, preconditioned by the y-averaged Jacobian in Fourier modes along y."""

    def __init__(self, op: MixedOperator, rtol: float):
        grid = op.grid
        self.op, self.rtol = op, rtol
        ny, mt = grid.shape
        self.ny = ny
        tmask = grid.interior_mask[0]
        self.tmask = tmask
        self.nt = int(tmask.sum())
        ti = np.flatnonzero(tmask)
        period = op.weights[ny - 1 : 2 * ny - 1]  # y offsets 0..ny-1
        spectrum = np.real(np.fft.fft(period, axis=0))  # real: the table is even in y
        offs = ti[None, :] - ti[:, None] + (mt - 1)
        inv_h2 = op.local_scale / grid.h**2
        lap_t = 2 * np.eye(self.nt) - np.eye(self.nt, k=1) - np.eye(self.nt, k=-1)
        base = inv_h2 * lap_t + np.diag(op.diag[0, tmask])
        self.blocks = []
        for k in range(ny // 2 + 1):
            b = base - spectrum[k][offs]
            b[np.diag_indices(self.nt)] += inv_h2 * (2 - 2 * math.cos(2 * math.pi * k / ny))
            self.blocks.append(b)

    def _factor(self, cbar: np.ndarray):
        self.lus = [linalg.lu_factor(b - np.diag(cbar)) for b in self.blocks]

    def _precondition(self, v: np.ndarray) -> np.ndarray:
        v = v.reshape(self.ny, self.nt)
        vh = np.fft.fft(v, axis=0)
        out = np.empty_like(vh)
        for k in range(self.ny):
            lu = self.lus[min(k, self.ny - k)]
            both = np.stack([vh[k].real, vh[k].imag], axis=1)
            sol = linalg.lu_solve(lu, both)
            out[k] = sol[:, 0] + 1j * sol[:, 1]
        return np.real(np.fft.ifft(out, axis=0)).reshape(-1)

    def __call__(self, fp: np.ndarray, rhs: np.ndarray) -> np.ndarray:
        grid = self.op.grid
        fp = fp.reshape(self.ny, self.nt)
        self._factor(fp.mean(axis=0))
        full = np.zeros(grid.shape)

        def matvec(x):
            full[:, self.tmask] = x.reshape(self.ny, self.nt)
            out = _linear_action(self.op, full)[:, self.tmask] - fp * full[:, self.tmask]
            return out.reshape(-1)

        n = self.ny * self.nt
        jop = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        mop = spla.LinearOperator((n, n), matvec=self._precondition, dtype=float)
        x, info = spla.gmres(jop, rhs, M=mop, rtol=self.rtol, atol=0.0, restart=60, maxiter=20)
        if info != 0 or not np.all(np.isfinite(x)):
            raise linalg.LinAlgError(f"GMRES did not converge (info={info})")
        return x


# --------------------------------------------------------------------------- Newton


def _newton(op: MixedOperator, f: Nonlinearity, u0: Field, params: SolverParams, solver) -> tuple[Field, SolveReport]:
    u = u0
    r = residual(op, f, u)
    rsup = float(np.max(np.abs(r.values)))
    report = SolveReport(False, 0, [rsup], rsup, 0)
    for it in range(1, params.max_iter + 1):
        if rsup <= params.tol:
            break
        try:
            step = solver(np.broadcast_to(f.fprime(u.interior), u.interior.shape).astype(float), -r.interior)
        except linalg.LinAlgError as exc:
            report.message = str(exc)
            raise SolverError(f"singular Jacobian at iteration {it}: {exc}", u, report) from exc
        t = 1.0
        halvings = 0
        while True:
            trial = u.with_interior(u.interior + t * step)
            rt = residual(op, f, trial)
            tsup = float(np.max(np.abs(rt.values)))
            if tsup < rsup or halvings >= params.max_halvings:
                break
            t *= 0.5
            halvings += 1
        if halvings:
            report.damping_events += 1
        report.iterations = it
        if not tsup < rsup:
            report.message = "damping exhausted without residual decrease"
            report.final_residual_sup = rsup
            raise SolverError(report.message, u, report)
        u, r, rsup = trial, rt, tsup
        report.residual_history.append(rsup)
        log.debug("newton it=%d residual=%.3e step=%.3g", it, rsup, t)
    report.final_residual_sup = rsup
    report.converged = rsup <= params.tol
    if not report.converged:
        report.message = "maximum iterations exceeded"
        raise SolverError(report.message, u, report)
    return u, report


def _solver_for(op: MixedOperator, params: SolverParams):
    if op.grid.periodic == (True, False):
        return _StripSolver(op, params.gmres_rtol)
    return _DenseSolver(op)


def solve_dirichlet(op: MixedOperator, f: Nonlinearity, u0: Field | None = None,
                    params: SolverParams | None = None) -> tuple[Field, SolveReport]:
    """Solve L u = f(u) in the domain with u = 0 outside; positivity is reported, not imposed."""
    params = params or SolverParams()
    if u0 is None:
        u0 = Field(op.grid, np.zeros(op.grid.shape))
    if not isinstance(u0.exterior, Zero):
        raise ValueError("initial guess must use the zero exterior rule")
    u, report = _newton(op, f, u0, params, _solver_for(op, params))
    report.positive = bool(np.min(u.interior) > 0.0)
    return u, report


def _half_length(grid: Grid) -> float:
    d = grid.descriptor
    if isinstance(d, Interval):
        if d.a != -d.b:
            raise ValueError("layer problems need a symmetric interval (-T, T)")
        return d.b
    if isinstance(d, Strip):
        return d.half_length
    raise ValueError("layer problems need an interval or strip grid")


def _regrid(op: MixedOperator, half_length: float) -> MixedOperator:
    grid = op.grid
    if isinstance(grid.descriptor, Strip):
        g = build_strip(grid.descriptor.half_width, half_length, grid.h)
    else:
        n = 2 * half_length / grid.h
        if abs(n - round(n)) > 1e-9 * n:
            raise ValueError("extended half-length is not a multiple of the spacing")
        g = build_interval(-half_length, half_length, int(round(n)) + 1)
    return assemble(g, op.s, op.mode)


def _extend(u: Field, grid: Grid) -> Field:
    """Carry a layer profile onto a longer grid, using the far constants beyond the old window."""
    t_old = u.grid.coords(u.grid.t_axis)
    t_new = grid.coords(grid.t_axis)
    rule = u.exterior
    vals = np.where(t_new < 0, rule.minus, rule.plus) * np.ones(grid.shape)
    lo = int(round((t_old[0] - t_new[0]) / grid.h))
    sl = [slice(None)] * grid.dim
    sl[-1] = slice(lo, lo + t_old.size)
    vals[tuple(sl)] = u.values
    return Field.from_interior(grid, vals, rule)


def solve_gibbons(op: MixedOperator, f: Nonlinearity, u0: Field, params: SolverParams | None = None,
                  *, sensitivity: bool = True, min_half_length: float = 10.0) -> tuple[Field, SolveReport]:
    """Layer solution with far field -1 / +1 along the last axis, plus a truncation-sensitivity re-solve at 1.5 T."""
    params = params or SolverParams()
    if not f.gibbons_admissible:
        raise ValueError(f"nonlinearity {f.name!r} violates sup_{{|r|>=1}} f'(r) < 0")
    grid = op.grid
    rule = u0.exterior
    if not (isinstance(rule, FarConstants) and rule.minus == -1.0 and rule.plus == 1.0 and rule.axis == grid.t_axis):
        raise ValueError("initial guess must carry far constants (-1, +1) along the last axis")
    T = _half_length(grid)
    if T < min_half_length:
        raise ValueError(f"truncation half-length {T} below the minimum {min_half_length}")
    u, report = _newton(op, f, u0, params, _solver_for(op, params))
    if sensitivity:
        big = _regrid(op, 1.5 * T)
        u_big, _ = _newton(big, f, _extend(u, big.grid), params, _solver_for(big, params))
        report.truncation_sensitivity = truncation_difference(u, u_big)
    return u, report


def truncation_difference(u: Field, u_big: Field) -> float:
    """sup over the smaller grid's interior of |u - u_big| at shared nodes."""
    t_small = u.grid.coords(u.grid.t_axis)
    t_big = u_big.grid.coords(u_big.grid.t_axis)
    lo = int(round((t_small[0] - t_big[0]) / u.grid.h))
    sl = [slice(None)] * u.grid.dim
    sl[-1] = slice(lo, lo + t_small.size)
    diff = np.abs(u.values - u_big.values[tuple(sl)])
    return float(np.max(diff[u.grid.interior_mask]))


def layer_guess(grid: Grid, perturbation: float = 0.0) -> Field:
    """clamp(t, -1, 1), optionally plus perturbation * sin(pi y / 2) * exp(-t^2) on a strip."""
    mesh = grid.mesh()
    t = mesh[-1]
    vals = np.clip(t, -1.0, 1.0)
    if perturbation and grid.dim == 2:
        vals = vals + perturbation * np.sin(math.pi * mesh[0] / 2) * np.exp(-t * t)
    return Field.from_interior(grid, vals, FarConstants(-1.0, 1.0, grid.t_axis))
