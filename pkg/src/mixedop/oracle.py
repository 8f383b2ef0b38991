"""Brute-force references used to validate the grid operators.

Everything here is slow on purpose and shares no code path with the
matrix-free application in :mod:`mixedop.kernel` beyond the weight lookup.
"""
from __future__ import annotations

from dataclasses import dataclass
import hashlib
import json
import math
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import linalg

from .kernel import MixedOperator, normalization_constant

_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


class QuadratureError(RuntimeError):
    pass


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    error_estimate: float
    subdivisions: int
    truncation_radius: float
    truncation_bound: float


def _second_difference(u: Callable, x: np.ndarray, dim: int, n_theta: int) -> Callable:
    """Return A(r) = symmetric second difference of u at x, averaged over directions (2D: integrated over [0, pi))."""
    ux = float(np.asarray(u(x if dim == 2 else x[0])))
    if dim == 1:
        x0 = float(x[0])

        def g(r):
            r = np.asarray(r, dtype=float)
            return 2.0 * ux - u(x0 + r) - u(x0 - r)

        return g

    theta = np.arange(n_theta) * (math.pi / n_theta)
    ct, st = np.cos(theta), np.sin(theta)

    def g2(r):
        r = np.asarray(r, dtype=float)[..., None]
        p = u(np.stack([x[0] + r * ct, x[1] + r * st], axis=-1))
        m = u(np.stack([x[0] - r * ct, x[1] - r * st], axis=-1))
        return (math.pi / n_theta) * np.sum(2.0 * ux - p - m, axis=-1)

    return g2


def _adaptive_gauss(f, a, b, tol, noise=None, depth=0, max_depth=30) -> tuple[float, float, int]:
    x16, w16 = _gauss(16)
    x32, w32 = _gauss(32)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    coarse = half * float(np.dot(w16, f(mid + half * x16)))
    f32 = f(mid + half * x32)
    fine = half * float(np.dot(w32, f32))
    err = abs(fine - coarse)
    if not (math.isfinite(fine) and math.isfinite(coarse)):
        raise QuadratureError("non-finite integrand samples")
    # never ask for more than the rounding floor of the samples themselves
    floor = np.abs(f32) * np.finfo(float).eps if noise is None else noise(mid + half * x32)
    tol = max(tol, 64 * half * float(np.dot(w32, floor)))
    if err <= tol or depth >= max_depth:
        if err > tol and depth >= max_depth:
            raise QuadratureError("refinement did not converge")
        return fine, err, 1
    v1, e1, n1 = _adaptive_gauss(f, a, mid, tol / 2, noise, depth + 1, max_depth)
    v2, e2, n2 = _adaptive_gauss(f, mid, b, tol / 2, noise, depth + 1, max_depth)
    return v1 + v2, e1 + e2, n1 + n2


def pointwise_fraclap(
    u: Callable,
    x,
    s: float,
    mode: str = "paper",
    *,
    u_sup: float = 1.0,
    scale: float = 1.0,
    tol: float = 1e-13,
    r_min: float | None = None,
    tail_tol: float = 1e-12,
    n_theta: int = 256,
    cache_dir: str | Path | None = None,
    cache_key: str | None = None,
) -> QuadratureResult:
    """P.V. integral of (u(x) - u(y)) / |x - y|^{N+2s} at one point, by dyadic shells.

    ``u`` must be vectorized; in 2D it receives arrays of shape (..., 2).
    The integration radius is chosen so that the neglected far region is
    bounded by ``tail_tol`` using ``u_sup`` >= sup |u|.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    dim = x.size
    if dim not in (1, 2):
        raise ValueError("only 1D and 2D points are supported")
    cache_path = None
    if cache_dir is not None and cache_key is not None:
        blob = json.dumps([cache_key, x.tolist(), s, mode, u_sup, scale, tol, r_min, tail_tol, n_theta])
        cache_path = Path(cache_dir) / (hashlib.sha256(blob.encode()).hexdigest()[:24] + ".json")
        if cache_path.exists():
            return QuadratureResult(**json.loads(cache_path.read_text()))

    g = _second_difference(u, x, dim, n_theta)
    ux = abs(float(np.asarray(u(x if dim == 2 else x[0]))))
    far_measure = (2.0 / (2 * s)) if dim == 1 else (math.pi / s)  # times R^{-2s}
    radius = (far_measure * (ux + u_sup) / tail_tol) ** (1.0 / (2 * s))
    radius = max(radius, 4.0 * scale)
    r0 = 1e-3 * scale if r_min is None else r_min

    # inner ball: fit A(r) = c2 r^2 + c4 r^4 from two samples and integrate the series exactly
    a1, a2 = float(g(r0)), float(g(r0 / 2))
    c4 = (a1 - 4.0 * a2) / (0.75 * r0**4)
    c2 = (a1 - c4 * r0**4) / r0**2
    inner = c2 * r0 ** (2 - 2 * s) / (2 - 2 * s) + c4 * r0 ** (4 - 2 * s) / (4 - 2 * s)

    integrand = lambda r: g(r) * np.asarray(r, dtype=float) ** (-1 - 2 * s)
    # rounding noise of the second difference, in integrand units
    g_noise = 4 * np.finfo(float).eps * (ux + u_sup) * (1.0 if dim == 1 else math.pi)
    noise = lambda r: g_noise * np.asarray(r, dtype=float) ** (-1 - 2 * s)
    n_shells = math.ceil(math.log2(radius / r0))
    edges = r0 * 2.0 ** np.arange(n_shells + 1)
    xg, wg = _gauss(32)
    rough = abs(inner) + sum(
        abs(0.5 * (b - a) * float(np.dot(wg, integrand(0.5 * (a + b) + 0.5 * (b - a) * xg))))
        for a, b in zip(edges[:-1], edges[1:])
    )
    shell_tol = tol * max(1.0, rough) / n_shells
    total, err, subs = inner, 0.0, 0
    lo = r0
    for _ in range(n_shells):
        hi = 2.0 * lo
        v, e, n = _adaptive_gauss(integrand, lo, hi, shell_tol, noise)
        total += v
        err += e
        subs += n
        lo = hi
    bound = far_measure * lo ** (-2 * s) * (ux + u_sup)
    if mode == "standard":
        c = normalization_constant(dim, s)
        total, err, bound = total * c, err * c, bound * c
    elif mode != "paper":
        raise ValueError(f"unknown normalization mode {mode!r}")
    res = QuadratureResult(float(total), float(err), int(subs), float(lo), float(bound))
    if not math.isfinite(res.value):
        raise QuadratureError("non-finite quadrature value")
    if cache_path is not None:
        cache_path.parent.mkdir(parents=True, exist_ok=True)
        cache_path.write_text(json.dumps(res.__dict__))
    return res


# --------------------------------------------------------------------------- dense assembly

MAX_DENSE_NODES = 64


@dataclass(frozen=True, eq=False)
class DenseReference:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    nodes: np.ndarray  # interior node indices, row order of the matrix

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])


def dense_matrix(op: MixedOperator, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Row-by-row assembly from node coordinates; no index tricks shared with the kernel module."""
    grid = op.grid
    if max(grid.shape) > MAX_DENSE_NODES + 4:
        raise ValueError(f"dense reference refuses grids above {MAX_DENSE_NODES} nodes per axis")
    mask = grid.interior_mask if mask is None else np.asarray(mask, dtype=bool)
    nodes = np.argwhere(mask)
    xyz = np.stack([c[mask] for c in grid.mesh()], axis=-1)
    h = grid.h
    n = len(nodes)
    a = np.zeros((n, n))
    center = np.array(op.center)
    period = np.array([grid.shape[d] * h if grid.periodic[d] else np.inf for d in range(grid.dim)])
    for i in range(n):
        delta = xyz - xyz[i]
        for d in range(grid.dim):
            if grid.periodic[d]:
                delta[:, d] = np.mod(delta[:, d] + period[d] / 2, period[d]) - period[d] / 2
        steps = np.rint(delta / h).astype(int)
        # wrapped periodic offsets land on the same residue of the offset table
        row = -op.weights[tuple((steps + center).T)]
        row[i] = op.diag[tuple(nodes[i])]
        if op.local_scale:
            nb = np.sum(np.abs(steps), axis=1) == 1
            row[nb] -= op.local_scale / h**2
            row[i] += op.local_scale * 2 * grid.dim / h**2
        a[i] = row
    return a, nodes


def dense_reference(op: MixedOperator, mask: np.ndarray | None = None) -> DenseReference:
    a, nodes = dense_matrix(op, mask)
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    return DenseReference(a, vals, vecs, nodes)


def direct_solve(op: MixedOperator, rhs: np.ndarray, shift: float = 0.0) -> np.ndarray:
    """Solve (A - shift I) u = rhs on the interior with a dense LU factorization."""
    a, _ = dense_matrix(op)
    return linalg.solve(a - shift * np.eye(a.shape[0]), np.asarray(rhs, dtype=float))
