"""First Dirichlet eigenvalue of the mixed operator and its small-volume scan."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .grid import build_disc, build_interval
from .kernel import Field, MixedOperator, assemble, interior_matrix


class EigenError(RuntimeError):
    """Inverse iteration failed to settle; carries the last iterate for inspection."""

    def __init__(self, message: str, result: "EigenResult"):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True, eq=False)
class EigenResult:
    lambda1: float
    eigenfield: Field
    residual_norm: float
    iterations: int


def _inverse_iteration(a: np.ndarray, vol: float, rtol: float, max_iter: int):
    chol = linalg.cho_factor(a)
    x = np.ones(a.shape[0])
    x /= np.sqrt(vol * x @ x)
    rq_old = np.inf
    for it in range(1, max_iter + 1):
        y = linalg.cho_solve(chol, x)
        y /= np.sqrt(vol * y @ y)
        rq = float(y @ (a @ y)) / float(y @ y)
        x = y
        if abs(rq - rq_old) < rtol * abs(rq):
            return rq, x, it, True
        rq_old = rq
    return rq, x, max_iter, False


def smallest_eigenpair(a: np.ndarray, vol: float, rtol: float = 1e-11, max_iter: int = 1000):
    """Inverse power iteration on an SPD matrix; vectors normalized in the h^N-weighted norm."""
    try:
        return _inverse_iteration(a, vol, rtol, max_iter)
    except linalg.LinAlgError as exc:
        raise EigenError(f"matrix is not positive definite: {exc}", None) from exc


def lambda1(op: MixedOperator, mask: np.ndarray | None = None, *, part: str = "full",
            rtol: float = 1e-11, max_iter: int = 1000) -> EigenResult:
    """Smallest eigenvalue of L with zero exterior data outside ``mask`` (default: the interior)."""
    grid = op.grid
    mask = grid.interior_mask if mask is None else np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("empty interior")
    a = interior_matrix(op, mask, part=part)
    vol = grid.h**grid.dim
    lam, x, its, ok = smallest_eigenpair(a, vol, rtol, max_iter)
    if x.sum() < 0:
        x = -x
    values = np.zeros(grid.shape)
    values[mask] = x
    resid = float(np.linalg.norm(a @ x - lam * x) * np.sqrt(vol))
    result = EigenResult(lam, Field(grid, values), resid, its)
    if not ok:
        raise EigenError("inverse iteration stagnated", result)
    return result


def local_lambda1(op: MixedOperator, mask: np.ndarray | None = None) -> float:
    """First eigenvalue of the discrete Laplacian stencil alone on the same nodes."""
    return lambda1(op, mask, part="local").lambda1


@dataclass(frozen=True)
class ScanRow:
    radius: float
    lambda1: float
    residual: float
    n_interior: int


def lambda1_volume_scan(shape_family: str, radii, s: float, mode: str = "paper",
                        nodes_per_diameter: int = 81) -> list[ScanRow]:
    """lambda1 on intervals (-r, r) or discs of radius r, with the node count per domain held fixed."""
    radii = [float(r) for r in radii]
    if not radii:
        raise ValueError("no radii given")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    if nodes_per_diameter < 7:
        raise ValueError("radius resolvable by fewer than 5 interior nodes")
    rows = []
    for r in radii:
        if shape_family == "interval":
            grid = build_interval(-r, r, nodes_per_diameter)
        elif shape_family == "disc":
            grid = build_disc(r, nodes_per_diameter)
        else:
            raise ValueError(f"unknown shape family {shape_family!r}")
        if r <= 4 * grid.h or grid.n_interior < 5:
            raise ValueError(f"radius {r} is not resolved by the grid")
        res = lambda1(assemble(grid, s, mode))
        rows.append(ScanRow(r, res.lambda1, res.residual_norm, grid.n_interior))
    return rows
