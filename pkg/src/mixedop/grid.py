"""Uniform grids, domain masks and reflection maps.

All grids are isotropic (same spacing on every axis) and immutable once built.
Node ``k`` on axis ``a`` sits at ``origin[a] + k * h``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

PAD = 2  # exterior node layers around the core region
ALIGN_TOL = 1e-9


@dataclass(frozen=True)
class Interval:
    a: float
    b: float
    kind: str = field(default="interval", init=False)


@dataclass(frozen=True)
class Box:
    lower: tuple[float, float]
    upper: tuple[float, float]
    kind: str = field(default="box", init=False)


@dataclass(frozen=True)
class Disc:
    center: tuple[float, float]
    radius: float
    kind: str = field(default="disc", init=False)


@dataclass(frozen=True)
class Strip:
    """Periodic in y on (-half_width, half_width), bounded in t on (-half_length, half_length)."""

    half_width: float
    half_length: float
    kind: str = field(default="strip", init=False)


Descriptor = Interval | Box | Disc | Strip


def descriptor_dict(d: Descriptor) -> dict:
    out = {"kind": d.kind}
    for key, val in d.__dict__.items():
        if key != "kind":
            out[key] = list(val) if isinstance(val, tuple) else val
    return out


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Grid:
    origin: np.ndarray
    h: float
    shape: tuple[int, ...]
    interior_mask: np.ndarray
    descriptor: Descriptor
    periodic: tuple[bool, ...]

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError("spacing must be positive and finite")
        if any(n < 3 for n in self.shape):
            raise ValueError("every axis needs at least 3 nodes")
        if self.interior_mask.shape != self.shape:
            raise ValueError("mask shape does not match grid shape")
        object.__setattr__(self, "origin", _frozen(np.asarray(self.origin, dtype=float)))
        object.__setattr__(self, "interior_mask", _frozen(self.interior_mask.astype(bool)))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def n_interior(self) -> int:
        return int(self.interior_mask.sum())

    @property
    def t_axis(self) -> int:
        return self.dim - 1

    def coords(self, axis: int) -> np.ndarray:
        # measured in half-steps from the middle so that symmetric grids have exactly mirrored coordinates
        n = self.shape[axis]
        mid = self.origin[axis] + 0.5 * (n - 1) * self.h
        return mid + (2 * np.arange(n) - (n - 1)) * (0.5 * self.h)

    def mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.coords(a) for a in range(self.dim)), indexing="ij")

    def same_as(self, other: "Grid") -> bool:
        return (
            self is other
            or (
                self.shape == other.shape
                and self.h == other.h
                and np.array_equal(self.origin, other.origin)
                and np.array_equal(self.interior_mask, other.interior_mask)
                and self.periodic == other.periodic
            )
        )


def build_interval(a: float, b: float, n: int) -> Grid:
    """1D grid with ``n`` nodes spanning [a, b]; interior nodes lie strictly inside (a, b)."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("non-finite bounds")
    if not a < b:
        raise ValueError("bounds out of order")
    if n < 3:
        raise ValueError("need at least 3 nodes")
    h = (b - a) / (n - 1)
    mask = np.zeros(n + 2 * PAD, dtype=bool)
    mask[PAD + 1 : PAD + n - 1] = True
    return Grid(np.array([a - PAD * h]), h, (n + 2 * PAD,), mask, Interval(a, b), (False,))


def build_box(lower, upper, n: int) -> Grid:
    """2D box with ``n`` nodes along axis 0; axis 1 must be an integer multiple of the spacing."""
    lower = tuple(float(v) for v in lower)
    upper = tuple(float(v) for v in upper)
    if not all(math.isfinite(v) for v in lower + upper):
        raise ValueError("non-finite bounds")
    if not all(lo < hi for lo, hi in zip(lower, upper)):
        raise ValueError("bounds out of order")
    if n < 3:
        raise ValueError("need at least 3 nodes")
    h = (upper[0] - lower[0]) / (n - 1)
    cells1 = (upper[1] - lower[1]) / h
    if abs(cells1 - round(cells1)) > ALIGN_TOL * max(1.0, cells1) or round(cells1) < 2:
        raise ValueError("box sides are not commensurate with a uniform isotropic spacing")
    counts = (n, int(round(cells1)) + 1)
    shape = tuple(c + 2 * PAD for c in counts)
    mask = np.zeros(shape, dtype=bool)
    mask[PAD + 1 : PAD + counts[0] - 1, PAD + 1 : PAD + counts[1] - 1] = True
    origin = np.array(lower) - PAD * h
    return Grid(origin, h, shape, mask, Box(lower, upper), (False, False))


def build_disc(radius: float, n_per_diameter: int, center=(0.0, 0.0)) -> Grid:
    """2D grid over the square circumscribing the disc; node interior iff strictly inside."""
    if not (math.isfinite(radius) and radius > 0):
        raise ValueError("radius must be positive")
    if n_per_diameter < 5:
        raise ValueError("need at least 5 nodes per diameter")
    center = (float(center[0]), float(center[1]))
    n = n_per_diameter
    h = 2.0 * radius / (n - 1)
    m = n + 2 * PAD
    # offsets measured in half-steps from the center keep the mask exactly symmetric
    half = 2 * np.arange(m) - (m - 1)
    r2 = (half[:, None] ** 2 + half[None, :] ** 2) * (0.5 * h) ** 2
    mask = r2 < radius**2
    origin = np.array(center) - 0.5 * (m - 1) * h
    return Grid(origin, h, (m, m), mask, Disc(center, radius), (False, False))


def build_strip(half_width: float, half_length: float, h: float) -> Grid:
    """Periodic-in-y strip; axis 0 is y, axis 1 is t. Interior: every y, t strictly inside."""
    if not (half_width > 0 and half_length > 0 and h > 0):
        raise ValueError("strip dimensions and spacing must be positive")
    ny = 2 * half_width / h
    nt = 2 * half_length / h
    if abs(ny - round(ny)) > ALIGN_TOL * ny or abs(nt - round(nt)) > ALIGN_TOL * nt:
        raise ValueError("strip dimensions are not multiples of the spacing")
    ny, nt = int(round(ny)), int(round(nt)) + 1
    shape = (ny, nt + 2 * PAD)
    mask = np.zeros(shape, dtype=bool)
    mask[:, PAD + 1 : PAD + nt - 1] = True
    origin = np.array([-half_width, -half_length - PAD * h])
    return Grid(origin, h, shape, mask, Strip(half_width, half_length), (True, False))


@dataclass(frozen=True, eq=False)
class ReflectionMap:
    """Pairing of nodes under x_axis -> 2*lam - x_axis; ``pairing`` holds flat indices, -1 off-grid."""

    axis: int
    lam: float
    pairing: np.ndarray

    def reflected(self, values: np.ndarray, fill: float = 0.0) -> np.ndarray:
        """Values of ``u o Q``: node x receives u(Q x), or ``fill`` when Q x is off the grid."""
        flat = values.reshape(-1)
        out = np.full(flat.shape, fill, dtype=float)
        p = self.pairing.reshape(-1)
        ok = p >= 0
        out[ok] = flat[p[ok]]
        return out.reshape(values.shape)

    @property
    def paired(self) -> np.ndarray:
        return self.pairing >= 0


def reflect(grid: Grid, axis: int, lam: float) -> ReflectionMap:
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range")
    if grid.periodic[axis]:
        raise ValueError("reflection along a periodic axis is not supported")
    twice = 2.0 * (lam - grid.origin[axis]) / grid.h
    p = round(twice)
    if abs(twice - p) > ALIGN_TOL * max(1.0, abs(twice)):
        raise ValueError("lambda not aligned with the grid (must be a node or midpoint)")
    idx = np.indices(grid.shape)
    mirror = p - idx[axis]
    ok = (mirror >= 0) & (mirror < grid.shape[axis])
    target = list(idx)
    target[axis] = np.where(ok, mirror, 0)
    flat = np.ravel_multi_index(tuple(target), grid.shape)
    pairing = np.where(ok, flat, -1)
    pairing.setflags(write=False)
    return ReflectionMap(axis, float(lam), pairing)


def is_reflection_symmetric(grid: Grid, axis: int, lam: float = 0.0) -> bool:
    """True if the interior mask is invariant under the reflection about {x_axis = lam}."""
    try:
        q = reflect(grid, axis, lam)
    except ValueError:
        return False
    mask = grid.interior_mask
    if np.any(mask & ~q.paired):
        return False
    return bool(np.array_equal(q.reflected(mask.astype(float)) > 0.5, mask))
