"""Uniform grids on the unit square and lattice direction sets for wide stencils.

Nodes are stored in C order: node ``(i, j)`` sits at ``(i*h, j*h)`` and has flat
index ``i*n + j``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """An ``n x n`` lattice on ``[0, 1]^2`` with spacing ``h = 1/(n-1)``."""

    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"grid needs n >= 3 nodes per side, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def size(self) -> int:
        return self.n * self.n

    @cached_property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat ``(x, y)`` coordinate arrays of length ``n**2``."""
        t = np.arange(self.n) / (self.n - 1)
        x, y = np.meshgrid(t, t, indexing="ij")
        return x.ravel(), y.ravel()

    @cached_property
    def interior_mask(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=bool)
        m[1:-1, 1:-1] = True
        return m.ravel()

    @cached_property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(self.interior_mask)

    @cached_property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(~self.interior_mask)

    def index(self, i: int, j: int) -> int:
        return i * self.n + j

    def ij(self, k: int) -> tuple[int, int]:
        return divmod(int(k), self.n)

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(x, y)`` at every node."""
        x, y = self.coords
        return np.asarray(func(x, y), dtype=float) * np.ones(self.size)


def build_grid(n: int) -> Grid:
    return Grid(n)


@dataclass(frozen=True)
class LatticeDirection:
    p: int
    q: int

    def __post_init__(self):
        if (self.p, self.q) == (0, 0) or math.gcd(self.p, self.q) != 1:
            raise ValueError(f"({self.p}, {self.q}) is not a primitive lattice vector")

    @property
    def norm(self) -> float:
        return math.hypot(self.p, self.q)

    @property
    def angle(self) -> float:
        return math.atan2(self.q, self.p)

    def perp(self) -> LatticeDirection:
        return LatticeDirection(-self.q, self.p)

    def __iter__(self):
        return iter((self.p, self.q))


@dataclass(frozen=True)
class OrthogonalBasis:
    nu1: LatticeDirection
    nu2: LatticeDirection

    def __post_init__(self):
        if self.nu1.p * self.nu2.p + self.nu1.q * self.nu2.q != 0:
            raise ValueError("basis vectors are not orthogonal")


@dataclass(frozen=True)
class DirectionSet:
    """Orthogonal lattice bases of a width-``width`` stencil.

    ``directions`` lists each distinct direction once; ``pairs[b]`` holds the
    positions in ``directions`` of the two vectors of ``bases[b]``. Bases are
    ordered by the angle of ``nu1``, so the axis basis has index 0.
    """

    width: int
    bases: tuple[OrthogonalBasis, ...]
    dtheta: float
    directions: tuple[LatticeDirection, ...] = field(repr=False)
    pairs: tuple[tuple[int, int], ...] = field(repr=False)

    @property
    def reach(self) -> float:
        """Length of the longest stencil vector, in grid units."""
        return max(d.norm for d in self.directions)

    def footprint(self) -> set[tuple[int, int]]:
        """Lattice offsets touched at an interior node, centre included."""
        pts = {(0, 0)}
        for d in self.directions:
            pts.add((d.p, d.q))
            pts.add((-d.p, -d.q))
        return pts


MAX_WIDTH = 3


def first_quadrant_directions(width: int) -> list[LatticeDirection]:
    """Primitive ``(p, q)`` with ``p, q >= 0`` and ``max(p, q) <= width``."""
    dirs = [
        LatticeDirection(p, q)
        for p in range(width + 1)
        for q in range(width + 1)
        if (p, q) != (0, 0) and math.gcd(p, q) == 1
    ]
    return sorted(dirs, key=lambda d: d.angle)


def angular_resolution(width: int) -> float:
    angles = [d.angle for d in first_quadrant_directions(width)]
    return max(b - a for a, b in zip(angles, angles[1:]))


def build_direction_set(width: int) -> DirectionSet:
    if width not in range(1, MAX_WIDTH + 1):
        raise ValueError(f"stencil width must be 1, 2 or 3, got {width}")
    # (0, 1) is the partner of (1, 0); every other nu1 has p > 0.
    nu1s = [d for d in first_quadrant_directions(width) if d.p > 0]
    bases = tuple(OrthogonalBasis(d, d.perp()) for d in nu1s)
    directions = []
    pairs = []
    for b in bases:
        pairs.append((len(directions), len(directions) + 1))
        directions.extend([b.nu1, b.nu2])
    return DirectionSet(
        width=width,
        bases=bases,
        dtheta=angular_resolution(width),
        directions=tuple(directions),
        pairs=tuple(pairs),
    )


@dataclass(frozen=True)
class StencilArms:
    """The two arms of a centred difference along ``nu`` at one node.

    Lengths are physical (``h`` included). A truncated arm ends on the boundary
    at ``plus_point``/``minus_point``; an untruncated arm ends at the grid node
    ``plus_node``/``minus_node``.
    """

    tplus: float
    tminus: float
    plus_is_boundary: bool
    minus_is_boundary: bool
    plus_node: int | None
    minus_node: int | None
    plus_point: tuple[float, float]
    minus_point: tuple[float, float]


def _ray_fraction(i: int, j: int, p: int, q: int, last: int) -> Fraction:
    """Fraction of the step ``(p, q)`` from ``(i, j)`` that stays in ``[0, last]^2``."""
    s = Fraction(1)
    for c, d in ((i, p), (j, q)):
        if d > 0:
            s = min(s, Fraction(last - c, d))
        elif d < 0:
            s = min(s, Fraction(c, -d))
    return s


def stencil_arms(grid: Grid, node, nu: LatticeDirection) -> StencilArms:
    i, j = grid.ij(node) if np.isscalar(node) else node
    last = grid.n - 1
    if not (0 < i < last and 0 < j < last):
        raise ValueError(f"node {(i, j)} is not interior")
    out = {}
    for sign, tag in ((1, "plus"), (-1, "minus")):
        p, q = sign * nu.p, sign * nu.q
        s = _ray_fraction(i, j, p, q, last)
        xs, ys = Fraction(i) + s * p, Fraction(j) + s * q
        out[f"t{tag}"] = float(s) * nu.norm * grid.h
        out[f"{tag}_is_boundary"] = s < 1
        out[f"{tag}_node"] = grid.index(i + p, j + q) if s == 1 else None
        out[f"{tag}_point"] = (float(xs / last), float(ys / last))
    return StencilArms(**out)
