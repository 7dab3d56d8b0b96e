"""Periodic interface graphs and the cut-cell domains beneath (or above) them.

Coordinates: x lives on a torus of length ``period``, sampled at ``n_x``
columns x_i = i*dx. The vertical coordinate is discretized by ``n_y`` cells
of height ``dy``, with node rows y_j = j*dy for j = 0..n_y, so
``height_cap = n_y*dy``. Row 0 is the fixed bottom wall; row n_y is the top
wall of a two-phase strip (or a truncation cap for one-phase runs, in which
case the interface must stay well below it).

The positive phase is the region 0 < y < f(x); the negative phase (two-phase
strips only) is f(x) < y < height_cap. Between columns, f is linearly
interpolated when cut legs are computed, which keeps the resulting stencils
monotone and second-order consistent.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

FloatArray = np.ndarray

# Leg classification, one entry per interior node per direction.
LEG_INTERIOR = 0   # neighbor is another unknown
LEG_INTERFACE = 1  # leg crosses the moving interface
LEG_BOTTOM = 2     # leg ends on the fixed bottom wall (row 0)
LEG_TOP = 3        # leg ends on the fixed top wall (row n_y)

# Legs shorter than this fraction of a cell are degenerate; the owning row
# is replaced by the interface Dirichlet value at assembly time.
THETA_COLLAPSE = 1e-8

# Interface samples must keep at least this many cells of clearance from
# the fixed walls, or probes and cut legs cannot be formed.
MARGIN_CELLS = 2


class BandViolationError(ValueError):
    """Interface samples leave the admissible band [delta, upper]."""


class ResolutionError(ValueError):
    """Interface too close to a fixed wall for the grid to resolve."""


@dataclass(frozen=True)
class PeriodicGrid:
    """Tensor grid on the periodic strip [0, period) x [0, height_cap]."""

    n_x: int
    n_y: int
    period: float
    height_cap: float

    def __post_init__(self):
        if self.n_x < 8 or self.n_y < 8:
            raise ValueError("grid needs n_x >= 8 and n_y >= 8")
        if not (self.period > 0.0 and self.height_cap > 0.0):
            raise ValueError("period and height_cap must be positive")

    @property
    def dx(self) -> float:
        return self.period / self.n_x

    @property
    def dy(self) -> float:
        return self.height_cap / self.n_y

    def x_nodes(self) -> FloatArray:
        return self.dx * np.arange(self.n_x)

    def y_nodes(self) -> FloatArray:
        return self.dy * np.arange(self.n_y + 1)


@dataclass(frozen=True)
class GraphInterface:
    """Height samples f_i of the interface graph, with its phase band.

    Parameters
    ----------
    values : array of n_x heights
    grid : PeriodicGrid
    delta : lower band bound; samples must satisfy delta <= f_i <= upper,
        where upper = height_cap - delta (for two-phase strips height_cap
        is the strip height L).
    two_phase : whether the grid is a two-phase strip (enables the
        negative-phase domain; height_cap is then the strip height L).
    """

    values: FloatArray
    grid: PeriodicGrid
    delta: float
    two_phase: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.n_x,):
            raise ValueError(f"expected {self.grid.n_x} samples, got {v.shape}")
        object.__setattr__(self, "values", v)
        if self.delta < 0.0:
            raise ValueError("delta must be nonnegative")
        self.validate()

    @property
    def upper(self) -> float:
        return self.grid.height_cap - self.delta

    @property
    def L(self) -> float:
        if not self.two_phase:
            raise ValueError("L is defined only for two-phase strips")
        return self.grid.height_cap

    def validate(self) -> None:
        v = self.values
        if not np.all(np.isfinite(v)):
            raise BandViolationError("interface samples must be finite")
        bad = np.flatnonzero((v < self.delta) | (v > self.upper))
        if bad.size:
            raise BandViolationError(
                f"{bad.size} samples outside [{self.delta}, {self.upper}]; "
                f"first offending column {bad[0]}"
            )

    def with_values(self, values: FloatArray) -> "GraphInterface":
        return GraphInterface(values, self.grid, self.delta, self.two_phase)


@dataclass(frozen=True)
class LegSet:
    """Per-interior-node legs in one stencil direction.

    theta is the fractional leg length in (0, 1] (1 when the neighbor is a
    grid node); kind classifies the far end; nb is the neighbor's unknown
    index for LEG_INTERIOR legs and -1 otherwise; (x_cross, y_cross) is the
    Dirichlet evaluation point for non-interior legs and NaN otherwise.
    """

    theta: FloatArray
    kind: np.ndarray
    nb: np.ndarray
    x_cross: FloatArray
    y_cross: FloatArray


@dataclass(frozen=True)
class InterfacePoints:
    x: FloatArray
    y: FloatArray
    normals: FloatArray  # (n_x, 2), unit, pointing into the domain's phase


@dataclass(frozen=True)
class CutCellDomain:
    """Interior mask plus cut legs for one phase under/above a graph."""

    phase: str
    grid: PeriodicGrid
    f: GraphInterface
    interior_mask: np.ndarray        # (n_y+1, n_x) bool
    node_index: np.ndarray           # (n_y+1, n_x) int, -1 outside
    rows: np.ndarray                 # j per unknown
    cols: np.ndarray                 # i per unknown
    cut_legs: dict                   # "east"/"west"/"north"/"south" -> LegSet
    interface_points: InterfacePoints
    boundary_rows: dict              # {"bottom": 0} or {"top": n_y}
    collapsed: np.ndarray            # bool per unknown: has a degenerate leg
    collapse_count: int              # number of degenerate legs (diagnostic)
    _diag_legs: Optional[dict] = field(default=None, compare=False, repr=False)

    @property
    def n_nodes(self) -> int:
        return self.rows.size

    def diagonal_legs(self) -> dict:
        """Legs along the grid diagonals, built lazily (policy solves only)."""
        if self._diag_legs is None:
            legs = {
                name: _build_legs(self, dj, di)
                for name, (dj, di) in _DIAG_DIRECTIONS.items()
            }
            object.__setattr__(self, "_diag_legs", legs)
        return self._diag_legs


_AXIS_DIRECTIONS = {
    "east": (0, 1),
    "west": (0, -1),
    "north": (1, 0),
    "south": (-1, 0),
}

_DIAG_DIRECTIONS = {
    "ne": (1, 1),
    "sw": (-1, -1),
    "nw": (1, -1),
    "se": (-1, 1),
}


def graph_gradient(f: GraphInterface) -> FloatArray:
    """Periodic central differences of the height samples."""
    v = f.values
    return (np.roll(v, -1) - np.roll(v, 1)) / (2.0 * f.grid.dx)


def interface_normal(f: GraphInterface, i: int) -> FloatArray:
    """Unit normal at column i pointing into the positive phase below.

    With f' the periodic central difference, the inward normal to
    0 < y < f(x) at (x_i, f_i) is (f'_i, -1)/sqrt(1 + f'_i^2).
    """
    fp = graph_gradient(f)[i]
    n = np.array([fp, -1.0])
    return n / np.hypot(fp, 1.0)


def _level(f: GraphInterface, phase: str) -> FloatArray:
    # Negative strictly inside the phase, by construction.
    y = f.grid.y_nodes()
    if phase == "positive":
        return y[:, None] - f.values[None, :]
    return f.values[None, :] - y[:, None]


def _build_legs(domain: "CutCellDomain", dj: int, di: int) -> LegSet:
    """Classify the legs from each interior node in direction (dj, di).

    The level function s (negative inside the phase) is linear along any
    single leg, including diagonals, because f is linearly interpolated
    between adjacent columns; the interface crossing is t = s0/(s0 - s1).
    """
    grid = domain.grid
    n_x, n_y = grid.n_x, grid.n_y
    s = _level(domain.f, domain.phase)
    J, I = domain.rows, domain.cols
    Jn = J + dj
    In = (I + di) % n_x

    N = J.size
    kind = np.full(N, LEG_INTERFACE, dtype=np.int8)
    theta = np.ones(N)
    nb = np.full(N, -1, dtype=np.int64)
    x_cross = np.full(N, np.nan)
    y_cross = np.full(N, np.nan)

    if domain.phase == "positive" and dj < 0:
        fixed = Jn == 0
        fixed_kind, fixed_y = LEG_BOTTOM, 0.0
    elif domain.phase == "negative" and dj > 0:
        fixed = Jn == n_y
        fixed_kind, fixed_y = LEG_TOP, grid.height_cap
    else:
        fixed = np.zeros(N, dtype=bool)
        fixed_kind, fixed_y = LEG_BOTTOM, 0.0

    interior_nb = domain.interior_mask[Jn, In] & ~fixed
    cross = ~fixed & ~interior_nb

    kind[fixed] = fixed_kind
    x_cross[fixed] = grid.x_nodes()[In[fixed]]
    y_cross[fixed] = fixed_y

    kind[interior_nb] = LEG_INTERIOR
    nb[interior_nb] = domain.node_index[Jn, In][interior_nb]

    if np.any(cross):
        s0 = s[J[cross], I[cross]]
        s1 = s[Jn[cross], In[cross]]
        # s0 < 0 <= s1 here, so t is well defined and lies in (0, 1].
        t = s0 / (s0 - s1)
        theta[cross] = t
        x_cross[cross] = (grid.x_nodes()[I[cross]] + di * t * grid.dx) % grid.period
        y_cross[cross] = grid.y_nodes()[J[cross]] + dj * t * grid.dy
    return LegSet(theta, kind, nb, x_cross, y_cross)


def build_domain(f: GraphInterface, phase: str = "positive") -> CutCellDomain:
    """Build the cut-cell discretization of one phase under/above f.

    Parameters
    ----------
    f : GraphInterface satisfying its band invariants.
    phase : "positive" for 0 < y < f(x), "negative" for f(x) < y < L
        (two-phase strips only).

    Raises
    ------
    BandViolationError : samples outside [delta, upper].
    ResolutionError : interface closer than 2*dy to a fixed wall.
    """
    if phase not in ("positive", "negative"):
        raise ValueError(f"unknown phase {phase!r}")
    if phase == "negative" and not f.two_phase:
        raise ValueError("negative phase requires a two-phase strip")
    f.validate()
    grid = f.grid
    v = f.values
    margin = MARGIN_CELLS * grid.dy
    if v.min() < margin or v.max() > grid.height_cap - margin:
        raise ResolutionError(
            "resolution insufficient: interface within "
            f"{MARGIN_CELLS} cells of a fixed wall (need {margin:.3g} "
            f"<= f <= {grid.height_cap - margin:.3g})"
        )

    s = _level(f, phase)
    interior = s < 0.0
    interior[0, :] = False
    interior[grid.n_y, :] = False

    node_index = np.full((grid.n_y + 1, grid.n_x), -1, dtype=np.int64)
    J, I = np.nonzero(interior)  # row-major: keeps matrix bandwidth ~ n_x
    node_index[J, I] = np.arange(J.size)

    fp = graph_gradient(f)
    norm = np.hypot(fp, 1.0)
    if phase == "positive":
        normals = np.stack([fp / norm, -1.0 / norm], axis=1)
        boundary_rows = {"bottom": 0}
    else:
        normals = np.stack([-fp / norm, 1.0 / norm], axis=1)
        boundary_rows = {"top": grid.n_y}
    points = InterfacePoints(x=grid.x_nodes(), y=v.copy(), normals=normals)

    domain = CutCellDomain(
        phase=phase,
        grid=grid,
        f=f,
        interior_mask=interior,
        node_index=node_index,
        rows=J,
        cols=I,
        cut_legs={},
        interface_points=points,
        boundary_rows=boundary_rows,
        collapsed=np.zeros(J.size, dtype=bool),
        collapse_count=0,
    )
    legs = {
        name: _build_legs(domain, dj, di)
        for name, (dj, di) in _AXIS_DIRECTIONS.items()
    }
    collapsed = np.zeros(J.size, dtype=bool)
    count = 0
    for leg in legs.values():
        degenerate = (leg.kind == LEG_INTERFACE) & (leg.theta < THETA_COLLAPSE)
        count += int(degenerate.sum())
        collapsed |= degenerate
    object.__setattr__(domain, "cut_legs", legs)
    object.__setattr__(domain, "collapsed", collapsed)
    object.__setattr__(domain, "collapse_count", count)
    return domain
