"""Free boundary operators: inward normal derivatives of bulk solutions.

The one-phase operator I(f) solves the bulk problem under the graph (bottom
data 1, interface data 0) and returns the inward normal derivative at each
interface column. The negative-phase operator I-(f) solves above the graph
(interface 0, top wall -1) and returns the derivative along the inward
normal of the upper phase, normalized to be nonnegative. The two-phase
operator H(f) = G(I+(f), I-(f)) combines both through a monotone balance
law G.

Normal derivatives are probed by one-sided differences along the inward
normal with step h = min(dx, dy); probe values come from bilinear
interpolation of the bulk field, with Dirichlet data filling any corner
that is not an unknown.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .elliptic import (
    BoundaryData,
    BulkField,
    EllipticOperatorSpec,
    solve_bulk,
)
from .geometry import CutCellDomain, GraphInterface, build_domain, graph_gradient

LAPLACE = EllipticOperatorSpec("laplace")

# fluxes more negative than this indicate a broken solve, not roundoff
_FLUX_FLOOR = -1e-8


class ProbeOutOfPhaseError(RuntimeError):
    """A probe point left its phase (interface too steep for the grid)."""


@dataclass(frozen=True)
class VelocityLaw:
    """Interface balance law g(a) or G(a, b) with declared slope bounds.

    The declared bounds state lambda0 <= dG/da <= Lambda0 and
    lambda0 <= -dG/db <= Lambda0 on the intended operating box; use
    check_monotonicity to validate them by sampling.
    """

    arity: str  # "one_phase" | "two_phase"
    fn: Callable
    lambda0: float
    Lambda0: float
    name: str = ""

    def __post_init__(self):
        if self.arity not in ("one_phase", "two_phase"):
            raise ValueError(f"unknown arity {self.arity!r}")
        if not (0.0 < self.lambda0 <= self.Lambda0):
            raise ValueError("need 0 < lambda0 <= Lambda0")

    def __call__(self, a, b=None):
        if self.arity == "one_phase":
            return self.fn(a)
        if b is None:
            raise ValueError("two-phase law needs both fluxes")
        return self.fn(a, b)


def identity_law() -> VelocityLaw:
    return VelocityLaw("one_phase", lambda a: np.asarray(a, dtype=float), 1.0, 1.0, "identity")


def difference_law() -> VelocityLaw:
    return VelocityLaw("two_phase", lambda a, b: np.asarray(a) - np.asarray(b), 1.0, 1.0, "difference")


def squares_law(a_lo: float = 0.2, a_hi: float = 5.0) -> VelocityLaw:
    """G(a, b) = a^2 - b^2; monotone with slopes 2a, 2b on [a_lo, a_hi]^2."""
    if not (0.0 < a_lo < a_hi):
        raise ValueError("need 0 < a_lo < a_hi")
    return VelocityLaw(
        "two_phase",
        lambda a, b: np.square(np.asarray(a, dtype=float)) - np.square(np.asarray(b, dtype=float)),
        2.0 * a_lo,
        2.0 * a_hi,
        "squares",
    )


def table_law(a_points, a_values, lambda0, Lambda0,
              b_points=None, b_values=None, name="table") -> VelocityLaw:
    """Piecewise-linear law from sample tables.

    One table gives a one-phase g(a); a second table makes the two-phase
    G(a, b) = g_a(a) - g_b(b). The declared bounds are trusted only on the
    covered box; np.interp clamps outside it.
    """
    ap = np.asarray(a_points, dtype=float)
    av = np.asarray(a_values, dtype=float)
    if ap.ndim != 1 or ap.shape != av.shape or ap.size < 2:
        raise ValueError("table needs matching 1-d point/value arrays, length >= 2")
    if np.any(np.diff(ap) <= 0):
        raise ValueError("table points must be strictly increasing")
    if b_points is None:
        return VelocityLaw("one_phase", lambda a: np.interp(a, ap, av),
                           lambda0, Lambda0, name)
    bp = np.asarray(b_points, dtype=float)
    bv = np.asarray(b_values, dtype=float)
    if bp.ndim != 1 or bp.shape != bv.shape or bp.size < 2:
        raise ValueError("table needs matching 1-d point/value arrays, length >= 2")
    if np.any(np.diff(bp) <= 0):
        raise ValueError("table points must be strictly increasing")
    return VelocityLaw(
        "two_phase",
        lambda a, b: np.interp(a, ap, av) - np.interp(b, bp, bv),
        lambda0, Lambda0, name,
    )


def check_monotonicity(law: VelocityLaw, a_range=(0.2, 5.0), b_range=None,
                       n: int = 21, tol: float = 1e-6) -> dict:
    """Sample finite-difference slopes of the law over a probe lattice.

    Raises ValueError if any sampled slope leaves
    [lambda0 - tol, Lambda0 + tol]; returns the observed slope ranges.
    """
    a = np.linspace(a_range[0], a_range[1], n)
    h = (a_range[1] - a_range[0]) / (4 * n)
    if law.arity == "one_phase":
        slopes = (law(a + h) - law(a - h)) / (2 * h)
        observed = {"dg_da": (float(slopes.min()), float(slopes.max()))}
        bad = (slopes < law.lambda0 - tol) | (slopes > law.Lambda0 + tol)
    else:
        if b_range is None:
            b_range = a_range
        b = np.linspace(b_range[0], b_range[1], n)
        A, B = np.meshgrid(a, b, indexing="ij")
        da = (law(A + h, B) - law(A - h, B)) / (2 * h)
        db = -(law(A, B + h) - law(A, B - h)) / (2 * h)
        observed = {
            "dG_da": (float(da.min()), float(da.max())),
            "-dG_db": (float(db.min()), float(db.max())),
        }
        bad = (
            (da < law.lambda0 - tol) | (da > law.Lambda0 + tol)
            | (db < law.lambda0 - tol) | (db > law.Lambda0 + tol)
        )
    if np.any(bad):
        raise ValueError(
            f"law {law.name!r} violates declared slope bounds "
            f"[{law.lambda0}, {law.Lambda0}]: observed {observed}"
        )
    return observed


@dataclass(frozen=True)
class InterfaceFluxes:
    """Per-column interface fluxes; i_minus is None for one-phase runs."""

    i_plus: np.ndarray
    i_minus: Optional[np.ndarray]
    order: int
    clipped: tuple = ()  # columns where the order-2 probe fell back to order-1


def _corner_values(field: BulkField, jj: np.ndarray, ii: np.ndarray) -> np.ndarray:
    """Values at grid nodes: unknowns, wall data, or interface data."""
    domain = field.domain
    grid = domain.grid
    bc = field.bc
    out = np.empty(jj.shape)
    idx = domain.node_index[jj, ii]
    interior = idx >= 0
    out[interior] = field.values[idx[interior]]
    rest = ~interior
    if rest.any():
        x = grid.x_nodes()[ii[rest]]
        y = grid.y_nodes()[jj[rest]]
        vals = bc.evaluate(1, x, y)  # LEG_INTERFACE data by default
        if "bottom" in domain.boundary_rows:
            m = jj[rest] == 0
            if m.any():
                vals[m] = bc.evaluate(2, x[m], y[m])
        if "top" in domain.boundary_rows:
            m = jj[rest] == grid.n_y
            if m.any():
                vals[m] = bc.evaluate(3, x[m], y[m])
        out[rest] = vals
    return out


def _interp(field: BulkField, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Bilinear interpolation of the bulk field at points (px, py)."""
    grid = field.domain.grid
    gx = (px % grid.period) / grid.dx
    i0 = np.floor(gx).astype(np.int64) % grid.n_x
    fx = gx - np.floor(gx)
    i1 = (i0 + 1) % grid.n_x
    gy = py / grid.dy
    j0 = np.clip(np.floor(gy).astype(np.int64), 0, grid.n_y - 1)
    fy = gy - j0
    j1 = j0 + 1
    v00 = _corner_values(field, j0, i0)
    v01 = _corner_values(field, j0, i1)
    v10 = _corner_values(field, j1, i0)
    v11 = _corner_values(field, j1, i1)
    return (
        v00 * (1 - fx) * (1 - fy)
        + v01 * fx * (1 - fy)
        + v10 * (1 - fx) * fy
        + v11 * fx * fy
    )


def _in_phase(domain: CutCellDomain, px: np.ndarray, py: np.ndarray) -> np.ndarray:
    """Strict membership of points in the domain's phase (f interpolated)."""
    grid = domain.grid
    v = domain.f.values
    gx = (px % grid.period) / grid.dx
    i0 = np.floor(gx).astype(np.int64) % grid.n_x
    fx = gx - np.floor(gx)
    f_at = v[i0] * (1 - fx) + v[(i0 + 1) % grid.n_x] * fx
    if domain.phase == "positive":
        return (py > 0.0) & (py < f_at)
    return (py > f_at) & (py < grid.height_cap)


def _probe_columns(field: BulkField, domain: CutCellDomain, columns: np.ndarray,
                   order: int):
    """Directional derivative along the inward normal at the given columns.

    Returns (values, clipped): order-2 probes whose second point exits the
    phase fall back to order-1 at that column and are reported in clipped.
    A first probe point out of phase raises ProbeOutOfPhaseError.
    """
    if order not in (1, 2):
        raise ValueError("probe order must be 1 or 2")
    grid = domain.grid
    h = min(grid.dx, grid.dy)
    pts = domain.interface_points
    x0 = pts.x[columns]
    y0 = pts.y[columns]
    nx = pts.normals[columns, 0]
    ny = pts.normals[columns, 1]

    p1x, p1y = x0 + h * nx, y0 + h * ny
    ok1 = _in_phase(domain, p1x, p1y)
    if not np.all(ok1):
        bad = columns[~ok1]
        raise ProbeOutOfPhaseError(
            f"probe out of phase at columns {bad.tolist()[:8]}"
        )
    u0 = field.bc.evaluate(1, x0, y0)  # interface data at the base point
    u1 = _interp(field, p1x, p1y)
    first = (u1 - u0) / h
    if order == 1:
        return first, ()

    p2x, p2y = x0 + 2 * h * nx, y0 + 2 * h * ny
    ok2 = _in_phase(domain, p2x, p2y)
    u2 = _interp(field, p2x, p2y)
    second = (4.0 * u1 - u2 - 3.0 * u0) / (2.0 * h)
    values = np.where(ok2, second, first)
    clipped = tuple(int(c) for c in columns[~ok2])
    return values, clipped


def normal_derivative_probe(field: BulkField, domain: CutCellDomain, i: int,
                            order: int = 2) -> float:
    """One-column probe of the inward normal derivative at (x_i, f_i)."""
    values, clipped = _probe_columns(field, domain, np.array([i]), order)
    if clipped:
        raise ProbeOutOfPhaseError(f"second probe point out of phase at column {i}")
    return float(values[0])


def op_I(f: GraphInterface, opspec: EllipticOperatorSpec = LAPLACE,
         order: int = 2, tol: float = 1e-10) -> InterfaceFluxes:
    """One-phase operator: solve under the graph and probe every column."""
    domain = build_domain(f, "positive")
    bc = BoundaryData(bottom=1.0, interface=0.0)
    field = solve_bulk(domain, opspec, bc, tol)
    columns = np.arange(f.grid.n_x)
    values, clipped = _probe_columns(field, domain, columns, order)
    if values.min() < _FLUX_FLOOR:
        raise RuntimeError(
            f"negative interface flux {values.min():.3e}; solve is inconsistent"
        )
    return InterfaceFluxes(values, None, order, clipped)


def op_I_minus(f: GraphInterface, opspec: EllipticOperatorSpec = LAPLACE,
               order: int = 2, tol: float = 1e-10) -> np.ndarray:
    """Negative-phase operator: solve above the graph, return -d_{n-}U >= 0."""
    domain = build_domain(f, "negative")
    bc = BoundaryData(bottom=None, interface=0.0, top=-1.0)
    field = solve_bulk(domain, opspec, bc, tol)
    columns = np.arange(f.grid.n_x)
    values, _ = _probe_columns(field, domain, columns, order)
    result = -values
    if result.min() < _FLUX_FLOOR:
        raise RuntimeError(
            f"negative upper-phase flux {result.min():.3e}; solve is inconsistent"
        )
    return result


def op_H(f: GraphInterface, law: VelocityLaw,
         opspec_plus: EllipticOperatorSpec = LAPLACE,
         opspec_minus: Optional[EllipticOperatorSpec] = None,
         order: int = 2, tol: float = 1e-10) -> np.ndarray:
    """Two-phase operator H(f) = G(I+(f), I-(f)) per column."""
    if law.arity != "two_phase":
        raise ValueError("op_H needs a two-phase law")
    i_plus = op_I(f, opspec_plus, order, tol).i_plus
    i_minus = op_I_minus(f, opspec_minus or opspec_plus, order, tol)
    _require_positive_fluxes(i_plus, i_minus)
    return np.asarray(law(i_plus, i_minus), dtype=float)


def _require_positive_fluxes(i_plus, i_minus, floor: float = 1e-10):
    if np.min(i_plus) <= floor or (i_minus is not None and np.min(i_minus) <= floor):
        raise ValueError(
            "interface fluxes left the balance law's positive domain "
            f"(min I+ {np.min(i_plus):.3e}, min I- "
            f"{np.min(i_minus) if i_minus is not None else np.nan:.3e})"
        )


def interface_velocity(f: GraphInterface, law: VelocityLaw,
                       fluxes: InterfaceFluxes) -> np.ndarray:
    """Graph velocity: G(fluxes) times the metric factor sqrt(1 + |f'|^2)."""
    factor = np.sqrt(1.0 + graph_gradient(f) ** 2)
    if law.arity == "one_phase":
        return np.asarray(law(fluxes.i_plus), dtype=float) * factor
    if fluxes.i_minus is None:
        raise ValueError("two-phase law needs i_minus fluxes")
    return np.asarray(law(fluxes.i_plus, fluxes.i_minus), dtype=float) * factor
