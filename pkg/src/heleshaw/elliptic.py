"""Monotone cut-cell solves of the bulk Dirichlet problems.

The Laplace path assembles a Shortley-Weller five-point stencil: along each
axis the second derivative at an interior node with fractional legs
theta_m, theta_p of spacing h is approximated by

    u'' ~= (2/h^2) * ( u_m/(th_m(th_m+th_p)) + u_p/(th_p(th_m+th_p))
                       - u_0/(th_m th_p) ),

which vanishes identically on affine data and keeps an M-matrix sign
pattern. Rows are normalized by their diagonal, so residual contracts are
stated in the normalized max norm.

The Pucci extremal operators are solved by policy (Howard) iteration over a
finite family of orthonormal frames (grid axes and grid diagonals) with
per-direction coefficients chosen from {lam, Lam}; every policy step is a
monotone linear solve of the same cut-cell kind.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .geometry import (
    LEG_BOTTOM,
    LEG_INTERFACE,
    LEG_INTERIOR,
    LEG_TOP,
    CutCellDomain,
    FloatArray,
)

BCValue = Union[float, Callable[[FloatArray, FloatArray], FloatArray]]

_LINEAR_REFINE_CAP = 30
_POLICY_CAP = 60


class NonConvergenceError(RuntimeError):
    """A solve failed to reach its residual contract."""

    def __init__(self, message: str, residual: float = np.nan, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history or [])


@dataclass(frozen=True)
class EllipticOperatorSpec:
    """Which bulk operator to solve: laplace | pucci_plus | pucci_minus."""

    kind: str = "laplace"
    lam: float = 1.0
    Lam: float = 1.0

    def __post_init__(self):
        if self.kind not in ("laplace", "pucci_plus", "pucci_minus"):
            raise ValueError(f"unknown operator kind {self.kind!r}")
        if self.kind == "laplace" and (self.lam, self.Lam) != (1.0, 1.0):
            raise ValueError("laplace fixes lam = Lam = 1")
        if not (0.0 < self.lam <= self.Lam):
            raise ValueError("need 0 < lam <= Lam")


@dataclass(frozen=True)
class BoundaryData:
    """Dirichlet data per boundary piece; constants or callables (x, y)."""

    bottom: Optional[BCValue] = 1.0
    interface: BCValue = 0.0
    top: Optional[BCValue] = None

    def piece(self, code: int) -> BCValue:
        if code == LEG_INTERFACE:
            return self.interface
        if code == LEG_BOTTOM:
            if self.bottom is None:
                raise ValueError("bottom boundary data required but not set")
            return self.bottom
        if code == LEG_TOP:
            if self.top is None:
                raise ValueError("top boundary data required but not set")
            return self.top
        raise ValueError(f"not a Dirichlet leg code: {code}")

    def evaluate(self, code: int, x: FloatArray, y: FloatArray) -> FloatArray:
        val = self.piece(code)
        if callable(val):
            return np.asarray(val(np.asarray(x), np.asarray(y)), dtype=float)
        return np.full(np.shape(x), float(val))


@dataclass(frozen=True)
class DiscreteSystem:
    """Diagonally normalized rows of the assembled elliptic operator."""

    matrix: sp.csr_matrix
    rhs: FloatArray
    domain: CutCellDomain
    bc: BoundaryData
    collapse_count: int


@dataclass(frozen=True)
class BulkField:
    """Discrete bulk solution with its residual metadata."""

    values: FloatArray
    domain: CutCellDomain
    bc: BoundaryData
    residual: float
    iterations: int

    def grid_values(self, fill: float = np.nan) -> FloatArray:
        out = np.full(self.domain.interior_mask.shape, fill)
        out[self.domain.rows, self.domain.cols] = self.values
        return out


def _dirichlet_leg_values(bc: BoundaryData, leg, mask: np.ndarray) -> FloatArray:
    out = np.zeros(int(mask.sum()))
    kinds = leg.kind[mask]
    xs = leg.x_cross[mask]
    ys = leg.y_cross[mask]
    for code in (LEG_INTERFACE, LEG_BOTTOM, LEG_TOP):
        m = kinds == code
        if m.any():
            out[m] = bc.evaluate(code, xs[m], ys[m])
    return out


def _interface_value_at_nodes(domain: CutCellDomain, bc: BoundaryData,
                              which: np.ndarray) -> FloatArray:
    x = domain.grid.x_nodes()[domain.cols[which]]
    y = domain.grid.y_nodes()[domain.rows[which]]
    return bc.evaluate(LEG_INTERFACE, x, y)


def _assemble(domain: CutCellDomain, bc: BoundaryData, pairs) -> DiscreteSystem:
    """Sum weighted Shortley-Weller pairs into a normalized M-matrix system.

    pairs: iterable of (leg_minus, leg_plus, h, w) with w an (N,) weight
    array (zero weight skips the pair at that node). Nodes flagged as
    collapsed get an identity row pinned to the interface Dirichlet value.
    """
    N = domain.n_nodes
    diag = np.zeros(N)
    rhs = np.zeros(N)
    rows_all = []
    cols_all = []
    data_all = []
    live = ~domain.collapsed

    for leg_m, leg_p, h, w in pairs:
        th_m, th_p = leg_m.theta, leg_p.theta
        denom = th_m + th_p
        base = 2.0 / (h * h)
        c_m = base / (th_m * denom)
        c_p = base / (th_p * denom)
        diag += w * base / (th_m * th_p)
        for leg, c in ((leg_m, c_m), (leg_p, c_p)):
            wc = w * c
            active = (wc > 0.0) & live
            off = active & (leg.kind == LEG_INTERIOR)
            if off.any():
                rows_all.append(np.flatnonzero(off))
                cols_all.append(leg.nb[off])
                data_all.append(-wc[off])
            dirich = active & (leg.kind != LEG_INTERIOR)
            if dirich.any():
                rhs[dirich] += wc[dirich] * _dirichlet_leg_values(bc, leg, dirich)

    if domain.collapsed.any():
        diag[domain.collapsed] = 1.0
        rhs[domain.collapsed] = _interface_value_at_nodes(
            domain, bc, domain.collapsed
        )

    # normalize rows by the diagonal
    rhs = rhs / diag
    idx = np.arange(N)
    if rows_all:
        rows = np.concatenate(rows_all)
        cols = np.concatenate(cols_all)
        data = np.concatenate(data_all) / diag[rows]
        rows = np.concatenate([rows, idx])
        cols = np.concatenate([cols, idx])
        data = np.concatenate([data, np.ones(N)])
    else:
        rows, cols, data = idx, idx, np.ones(N)
    matrix = sp.coo_matrix((data, (rows, cols)), shape=(N, N)).tocsr()
    return DiscreteSystem(matrix, rhs, domain, bc, domain.collapse_count)


def assemble_laplace(domain: CutCellDomain, bc: BoundaryData) -> DiscreteSystem:
    """Shortley-Weller five-point system for -Delta u = 0 with Dirichlet bc."""
    ones = np.ones(domain.n_nodes)
    legs = domain.cut_legs
    pairs = [
        (legs["west"], legs["east"], domain.grid.dx, ones),
        (legs["south"], legs["north"], domain.grid.dy, ones),
    ]
    return _assemble(domain, bc, pairs)


def solve_linear(system: DiscreteSystem, tol: float = 1e-10) -> BulkField:
    """Direct solve plus iterative refinement to the residual contract.

    Deterministic: a fixed factorization and a fixed refinement schedule.
    Raises NonConvergenceError if the normalized max-norm residual is still
    above tol after the refinement cap.
    """
    A = system.matrix.tocsc()
    lu = spla.splu(A, permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})
    b = system.rhs
    x = lu.solve(b)
    iterations = 1
    r = b - A @ x
    res = float(np.max(np.abs(r))) if r.size else 0.0
    while res > tol:
        if iterations >= _LINEAR_REFINE_CAP:
            raise NonConvergenceError(
                f"linear solve non-convergence: residual {res:.3e} > tol {tol:.3e}",
                residual=res,
            )
        x = x + lu.solve(r)
        iterations += 1
        r = b - A @ x
        res = float(np.max(np.abs(r)))
    return BulkField(x, system.domain, system.bc, res, iterations)


def pucci_eval(eigs, lam: float, Lam: float, sign: str) -> float:
    """Extremal operator value from Hessian eigenvalues.

    minus: Lam * sum(e <= 0) + lam * sum(e > 0)
    plus:  lam * sum(e <= 0) + Lam * sum(e > 0)
    """
    e = np.asarray(eigs, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError("eigenvalues must be finite")
    neg = e[e <= 0.0].sum()
    pos = e[e > 0.0].sum()
    if sign == "minus":
        return float(Lam * neg + lam * pos)
    if sign == "plus":
        return float(lam * neg + Lam * pos)
    raise ValueError(f"sign must be 'plus' or 'minus', got {sign!r}")


def _leg_values(u: FloatArray, leg, bc: BoundaryData) -> FloatArray:
    """Neighbor values along one leg set: unknowns or Dirichlet data."""
    vals = np.empty(u.shape[0])
    interior = leg.kind == LEG_INTERIOR
    vals[interior] = u[leg.nb[interior]]
    dirich = ~interior
    if dirich.any():
        vals[dirich] = _dirichlet_leg_values(bc, leg, dirich)
    return vals


def _second_difference(u, leg_m, leg_p, h, bc):
    """Shortley-Weller directional second difference and its diagonal scale."""
    u_m = _leg_values(u, leg_m, bc)
    u_p = _leg_values(u, leg_p, bc)
    th_m, th_p = leg_m.theta, leg_p.theta
    denom = th_m + th_p
    base = 2.0 / (h * h)
    d2 = base * (u_m / (th_m * denom) + u_p / (th_p * denom) - u / (th_m * th_p))
    return d2, base / (th_m * th_p)


def _policy_pairs(domain: CutCellDomain):
    legs = domain.cut_legs
    diag = domain.diagonal_legs()
    ell = float(np.hypot(domain.grid.dx, domain.grid.dy))
    return (
        (legs["west"], legs["east"], domain.grid.dx),
        (legs["south"], legs["north"], domain.grid.dy),
        (diag["sw"], diag["ne"], ell),
        (diag["se"], diag["nw"], ell),
    )


def solve_bulk(domain: CutCellDomain, opspec: EllipticOperatorSpec,
               bc: BoundaryData, tol: float = 1e-10) -> BulkField:
    """Solve F(D^2 U) = 0 on the domain with Dirichlet data bc.

    laplace dispatches to assemble_laplace + solve_linear. With lam == Lam a
    Pucci operator is lam * Laplacian, whose zero set is the Laplace
    solution, so it takes the same path. Otherwise Howard policy iteration
    runs over the axes/diagonals frames; convergence is declared when the
    normalized nonlinear residual (the diagonally scaled discrete extremal
    value, max over nodes) is at most tol.
    """
    if opspec.kind == "laplace" or opspec.lam == opspec.Lam:
        return solve_linear(assemble_laplace(domain, bc), tol)

    grid = domain.grid
    if abs(grid.dx - grid.dy) > 1e-12 * grid.dx:
        raise ValueError("pucci solves need square cells (dx == dy)")
    maximize = opspec.kind == "pucci_plus"
    lam, Lam = opspec.lam, opspec.Lam
    N = domain.n_nodes
    pairs = _policy_pairs(domain)
    live = ~domain.collapsed

    frame = np.zeros(N, dtype=np.int8)
    a1 = np.full(N, lam)
    a2 = np.full(N, lam)
    history = []
    field = None
    for iteration in range(_POLICY_CAP):
        weights = [
            np.where(frame == 0, a1, 0.0),
            np.where(frame == 0, a2, 0.0),
            np.where(frame == 1, a1, 0.0),
            np.where(frame == 1, a2, 0.0),
        ]
        system = _assemble(
            domain, bc,
            [(m, p, h, w) for (m, p, h), w in zip(pairs, weights)],
        )
        field = solve_linear(system, tol=min(tol, 1e-12))
        u = field.values

        d2 = []
        scales = []
        for leg_m, leg_p, h in pairs:
            v, s = _second_difference(u, leg_m, leg_p, h, bc)
            d2.append(v)
            scales.append(s)
        if maximize:
            best = [np.where(v > 0.0, Lam, lam) for v in d2]
        else:
            best = [np.where(v > 0.0, lam, Lam) for v in d2]
        val_axes = best[0] * d2[0] + best[1] * d2[1]
        val_diag = best[2] * d2[2] + best[3] * d2[3]
        scale_axes = best[0] * scales[0] + best[1] * scales[1]
        scale_diag = best[2] * scales[2] + best[3] * scales[3]
        if maximize:
            pick_diag = val_diag > val_axes
        else:
            pick_diag = val_diag < val_axes
        value = np.where(pick_diag, val_diag, val_axes)
        scale = np.where(pick_diag, scale_diag, scale_axes)
        residual = float(np.max(np.abs(value[live]) / scale[live])) if live.any() else 0.0
        history.append(residual)
        if residual <= tol:
            return BulkField(u, domain, bc, residual, iteration + 1)
        frame = pick_diag.astype(np.int8)
        a1 = np.where(pick_diag, best[2], best[0])
        a2 = np.where(pick_diag, best[3], best[1])
    raise NonConvergenceError(
        f"policy iteration non-convergence after {_POLICY_CAP} steps",
        residual=history[-1],
        history=history,
    )
