"""Forward-Euler evolution of the interface height under a velocity law.

Each step evaluates the interface fluxes at the current height, forms the
graph velocity, and advances f explicitly. The step size obeys
dt = min(dt_max, cfl * dx / max(1, max |velocity|)) and the final step is
shortened to land exactly on T. Runs are deterministic for fixed inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .elliptic import EllipticOperatorSpec
from .fboperator import (
    LAPLACE,
    InterfaceFluxes,
    VelocityLaw,
    interface_velocity,
    op_I,
    op_I_minus,
)
from .geometry import GraphInterface


class PhaseBandViolationError(RuntimeError):
    """The height left the admissible band during a step."""

    def __init__(self, t: float, columns):
        self.t = t
        self.columns = tuple(int(c) for c in columns)
        super().__init__(
            f"height left the admissible band at t={t:.6g}, "
            f"columns {self.columns[:8]}"
        )


@dataclass(frozen=True)
class EvolutionConfig:
    T: float
    law: VelocityLaw
    opspec: EllipticOperatorSpec = LAPLACE
    opspec_minus: Optional[EllipticOperatorSpec] = None
    cfl: float = 0.4
    dt_max: float = np.inf
    frame_stride: int = 1
    order: int = 2
    tol: float = 1e-10

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("need T > 0")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError("need 0 < cfl <= 1")
        if not self.dt_max > 0:
            raise ValueError("need dt_max > 0")
        if self.frame_stride < 1:
            raise ValueError("need frame_stride >= 1")


@dataclass(frozen=True)
class Frame:
    """Evolution snapshot; stats['dt'] is the step size that produced it."""

    t: float
    f: np.ndarray
    fluxes: InterfaceFluxes
    rhs: np.ndarray
    stats: dict


def frame_stats(values: np.ndarray, dx: float, dt: float) -> dict:
    return {
        "f_min": float(values.min()),
        "f_max": float(values.max()),
        "lipschitz": float(np.max(np.abs(np.roll(values, -1) - values)) / dx),
        "dt": float(dt),
    }


def _evaluate(f: GraphInterface, config: EvolutionConfig):
    """Fluxes and graph velocity at the current height."""
    if config.law.arity == "one_phase":
        fluxes = op_I(f, config.opspec, config.order, config.tol)
    else:
        plus = op_I(f, config.opspec, config.order, config.tol)
        minus = op_I_minus(f, config.opspec_minus or config.opspec,
                           config.order, config.tol)
        fluxes = InterfaceFluxes(plus.i_plus, minus, plus.order, plus.clipped)
    rhs = interface_velocity(f, config.law, fluxes)
    return fluxes, rhs


def _step_size(config: EvolutionConfig, dx: float, rhs: np.ndarray,
               remaining: Optional[float] = None) -> float:
    speed = max(1.0, float(np.max(np.abs(rhs))))
    dt = min(config.dt_max, config.cfl * dx / speed)
    if remaining is not None:
        dt = min(dt, remaining)
    return dt


def _advance(f: GraphInterface, rhs: np.ndarray, dt: float,
             t_next: float) -> GraphInterface:
    values = f.values + dt * rhs
    lo = f.delta
    hi = f.upper
    bad = (values < lo) | (values > hi)
    if bad.any():
        raise PhaseBandViolationError(t_next, np.nonzero(bad)[0])
    return f.with_values(values)


def step(f: GraphInterface, config: EvolutionConfig, t: float = 0.0):
    """One explicit step; returns (f_next, dt_used)."""
    _, rhs = _evaluate(f, config)
    dt = _step_size(config, f.grid.dx, rhs)
    return _advance(f, rhs, dt, t + dt), dt


def run(f0: GraphInterface, config: EvolutionConfig,
        on_frame: Optional[Callable[[Frame], None]] = None) -> list:
    """Evolve f0 to time T, returning frames every frame_stride steps.

    The initial state and the final state are always included. on_frame
    is called with each frame as it is produced, so partial output
    survives a mid-run failure.
    """
    frames = []

    def emit(t, f, fluxes, rhs, dt):
        fr = Frame(t, f.values.copy(), fluxes, rhs.copy(),
                   frame_stats(f.values, f.grid.dx, dt))
        frames.append(fr)
        if on_frame is not None:
            on_frame(fr)

    f = f0
    t = 0.0
    fluxes, rhs = _evaluate(f, config)
    emit(t, f, fluxes, rhs, 0.0)
    k = 0
    while t < config.T:
        remaining = config.T - t
        dt = _step_size(config, f.grid.dx, rhs, remaining)
        f = _advance(f, rhs, dt, t + dt)
        t = config.T if dt == remaining else t + dt
        k += 1
        fluxes, rhs = _evaluate(f, config)
        if k % config.frame_stride == 0 or t >= config.T:
            emit(t, f, fluxes, rhs, dt)
    return frames
