"""Locate the positive T-periodic solution as a fixed point of the period map.

The period map integrates one forcing period beyond a history segment and
returns the trailing segment of the same span. Forward iteration converges
when the periodic orbit attracts; when it does not, the search stops with
:class:`NonConvergenceError` rather than returning a wrong orbit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import BoundsBox, RootNotFoundError, phi_root
from .dde import HistorySegment, Trajectory, default_step, extract_segment, integrate
from .model import ModelSpec

__all__ = [
    "NonConvergenceError",
    "PeriodicOrbit",
    "ContainmentReport",
    "period_map",
    "residual",
    "segment_span",
    "find_periodic",
    "box_containment",
]


class NonConvergenceError(RuntimeError):
    """Forward iteration of the period map did not settle.

    A positive periodic solution still exists for every model satisfying the
    structural hypotheses; existence does not imply attractivity, so the orbit
    may be unstable or attract too slowly for ``max_periods``.
    """

    def __init__(self, periods: int, residuals: list[float]):
        last = residuals[-1] if residuals else math.nan
        super().__init__(
            f"period map did not converge in {periods} period(s) (last residual {last:.3e}). "
            "A positive T-periodic solution exists by the degree argument, but existence does not "
            "imply attractivity: the orbit may be unstable or attract too slowly for forward iteration "
            "(indeterminate)."
        )
        self.periods = periods
        self.residuals = residuals


@dataclass(frozen=True)
class PeriodicOrbit:
    segment: HistorySegment
    orbit: Trajectory
    residual: float
    iterations: int
    lam: float
    amplitude: np.ndarray
    residual_history: tuple[float, ...] = field(default=())

    @property
    def period_states(self) -> np.ndarray:
        return self.orbit.window(0.0, self.orbit.t1)[1]

    def to_dict(self) -> dict:
        states = self.period_states
        return {
            "residual": self.residual,
            "iterations": self.iterations,
            "lambda": self.lam,
            "amplitude": self.amplitude.tolist(),
            "min": states.min(axis=0).tolist(),
            "max": states.max(axis=0).tolist(),
            "step": self.orbit.step,
            "segment_span": self.segment.span,
        }


def segment_span(model: ModelSpec, step: float) -> float:
    """Smallest multiple of ``step`` covering the largest delay."""
    return math.ceil(model.tau_max / step - 1e-9) * step


def period_map(model: ModelSpec, seg: HistorySegment, lam: float = 1.0, step: float | None = None,
               return_trajectory: bool = False):
    """Segment one period ``T`` after ``seg``, with the same span.

    Forcing is evaluated at absolute time, so the phase carries through.
    """
    if step is None:
        step = seg.step if seg.nodes > 1 else default_step(model)
    traj = integrate(model, seg, seg.t_end + model.T, step, lam)
    out = extract_segment(traj, traj.t1, seg.span)
    return (out, traj) if return_trajectory else out


def residual(a: HistorySegment, b: HistorySegment) -> float:
    """Max over nodes and components of ``|a - b| / (1 + |a|)``."""
    if a.states.shape != b.states.shape:
        raise ValueError(f"segment shapes differ: {a.states.shape} vs {b.states.shape}")
    return float(np.max(np.abs(a.states - b.states) / (1.0 + np.abs(a.states))))


def find_periodic(
    model: ModelSpec,
    box: BoundsBox,
    tol: float = 1e-8,
    max_periods: int = 2000,
    lam: float = 1.0,
    step: float | None = None,
    init: np.ndarray | None = None,
    quad_nodes: int = 256,
) -> PeriodicOrbit:
    """Iterate the period map from a constant history until consecutive segments agree to ``tol``.

    The constant history defaults to the zero of the averaged map in ``box``
    (box center if that root cannot be found). The returned orbit is the
    last period, relabelled to ``[0, T]``.

    Raises
    ------
    NonConvergenceError
        ``max_periods`` applications without reaching ``tol``.
    """
    if step is None:
        step = default_step(model)
    if init is None:
        try:
            init = phi_root(model, box, quad_nodes=quad_nodes)
        except RootNotFoundError:
            init = box.center
    span = segment_span(model, step)
    seg = HistorySegment.constant(init, 0.0, span, step)
    history: list[float] = []
    for k in range(1, max_periods + 1):
        nxt, traj = period_map(model, seg, lam, step, return_trajectory=True)
        r = residual(nxt, seg)
        history.append(r)
        seg = nxt
        if r <= tol:
            orbit = traj.shifted(-traj.t0)
            _, states = orbit.window(0.0, orbit.t1)
            return PeriodicOrbit(
                segment=HistorySegment(model.T, seg.step, seg.states, seg.derivs),
                orbit=orbit,
                residual=r,
                iterations=k,
                lam=lam,
                amplitude=states.max(axis=0) - states.min(axis=0),
                residual_history=tuple(history),
            )
    raise NonConvergenceError(max_periods, history)


@dataclass(frozen=True)
class ContainmentReport:
    lower: tuple[float, ...]
    upper: tuple[float, ...]
    orbit_min: tuple[float, ...]
    orbit_max: tuple[float, ...]
    passed: tuple[bool, ...]
    slack: float

    @property
    def ok(self) -> bool:
        return all(self.passed)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "slack": self.slack,
            "components": [
                {"k": k, "m": lo, "M": hi, "orbit_min": a, "orbit_max": b, "passed": p}
                for k, (lo, hi, a, b, p) in enumerate(
                    zip(self.lower, self.upper, self.orbit_min, self.orbit_max, self.passed))
            ],
        }


def box_containment(orbit: PeriodicOrbit, box: BoundsBox, slack: float = 1e-9) -> ContainmentReport:
    """Compare the orbit's range over one period with ``[m_k - slack, M_k + slack]``."""
    states = orbit.period_states
    lo, hi = states.min(axis=0), states.max(axis=0)
    passed = tuple(bool(a >= m - slack and b <= M + slack) for a, b, m, M in zip(lo, hi, box.m, box.M))
    return ContainmentReport(box.m, box.M, tuple(lo.tolist()), tuple(hi.tolist()), passed, slack)
