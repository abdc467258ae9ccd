"""Fixed-step RK4 method of steps with cubic Hermite dense output.

States are stored on a uniform node grid together with the derivative at
each node, so any delayed argument is recovered by cubic Hermite
interpolation on the containing step. The step may not exceed the smallest
positive delay; then every delayed lookup of a stage falls in nodes that are
already computed. Zero delays read the current stage value instead.

The node where integration starts keeps two derivatives: the history's own
(left) value and the right-hand side (right) value, so a derivative jump
between the initial history and the solution does not leak into lookups.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .model import ModelSpec

__all__ = [
    "ConfigurationError",
    "BlowUpError",
    "HistoryUnderflowError",
    "CoverageError",
    "HistorySegment",
    "Trajectory",
    "make_rhs",
    "rhs",
    "default_step",
    "integrate",
    "integrate_function",
    "extract_segment",
]

GRID_RTOL = 1e-12
LOOKUP_SLACK = 1e-6  # in units of the step


class ConfigurationError(ValueError):
    pass


class BlowUpError(ArithmeticError):
    def __init__(self, t: float):
        super().__init__(f"non-finite state encountered at t={t:.17g}")
        self.t = t


class HistoryUnderflowError(LookupError):
    pass


class CoverageError(ValueError):
    pass


def _hermite(th: float, h: float, y0, y1, d0, d1) -> list[float]:
    th2 = th * th
    th3 = th2 * th
    h00 = 2 * th3 - 3 * th2 + 1
    h10 = (th3 - 2 * th2 + th) * h
    h01 = -2 * th3 + 3 * th2
    h11 = (th3 - th2) * h
    return [h00 * a + h10 * da + h01 * b + h11 * db for a, b, da, db in zip(y0, y1, d0, d1)]


def _hermite_deriv(th: float, h: float, y0, y1, d0, d1) -> list[float]:
    th2 = th * th
    g00 = (6 * th2 - 6 * th) / h
    g10 = 3 * th2 - 4 * th + 1
    g01 = (-6 * th2 + 6 * th) / h
    g11 = 3 * th2 - 2 * th
    return [g00 * a + g10 * da + g01 * b + g11 * db for a, b, da, db in zip(y0, y1, d0, d1)]


@dataclass(frozen=True)
class HistorySegment:
    """State on ``[t_end - span, t_end]`` sampled at spacing ``step``, with node derivatives."""

    t_end: float
    step: float
    states: np.ndarray
    derivs: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.array(self.states, dtype=float))
        derivs = np.atleast_2d(np.array(self.derivs, dtype=float))
        if states.shape != derivs.shape:
            raise ValueError(f"states {states.shape} and derivs {derivs.shape} differ in shape")
        if not self.step > 0:
            raise ValueError("step must be positive")
        states.setflags(write=False)
        derivs.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "derivs", derivs)
        object.__setattr__(self, "t_end", float(self.t_end))
        object.__setattr__(self, "step", float(self.step))

    @classmethod
    def constant(cls, value: Sequence[float], t_end: float, span: float, step: float) -> "HistorySegment":
        """Constant history; the node count is rounded up so the coverage is at least ``span``."""
        value = np.asarray(value, dtype=float).ravel()
        count = int(math.ceil(span / step - 1e-9)) + 1 if span > 0 else 1
        states = np.tile(value, (count, 1))
        return cls(t_end, step, states, np.zeros_like(states))

    @classmethod
    def from_function(cls, func: Callable[[float], Sequence[float]], t_end: float, span: float,
                      step: float, dfunc: Callable[[float], Sequence[float]] | None = None) -> "HistorySegment":
        """Sample ``func`` (and its derivative ``dfunc``, default zero) on the node grid."""
        count = int(math.ceil(span / step - 1e-9)) + 1 if span > 0 else 1
        times = t_end - step * np.arange(count - 1, -1, -1)
        states = np.array([np.atleast_1d(func(t)) for t in times], dtype=float)
        if dfunc is None:
            derivs = np.zeros_like(states)
        else:
            derivs = np.array([np.atleast_1d(dfunc(t)) for t in times], dtype=float)
        return cls(t_end, step, states, derivs)

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def nodes(self) -> int:
        return self.states.shape[0]

    @property
    def span(self) -> float:
        return (self.nodes - 1) * self.step

    @property
    def t_start(self) -> float:
        return self.t_end - self.span

    @property
    def times(self) -> np.ndarray:
        return self.t_end - self.step * np.arange(self.nodes - 1, -1, -1)

    def __call__(self, t: float) -> np.ndarray:
        if self.nodes == 1:
            if abs(t - self.t_end) > LOOKUP_SLACK * self.step:
                raise CoverageError(f"t={t} outside single-node segment at {self.t_end}")
            return self.states[0].copy()
        u = (t - self.t_start) / self.step
        if u < -LOOKUP_SLACK or u > self.nodes - 1 + LOOKUP_SLACK:
            raise CoverageError(f"t={t} outside segment [{self.t_start}, {self.t_end}]")
        i = min(max(int(math.floor(u)), 0), self.nodes - 2)
        return np.array(_hermite(u - i, self.step, self.states[i], self.states[i + 1],
                                 self.derivs[i], self.derivs[i + 1]))


@dataclass(frozen=True)
class Trajectory:
    """Dense solution on ``[t0 - history_span, t1]``.

    ``junction`` is the node index of ``t0``; ``junction_left`` is the
    history-side derivative there (``derivs[junction]`` is the right-hand side).
    """

    t_first: float
    t0: float
    step: float
    states: np.ndarray
    derivs: np.ndarray
    junction: int
    junction_left: np.ndarray

    @property
    def t1(self) -> float:
        return self.t_first + (self.nodes - 1) * self.step

    @property
    def nodes(self) -> int:
        return self.states.shape[0]

    @property
    def dim(self) -> int:
        return self.states.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.t_first + self.step * np.arange(self.nodes)

    def _locate(self, t: float) -> tuple[int, float]:
        u = (t - self.t_first) / self.step
        if u < -LOOKUP_SLACK or u > self.nodes - 1 + LOOKUP_SLACK:
            raise CoverageError(f"t={t} outside trajectory coverage [{self.t_first}, {self.t1}]")
        i = min(max(int(math.floor(u)), 0), self.nodes - 2)
        return i, u - i

    def _right_deriv(self, i: int):
        return self.junction_left if i == self.junction else self.derivs[i]

    def __call__(self, t: float) -> np.ndarray:
        if self.nodes == 1:
            return self.states[0].copy()
        i, th = self._locate(t)
        return np.array(_hermite(th, self.step, self.states[i], self.states[i + 1],
                                 self.derivs[i], self._right_deriv(i + 1)))

    def derivative(self, t: float) -> np.ndarray:
        if self.nodes == 1:
            return self.derivs[0].copy()
        i, th = self._locate(t)
        return np.array(_hermite_deriv(th, self.step, self.states[i], self.states[i + 1],
                                       self.derivs[i], self._right_deriv(i + 1)))

    def window(self, start: float, stop: float) -> tuple[np.ndarray, np.ndarray]:
        """Node times and states with ``start <= t <= stop`` (to grid tolerance)."""
        t = self.times
        slack = LOOKUP_SLACK * self.step
        mask = (t >= start - slack) & (t <= stop + slack)
        return t[mask], self.states[mask]

    def shifted(self, dt: float) -> "Trajectory":
        """Same trajectory with the time axis moved by ``dt``."""
        return Trajectory(self.t_first + dt, self.t0 + dt, self.step, self.states, self.derivs,
                          self.junction, self.junction_left)


def make_rhs(model: ModelSpec, lam: float = 1.0):
    """Right-hand side ``f(t, y, delayed) -> list`` for the integrator.

    ``delayed(s)`` must return the full state at an earlier time ``s``. Zero
    delays use ``y`` directly. Every component is scaled by ``lam``.
    """
    n = model.n
    F, H, G = model.F, model.H, model.G
    b = [bk._value for bk in model.b]
    tau, eps = model.tau, model.eps
    lam = float(lam)

    def f(t, y, delayed):
        cache = {}

        def at(d):
            if d == 0.0:
                return y
            v = cache.get(d)
            if v is None:
                v = cache[d] = delayed(t - d)
            return v

        out = [0.0] * (n + 1)
        out[0] = lam * (F(t, at(tau[0])[n]) - b[0](y[0]))
        for j in range(1, n):
            out[j] = lam * (G[j - 1](t, at(eps[j - 1])[j - 1], at(tau[j])[n]) - b[j](y[j]))
        out[n] = lam * (H(t, at(eps[n - 1])[n - 1]) - b[n](y[n]))
        return out

    return f


def rhs(model: ModelSpec, t: float, y, delayed: Callable[[float], Sequence[float]], lam: float = 1.0) -> np.ndarray:
    """Vector field of the delay system at time ``t``; ``delayed`` supplies past states."""
    y = [float(v) for v in y]
    return np.array(make_rhs(model, lam)(float(t), y, delayed))


def default_step(model: ModelSpec) -> float:
    """``T / 2048``, or ``min positive delay / 8`` if smaller, shrunk to divide ``T``."""
    step = model.T / 2048
    d = model.min_positive_delay
    if d is not None and d / 8 < step:
        step = model.T / math.ceil(model.T / (d / 8))
    return step


def _commensurate(length: float, step: float, what: str) -> int:
    count = round(length / step)
    if abs(count * step - length) > GRID_RTOL * max(1.0, abs(length)):
        raise ConfigurationError(f"step {step!r} does not divide {what} {length!r}")
    return int(count)


def integrate_function(func, init: HistorySegment, t1: float, step: float) -> Trajectory:
    """Integrate ``y' = func(t, y, delayed)`` from ``init`` up to ``t1``.

    ``func`` receives the current stage value as a list and a ``delayed``
    callable returning past states as lists; any delay it uses must be at
    least ``step`` (or exactly zero, handled by ``func`` itself).
    """
    if not step > 0:
        raise ConfigurationError("step must be positive")
    if init.nodes > 1 and not math.isclose(init.step, step, rel_tol=GRID_RTOL):
        raise ConfigurationError(f"history step {init.step!r} differs from integration step {step!r}")
    if t1 < init.t_end - GRID_RTOL * max(1.0, abs(t1)):
        raise ConfigurationError("t1 precedes the end of the initial history")
    n_steps = _commensurate(t1 - init.t_end, step, "the integration horizon")

    h = float(step)
    t_start = init.t_end
    t_first = t_start - (init.nodes - 1) * h
    Y = init.states.tolist()
    D = init.derivs.tolist()
    j = len(Y) - 1
    left = list(D[j])

    def delayed(s):
        u = (s - t_first) / h
        last = len(Y) - 1
        if u < -LOOKUP_SLACK:
            raise HistoryUnderflowError(f"lookup at t={s:.17g} precedes stored history start {t_first:.17g}")
        if u > last + LOOKUP_SLACK:
            raise HistoryUnderflowError(f"lookup at t={s:.17g} is beyond computed solution")
        if last == 0:
            return Y[0]
        i = min(max(int(u), 0), last - 1)
        d1 = left if i + 1 == j else D[i + 1]
        return _hermite(u - i, h, Y[i], Y[i + 1], D[i], d1)

    y = Y[-1]
    t = t_start
    try:
        k1 = func(t, y, delayed)
    except (OverflowError, ZeroDivisionError) as exc:
        raise BlowUpError(t) from exc
    if not all(math.isfinite(v) for v in k1):
        raise BlowUpError(t)
    D[j] = k1
    half = 0.5 * h
    for step_i in range(n_steps):
        t_next = t_start + (step_i + 1) * h
        try:
            k2 = func(t + half, [a + half * b for a, b in zip(y, k1)], delayed)
            k3 = func(t + half, [a + half * b for a, b in zip(y, k2)], delayed)
            k4 = func(t + h, [a + h * b for a, b in zip(y, k3)], delayed)
            y = [a + (h / 6.0) * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4)]
            t = t_next
            if not all(math.isfinite(v) for v in y):
                raise BlowUpError(t)
            Y.append(y)
            D.append(left)  # placeholder until k1 at the new node exists
            k1 = func(t, y, delayed)
        except (OverflowError, ZeroDivisionError) as exc:
            raise BlowUpError(t_next) from exc
        if not all(math.isfinite(v) for v in k1):
            raise BlowUpError(t)
        D[-1] = k1
    return Trajectory(t_first, t_start, h, np.array(Y), np.array(D), j, np.array(left))


def integrate(model: ModelSpec, init: HistorySegment, t1: float, step: float | None = None,
              lam: float = 1.0) -> Trajectory:
    """Solve the feedback system from ``init`` to ``t1`` with homotopy parameter ``lam``.

    Raises
    ------
    ConfigurationError
        Step above the smallest positive delay, step not dividing the horizon
        or ``T``, or a history shorter than the largest delay.
    BlowUpError
        A state became non-finite.
    """
    if step is None:
        step = default_step(model)
    if init.dim != model.dim:
        raise ConfigurationError(f"history has {init.dim} components, model needs {model.dim}")
    dmin = model.min_positive_delay
    if dmin is not None and step > dmin * (1 + GRID_RTOL):
        raise ConfigurationError(f"step {step!r} exceeds the smallest positive delay {dmin!r}")
    _commensurate(model.T, step, "the period T")
    if init.span < model.tau_max * (1 - GRID_RTOL) - 1e-15:
        raise ConfigurationError(f"history span {init.span!r} is shorter than the largest delay {model.tau_max!r}")
    return integrate_function(make_rhs(model, lam), init, t1, step)


def extract_segment(traj: Trajectory, t_end: float, span: float) -> HistorySegment:
    """History segment of ``traj`` on ``[t_end - span, t_end]`` using the trajectory step.

    Nodes are copied when ``t_end`` lies on the trajectory grid; otherwise the
    segment is resampled by Hermite interpolation.
    """
    h = traj.step
    count = int(math.ceil(span / h - 1e-9)) + 1 if span > 0 else 1
    start = t_end - (count - 1) * h
    slack = LOOKUP_SLACK * h
    if start < traj.t_first - slack or t_end > traj.t1 + slack:
        raise CoverageError(f"segment [{start}, {t_end}] not inside trajectory [{traj.t_first}, {traj.t1}]")
    u = (t_end - traj.t_first) / h
    i_end = round(u)
    if abs(u - i_end) <= 1e-9 * max(1.0, abs(u)):
        idx = slice(i_end - count + 1, i_end + 1)
        states = traj.states[idx]
        derivs = traj.derivs[idx].copy()
        if i_end == traj.junction:
            derivs[-1] = traj.junction_left
        return HistorySegment(t_end, h, states, derivs)
    times = start + h * np.arange(count)
    states = np.array([traj(s) for s in times])
    derivs = np.array([traj.derivative(s) for s in times])
    return HistorySegment(t_end, h, states, derivs)
