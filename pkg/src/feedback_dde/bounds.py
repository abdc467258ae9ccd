"""A-priori box, averaged map and the face-sign / homotopy degree certificate.

Upper bounds are built forward along the chain starting from the largest
possible repressor output ``F(t, 0)``; lower bounds are built the same way
starting from ``F(t, M_n)``. Each constant is pushed outward by a
multiplicative margin ``delta`` so that the face inequalities are strict.
On the resulting box ``Q = prod (m_k, M_k)`` the averaged map points
inward on every face, which fixes its Brouwer degree at ``(-1)**(n+1)``.

All checks here are sampled, not rigorous.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .model import ImageContainmentError, ModelSpec, invert_b

__all__ = [
    "BoundsBox",
    "Certificate",
    "HomotopyResult",
    "DegenerateBoxError",
    "RootNotFoundError",
    "extremum_over_period",
    "compute_bounds",
    "upper_sweep",
    "phi",
    "phi_batch",
    "miranda_certificate",
    "homotopy_scan",
    "phi_root",
]

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
MAX_FACE_POINTS = 100_000


class DegenerateBoxError(ValueError):
    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class RootNotFoundError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundsBox:
    """Open box ``(m_0, M_0) x ... x (m_n, M_n)`` together with the margin that produced it."""

    m: tuple[float, ...]
    M: tuple[float, ...]
    delta: float = 0.05

    def __post_init__(self):
        m = tuple(float(v) for v in self.m)
        M = tuple(float(v) for v in self.M)
        if len(m) != len(M):
            raise ValueError("m and M must have the same length")
        for k, (lo, hi) in enumerate(zip(m, M)):
            if not (0.0 < lo < hi < math.inf):
                raise DegenerateBoxError(f"box component {k} is degenerate: m={lo!r}, M={hi!r}", k)
        object.__setattr__(self, "m", m)
        object.__setattr__(self, "M", M)

    @property
    def lower(self) -> np.ndarray:
        return np.array(self.m)

    @property
    def upper(self) -> np.ndarray:
        return np.array(self.M)

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def widths(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x, slack: float = 0.0) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all(x > self.lower - slack) and np.all(x < self.upper + slack))

    def to_dict(self) -> dict:
        return {"m": list(self.m), "M": list(self.M), "delta": self.delta, "center": self.center.tolist()}


def extremum_over_period(
    f: Callable[[float], float], T: float, mode: str = "max", grid: int = 64, rtol: float = 1e-10
) -> float:
    """Maximum or minimum of ``f`` over one period ``[0, T)``.

    A uniform scan with ``grid`` samples locates the best sample, then a
    golden-section search on the two neighbouring cells refines it to
    ``rtol * T``. Not a global guarantee; adequate for smooth periodic profiles.
    """
    if mode not in ("max", "min"):
        raise ValueError(f"mode must be 'max' or 'min', got {mode!r}")
    if grid < 16:
        raise ValueError("grid must be at least 16")
    sign = 1.0 if mode == "max" else -1.0

    def g(t):
        return sign * f(t)

    h = T / grid
    values = [g(i * h) for i in range(grid)]
    i_best = max(range(grid), key=values.__getitem__)
    best = values[i_best]

    a, b = (i_best - 1) * h, (i_best + 1) * h
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    gc, gd = g(c), g(d)
    while b - a > rtol * T:
        if gc >= gd:
            b, d, gd = d, c, gc
            c = b - GOLDEN * (b - a)
            gc = g(c)
        else:
            a, c, gc = c, d, gd
            d = a + GOLDEN * (b - a)
            gd = g(d)
    best = max(best, gc, gd)
    return sign * best


def _inverse_extremum(model: ModelSpec, k: int, func, mode: str, grid: int, stage: str) -> float:
    b = model.b[k]

    def target(t):
        return invert_b(b, func(t))

    try:
        return extremum_over_period(target, model.T, mode, grid)
    except ImageContainmentError as exc:
        exc.stage = stage
        raise


def upper_sweep(model: ModelSpec, delta: float = 0.05, grid: int = 64) -> np.ndarray:
    """Upper bounds ``M_0..M_n``: each is ``(1 + delta)`` times the largest admissible value."""
    n = model.n
    M = np.empty(n + 1)
    M[0] = (1 + delta) * _inverse_extremum(model, 0, lambda t: model.F(t, 0.0), "max", grid, "M_0")
    for j in range(1, n):
        Mp = float(M[j - 1])
        G = model.G[j - 1]
        M[j] = (1 + delta) * _inverse_extremum(model, j, lambda t: G(t, Mp, 0.0), "max", grid, f"M_{j}")
    Mp = float(M[n - 1])
    M[n] = (1 + delta) * _inverse_extremum(model, n, lambda t: model.H(t, Mp), "max", grid, f"M_{n}")
    return M


def compute_bounds(model: ModelSpec, delta: float = 0.05, grid: int = 64) -> BoundsBox:
    """Box ``Q`` that every positive periodic solution (for any homotopy parameter) must lie in.

    The lower bound on ``x_0`` uses ``F(t, M_n)``: ``F`` is nonincreasing in
    the feedback argument ``x_n`` and ``x_n < M_n``.

    Raises
    ------
    ImageContainmentError
        If some production value is outside the image of the matching decay;
        ``stage`` names the bound being computed.
    DegenerateBoxError
        If the margins leave ``m_k >= M_k``.
    """
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    n = model.n
    M = upper_sweep(model, delta, grid)
    Mn = float(M[n])
    m = np.empty(n + 1)
    m[0] = (1 - delta) * _inverse_extremum(model, 0, lambda t: model.F(t, Mn), "min", grid, "m_0")
    for j in range(1, n):
        mp = float(m[j - 1])
        G = model.G[j - 1]
        m[j] = (1 - delta) * _inverse_extremum(model, j, lambda t: G(t, mp, Mn), "min", grid, f"m_{j}")
    mp = float(m[n - 1])
    m[n] = (1 - delta) * _inverse_extremum(model, n, lambda t: model.H(t, mp), "min", grid, f"m_{n}")
    for k in range(n + 1):
        if not m[k] < M[k]:
            raise DegenerateBoxError(f"lower bound m_{k}={m[k]:.6g} is not below M_{k}={M[k]:.6g}", k)
        if not m[k] > 0:
            raise DegenerateBoxError(f"lower bound m_{k}={m[k]:.6g} is not positive", k)
    return BoundsBox(tuple(m), tuple(M), delta)


def _simpson_weights(T: float, quad_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if quad_nodes < 2 or quad_nodes % 2:
        raise ValueError("quad_nodes must be a positive even integer")
    t = np.linspace(0.0, T, quad_nodes + 1)
    w = np.full(quad_nodes + 1, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (T / quad_nodes) / 3.0
    return t, w


def phi_batch(model: ModelSpec, X, quad_nodes: int = 256) -> np.ndarray:
    """Averaged vector field at each row of ``X`` (shape ``(P, n+1)``)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = model.n
    t, w = _simpson_weights(model.T, quad_nodes)
    tt = t[None, :]

    def avg(values):
        return (values @ w) / model.T

    out = np.empty_like(X)
    out[:, 0] = avg(model.F(tt, X[:, n:n + 1])) - model.b[0]._value(X[:, 0])
    for j in range(1, n):
        G = model.G[j - 1]
        out[:, j] = avg(G(tt, X[:, j - 1:j], X[:, n:n + 1])) - model.b[j]._value(X[:, j])
    out[:, n] = avg(model.H(tt, X[:, n - 1:n])) - model.b[n]._value(X[:, n])
    return out


def phi(model: ModelSpec, x, quad_nodes: int = 256) -> np.ndarray:
    """Period average of the right-hand side at the constant state ``x`` (delays drop out)."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.dim,):
        raise ValueError(f"x must have shape ({model.dim},), got {x.shape}")
    if np.any(x < 0):
        raise ValueError("phi is defined on the nonnegative orthant")
    return phi_batch(model, x[None, :], quad_nodes)[0]


def _face_samples(dim: int, face_samples: int, max_points: int = MAX_FACE_POINTS) -> int:
    free = dim - 1
    if free == 0:
        return 1
    s = face_samples
    while s > 2 and 2 * dim * s ** free > max_points:
        s -= 1
    return s


def _face_points(box: BoundsBox, k: int, value: float, samples: int) -> np.ndarray:
    axes = [np.array([value]) if i == k else np.linspace(box.m[i], box.M[i], samples)
            for i in range(len(box.m))]
    return np.array(list(itertools.product(*axes)))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("FEEDBACK_DDE_THREADS", "1")))
    except ValueError:
        return 1


def _faces(box: BoundsBox, samples: int):
    """Yield ``(k, side, points)`` for the 2(n+1) faces; side is ``"lower"`` or ``"upper"``."""
    for k in range(len(box.m)):
        yield k, "lower", _face_points(box, k, box.m[k], samples)
        yield k, "upper", _face_points(box, k, box.M[k], samples)


def _map_faces(fn, faces):
    faces = list(faces)
    nthreads = _threads()
    if nthreads == 1:
        return [fn(f) for f in faces]
    with ThreadPoolExecutor(max_workers=nthreads) as pool:
        return list(pool.map(fn, faces))


@dataclass(frozen=True)
class HomotopyResult:
    min_norm: float
    x: tuple[float, ...]
    lam: float
    points: int


def homotopy_scan(
    model: ModelSpec, box: BoundsBox, lambda_steps: int = 10, face_samples: int = 9, quad_nodes: int = 256
) -> HomotopyResult:
    """Smallest max-norm of ``(1 - lam) * (center - x) + lam * phi(x)`` over sampled faces and ``lam`` grid."""
    samples = _face_samples(model.dim, face_samples)
    lams = np.linspace(0.0, 1.0, lambda_steps + 1)
    p = box.center

    def scan(face):
        _, _, X = face
        ph = phi_batch(model, X, quad_nodes)
        # shape (lams, points, dim)
        H = (1 - lams)[:, None, None] * (p - X)[None] + lams[:, None, None] * ph[None]
        norms = np.abs(H).max(axis=2)
        i, j = np.unravel_index(np.argmin(norms), norms.shape)
        return float(norms[i, j]), tuple(X[j].tolist()), float(lams[i]), norms.size

    results = _map_faces(scan, _faces(box, samples))
    best = min(results, key=lambda r: r[0])
    return HomotopyResult(best[0], best[1], best[2], sum(r[3] for r in results))


@dataclass(frozen=True)
class Certificate:
    """Sampled face-sign and homotopy evidence for the degree of the averaged map on a box.

    ``lower_min[k]`` is the smallest ``phi_k`` seen on the face ``x_k = m_k``
    and ``upper_max[k]`` the largest on ``x_k = M_k``.
    """

    box: BoundsBox
    lower_min: tuple[float, ...]
    upper_max: tuple[float, ...]
    lower_argmin: tuple[tuple[float, ...], ...]
    upper_argmax: tuple[tuple[float, ...], ...]
    homotopy_min: float
    homotopy_argmin: tuple[float, ...]
    homotopy_lambda: float
    degree: int | None
    face_samples: int
    face_points: int
    homotopy_points: int
    lambda_steps: int
    quad_nodes: int
    violations: tuple[str, ...] = field(default=())

    @property
    def faces_ok(self) -> bool:
        return all(v > 0 for v in self.lower_min) and all(v < 0 for v in self.upper_max)

    @property
    def valid(self) -> bool:
        return self.faces_ok and self.homotopy_min > 0

    def to_dict(self) -> dict:
        return {
            "valid": self.valid,
            "degree": self.degree,
            "box": self.box.to_dict(),
            "delta": self.box.delta,
            "faces": [
                {
                    "k": k,
                    "lower_min_phi": self.lower_min[k],
                    "lower_argmin": list(self.lower_argmin[k]),
                    "upper_max_phi": self.upper_max[k],
                    "upper_argmax": list(self.upper_argmax[k]),
                }
                for k in range(len(self.lower_min))
            ],
            "homotopy": {
                "min_norm": self.homotopy_min,
                "argmin_x": list(self.homotopy_argmin),
                "argmin_lambda": self.homotopy_lambda,
            },
            "samples": {
                "face_samples_per_dim": self.face_samples,
                "face_points": self.face_points,
                "homotopy_points": self.homotopy_points,
                "lambda_steps": self.lambda_steps,
                "quad_nodes": self.quad_nodes,
            },
            "violations": list(self.violations),
        }


def miranda_certificate(
    model: ModelSpec,
    box: BoundsBox,
    face_samples: int = 9,
    lambda_steps: int = 10,
    quad_nodes: int = 256,
) -> Certificate:
    """Check that ``phi`` points into ``box`` on every sampled face point.

    ``phi_k`` must be positive on ``x_k = m_k`` and negative on ``x_k = M_k``.
    When that pattern holds and the homotopy to ``center - x`` has no sampled
    zero, the degree is reported as ``(-1)**(n+1)``; otherwise ``degree`` is
    ``None`` and ``violations`` names the offending points. Never raises for
    a sign failure.
    """
    dim = model.dim
    if len(box.m) != dim:
        raise ValueError(f"box dimension {len(box.m)} does not match model dimension {dim}")
    samples = _face_samples(dim, face_samples)

    def face_extreme(face):
        k, side, X = face
        vals = phi_batch(model, X, quad_nodes)[:, k]
        i = int(np.argmin(vals) if side == "lower" else np.argmax(vals))
        return k, side, float(vals[i]), tuple(X[i].tolist()), len(X)

    lower_min = [0.0] * dim
    upper_max = [0.0] * dim
    lower_arg: list = [()] * dim
    upper_arg: list = [()] * dim
    violations = []
    total = 0
    for k, side, val, arg, count in _map_faces(face_extreme, _faces(box, samples)):
        total += count
        if side == "lower":
            lower_min[k], lower_arg[k] = val, arg
            if not val > 0:
                violations.append(f"phi_{k} = {val:.6g} <= 0 on lower face x_{k} = m_{k} at {list(arg)}")
        else:
            upper_max[k], upper_arg[k] = val, arg
            if not val < 0:
                violations.append(f"phi_{k} = {val:.6g} >= 0 on upper face x_{k} = M_{k} at {list(arg)}")

    hom = homotopy_scan(model, box, lambda_steps, face_samples, quad_nodes)
    if not hom.min_norm > 0:
        violations.append(f"homotopy vanishes at x={list(hom.x)}, lambda={hom.lam}")
    degree = (-1) ** (model.n + 1) if not violations else None
    return Certificate(
        box=box,
        lower_min=tuple(lower_min),
        upper_max=tuple(upper_max),
        lower_argmin=tuple(lower_arg),
        upper_argmax=tuple(upper_arg),
        homotopy_min=hom.min_norm,
        homotopy_argmin=hom.x,
        homotopy_lambda=hom.lam,
        degree=degree,
        face_samples=samples,
        face_points=total,
        homotopy_points=hom.points,
        lambda_steps=lambda_steps,
        quad_nodes=quad_nodes,
        violations=tuple(violations),
    )


def _coordinate_bisection(model, box, x, tol, quad_nodes, halvings=40, max_sweeps=2000):
    # Nonlinear Gauss-Seidel; each scalar problem is bracketed by the face signs
    # and solved with a fixed number of halvings.
    x = x.copy()
    for _ in range(max_sweeps):
        for k in range(model.dim):
            lo, hi = box.m[k], box.M[k]
            for _ in range(halvings):
                x[k] = 0.5 * (lo + hi)
                if phi(model, x, quad_nodes)[k] > 0:
                    lo = x[k]
                else:
                    hi = x[k]
            x[k] = 0.5 * (lo + hi)
        if np.max(np.abs(phi(model, x, quad_nodes))) <= tol:
            return x
    return None


def phi_root(model: ModelSpec, box: BoundsBox, tol: float = 1e-10, quad_nodes: int = 256,
             max_iter: int = 200) -> np.ndarray:
    """Zero of the averaged map inside ``box``.

    Damped Newton from the box center with a forward-difference Jacobian,
    iterates clipped to the closed box. Falls back to coordinate bisection if
    Newton stalls.
    """
    lo, hi = box.lower, box.upper
    x = box.center
    f = phi(model, x, quad_nodes)
    norm = np.max(np.abs(f))
    for _ in range(max_iter):
        if norm <= tol:
            return x
        J = np.empty((model.dim, model.dim))
        for i in range(model.dim):
            h = 1e-6 * max(abs(x[i]), 1e-8)
            xp = x.copy()
            xp[i] += h
            J[:, i] = (phi(model, xp, quad_nodes) - f) / h
        try:
            dx = np.linalg.solve(J, -f)
        except np.linalg.LinAlgError:
            break
        step = 1.0
        while step > 1e-6:
            xn = np.clip(x + step * dx, lo, hi)
            fn = phi(model, xn, quad_nodes)
            nn = np.max(np.abs(fn))
            if nn < norm:
                break
            step *= 0.5
        else:
            break
        x, f, norm = xn, fn, nn
    if norm <= tol:
        return x
    root = _coordinate_bisection(model, box, x, tol, quad_nodes)
    if root is None:
        raise RootNotFoundError(f"averaged map root not found to tol={tol:g} (last residual {norm:.3g})")
    return root
