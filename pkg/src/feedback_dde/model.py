"""Cyclic feedback delay system: function families, decay laws and the model record.

The system couples ``n + 1`` concentrations in a chain::

    x0' = F(t, x_n(t - tau_0))                          - b_0(x0)
    xj' = G_j(t, x_{j-1}(t - eps_j), x_n(t - tau_j))    - b_j(xj)    1 <= j <= n-1
    xn' = H(t, x_{n-1}(t - eps_n))                      - b_n(xn)

Every production term is a positive ``T``-periodic profile times a state
dependent factor, so the structural hypotheses (monotonicity, positivity,
periodicity) hold by construction for the families offered here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "DomainError",
    "ImageContainmentError",
    "ModelValidationError",
    "TimeProfile",
    "DecaySpec",
    "Production1Spec",
    "Production2Spec",
    "ModelSpec",
    "eval_production",
    "eval_b",
    "invert_b",
    "preset_testosterone",
    "DECAY_FAMILIES",
    "F_FAMILIES",
    "H_FAMILIES",
    "UP_FAMILIES",
]

DECAY_FAMILIES = ("linear", "power", "bounded")
F_FAMILIES = ("constant", "hill_repression")
H_FAMILIES = ("hill_activation", "linear_gain")
UP_FAMILIES = ("hill_activation", "linear_gain")
PRODUCTION_FAMILIES = F_FAMILIES + H_FAMILIES

INVERT_RTOL = 1e-12
BRACKET_CAP = 1e12


class ModelValidationError(ValueError):
    """A model or one of its parts was constructed with invalid parameters."""


class DomainError(ValueError):
    """A function was evaluated outside ``[0, inf)``."""


class ImageContainmentError(ValueError):
    """A target value lies outside the image of a decay function.

    ``stage`` is filled in by callers that know which step of a computation
    requested the inversion (for example ``"M_2"`` in the bound recursion).
    """

    def __init__(self, message: str, value: float | None = None, stage: str | None = None):
        super().__init__(message)
        self.value = value
        self.stage = stage

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.stage}] {msg}" if self.stage else msg


def _positive(name: str, value: float) -> float:
    value = float(value)
    if not (value > 0 and math.isfinite(value)):
        raise ModelValidationError(f"{name} must be a positive finite real, got {value!r}")
    return value


def _positive_int(name: str, value) -> int:
    if isinstance(value, bool) or int(value) != value or int(value) < 1:
        raise ModelValidationError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _sin(x):
    if isinstance(x, (float, int)):
        return math.sin(x)
    return np.sin(x)


@dataclass(frozen=True)
class TimeProfile:
    """Positive periodic modulation ``a(t) = base * (1 + amplitude * sin(2 pi t / period + phase))``."""

    base: float = 1.0
    amplitude: float = 0.0
    phase: float = 0.0
    period: float = 1.0

    def __post_init__(self):
        _positive("profile base", self.base)
        _positive("profile period", self.period)
        if not (0.0 <= self.amplitude < 1.0):
            raise ModelValidationError(f"profile amplitude must lie in [0, 1), got {self.amplitude!r}")
        if not math.isfinite(self.phase):
            raise ModelValidationError("profile phase must be finite")
        # plain floats keep the scalar fast path on math.sin
        for name in ("base", "amplitude", "phase", "period"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def is_constant(self) -> bool:
        return self.amplitude == 0.0

    def __call__(self, t):
        if self.amplitude == 0.0:
            return self.base if np.ndim(t) == 0 else np.full(np.shape(t), self.base)
        return self.base * (1.0 + self.amplitude * _sin(2.0 * math.pi * t / self.period + self.phase))

    def with_period(self, period: float) -> "TimeProfile":
        return TimeProfile(self.base, self.amplitude, self.phase, period)


@dataclass(frozen=True)
class DecaySpec:
    """Clearance law ``b``: ``linear`` beta*x, ``power`` beta*x**q, ``bounded`` beta*x/(kappa+x).

    The bounded family has image ``[0, beta)``; it is there so that models
    violating the image-containment hypothesis can be expressed.
    """

    family: str = "linear"
    beta: float = 1.0
    q: float = 1.0
    kappa: float = 1.0

    def __post_init__(self):
        if self.family not in DECAY_FAMILIES:
            raise ModelValidationError(f"unknown decay family {self.family!r}; expected one of {DECAY_FAMILIES}")
        _positive("decay beta", self.beta)
        _positive("decay q", self.q)
        _positive("decay kappa", self.kappa)
        for name in ("beta", "q", "kappa"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @property
    def supremum(self) -> float:
        """Least upper bound of the image of ``b`` on ``[0, inf)``."""
        return self.beta if self.family == "bounded" else math.inf

    def _value(self, x):
        # No domain check: the integrator may probe slightly negative states.
        # Negative arguments use the odd extension so b stays strictly increasing.
        if self.family == "linear":
            return self.beta * x
        if self.family == "power":
            if np.ndim(x) == 0:
                return math.copysign(self.beta * abs(x) ** self.q, x)
            return np.sign(x) * self.beta * np.abs(x) ** self.q
        if np.ndim(x) == 0 and x < 0:
            return -self._value(-x)
        return self.beta * x / (self.kappa + x)


@dataclass(frozen=True)
class Production1Spec:
    """One-argument production term, used for ``F`` (repressive role) and ``H`` (activating role).

    ``constant``: a(t); ``hill_repression``: a(t)/(kappa + x**m);
    ``hill_activation``: a(t)*x**m/(kappa + x**m); ``linear_gain``: a(t)*x.
    """

    family: str
    profile: TimeProfile = field(default_factory=TimeProfile)
    kappa: float = 1.0
    m: int = 1

    def __post_init__(self):
        if self.family not in PRODUCTION_FAMILIES:
            raise ModelValidationError(
                f"unknown production family {self.family!r}; expected one of {PRODUCTION_FAMILIES}"
            )
        _positive("production kappa", self.kappa)
        object.__setattr__(self, "kappa", float(self.kappa))
        object.__setattr__(self, "m", _positive_int("Hill exponent m", self.m))

    def shape(self, x):
        """State-dependent factor, i.e. the value under a unit profile."""
        fam = self.family
        if fam == "constant":
            return 1.0 if np.ndim(x) == 0 else np.ones(np.shape(x))
        if fam == "hill_repression":
            return 1.0 / (self.kappa + x ** self.m)
        if fam == "hill_activation":
            xm = x ** self.m
            return xm / (self.kappa + xm)
        return x * 1.0

    def __call__(self, t, x):
        return self.profile(t) * self.shape(x)


@dataclass(frozen=True)
class Production2Spec:
    """Separable two-argument production ``G(t, x, y) = a(t) * up(x) * w(y)``.

    ``up`` is evaluated with a unit profile; only its family, kappa and m
    matter. ``w(y) = kappa_w / (kappa_w + y**m_w)`` when ``repressed`` is
    true, otherwise ``w`` is identically one.
    """

    profile: TimeProfile = field(default_factory=TimeProfile)
    up: Production1Spec = field(default_factory=lambda: Production1Spec("linear_gain"))
    kappa_w: float = 1.0
    m_w: int = 1
    repressed: bool = True

    def __post_init__(self):
        if self.up.family not in UP_FAMILIES:
            raise ModelValidationError(
                f"G activation factor must be one of {UP_FAMILIES}, got {self.up.family!r}"
            )
        _positive("kappa_w", self.kappa_w)
        object.__setattr__(self, "kappa_w", float(self.kappa_w))
        object.__setattr__(self, "m_w", _positive_int("m_w", self.m_w))
        object.__setattr__(self, "repressed", bool(self.repressed))

    def w(self, y):
        if not self.repressed:
            return 1.0 if np.ndim(y) == 0 else np.ones(np.shape(y))
        return self.kappa_w / (self.kappa_w + y ** self.m_w)

    def __call__(self, t, x, y):
        return self.profile(t) * self.up.shape(x) * self.w(y)


@dataclass(frozen=True)
class ModelSpec:
    """Full description of the cyclic feedback system.

    ``tau`` holds tau_0..tau_{n-1} (delays on the x_n feedback argument) and
    ``eps`` holds eps_1..eps_n (delays along the forward chain).
    """

    n: int
    T: float
    tau: tuple[float, ...]
    eps: tuple[float, ...]
    F: Production1Spec
    G: tuple[Production2Spec, ...]
    H: Production1Spec
    b: tuple[DecaySpec, ...]

    def __post_init__(self):
        n = _positive_int("n", self.n)
        object.__setattr__(self, "n", n)
        _positive("T", self.T)
        object.__setattr__(self, "T", float(self.T))
        for name in ("tau", "eps"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != n:
                raise ModelValidationError(f"{name} must have n={n} entries, got {len(vals)}")
            if any(not (v >= 0 and math.isfinite(v)) for v in vals):
                raise ModelValidationError(f"{name} delays must be finite and nonnegative, got {vals}")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "G", tuple(self.G))
        object.__setattr__(self, "b", tuple(self.b))
        if len(self.G) != n - 1:
            raise ModelValidationError(f"G must have n-1={n - 1} entries, got {len(self.G)}")
        if len(self.b) != n + 1:
            raise ModelValidationError(f"b must have n+1={n + 1} entries, got {len(self.b)}")
        if self.F.family not in F_FAMILIES:
            raise ModelValidationError(f"F must be nonincreasing: family in {F_FAMILIES}, got {self.F.family!r}")
        if self.H.family not in H_FAMILIES:
            raise ModelValidationError(f"H must be nondecreasing: family in {H_FAMILIES}, got {self.H.family!r}")
        for prof in self.profiles():
            if not math.isclose(prof.period, self.T, rel_tol=1e-12):
                raise ModelValidationError(f"profile period {prof.period} differs from model period T={self.T}")

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def tau_max(self) -> float:
        return max(self.tau + self.eps)

    @property
    def min_positive_delay(self) -> float | None:
        pos = [d for d in self.tau + self.eps if d > 0]
        return min(pos) if pos else None

    @property
    def is_autonomous(self) -> bool:
        return all(p.is_constant for p in self.profiles())

    def profiles(self) -> list[TimeProfile]:
        return [self.F.profile, self.H.profile] + [g.profile for g in self.G]

    def production(self, k: int, t, x_prev, x_last):
        """Production term of equation ``k`` given its upstream and feedback arguments.

        Equation 0 ignores ``x_prev`` and equation n ignores ``x_last``.
        """
        if k == 0:
            return self.F(t, x_last)
        if k == self.n:
            return self.H(t, x_prev)
        return self.G[k - 1](t, x_prev, x_last)


def _check_nonneg(*args) -> None:
    for a in args:
        if np.any(np.asarray(a) < 0):
            raise DomainError(f"argument must be nonnegative, got {a!r}")


def eval_production(spec: Production1Spec | Production2Spec, t, *args):
    """Evaluate a production term at time ``t``.

    One state argument for :class:`Production1Spec`, two (``x``, ``y``) for
    :class:`Production2Spec`. Negative state arguments raise :class:`DomainError`.
    """
    _check_nonneg(*args)
    expected = 2 if isinstance(spec, Production2Spec) else 1
    if len(args) != expected:
        raise TypeError(f"{type(spec).__name__} takes {expected} state argument(s), got {len(args)}")
    return spec(t, *args)


def eval_b(spec: DecaySpec, x):
    _check_nonneg(x)
    return spec._value(x)


def invert_b(spec: DecaySpec, y: float, rtol: float = INVERT_RTOL, cap: float = BRACKET_CAP) -> float:
    """Solve ``b(x) = y`` for ``x >= 0``.

    The upper bracket starts at 1 and doubles until ``b(hi) >= y``; if it
    passes ``cap`` the target is declared outside the image of ``b`` and
    :class:`ImageContainmentError` is raised. Bisection then runs until
    ``|b(x) - y| <= rtol * y`` (which implies ``rtol * (1 + y)``) or the
    bracket collapses to adjacent floats.
    """
    y = float(y)
    if y < 0 or math.isnan(y):
        raise DomainError(f"invert_b target must be nonnegative, got {y!r}")
    if y == 0.0:
        return 0.0
    b = spec._value
    lo, hi = 0.0, 1.0
    while b(hi) < y:
        lo, hi = hi, 2.0 * hi
        if hi > cap:
            raise ImageContainmentError(
                f"value {y:.6g} is not in the image of the {spec.family} decay "
                f"(sup b = {spec.supremum:.6g}, bracket exceeded {cap:.3g})",
                value=y,
            )
    target = rtol * y
    while True:
        mid = 0.5 * (lo + hi)
        r = b(mid) - y
        if abs(r) <= target or mid <= lo or mid >= hi:
            return mid
        if r < 0:
            lo = mid
        else:
            hi = mid


def preset_testosterone(
    kappa1: float = 2.0,
    kappa2: float = 1.0,
    m: int = 1,
    alpha1: float = 1.0,
    alpha2: float = 1.0,
    beta1: float = 1.0,
    beta2: float = 1.0,
    beta3: float = 1.0,
    amp: float = 0.0,
    T: float = 1.0,
    delays: Sequence[float] = (0.0, 0.0, 0.0),
) -> ModelSpec:
    """Three-hormone testosterone loop (LHRH -> LH -> testosterone, with repression).

    ``F(t, X) = kappa1 * (1 + amp*sin(2 pi t/T)) / (kappa2 + X**m)``,
    ``G_1(R) = alpha1 * R``, ``H(L) = alpha2 * L`` and first-order clearance
    ``b_i(x) = beta_i * x``. ``delays`` map onto (tau_0, eps_1, eps_2); with
    ``amp = 0`` and ``delays = (tau, 0, 0)`` this is Murray's autonomous form.
    """
    for name, val in [("kappa1", kappa1), ("kappa2", kappa2), ("alpha1", alpha1), ("alpha2", alpha2),
                      ("beta1", beta1), ("beta2", beta2), ("beta3", beta3), ("T", T)]:
        _positive(name, val)
    delays = tuple(float(d) for d in delays)
    if len(delays) != 3:
        raise ModelValidationError(f"delays must have three entries, got {len(delays)}")
    F = Production1Spec("hill_repression", TimeProfile(kappa1, amp, 0.0, T), kappa=kappa2, m=m)
    G1 = Production2Spec(
        TimeProfile(alpha1, 0.0, 0.0, T), Production1Spec("linear_gain", TimeProfile(period=T)), repressed=False
    )
    H = Production1Spec("linear_gain", TimeProfile(alpha2, 0.0, 0.0, T))
    b = tuple(DecaySpec("linear", beta) for beta in (beta1, beta2, beta3))
    return ModelSpec(n=2, T=T, tau=(delays[0], 0.0), eps=(delays[1], delays[2]), F=F, G=(G1,), H=H, b=b)
