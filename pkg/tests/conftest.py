import math

import numpy as np
import pytest

from feedback_dde.model import (
    DecaySpec,
    ModelSpec,
    Production1Spec,
    Production2Spec,
    TimeProfile,
    preset_testosterone,
)


def worked_model(tau=(0.5, 0.0), eps=(0.0, 0.0)):
    """F = 2/(1+x), G_1 = x/(1+y), H = x, all b identity, T = 1."""
    F = Production1Spec("hill_repression", TimeProfile(2.0), kappa=1.0, m=1)
    G = Production2Spec(TimeProfile(1.0), Production1Spec("linear_gain"), kappa_w=1.0, m_w=1)
    H = Production1Spec("linear_gain", TimeProfile(1.0))
    return ModelSpec(2, 1.0, tau, eps, F, (G,), H, (DecaySpec(),) * 3)


def n1_model(tau=0.3):
    """F = 1/(1+x), H = x, b identity."""
    F = Production1Spec("hill_repression", TimeProfile(1.0), kappa=1.0, m=1)
    H = Production1Spec("linear_gain", TimeProfile(1.0))
    return ModelSpec(1, 1.0, (tau,), (0.0,), F, (), H, (DecaySpec(),) * 2)


FORCED_PARAMS = dict(kappa1=2.0, kappa2=1.0, m=1, alpha1=1.0, alpha2=1.0, beta1=1.0, beta2=1.0, beta3=1.0,
                     amp=0.3, T=1.0, delays=(0.25, 0.0, 0.0))


def forced_testosterone():
    return preset_testosterone(**FORCED_PARAMS)


def random_model(rng: np.random.Generator, n: int) -> ModelSpec:
    """A model satisfying the hypotheses by construction; delays are multiples of T/16."""
    T = float(rng.uniform(0.5, 2.0))

    def profile():
        return TimeProfile(float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.0, 0.9)),
                           float(rng.uniform(0.0, 2 * math.pi)), T)

    def hill_kappa():
        return float(rng.uniform(0.5, 2.0))

    F = Production1Spec(str(rng.choice(["constant", "hill_repression"])), profile(), hill_kappa(),
                        int(rng.integers(1, 5)))
    G = tuple(
        Production2Spec(
            profile(),
            Production1Spec(str(rng.choice(["hill_activation", "linear_gain"])), TimeProfile(period=T),
                            hill_kappa(), int(rng.integers(1, 4))),
            hill_kappa(),
            int(rng.integers(1, 4)),
            bool(rng.integers(0, 2)),
        )
        for _ in range(n - 1)
    )
    H = Production1Spec(str(rng.choice(["hill_activation", "linear_gain"])), profile(), hill_kappa(),
                        int(rng.integers(1, 4)))
    b = tuple(
        DecaySpec("power", float(rng.uniform(0.5, 3.0)), float(rng.uniform(0.5, 2.5)))
        if rng.random() < 0.4 else DecaySpec("linear", float(rng.uniform(0.5, 3.0)))
        for _ in range(n + 1)
    )
    delays = rng.integers(0, 9, size=2 * n) * (T / 16)
    return ModelSpec(n, T, tuple(delays[:n]), tuple(delays[n:]), F, G, H, b)


@pytest.fixture
def worked():
    return worked_model()


@pytest.fixture
def n1():
    return n1_model()


@pytest.fixture
def forced():
    return forced_testosterone()


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary
_CRITERIA: dict[int, tuple[str, list[bool]]] = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or (report.when != "call" and report.passed):
        return
    number, title = marker.args
    _CRITERIA.setdefault(number, (title, []))[1].append(report.passed)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, results = _CRITERIA[number]
        verdict = "PASS" if results and all(results) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {verdict}  {title}")
