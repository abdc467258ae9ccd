import numpy as np
import pytest

from conftest import n1_model, random_model, worked_model
from feedback_dde.model import DecaySpec, ModelSpec, Production1Spec, TimeProfile, preset_testosterone
from feedback_dde.validation import check_conditions


def bounded_decay_model():
    base = worked_model()
    H = Production1Spec("linear_gain", TimeProfile(5.0))
    b = (DecaySpec(), DecaySpec(), DecaySpec("bounded", 1.0, kappa=1.0))
    return ModelSpec(2, 1.0, base.tau, base.eps, base.F, base.G, H, b)


def test_testosterone_preset_passes():
    report = check_conditions(preset_testosterone(kappa1=2, kappa2=1, m=1, delays=(1.0, 0.0, 0.0)))
    assert report.ok, report.lines()
    assert [c.key for c in report.checks] == ["H1", "H2", "H3", "H4", "H5"]


def test_bounded_decay_with_linear_h_fails_image_containment():
    report = check_conditions(bounded_decay_model())
    assert not report.ok
    assert not report["H4"].passed
    assert any("image-containment" in m for m in report["H4"].messages)
    assert report["H1"].passed and report["H2"].passed


def test_near_unit_amplitude_keeps_periodicity_and_positivity():
    m = preset_testosterone(amp=0.999, delays=(0.5, 0.0, 0.0))
    report = check_conditions(m)
    assert report["H1"].passed
    assert report["H3"].passed


def test_zero_delays_noted_but_allowed():
    report = check_conditions(worked_model(tau=(0.0, 0.0)))
    assert report.ok
    assert any("zero" in n for n in report.notes)


def test_n1_has_vacuous_g_check():
    report = check_conditions(n1_model())
    assert report.ok
    assert report["H5"].passed


def test_bounded_decay_can_be_valid():
    # sup H = 0.5 < sup b_1 = 1
    F = Production1Spec("hill_repression", TimeProfile(1.0))
    H = Production1Spec("hill_activation", TimeProfile(0.5))
    m = ModelSpec(1, 1.0, (0.2,), (0.0,), F, (), H, (DecaySpec(), DecaySpec("bounded", 1.0, kappa=1.0)))
    assert check_conditions(m).ok


def test_report_serializes():
    d = check_conditions(worked_model(), seed=3).to_dict()
    assert d["ok"] is True
    assert d["samples"]["seed"] == 3
    assert len(d["checks"]) == 5


@pytest.mark.parametrize("seed", range(10))
def test_random_valid_models_pass(seed):
    rng = np.random.default_rng(seed)
    m = random_model(rng, int(rng.integers(1, 4)))
    assert check_conditions(m, seed=seed).ok
