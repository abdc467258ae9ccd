import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from feedback_dde.model import (
    DecaySpec,
    DomainError,
    ImageContainmentError,
    ModelSpec,
    ModelValidationError,
    Production1Spec,
    Production2Spec,
    TimeProfile,
    eval_b,
    eval_production,
    invert_b,
    preset_testosterone,
)


def test_hill_repression_values():
    spec = Production1Spec("hill_repression", TimeProfile(2.0), kappa=1.0, m=1)
    assert eval_production(spec, 0.3, 0.0) == 2.0
    assert eval_production(spec, 0.3, 1.0) == 1.0


def test_production2_value():
    spec = Production2Spec(TimeProfile(1.0), Production1Spec("linear_gain"), kappa_w=1.0, m_w=1)
    # 1 * 3 * 1/(1+1)
    assert eval_production(spec, 0.0, 3.0, 1.0) == pytest.approx(1.5, abs=1e-15)


def test_production2_up_uses_unit_profile():
    up = Production1Spec("linear_gain", TimeProfile(7.0))
    spec = Production2Spec(TimeProfile(2.0), up, repressed=False)
    assert spec(0.0, 3.0, 100.0) == 6.0


def test_negative_argument_is_domain_error():
    spec = Production1Spec("hill_activation", TimeProfile(1.0))
    with pytest.raises(DomainError):
        eval_production(spec, 0.0, -1.0)
    with pytest.raises(DomainError):
        eval_b(DecaySpec(), -0.5)


@pytest.mark.parametrize("family,x,expected", [
    (DecaySpec("linear", 2.0), 3.0, 6.0),
    (DecaySpec("power", 1.0, q=3.0), 2.0, 8.0),
    (DecaySpec("bounded", 1.0, kappa=1.0), 1.0, 0.5),
])
def test_eval_b(family, x, expected):
    assert eval_b(family, x) == expected


@pytest.mark.parametrize("spec", [DecaySpec("linear", 2.0), DecaySpec("power", 0.7, 2.5),
                                  DecaySpec("bounded", 3.0, kappa=0.2)])
def test_b_vanishes_at_zero(spec):
    assert eval_b(spec, 0.0) == 0.0


def test_invert_b_examples():
    assert invert_b(DecaySpec("linear", 2.0), 4.0) == pytest.approx(2.0, rel=1e-12)
    assert invert_b(DecaySpec("power", 1.0, 3.0), 8.0) == pytest.approx(2.0, rel=1e-12)
    assert invert_b(DecaySpec(), 0.0) == 0.0


def test_invert_b_outside_image():
    with pytest.raises(ImageContainmentError) as info:
        invert_b(DecaySpec("bounded", 1.0, kappa=1.0), 2.0)
    assert info.value.value == 2.0


def test_invert_b_rejects_negative_target():
    with pytest.raises(DomainError):
        invert_b(DecaySpec(), -1.0)


decays = st.one_of(
    st.builds(DecaySpec, st.just("linear"), st.floats(0.1, 10.0)),
    st.builds(DecaySpec, st.just("power"), st.floats(0.1, 10.0), st.floats(0.3, 4.0)),
    st.builds(lambda beta, kappa: DecaySpec("bounded", beta, kappa=kappa), st.floats(0.1, 10.0),
              st.floats(0.1, 10.0)),
)


@given(decays, st.floats(0.0, 1.0))
def test_invert_b_round_trip(spec, frac):
    y = frac * (spec.supremum * 0.999 if spec.family == "bounded" else 1e3)
    x = invert_b(spec, y)
    assert abs(eval_b(spec, x) - y) <= 1e-12 * (1 + y)


@given(decays, st.floats(0.0, 50.0), st.floats(0.0, 50.0))
def test_b_strictly_increasing(spec, a, b):
    if a < b:
        assert eval_b(spec, a) < eval_b(spec, b)


profiles = st.builds(TimeProfile, st.floats(0.1, 5.0), st.floats(0.0, 0.999),
                     st.floats(0.0, 2 * math.pi), st.floats(0.2, 5.0))


@given(profiles, st.floats(-20.0, 20.0))
def test_profile_positive_and_periodic(prof, t):
    assert prof(t) > 0
    assert prof(t + prof.period) == pytest.approx(prof(t), rel=1e-12)


@given(profiles, st.sampled_from(["constant", "hill_repression"]), st.floats(0.1, 5.0), st.integers(1, 6),
       st.floats(0.0, 1e3), st.floats(0.0, 1e3), st.floats(0.0, 10.0))
def test_f_role_nonincreasing_positive(prof, fam, kappa, m, x1, x2, t):
    F = Production1Spec(fam, prof, kappa, m)
    lo, hi = sorted((x1, x2))
    assert F(t, lo) >= F(t, hi)
    assert F(t, hi) > 0


@given(profiles, st.sampled_from(["hill_activation", "linear_gain"]), st.floats(0.1, 5.0), st.integers(1, 6),
       st.floats(1e-3, 50.0), st.floats(1e-3, 50.0), st.floats(0.0, 10.0))
def test_h_role_nondecreasing_positive(prof, fam, kappa, m, x1, x2, t):
    H = Production1Spec(fam, prof, kappa, m)
    lo, hi = sorted((x1, x2))
    assert H(t, lo) <= H(t, hi)
    assert H(t, lo) > 0


@given(st.floats(0.1, 5.0), st.integers(1, 5), st.floats(0.0, 1e4))
def test_repression_factor_in_unit_interval(kappa_w, m_w, y):
    G = Production2Spec(kappa_w=kappa_w, m_w=m_w)
    assert 0 < G.w(y) <= 1


@settings(max_examples=30)
@given(st.floats(0.0, 10.0), st.floats(0.0, 10.0), st.floats(0.0, 10.0))
def test_evaluation_is_pure(t, x, y):
    G = Production2Spec(TimeProfile(1.3, 0.4, 0.2), Production1Spec("hill_activation", kappa=0.7, m=2))
    b = DecaySpec("power", 1.5, 1.7)
    assert eval_production(G, t, x, y) == eval_production(G, t, x, y)
    assert eval_b(b, x) == eval_b(b, x)


def test_profile_amplitude_bounds():
    with pytest.raises(ModelValidationError):
        TimeProfile(1.0, 1.0)
    with pytest.raises(ModelValidationError):
        TimeProfile(-1.0)


def test_role_families_enforced():
    good = Production1Spec("linear_gain")
    with pytest.raises(ModelValidationError):
        ModelSpec(1, 1.0, (0.0,), (0.0,), Production1Spec("linear_gain"), (), good, (DecaySpec(),) * 2)
    with pytest.raises(ModelValidationError):
        ModelSpec(1, 1.0, (0.0,), (0.0,), Production1Spec("constant"), (),
                  Production1Spec("hill_repression"), (DecaySpec(),) * 2)


def test_model_shape_and_delay_checks():
    F = Production1Spec("constant")
    H = Production1Spec("linear_gain")
    with pytest.raises(ModelValidationError):
        ModelSpec(1, 1.0, (-0.1,), (0.0,), F, (), H, (DecaySpec(),) * 2)
    with pytest.raises(ModelValidationError):
        ModelSpec(1, 1.0, (0.0,), (0.0,), F, (), H, (DecaySpec(),) * 3)
    with pytest.raises(ModelValidationError):
        ModelSpec(1, 2.0, (0.0,), (0.0,), F, (), H, (DecaySpec(),) * 2)  # profile period 1 != T


def test_preset_structure():
    m = preset_testosterone(kappa1=2, kappa2=1, m=1, amp=0.0, delays=(1.0, 0.0, 0.0))
    assert m.n == 2
    assert m.tau == (1.0, 0.0)
    assert m.eps == (0.0, 0.0)
    assert m.is_autonomous
    assert m.F(0.0, 0.0) == 2.0
    assert m.G[0](0.0, 3.0, 100.0) == 3.0  # no repression by x_n
    assert m.H(0.0, 2.5) == 2.5
    assert all(b.family == "linear" for b in m.b)


def test_preset_sign_violation():
    with pytest.raises(ModelValidationError):
        preset_testosterone(kappa1=-1.0)
    with pytest.raises(ModelValidationError):
        preset_testosterone(amp=1.2)


def test_scalar_and_array_evaluation_agree():
    F = Production1Spec("hill_repression", TimeProfile(2.0, 0.5, 0.3), kappa=1.5, m=3)
    t = np.linspace(0, 1, 7)
    x = np.linspace(0, 4, 7)
    arr = F(t, x)
    assert np.allclose(arr, [F(float(a), float(b)) for a, b in zip(t, x)], rtol=1e-14)
