import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from ebmsde.constitutive import (
    BudykoCoalbedo,
    Forcing,
    LinearEmission,
    NonMonotoneLaw,
    NonpositiveLambda,
    SellersCoalbedo,
    WrongVariant,
    beta_eval,
    j_primitive,
    yosida_eval,
)

RAMP = SellersCoalbedo(ice=0.2, warm=0.8, half_width=1.0)
JUMP = BudykoCoalbedo(ice=0.2, warm=0.8)


def test_ramp_values():
    assert beta_eval(RAMP, -20.0) == 0.2
    assert beta_eval(RAMP, 0.0) == 0.8
    assert beta_eval(RAMP, -10.0) == pytest.approx(0.5, abs=1e-15)
    assert RAMP.lipschitz == pytest.approx(0.3)


def test_ramp_rejects_jump_variant():
    with pytest.raises(WrongVariant):
        beta_eval(JUMP, 0.0)
    with pytest.raises(WrongVariant):
        yosida_eval(RAMP, 0.1, 0.0)


def test_level_validation():
    with pytest.raises(ValueError):
        SellersCoalbedo(ice=0.8, warm=0.2)
    with pytest.raises(ValueError):
        BudykoCoalbedo(ice=0.0, warm=0.5)
    with pytest.raises(ValueError):
        SellersCoalbedo(half_width=0.0)


def test_yosida_closed_form():
    # resolvent gives the lower branch at the threshold itself
    assert yosida_eval(JUMP, 0.1, -10.0) == 0.2
    # upper ramp corner r = threshold + lam*warm
    assert yosida_eval(JUMP, 0.1, -10.0 + 0.08) == pytest.approx(0.8, abs=1e-13)
    assert yosida_eval(JUMP, 0.37, 50.0) == 0.8
    with pytest.raises(NonpositiveLambda):
        yosida_eval(JUMP, 0.0, 0.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-30, 10), st.floats(-30, 10),
       st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_yosida_bounds_monotone_lipschitz(r1, r2, lam):
    v1 = float(yosida_eval(JUMP, lam, r1))
    v2 = float(yosida_eval(JUMP, lam, r2))
    assert 0.2 <= v1 <= 0.8
    if r1 <= r2:
        assert v1 <= v2
    assert abs(v1 - v2) <= abs(r1 - r2) / lam + 1e-12


@pytest.mark.parametrize("lam", [1e-1, 1e-2, 1e-3])
@pytest.mark.parametrize("offset", [-0.5, 0.5])
def test_yosida_converges_to_section(lam, offset):
    r = JUMP.threshold + offset
    assert abs(yosida_eval(JUMP, lam, r) - JUMP.section(r)) <= lam * JUMP.warm


def test_ramp_equals_jump_off_ramp():
    for r in (-11.0001, -13.0, -9.0, 5.0):
        assert float(RAMP(r)) == float(JUMP.section(r))


def test_emission_law():
    g = LinearEmission(slope=1.0)
    assert g(-11.0) == -11.0
    assert LinearEmission(slope=2.0).inverse(-6.0) == -3.0
    assert g.primitive(3.0) == 4.5
    with pytest.raises(NonMonotoneLaw):
        LinearEmission(slope=0.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(-50, 50), st.floats(0.1, 5.0), st.floats(-3, 3))
def test_emission_inverse_round_trip(r, slope, offset):
    g = LinearEmission(slope=slope, offset=offset)
    assert g.inverse(g(r)) == pytest.approx(r, abs=1e-12 * max(1, abs(r)))


@pytest.mark.parametrize("r", [-8.0, -15.0, -10.0, -10.3, -9.1, 2.0])
def test_ramp_primitive_against_quadrature(r):
    oracle, _ = quad(lambda s: float(RAMP(s)), RAMP.threshold, r)
    assert j_primitive(RAMP, None, r) == pytest.approx(oracle, abs=1e-10)


def test_ramp_primitive_frozen_values():
    # quadrature oracle values for the reference ramp
    assert j_primitive(RAMP, None, -8.0) == pytest.approx(1.45, abs=1e-12)
    assert j_primitive(RAMP, None, -15.0) == pytest.approx(-1.15, abs=1e-12)
    assert j_primitive(RAMP, None, RAMP.threshold) == 0.0


@pytest.mark.parametrize("lam", [0.3, 1e-2])
@pytest.mark.parametrize("r", [-10.5, -9.99, -9.2, 0.0])
def test_yosida_primitive_against_quadrature(lam, r):
    oracle, _ = quad(lambda s: float(JUMP.yosida(lam, s)), JUMP.threshold, r,
                     points=[JUMP.threshold + lam * 0.2,
                             JUMP.threshold + lam * 0.8])
    assert j_primitive(JUMP, lam, r) == pytest.approx(oracle, abs=1e-10)


def test_jump_primitive():
    assert JUMP.primitive(-10.0) == 0.0
    assert JUMP.primitive(-8.0) == pytest.approx(1.6)
    assert JUMP.primitive(-12.0) == pytest.approx(-0.4)


@settings(max_examples=40, deadline=None)
@given(st.floats(-20, 0))
def test_primitive_differentiates_to_ramp(r):
    h = 1e-6
    fd = (RAMP.primitive(r + h) - RAMP.primitive(r - h)) / (2 * h)
    assert abs(fd - float(RAMP(r))) < 1e-6 + RAMP.lipschitz * h


def test_forcing_defaults_and_bounds():
    f = Forcing(S=1.0, f=-12.0)
    assert f.f_inf == -12.0
    assert f.c_f == 12.0
    assert f.f_inf_bounds() == (12.0, 12.0)
    with pytest.raises(ValueError):
        Forcing(S=-1.0)
    incomplete = Forcing(S=1.0, f=lambda t: -12.0)
    with pytest.raises(ValueError):
        incomplete.f_inf_bounds()


def test_forcing_nodal_evaluation():
    from ebmsde.basis import build_basis

    b = build_basis(4, 8)
    f = Forcing(S=lambda x: 1.0 + 0.2 * x * x, f=lambda t: -12.0 + t)
    s_min, s_max = f.s_bounds(b)
    assert 1.0 < s_min < s_max < 1.2
    assert f.forcing_nodal(1.0, b) == pytest.approx(np.full(8, -11.0))


def test_j_primitive_variant_guard():
    with pytest.raises(WrongVariant):
        j_primitive(JUMP, None, -9.0)
