import numpy as np
import pytest
import scipy.special

from depthnav.special import erf, erf_inv, erfc

# 30-digit reference values.
ERF_REFERENCE = {
    0.01: 0.0112834155558496169159095235481,
    0.1: 0.112462916018284892203275071744,
    0.5: 0.520499877813046537682746653892,
    0.84375: 0.767225661232341633458978160274,
    1.0: 0.842700792949714869341220635083,
    1.25: 0.922900128256458230136523481197,
    1.5: 0.966105146475310727066976261646,
    2.0: 0.995322265018952734162069256367,
    2.5: 0.99959304798255504106043578426,
    3.0: 0.99997790950300141455862722387,
    3.5: 0.999999256901627658587254476316,
    4.0: 0.99999998458274209971998114784,
    5.0: 0.99999999999846254020557196515,
    6.0: 0.999999999999999978480263287501,
}

ERFC_REFERENCE = {
    1.0: 0.157299207050285130658779364917,
    2.0: 0.00467773498104726583793074363275,
    3.0: 0.0000220904969985854413727761295823,
    4.0: 0.0000000154172579002800188521596734869,
    5.0: 1.53745979442803485018834348538e-12,
}

ERFINV_REFERENCE = {
    0.1: 0.0888559904942576870157372505678,
    0.3: 0.272462714726754355621957598588,
    0.5: 0.476936276204469873381418353643,
    0.8: 0.906193802436823220071162703096,
    0.94: 1.32992191433606380401593460452,
    0.99: 1.82138636771844967304021031862,
    0.9999: 2.75106390571206079614551316859,
    1.0 - 1e-9: 4.32000538491344528629798945176,
}


def test_erf_reference_values():
    for x, want in ERF_REFERENCE.items():
        assert erf(x) == pytest.approx(want, abs=5e-15)
        assert erf(-x) == pytest.approx(-want, abs=5e-15)
    assert erf(0.0) == 0.0


def test_erfc_relative_accuracy_on_tail():
    for x, want in ERFC_REFERENCE.items():
        assert erfc(x) == pytest.approx(want, rel=1e-12)


def test_erf_matches_scipy_on_grid():
    xs = np.linspace(-6.0, 6.0, 20001)
    np.testing.assert_allclose(erf(xs), scipy.special.erf(xs), atol=5e-15)


def test_erf_inv_reference_values():
    for y, want in ERFINV_REFERENCE.items():
        assert erf_inv(y) == pytest.approx(want, abs=1e-10)
        assert erf_inv(-y) == pytest.approx(-want, abs=1e-10)
    assert erf_inv(0.0) == 0.0


def test_erf_inv_accuracy_across_domain():
    ys = np.concatenate([
        np.linspace(-1 + 1e-9, 1 - 1e-9, 30001),
        [-(1 - 1e-9), 1 - 1e-9, 0.9, -0.9, 0.90001, -0.90001],
    ])
    got = erf_inv(ys)
    np.testing.assert_allclose(got, scipy.special.erfinv(ys), atol=1e-10)


def test_erf_inv_round_trip():
    ys = np.linspace(-0.999999, 0.999999, 5001)
    np.testing.assert_allclose(erf(erf_inv(ys)), ys, atol=1e-12)


def test_erf_inv_domain_errors():
    for bad in (1.0, -1.0, 1.5, -2.0):
        with pytest.raises(ValueError):
            erf_inv(bad)


def test_scalar_and_array_interfaces():
    assert isinstance(erf(0.5), float)
    assert isinstance(erf_inv(0.5), float)
    assert erf(np.array([0.0, 1.0])).shape == (2,)
    assert erf_inv(np.array([0.0, 0.5])).shape == (2,)
