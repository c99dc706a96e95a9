import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import gamma, jv, spherical_jn

from besselinv.potential import ZERO, DomainError, PiecewiseConstant
from besselinv.solver import (
    INF, Scaled, c_ell, characteristic, characteristic_derivative, characteristic_wronskian,
    end_values, free_phi, phi, prufer, psi, target_angle,
)


def bessel_phi(ell, lam, x):
    # independent closed form through J_{l+1/2}
    nu = ell + 0.5
    z = cmath.sqrt(lam)
    return c_ell(ell) * gamma(nu + 1) * (z / 2) ** (-nu) * math.sqrt(x) * jv(nu, z * x)


def test_c_ell_values():
    assert c_ell(0.0) == pytest.approx(1.0, rel=1e-15)
    assert c_ell(1.0) == pytest.approx(1 / 3, rel=1e-15)
    assert c_ell(-0.5) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-15)


def test_rejects_small_ell():
    with pytest.raises(DomainError):
        phi(-0.6, ZERO, 1.0)


def test_quarter_wave_value():
    # sin(z)/z at z = pi/2
    d = characteristic(0.0, ZERO, (math.pi / 2) ** 2, INF)
    assert d.real == pytest.approx(2 / math.pi, rel=1e-10)
    assert abs(d.imag) < 1e-14


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_derivative_at_free_eigenvalue(n):
    lam = (n * math.pi) ** 2
    expect = (-1) ** n / (2 * n * n * math.pi ** 2)
    assert characteristic_derivative(0.0, ZERO, lam, INF) == pytest.approx(expect, rel=1e-8)
    assert characteristic_derivative(0.0, ZERO, lam, INF, method="central") == pytest.approx(expect, rel=1e-6)


def test_constant_potential_below_lambda():
    # q = c, lam = c - 1: phi(1) = sinh(1)
    c = 3.0
    d = characteristic(0.0, PiecewiseConstant.constant(c), c - 1.0, INF)
    assert d.real == pytest.approx(math.sinh(1.0), rel=1e-10)


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
@pytest.mark.parametrize("lam", [0.0, 7.3, 150.0, -40.0, 20 + 35j])
def test_free_closed_form(ell, lam):
    xs = np.array([0.05, 0.3, 0.77, 1.0])
    smp = phi(ell, ZERO, lam, xs)
    ref = free_phi(ell, lam, xs)
    np.testing.assert_allclose(smp.u, ref, rtol=1e-9, atol=1e-13 * np.max(np.abs(ref)))


@pytest.mark.parametrize("ell", [-0.5, 0.5, 1.3])
@pytest.mark.parametrize("lam", [9.0, 200.0, 30 - 80j])
def test_noninteger_ell_closed_form(ell, lam):
    f, _ = end_values(ell, ZERO, lam)
    assert f.value == pytest.approx(bessel_phi(ell, lam, 1.0), rel=1e-9)


def test_large_imaginary_scaled():
    # phi(1) = sinh(y)/y at lam = -y^2, far beyond double range
    y = 1000.0
    f, _ = end_values(0.0, ZERO, -y * y)
    expect = y - math.log(2.0) - math.log(y)
    assert f.log_abs == pytest.approx(expect, rel=1e-10)
    assert not math.isfinite(abs(f.value)) or abs(f.value) > 1e300


def test_scaled_arithmetic():
    a = Scaled(2.0, 3.0)
    assert (a * Scaled(0.5, -3.0)).value == pytest.approx(1.0)
    assert (-a).value == pytest.approx(-2 * math.exp(3))
    n = Scaled(5.0 + 0j, 1.0).normalized()
    assert abs(n.mant) == pytest.approx(1.0)
    assert n.value == pytest.approx(5 * math.e)
    assert Scaled(0j).log_abs == -math.inf


def test_terminal_dirichlet_free():
    z = 4.1
    xs = np.array([0.05, 0.2, 0.6, 1.0])
    t = psi(0.0, ZERO, z * z, INF, xs)
    np.testing.assert_allclose(t.u.real, np.sin(z * (1 - xs)) / z, atol=1e-11)
    assert t.u[-1] == 0 and t.du[-1] == -1


def test_terminal_robin_free():
    z, beta = 2.7, 0.8
    xs = np.array([0.1, 0.5])
    t = psi(0.0, ZERO, z * z, beta, xs)
    # psi(1) = 1, psi'(1) = -beta
    ref = np.cos(z * (1 - xs)) + beta * np.sin(z * (1 - xs)) / z
    np.testing.assert_allclose(t.u.real, ref, rtol=1e-10)


@pytest.mark.parametrize("beta", [INF, 0.0, 2.5])
def test_wronskian_matches(q_step, beta):
    for lam in (3.0, 55.5, 12 + 4j):
        d = characteristic(1.0, q_step, lam, beta)
        w = characteristic_wronskian(1.0, q_step, lam, beta)
        assert w == pytest.approx(d, rel=1e-8, abs=1e-12)


def test_robin_zero_free():
    # beta = 0: Delta = cos(z)
    z = 1.9
    assert characteristic(0.0, ZERO, z * z, 0.0).real == pytest.approx(math.cos(z), rel=1e-10)


def test_integral_of_square():
    z = 3.0
    smp = phi(0.0, ZERO, z * z, [1.0], rescale=False)
    # int_0^1 sin^2(z x)/z^2
    expect = (0.5 - math.sin(2 * z) / (4 * z)) / z ** 2
    assert smp.integral_values[-1].real == pytest.approx(expect, rel=1e-9)


def test_zero_count():
    smp = phi(0.0, ZERO, (5.5 * math.pi) ** 2, [1.0], count_zeros=True, rescale=False)
    assert smp.zeros == 5


def test_target_angle():
    assert target_angle(INF) == pytest.approx(math.pi)
    assert target_angle(0.0) == pytest.approx(math.pi / 2)


@given(l1=st.floats(-20, 400), dl=st.floats(0.5, 100))
@settings(max_examples=20, deadline=None)
def test_prufer_increasing(l1, dl):
    q = PiecewiseConstant((0.0, 0.5, 1.0), (1.0, -2.0))
    assert prufer(0.5, q, l1 + dl)[0] > prufer(0.5, q, l1)[0]


@given(ell=st.sampled_from([0.0, 1.0, 2.5]), re=st.floats(-50, 300), im=st.floats(-100, 100))
@settings(max_examples=20, deadline=None)
def test_conjugate_symmetry(ell, re, im):
    q = PiecewiseConstant((0.0, 0.3, 1.0), (0.7, -1.2))
    lam = complex(re, im)
    a = characteristic(ell, q, lam, INF)
    b = characteristic(ell, q, lam.conjugate(), INF)
    assert a.conjugate() == pytest.approx(b, rel=1e-9, abs=1e-14)


def test_sample_csv(tmp_path, q_step):
    smp = phi(0.0, q_step, 10.0, np.linspace(0.1, 1, 4))
    path = tmp_path / "s.csv"
    smp.to_csv(path)
    assert len(path.read_text().strip().splitlines()) == 5
