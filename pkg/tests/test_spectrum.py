import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import tan_root
from besselinv.potential import ZERO, DomainError, PiecewiseConstant
from besselinv.solver import INF
from besselinv.spectrum import (
    CompletenessError, NotAnEigenvalueError, SpectralPoint, Spectrum, asymptotic_center,
    delta_sign_scan, eigenvalue, interlaced, kappa_exact, derivative_identity_residual, locate_eigenvalues,
    multiplier_kappa, norming_constant, spectral_data, tau,
)


def test_free_dirichlet():
    sp = locate_eigenvalues(0.0, ZERO, INF, 8)
    np.testing.assert_allclose(sp.values, (np.arange(1, 9) * math.pi) ** 2, rtol=1e-10)
    assert list(sp.indices) == list(range(1, 9))


def test_free_neumann():
    sp = locate_eigenvalues(0.0, ZERO, 0.0, 6)
    np.testing.assert_allclose(sp.values, ((np.arange(1, 7) - 0.5) * math.pi) ** 2, rtol=1e-10)


def test_free_l1_tan_roots():
    sp = locate_eigenvalues(1.0, ZERO, INF, 5)
    np.testing.assert_allclose(sp.values, [tan_root(k) ** 2 for k in range(1, 6)], rtol=1e-10)


def test_first_index_offset():
    sp = locate_eigenvalues(0.0, ZERO, INF, 3, first=4)
    np.testing.assert_allclose(sp.values, (np.arange(4, 7) * math.pi) ** 2, rtol=1e-10)


@pytest.mark.parametrize("n", [1, 3, 7])
def test_free_norming_and_kappa(n):
    p = eigenvalue(0.0, ZERO, INF, n)
    assert norming_constant(p, 0.0, ZERO) == pytest.approx(1 / (2 * n * n * math.pi ** 2), rel=1e-9)
    assert kappa_exact(0.0, ZERO, p) == pytest.approx((-1) ** (n + 1), rel=1e-9)
    assert multiplier_kappa(p, 0.0, ZERO) == pytest.approx((-1) ** (n + 1), rel=1e-8)
    lam, zeta = spectral_data(0.0, ZERO, INF, n)
    assert zeta == pytest.approx(1 / (2 * n * n * math.pi ** 2), rel=1e-9)


def test_kappa_needs_beta():
    with pytest.raises(DomainError):
        kappa_exact(0.0, ZERO, math.pi ** 2)
    assert kappa_exact(0.0, ZERO, math.pi ** 2, INF) == pytest.approx(1.0, rel=1e-9)


def test_not_an_eigenvalue():
    with pytest.raises(NotAnEigenvalueError):
        multiplier_kappa(SpectralPoint(12.0, 1, INF), 0.0, ZERO)


@pytest.mark.parametrize("ell", [0.0, 2.0, 3.5])
@pytest.mark.parametrize("beta", [INF, 1.5])
def test_norming_two_ways(q_step, ell, beta):
    for n in (1, 4, 9):
        p = eigenvalue(ell, q_step, beta, n)
        _, z = spectral_data(ell, q_step, beta, n)
        assert norming_constant(p, ell, q_step) == pytest.approx(z, rel=1e-7)


@pytest.mark.parametrize("beta", [INF, 0.0])
def test_derivative_identity_relation(q_cos, beta):
    for n in (1, 5):
        p = eigenvalue(1.0, q_cos, beta, n)
        assert derivative_identity_residual(p, 1.0, q_cos) < 1e-8


def test_tau_free():
    lam = math.pi ** 2
    assert tau(0.0, ZERO, lam) == pytest.approx(1 / (2 * lam), rel=1e-10)


def test_interlacing(q_step):
    d = locate_eigenvalues(0.5, q_step, INF, 10).values
    n = locate_eigenvalues(0.5, q_step, 0.0, 10).values
    assert interlaced(d, n)
    assert not interlaced(d, [d[0] + 1.0, d[0] + 2.0])


def test_sign_scan_agrees(q_step):
    sp = locate_eigenvalues(0.0, q_step, 2.0, 4)
    found = delta_sign_scan(0.0, q_step, 2.0, -30.0, sp.values[-1] + 5.0, n=400)
    np.testing.assert_allclose(found, sp.values, rtol=1e-9)


def test_search_floor():
    with pytest.raises(CompletenessError):
        eigenvalue(0.0, ZERO, INF, 1, lam_floor=50.0)
    with pytest.raises(DomainError):
        eigenvalue(0.0, ZERO, INF, 0)


def test_negative_eigenvalue():
    q = PiecewiseConstant.constant(-30.0)
    p = eigenvalue(0.0, q, INF, 1)
    assert p.lam == pytest.approx(math.pi ** 2 - 30.0, rel=1e-10)


def test_asymptotic_center():
    assert asymptotic_center(3, 0.0, INF) == pytest.approx(9 * math.pi ** 2)
    assert asymptotic_center(3, 1.0, 0.0) == pytest.approx(9 * math.pi ** 2)
    assert asymptotic_center(3, 2.0, INF) == pytest.approx(16 * math.pi ** 2)


def test_spectrum_serialization(tmp_path, q_step):
    sp = locate_eigenvalues(0.0, q_step, 1.0, 3, with_constants=True)
    back = Spectrum.from_dict(json.loads(json.dumps(sp.to_dict())))
    assert back == sp
    sp.to_csv(tmp_path / "s.csv")
    rows = (tmp_path / "s.csv").read_text().splitlines()
    assert rows[0] == "n,lambda,zeta,kappa,residual" and len(rows) == 4
    assert float(rows[1].split(",")[1]) == sp.values[0]
    dirichlet = locate_eigenvalues(0.0, q_step, INF, 2)
    assert Spectrum.from_dict(json.loads(json.dumps(dirichlet.to_dict()))).beta == INF


def test_parallel_matches_serial(q_step):
    a = locate_eigenvalues(0.0, q_step, INF, 6, jobs=1).values
    b = locate_eigenvalues(0.0, q_step, INF, 6, jobs=3).values
    np.testing.assert_array_equal(a, b)


@given(c=st.floats(-20, 20), ell=st.sampled_from([0.0, 1.0, 0.5]), beta=st.sampled_from([INF, 0.0, 3.0]))
@settings(max_examples=15, deadline=None)
def test_shift_identity(c, ell, beta):
    q = PiecewiseConstant((0.0, 0.6, 1.0), (1.0, -1.0))
    a = locate_eigenvalues(ell, q, beta, 4).values
    b = locate_eigenvalues(ell, q + c, beta, 4).values
    np.testing.assert_allclose(b, a + c, rtol=1e-9, atol=1e-8)


@given(bump=st.floats(0.1, 10.0), cell=st.integers(0, 3))
@settings(max_examples=15, deadline=None)
def test_monotone_in_potential(bump, cell):
    vals = [0.5, -1.0, 2.0, 0.0]
    q = PiecewiseConstant.uniform(vals)
    vals2 = list(vals)
    vals2[cell] += bump
    a = locate_eigenvalues(0.0, q, INF, 5).values
    b = locate_eigenvalues(0.0, PiecewiseConstant.uniform(vals2), INF, 5).values
    assert np.all(b > a)


def test_strongly_negative_robin():
    # q = 0, beta = -20: lam_1 = -k^2 with k coth k = 20
    from scipy.optimize import brentq

    k = brentq(lambda k: k / math.tanh(k) - 20.0, 1.0, 30.0, xtol=1e-15)
    p = eigenvalue(0.0, ZERO, -20.0, 1)
    assert p.lam == pytest.approx(-k * k, rel=1e-10)
    assert eigenvalue(0.0, ZERO, -20.0, 2).lam > 0
