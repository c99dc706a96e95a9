import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselinv.potential import (
    BasisPotential, DomainError, PiecewiseConstant, Potential, SmoothnessTag, TablePotential,
    conjugate_inverse, in_weighted_class, load_potential, named_potential, potential_from_dict,
    remainder_R, save_potential, weighted_norm,
)


class _LogSingular(Potential):
    # 1 / (x ln^2 x) near 0: integrable, but not against the weight 1 - ln x
    def _values(self, x):
        x = np.minimum(x, 0.5)
        with np.errstate(divide="ignore", over="ignore"):
            return 1.0 / (x * np.log(x) ** 2)

    @property
    def breakpoints(self):
        return (0.5,)


def test_weighted_norm_constant():
    q = PiecewiseConstant.constant(1.0)
    assert weighted_norm(q, 0.0) == pytest.approx(1.0, rel=1e-10)
    # int_0^1 (1 - ln x) dx = 2
    assert weighted_norm(q, -0.5) == pytest.approx(2.0, rel=1e-8)


def test_weighted_norm_linear(q_linear):
    assert weighted_norm(q_linear, 1.0) == pytest.approx(0.5, rel=1e-10)
    # int_0^1 x (1 - ln x) dx = 1/2 + 1/4
    assert weighted_norm(q_linear, -0.5) == pytest.approx(0.75, rel=1e-8)


def test_weighted_class_log_singular():
    q = _LogSingular()
    assert in_weighted_class(q, 0.0)
    assert not in_weighted_class(q, -0.5)


def test_remainder_zero_lambda(q_linear):
    # lam = 0: int y * y dy
    assert remainder_R(q_linear, 1.0, 0.0) == pytest.approx(1 / 3, rel=1e-10)
    with pytest.raises(DomainError):
        remainder_R(q_linear, 1.0, -1.0)


def test_remainder_decays(q_step):
    vals = [remainder_R(q_step, 0.0, lam) for lam in (1e2, 1e4, 1e6)]
    assert vals[0] > vals[1] > vals[2] > 0


@given(c=st.floats(-50, 50).filter(lambda c: abs(c) > 1e-3))
@settings(max_examples=25, deadline=None)
def test_weighted_norm_homogeneous(c):
    q = PiecewiseConstant((0.0, 0.4, 1.0), (1.0, -2.0))
    for ell in (0.0, -0.5):
        assert weighted_norm(q * c, ell) == pytest.approx(abs(c) * weighted_norm(q, ell), rel=1e-8)


def test_conjugate_inverse():
    assert conjugate_inverse(math.inf) == 1.0
    assert conjugate_inverse(1.0) == 0.0
    assert conjugate_inverse(2.0) == 0.5
    with pytest.raises(DomainError):
        conjugate_inverse(0.5)


def test_smoothness_tag_validation():
    with pytest.raises(DomainError):
        SmoothnessTag(k=-1)
    with pytest.raises(DomainError):
        SmoothnessTag(p=0.5)
    with pytest.raises(DomainError):
        SmoothnessTag(delta0=0.0)
    with pytest.raises(DomainError):
        SmoothnessTag(delta0=0.6).check_split(0.5)


def test_piecewise_validation():
    with pytest.raises(DomainError):
        PiecewiseConstant((0.0, 0.5), (1.0,))
    with pytest.raises(DomainError):
        PiecewiseConstant((0.0, 0.6, 0.4, 1.0), (1.0, 2.0, 3.0))
    with pytest.raises(DomainError):
        PiecewiseConstant((0.0, 1.0), (math.nan,))


def test_piecewise_values_and_breaks(q_step):
    assert q_step.evaluate(0.1) == 2.0
    assert q_step.evaluate(0.5) == -1.5
    assert q_step.breakpoints == (0.3, 0.7)
    with pytest.raises(DomainError):
        q_step.evaluate(1.0)
    # equal neighbours do not produce a breakpoint
    assert PiecewiseConstant((0.0, 0.5, 1.0), (1.0, 1.0)).breakpoints == ()


def test_uniform_cells():
    q = PiecewiseConstant.uniform([1.0, 2.0], lo=0.0, hi=0.5, tail=-1.0)
    assert q.breaks == (0.0, 0.25, 0.5, 1.0)
    assert q.evaluate(0.9) == -1.0


def test_basis_requires_tail():
    with pytest.raises(DomainError):
        BasisPotential("cosine", (1.0,), split=0.5)
    with pytest.raises(DomainError):
        BasisPotential("legendre", (1.0,))


def test_basis_with_tail():
    tail = PiecewiseConstant.constant(3.0)
    q = BasisPotential("cosine", (1.0, 1.0), split=0.5, tail=tail)
    assert q.evaluate(0.25) == pytest.approx(1.0 + math.cos(math.pi / 2), abs=1e-14)
    assert q.evaluate(0.75) == 3.0


def test_table_interpolates():
    q = TablePotential(np.array([0.0, 1.0]), np.array([0.0, 2.0]))
    assert q.evaluate(0.25) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        TablePotential(np.array([0.5, 0.2]), np.array([0.0, 1.0]))


def test_scalar_arithmetic(q_step):
    assert (q_step + 1.0).evaluate(0.1) == 3.0
    assert (2 * q_step).evaluate(0.5) == -3.0
    assert (-q_step).evaluate(0.8) == -0.5


def test_dict_round_trip(q_step, q_cos):
    for q in (q_step, q_cos):
        back = potential_from_dict(q.to_dict())
        xs = np.linspace(0.01, 0.99, 57)
        np.testing.assert_array_equal(back(xs), q(xs))
        assert back.digest == q.digest


def test_file_round_trip(tmp_path, q_linear):
    tagged = BasisPotential("polynomial", (0.0, 1.0), smoothness=SmoothnessTag(k=1, p=2.0))
    for q in (q_linear, tagged):
        path = tmp_path / "q.toml"
        save_potential(q, path)
        back = load_potential(path)
        assert back.digest == q.digest
    assert load_potential(path).smoothness == SmoothnessTag(k=1, p=2.0)


def test_named():
    assert named_potential("zero").evaluate(0.3) == 0.0
    assert named_potential("x").evaluate(0.3) == pytest.approx(0.3)
    assert named_potential("const:2.5").evaluate(0.3) == 2.5
    with pytest.raises(DomainError):
        named_potential("nope")
