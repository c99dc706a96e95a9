import math
import warnings

import numpy as np
import pytest

from besselinv.potential import ZERO, DomainError, PiecewiseConstant
from besselinv.solver import INF
from besselinv.inverse import (
    ForwardModel, ReconstructionProblem, infer_indices, l2_distance, local_gap,
    nonuniqueness_probe, reconstruct, synthetic_targets,
)
from besselinv.uniqueness import EigenRecord, MixedDataset


@pytest.fixture(scope="module")
def truth3():
    return PiecewiseConstant.uniform([1.5, -1.0, 0.5])


@pytest.fixture(scope="module")
def targets3(truth3):
    return synthetic_targets(0.0, truth3, INF, [1, 2, 3])


def test_l2_distance():
    one = PiecewiseConstant.constant(1.0)
    assert l2_distance(one, ZERO) == pytest.approx(1.0, rel=1e-13)
    assert l2_distance(one, ZERO, 0.0, 0.25) == pytest.approx(0.5, rel=1e-13)
    lin = PiecewiseConstant((0.0, 0.5, 1.0), (0.0, 2.0))
    assert l2_distance(lin, ZERO) == pytest.approx(math.sqrt(2.0), rel=1e-13)


def test_local_gap():
    assert local_gap(3, 0.0, INF) == pytest.approx(7 * math.pi ** 2)
    assert local_gap(1, 0.0, 0.0) == pytest.approx(2 * math.pi ** 2)


def test_cells_project_round_trip(truth3):
    p = ReconstructionProblem(0.0, MixedDataset.from_spectrum(0.0, 1.0, [1.0, 2.0, 3.0], INF), dim=3)
    th = p.project(truth3)
    np.testing.assert_allclose(th, [1.5, -1.0, 0.5], atol=1e-12)
    assert l2_distance(p.potential(th), truth3) < 1e-12


def test_split_cells_with_tail():
    tail = PiecewiseConstant((0.0, 0.75, 1.0), (0.0, 2.0))
    data = MixedDataset.from_spectrum(0.0, 0.5, [1.0, 2.0], INF)
    p = ReconstructionProblem(0.0, data, dim=2, tail=tail)
    q = p.potential([1.0, -1.0])
    assert q.evaluate(0.1) == 1.0 and q.evaluate(0.4) == -1.0
    assert q.evaluate(0.6) == 0.0 and q.evaluate(0.9) == 2.0


def test_problem_validation(targets3):
    with pytest.raises(DomainError):
        ReconstructionProblem(0.0, targets3, basis="wavelet")
    with pytest.raises(DomainError):
        ReconstructionProblem(0.0, targets3, dim=0)
    with pytest.warns(UserWarning, match="under-determined"):
        ReconstructionProblem(0.0, targets3, dim=10)


def test_synthetic_targets(truth3, targets3):
    assert [r.index for r in targets3.records] == [1, 2, 3]
    assert all(r.zeta is not None for r in targets3.records)
    assert infer_indices(0.0, truth3, [EigenRecord(r.value, INF) for r in targets3.records]) == [1, 2, 3]
    part = synthetic_targets(0.0, truth3, INF, [1, 2], zeta_indices=[2])
    assert part.records[0].zeta is None and part.records[1].zeta is not None


def test_residual_zero_at_truth(truth3, targets3):
    p = ReconstructionProblem(0.0, targets3, dim=3)
    m = ForwardModel(p)
    r = m.residual(p.project(truth3))
    assert np.max(np.abs(r)) < 1e-10
    J = m.jacobian(p.project(truth3), r)
    assert J.shape == (6, 3) and np.linalg.matrix_rank(J) == 3


def test_reconstruct_three_cells(truth3, targets3):
    p = ReconstructionProblem(0.0, targets3, dim=3, truth=truth3)
    res = reconstruct(p)
    assert res.converged
    assert res.l2_error < 1e-8
    assert res.max_residual < 1e-10
    assert res.indices == (1, 2, 3)
    d = res.to_dict()
    assert d["l2_error"] == res.l2_error and d["trace"][0]["iter"] == 0


def test_problem_dict_round_trip(truth3, targets3):
    p = ReconstructionProblem(0.0, targets3, dim=3, truth=truth3, theta0=(0.1, 0.2, 0.3))
    back = ReconstructionProblem.from_dict(p.to_dict())
    assert back.targets == p.targets and back.theta0 == p.theta0
    assert back.truth.digest == truth3.digest


def test_probe_needs_truth(targets3):
    with pytest.raises(DomainError):
        nonuniqueness_probe(ReconstructionProblem(0.0, targets3, dim=3), 0.1)


def test_probe_underdetermined_finds(truth3):
    # two eigenvalues, no constants, three unknowns: a one-parameter family fits
    data = synthetic_targets(0.0, truth3, INF, [1, 2], zeta_indices=[])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        p = ReconstructionProblem(0.0, data, dim=3, truth=truth3, seed=1)
    res = nonuniqueness_probe(p, 0.1)
    assert res.status == "FOUND"
    assert res.distance >= 0.1 and res.max_residual <= 1e-7
    assert res.null_dimension >= 1
