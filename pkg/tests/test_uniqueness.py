import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from besselinv.potential import DomainError, PiecewiseConstant, SmoothnessTag
from besselinv.solver import INF
from besselinv.uniqueness import (
    INDETERMINATE, SATISFIED, UNDECIDED, EigenRecord, InputError, MixedDataset, SystemFunction,
    budget, budget_brute_force, build_system, closedness_diagnostic, corollary_check,
    cosine_system, counting_lemma_checks, criterion_margin, dataset_corollary, gram_trend,
    jensen_audit, load_dataset, rational_jensen,
)

N = 50
FREE_D = (math.pi * np.arange(1, N + 1)) ** 2
FREE_N = (math.pi * (np.arange(1, N + 1) - 0.5)) ** 2
FREE_ZETA = 1 / (2 * FREE_D)


def full_dirichlet(a=1.0, **kw):
    return MixedDataset.from_spectrum(0.0, a, FREE_D, INF, FREE_ZETA, np.arange(1, N + 1), **kw)


def test_dataset_validation():
    with pytest.raises(DomainError):
        MixedDataset(-1.0, 1.0, ())
    with pytest.raises(DomainError):
        MixedDataset(0.0, 1.5, ())
    with pytest.raises(InputError):
        MixedDataset.from_spectrum(0.0, 1.0, [1.0, 1.0], INF)
    with pytest.raises(InputError):
        MixedDataset.from_spectrum(0.0, 1.0, [1.0], INF, zeta=[-2.0])
    with pytest.raises(InputError):
        MixedDataset.from_spectrum(0.0, 1.0, [math.inf], INF)


def test_dataset_defaults():
    d = full_dirichlet()
    assert d.k == 0 and d.inv_p_conj == 0.0
    assert len(d.s) == N and not d.zero_in_lambda
    tagged = full_dirichlet(smoothness=SmoothnessTag(k=2, p=math.inf, delta0=0.1))
    assert tagged.k == 2 and tagged.inv_p_conj == 1.0


def test_dataset_round_trip(tmp_path):
    d = MixedDataset((1.0), 0.5, (EigenRecord(3.0, INF, 0.1, 1), EigenRecord(7.0, 2.0)),
                     SmoothnessTag(k=1, p=2.0, delta0=0.2), weighted=False)
    d.to_json(tmp_path / "d.json")
    back = load_dataset(tmp_path / "d.json")
    assert back == d
    assert load_dataset(tmp_path / "d.json", a=0.75).a == 0.75
    (tmp_path / "bad.json").write_text('{"ell": 0}')
    with pytest.raises(InputError):
        load_dataset(tmp_path / "bad.json")


def test_build_system():
    d = MixedDataset(0.0, 1.0, (EigenRecord(0.0, 0.0, 1.0), EigenRecord(4.0, 0.0, 0.5), EigenRecord(-1.0, 0.0)))
    sys_ = build_system(0, d)
    assert sys_.labels == ["1", "x^2", "x^4", "cos(4x)", "x sin(4x)", "cosh(2x)"]
    assert sys_.max_frequency == pytest.approx(4.0)
    with pytest.raises(DomainError):
        build_system(0.5, d)


def test_system_function_values():
    x = np.array([0.3])
    assert SystemFunction("cos", 4.0)(x)[0] == pytest.approx(math.cos(1.2))
    assert SystemFunction("xsin", -1.0)(x)[0] == pytest.approx(0.3 * math.sinh(0.6))
    assert SystemFunction("mono", 4)(x)[0] == pytest.approx(0.3 ** 4)


def test_closedness_cosines():
    diag = closedness_diagnostic(cosine_system(12), 1.0, 2.0, 12)
    assert max(diag.probe_residuals) < 1e-12
    assert diag.gram_min_sv == pytest.approx(1.0, abs=1e-10)
    assert "HEURISTIC" in diag.to_dict()["label"]


def test_closedness_missing_frequency():
    fs = cosine_system(8).functions
    sys_ = type(cosine_system(1))(fs[:3] + fs[4:])
    diag = closedness_diagnostic(sys_, 1.0, 2.0, 7, probes=[lambda x: np.cos(6 * math.pi * x)])
    assert diag.probe_residuals[0] == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(DomainError):
        closedness_diagnostic(sys_, 1.0, 2.0, 99)


def test_gram_trend_decreasing():
    # plain Dirichlet cosines are orthogonal on (0, 1); the x sin terms are not
    assert gram_trend(build_system(0, MixedDataset.from_spectrum(0.0, 1.0, FREE_D[:20], INF)), 1.0,
                      [21])[0][1] == pytest.approx(1.0, abs=1e-12)
    tr = gram_trend(build_system(0, full_dirichlet()), 1.0, [4, 16, 32, 51])
    vals = [v for _, v in tr]
    assert vals[0] > vals[1] > vals[2] > vals[3] > 0.3


def test_margin_hand_value():
    d = MixedDataset.from_spectrum(0.0, 1.0, [4.0], INF)
    R = np.array([math.e, 3.0])
    rep = criterion_margin(d, R)
    expect = 2 * (1 - math.log(2)) - 4 * math.e / math.pi + 2.0
    assert rep.margin[0] == pytest.approx(expect, rel=1e-14)
    assert rep.log_coefficient == 2.0
    assert list(rep.m([1.0, 2.0])) == [0, 2]


def test_full_data_satisfied():
    rep = criterion_margin(full_dirichlet())
    assert rep.verdict == SATISFIED
    assert abs(rep.coef_lnR) < 0.05


def test_thin_data_undecided():
    thin = MixedDataset.from_spectrum(0.0, 1.0, FREE_D[1::2], INF)
    rep = criterion_margin(thin)
    assert rep.verdict == UNDECIDED
    # every second eigenvalue, no constants: the margin loses 3/pi per unit R
    assert rep.slope_R == pytest.approx(-3 / math.pi, abs=0.05)


def test_margin_grid_validation():
    with pytest.raises(DomainError):
        criterion_margin(full_dirichlet(), [3.0, 2.0])
    with pytest.raises(DomainError):
        criterion_margin(MixedDataset(0.0, 1.0, ()))


def test_report_outputs(tmp_path):
    rep = criterion_margin(full_dirichlet(), np.linspace(2, 50, 20))
    rep.to_csv(tmp_path / "m.csv")
    rows = (tmp_path / "m.csv").read_text().splitlines()
    assert rows[0] == "R,integral,margin,running_max" and len(rows) == 21
    assert float(rows[5].split(",")[2]) == rep.margin[4]
    rep.to_json(tmp_path / "m.json")


@given(keep=st.lists(st.booleans(), min_size=N, max_size=N), extra=st.integers(0, N - 1),
       with_zeta=st.booleans())
@settings(max_examples=30, deadline=None)
def test_margin_monotone_in_data(keep, extra, with_zeta):
    R = np.linspace(2, 160, 60)
    idx = [i for i in range(N) if keep[i]]
    base = MixedDataset.from_spectrum(0.0, 1.0, FREE_D[idx], INF)
    more_idx = sorted(set(idx) | {extra})
    zeta = [FREE_ZETA[i] if (with_zeta and i == extra) else None for i in more_idx]
    more = MixedDataset.from_spectrum(0.0, 1.0, FREE_D[more_idx], INF, zeta)
    if not idx:
        return
    assert np.all(np.array(criterion_margin(more, R).margin) >= np.array(criterion_margin(base, R).margin) - 1e-12)


def test_rational_jensen():
    for row in rational_jensen([4.0, 9.0, -2.5], [1.0, 30.0], [1.5, 2.7, 10.0], scale=2.0, nodes=512):
        assert row.error < 1e-10


def test_jensen_identical_indeterminate(q_step):
    assert jensen_audit(0.0, q_step, q_step).status == INDETERMINATE


def test_norming_rule_boundary():
    res = corollary_check("5.2", sigma=FREE_D, S=FREE_D, zeta=list(FREE_ZETA), a=1.0, ell=0.0, beta=INF)
    assert res.verdict == SATISFIED and res.margin == 0
    res = corollary_check("5.2", sigma=FREE_D, S=FREE_D[:-1], zeta=list(FREE_ZETA[:-1]), a=1.0, ell=0.0, beta=INF)
    assert res.verdict == UNDECIDED
    with pytest.raises(InputError):
        corollary_check("5.2", sigma=FREE_D, S=FREE_D, zeta=None, a=1.0, ell=0.0, beta=INF)


def test_spectrum_rule_quarter():
    res = corollary_check("5.3", sigma=FREE_D, S=FREE_D[::2], a=0.25, ell=0.0, beta=INF)
    assert res.verdict == SATISFIED
    assert set(np.round(res.margins, 12)) <= {0.0, 0.5}
    with pytest.raises(DomainError):
        corollary_check("5.3", sigma=FREE_D, S=FREE_D, a=0.75, ell=0.0, beta=INF)
    with pytest.raises(InputError):
        corollary_check("5.3", sigma=FREE_D, S=[1.0], a=0.25, ell=0.0, beta=INF)


def test_spectrum_rule_robin_shift():
    # a real beta lowers the requirement by 2a
    full = corollary_check("5.3", sigma=FREE_N, S=FREE_N, a=0.5, ell=0.0, beta=0.0)
    assert full.margin == pytest.approx(1.0)


def test_unweighted_endpoint_strict():
    res = corollary_check("5.2", sigma=FREE_D, S=FREE_D, zeta=list(FREE_ZETA), a=1.0, ell=-0.5,
                          beta=INF, weighted=False)
    assert res.verdict == UNDECIDED and res.notes


@pytest.mark.parametrize("ell", [0, 1, 2, 3])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_budget_formula(ell, k):
    assert budget(ell, k, INF) == ell // 2 + k + 1 == budget_brute_force(ell, k, INF)
    assert budget(ell, k, 0.5) == (ell + 1) // 2 + k + 1 == budget_brute_force(ell, k, 0.5)


def test_budget_rule():
    assert corollary_check("5.6", ell=2, k=1, beta=INF, omitted=3).verdict == SATISFIED
    assert corollary_check("5.6", ell=2, k=1, beta=INF, omitted=4).verdict == UNDECIDED
    res = corollary_check("5.6", ell=0, k=0, beta=INF, sigma=FREE_D, S=FREE_D[1:])
    assert res.details["omitted"] == 1 and res.verdict == SATISFIED
    assert budget(-0.5, 0, INF, weighted=False) == budget(-0.5, 0, INF) - 1


def test_two_spectra_rule():
    res = corollary_check("5.7", sigma1=FREE_D, sigma2=FREE_N, beta1=INF, beta2=0.0, M=[])
    assert res.verdict == SATISFIED
    res = corollary_check("5.7", sigma1=FREE_D, sigma2=FREE_N, beta1=INF, beta2=0.0, M=[],
                          given2=list(range(1, N, 2)))
    assert res.verdict == UNDECIDED
    # a known eigenvalue of the first spectrum can stand in for one of the second
    res = corollary_check("5.7", sigma1=FREE_D, sigma2=FREE_N, beta1=INF, beta2=0.0, M=[3],
                          given2=[i for i in range(1, N + 1) if i != 3])
    assert res.verdict == SATISFIED
    with pytest.raises(InputError):
        corollary_check("5.7", sigma1=FREE_D, sigma2=FREE_D, beta1=INF, beta2=INF, M=[])


def test_paired_rules():
    res = corollary_check("5.9", a_seq=FREE_D, b_seq=FREE_N, beta1=INF, beta2=0.0)
    assert res.verdict == SATISFIED
    res = corollary_check("5.9", a_seq=FREE_D, b_seq=FREE_N, beta1=INF, beta2=0.0, ell=-0.5, weighted=False)
    assert res.verdict == UNDECIDED
    res = corollary_check("5.9", a_seq=FREE_D, b_seq=FREE_N, beta1=INF, beta2=0.0, ell=-0.5, weighted=False,
                          extra_eigenvalue=True)
    assert res.verdict == SATISFIED
    n = np.arange(1, N + 1)
    close = corollary_check("5.8", a_seq=FREE_D * (1 + 2.0 ** -n), b_seq=FREE_D, beta1=1.0, beta2=2.0)
    assert close.verdict == SATISFIED
    with pytest.raises(InputError):
        corollary_check("9.9")
    with pytest.raises(InputError):
        corollary_check("5.8", a_seq=[1.0], b_seq=[2.0], beta1=1.0, beta2=2.0)


def test_dataset_corollary():
    assert dataset_corollary(full_dirichlet()).which == "5.2"
    plain = MixedDataset.from_spectrum(0.0, 0.5, FREE_D, INF)
    assert dataset_corollary(plain).which == "5.3"
    mixed = MixedDataset(0.0, 1.0, (EigenRecord(1.0, INF), EigenRecord(2.0, 0.0)))
    with pytest.raises(InputError):
        dataset_corollary(mixed)


def test_counting_bundle():
    n = np.arange(1, 40)
    out = counting_lemma_checks(mu=(math.pi * np.arange(0, 800)) ** 2, a=(1 + 2.0 ** -n) * FREE_D[:39],
                                b=FREE_D[:39], zeros=FREE_N, poles=FREE_D, sep_a=FREE_D, sep_b=FREE_N,
                                weights_a=FREE_D, weights_b=FREE_N)
    assert set(out) == {"lower_bound", "perturbation", "zero_pole", "separation", "weights"}
    assert all(v.holds for v in out.values())
