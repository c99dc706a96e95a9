"""Mixed-data uniqueness criteria.

A :class:`MixedDataset` lists eigenvalues ``lam_n`` (each with its boundary
parameter) known to be shared by two potentials that agree on ``(a, 1)``,
some of them also carrying the norming constant.  From it we build the
associated function system, evaluate the counting criterion

    margin(R) = int_0^R m(t)/t dt - 4aR/pi + (k + 2 ell + 2 + 1/p') ln R,
    m(t) = 2 n_Lambda(t^2) + 2 n_S(t^2),

audit the Jensen-formula inequality behind it, and check the data-sufficiency
inequalities that follow from it for single and paired spectra.

Verdicts are ``SATISFIED`` or ``UNDECIDED``; a finite grid can never prove a
statement about a limit, so ``UNDECIDED`` only says the supplied data do not
show the criterion.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import counting
from .counting import PreconditionError
from .potential import DomainError, Potential, SmoothnessTag, conjugate_inverse
from .solver import INF, is_dirichlet
from .spectrum import beta_from_json, beta_to_json, negative_window

SATISFIED = "SATISFIED"
UNDECIDED = "UNDECIDED"
INDETERMINATE = "INDETERMINATE"


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# data


@dataclass(frozen=True)
class EigenRecord:
    value: float
    beta: float
    zeta: float | None = None
    index: int | None = None  # oscillation index, when known

    def to_dict(self) -> dict:
        d = {"value": self.value, "beta": beta_to_json(self.beta)}
        if self.zeta is not None:
            d["zeta"] = self.zeta
        if self.index is not None:
            d["index"] = self.index
        return d


@dataclass(frozen=True)
class MixedDataset:
    """Shared eigenvalues ``Lambda``; those with a norming constant form ``S``.

    ``smoothness`` describes ``q - qh`` near ``a``; when absent the weakest
    assumption ``k = 0, p = 1`` (plain integrability) is used.  ``weighted``
    records membership in the logarithmically weighted class and only
    matters for ``ell = -1/2``.
    """

    ell: float
    a: float
    records: tuple[EigenRecord, ...]
    smoothness: SmoothnessTag | None = None
    weighted: bool = True

    def __post_init__(self):
        if self.ell < -0.5:
            raise DomainError(f"ell must be >= -1/2, got {self.ell}")
        if not (0 < self.a <= 1):
            raise DomainError(f"split point must lie in (0, 1], got {self.a}")
        vals = [r.value for r in self.records]
        if not all(math.isfinite(v) for v in vals):
            raise InputError("eigenvalues must be finite")
        if len(set(vals)) != len(vals):
            raise InputError("eigenvalues must be distinct")
        for r in self.records:
            if r.zeta is not None and not (r.zeta > 0 and math.isfinite(r.zeta)):
                raise InputError(f"norming constant at {r.value} must be positive, got {r.zeta}")

    @property
    def lam(self) -> np.ndarray:
        return np.array([r.value for r in self.records], dtype=float)

    @property
    def s(self) -> np.ndarray:
        return np.array([r.value for r in self.records if r.zeta is not None], dtype=float)

    @property
    def zero_in_lambda(self) -> bool:
        return any(r.value == 0 for r in self.records)

    @property
    def zero_in_s(self) -> bool:
        return any(r.value == 0 and r.zeta is not None for r in self.records)

    @property
    def k(self) -> int:
        return self.smoothness.k if self.smoothness else 0

    @property
    def inv_p_conj(self) -> float:
        return self.smoothness.inv_conjugate if self.smoothness else conjugate_inverse(1.0)

    @classmethod
    def from_spectrum(cls, ell: float, a: float, values, beta, zeta=None, index=None,
                      **kw) -> MixedDataset:
        zs = [None] * len(values) if zeta is None else list(zeta)
        ix = [None] * len(values) if index is None else [int(i) for i in index]
        recs = tuple(EigenRecord(float(v), beta, None if z is None else float(z), i)
                     for v, z, i in zip(values, zs, ix))
        return cls(float(ell), float(a), recs, **kw)

    def to_dict(self) -> dict:
        d = {"ell": self.ell, "a": self.a, "weighted": self.weighted,
             "lambda": [r.to_dict() for r in self.records]}
        if self.smoothness:
            t = self.smoothness
            d["smoothness"] = {"k": t.k, "p": "inf" if math.isinf(t.p) else t.p, "delta0": t.delta0}
        return d

    @classmethod
    def from_dict(cls, d: dict, *, a: float | None = None) -> MixedDataset:
        try:
            recs = tuple(EigenRecord(float(r["value"]), beta_from_json(r.get("beta", "inf")),
                                     None if r.get("zeta") is None else float(r["zeta"]),
                                     None if r.get("index") is None else int(r["index"]))
                         for r in d["lambda"])
            sm = d.get("smoothness")
            tag = None
            if sm:
                tag = SmoothnessTag(int(sm.get("k", 0)), float(sm.get("p", math.inf)),
                                    float(sm.get("delta0", 0.1)))
            return cls(float(d["ell"]), float(a if a is not None else d["a"]), recs, tag,
                       bool(d.get("weighted", True)))
        except KeyError as e:
            raise InputError(f"missing field {e.args[0]!r}") from None

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def load_dataset(path: str | Path, *, a: float | None = None) -> MixedDataset:
    return MixedDataset.from_dict(json.loads(Path(path).read_text()), a=a)


# ---------------------------------------------------------------------------
# function system


@dataclass(frozen=True)
class SystemFunction:
    kind: str  # "mono", "cos", "xsin"
    param: float  # power for monomials, lam otherwise

    @property
    def label(self) -> str:
        if self.kind == "mono":
            return "1" if self.param == 0 else f"x^{int(self.param)}"
        lam = self.param
        if lam < 0:
            w = 2 * math.sqrt(-lam)
            return f"cosh({w:.17g}x)" if self.kind == "cos" else f"x sinh({w:.17g}x)"
        w = 2 * math.sqrt(lam)
        return f"cos({w:.17g}x)" if self.kind == "cos" else f"x sin({w:.17g}x)"

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "mono":
            return x ** self.param
        lam = self.param
        if lam < 0:
            w = 2 * math.sqrt(-lam)
            return np.cosh(w * x) if self.kind == "cos" else x * np.sinh(w * x)
        w = 2 * math.sqrt(lam)
        return np.cos(w * x) if self.kind == "cos" else x * np.sin(w * x)


@dataclass(frozen=True)
class FunctionSystem:
    functions: tuple[SystemFunction, ...]

    def __len__(self):
        return len(self.functions)

    @property
    def labels(self) -> list[str]:
        return [f.label for f in self.functions]

    def matrix(self, x, M: int | None = None) -> np.ndarray:
        fs = self.functions if M is None else self.functions[:M]
        return np.column_stack([f(x) for f in fs])

    @property
    def max_frequency(self) -> float:
        return max((2 * math.sqrt(abs(f.param)) for f in self.functions if f.kind != "mono"),
                   default=0.0)


def monomial_order(ell: int, zero_in_lambda: bool, zero_in_s: bool) -> int:
    if zero_in_s:
        return ell + 2
    return ell + 1 if zero_in_lambda else ell


def build_system(ell, data: MixedDataset) -> FunctionSystem:
    """Monomials ``x^{2k}``, then ``cos(2 sqrt(lam) x)`` and, for ``lam`` in S,
    ``x sin(2 sqrt(lam) x)``, ordered by the data."""
    if ell < 0 or float(ell) != int(ell):
        raise DomainError(f"the function system needs a nonnegative integer ell, got {ell}")
    ell = int(ell)
    K = monomial_order(ell, data.zero_in_lambda, data.zero_in_s)
    fs = [SystemFunction("mono", 2 * j) for j in range(K + 1)]
    for r in data.records:
        if r.value == 0:
            continue
        fs.append(SystemFunction("cos", r.value))
        if r.zeta is not None:
            fs.append(SystemFunction("xsin", r.value))
    return FunctionSystem(tuple(fs))


def cosine_system(n: int) -> FunctionSystem:
    """``{cos(2 j pi x)}_{j < n}`` as a system (``j = 0`` is the constant)."""
    fs = [SystemFunction("mono", 0)] + [SystemFunction("cos", (j * math.pi) ** 2) for j in range(1, n)]
    return FunctionSystem(tuple(fs))


@dataclass(frozen=True)
class ClosednessDiagnostic:
    """Evidence only: a small Gram floor or a large probe residual hints at a
    non-closed system; neither proves anything."""

    M: int
    a: float
    p: float
    gram_min_sv: float
    probe_residuals: tuple[float, ...]
    label: str = "HEURISTIC necessary-evidence diagnostic, not a proof of closedness"

    def to_dict(self) -> dict:
        return {"M": self.M, "a": self.a, "p": "inf" if math.isinf(self.p) else self.p,
                "gram_min_sv": self.gram_min_sv, "probe_residuals": list(self.probe_residuals),
                "label": self.label}


def _gauss_nodes(a: float, freq: float, M: int) -> tuple[np.ndarray, np.ndarray]:
    # composite Gauss-Legendre, panels short against the highest frequency
    panels = max(4, int(math.ceil(freq * a / 4)) + M // 4)
    x, w = np.polynomial.legendre.leggauss(24)
    edges = np.linspace(0.0, a, panels + 1)
    xs = ((edges[1:] - edges[:-1])[:, None] * (x + 1) / 2 + edges[:-1, None]).ravel()
    ws = ((edges[1:] - edges[:-1])[:, None] * w / 2).ravel()
    return xs, ws


def closedness_diagnostic(system: FunctionSystem, a: float, p: float, M: int,
                          probes: Sequence[Callable] | None = None) -> ClosednessDiagnostic:
    """Gram floor of the first ``M`` functions in ``L^2(0, a)`` and the relative
    ``L^2`` residual of projecting each probe onto their span.

    Default probes are ``cos(2 j pi x / a)``, ``j < M``.
    """
    if M < 1 or M > len(system):
        raise DomainError(f"truncation M={M} outside 1..{len(system)}")
    if probes is None:
        probes = [(lambda x, j=j: np.cos(2 * j * math.pi * x / a)) for j in range(M)]
    freq = max(system.max_frequency, 2 * math.pi * M / a)
    xs, ws = _gauss_nodes(a, freq, M)
    F = system.matrix(xs, M)
    sw = np.sqrt(ws)[:, None]
    G = (F * ws[:, None]).T @ F
    d = 1.0 / np.sqrt(np.diag(G))
    sv = float(np.linalg.svd(G * d[:, None] * d[None, :], compute_uv=False).min())
    A = F * sw
    res = []
    for pr in probes:
        y = np.asarray(pr(xs), dtype=float) * sw[:, 0]
        c, *_ = np.linalg.lstsq(A, y, rcond=None)
        ny = np.linalg.norm(y)
        res.append(float(np.linalg.norm(A @ c - y) / ny) if ny > 0 else 0.0)
    return ClosednessDiagnostic(M, float(a), float(p), sv, tuple(res))


def gram_trend(system: FunctionSystem, a: float, Ms: Sequence[int]) -> list[tuple[int, float]]:
    return [(M, closedness_diagnostic(system, a, 2.0, M, probes=[]).gram_min_sv) for M in Ms]


# ---------------------------------------------------------------------------
# counting criterion


@dataclass(frozen=True)
class CountingReport:
    ell: float
    a: float
    log_coefficient: float  # k + 2 ell + 2 + 1/p'
    lam_steps: tuple[float, ...]  # sorted |lam|, the jumps of n_Lambda
    s_steps: tuple[float, ...]
    R: tuple[float, ...]
    integral: tuple[float, ...]
    margin: tuple[float, ...]
    running_max: tuple[float, ...]
    slope_R: float
    coef_lnR: float
    verdict: str

    def m(self, t) -> np.ndarray:
        return counting.m_function(self.lam_steps, self.s_steps, t)

    def to_dict(self) -> dict:
        return {"ell": self.ell, "a": self.a, "log_coefficient": self.log_coefficient,
                "lambda_steps": list(self.lam_steps), "s_steps": list(self.s_steps),
                "R": list(self.R), "integral": list(self.integral), "margin": list(self.margin),
                "running_max": list(self.running_max), "slope_R": self.slope_R,
                "coef_lnR": self.coef_lnR, "verdict": self.verdict}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["R", "integral", "margin", "running_max"])
            for row in zip(self.R, self.integral, self.margin, self.running_max):
                w.writerow([f"{v:.17g}" for v in row])


def default_R_grid(data: MixedDataset, n: int = 400) -> np.ndarray:
    top = math.sqrt(max(np.abs(data.lam).max(), 4.0))
    return np.linspace(min(2.0, top / 2), top, n)


def criterion_margin(data: MixedDataset, R_grid=None, *, log_tol: float = 0.5) -> CountingReport:
    """Exact margin on the grid plus a trend verdict.

    ``SATISFIED`` when a fit ``margin ~ c0 + c ln R`` over the upper half of
    the grid (in ``ln R``) has ``c >= -log_tol``: the margin is not seen to
    drift to minus infinity.
    """
    if len(data.records) == 0:
        raise DomainError("empty eigenvalue set")
    R = default_R_grid(data) if R_grid is None else np.asarray(R_grid, dtype=float)
    if R.ndim != 1 or len(R) < 2 or np.any(R <= 0) or np.any(np.diff(R) <= 0):
        raise DomainError("R grid must be positive and strictly increasing")
    c = data.k + 2 * data.ell + 2 + data.inv_p_conj
    I = counting.m_integral(data.lam, data.s, R)
    mg = I - 4 * data.a * R / math.pi + c * np.log(R)
    upper = np.log(R) >= 0.5 * (math.log(R[0]) + math.log(R[-1]))
    if upper.sum() < 2:
        upper[-2:] = True
    slope = float(np.polyfit(R[upper], mg[upper], 1)[0])
    cl = float(np.polyfit(np.log(R[upper]), mg[upper], 1)[0])
    verdict = SATISFIED if cl >= -log_tol else UNDECIDED
    return CountingReport(data.ell, data.a, c, tuple(np.sort(np.abs(data.lam))),
                          tuple(np.sort(np.abs(data.s))), tuple(R), tuple(I), tuple(mg),
                          tuple(np.maximum.accumulate(mg)), slope, cl, verdict)


# ---------------------------------------------------------------------------
# Jensen audit


@dataclass(frozen=True)
class JensenRow:
    r: float
    counting: float  # int_0^r m(t)/t dt
    circle_average: float
    log_h0: float
    holds: bool

    @property
    def rhs(self) -> float:
        return self.circle_average + abs(self.log_h0)


@dataclass(frozen=True)
class JensenAudit:
    status: str
    center: float
    rows: tuple[JensenRow, ...] = ()
    zeros: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {"status": self.status, "center": self.center, "zeros": list(self.zeros),
                "rows": [{"r": w.r, "counting": w.counting, "circle_average": w.circle_average,
                          "log_h0": w.log_h0, "rhs": w.rhs, "holds": w.holds} for w in self.rows]}


def circle_average(f_log: Callable[[np.ndarray], np.ndarray], center: complex, rho: float,
                   nodes: int = 256) -> float:
    """Trapezoid mean of ``f_log`` on the circle ``|lam - center| = rho``."""
    th = 2 * np.pi * np.arange(nodes) / nodes
    return float(np.mean(f_log(center + rho * np.exp(1j * th))))


@dataclass(frozen=True)
class RationalJensenRow:
    r: float
    difference: float  # zero-minus-pole counting integral in z = sqrt(lam)
    circle_term: float  # circle average minus ln|G(0)|

    @property
    def error(self) -> float:
        return abs(self.difference - self.circle_term)


def rational_jensen(zeros, poles, radii, *, scale: float = 1.0, nodes: int = 256) -> list[RationalJensenRow]:
    """Jensen identity for ``G(lam) = scale prod(lam - z) / prod(lam - p)``.

    In ``z = sqrt(lam)`` each zero or pole of ``G`` splits in two, so the
    counting side is twice ``int_0^r (n_zeros - n_poles)(t^2)/t dt``.
    """
    zeros = np.asarray(zeros, dtype=complex)
    poles = np.asarray(poles, dtype=complex)

    def logG(lam):
        lam = np.asarray(lam, dtype=complex)
        out = np.full(lam.shape, math.log(abs(scale)))
        for z in zeros:
            out += np.log(np.abs(lam - z))
        for p in poles:
            out -= np.log(np.abs(lam - p))
        return out

    g0 = float(logG(np.array([0.0]))[0])
    rows = []
    for r in radii:
        d = 2 * (counting.log_integral(np.abs(zeros), r)[0] - counting.log_integral(np.abs(poles), r)[0])
        rows.append(RationalJensenRow(float(r), float(d), circle_average(logG, 0.0, r * r, nodes) - g0))
    return rows


def _same_potential(q: Potential, qh: Potential) -> bool:
    xs = np.linspace(0.0, 1.0, 4097)[1:-1]
    return bool(np.all(q(xs) == qh(xs)))


def jensen_audit(ell: float, q: Potential, qh: Potential, radii=(5.0, 10.0, 20.0), *,
                 lam_set=None, s_set=None, nodes: int = 256, a: float | None = None,
                 jobs: int = 1, tol: float = 1e-8) -> JensenAudit:
    """Check ``int_0^r m/t <= mean ln|H(r^2 e^{i theta})| + |ln|H(0)||`` per radius.

    Without explicit counting data, ``Lambda`` is the set of real zeros of
    ``H`` found by a sign scan on ``[-Lambda_0, max(r)^2]`` and ``S`` is
    empty.  If ``H(0)`` vanishes the circles are centred at a nearby
    ``lam_0`` instead and zeros are counted by ``|lam - lam_0|``.
    """
    from .hfield import agreement_point, h_profile, h_scale, h_value, real_zeros_of_h

    if _same_potential(q, qh):
        return JensenAudit(INDETERMINATE, 0.0)
    x_a = agreement_point(q, qh, a)
    rmax = max(radii)
    if lam_set is None:
        lo = -max(negative_window(q), negative_window(qh))
        lam_set = real_zeros_of_h(ell, q, qh, lo, rmax * rmax * 1.05,
                                  n=max(400, int(20 * rmax)), a=x_a)
    lam_set = np.asarray(lam_set, dtype=float)
    s_set = np.asarray([] if s_set is None else s_set, dtype=float)

    center = 0.0
    for c in (0.0, 0.37, -0.61, 1.13, -1.7):
        h0 = h_value(ell, q, qh, c, a=x_a)
        if abs(h0.value) > 1e-12 * h_scale(ell, q, qh, c, a=x_a):
            center = c
            break
    log_h0 = h_value(ell, q, qh, center, a=x_a).log_abs

    def one(r):
        rr = float(r)
        for _ in range(6):
            th = 2 * np.pi * np.arange(nodes) / nodes
            lams = center + rr * rr * np.exp(1j * th)
            prof = h_profile(ell, q, qh, list(lams), a=x_a)
            la = prof.log_abs()
            if np.all(np.isfinite(la)):
                break
            rr *= 1.001
        else:
            raise ArithmeticError(f"H vanishes on every perturbed circle near r={r}")
        avg = float(np.mean(la))
        cnt = float(2 * counting.log_integral(lam_set - center, rr)[0]
                    + 2 * counting.log_integral(s_set - center, rr)[0])
        return JensenRow(rr, cnt, avg, log_h0, cnt <= avg + abs(log_h0) + tol * max(1.0, abs(avg)))

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            rows = list(ex.map(one, radii))
    else:
        rows = [one(r) for r in radii]
    status = SATISFIED if all(w.holds for w in rows) else UNDECIDED
    return JensenAudit(status, center, tuple(rows), tuple(float(v) for v in lam_set))


# ---------------------------------------------------------------------------
# data-sufficiency rules


@dataclass(frozen=True)
class CorollaryResult:
    which: str
    verdict: str
    margin: float
    t: tuple[float, ...] = ()
    margins: tuple[float, ...] = ()
    details: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {"which": self.which, "verdict": self.verdict, "margin": self.margin,
                "t": list(self.t), "margins": list(self.margins), "details": self.details,
                "notes": list(self.notes)}


def _unweighted_half(ell: float, weighted: bool) -> bool:
    return ell == -0.5 and not weighted


def _t_points(values, t_min: float, t_max: float) -> np.ndarray:
    v = np.unique(np.abs(np.asarray(values, dtype=float)))
    pts = np.concatenate([v, np.nextafter(v, -np.inf), [t_min, t_max]])
    pts = pts[(pts >= t_min) & (pts <= t_max)]
    return np.unique(pts)


def _single_spectrum(which, sigma, S, a, ell, beta, weighted, t_min, factor, a_max):
    if not (0 < a <= a_max):
        raise DomainError(f"a must lie in (0, {a_max}], got {a}")
    sigma = np.asarray(sigma, dtype=float)
    S = np.asarray(S, dtype=float)
    if len(sigma) == 0:
        raise InputError("empty spectrum")
    if not np.all(np.isin(S, sigma)):
        raise InputError("S must be a subset of the spectrum")
    shift = 0.0 if is_dirichlet(beta) else -factor * a
    t = _t_points(sigma, t_min, float(np.abs(sigma).max()))
    rhs = factor * a * counting.count(sigma, t) + factor * (a - 1) * ell / 2 + shift
    mg = counting.count(S, t) - rhs
    worst = float(mg.min())
    notes = []
    strict = _unweighted_half(ell, weighted) and a == a_max
    if strict:
        notes.append("ell = -1/2 outside the weighted class at the endpoint a: a strictly positive margin is required")
    ok = worst > 0 if strict else worst >= -1e-12
    return CorollaryResult(which, SATISFIED if ok else UNDECIDED, worst, tuple(map(float, t)), tuple(map(float, mg)),
                           {"a": a, "ell": ell, "beta": beta_to_json(beta)}, tuple(notes))


def budget(ell: float, k: int, beta, *, weighted: bool = True) -> int:
    """Number of eigenvalues that may be left out of a single spectrum when
    ``q`` is known on ``(1/2, 1)`` and ``2k`` times smooth near ``1/2``."""
    b = (math.floor(ell / 2) if is_dirichlet(beta) else math.floor((ell + 1) / 2)) + k + 1
    return b - 1 if _unweighted_half(ell, weighted) else b


def budget_brute_force(ell: float, k: int, beta) -> int:
    """Largest ``M`` with ``2 n - 2 M >= 2 n - ell - 2k - c`` (``c = 2`` or ``3``)."""
    c = 2 if is_dirichlet(beta) else 3
    M = 0
    while 2 * (M + 1) <= ell + 2 * k + c:
        M += 1
    return M


def _log_sum_condition(lam_inf, lam_beta, omitted_idx, r_grid):
    lam_inf = np.asarray(lam_inf, dtype=float)
    lam_beta = np.asarray(lam_beta, dtype=float)
    r = np.asarray(r_grid, dtype=float)
    vals = []
    for rr in r:
        s = 0.0
        for k in omitted_idx:
            if k - 1 < min(len(lam_inf), len(lam_beta)) and abs(lam_inf[k - 1]) <= rr * rr:
                s += 0.5 * math.log(abs(lam_inf[k - 1]) / abs(lam_beta[k - 1]))
        vals.append(s)
    slope = float(np.polyfit(np.log(r), vals, 1)[0]) if len(r) > 1 else 0.0
    return slope, vals


def _two_spectra(sigma1, sigma2, beta1, beta2, M, given2, ell, weighted, t_min):
    sigma1 = np.asarray(sigma1, dtype=float)
    sigma2 = np.asarray(sigma2, dtype=float)
    if beta1 == beta2:
        raise InputError("the two boundary parameters must differ")
    N = min(len(sigma1), len(sigma2))
    M = sorted(set(int(i) for i in M))
    chi = 0 if (is_dirichlet(beta1) or is_dirichlet(beta2)) else 1
    if given2 is None:
        given2 = [i for i in range(1, N + 1) if i not in M]
    given2 = sorted(set(int(i) for i in given2))
    if any(i < 1 or i > N for i in M + given2):
        raise InputError(f"indices must lie in 1..{N}")
    s1M = sigma1[[i - 1 for i in M]]
    s2g = sigma2[[i - 1 for i in given2]]
    t_max = float(min(np.abs(sigma1[:N]).max(), np.abs(sigma2[:N]).max()))
    t = _t_points(np.concatenate([sigma1[:N], sigma2[:N]]), t_min, t_max)
    m = 2 * counting.count(sigma1, t) + 2 * counting.count(s1M, t) + 2 * counting.count(s2g, t)
    floor = 4 * np.minimum(counting.count(sigma1, t), counting.count(sigma2, t))
    mg = m - floor + 2 * chi
    notes = []
    details = {"chi": chi, "M": M, "given2": given2}
    ok_extra = True
    if _unweighted_half(ell, weighted):
        if chi == 1:
            mg = mg - 2
            notes.append("ell = -1/2 outside the weighted class, both parameters finite: one extra eigenvalue required")
        else:
            lam_inf, lam_b = (sigma1, sigma2) if is_dirichlet(beta1) else (sigma2, sigma1)
            omitted = [i for i in range(1, N + 1) if i not in given2]
            rg = np.geomspace(2.0, math.sqrt(t_max), 40) if t_max > 16 else np.array([2.0, 4.0])
            slope, _ = _log_sum_condition(lam_inf, lam_b, omitted, rg)
            details["log_sum_slope"] = slope
            ok_extra = slope > 0
            notes.append("ell = -1/2 outside the weighted class: log-sum growth condition checked")
    worst = float(mg.min())
    ok = worst >= -1e-12 and ok_extra
    return CorollaryResult("5.7", SATISFIED if ok else UNDECIDED, worst, tuple(map(float, t)), tuple(map(float, mg)),
                           details, tuple(notes))


def _paired(which, a_seq, b_seq, beta1, beta2, ell, weighted, extra_eigenvalue):
    if beta1 == beta2:
        raise InputError("the two boundary parameters must differ")
    a_seq = np.asarray(a_seq, dtype=float)
    b_seq = np.asarray(b_seq, dtype=float)
    if len(a_seq) != len(b_seq) or len(a_seq) < 2:
        raise InputError("A and B must be sequences of equal length >= 2")
    one_inf = is_dirichlet(beta1) or is_dirichlet(beta2)
    notes = []
    need_extra = False
    if _unweighted_half(ell, weighted):
        need_extra = one_inf if which == "5.9" else not one_inf
        if need_extra:
            notes.append("ell = -1/2 outside the weighted class: one extra eigenvalue required")
    if which == "5.9":
        chk = counting.weights_check(a_seq, b_seq)
        details = {"distances": list(chk.distances), "l1_tail_ratio": chk.l1_tail_ratio}
        margin = -chk.l1_tail_ratio
    else:
        chk = counting.product_check(a_seq, b_seq)
        details = {"tail_ratio": chk.tail_ratio}
        margin = -chk.tail_ratio
        if not one_inf:
            notes.append("both parameters finite: one further eigenvalue of the second spectrum is dropped")
    ok = chk.holds and (extra_eigenvalue or not need_extra)
    return CorollaryResult(which, SATISFIED if ok else UNDECIDED, float(margin), details=details,
                           notes=tuple(notes))


def corollary_check(which: str, **inputs) -> CorollaryResult:
    """Data-sufficiency check for one rule, selected by key.

    ``"5.3"``: ``sigma, S, a, ell, beta`` (``a`` in (0, 1/2]).
    ``"5.2"``: same plus ``zeta`` for every element of ``S`` (``a`` in (0, 1]).
    ``"5.6"``: ``ell, k, beta`` and ``omitted`` (a count) or ``sigma, S``.
    ``"5.7"``: ``sigma1, sigma2, beta1, beta2, M`` and optionally ``given2``
    (indices of the second spectrum supplied; default all outside ``M``).
    ``"5.9"``, ``"5.8"``: ``a_seq, b_seq, beta1, beta2``.
    Common options: ``weighted`` (default True), ``t_min`` (default 0),
    ``extra_eigenvalue`` (default False).
    """
    weighted = bool(inputs.get("weighted", True))
    ell = float(inputs.get("ell", 0.0))
    t_min = float(inputs.get("t_min", 0.0))
    try:
        if which == "5.3":
            return _single_spectrum("5.3", inputs["sigma"], inputs["S"], float(inputs["a"]), ell,
                                    inputs["beta"], weighted, t_min, 2.0, 0.5)
        if which == "5.2":
            S = np.asarray(inputs["S"], dtype=float)
            zeta = inputs.get("zeta")
            if zeta is None or len(zeta) != len(S) or not all(z is not None and z > 0 for z in zeta):
                raise InputError("the norming-constant rule needs a positive zeta for every element of S")
            return _single_spectrum("5.2", inputs["sigma"], S, float(inputs["a"]), ell,
                                    inputs["beta"], weighted, t_min, 1.0, 1.0)
        if which == "5.6":
            k = int(inputs["k"])
            beta = inputs["beta"]
            if "omitted" in inputs:
                omitted = int(inputs["omitted"])
            else:
                sigma = np.asarray(inputs["sigma"], dtype=float)
                omitted = int(np.sum(~np.isin(sigma, np.asarray(inputs["S"], dtype=float))))
            b = budget(ell, k, beta, weighted=weighted)
            notes = ()
            if _unweighted_half(ell, weighted):
                notes = ("ell = -1/2 outside the weighted class: budget reduced by one",)
            return CorollaryResult("5.6", SATISFIED if omitted <= b else UNDECIDED, float(b - omitted),
                                   details={"budget": b, "omitted": omitted,
                                            "brute_force": budget_brute_force(ell, k, beta)},
                                   notes=notes)
        if which == "5.7":
            return _two_spectra(inputs["sigma1"], inputs["sigma2"], inputs["beta1"], inputs["beta2"],
                                inputs.get("M", ()), inputs.get("given2"), ell, weighted, t_min)
        if which in ("5.9", "5.8"):
            return _paired(which, inputs["a_seq"], inputs["b_seq"], inputs["beta1"], inputs["beta2"],
                           ell, weighted, bool(inputs.get("extra_eigenvalue", False)))
    except KeyError as e:
        raise InputError(f"rule {which!r}: missing input {e.args[0]!r}") from None
    raise InputError(f"unknown rule {which!r}")


def dataset_corollary(data: MixedDataset, sigma=None) -> CorollaryResult:
    """Single-spectrum check on a dataset: key "5.2" when norming constants are
    present, else "5.3".  ``sigma`` defaults to the data eigenvalues."""
    betas = {r.beta for r in data.records}
    if len(betas) != 1:
        raise InputError("single-spectrum rules need one boundary parameter")
    beta = betas.pop()
    sigma = data.lam if sigma is None else sigma
    S_rec = [r for r in data.records if r.zeta is not None]
    common = {"sigma": sigma, "ell": data.ell, "beta": beta, "weighted": data.weighted, "a": data.a}
    if S_rec:
        return corollary_check("5.2", S=[r.value for r in S_rec], zeta=[r.zeta for r in S_rec], **common)
    return corollary_check("5.3", S=list(data.lam), **common)


# ---------------------------------------------------------------------------
# counting checks


def counting_lemma_checks(*, mu=None, alpha1: float = math.pi, alpha2: float = 0.0, R_grid=None,
                          a=None, b=None, r_grid=None, declared_tail: str = "summable",
                          zeros=None, poles=None, sep_a=None, sep_b=None,
                          weights_a=None, weights_b=None) -> dict:
    """Run whichever counting checks the given sequences allow."""
    out = {}
    if mu is not None:
        R = np.linspace(10, 1000, 400) if R_grid is None else R_grid
        out["lower_bound"] = counting.lower_bound_check(mu, alpha1, alpha2, R)
    if a is not None and b is not None:
        r = np.geomspace(1, 1e4, 2000) if r_grid is None else r_grid
        out["perturbation"] = counting.perturbation_check(a, b, r, declared_tail=declared_tail)
    if zeros is not None and poles is not None:
        r = np.geomspace(1, 1e3, 400) if r_grid is None else r_grid
        out["zero_pole"] = counting.zero_pole_check(zeros, poles, r)
    if sep_a is not None and sep_b is not None:
        out["separation"] = counting.separation_check(sep_a, sep_b)
    if weights_a is not None and weights_b is not None:
        out["weights"] = counting.weights_check(weights_a, weights_b)
    return out


__all__ = [
    "SATISFIED", "UNDECIDED", "INDETERMINATE", "InputError", "PreconditionError", "EigenRecord",
    "MixedDataset", "load_dataset", "SystemFunction", "FunctionSystem", "build_system",
    "cosine_system", "closedness_diagnostic", "gram_trend", "CountingReport", "criterion_margin",
    "JensenAudit", "jensen_audit", "rational_jensen", "CorollaryResult", "corollary_check",
    "dataset_corollary", "budget", "budget_brute_force", "counting_lemma_checks", "INF",
]
