"""The two-potential entire function

    H(lam) = phi(lam, x, qh) phi'(lam, x, q) - phi(lam, x, q) phi'(lam, x, qh)
           = int_0^x (q - qh) phi(lam, ., q) phi(lam, ., qh),

which does not depend on ``x`` once ``q = qh`` on ``(x, 1)``.  Its real zeros
are exactly the eigenvalues shared by ``q`` and ``qh`` for a common boundary
parameter.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy import integrate
from scipy.optimize import brentq

from .potential import DomainError, Potential, SmoothnessTag, conjugate_inverse
from .solver import INF, Scaled, SpectralParameter, as_param, is_dirichlet, phi, prufer, target_angle
from .spectrum import eigenvalue, kappa_exact, negative_window, norming_constant, tau

AGREE_SAMPLES = 4096


def agreement_point(q: Potential, qh: Potential, a: float | None = None) -> float:
    """Smallest checked ``x`` with ``q = qh`` on ``(x, 1)``.

    An explicit ``a`` is validated by sampling; otherwise it is inferred from
    the breakpoints and a uniform sample grid.
    """
    xs = np.linspace(0.0, 1.0, AGREE_SAMPLES + 1)[1:-1]
    bps = np.array(sorted(set(q.breakpoints) | set(qh.breakpoints)), dtype=float)
    cand = np.unique(np.concatenate([xs, bps, bps + 1e-12, bps - 1e-12]))
    cand = cand[(cand > 0) & (cand < 1)]
    diff = np.abs(q(cand) - qh(cand)) > 1e-14 * (1 + np.abs(q(cand)))
    if a is not None:
        if not (0 < a <= 1):
            raise DomainError(f"split point must lie in (0, 1], got {a}")
        if np.any(diff & (cand > a + 1e-12)):
            raise DomainError(f"potentials differ on ({a}, 1)")
        return float(a)
    if not np.any(diff):
        return float(cand[0])
    last = cand[np.nonzero(diff)[0][-1]]
    up = np.concatenate([bps[bps > last], xs[xs > last], [1.0]])
    return float(up.min())


def _end(ell, q, lam, x, rescale):
    smp = phi(ell, q, lam, [x], rescale=rescale)
    return complex(smp.values[-1]), complex(smp.derivs[-1]), float(smp.log_scale[-1])


def h_value(ell: float, q: Potential, qh: Potential, lam, *, a: float | None = None,
            rescale=None) -> Scaled:
    """``H(lam)`` by the boundary determinant, evaluated at the split point."""
    x = agreement_point(q, qh, a)
    f, df, e1 = _end(ell, q, lam, x, rescale)
    g, dg, e2 = _end(ell, qh, lam, x, rescale)
    return Scaled(g * df - f * dg, e1 + e2)


def h_scale(ell: float, q: Potential, qh: Potential, lam, *, a: float | None = None) -> float:
    """Magnitude of the two determinant terms, the natural unit for ``|H|``."""
    x = agreement_point(q, qh, a)
    f, df, e1 = _end(ell, q, lam, x, None)
    g, dg, e2 = _end(ell, qh, lam, x, None)
    return float((abs(g * df) + abs(f * dg)) * math.exp(e1 + e2))


def _panels(lo: float, hi: float, breaks, width: float) -> list[tuple[float, float]]:
    cuts = [lo] + [b for b in breaks if lo < b < hi] + [hi]
    out = []
    for a, b in zip(cuts[:-1], cuts[1:]):
        m = max(1, int(math.ceil((b - a) / width)))
        e = np.linspace(a, b, m + 1)
        out.extend(zip(e[:-1], e[1:]))
    # geometric refinement towards the singular endpoint
    if out and out[0][0] == 0.0:
        a0, b0 = out.pop(0)
        g = [0.0] + list(b0 * np.logspace(-6, 0, 7))
        out = list(zip(g[:-1], g[1:])) + out
    return out


def h_integral(ell: float, q: Potential, qh: Potential, lam, *, a: float | None = None,
               nodes: int = 16, rescale=None) -> Scaled:
    """``H(lam)`` by composite Gauss-Legendre quadrature of the integral form."""
    x_a = agreement_point(q, qh, a)
    z = as_param(lam).z
    width = min(0.02, 0.5 / max(abs(z), 1e-300))
    panels = _panels(0.0, x_a, q.difference_breaks(qh), width)
    t, w = np.polynomial.legendre.leggauss(nodes)
    xs, ws = [], []
    for lo, hi in panels:
        xs.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w)
    xs = np.concatenate(xs)
    ws = np.concatenate(ws)
    order = np.argsort(xs)
    xs, ws = xs[order], ws[order]
    s1 = phi(ell, q, lam, xs, rescale=rescale)
    s2 = phi(ell, qh, lam, xs, rescale=rescale)
    logs = s1.log_scale + s2.log_scale
    ref = float(np.max(logs))
    d = q(xs) - qh(xs)
    val = np.sum(ws * d * s1.values * s2.values * np.exp(logs - ref))
    return Scaled(complex(val), ref)


def h_derivative(ell: float, q: Potential, qh: Potential, lam: float, *, a: float | None = None,
                 method: str = "complex") -> float:
    """``dH/dlam`` at real ``lam`` by complex step (or five-point difference)."""
    lam = float(lam)
    if method == "complex":
        h = 1e-12 * max(abs(lam), 1.0)
        return h_value(ell, q, qh, complex(lam, h), a=a, rescale=False).value.imag / h
    h = 1e-3 * max(abs(lam), 1.0) ** 0.5
    f = [h_value(ell, q, qh, lam + k * h, a=a, rescale=False).real for k in (-2, -1, 1, 2)]
    return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)


# ---------------------------------------------------------------------------
# profiles


@dataclass
class HSample:
    lam: complex
    h: Scaled
    hdot: float | None = None

    def to_dict(self) -> dict:
        d = {"lambda": [self.lam.real, self.lam.imag], "H": self.h.to_pair()}
        if self.hdot is not None:
            d["Hdot"] = self.hdot
        return d


@dataclass
class HProfile:
    ell: float
    q_id: str
    qh_id: str
    a: float
    samples: list[HSample] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ell": self.ell, "q": self.q_id, "q_hat": self.qh_id, "a": self.a,
                "samples": [s.to_dict() for s in self.samples]}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def log_abs(self) -> np.ndarray:
        return np.array([s.h.log_abs for s in self.samples])


def _ident(q):
    try:
        return q.digest
    except NotImplementedError:
        return f"obj-{id(q):x}"


def h_profile(ell: float, q: Potential, qh: Potential, lams: Sequence[complex], *,
              a: float | None = None, derivative: bool = False, jobs: int = 1) -> HProfile:
    """Sample ``H`` (and ``dH/dlam`` on real points) at ``lams``, in order."""
    x_a = agreement_point(q, qh, a)

    def one(lam):
        lam = complex(lam)
        hd = h_derivative(ell, q, qh, lam.real, a=x_a) if derivative and lam.imag == 0 else None
        return HSample(lam, h_value(ell, q, qh, lam, a=x_a), hd)

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            smp = list(ex.map(one, lams))
    else:
        smp = [one(l) for l in lams]
    return HProfile(ell, _ident(q), _ident(qh), x_a, smp)


def circle_profile(ell: float, q: Potential, qh: Potential, r: float, nodes: int = 256, *,
                   a: float | None = None, jobs: int = 1) -> HProfile:
    """``H(z**2)`` for ``z = r exp(i phi)`` on ``nodes`` equally spaced angles in [0, pi).

    ``H(z**2)`` is even in ``z``, so the upper half circle covers all values.
    """
    ang = np.pi * np.arange(nodes) / nodes
    z = r * np.exp(1j * ang)
    return h_profile(ell, q, qh, list(z * z), a=a, jobs=jobs)


# ---------------------------------------------------------------------------
# large-lambda limit


@dataclass(frozen=True)
class LimitResult:
    value: float
    inconclusive: bool
    spread: float
    method: str
    z: tuple[float, ...]
    samples: tuple[float, ...]
    estimates: tuple[float, ...]


def _common_denominator(xs, max_den: int = 1000) -> int | None:
    den = 1
    for x in xs:
        f = Fraction(x).limit_denominator(max_den)
        if abs(float(f) - x) > 1e-12:
            return None
        den = den * f.denominator // math.gcd(den, f.denominator)
        if den > max_den:
            return None
    return den


def aligned_z_grid(q: Potential, qh: Potential, a: float, *, z_min: float = 60.0,
                   levels: int = 5) -> np.ndarray | None:
    """Geometric ``z`` grid on which every jump frequency is a multiple of ``2 pi``."""
    bps = [b for b in q.difference_breaks(qh) if b < a] + [a]
    den = _common_denominator(bps)
    if den is None:
        return None
    base = math.pi * den
    j = max(1, math.ceil(z_min / base))
    return base * j * 2.0 ** np.arange(levels)


def _neville_zero(h, f):
    # polynomial extrapolation of f(h) to h = 0
    p = list(f)
    n = len(h)
    for m in range(1, n):
        for i in range(n - m):
            p[i] = (h[i + m] * p[i] - h[i] * p[i + 1]) / (h[i + m] - h[i])
    return p[0]


def mean_perturbation_limit(ell: int, q: Potential, qh: Potential, lam_grid=None, *,
                            a: float | None = None, depth: int = 3, tol: float = 2e-5) -> LimitResult:
    """Limit of ``lam**(ell+1) H(lam)`` as real ``lam -> +inf``.

    The expected value is half the integral of ``q - qh``.  By default the
    grid is chosen so that every jump of ``q - qh`` contributes a frozen
    phase; the sequence is then extrapolated in ``1/sqrt(lam)`` with depth
    ``depth``.  Disagreement between the last two extrapolants beyond ``tol``
    sets ``inconclusive``.
    """
    if int(ell) != ell or ell < 0:
        raise DomainError(f"ell must be a nonnegative integer, got {ell}")
    x_a = agreement_point(q, qh, a)
    method = "richardson"
    if lam_grid is None:
        zs = aligned_z_grid(q, qh, x_a)
        if zs is None:
            zs = 60.0 * 2.0 ** np.arange(6)
            method = "least-squares"
    else:
        lam_grid = np.asarray(lam_grid, dtype=float)
        if np.any(np.diff(lam_grid) <= 0) or lam_grid[0] <= 0:
            raise DomainError("lambda grid must be positive and ascending")
        zs = np.sqrt(lam_grid)
    vals = np.array([(z * z) ** (ell + 1) * h_value(ell, q, qh, z * z, a=x_a).real for z in zs])
    h = 1.0 / zs
    if method == "least-squares":
        # unknown phases: fit mean + 1/z-modulated oscillations at each jump
        bps = [b for b in q.difference_breaks(qh) if b < x_a] + [x_a]
        zz = np.concatenate([zs, zs * 1.37, zs * 1.61])
        vv = np.array([(z * z) ** (ell + 1) * h_value(ell, q, qh, z * z, a=x_a).real for z in zz])
        cols = [np.ones_like(zz), 1 / zz, 1 / zz ** 2]
        for b in bps:
            cols += [np.cos(2 * zz * b) / zz, np.sin(2 * zz * b) / zz]
        A = np.column_stack(cols)
        coef, *_ = np.linalg.lstsq(A, vv, rcond=None)
        resid = vv - A @ coef
        spread = float(np.max(np.abs(resid)))
        return LimitResult(float(coef[0]), spread > 10 * tol, spread, method, tuple(zz),
                           tuple(vv), (float(coef[0]),))
    k = depth + 1
    if len(zs) < k:
        raise DomainError(f"need at least {k} grid points for depth {depth}")
    ests = [_neville_zero(h[i:i + k], vals[i:i + k]) for i in range(len(zs) - k + 1)]
    spread = abs(ests[-1] - ests[-2]) if len(ests) > 1 else math.inf
    return LimitResult(float(ests[-1]), bool(spread > tol), float(spread), method, tuple(zs),
                       tuple(vals), tuple(float(e) for e in ests))


# ---------------------------------------------------------------------------
# envelope near the imaginary axis


@dataclass(frozen=True)
class EnvelopeReport:
    holds: bool
    C: float
    gamma: float
    delta: float
    eps: float
    worst_ratio: float
    worst_z: complex
    decay_exponent: float
    weighted: tuple[float, ...]
    z: tuple[complex, ...]

    def to_dict(self) -> dict:
        return {"holds": self.holds, "C": self.C, "gamma": self.gamma, "delta": self.delta,
                "eps": self.eps, "worst_ratio": self.worst_ratio,
                "worst_z": [self.worst_z.real, self.worst_z.imag],
                "decay_exponent": self.decay_exponent}


def envelope_check(ell: float, q: Potential, qh: Potential, tag: SmoothnessTag, z_samples, *,
                   a: float | None = None, eps: float = 1e-6, slope_window=(5.0, 20.0),
                   jobs: int = 1) -> EnvelopeReport:
    """Fit the three-term envelope to ``|H(z^2)| |z|^(2l+2) |Im z|^(k+1/p') e^(-2a|Im z|)``.

    ``C`` is the smallest constant that makes the envelope dominate every
    sample for the chosen ``(gamma, delta)``; the pair is picked by log-domain
    least squares over a grid with ``gamma`` in (0, 1) and ``delta`` in
    (0, delta0].  ``decay_exponent`` is the slope of ``-ln`` of the
    unweighted quantity ``|H| |z|^(2l+2) e^(-2a|Im z|)`` against ``ln |Im z|``
    for purely imaginary samples inside ``slope_window``.
    """
    z = np.asarray(list(z_samples), dtype=complex)
    if np.any(z.imag == 0):
        raise DomainError("envelope samples need Im z != 0")
    x_a = agreement_point(q, qh, a)
    kp = tag.k + tag.inv_conjugate
    prof = h_profile(ell, q, qh, list(z * z), a=x_a, jobs=jobs)
    y = np.abs(z.imag)
    logw = prof.log_abs() + (2 * ell + 2) * np.log(np.abs(z)) - 2 * x_a * y
    weighted = np.exp(logw + kp * np.log(y))
    if not np.all(np.isfinite(weighted[np.isfinite(logw)])):
        raise ArithmeticError("non-finite envelope samples")
    weighted = np.where(np.isfinite(logw), weighted, 0.0)

    # decay exponent on the imaginary axis
    on_axis = (np.abs(z.real) < 1e-12) & (y >= slope_window[0]) & (y <= slope_window[1])
    decay = math.nan
    if on_axis.sum() >= 3 and np.all(np.isfinite(logw[on_axis])):
        decay = -float(np.polyfit(np.log(y[on_axis]), logw[on_axis], 1)[0])

    if not np.any(weighted > 0):
        return EnvelopeReport(True, 0.0, 0.5, tag.delta0, eps, 0.0, complex(z[0]), decay,
                              tuple(weighted), tuple(z))
    best = None
    for gamma in np.linspace(0.05, 0.95, 19):
        for delta in np.linspace(tag.delta0 / 20, tag.delta0, 20):
            shape = np.abs(z) ** gamma * np.exp(-delta * y) + y ** kp * np.exp(-2 * delta * y)
            C = max(float(np.max((weighted - eps) / shape)), 0.0)
            env = eps + C * shape
            pos = weighted > 0
            mis = float(np.sum((np.log(env[pos]) - np.log(weighted[pos])) ** 2))
            if best is None or mis < best[0]:
                best = (mis, gamma, delta, C)
    _, gamma, delta, C = best
    env = eps + C * (np.abs(z) ** gamma * np.exp(-delta * y) + y ** kp * np.exp(-2 * delta * y))
    ratio = weighted / env
    i = int(np.argmax(ratio))
    return EnvelopeReport(bool(np.all(ratio <= 1 + 1e-12)), C, float(gamma), float(delta), eps,
                          float(ratio[i]), complex(z[i]), decay, tuple(weighted), tuple(z))


# ---------------------------------------------------------------------------
# cosine transform


def _as_callable(f) -> Callable:
    if isinstance(f, tuple) and len(f) == 2:
        xs, ys = (np.asarray(v, dtype=float) for v in f)
        return lambda x: np.interp(x, xs, ys)
    return f


def _quad(fun, a, **kw):
    val, _ = integrate.quad(fun, 0.0, a, limit=400, epsabs=1e-13, epsrel=1e-11, **kw)
    return val


def cosine_transform_F(f, lam: float, a: float = 1.0) -> float:
    """``F(lam) = int_0^a cos(2 sqrt(lam) x) f(x) dx`` (cosh for ``lam < 0``)."""
    g = _as_callable(f)
    if lam >= 0:
        w = 2 * math.sqrt(lam)
        if w == 0:
            return _quad(lambda x: float(g(x)), a)
        return _quad(lambda x: float(g(x)), a, weight="cos", wvar=w)
    w = 2 * math.sqrt(-lam)
    return _quad(lambda x: math.cosh(w * x) * float(g(x)), a)


def cosine_transform_dF(f, lam: float, a: float = 1.0) -> float:
    """``F'(lam) = -int_0^a sin(2 sqrt(lam) x) (x / sqrt(lam)) f(x) dx``."""
    g = _as_callable(f)
    if lam == 0:
        return -2.0 * _quad(lambda x: x * x * float(g(x)), a)
    if lam > 0:
        r = math.sqrt(lam)
        return -_quad(lambda x: x * float(g(x)) / r, a, weight="sin", wvar=2 * r)
    r = math.sqrt(-lam)
    return -_quad(lambda x: math.sinh(2 * r * x) * x * float(g(x)) / r, a)


def F_derivatives(f, k: int, a: float = 1.0) -> float:
    """``F^(k)(0) = (-1)^k 4^k k!/(2k)! int_0^a x^(2k) f``."""
    if k < 0:
        raise DomainError("order must be >= 0")
    g = _as_callable(f)
    c = (-1) ** k * 4 ** k * math.factorial(k) / math.factorial(2 * k)
    return c * _quad(lambda x: x ** (2 * k) * float(g(x)), a)


# ---------------------------------------------------------------------------
# shared eigenvalues


def beta_of_angle(alpha: float) -> float:
    """Boundary parameter with target angle ``alpha`` in (0, pi]."""
    if abs(alpha - math.pi) < 1e-15:
        return INF
    return -1.0 / math.tan(alpha)


@dataclass(frozen=True)
class SharedEigenvalue:
    lam: float
    beta: float
    index_q: int
    index_qh: int
    h_rel: float
    hdot: float | None = None
    hdot_formula: float | None = None


def _lam_at_angle(ell, q, alpha, n):
    # eigenvalue n of the problem with target angle alpha, alpha in (0, pi]
    return eigenvalue(ell, q, beta_of_angle(alpha), n).lam


def _h_rel(ell, q, qh, lam, x_a):
    return abs(h_value(ell, q, qh, lam, a=x_a).real) / h_scale(ell, q, qh, lam, a=x_a)


def shared_eigenvalues_scan(ell: float, q: Potential, qh: Potential, n_max: int, *,
                            n_alpha: int = 50, a: float | None = None,
                            with_derivative: bool = True) -> list[SharedEigenvalue]:
    """Common eigenvalues of ``q`` and ``qh`` over a boundary-parameter scan.

    The angle ``alpha`` in (0, pi] parametrizes ``beta``; eigenvalue curves
    ``lam_n(alpha)`` for both potentials are compared and each sign change
    of their difference is refined to a crossing.
    """
    x_a = agreement_point(q, qh, a)
    alphas = np.linspace(math.pi / n_alpha, math.pi, n_alpha)
    found = []
    for n in range(1, n_max + 1):
        diff = np.array([_lam_at_angle(ell, q, al, n) - _lam_at_angle(ell, qh, al, n)
                         for al in alphas])
        for i in range(len(alphas) - 1):
            if diff[i] == 0 or diff[i] * diff[i + 1] < 0:
                if diff[i] == 0:
                    al = alphas[i]
                else:
                    al = brentq(lambda t: _lam_at_angle(ell, q, t, n) - _lam_at_angle(ell, qh, t, n),
                                alphas[i], alphas[i + 1], xtol=1e-14)
                beta = beta_of_angle(al)
                lam = eigenvalue(ell, q, beta, n).lam
                found.append(_shared_record(ell, q, qh, lam, beta, n, n, x_a, with_derivative))
    return found


def _shared_record(ell, q, qh, lam, beta, n, nh, x_a, with_derivative) -> SharedEigenvalue:
    rel = _h_rel(ell, q, qh, lam, x_a)
    if not with_derivative:
        return SharedEigenvalue(lam, beta, n, nh, rel)
    hd = h_derivative(ell, q, qh, lam, a=x_a)
    return SharedEigenvalue(lam, beta, n, nh, rel, hd, hdot_identity(ell, q, qh, lam, beta))


def hdot_identity(ell: float, q: Potential, qh: Potential, lam: float, beta) -> float:
    """``(zeta_h - zeta) / (kappa kappa_h)`` at a shared eigenvalue."""
    from .spectrum import SpectralPoint

    p = SpectralPoint(lam, 0, beta)
    k1 = kappa_exact(ell, q, p)
    k2 = kappa_exact(ell, qh, p)
    z1 = k1 * k1 * tau(ell, q, lam)
    z2 = k2 * k2 * tau(ell, qh, lam)
    return (z2 - z1) / (k1 * k2)


def real_zeros_of_h(ell: float, q: Potential, qh: Potential, lo: float, hi: float, *,
                    n: int = 400, a: float | None = None) -> list[float]:
    """Sign changes of ``H`` on a uniform grid of ``[lo, hi]``, refined by brentq."""
    x_a = agreement_point(q, qh, a)
    xs = np.linspace(lo, hi, n)

    def hr(t):
        return h_value(ell, q, qh, t, a=x_a).real

    vals = np.array([hr(t) for t in xs])
    out = []
    for i in range(n - 1):
        if vals[i] * vals[i + 1] < 0:
            out.append(brentq(hr, xs[i], xs[i + 1], xtol=1e-14 * max(1.0, abs(xs[i]))))
    return out


def verify_zero_as_shared(ell: float, q: Potential, qh: Potential, lam: float, *,
                          rtol: float = 1e-8) -> tuple[bool, float, int, int]:
    """Check a real zero of ``H`` is a common eigenvalue.

    ``beta = -phi'(1)/phi(1)`` (Dirichlet if ``phi(1)`` is negligible); the
    eigenvalue with the matching oscillation index is recomputed for both
    potentials.  Returns ``(ok, beta, n, nh)``.
    """
    smp = phi(ell, q, lam, [1.0], rescale=False)
    f, df = smp.u[-1].real, smp.du[-1].real
    beta = INF if abs(f) <= 1e-10 * abs(df) else -df / f
    alpha = target_angle(beta)
    ok = True
    idx = []
    for pot in (q, qh):
        theta, _ = prufer(ell, pot, lam)
        n = int(round((theta - alpha) / math.pi)) + 1
        idx.append(n)
        if n < 1:
            ok = False
            continue
        lam_n = eigenvalue(ell, pot, beta, n).lam
        if abs(lam_n - lam) > rtol * max(1.0, abs(lam)):
            ok = False
    return ok, beta, idx[0], idx[1]
