"""Regular and terminal solutions of the radial equation.

The regular solution is normalized at the singular endpoint by
``x**(-l-1) phi -> c_l = sqrt(pi) / (Gamma(l + 3/2) 2**(l+1))`` and started
from its Frobenius series at a small ``x0``.  The terminal solution carries
Cauchy data at ``x = 1`` fixed by the boundary parameter ``beta``.

Values are kept as mantissas with a real log-offset per grid point, so that
``u(x) = value * exp(log_scale)``; for complex ``lam`` with ``|Im sqrt(lam)|
>= 1`` the integrator works with ``exp(-|Im z| x) u`` to keep magnitudes
bounded.
"""

from __future__ import annotations

import cmath
import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from ._kernel import STATUS_OK, integrate, q_eval
from .potential import DomainError, Potential

RTOL = 1e-11
ATOL = 1e-14
MAX_STEPS = 2_000_000
X0 = 1e-6
RESCALE_THRESHOLD = 1.0

INF = math.inf


class AccuracyError(ArithmeticError):
    """The integrator could not meet its tolerance."""


def c_ell(ell: float) -> float:
    return math.exp(0.5 * math.log(math.pi) - gammaln(ell + 1.5) - (ell + 1) * math.log(2.0))


def check_ell(ell: float) -> float:
    ell = float(ell)
    if not (ell >= -0.5):
        raise DomainError(f"ell must be >= -1/2, got {ell}")
    return ell


def is_dirichlet(beta) -> bool:
    return beta is None or (isinstance(beta, float) and math.isinf(beta)) or beta == INF


@dataclass(frozen=True)
class SpectralParameter:
    """Spectral parameter ``lam`` with ``z = sqrt(lam)``, ``Im z >= 0``."""

    lam: complex
    z: complex

    @classmethod
    def from_lambda(cls, lam) -> SpectralParameter:
        lam = complex(lam)
        z = cmath.sqrt(lam)
        if z.imag < 0 or (z.imag == 0 and z.real < 0):
            z = -z
        return cls(lam, z)

    @classmethod
    def from_z(cls, z) -> SpectralParameter:
        z = complex(z)
        if z.imag < 0:
            z = -z
        return cls(z * z, z)

    @property
    def is_real(self) -> bool:
        return self.lam.imag == 0.0


def as_param(lam) -> SpectralParameter:
    return lam if isinstance(lam, SpectralParameter) else SpectralParameter.from_lambda(lam)


@dataclass(frozen=True)
class Scaled:
    """The number ``mant * exp(expo)``."""

    mant: complex
    expo: float = 0.0

    @property
    def value(self) -> complex:
        if self.mant == 0:
            return 0j
        with np.errstate(over="ignore"):
            return complex(self.mant * np.exp(self.expo))

    @property
    def real(self) -> float:
        return self.value.real

    @property
    def log_abs(self) -> float:
        if self.mant == 0:
            return -math.inf
        return math.log(abs(self.mant)) + self.expo

    def normalized(self) -> Scaled:
        if self.mant == 0 or not np.isfinite(self.mant):
            return self
        e = math.log(abs(self.mant))
        return Scaled(self.mant / math.exp(e), self.expo + e)

    def __neg__(self):
        return Scaled(-self.mant, self.expo)

    def __mul__(self, other):
        if isinstance(other, Scaled):
            return Scaled(self.mant * other.mant, self.expo + other.expo)
        return Scaled(self.mant * other, self.expo)

    __rmul__ = __mul__

    def to_pair(self):
        n = self.normalized()
        return [[n.mant.real, n.mant.imag], n.expo]


@dataclass(frozen=True)
class SolutionSample:
    """A solution sampled on a grid.

    ``values``/``derivs`` are mantissas; the true solution is
    ``values * exp(log_scale)``.  ``integral`` holds the running integral of
    ``u**2`` (from 0 for regular, from 1 for terminal solutions) with scale
    ``exp(integral_log_scale)``; it is ``None`` when rescaling was active.
    """

    x: np.ndarray
    values: np.ndarray
    derivs: np.ndarray
    log_scale: np.ndarray
    lam: complex
    kind: str
    rescale: float
    integral: np.ndarray | None = None
    integral_log_scale: float = 0.0
    zeros: int = 0
    nsteps: int = 0

    @property
    def u(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.values * np.exp(self.log_scale)

    @property
    def du(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return self.derivs * np.exp(self.log_scale)

    @property
    def integral_values(self) -> np.ndarray | None:
        if self.integral is None:
            return None
        return self.integral * math.exp(self.integral_log_scale)

    def at_end(self) -> tuple[Scaled, Scaled]:
        i = -1 if self.kind == "regular" else 0
        return Scaled(complex(self.values[i]), float(self.log_scale[i])), Scaled(
            complex(self.derivs[i]), float(self.log_scale[i]))

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "re_u", "im_u", "re_du", "im_du", "log_scale"])
            for row in zip(self.x, self.values, self.derivs, self.log_scale):
                w.writerow([repr(float(row[0])), repr(row[1].real), repr(row[1].imag),
                            repr(row[2].real), repr(row[2].imag), repr(float(row[3]))])


def _grid(grid) -> np.ndarray:
    g = np.atleast_1d(np.asarray([1.0] if grid is None else grid, dtype=float))
    if np.any(g <= 0) or np.any(g > 1):
        raise DomainError("grid must lie in (0, 1]")
    if np.any(np.diff(g) <= 0):
        raise DomainError("grid must be strictly increasing")
    return g


def _rescale_exponent(z: complex, rescale) -> float:
    s = abs(z.imag)
    if rescale is None:
        return s if s >= RESCALE_THRESHOLD else 0.0
    return s if rescale else 0.0


def _hmax(pieces, lam: complex) -> float:
    # at most one oscillation node per step, so sign changes are not missed
    return 1.5 / math.sqrt(max(1.0, lam.real - pieces.qmin))


def _run(ell, pieces, lam, s, stops, y0, out_x, rtol, atol, h0, count):
    out, zeros, nsteps, status = integrate(
        ell * (ell + 1.0), complex(lam), float(s), pieces.edges, pieces.coefs, pieces.degs,
        np.asarray(stops, dtype=float), np.asarray(y0, dtype=np.complex128),
        np.asarray(out_x, dtype=float), float(rtol), float(atol), _hmax(pieces, complex(lam)),
        float(h0), bool(count), MAX_STEPS)
    if status != STATUS_OK:
        raise AccuracyError(f"integrator status {status} at lam={lam} after {nsteps} steps")
    return out, int(zeros), int(nsteps)


def _frobenius(ell: float, mu: complex, x: float) -> tuple[complex, complex]:
    # x^{l+1} S and x^l D are the series for phi / c_l and phi' / c_l
    t = x * x
    a = 1.0 + 0j
    S = a
    D = (ell + 1.0) + 0j
    k = 0
    while True:
        k += 1
        a = a * mu * t / ((2 * k) * (2 * k + 2 * ell + 1))
        S += a
        D += a * (ell + 1 + 2 * k)
        if abs(a) <= 1e-18 * abs(S) or k > 60:
            break
    return S, D


def _start(ell: float, pieces, lam: complex) -> float:
    q0 = q_eval(1e-300, 0.0, 1.0, pieces.edges, pieces.coefs, pieces.degs)
    mu = abs(q0 - lam)
    return min(X0, 0.5 / math.sqrt(mu)) if mu > 0 else X0


def phi(ell: float, q: Potential, lam, grid=None, *, rescale=None, rtol: float = RTOL,
        atol: float = ATOL, count_zeros: bool = False, stop: float | None = None) -> SolutionSample:
    """Regular solution on ``grid`` (default ``[1.0]``).

    ``rescale`` forces (True) or disables (False) the exponential rescaling;
    by default it is used when ``|Im sqrt(lam)| >= 1``.  The zero count in
    the result is meaningful for real ``lam`` with ``count_zeros=True``.
    """
    ell = check_ell(ell)
    p = as_param(lam)
    lam = p.lam
    g = _grid(grid)
    end = float(g[-1]) if stop is None else float(stop)
    pieces = q.pieces
    s = _rescale_exponent(p.z, rescale)
    x0 = _start(ell, pieces, lam)
    q0 = q_eval(x0, 0.0, 1.0, pieces.edges, pieces.coefs, pieces.degs)
    mu = q0 - lam
    S, D = _frobenius(ell, mu, x0)
    L = math.log(c_ell(ell)) + (ell + 1) * math.log(x0)
    b = mu / (4 * ell + 6)
    I0 = x0 / (2 * ell + 3) + 2 * b * x0 ** 3 / (2 * ell + 5)

    inner = g[g < x0]
    outer = g[g >= x0]
    stops = [x0] + [h for h in pieces.hard if x0 < h < end] + [end]
    out_x = np.unique(np.concatenate([outer, [end]]))
    out, zeros, nsteps = _run(ell, pieces, lam, s, stops, [S, D / x0, I0], out_x,
                              rtol, atol, 0.1 * x0, count_zeros)
    keep = np.isin(out_x, outer)
    vals = list(out[keep, 0])
    ders = list(out[keep, 1])
    ints = list(out[keep, 2])
    logs = list(s * (outer - x0) + L)
    # points left of the start come straight from the series
    pre_v, pre_d, pre_i, pre_l = [], [], [], []
    for xi in inner:
        Si, Di = _frobenius(ell, mu, xi)
        r = xi / x0
        pre_v.append(Si * r ** (ell + 1))
        pre_d.append(Di * r ** ell / x0)
        pre_i.append(xi * r ** (2 * ell + 2) / (2 * ell + 3))
        pre_l.append(L + s * (xi - x0))
    return SolutionSample(
        x=g, values=np.array(pre_v + vals, dtype=complex), derivs=np.array(pre_d + ders, dtype=complex),
        log_scale=np.array(pre_l + logs, dtype=float), lam=lam, kind="regular", rescale=s,
        integral=None if s else np.array(pre_i + ints, dtype=complex), integral_log_scale=2 * L,
        zeros=zeros, nsteps=nsteps)


def terminal_data(beta) -> tuple[float, float]:
    if is_dirichlet(beta):
        return 0.0, -1.0
    return 1.0, -float(beta)


def psi(ell: float, q: Potential, lam, beta, grid=None, *, rescale=None, rtol: float = RTOL,
        atol: float = ATOL) -> SolutionSample:
    """Terminal solution on ``grid``, integrated leftward from ``x = 1``.

    ``integral`` holds ``int_x^1 psi**2``.
    """
    ell = check_ell(ell)
    p = as_param(lam)
    lam = p.lam
    g = _grid(grid)
    pieces = q.pieces
    s = _rescale_exponent(p.z, rescale)
    u1, du1 = terminal_data(beta)
    lo = float(g[0])
    stops = [1.0] + [h for h in sorted(pieces.hard, reverse=True) if lo < h < 1.0] + [lo]
    out_x = np.unique(np.concatenate([g, [1.0]]))[::-1]
    h0 = 0.01 / math.sqrt(max(1.0, abs(lam)))
    out, _, nsteps = _run(ell, pieces, lam, -s, stops, [u1, du1, 0.0], out_x, rtol, atol, h0, False)
    out = out[::-1]
    xs = out_x[::-1]
    keep = np.isin(xs, g)
    return SolutionSample(
        x=g, values=out[keep, 0].copy(), derivs=out[keep, 1].copy(),
        log_scale=s * (1.0 - g), lam=lam, kind="terminal", rescale=s,
        integral=None if s else -out[keep, 2], integral_log_scale=0.0, nsteps=nsteps)


def end_values(ell: float, q: Potential, lam, x: float = 1.0, **kw) -> tuple[Scaled, Scaled]:
    """``(phi(x), phi'(x))`` as scaled numbers."""
    smp = phi(ell, q, lam, [x], **kw)
    return smp.at_end()


def _delta(ell, q, lam, beta, **kw) -> Scaled:
    f, df = end_values(ell, q, lam, **kw)
    if is_dirichlet(beta):
        return f
    return Scaled(df.mant + float(beta) * f.mant, f.expo)


def characteristic(ell: float, q: Potential, lam, beta, *, scaled: bool = False, **kw):
    """``Delta = phi'(1) + beta phi(1)``, or ``phi(1)`` for ``beta = inf``."""
    d = _delta(ell, q, lam, beta, **kw)
    return d if scaled else d.value


def characteristic_wronskian(ell: float, q: Potential, lam, beta, x: float = 0.5, **kw) -> complex:
    """Cross-check: ``W(psi, phi) = psi phi' - psi' phi`` evaluated at ``x``."""
    f, df = end_values(ell, q, lam, x, **kw)
    t = psi(ell, q, lam, beta, [x], **kw)
    return complex(t.u[0] * df.value - t.du[0] * f.value)


def characteristic_derivative(ell: float, q: Potential, lam: float, beta, *, method: str = "complex",
                              **kw) -> float:
    """``d Delta / d lam`` at real ``lam``.

    ``method="complex"`` uses the complex step ``Im Delta(lam + i h) / h``;
    ``"central"`` a five-point central difference.
    """
    lam = float(lam)
    if method == "complex":
        h = 1e-20 * max(abs(lam), 1.0)
        d = characteristic(ell, q, complex(lam, h), beta, rescale=False, **kw)
        return d.imag / h
    if method == "central":
        h = 1e-3 * max(abs(lam), 1.0) ** 0.5
        f = [characteristic(ell, q, lam + k * h, beta, rescale=False, **kw).real for k in (-2, -1, 1, 2)]
        return (f[0] - 8 * f[1] + 8 * f[2] - f[3]) / (12 * h)
    raise ValueError(f"unknown method {method!r}")


def prufer(ell: float, q: Potential, lam: float, **kw) -> tuple[float, int]:
    """Prüfer angle of ``phi`` at ``x = 1`` and the number of its zeros in (0, 1).

    The angle increases continuously and strictly with ``lam``; eigenvalue
    ``n`` of the ``beta`` problem is where it equals ``alpha(beta) + (n-1) pi``.
    """
    smp = phi(ell, q, float(lam), [1.0], count_zeros=True, rescale=False, **kw)
    f = smp.values[-1].real
    df = smp.derivs[-1].real
    z = smp.zeros
    sg = -1.0 if z % 2 else 1.0
    omega = math.atan2(sg * f, sg * df)
    if omega < 0:
        # sign flip at the endpoint not seen as a step sign change
        z += 1
        omega += math.pi
    return z * math.pi + omega, z


def target_angle(beta) -> float:
    if is_dirichlet(beta):
        return math.pi
    return 0.5 * math.pi + math.atan(float(beta))


def free_phi(ell: int, lam, x):
    """Closed-form regular solution for ``q = 0`` and integer ``ell``."""
    from scipy.special import spherical_jn

    z = SpectralParameter.from_lambda(lam).z
    x = np.asarray(x, dtype=float)
    if z == 0:
        return c_ell(ell) * x ** (ell + 1)
    return z ** (-ell) * x * spherical_jn(ell, z * x)


def oscillation_count(sample: SolutionSample) -> int:
    return sample.zeros


__all__: Sequence[str] = [
    "AccuracyError", "Scaled", "SolutionSample", "SpectralParameter", "c_ell", "characteristic",
    "characteristic_derivative", "characteristic_wronskian", "end_values", "free_phi", "phi",
    "prufer", "psi", "target_angle",
]
