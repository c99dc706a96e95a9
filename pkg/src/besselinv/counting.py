"""Counting functions of real sequences and their logarithmic integrals.

For a set ``A`` of reals, ``n_A(t) = #{lam in A : |lam| <= t}`` and

    int_0^r n_A(t^2) / t dt = sum_{lam in A} max(0, ln r - ln|lam| / 2)

exactly; no quadrature is involved.  A zero element would make the
integral diverge at ``t = 0``; it is counted from ``t = 1`` instead, i.e. it
contributes ``max(0, ln r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


class PreconditionError(ValueError):
    pass


def count(values, t) -> np.ndarray:
    """``n_A(t)`` for each ``t`` (vectorized over ``t``)."""
    v = np.sort(np.abs(np.asarray(values, dtype=float)))
    return np.searchsorted(v, np.asarray(t, dtype=float), side="right")


def log_integral(values, r) -> np.ndarray:
    """``int_0^r n_A(t^2)/t dt`` for each ``r`` (zeros counted from 1)."""
    v = np.abs(np.asarray(values, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    half = np.where(v > 0, 0.5 * np.log(np.where(v > 0, v, 1.0)), 0.0)
    lr = np.log(r)[:, None]
    return np.maximum(0.0, lr - half[None, :]).sum(axis=1)


def log_integral_from_one(values, r) -> np.ndarray:
    """``int_1^r n_A(t^2)/t dt``."""
    v = np.abs(np.asarray(values, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    half = np.where(v > 1, 0.5 * np.log(np.where(v > 1, v, 1.0)), 0.0)
    return np.maximum(0.0, np.log(r)[:, None] - half[None, :]).sum(axis=1)


def m_function(lam_values, s_values, t) -> np.ndarray:
    """``m(t) = 2 n_Lambda(t^2) + 2 n_S(t^2)``."""
    t2 = np.asarray(t, dtype=float) ** 2
    return 2 * count(lam_values, t2) + 2 * count(s_values, t2)


def m_integral(lam_values, s_values, r) -> np.ndarray:
    """``int_0^r m(t)/t dt``."""
    return 2 * log_integral(lam_values, r) + 2 * log_integral(s_values, r)


def trend(x, y, basis=("R", "lnR")) -> dict:
    """Least-squares fit ``y ~ c0 + sum c_j basis_j(x)``."""
    x = np.asarray(x, dtype=float)
    cols = [np.ones_like(x)]
    for b in basis:
        cols.append(x if b == "R" else np.log(x))
    A = np.column_stack(cols)
    coef, *_ = np.linalg.lstsq(A, np.asarray(y, dtype=float), rcond=None)
    out = {"c0": float(coef[0])}
    for b, c in zip(basis, coef[1:]):
        out[b] = float(c)
    return out


# ---------------------------------------------------------------------------
# counting checks


@dataclass(frozen=True)
class LowerBoundCheck:
    """``int_1^R 2 m(t^2)/t - [(2/a1) R + (1 - 2 a2/a1) ln R]`` over a grid."""

    R: tuple[float, ...]
    difference: tuple[float, ...]
    min_difference: float
    spread: float
    slope_R: float
    slope_lnR: float
    holds: bool


def lower_bound_check(mu, alpha1: float, alpha2: float, R_grid, *, slope_tol: float = 1e-3,
                      log_tol: float = 0.1) -> LowerBoundCheck:
    """Counting-integral lower bound for ``sqrt(mu_k) <= alpha1 k + alpha2 + O(1/k)``.

    ``mu`` is indexed from ``k = 0``.  The bound holds up to an additive
    constant when the difference shows no downward trend: fitted
    coefficients of ``R`` and ``ln R`` at least ``-slope_tol`` and ``-log_tol``.
    """
    if alpha1 <= 0:
        raise PreconditionError("alpha1 must be positive")
    R = np.asarray(R_grid, dtype=float)
    I = 2 * log_integral_from_one(mu, R)
    bound = (2 / alpha1) * R + (1 - 2 * alpha2 / alpha1) * np.log(R)
    d = I - bound
    fit = trend(R, d)
    holds = fit["R"] >= -slope_tol and fit["lnR"] >= -log_tol
    return LowerBoundCheck(tuple(R), tuple(d), float(d.min()), float(d.max() - d.min()),
                           fit["R"], fit["lnR"], bool(holds))


@dataclass(frozen=True)
class PerturbationCheck:
    r: tuple[float, ...]
    difference: tuple[float, ...]
    max_difference: float
    bound: float
    holds: bool


def perturbation_check(a, b, r_grid, *, declared_tail: str = "summable") -> PerturbationCheck:
    """``|int n_A(t^2)/t - int n_B(t^2)/t| <= sum |ln|1 + t_n|| / 2``, ``a_n = (1 + t_n) b_n``."""
    if declared_tail != "summable":
        raise PreconditionError("sum |t_n| declared divergent; the bound does not apply")
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise PreconditionError("sequences must have equal length")
    if np.any(b == 0):
        raise PreconditionError("b_n must be nonzero")
    t = a / b - 1.0
    bound = float(np.sum(0.5 * np.abs(np.log(np.abs(1.0 + t)))))
    r = np.asarray(r_grid, dtype=float)
    d = np.abs(log_integral(a, r) - log_integral(b, r))
    return PerturbationCheck(tuple(r), tuple(d), float(d.max()), bound,
                             bool(np.all(d <= bound * (1 + 1e-12) + 1e-12)))


@dataclass(frozen=True)
class ZeroPoleCheck:
    r: tuple[float, ...]
    excess: tuple[float, ...]  # zeros-minus-poles integral minus ln(r)/2
    max_excess: float
    tail_slope: float
    holds: bool


def zero_pole_check(zeros, poles, r_grid, *, tol: float = 0.05) -> ZeroPoleCheck:
    """``int n_B(t^2)/t - int n_A(t^2)/t <= ln(r)/2 + C`` (``B`` zeros, ``A`` poles).

    Bounded means the excess shows no upward trend in ``ln r`` over the
    upper half of the grid.
    """
    r = np.asarray(r_grid, dtype=float)
    ex = log_integral(zeros, r) - log_integral(poles, r) - 0.5 * np.log(r)
    half = len(r) // 2
    slope = float(np.polyfit(np.log(r[half:]), ex[half:], 1)[0]) if len(r) - half >= 2 else 0.0
    return ZeroPoleCheck(tuple(r), tuple(ex), float(ex.max()), slope, bool(slope <= tol))


def partial_fraction_zeros(a: float, b: float, c: float, A, poles) -> np.ndarray:
    """Zeros of ``a z^2 + b z + c + sum A_n (1/(z - a_n) + 1/a_n)``."""
    A = np.asarray(A, dtype=float)
    p = np.asarray(poles, dtype=float)
    const = c + float(np.sum(A / p))
    Q = np.poly1d(np.poly(p))
    num = np.poly1d([a, b, const]) * Q
    for n in range(len(p)):
        num = num + A[n] * np.poly1d(np.poly(np.delete(p, n)))
    return np.roots(num.coeffs)


@dataclass(frozen=True)
class SeparationCheck:
    C_k: tuple[float, ...]
    C: float
    tail_slope: float
    holds: bool


def separation_check(a, b, *, tol: float = 0.05) -> SeparationCheck:
    """Estimate ``C`` in ``sup_n (|b_n||b_n - a_k|)^{-1} <= C / |a_k|``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    gaps = np.abs(b[None, :]) * np.abs(b[None, :] - a[:, None])
    if np.any(gaps == 0):
        raise PreconditionError("sequences share an element")
    ck = np.abs(a) * np.max(1.0 / gaps, axis=1)
    half = len(ck) // 2
    slope = float(np.polyfit(np.log(np.abs(a[half:])), np.log(ck[half:]), 1)[0]) if len(ck) - half >= 2 else 0.0
    return SeparationCheck(tuple(ck), float(ck.max()), slope, bool(slope <= tol))


def interpolation_weights(a, b, m: int | None = None) -> np.ndarray:
    """``A_{n,m}`` for ``n = 1..m`` (all of ``a`` when ``m`` is None).

    ``A_{n,m} = (a_n/b_n)(a_n - b_n) prod_{j<=m, j!=n} (a_j/b_j)(a_n - b_j)/(a_n - a_j)``,
    accumulated in log form.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    m = len(a) if m is None else m
    a, b = a[:m], b[:m]
    out = np.empty(m)
    for n in range(m):
        j = np.arange(m) != n
        fac = (a[j] / b[j]) * (a[n] - b[j]) / (a[n] - a[j])
        lead = (a[n] / b[n]) * (a[n] - b[n])
        sgn = np.sign(lead) * np.prod(np.sign(fac))
        out[n] = sgn * math.exp(math.log(abs(lead)) + float(np.sum(np.log(np.abs(fac))))) if lead != 0 and np.all(fac != 0) else 0.0
    return out


@dataclass(frozen=True)
class WeightsCheck:
    """Convergence of ``A_{n,m} -> A_n`` and summability of ``A_n / a_n^2``.

    ``A_n`` is taken at the full truncation; ``distances[i]`` is
    ``sum_{n<=m_i} |A_{n,m_i} - A_n| / a_n^2``.
    """

    m: tuple[int, ...]
    distances: tuple[float, ...]
    l1_partial: tuple[float, ...]
    l1_tail_ratio: float
    holds: bool


def weights_check(a, b, *, tol: float = 0.05) -> WeightsCheck:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    N = len(a)
    An = interpolation_weights(a, b)
    ms = sorted(set(int(x) for x in np.linspace(max(2, N // 4), N, 8)))
    dist = []
    for m in ms:
        Am = interpolation_weights(a, b, m)
        dist.append(float(np.sum(np.abs(Am - An[:m]) / a[:m] ** 2)))
    part = np.cumsum(np.abs(An) / a ** 2)
    tail = float((part[-1] - part[N // 2]) / part[-1]) if part[-1] > 0 else 0.0
    bounded = all(d <= dist[0] * (1 + tol) + 1e-12 for d in dist[1:])
    return WeightsCheck(tuple(ms), tuple(dist), tuple(float(x) for x in part), tail,
                        bool(bounded and tail <= tol and np.all(np.isfinite(An))))


@dataclass(frozen=True)
class ProductCheck:
    partial: tuple[float, ...]
    tail_ratio: float
    holds: bool


def product_check(a, b, *, tol: float = 0.05) -> ProductCheck:
    """Absolute convergence of ``prod a_n / b_n``: partial sums of ``|a_n/b_n - 1|`` settle."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    s = np.cumsum(np.abs(a / b - 1.0))
    N = len(s)
    tail = float((s[-1] - s[N // 2]) / s[-1]) if s[-1] > 0 else 0.0
    return ProductCheck(tuple(float(x) for x in s), tail, bool(tail <= tol))


__all__: Sequence[str] = [
    "count", "log_integral", "m_function", "m_integral", "lower_bound_check", "perturbation_check",
    "zero_pole_check", "separation_check", "interpolation_weights", "weights_check", "product_check",
]
