"""Eigenvalues, norming constants and multipliers for one boundary parameter."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .potential import DomainError, Potential
from .solver import (INF, characteristic, characteristic_derivative, check_ell, is_dirichlet,
                     phi, prufer, psi, target_angle)


class CompletenessError(RuntimeError):
    """An eigenvalue could not be bracketed or indices are not consecutive."""


class NotAnEigenvalueError(ValueError):
    pass


def beta_to_json(beta):
    return "inf" if is_dirichlet(beta) else float(beta)


def beta_from_json(b):
    if b is None or (isinstance(b, str) and b.lower() in ("inf", "infinity", "dirichlet")):
        return INF
    return float(b)


@dataclass(frozen=True)
class SpectralPoint:
    lam: float
    index: int
    beta: float = INF
    zeta: float | None = None
    kappa: float | None = None
    residual: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["beta"] = beta_to_json(self.beta)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SpectralPoint:
        return cls(float(d["lam"]), int(d["index"]), beta_from_json(d.get("beta")),
                   d.get("zeta"), d.get("kappa"), float(d.get("residual", 0.0)))


@dataclass(frozen=True)
class Spectrum:
    ell: float
    beta: float
    points: tuple[SpectralPoint, ...]
    potential_id: str = ""
    offset: float = 0.0  # asymptotic model: sqrt(lam_n) ~ (n + offset) pi

    @property
    def values(self) -> np.ndarray:
        return np.array([p.lam for p in self.points])

    @property
    def indices(self) -> np.ndarray:
        return np.array([p.index for p in self.points])

    def __len__(self):
        return len(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def centers(self) -> np.ndarray:
        return ((self.indices + self.offset) * math.pi) ** 2

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "lambda", "zeta", "kappa", "residual"])
            for p in self.points:
                w.writerow([p.index, repr(p.lam), "" if p.zeta is None else repr(p.zeta),
                            "" if p.kappa is None else repr(p.kappa), repr(p.residual)])

    def to_dict(self) -> dict:
        return {"ell": self.ell, "beta": beta_to_json(self.beta), "potential": self.potential_id,
                "offset": self.offset, "points": [p.to_dict() for p in self.points]}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    @classmethod
    def from_dict(cls, d: dict) -> Spectrum:
        return cls(float(d["ell"]), beta_from_json(d["beta"]),
                   tuple(SpectralPoint.from_dict(p) for p in d["points"]),
                   d.get("potential", ""), float(d.get("offset", 0.0)))


def asymptotic_offset(ell: float, beta) -> float:
    return ell / 2 if is_dirichlet(beta) else (ell - 1) / 2


def asymptotic_center(n: int, ell: float, beta) -> float:
    return ((n + asymptotic_offset(ell, beta)) * math.pi) ** 2


def negative_window(q: Potential, beta=INF) -> float:
    """``Lambda_0 = (1 + ||q||_1 + max(0, -beta))**2``; no eigenvalue lies below ``-Lambda_0``.

    A negative Robin parameter pulls the lowest eigenvalue down like
    ``-beta**2``; Dirichlet counts as ``beta = +inf``.
    """
    pull = 0.0 if is_dirichlet(beta) else max(0.0, -float(beta))
    return (1.0 + q.l1_norm() + pull) ** 2


def _residual(ell, q, lam, beta, **kw) -> float:
    smp = phi(ell, q, lam, [1.0], rescale=False, **kw)
    f, df = smp.u[-1].real, smp.du[-1].real
    r = math.hypot(f, df)
    d = f if is_dirichlet(beta) else df + float(beta) * f
    scale = r * (1.0 if is_dirichlet(beta) else 1.0 + abs(float(beta)))
    return abs(d) / scale


def eigenvalue(ell: float, q: Potential, beta, n: int, *, lam_floor: float | None = None,
               rtol: float | None = None) -> SpectralPoint:
    """Eigenvalue number ``n`` (oscillation index, ``n >= 1``)."""
    ell = check_ell(ell)
    if n < 1:
        raise DomainError(f"index must be >= 1, got {n}")
    kw = {} if rtol is None else {"rtol": rtol}
    alpha = target_angle(beta) + (n - 1) * math.pi

    def g(lam):
        return prufer(ell, q, lam, **kw)[0] - alpha

    floor = -negative_window(q, beta) if lam_floor is None else lam_floor
    c = asymptotic_center(n, ell, beta)
    gap = asymptotic_center(n + 1, ell, beta) - c
    w = 0.4 * gap
    lo, hi = max(c - w, floor), c + w
    glo, ghi = g(lo), g(hi)
    for _ in range(3):
        if glo < 0 < ghi:
            break
        w *= 2
        if glo >= 0:
            lo = max(c - w, floor)
            glo = g(lo)
        if ghi <= 0:
            hi = c + w
            ghi = g(hi)
    if glo >= 0 and lo > floor:
        lo = floor
        glo = g(lo)
    if not (glo < 0 < ghi):
        if glo >= 0 and lo <= floor:
            raise CompletenessError(
                f"eigenvalue {n} lies below the search floor {floor:.6g} (g={glo:.3g})")
        raise CompletenessError(f"could not bracket eigenvalue {n} in [{lo:.6g}, {hi:.6g}]")
    lam = brentq(g, lo, hi, xtol=1e-15 * max(1.0, abs(c)), rtol=1e-15, maxiter=200)
    theta, zeros = prufer(ell, q, lam, **kw)
    # zeros strictly inside (0, 1): a Dirichlet node at x = 1 is not counted
    if is_dirichlet(beta) and theta - zeros * math.pi < 0.5 * math.pi:
        zeros -= 1
    if zeros + 1 != n:
        raise CompletenessError(f"eigenvalue {n} at {lam:.12g} has {zeros} interior nodes")
    return SpectralPoint(float(lam), n, beta, residual=_residual(ell, q, lam, beta, **kw))


def locate_eigenvalues(ell: float, q: Potential, beta, count: int, *, first: int = 1,
                       jobs: int = 1, with_constants: bool = False, rtol: float | None = None) -> Spectrum:
    """The eigenvalues with indices ``first .. first + count - 1``."""
    ell = check_ell(ell)
    if count < 1:
        raise DomainError(f"count must be >= 1, got {count}")
    floor = -negative_window(q, beta)
    if prufer(ell, q, floor)[0] >= target_angle(beta):
        raise CompletenessError(f"an eigenvalue lies below -Lambda_0 = {floor:.6g}")
    idx = range(first, first + count)

    def one(n):
        p = eigenvalue(ell, q, beta, n, lam_floor=floor, rtol=rtol)
        if with_constants:
            p = replace(p, zeta=norming_constant(p, ell, q), kappa=multiplier_kappa(p, ell, q))
        return p

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            pts = list(ex.map(one, idx))
    else:
        pts = [one(n) for n in idx]
    lams = [p.lam for p in pts]
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise CompletenessError("computed eigenvalues are not strictly increasing")
    return Spectrum(ell, beta, tuple(pts), q.digest if hasattr(q, "to_dict") else "",
                    asymptotic_offset(ell, beta))


def _lam_of(point) -> float:
    return float(point.lam if isinstance(point, SpectralPoint) else point)


def tau(ell: float, q: Potential, lam: float, **kw) -> float:
    """``int_0^1 phi(lam, x)**2 dx``."""
    smp = phi(ell, q, float(lam), [1.0], rescale=False, **kw)
    return float(smp.integral_values[-1].real)


def matching_point(ell: float, lam: float) -> float:
    # left of the turning point the recessive direction is unstable leftward
    if ell <= 0:
        return 0.0
    if lam <= 0:
        return 0.5
    return min(0.5, math.sqrt(ell * (ell + 1) / lam))


def kappa_exact(ell: float, q: Potential, point, beta=None, **kw) -> float:
    """Multiplier from the boundary values of ``phi`` at ``x = 1``.

    ``point`` is a SpectralPoint or a bare eigenvalue together with ``beta``.
    """
    lam = _lam_of(point)
    if isinstance(point, SpectralPoint):
        beta = point.beta
    elif beta is None:
        raise DomainError("beta is required with a bare eigenvalue")
    smp = phi(ell, q, lam, [1.0], rescale=False, **kw)
    if is_dirichlet(beta):
        return -1.0 / smp.du[-1].real
    return 1.0 / smp.u[-1].real


def norming_constant(point: SpectralPoint, ell: float, q: Potential, **kw) -> float:
    """``zeta = int_0^1 psi**2`` at an eigenvalue.

    For ``ell > 0``, ``psi`` is integrated down to the turning point and
    continued by ``kappa * phi`` below it.
    """
    lam, beta = point.lam, point.beta
    xm = matching_point(ell, lam)
    if xm == 0.0:
        t = psi(ell, q, lam, beta, [1e-6, 1.0], rescale=False, **kw)
        tail = abs(t.u[0]) ** 2 * 1e-6 / (2 * ell + 3)
        return float(t.integral[0].real + tail)
    t = psi(ell, q, lam, beta, [xm, 1.0], rescale=False, **kw)
    f = phi(ell, q, lam, [xm], rescale=False, **kw)
    k = (t.u[0] / f.u[0]).real
    return float(t.integral[0].real + k * k * f.integral_values[0].real)


def multiplier_kappa(point: SpectralPoint, ell: float, q: Potential, *, n_grid: int = 64,
                     tol: float = 1e-6, **kw) -> float:
    """``kappa`` with ``psi = kappa phi``, read off where ``|phi|`` is largest.

    The ratio is checked for constancy over the grid points where ``phi`` is
    not small.
    """
    lam, beta = point.lam, point.beta
    lo = max(matching_point(ell, lam), 0.02)
    x = np.linspace(lo, 1.0, n_grid)
    f = phi(ell, q, lam, x, rescale=False, **kw).u.real
    t = psi(ell, q, lam, beta, x, rescale=False, **kw).u.real
    i = int(np.argmax(np.abs(f)))
    k = t[i] / f[i]
    big = np.abs(f) >= 0.1 * abs(f[i])
    dev = np.max(np.abs(t[big] - k * f[big])) / abs(t[i])
    if dev > tol:
        raise NotAnEigenvalueError(f"psi/phi not constant at lam={lam} (deviation {dev:.3g})")
    return float(k)


def spectral_data(ell: float, q: Potential, beta, n: int, *, rtol: float | None = None,
                  lam_floor: float | None = None) -> tuple[float, float]:
    """``(lam_n, zeta_n)``, with ``zeta = kappa**2 tau`` from one regular sweep."""
    p = eigenvalue(ell, q, beta, n, lam_floor=lam_floor, rtol=rtol)
    kw = {} if rtol is None else {"rtol": rtol}
    smp = phi(ell, q, p.lam, [1.0], rescale=False, **kw)
    k = -1.0 / smp.du[-1].real if is_dirichlet(beta) else 1.0 / smp.u[-1].real
    return p.lam, k * k * smp.integral_values[-1].real


def derivative_identity_residual(point: SpectralPoint, ell: float, q: Potential) -> float:
    """``|dDelta(lam_n) + tau kappa| / |dDelta(lam_n)|``."""
    d = characteristic_derivative(ell, q, point.lam, point.beta)
    k = point.kappa if point.kappa is not None else multiplier_kappa(point, ell, q)
    return abs(d + tau(ell, q, point.lam) * k) / abs(d)


def interlaced(a: np.ndarray, b: np.ndarray) -> bool:
    """True if the merged sorted sequences strictly alternate."""
    tags = sorted([(x, 0) for x in a] + [(x, 1) for x in b])
    vals = [t[0] for t in tags]
    if any(y <= x for x, y in zip(vals, vals[1:])):
        return False
    return all(t0[1] != t1[1] for t0, t1 in zip(tags, tags[1:]))


def delta_sign_scan(ell: float, q: Potential, beta, lo: float, hi: float, n: int = 200) -> list[float]:
    """Sign changes of ``Delta`` on a uniform grid (independent of the angle count)."""
    xs = np.linspace(lo, hi, n)
    vals = [characteristic(ell, q, x, beta, rescale=False).real for x in xs]
    out = []
    for a, b, fa, fb in zip(xs, xs[1:], vals, vals[1:]):
        if fa * fb < 0:
            out.append(brentq(lambda t: characteristic(ell, q, t, beta, rescale=False).real, a, b,
                              xtol=1e-14 * max(1, abs(a))))
    return out
