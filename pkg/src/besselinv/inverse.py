"""Potential reconstruction from mixed spectral data by damped Gauss-Newton.

The unknown part of ``q`` on ``(0, a)`` is a finite vector ``theta``
(piecewise-constant cells or a basis expansion); ``q`` on ``(a, 1)`` is the
known tail.  Residuals are eigenvalue misfits in units of the local spectral
gap and misfits of ``ln zeta``.  Jacobians are forward differences of the
forward map, one column per parameter.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .potential import (DomainError, PiecewiseConstant, Potential, BasisPotential, ZERO,
                        potential_from_dict)
from .solver import AccuracyError, prufer, target_angle
from .spectrum import CompletenessError, asymptotic_offset, spectral_data
from .uniqueness import EigenRecord, MixedDataset

FD_STEP = 1e-6
RTOL_FORWARD = 1e-12


class SwapError(RuntimeError):
    pass


def l2_distance(q1: Potential, q2: Potential, lo: float = 0.0, hi: float = 1.0) -> float:
    """``||q1 - q2||_{L^2(lo, hi)}`` by Gauss-Legendre on the joint breakpoints."""
    bps = sorted({lo, hi} | {b for b in (*q1.breakpoints, *q2.breakpoints) if lo < b < hi})
    edges = []
    for u, v in zip(bps, bps[1:]):
        k = max(1, int(math.ceil((v - u) / 0.01)))
        edges.extend(np.linspace(u, v, k + 1)[:-1])
    edges = np.array(edges + [hi])
    x, w = np.polynomial.legendre.leggauss(10)
    h = np.diff(edges)
    xs = (edges[:-1, None] + h[:, None] * (x + 1) / 2).ravel()
    ws = (h[:, None] * w / 2).ravel()
    d = q1(xs) - q2(xs)
    return float(math.sqrt(np.sum(ws * d * d)))


def local_gap(n: int, ell: float, beta) -> float:
    """Distance between consecutive asymptotic eigenvalue centres at index ``n``."""
    c = n + asymptotic_offset(ell, beta)
    return max(1.0, math.pi ** 2 * (2 * c + 1))


@dataclass
class ReconstructionProblem:
    """Targets plus the parametrization of ``q`` on ``(0, a)``.

    ``basis`` is ``"cells"`` (``dim`` equal cells; the tail must then be
    piecewise constant), ``"cosine"`` or ``"polynomial"``.
    """

    ell: float
    targets: MixedDataset
    basis: str = "cells"
    dim: int = 8
    tail: Potential | None = None
    reg: float = 1e-8
    max_iter: int = 60
    seed: int = 0
    truth: Potential | None = None
    theta0: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.basis not in ("cells", "cosine", "polynomial"):
            raise DomainError(f"unknown basis {self.basis!r}")
        if self.dim < 1:
            raise DomainError("dimension must be positive")
        n_data = len(self.targets.lam) + len(self.targets.s)
        if self.dim > n_data:
            warnings.warn(f"{self.dim} parameters for {n_data} data: under-determined", stacklevel=2)
        if not all(math.isfinite(r.value) for r in self.targets.records):
            raise DomainError("targets must be finite")
        if self.basis == "cells" and self.a < 1 and not isinstance(self.tail or ZERO, PiecewiseConstant):
            raise DomainError("cell parametrization needs a piecewise-constant tail")

    @property
    def a(self) -> float:
        return self.targets.a

    def potential(self, theta) -> Potential:
        theta = [float(t) for t in theta]
        a = self.a
        tail = self.tail or ZERO
        if self.basis == "cells":
            breaks = list(np.linspace(0.0, a, self.dim + 1))
            vals = list(theta)
            if a < 1:
                tb = [b for b in tail.breaks[1:-1] if b > a]
                cells = [a] + tb
                breaks = breaks[:-1] + cells + [1.0]
                vals += [tail.evaluate(min(c, 1 - 1e-15)) for c in cells]
            return PiecewiseConstant(tuple(breaks), tuple(vals), split=a)
        return BasisPotential(self.basis, tuple(theta), a, tail if a < 1 else None)

    def project(self, q: Potential) -> np.ndarray:
        """Least-squares coordinates of ``q`` on ``(0, a)`` in this parametrization."""
        a = self.a
        if self.basis == "cells":
            edges = np.linspace(0.0, a, self.dim + 1)
            x, w = np.polynomial.legendre.leggauss(40)
            out = []
            for u, v in zip(edges, edges[1:]):
                sub = np.linspace(u, v, 9)
                acc = 0.0
                for s0, s1 in zip(sub, sub[1:]):
                    acc += np.sum(w * q(s0 + (s1 - s0) * (x + 1) / 2)) * (s1 - s0) / 2
                out.append(acc / (v - u))
            return np.array(out)
        xs = np.linspace(0.0, a, 4001)[1:-1]
        basis = np.column_stack([self.potential(np.eye(self.dim)[j])(xs) - self.potential(np.zeros(self.dim))(xs)
                                 for j in range(self.dim)])
        c, *_ = np.linalg.lstsq(basis, q(xs), rcond=None)
        return c

    def to_dict(self) -> dict:
        d = {"ell": self.ell, "targets": self.targets.to_dict(), "basis": self.basis, "dim": self.dim,
             "reg": self.reg, "max_iter": self.max_iter, "seed": self.seed}
        if self.tail is not None:
            d["tail"] = self.tail.to_dict()
        if self.truth is not None:
            d["truth"] = self.truth.to_dict()
        if self.theta0 is not None:
            d["theta0"] = list(self.theta0)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ReconstructionProblem:
        return cls(float(d["ell"]), MixedDataset.from_dict(d["targets"]), d.get("basis", "cells"),
                   int(d.get("dim", 8)),
                   potential_from_dict(d["tail"]) if d.get("tail") else None,
                   float(d.get("reg", 1e-8)), int(d.get("max_iter", 60)), int(d.get("seed", 0)),
                   potential_from_dict(d["truth"]) if d.get("truth") else None,
                   tuple(d["theta0"]) if d.get("theta0") else None)


def synthetic_targets(ell: float, q: Potential, beta, indices, *, zeta_indices=None, a: float = 1.0,
                      rtol: float = RTOL_FORWARD) -> MixedDataset:
    """Exact data of ``q``: eigenvalues at ``indices``, norming constants at ``zeta_indices``."""
    zeta_indices = set(indices if zeta_indices is None else zeta_indices)
    recs = []
    for n in indices:
        lam, z = spectral_data(ell, q, beta, int(n), rtol=rtol)
        recs.append(EigenRecord(lam, beta, z if n in zeta_indices else None, int(n)))
    return MixedDataset(float(ell), float(a), tuple(recs))


def infer_indices(ell: float, q: Potential, records) -> list[int]:
    """Oscillation index of each target, read from the Prufer angle of ``q``."""
    out = []
    for r in records:
        if r.index is not None:
            out.append(r.index)
            continue
        theta, _ = prufer(ell, q, r.value)
        out.append(max(1, int(round((theta - target_angle(r.beta)) / math.pi)) + 1))
    return out


class ForwardModel:
    """Residual map ``theta -> r(theta)`` for a problem."""

    def __init__(self, problem: ReconstructionProblem, indices=None):
        self.p = problem
        recs = problem.targets.records
        if indices is None:
            guess = problem.potential(problem.theta0 or np.zeros(problem.dim))
            indices = infer_indices(problem.ell, guess, recs)
        self.indices = list(indices)
        self.gaps = np.array([local_gap(n, problem.ell, r.beta) for n, r in zip(self.indices, recs)])
        self.lam_t = np.array([r.value for r in recs])
        self.zmask = np.array([r.zeta is not None for r in recs])
        self.lnz_t = np.array([math.log(r.zeta) for r in recs if r.zeta is not None])

    def spectral(self, theta) -> tuple[np.ndarray, np.ndarray]:
        q = self.p.potential(theta)
        lam, zeta = [], []
        for n, r in zip(self.indices, self.p.targets.records):
            lv, zv = spectral_data(self.p.ell, q, r.beta, n, rtol=RTOL_FORWARD)
            lam.append(lv)
            zeta.append(zv)
        return np.array(lam), np.array(zeta)

    def split(self, lam, zeta) -> tuple[np.ndarray, np.ndarray]:
        return (lam - self.lam_t) / self.gaps, np.log(zeta[self.zmask]) - self.lnz_t

    def residual(self, theta) -> np.ndarray:
        e, z = self.split(*self.spectral(theta))
        return np.concatenate([e, z])

    def jacobian(self, theta, r0, jobs: int = 1) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)

        def col(j):
            h = FD_STEP * max(1.0, abs(theta[j]))
            t = theta.copy()
            t[j] += h
            return (self.residual(t) - r0) / h

        if jobs > 1:
            with ThreadPoolExecutor(jobs) as ex:
                cols = list(ex.map(col, range(len(theta))))
        else:
            cols = [col(j) for j in range(len(theta))]
        return np.column_stack(cols)


@dataclass
class ReconstructionResult:
    theta: tuple[float, ...]
    potential: Potential
    eig_residuals: tuple[float, ...]  # units of local gap
    zeta_residuals: tuple[float, ...]  # relative
    cost: float
    converged: bool
    message: str
    l2_error: float | None = None
    trace: list[dict] = field(default_factory=list)
    indices: tuple[int, ...] = ()

    @property
    def max_residual(self) -> float:
        return max([abs(v) for v in self.eig_residuals + self.zeta_residuals], default=0.0)

    def to_dict(self) -> dict:
        return {"theta": list(self.theta), "potential": self.potential.to_dict(),
                "eig_residuals": list(self.eig_residuals), "zeta_residuals": list(self.zeta_residuals),
                "cost": self.cost, "converged": self.converged, "message": self.message,
                "l2_error": self.l2_error, "indices": list(self.indices), "trace": self.trace}

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))


def _result(problem, model, theta, lam, zeta, cost, converged, msg, trace):
    e, z = model.split(lam, zeta)
    q = problem.potential(theta)
    err = l2_distance(q, problem.truth, 0.0, problem.a) if problem.truth is not None else None
    return ReconstructionResult(tuple(float(t) for t in theta), q, tuple(float(v) for v in e),
                                tuple(float(v) for v in np.expm1(z)), float(cost), converged, msg,
                                err, trace, tuple(model.indices))


def reconstruct(problem: ReconstructionProblem, *, jobs: int = 1, tol: float = 1e-13,
                model: ForwardModel | None = None) -> ReconstructionResult:
    """Levenberg-Marquardt on ``|r(theta)|^2``; returns the best iterate.

    ``reg`` is a Tikhonov term on each Gauss-Newton increment, so it steadies
    the steps without biasing the converged fit.  A trial step that moves
    any eigenvalue by more than one local gap is treated as an index swap
    and retried with heavier damping.
    """
    model = model or ForwardModel(problem)
    theta = np.array(problem.theta0 if problem.theta0 is not None else np.zeros(problem.dim), dtype=float)
    lam, zeta = model.spectral(theta)
    r = np.concatenate(model.split(lam, zeta))
    reg = problem.reg

    def cost_of(r):
        return 0.5 * float(r @ r)

    cost = cost_of(r)
    mu = 1e-3
    trace = [{"iter": 0, "cost": cost, "mu": mu}]
    converged, msg = False, "iteration budget exhausted"
    for it in range(1, problem.max_iter + 1):
        J = model.jacobian(theta, r, jobs)
        A = J.T @ J + reg * np.eye(len(theta))
        g = J.T @ r
        accepted = False
        for _ in range(30):
            D = np.diag(np.maximum(np.diag(A), 1e-12))
            step = np.linalg.solve(A + mu * D, -g)
            trial = theta + step
            try:
                lam_n, zeta_n = model.spectral(trial)
                if np.any(np.abs(lam_n - lam) > model.gaps):
                    raise SwapError("eigenvalue moved by more than a gap")
            except (SwapError, AccuracyError, CompletenessError, ArithmeticError, ValueError):
                mu *= 10
                continue
            r_n = np.concatenate(model.split(lam_n, zeta_n))
            c_n = cost_of(r_n)
            if c_n < cost:
                accepted = True
                break
            mu *= 4
        if not accepted:
            converged, msg = True, "no further decrease"
            break
        small = np.linalg.norm(step) <= tol * (1 + np.linalg.norm(theta))
        drop = cost - c_n
        theta, lam, zeta, r, cost = trial, lam_n, zeta_n, r_n, c_n
        mu = max(mu / 3, 1e-12)
        trace.append({"iter": it, "cost": cost, "mu": mu, "step": float(np.linalg.norm(step))})
        if small or cost < 1e-30 or drop <= tol * tol * max(cost, 1e-300):
            converged, msg = True, "step below tolerance"
            break
    return _result(problem, model, theta, lam, zeta, cost, converged, msg, trace)


# ---------------------------------------------------------------------------
# non-uniqueness probe


@dataclass
class ProbeResult:
    found: bool
    distance: float
    max_residual: float
    theta: tuple[float, ...]
    potential: Potential
    null_dimension: int
    trace: list[dict] = field(default_factory=list)

    @property
    def status(self) -> str:
        return "FOUND" if self.found else "NOT-FOUND"

    def to_dict(self) -> dict:
        return {"status": self.status, "distance": self.distance, "max_residual": self.max_residual,
                "theta": list(self.theta), "potential": self.potential.to_dict(),
                "null_dimension": self.null_dimension, "trace": self.trace}


def _correct(model, theta, tol, max_iter=25):
    """Minimum-norm Gauss-Newton back onto the data set ``r = 0``."""
    for _ in range(max_iter):
        r = model.residual(theta)
        if np.max(np.abs(r)) <= tol:
            return theta, r, True
        J = model.jacobian(theta, r)
        theta = theta - np.linalg.lstsq(J, r, rcond=1e-10)[0]
    r = model.residual(theta)
    return theta, r, bool(np.max(np.abs(r)) <= tol)


def nonuniqueness_probe(problem: ReconstructionProblem, rho: float, *, tol: float = 1e-9,
                        max_steps: int = 60, null_tol: float = 1e-6) -> ProbeResult:
    """Look for ``qh`` matching all data with ``||qh - q*||_{L^2(0,a)} >= rho``.

    Starting at the projection of the ground truth, walk along a seeded
    random direction in the numerical null space of the Jacobian and pull
    each step back onto the data set with minimum-norm Gauss-Newton.  When
    the Jacobian has full column rank the pull-back returns to ``q*``, the
    walk stalls and the result is NOT-FOUND.  The outcome says nothing
    either way about uniqueness beyond this budget.
    """
    if problem.truth is None:
        raise DomainError("the probe needs a ground-truth potential")
    truth = problem.truth
    a = problem.a
    th0 = problem.project(truth)
    model = ForwardModel(problem, infer_indices(problem.ell, truth, problem.targets.records))
    theta, r, ok = _correct(model, th0, tol)
    rng = np.random.default_rng(problem.seed)

    def dist(th):
        return l2_distance(problem.potential(th), truth, 0.0, a)

    d = dist(theta)
    trace = [{"step": 0, "distance": d, "residual": float(np.max(np.abs(r)))}]
    J = model.jacobian(theta, r)
    sv = np.linalg.svd(J, compute_uv=False)
    null_dim = int(len(theta) - np.sum(sv > null_tol * sv.max()))
    if ok and d >= rho:
        return ProbeResult(True, d, float(np.max(np.abs(r))), tuple(theta), problem.potential(theta),
                           null_dim, trace)
    v_prev = None
    h = max(rho / 4, 1e-3) * math.sqrt(len(theta) / max(a, 1e-12))
    for k in range(1, max_steps + 1):
        J = model.jacobian(theta, r)
        _, s, Vt = np.linalg.svd(J, full_matrices=True)
        rank = int(np.sum(s > null_tol * s.max()))
        N = Vt[rank:].T if rank < len(theta) else Vt[-1:].T
        if v_prev is None:
            v = N @ rng.standard_normal(N.shape[1])
        else:
            v = N @ (N.T @ v_prev)
        if np.linalg.norm(v) == 0:
            break
        v /= np.linalg.norm(v)
        trial, r_t, ok_t = _correct(model, theta + h * v, tol)
        d_t = dist(trial)
        if not ok_t or d_t <= d + 1e-3 * h:
            h /= 2
            trace.append({"step": k, "distance": d, "h": h, "rejected": True})
            if h < 1e-4:
                break
            continue
        theta, r, d, v_prev = trial, r_t, d_t, v
        trace.append({"step": k, "distance": d, "residual": float(np.max(np.abs(r))), "h": h})
        if d >= rho:
            return ProbeResult(True, d, float(np.max(np.abs(r))), tuple(theta),
                               problem.potential(theta), null_dim, trace)
    return ProbeResult(False, d, float(np.max(np.abs(r))), tuple(theta), problem.potential(theta),
                       null_dim, trace)


__all__ = [
    "ReconstructionProblem", "ReconstructionResult", "ForwardModel", "reconstruct",
    "nonuniqueness_probe", "ProbeResult", "synthetic_targets", "l2_distance", "local_gap",
    "infer_indices", "SwapError",
]
