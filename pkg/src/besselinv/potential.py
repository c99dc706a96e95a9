"""Potentials on (0, 1): representations, norms and the remainder functional."""

from __future__ import annotations

import hashlib
import json
import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import chebyshev as C
from numpy.polynomial import polynomial as P
from scipy import integrate

QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-8


class DomainError(ValueError):
    """Argument outside the domain of an operation."""


class UnboundedNormError(ArithmeticError):
    """Quadrature for a norm did not converge (integral likely divergent)."""


@dataclass(frozen=True)
class SmoothnessTag:
    """Smoothness of a potential difference near the split point ``a``.

    ``k`` is the Sobolev order, ``p`` the integrability exponent (``math.inf``
    allowed), ``delta0`` the neighbourhood radius and ``vanishing`` the number
    of derivatives known to vanish at ``a``.
    """

    k: int = 0
    p: float = math.inf
    delta0: float = 0.1
    vanishing: int = 0

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 0:
            raise DomainError(f"k must be a nonnegative integer, got {self.k}")
        if not (self.p >= 1):
            raise DomainError(f"p must lie in [1, inf], got {self.p}")
        if not (self.delta0 > 0):
            raise DomainError(f"delta0 must be positive, got {self.delta0}")
        if self.vanishing < 0:
            raise DomainError("vanishing derivative count must be >= 0")

    @property
    def inv_conjugate(self) -> float:
        """``1/p'``: 1 for p = inf, 0 for p = 1, else 1 - 1/p."""
        return conjugate_inverse(self.p)

    def check_split(self, a: float) -> None:
        if not (0 < self.delta0 < a):
            raise DomainError(f"delta0 must lie in (0, a={a}), got {self.delta0}")


def conjugate_inverse(p: float) -> float:
    if p == math.inf:
        return 1.0
    if p < 1:
        raise DomainError(f"p must lie in [1, inf], got {p}")
    return 1.0 - 1.0 / p


def _chebfit(f: Callable, lo: float, hi: float, tol: float = 1e-14,
             max_deg: int = 96) -> list[tuple[float, float, np.ndarray]]:
    """Chebyshev pieces of ``f`` on [lo, hi], bisecting until coefficients decay."""
    deg = 16
    while deg <= max_deg:
        ser = C.Chebyshev.interpolate(f, deg, domain=[lo, hi])
        c = ser.coef
        scale = max(np.max(np.abs(c)), 1e-300)
        if np.max(np.abs(c[-3:])) <= tol * scale or scale < 1e-300:
            c = C.chebtrim(c, tol * scale)
            return [(lo, hi, np.asarray(c, dtype=float))]
        deg *= 2
    mid = 0.5 * (lo + hi)
    if hi - lo < 1e-6:
        return [(lo, hi, np.asarray(c, dtype=float))]
    return _chebfit(f, lo, mid, tol, max_deg) + _chebfit(f, mid, hi, tol, max_deg)


def _poly_on(seg_lo: float, seg_hi: float, coef: np.ndarray, lo: float, hi: float) -> np.ndarray:
    # Re-expand a Chebyshev piece given on [seg_lo, seg_hi] onto [lo, hi] (exact).
    if len(coef) == 1:
        return coef.copy()
    ser = C.Chebyshev(coef, domain=[seg_lo, seg_hi])
    return C.Chebyshev.interpolate(ser, len(coef) - 1, domain=[lo, hi]).coef


@dataclass(frozen=True)
class Pieces:
    """Piecewise Chebyshev form consumed by the integrator."""

    edges: np.ndarray
    coefs: np.ndarray
    degs: np.ndarray
    hard: np.ndarray  # discontinuities: mandatory step boundaries in (0, 1)

    @classmethod
    def from_list(cls, segs, hard) -> Pieces:
        edges = np.array([segs[0][0]] + [s[1] for s in segs], dtype=float)
        dmax = max(len(s[2]) for s in segs)
        coefs = np.zeros((len(segs), dmax))
        for i, s in enumerate(segs):
            coefs[i, : len(s[2])] = s[2]
        degs = np.array([len(s[2]) - 1 for s in segs], dtype=np.int64)
        return cls(edges, coefs, degs, np.unique(np.asarray(hard, dtype=float)))

    def restrict(self, lo: float, hi: float) -> list:
        out = []
        for i in range(len(self.edges) - 1):
            a, b = self.edges[i], self.edges[i + 1]
            lo2, hi2 = max(a, lo), min(b, hi)
            if hi2 <= lo2:
                continue
            c = self.coefs[i, : self.degs[i] + 1]
            if (lo2, hi2) != (a, b):
                c = _poly_on(a, b, c, lo2, hi2)
            out.append((lo2, hi2, c))
        return out

    @cached_property
    def qmin(self) -> float:
        # sampled minimum, used only for step-size control
        t = np.linspace(-1, 1, 17)
        return float(min(np.min(C.chebval(t, self.coefs[i, : self.degs[i] + 1]))
                         for i in range(len(self.edges) - 1)))

    @cached_property
    def qmax_abs(self) -> float:
        t = np.linspace(-1, 1, 17)
        return float(max(np.max(np.abs(C.chebval(t, self.coefs[i, : self.degs[i] + 1])))
                         for i in range(len(self.edges) - 1)))


class Potential(ABC):
    """Real potential on (0, 1).

    Subclasses implement ``_values`` and ``breakpoints``; everything else,
    including the solver form in ``pieces``, is derived.  Instances are
    immutable.
    """

    split: float = 1.0
    smoothness: SmoothnessTag | None = None

    @abstractmethod
    def _values(self, x: np.ndarray) -> np.ndarray: ...

    @property
    @abstractmethod
    def breakpoints(self) -> tuple[float, ...]:
        """Discontinuities of ``q`` inside (0, 1)."""

    def __call__(self, x):
        arr = np.asarray(x, dtype=float)
        return self._values(np.atleast_1d(arr)).reshape(arr.shape)

    def evaluate(self, x: float) -> float:
        if not (0.0 < x < 1.0):
            raise DomainError(f"x must lie in (0, 1), got {x}")
        return float(self._values(np.array([float(x)]))[0])

    @cached_property
    def pieces(self) -> Pieces:
        edges = (0.0, *self.breakpoints, 1.0)
        segs = []
        for lo, hi in zip(edges[:-1], edges[1:]):
            segs.extend(_chebfit(self._scalar_on(lo, hi), lo, hi))
        return Pieces.from_list(segs, self.breakpoints)

    def _scalar_on(self, lo, hi):
        # evaluate inside the open piece so one-sided limits are used at ends
        eps = 1e-13 * (hi - lo)

        def f(x):
            return self._values(np.clip(np.asarray(x, dtype=float), lo + eps, hi - eps))

        return f

    @cached_property
    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        raise NotImplementedError

    def l1_norm(self) -> float:
        return weighted_norm(self, 0.0)

    def difference_breaks(self, other: Potential) -> tuple[float, ...]:
        return tuple(sorted(set(self.breakpoints) | set(other.breakpoints)))

    # arithmetic with scalars -------------------------------------------------
    def shifted(self, c: float) -> Potential:
        raise NotImplementedError

    def scaled(self, c: float) -> Potential:
        raise NotImplementedError

    def __add__(self, c):
        if isinstance(c, (int, float)):
            return self.shifted(float(c))
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, c):
        if isinstance(c, (int, float)):
            return self.shifted(-float(c))
        return NotImplemented

    def __mul__(self, c):
        if isinstance(c, (int, float)):
            return self.scaled(float(c))
        return NotImplemented

    __rmul__ = __mul__

    def __neg__(self):
        return self.scaled(-1.0)


def _check_increasing(breaks: Sequence[float]) -> None:
    b = np.asarray(breaks, dtype=float)
    if np.any(np.diff(b) <= 0):
        raise DomainError("breakpoints must be strictly increasing")


@dataclass(frozen=True, eq=False)
class PiecewiseConstant(Potential):
    """Constant on cells ``[breaks[i], breaks[i+1])``; ``breaks`` spans [0, 1]."""

    breaks: tuple[float, ...]
    values: tuple[float, ...]
    split: float = 1.0
    smoothness: SmoothnessTag | None = None

    def __post_init__(self):
        object.__setattr__(self, "breaks", tuple(float(b) for b in self.breaks))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.breaks) != len(self.values) + 1:
            raise DomainError("need len(breaks) == len(values) + 1")
        if self.breaks[0] != 0.0 or self.breaks[-1] != 1.0:
            raise DomainError("breaks must start at 0 and end at 1")
        _check_increasing(self.breaks)
        if not all(math.isfinite(v) for v in self.values):
            raise DomainError("values must be finite")

    @classmethod
    def constant(cls, c: float = 0.0, **kw) -> PiecewiseConstant:
        return cls((0.0, 1.0), (c,), **kw)

    @classmethod
    def uniform(cls, values: Sequence[float], lo: float = 0.0, hi: float = 1.0,
                tail: float = 0.0, **kw) -> PiecewiseConstant:
        """Equal cells on [lo, hi], constant ``tail`` elsewhere."""
        n = len(values)
        inner = list(np.linspace(lo, hi, n + 1))
        breaks, vals = [], []
        if lo > 0:
            breaks.append(0.0)
            vals.append(tail)
        breaks.extend(inner)
        vals.extend(values)
        if hi < 1:
            vals.append(tail)
            breaks.append(1.0)
        return cls(tuple(breaks), tuple(vals), **kw)

    def _values(self, x):
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        idx = np.clip(idx, 0, len(self.values) - 1)
        return np.asarray(self.values)[idx]

    @property
    def breakpoints(self):
        return tuple(b for i, b in enumerate(self.breaks[1:-1])
                     if self.values[i] != self.values[i + 1])

    @cached_property
    def pieces(self) -> Pieces:
        segs = [(a, b, np.array([v])) for a, b, v in zip(self.breaks[:-1], self.breaks[1:], self.values)]
        return Pieces.from_list(segs, self.breakpoints)

    def shifted(self, c):
        return PiecewiseConstant(self.breaks, tuple(v + c for v in self.values), self.split, self.smoothness)

    def scaled(self, c):
        return PiecewiseConstant(self.breaks, tuple(v * c for v in self.values), self.split, self.smoothness)

    def to_dict(self):
        return {"kind": "piecewise", "split": self.split,
                "piecewise": {"breaks": list(self.breaks), "values": list(self.values)},
                **_smooth_dict(self.smoothness)}


@dataclass(frozen=True, eq=False)
class BasisPotential(Potential):
    """Finite expansion on (0, a) plus an explicit tail potential on [a, 1).

    ``family`` is ``"cosine"`` (terms ``cos(j pi x / a)``) or ``"polynomial"``
    (terms ``x**j``).
    """

    family: str
    coeffs: tuple[float, ...]
    split: float = 1.0
    tail: Potential | None = None
    smoothness: SmoothnessTag | None = None

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.family not in ("cosine", "polynomial"):
            raise DomainError(f"unknown basis family {self.family!r}")
        if not (0 < self.split <= 1):
            raise DomainError(f"split must lie in (0, 1], got {self.split}")
        if self.split < 1 and self.tail is None:
            raise DomainError("a tail potential is required when split < 1")
        if self.smoothness is not None:
            self.smoothness.check_split(self.split)

    def _head(self, x):
        c = np.asarray(self.coeffs)
        if self.family == "polynomial":
            return P.polyval(x, c)
        j = np.arange(len(c))
        return np.cos(np.multiply.outer(x, j) * math.pi / self.split) @ c

    def _values(self, x):
        out = np.asarray(self._head(x), dtype=float)
        if self.split < 1:
            m = x >= self.split
            if np.any(m):
                out = np.where(m, self.tail(np.where(m, x, 0.5 * (1 + self.split))), out)
        return out

    @property
    def breakpoints(self):
        bps = []
        if self.split < 1:
            bps = [b for b in self.tail.breakpoints if b > self.split]
            lim = float(self._head(np.array([self.split]))[0])
            tv = self.tail.evaluate(self.split) if self.split < 1 else lim
            if abs(lim - tv) > 0:
                bps = [self.split] + bps
        return tuple(bps)

    @cached_property
    def pieces(self) -> Pieces:
        a = self.split
        if self.family == "polynomial":
            poly = P.Polynomial(np.asarray(self.coeffs))
            ser = poly.convert(kind=C.Chebyshev, domain=[0, a])
            segs = [(0.0, a, np.asarray(ser.coef, dtype=float))]
        else:
            segs = _chebfit(self._head, 0.0, a)
        hard = []
        if a < 1:
            segs += self.tail.pieces.restrict(a, 1.0)
            hard = [a] + [b for b in self.tail.pieces.hard if b > a]
        return Pieces.from_list(segs, hard)

    def shifted(self, c):
        co = list(self.coeffs) or [0.0]
        co[0] += c
        tail = self.tail.shifted(c) if self.tail is not None else None
        return BasisPotential(self.family, tuple(co), self.split, tail, self.smoothness)

    def scaled(self, c):
        tail = self.tail.scaled(c) if self.tail is not None else None
        return BasisPotential(self.family, tuple(v * c for v in self.coeffs), self.split, tail, self.smoothness)

    def with_head(self, coeffs: Sequence[float]) -> BasisPotential:
        return BasisPotential(self.family, tuple(coeffs), self.split, self.tail, self.smoothness)

    def to_dict(self):
        d = {"kind": "basis", "split": self.split,
             "basis": {"family": self.family, "coeffs": list(self.coeffs)},
             **_smooth_dict(self.smoothness)}
        if self.tail is not None:
            d["basis"]["tail"] = self.tail.to_dict()
        return d


@dataclass(frozen=True, eq=False)
class TablePotential(Potential):
    """Linear interpolation of samples ``(x, y)``; constant beyond the ends."""

    x: np.ndarray
    y: np.ndarray
    split: float = 1.0
    smoothness: SmoothnessTag | None = None

    def __post_init__(self):
        xs = np.asarray(self.x, dtype=float)
        ys = np.asarray(self.y, dtype=float)
        if xs.shape != ys.shape or xs.ndim != 1 or len(xs) < 2:
            raise DomainError("table needs matching 1-d x and y with >= 2 samples")
        _check_increasing(xs)
        if xs[0] < 0 or xs[-1] > 1:
            raise DomainError("table abscissae must lie in [0, 1]")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "x", xs)
        object.__setattr__(self, "y", ys)

    @classmethod
    def from_callable(cls, f: Callable, n: int = 100_001, **kw) -> TablePotential:
        xs = np.linspace(0.0, 1.0, n)
        return cls(xs, np.asarray(f(xs), dtype=float), **kw)

    def _values(self, x):
        return np.interp(x, self.x, self.y)

    @property
    def breakpoints(self):
        return ()

    @cached_property
    def pieces(self) -> Pieces:
        xs = self.x
        ys = self.y
        if xs[0] > 0:
            xs = np.concatenate([[0.0], xs])
            ys = np.concatenate([[ys[0]], ys])
        if xs[-1] < 1:
            xs = np.concatenate([xs, [1.0]])
            ys = np.concatenate([ys, [ys[-1]]])
        edges = xs
        coefs = np.column_stack([0.5 * (ys[:-1] + ys[1:]), 0.5 * (ys[1:] - ys[:-1])])
        degs = np.ones(len(edges) - 1, dtype=np.int64)
        return Pieces(edges, coefs, degs, np.zeros(0))

    def shifted(self, c):
        return TablePotential(self.x, self.y + c, self.split, self.smoothness)

    def scaled(self, c):
        return TablePotential(self.x, self.y * c, self.split, self.smoothness)

    def to_dict(self):
        return {"kind": "table", "split": self.split,
                "table": {"x": self.x.tolist(), "y": self.y.tolist()},
                **_smooth_dict(self.smoothness)}


ZERO = PiecewiseConstant.constant(0.0)


# ---------------------------------------------------------------------------
# norms


def _quad(f, lo, hi, points=None):
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(f, lo, hi, points=points, epsabs=QUAD_EPSABS,
                                    epsrel=QUAD_EPSREL, limit=500)
        except integrate.IntegrationWarning as exc:
            raise UnboundedNormError(f"quadrature did not converge on [{lo}, {hi}]: {exc}") from exc
    if not math.isfinite(val):
        raise UnboundedNormError(f"non-finite integral on [{lo}, {hi}]")
    return val


def _tilde(q: Potential, ell: float) -> Callable[[float], float]:
    if ell < -0.5:
        raise DomainError(f"ell must be >= -1/2, got {ell}")
    if ell == -0.5:
        return lambda x: abs((1.0 - math.log(x)) * q.evaluate(x))
    return lambda x: abs(q.evaluate(x))


def _integrate_tilde(q: Potential, ell: float, weight: Callable[[float], float]) -> float:
    """Integral of weight(x) * q~(x) over (0, 1), split at breakpoints.

    The first piece is mapped by x = exp(-u) so the logarithmic endpoint
    behaviour (ell = -1/2) becomes an exponentially decaying tail.
    """
    qt = _tilde(q, ell)
    edges = (0.0, *q.breakpoints, 1.0)
    first = edges[1]
    u0 = -math.log(first)
    def head(u):
        x = math.exp(-u)
        return weight(x) * qt(x) * x if x > 0 else 0.0

    total = _quad(head, u0, math.inf)
    for lo, hi in zip(edges[1:-1], edges[2:]):
        total += _quad(lambda x: weight(x) * qt(x), lo, hi)
    return total


def weighted_norm(q: Potential, ell: float) -> float:
    """Integral of |q| over (0, 1), with the weight (1 - ln x) when ell = -1/2."""
    return _integrate_tilde(q, ell, lambda x: 1.0)


def remainder_R(q: Potential, ell: float, lam: float) -> float:
    """Remainder functional: integral of y q~(y) / (1 + sqrt(lam) y) over (0, 1)."""
    if lam < 0:
        raise DomainError(f"lam must be >= 0, got {lam}")
    r = math.sqrt(lam)
    return _integrate_tilde(q, ell, lambda y: y / (1.0 + r * y))


def in_weighted_class(q: Potential, ell: float) -> bool:
    try:
        return math.isfinite(weighted_norm(q, ell))
    except UnboundedNormError:
        return False


# ---------------------------------------------------------------------------
# description files (TOML)


def _smooth_dict(tag: SmoothnessTag | None) -> dict:
    if tag is None:
        return {}
    return {"smoothness": {"k": tag.k, "p": "inf" if tag.p == math.inf else tag.p,
                           "delta0": tag.delta0, "vanishing": tag.vanishing}}


def _smooth_from(d: dict | None) -> SmoothnessTag | None:
    if not d:
        return None
    p = d.get("p", math.inf)
    p = math.inf if p in ("inf", "infinity", math.inf) else float(p)
    return SmoothnessTag(int(d.get("k", 0)), p, float(d.get("delta0", 0.1)), int(d.get("vanishing", 0)))


def potential_from_dict(d: dict) -> Potential:
    kind = d.get("kind")
    split = float(d.get("split", 1.0))
    tag = _smooth_from(d.get("smoothness"))
    if kind == "constant":
        return PiecewiseConstant.constant(float(d.get("value", 0.0)), split=split, smoothness=tag)
    if kind == "piecewise":
        s = d["piecewise"]
        return PiecewiseConstant(tuple(s["breaks"]), tuple(s["values"]), split=split, smoothness=tag)
    if kind == "basis":
        s = d["basis"]
        tail = potential_from_dict(s["tail"]) if "tail" in s else None
        return BasisPotential(s["family"], tuple(s["coeffs"]), split, tail, tag)
    if kind == "table":
        s = d["table"]
        return TablePotential(np.asarray(s["x"]), np.asarray(s["y"]), split=split, smoothness=tag)
    raise DomainError(f"unknown potential kind {kind!r}")


def load_potential(path: str | Path) -> Potential:
    """Read a potential description (TOML; JSON accepted by extension)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        return potential_from_dict(json.loads(text))
    import tomli

    return potential_from_dict(tomli.loads(text))


def save_potential(q: Potential, path: str | Path) -> None:
    import tomli_w

    Path(path).write_text(tomli_w.dumps(q.to_dict()))


def named_potential(name: str) -> Potential:
    """Small catalogue used by the command line (``zero``, ``x``, ``const:<c>``)."""
    if name == "zero":
        return ZERO
    if name == "x":
        return BasisPotential("polynomial", (0.0, 1.0))
    if name.startswith("const:"):
        return PiecewiseConstant.constant(float(name.split(":", 1)[1]))
    raise DomainError(f"unknown potential name {name!r}")
