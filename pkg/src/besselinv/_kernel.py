"""Compiled DOP853 integrator for the radial equation.

The state is ``(w, w', I)`` with ``w = exp(-s x) u`` for a solution ``u`` of

    u'' = (c / x**2 + q(x) - lam) u,     c = l (l + 1),

and ``I' = w**2``.  ``s >= 0`` is an exponential rescaling used for complex or
negative ``lam``; ``s = 0`` integrates ``u`` itself.  The potential is passed
as Chebyshev pieces: ``edges`` (n + 1,), ``coefs`` (n, D + 1), ``degs`` (n,).
"""

from __future__ import annotations

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

# Butcher tableau of Dormand-Prince 8(5,3); only the data is taken from scipy.
N_STAGES = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:N_STAGES, :N_STAGES])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:N_STAGES])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0
ERROR_EXPONENT = -1.0 / 8.0

STATUS_OK = 0
STATUS_TOO_MANY_STEPS = 1
STATUS_STEP_UNDERFLOW = 2


@njit(cache=True, nogil=True)
def _segment(edges, x, lo, hi):
    # Piece containing x, consistent with the current integration interval
    # [lo, hi]: at lo take the piece to the right, at hi the piece to the left.
    n = edges.shape[0] - 1
    if x <= lo:
        x = lo
        left = False
    elif x >= hi:
        x = hi
        left = True
    else:
        left = False
    i0 = 0
    i1 = n + 1
    if left:
        # last edge strictly below x
        while i1 - i0 > 1:
            mid = (i0 + i1) // 2
            if edges[mid] < x:
                i0 = mid
            else:
                i1 = mid
    else:
        # last edge <= x
        while i1 - i0 > 1:
            mid = (i0 + i1) // 2
            if edges[mid] <= x:
                i0 = mid
            else:
                i1 = mid
    if i0 > n - 1:
        i0 = n - 1
    return i0, x


@njit(cache=True, nogil=True)
def q_eval(x, lo, hi, edges, coefs, degs):
    i, xx = _segment(edges, x, lo, hi)
    a = edges[i]
    b = edges[i + 1]
    d = degs[i]
    if d == 0:
        return coefs[i, 0]
    t = (2.0 * xx - a - b) / (b - a)
    # Clenshaw recurrence for sum c_k T_k(t)
    b1 = 0.0
    b2 = 0.0
    for k in range(d, 0, -1):
        tmp = 2.0 * t * b1 - b2 + coefs[i, k]
        b2 = b1
        b1 = tmp
    return t * b1 - b2 + coefs[i, 0]


@njit(cache=True, nogil=True)
def _rhs(x, y, out, cterm, lam, s, lo, hi, edges, coefs, degs):
    v = cterm / (x * x) + q_eval(x, lo, hi, edges, coefs, degs)
    out[0] = -s * y[0] + y[1]
    out[1] = -s * y[1] + (v - lam) * y[0]
    out[2] = y[0] * y[0]


@njit(cache=True, nogil=True)
def integrate(cterm, lam, s, edges, coefs, degs, stops, y0, out_x,
              rtol, atol, hmax, h0, count_zeros, max_steps):
    """Integrate through ``stops`` (monotone, mandatory step boundaries).

    Returns ``(out, zeros, nsteps, status)`` where ``out[j]`` is the state at
    ``out_x[j]`` (``out_x`` monotone in the same direction, inside the span
    of ``stops``) and ``zeros`` counts sign changes of ``Re w`` between
    accepted steps.
    """
    A = _A
    B = _B
    C = _C
    E3 = _E3
    E5 = _E5
    ns = N_STAGES
    nout = out_x.shape[0]
    out = np.zeros((nout, 3), dtype=np.complex128)
    K = np.zeros((ns + 1, 3), dtype=np.complex128)
    y = y0.copy()
    ynew = np.zeros(3, dtype=np.complex128)
    ytmp = np.zeros(3, dtype=np.complex128)
    ftmp = np.zeros(3, dtype=np.complex128)
    zeros = 0
    nsteps = 0
    status = STATUS_OK
    direction = 1.0 if stops[stops.shape[0] - 1] >= stops[0] else -1.0
    jout = 0
    x = stops[0]
    while jout < nout and out_x[jout] == x:
        out[jout, :] = y
        jout += 1
    h_abs = h0
    for k in range(stops.shape[0] - 1):
        xa = stops[k]
        xb = stops[k + 1]
        if xa == xb:
            continue
        lo = min(xa, xb)
        hi = max(xa, xb)
        x = xa
        _rhs(x, y, ftmp, cterm, lam, s, lo, hi, edges, coefs, degs)
        for c in range(3):
            K[0, c] = ftmp[c]
        while direction * (xb - x) > 0.0:
            if nsteps >= max_steps:
                return out, zeros, nsteps, STATUS_TOO_MANY_STEPS
            if h_abs > hmax:
                h_abs = hmax
            min_step = 10.0 * abs(np.nextafter(x, x + direction) - x)
            accepted = False
            rejected = False
            while not accepted:
                if h_abs < min_step:
                    return out, zeros, nsteps, STATUS_STEP_UNDERFLOW
                # land on the next output point or stop
                target = xb
                if jout < nout and direction * (out_x[jout] - target) < 0.0:
                    target = out_x[jout]
                x_new = x + direction * h_abs
                if direction * (x_new - target) > 0.0:
                    x_new = target
                h = x_new - x
                # stages; K[0] holds f(x, y)
                for st in range(1, ns):
                    for c in range(3):
                        acc = 0.0 + 0.0j
                        for m in range(st):
                            acc += A[st, m] * K[m, c]
                        ytmp[c] = y[c] + h * acc
                    _rhs(x + C[st] * h, ytmp, ftmp, cterm, lam, s, lo, hi,
                         edges, coefs, degs)
                    for c in range(3):
                        K[st, c] = ftmp[c]
                for c in range(3):
                    acc = 0.0 + 0.0j
                    for m in range(ns):
                        acc += B[m] * K[m, c]
                    ynew[c] = y[c] + h * acc
                _rhs(x_new, ynew, ftmp, cterm, lam, s, lo, hi, edges, coefs, degs)
                for c in range(3):
                    K[ns, c] = ftmp[c]
                err5 = 0.0
                err3 = 0.0
                for c in range(3):
                    e5 = 0.0 + 0.0j
                    e3 = 0.0 + 0.0j
                    for m in range(ns + 1):
                        e5 += E5[m] * K[m, c]
                        e3 += E3[m] * K[m, c]
                    sc = atol + rtol * max(abs(y[c]), abs(ynew[c]))
                    err5 += (abs(e5) / sc) ** 2
                    err3 += (abs(e3) / sc) ** 2
                if err5 == 0.0 and err3 == 0.0:
                    err = 0.0
                else:
                    err = abs(h) * err5 / np.sqrt((err5 + 0.01 * err3) * 3.0)
                if err < 1.0:
                    if err == 0.0:
                        factor = MAX_FACTOR
                    else:
                        factor = min(MAX_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                    if rejected:
                        factor = min(1.0, factor)
                    # a step truncated to hit a target keeps the prior proposal
                    if abs(h) >= h_abs or factor < 1.0:
                        h_abs = min(h_abs, abs(h)) * factor if abs(h) < h_abs else abs(h) * factor
                    accepted = True
                else:
                    h_abs = abs(h) * max(MIN_FACTOR, SAFETY * err ** ERROR_EXPONENT)
                    rejected = True
            nsteps += 1
            if count_zeros and y[0].real * ynew[0].real < 0.0:
                zeros += 1
            x = x_new
            for c in range(3):
                y[c] = ynew[c]
                K[0, c] = K[ns, c]
            while jout < nout and out_x[jout] == x:
                out[jout, :] = y
                jout += 1
    return out, zeros, nsteps, status
