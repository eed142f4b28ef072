"""Compiled inner loops for field evaluation.

Every loop visits atoms in the order they are stored (lexicographic, see
``MarkedConfiguration``), so pointwise and grid evaluations accumulate in
the same order.  Grids are indexed ``[i, j]`` with ``i`` along ``x1``.
Radial kernels are passed as ``(R, C, nu, outer, lam, a, gam)``.
"""
import math

import numba as nb
import numpy as np

# Squared distance below which a singular kernel is not evaluated.
SING2 = 1e-24


@nb.njit(inline="always", nogil=True)
def _inv_pow_half(r2, lam):
    # r2 ** (-lam / 2), by repeated squaring when lam is an integer
    if lam != math.floor(lam) or lam > 200.0:
        return r2 ** (-0.5 * lam)
    n = int(lam)
    k = n // 2
    acc = 1.0
    base = r2
    while k:
        if k & 1:
            acc *= base
        base *= base
        k >>= 1
    if n & 1:
        acc *= math.sqrt(r2)
    return 1.0 / acc


@nb.njit(inline="always", nogil=True)
def _g(r2, C, nu, outer, lam, a, gam):
    if r2 <= 1.0:
        if nu == 0.5:
            return C / math.sqrt(math.sqrt(r2))
        return C * r2 ** (-0.5 * nu)
    if outer == 0:
        return _inv_pow_half(r2, lam)
    return math.exp(-a * r2 ** (0.5 * gam))


@nb.njit(inline="always", nogil=True)
def _dg_over_r(r2, C, nu, outer, lam, a, gam):
    # g'(r) / r, so that grad = (dg/r) * (y - x)
    if r2 <= 1.0:
        return -nu * C * r2 ** (-0.5 * nu - 1.0)
    if outer == 0:
        return -lam * _inv_pow_half(r2, lam) / r2
    r = math.sqrt(r2)
    return -a * gam * r ** (gam - 2.0) * math.exp(-a * r ** gam)


@nb.njit(cache=True, nogil=True)
def radial_points(P, amp, Q, R, C, nu, outer, lam, a, gam):
    """Field at query points ``Q`` (m, d) from atoms ``P`` sorted by ``x1``."""
    n, d = P.shape
    m = Q.shape[0]
    out = np.zeros(m)
    sing = np.zeros(m, dtype=np.bool_)
    R2 = R * R
    x1 = P[:, 0].copy()
    for q in range(m):
        lo = np.searchsorted(x1, Q[q, 0] - R, side="left")
        hi = np.searchsorted(x1, Q[q, 0] + R, side="right")
        s = 0.0
        for p in range(lo, hi):
            r2 = 0.0
            for k in range(d):
                t = Q[q, k] - P[p, k]
                r2 += t * t
            if r2 <= R2:
                if r2 < SING2:
                    sing[q] = True
                    continue
                s += amp[p] * _g(r2, C, nu, outer, lam, a, gam)
        out[q] = s
    return out, sing


@nb.njit(cache=True, nogil=True)
def radial_grad_points(P, amp, Q, R, C, nu, outer, lam, a, gam):
    n, d = P.shape
    m = Q.shape[0]
    out = np.zeros((m, d))
    sing = np.zeros(m, dtype=np.bool_)
    R2 = R * R
    x1 = P[:, 0].copy()
    for q in range(m):
        lo = np.searchsorted(x1, Q[q, 0] - R, side="left")
        hi = np.searchsorted(x1, Q[q, 0] + R, side="right")
        for p in range(lo, hi):
            r2 = 0.0
            for k in range(d):
                t = Q[q, k] - P[p, k]
                r2 += t * t
            if r2 <= R2:
                if r2 < SING2:
                    sing[q] = True
                    continue
                f = amp[p] * _dg_over_r(r2, C, nu, outer, lam, a, gam)
                for k in range(d):
                    out[q, k] += f * (Q[q, k] - P[p, k])
    return out, sing


@nb.njit(inline="always", nogil=True)
def _row_range(c, half, o, h, n):
    lo = int(math.ceil((c - half - o) / h - 0.5))
    hi = int(math.floor((c + half - o) / h - 0.5))
    return max(lo, 0), min(hi, n - 1)


@nb.njit(cache=True, nogil=True)
def radial_grid(P, amp, x0, y0, h, nx, ny, R, C, nu, outer, lam, a, gam):
    """Field at nodes ``(x0 + (i + 1/2) h, y0 + (j + 1/2) h)``.

    ``x0``/``y0`` already include the grid jitter.  Returns the grid and the
    number of node/atom pairs closer than the singularity cutoff.
    """
    out = np.zeros((nx, ny))
    nsing = 0
    R2 = R * R
    for p in range(P.shape[0]):
        px = P[p, 0]
        py = P[p, 1]
        w = amp[p]
        ilo, ihi = _row_range(px, R + 1e-12, x0, h, nx)
        for i in range(ilo, ihi + 1):
            dx = x0 + (i + 0.5) * h - px
            rem = R2 - dx * dx
            if rem < 0.0:
                continue
            jlo, jhi = _row_range(py, math.sqrt(rem) + 1e-12, y0, h, ny)
            for j in range(jlo, jhi + 1):
                dy = y0 + (j + 0.5) * h - py
                r2 = dx * dx + dy * dy
                if r2 <= R2:
                    if r2 < SING2:
                        nsing += 1
                        continue
                    out[i, j] += w * _g(r2, C, nu, outer, lam, a, gam)
    return out, nsing


@nb.njit(cache=True, nogil=True)
def radial_grid_valgrad(P, amp, x0, y0, h, nx, ny, R, C, nu, outer, lam, a, gam):
    """Field and gradient at grid nodes; singular nodes are flagged."""
    val = np.zeros((nx, ny))
    gx = np.zeros((nx, ny))
    gy = np.zeros((nx, ny))
    sing = np.zeros((nx, ny), dtype=np.bool_)
    R2 = R * R
    for p in range(P.shape[0]):
        px = P[p, 0]
        py = P[p, 1]
        w = amp[p]
        ilo, ihi = _row_range(px, R + 1e-12, x0, h, nx)
        for i in range(ilo, ihi + 1):
            dx = x0 + (i + 0.5) * h - px
            rem = R2 - dx * dx
            if rem < 0.0:
                continue
            jlo, jhi = _row_range(py, math.sqrt(rem) + 1e-12, y0, h, ny)
            for j in range(jlo, jhi + 1):
                dy = y0 + (j + 0.5) * h - py
                r2 = dx * dx + dy * dy
                if r2 <= R2:
                    if r2 < SING2:
                        sing[i, j] = True
                        continue
                    val[i, j] += w * _g(r2, C, nu, outer, lam, a, gam)
                    f = w * _dg_over_r(r2, C, nu, outer, lam, a, gam)
                    gx[i, j] += f * dx
                    gy[i, j] += f * dy
    return val, gx, gy, sing


@nb.njit(cache=True, nogil=True)
def token_points(P, amp, rad, rmax, Q):
    n, d = P.shape
    m = Q.shape[0]
    out = np.zeros(m)
    x1 = P[:, 0].copy()
    for q in range(m):
        lo = np.searchsorted(x1, Q[q, 0] - rmax, side="left")
        hi = np.searchsorted(x1, Q[q, 0] + rmax, side="right")
        s = 0.0
        for p in range(lo, hi):
            r2 = 0.0
            for k in range(d):
                t = Q[q, k] - P[p, k]
                r2 += t * t
            if r2 <= rad[p] * rad[p]:
                s += amp[p]
        out[q] = s
    return out


@nb.njit(cache=True, nogil=True)
def token_grid(P, amp, rad, x0, y0, h, nx, ny, sub):
    """Token field averaged over ``sub x sub`` sample points per node cell.

    With ``sub == 1`` this is the plain point value at each node.
    """
    out = np.zeros((nx, ny))
    hs = h / sub
    wsub = 1.0 / (sub * sub)
    for p in range(P.shape[0]):
        px = P[p, 0]
        py = P[p, 1]
        r = rad[p]
        r2 = r * r
        w = amp[p] * wsub
        ilo, ihi = _row_range(px, r + h, x0, h, nx)
        jlo, jhi = _row_range(py, r + h, y0, h, ny)
        for i in range(ilo, ihi + 1):
            for j in range(jlo, jhi + 1):
                cnt = 0
                for si in range(sub):
                    dx = x0 + i * h + (si + 0.5) * hs - px
                    if sub == 1:
                        dx = x0 + (i + 0.5) * h - px
                    for sj in range(sub):
                        dy = y0 + j * h + (sj + 0.5) * hs - py
                        if sub == 1:
                            dy = y0 + (j + 0.5) * h - py
                        if dx * dx + dy * dy <= r2:
                            cnt += 1
                if cnt:
                    out[i, j] += w * cnt
    return out


@nb.njit(cache=True, nogil=True)
def token_points_excluding(P, amp, rad, rmax, Q, ex1, ex2):
    """Token field at ``Q[q]`` leaving out atoms ``ex1[q]`` and ``ex2[q]``."""
    n, d = P.shape
    m = Q.shape[0]
    out = np.zeros(m)
    x1 = P[:, 0].copy()
    for q in range(m):
        lo = np.searchsorted(x1, Q[q, 0] - rmax, side="left")
        hi = np.searchsorted(x1, Q[q, 0] + rmax, side="right")
        s = 0.0
        for p in range(lo, hi):
            if p == ex1[q] or p == ex2[q]:
                continue
            r2 = 0.0
            for k in range(d):
                t = Q[q, k] - P[p, k]
                r2 += t * t
            if r2 <= rad[p] * rad[p]:
                s += amp[p]
        out[q] = s
    return out
