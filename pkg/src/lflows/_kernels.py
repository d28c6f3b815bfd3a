"""Batched psi-inversion kernels for planar and radial flows.

Two interchangeable implementations of the algorithm in
:mod:`lflows.scalar_solve`:

* ``*_loop``: per-point scalar loop, compiled with numba when available;
* ``*_vec``: masked, vectorized numpy iteration over all points at once.

``solve_planar`` / ``solve_radial`` dispatch to the loop kernels when numba
is active (see :mod:`lflows._accel`) and to the numpy kernels otherwise.
Both return ``(roots, status)`` with status codes from ``scalar_solve``.
"""
from __future__ import annotations

import math

import numpy as np

from . import _accel
from .activations import Activation, Localization
from .scalar_solve import (
    ABS_TOL,
    EPS,
    FD_REL_STEP,
    MAX_EXPANSIONS,
    MAX_ITER,
    MAX_ITER_HIT,
    MIN_SLOPE,
    NO_BRACKET,
    OK,
)

PLANAR, RADIAL = 0, 1
_EMPTY = np.zeros(0)


# --------------------------------------------------------------------------
# scalar kernels (numba-compiled when available)


@_accel.njit(inline="always")
def _act_scalar(code, alpha, x):
    if code == 0:
        return x if x > 0.0 else 0.0
    if code == 1:
        return x if x > 0.0 else alpha * math.expm1(x)
    if code == 2:
        return math.tanh(x)
    if x > 30.0:
        return x
    if x < -30.0:
        return math.exp(x)
    return math.log1p(math.exp(x))


@_accel.njit(inline="always")
def _loc_scalar(code, alpha, kr, kh, r):
    if code == 0:
        return 1.0 / (alpha + r)
    n = kr.shape[0]
    if r <= kr[0]:
        return kh[0]
    if r >= kr[n - 1]:
        return kh[n - 1]
    lo, hi = 0, n - 1
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if kr[mid] <= r:
            lo = mid
        else:
            hi = mid
    t = (r - kr[lo]) / (kr[hi] - kr[lo])
    return kh[lo] + t * (kh[hi] - kh[lo])


@_accel.njit(inline="always")
def _psi_scalar(family, p0, p1, code, alpha, kr, kh, x):
    if family == 0:
        return x + p0 * _act_scalar(code, alpha, x + p1)
    return x + p0 * _loc_scalar(code, alpha, kr, kh, x) * x


@_accel.njit(inline="always")
def _sgn(v):
    if v > 0.0:
        return 1
    if v < 0.0:
        return -1
    return 0


@_accel.njit(inline="always")
def _solve_scalar(family, p0, p1, code, alpha, kr, kh, target, guess, lower, upper, abs_tol, max_iter, force):
    x0 = min(max(guess, lower), upper)
    f0 = _psi_scalar(family, p0, p1, code, alpha, kr, kh, x0) - target
    if f0 == 0.0:
        return x0, 0
    a = x0
    fa = f0
    b = x0
    fb = f0
    found = False
    n_dir = 2 if force else 1
    for k in range(n_dir):
        flip = 1.0 if k == 0 else -1.0
        d = flip * (1.0 if f0 < 0.0 else -1.0)
        a = x0
        fa = f0
        step = max(1.0, abs(x0))
        for _ in range(MAX_EXPANSIONS):
            xb = min(max(x0 + d * step, lower), upper)
            fxb = _psi_scalar(family, p0, p1, code, alpha, kr, kh, xb) - target
            if fxb == 0.0:
                return xb, 0
            if _sgn(fxb) != _sgn(f0):
                b = xb
                fb = fxb
                found = True
                break
            a = xb
            fa = fxb
            if xb == lower or xb == upper:
                break
            step *= 2.0
        if found:
            break
    if not found:
        return x0, 1

    orient = 1.0 if (b - a) * (fb - fa) > 0.0 else -1.0
    x = a
    fx = fa
    dx = abs(b - a)
    dx_old = dx
    for _ in range(max_iter):
        tol = max(abs_tol, 8.0 * EPS * max(abs(target), abs(x)))
        xt = 4.0 * EPS * max(1.0, abs(x))
        if abs(fx) <= tol and (abs(dx) <= xt or abs(b - a) <= xt):
            return x, 0
        lo = min(a, b)
        hi = max(a, b)
        e = FD_REL_STEP * max(1.0, abs(x))
        xp = min(x + e, upper)
        xm = max(x - e, lower)
        fp = _psi_scalar(family, p0, p1, code, alpha, kr, kh, xp) - target
        fm = _psi_scalar(family, p0, p1, code, alpha, kr, kh, xm) - target
        slope = (fp - fm) / (xp - xm)
        newton = False
        xn = x
        if orient * slope > MIN_SLOPE:
            xn = x - fx / slope
            if abs(fx) <= tol and abs(xn - x) <= xt:
                return x, 0
            newton = lo < xn and xn < hi and abs(xn - x) <= 0.5 * abs(dx_old)
        xnew = xn if newton else lo + 0.5 * (hi - lo)
        dx_old = dx
        dx = xnew - x
        x = xnew
        fx = _psi_scalar(family, p0, p1, code, alpha, kr, kh, x) - target
        if fx == 0.0:
            return x, 0
        if _sgn(fx) == _sgn(fa):
            a = x
            fa = fx
        else:
            b = x
            fb = fx
        if abs(b - a) <= 2.0 * EPS * max(abs(a), abs(b)):
            if abs(fa) <= abs(fb):
                return a, 0
            return b, 0
    return x, 2


@_accel.njit
def _solve_batch_loop(family, p0, p1, code, alpha, kr, kh, targets, guesses, lower, upper, abs_tol, max_iter, force):
    n = targets.shape[0]
    roots = np.empty(n)
    status = np.empty(n, dtype=np.int64)
    for i in range(n):
        r, s = _solve_scalar(
            family, p0, p1, code, alpha, kr, kh, targets[i], guesses[i], lower, upper, abs_tol, max_iter, force
        )
        roots[i] = r
        status[i] = s
    return roots, status


# --------------------------------------------------------------------------
# vectorized numpy kernel


def _solve_vec(F, targets, guesses, lower, upper, abs_tol, max_iter, force):
    """Masked vectorized version of the scalar algorithm.

    ``F(x, idx)`` evaluates psi at ``x`` for the points ``idx``.
    """
    t = np.asarray(targets, dtype=float)
    n = t.size
    idx_all = np.arange(n)
    x0 = np.clip(np.asarray(guesses, dtype=float), lower, upper)
    f0 = F(x0, idx_all) - t
    roots = x0.copy()
    status = np.zeros(n, dtype=np.int64)
    a, fa = x0.copy(), f0.copy()
    b, fb = x0.copy(), f0.copy()
    todo = f0 != 0.0
    exact = np.zeros(n, dtype=bool)

    unbracketed = todo.copy()
    for k in range(2 if force else 1):
        d = (1.0 if k == 0 else -1.0) * np.where(f0 < 0, 1.0, -1.0)
        searching = unbracketed.copy()
        a[searching], fa[searching] = x0[searching], f0[searching]
        step = np.maximum(1.0, np.abs(x0))
        for _ in range(MAX_EXPANSIONS):
            idx = np.flatnonzero(searching)
            if idx.size == 0:
                break
            xb = np.clip(x0[idx] + d[idx] * step[idx], lower, upper)
            fxb = F(xb, idx) - t[idx]
            hit = np.sign(fxb) != np.sign(f0[idx])
            hi_idx, miss_idx = idx[hit], idx[~hit]
            b[hi_idx], fb[hi_idx] = xb[hit], fxb[hit]
            exact[hi_idx[fxb[hit] == 0.0]] = True
            a[miss_idx], fa[miss_idx] = xb[~hit], fxb[~hit]
            at_bound = (xb[~hit] == lower) | (xb[~hit] == upper)
            searching[hi_idx] = False
            unbracketed[hi_idx] = False
            searching[miss_idx[at_bound]] = False
            step[idx] *= 2.0
    status[unbracketed] = NO_BRACKET
    roots[exact] = b[exact]
    active = todo & ~unbracketed & ~exact

    orient = np.where((b - a) * (fb - fa) > 0, 1.0, -1.0)
    x, fx = a.copy(), fa.copy()
    dx = np.abs(b - a)
    dx_old = dx.copy()
    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xi, fi = x[idx], fx[idx]
        tol = np.maximum(abs_tol, 8.0 * EPS * np.maximum(np.abs(t[idx]), np.abs(xi)))
        xt = 4.0 * EPS * np.maximum(1.0, np.abs(xi))
        conv = (np.abs(fi) <= tol) & ((np.abs(dx[idx]) <= xt) | (np.abs(b[idx] - a[idx]) <= xt))
        roots[idx[conv]] = xi[conv]
        active[idx[conv]] = False
        idx, xi, fi = idx[~conv], xi[~conv], fi[~conv]
        if idx.size == 0:
            break
        ai, bi = a[idx], b[idx]
        lo, hi = np.minimum(ai, bi), np.maximum(ai, bi)
        e = FD_REL_STEP * np.maximum(1.0, np.abs(xi))
        xp, xm = np.minimum(xi + e, upper), np.maximum(xi - e, lower)
        slope = (F(xp, idx) - F(xm, idx)) / (xp - xm)
        ok_slope = orient[idx] * slope > MIN_SLOPE
        with np.errstate(divide="ignore", invalid="ignore"):
            xn = np.where(ok_slope, xi - fi / np.where(ok_slope, slope, 1.0), xi)
        settled = ok_slope & (np.abs(fi) <= tol[~conv]) & (np.abs(xn - xi) <= xt[~conv])
        roots[idx[settled]] = xi[settled]
        active[idx[settled]] = False
        keep = ~settled
        idx, xi, fi, xn, ok_slope, lo, hi = idx[keep], xi[keep], fi[keep], xn[keep], ok_slope[keep], lo[keep], hi[keep]
        newton = ok_slope & (lo < xn) & (xn < hi) & (np.abs(xn - xi) <= 0.5 * np.abs(dx_old[idx]))
        xnew = np.where(newton, xn, lo + 0.5 * (hi - lo))
        dx_old[idx] = dx[idx]
        dx[idx] = xnew - xi
        fnew = F(xnew, idx) - t[idx]
        x[idx], fx[idx] = xnew, fnew
        zero = fnew == 0.0
        roots[idx[zero]] = xnew[zero]
        active[idx[zero]] = False
        same = np.sign(fnew) == np.sign(fa[idx])
        sa, sb = idx[same], idx[~same]
        a[sa], fa[sa] = xnew[same], fnew[same]
        b[sb], fb[sb] = xnew[~same], fnew[~same]
        ai, bi = a[idx], b[idx]
        collapsed = (np.abs(bi - ai) <= 2.0 * EPS * np.maximum(np.abs(ai), np.abs(bi))) & ~zero
        cidx = idx[collapsed]
        roots[cidx] = np.where(np.abs(fa[cidx]) <= np.abs(fb[cidx]), a[cidx], b[cidx])
        active[cidx] = False
    status[active] = MAX_ITER_HIT
    roots[active] = x[active]
    return roots, status


# --------------------------------------------------------------------------
# public dispatch


def solve_planar(
    targets,
    wu: float,
    b: float,
    activation: Activation,
    guesses=None,
    *,
    abs_tol: float = ABS_TOL,
    max_iter: int = MAX_ITER,
    force: bool = False,
    use_numba: bool | None = None,
):
    """Solve ``lam + wu * h(lam + b) = target`` for every target."""
    t = np.ascontiguousarray(targets, dtype=float).ravel()
    g = t.copy() if guesses is None else np.ascontiguousarray(guesses, dtype=float).ravel()
    if use_numba is None:
        use_numba = _accel.HAS_NUMBA
    if use_numba:
        return _solve_batch_loop(
            PLANAR, float(wu), float(b), activation.code, activation.alpha, _EMPTY, _EMPTY,
            t, g, -np.inf, np.inf, abs_tol, max_iter, force,
        )

    def F(x, idx):
        return x + wu * activation.eval(x + b)

    return _solve_vec(F, t, g, -np.inf, np.inf, abs_tol, max_iter, force)


def solve_radial(
    targets,
    beta: float,
    localization: Localization,
    guesses=None,
    *,
    abs_tol: float = ABS_TOL,
    max_iter: int = MAX_ITER,
    force: bool = False,
    use_numba: bool | None = None,
):
    """Solve ``rho + beta * h(rho) * rho = target`` on ``rho >= 0``."""
    t = np.ascontiguousarray(targets, dtype=float).ravel()
    if guesses is None:
        with np.errstate(divide="ignore", invalid="ignore"):
            denom = 1.0 + beta * localization.eval(t)
            g = np.where(denom > 0, t / denom, t)
    else:
        g = np.ascontiguousarray(guesses, dtype=float).ravel()
    if use_numba is None:
        use_numba = _accel.HAS_NUMBA
    if use_numba:
        kr, kh = localization.knots if localization.kind == "tabulated" else (_EMPTY, _EMPTY)
        return _solve_batch_loop(
            RADIAL, float(beta), 0.0, localization.code, localization.alpha,
            np.ascontiguousarray(kr), np.ascontiguousarray(kh),
            t, g, 0.0, np.inf, abs_tol, max_iter, force,
        )

    def F(x, idx):
        return x + beta * localization.eval(x) * x

    return _solve_vec(F, t, g, 0.0, np.inf, abs_tol, max_iter, force)
