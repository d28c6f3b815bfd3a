"""Root finding for strictly increasing, possibly non-smooth scalar functions.

The algorithm is shared by the generic :func:`solve_monotone` below and the
batched kernels in :mod:`lflows._kernels`:

1. exponential bracket expansion from the initial guess (step doubling,
   base step ``max(1, |guess|)``) until the residual changes sign;
2. safeguarded Newton/bisection inside the bracket.  A Newton step uses a
   symmetric finite-difference slope and is accepted only when it lands
   strictly inside the bracket, the slope exceeds ``MIN_SLOPE`` and the step
   is at most half the previous one; otherwise the bracket is bisected.

Iteration stops once ``|func(x) - target|`` is within tolerance *and* the
last step (or the bracket) is at the ``x_tol`` scale, so flat spots such as
``lambda - tanh(lambda)`` at the origin still resolve ``x`` and not just the
residual.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

from .errors import MaxIter, NoBracket

ABS_TOL = 1e-12
MAX_ITER = 200
MAX_EXPANSIONS = 200
MIN_SLOPE = 1e-12
FD_REL_STEP = 1e-7
EPS = 2.220446049250313e-16

OK, NO_BRACKET, MAX_ITER_HIT = 0, 1, 2


def default_x_tol(x: float) -> float:
    return 4.0 * EPS * max(1.0, abs(x))


def residual_floor(target: float, x: float) -> float:
    """Smallest residual double precision can resolve near ``(x, target)``."""
    return 8.0 * EPS * max(abs(target), abs(x))


@dataclass(frozen=True)
class MonotoneProblem:
    func: Callable[[float], float]
    target: float
    initial_guess: float = 0.0
    abs_tol: float = ABS_TOL
    max_iter: int = MAX_ITER
    lower: float = -math.inf
    upper: float = math.inf

    def solve(self) -> float:
        return solve_monotone(
            self.func,
            self.target,
            self.initial_guess,
            abs_tol=self.abs_tol,
            max_iter=self.max_iter,
            lower=self.lower,
            upper=self.upper,
        )


def _sgn(v: float) -> int:
    return (v > 0) - (v < 0)


def solve_monotone(
    func: Callable[[float], float] | MonotoneProblem,
    target: float = 0.0,
    initial_guess: float = 0.0,
    *,
    abs_tol: float = ABS_TOL,
    max_iter: int = MAX_ITER,
    lower: float = -math.inf,
    upper: float = math.inf,
    force: bool = False,
) -> float:
    """Solve ``func(x) = target`` for a strictly increasing ``func``.

    ``lower``/``upper`` restrict the search domain (e.g. ``lower=0`` for
    radial profiles).  With ``force=True`` the bracket search also runs in
    the "wrong" direction, so a root of a non-monotone function may still be
    located; which root is found is then unspecified.

    Raises :class:`NoBracket` when no sign change is found within
    ``MAX_EXPANSIONS`` doublings and :class:`MaxIter` when the refinement
    budget runs out.
    """
    if isinstance(func, MonotoneProblem):
        return func.solve()
    target = float(target)

    def F(x):
        return float(func(x)) - target

    x0 = min(max(float(initial_guess), lower), upper)
    f0 = F(x0)
    if f0 == 0.0:
        return x0

    # bracket: a keeps the sign of f0, b has the opposite sign
    a = fa = b = fb = None
    directions = (1.0, -1.0) if force else (1.0,)
    for flip in directions:
        d = flip * (1.0 if f0 < 0 else -1.0)
        a, fa = x0, f0
        step = max(1.0, abs(x0))
        for _ in range(MAX_EXPANSIONS):
            xb = min(max(x0 + d * step, lower), upper)
            fxb = F(xb)
            if fxb == 0.0:
                return xb
            if _sgn(fxb) != _sgn(f0):
                b, fb = xb, fxb
                break
            a, fa = xb, fxb
            if xb == lower or xb == upper:
                break
            step *= 2.0
        if b is not None:
            break
    if b is None:
        raise NoBracket(f"no sign change for target {target!r} from guess {initial_guess!r}")

    orient = 1.0 if (b - a) * (fb - fa) > 0 else -1.0
    x, fx = a, fa
    dx = dx_old = abs(b - a)
    for _ in range(max_iter):
        tol = max(abs_tol, residual_floor(target, x))
        xt = default_x_tol(x)
        if abs(fx) <= tol and (abs(dx) <= xt or abs(b - a) <= xt):
            return x
        lo, hi = min(a, b), max(a, b)
        e = FD_REL_STEP * max(1.0, abs(x))
        xp, xm = min(x + e, upper), max(x - e, lower)
        slope = (F(xp) - F(xm)) / (xp - xm)
        newton = False
        if orient * slope > MIN_SLOPE:
            xn = x - fx / slope
            if abs(fx) <= tol and abs(xn - x) <= xt:
                # landed on the root; the Newton correction is below resolution
                return x
            newton = lo < xn < hi and abs(xn - x) <= 0.5 * abs(dx_old)
        xnew = xn if newton else lo + 0.5 * (hi - lo)
        dx_old = dx
        dx = xnew - x
        x = xnew
        fx = F(x)
        if fx == 0.0:
            return x
        if _sgn(fx) == _sgn(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        if abs(b - a) <= 2.0 * EPS * max(abs(a), abs(b)):
            # bracket collapsed to adjacent doubles
            return a if abs(fa) <= abs(fb) else b
    raise MaxIter(f"solve_monotone: no convergence in {max_iter} iterations (residual {fx:.3e})")
