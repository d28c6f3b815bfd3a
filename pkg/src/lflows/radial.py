"""Radial flows ``f(x) = x + beta h(||x - x0||) (x - x0)``."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Any

import numpy as np

from . import _kernels
from .activations import Localization, Verdict
from .errors import CenterPoint
from .flow_core import Flow, as_batch
from .scalar_solve import OK

SCAN_R_MIN = 1e-8
SCAN_R_MAX = 1e4
SCAN_POINTS = 100_000
# psi must still grow at least this fast over the last decade of the scan
TAIL_SLOPE_MIN = 1e-3
STATIONARY_TOL = 1e-9


@dataclass(frozen=True)
class RadialScan:
    """Outcome of the log-grid scan of the radial profile ``psi(r) = r (1 + beta h(r))``."""

    verdict: Verdict
    increasing: bool
    unbounded: bool
    min_slope_factor: float
    critical_radii: tuple[float, ...]
    reason: str


def radial_psi(beta: float, loc: Localization, r):
    r = np.asarray(r, dtype=float)
    return r + beta * loc.eval(r) * r


def slope_factor(beta: float, loc: Localization, r):
    """``1 + beta (h(r) + r h'(r))``, i.e. ``psi'(r)`` and the last Jacobian factor."""
    r = np.asarray(r, dtype=float)
    return 1.0 + beta * (loc.eval(r) + r * loc.deriv(r))


def scan_radial(beta: float, loc: Localization, *, r_min: float = SCAN_R_MIN, r_max: float = SCAN_R_MAX, points: int = SCAN_POINTS) -> RadialScan:
    """Certify bijectivity of ``psi`` on ``[0, inf)`` numerically.

    ``psi`` must be strictly increasing from ``psi(0) = 0`` on a log-spaced
    grid and still growing linearly at the far end of the grid.  Sign
    changes of ``psi'`` are located and reported as critical radii; a
    derivative touching zero (at the grid or at ``r -> 0``) without changing
    sign gives a ``BOUNDARY`` verdict.
    """
    r = np.concatenate([[0.0], np.geomspace(r_min, r_max, points)])
    p = radial_psi(beta, loc, r)
    increasing = bool(np.all(np.diff(p) > 0))
    tail = (p[-1] - radial_psi(beta, loc, r_max / 10.0)) / (0.9 * r_max)
    unbounded = bool(tail > TAIL_SLOPE_MIN)
    # psi'(0+) = 1 + beta h(0); include it next to the grid values
    d = np.concatenate([[1.0 + beta * float(loc.eval(0.0))], slope_factor(beta, loc, r[1:])])
    min_d = float(np.min(d))
    crit = []
    sign_change = np.flatnonzero(np.sign(d[1:-1]) * np.sign(d[2:]) < 0)
    for i in sign_change:
        lo, hi = r[i + 1], r[i + 2]
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if np.sign(slope_factor(beta, loc, mid)) == np.sign(d[i + 1]):
                lo = mid
            else:
                hi = mid
        crit.append(float(0.5 * (lo + hi)))
    crit.extend(float(v) for v in r[1:][d[1:] == 0.0])
    if not increasing:
        verdict, reason = Verdict.INVALID, "psi(r) = r + beta h(r) r is not strictly increasing on the scan"
    elif not unbounded:
        verdict, reason = Verdict.INVALID, "psi(r) stops growing: not surjective onto [0, inf)"
    elif min_d <= STATIONARY_TOL:
        verdict, reason = Verdict.BOUNDARY, f"psi is increasing but psi' touches zero (min {min_d:.3g})"
    else:
        verdict, reason = Verdict.VALID, f"psi strictly increasing and unbounded, min psi' = {min_d:.6g}"
    return RadialScan(verdict, increasing, unbounded, min_d, tuple(sorted(set(crit))), reason)


def inverse_localization_verdict(alpha: float, beta: float) -> Verdict:
    """Closed-form condition for ``h(r) = 1/(alpha + r)``: valid iff ``beta > -alpha``.

    ``psi'(r) = 1 + beta alpha / (alpha + r)^2`` is smallest at ``r = 0``, where it
    equals ``1 + beta/alpha``.  At ``beta = -alpha``, ``psi(r) = r^2 / (alpha + r)``
    is still a bijection with a single stationary point at the (removed) center.
    """
    if beta > -alpha:
        return Verdict.VALID
    if beta == -alpha:
        return Verdict.BOUNDARY
    return Verdict.INVALID


class RadialFlow(Flow):
    def __init__(self, beta: float, x0, localization: Localization | None = None):
        self.beta = float(beta)
        x0 = np.array(x0, dtype=float).ravel()
        if x0.size < 1:
            raise ValueError("x0 must be a non-empty vector")
        x0.setflags(write=False)
        self.x0 = x0
        self.localization = localization or Localization("inverse", alpha=1.0)
        self.dim = x0.size
        self.exclusion_hint = (
            f"N_Z: center x0 and spheres |x - x0| in {list(self.localization.nondiff_points)}; "
            "C: spheres at the critical radii of psi; N_X: their images"
        )

    def __repr__(self):
        return f"RadialFlow(dim={self.dim}, beta={self.beta:.6g}, localization={self.localization.to_dict()})"

    @cached_property
    def scan(self) -> RadialScan:
        return scan_radial(self.beta, self.localization)

    def validity(self) -> Verdict:
        return self.scan.verdict

    def describe_validity(self) -> str:
        msg = f"radial beta = {self.beta:g}: {self.scan.reason}"
        if self.localization.kind == "inverse":
            a = self.localization.alpha
            msg += f"; closed form beta > -alpha = {-a:g} gives {inverse_localization_verdict(a, self.beta)}"
        return msg

    def psi(self, r):
        return radial_psi(self.beta, self.localization, r)

    def radius(self, x: np.ndarray) -> np.ndarray:
        return np.linalg.norm(x - self.x0, axis=-1)

    def _forward(self, x):
        d = x - self.x0
        r = np.linalg.norm(d, axis=1)
        return x + (self.beta * self.localization.eval(r))[:, None] * d

    def _inverse(self, y, force):
        d = y - self.x0
        ry = np.linalg.norm(d, axis=1)
        status = np.zeros(y.shape[0], dtype=np.int64)
        if self.beta == 0.0:
            return y.copy(), status
        x = np.tile(self.x0, (y.shape[0], 1))
        nz = ry > 0
        if np.any(nz):
            rho, st = _kernels.solve_radial(ry[nz], self.beta, self.localization, force=force)
            x[nz] = self.x0 + (rho / ry[nz])[:, None] * d[nz]
            status[nz] = st
        x[status != OK] = np.nan
        return x, status

    def _log_abs_det(self, x):
        r = np.linalg.norm(x - self.x0, axis=1)
        n = self.dim
        h = self.localization.eval(r)
        first = 1.0 + self.beta * h
        last = first + self.beta * self.localization.deriv(r) * r
        with np.errstate(divide="ignore", invalid="ignore"):
            ld = (n - 1) * np.log(np.abs(first)) + np.log(np.abs(last))
        if n == 1:
            with np.errstate(divide="ignore"):
                ld = np.log(np.abs(last))
        return np.where(r > 0, ld, -np.inf)

    def log_det_forward(self, x, *, allow_singular: bool = False):
        xb, single = as_batch(x, self.dim)
        if not allow_singular and np.any(self.radius(xb) == 0):
            raise CenterPoint("log-determinant is undefined at the removed center x0")
        return super().log_det_forward(x, allow_singular=allow_singular)

    def _on_kink(self, x):
        r = self.radius(x)
        return (r == 0) | np.isin(r, np.asarray(self.localization.nondiff_points))

    def exclusion_distance(self, x):
        r = self.radius(np.atleast_2d(x))
        pts = np.asarray([0.0, *self.localization.nondiff_points, *self.scan.critical_radii])
        return np.min(np.abs(r[:, None] - pts[None, :]), axis=1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "radial",
            "beta": self.beta,
            "x0": self.x0.tolist(),
            "localization": self.localization.to_dict(),
        }

    @classmethod
    def random(cls, dim: int, rng, beta: float | None = None, alpha: float = 1.0):
        rng = np.random.default_rng(rng)
        x0 = rng.normal(size=dim)
        if beta is None:
            beta = float(rng.uniform(-0.9 * alpha, 2.0))
        return cls(beta, x0, Localization("inverse", alpha=alpha))


def radial_validity(flow: RadialFlow) -> Verdict:
    return flow.validity()
