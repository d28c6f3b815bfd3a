"""Executable certification of the change-of-variables formula.

Each ``check_*`` function returns a :class:`VerificationReport`.  Failures of
invalid flows are recorded in the report, never raised, so the harness can
show both sides of every validity boundary.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .activations import Activation
from .errors import FlowError
from .flow_core import FlowChain, StandardNormal, as_batch, exclusion_distance, log_density

FD_REL_STEP = 1e-6
SKIP_RADIUS = 1e-4
SUITES = ("roundtrip", "jacobian", "normalization", "montecarlo")

# sub-seeds so the suites draw independent streams from one user seed
_STREAM = {"roundtrip": 1, "jacobian": 2, "montecarlo": 3}


def _jsonable(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.bool_,)):
        return bool(v)
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    return v


@dataclass
class Case:
    description: str
    metric: float
    threshold: float
    passed: bool
    details: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return _jsonable(
            {
                "description": self.description,
                "metric": self.metric,
                "threshold": self.threshold,
                "passed": bool(self.passed),
                "details": self.details,
            }
        )


@dataclass
class VerificationReport:
    suite: str
    seed: int
    cases: list[Case] = field(default_factory=list)

    @property
    def overall(self) -> bool:
        return all(c.passed for c in self.cases)

    def add(self, *args, **kwargs) -> Case:
        case = Case(*args, **kwargs)
        self.cases.append(case)
        return case

    def to_dict(self) -> dict[str, Any]:
        return {
            "suite": self.suite,
            "seed": int(self.seed),
            "overall": "pass" if self.overall else "fail",
            "cases": [c.to_dict() for c in self.cases],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), indent=2, **kw)

    @classmethod
    def merge(cls, suite: str, seed: int, reports: list["VerificationReport"]) -> "VerificationReport":
        out = cls(suite, seed)
        for r in reports:
            for c in r.cases:
                out.cases.append(Case(f"[{r.suite}] {c.description}", c.metric, c.threshold, c.passed, c.details))
        return out


# --------------------------------------------------------------------------
# oracles


def fd_jacobian(func: Callable[[np.ndarray], np.ndarray], x, rel_step: float = FD_REL_STEP) -> np.ndarray:
    """Central-difference Jacobian of a batched map, shape ``(m, n, n)``.

    The step for coordinate ``j`` is ``rel_step * max(1, |x_j|)``.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    m, n = x.shape
    J = np.empty((m, n, n))
    for j in range(n):
        h = rel_step * np.maximum(1.0, np.abs(x[:, j]))
        xp, xm = x.copy(), x.copy()
        xp[:, j] += h
        xm[:, j] -= h
        h_eff = xp[:, j] - xm[:, j]
        J[:, :, j] = (func(xp) - func(xm)) / h_eff[:, None]
    return J


def fd_log_abs_det(func, x, rel_step: float = FD_REL_STEP) -> np.ndarray:
    return np.linalg.slogdet(fd_jacobian(func, x, rel_step))[1]


def log_det_error(analytic, reference):
    """``|a - r| / max(1, |r|)``: relative for large log-dets, relative-in-det near zero."""
    analytic, reference = np.asarray(analytic), np.asarray(reference)
    return np.abs(analytic - reference) / np.maximum(1.0, np.abs(reference))


@dataclass(frozen=True)
class PsiScan:
    """Brute-force shape summary of ``psi(lam) = lam + wu h(lam + b)`` on a grid."""

    increasing: bool
    unbounded: bool
    stationary: tuple[float, ...]
    min_slope: float

    @property
    def bijective(self) -> bool:
        return self.increasing and self.unbounded


def scan_planar_psi(
    activation: Activation,
    wu: float,
    b: float = 0.0,
    lo: float = -50.0,
    hi: float = 50.0,
    points: int = 100_000,
    tail_slope: float = 1e-6,
    flat_slope: float = 1e-6,
) -> PsiScan:
    """Dense monotonicity/surjectivity scan, independent of any closed-form condition.

    ``increasing`` requires every consecutive difference to be positive.
    ``unbounded`` requires the secant slope over the outer 1% on each side to
    exceed ``tail_slope`` (a bounded, saturating psi fails this).
    ``stationary`` lists grid midpoints where the secant slope drops below
    ``flat_slope``, merged into clusters.
    """
    lam = np.linspace(lo, hi, points)
    psi = lam + wu * activation.eval(lam + b)
    dpsi = np.diff(psi)
    slope = dpsi / np.diff(lam)
    k = max(2, points // 100)
    left = (psi[k] - psi[0]) / (lam[k] - lam[0])
    right = (psi[-1] - psi[-1 - k]) / (lam[-1] - lam[-1 - k])
    flat = np.flatnonzero(slope < flat_slope)
    mids = 0.5 * (lam[1:] + lam[:-1])
    clusters: list[float] = []
    if flat.size:
        groups = np.split(flat, np.flatnonzero(np.diff(flat) > 1) + 1)
        clusters = [float(np.mean(mids[g])) for g in groups]
    return PsiScan(
        increasing=bool(np.all(dpsi > 0)),
        unbounded=bool(left > tail_slope and right > tail_slope),
        stationary=tuple(clusters),
        min_slope=float(slope.min()),
    )


# --------------------------------------------------------------------------
# suites


def _rng(seed: int, stream: str) -> np.random.Generator:
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, _STREAM[stream]])


def check_roundtrip(chain: FlowChain, n_points: int = 1000, tol: float = 1e-8, seed: int = 0, *, strict: bool = True) -> VerificationReport:
    rep = VerificationReport("roundtrip", seed)
    x = StandardNormal(chain.dim).sample(n_points, _rng(seed, "roundtrip"))
    try:
        y = chain.forward(x)
        x_back = chain.inverse(y, strict=strict)
    except FlowError as exc:
        rep.add(
            f"inverse(forward(x)) on {n_points} base samples",
            math.inf,
            tol,
            False,
            {"error": type(exc).__name__, "message": str(exc)},
        )
        return rep
    err = np.linalg.norm(x_back - x, axis=1) / (1.0 + np.linalg.norm(x, axis=1))
    err = np.where(np.isnan(err), np.inf, err)
    n_fail = int(np.sum(~(err <= tol)))
    rep.add(
        f"max ||f^-1(f(x)) - x|| / (1 + ||x||) over {n_points} base samples",
        float(err.max()) if err.size else 0.0,
        tol,
        n_fail == 0,
        {"failures": n_fail, "no_preimage": int(np.sum(np.isnan(x_back).any(axis=1)))},
    )
    return rep


def check_jacobian(
    chain: FlowChain,
    n_points: int = 100,
    rel_tol: float = 1e-4,
    seed: int = 0,
    *,
    skip_radius: float = SKIP_RADIUS,
    points=None,
) -> VerificationReport:
    """Analytic chain log-det against the log|det| of a central-difference Jacobian."""
    rep = VerificationReport("jacobian", seed)
    if points is None:
        x = StandardNormal(chain.dim).sample(n_points, _rng(seed, "jacobian"))
    else:
        x, _ = as_batch(points, chain.dim)
    near = exclusion_distance(chain, x) < skip_radius
    analytic = chain.log_det_forward(x, allow_singular=True)
    singular = ~np.isfinite(analytic)
    use = ~near & ~singular
    ref = fd_log_abs_det(chain.forward, x[use]) if use.any() else np.zeros(0)
    err = log_det_error(analytic[use], ref)
    worst = float(err.max()) if err.size else 0.0
    rep.add(
        f"max |analytic - FD| / max(1, |FD|) of log|det J| over {int(use.sum())} points",
        worst,
        rel_tol,
        bool(worst <= rel_tol),
        {"checked": int(use.sum()), "skipped_near_exclusion": int(near.sum()), "skipped_singular": int((singular & ~near).sum())},
    )
    return rep


def _grid(half_width: float, points: int) -> np.ndarray:
    return np.linspace(-half_width, half_width, points)


def density_on_grid(chain: FlowChain, base: StandardNormal, axes: list[np.ndarray], *, strict: bool = True) -> np.ndarray:
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.column_stack([m.ravel() for m in mesh])
    p = np.exp(log_density(chain, base, pts, strict=strict))
    return p.reshape(mesh[0].shape)


def integrate_density(chain: FlowChain, base: StandardNormal, grid_half_width: float = 10.0, points_per_axis: int = 401, *, strict: bool = True) -> float:
    """Trapezoid integral of ``exp(log_density)`` over ``[-w, w]^dim``, dim in {1, 2}."""
    if chain.dim not in (1, 2):
        raise ValueError("quadrature is only supported for dim 1 and 2")
    g = _grid(grid_half_width, points_per_axis)
    P = density_on_grid(chain, base, [g] * chain.dim, strict=strict)
    for _ in range(chain.dim):
        P = np.trapezoid(P, g, axis=-1)
    return float(P)


def check_normalization(
    chain: FlowChain,
    base: StandardNormal | None = None,
    grid_half_width: float = 10.0,
    points_per_axis: int = 401,
    tol: float = 1e-2,
    seed: int = 0,
    *,
    strict: bool = True,
) -> VerificationReport:
    """Trapezoid normalization check.

    Layers with a kinked activation (relu, elu with alpha != 1) make the
    density jump across the kink hyperplane; there the trapezoid rule is only
    first order, with error about ``h * jump / 2`` for grid step ``h``.
    """
    rep = VerificationReport("normalization", seed)
    base = base or StandardNormal(chain.dim)
    desc = f"trapezoid integral of p_f over [-{grid_half_width:g}, {grid_half_width:g}]^{chain.dim}, {points_per_axis} points/axis"
    try:
        total = integrate_density(chain, base, grid_half_width, points_per_axis, strict=strict)
    except FlowError as exc:
        rep.add(desc, math.inf, tol, False, {"error": type(exc).__name__, "message": str(exc)})
        return rep
    dev = abs(total - 1.0)
    rep.add(desc, dev, tol, dev <= tol, {"integral": total})
    return rep


def marginal_bin_masses(
    chain: FlowChain,
    base: StandardNormal,
    axis: int,
    edges: np.ndarray,
    grid_half_width: float = 10.0,
    points_per_axis: int = 401,
    sub: int = 8,
    *,
    strict: bool = True,
) -> np.ndarray:
    """Probability of each bin of the ``axis`` marginal, from quadrature of the density."""
    nb = edges.size - 1
    fine = np.concatenate([np.linspace(edges[i], edges[i + 1], sub + 1)[:-1] for i in range(nb)] + [edges[-1:]])
    if chain.dim == 1:
        marg = density_on_grid(chain, base, [fine], strict=strict)
    else:
        other = _grid(grid_half_width, points_per_axis)
        axes = [fine, other] if axis == 0 else [other, fine]
        P = density_on_grid(chain, base, axes, strict=strict)
        marg = np.trapezoid(P, other, axis=1 - axis)
    seg = 0.5 * (marg[1:] + marg[:-1]) * np.diff(fine)
    return seg.reshape(nb, sub).sum(axis=1)


def check_montecarlo(
    chain: FlowChain,
    base: StandardNormal | None = None,
    n_samples: int = 100_000,
    bins: int = 50,
    l1_tol: float = 0.05,
    seed: int = 0,
    *,
    grid_half_width: float = 10.0,
    points_per_axis: int = 401,
    strict: bool = True,
) -> VerificationReport:
    """Histogram of pushed-forward samples against the density's marginals, per axis.

    Bins span ``mean +- 6 std`` of the samples on each axis; the L1 distance
    is taken between bin probabilities.
    """
    rep = VerificationReport("montecarlo", seed)
    base = base or StandardNormal(chain.dim)
    if chain.dim not in (1, 2):
        raise ValueError("Monte-Carlo marginal check is only supported for dim 1 and 2")
    z = base.sample(n_samples, _rng(seed, "montecarlo"))
    x = chain.forward(z)
    for k in range(chain.dim):
        col = x[:, k]
        m, s = float(col.mean()), float(col.std())
        edges = np.linspace(m - 6 * s, m + 6 * s, bins + 1)
        emp = np.histogram(col, edges)[0] / n_samples
        try:
            ana = marginal_bin_masses(chain, base, k, edges, grid_half_width, points_per_axis, strict=strict)
        except FlowError as exc:
            rep.add(f"axis {k}: L1 histogram distance", math.inf, l1_tol, False, {"error": type(exc).__name__, "message": str(exc)})
            continue
        l1 = float(np.abs(emp - ana).sum())
        rep.add(
            f"axis {k}: L1 distance of {bins}-bin histogram ({n_samples} samples) vs analytic marginal",
            l1,
            l1_tol,
            l1 <= l1_tol,
            {"range": [edges[0], edges[-1]], "analytic_mass_in_range": float(ana.sum())},
        )
    return rep


def run_suite(chain: FlowChain, base: StandardNormal | None = None, suite: str = "all", seed: int = 0, **kw) -> VerificationReport:
    """Run one named suite, or all of them (quadrature suites only for dim <= 2)."""
    base = base or StandardNormal(chain.dim)
    names = SUITES if suite == "all" else (suite,)
    reports = []
    for name in names:
        if name == "roundtrip":
            reports.append(check_roundtrip(chain, kw.get("n_points", 1000), kw.get("tol", 1e-8), seed))
        elif name == "jacobian":
            reports.append(check_jacobian(chain, kw.get("n_jacobian", 100), kw.get("rel_tol", 1e-4), seed))
        elif name in ("normalization", "montecarlo"):
            if chain.dim > 2:
                rep = VerificationReport(name, seed)
                rep.add(f"skipped: quadrature needs dim <= 2 (dim = {chain.dim})", 0.0, 0.0, True, {"skipped": True})
                reports.append(rep)
            elif name == "normalization":
                reports.append(check_normalization(chain, base, seed=seed))
            else:
                reports.append(_safe_montecarlo(chain, base, seed))
        else:
            raise ValueError(f"unknown suite {name!r}; choose from {SUITES + ('all',)}")
    if len(reports) == 1:
        return reports[0]
    return VerificationReport.merge(suite, seed, reports)


def _safe_montecarlo(chain, base, seed):
    try:
        return check_montecarlo(chain, base, seed=seed)
    except FlowError as exc:
        rep = VerificationReport("montecarlo", seed)
        rep.add("pushforward sampling", math.inf, 0.05, False, {"error": type(exc).__name__, "message": str(exc)})
        return rep
