"""Planar flows ``f(x) = x + u h(w^T x + b)``."""
from __future__ import annotations

from typing import Any

import numpy as np

from . import _kernels
from .activations import Activation, Verdict, planar_condition, planar_validity
from .flow_core import Flow
from .scalar_solve import OK


def _vector(v, name: str) -> np.ndarray:
    arr = np.array(v, dtype=float).ravel()
    if arr.size < 1:
        raise ValueError(f"{name} must be a non-empty vector")
    arr.setflags(write=False)
    return arr


class PlanarFlow(Flow):
    """Hyperplane-wise expansion/contraction along ``u``.

    Invalid parameters are accepted at construction so that failure modes can
    be studied; strict inversion and density evaluation reject them.
    """

    def __init__(self, u, w, b: float = 0.0, activation: Activation | str = "tanh"):
        self.u = _vector(u, "u")
        self.w = _vector(w, "w")
        if self.u.shape != self.w.shape:
            raise ValueError(f"u and w must have equal length, got {self.u.size} and {self.w.size}")
        self.b = float(b)
        self.activation = activation if isinstance(activation, Activation) else Activation(activation)
        self.dim = self.u.size
        self.wu = float(self.w @ self.u)
        self.w_norm = float(np.linalg.norm(self.w))
        self.verdict = planar_validity(self.activation, self.wu)
        self.exclusion_hint = (
            f"N_Z: hyperplanes w^T x + b in {list(self.activation.nondiff_points)}; "
            f"C: hyperplanes w^T x + b in {list(self.activation.critical_preactivations(self.wu))}; "
            "N_X: their images"
        )

    def __repr__(self):
        return f"PlanarFlow(dim={self.dim}, wu={self.wu:.6g}, b={self.b:.6g}, activation={self.activation.to_dict()})"

    def validity(self) -> Verdict:
        return self.verdict

    def describe_validity(self) -> str:
        return planar_condition(self.activation, self.wu)

    def preactivation(self, x: np.ndarray) -> np.ndarray:
        return x @ self.w + self.b

    def psi(self, lam):
        """``lam + w^T u * h(lam + b)``; its inverse at ``w^T y`` gives ``w^T x``."""
        lam = np.asarray(lam, dtype=float)
        return lam + self.wu * self.activation.eval(lam + self.b)

    def _forward(self, x):
        return x + np.outer(self.activation.eval(self.preactivation(x)), self.u)

    def _inverse(self, y, force):
        if self.w_norm == 0.0:
            return y - self.u * self.activation.eval(self.b), np.zeros(y.shape[0], dtype=np.int64)
        t = y @ self.w
        lam, status = _kernels.solve_planar(t, self.wu, self.b, self.activation, guesses=t, force=force)
        x = y - np.outer(self.activation.eval(lam + self.b), self.u)
        x[status != OK] = np.nan
        return x, status

    def _log_abs_det(self, x):
        det = 1.0 + self.wu * self.activation.deriv(self.preactivation(x))
        with np.errstate(divide="ignore"):
            return np.log(np.abs(det))

    def _on_kink(self, x):
        s = self.preactivation(x)
        return np.isin(s, np.asarray(self.activation.nondiff_points))

    def exclusion_distance(self, x):
        x = np.atleast_2d(x)
        pts = list(self.activation.nondiff_points) + list(self.activation.critical_preactivations(self.wu))
        if not pts or self.w_norm == 0.0:
            return np.full(x.shape[0], np.inf)
        s = self.preactivation(x)
        return np.min(np.abs(s[:, None] - np.asarray(pts)[None, :]), axis=1) / self.w_norm

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "planar",
            "u": self.u.tolist(),
            "w": self.w.tolist(),
            "b": self.b,
            "activation": self.activation.to_dict(),
        }

    @classmethod
    def random(cls, dim: int, rng, activation: Activation | str = "tanh", wu: float | None = None, scale: float = 1.0):
        """Random planar flow; ``wu`` pins ``w^T u`` exactly by rescaling ``u``."""
        rng = np.random.default_rng(rng)
        w = rng.normal(size=dim) * scale
        u = rng.normal(size=dim) * scale
        b = float(rng.normal())
        if wu is not None:
            u = u - (w @ u) / (w @ w) * w + wu / (w @ w) * w
        return cls(u, w, b, activation)


def psi_scan(activation: Activation | str, wu: float, b: float = 0.0, lo: float = -3.5, hi: float = 3.5, steps: int = 701) -> np.ndarray:
    """Sample ``psi(lam) = lam + wu * h(lam + b)`` on a uniform grid.

    Returns an array of shape ``(steps, 2)`` holding ``(lam, psi(lam))`` rows.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    act = activation if isinstance(activation, Activation) else Activation(activation)
    lam = np.linspace(lo, hi, int(steps))
    return np.column_stack([lam, lam + wu * act.eval(lam + b)])


__all__ = ["PlanarFlow", "psi_scan"]
