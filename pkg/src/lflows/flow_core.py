"""Flow contract, chains of flows, the Gaussian base and the pushforward density.

All evaluation methods accept a single point of shape ``(n,)`` or a batch of
shape ``(m, n)`` and return results of the matching shape.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from typing import Any, Sequence

import numpy as np

from .activations import Verdict
from .errors import DimMismatch, InvalidFlow, MaxIter, NoBracket, NonFiniteLogDet
from .scalar_solve import NO_BRACKET, OK

LOG_2PI = math.log(2.0 * math.pi)


def as_batch(x, dim: int) -> tuple[np.ndarray, bool]:
    """Return ``(x as (m, dim) float array, True if the input was a single point)``."""
    arr = np.asarray(x, dtype=float)
    single = arr.ndim == 1
    if single:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise DimMismatch(f"expected points of dimension {dim}, got shape {np.shape(x)}")
    return arr, single


def _unbatch(arr: np.ndarray, single: bool):
    return arr[0] if single else arr


def _raise_on_status(flow, status: np.ndarray) -> None:
    if not np.any(status):
        return
    name = type(flow).__name__
    n_nb = int(np.sum(status == NO_BRACKET))
    if n_nb:
        raise NoBracket(f"{name}: no bracket for {n_nb} point(s); psi is not surjective for these parameters")
    raise MaxIter(f"{name}: inversion did not converge for {int(np.sum(status != OK))} point(s)")


class Flow(ABC):
    """An L-diffeomorphism ``f: R^n -> R^n`` with its inverse and log-determinant.

    Subclasses implement the batched ``_forward``, ``_inverse``,
    ``_log_abs_det``, ``_on_kink`` and ``exclusion_distance``; the public
    wrappers handle shapes, validity checks and error reporting.
    """

    dim: int
    exclusion_hint: str = ""

    @abstractmethod
    def _forward(self, x: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def _inverse(self, y: np.ndarray, force: bool) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(x, status)`` with solver status codes; failed rows hold NaN."""

    @abstractmethod
    def _log_abs_det(self, x: np.ndarray) -> np.ndarray:
        """``log|det J_f(x)|`` per row; ``-inf`` at critical or removed points."""

    @abstractmethod
    def _on_kink(self, x: np.ndarray) -> np.ndarray:
        """True where evaluation hits a declared non-differentiability set."""

    @abstractmethod
    def exclusion_distance(self, x: np.ndarray) -> np.ndarray:
        """Distance of each row of ``x`` to the declared null/critical sets."""

    @abstractmethod
    def validity(self) -> Verdict: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    def describe_validity(self) -> str:
        return str(self.validity())

    def forward(self, x):
        xb, single = as_batch(x, self.dim)
        return _unbatch(self._forward(xb), single)

    def __call__(self, x):
        return self.forward(x)

    def inverse(self, y, *, strict: bool = True):
        """Invert the flow.

        ``strict=True`` rejects invalid parameters with :class:`InvalidFlow`
        and re-raises solver failures.  ``strict=False`` skips the validity
        check, searches for roots in both directions and leaves NaN rows
        where no preimage was found.
        """
        yb, single = as_batch(y, self.dim)
        if strict:
            self._require_valid()
        x, status = self._inverse(yb, force=not strict)
        if strict:
            _raise_on_status(self, status)
        return _unbatch(x, single)

    def _require_valid(self):
        if self.validity() is Verdict.INVALID:
            raise InvalidFlow(f"{type(self).__name__} parameters are invalid: {self.describe_validity()}")

    def log_det_forward(self, x, *, allow_singular: bool = False):
        """``log|det J_f(x)|``; raises :class:`NonFiniteLogDet` at critical points."""
        xb, single = as_batch(x, self.dim)
        ld = self._log_abs_det(xb)
        if not allow_singular and not np.all(np.isfinite(ld)):
            raise NonFiniteLogDet(f"{type(self).__name__}: Jacobian determinant vanishes at {int((~np.isfinite(ld)).sum())} point(s)")
        return _unbatch(ld, single)

    def on_kink(self, x):
        xb, single = as_batch(x, self.dim)
        return _unbatch(self._on_kink(xb), single)


class StandardNormal:
    """Standard normal base distribution on ``R^dim``."""

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)

    def log_prob(self, z):
        zb, single = as_batch(z, self.dim)
        lp = -0.5 * np.einsum("ij,ij->i", zb, zb) - 0.5 * self.dim * LOG_2PI
        return _unbatch(lp, single)

    def sample(self, n: int, rng: np.random.Generator | int) -> np.ndarray:
        rng = np.random.default_rng(rng)
        return rng.standard_normal((int(n), self.dim))

    def to_dict(self) -> dict[str, Any]:
        return {"type": "standard_normal"}


class FlowChain:
    """Composition ``f = f_K o ... o f_1``; ``layers[0]`` is applied first.

    An empty chain is the identity on ``R^dim``.
    """

    def __init__(self, layers: Sequence[Flow] = (), dim: int | None = None):
        layers = tuple(layers)
        if dim is None:
            if not layers:
                raise ValueError("an empty chain needs an explicit dim")
            dim = layers[0].dim
        for i, layer in enumerate(layers):
            if layer.dim != dim:
                raise DimMismatch(f"layer {i} has dim {layer.dim}, chain has dim {dim}")
        self.layers = layers
        self.dim = int(dim)

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def validity(self) -> list[Verdict]:
        return [layer.validity() for layer in self.layers]

    @property
    def is_valid(self) -> bool:
        return all(v.ok for v in self.validity())

    def forward(self, x):
        xb, single = as_batch(x, self.dim)
        for layer in self.layers:
            xb = layer._forward(xb)
        return _unbatch(xb, single)

    def inverse(self, y, *, strict: bool = True):
        yb, single = as_batch(y, self.dim)
        for layer in reversed(self.layers):
            yb = layer.inverse(yb, strict=strict)
        return _unbatch(yb, single)

    def forward_trace(self, x) -> tuple[list[np.ndarray], list[np.ndarray]]:
        """Forward pass recording layer inputs ``x_0..x_{K-1}`` and per-layer log-dets."""
        xb, _ = as_batch(x, self.dim)
        inputs, logdets = [], []
        for layer in self.layers:
            inputs.append(xb)
            logdets.append(layer._log_abs_det(xb))
            xb = layer._forward(xb)
        return inputs, logdets

    def log_det_forward(self, x, *, allow_singular: bool = False):
        """Sum of ``log|det J_{f_i}(x_{i-1})|`` along the forward pass."""
        xb, single = as_batch(x, self.dim)
        total = np.zeros(xb.shape[0])
        for layer in self.layers:
            total = total + layer._log_abs_det(xb)
            xb = layer._forward(xb)
        if not allow_singular and not np.all(np.isfinite(total)):
            raise NonFiniteLogDet(f"chain Jacobian determinant vanishes at {int((~np.isfinite(total)).sum())} point(s)")
        return _unbatch(total, single)

    def inverse_trace(self, y, *, strict: bool = True):
        """Inverse pass returning ``(z, layer_inputs, failed)``.

        ``layer_inputs[i]`` is the input of layer ``i`` on the way forward,
        i.e. the preimage produced after inverting layers ``K..i``.
        """
        yb, _ = as_batch(y, self.dim)
        failed = np.zeros(yb.shape[0], dtype=bool)
        inputs: list[np.ndarray] = [None] * len(self.layers)  # type: ignore[list-item]
        for i in range(len(self.layers) - 1, -1, -1):
            layer = self.layers[i]
            if strict:
                yb = layer.inverse(yb, strict=True)
            else:
                yb, status = layer._inverse(yb, force=True)
                failed |= status != OK
                # keep failed rows finite so later layers don't search on NaN
                yb = np.where(failed[:, None], 0.0, yb)
            inputs[i] = yb
        return yb, inputs, failed

    def log_det_inverse(self, y, *, strict: bool = True):
        """``log|det J_{f^-1}(y)| = -sum_i log|det J_{f_i}(x_{i-1})|`` via the inverse pass."""
        yb, single = as_batch(y, self.dim)
        _, inputs, _ = self.inverse_trace(yb, strict=strict)
        total = np.zeros(yb.shape[0])
        for layer, xi in zip(self.layers, inputs):
            total = total - layer._log_abs_det(xi)
        return _unbatch(total, single)

    def to_dict(self, base: StandardNormal | None = None) -> dict[str, Any]:
        return {
            "dim": self.dim,
            "base": (base or StandardNormal(self.dim)).to_dict(),
            "layers": [layer.to_dict() for layer in self.layers],
        }


def log_density(
    chain: FlowChain,
    base: StandardNormal,
    x,
    *,
    strict: bool = True,
    return_flags: bool = False,
):
    """Log-density of the pushforward of ``base`` through ``chain`` at ``x``.

    Computed through the inverse pass as ``log p_Z(z) - sum_i log|det J_{f_i}|``
    at the recovered intermediates.  Points whose preimage lands on a
    critical or removed point get ``-inf`` (density zero there).  With
    ``strict=False`` invalid layers are inverted anyway and points without a
    preimage also get ``-inf``.

    ``return_flags=True`` additionally returns a boolean array marking points
    whose evaluation touched an activation kink (the derivative convention
    was used).
    """
    if base.dim != chain.dim:
        raise DimMismatch(f"base dim {base.dim} != chain dim {chain.dim}")
    if strict:
        for i, layer in enumerate(chain.layers):
            if layer.validity() is Verdict.INVALID:
                raise InvalidFlow(f"layer {i} is invalid: {layer.describe_validity()}")
    xb, single = as_batch(x, chain.dim)
    z, inputs, failed = chain.inverse_trace(xb, strict=strict)
    flags = np.zeros(xb.shape[0], dtype=bool)
    ok = ~failed
    zz = np.where(ok[:, None], z, 0.0)
    logp = base.log_prob(zz)
    with np.errstate(invalid="ignore"):
        for layer, xi in zip(chain.layers, inputs):
            xi = np.where(ok[:, None], xi, 0.0)
            logp = logp - layer._log_abs_det(xi)
            flags |= layer._on_kink(xi)
    logp = np.where(ok & np.isfinite(logp), logp, -np.inf)
    flags &= ok
    logp = _unbatch(logp, single)
    if return_flags:
        return logp, _unbatch(flags, single)
    return logp


def exclusion_distance(chain: FlowChain, x) -> np.ndarray:
    """Distance (measured at each layer's input) to any declared exclusion set."""
    xb, single = as_batch(x, chain.dim)
    dist = np.full(xb.shape[0], np.inf)
    for layer in chain.layers:
        dist = np.minimum(dist, layer.exclusion_distance(xb))
        xb = layer._forward(xb)
    return _unbatch(dist, single)


__all__ = [
    "Flow",
    "FlowChain",
    "StandardNormal",
    "as_batch",
    "exclusion_distance",
    "log_density",
]
