"""Contractive residual flows ``f(x) = x + g(x)`` with ``Lip(g) < 1``.

``g`` is a small MLP ``W_D a(... a(W_1 x + b_1) ...) + b_D`` whose weight
matrices are spectrally normalized so that the product of their norms (times
the activation's Lipschitz constant per hidden layer) stays below the target.
"""
from __future__ import annotations

from typing import Any, Sequence

import numpy as np

from .activations import Activation, Verdict
from .errors import MaxIter
from .flow_core import Flow, as_batch
from .scalar_solve import MAX_ITER_HIT, OK

POWER_ITERS = 100
# power iteration keeps going past the requested count until the estimate settles
POWER_REL_TOL = 1e-13
POWER_MAX_FACTOR = 100
FIXED_POINT_TOL = 1e-12
FIXED_POINT_MAX_ITER = 5000


def spectral_norm_estimate(W, iters: int = POWER_ITERS, seed: int = 0) -> float:
    """Largest singular value of ``W`` by power iteration on ``W^T W``."""
    W = np.asarray(W, dtype=float)
    if iters < 1:
        raise ValueError("iters must be >= 1")
    if not np.any(W):
        return 0.0
    v = np.random.default_rng(seed).standard_normal(W.shape[1])
    v /= np.linalg.norm(v)
    sigma = 0.0
    for k in range(iters * POWER_MAX_FACTOR):
        wv = W @ v
        v_new = W.T @ wv
        nv = np.linalg.norm(v_new)
        if nv == 0.0:
            break
        v = v_new / nv
        prev, sigma = sigma, float(np.linalg.norm(W @ v))
        if k + 1 >= iters and abs(sigma - prev) <= POWER_REL_TOL * sigma:
            break
    return sigma


def spectral_normalize(W, target: float, iters: int = POWER_ITERS, seed: int = 0) -> np.ndarray:
    """Rescale ``W`` so its estimated spectral norm is at most ``target``."""
    if not target > 0:
        raise ValueError("target must be positive")
    W = np.asarray(W, dtype=float)
    est = spectral_norm_estimate(W, iters, seed)
    if est > target:
        return W * (target / est)
    return W.copy()


class ContractiveResidualFlow(Flow):
    """Residual flow with a certified contractive MLP perturbation.

    ``weights[i]`` has shape ``(out_i, in_i)``; the first input and last output
    sizes are the flow dimension.  The raw weights are kept for serialization,
    the normalized ones are used for evaluation.
    """

    def __init__(
        self,
        weights: Sequence,
        biases: Sequence | None = None,
        activation: Activation | str = "relu",
        lipschitz_target: float = 0.9,
        power_iters: int = POWER_ITERS,
    ):
        if not 0 < lipschitz_target < 1:
            raise ValueError(f"lipschitz_target must lie in (0, 1), got {lipschitz_target}")
        self.activation = activation if isinstance(activation, Activation) else Activation(activation)
        raw = [np.atleast_2d(np.asarray(W, dtype=float)) for W in weights]
        if not raw:
            raise ValueError("at least one weight matrix is required")
        for i, (A, B) in enumerate(zip(raw, raw[1:])):
            if A.shape[0] != B.shape[1]:
                raise ValueError(f"weight {i} output size {A.shape[0]} != weight {i + 1} input size {B.shape[1]}")
        if raw[0].shape[1] != raw[-1].shape[0]:
            raise ValueError("g must map R^n to R^n")
        if biases is None:
            biases = [np.zeros(W.shape[0]) for W in raw]
        bs = [np.asarray(b, dtype=float).ravel() for b in biases]
        if len(bs) != len(raw) or any(b.size != W.shape[0] for b, W in zip(bs, raw)):
            raise ValueError("need one bias vector per layer matching its output size")

        self.raw_weights = raw
        self.biases = bs
        self.lipschitz_target = float(lipschitz_target)
        self.power_iters = int(power_iters)
        self.dim = raw[0].shape[1]
        depth = len(raw)
        lip_act = self.activation.lipschitz
        self.layer_target = (self.lipschitz_target / lip_act ** (depth - 1)) ** (1.0 / depth)
        self.weights = [spectral_normalize(W, self.layer_target, self.power_iters, seed=i) for i, W in enumerate(raw)]
        for W in self.weights:
            W.setflags(write=False)
        self.layer_norms = [spectral_norm_estimate(W, self.power_iters, seed=i) for i, W in enumerate(self.weights)]
        self.certified_lipschitz_bound = float(np.prod(self.layer_norms) * lip_act ** (depth - 1))
        self.exclusion_hint = "N_Z: preimages of activation kinks under the hidden pre-activations; no critical points"

    def __repr__(self):
        shapes = [W.shape for W in self.weights]
        return f"ContractiveResidualFlow(dim={self.dim}, shapes={shapes}, L={self.certified_lipschitz_bound:.6g})"

    @property
    def depth(self) -> int:
        return len(self.weights)

    def validity(self) -> Verdict:
        return Verdict.VALID if self.certified_lipschitz_bound < 1.0 else Verdict.INVALID

    def describe_validity(self) -> str:
        op = "<" if self.certified_lipschitz_bound < 1.0 else ">="
        return f"residual: certified Lip(g) = {self.certified_lipschitz_bound:.6g} {op} 1"

    def lipschitz_bound(self) -> float:
        """``Lip(f) <= 1 + L``."""
        return 1.0 + self.certified_lipschitz_bound

    def _preactivations(self, x):
        pre = []
        h = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = h @ W.T + b
            pre.append(a)
            h = self.activation.eval(a)
        return pre, h @ self.weights[-1].T + self.biases[-1]

    def g(self, x):
        xb, single = as_batch(x, self.dim)
        out = self._preactivations(xb)[1]
        return out[0] if single else out

    def _forward(self, x):
        return x + self._preactivations(x)[1]

    def _inverse(self, y, force, tol: float = FIXED_POINT_TOL, max_iter: int = FIXED_POINT_MAX_ITER):
        L = self.certified_lipschitz_bound
        stop = tol * (1.0 - L) / L if L > 0 else np.inf
        x = y.copy()
        status = np.full(y.shape[0], MAX_ITER_HIT, dtype=np.int64)
        active = np.arange(y.shape[0])
        for _ in range(max_iter):
            xa = y[active] - self._preactivations(x[active])[1]
            gap = np.linalg.norm(xa - x[active], axis=1)
            x[active] = xa
            done = gap <= stop
            status[active[done]] = OK
            active = active[~done]
            if active.size == 0:
                break
        x[status != OK] = np.nan
        return x, status

    def inverse(self, y, *, strict: bool = True, tol: float = FIXED_POINT_TOL, max_iter: int = FIXED_POINT_MAX_ITER):
        """Banach fixed-point inverse ``x <- y - g(x)`` started at ``x = y``.

        Stops once ``||x_{k+1} - x_k|| <= tol (1 - L) / L``, which bounds the
        distance to the true preimage by ``tol``.
        """
        yb, single = as_batch(y, self.dim)
        if strict:
            self._require_valid()
        x, status = self._inverse(yb, force=not strict, tol=tol, max_iter=max_iter)
        if strict and np.any(status != OK):
            raise MaxIter(
                f"fixed-point inverse did not converge for {int(np.sum(status != OK))} point(s); "
                "the Lipschitz certificate may be violated"
            )
        return x[0] if single else x

    def fixed_point_gaps(self, y, n_iter: int) -> np.ndarray:
        """Successive gaps ``||x_{k+1} - x_k||`` of the inverse iteration for one point."""
        y = np.asarray(y, dtype=float).reshape(1, self.dim)
        x = y.copy()
        gaps = np.empty(n_iter)
        for k in range(n_iter):
            xn = y - self._preactivations(x)[1]
            gaps[k] = np.linalg.norm(xn - x)
            x = xn
        return gaps

    def jacobian_g(self, x) -> np.ndarray:
        """Analytic ``J_g(x) = W_D diag(a'(z_{D-1})) W_{D-1} ... diag(a'(z_1)) W_1``, batched."""
        xb, single = as_batch(x, self.dim)
        J = self._jacobian(xb)[0]
        return J[0] if single else J

    def _jacobian(self, x):
        pre, _ = self._preactivations(x)
        m = x.shape[0]
        J = np.broadcast_to(self.weights[0], (m, *self.weights[0].shape))
        dist = np.full(m, np.inf)
        kinks = np.asarray(self.activation.nondiff_points)
        for a, W in zip(pre, self.weights[1:]):
            if kinks.size:
                grad_norm = np.linalg.norm(J, axis=2)
                with np.errstate(divide="ignore", invalid="ignore"):
                    d = np.min(np.abs(a[:, :, None] - kinks[None, None, :]), axis=2) / grad_norm
                dist = np.minimum(dist, np.min(np.where(np.isnan(d), np.inf, d), axis=1))
            J = W @ (self.activation.deriv(a)[:, :, None] * J)
        return J, dist

    def _log_abs_det(self, x):
        J, _ = self._jacobian(x)
        _, logabs = np.linalg.slogdet(np.eye(self.dim) + J)
        return logabs

    def det_sign(self, x) -> np.ndarray:
        xb, _ = as_batch(x, self.dim)
        J, _ = self._jacobian(xb)
        sign, _ = np.linalg.slogdet(np.eye(self.dim) + J)
        return sign

    def _on_kink(self, x):
        kinks = np.asarray(self.activation.nondiff_points)
        flag = np.zeros(x.shape[0], dtype=bool)
        if kinks.size:
            for a in self._preactivations(x)[0]:
                flag |= np.isin(a, kinks).any(axis=1)
        return flag

    def exclusion_distance(self, x):
        return self._jacobian(np.atleast_2d(x))[1]

    def to_dict(self) -> dict[str, Any]:
        return {
            "type": "residual",
            "activation": self.activation.to_dict(),
            "lipschitz_target": self.lipschitz_target,
            "weights": [W.tolist() for W in self.raw_weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def random(cls, dim: int, rng, hidden: Sequence[int] = (8,), activation: Activation | str = "relu", lipschitz_target: float = 0.9, bias_scale: float = 0.5):
        rng = np.random.default_rng(rng)
        sizes = [dim, *hidden, dim]
        weights = [rng.normal(size=(o, i)) for i, o in zip(sizes[:-1], sizes[1:])]
        biases = [rng.normal(size=o) * bias_scale for o in sizes[1:]]
        return cls(weights, biases, activation, lipschitz_target)


def flow_lipschitz_bound(flow: ContractiveResidualFlow) -> float:
    return flow.lipschitz_bound()
