"""Scalar activations for planar/residual flows and radial localization functions.

Every nonlinearity knows its value, its a.e. derivative, the finite set of
points where it is not continuously differentiable, and (for activations) the
planar-flow parameter condition under which ``lambda + wu * h(lambda)`` is a
bijection of the real line.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .errors import ConfigParse, UnknownActivation

# integer codes consumed by the compiled kernels
RELU, ELU, TANH, SOFTPLUS = 0, 1, 2, 3
LOC_INVERSE, LOC_TABULATED = 0, 1

_KIND_CODES = {"relu": RELU, "elu": ELU, "tanh": TANH, "softplus": SOFTPLUS}

SOFTPLUS_CUTOFF = 30.0


class Verdict(str, enum.Enum):
    VALID = "valid"
    BOUNDARY = "boundary"
    INVALID = "invalid"

    @property
    def ok(self) -> bool:
        return self is not Verdict.INVALID

    def __str__(self) -> str:
        return self.value


def softplus(x):
    x = np.asarray(x, dtype=float)
    mid = np.clip(x, -SOFTPLUS_CUTOFF, SOFTPLUS_CUTOFF)
    out = np.log1p(np.exp(mid))
    out = np.where(x > SOFTPLUS_CUTOFF, x, out)
    return np.where(x < -SOFTPLUS_CUTOFF, np.exp(np.minimum(x, 0.0)), out)


def _sigmoid(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass(frozen=True)
class Activation:
    """Scalar nonlinearity ``h`` used inside planar and residual flows.

    ``deriv`` at a point of ``nondiff_points`` returns the right-hand
    derivative; pass ``return_flag=True`` to learn that this happened.
    """

    kind: str
    alpha: float = 1.0

    def __post_init__(self):
        if self.kind not in _KIND_CODES:
            raise UnknownActivation(f"unknown activation {self.kind!r}")
        if self.kind == "elu" and not self.alpha > 0:
            raise ValueError(f"elu requires alpha > 0, got {self.alpha}")
        object.__setattr__(self, "alpha", float(self.alpha))

    @property
    def code(self) -> int:
        return _KIND_CODES[self.kind]

    @property
    def nondiff_points(self) -> tuple[float, ...]:
        if self.kind == "relu":
            return (0.0,)
        if self.kind == "elu" and self.alpha != 1.0:
            return (0.0,)
        return ()

    @property
    def lipschitz(self) -> float:
        if self.kind == "elu":
            return max(1.0, self.alpha)
        return 1.0

    def __call__(self, x):
        return self.eval(x)

    def eval(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            return np.maximum(x, 0.0)
        if self.kind == "elu":
            return np.where(x > 0, x, self.alpha * np.expm1(np.minimum(x, 0.0)))
        if self.kind == "tanh":
            return np.tanh(x)
        return softplus(x)

    def deriv(self, x, *, return_flag: bool = False):
        x = np.asarray(x, dtype=float)
        if self.kind == "relu":
            d = np.where(x >= 0, 1.0, 0.0)
        elif self.kind == "elu":
            d = np.where(x >= 0, 1.0, self.alpha * np.exp(np.minimum(x, 0.0)))
        elif self.kind == "tanh":
            c = np.cosh(np.clip(x, -350.0, 350.0))
            d = 1.0 / (c * c)
        else:
            d = _sigmoid(x)
        if not return_flag:
            return d
        flag = np.zeros(x.shape, dtype=bool)
        for p in self.nondiff_points:
            flag |= x == p
        return d, flag

    def critical_preactivations(self, wu: float) -> tuple[float, ...]:
        """Isolated solutions ``s`` of ``1 + wu * h'(s) = 0``.

        Whole half-lines of solutions (relu/elu with ``wu = -1``) are not
        isolated and are not reported; such flows are invalid anyway.
        """
        wu = float(wu)
        if self.kind == "elu" and wu < 0 and wu * self.alpha < -1.0:
            return (math.log(-1.0 / (wu * self.alpha)),)
        if self.kind == "tanh" and wu <= -1.0:
            s = math.acosh(math.sqrt(-wu))
            return (0.0,) if s == 0.0 else (-s, s)
        if self.kind == "softplus" and wu < -1.0:
            p = -1.0 / wu
            return (math.log(p / (1.0 - p)),)
        return ()

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "elu":
            return {"type": "elu", "alpha": self.alpha}
        return {"type": self.kind}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any] | str) -> "Activation":
        if isinstance(d, str):
            return cls(d)
        try:
            kind = d["type"]
        except (KeyError, TypeError) as exc:
            raise ConfigParse(f"activation needs a 'type' field: {d!r}") from exc
        if kind == "elu":
            return cls("elu", float(d.get("alpha", 1.0)))
        return cls(kind)


def planar_threshold(a: Activation) -> float:
    """Smallest admissible ``w^T u`` for a planar flow with activation ``a``."""
    if a.kind == "elu":
        return max(-1.0, -1.0 / a.alpha)
    return -1.0


def planar_validity(a: Activation, wu: float) -> Verdict:
    """Bijectivity verdict for a planar flow with ``w^T u = wu``.

    relu, softplus: ``wu > -1``. elu: ``wu > max(-1, -1/alpha)``.
    tanh: ``wu >= -1``, with equality reported as ``BOUNDARY`` because psi'
    vanishes at a single point while the flow stays proper.
    """
    wu = float(wu)
    t = planar_threshold(a)
    if wu > t:
        return Verdict.VALID
    if a.kind == "tanh" and wu == t:
        return Verdict.BOUNDARY
    return Verdict.INVALID


def planar_condition(a: Activation, wu: float) -> str:
    """Human-readable statement of the checked condition, e.g. ``relu: w^Tu = -0.5 > -1``."""
    v = planar_validity(a, wu)
    t = planar_threshold(a)
    if a.kind == "elu":
        rhs = f"max(-1, -1/alpha) = {t:g} (alpha = {a.alpha:g})"
    else:
        rhs = f"{t:g}"
    if v is Verdict.VALID:
        op = ">"
    elif v is Verdict.BOUNDARY:
        op = "= (boundary)"
    else:
        op = "<=" if a.kind != "tanh" else "<"
    return f"{a.kind}: w^Tu = {wu:g} {op} {rhs}"


@dataclass(frozen=True)
class Localization:
    """Radial localization ``h: [0, inf) -> [0, inf)``.

    ``inverse`` is ``h(r) = 1 / (alpha + r)``. ``tabulated`` interpolates the
    knots ``(r, h)`` linearly and holds the end values constant outside them.
    """

    kind: str
    alpha: float = 1.0
    r: tuple[float, ...] = field(default=())
    h: tuple[float, ...] = field(default=())

    def __post_init__(self):
        if self.kind == "inverse":
            if not self.alpha > 0:
                raise ValueError(f"inverse localization requires alpha > 0, got {self.alpha}")
            object.__setattr__(self, "alpha", float(self.alpha))
        elif self.kind == "tabulated":
            r = tuple(float(v) for v in self.r)
            h = tuple(float(v) for v in self.h)
            if len(r) < 2 or len(r) != len(h):
                raise ValueError("tabulated localization needs >= 2 knots with matching r and h")
            if r[0] < 0 or any(b <= a for a, b in zip(r, r[1:])):
                raise ValueError("tabulated knots must be nonnegative and strictly increasing")
            if any(v < 0 for v in h):
                raise ValueError("tabulated localization must be nonnegative")
            object.__setattr__(self, "r", r)
            object.__setattr__(self, "h", h)
        else:
            raise UnknownActivation(f"unknown localization {self.kind!r}")

    @property
    def code(self) -> int:
        return LOC_INVERSE if self.kind == "inverse" else LOC_TABULATED

    @property
    def knots(self) -> tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.r, dtype=float), np.asarray(self.h, dtype=float)

    @property
    def nondiff_points(self) -> tuple[float, ...]:
        if self.kind == "inverse":
            return ()
        r, h = self.knots
        slopes = np.concatenate([[0.0], np.diff(h) / np.diff(r), [0.0]])
        kinks = r[slopes[1:] != slopes[:-1]]
        return tuple(float(v) for v in kinks if v > 0)

    def __call__(self, r):
        return self.eval(r)

    def eval(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "inverse":
            return 1.0 / (self.alpha + r)
        kr, kh = self.knots
        return np.interp(r, kr, kh)

    def deriv(self, r, *, return_flag: bool = False):
        r = np.asarray(r, dtype=float)
        if self.kind == "inverse":
            d = -1.0 / (self.alpha + r) ** 2
            flag = np.zeros(r.shape, dtype=bool)
        else:
            kr, kh = self.knots
            slopes = np.diff(kh) / np.diff(kr)
            # right-hand derivative: segment i covers [r_i, r_{i+1})
            idx = np.searchsorted(kr, r, side="right") - 1
            inside = (idx >= 0) & (idx < len(slopes))
            d = np.where(inside, slopes[np.clip(idx, 0, len(slopes) - 1)], 0.0)
            flag = np.isin(r, np.asarray(self.nondiff_points))
        return (d, flag) if return_flag else d

    def to_dict(self) -> dict[str, Any]:
        if self.kind == "inverse":
            return {"type": "inverse", "alpha": self.alpha}
        return {"type": "tabulated", "r": list(self.r), "h": list(self.h)}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Localization":
        try:
            kind = d["type"]
        except (KeyError, TypeError) as exc:
            raise ConfigParse(f"localization needs a 'type' field: {d!r}") from exc
        if kind == "inverse":
            return cls("inverse", alpha=float(d.get("alpha", 1.0)))
        if kind == "tabulated":
            return cls("tabulated", r=tuple(d["r"]), h=tuple(d["h"]))
        raise UnknownActivation(f"unknown localization {kind!r}")
