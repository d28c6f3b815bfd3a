"""Smith-Volterra-Cantor set: a closed, nowhere-dense subset of [0, 1] of measure 1/2.

``S_m`` is obtained from ``[0, 1]`` by removing, at step ``k = 1..m``, an
open interval of length ``4^-k`` from the middle of every remaining interval.
All ``2^m`` intervals of ``S_m`` have the same length, so the set is stored
implicitly (per-level lengths and gaps) and queries descend the binary tree
in ``O(m)`` exact rational operations.  Intervals are generated on demand.

With ``d(x) = dist(x, S_m)`` and ``f(x) = int_0^x d``, ``f`` is C^1 and
injective yet ``f' = 0`` on all of ``S_m``, a set whose measure decreases to
1/2 rather than 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

from .errors import DepthTooLarge

MAX_DEPTH = 30


def removed_length(k: int) -> Fraction:
    return Fraction(1, 4**k)


@dataclass(frozen=True)
class SVCApprox:
    depth: int
    lengths: tuple[Fraction, ...]  # lengths[k] = length of each interval of S_k, lengths[0] = 1

    def __len__(self) -> int:
        return 2**self.depth

    @property
    def interval_length(self) -> Fraction:
        return self.lengths[self.depth]

    def gap(self, k: int) -> Fraction:
        return removed_length(k)

    def intervals(self) -> Iterator[tuple[Fraction, Fraction]]:
        """Closed intervals of ``S_depth`` in increasing order."""
        ell = self.interval_length
        for i in range(2**self.depth):
            left = Fraction(0)
            for k in range(1, self.depth + 1):
                if (i >> (self.depth - k)) & 1:
                    left += self.lengths[k] + self.gap(k)
            yield left, left + ell

    def _locate(self, x: Fraction):
        """Descend to the piece containing ``x``.

        Returns ``(k, left, area_before)``: ``k = 0`` means ``x`` lies in an
        interval of ``S_depth`` starting at ``left``; otherwise ``x`` lies in
        the level-``k`` gap starting at ``left``.  ``area_before`` is the
        integral of ``d`` from 0 to ``left``.
        """
        left = Fraction(0)
        area = Fraction(0)
        for k in range(1, self.depth + 1):
            ell = self.lengths[k]
            g = self.gap(k)
            gap_start = left + ell
            if x <= gap_start:
                continue
            area += self.tent_area_below(k)
            if x < gap_start + g:
                return k, gap_start, area
            area += g * g / 4
            left = gap_start + g
        return 0, left, area

    def tent_area_below(self, k: int) -> Fraction:
        """Integral of ``d`` over one interval of ``S_k``: its gaps at levels ``k+1..depth``."""
        total = Fraction(0)
        count = 1
        for j in range(k + 1, self.depth + 1):
            total += count * self.gap(j) ** 2 / 4
            count *= 2
        return total


def svc_build(depth: int) -> SVCApprox:
    if not 1 <= depth <= MAX_DEPTH:
        raise DepthTooLarge(f"depth must be in [1, {MAX_DEPTH}], got {depth}")
    lengths = [Fraction(1)]
    for k in range(1, depth + 1):
        lengths.append((lengths[-1] - removed_length(k)) / 2)
    return SVCApprox(depth, tuple(lengths))


def svc_measure(s: SVCApprox) -> Fraction:
    return len(s) * s.interval_length


def removed_total(depth: int) -> Fraction:
    """``sum_{k=1..depth} 2^(k-1) / 4^k``, the total length removed."""
    return sum((Fraction(2 ** (k - 1), 4**k) for k in range(1, depth + 1)), Fraction(0))


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(float(x))


def svc_distance_exact(s: SVCApprox, x) -> Fraction:
    x = _frac(x)
    if x <= 0:
        return -x
    if x >= 1:
        return x - 1
    k, left, _ = s._locate(x)
    if k == 0:
        return Fraction(0)
    return min(x - left, left + s.gap(k) - x)


def svc_distance(s: SVCApprox, x) -> float:
    """Distance from ``x`` to ``S_depth``: zero on the intervals, a tent over each gap."""
    return float(svc_distance_exact(s, x))


def svc_integral_exact(s: SVCApprox, x) -> Fraction:
    x = _frac(x)
    if not 0 <= x <= 1:
        raise ValueError("x must lie in [0, 1]")
    k, left, area = s._locate(x)
    if k == 0:
        return area
    g = s.gap(k)
    t = x - left
    if t <= g / 2:
        return area + t * t / 2
    return area + g * g / 4 - (g - t) ** 2 / 2


def svc_integral(s: SVCApprox, x) -> float:
    """``f(x) = int_0^x d(z) dz`` in closed form (sum of triangle areas)."""
    return float(svc_integral_exact(s, x))


def svc_critical_measure(s: SVCApprox) -> Fraction:
    """Measure of ``{f' = 0} = S_depth``; stays above 1/2 for every depth."""
    return svc_measure(s)


def svc_total_integral(s: SVCApprox) -> Fraction:
    """``f(1)``: every level-``k`` gap contributes ``gap^2 / 4``."""
    return s.tent_area_below(0)
