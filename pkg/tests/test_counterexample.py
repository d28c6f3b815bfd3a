from fractions import Fraction as F

import numpy as np
import pytest

from lflows import counterexample as cx
from lflows.errors import DepthTooLarge


def test_depth_one_and_two_intervals():
    assert list(cx.svc_build(1).intervals()) == [(0, F(3, 8)), (F(5, 8), 1)]
    assert list(cx.svc_build(2).intervals()) == [(0, F(5, 32)), (F(7, 32), F(3, 8)), (F(5, 8), F(25, 32)), (F(27, 32), 1)]


def test_depth_three_follows_the_removal_rule():
    ivs = list(cx.svc_build(3).intervals())
    assert len(ivs) == 8
    assert ivs[0] == (0, F(9, 128)) and ivs[1] == (F(11, 128), F(5, 32))
    # every gap removed at step 3 has length 1/64
    assert ivs[1][0] - ivs[0][1] == F(1, 64)


def test_measures():
    assert cx.svc_measure(cx.svc_build(1)) == F(3, 4)
    assert cx.svc_measure(cx.svc_build(3)) == F(9, 16)
    assert 0 < cx.svc_measure(cx.svc_build(20)) - F(1, 2) < F(1, 10**5)
    measures = [cx.svc_critical_measure(cx.svc_build(m)) for m in range(1, 31)]
    assert all(a > b for a, b in zip(measures, measures[1:]))


@pytest.mark.parametrize("m", [1, 2, 5, 17, 30])
def test_measure_plus_removed_is_one(m):
    assert cx.svc_measure(cx.svc_build(m)) + cx.removed_total(m) == 1


def test_interval_sums_match_measure():
    for m in range(1, 9):
        s = cx.svc_build(m)
        ivs = list(s.intervals())
        assert sum(b - a for a, b in ivs) == cx.svc_measure(s)
        assert all(b1 < a2 for (_, b1), (a2, _) in zip(ivs, ivs[1:]))


def test_depth_bounds():
    for bad in (0, -1, 31):
        with pytest.raises(DepthTooLarge):
            cx.svc_build(bad)


def test_distance_examples():
    s = cx.svc_build(1)
    assert cx.svc_distance(s, 0.0) == 0.0
    assert cx.svc_distance(s, 0.5) == 0.125
    assert cx.svc_distance(s, 0.4375) == 0.0625
    assert cx.svc_distance(s, 0.2) == 0.0


def test_distance_is_a_tent_over_every_gap():
    s = cx.svc_build(6)
    ivs = list(s.intervals())
    for (_, a), (b, _) in zip(ivs, ivs[1:]):
        g = b - a
        assert cx.svc_distance_exact(s, a + g / 2) == g / 2
        assert cx.svc_distance_exact(s, a) == 0 and cx.svc_distance_exact(s, b) == 0
        assert cx.svc_distance_exact(s, a + g / 5) == g / 5


def test_distance_brute_force(rng):
    s = cx.svc_build(7)
    ivs = list(s.intervals())
    for x in rng.uniform(0, 1, 300):
        xf = F(float(x))
        ref = min(0 if a <= xf <= b else min(abs(xf - a), abs(xf - b)) for a, b in ivs)
        assert cx.svc_distance_exact(s, xf) == ref


def test_distance_is_one_lipschitz(rng):
    s = cx.svc_build(12)
    x, y = rng.uniform(0, 1, (2, 10_000))
    d = np.array([cx.svc_distance(s, v) for v in x]) - np.array([cx.svc_distance(s, v) for v in y])
    assert np.all(np.abs(d) <= np.abs(x - y) + 1e-15)


def test_integral_examples():
    s = cx.svc_build(1)
    assert cx.svc_integral(s, 0.0) == 0.0
    assert cx.svc_integral(s, 1.0) == 1 / 64
    assert cx.svc_total_integral(s) == F(1, 64)
    with pytest.raises(ValueError):
        cx.svc_integral(s, 1.5)


@pytest.mark.parametrize("m", [1, 2, 4, 9])
def test_total_integral_is_sum_of_triangles(m):
    s = cx.svc_build(m)
    ivs = list(s.intervals())
    gaps = [b - a for (_, a), (b, _) in zip(ivs, ivs[1:])]
    assert cx.svc_total_integral(s) == sum(g * g / 4 for g in gaps)
    assert cx.svc_integral_exact(s, F(1)) == cx.svc_total_integral(s)


def test_integral_is_monotone_and_strict_across_gaps():
    s = cx.svc_build(5)
    xs = [F(k, 4096) for k in range(4097)]
    f = [cx.svc_integral_exact(s, x) for x in xs]
    assert all(b >= a for a, b in zip(f, f[1:]))
    ivs = list(s.intervals())
    for (_, a), (b, _) in zip(ivs, ivs[1:]):
        assert cx.svc_integral_exact(s, b) > cx.svc_integral_exact(s, a)
    # flat on the set itself
    a, b = ivs[3]
    assert cx.svc_integral_exact(s, a) == cx.svc_integral_exact(s, b)


def test_derivative_of_integral_is_distance(rng):
    s = cx.svc_build(10)
    ivs = list(s.intervals())
    edges = [float(v) for iv in ivs for v in iv]
    apexes = [float((a + b) / 2) for (_, a), (b, _) in zip(ivs, ivs[1:])]
    kinks = np.sort(np.array(edges + apexes))
    h = 1e-7
    xs = rng.uniform(h, 1 - h, 2000)
    i = np.clip(np.searchsorted(kinks, xs), 1, kinks.size - 1)
    away = np.minimum(np.abs(xs - kinks[i]), np.abs(xs - kinks[i - 1])) > 2 * h
    for x in xs[away]:
        fd = (cx.svc_integral(s, x + h) - cx.svc_integral(s, x - h)) / (2 * h)
        assert abs(fd - cx.svc_distance(s, x)) <= 1e-8
