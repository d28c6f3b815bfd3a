import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lflows import Activation, Localization, MonotoneProblem, solve_monotone
from lflows import _accel, _kernels
from lflows.errors import MaxIter, NoBracket
from lflows.scalar_solve import MAX_ITER_HIT, NO_BRACKET, OK


def relu_psi(wu, b=0.0):
    return lambda lam: lam + wu * max(lam + b, 0.0)


def test_linear():
    assert solve_monotone(lambda x: 2 * x, 4.0) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("t", [-1e3, -3.5, 0.0, 1e-9, 7.25, 1e3])
def test_identity(t):
    assert solve_monotone(lambda x: x, t, initial_guess=0.3) == pytest.approx(t, abs=1e-12)


def test_relu_psi_example():
    psi = relu_psi(1.0)
    lam = solve_monotone(psi, 4.0)
    assert lam == pytest.approx(2.0, abs=1e-12)
    assert psi(lam) == pytest.approx(4.0, abs=1e-12)


def test_problem_object():
    p = MonotoneProblem(lambda x: x**3 + x, 10.0, initial_guess=-5.0)
    assert p.solve() == pytest.approx(2.0, abs=1e-12)
    assert solve_monotone(p) == p.solve()


@given(
    st.lists(st.floats(0.05, 5.0), min_size=1, max_size=6),
    st.lists(st.floats(-5.0, 5.0), min_size=6, max_size=6),
    st.floats(-50, 50),
)
@settings(max_examples=200, deadline=None)
def test_piecewise_linear_residual(slopes, knots, target):
    knots = sorted(knots)[: len(slopes) - 1]
    jumps = np.diff(slopes)

    def f(x):
        # slope on the j-th segment is slopes[j] > 0
        return slopes[0] * x + sum(c * max(x - k, 0.0) for c, k in zip(jumps, knots))

    x = solve_monotone(f, target)
    assert abs(f(x) - target) <= 1e-12


@given(st.floats(-40, 40), st.lists(st.floats(-1e3, 1e3), min_size=5, max_size=5))
@settings(max_examples=100, deadline=None)
def test_independent_of_initial_guess(target, guesses):
    f = lambda lam: lam + 0.5 * math.tanh(lam - 1.0)
    roots = [solve_monotone(f, target, g) for g in guesses]
    assert max(roots) - min(roots) <= 2e-12


@pytest.mark.parametrize("target", np.linspace(-3, 3, 61))
def test_tanh_boundary_converges(target):
    psi = lambda lam: lam - math.tanh(lam)
    lam = solve_monotone(psi, target, initial_guess=target)
    assert abs(psi(lam) - target) <= 1e-12


def test_no_bracket_on_bounded_function():
    with pytest.raises(NoBracket):
        solve_monotone(math.atan, 2.0)


def test_max_iter():
    with pytest.raises(MaxIter):
        solve_monotone(lambda x: x**3, 3.0, initial_guess=100.0, max_iter=1)


def test_lower_bound_is_respected():
    x = solve_monotone(lambda r: r * r, 9.0, initial_guess=0.0, lower=0.0)
    assert x == pytest.approx(3.0, abs=1e-12)


def test_force_finds_a_root_of_non_monotone_function():
    f = relu_psi(-1.5)  # decreasing for lam > 0
    with pytest.raises(NoBracket):
        solve_monotone(f, -1.0, initial_guess=3.0)
    x = solve_monotone(f, -1.0, initial_guess=3.0, force=True)
    assert f(x) == pytest.approx(-1.0, abs=1e-12)


# vectorized kernels: numba loop vs numpy fallback


needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not available")


@pytest.mark.parametrize("act", [Activation("relu"), Activation("elu", 2.0), Activation("tanh"), Activation("softplus")], ids=str)
@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_solve_planar_residuals(act, use_numba):
    rng = np.random.default_rng(0)
    t = rng.normal(size=2000) * 5
    wu, b = 0.7, 0.3
    lam, status = _kernels.solve_planar(t, wu, b, act, use_numba=use_numba)
    assert np.all(status == OK)
    psi = lam + wu * act.eval(lam + b)
    assert np.max(np.abs(psi - t)) <= 1e-12


@needs_numba
def test_backends_agree():
    rng = np.random.default_rng(1)
    t = rng.normal(size=5000) * 3
    for act in (Activation("relu"), Activation("tanh"), Activation("softplus"), Activation("elu", 0.5)):
        a, sa = _kernels.solve_planar(t, -0.6, 0.2, act, use_numba=True)
        b, sb = _kernels.solve_planar(t, -0.6, 0.2, act, use_numba=False)
        assert np.array_equal(sa, sb)
        assert np.max(np.abs(a - b)) <= 1e-12
    loc = Localization("inverse", alpha=1.0)
    r = np.abs(t)
    a, sa = _kernels.solve_radial(r, 0.8, loc, use_numba=True)
    b, sb = _kernels.solve_radial(r, 0.8, loc, use_numba=False)
    assert np.array_equal(sa, sb) and np.max(np.abs(a - b)) <= 1e-12


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_solve_radial(use_numba):
    loc = Localization("tabulated", r=(0.0, 1.0, 3.0), h=(0.5, 0.2, 0.1))
    rho = np.linspace(0.0, 20.0, 401)
    r, status = _kernels.solve_radial(rho, 1.5, loc, use_numba=use_numba)
    assert np.all(status == OK) and np.all(r >= 0)
    assert np.max(np.abs(r * (1 + 1.5 * loc.eval(r)) - rho)) <= 1e-12


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_kernel_status_codes(use_numba):
    t = np.array([0.5, -2.0])
    # relu wu = -1: psi saturates at 0 for lam >= 0, so t = 0.5 has no preimage
    _, status = _kernels.solve_planar(t, -1.0, 0.0, Activation("relu"), use_numba=use_numba)
    assert status[0] == NO_BRACKET and status[1] == OK
    _, status = _kernels.solve_planar(np.array([1e6]), 0.5, 0.0, Activation("tanh"), guesses=np.array([-1e6]), max_iter=1, use_numba=use_numba)
    assert status[0] == MAX_ITER_HIT


@pytest.mark.parametrize("use_numba", [False, pytest.param(True, marks=needs_numba)])
def test_exact_newton_landing_stops_early(use_numba):
    # on a linear piece Newton hits the root in one step; the next correction is
    # below resolution, so the solve must end there instead of bisecting the bracket down
    y = np.random.default_rng(0).normal(size=10_000) * 3
    lam, status = _kernels.solve_planar(y, -0.5, 0.2, Activation("relu"), max_iter=8, use_numba=use_numba)
    assert np.all(status == OK)
    assert np.max(np.abs(lam - 0.5 * np.maximum(lam + 0.2, 0) - y)) <= 1e-12
    assert solve_monotone(relu_psi(-0.5, 0.2), 0.4071922022014031, 0.4071922022014031, max_iter=8) == pytest.approx(1.0143844044028067, abs=1e-14)
