import numpy as np
import pytest

from lflows import Activation, ContractiveResidualFlow, FlowChain, PlanarFlow, RadialFlow
from lflows.activations import planar_threshold

ACTIVATIONS = [
    Activation("relu"),
    Activation("elu", 0.5),
    Activation("elu", 1.0),
    Activation("elu", 2.0),
    Activation("tanh"),
    Activation("softplus"),
]

# (criterion number) -> (title, passed, detail); filled by test_acceptance
ACCEPTANCE = {}


def valid_planar(dim, rng, activation, margin=0.1, hi=2.0, scale=1.0):
    wu = rng.uniform(planar_threshold(activation) + margin, hi)
    return PlanarFlow.random(dim, rng, activation, wu=wu, scale=scale)


def valid_radial(dim, rng, alpha=1.0, lo=-0.9, hi=2.0):
    return RadialFlow.random(dim, rng, beta=float(rng.uniform(lo * alpha, hi)), alpha=alpha)


def valid_residual(dim, rng, lipschitz_target=0.9, hidden=(8,)):
    return ContractiveResidualFlow.random(dim, rng, hidden=hidden, lipschitz_target=lipschitz_target)


def mixed_chain(dim, n_layers, rng, *, gentle=False):
    """Random valid chain cycling through planar/radial/residual layers.

    ``gentle`` keeps parameters away from the validity thresholds so that the
    density stays smooth enough for grid quadrature.
    """
    layers = []
    for k in range(n_layers):
        kind = k % 3
        if kind == 0:
            act = ACTIVATIONS[rng.integers(len(ACTIVATIONS))]
            layers.append(valid_planar(dim, rng, act, margin=0.4 if gentle else 0.1, hi=1.5 if gentle else 2.0))
        elif kind == 1:
            layers.append(valid_radial(dim, rng, lo=-0.5 if gentle else -0.9, hi=1.0 if gentle else 2.0))
        else:
            layers.append(valid_residual(dim, rng, lipschitz_target=0.6 if gentle else 0.9))
    return FlowChain(layers, dim=dim)


def fd_jacobian(f, x, rel=1e-6):
    """Central-difference Jacobian of ``f: R^n -> R^n`` at one point."""
    n = x.size
    J = np.empty((n, n))
    for j in range(n):
        h = rel * max(1.0, abs(x[j]))
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (f(x + e) - f(x - e)) / (2 * h)
    return J


def fd_log_abs_det(f, x, rel=1e-6):
    """``log|det|`` of the finite-difference Jacobian, row by row; ``f`` maps one point."""
    return np.array([np.linalg.slogdet(fd_jacobian(f, xi, rel))[1] for xi in x])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({detail})")
