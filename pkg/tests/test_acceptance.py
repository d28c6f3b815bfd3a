"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; the summary lines are
also repeated in the terminal summary of any pytest run that includes this file.
"""
import csv
import time
from contextlib import contextmanager
from fractions import Fraction

import numpy as np

from conftest import ACCEPTANCE, ACTIVATIONS, fd_log_abs_det, mixed_chain, valid_planar, valid_radial, valid_residual
from lflows import ContractiveResidualFlow, FlowChain, PlanarFlow, StandardNormal, counterexample, exclusion_distance
from lflows.activations import planar_threshold, planar_validity
from lflows.cli import main as cli_main
from lflows.verify import check_montecarlo, integrate_density, scan_planar_psi

DIMS = (1, 2, 4, 8)


@contextmanager
def criterion(n, title, limit=None):
    detail = {"text": ""}
    t0 = time.perf_counter()
    try:
        yield detail
    except BaseException as exc:
        ACCEPTANCE[n] = (title, False, f"{type(exc).__name__}: {str(exc).splitlines()[0] if str(exc) else ''}")
        print(f"\ncriterion {n}: FAIL  {title}")
        raise
    elapsed = time.perf_counter() - t0
    ok = limit is None or elapsed < limit
    budget = f", limit {limit:g} s" if limit else ""
    ACCEPTANCE[n] = (title, ok, f"{detail['text']}; {elapsed:.1f} s{budget}")
    print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {title}  ({detail['text']}; {elapsed:.1f} s{budget})")
    assert ok, f"runtime {elapsed:.1f} s exceeds {limit} s"


def test_1_table_boundaries():
    with criterion(1, "planar validity flips at the stated threshold, agreeing with the psi scan", limit=10) as d:
        checked = 0
        for act in ACTIVATIONS:
            t = planar_threshold(act)
            below, above = planar_validity(act, t - 0.01), planar_validity(act, t + 0.01)
            assert not below.ok, (act, t - 0.01, below)
            assert above.ok, (act, t + 0.01, above)
            for wu in (t - 0.01, t + 0.01, t - 0.5, t + 0.5, 1.0):
                scan = scan_planar_psi(act, wu)
                assert planar_validity(act, wu).ok == scan.bijective, (act, wu, scan)
                checked += 1
        d["text"] = f"{len(ACTIVATIONS)} rows, {checked} scan comparisons"


def _roundtrip_err(flow, x):
    return np.max(np.linalg.norm(flow.inverse(flow.forward(x)) - x, axis=1) / (1 + np.linalg.norm(x, axis=1)))


def test_2_roundtrip():
    rng = np.random.default_rng(2)
    with criterion(2, "round trip <= 1e-8 (1 + |x|) on 1000 points, all families and mixed chains", limit=60) as d:
        worst, cases = 0.0, 0
        for dim in DIMS:
            x = rng.standard_normal((1000, dim)) * 2.0
            flows = [valid_planar(dim, rng, act) for act in ACTIVATIONS]
            flows += [valid_radial(dim, rng, alpha=a) for a in (0.5, 1.0, 2.0)]
            flows += [valid_residual(dim, rng, hidden=h) for h in ((8,), (16, 16))]
            flows += [mixed_chain(dim, k, rng) for k in (2, 4, 6)]
            for flow in flows:
                err = _roundtrip_err(flow, x)
                assert err <= 1e-8, (dim, flow, err)
                worst = max(worst, err)
                cases += 1
        d["text"] = f"{cases} flows, worst {worst:.2e}"


def test_3_jacobian():
    rng = np.random.default_rng(3)
    with criterion(3, "analytic log|det J| vs finite differences, rel err <= 1e-4", limit=60) as d:
        worst, skipped, checked = 0.0, 0, 0
        for dim in DIMS:
            families = {
                "planar": [valid_planar(dim, rng, act) for act in ACTIVATIONS],
                "radial": [valid_radial(dim, rng, alpha=a) for a in (0.5, 1.0, 2.0)],
                "residual": [valid_residual(dim, rng)],
                "mixed": [mixed_chain(dim, 6, rng)],
            }
            for flows in families.values():
                for flow in flows:
                    chain = flow if isinstance(flow, FlowChain) else FlowChain([flow])
                    x = rng.standard_normal((100, dim)) * 1.5
                    keep = exclusion_distance(chain, x) >= 1e-4
                    skipped += int((~keep).sum())
                    x = x[keep]
                    ana = chain.log_det_forward(x)
                    ref = fd_log_abs_det(lambda v: chain.forward(v[None])[0], x)
                    err = np.abs(ana - ref) / np.maximum(1.0, np.abs(ref))
                    assert err.max() <= 1e-4, (dim, flow, err.max())
                    worst = max(worst, float(err.max()))
                    checked += x.shape[0]
        d["text"] = f"{checked} points, {skipped} skipped near exclusion sets, worst {worst:.2e}"


def boxed_chain(dim, k, rng, half_width=10.0, max_outside=1e-3):
    """Random gentle chain whose pushforward keeps all but ``max_outside`` of its mass in the box.

    The quadrature only sees ``[-w, w]^dim``; mass pushed beyond it is a
    property of the draw, not an error of the density.  Screened by sampling.
    """
    rejected = 0
    while True:
        chain = mixed_chain(dim, k, rng, gentle=True)
        x = chain.forward(rng.standard_normal((100_000, dim)))
        if np.mean(np.any(np.abs(x) > half_width, axis=1)) < max_outside:
            return chain, rejected
        rejected += 1


def test_4_normalization():
    rng = np.random.default_rng(4)
    with criterion(4, "density integrates to 1 +- 1e-2 (valid); invalid relu wu=-1.5 deviates > 5e-2", limit=120) as d:
        devs, rejected = [], 0
        for dim, k in ((1, 1), (1, 3), (1, 6), (2, 1), (2, 3), (2, 6)):
            chain, r = boxed_chain(dim, k, rng)
            rejected += r
            total = integrate_density(chain, StandardNormal(dim))
            devs.append(abs(total - 1))
            assert abs(total - 1) <= 1e-2, (dim, k, total)
        bad = FlowChain([PlanarFlow([-1.5], [1.0], 0.0, "relu")])
        bad_total = integrate_density(bad, StandardNormal(1), strict=False)
        assert abs(bad_total - 1) > 5e-2, bad_total
        bad2 = FlowChain([PlanarFlow([-1.5, 0.0], [1.0, 0.0], 0.0, "relu")])
        bad2_total = integrate_density(bad2, StandardNormal(2), strict=False)
        assert abs(bad2_total - 1) > 5e-2, bad2_total
        d["text"] = f"valid max dev {max(devs):.1e} ({rejected} draws rejected for mass outside the box); invalid integrals {bad_total:.3f} (1-D), {bad2_total:.3f} (2-D)"


def test_5_montecarlo():
    rng = np.random.default_rng(5)
    with criterion(5, "1e5 pushed samples vs analytic marginals, L1 <= 0.05 per axis", limit=60) as d:
        worst = 0.0
        for dim, k in ((1, 3), (1, 6), (2, 3), (2, 6)):
            chain, _ = boxed_chain(dim, k, rng)
            rep = check_montecarlo(chain, StandardNormal(dim), n_samples=100_000, bins=50, seed=int(rng.integers(1 << 30)))
            for case in rep.cases:
                assert case.passed, case
                worst = max(worst, case.metric)
        d["text"] = f"worst L1 {worst:.4f}"


def test_6_composition():
    rng = np.random.default_rng(6)
    with criterion(6, "chain log-det = sum of layer log-dets; forward/inverse antisymmetric, 1e-10") as d:
        worst_sum, worst_anti = 0.0, 0.0
        for dim in DIMS:
            chain = mixed_chain(dim, 6, rng)
            x = rng.standard_normal((500, dim))
            total = chain.log_det_forward(x)
            h, acc = x, np.zeros(x.shape[0])
            for layer in chain.layers:
                acc += layer.log_det_forward(h)
                h = layer.forward(h)
            e_sum = np.max(np.abs(total - acc) / np.maximum(1, np.abs(acc)))
            e_anti = np.max(np.abs(chain.log_det_inverse(chain.forward(x)) + total) / np.maximum(1, np.abs(total)))
            assert e_sum <= 1e-10 and e_anti <= 1e-10, (dim, e_sum, e_anti)
            worst_sum, worst_anti = max(worst_sum, e_sum), max(worst_anti, e_anti)
        d["text"] = f"sum err {worst_sum:.1e}, antisymmetry err {worst_anti:.1e}"


def test_7_contraction():
    rng = np.random.default_rng(7)
    with criterion(7, "Lip(g) ratios <= L; fixed-point gap ratio <= L + 1e-6; det(I + J_g) > 0") as d:
        max_ratio_over_L, max_gap_ratio_over_L, min_det = 0.0, -np.inf, np.inf
        for dim in DIMS:
            for hidden, act in (((8,), "relu"), ((16, 16), "relu"), ((8,), "elu"), ((8,), "tanh")):
                flow = ContractiveResidualFlow.random(dim, rng, hidden=hidden, activation=act, lipschitz_target=0.9)
                L = flow.certified_lipschitz_bound
                assert L <= 0.9 + 1e-12
                x = rng.standard_normal((2000, dim)) * 3
                y = x + rng.standard_normal((2000, dim)) * np.logspace(-6, 0, 2000)[:, None]
                r = np.linalg.norm(flow.g(x) - flow.g(y), axis=1) / np.linalg.norm(x - y, axis=1)
                assert r.max() <= L, (dim, hidden, r.max(), L)
                max_ratio_over_L = max(max_ratio_over_L, r.max() / L)
                for yy in rng.standard_normal((20, dim)) * 3:
                    gaps = flow.fixed_point_gaps(yy, 60)
                    gaps = gaps[gaps > 1e-11]
                    if gaps.size > 1:
                        ratios = gaps[1:] / gaps[:-1]
                        assert ratios.max() <= L + 1e-6, (ratios.max(), L)
                        max_gap_ratio_over_L = max(max_gap_ratio_over_L, ratios.max() - L)
                J = flow.jacobian_g(x[:500])
                dets = np.linalg.det(np.eye(dim) + J)
                assert np.all(dets > 0)
                min_det = min(min_det, float(dets.min()))
        d["text"] = f"max ratio/L {max_ratio_over_L:.3f}, max gap ratio - L {max_gap_ratio_over_L:.2e}, min det {min_det:.3g}"


def test_8_svc():
    with criterion(8, "SVC measures 3/4, 9/16, -> 1/2; f' = d by finite differences to 1e-8", limit=5) as d:
        assert counterexample.svc_measure(counterexample.svc_build(1)) == Fraction(3, 4)
        assert counterexample.svc_measure(counterexample.svc_build(3)) == Fraction(9, 16)
        m20 = counterexample.svc_measure(counterexample.svc_build(20))
        assert 0 <= m20 - Fraction(1, 2) < Fraction(1, 10**5)
        rng = np.random.default_rng(8)
        worst = 0.0
        h = Fraction(1, 2**30)
        for depth in (1, 3, 8, 20):
            s = counterexample.svc_build(depth)
            xs = rng.uniform(2e-9, 1 - 2e-9, 300)
            # include points inside gaps, where d > 0
            xs = np.concatenate([xs, [float(a + (b - a) / 3) for a, b in _first_gaps(s, 20)]])
            for x in xs:
                xf = Fraction(float(x))
                fd = (counterexample.svc_integral_exact(s, xf + h) - counterexample.svc_integral_exact(s, xf - h)) / (2 * h)
                err = abs(float(fd) - counterexample.svc_distance(s, xf))
                worst = max(worst, err)
                assert err <= 1e-8, (depth, x, err)
        d["text"] = f"depth-20 measure - 1/2 = {float(m20 - Fraction(1, 2)):.2e}, worst f'-d {worst:.1e}"


def _first_gaps(s, n):
    prev = None
    for a, b in s.intervals():
        if prev is not None:
            yield prev, a
            n -= 1
            if n == 0:
                return
        prev = b


def _scan_csv(tmp_path, name, *args):
    out = tmp_path / f"{name}.csv"
    assert cli_main(["psi-scan", *args, "-o", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["lambda", "psi"]
    data = np.array(rows[1:], dtype=float)
    return data[:, 0], data[:, 1]


def test_9_psi_scan(tmp_path):
    with criterion(9, "psi-scan CSV reproduces the flat, decreasing and stationary curve facts") as d:
        lam, psi = _scan_csv(tmp_path, "relu_m1", "--activation", "relu", "--wu", "-1")
        assert np.all(psi[lam >= 0] == 0.0)
        assert np.all(np.diff(psi[lam < 0]) > 0)

        lam, psi = _scan_csv(tmp_path, "relu_m2", "--activation", "relu", "--wu", "-2")
        assert np.all(np.diff(psi[lam >= 0]) < 0)

        lam, psi = _scan_csv(tmp_path, "tanh_m1", "--activation", "tanh", "--wu", "-1")
        assert np.all(np.diff(psi) > 0)
        slope = np.gradient(psi, lam)
        i0 = int(np.argmin(slope))
        assert lam[i0] == 0.0
        step = lam[1] - lam[0]
        assert slope[i0] < step**2
        # slope grows strictly away from 0 on both sides: a single stationary point
        assert np.all(np.diff(slope[i0:]) > 0) and np.all(np.diff(slope[: i0 + 1]) < 0)
        d["text"] = f"tanh wu=-1 min slope {slope[i0]:.1e} at lambda = 0"
