"""``lflows`` command line: validate, sample, logpdf, verify, psi-scan, svc.

Exit codes: 0 success/pass, 1 domain failure (invalid flow, failed suite),
2 usage or parse error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import config, counterexample, verify
from .activations import Activation
from .errors import ConfigParse, DepthTooLarge, DimMismatch, FlowError, InvalidFlow, UnknownActivation
from .flow_core import log_density
from .planar import psi_scan

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def fmt(v: float) -> str:
    return "%.17g" % v


@contextmanager
def _output(path: str | None):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def write_csv(path: str | None, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with _output(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_points(path: str) -> tuple[list[str], np.ndarray]:
    text = Path(path).read_text()
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration as exc:
        raise ConfigParse(f"{path}: empty points file") from exc
    try:
        rows = [[float(v) for v in row] for row in reader if row]
    except ValueError as exc:
        raise ConfigParse(f"{path}: non-numeric value: {exc}") from exc
    if any(len(r) != len(header) for r in rows):
        raise ConfigParse(f"{path}: ragged rows")
    return header, np.array(rows, dtype=float).reshape(len(rows), len(header))


def cmd_validate(args) -> int:
    chain, _ = config.load(args.config)
    layers = []
    for i, layer in enumerate(chain.layers):
        v = layer.validity()
        entry = {"index": i, "type": layer.to_dict()["type"], "verdict": str(v), "condition": layer.describe_validity()}
        if hasattr(layer, "certified_lipschitz_bound"):
            entry["certified_lipschitz_bound"] = layer.certified_lipschitz_bound
        layers.append(entry)
    ok = all(layer.validity().ok for layer in chain.layers)
    print(json.dumps({"dim": chain.dim, "valid": ok, "layers": layers}, indent=2))
    return EXIT_OK if ok else EXIT_FAIL


def _require_valid(chain) -> None:
    for i, layer in enumerate(chain.layers):
        if not layer.validity().ok:
            raise InvalidFlow(f"layer {i}: {layer.describe_validity()}")


def cmd_sample(args) -> int:
    chain, base = config.load(args.config)
    _require_valid(chain)
    z = base.sample(args.n, args.seed)
    x = chain.forward(z)
    write_csv(args.output, [f"x{i}" for i in range(chain.dim)], x.tolist())
    return EXIT_OK


def cmd_logpdf(args) -> int:
    chain, base = config.load(args.config)
    header, pts = read_points(args.points)
    if pts.shape[1] != chain.dim:
        raise DimMismatch(f"points have {pts.shape[1]} columns, flow dim is {chain.dim}")
    lp, flags = log_density(chain, base, pts, return_flags=True)
    rows = ([*map(float, p), float(v), int(f)] for p, v, f in zip(pts, lp, flags))
    write_csv(args.output, [*header, "log_density", "on_kink"], rows)
    return EXIT_OK


def cmd_verify(args) -> int:
    chain, base = config.load(args.config)
    report = verify.run_suite(chain, base, args.suite, args.seed)
    with _output(args.output) as fh:
        fh.write(report.to_json() + "\n")
    return EXIT_OK if report.overall else EXIT_FAIL


def cmd_psi_scan(args) -> int:
    act = Activation(args.activation, args.alpha) if args.activation == "elu" else Activation(args.activation)
    data = psi_scan(act, args.wu, args.b, args.lo, args.hi, args.steps)
    write_csv(args.output, ["lambda", "psi"], data.tolist())
    return EXIT_OK


def cmd_svc(args) -> int:
    s = counterexample.svc_build(args.depth)
    measure = counterexample.svc_measure(s)
    summary = {
        "depth": s.depth,
        "intervals": len(s),
        "measure": f"{measure.numerator}/{measure.denominator}",
        "measure_decimal": float(measure),
        "removed": str(counterexample.removed_total(s.depth)),
        "f_at_1": float(counterexample.svc_total_integral(s)),
        "f_at_1_exact": str(counterexample.svc_total_integral(s)),
    }
    if args.output:
        xs = np.linspace(0.0, 1.0, args.samples)
        rows = ([float(x), counterexample.svc_distance(s, x), counterexample.svc_integral(s, x)] for x in xs)
        write_csv(args.output, ["x", "d", "f"], rows)
        summary["samples_csv"] = args.output
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lflows", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="per-layer validity verdicts")
    s.add_argument("config")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("sample", help="push base samples through the flow")
    s.add_argument("config")
    s.add_argument("-n", type=int, required=True)
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("logpdf", help="append log-density to a CSV of points")
    s.add_argument("config")
    s.add_argument("points")
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_logpdf)

    s = sub.add_parser("verify", help="run a certification suite")
    s.add_argument("config")
    s.add_argument("--suite", choices=[*verify.SUITES, "all"], default="all")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_verify)

    s = sub.add_parser("psi-scan", help="tabulate psi(lambda) = lambda + wu h(lambda + b)")
    s.add_argument("--activation", required=True)
    s.add_argument("--alpha", type=float, default=1.0, help="elu alpha")
    s.add_argument("--wu", type=float, required=True)
    s.add_argument("--b", type=float, default=0.0)
    s.add_argument("--lo", type=float, default=-3.5)
    s.add_argument("--hi", type=float, default=3.5)
    s.add_argument("--steps", type=int, default=701)
    s.add_argument("-o", "--output")
    s.set_defaults(func=cmd_psi_scan)

    s = sub.add_parser("svc", help="Smith-Volterra-Cantor counterexample numbers")
    s.add_argument("--depth", type=int, required=True)
    s.add_argument("--samples", type=int, default=1001)
    s.add_argument("-o", "--output", help="CSV of (x, d, f) samples")
    s.set_defaults(func=cmd_svc)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigParse, UnknownActivation, DimMismatch, DepthTooLarge) as exc:
        print(f"lflows: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"lflows: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvalidFlow, FlowError) as exc:
        print(f"lflows: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"lflows: error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
