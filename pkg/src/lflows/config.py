"""JSON flow-chain documents.

Schema::

    {"dim": n,
     "base": {"type": "standard_normal"},
     "layers": [
        {"type": "planar", "u": [...], "w": [...], "b": 0.0, "activation": {"type": "relu"}},
        {"type": "radial", "beta": -0.5, "x0": [...], "localization": {"type": "inverse", "alpha": 1.0}},
        {"type": "residual", "activation": {"type": "relu"}, "lipschitz_target": 0.9,
         "weights": [[[...]]], "biases": [[...]]}
     ]}
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping

from .activations import Activation, Localization
from .errors import ConfigParse, DimMismatch, FlowError
from .flow_core import Flow, FlowChain, StandardNormal
from .planar import PlanarFlow
from .radial import RadialFlow
from .residual import ContractiveResidualFlow


def layer_from_dict(d: Mapping[str, Any]) -> Flow:
    kind = d.get("type")
    if kind == "planar":
        return PlanarFlow(d["u"], d["w"], d.get("b", 0.0), Activation.from_dict(d.get("activation", {"type": "tanh"})))
    if kind == "radial":
        loc = Localization.from_dict(d.get("localization", {"type": "inverse", "alpha": 1.0}))
        return RadialFlow(d["beta"], d["x0"], loc)
    if kind == "residual":
        return ContractiveResidualFlow(
            d["weights"],
            d.get("biases"),
            Activation.from_dict(d.get("activation", {"type": "relu"})),
            d.get("lipschitz_target", 0.9),
        )
    raise ConfigParse(f"unknown layer type {kind!r}")


def chain_from_dict(doc: Mapping[str, Any]) -> tuple[FlowChain, StandardNormal]:
    """Build ``(chain, base)`` from a parsed document; every failure is a :class:`ConfigParse`."""
    try:
        dim = int(doc["dim"])
        base_doc = doc.get("base", {"type": "standard_normal"})
        if base_doc.get("type") != "standard_normal":
            raise ConfigParse(f"unsupported base distribution {base_doc.get('type')!r}")
        layers = []
        for i, ld in enumerate(doc.get("layers", [])):
            try:
                layer = layer_from_dict(ld)
            except ConfigParse:
                raise
            except (KeyError, TypeError, ValueError) as exc:
                raise ConfigParse(f"layer {i}: {exc}") from exc
            if layer.dim != dim:
                raise ConfigParse(f"layer {i} has dim {layer.dim}, document dim is {dim}")
            layers.append(layer)
        return FlowChain(layers, dim=dim), StandardNormal(dim)
    except ConfigParse:
        raise
    except (KeyError, TypeError, ValueError, AttributeError, DimMismatch, FlowError) as exc:
        raise ConfigParse(f"malformed flow document: {exc}") from exc


def chain_to_dict(chain: FlowChain, base: StandardNormal | None = None) -> dict[str, Any]:
    return chain.to_dict(base)


def loads(text: str) -> tuple[FlowChain, StandardNormal]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigParse(f"invalid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigParse("flow document must be a JSON object")
    return chain_from_dict(doc)


def dumps(chain: FlowChain, base: StandardNormal | None = None) -> str:
    return json.dumps(chain_to_dict(chain, base), indent=2)


def load(path: str | Path) -> tuple[FlowChain, StandardNormal]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParse(f"cannot read {path}: {exc}") from exc
    return loads(text)


def dump(chain: FlowChain, path: str | Path, base: StandardNormal | None = None) -> None:
    Path(path).write_text(dumps(chain, base) + "\n")
