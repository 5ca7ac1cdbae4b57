"""JSON documents for networks, trained pairs and ensembles.

Floats are written with ``repr`` precision, so a save/load round trip
reproduces every weight bit for bit.
"""

import json
from typing import Any, Dict

import numpy as np

from .data import Normalizer
from .ensemble import EnsembleKind, EnsembleModel
from .errors import ConfigError
from .losses import JointLossSpec, LossKind
from .nn import LayerSpec, Mlp
from .training import TrainedPair, TrainedRegressor

PAIR_SCHEMA = "jointuq.pair/1"
REGRESSOR_SCHEMA = "jointuq.regressor/1"
ENSEMBLE_SCHEMA = "jointuq.ensemble/1"


def mlp_to_dict(net: Mlp) -> Dict[str, Any]:
    return {
        "layers": [spec.to_dict() for spec in net.layers],
        "weights": [w.tolist() for w in net.weights],
        "biases": [b.tolist() for b in net.biases],
        "seed": net.rng_seed,
    }


def mlp_from_dict(d) -> Mlp:
    layers = [LayerSpec(int(s["in_dim"]), int(s["out_dim"]), s["activation"]) for s in d["layers"]]
    weights = [np.ascontiguousarray(np.asarray(w, dtype=np.float64).reshape(s.out_dim, s.in_dim))
               for w, s in zip(d["weights"], layers)]
    biases = [np.asarray(b, dtype=np.float64).reshape(s.out_dim) for b, s in zip(d["biases"], layers)]
    if len(weights) != len(layers) or len(biases) != len(layers):
        raise ConfigError("weight lists do not match the layer list", "weights")
    return Mlp(layers, weights, biases, int(d.get("seed", 0)))


def pair_to_dict(pair: TrainedPair) -> Dict[str, Any]:
    return {
        "schema": PAIR_SCHEMA,
        "method": pair.method,
        "loss": pair.loss_spec.to_dict(),
        "normalizer": pair.normalizer.to_dict(),
        "regressor": mlp_to_dict(pair.regressor),
        "quantifier": mlp_to_dict(pair.quantifier),
        "history": [float(h) for h in pair.history],
    }


def pair_from_dict(d) -> TrainedPair:
    _expect(d, PAIR_SCHEMA)
    return TrainedPair(
        regressor=mlp_from_dict(d["regressor"]),
        quantifier=mlp_from_dict(d["quantifier"]),
        loss_spec=JointLossSpec.from_dict(d["loss"]),
        normalizer=Normalizer.from_dict(d["normalizer"]),
        history=[float(h) for h in d.get("history", [])],
        method=d.get("method", "joint"),
    )


def regressor_to_dict(model: TrainedRegressor) -> Dict[str, Any]:
    return {
        "schema": REGRESSOR_SCHEMA,
        "loss_kind": model.loss_kind.value,
        "normalizer": model.normalizer.to_dict(),
        "regressor": mlp_to_dict(model.regressor),
        "history": [float(h) for h in model.history],
    }


def regressor_from_dict(d) -> TrainedRegressor:
    _expect(d, REGRESSOR_SCHEMA)
    return TrainedRegressor(mlp_from_dict(d["regressor"]), Normalizer.from_dict(d["normalizer"]),
                            LossKind(d["loss_kind"]), [float(h) for h in d.get("history", [])])


def ensemble_to_dict(model: EnsembleModel) -> Dict[str, Any]:
    return {"schema": ENSEMBLE_SCHEMA, "kind": model.kind.value,
            "members": [pair_to_dict(m) for m in model.members]}


def ensemble_from_dict(d) -> EnsembleModel:
    _expect(d, ENSEMBLE_SCHEMA)
    return EnsembleModel([pair_from_dict(m) for m in d["members"]], EnsembleKind(d["kind"]))


_LOADERS = {PAIR_SCHEMA: pair_from_dict, REGRESSOR_SCHEMA: regressor_from_dict, ENSEMBLE_SCHEMA: ensemble_from_dict}
_DUMPERS = ((TrainedPair, pair_to_dict), (TrainedRegressor, regressor_to_dict), (EnsembleModel, ensemble_to_dict))


def _expect(d, schema):
    found = d.get("schema") if isinstance(d, dict) else None
    if found != schema:
        raise ConfigError(f"expected schema {schema!r}, found {found!r}", "schema")


def to_dict(model) -> Dict[str, Any]:
    for cls, dump in _DUMPERS:
        if isinstance(model, cls):
            return dump(model)
    raise TypeError(f"cannot serialise {type(model).__name__}")


def from_dict(d):
    """Dispatch on the document's schema tag."""
    loader = _LOADERS.get(d.get("schema") if isinstance(d, dict) else None)
    if loader is None:
        raise ConfigError(f"unknown model schema {d.get('schema') if isinstance(d, dict) else None!r}", "schema")
    return loader(d)


def save(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_dict(model), fh)
        fh.write("\n")


def load(path):
    with open(path, encoding="utf-8") as fh:
        return from_dict(json.load(fh))
