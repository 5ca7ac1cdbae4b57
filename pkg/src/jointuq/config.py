"""Experiment configuration: JSON documents validated against a fixed schema.

An experiment names a data source, a training configuration, an optional
fold protocol and an optional ensemble size. Named presets ship with the
package under ``presets/``.
"""

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional

import jsonschema

from .data import Dataset, SharpLayout, gen_sharp, gen_smooth, load_csv
from .errors import ConfigError
from .training import TrainConfig

_POS_INT = {"type": "integer", "minimum": 1}
_HIDDEN = {"type": "array", "items": _POS_INT}

SCHEMA: Dict[str, Any] = {
    "type": "object",
    "additionalProperties": False,
    "required": ["dataset", "train"],
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "dataset": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["smooth", "sharp", "csv"]},
                "n": _POS_INT,
                "seed": {"type": "integer"},
                "noisy_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "strips": {"type": "array", "items": {"type": "array", "items": {"type": "number"},
                                                      "minItems": 2, "maxItems": 2}},
                "sigmas": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0}},
                "path": {"type": "string"},
                "target": {"type": ["string", "integer"]},
            },
        },
        "train": {
            "type": "object",
            "additionalProperties": False,
            "required": ["loss", "epochs", "minibatch", "learning_rate"],
            "properties": {
                "loss": {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["variant", "lambda", "regressor_loss"],
                    "properties": {
                        "variant": {"enum": ["sigmoid", "softplus"]},
                        "lambda": {"type": "number", "exclusiveMinimum": 0},
                        "regressor_loss": {"enum": ["mse", "mae"]},
                    },
                },
                "epochs": {"type": "integer", "minimum": 0},
                "minibatch": _POS_INT,
                "learning_rate": {"type": "number", "exclusiveMinimum": 0},
                "momentum": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "dropout": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
                "regressor_hidden": _HIDDEN,
                "quantifier_hidden": _HIDDEN,
                "activation": {"enum": ["linear", "tanh", "relu", "sigmoid", "softplus"]},
                "normalize": {"type": "boolean"},
                "method": {"enum": ["joint", "ml", "standard", "posthoc"]},
            },
        },
        "folds": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "count": _POS_INT,
                "train_fraction": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                "seed": {"type": "integer"},
            },
        },
        "ensemble": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"k": _POS_INT, "base_seed": {"type": "integer"}},
        },
        "output_dir": {"type": "string"},
    },
}

_VALIDATOR = jsonschema.Draft7Validator(SCHEMA)


def resolve_data_path(path, base_dir: Optional[Path] = None) -> Path:
    """Relative paths are tried against the cwd, then ``base_dir``, then the bundled datasets."""
    path = Path(path)
    if path.is_absolute() or path.exists():
        return path
    for root in (base_dir, resources.files("jointuq") / "datasets"):
        if root is not None and (Path(str(root)) / path).exists():
            return Path(str(root)) / path
    return path


@dataclass
class DatasetSource:
    kind: str
    n: int = 1000
    seed: int = 0
    noisy_fraction: float = 0.8
    strips: Optional[List[List[float]]] = None
    sigmas: Optional[List[float]] = None
    path: Optional[str] = None
    target: Any = -1

    def layout(self) -> SharpLayout:
        base = SharpLayout()
        strips = tuple(tuple(s) for s in self.strips) if self.strips else base.strips
        sigmas = tuple(self.sigmas) if self.sigmas else base.sigmas
        if len(strips) != len(sigmas):
            raise ConfigError("strips and sigmas differ in length", "dataset.sigmas")
        return SharpLayout(strips, sigmas, base.strip_mean)

    def load(self, base_dir: Optional[Path] = None) -> Dataset:
        if self.kind == "smooth":
            return gen_smooth(self.n, self.seed)
        if self.kind == "sharp":
            return gen_sharp(self.n, self.noisy_fraction, self.seed, self.layout())
        if not self.path:
            raise ConfigError("csv data source needs a path", "dataset.path")
        return load_csv(resolve_data_path(self.path, base_dir), self.target)


@dataclass
class FoldSpec:
    count: int = 10
    train_fraction: float = 0.95
    seed: int = 0


@dataclass
class EnsembleSpec:
    k: int = 5
    base_seed: int = 0


@dataclass
class ExperimentConfig:
    dataset: DatasetSource
    train: TrainConfig
    folds: FoldSpec = field(default_factory=FoldSpec)
    ensemble: EnsembleSpec = field(default_factory=EnsembleSpec)
    output_dir: str = "out"
    name: str = ""
    description: str = ""
    base_dir: Optional[Path] = None

    def to_dict(self) -> Dict[str, Any]:
        ds = {k: v for k, v in vars(self.dataset).items() if v is not None}
        return {
            "name": self.name,
            "description": self.description,
            "dataset": ds,
            "train": self.train.to_dict(),
            "folds": vars(self.folds).copy(),
            "ensemble": vars(self.ensemble).copy(),
            "output_dir": self.output_dir,
        }


def _path_of(error) -> str:
    parts = [str(p) for p in error.absolute_path]
    if error.validator == "required":
        missing = error.message.split("'")[1] if "'" in error.message else ""
        parts.append(missing)
    elif error.validator == "additionalProperties":
        extra = error.message.split("'")[1] if "'" in error.message else ""
        parts.append(extra)
    return ".".join(p for p in parts if p)


def validate(doc: Dict[str, Any]) -> None:
    """Raise :class:`ConfigError` for the first schema violation, naming the field path."""
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        err = errors[0]
        raise ConfigError(err.message, _path_of(err) or "<root>")


def from_dict(doc: Dict[str, Any], base_dir: Optional[Path] = None) -> ExperimentConfig:
    validate(doc)
    train = dict(doc["train"])
    try:
        train_cfg = TrainConfig.from_dict(train)
    except ValueError as exc:
        raise ConfigError(str(exc), "train") from None
    return ExperimentConfig(
        dataset=DatasetSource(**doc["dataset"]),
        train=train_cfg,
        folds=FoldSpec(**doc.get("folds", {})),
        ensemble=EnsembleSpec(**doc.get("ensemble", {})),
        output_dir=doc.get("output_dir", "out"),
        name=doc.get("name", ""),
        description=doc.get("description", ""),
        base_dir=base_dir,
    )


def preset_names() -> List[str]:
    root = resources.files("jointuq") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_preset_doc(name: str) -> Dict[str, Any]:
    res = resources.files("jointuq") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}", "preset")
    return json.loads(res.read_text(encoding="utf-8"))


def load(source: str) -> ExperimentConfig:
    """Load a config from a JSON file path, or a preset by name."""
    path = Path(source)
    if path.suffix == ".json" or path.exists():
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}", str(path)) from None
        return from_dict(doc, path.resolve().parent)
    return from_dict(load_preset_doc(source))
