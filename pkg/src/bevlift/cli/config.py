"""One flat, serialisable run configuration shared by every command.

Values come from dataclass defaults, then an optional TOML/JSON file, then
explicit command-line flags.  The resolved result is written next to the outputs.
"""
from __future__ import annotations

import json
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ValidationError(ValueError):
    """Bad configuration or input; the CLI maps it to exit code 2."""


@dataclass
class RunConfig:
    command: str = ""
    seed: int | None = None
    out: str = ""
    dataset: str = ""
    checkpoint: str = ""
    # data generation
    count: int = 200
    variant: str = "Synth"
    white_target: float = 0.2
    fpv_res: int = 64
    bev_res: int = 48
    views_per_scene: int = 40
    workers: int = 1
    audit: bool = True
    # model and training
    model_variant: str = "base+aux"
    d: int = 32
    heads: int = 4
    enc_layers: int = 2
    dec_layers: int = 2
    ff_hidden: int = 64
    alpha: float = 0.5
    epochs: int = 30
    batch_size: int = 16
    lr: float = 1e-3
    decay: float = 0.9
    patience: int = 3
    max_train: int | None = None
    max_val: int | None = None
    resume: bool = False
    # evaluation and baseline
    split: str = "test"
    modality: str = "semantic"
    depth_mode: str = "exact"
    sigma: float = 0.08
    limit: int | None = None
    panels: int = 4
    # theorem check
    scenes: int = 20

    def to_dict(self) -> dict:
        return asdict(self)

    def write(self, directory) -> Path:
        p = Path(directory) / "run_config.json"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True))
        return p


FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def read_config_file(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"config file {path} does not exist")
    text = path.read_text()
    try:
        d = tomllib.loads(text) if path.suffix.lower() == ".toml" else json.loads(text)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as e:
        raise ValidationError(f"cannot parse {path}: {e}") from e
    d = {k.replace("-", "_"): v for k, v in d.items()}
    unknown = sorted(set(d) - set(FIELD_TYPES))
    if unknown:
        raise ValidationError(f"unknown config keys {unknown}")
    return d


def resolve(command: str, file_values: dict, flag_values: dict) -> RunConfig:
    """Defaults < file < flags; ``None`` flags mean 'not given'."""
    merged = {**file_values, **{k: v for k, v in flag_values.items() if v is not None}}
    merged["command"] = command
    try:
        return RunConfig(**merged)
    except TypeError as e:
        raise ValidationError(str(e)) from e
