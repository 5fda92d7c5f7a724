"""Pipeline configuration: JSON in, dataclasses out."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

import jsonschema

from .burgers import FomConfig


@dataclass(frozen=True)
class TrigParams:
    A0: float = 70.0
    sigma: float = 12.0
    N: int = 100


@dataclass(frozen=True)
class HatParams:
    heights: tuple[float, ...] = (0.8, 0.9, 1.0, 1.1, 1.2)
    sigma: float = 1.5


@dataclass(frozen=True)
class PipelineConfig:
    fom: FomConfig = field(default_factory=FomConfig)
    generator: str = "trig"
    trig: TrigParams = field(default_factory=TrigParams)
    hat: HatParams = field(default_factory=HatParams)
    n_train: int = 60
    n_test: int = 40
    K_list: tuple[int, ...] = (1, 2, 3)
    energy_ratio: float = 0.97
    restarts: int = 5
    max_iter: int = 50
    master_seed: int = 0
    # advanced: {"K": [d_1, ..., d_K]} per-cluster dimension overrides
    dims_override: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.generator not in ("trig", "hat"):
            raise ValueError("generator must be 'trig' or 'hat'")
        if not self.K_list or min(self.K_list) < 1:
            raise ValueError("K values must be >= 1")
        if self.n_train < 2 * max(self.K_list):
            raise ValueError("need n_train >= 2 * max(K_list)")
        if self.n_test < 1:
            raise ValueError("need n_test >= 1")
        if not 0 < self.energy_ratio <= 1:
            raise ValueError("energy_ratio must lie in (0, 1]")

    def with_seed(self, seed: int | None) -> "PipelineConfig":
        return self if seed is None else replace(self, master_seed=int(seed))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["K_list"] = list(self.K_list)
        d["hat"]["heights"] = list(self.hat.heights)
        d["dims_override"] = {str(k): list(v) for k, v in self.dims_override.items()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def dims_for(self, K: int, shared_d: int) -> list[int]:
        return [int(v) for v in self.dims_override.get(K, [shared_d] * K)]

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        jsonschema.validate(d, load_schema("config"))
        d = dict(d)
        kw = {}
        if "fom" in d:
            kw["fom"] = FomConfig(**d.pop("fom"))
        if "trig" in d:
            kw["trig"] = TrigParams(**d.pop("trig"))
        if "hat" in d:
            h = dict(d.pop("hat"))
            if "heights" in h:
                h["heights"] = tuple(h["heights"])
            kw["hat"] = HatParams(**h)
        if "K_list" in d:
            kw["K_list"] = tuple(d.pop("K_list"))
        if "dims_override" in d:
            kw["dims_override"] = {int(k): tuple(v) for k, v in d.pop("dims_override").items()}
        return cls(**kw, **d)

    @classmethod
    def load(cls, path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def load_schema(name: str) -> dict:
    text = resources.files("cpodnb.schemas").joinpath(f"{name}.schema.json").read_text()
    return json.loads(text)
