"""Experiment configuration (JSON) and its validation."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .adversaries import STRATEGIES
from .sample_protocols import GENERATORS as PROTOCOL_GENERATORS
from .topology import GENERATORS as TOPOLOGY_GENERATORS
from .topology import Graph, load_edge_list


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TopologyConfig(_Strict):
    kind: Literal["path", "star", "ring", "complete", "erdos-renyi", "edge-list"]
    n: Optional[int] = Field(default=None, ge=2)
    p: Optional[float] = Field(default=None, gt=0, le=1)
    seed: int = 0
    file: Optional[str] = None

    @model_validator(mode="after")
    def _check(self):
        if self.kind == "edge-list":
            if not self.file:
                raise ValueError("edge-list topology needs 'file'")
            if not Path(self.file).is_file():
                raise ValueError(f"topology file {self.file!r} does not exist")
        elif self.n is None:
            raise ValueError(f"{self.kind} topology needs 'n'")
        if self.kind == "erdos-renyi" and self.p is None:
            raise ValueError("erdos-renyi topology needs 'p'")
        return self

    def build(self) -> Graph:
        if self.kind == "edge-list":
            return load_edge_list(self.file)
        if self.kind == "erdos-renyi":
            return TOPOLOGY_GENERATORS[self.kind](self.n, self.p, self.seed)
        return TOPOLOGY_GENERATORS[self.kind](self.n)


class ProtocolConfig(_Strict):
    generator: Optional[str] = None
    params: dict[str, Any] = Field(default_factory=dict)
    file: Optional[str] = None
    dummy_chunks: Optional[int] = Field(default=None, ge=0)
    total_chunks: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if (self.generator is None) == (self.file is None):
            raise ValueError("give exactly one of 'generator' or 'file'")
        if self.generator is not None and self.generator not in PROTOCOL_GENERATORS:
            raise ValueError(f"unknown protocol generator {self.generator!r}; known: {sorted(PROTOCOL_GENERATORS)}")
        if self.file is not None and not Path(self.file).is_file():
            raise ValueError(f"protocol file {self.file!r} does not exist")
        if self.dummy_chunks is not None and self.total_chunks is not None:
            raise ValueError("give at most one of 'dummy_chunks' and 'total_chunks'")
        return self

    def descriptor(self) -> dict[str, Any]:
        if self.file is not None:
            return {"file": self.file}
        return {"generator": self.generator, "params": dict(self.params)}


class AdversaryConfig(_Strict):
    strategy: str = "null"
    params: dict[str, Any] = Field(default_factory=dict)
    seed: int = 0
    kind: Optional[Literal["oblivious-additive", "oblivious-fixing", "adaptive"]] = None

    @field_validator("strategy")
    @classmethod
    def _known(cls, v: str) -> str:
        if v not in STRATEGIES:
            raise ValueError(f"unknown adversary strategy {v!r}; known: {sorted(STRATEGIES)}")
        return v


class InstrumentationConfig(_Strict):
    trace: bool = False
    full_hashing: bool = False
    per_link: bool = True
    alpha: float = Field(default=128.0, gt=0)
    constants: dict[str, float] = Field(default_factory=dict)

    @field_validator("constants")
    @classmethod
    def _names(cls, v: dict[str, float]) -> dict[str, float]:
        bad = sorted(set(v) - {f"C{i}" for i in range(1, 8)})
        if bad:
            raise ValueError(f"unknown potential constants {bad}; expected C1..C7")
        return v


class ExperimentConfig(_Strict):
    variant: Literal["A", "B", "C"]
    topology: TopologyConfig
    protocol: ProtocolConfig
    epsilon: float = Field(default=0.0, ge=0)
    adversary: AdversaryConfig = Field(default_factory=AdversaryConfig)
    trials: int = Field(default=1, ge=1)
    base_seed: int = 0
    output: Optional[str] = None
    iterations: Optional[int] = Field(default=None, ge=1)
    hash_bits: Optional[int] = Field(default=None, ge=1)
    inner_hash_bits: Optional[int] = Field(default=None, ge=1)
    instrumentation: InstrumentationConfig = Field(default_factory=InstrumentationConfig)


def _format_errors(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        where = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{where}: {err['msg']}")
    return "; ".join(lines)


def validate_config(raw: str | dict) -> ExperimentConfig:
    """Parse and validate a config; errors name the offending field path."""
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_errors(exc)) from None


def load_config(path: str | Path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file {str(p)!r} does not exist")
    return validate_config(p.read_text())


def with_param(cfg: ExperimentConfig, dotted: str, value: Any) -> ExperimentConfig:
    """A copy of ``cfg`` with the field at ``dotted`` (e.g. ``adversary.params.count``) replaced."""
    raw = cfg.model_dump()
    node = raw
    keys = dotted.split(".")
    for key in keys[:-1]:
        if not isinstance(node, dict) or key not in node:
            raise ConfigError(f"no config field {dotted!r}")
        node = node[key]
    if not isinstance(node, dict):
        raise ConfigError(f"no config field {dotted!r}")
    node[keys[-1]] = value
    return validate_config(raw)
