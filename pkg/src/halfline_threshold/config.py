"""Run configuration for the batch driver (YAML or JSON, strict schema)."""

from __future__ import annotations

import json
from pathlib import Path
from typing import List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .potential import (
    FactoredPotential,
    PotentialError,
    boundary_condition_potential,
    local_potential,
    rank_k_potential,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PotentialSpec(_Strict):
    kind: Literal["boundary_alpha", "local", "rank_k", "fixture"]
    alpha: Optional[float] = None
    sites: Optional[List[Tuple[int, float]]] = None
    v_cols: Optional[List[List[float]]] = None
    v_cols_imag: Optional[List[List[float]]] = None
    U: Optional[List[List[float]]] = None
    fixture: Optional[str] = None
    seed: int = 0
    beta: int = Field(10, ge=1)

    @model_validator(mode="after")
    def _required(self):
        need = {"boundary_alpha": ["alpha"], "local": ["sites"], "rank_k": ["v_cols", "U"], "fixture": ["fixture"]}
        missing = [k for k in need[self.kind] if getattr(self, k) is None]
        if missing:
            raise ValueError(f"potential kind {self.kind!r} needs {', '.join(missing)}")
        return self

    def build(self) -> FactoredPotential:
        from .threshold import generate_fixture

        try:
            if self.kind == "boundary_alpha":
                return boundary_condition_potential(self.alpha, self.beta)
            if self.kind == "local":
                return local_potential(self.sites, self.beta)
            if self.kind == "rank_k":
                cols = [np.asarray(c, dtype=complex) for c in self.v_cols]
                if self.v_cols_imag is not None:
                    if len(self.v_cols_imag) != len(cols):
                        raise PotentialError("v_cols_imag must match v_cols")
                    cols = [c + 1j * np.asarray(ci, dtype=float) for c, ci in zip(cols, self.v_cols_imag)]
                return rank_k_potential(cols, np.asarray(self.U, dtype=float), self.beta)
            return generate_fixture(self.fixture, self.seed, self.beta)
        except (PotentialError, ValueError) as exc:
            raise ConfigError(f"invalid potential: {exc}") from exc


class KappaGridSpec(_Strict):
    min: float = Field(gt=0)
    max: float = Field(gt=0)
    points: int = Field(8, ge=5)
    geometric: bool = True

    @model_validator(mode="after")
    def _ordered(self):
        if self.max <= self.min:
            raise ValueError("kappa_grid.max must exceed kappa_grid.min")
        return self

    def values(self) -> np.ndarray:
        """Strictly positive and decreasing."""
        if self.geometric:
            return np.geomspace(self.max, self.min, self.points)
        return np.linspace(self.max, self.min, self.points)


class Tolerances(_Strict):
    tol_kernel: float = Field(1e-8, gt=0)
    tol_eig: float = Field(1e-9, gt=0)
    tol_herm: float = Field(1e-12, gt=0)


class RunConfig(_Strict):
    schema_version: int
    potential: PotentialSpec
    n_lat: int = Field(400, ge=4)
    n_oracle: Optional[int] = None
    order: int = 1
    kappa_grid: Optional[KappaGridSpec] = None
    tolerances: Tolerances = Tolerances()
    output_dir: Optional[str] = None
    report_format: Literal["json", "csv"] = "json"

    @field_validator("schema_version")
    @classmethod
    def _version(cls, v):
        if v != SCHEMA_VERSION:
            raise ValueError(f"unsupported schema_version {v}; expected {SCHEMA_VERSION}")
        return v

    @model_validator(mode="after")
    def _oracle(self):
        if self.n_oracle is None:
            self.n_oracle = 4 * self.n_lat
        if self.n_oracle < self.n_lat:
            raise ValueError("n_oracle must be >= n_lat")
        return self


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text) if path.suffix == ".json" else yaml.safe_load(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return parse_config(data)


def parse_config(data) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from exc
