"""Validated run configuration (JSON files, unknown keys rejected)."""

import hashlib
import json
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class MeshConfig(_Strict):
    n_theta: int = Field(16, ge=8)
    levels: int = Field(1, ge=0)
    band_layers: int = Field(4, ge=1)
    thin_ratio: float = Field(8.0, gt=0)
    radial_grading: float = Field(1.0, gt=0)

    @field_validator("n_theta")
    @classmethod
    def _even(cls, v):
        if v % 2:
            raise ValueError("n_theta must be even")
        return v


class PmlConfig(_Strict):
    R1: float = 2.25
    R2: float = 3.0
    R_tr: float = 3.0
    sigma0: float = Field(2.0, ge=0)
    ramp_degree: int = Field(3, ge=1)


class RhsConfig(_Strict):
    type: Literal["falt", "contrast"] = "falt"
    direction: tuple[float, float] = (1.0, 0.0)
    eta: float = Field(0.1, gt=0)


class ScanConfig(_Strict):
    k_min: float = Field(1.0, gt=0)
    k_max: float = 20.0
    step: float = Field(0.02, gt=0)
    R: float = Field(2.0, gt=0)
    n_i_values: list[float] = [3.0, 1.0 / 3.0]


class ConvergenceConfig(_Strict):
    p_values: list[int] = [1, 2]
    levels: int = Field(4, ge=3)
    first_levels: list[int] = [1, 0]
    sigma0: float = Field(0.5, ge=0)
    R_tr_values: list[float] = [2.5, 2.75, 3.0, 3.25]
    pml_p: int = 3
    pml_level: int = 1
    pml_sigma0: float = 0.1
    pml_R2: float = 2.5
    study: Literal["h", "pml", "both"] = "both"

    @model_validator(mode="after")
    def _aligned(self):
        if len(self.first_levels) != len(self.p_values):
            raise ValueError("first_levels must have one entry per p value")
        if min(self.first_levels, default=0) < 0:
            raise ValueError("first_levels must be non-negative")
        return self


class BetaDecay(_Strict):
    C: float = Field(gt=0)
    epsilon: float = Field(ge=0)
    p: float = Field(ge=0)


class UqConfig(_Strict):
    s: int = Field(2, ge=1)
    budgets: list[int] = [1, 5, 13, 29]
    beta: list[float] | BetaDecay = [0.2, 0.1]
    reference_points: int = Field(16, ge=0)
    k_scaling: bool = True
    n_directions: int = Field(128, ge=4)


class RunConfig(_Strict):
    k: float = Field(5.0, gt=0)
    n_i: float = Field(1.0 / 3.0, gt=0)
    p: int = Field(2, ge=1, le=3)
    lam: float = Field(0.2, gt=0, lt=0.5)
    n_directions: int = Field(256, ge=4)
    mesh: MeshConfig = MeshConfig()
    pml: PmlConfig = PmlConfig()
    rhs: RhsConfig = RhsConfig()
    shape: str | None = None
    scan: ScanConfig = ScanConfig()
    convergence: ConvergenceConfig = ConvergenceConfig()
    uq: UqConfig = UqConfig()
    check_tolerance: float = Field(0.05, gt=0)

    @model_validator(mode="after")
    def _consistent(self):
        if not self.rhs.eta < self.lam:
            raise ValueError("rhs.eta must be smaller than lam")
        if not 2.0 < self.pml.R1 < self.pml.R2:
            raise ValueError("pml radii must satisfy 2 < R1 < R2")
        if self.pml.R_tr <= self.pml.R1:
            raise ValueError("pml.R_tr must exceed pml.R1")
        return self

    def digest(self):
        """Stable hash of the canonical JSON form."""
        text = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def load_config(path=None):
    if path is None:
        return RunConfig()
    with open(path) as fh:
        data = json.load(fh)
    return RunConfig.model_validate(data)
