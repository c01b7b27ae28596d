"""
epinet - Configuration
Modelos pydantic para cada entrada JSON, presets con nombre y ajustes de entorno

Modelos:
--------
- DegreeSpec / InfectiousPeriodSpec: uniones discriminadas por `family`
- ParametersSpec: (degree, infectious_period, beta) -> EpidemicParameters
- BranchingSpec: opciones de los experimentos de ramificación
- ExperimentConfig: un experimento ejecutado por el harness
- Settings: valores leídos del entorno (.env en la raíz del repositorio)
"""

import json
import logging
import os
from pathlib import Path
from typing import Annotated, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from analytics import EpidemicParameters
from distributions import (
    ConstantPeriod,
    ExponentialCutoffPeriod,
    ExponentialPeriod,
    GammaPeriod,
    InfinitePeriod,
    ParetoPeriod,
    PoissonDegree,
    PowerLawDegree,
    RegularDegree,
    TableDegree,
)

logger = logging.getLogger(__name__)

ENV_PATH = Path(__file__).parent.parent / ".env"


# =============================================================================
# LEYES DE GRADO
# =============================================================================

class RegularDegreeSpec(BaseModel):
    family: Literal["regular"]
    d: int = Field(ge=1)

    def build(self):
        return RegularDegree(self.d)


class PoissonDegreeSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    family: Literal["poisson"]
    lam: float = Field(gt=0, alias="lambda")

    def build(self):
        return PoissonDegree(self.lam)


class TableDegreeSpec(BaseModel):
    family: Literal["table"]
    pmf: Dict[int, float]
    normalize: bool = False

    def build(self):
        if self.normalize:
            return TableDegree.from_weights(self.pmf)
        return TableDegree(tuple(self.pmf.items()))


class PowerLawDegreeSpec(BaseModel):
    family: Literal["power-law"]
    exponent: float = Field(gt=2)
    k_min: int = Field(1, ge=1)
    k_max: Optional[int] = None

    def build(self):
        return PowerLawDegree(self.exponent, self.k_min, self.k_max)


DegreeSpec = Annotated[
    Union[RegularDegreeSpec, PoissonDegreeSpec, TableDegreeSpec, PowerLawDegreeSpec],
    Field(discriminator="family"),
]


# =============================================================================
# PERÍODOS INFECCIOSOS
# =============================================================================

class ExponentialPeriodSpec(BaseModel):
    family: Literal["exponential"]
    rate: float = Field(gt=0)

    def build(self):
        return ExponentialPeriod(self.rate)


class ConstantPeriodSpec(BaseModel):
    family: Literal["constant"]
    length: float = Field(ge=0)

    def build(self):
        return ConstantPeriod(self.length)


class ExponentialCutoffPeriodSpec(BaseModel):
    family: Literal["exponential-cutoff"]
    rate: float = Field(gt=0)
    cutoff: float = Field(gt=0)

    def build(self):
        return ExponentialCutoffPeriod(self.rate, self.cutoff)


class GammaPeriodSpec(BaseModel):
    family: Literal["gamma"]
    shape: float = Field(gt=0)
    rate: float = Field(gt=0)

    def build(self):
        return GammaPeriod(self.shape, self.rate)


class InfinitePeriodSpec(BaseModel):
    family: Literal["infinite"]

    def build(self):
        return InfinitePeriod()


class ParetoPeriodSpec(BaseModel):
    family: Literal["pareto"]
    shape: float = Field(gt=0)
    scale: float = Field(gt=0)

    def build(self):
        return ParetoPeriod(self.shape, self.scale)


InfectiousPeriodSpec = Annotated[
    Union[ExponentialPeriodSpec, ConstantPeriodSpec, ExponentialCutoffPeriodSpec,
          GammaPeriodSpec, InfinitePeriodSpec, ParetoPeriodSpec],
    Field(discriminator="family"),
]


class ParametersSpec(BaseModel):
    degree: DegreeSpec
    infectious_period: InfectiousPeriodSpec
    beta: float = Field(gt=0)

    model_config = {
        "json_schema_extra": {
            "example": {
                "degree": {"family": "regular", "d": 4},
                "infectious_period": {"family": "exponential", "rate": 1.0},
                "beta": 1.0,
            }
        }
    }

    def build(self) -> EpidemicParameters:
        return EpidemicParameters(self.degree.build(), self.infectious_period.build(), self.beta)


PRESETS: Dict[str, dict] = {
    "markov-regular4": {
        "degree": {"family": "regular", "d": 4},
        "infectious_period": {"family": "exponential", "rate": 1.0},
        "beta": 1.0,
    },
    "cutoff-regular4": {
        "degree": {"family": "regular", "d": 4},
        "infectious_period": {"family": "constant", "length": 1.0},
        "beta": 1.0,
    },
    # M = 2/3 < 1, so |alpha*| = 2 exceeds the recovery rate
    "markov-regular3-fast": {
        "degree": {"family": "regular", "d": 3},
        "infectious_period": {"family": "exponential", "rate": 1.0},
        "beta": 3.0,
    },
    "example3": {
        "degree": {"family": "table", "pmf": {1: 100 / 201, 2: 100 / 201, 100: 1 / 201},
                   "normalize": True},
        "infectious_period": {"family": "exponential-cutoff", "rate": 0.01, "cutoff": 1000.0},
        "beta": 0.99,
    },
    "poisson-constant": {
        "degree": {"family": "poisson", "lambda": 4.0},
        "infectious_period": {"family": "constant", "length": 1.0},
        "beta": 1.0,
    },
    "power-law-2.5": {
        "degree": {"family": "power-law", "exponent": 2.5, "k_min": 2},
        "infectious_period": {"family": "exponential", "rate": 1.0},
        "beta": 1.0,
    },
    "power-law-3.5": {
        "degree": {"family": "power-law", "exponent": 3.5, "k_min": 2},
        "infectious_period": {"family": "exponential", "rate": 1.0},
        "beta": 1.0,
    },
}


def preset_parameters(name: str) -> ParametersSpec:
    if name not in PRESETS:
        raise ValueError(f"Unknown preset: {name}. Must be one of {sorted(PRESETS)}")
    return ParametersSpec.model_validate(PRESETS[name])


# =============================================================================
# CONFIGURACIÓN DE EXPERIMENTOS
# =============================================================================

ExperimentKind = Literal["analyze", "simulate", "montecarlo", "scaling",
                         "vaccinate-sweep", "branching", "examples"]


class BranchingSpec(BaseModel):
    phase: Literal["early", "final"] = "early"
    mode: Literal["hitting", "extinction"] = "hitting"
    count: Literal["alive", "total"] = "alive"
    ks: List[int] = Field(default_factory=lambda: [100, 1000, 10000])
    population_cap: int = Field(10_000_000, ge=1)

    @field_validator("ks")
    @classmethod
    def _positive_ks(cls, value):
        if not value or any(k < 1 for k in value):
            raise ValueError(f"ks must be a non-empty list of positive integers, got {value}")
        return sorted(set(value))


class ExperimentConfig(BaseModel):
    kind: ExperimentKind
    parameters: Optional[ParametersSpec] = None
    preset: Optional[str] = None
    n: List[int] = Field(default_factory=lambda: [1000])
    replicates: int = Field(1, ge=1)
    majors_required: int = Field(50, ge=1)
    attempt_cap: int = Field(10_000, ge=1)
    base_seed: int = Field(0, ge=0)
    output_dir: str = "results"
    target: Literal["T_star", "T_dagger"] = "T_dagger"
    coverages: List[float] = Field(default_factory=lambda: [1.0])
    initial_infected: int = Field(1, ge=1)
    gamma_levels: List[float] = Field(default_factory=list)
    record_events: bool = False
    record_tree: bool = False
    check_invariants: bool = False
    branching: BranchingSpec = Field(default_factory=BranchingSpec)
    jobs: int = Field(1, ge=1)

    model_config = {
        "json_schema_extra": {
            "example": {
                "kind": "scaling",
                "preset": "cutoff-regular4",
                "n": [1000, 10000, 100000],
                "majors_required": 200,
                "target": "T_star",
                "base_seed": 0,
            }
        }
    }

    @field_validator("n")
    @classmethod
    def _population_sizes(cls, value):
        if not value or any(n < 2 for n in value):
            raise ValueError(f"every population size must be at least 2, got {value}")
        return value

    @field_validator("coverages")
    @classmethod
    def _coverage_range(cls, value):
        if any(not (0.0 < c <= 1.0) for c in value):
            raise ValueError(f"coverages must lie in (0, 1], got {value}")
        return value

    @field_validator("gamma_levels")
    @classmethod
    def _gamma_range(cls, value):
        if any(not (0.0 < g < 1.0) for g in value):
            raise ValueError(f"gamma levels must lie in (0, 1), got {value}")
        return value

    @model_validator(mode="after")
    def _model_given(self):
        if self.kind != "examples" and self.parameters is None and self.preset is None:
            raise ValueError(f"experiment '{self.kind}' needs either 'parameters' or 'preset'")
        if self.preset is not None and self.preset not in PRESETS:
            raise ValueError(f"Unknown preset: {self.preset}. Must be one of {sorted(PRESETS)}")
        return self

    def resolved_parameters(self) -> ParametersSpec:
        if self.parameters is not None:
            return self.parameters
        return preset_parameters(self.preset)

    def build_parameters(self) -> EpidemicParameters:
        return self.resolved_parameters().build()

    def replicate_seed(self, index: int) -> int:
        return self.base_seed + index


def load_experiment_config(path: Optional[str], kind: str, seed: Optional[int] = None,
                           jobs: Optional[int] = None, out: Optional[str] = None) -> ExperimentConfig:
    """
    Read a config file for subcommand `kind`.

    A file without a `kind` key whose top level looks like a parameter set
    (degree / infectious_period / beta) is accepted as the `parameters` of
    the experiment. Command-line values override the file.
    """
    raw: dict = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        logger.info(f"Loaded config from {path}")
    if "degree" in raw and "parameters" not in raw:
        raw = {"parameters": {k: raw.pop(k) for k in ("degree", "infectious_period", "beta") if k in raw},
               **raw}
    raw["kind"] = kind
    if seed is not None:
        raw["base_seed"] = seed
    if jobs is not None:
        raw["jobs"] = jobs
    if out is not None:
        raw["output_dir"] = out
    return ExperimentConfig.model_validate(raw)


# =============================================================================
# VARIABLES DE ENTORNO
# =============================================================================

class Settings(BaseModel):
    log_level: str = "INFO"
    log_file: Optional[str] = None
    default_jobs: int = 1
    debug_invariants: bool = False
    run_slow: bool = False


def _flag(value: Optional[str]) -> bool:
    return (value or "").strip().lower() in ("1", "true", "yes", "on")


def load_settings(env_path: Optional[Path] = None) -> Settings:
    """Environment settings, after loading the repository .env file if present."""
    load_dotenv(dotenv_path=env_path or ENV_PATH)
    return Settings(
        log_level=os.getenv("EPINET_LOG_LEVEL", "INFO").upper(),
        log_file=os.getenv("EPINET_LOG_FILE") or None,
        default_jobs=int(os.getenv("EPINET_JOBS", "1")),
        debug_invariants=_flag(os.getenv("EPINET_DEBUG_INVARIANTS")),
        run_slow=_flag(os.getenv("EPINET_RUN_SLOW")),
    )
