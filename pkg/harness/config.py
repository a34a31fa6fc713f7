"""
Experiment configuration: the command, its parameters, seed and output.

Parameters come from an optional key=value file (read with python-dotenv)
overridden by command-line flags. Each command validates them against its
own pydantic model; unknown keys are rejected.

Author: Agent
Date: 2025-10-18
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Type

from dotenv import dotenv_values
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from estimator import Engine, EstimatorConfig
from lowerbound.models import InducedMode


class Command(str, Enum):
    CALIBRATE = 'calibrate'
    ESTIMATE = 'estimate'
    LB_BUILD_CLASSES = 'lb-build-classes'
    LB_DISAGREEMENT = 'lb-disagreement'
    LB_BUCKETS = 'lb-buckets'
    LB_TV = 'lb-tv'
    LB_DERANDOMIZE = 'lb-derandomize'
    LB_SCALING = 'lb-scaling'
    TAILS = 'tails'
    SELFTEST = 'selftest'


class OutputFormat(str, Enum):
    CSV = 'csv'
    KEYVALUE = 'keyvalue'


def _split_list(v):
    """'1,2,3' -> ['1', '2', '3']; lists pass through."""
    if isinstance(v, str):
        return [part.strip() for part in v.split(',') if part.strip()]
    return v


# ============================================================================
# PARAMETER MODELS
# ============================================================================

class Params(BaseModel):
    model_config = ConfigDict(extra='forbid', populate_by_name=True, frozen=True)


class EstimatorParams(Params):
    n: int
    lambda_: int = Field(default=1, alias='lambda')
    alpha: float
    L: int
    U: int
    delta: float = 0.1
    repetitions: Optional[int] = None
    exact_fallback: bool = False

    @model_validator(mode='after')
    def check_promise(self) -> 'EstimatorParams':
        self.estimator_config()
        return self

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            n=self.n, alpha=self.alpha, L=self.L, U=self.U, delta=self.delta,
            repetitions=self.repetitions, exact_fallback=self.exact_fallback, **{'lambda': self.lambda_},
        )


class CalibrateParams(EstimatorParams):
    pass


class EstimateParams(EstimatorParams):
    d: Optional[int] = Field(default=None, ge=0, description="True defect count for simulated trials")
    trials: int = Field(default=1, ge=1)
    engine: Engine = Engine.COUNTS
    defects: Optional[Path] = Field(default=None, description="Defect-set file; runs one literal estimate")

    @model_validator(mode='after')
    def check_source(self) -> 'EstimateParams':
        if (self.d is None) == (self.defects is None):
            raise ValueError("give exactly one of d (simulated trials) or defects (a defect-set file)")
        return self


class ClassesParams(Params):
    alpha: float
    L: int
    U: int


class DisagreementParams(ClassesParams):
    n: int
    lambda_: int = Field(default=1, alias='lambda')
    k: List[int]
    exact: Optional[bool] = None

    _split_k = field_validator('k', mode='before')(_split_list)


class BucketsParams(DisagreementParams):
    pass


class TVParams(ClassesParams):
    n: int
    lambda_: int = Field(default=1, alias='lambda')
    q: int = Field(default=3, ge=0, description="Queries per random plan")
    p: float = Field(default=0.25, ge=0.0, le=1.0, description="Inclusion probability of the random queries")
    instances: int = Field(default=1, ge=1)
    mode: InducedMode = InducedMode.EXACT
    samples: Optional[int] = Field(default=None, ge=1, description="Monte Carlo samples, or the exact per-class budget")
    plan: Optional[Path] = Field(default=None, description="Plan file used instead of random plans")
    pushforward_samples: int = Field(default=0, ge=0)


class DerandomizeParams(EstimatorParams):
    seeds: int = Field(default=8, ge=1, description="Candidate seeds")
    trials: int = Field(default=2000, ge=1, description="Trials per seed")
    samples: int = Field(default=10_000, ge=2, description="Monte Carlo samples for the winner's advantage")


class ScalingParams(Params):
    k_fraction: float = Field(gt=0.0, le=1.0)
    alpha: float
    L: int
    n: int
    lambda_: int = Field(default=1, alias='lambda')
    U_values: List[int]

    _split_u = field_validator('U_values', mode='before')(_split_list)


class TailsParams(Params):
    n_max: int = Field(default=60, ge=1)
    c_values: List[float] = Field(default_factory=lambda: [1.0, 1.5, 2.0, 5.0, 10.0])
    x_max_exponent: int = Field(default=20, ge=1)

    _split_c = field_validator('c_values', mode='before')(_split_list)


class SelftestParams(Params):
    pass


PARAMS: Dict[Command, Type[Params]] = {
    Command.CALIBRATE: CalibrateParams,
    Command.ESTIMATE: EstimateParams,
    Command.LB_BUILD_CLASSES: ClassesParams,
    Command.LB_DISAGREEMENT: DisagreementParams,
    Command.LB_BUCKETS: BucketsParams,
    Command.LB_TV: TVParams,
    Command.LB_DERANDOMIZE: DerandomizeParams,
    Command.LB_SCALING: ScalingParams,
    Command.TAILS: TailsParams,
    Command.SELFTEST: SelftestParams,
}


# ============================================================================
# EXPERIMENT CONFIG
# ============================================================================

class ExperimentConfig(BaseModel):
    """Everything a run depends on; equal configs give byte-identical output."""
    model_config = ConfigDict(frozen=True)

    command: Command
    parameters: Dict[str, Any] = Field(default_factory=dict, description="Raw key/value parameters")
    master_seed: int = Field(default=0, ge=0, lt=2 ** 64)
    output_path: Optional[Path] = None
    format: OutputFormat = OutputFormat.CSV
    workers: int = Field(default=1, ge=1)
    report: bool = False
    progress: bool = False

    @model_validator(mode='after')
    def check_parameters(self) -> 'ExperimentConfig':
        self.params()
        return self

    def params(self) -> Params:
        """Parameters validated against the command's model."""
        return PARAMS[self.command].model_validate(self.parameters)


def load_config_file(path: Path) -> Dict[str, str]:
    """
    key=value pairs from a config file; '#' starts a comment.

    Raises:
        FileNotFoundError: missing file
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    return {k: v for k, v in dotenv_values(path).items() if v is not None}


def merge_parameters(file_values: Dict[str, Any], flag_values: Dict[str, Any]) -> Dict[str, Any]:
    """Flags override the file."""
    merged = dict(file_values)
    merged.update({k: v for k, v in flag_values.items() if v is not None})
    return merged
