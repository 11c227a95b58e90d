"""
Experiment configuration: the TOML (or JSON) file a batch run is driven by.
"""
import json
import sys
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from src.riskquant.config.settings import settings
from src.riskquant.core.optim import TrainConfig
from src.riskquant.dim.market import MarketConfig
from src.riskquant.exceptions import ConfigError
from src.riskquant.trainers.models import ArchitectureConfig
from src.riskquant.validation.nested import NestedMcConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ExperimentKind(str, Enum):
    TOY_VAR = "toy_var"
    TOY_ES = "toy_es"
    TOY_JOINT = "toy_joint"
    CROSSING = "crossing"
    RATE = "rate"
    TWIN_VALIDATE = "twin_validate"
    ELICIT_CHECK = "elicit_check"
    DIM = "dim"


VAR_METHODS = ("single", "multi1", "multi2", "multi3")
ES_METHODS = ("es_fullnet", "es_frozenlr")
METHODS = VAR_METHODS + ("joint",) + ES_METHODS

_DEFAULT_METHODS: Dict[ExperimentKind, List[str]] = {
    ExperimentKind.TOY_VAR: ["single"],
    ExperimentKind.TOY_ES: ["es_fullnet", "es_frozenlr"],
    ExperimentKind.TOY_JOINT: ["joint", "es_fullnet"],
    ExperimentKind.CROSSING: ["single", "multi1"],
    ExperimentKind.RATE: ["single"],
    ExperimentKind.TWIN_VALIDATE: ["single"],
    ExperimentKind.ELICIT_CHECK: [],
    ExperimentKind.DIM: ["single"],
}

_ALLOWED_METHODS: Dict[ExperimentKind, Tuple[str, ...]] = {
    ExperimentKind.TOY_VAR: VAR_METHODS,
    ExperimentKind.TOY_ES: ES_METHODS,
    ExperimentKind.TOY_JOINT: ("joint",) + ES_METHODS,
    ExperimentKind.CROSSING: VAR_METHODS,
    ExperimentKind.RATE: VAR_METHODS,
    ExperimentKind.TWIN_VALIDATE: VAR_METHODS,
    ExperimentKind.ELICIT_CHECK: (),
    ExperimentKind.DIM: VAR_METHODS,
}


def _open_unit(value: float) -> bool:
    return 0.0 < value < 1.0


class DimSettings(BaseModel):
    """Sizes of the initial margin case study."""

    n_paths: int = Field(default=4096, ge=2, description="Training paths for the backward IM fits")
    n_outer: int = Field(default=256, ge=1, description="Outer states of the nested benchmark")
    benchmark_step: Optional[int] = Field(default=None, ge=0, description="Grid index of the benchmark; mid-horizon if unset")
    warm_start: bool = Field(default=True, description="Initialize each step from the later step's fit")

    model_config = {"frozen": True}


class ExperimentConfig(BaseModel):
    """One batch experiment: what to run, at which sizes, and where to write."""

    experiment: ExperimentKind
    seed: int = Field(default=0, ge=0, lt=2**64, description="Master seed; run r uses derive_run_seed(seed, r)")
    runs: int = Field(default=1, ge=1, description="Independent repetitions")
    dims: List[int] = Field(default_factory=lambda: [5], description="Feature dimensions of the toy model")
    sizes: List[int] = Field(default_factory=lambda: [2**14], description="Training sample sizes")
    n_eval: int = Field(default=2**14, ge=2, description="Held-out rows for accuracy metrics")
    n_twin: int = Field(default=2**14, ge=2, description="Twin rows for a-posteriori validation")
    alphas: List[float] = Field(default_factory=lambda: [0.95], description="Confidence levels evaluated")
    alpha_range: Optional[Tuple[float, float]] = Field(default=None, description="Training range of continuum models")
    crossing_pairs: List[Tuple[float, float]] = Field(default_factory=list, description="(alpha_hi, alpha_lo) pairs")
    methods: Optional[List[str]] = Field(default=None, description="Method tags; experiment default if unset")
    lam: float = Field(default=1.0, ge=0, description="Crossing penalty weight of multi1")
    trunc: Optional[float] = Field(default=None, gt=0, description="Truncation bound of the ES target")
    es_candidate: Literal["learned", "true"] = Field(default="learned", description="VaR fed to the second ES step: the fitted single-alpha model or the closed form")
    standardize_response: bool = Field(default=True, description="Fit on standardized responses")
    elicit_samples: int = Field(default=200_000, ge=100, description="Sample size of the sample-law elicitability checks")
    arch: ArchitectureConfig = Field(default_factory=ArchitectureConfig)
    train: TrainConfig = Field(default_factory=TrainConfig)
    nested: NestedMcConfig = Field(default_factory=NestedMcConfig)
    market: MarketConfig = Field(default_factory=MarketConfig)
    dim: DimSettings = Field(default_factory=DimSettings)
    output_dir: Optional[str] = Field(default=None, description="Artifact directory; <RISKQUANT_OUTPUT_DIR>/<experiment> if unset")

    model_config = {"frozen": True}

    @field_validator("alphas")
    @classmethod
    def _alphas_valid(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("at least one alpha is required")
        for a in v:
            if not _open_unit(a):
                raise ValueError(f"must lie in (0, 1), got {a}")
        return v

    @field_validator("alpha_range")
    @classmethod
    def _range_valid(cls, v):
        if v is not None and not (_open_unit(v[0]) and _open_unit(v[1]) and v[0] < v[1]):
            raise ValueError(f"must satisfy 0 < low < high < 1, got {tuple(v)}")
        return v

    @field_validator("crossing_pairs")
    @classmethod
    def _pairs_valid(cls, v):
        for hi, lo in v:
            if not (_open_unit(hi) and _open_unit(lo) and lo < hi):
                raise ValueError(f"pair must satisfy 0 < alpha_lo < alpha_hi < 1, got ({hi}, {lo})")
        return v

    @field_validator("dims", "sizes")
    @classmethod
    def _positive_ints(cls, v: List[int]) -> List[int]:
        if not v or any(x < 1 for x in v):
            raise ValueError("must be a non-empty list of positive integers")
        return v

    @model_validator(mode="after")
    def _methods_fit_experiment(self) -> "ExperimentConfig":
        allowed = _ALLOWED_METHODS[self.experiment]
        for m in self.methods or []:
            if m not in allowed:
                raise ValueError(f"method '{m}' is not available for {self.experiment.value}; choose from {list(allowed)}")
        continuum = any(m in ("multi1", "multi2") for m in self.resolved_methods)
        if continuum and self.alpha_range is not None:
            lo, hi = self.alpha_range
            if any(not lo <= a <= hi for a in self.alphas):
                raise ValueError("alphas must lie inside alpha_range for continuum methods")
        return self

    @property
    def resolved_methods(self) -> List[str]:
        return list(self.methods) if self.methods is not None else list(_DEFAULT_METHODS[self.experiment])

    @property
    def resolved_output_dir(self) -> str:
        return self.output_dir or str(Path(settings.OUTPUT_DIR) / self.experiment.value)

    def resolved(self) -> Dict[str, Any]:
        """Plain dict with every default filled in; loading it back gives an equal config."""
        data = self.model_dump(mode="json")
        data["methods"] = self.resolved_methods
        data["output_dir"] = self.resolved_output_dir
        return data


def _field_errors(exc: ValidationError) -> Dict[str, str]:
    errors: Dict[str, str] = {}
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        msg = err["msg"]
        if msg.startswith("Value error, "):
            msg = msg[len("Value error, "):]
        errors[loc] = msg
    return errors


def parse_config(data: Dict[str, Any], source: Optional[str] = None) -> ExperimentConfig:
    """
    Validate a raw mapping into an ExperimentConfig.

    Raises:
        ConfigError: With one message per offending field
    """
    try:
        return ExperimentConfig(**data)
    except ValidationError as exc:
        raise ConfigError(_field_errors(exc), source=source) from exc


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load an experiment config from a .toml or .json file.

    Raises:
        ConfigError: If the file is missing, unparsable or invalid
    """
    path = Path(path)
    source = str(path)
    if not path.is_file():
        raise ConfigError({"path": "file not found"}, source=source)
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(path.read_text())
        else:
            with open(path, "rb") as f:
                data = tomllib.load(f)
    except (json.JSONDecodeError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError({"file": f"cannot parse: {exc}"}, source=source) from exc
    if not isinstance(data, dict):
        raise ConfigError({"file": "top level must be a table"}, source=source)
    return parse_config(data, source=source)
