"""Configuration management for divas."""

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigError
from .models import GOLDEN_XI, ShrinkerKind

# Load environment variables from .env file
load_dotenv()


class Settings(BaseSettings):
    """Process-level settings read from DIVAS_* environment variables."""

    log_level: str = Field(default="INFO", description="Logging level for the src logger")
    n_jobs: int = Field(default=1, description="Global cap on bootstrap workers")
    solver: str = Field(default="CLARABEL", description="cvxpy solver for the CCP subproblems")
    output_dir: str = Field(default="divas_out", description="Default artifact directory")

    model_config = SettingsConfigDict(
        env_prefix="DIVAS_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )


# Global settings instance
try:
    settings = Settings()
except ValidationError as e:
    import logging

    logging.getLogger(__name__).warning("Could not load settings from environment: %s", e)
    settings = Settings.model_construct()


class BlockSource(BaseModel):
    """Where one block lives and how to preprocess it."""

    model_config = ConfigDict(extra="forbid")

    path: str
    name: Optional[str] = None
    trait_centered: bool = False
    object_centered: bool = False
    logit_transform: bool = False

    @property
    def label(self) -> str:
        return self.name or Path(self.path).stem


class CCPConfig(BaseModel):
    """Penalty convex-concave procedure schedule."""

    model_config = ConfigDict(extra="forbid")

    tau0: float = Field(default=100.0, gt=0)
    mu: float = Field(default=1.05, ge=1.0)
    tau_max: float = Field(default=1e5, gt=0)
    max_iter: int = Field(default=40, ge=1)
    eps_slack: float = Field(default=1e-8, ge=0)
    eps_angle: float = Field(default=0.05, ge=0)
    tol: float = Field(default=1e-6, gt=0)

    @model_validator(mode="after")
    def _tau_order(self) -> "CCPConfig":
        if self.tau_max < self.tau0:
            raise ValueError("tau_max must be at least tau0")
        return self


class RunConfig(BaseModel):
    """Every tunable of one pipeline run."""

    model_config = ConfigDict(extra="forbid")

    blocks: List[BlockSource] = Field(..., min_length=1)
    xi: float = Field(default=GOLDEN_XI, gt=0, le=0.5)
    bootstrap_M: int = Field(default=400, ge=50)
    bound_quantile: float = Field(default=0.95, gt=0, lt=1)
    theta0_quantile: float = Field(default=0.05, gt=0, lt=1)
    theta2_quantile: float = Field(default=0.95, gt=0, lt=1)
    ccp: CCPConfig = Field(default_factory=CCPConfig)
    shrinker: ShrinkerKind = ShrinkerKind.OPTIMAL
    seed: int = 0
    output_dir: str = Field(default_factory=lambda: settings.output_dir)
    emit_plots: bool = True
    desk_scale: bool = Field(default=False, description="Truncated SVDs inside the bootstrap")
    n_jobs: Optional[int] = None
    solver: Optional[str] = None
    qq_traces: int = Field(default=100, ge=2)
    stratified_imputation: bool = False
    redraw_noise: bool = False

    @field_validator("blocks")
    @classmethod
    def _unique_names(cls, blocks: List[BlockSource]) -> List[BlockSource]:
        labels = [b.label for b in blocks]
        if len(set(labels)) != len(labels):
            raise ValueError(f"block names must be unique, got {labels}")
        return blocks

    @property
    def resolved_n_jobs(self) -> int:
        return self.n_jobs if self.n_jobs is not None else settings.n_jobs

    @property
    def resolved_solver(self) -> str:
        return self.solver or settings.solver

    def echo(self) -> Dict[str, Any]:
        """Config with every default applied, as written into the report."""
        echo = self.model_dump(mode="json")
        echo["n_jobs"] = self.resolved_n_jobs
        echo["solver"] = self.resolved_solver
        return echo


def load_run_config(path: str, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Load a TOML run file, resolve block paths against its folder and validate."""
    config_path = Path(path)
    try:
        with config_path.open("rb") as f:
            raw = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {config_path}")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Config file {config_path} is not valid TOML: {e}")

    if isinstance(raw.get("output_dir"), str) and not Path(raw["output_dir"]).is_absolute():
        raw["output_dir"] = str((config_path.parent / raw["output_dir"]).resolve())

    for key, value in (overrides or {}).items():
        if value is not None:
            raw[key] = value

    for block in raw.get("blocks", []) if isinstance(raw.get("blocks"), list) else []:
        if isinstance(block, dict) and "path" in block and not Path(block["path"]).is_absolute():
            block["path"] = str((config_path.parent / block["path"]).resolve())

    try:
        return RunConfig.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(f"Invalid config {config_path}: {e}", details={"errors": e.errors(include_url=False)})
