import os
from pathlib import Path

from orjson import loads
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from tcdl.utility.utility_spec import parse_utility

__all__ = [
    "build_experiment_config",
    "ExperimentConfig",
    "OUTPUT_DIR_ENV",
    "PATH_CONFIG_FILE",
    "PATH_CONFIG_FOLDER",
    "PATH_OUTPUT_FOLDER",
    "PATH_PROJECT_FOLDER",
    "resolve_output_dir",
    "Tolerances",
]

PATH_PROJECT_FOLDER = (Path(__file__) / ".." / "..").resolve()
PATH_CONFIG_FOLDER = PATH_PROJECT_FOLDER / "config"
PATH_CONFIG_FILE = PATH_CONFIG_FOLDER / "experiment.json"
PATH_OUTPUT_FOLDER = Path("tcdl_output")
OUTPUT_DIR_ENV = "TCDL_OUTPUT_DIR"


class Tolerances(BaseModel):
    model_config = ConfigDict(extra="forbid")

    strong_gap: float = Field(default=1e-5, gt=0.0, description="|u - (v(yhat) + x yhat)| / (1 + |u|).")
    weak_duality: float = Field(default=1e-6, gt=0.0)
    conjugacy: float = Field(default=1e-5, gt=0.0)
    slackness: float = Field(default=1e-6, gt=0.0)
    recovery: float = Field(default=1e-6, gt=0.0)
    derivative: float = Field(default=1e-4, gt=0.0)
    x0_slope: float = Field(default=1e-2, gt=0.0)
    marginal: float = Field(default=1e-3, gt=0.0)
    grid_shape: float = Field(default=1e-7, gt=0.0)
    uniqueness: float = Field(default=1e-6, gt=0.0)


class ExperimentConfig(BaseModel):
    """
    Example:
    {
        "seed": 42,
        "depth": 3,
        "branching": 2,
        "lambda": 0.1,
        "rho": 0.2,
        "utility": "log"
    }
    """

    model_config = ConfigDict(
        populate_by_name=True,
        extra="forbid",
    )

    market: Path | None = Field(default=None, description="Market spec file.")
    seed: int | None = Field(default=None, description="Random instance seed.")
    depth: int = Field(default=2, ge=0, le=5)
    branching: int = Field(default=2, ge=2, le=3)
    lambda_: float = Field(default=0.1, alias="lambda", ge=0.0, lt=1.0)
    rho: float = Field(default=0.2, ge=0.0)
    utility: str = Field(default="log", description="'log' or 'power:<alpha>'.")
    x_grid: list[float] | None = Field(default=None, description="Default x0 + {0.5, 1, 2}.")
    y_grid: list[float] | None = Field(default=None, description="Default 41 log-spaced points in [1e-3, 1e3].")
    derivative_points: list[float] = Field(default_factory=lambda: [0.1, 1.0, 10.0])
    restarts: int = Field(default=5, ge=0, description="Random interior starts for the uniqueness check.")
    tolerances: Tolerances = Field(default_factory=Tolerances)
    solver_tol: float = Field(default=1e-8, gt=0.0)
    jobs: int = Field(default=1, ge=1)

    @field_validator("utility")
    @classmethod
    def validate_utility(cls, utility: str) -> str:
        parse_utility(text=utility)

        return utility

    @field_validator("y_grid", "derivative_points")
    @classmethod
    def validate_positive_grid(cls, grid: list[float] | None) -> list[float] | None:
        if grid is not None and any(not y > 0.0 for y in grid):
            raise ValueError("y values must be positive")

        return grid

    @model_validator(mode="after")
    def validate_market_source(self) -> "ExperimentConfig":
        if (self.market is None) == (self.seed is None):
            raise ValueError("exactly one of market and seed is required")

        return self


def build_experiment_config(
    location: Path | None = PATH_CONFIG_FILE,
    override: dict | None = None,
) -> ExperimentConfig:
    if not location and not override:
        raise AttributeError("You need to provide at least one argument.")

    config: dict = {}

    if location:
        config.update(loads(location.read_bytes()))
        market = config.get("market")
        if market is not None and not Path(market).is_absolute():
            config["market"] = str(location.parent / market)

    if override:
        config.update(override)

    return ExperimentConfig.model_validate(config)


def resolve_output_dir(flag: Path | None = None) -> Path:
    "--output-dir, else $TCDL_OUTPUT_DIR, else ./tcdl_output."
    if flag is not None:
        return flag

    environment = os.environ.get(OUTPUT_DIR_ENV)
    if environment:
        return Path(environment)

    return PATH_OUTPUT_FOLDER


if __name__ == "__main__":
    experiment_config = build_experiment_config(override={"seed": 42, "depth": 3})

    print("result:", experiment_config)
