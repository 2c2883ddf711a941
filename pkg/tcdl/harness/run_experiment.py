from hashlib import sha256
from logging import getLogger, Logger
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from orjson import dumps, OPT_INDENT_2, OPT_SORT_KEYS
from pydantic import BaseModel

from tcdl.harness.conjugacy_check import conjugacy_check, DualityReport
from tcdl.harness.random_instance import random_instance
from tcdl.market.market_model import load_market, MarketModel, model_hash
from tcdl.tcdl_config import ExperimentConfig, resolve_output_dir
from tcdl.utility.utility_spec import parse_utility

__all__ = [
    "config_hash",
    "ExperimentRun",
    "experiment_model",
    "json_ready",
    "report_directory",
    "run_experiment",
    "write_report",
]

FLOAT_FORMAT = "%.12g"
REPORT_FILE = "report.json"
U_CURVE_FILE = "u_curve.csv"
V_CURVE_FILE = "v_curve.csv"
CHECKS_FILE = "checks.csv"


class ExperimentRun(BaseModel):
    report: DualityReport
    directory: Path


def config_hash(config: ExperimentConfig) -> str:
    "Digest of the settings that shape the report; the market path and worker count are left out."
    payload = config.model_dump(mode="json", by_alias=True, exclude={"market", "jobs"})

    return sha256(dumps(payload, option=OPT_SORT_KEYS)).hexdigest()


def experiment_model(config: ExperimentConfig, logger: Logger | None = None) -> MarketModel:
    if config.market is not None:
        return load_market(location=config.market)

    assert config.seed is not None
    return random_instance(
        seed=config.seed,
        depth=config.depth,
        branching=config.branching,
        lambda_=config.lambda_,
        rho=config.rho,
        logger=logger,
    )


def report_directory(report: DualityReport, config: ExperimentConfig, output_dir: Path) -> Path:
    "<model hash 12>-s<seed>-<config hash 8>, or -file- for markets read from disk."
    source = f"s{report.seed}" if report.seed is not None else "file"

    return output_dir / f"{report.model_hash[:12]}-{source}-{config_hash(config=config)[:8]}"


def json_ready(value: Any) -> Any:
    "Non-finite floats become the markers 'inf', '-inf' and 'nan'; orjson would write them as null."
    if isinstance(value, dict):
        return {key: json_ready(item) for key, item in value.items()}
    if isinstance(value, np.ndarray):
        return json_ready(value.tolist())
    if isinstance(value, (list, tuple)):
        return [json_ready(item) for item in value]
    if isinstance(value, float) and not np.isfinite(value):
        return "nan" if np.isnan(value) else ("inf" if value > 0.0 else "-inf")

    return value


def write_report(report: DualityReport, directory: Path) -> None:
    directory.mkdir(parents=True, exist_ok=True)

    (directory / REPORT_FILE).write_bytes(
        dumps(json_ready(report.model_dump(by_alias=True)), option=OPT_INDENT_2 | OPT_SORT_KEYS)
    )

    pd.DataFrame([record.model_dump() for record in report.records]).to_csv(
        directory / U_CURVE_FILE,
        index=False,
        float_format=FLOAT_FORMAT,
    )
    pd.DataFrame(
        {
            "y": report.y_grid,
            "v": report.v_values,
            "v_derivative": report.v_derivatives,
        }
    ).to_csv(directory / V_CURVE_FILE, index=False, float_format=FLOAT_FORMAT)
    pd.DataFrame(
        [check.model_dump() for check in report.checks],
        columns=["name", "location", "value", "tolerance", "passed", "fatal", "detail"],
    ).to_csv(directory / CHECKS_FILE, index=False, float_format=FLOAT_FORMAT)


def run_experiment(
    config: ExperimentConfig,
    output_dir: Path | None = None,
    logger: Logger | None = None,
) -> ExperimentRun:
    """Build the market, run every duality check and write the report files.

    Files: report.json, u_curve.csv, v_curve.csv and checks.csv. Nothing in
    them depends on the clock, so the same config reproduces them byte for byte.
    """

    logger = logger or getLogger(__name__)

    model = experiment_model(config=config, logger=logger)
    report = conjugacy_check(
        model=model,
        utility=parse_utility(text=config.utility),
        x_grid=config.x_grid,
        y_grid=config.y_grid,
        derivative_points=config.derivative_points,
        restarts=config.restarts,
        seed=config.seed,
        tolerances=config.tolerances,
        tol=config.solver_tol,
        jobs=config.jobs,
        logger=logger,
    )

    directory = report_directory(report=report, config=config, output_dir=resolve_output_dir(flag=output_dir))
    write_report(report=report, directory=directory)

    logger.info(
        "<TCDL:HARNESS>:REPORT:%s:PASSED:%s:CHECKS:%s:FAILED:%s",
        directory,
        report.passed,
        len(report.checks),
        len(report.failures()),
    )

    return ExperimentRun(report=report, directory=directory)


if __name__ == "__main__":
    from tcdl.tcdl_config import build_experiment_config

    run = run_experiment(config=build_experiment_config(override={"depth": 1, "restarts": 1}))

    print("result:", run.directory, run.report.passed)
