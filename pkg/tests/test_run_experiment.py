import math

import numpy as np
import pandas as pd
import pytest
from orjson import loads

from tcdl.errors import IndeterminateError
from tcdl.harness.run_experiment import (
    CHECKS_FILE,
    config_hash,
    json_ready,
    REPORT_FILE,
    run_experiment,
    U_CURVE_FILE,
    V_CURVE_FILE,
)
from tcdl.market.market_model import load_market, model_hash
from tcdl.tcdl_config import build_experiment_config, PATH_CONFIG_FOLDER

SMALL = {
    "seed": 7,
    "depth": 1,
    "y_grid": [0.1, 1.0, 10.0],
    "derivative_points": [1.0],
    "restarts": 1,
}


@pytest.fixture
def config():
    return build_experiment_config(location=None, override=SMALL)


def test_run_writes_every_file(config, tmp_path):
    run = run_experiment(config=config, output_dir=tmp_path)

    assert run.directory.parent == tmp_path
    assert run.directory.name.startswith(run.report.model_hash[:12] + "-s7-")
    for name in (REPORT_FILE, U_CURVE_FILE, V_CURVE_FILE, CHECKS_FILE):
        assert (run.directory / name).is_file()

    report = loads((run.directory / REPORT_FILE).read_bytes())
    assert report["seed"] == 7
    assert report["lambda"] == 0.1
    assert report["passed"] == run.report.passed

    checks = pd.read_csv(run.directory / CHECKS_FILE)
    assert list(checks.columns) == ["name", "location", "value", "tolerance", "passed", "fatal", "detail"]
    assert len(checks) == len(run.report.checks)

    v_curve = pd.read_csv(run.directory / V_CURVE_FILE)
    assert list(v_curve.columns) == ["y", "v", "v_derivative"]
    assert v_curve["y"].tolist() == pytest.approx([0.1, 1.0, 10.0])

    u_curve = pd.read_csv(run.directory / U_CURVE_FILE)
    assert len(u_curve) == 3
    assert {"x", "status", "u", "yhat", "gap"} <= set(u_curve.columns)


def test_runs_are_reproducible(config, tmp_path):
    first = run_experiment(config=config, output_dir=tmp_path / "a")
    second = run_experiment(config=config.model_copy(update={"jobs": 2}), output_dir=tmp_path / "b")

    assert first.directory.name == second.directory.name
    for name in (REPORT_FILE, U_CURVE_FILE, V_CURVE_FILE, CHECKS_FILE):
        assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()


def test_market_file(tmp_path):
    config = build_experiment_config(
        location=None,
        override={"market": str(PATH_CONFIG_FOLDER / "binomial.json"), "restarts": 0, "y_grid": [0.5, 1.0, 2.0]},
    )
    run = run_experiment(config=config, output_dir=tmp_path)

    assert run.report.seed is None
    assert run.report.model_hash == model_hash(model=load_market(location=PATH_CONFIG_FOLDER / "binomial.json"))
    assert "-file-" in run.directory.name


def test_config_hash(config):
    assert config_hash(config=config) == config_hash(config=config.model_copy(update={"jobs": 4}))
    assert config_hash(config=config) != config_hash(config=config.model_copy(update={"restarts": 2}))


def test_json_ready():
    payload = {"u": (-math.inf, 1.0), "nested": [{"v": math.nan}], "top": np.array([math.inf]), "label": "x"}

    assert json_ready(payload) == {"u": ["-inf", 1.0], "nested": [{"v": "nan"}], "top": ["inf"], "label": "x"}


def test_below_x0_values_are_marked(tmp_path):
    config = build_experiment_config(
        location=None,
        override={
            "market": str(PATH_CONFIG_FOLDER / "binomial.json"),
            "x_grid": [0.5, 1.5],
            "y_grid": [0.5, 1.0, 2.0],
            "restarts": 0,
        },
    )
    run = run_experiment(config=config, output_dir=tmp_path)
    report = loads((run.directory / REPORT_FILE).read_bytes())

    assert report["u_values"][0] == "-inf"
    assert report["marginals"][0] == "nan"
    assert report["records"][0]["status"] == "below-x0"
    assert isinstance(report["u_values"][1], float)


def test_failed_stage_is_written(config, monkeypatch, tmp_path):
    def fail(**kwargs):
        raise IndeterminateError("no progress")

    monkeypatch.setattr("tcdl.harness.conjugacy_check.strict_interior_point", fail)
    run = run_experiment(config=config, output_dir=tmp_path)

    assert run.report.aborted == "indeterminate"
    assert loads((run.directory / REPORT_FILE).read_bytes())["aborted"] == "indeterminate"
    checks = pd.read_csv(run.directory / CHECKS_FILE)
    stage = checks[checks["name"] == "stage"]
    assert stage["location"].tolist() == ["interior-point"]
    assert not stage["passed"].any()
