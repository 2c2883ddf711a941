import math

import numpy as np
import pytest

from tcdl.dual.superreplication_price import compute_x0
from tcdl.errors import IndeterminateError, InputError
from tcdl.harness.conjugacy_check import conjugacy_check, default_x_grid, default_y_grid, x_margin
from tcdl.tcdl_config import Tolerances

Y_GRID = [0.1, 0.3, 1.0, 3.0, 10.0]


@pytest.fixture
def down_loss_report(down_loss, log):
    return conjugacy_check(
        model=down_loss,
        utility=log,
        y_grid=Y_GRID,
        derivative_points=[1.0],
        restarts=2,
        seed=3,
    )


def test_grids():
    assert default_x_grid(x0=0.25) == [0.75, 1.25, 2.25]

    grid = default_y_grid()
    assert len(grid) == 41
    assert grid[0] == pytest.approx(1e-3)
    assert grid[20] == pytest.approx(1.0)
    assert grid[-1] == pytest.approx(1e3)


def test_report_passes(down_loss, down_loss_report):
    report = down_loss_report

    assert report.failures() == []
    assert report.passed
    assert report.x0 == pytest.approx(compute_x0(model=down_loss))
    assert [record.status for record in report.records] == ["ok", "ok", "ok"]
    for record in report.records:
        assert abs(record.gap) <= 1e-5 * (1.0 + abs(record.u))
        assert record.marginal == pytest.approx(record.yhat, rel=1e-3)
    names = {check.name for check in report.checks}
    assert {
        "strong-duality",
        "weak-duality",
        "recovery-attainable",
        "recovery-optimality",
        "slackness",
        "marginal",
        "conjugacy",
        "lower-bound",
        "derivative",
        "u-nondecreasing",
        "u-concave",
        "v-convex",
        "below-x0-certificate",
        "rae",
        "singular-mass",
        "uniqueness",
    } <= names


def test_report_serialises_with_aliases(down_loss_report):
    payload = down_loss_report.model_dump(by_alias=True)

    assert payload["lambda"] == 0.1
    assert payload["passed"] is True
    assert len(payload["v_values"]) == len(Y_GRID)


def test_capital_below_x0_is_marked(friction, log):
    report = conjugacy_check(
        model=friction,
        utility=log,
        x_grid=[1.0, -0.5, 2.0],
        y_grid=Y_GRID,
        derivative_points=[1.0],
        restarts=0,
    )

    assert report.x_grid == [-0.5, 1.0, 2.0]
    below = report.records[0]
    assert below.status == "below-x0"
    assert below.u == -math.inf
    assert math.isnan(report.marginals[0])
    assert report.passed


def test_tight_tolerances_fail(friction, log):
    report = conjugacy_check(
        model=friction,
        utility=log,
        x_grid=[1.0, 2.0],
        y_grid=Y_GRID,
        derivative_points=[1.0],
        restarts=0,
        tolerances=Tolerances(marginal=1e-15),
    )

    assert not report.passed
    assert {check.name for check in report.failures()} == {"marginal"}


def test_threads_do_not_change_the_report(friction, sqrt):
    kwargs = dict(
        model=friction,
        utility=sqrt,
        x_grid=[0.5, 1.0, 2.0],
        y_grid=Y_GRID,
        derivative_points=[1.0],
        restarts=1,
    )
    serial = conjugacy_check(**kwargs)
    threaded = conjugacy_check(**kwargs, jobs=3)

    assert threaded.x_grid == serial.x_grid
    np.testing.assert_allclose(threaded.u_values, serial.u_values)
    assert threaded.passed == serial.passed


def test_capital_near_x0_is_skipped(down_loss, log):
    x0 = compute_x0(model=down_loss)
    near = x0 + 0.01 * (1.0 + abs(x0))
    report = conjugacy_check(
        model=down_loss,
        utility=log,
        x_grid=[near, x0 + 1.0],
        y_grid=Y_GRID,
        derivative_points=[1.0],
        restarts=0,
    )

    assert x_margin(x0=x0) == pytest.approx(0.05 * (1.0 + abs(x0)))
    assert [record.status for record in report.records] == ["near-x0", "ok"]
    assert math.isnan(report.records[0].u)
    (margin,) = [check for check in report.checks if check.name == "x-margin"]
    assert margin.passed and not margin.fatal
    assert report.passed


def _fail(**kwargs):
    raise IndeterminateError("no progress")


@pytest.mark.parametrize(
    "stage, target",
    [
        ("interior-point", "strict_interior_point"),
        ("dual-grid", "dual_grid"),
    ],
)
def test_failed_stage_aborts_the_report(monkeypatch, friction, log, stage, target):
    monkeypatch.setattr(f"tcdl.harness.conjugacy_check.{target}", _fail)
    report = conjugacy_check(model=friction, utility=log, x_grid=[1.0, 2.0], y_grid=Y_GRID, restarts=0)

    assert report.aborted == "indeterminate"
    assert not report.passed
    assert [(check.name, check.location) for check in report.failures()] == [("stage", stage)]
    assert "IndeterminateError: no progress" in report.failures()[0].detail
    assert [record.status for record in report.records] == ["failed", "failed"]


def test_failed_x0_is_an_input_error(monkeypatch, friction, log):
    def reject(**kwargs):
        raise InputError("bad market")

    monkeypatch.setattr("tcdl.harness.conjugacy_check.compute_x0", reject)
    report = conjugacy_check(model=friction, utility=log, x_grid=[1.0], y_grid=Y_GRID, restarts=0)

    assert report.aborted == "input-error"
    assert math.isnan(report.x0)
    assert [check.location for check in report.failures()] == ["x0"]
