from pathlib import Path

import pandas as pd
import pytest
from orjson import dumps, loads

from tcdl.cli import _seed_range, EXIT_CHECK_FAILED, EXIT_INDETERMINATE, EXIT_INPUT_ERROR, EXIT_OK, main, parse_args
from tcdl.errors import IndeterminateError
from tcdl.tcdl_config import PATH_CONFIG_FOLDER

BINOMIAL = PATH_CONFIG_FOLDER / "binomial.json"
CALL = PATH_CONFIG_FOLDER / "call.json"
BINOMIAL_X0 = 1.0 - 1.6 / 6.0


def run_cli(argv: list[str], capsys: pytest.CaptureFixture[str]) -> tuple[int, str]:
    code = main(config=parse_args(argv))

    return code, capsys.readouterr().out


def test_seed_range() -> None:
    assert _seed_range("3..4") == (3, 4)
    assert _seed_range("7") == (7, 7)


@pytest.mark.parametrize(
    "argv",
    [
        ["price", "--payoff", str(CALL)],
        ["price", "--market", str(BINOMIAL), "--seed", "1", "--payoff", str(CALL)],
        ["primal", "--market", str(BINOMIAL)],
        ["primal", "--market", str(BINOMIAL), "--x", "1", "--utility", "power:1.5"],
        ["dual", "--seed", "1", "--y", "1", "--lambda", "1.0"],
        ["x0", "--seed", "1", "--branching", "1"],
        ["selftest", "--seeds", "4..2"],
        ["selftest", "--seeds", "a..b"],
        ["report", "--config", "does-not-exist.json"],
        ["report", "--config", str(PATH_CONFIG_FOLDER / "experiment.json"), "--market", str(BINOMIAL)],
    ],
)
def test_invalid_arguments_exit_with_usage_error(argv: list[str]) -> None:
    with pytest.raises(SystemExit) as exc_info:
        parse_args(argv)

    assert exc_info.value.code == 2


def test_selftest_defaults() -> None:
    config = parse_args(["selftest"])

    assert config.seeds == (1, 5)
    assert config.jobs >= 1
    assert config.utility == "log"


def test_price(capsys: pytest.CaptureFixture[str]) -> None:
    code, out = run_cli(["price", "--market", str(BINOMIAL), "--payoff", str(CALL)], capsys)
    payload = loads(out)

    assert code == EXIT_OK
    assert payload["price"] == pytest.approx(11.0 / 9.0, abs=1e-9)
    assert [row["payoff"] for row in payload["leaves"]] == [3.0, 0.0]
    assert [row["leaf"] for row in payload["leaves"]] == ["0.0", "0.1"]


def test_x0(capsys: pytest.CaptureFixture[str]) -> None:
    code, out = run_cli(["x0", "--market", str(BINOMIAL)], capsys)

    assert code == EXIT_OK
    assert loads(out)["x0"] == pytest.approx(BINOMIAL_X0, abs=1e-9)


def test_primal_below_x0(capsys: pytest.CaptureFixture[str]) -> None:
    code, out = run_cli(["primal", "--market", str(BINOMIAL), "--x", "0.5"], capsys)
    payload = loads(out)

    assert code == EXIT_CHECK_FAILED
    assert payload["status"] == "infeasible-below-x0"
    assert "leaves" not in payload


def test_primal_writes_leaf_csv(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    leaf_csv = tmp_path / "leaves.csv"
    code, out = run_cli(
        ["primal", "--market", str(BINOMIAL), "--x", "2", "--min-turnover", "--leaf-csv", str(leaf_csv)],
        capsys,
    )
    payload = loads(out)
    table = pd.read_csv(leaf_csv, dtype={"leaf": str})

    assert code == EXIT_OK
    assert payload["status"] == "optimal"
    assert set(payload["strategy"]) == {"0", "0.0", "0.1"}
    assert list(table.columns) == ["leaf", "probability", "price", "endowment", "ghat", "wealth"]
    assert list(table["leaf"]) == ["0.0", "0.1"]
    assert (table["wealth"] > 0.0).all()


def test_dual(capsys: pytest.CaptureFixture[str]) -> None:
    code, out = run_cli(["dual", "--market", str(BINOMIAL), "--y", "1"], capsys)
    payload = loads(out)

    assert code == EXIT_OK
    assert payload["y"] == 1.0
    for node_id in ("0", "0.0", "0.1"):
        price = {"0": 4.0, "0.0": 8.0, "0.1": 2.0}[node_id]
        assert 0.9 * price - 1e-6 <= payload["shadow_price"][node_id] <= price + 1e-6
    assert sum(row["probability"] * row["density"] for row in payload["leaves"]) == pytest.approx(1.0, abs=1e-6)


def test_dual_rejects_nonpositive_y(capsys: pytest.CaptureFixture[str]) -> None:
    code, _ = run_cli(["dual", "--market", str(BINOMIAL), "--y", "-1"], capsys)

    assert code == EXIT_INPUT_ERROR


def test_missing_market_file(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    code, _ = run_cli(["x0", "--market", str(tmp_path / "missing.json")], capsys)

    assert code == EXIT_INPUT_ERROR


def test_payoff_on_unknown_leaf(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    payoff = tmp_path / "payoff.json"
    payoff.write_bytes(dumps({"0.0": 1.0, "0.7": 1.0}))

    code, _ = run_cli(["price", "--market", str(BINOMIAL), "--payoff", str(payoff)], capsys)

    assert code == EXIT_INPUT_ERROR


def test_random_market_is_reproducible(capsys: pytest.CaptureFixture[str]) -> None:
    argv = ["x0", "--seed", "11", "--depth", "2", "--lambda", "0.2"]
    _, first = run_cli(argv, capsys)
    _, second = run_cli(argv, capsys)

    assert first == second
    assert abs(loads(first)["x0"]) <= 0.2 + 1e-9


def test_report(capsys: pytest.CaptureFixture[str], tmp_path: Path) -> None:
    (tmp_path / "configs").mkdir()
    config = tmp_path / "configs" / "small.json"
    config.write_bytes(
        dumps(
            {
                "market": "../binomial.json",
                "y_grid": [0.1, 1.0, 10.0],
                "derivative_points": [1.0],
                "restarts": 1,
            }
        )
    )
    (tmp_path / "binomial.json").write_bytes(BINOMIAL.read_bytes())

    code, out = run_cli(
        ["report", "--config", str(config), "--jobs", "1", "--output-dir", str(tmp_path / "out")],
        capsys,
    )
    directory = Path(out.strip())

    assert code in (EXIT_OK, EXIT_CHECK_FAILED)
    assert directory.parent == tmp_path / "out"
    assert (directory / "report.json").exists()
    assert (directory / "checks.csv").exists()


def test_report_with_a_failed_stage_is_indeterminate(
    capsys: pytest.CaptureFixture[str],
    monkeypatch: pytest.MonkeyPatch,
    tmp_path: Path,
) -> None:
    def fail(**kwargs):
        raise IndeterminateError("no progress")

    config = tmp_path / "small.json"
    config.write_bytes(dumps({"seed": 3, "depth": 1, "y_grid": [0.1, 1.0, 10.0], "restarts": 0}))

    monkeypatch.setattr("tcdl.harness.conjugacy_check.dual_grid", fail)
    code, out = run_cli(
        ["report", "--config", str(config), "--jobs", "1", "--output-dir", str(tmp_path / "out")],
        capsys,
    )

    assert code == EXIT_INDETERMINATE
    assert (Path(out.strip()) / "checks.csv").exists()
