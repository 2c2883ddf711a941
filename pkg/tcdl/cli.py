import argparse
import logging
import os
import sys
from logging import getLogger, Logger
from pathlib import Path
from typing import Literal, Sequence

import pandas as pd
from orjson import dumps, JSONDecodeError, OPT_INDENT_2, OPT_SERIALIZE_NUMPY, OPT_SORT_KEYS
from pydantic import BaseModel, ConfigDict, Field, model_validator, ValidationError

from tcdl.dual.solve_dual import solve_dual
from tcdl.dual.superreplication_price import compute_x0, superreplication_price
from tcdl.errors import BelowX0Error, InputError, TcdlError
from tcdl.harness.random_instance import random_instance
from tcdl.harness.run_experiment import FLOAT_FORMAT, json_ready, run_experiment
from tcdl.market.market_model import load_market, MarketModel, model_hash
from tcdl.primal.attainability import load_payoff
from tcdl.primal.solve_primal import solve_primal
from tcdl.tcdl_config import build_experiment_config, ExperimentConfig
from tcdl.utility.utility_spec import parse_utility, UtilitySpec

__all__ = [
    "CliConfig",
    "CommandType",
    "EXIT_CHECK_FAILED",
    "EXIT_INDETERMINATE",
    "EXIT_INPUT_ERROR",
    "EXIT_OK",
    "main",
    "parse_args",
    "run",
]

CommandType = Literal["price", "primal", "dual", "x0", "report", "selftest"]

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT_ERROR = 2
EXIT_INDETERMINATE = 3

MARKET_COMMANDS = ("price", "primal", "dual", "x0")
SELFTEST_DEPTH = 2
SELFTEST_BRANCHING = 2
SELFTEST_LAMBDA = 0.1
SELFTEST_RHO = 0.2


class CliConfig(BaseModel):
    model_config = ConfigDict(
        populate_by_name=True,
        extra="forbid",
    )

    command: CommandType
    market: Path | None = Field(default=None)
    seed: int | None = Field(default=None)
    depth: int = Field(default=2, ge=0, le=5)
    branching: int = Field(default=2, ge=2, le=3)
    lambda_: float = Field(default=0.1, alias="lambda", ge=0.0, lt=1.0)
    rho: float = Field(default=0.2, ge=0.0)
    payoff: Path | None = Field(default=None)
    leaf_csv: Path | None = Field(default=None, description="Per-leaf table of price, primal, dual and x0.")
    utility: str = Field(default="log")
    x: float | None = Field(default=None)
    y: float | None = Field(default=None)
    experiment: ExperimentConfig | None = Field(default=None, description="Resolved config of `report`.")
    seeds: tuple[int, int] | None = Field(default=None)
    jobs: int = Field(default=1, ge=1)
    output_dir: Path | None = Field(default=None)
    min_turnover: bool = Field(default=False)
    log_level: str = Field(default="WARNING")

    @property
    def utility_spec(self) -> UtilitySpec:
        return parse_utility(text=self.utility)

    @model_validator(mode="after")
    def validate_command(self) -> "CliConfig":
        parse_utility(text=self.utility)

        if self.command in MARKET_COMMANDS and (self.market is None) == (self.seed is None):
            raise ValueError("exactly one of --market and --seed is required")
        if self.command == "price" and self.payoff is None:
            raise ValueError("price needs --payoff")
        if self.command == "primal" and self.x is None:
            raise ValueError("primal needs --x")
        if self.command == "dual" and self.y is None:
            raise ValueError("dual needs --y")
        if self.command == "report" and self.experiment is None:
            raise ValueError("report needs a config")
        if self.command == "selftest" and self.seeds is None:
            raise ValueError("selftest needs --seeds")
        if self.seeds is not None and self.seeds[0] > self.seeds[1]:
            raise ValueError(f"empty seed range {self.seeds[0]}..{self.seeds[1]}")

        return self


def _seed_range(value: str) -> tuple[int, int]:
    first, separator, last = value.partition("..")
    try:
        if not separator:
            return int(first), int(first)
        return int(first), int(last)
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"seed range must look like a..b, got {value!r}") from e


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcdl",
        description="Utility maximisation under proportional transaction costs on finite scenario trees.",
    )
    parser.add_argument(
        "--log-level",
        default="WARNING",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Diagnostics on stderr.",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    market = argparse.ArgumentParser(add_help=False)
    market.add_argument("--market", type=Path, help="Market spec JSON file.")
    market.add_argument("--seed", type=int, help="Draw a random market with this seed.")
    market.add_argument("--depth", type=int, default=2)
    market.add_argument("--branching", type=int, default=2)
    market.add_argument("--lambda", dest="lambda_", type=float, default=0.1)
    market.add_argument("--rho", type=float, default=0.2)
    market.add_argument("--leaf-csv", type=Path, help="Also write the per-leaf table here.")

    utility = argparse.ArgumentParser(add_help=False)
    utility.add_argument("--utility", default="log", help="'log' or 'power:<alpha>'.")

    jobs = argparse.ArgumentParser(add_help=False)
    jobs.add_argument("--jobs", type=int, default=None, help="Worker threads, default all cores.")
    jobs.add_argument("--output-dir", type=Path, default=None, help="Overrides $TCDL_OUTPUT_DIR.")

    price = commands.add_parser("price", parents=[market], help="Superreplication price of a payoff.")
    price.add_argument("--payoff", type=Path, required=True, help="JSON object leaf id -> amount.")

    primal = commands.add_parser("primal", parents=[market, utility], help="Solve the primal problem at x.")
    primal.add_argument("--x", type=float, required=True)
    primal.add_argument("--min-turnover", action="store_true", help="Report the minimal-turnover strategy.")

    dual = commands.add_parser("dual", parents=[market, utility], help="Solve the dual problem at y.")
    dual.add_argument("--y", type=float, required=True)

    commands.add_parser("x0", parents=[market], help="Capital threshold x0.")

    report = commands.add_parser("report", parents=[jobs], help="Run every duality check from a config file.")
    report.add_argument("--config", type=Path, required=True)
    report.add_argument("--market", type=Path, help="Market spec JSON file, conflicts with a seed in the config.")
    report.add_argument("--seed", type=int)

    selftest = commands.add_parser("selftest", parents=[utility, jobs], help="Report on a range of random markets.")
    selftest.add_argument("--seeds", type=_seed_range, default=(1, 5), help="a..b, inclusive.")

    return parser


def parse_args(argv: Sequence[str] | None = None) -> CliConfig:
    parser = _build_parser()
    args = parser.parse_args(argv)

    values = {key: value for key, value in vars(args).items() if value is not None}
    values.pop("config", None)

    if args.command == "report":
        # flags join the config file; a second market source fails validation
        override: dict = {}
        if args.market is not None:
            override["market"] = str(args.market.resolve())
        if args.seed is not None:
            override["seed"] = args.seed
        if args.jobs is not None:
            override["jobs"] = args.jobs
        try:
            values["experiment"] = build_experiment_config(location=args.config, override=override)
        except (ValidationError, OSError, JSONDecodeError) as e:
            parser.error(f"invalid config {args.config}: {e}")
        values.pop("market", None)
        values.pop("seed", None)

    if args.command in ("report", "selftest") and args.jobs is None:
        values["jobs"] = os.cpu_count() or 1

    try:
        return CliConfig.model_validate(values)
    except ValidationError as e:
        parser.error(str(e))


def _market(config: CliConfig, logger: Logger) -> MarketModel:
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


def _emit(payload: dict) -> None:
    sys.stdout.write(dumps(json_ready(payload), option=OPT_INDENT_2 | OPT_SERIALIZE_NUMPY | OPT_SORT_KEYS).decode())
    sys.stdout.write("\n")


def _leaf_table(config: CliConfig, model: MarketModel, **columns: Sequence[float]) -> list[dict]:
    "Per-leaf rows (leaf, probability, S_T, e_T, extra columns), also written to --leaf-csv."
    tree = model.tree
    table = pd.DataFrame(
        {
            "leaf": tree.leaf_ids,
            "probability": tree.leaf_prob,
            "price": [model.ask_price[leaf] for leaf in tree.leaves],
            "endowment": model.endowment,
            **{name: list(values) for name, values in columns.items()},
        }
    )
    if config.leaf_csv is not None:
        table.to_csv(config.leaf_csv, index=False, float_format=FLOAT_FORMAT)

    return table.to_dict(orient="records")


def _price(config: CliConfig, logger: Logger) -> int:
    model = _market(config=config, logger=logger)
    assert config.payoff is not None
    g = load_payoff(model=model, location=config.payoff)

    _emit(
        {
            "model_hash": model_hash(model=model),
            "price": superreplication_price(model=model, g=g, logger=logger),
            "leaves": _leaf_table(config=config, model=model, payoff=g.g),
        }
    )

    return EXIT_OK


def _primal(config: CliConfig, logger: Logger) -> int:
    model = _market(config=config, logger=logger)
    assert config.x is not None
    solution = solve_primal(
        model=model,
        utility=config.utility_spec,
        x=config.x,
        min_turnover=config.min_turnover,
        logger=logger,
    )

    payload: dict = {
        "model_hash": model_hash(model=model),
        "status": solution.status,
        "x": solution.x,
        "x0": solution.x0,
        "value": solution.value,
        "marginal": solution.marginal,
        "kkt_residual": solution.kkt_residual,
    }
    if solution.ghat is not None:
        payload["leaves"] = _leaf_table(
            config=config,
            model=model,
            ghat=solution.ghat.g,
            wealth=solution.wealth(model=model),
        )
    if solution.strategy is not None:
        strategy = solution.strategy
        payload["strategy"] = {
            node_id: {"phi0": phi0, "phi1": phi1, "buy": buy, "sell": sell}
            for node_id, phi0, phi1, buy, sell in zip(
                model.tree.node_ids,
                strategy.phi0,
                strategy.phi1,
                strategy.buy,
                strategy.sell,
            )
        }
    _emit(payload)

    if solution.status == "infeasible-below-x0":
        print(f"x={solution.x} does not exceed x0={solution.x0}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    solution.raise_for_status()

    return EXIT_OK


def _dual(config: CliConfig, logger: Logger) -> int:
    model = _market(config=config, logger=logger)
    assert config.y is not None
    solution = solve_dual(
        model=model,
        utility=config.utility_spec,
        y=config.y,
        logger=logger,
    ).raise_for_status()

    _emit(
        {
            "model_hash": model_hash(model=model),
            "status": solution.status,
            "y": solution.y,
            "value": solution.value,
            "derivative": solution.derivative,
            "singular_mass": solution.singular_mass,
            "kkt_residual": solution.kkt_residual,
            "leaves": _leaf_table(config=config, model=model, density=solution.leaf_density(model=model)),
            "shadow_price": dict(zip(model.tree.node_ids, solution.optimizer.shadow_price())),
        }
    )

    return EXIT_OK


def _x0(config: CliConfig, logger: Logger) -> int:
    model = _market(config=config, logger=logger)
    _emit(
        {
            "model_hash": model_hash(model=model),
            "x0": compute_x0(model=model, logger=logger),
            "leaves": _leaf_table(config=config, model=model),
        }
    )

    return EXIT_OK


def _report(config: CliConfig, logger: Logger) -> int:
    assert config.experiment is not None
    run = run_experiment(config=config.experiment, output_dir=config.output_dir, logger=logger)

    for failure in run.report.failures():
        print(f"FAILED {failure.name} at {failure.location}: {failure.value:.6g}", file=sys.stderr)
    print(run.directory)

    if run.report.aborted == "input-error":
        return EXIT_INPUT_ERROR
    if run.report.aborted == "indeterminate":
        return EXIT_INDETERMINATE

    return EXIT_OK if run.report.passed else EXIT_CHECK_FAILED


def _selftest(config: CliConfig, logger: Logger) -> int:
    assert config.seeds is not None
    first, last = config.seeds

    passed = 0
    for seed in range(first, last + 1):
        experiment = ExperimentConfig(
            seed=seed,
            depth=SELFTEST_DEPTH,
            branching=SELFTEST_BRANCHING,
            lambda_=SELFTEST_LAMBDA,
            rho=SELFTEST_RHO,
            utility=config.utility,
            jobs=config.jobs,
        )
        run = run_experiment(config=experiment, output_dir=config.output_dir, logger=logger)
        passed += run.report.passed
        print(f"seed {seed}: {'passed' if run.report.passed else 'FAILED'} {run.directory}")

    total = last - first + 1
    print(f"{passed}/{total} passed")

    return EXIT_OK if passed == total else EXIT_CHECK_FAILED


def main(config: CliConfig, logger: Logger | None = None) -> int:
    logger = logger or getLogger(__name__)
    commands = {
        "price": _price,
        "primal": _primal,
        "dual": _dual,
        "x0": _x0,
        "report": _report,
        "selftest": _selftest,
    }

    try:
        return commands[config.command](config, logger)
    except (ValidationError, OSError, JSONDecodeError, InputError) as e:
        logger.error("<TCDL:CLI>:INPUT_ERROR:%s", e)
        print(f"input error: {e}", file=sys.stderr)
        return EXIT_INPUT_ERROR
    except BelowX0Error as e:
        print(f"below x0: {e}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except TcdlError as e:
        logger.error("<TCDL:CLI>:INDETERMINATE:%s", e)
        print(f"solver indeterminate: {e}", file=sys.stderr)
        return EXIT_INDETERMINATE


def run() -> None:
    config = parse_args(sys.argv[1:])
    logging.basicConfig(level=config.log_level, format="%(levelname)s %(name)s %(message)s")

    sys.exit(main(config=config))


if __name__ == "__main__":
    run()
