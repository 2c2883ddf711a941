import math
from logging import getLogger, Logger
from pathlib import Path

import numpy as np
import numpy.typing as npt
from orjson import loads
from pydantic import BaseModel, ConfigDict, computed_field, Field

from tcdl.errors import InputError
from tcdl.market.market_model import MarketModel
from tcdl.primal.trading_strategy import build_strategy, TradingStrategy
from tcdl.solver.linear_program import LinearProgram, solve_lp

__all__ = [
    "is_attainable",
    "load_payoff",
    "payoff_from_mapping",
    "PayoffVector",
    "positivity_feasible",
    "superhedge",
    "SuperhedgeResult",
]


class PayoffVector(BaseModel):
    "Terminal cash position per leaf, in `tree.leaves` order."

    model_config = ConfigDict(frozen=True)

    g: tuple[float, ...]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def lower_bound(self) -> float:
        return min(self.g, default=0.0)

    @property
    def array(self) -> npt.NDArray[np.float64]:
        return np.array(self.g, dtype=float)

    @classmethod
    def from_array(cls, values: npt.NDArray[np.float64]) -> "PayoffVector":
        return cls(g=tuple(float(v) for v in values))


class SuperhedgeResult(BaseModel):
    attainable: bool
    strategy: TradingStrategy | None = Field(default=None)
    surplus: tuple[float, ...] | None = Field(
        default=None,
        description="Terminal cash minus payoff per leaf, >= 0.",
    )


def payoff_from_mapping(model: MarketModel, mapping: dict[str, float]) -> PayoffVector:
    leaf_ids = model.tree.leaf_ids

    unknown = set(mapping) - set(leaf_ids)
    if unknown:
        raise InputError(f"payoff given for non-leaf or unknown nodes {sorted(unknown)}")
    missing = [leaf for leaf in leaf_ids if leaf not in mapping]
    if missing:
        raise InputError(f"payoff missing for leaves {missing}")

    values = [float(mapping[leaf]) for leaf in leaf_ids]
    if not all(math.isfinite(v) for v in values):
        raise InputError("payoff has nonfinite values")

    return PayoffVector(g=tuple(values))


def load_payoff(model: MarketModel, location: Path) -> PayoffVector:
    mapping = loads(location.read_bytes())
    if not isinstance(mapping, dict):
        raise InputError(f"{location} must hold an object leaf-id -> value")

    return payoff_from_mapping(model=model, mapping=mapping)


def _check_length(model: MarketModel, g: PayoffVector) -> None:
    if len(g.g) != model.tree.n_leaves:
        raise InputError(f"payoff has {len(g.g)} entries, expected {model.tree.n_leaves}")


def superhedge(
    model: MarketModel,
    g: PayoffVector,
    x: float,
    logger: Logger | None = None,
) -> SuperhedgeResult:
    """Minimal-turnover self-financing strategy from x whose terminal cash dominates g.

    Variables are the per-node buy and sell quantities; terminal stock is zero.
    """

    logger = logger or getLogger(__name__)
    _check_length(model=model, g=g)

    tree = model.tree
    n = tree.n_nodes
    paths = tree.path_matrix()

    cost = paths * model.ask[None, :]
    proceeds = paths * model.bid[None, :]

    result = solve_lp(
        lp=LinearProgram(
            c=np.ones(2 * n),
            a_ub=np.hstack([cost, -proceeds]),
            b_ub=x - g.array,
            a_eq=np.hstack([paths, -paths]),
            b_eq=np.zeros(tree.n_leaves),
        ),
        logger=logger,
    )
    logger.debug("<TCDL:PRIMAL>:SUPERHEDGE:X:%s:%s", x, result.status)

    if result.status == "infeasible":
        return SuperhedgeResult(attainable=False)
    result.raise_for_status()

    assert result.z is not None
    strategy = build_strategy(
        model=model,
        x=x,
        buy=result.z[:n],
        sell=result.z[n:],
    )
    surplus = strategy.terminal_cash(model=model) - g.array

    return SuperhedgeResult(
        attainable=True,
        strategy=strategy,
        surplus=tuple(float(v) for v in surplus),
    )


def is_attainable(
    model: MarketModel,
    g: PayoffVector,
    x: float,
    logger: Logger | None = None,
) -> bool:
    "g in C(x): some self-financing strategy from x ends with cash >= g and no stock."
    return superhedge(model=model, g=g, x=x, logger=logger).attainable


def positivity_feasible(
    model: MarketModel,
    x: float,
    floor: float,
    logger: Logger | None = None,
) -> bool:
    "Some g in C(0) keeps x + g + e_T >= floor at every leaf."
    g = PayoffVector.from_array(values=floor - model.endowment_array)

    return is_attainable(model=model, g=g, x=x, logger=logger)


if __name__ == "__main__":
    from tcdl.market.market_model import build_market, MarketSpec
    from tcdl.market.scenario_tree import NodeSpec

    market = build_market(
        spec=MarketSpec(
            nodes=[
                NodeSpec(id="0", time=0),
                NodeSpec(id="0.0", parent="0", time=1),
                NodeSpec(id="0.1", parent="0", time=1),
            ],
            prices={"0": 4.0, "0.0": 8.0, "0.1": 2.0},
            lambda_=0.1,
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )
    call = PayoffVector(g=(3.0, 0.0))

    print("result:", is_attainable(model=market, g=call, x=11 / 9), is_attainable(model=market, g=call, x=1.2))
