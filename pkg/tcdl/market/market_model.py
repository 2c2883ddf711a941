import math
from hashlib import sha256
from pathlib import Path

import numpy as np
import numpy.typing as npt
from orjson import OPT_SORT_KEYS, dumps
from pydantic import BaseModel, ConfigDict, Field, computed_field

from tcdl.errors import InputError
from tcdl.market.scenario_tree import (
    build_tree,
    NodeSpec,
    ScenarioTree,
    tree_to_spec,
    TreeSpec,
)

__all__ = [
    "build_market",
    "load_market",
    "market_to_spec",
    "MarketModel",
    "MarketSpec",
    "model_hash",
    "validate_market",
    "ValidationReport",
]


class MarketSpec(BaseModel):
    """
    Example:
    {
        "nodes": [
            {"id": "0", "parent": null, "time": 0},
            {"id": "0.0", "parent": "0", "time": 1},
            {"id": "0.1", "parent": "0", "time": 1}
        ],
        "prices": {"0": 4.0, "0.0": 8.0, "0.1": 2.0},
        "lambda": 0.1,
        "endowment": {"0.0": 0.0, "0.1": -1.0},
        "probabilities": {"0.0": 0.5, "0.1": 0.5}
    }
    """

    model_config = ConfigDict(
        populate_by_name=True,
        extra="forbid",
    )

    nodes: list[NodeSpec]
    prices: dict[str, float] = Field(description="Node id -> ask price S.")
    lambda_: float = Field(alias="lambda", description="Proportional transaction cost.")
    endowment: dict[str, float] = Field(
        default_factory=dict,
        description="Leaf id -> terminal endowment e_T, missing leaves default to 0.",
    )
    probabilities: dict[str, float] | None = Field(default=None)
    cond_probabilities: dict[str, float] | None = Field(default=None)


class MarketModel(BaseModel):
    model_config = ConfigDict(
        frozen=True,
        populate_by_name=True,
    )

    tree: ScenarioTree
    ask_price: tuple[float, ...] = Field(description="Ask price S per node, tree order.")
    lambda_: float = Field(alias="lambda")
    endowment: tuple[float, ...] = Field(description="e_T per leaf, in `tree.leaves` order.")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def rho(self) -> float:
        return max((abs(e) for e in self.endowment), default=0.0)

    @property
    def ask(self) -> npt.NDArray[np.float64]:
        return np.array(self.ask_price, dtype=float)

    @property
    def bid(self) -> npt.NDArray[np.float64]:
        return (1.0 - self.lambda_) * self.ask

    @property
    def endowment_array(self) -> npt.NDArray[np.float64]:
        return np.array(self.endowment, dtype=float)

    def price_of(self, node_id: str) -> float:
        return self.ask_price[self.tree.index[node_id]]


class ValidationReport(BaseModel):
    valid: bool
    violations: list[str] = Field(default_factory=list)
    rho: float


def validate_market(model: MarketModel) -> ValidationReport:
    tree = model.tree
    violations: list[str] = []

    if len(model.ask_price) != tree.n_nodes:
        violations.append(f"expected {tree.n_nodes} prices, got {len(model.ask_price)}")
    for node_id, price in zip(tree.node_ids, model.ask_price):
        if math.isnan(price):
            violations.append(f"missing price at node {node_id}")
        elif not math.isfinite(price):
            violations.append(f"nonfinite price at node {node_id}")
        elif price <= 0.0:
            violations.append(f"nonpositive price at node {node_id}")

    if not 0.0 <= model.lambda_ < 1.0:
        violations.append(f"lambda {model.lambda_} outside [0, 1)")

    if len(model.endowment) != tree.n_leaves:
        violations.append(f"expected {tree.n_leaves} endowment values, got {len(model.endowment)}")
    for leaf_id, value in zip(tree.leaf_ids, model.endowment):
        if not math.isfinite(value):
            violations.append(f"nonfinite endowment at leaf {leaf_id}")

    rho = model.rho
    if not math.isfinite(rho):
        violations.append("rho is not finite")

    return ValidationReport(valid=not violations, violations=violations, rho=rho)


def build_market(spec: MarketSpec) -> MarketModel:
    tree = build_tree(
        spec=TreeSpec(
            nodes=spec.nodes,
            probabilities=spec.probabilities,
            cond_probabilities=spec.cond_probabilities,
        ),
    )

    unknown_prices = set(spec.prices) - set(tree.node_ids)
    if unknown_prices:
        raise InputError(f"prices given for unknown nodes {sorted(unknown_prices)}")
    unknown_leaves = set(spec.endowment) - set(tree.leaf_ids)
    if unknown_leaves:
        raise InputError(f"endowment given for non-leaf or unknown nodes {sorted(unknown_leaves)}")

    return MarketModel(
        tree=tree,
        ask_price=tuple(spec.prices.get(node_id, math.nan) for node_id in tree.node_ids),
        lambda_=spec.lambda_,
        endowment=tuple(spec.endowment.get(leaf_id, 0.0) for leaf_id in tree.leaf_ids),
    )


def load_market(location: Path) -> MarketModel:
    spec = MarketSpec.model_validate_json(location.read_text())
    model = build_market(spec=spec)

    report = validate_market(model=model)
    if not report.valid:
        raise InputError("; ".join(report.violations))

    return model


def market_to_spec(model: MarketModel) -> MarketSpec:
    tree_spec = tree_to_spec(tree=model.tree)

    return MarketSpec(
        nodes=tree_spec.nodes,
        prices=dict(zip(model.tree.node_ids, model.ask_price)),
        lambda_=model.lambda_,
        endowment=dict(zip(model.tree.leaf_ids, model.endowment)),
        probabilities=tree_spec.probabilities,
    )


def model_hash(model: MarketModel) -> str:
    spec = market_to_spec(model=model)
    payload = dumps(spec.model_dump(by_alias=True, exclude_none=True), option=OPT_SORT_KEYS)

    return sha256(payload).hexdigest()


if __name__ == "__main__":
    market = build_market(
        spec=MarketSpec(
            nodes=[
                NodeSpec(id="0", time=0),
                NodeSpec(id="0.0", parent="0", time=1),
                NodeSpec(id="0.1", parent="0", time=1),
            ],
            prices={"0": 4.0, "0.0": 8.0, "0.1": 2.0},
            lambda_=0.1,
            endowment={"0.0": 0.3, "0.1": -0.5},
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )

    print("result:", validate_market(model=market), model_hash(model=market))
