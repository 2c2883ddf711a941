import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from tcdl.errors import InputError
from tcdl.market.market_model import MarketModel
from tcdl.tolerance import SELF_FINANCING

__all__ = [
    "build_strategy",
    "check_admissible",
    "check_self_financing",
    "liquidation_value",
    "no_trade_strategy",
    "TradingStrategy",
]


class TradingStrategy(BaseModel):
    """Holdings after the trade at every node, in tree order.

    Pre-trade holdings at the root are (x, 0).
    """

    model_config = ConfigDict(frozen=True)

    x: float = Field(description="Initial capital.")
    phi0: tuple[float, ...] = Field(description="Bond holding after trading at the node.")
    phi1: tuple[float, ...] = Field(description="Stock holding after trading at the node.")
    buy: tuple[float, ...] = Field(description="Shares bought at the node, >= 0.")
    sell: tuple[float, ...] = Field(description="Shares sold at the node, >= 0.")

    @property
    def turnover(self) -> float:
        return float(sum(self.buy) + sum(self.sell))

    def terminal_cash(self, model: MarketModel) -> npt.NDArray[np.float64]:
        "phi0 at the leaves, in `tree.leaves` order."
        return np.array([self.phi0[leaf] for leaf in model.tree.leaves], dtype=float)


def build_strategy(
    model: MarketModel,
    x: float,
    buy: npt.NDArray[np.float64],
    sell: npt.NDArray[np.float64],
    spend: npt.NDArray[np.float64] | None = None,
) -> TradingStrategy:
    """Holdings generated by per-node trades.

    `spend` is the cash paid at each node, by default the exact cost
    S * buy - (1 - lambda) * S * sell; a larger spend is free disposal.
    """

    if spend is None:
        spend = model.ask * buy - model.bid * sell
    cumulative = model.tree.ancestor_matrix()

    return TradingStrategy(
        x=x,
        phi0=tuple(float(v) for v in x - cumulative @ spend),
        phi1=tuple(float(v) for v in cumulative @ (buy - sell)),
        buy=tuple(float(v) for v in buy),
        sell=tuple(float(v) for v in sell),
    )


def no_trade_strategy(model: MarketModel, x: float) -> TradingStrategy:
    zero = np.zeros(model.tree.n_nodes)

    return build_strategy(model=model, x=x, buy=zero, sell=zero)


def liquidation_value(model: MarketModel, strategy: TradingStrategy, node: str) -> float:
    "phi0 + (phi1)^+ (1 - lambda) S - (phi1)^- S at the node."
    i = model.tree.index.get(node)
    if i is None or i >= len(strategy.phi0):
        raise InputError(f"unknown node id {node!r}")

    phi0 = strategy.phi0[i]
    phi1 = strategy.phi1[i]
    ask = model.ask_price[i]

    return phi0 + max(phi1, 0.0) * (1.0 - model.lambda_) * ask - max(-phi1, 0.0) * ask


def check_self_financing(model: MarketModel, strategy: TradingStrategy) -> list[str]:
    tree = model.tree
    violations: list[str] = []

    n_nodes = tree.n_nodes
    for name in ("phi0", "phi1", "buy", "sell"):
        if len(getattr(strategy, name)) != n_nodes:
            violations.append(f"{name} has {len(getattr(strategy, name))} entries, expected {n_nodes}")
    if violations:
        return violations

    for i, node_id in enumerate(tree.node_ids):
        buy = strategy.buy[i]
        sell = strategy.sell[i]
        ask = model.ask_price[i]
        if buy < -SELF_FINANCING:
            violations.append(f"negative buy at node {node_id}")
        if sell < -SELF_FINANCING:
            violations.append(f"negative sell at node {node_id}")

        parent = tree.parent[i]
        phi0_before = strategy.x if parent == -1 else strategy.phi0[parent]
        phi1_before = 0.0 if parent == -1 else strategy.phi1[parent]
        scale = 1.0 + abs(phi0_before) + ask * (abs(buy) + abs(sell))

        if abs(strategy.phi1[i] - phi1_before - (buy - sell)) > SELF_FINANCING * (1.0 + abs(phi1_before)):
            violations.append(f"stock change is not buy - sell at node {node_id}")
        cash_change = strategy.phi0[i] - phi0_before
        if cash_change > -ask * buy + (1.0 - model.lambda_) * ask * sell + SELF_FINANCING * scale:
            violations.append(f"self-financing violated at node {node_id}")

        if tree.is_leaf(node=i) and abs(strategy.phi1[i]) > SELF_FINANCING:
            violations.append(f"stock position not liquidated at leaf {node_id}")

    return violations


def check_admissible(
    model: MarketModel,
    strategy: TradingStrategy,
    bound: float | None = None,
) -> list[str]:
    """Liquidation value >= -M at every node.

    The default M = x + rho + 1 is one valid finite bound on a finite tree.
    """

    if bound is None:
        bound = strategy.x + model.rho + 1.0

    violations: list[str] = []
    for node_id in model.tree.node_ids:
        value = liquidation_value(model=model, strategy=strategy, node=node_id)
        if value < -bound - SELF_FINANCING:
            violations.append(f"liquidation value {value:.6g} below -{bound:.6g} at node {node_id}")

    return violations


if __name__ == "__main__":
    from tcdl.market.market_model import build_market, MarketSpec
    from tcdl.market.scenario_tree import NodeSpec

    market = build_market(
        spec=MarketSpec(
            nodes=[
                NodeSpec(id="0", time=0),
                NodeSpec(id="0.0", parent="0", time=1),
            ],
            prices={"0": 4.0, "0.0": 4.0},
            lambda_=0.1,
            probabilities={"0.0": 1.0},
        ),
    )
    round_trip = build_strategy(
        model=market,
        x=1.0,
        buy=np.array([1.0, 0.0]),
        sell=np.array([0.0, 1.0]),
    )

    print("result:", round_trip.phi0, check_self_financing(model=market, strategy=round_trip))
