import pytest

from tcdl.market.market_model import build_market, MarketModel, MarketSpec
from tcdl.market.scenario_tree import NodeSpec
from tcdl.utility.utility_spec import parse_utility, UtilitySpec

ONE_PERIOD = [
    NodeSpec(id="0", time=0),
    NodeSpec(id="0.0", parent="0", time=1),
    NodeSpec(id="0.1", parent="0", time=1),
]


def binomial(
    lambda_: float,
    up: float = 8.0,
    down: float = 2.0,
    endowment: dict[str, float] | None = None,
) -> MarketModel:
    "One period, S0 = 4, fair coin."
    return build_market(
        spec=MarketSpec(
            nodes=ONE_PERIOD,
            prices={"0": 4.0, "0.0": up, "0.1": down},
            lambda_=lambda_,
            endowment=endowment or {},
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )


def flat_tree(lambda_: float, endowment: float) -> MarketModel:
    "Two periods, S = 4 everywhere, e_T = endowment at every leaf."
    nodes = [
        NodeSpec(id="0", time=0),
        NodeSpec(id="0.0", parent="0", time=1),
        NodeSpec(id="0.1", parent="0", time=1),
        NodeSpec(id="0.0.0", parent="0.0", time=2),
        NodeSpec(id="0.0.1", parent="0.0", time=2),
        NodeSpec(id="0.1.0", parent="0.1", time=2),
    ]

    return build_market(
        spec=MarketSpec(
            nodes=nodes,
            prices={node.id: 4.0 for node in nodes},
            lambda_=lambda_,
            endowment={"0.0.0": endowment, "0.0.1": endowment, "0.1.0": endowment},
            cond_probabilities={"0.0": 0.4, "0.1": 0.6, "0.0.0": 0.5, "0.0.1": 0.5, "0.1.0": 1.0},
        ),
    )


@pytest.fixture
def frictionless() -> MarketModel:
    return binomial(lambda_=0.0)


@pytest.fixture
def friction() -> MarketModel:
    return binomial(lambda_=0.1)


@pytest.fixture
def down_loss() -> MarketModel:
    "lambda = 0.1 binomial losing one unit of cash in the down state."
    return binomial(lambda_=0.1, endowment={"0.1": -1.0})


@pytest.fixture
def single_node() -> MarketModel:
    return build_market(
        spec=MarketSpec(
            nodes=[NodeSpec(id="0", time=0)],
            prices={"0": 4.0},
            lambda_=0.1,
            probabilities={"0": 1.0},
        ),
    )


@pytest.fixture
def log() -> UtilitySpec:
    return parse_utility(text="log")


@pytest.fixture
def sqrt() -> UtilitySpec:
    return parse_utility(text="power:0.5")
