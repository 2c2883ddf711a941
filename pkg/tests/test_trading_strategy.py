import numpy as np
import pytest

from tcdl.errors import InputError
from tcdl.market.market_model import build_market, MarketSpec
from tcdl.market.scenario_tree import NodeSpec
from tcdl.primal.trading_strategy import (
    build_strategy,
    check_admissible,
    check_self_financing,
    liquidation_value,
    no_trade_strategy,
    TradingStrategy,
)


@pytest.fixture
def flat():
    "One period, S = 4 at both dates, lambda = 0.1."
    return build_market(
        spec=MarketSpec(
            nodes=[NodeSpec(id="0", time=0), NodeSpec(id="0.0", parent="0", time=1)],
            prices={"0": 4.0, "0.0": 4.0},
            lambda_=0.1,
            probabilities={"0.0": 1.0},
        ),
    )


def holding(phi0: float, phi1: float) -> TradingStrategy:
    return TradingStrategy(x=phi0, phi0=(phi0, phi0), phi1=(phi1, 0.0), buy=(0.0, 0.0), sell=(0.0, 0.0))


@pytest.mark.parametrize("phi0, phi1, value", [(0.0, 1.0, 3.6), (2.0, -1.0, -2.0), (1.0, 0.0, 1.0)])
def test_liquidation_value(flat, phi0, phi1, value):
    assert liquidation_value(model=flat, strategy=holding(phi0=phi0, phi1=phi1), node="0") == pytest.approx(value)


def test_liquidation_value_of_unknown_node(flat):
    with pytest.raises(InputError, match="unknown node"):
        liquidation_value(model=flat, strategy=holding(phi0=0.0, phi1=0.0), node="9")


def test_round_trip_loses_the_spread(flat):
    strategy = build_strategy(model=flat, x=1.0, buy=np.array([1.0, 0.0]), sell=np.array([0.0, 1.0]))

    assert strategy.phi0 == pytest.approx((-3.0, 0.6))
    assert strategy.phi1 == pytest.approx((1.0, 0.0))
    assert strategy.turnover == 2.0
    assert check_self_financing(model=flat, strategy=strategy) == []
    assert check_admissible(model=flat, strategy=strategy) == []


def test_overspending_is_free_disposal(flat):
    strategy = build_strategy(
        model=flat,
        x=1.0,
        buy=np.array([1.0, 0.0]),
        sell=np.array([0.0, 1.0]),
        spend=np.array([4.5, -3.0]),
    )

    assert check_self_financing(model=flat, strategy=strategy) == []


def test_self_financing_violations(flat):
    free_lunch = TradingStrategy(x=1.0, phi0=(1.0, 2.0), phi1=(0.0, 0.0), buy=(0.0, 0.0), sell=(0.0, 0.0))
    open_position = build_strategy(model=flat, x=1.0, buy=np.array([1.0, 0.0]), sell=np.zeros(2))
    mismatch = TradingStrategy(x=1.0, phi0=(1.0, 1.0), phi1=(1.0, 0.0), buy=(0.0, 0.0), sell=(0.0, 0.0))
    short = TradingStrategy(x=1.0, phi0=(1.0,), phi1=(0.0,), buy=(0.0,), sell=(0.0,))

    assert any("self-financing" in v for v in check_self_financing(model=flat, strategy=free_lunch))
    assert any("not liquidated" in v for v in check_self_financing(model=flat, strategy=open_position))
    assert any("buy - sell" in v for v in check_self_financing(model=flat, strategy=mismatch))
    assert any("entries" in v for v in check_self_financing(model=flat, strategy=short))


def test_admissibility_bound(flat):
    short = build_strategy(model=flat, x=1.0, buy=np.array([0.0, 10.0]), sell=np.array([10.0, 0.0]))

    assert liquidation_value(model=flat, strategy=short, node="0") == pytest.approx(-3.0)
    assert check_admissible(model=flat, strategy=short, bound=5.0) == []
    assert len(check_admissible(model=flat, strategy=short, bound=1.0)) == 2


def test_no_trade(friction):
    strategy = no_trade_strategy(model=friction, x=2.0)

    assert strategy.phi0 == (2.0, 2.0, 2.0)
    np.testing.assert_array_equal(strategy.terminal_cash(model=friction), [2.0, 2.0])
    assert check_self_financing(model=friction, strategy=strategy) == []
