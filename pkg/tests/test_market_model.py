import math

import numpy as np
import pytest

from tcdl.errors import InputError
from tcdl.market.market_model import (
    build_market,
    load_market,
    market_to_spec,
    MarketModel,
    MarketSpec,
    model_hash,
    validate_market,
)
from tcdl.tcdl_config import PATH_CONFIG_FOLDER
from tests.conftest import binomial, ONE_PERIOD


def test_bid_ask_and_rho():
    market = binomial(lambda_=0.1, endowment={"0.0": 0.3, "0.1": -0.5})

    np.testing.assert_allclose(market.ask, [4.0, 8.0, 2.0])
    np.testing.assert_allclose(market.bid, [3.6, 7.2, 1.8])
    assert market.endowment == (0.3, -0.5)
    assert market.rho == pytest.approx(0.5)
    assert market.price_of(node_id="0.1") == 2.0


def test_missing_endowment_defaults_to_zero(friction):
    assert friction.endowment == (0.0, 0.0)
    assert friction.rho == 0.0


def test_validate_market(friction):
    report = validate_market(model=friction)

    assert report.valid
    assert report.violations == []


@pytest.mark.parametrize(
    "prices, lambda_, endowment, message",
    [
        ((4.0, math.nan, 2.0), 0.1, (0.0, 0.0), "missing price"),
        ((4.0, -8.0, 2.0), 0.1, (0.0, 0.0), "nonpositive price"),
        ((4.0, math.inf, 2.0), 0.1, (0.0, 0.0), "nonfinite price"),
        ((4.0, 8.0, 2.0), 1.0, (0.0, 0.0), "lambda"),
        ((4.0, 8.0, 2.0), 0.1, (0.0, math.inf), "nonfinite endowment"),
        ((4.0, 8.0), 0.1, (0.0, 0.0), "expected 3 prices"),
    ],
)
def test_invalid_markets(friction, prices, lambda_, endowment, message):
    market = MarketModel(tree=friction.tree, ask_price=prices, lambda_=lambda_, endowment=endowment)
    report = validate_market(model=market)

    assert not report.valid
    assert any(message in violation for violation in report.violations)


def test_unknown_nodes_are_rejected():
    with pytest.raises(InputError, match="unknown nodes"):
        build_market(
            spec=MarketSpec(
                nodes=ONE_PERIOD,
                prices={"0": 4.0, "0.0": 8.0, "0.1": 2.0, "9": 1.0},
                lambda_=0.1,
                probabilities={"0.0": 0.5, "0.1": 0.5},
            ),
        )
    with pytest.raises(InputError, match="non-leaf"):
        binomial(lambda_=0.1, endowment={"0": 1.0})


def test_load_market():
    market = load_market(location=PATH_CONFIG_FOLDER / "binomial.json")

    assert market.lambda_ == 0.1
    assert market.endowment == (0.0, -1.0)
    assert market.tree.leaf_ids == ("0.0", "0.1")


def test_load_market_with_missing_price(tmp_path):
    location = tmp_path / "market.json"
    location.write_text(
        '{"nodes": [{"id": "0", "time": 0}], "prices": {}, "lambda": 0.0, "probabilities": {"0": 1.0}}'
    )

    with pytest.raises(InputError, match="missing price"):
        load_market(location=location)


def test_market_spec_accepts_the_json_alias():
    spec = MarketSpec.model_validate(
        {
            "nodes": [{"id": "0", "time": 0}],
            "prices": {"0": 1.0},
            "lambda": 0.2,
            "probabilities": {"0": 1.0},
        }
    )

    assert spec.lambda_ == 0.2


def test_model_hash():
    market = binomial(lambda_=0.1)
    rebuilt = build_market(spec=market_to_spec(model=market))

    assert model_hash(model=market) == model_hash(model=rebuilt)
    assert model_hash(model=market) != model_hash(model=binomial(lambda_=0.2))
    assert len(model_hash(model=market)) == 64
