from logging import getLogger, Logger

from tcdl.dual.cps_polytope import maximise_leaf_pairing
from tcdl.errors import InputError
from tcdl.market.market_model import MarketModel
from tcdl.primal.attainability import PayoffVector

__all__ = [
    "compute_x0",
    "superreplication_price",
]


def superreplication_price(
    model: MarketModel,
    g: PayoffVector,
    logger: Logger | None = None,
) -> float:
    "pi(g) = sup of E[z0_T g] over the consistent-price-system polytope."
    logger = logger or getLogger(__name__)

    if len(g.g) != model.tree.n_leaves:
        raise InputError(f"payoff has {len(g.g)} entries, expected {model.tree.n_leaves}")

    result = maximise_leaf_pairing(model=model, weights=g.array, logger=logger)
    logger.debug("<TCDL:DUAL>:PRICE:%s", result.value)

    return result.value


def compute_x0(model: MarketModel, logger: Logger | None = None) -> float:
    """x0 = sup of E[z0_T (-e_T)]: the capital below which no wealth stays positive.

    Always lies in [-rho, rho].
    """

    logger = logger or getLogger(__name__)

    result = maximise_leaf_pairing(model=model, weights=-model.endowment_array, logger=logger)
    logger.debug("<TCDL:DUAL>:X0:%s", result.value)

    return result.value


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
            endowment={"0.0": 0.0, "0.1": -1.0},
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )

    print(
        "result:",
        superreplication_price(model=market, g=PayoffVector(g=(3.0, 0.0))),
        compute_x0(model=market),
    )
