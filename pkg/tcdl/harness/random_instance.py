from logging import getLogger, Logger

import numpy as np
from pydantic import BaseModel

from tcdl.dual.cps_polytope import strict_interior_point
from tcdl.errors import InputError, NoConsistentPriceSystemError
from tcdl.market.market_model import build_market, MarketModel, MarketSpec
from tcdl.market.scenario_tree import NodeSpec

__all__ = [
    "draw_instance",
    "InstanceDraw",
    "random_instance",
]

SHOCK_LOW = 0.5
SHOCK_HIGH = 2.0
PROBABILITY_FLOOR = 0.05
MAX_ATTEMPTS = 100
MAX_REDRAWS = 1000


class InstanceDraw(BaseModel):
    model: MarketModel
    attempts: int
    redraws: int


def _draw_spec(
    rng: np.random.Generator,
    depth: int,
    branching: int,
    lambda_: float,
    rho: float,
) -> tuple[MarketSpec, int]:
    nodes = [NodeSpec(id="0", time=0)]
    prices = {"0": 1.0}
    cond_probabilities: dict[str, float] = {}
    redraws = 0

    frontier = ["0"]
    for time in range(1, depth + 1):
        next_frontier: list[str] = []
        for parent in frontier:
            # at least one child above and one below the parent price
            shocks = rng.uniform(SHOCK_LOW, SHOCK_HIGH, size=branching)
            while not (shocks.min() < 1.0 < shocks.max()):
                redraws += 1
                if redraws > MAX_REDRAWS:
                    raise InputError("could not draw locally arbitrage-free shocks")
                shocks = rng.uniform(SHOCK_LOW, SHOCK_HIGH, size=branching)

            weights = rng.uniform(size=branching)
            weights = np.maximum(weights / weights.sum(), PROBABILITY_FLOOR)
            weights = weights / weights.sum()

            for k in range(branching):
                child = f"{parent}.{k}"
                nodes.append(NodeSpec(id=child, parent=parent, time=time))
                prices[child] = float(prices[parent] * shocks[k])
                cond_probabilities[child] = float(weights[k])
                next_frontier.append(child)
        frontier = next_frontier

    if depth == 0:
        cond_probabilities = {}
    endowment = {leaf: float(rng.uniform(-rho, rho)) for leaf in frontier}

    spec = MarketSpec(
        nodes=nodes,
        prices=prices,
        lambda_=lambda_,
        endowment=endowment,
        probabilities={"0": 1.0} if depth == 0 else None,
        cond_probabilities=cond_probabilities or None,
    )

    return spec, redraws


def draw_instance(
    seed: int,
    depth: int,
    branching: int,
    lambda_: float,
    rho: float,
    logger: Logger | None = None,
) -> InstanceDraw:
    """Random market from one seeded generator.

    Prices follow multiplicative shocks uniform in [0.5, 2] from S0 = 1,
    conditional probabilities are normalised uniforms floored at 0.05, and
    e_T is uniform in [-rho, rho]. Draws repeat until a strictly consistent
    price system exists.
    """

    logger = logger or getLogger(__name__)

    if not 0 <= depth <= 5:
        raise InputError(f"depth must lie in [0, 5], got {depth}")
    if depth > 0 and not 2 <= branching <= 3:
        raise InputError(f"branching must lie in [2, 3], got {branching}")
    if not 0.0 <= lambda_ < 1.0:
        raise InputError(f"lambda must lie in [0, 1), got {lambda_}")
    if not rho >= 0.0:
        raise InputError(f"rho must be nonnegative, got {rho}")

    rng = np.random.default_rng(seed)
    redraws = 0
    for attempt in range(1, MAX_ATTEMPTS + 1):
        spec, spec_redraws = _draw_spec(
            rng=rng,
            depth=depth,
            branching=branching,
            lambda_=lambda_,
            rho=rho,
        )
        redraws += spec_redraws
        model = build_market(spec=spec)

        try:
            strict_interior_point(model=model, logger=logger)
        except NoConsistentPriceSystemError:
            logger.debug("<TCDL:HARNESS>:INSTANCE:SEED:%s:ATTEMPT:%s:NO_CPS", seed, attempt)
            continue

        logger.debug("<TCDL:HARNESS>:INSTANCE:SEED:%s:ATTEMPTS:%s:REDRAWS:%s", seed, attempt, redraws)
        return InstanceDraw(model=model, attempts=attempt, redraws=redraws)

    raise NoConsistentPriceSystemError(f"no arbitrage-free instance after {MAX_ATTEMPTS} attempts (seed {seed})")


def random_instance(
    seed: int,
    depth: int,
    branching: int,
    lambda_: float,
    rho: float,
    logger: Logger | None = None,
) -> MarketModel:
    return draw_instance(
        seed=seed,
        depth=depth,
        branching=branching,
        lambda_=lambda_,
        rho=rho,
        logger=logger,
    ).model


if __name__ == "__main__":
    draw = draw_instance(seed=42, depth=2, branching=2, lambda_=0.1, rho=0.2)

    print("result:", draw.attempts, draw.redraws, draw.model.ask_price)
