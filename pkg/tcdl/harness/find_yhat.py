import math
from logging import getLogger, Logger

import numpy as np
from pydantic import BaseModel, Field

from tcdl.dual.cps_polytope import CpsElement, strict_interior_point
from tcdl.dual.solve_dual import DualSolution, solve_dual
from tcdl.dual.superreplication_price import compute_x0, superreplication_price
from tcdl.errors import BelowX0Error, IndeterminateError
from tcdl.market.market_model import MarketModel
from tcdl.primal.attainability import PayoffVector, superhedge
from tcdl.primal.solve_primal import PrimalSolution
from tcdl.tolerance import BARRIER_KKT, YHAT_RESIDUAL
from tcdl.utility.conjugate import i_eval, u_eval, u_prime
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "find_yhat",
    "recover_primal_from_dual",
    "slackness_check",
    "SlacknessResiduals",
    "solve_at_yhat",
]

Y_MIN = 1e-8
Y_MAX = 1e8
BRACKET_FACTOR = 10.0
MAX_BISECTIONS = 200
RECOVERY_CAPITAL = 1e-6


class SlacknessResiduals(BaseModel):
    r1: float = Field(description="|E[z0_T ghat]|.")
    r2: float = Field(description="|E[z0_T (x + ghat)] - x|.")
    r3: float = Field(description="Singular-part terms, zero on a finite tree.")
    passed: bool


def solve_at_yhat(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    x0: float | None = None,
    start: CpsElement | None = None,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> DualSolution:
    """Dual solution at the root of y -> v'(y) + x.

    Bisection in log y on a bracket grown by factors of 10 inside [1e-8, 1e8].
    """

    logger = logger or getLogger(__name__)

    if x0 is None:
        x0 = compute_x0(model=model, logger=logger)
    if x <= x0:
        raise BelowX0Error(f"x={x} does not exceed x0={x0}: inf_y v(y) + xy = -inf")
    if start is None:
        start = strict_interior_point(model=model, logger=logger)

    def solve(y: float) -> DualSolution:
        return solve_dual(
            model=model,
            utility=utility,
            y=y,
            start=start,
            tol=tol,
            logger=logger,
        ).raise_for_status()

    target = YHAT_RESIDUAL * (1.0 + abs(x))

    current = solve(y=1.0)
    residual = current.derivative + x
    if abs(residual) <= target:
        return current

    low: DualSolution | None = None
    high: DualSolution | None = None
    if residual < 0.0:
        low = current
        y = current.y
        while high is None:
            y *= BRACKET_FACTOR
            if y > Y_MAX:
                raise IndeterminateError(f"no yhat bracket below {Y_MAX} for x={x}")
            candidate = solve(y=y)
            if candidate.derivative + x >= 0.0:
                high = candidate
            else:
                low = candidate
    else:
        high = current
        y = current.y
        while low is None:
            y /= BRACKET_FACTOR
            if y < Y_MIN:
                raise IndeterminateError(f"no yhat bracket above {Y_MIN} for x={x}")
            candidate = solve(y=y)
            if candidate.derivative + x <= 0.0:
                low = candidate
            else:
                high = candidate

    best = min((low, high), key=lambda s: abs(s.derivative + x))
    for _ in range(MAX_BISECTIONS):
        if abs(best.derivative + x) <= target or high.y / low.y - 1.0 < 1e-13:
            break
        middle = solve(y=math.sqrt(low.y * high.y))
        if middle.derivative + x < 0.0:
            low = middle
        else:
            high = middle
        if abs(middle.derivative + x) < abs(best.derivative + x):
            best = middle

    residual = best.derivative + x
    logger.debug("<TCDL:HARNESS>:YHAT:X:%s:Y:%s:RESIDUAL:%s", x, best.y, residual)
    if abs(residual) > target:
        raise IndeterminateError(f"yhat bisection stalled at y={best.y:.12g}, |v'(y) + x| = {abs(residual):.3g}")

    return best


def find_yhat(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    x0: float | None = None,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> float:
    "yhat solving v'(y) + x = 0, i.e. yhat = u'(x)."
    return solve_at_yhat(
        model=model,
        utility=utility,
        x=x,
        x0=x0,
        tol=tol,
        logger=logger,
    ).y


def recover_primal_from_dual(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    dual: DualSolution | None = None,
    x0: float | None = None,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> PrimalSolution:
    """ghat = I(yhat z0_T) - x - e_T, certified attainable from zero capital.

    Attainability is tested with a capital allowance of 1e-6 (1 + |x|);
    `kkt_residual` carries the superreplication price of ghat, which is <= 0
    exactly when ghat is attainable from zero.
    """

    logger = logger or getLogger(__name__)

    if x0 is None:
        x0 = compute_x0(model=model, logger=logger)
    if dual is None:
        dual = solve_at_yhat(model=model, utility=utility, x=x, x0=x0, tol=tol, logger=logger)

    density = dual.leaf_density(model=model)
    if np.any(density <= 0.0):
        logger.error("<TCDL:HARNESS>:RECOVERY:ZERO_DENSITY:X:%s", x)
        return PrimalSolution(status="recovery-failed", x=x, x0=x0, value=np.nan, kkt_residual=np.inf)

    wealth = i_eval(spec=utility, y=dual.y * density)
    ghat = PayoffVector.from_array(values=wealth - x - model.endowment_array)

    allowance = RECOVERY_CAPITAL * (1.0 + abs(x))
    hedge = superhedge(
        model=model,
        g=PayoffVector.from_array(values=x + ghat.array - allowance),
        x=x,
        logger=logger,
    )
    price = superreplication_price(model=model, g=ghat, logger=logger)

    prob = model.tree.leaf_prob
    status = "optimal" if hedge.attainable else "recovery-failed"
    if not hedge.attainable:
        logger.error("<TCDL:HARNESS>:RECOVERY:NOT_ATTAINABLE:X:%s:PRICE:%s", x, price)

    return PrimalSolution(
        status=status,
        x=x,
        x0=x0,
        strategy=hedge.strategy,
        ghat=ghat,
        value=float(prob @ u_eval(spec=utility, x=wealth)),
        kkt_residual=price,
        marginal=float(prob @ u_prime(spec=utility, x=wealth)),
    )


def slackness_check(
    model: MarketModel,
    primal: PrimalSolution,
    dual: DualSolution,
    tol: float = 1e-6,
) -> SlacknessResiduals:
    "E[z0_T ghat] = 0 and E[z0_T (x + ghat)] = x at matched (x, yhat)."
    if primal.ghat is None:
        raise BelowX0Error(f"no primal payoff at x={primal.x}")

    prob = model.tree.leaf_prob
    density = dual.leaf_density(model=model)
    ghat = primal.ghat.array

    r1 = abs(float(prob @ (density * ghat)))
    r2 = abs(float(prob @ (density * (primal.x + ghat))) - primal.x)
    r3 = 0.0

    return SlacknessResiduals(r1=r1, r2=r2, r3=r3, passed=r1 <= tol and r2 <= tol)


if __name__ == "__main__":
    from tcdl.market.market_model import build_market, MarketSpec
    from tcdl.market.scenario_tree import NodeSpec
    from tcdl.utility.utility_spec import parse_utility

    market = build_market(
        spec=MarketSpec(
            nodes=[
                NodeSpec(id="0", time=0),
                NodeSpec(id="0.0", parent="0", time=1),
                NodeSpec(id="0.1", parent="0", time=1),
            ],
            prices={"0": 4.0, "0.0": 8.0, "0.1": 2.0},
            lambda_=0.0,
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )
    log = parse_utility(text="log")

    print("result:", find_yhat(model=market, utility=log, x=1.0))
