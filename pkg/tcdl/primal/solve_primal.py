from logging import getLogger, Logger
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from tcdl.dual.superreplication_price import compute_x0
from tcdl.errors import BelowX0Error, IndeterminateError
from tcdl.market.market_model import MarketModel
from tcdl.primal.attainability import PayoffVector, superhedge
from tcdl.primal.trading_strategy import build_strategy, TradingStrategy
from tcdl.solver.convex_program import ConvexProgram, solve_convex
from tcdl.tolerance import BARRIER_KKT, BELOW_X0_MARGIN
from tcdl.utility.conjugate import u_eval, u_prime, u_second
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "primal_marginal",
    "PrimalSolution",
    "PrimalStatus",
    "solve_primal",
]

PrimalStatus = Literal["optimal", "indeterminate", "infeasible-below-x0", "recovery-failed"]

HEDGE_ALLOWANCE = 1e-7


class PrimalSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: PrimalStatus
    x: float
    x0: float
    strategy: TradingStrategy | None = Field(default=None)
    ghat: PayoffVector | None = Field(default=None, description="Terminal cash minus x per leaf.")
    value: float = Field(description="u(x) = E[U(x + ghat + e_T)], -inf below x0.")
    kkt_residual: float = Field(default=0.0, description="KKT residual, or the capital needed for a recovered payoff.")
    marginal: float = Field(default=np.nan, description="Envelope value E[U'(x + ghat + e_T)].")

    def raise_for_status(self) -> "PrimalSolution":
        if self.status == "infeasible-below-x0":
            raise BelowX0Error(f"x={self.x} does not exceed x0={self.x0}")
        if self.status in ("indeterminate", "recovery-failed"):
            raise IndeterminateError(f"primal solve at x={self.x} did not certify (kkt {self.kkt_residual:.3g})")

        return self

    def wealth(self, model: MarketModel) -> npt.NDArray[np.float64]:
        "x + ghat + e_T per leaf."
        if self.ghat is None:
            raise BelowX0Error(f"no terminal wealth below x0 (x={self.x})")

        return self.x + self.ghat.array + model.endowment_array


def _convex_program(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
) -> ConvexProgram:
    """Variables (delta, kappa): shares traded and cash spent per node.

    kappa >= S delta and kappa >= (1 - lambda) S delta (equality for lambda = 0),
    terminal stock P delta = 0, wealth W = x + e_T - P kappa > 0.
    """

    tree = model.tree
    n = tree.n_nodes
    paths = tree.path_matrix()
    prob = tree.leaf_prob
    endowment = model.endowment_array

    def wealth(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        return x + endowment - paths @ z[n:]

    def objective(z: npt.NDArray[np.float64]) -> float:
        w = wealth(z)
        if np.any(w <= 0.0):
            return np.inf
        return -float(prob @ u_eval(spec=utility, x=w))

    def gradient(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        result = np.zeros(2 * n)
        result[n:] = paths.T @ (prob * u_prime(spec=utility, x=wealth(z)))
        return result

    def hessian(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        result = np.zeros((2 * n, 2 * n))
        result[n:, n:] = -(paths.T * (prob * u_second(spec=utility, x=wealth(z)))) @ paths
        return result

    terminal_stock = np.hstack([paths, np.zeros_like(paths)])
    identity = np.eye(n)
    if model.lambda_ == 0.0:
        g = np.zeros((0, 2 * n))
        a_eq = np.vstack([terminal_stock, np.hstack([np.diag(model.ask), -identity])])
    else:
        g = np.vstack(
            [
                np.hstack([np.diag(model.ask), -identity]),
                np.hstack([np.diag(model.bid), -identity]),
            ]
        )
        a_eq = terminal_stock

    return ConvexProgram(
        objective=objective,
        gradient=gradient,
        hessian=hessian,
        n_vars=2 * n,
        g=g,
        h=np.zeros(g.shape[0]),
        a_eq=a_eq,
        b_eq=np.zeros(a_eq.shape[0]),
        domain_g=np.hstack([np.zeros_like(paths), paths]),
        domain_h=x + endowment,
    )


def solve_primal(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    x0: float | None = None,
    min_turnover: bool = False,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> PrimalSolution:
    """u(x) = max E[U(x + g + e_T)] over g attainable from zero capital.

    Returns status "infeasible-below-x0" with value -inf when x <= x0.
    """

    logger = logger or getLogger(__name__)

    if x0 is None:
        x0 = compute_x0(model=model, logger=logger)
    if x <= x0 + BELOW_X0_MARGIN:
        logger.debug("<TCDL:PRIMAL>:BELOW_X0:X:%s:X0:%s", x, x0)
        return PrimalSolution(status="infeasible-below-x0", x=x, x0=x0, value=-np.inf)

    n = model.tree.n_nodes
    paths = model.tree.path_matrix()

    result = solve_convex(
        cp=_convex_program(model=model, utility=utility, x=x),
        tol=tol,
        logger=logger,
    )
    delta = result.z[:n]
    kappa = result.z[n:]

    ghat = PayoffVector.from_array(values=-paths @ kappa)
    strategy = build_strategy(
        model=model,
        x=x,
        buy=np.maximum(delta, 0.0),
        sell=np.maximum(-delta, 0.0),
        spend=kappa,
    )
    if min_turnover:
        # terminal cash x + ghat, less roundoff of the barrier solve
        target = PayoffVector.from_array(values=x + ghat.array - HEDGE_ALLOWANCE * (1.0 + abs(x)))
        hedge = superhedge(model=model, g=target, x=x, logger=logger)
        if hedge.strategy is not None:
            strategy = hedge.strategy

    wealth = x + ghat.array + model.endowment_array
    prob = model.tree.leaf_prob
    value = float(prob @ u_eval(spec=utility, x=wealth))
    marginal = float(prob @ u_prime(spec=utility, x=wealth))

    logger.debug("<TCDL:PRIMAL>:X:%s:VALUE:%s:STATUS:%s", x, value, result.status)

    return PrimalSolution(
        status=result.status,
        x=x,
        x0=x0,
        strategy=strategy,
        ghat=ghat,
        value=value,
        kkt_residual=result.kkt_residual,
        marginal=marginal,
    )


def primal_marginal(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    h: float | None = None,
    x0: float | None = None,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> float:
    "(u(x + h) - u(x - h)) / 2h, default h = 1e-4 max(1, |x|)."
    if h is None:
        h = 1e-4 * max(1.0, abs(x))
    if x0 is None:
        x0 = compute_x0(model=model, logger=logger)
    if x - h <= x0:
        raise BelowX0Error(f"x - h = {x - h} does not exceed x0 = {x0}")

    upper, lower = (
        solve_primal(model=model, utility=utility, x=x_eval, x0=x0, tol=tol, logger=logger).raise_for_status()
        for x_eval in (x + h, x - h)
    )

    return (upper.value - lower.value) / (2.0 * h)


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
    solution = solve_primal(model=market, utility=parse_utility(text="log"), x=1.0)

    print("result:", solution.value, solution.strategy.buy if solution.strategy else None)
