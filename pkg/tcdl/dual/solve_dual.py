from concurrent.futures import ThreadPoolExecutor
from logging import getLogger, Logger
from typing import Literal

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, Field

from tcdl.dual.cps_polytope import (
    cps_polytope,
    CpsElement,
    element_from_vector,
    strict_interior_point,
)
from tcdl.errors import DomainError, IndeterminateError, InputError
from tcdl.market.market_model import MarketModel
from tcdl.solver.convex_program import ConvexProgram, solve_convex
from tcdl.tolerance import BARRIER_KKT, ZERO_DENSITY
from tcdl.utility.conjugate import i_eval, v_eval, v_prime_closed, v_second
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "dual_derivative",
    "dual_grid",
    "dual_objective",
    "DualSolution",
    "DualStatus",
    "solve_dual",
]

DualStatus = Literal["optimal", "indeterminate"]


class DualSolution(BaseModel):
    model_config = ConfigDict(frozen=True)

    status: DualStatus
    y: float
    optimizer: CpsElement
    value: float = Field(description="v(y) = E[V(y z0_T)] + y E[z0_T e_T].")
    derivative: float = Field(description="v'(y) by the envelope formula.")
    expected_conjugate: float = Field(description="E[V(y z0_T)].")
    endowment_pairing: float = Field(description="E[z0_T e_T].")
    singular_mass: float = Field(description="1 - E[z0_T], zero up to roundoff on a finite tree.")
    excluded_mass: float = Field(description="P-mass of leaves with z0_T <= 1e-12, left out of v'.")
    kkt_residual: float

    def raise_for_status(self) -> "DualSolution":
        if self.status != "optimal":
            raise IndeterminateError(f"dual solve at y={self.y} did not certify (kkt {self.kkt_residual:.3g})")

        return self

    def leaf_density(self, model: MarketModel) -> npt.NDArray[np.float64]:
        return self.optimizer.leaf_density(model=model)


def dual_objective(
    model: MarketModel,
    utility: UtilitySpec,
    y: float,
    density: npt.NDArray[np.float64],
) -> tuple[float, float]:
    "(E[V(y z0_T)], E[z0_T e_T]) for a strictly positive leaf density."
    prob = model.tree.leaf_prob

    return (
        float(prob @ v_eval(spec=utility, y=y * density)),
        float(prob @ (density * model.endowment_array)),
    )


def _derivative(
    model: MarketModel,
    utility: UtilitySpec,
    y: float,
    density: npt.NDArray[np.float64],
) -> tuple[float, float]:
    prob = model.tree.leaf_prob
    support = density > ZERO_DENSITY

    inverse = np.zeros_like(density)
    inverse[support] = i_eval(spec=utility, y=y * density[support])

    derivative = -float(prob @ (density * inverse)) + float(prob @ (density * model.endowment_array))
    excluded = float(prob[~support].sum())

    return derivative, excluded


def dual_derivative(
    model: MarketModel,
    utility: UtilitySpec,
    solution: DualSolution,
) -> float:
    "v'(y) = -E[z0_T I(y z0_T) 1{z0_T > 0}] + E[z0_T e_T]."
    derivative, _ = _derivative(
        model=model,
        utility=utility,
        y=solution.y,
        density=solution.leaf_density(model=model),
    )

    return derivative


def solve_dual(
    model: MarketModel,
    utility: UtilitySpec,
    y: float,
    start: CpsElement | None = None,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> DualSolution:
    """v(y) = min over the closed polytope of E[V(y z0_T)] + y E[z0_T e_T].

    The barrier runs on the spread rows and on z0 > 0 at the leaves; the
    martingale and normalisation rows are equalities.
    """

    logger = logger or getLogger(__name__)

    if not y > 0.0 or not np.isfinite(y):
        raise DomainError(f"y must be positive and finite, got {y}")

    tree = model.tree
    block = cps_polytope(model=model)
    g, h = block.barrier_rows()
    leaves = np.array(tree.leaves)
    prob = tree.leaf_prob
    endowment = model.endowment_array
    n_vars = block.n_vars

    def objective(z: npt.NDArray[np.float64]) -> float:
        density = z[leaves]
        if np.any(density <= 0.0):
            return np.inf
        return float(prob @ v_eval(spec=utility, y=y * density) + y * prob @ (density * endowment))

    def gradient(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        result = np.zeros(n_vars)
        result[leaves] = y * prob * (v_prime_closed(spec=utility, y=y * z[leaves]) + endowment)
        return result

    def hessian(z: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
        result = np.zeros((n_vars, n_vars))
        result[leaves, leaves] = y * y * prob * v_second(spec=utility, y=y * z[leaves])
        return result

    if start is None:
        start = strict_interior_point(model=model, logger=logger)

    result = solve_convex(
        cp=ConvexProgram(
            objective=objective,
            gradient=gradient,
            hessian=hessian,
            n_vars=n_vars,
            g=g,
            h=h,
            a_eq=block.a_eq,
            b_eq=block.b_eq,
            start=start.vector,
        ),
        tol=tol,
        logger=logger,
    )

    optimizer = element_from_vector(model=model, z=result.z)
    density = optimizer.leaf_density(model=model)
    expected_conjugate, endowment_pairing = dual_objective(
        model=model,
        utility=utility,
        y=y,
        density=density,
    )
    derivative, excluded = _derivative(model=model, utility=utility, y=y, density=density)

    logger.debug("<TCDL:DUAL>:Y:%s:VALUE:%s:STATUS:%s", y, result.value, result.status)

    return DualSolution(
        status=result.status,
        y=y,
        optimizer=optimizer,
        value=expected_conjugate + y * endowment_pairing,
        derivative=derivative,
        expected_conjugate=expected_conjugate,
        endowment_pairing=endowment_pairing,
        singular_mass=1.0 - float(prob @ density),
        excluded_mass=excluded,
        kkt_residual=result.kkt_residual,
    )


def dual_grid(
    model: MarketModel,
    utility: UtilitySpec,
    y_grid: list[float],
    jobs: int = 1,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> list[DualSolution]:
    "solve_dual at every grid point; results keep the grid order."
    logger = logger or getLogger(__name__)

    if any(not y > 0.0 for y in y_grid):
        raise InputError("y_grid must be positive")
    if any(a >= b for a, b in zip(y_grid, y_grid[1:])):
        raise InputError("y_grid must be strictly increasing")

    start = strict_interior_point(model=model, logger=logger)

    def solve(y: float) -> DualSolution:
        return solve_dual(model=model, utility=utility, y=y, start=start, tol=tol, logger=logger)

    if jobs <= 1:
        return [solve(y) for y in y_grid]

    with ThreadPoolExecutor(max_workers=jobs) as executor:
        return list(executor.map(solve, y_grid))


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
    solution = solve_dual(model=market, utility=parse_utility(text="log"), y=1.0)

    print("result:", solution.value, solution.optimizer.z0)
