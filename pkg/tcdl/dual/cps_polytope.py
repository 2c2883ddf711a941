from logging import getLogger, Logger

import numpy as np
import numpy.typing as npt
from pydantic import BaseModel, ConfigDict, computed_field

from tcdl.errors import NoConsistentPriceSystemError
from tcdl.market.market_model import MarketModel
from tcdl.solver.core import ArrayModel
from tcdl.solver.linear_program import LinearProgram, LpResult, SenseType, solve_lp
from tcdl.tolerance import BARRIER_STRICT_MARGIN, CPS_CHECK

__all__ = [
    "cps_check",
    "cps_polytope",
    "CpsElement",
    "element_from_vector",
    "maximise_leaf_pairing",
    "PolytopeBlock",
    "random_interior_point",
    "require_nonempty",
    "strict_interior_point",
]


class CpsElement(BaseModel):
    """Pair (Z0, Z1) per node, in tree order.

    Z1 / Z0 is the shadow price; z0 at the leaves is the density dQ/dP.
    """

    model_config = ConfigDict(frozen=True)

    z0: tuple[float, ...]
    z1: tuple[float, ...]

    @computed_field  # type: ignore[prop-decorator]
    @property
    def strict(self) -> bool:
        return min(self.z0, default=0.0) > 0.0

    @property
    def vector(self) -> npt.NDArray[np.float64]:
        return np.array(self.z0 + self.z1, dtype=float)

    def leaf_density(self, model: MarketModel) -> npt.NDArray[np.float64]:
        return np.array([self.z0[leaf] for leaf in model.tree.leaves], dtype=float)

    def shadow_price(self) -> tuple[float, ...]:
        return tuple(z1 / z0 if z0 > 0.0 else float("nan") for z0, z1 in zip(self.z0, self.z1))


class PolytopeBlock(ArrayModel):
    """Constraint block over (z0, z1), both >= 0.

    `a_ub` holds the spread rows (1 - lambda) S z0 - z1 <= 0 and z1 - S z0 <= 0;
    for lambda = 0 the spread collapses to the equality z1 = S z0 in `a_eq`.
    """

    n_nodes: int
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    leaf_rows: np.ndarray

    @property
    def n_vars(self) -> int:
        return 2 * self.n_nodes

    def barrier_rows(self) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        "Spread rows plus -z0(leaf) <= 0: the rows a strict interior point satisfies strictly."
        g = np.vstack([self.a_ub, -self.leaf_rows])

        return g, np.zeros(g.shape[0])

    def linear_program(self, c: npt.NDArray[np.float64], sense: SenseType = "max") -> LinearProgram:
        return LinearProgram(
            c=c,
            a_ub=self.a_ub,
            b_ub=self.b_ub,
            a_eq=self.a_eq,
            b_eq=self.b_eq,
            sense=sense,
        )


def cps_polytope(model: MarketModel) -> PolytopeBlock:
    tree = model.tree
    n = tree.n_nodes
    ask = model.ask
    bid = model.bid

    eq_rows: list[npt.NDArray[np.float64]] = []
    eq_rhs: list[float] = []

    root = np.zeros(2 * n)
    root[0] = 1.0
    eq_rows.append(root)
    eq_rhs.append(1.0)

    for i in range(n):
        if not tree.children[i]:
            continue
        for offset in (0, n):
            row = np.zeros(2 * n)
            row[offset + i] = 1.0
            for child in tree.children[i]:
                row[offset + child] = -tree.cond_prob[child]
            eq_rows.append(row)
            eq_rhs.append(0.0)

    ub_rows: list[npt.NDArray[np.float64]] = []
    for i in range(n):
        if model.lambda_ == 0.0:
            row = np.zeros(2 * n)
            row[n + i] = 1.0
            row[i] = -ask[i]
            eq_rows.append(row)
            eq_rhs.append(0.0)
            continue

        lower = np.zeros(2 * n)
        lower[i] = bid[i]
        lower[n + i] = -1.0
        upper = np.zeros(2 * n)
        upper[n + i] = 1.0
        upper[i] = -ask[i]
        ub_rows.extend([lower, upper])

    leaf_rows = np.zeros((tree.n_leaves, 2 * n))
    for k, leaf in enumerate(tree.leaves):
        leaf_rows[k, leaf] = 1.0

    return PolytopeBlock(
        n_nodes=n,
        a_ub=np.array(ub_rows).reshape(-1, 2 * n),
        b_ub=np.zeros(len(ub_rows)),
        a_eq=np.array(eq_rows),
        b_eq=np.array(eq_rhs),
        leaf_rows=leaf_rows,
    )


def element_from_vector(model: MarketModel, z: npt.NDArray[np.float64]) -> CpsElement:
    n = model.tree.n_nodes

    return CpsElement(
        z0=tuple(float(v) for v in z[:n]),
        z1=tuple(float(v) for v in z[n : 2 * n]),
    )


def cps_check(
    model: MarketModel,
    element: CpsElement,
    strict: bool = False,
) -> list[str]:
    tree = model.tree
    n = tree.n_nodes

    if len(element.z0) != n or len(element.z1) != n:
        return [f"element has {len(element.z0)}/{len(element.z1)} entries, expected {n}"]

    z0 = np.array(element.z0)
    z1 = np.array(element.z1)
    violations: list[str] = []

    if abs(z0[0] - 1.0) > CPS_CHECK:
        violations.append(f"normalization: z0 at the root is {z0[0]!r}, not 1")

    for i, node_id in enumerate(tree.node_ids):
        if z0[i] < -CPS_CHECK or z1[i] < -CPS_CHECK:
            violations.append(f"negative entry at node {node_id}")

        ask = model.ask_price[i]
        scale = CPS_CHECK * (1.0 + ask * abs(z0[i]))
        if z1[i] > ask * z0[i] + scale or z1[i] < (1.0 - model.lambda_) * ask * z0[i] - scale:
            violations.append(f"spread violated at node {node_id}")

        children = tree.children[i]
        if children:
            for name, values in (("z0", z0), ("z1", z1)):
                expected = sum(tree.cond_prob[c] * values[c] for c in children)
                if abs(values[i] - expected) > CPS_CHECK * (1.0 + abs(values[i])):
                    violations.append(f"martingale violated for {name} at node {node_id}")

    if strict and not np.all(z0 > 0.0):
        violations.append("not strict: some z0 is not positive")

    return violations


def maximise_leaf_pairing(
    model: MarketModel,
    weights: npt.NDArray[np.float64],
    logger: Logger | None = None,
) -> LpResult:
    """max E[z0_T * weights] over the closed polytope.

    Raises NoConsistentPriceSystemError when the polytope is empty.
    """

    block = cps_polytope(model=model)
    c = block.leaf_rows.T @ (model.tree.leaf_prob * weights)

    result = solve_lp(lp=block.linear_program(c=c, sense="max"), logger=logger)
    if result.status == "infeasible":
        raise NoConsistentPriceSystemError("no consistent price system: the model admits arbitrage")

    return result.raise_for_status()


def require_nonempty(model: MarketModel, logger: Logger | None = None) -> None:
    maximise_leaf_pairing(model=model, weights=np.zeros(model.tree.n_leaves), logger=logger)


def strict_interior_point(
    model: MarketModel,
    logger: Logger | None = None,
) -> CpsElement:
    """Point maximising the common slack s of the spread and leaf-positivity rows.

    Raises NoConsistentPriceSystemError when the closed polytope is empty or
    has no strictly feasible point.
    """

    logger = logger or getLogger(__name__)

    block = cps_polytope(model=model)
    g, h = block.barrier_rows()
    n_vars = block.n_vars

    c = np.zeros(n_vars + 1)
    c[-1] = 1.0
    cap = np.zeros(n_vars + 1)
    cap[-1] = 1.0

    result = solve_lp(
        lp=LinearProgram(
            c=c,
            a_ub=np.vstack([np.hstack([g, np.ones((g.shape[0], 1))]), cap]),
            b_ub=np.concatenate([h, [1.0]]),
            a_eq=np.hstack([block.a_eq, np.zeros((block.a_eq.shape[0], 1))]),
            b_eq=block.b_eq,
            sense="max",
        ),
        logger=logger,
    )
    logger.debug("<TCDL:DUAL>:STRICT_INTERIOR:%s:SLACK:%s", result.status, result.value)

    if result.status == "infeasible":
        raise NoConsistentPriceSystemError("no consistent price system: the model admits arbitrage")
    result.raise_for_status()
    if result.value <= BARRIER_STRICT_MARGIN:
        raise NoConsistentPriceSystemError("no strictly consistent price system exists")

    assert result.z is not None
    return element_from_vector(model=model, z=result.z[:n_vars])


def random_interior_point(
    model: MarketModel,
    rng: np.random.Generator,
    logger: Logger | None = None,
) -> CpsElement:
    "(1 - theta) * strict interior point + theta * vertex for a random objective."
    center = strict_interior_point(model=model, logger=logger)

    block = cps_polytope(model=model)
    result = solve_lp(
        lp=block.linear_program(c=rng.standard_normal(block.n_vars), sense="max"),
        logger=logger,
    )
    result.raise_for_status()

    assert result.z is not None
    theta = rng.uniform(0.1, 0.9)

    return element_from_vector(model=model, z=(1.0 - theta) * center.vector + theta * result.z)


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
            probabilities={"0.0": 0.5, "0.1": 0.5},
        ),
    )
    element = strict_interior_point(model=market)

    print("result:", element, cps_check(model=market, element=element, strict=True))
