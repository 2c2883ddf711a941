from logging import getLogger, Logger
from typing import Any, Literal

import numpy as np
from pydantic import Field, model_validator
from scipy.optimize import linprog, OptimizeResult

from tcdl.errors import IndeterminateError, InfeasibleError, UnboundedError
from tcdl.solver.core import ArrayModel, as_matrix, as_vector, FloatArray
from tcdl.tolerance import (
    HIGHS_FEASIBILITY,
    LP_FEASIBILITY,
    LP_GAP,
    LP_OPTIMALITY,
    LP_SLACKNESS,
)

__all__ = [
    "LinearProgram",
    "LpResult",
    "LpStatus",
    "SenseType",
    "solve_lp",
]

LpStatus = Literal["optimal", "infeasible", "unbounded", "numerically-indeterminate"]
SenseType = Literal["min", "max"]


class LinearProgram(ArrayModel):
    """min / max c.z  s.t.  a_ub z <= b_ub,  a_eq z = b_eq,  z >= lb.

    `lb` entries may be -inf (free variable). Missing blocks are empty.
    """

    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    lb: np.ndarray
    sense: SenseType = Field(default="min")

    @model_validator(mode="before")
    @classmethod
    def fill_blocks(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data

        data = dict(data)
        c = as_vector(data.get("c"))
        n = c.size
        data["c"] = c
        data["a_ub"] = as_matrix(data.get("a_ub"), n_cols=n)
        data["b_ub"] = as_vector(data.get("b_ub"), size=data["a_ub"].shape[0])
        data["a_eq"] = as_matrix(data.get("a_eq"), n_cols=n)
        data["b_eq"] = as_vector(data.get("b_eq"), size=data["a_eq"].shape[0])
        lb = data.get("lb")
        data["lb"] = np.zeros(n) if lb is None else as_vector(lb)

        return data

    @model_validator(mode="after")
    def validate_dimensions(self) -> "LinearProgram":
        n = self.c.size

        if self.a_ub.shape != (self.b_ub.size, n):
            raise ValueError(f"a_ub has shape {self.a_ub.shape}, expected ({self.b_ub.size}, {n})")
        if self.a_eq.shape != (self.b_eq.size, n):
            raise ValueError(f"a_eq has shape {self.a_eq.shape}, expected ({self.b_eq.size}, {n})")
        if self.lb.size != n:
            raise ValueError(f"lb has size {self.lb.size}, expected {n}")

        for name in ("c", "a_ub", "b_ub", "a_eq", "b_eq"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValueError(f"{name} has nonfinite entries")
        if np.any(np.isnan(self.lb)) or np.any(self.lb == np.inf):
            raise ValueError("lb entries must be finite or -inf")

        return self

    @property
    def n_vars(self) -> int:
        return self.c.size


class LpResult(ArrayModel):
    """Outcome of `solve_lp`.

    Multipliers refer to the minimisation form (objective negated when
    `sense="max"`): `ineq >= 0` per row of `a_ub`, `eq` free per row of `a_eq`.
    """

    status: LpStatus
    z: np.ndarray | None = None
    value: float = np.nan
    ineq: np.ndarray | None = None
    eq: np.ndarray | None = None
    primal_residual: float = np.nan
    slackness: float = np.nan
    gap: float = np.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def raise_for_status(self) -> "LpResult":
        if self.status == "infeasible":
            raise InfeasibleError("linear program is infeasible")
        if self.status == "unbounded":
            raise UnboundedError("linear program is unbounded")
        if self.status == "numerically-indeterminate":
            raise IndeterminateError(
                f"linear program is numerically indeterminate "
                f"(residual={self.primal_residual:.3g}, gap={self.gap:.3g})"
            )

        return self


def _solve_highs(lp: LinearProgram, c: FloatArray) -> OptimizeResult:
    n = lp.n_vars

    return linprog(
        c,
        A_ub=lp.a_ub if lp.b_ub.size else None,
        b_ub=lp.b_ub if lp.b_ub.size else None,
        A_eq=lp.a_eq if lp.b_eq.size else None,
        b_eq=lp.b_eq if lp.b_eq.size else None,
        bounds=[(None if np.isneginf(low) else float(low), None) for low in lp.lb] if n else None,
        method="highs-ds",
        options={
            "primal_feasibility_tolerance": HIGHS_FEASIBILITY,
            "dual_feasibility_tolerance": HIGHS_FEASIBILITY,
        },
    )


def solve_lp(
    lp: LinearProgram,
    logger: Logger | None = None,
) -> LpResult:
    """HiGHS dual simplex, then an independent certificate.

    The returned vertex and multipliers are checked against the original data
    by primal residual, dual sign, complementary slackness and duality gap.
    A result that fails certification is reported as numerically indeterminate.
    """

    logger = logger or getLogger(__name__)

    c_min = -lp.c if lp.sense == "max" else lp.c
    result = _solve_highs(lp=lp, c=c_min)
    iterations = int(getattr(result, "nit", 0) or 0)
    logger.debug("<TCDL:LP>:HIGHS:%s:PIVOTS:%s", result.status, iterations)

    if result.status == 2:
        # presolve may only know "infeasible or unbounded"; a zero objective separates the two
        feasibility = _solve_highs(lp=lp, c=np.zeros(lp.n_vars))
        status: LpStatus = "unbounded" if feasibility.status == 0 else "infeasible"
        logger.debug("<TCDL:LP>:%s", status.upper())
        return LpResult(status=status, iterations=iterations)
    if result.status == 3:
        logger.debug("<TCDL:LP>:UNBOUNDED")
        return LpResult(status="unbounded", iterations=iterations)
    if result.status != 0 or result.x is None:
        logger.warning("<TCDL:LP>:HIGHS_FAILED:%s:%s", result.status, result.message)
        return LpResult(status="numerically-indeterminate", iterations=iterations)

    return _certify(lp=lp, c=c_min, result=result, iterations=iterations, logger=logger)


def _marginals(block: Any, size: int) -> FloatArray:
    if size == 0 or block is None:
        return np.zeros(size)

    return np.asarray(block.marginals, dtype=float)


def _certify(
    lp: LinearProgram,
    c: FloatArray,
    result: OptimizeResult,
    iterations: int,
    logger: Logger,
) -> LpResult:
    z = np.asarray(result.x, dtype=float)
    finite = ~np.isneginf(lp.lb)

    # marginals are d(min value)/d(rhs)
    ineq = -_marginals(getattr(result, "ineqlin", None), lp.b_ub.size)
    eq = _marginals(getattr(result, "eqlin", None), lp.b_eq.size)
    bound = _marginals(getattr(result, "lower", None), lp.n_vars)

    scale_b = 1.0 + max(
        np.abs(lp.b_ub).max(initial=0.0),
        np.abs(lp.b_eq).max(initial=0.0),
        np.abs(lp.lb[finite]).max(initial=0.0),
    )
    scale_c = 1.0 + np.abs(c).max(initial=0.0)

    residuals = [0.0, float(np.max(lp.lb - z, initial=0.0))]
    if lp.b_ub.size:
        residuals.append(float(np.max(lp.a_ub @ z - lp.b_ub)))
    if lp.b_eq.size:
        residuals.append(float(np.max(np.abs(lp.a_eq @ z - lp.b_eq))))
    primal_residual = max(residuals)

    dual_sign = max(float(np.max(-ineq, initial=0.0)), float(np.max(-bound[finite], initial=0.0)))
    reduced = c + lp.a_ub.T @ ineq - lp.a_eq.T @ eq - bound
    dual_residual = float(np.max(np.abs(reduced), initial=0.0))

    slack_ub = lp.b_ub - lp.a_ub @ z
    slack_lb = np.where(finite, z - np.where(finite, lp.lb, 0.0), 0.0)
    slackness = max(
        float(np.max(np.abs(ineq * slack_ub), initial=0.0)),
        float(np.max(np.abs(bound * slack_lb), initial=0.0)),
    )

    primal_value = float(c @ z)
    dual_value = float(-ineq @ lp.b_ub + eq @ lp.b_eq + bound[finite] @ lp.lb[finite])
    gap = abs(primal_value - dual_value) / (1.0 + abs(primal_value))

    status: LpStatus = "optimal"
    if (
        primal_residual > LP_FEASIBILITY * scale_b
        or max(dual_sign, dual_residual) > LP_OPTIMALITY * scale_c
        or slackness > LP_SLACKNESS * scale_b * scale_c
        or gap > LP_GAP
    ):
        logger.warning(
            "<TCDL:LP>:UNCERTIFIED:RESIDUAL:%s:DUAL:%s:SLACKNESS:%s:GAP:%s",
            primal_residual,
            max(dual_sign, dual_residual),
            slackness,
            gap,
        )
        status = "numerically-indeterminate"

    return LpResult(
        status=status,
        z=z,
        value=float(lp.c @ z),
        ineq=np.maximum(ineq, 0.0),
        eq=eq,
        primal_residual=primal_residual,
        slackness=slackness,
        gap=gap,
        iterations=iterations,
    )


if __name__ == "__main__":
    result = solve_lp(
        lp=LinearProgram(
            c=[1.0],
            a_ub=[[1.0]],
            b_ub=[3.0],
            sense="max",
        ),
    )

    print("result:", result.status, result.z, result.value)
