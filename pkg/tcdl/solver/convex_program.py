from logging import getLogger, Logger
from typing import Any, Callable, Literal

import numpy as np
from pydantic import Field, model_validator

from tcdl.errors import IndeterminateError, InfeasibleStartError
from tcdl.solver.core import ArrayModel, as_matrix, as_vector, FloatArray, independent_rows
from tcdl.solver.linear_program import LinearProgram, solve_lp
from tcdl.tolerance import BARRIER_KKT, BARRIER_STRICT_MARGIN

__all__ = [
    "ConvexProgram",
    "ConvexResult",
    "ConvexStatus",
    "find_strictly_feasible",
    "solve_convex",
]

ConvexStatus = Literal["optimal", "indeterminate"]

T0 = 1.0
MU = 10.0
MAX_OUTER = 80
MAX_NEWTON = 60
ARMIJO = 0.25
SHRINK = 0.5
MIN_STEP = 1e-14
CENTERED = 1e-10
NEAR_CENTER = 1e-3
QUADRATIC = 0.1


class ConvexProgram(ArrayModel):
    """min f(z)  s.t.  g z <= h (log barrier),  a_eq z = b_eq.

    `domain_g z < domain_h` describes the open domain of f; those rows are
    only enforced when searching for a start point and during line search.
    """

    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray]
    hessian: Callable[[np.ndarray], np.ndarray]
    n_vars: int = Field(ge=1)
    g: np.ndarray
    h: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    domain_g: np.ndarray
    domain_h: np.ndarray
    start: np.ndarray | None = Field(default=None)

    @model_validator(mode="before")
    @classmethod
    def fill_blocks(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data

        data = dict(data)
        n = int(data["n_vars"])
        for matrix, vector in (("g", "h"), ("a_eq", "b_eq"), ("domain_g", "domain_h")):
            data[matrix] = as_matrix(data.get(matrix), n_cols=n)
            data[vector] = as_vector(data.get(vector), size=data[matrix].shape[0])
        if data.get("start") is not None:
            data["start"] = as_vector(data["start"])

        return data

    @model_validator(mode="after")
    def validate_dimensions(self) -> "ConvexProgram":
        for matrix, vector in (("g", "h"), ("a_eq", "b_eq"), ("domain_g", "domain_h")):
            shape = getattr(self, matrix).shape
            size = getattr(self, vector).size
            if shape != (size, self.n_vars):
                raise ValueError(f"{matrix} has shape {shape}, expected ({size}, {self.n_vars})")
        if self.start is not None and self.start.size != self.n_vars:
            raise ValueError(f"start has size {self.start.size}, expected {self.n_vars}")

        return self


class ConvexResult(ArrayModel):
    status: ConvexStatus
    z: np.ndarray
    value: float
    kkt_residual: float
    ineq: np.ndarray = Field(description="Multipliers of g z <= h, nonnegative.")
    eq: np.ndarray = Field(description="Multipliers of a_eq z = b_eq.")
    outer_iterations: int
    newton_iterations: int

    @property
    def optimal(self) -> bool:
        return self.status == "optimal"

    def raise_for_status(self) -> "ConvexResult":
        if self.status != "optimal":
            raise IndeterminateError(f"barrier solve did not certify, kkt residual {self.kkt_residual:.3g}")

        return self


def _slack(cp: ConvexProgram, z: FloatArray) -> tuple[FloatArray, FloatArray]:
    return cp.h - cp.g @ z, cp.domain_h - cp.domain_g @ z


def _strictly_inside(cp: ConvexProgram, z: FloatArray) -> bool:
    slack, domain_slack = _slack(cp=cp, z=z)

    return bool(np.all(slack > 0.0) and np.all(domain_slack > 0.0))


def find_strictly_feasible(
    cp: ConvexProgram,
    logger: Logger | None = None,
) -> FloatArray:
    """Phase 1: maximise the common slack s of every inequality row via LP.

    Raises InfeasibleStartError when the best slack is not positive.
    """

    logger = logger or getLogger(__name__)

    rows = np.vstack([cp.g, cp.domain_g])
    rhs = np.concatenate([cp.h, cp.domain_h])
    n = cp.n_vars

    if rows.shape[0] == 0:
        if cp.b_eq.size == 0:
            return np.zeros(n)
        z, *_ = np.linalg.lstsq(cp.a_eq, cp.b_eq, rcond=None)
        return z

    a_ub = np.vstack(
        [
            np.hstack([rows, np.ones((rows.shape[0], 1))]),
            np.hstack([np.zeros((1, n)), np.ones((1, 1))]),
        ]
    )
    b_ub = np.concatenate([rhs, [1.0]])
    a_eq = np.hstack([cp.a_eq, np.zeros((cp.a_eq.shape[0], 1))])
    c = np.zeros(n + 1)
    c[-1] = 1.0

    result = solve_lp(
        lp=LinearProgram(
            c=c,
            a_ub=a_ub,
            b_ub=b_ub,
            a_eq=a_eq,
            b_eq=cp.b_eq,
            lb=np.full(n + 1, -np.inf),
            sense="max",
        ),
        logger=logger,
    )
    logger.debug("<TCDL:BARRIER>:PHASE1:%s:SLACK:%s", result.status, result.value)

    if result.status == "infeasible" or (result.optimal and result.value <= BARRIER_STRICT_MARGIN):
        raise InfeasibleStartError("no strictly feasible point exists")
    result.raise_for_status()

    assert result.z is not None
    return result.z[:n]


def _barrier_derivatives(
    cp: ConvexProgram,
    z: FloatArray,
    t: float,
) -> tuple[FloatArray, FloatArray, FloatArray]:
    "Slack, gradient and Hessian of f(z) - (1/t) sum(log(h - g z))."
    slack, _ = _slack(cp=cp, z=z)
    weight = 1.0 / (t * slack)

    gradient = cp.gradient(z) + cp.g.T @ weight
    hessian = cp.hessian(z) + (cp.g.T * (weight / slack)) @ cp.g

    return slack, gradient, hessian


def _newton_step(
    hessian: FloatArray,
    gradient: FloatArray,
    a_eq: FloatArray,
    eq_residual: FloatArray,
) -> tuple[FloatArray, FloatArray]:
    """Solve [H A'; A 0] [d; w] = -[gradient; eq_residual].

    The system is equilibrated first: columns by the Hessian diagonal, then
    equality rows by their norm. Returns the step d and the multipliers w.
    """

    n = gradient.size
    p = a_eq.shape[0]

    diagonal = np.abs(np.diag(hessian))
    col = 1.0 / np.sqrt(np.where(diagonal > 0.0, diagonal, 1.0))
    scaled_a = a_eq * col
    row_norm = np.linalg.norm(scaled_a, axis=1)
    row = 1.0 / np.where(row_norm > 0.0, row_norm, 1.0)

    kkt = np.block(
        [
            [hessian * np.outer(col, col), scaled_a.T * row],
            [scaled_a * row[:, None], np.zeros((p, p))],
        ]
    )
    rhs = -np.concatenate([gradient * col, eq_residual * row])

    try:
        solution = np.linalg.solve(kkt, rhs)
        residual = np.linalg.norm(kkt @ solution - rhs)
        if not np.all(np.isfinite(solution)) or residual > 1e-8 * (1.0 + np.linalg.norm(rhs)):
            raise np.linalg.LinAlgError("inaccurate KKT solve")
    except np.linalg.LinAlgError:
        # flat directions of f make the KKT matrix singular
        solution, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)

    return solution[:n] * col, solution[n:] * row


def _center(
    cp: ConvexProgram,
    a_eq: FloatArray,
    b_eq: FloatArray,
    z: FloatArray,
    t: float,
) -> tuple[FloatArray, int, float]:
    """Damped Newton on f - (1/t) sum(log slack) from a strictly feasible z.

    Returns the point, the Newton steps taken and the Newton decrement of
    t f - sum(log slack) at the returned point.
    """

    def phi(point: FloatArray) -> float:
        slack, _ = _slack(cp=cp, z=point)
        return cp.objective(point) - float(np.sum(np.log(slack))) / t

    eps = np.finfo(float).eps
    decrement = np.inf
    for iteration in range(MAX_NEWTON):
        _, gradient, hessian = _barrier_derivatives(cp=cp, z=z, t=t)
        direction, _ = _newton_step(
            hessian=hessian,
            gradient=gradient,
            a_eq=a_eq,
            eq_residual=a_eq @ z - b_eq,
        )
        slope = float(gradient @ direction)
        decrement = max(-t * slope, 0.0)
        if decrement / 2.0 <= CENTERED:
            return z, iteration, decrement

        current = phi(z)
        allowance = 4.0 * eps * (1.0 + abs(current))

        # pure Newton inside the quadratic region, where phi differences drown in roundoff
        full = z + direction
        if decrement <= QUADRATIC and _strictly_inside(cp=cp, z=full):
            candidate = phi(full)
            if np.isfinite(candidate) and candidate <= current + 256.0 * allowance:
                z = full
                continue

        step = 1.0
        while step > MIN_STEP and not _strictly_inside(cp=cp, z=z + step * direction):
            step *= SHRINK

        while step > MIN_STEP:
            candidate = phi(z + step * direction)
            if np.isfinite(candidate) and candidate <= current + ARMIJO * step * slope + allowance:
                break
            step *= SHRINK

        if step <= MIN_STEP:
            return z, iteration, decrement
        z = z + step * direction

    return z, MAX_NEWTON, decrement


def _multipliers(
    cp: ConvexProgram,
    a_eq: FloatArray,
    b_eq: FloatArray,
    z: FloatArray,
    t: float,
) -> tuple[FloatArray, FloatArray]:
    """Inequality and equality multipliers read off one more Newton system.

    lambda = (1 + (g d) / slack) / (t slack) is the first-order update of
    1 / (t slack) along the step d; w is the multiplier of a_eq.
    """

    slack, gradient, hessian = _barrier_derivatives(cp=cp, z=z, t=t)
    direction, nu = _newton_step(
        hessian=hessian,
        gradient=gradient,
        a_eq=a_eq,
        eq_residual=a_eq @ z - b_eq,
    )
    ineq = (1.0 + (cp.g @ direction) / slack) / (t * slack)

    return ineq, nu


def solve_convex(
    cp: ConvexProgram,
    tol: float = BARRIER_KKT,
    logger: Logger | None = None,
) -> ConvexResult:
    """Log-barrier method with equality-constrained damped Newton centering.

    Starts from `cp.start` when given (it must be strictly feasible), else
    from the phase-1 LP point. When a centering step stalls the method keeps
    the last well-centered point; the KKT residual then decides the status.
    """

    logger = logger or getLogger(__name__)

    if cp.start is not None:
        z = cp.start.copy()
        eq_error = np.max(np.abs(cp.a_eq @ z - cp.b_eq), initial=0.0)
        if not _strictly_inside(cp=cp, z=z) or eq_error > 1e-8 * (1.0 + np.max(np.abs(cp.b_eq), initial=0.0)):
            raise InfeasibleStartError("start point is not strictly feasible")
    else:
        z = find_strictly_feasible(cp=cp, logger=logger)

    rows = independent_rows(matrix=np.hstack([cp.a_eq, cp.b_eq[:, None]]))
    a_eq = cp.a_eq[rows]
    b_eq = cp.b_eq[rows]

    m = cp.h.size
    t = T0
    newton_total = 0
    outer = 0
    for outer in range(1, MAX_OUTER + 1):
        centered, newton, decrement = _center(cp=cp, a_eq=a_eq, b_eq=b_eq, z=z, t=t)
        newton_total += newton
        logger.debug("<TCDL:BARRIER>:OUTER:%s:T:%s:NEWTON:%s:DECREMENT:%s", outer, t, newton, decrement)

        if decrement > NEAR_CENTER and outer > 1:
            logger.debug("<TCDL:BARRIER>:CENTERING_STALLED:T:%s", t)
            t /= MU
            break
        z = centered

        value = cp.objective(z)
        if m == 0 or m / t <= 0.5 * tol * (1.0 + abs(value)):
            break
        t *= MU

    ineq, nu = _multipliers(cp=cp, a_eq=a_eq, b_eq=b_eq, z=z, t=t)

    eq_full = np.zeros(cp.b_eq.size)
    eq_full[rows] = nu

    value = cp.objective(z)
    gradient = cp.gradient(z)
    ineq_clipped = np.maximum(ineq, 0.0)
    stationarity = np.max(np.abs(gradient + cp.g.T @ ineq_clipped + a_eq.T @ nu), initial=0.0) / (
        1.0 + np.max(np.abs(gradient), initial=0.0)
    )
    dual_infeasibility = np.max(-ineq, initial=0.0) / (1.0 + np.max(np.abs(ineq), initial=0.0))
    gap = (m / t) / (1.0 + abs(value))
    eq_residual = np.max(np.abs(cp.a_eq @ z - cp.b_eq), initial=0.0) / (1.0 + np.max(np.abs(cp.b_eq), initial=0.0))
    kkt_residual = float(max(stationarity, dual_infeasibility, gap, eq_residual))

    status: ConvexStatus = "optimal" if kkt_residual <= tol and np.isfinite(value) else "indeterminate"
    if status != "optimal":
        logger.warning(
            "<TCDL:BARRIER>:INDETERMINATE:STATIONARITY:%s:GAP:%s:EQ:%s",
            stationarity,
            gap,
            eq_residual,
        )

    return ConvexResult(
        status=status,
        z=z,
        value=float(value),
        kkt_residual=kkt_residual,
        ineq=ineq_clipped,
        eq=eq_full,
        outer_iterations=outer,
        newton_iterations=newton_total,
    )


if __name__ == "__main__":
    result = solve_convex(
        cp=ConvexProgram(
            objective=lambda z: float((z[0] - 2.0) ** 2),
            gradient=lambda z: np.array([2.0 * (z[0] - 2.0)]),
            hessian=lambda z: np.array([[2.0]]),
            n_vars=1,
            g=[[1.0], [-1.0]],
            h=[1.0, 0.0],
        ),
    )

    print("result:", result.status, result.z, result.value, result.kkt_residual)
