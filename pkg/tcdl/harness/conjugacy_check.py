from concurrent.futures import ThreadPoolExecutor
from logging import getLogger, Logger
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, computed_field, Field

from tcdl.dual.cps_polytope import CpsElement, random_interior_point, strict_interior_point
from tcdl.dual.solve_dual import dual_grid, DualSolution, solve_dual
from tcdl.dual.superreplication_price import compute_x0
from tcdl.errors import BelowX0Error, InputError, TcdlError
from tcdl.harness.find_yhat import recover_primal_from_dual, slackness_check, solve_at_yhat
from tcdl.market.market_model import MarketModel, model_hash
from tcdl.primal.attainability import positivity_feasible
from tcdl.primal.solve_primal import primal_marginal, solve_primal
from tcdl.tcdl_config import Tolerances
from tcdl.tolerance import BARRIER_KKT
from tcdl.utility.check_rae import check_inada, check_rae
from tcdl.utility.conjugate import v_eval
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "AbortKind",
    "CheckRecord",
    "conjugacy_check",
    "default_x_grid",
    "default_y_grid",
    "DualityReport",
    "x_margin",
    "XRecord",
    "XStatus",
]

XStatus = Literal["ok", "below-x0", "near-x0", "failed"]
AbortKind = Literal["input-error", "indeterminate"]

X_OFFSETS = (0.5, 1.0, 2.0)
X_MARGIN = 0.05
DERIVATIVE_STEP = 1e-3
INADA_Y = 1e-4
INADA_WEALTH = 1e3
BELOW_X0_OFFSET = 0.1
BELOW_X0_FLOOR = 1e-6
SINGULAR_MASS = 1e-10


class XRecord(BaseModel):
    x: float
    status: XStatus
    u: float = Field(default=np.nan, description="u(x), -inf below x0.")
    marginal: float = Field(default=np.nan, description="Central difference of u at x.")
    yhat: float = Field(default=np.nan)
    v_at_yhat: float = Field(default=np.nan)
    gap: float = Field(default=np.nan, description="u(x) - (v(yhat) + x yhat).")
    weak_gap: float = Field(default=np.nan, description="u(x) - min over grid y of v(y) + x y.")
    recovered_value: float = Field(default=np.nan, description="E[U(x + ghat + e_T)] for the dual-recovered payoff.")
    recovery_capital: float = Field(default=np.nan, description="Superreplication price of the recovered payoff.")
    r1: float = Field(default=np.nan)
    r2: float = Field(default=np.nan)
    r3: float = Field(default=np.nan)
    detail: str = ""


class CheckRecord(BaseModel):
    name: str
    location: str
    value: float
    tolerance: float
    passed: bool
    fatal: bool = True
    detail: str = ""


class DualityReport(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    utility: str
    model_hash: str
    seed: int | None = None
    lambda_: float = Field(alias="lambda")
    rho: float
    x0: float
    x_grid: list[float]
    u_values: list[float]
    marginals: list[float]
    y_grid: list[float]
    v_values: list[float]
    v_derivatives: list[float]
    records: list[XRecord]
    checks: list[CheckRecord]
    aborted: AbortKind | None = Field(default=None, description="Set when a stage failed before the checks ran.")

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks if check.fatal)

    def failures(self) -> list[CheckRecord]:
        return [check for check in self.checks if check.fatal and not check.passed]


def default_x_grid(x0: float) -> list[float]:
    return [x0 + offset for offset in X_OFFSETS]


def x_margin(x0: float) -> float:
    return X_MARGIN * (1.0 + abs(x0))


def default_y_grid() -> list[float]:
    return [float(y) for y in np.logspace(-3.0, 3.0, 41)]


def _location(name: str, value: float) -> str:
    return f"{name}={value:.12g}"


def _scale(*values: float) -> float:
    return 1.0 + max(abs(v) for v in values)


def _failed(name: str, location: str, detail: str, fatal: bool = True) -> CheckRecord:
    "Row for a check whose inputs could not be computed; non-fatal rows count as passed."
    return CheckRecord(
        name=name,
        location=location,
        value=np.nan,
        tolerance=0.0,
        passed=not fatal,
        fatal=fatal,
        detail=detail,
    )


def _evaluate_x(
    model: MarketModel,
    utility: UtilitySpec,
    x: float,
    x0: float,
    grid: list[DualSolution],
    start: CpsElement,
    tolerances: Tolerances,
    tol: float,
    logger: Logger,
) -> tuple[XRecord, list[CheckRecord]]:
    location = _location("x", x)
    if x <= x0:
        return XRecord(x=x, status="below-x0", u=-np.inf, detail=f"x0={x0:.12g}"), []
    if x <= x0 + x_margin(x0=x0):
        # yhat blows up as x approaches x0
        detail = f"x within {x_margin(x0=x0):.6g} of x0={x0:.12g}"
        return XRecord(x=x, status="near-x0", detail=detail), [
            _failed(name="x-margin", location=location, detail=detail, fatal=False)
        ]

    try:
        primal = solve_primal(model=model, utility=utility, x=x, x0=x0, tol=tol, logger=logger)
        dual = solve_at_yhat(model=model, utility=utility, x=x, x0=x0, start=start, tol=tol, logger=logger)
        recovered = recover_primal_from_dual(model=model, utility=utility, x=x, dual=dual, x0=x0, logger=logger)
        primal.raise_for_status()
    except TcdlError as e:
        logger.error("<TCDL:HARNESS>:X:%s:FAILED:%s", x, e)
        record = XRecord(x=x, status="failed", detail=f"{type(e).__name__}: {e}")
        return record, [_failed(name="solve", location=location, detail=record.detail)]

    u = primal.value
    v_hat = dual.value
    gap = u - (v_hat + x * dual.y)
    pairs = [s.value + x * s.y for s in grid if s.status == "optimal"] + [v_hat + x * dual.y]
    weak_gap = u - min(pairs)
    recovery_gap = recovered.value - u
    checks = [
        CheckRecord(
            name="strong-duality",
            location=location,
            value=abs(gap) / (1.0 + abs(u)),
            tolerance=tolerances.strong_gap,
            passed=abs(gap) <= tolerances.strong_gap * (1.0 + abs(u)),
        ),
        CheckRecord(
            name="weak-duality",
            location=location,
            value=weak_gap,
            tolerance=tolerances.weak_duality,
            passed=weak_gap <= tolerances.weak_duality,
        ),
        CheckRecord(
            name="recovery-attainable",
            location=location,
            value=recovered.kkt_residual,
            tolerance=tolerances.recovery * (1.0 + abs(x)),
            passed=recovered.status == "optimal",
        ),
        CheckRecord(
            name="recovery-optimality",
            location=location,
            value=recovery_gap,
            tolerance=tolerances.recovery,
            passed=-tolerances.recovery <= recovery_gap <= tolerances.recovery * (1.0 + abs(u)),
        ),
    ]

    record = XRecord(
        x=x,
        status="ok",
        u=u,
        yhat=dual.y,
        v_at_yhat=v_hat,
        gap=gap,
        weak_gap=weak_gap,
        recovered_value=recovered.value,
        recovery_capital=recovered.kkt_residual,
        r3=0.0,
    )

    if recovered.ghat is not None:
        residuals = slackness_check(model=model, primal=recovered, dual=dual, tol=tolerances.slackness)
        record = record.model_copy(update={"r1": residuals.r1, "r2": residuals.r2, "r3": residuals.r3})
        checks.append(
            CheckRecord(
                name="slackness",
                location=location,
                value=max(residuals.r1, residuals.r2),
                tolerance=tolerances.slackness,
                passed=residuals.passed,
            )
        )

    try:
        marginal = primal_marginal(model=model, utility=utility, x=x, x0=x0, tol=tol, logger=logger)
    except BelowX0Error as e:
        # step crosses x0, nothing to compare
        checks.append(_failed(name="marginal", location=location, detail=str(e), fatal=False))
    except TcdlError as e:
        checks.append(_failed(name="marginal", location=location, detail=str(e)))
    else:
        record = record.model_copy(update={"marginal": marginal})
        checks.append(
            CheckRecord(
                name="marginal",
                location=location,
                value=abs(marginal - dual.y),
                tolerance=tolerances.marginal * (1.0 + dual.y),
                passed=abs(marginal - dual.y) <= tolerances.marginal * (1.0 + dual.y),
            )
        )

    logger.debug("<TCDL:HARNESS>:X:%s:U:%s:YHAT:%s:GAP:%s", x, u, dual.y, gap)

    return record, checks


def _derivative_checks(
    model: MarketModel,
    utility: UtilitySpec,
    points: list[float],
    start: CpsElement,
    tolerances: Tolerances,
    tol: float,
    logger: Logger,
) -> list[CheckRecord]:
    checks = []
    for y in points:
        location = _location("y", y)
        h = DERIVATIVE_STEP * y
        try:
            center, upper, lower = (
                solve_dual(
                    model=model, utility=utility, y=y_eval, start=start, tol=tol, logger=logger
                ).raise_for_status()
                for y_eval in (y, y + h, y - h)
            )
        except TcdlError as e:
            checks.append(_failed(name="derivative", location=location, detail=str(e)))
            continue

        difference = (upper.value - lower.value) / (2.0 * h)
        error = abs(center.derivative - difference) / (1.0 + abs(difference))
        checks.append(
            CheckRecord(
                name="derivative",
                location=location,
                value=error,
                tolerance=tolerances.derivative,
                passed=error <= tolerances.derivative,
            )
        )

    return checks


def _shape_checks(
    records: list[XRecord],
    y_grid: list[float],
    grid: list[DualSolution],
    tolerances: Tolerances,
) -> list[CheckRecord]:
    checks = []

    ok = sorted((r for r in records if r.status == "ok"), key=lambda r: r.x)
    for a, b in zip(ok, ok[1:]):
        checks.append(
            CheckRecord(
                name="u-nondecreasing",
                location=_location("x", b.x),
                value=a.u - b.u,
                tolerance=tolerances.grid_shape * _scale(a.u, b.u),
                passed=a.u - b.u <= tolerances.grid_shape * _scale(a.u, b.u),
            )
        )
    slopes = [(b.u - a.u) / (b.x - a.x) for a, b in zip(ok, ok[1:])]
    for (s, t), r in zip(zip(slopes, slopes[1:]), ok[1:]):
        checks.append(
            CheckRecord(
                name="u-concave",
                location=_location("x", r.x),
                value=t - s,
                tolerance=tolerances.grid_shape * _scale(s, t),
                passed=t - s <= tolerances.grid_shape * _scale(s, t),
            )
        )

    points = [(y, s) for y, s in zip(y_grid, grid) if s.status == "optimal"]
    slopes = [(b.value - a.value) / (y_b - y_a) for (y_a, a), (y_b, b) in zip(points, points[1:])]
    for (s, t), (y, _) in zip(zip(slopes, slopes[1:]), points[1:]):
        checks.append(
            CheckRecord(
                name="v-convex",
                location=_location("y", y),
                value=s - t,
                tolerance=tolerances.grid_shape * _scale(s, t),
                passed=s - t <= tolerances.grid_shape * _scale(s, t),
            )
        )
    for (_, a), (y, b) in zip(points, points[1:]):
        checks.append(
            CheckRecord(
                name="v-derivative-increasing",
                location=_location("y", y),
                value=a.derivative - b.derivative,
                tolerance=tolerances.derivative * _scale(a.derivative, b.derivative),
                passed=a.derivative - b.derivative <= tolerances.derivative * _scale(a.derivative, b.derivative),
            )
        )

    return checks


def _y_checks(
    model: MarketModel,
    utility: UtilitySpec,
    y_grid: list[float],
    grid: list[DualSolution],
    records: list[XRecord],
    tolerances: Tolerances,
) -> list[CheckRecord]:
    checks = []
    ok = [r for r in records if r.status == "ok"]
    for y, solution in zip(y_grid, grid):
        location = _location("y", y)
        if solution.status != "optimal":
            checks.append(
                CheckRecord(
                    name="dual-solve",
                    location=location,
                    value=solution.kkt_residual,
                    tolerance=BARRIER_KKT,
                    passed=False,
                )
            )
            continue

        # v(y) >= V(y) - y rho
        bound = v_eval(spec=utility, y=y) - y * model.rho
        checks.append(
            CheckRecord(
                name="lower-bound",
                location=location,
                value=bound - solution.value,
                tolerance=tolerances.conjugacy,
                passed=bound - solution.value <= tolerances.conjugacy * _scale(bound),
            )
        )
        if ok:
            sup = max(r.u - r.x * y for r in ok)
            checks.append(
                CheckRecord(
                    name="conjugacy",
                    location=location,
                    value=sup - solution.value,
                    tolerance=tolerances.conjugacy,
                    passed=sup - solution.value <= tolerances.conjugacy * _scale(sup),
                )
            )

    return checks


def _x0_checks(
    model: MarketModel,
    utility: UtilitySpec,
    x0: float,
    y_grid: list[float],
    grid: list[DualSolution],
    start: CpsElement,
    tolerances: Tolerances,
    tol: float,
    logger: Logger,
) -> list[CheckRecord]:
    checks = []

    points = [(y, s) for y, s in zip(y_grid, grid) if s.status == "optimal"]
    if len(points) >= 2:
        (y_a, a), (y_b, b) = points[-2:]
        slope = (b.value - a.value) / (y_b - y_a)
        passed = abs(slope + x0) <= tolerances.x0_slope
        if not passed:
            logger.warning("<TCDL:HARNESS>:X0_SLOPE:SLOPE:%s:X0:%s", slope, x0)
        checks.append(
            CheckRecord(
                name="x0-slope",
                location=_location("y", y_b),
                value=abs(slope + x0),
                tolerance=tolerances.x0_slope,
                passed=passed,
                fatal=False,
                detail=f"grid slope {slope:.12g}",
            )
        )

    location = _location("x", x0 - BELOW_X0_OFFSET)
    try:
        feasible = positivity_feasible(model=model, x=x0 - BELOW_X0_OFFSET, floor=BELOW_X0_FLOOR, logger=logger)
    except TcdlError as e:
        checks.append(_failed(name="below-x0-certificate", location=location, detail=f"{type(e).__name__}: {e}"))
    else:
        checks.append(
            CheckRecord(
                name="below-x0-certificate",
                location=location,
                value=float(feasible),
                tolerance=0.0,
                passed=not feasible,
            )
        )

    if utility.unbounded_above:
        try:
            solution = solve_dual(model=model, utility=utility, y=INADA_Y, start=start, tol=tol, logger=logger)
            wealth = -solution.derivative
            passed = solution.status == "optimal" and wealth >= INADA_WEALTH
        except TcdlError as e:
            logger.error("<TCDL:HARNESS>:INADA:FAILED:%s", e)
            wealth, passed = np.nan, False
        checks.append(
            CheckRecord(
                name="inada-v",
                location=_location("y", INADA_Y),
                value=wealth,
                tolerance=INADA_WEALTH,
                passed=passed,
                detail="-v'(y) must be large near 0",
            )
        )

    return checks


def _utility_checks(utility: UtilitySpec) -> list[CheckRecord]:
    elasticity = check_rae(spec=utility)
    inada = check_inada(spec=utility)

    return [
        CheckRecord(
            name="rae",
            location=str(utility),
            value=elasticity.numeric,
            tolerance=1.0,
            passed=elasticity.passed,
            detail=f"closed form {elasticity.value:g}",
        ),
        CheckRecord(
            name="inada-u",
            location=str(utility),
            value=inada.u_prime_large,
            tolerance=0.0,
            passed=inada.passed,
            detail=f"U'({inada.x_small:g})={inada.u_prime_small:g}",
        ),
    ]


def _uniqueness_check(
    model: MarketModel,
    utility: UtilitySpec,
    reference: DualSolution,
    restarts: int,
    seed: int,
    tolerances: Tolerances,
    tol: float,
    logger: Logger,
) -> CheckRecord:
    rng = np.random.default_rng(seed)
    density = reference.leaf_density(model=model)

    spread = 0.0
    for _ in range(restarts):
        try:
            solution = solve_dual(
                model=model,
                utility=utility,
                y=reference.y,
                start=random_interior_point(model=model, rng=rng, logger=logger),
                tol=tol,
                logger=logger,
            ).raise_for_status()
        except TcdlError as e:
            return _failed(name="uniqueness", location=_location("y", reference.y), detail=str(e))
        spread = max(spread, float(np.max(np.abs(solution.leaf_density(model=model) - density))))

    return CheckRecord(
        name="uniqueness",
        location=_location("y", reference.y),
        value=spread,
        tolerance=tolerances.uniqueness,
        passed=spread <= tolerances.uniqueness,
        detail=f"{restarts} restarts",
    )


def conjugacy_check(
    model: MarketModel,
    utility: UtilitySpec,
    x_grid: list[float] | None = None,
    y_grid: list[float] | None = None,
    derivative_points: list[float] | None = None,
    restarts: int = 5,
    seed: int | None = None,
    tolerances: Tolerances | None = None,
    tol: float = BARRIER_KKT,
    jobs: int = 1,
    logger: Logger | None = None,
) -> DualityReport:
    """Evaluate u and v on their grids and check the duality relations between them.

    Per x: strong and weak duality, recovery of the primal optimizer from the
    dual one, slackness, and u'(x) = yhat. Per y: v(y) >= sup_x u(x) - xy on
    the grid and v(y) >= V(y) - y rho. Globally: envelope derivative, grid
    shape, x0 characterisation, utility conditions and uniqueness of the
    dual density.
    """

    logger = logger or getLogger(__name__)
    tolerances = tolerances or Tolerances()

    y_grid = sorted(y_grid) if y_grid is not None else default_y_grid()
    if derivative_points is None:
        derivative_points = [0.1, 1.0, 10.0]

    def aborted(stage: str, error: TcdlError, x0: float, x_grid: list[float]) -> DualityReport:
        "Report holding a fatal `stage` row; nothing past the failed stage was evaluated."
        detail = f"{type(error).__name__}: {error}"
        logger.error("<TCDL:HARNESS>:STAGE:%s:FAILED:%s", stage, detail)

        return DualityReport(
            utility=str(utility),
            model_hash=model_hash(model=model),
            seed=seed,
            lambda_=model.lambda_,
            rho=model.rho,
            x0=x0,
            x_grid=x_grid,
            u_values=[np.nan] * len(x_grid),
            marginals=[np.nan] * len(x_grid),
            y_grid=y_grid,
            v_values=[np.nan] * len(y_grid),
            v_derivatives=[np.nan] * len(y_grid),
            records=[XRecord(x=x, status="failed", detail=f"{stage} failed") for x in x_grid],
            checks=[_failed(name="stage", location=stage, detail=detail)] + _utility_checks(utility=utility),
            aborted="input-error" if isinstance(error, InputError) else "indeterminate",
        )

    try:
        x0 = compute_x0(model=model, logger=logger)
    except TcdlError as e:
        return aborted(stage="x0", error=e, x0=np.nan, x_grid=sorted(x_grid or []))
    x_grid = sorted(x_grid) if x_grid is not None else default_x_grid(x0=x0)

    try:
        start = strict_interior_point(model=model, logger=logger)
    except TcdlError as e:
        return aborted(stage="interior-point", error=e, x0=x0, x_grid=x_grid)
    try:
        grid = dual_grid(model=model, utility=utility, y_grid=y_grid, jobs=jobs, tol=tol, logger=logger)
    except TcdlError as e:
        return aborted(stage="dual-grid", error=e, x0=x0, x_grid=x_grid)

    def evaluate(x: float) -> tuple[XRecord, list[CheckRecord]]:
        return _evaluate_x(
            model=model,
            utility=utility,
            x=x,
            x0=x0,
            grid=grid,
            start=start,
            tolerances=tolerances,
            tol=tol,
            logger=logger,
        )

    if jobs <= 1:
        outcomes = [evaluate(x) for x in x_grid]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            outcomes = list(executor.map(evaluate, x_grid))

    records = [record for record, _ in outcomes]
    checks = [check for _, x_checks in outcomes for check in x_checks]

    checks += _y_checks(model=model, utility=utility, y_grid=y_grid, grid=grid, records=records, tolerances=tolerances)
    checks += _derivative_checks(
        model=model,
        utility=utility,
        points=derivative_points,
        start=start,
        tolerances=tolerances,
        tol=tol,
        logger=logger,
    )
    checks += _shape_checks(records=records, y_grid=y_grid, grid=grid, tolerances=tolerances)
    checks += _x0_checks(
        model=model,
        utility=utility,
        x0=x0,
        y_grid=y_grid,
        grid=grid,
        start=start,
        tolerances=tolerances,
        tol=tol,
        logger=logger,
    )
    checks += _utility_checks(utility=utility)

    masses = [abs(s.singular_mass) for s in grid if s.status == "optimal"]
    if masses:
        checks.append(
            CheckRecord(
                name="singular-mass",
                location="y-grid",
                value=max(masses),
                tolerance=SINGULAR_MASS,
                passed=max(masses) <= SINGULAR_MASS,
            )
        )

    if restarts > 0:
        try:
            reference = solve_dual(
                model=model, utility=utility, y=1.0, start=start, tol=tol, logger=logger
            ).raise_for_status()
        except TcdlError as e:
            checks.append(_failed(name="uniqueness", location="y=1", detail=str(e)))
        else:
            checks.append(
                _uniqueness_check(
                    model=model,
                    utility=utility,
                    reference=reference,
                    restarts=restarts,
                    seed=seed if seed is not None else 0,
                    tolerances=tolerances,
                    tol=tol,
                    logger=logger,
                )
            )

    report = DualityReport(
        utility=str(utility),
        model_hash=model_hash(model=model),
        seed=seed,
        lambda_=model.lambda_,
        rho=model.rho,
        x0=x0,
        x_grid=[r.x for r in records],
        u_values=[r.u for r in records],
        marginals=[r.marginal for r in records],
        y_grid=y_grid,
        v_values=[s.value if s.status == "optimal" else np.nan for s in grid],
        v_derivatives=[s.derivative if s.status == "optimal" else np.nan for s in grid],
        records=records,
        checks=checks,
    )

    for failure in report.failures():
        logger.error("<TCDL:HARNESS>:CHECK_FAILED:%s:%s:%s", failure.name, failure.location, failure.value)

    return report


if __name__ == "__main__":
    from tcdl.harness.random_instance import random_instance
    from tcdl.utility.utility_spec import parse_utility

    market = random_instance(seed=42, depth=2, branching=2, lambda_=0.1, rho=0.2)
    result = conjugacy_check(model=market, utility=parse_utility(text="log"), restarts=2)

    print("result:", result.passed, [(c.name, c.location) for c in result.failures()])
