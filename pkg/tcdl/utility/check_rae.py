import numpy as np
from pydantic import BaseModel, Field

from tcdl.utility.conjugate import u_eval, u_prime
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "check_inada",
    "check_rae",
    "ElasticityReport",
    "InadaReport",
]

ELASTICITY_GRID = np.logspace(2, 8, 13)
INADA_HIGH = 1e6
INADA_LOW = 1e-6


class ElasticityReport(BaseModel):
    value: float = Field(description="Closed-form asymptotic elasticity AE(U).")
    numeric: float = Field(description="Max of x U'(x) / U(x) over the tail grid.")
    passed: bool


class InadaReport(BaseModel):
    x_small: float
    u_prime_small: float
    x_large: float
    u_prime_large: float
    numeric_passed: bool = Field(description="Both thresholds crossed inside double range.")
    passed: bool


def check_rae(spec: UtilitySpec) -> ElasticityReport:
    """Asymptotic elasticity lim sup x U'(x) / U(x).

    The ratio is taken on the unshifted utility, since an additive constant
    does not change the limit but distorts it on a finite grid.
    """

    if spec.family == "log":
        value = 0.0
        ratio = 1.0 / np.log(ELASTICITY_GRID)
    else:
        value = float(spec.alpha)
        unshifted = u_eval(spec=spec, x=ELASTICITY_GRID) - spec.shift
        ratio = ELASTICITY_GRID * u_prime(spec=spec, x=ELASTICITY_GRID) / unshifted

    numeric = float(np.max(ratio))

    return ElasticityReport(
        value=value,
        numeric=numeric,
        passed=value < 1.0 and numeric < 1.0,
    )


def check_inada(spec: UtilitySpec) -> InadaReport:
    "U'(0+) = inf and U'(inf) = 0, pushing the grid out by decades until U' crosses the thresholds."
    exponent = 10
    while True:
        x_small = 10.0 ** (-exponent)
        u_prime_small = u_prime(spec=spec, x=x_small)
        if u_prime_small > INADA_HIGH or exponent >= 300:
            break
        exponent += 1

    exponent = 10
    while True:
        x_large = 10.0**exponent
        u_prime_large = u_prime(spec=spec, x=x_large)
        if u_prime_large < INADA_LOW or exponent >= 300:
            break
        exponent += 1

    numeric_passed = u_prime_small > INADA_HIGH and u_prime_large < INADA_LOW
    # U' = x^(alpha - 1) with alpha < 1 diverges at 0 and vanishes at infinity
    closed_form = spec.family == "log" or (spec.alpha is not None and spec.alpha < 1.0)

    return InadaReport(
        x_small=x_small,
        u_prime_small=u_prime_small,
        x_large=x_large,
        u_prime_large=u_prime_large,
        numeric_passed=numeric_passed,
        passed=numeric_passed or closed_form,
    )


if __name__ == "__main__":
    from tcdl.utility.utility_spec import parse_utility

    for text in ("log", "power:0.9", "power:-1"):
        utility = parse_utility(text=text)
        print("result:", text, check_rae(spec=utility), check_inada(spec=utility))
