from typing import overload

import numpy as np
import numpy.typing as npt

from tcdl.errors import DomainError
from tcdl.utility.utility_spec import UtilitySpec

__all__ = [
    "i_eval",
    "i_prime",
    "u_eval",
    "u_prime",
    "u_second",
    "v_eval",
    "v_limits",
    "v_prime_closed",
    "v_second",
]

FloatArray = npt.NDArray[np.float64]


@overload
def _unwrap(value: FloatArray, like: float) -> float: ...
@overload
def _unwrap(value: FloatArray, like: FloatArray) -> FloatArray: ...
def _unwrap(value, like):
    if np.ndim(like) == 0:
        return float(value)

    return value


def _positive(name: str, value: float | FloatArray) -> FloatArray:
    array = np.asarray(value, dtype=float)
    if not np.all(array > 0.0):
        raise DomainError(f"{name} is defined for positive arguments only")

    return array


@overload
def u_eval(spec: UtilitySpec, x: float) -> float: ...
@overload
def u_eval(spec: UtilitySpec, x: FloatArray) -> FloatArray: ...
def u_eval(spec, x):
    "U(x), with U(x) = -inf for x <= 0."
    array = np.asarray(x, dtype=float)
    safe = np.where(array > 0.0, array, 1.0)

    if spec.family == "log":
        value = np.log(safe)
    else:
        value = np.power(safe, spec.alpha) / spec.alpha + spec.shift

    return _unwrap(np.where(array > 0.0, value, -np.inf), x)


@overload
def u_prime(spec: UtilitySpec, x: float) -> float: ...
@overload
def u_prime(spec: UtilitySpec, x: FloatArray) -> FloatArray: ...
def u_prime(spec, x):
    array = _positive(name="U'", value=x)

    if spec.family == "log":
        return _unwrap(1.0 / array, x)

    return _unwrap(np.power(array, spec.alpha - 1.0), x)


@overload
def u_second(spec: UtilitySpec, x: float) -> float: ...
@overload
def u_second(spec: UtilitySpec, x: FloatArray) -> FloatArray: ...
def u_second(spec, x):
    array = _positive(name="U''", value=x)

    if spec.family == "log":
        return _unwrap(-1.0 / array**2, x)

    return _unwrap((spec.alpha - 1.0) * np.power(array, spec.alpha - 2.0), x)


@overload
def i_eval(spec: UtilitySpec, y: float) -> float: ...
@overload
def i_eval(spec: UtilitySpec, y: FloatArray) -> FloatArray: ...
def i_eval(spec, y):
    "I = (U')^{-1}: 1/y for log, y^{1/(alpha-1)} for power."
    array = _positive(name="I", value=y)

    if spec.family == "log":
        return _unwrap(1.0 / array, y)

    return _unwrap(np.power(array, 1.0 / (spec.alpha - 1.0)), y)


@overload
def i_prime(spec: UtilitySpec, y: float) -> float: ...
@overload
def i_prime(spec: UtilitySpec, y: FloatArray) -> FloatArray: ...
def i_prime(spec, y):
    array = _positive(name="I'", value=y)

    if spec.family == "log":
        return _unwrap(-1.0 / array**2, y)

    exponent = 1.0 / (spec.alpha - 1.0)

    return _unwrap(exponent * np.power(array, exponent - 1.0), y)


@overload
def v_eval(spec: UtilitySpec, y: float) -> float: ...
@overload
def v_eval(spec: UtilitySpec, y: FloatArray) -> FloatArray: ...
def v_eval(spec, y):
    "V(y) = sup_{x>0} U(x) - xy."
    array = _positive(name="V", value=y)

    if spec.family == "log":
        return _unwrap(-np.log(array) - 1.0, y)

    alpha = spec.alpha
    beta = alpha / (alpha - 1.0)

    return _unwrap((1.0 - alpha) / alpha * np.power(array, beta) + spec.shift, y)


@overload
def v_prime_closed(spec: UtilitySpec, y: float) -> float: ...
@overload
def v_prime_closed(spec: UtilitySpec, y: FloatArray) -> FloatArray: ...
def v_prime_closed(spec, y):
    return -i_eval(spec=spec, y=y)


@overload
def v_second(spec: UtilitySpec, y: float) -> float: ...
@overload
def v_second(spec: UtilitySpec, y: FloatArray) -> FloatArray: ...
def v_second(spec, y):
    return -i_prime(spec=spec, y=y)


def v_limits(spec: UtilitySpec) -> tuple[float, float]:
    "(V(0+), V(inf)) = (U(inf), U(0+))."
    if spec.family == "log":
        return np.inf, -np.inf
    if spec.alpha is not None and spec.alpha > 0.0:
        return np.inf, 0.0

    return spec.shift, -np.inf


if __name__ == "__main__":
    from tcdl.utility.utility_spec import parse_utility

    utility = parse_utility(text="power:0.5")

    print("result:", u_eval(spec=utility, x=4.0), v_eval(spec=utility, y=2.0))
