import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tcdl.errors import DomainError, InputError
from tcdl.utility.check_rae import check_inada, check_rae
from tcdl.utility.conjugate import (
    i_eval,
    u_eval,
    u_prime,
    u_second,
    v_eval,
    v_limits,
    v_prime_closed,
    v_second,
)
from tcdl.utility.utility_spec import parse_utility

FAMILIES = ["log", "power:0.5", "power:-1", "power:-3", "power:0.9"]


@pytest.mark.parametrize("text", ["log", " log ", "power:0.5", "power:-2"])
def test_parse_utility(text):
    assert str(parse_utility(text=text)) == text.strip()


@pytest.mark.parametrize(
    "text",
    ["", "exp", "log:2", "power", "power:1", "power:0", "power:2", "power:abc", "power:nan"],
)
def test_parse_utility_rejects(text):
    with pytest.raises(InputError):
        parse_utility(text=text)


def test_power_values():
    utility = parse_utility(text="power:0.5")

    assert u_eval(spec=utility, x=4.0) == pytest.approx(4.0)
    assert u_prime(spec=utility, x=4.0) == pytest.approx(0.5)
    assert u_second(spec=utility, x=4.0) == pytest.approx(-0.0625)
    assert i_eval(spec=utility, y=0.5) == pytest.approx(4.0)


def test_negative_power_is_shifted():
    utility = parse_utility(text="power:-1")

    assert utility.shift == pytest.approx(1.5)
    assert u_eval(spec=utility, x=2.0) == pytest.approx(1.0)
    assert not utility.unbounded_above
    assert v_limits(spec=utility) == (pytest.approx(1.5), -np.inf)


def test_log_values():
    utility = parse_utility(text="log")

    assert u_eval(spec=utility, x=math.e) == pytest.approx(1.0)
    assert v_eval(spec=utility, y=1.0) == pytest.approx(-1.0)
    assert utility.unbounded_above
    assert v_limits(spec=utility) == (np.inf, -np.inf)


def test_outside_the_domain():
    utility = parse_utility(text="log")

    assert u_eval(spec=utility, x=0.0) == -np.inf
    np.testing.assert_array_equal(u_eval(spec=utility, x=np.array([-1.0, 1.0])), [-np.inf, 0.0])
    with pytest.raises(DomainError):
        u_prime(spec=utility, x=0.0)
    with pytest.raises(DomainError):
        v_eval(spec=utility, y=-1.0)


@pytest.mark.parametrize("text", FAMILIES)
@given(y=st.floats(min_value=1e-3, max_value=1e3), x=st.floats(min_value=1e-3, max_value=1e3))
@settings(deadline=None, max_examples=50)
def test_conjugate_dominates(text, x, y):
    utility = parse_utility(text=text)
    v = v_eval(spec=utility, y=y)

    assert v >= u_eval(spec=utility, x=x) - x * y - 1e-9 * (1.0 + abs(v))
    assert v == pytest.approx(u_eval(spec=utility, x=i_eval(spec=utility, y=y)) - y * i_eval(spec=utility, y=y))


@pytest.mark.parametrize("text", FAMILIES)
@given(y=st.floats(min_value=1e-2, max_value=1e2))
@settings(deadline=None, max_examples=30)
def test_conjugate_derivatives(text, y):
    utility = parse_utility(text=text)
    h = 1e-5 * y

    slope = (v_eval(spec=utility, y=y + h) - v_eval(spec=utility, y=y - h)) / (2.0 * h)
    curvature = (v_prime_closed(spec=utility, y=y + h) - v_prime_closed(spec=utility, y=y - h)) / (2.0 * h)

    assert v_prime_closed(spec=utility, y=y) == pytest.approx(slope, rel=1e-5)
    assert v_second(spec=utility, y=y) == pytest.approx(curvature, rel=1e-5)
    assert u_prime(spec=utility, x=i_eval(spec=utility, y=y)) == pytest.approx(y)


@pytest.mark.parametrize("text, value", [("log", 0.0), ("power:0.5", 0.5), ("power:-1", -1.0), ("power:0.9", 0.9)])
def test_check_rae(text, value):
    report = check_rae(spec=parse_utility(text=text))

    assert report.value == value
    assert report.numeric < 1.0
    assert report.passed


@pytest.mark.parametrize("text", FAMILIES)
def test_check_inada(text):
    report = check_inada(spec=parse_utility(text=text))

    assert report.passed
    assert report.u_prime_small > report.u_prime_large
