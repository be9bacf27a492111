import math

import numpy as np
import pytest

from helpers import close, fd1, fd2
from qespdm.expr import ParseError
from qespdm.massprofile import BUILTIN, MassProfileError, builtin, constant, eval_profile, \
    make_profile, quadratic, rational2


def test_constant_profile():
    p = constant()
    for x in (-3.0, 0.0, 7.5):
        assert eval_profile(p, x) == (1.0, 0.0, 0.0)


def test_quadratic_at_two():
    assert eval_profile(quadratic(1.0), 2.0) == (4.0, 4.0, 2.0)


def test_rational2_at_origin():
    m, m1, m2 = eval_profile(rational2(2.0), 0.0)
    assert m == 4.0 and m1 == 0.0
    # m = f^2 with f = 1 + 1/(1+x^2): m'' = 2 f'^2 + 2 f f'' = 2 * 2 * (-2) at x = 0
    assert m2 == pytest.approx(-8.0, rel=1e-14)
    f = lambda x: rational2(2.0).m(x)
    assert m2 == pytest.approx(float(fd2(f, 0.0, 1e-4)), rel=1e-6)


@pytest.mark.parametrize("name", sorted(BUILTIN))
def test_builtin_derivatives_match_finite_differences(name):
    p = builtin(name)
    xs = np.linspace(0.3, 4.0, 25)
    m, m1, m2 = p.derivatives(xs)
    floor = np.maximum(np.abs(m), 1.0)
    assert np.all(close(m1, fd1(p.m, xs), 1e-6, floor))
    assert np.all(close(m2, fd2(p.m, xs), 1e-4, floor))


def test_quadratic_domain_excludes_origin():
    p = quadratic()
    with pytest.raises(MassProfileError, match="outside domain"):
        eval_profile(p, -1.0)
    with pytest.raises(MassProfileError, match="not positive"):
        eval_profile(p, 0.0)


def test_positivity_guard():
    with pytest.raises(MassProfileError, match="not positive"):
        make_profile("1 - x^2")
    with pytest.raises(MassProfileError, match="not positive"):
        make_profile("x", probe=(-1.0, 1.0))


def test_positive_on_probe_accepted():
    p = make_profile("1 + x^2", probe=(-2.0, 2.0))
    assert p.text == "(1.0 + (x ^ 2.0))"


def test_undeclared_parameter_is_parse_error():
    with pytest.raises(ParseError):
        make_profile("k*x^2 + 1")


def test_unknown_builtin():
    with pytest.raises(MassProfileError, match="unknown built-in"):
        builtin("cubic")


def test_describe_is_plain_data():
    d = rational2(3.0).describe()
    assert d == {"name": "rational2", "expr": "(((a + (x ^ 2.0)) / (1.0 + (x ^ 2.0))) ^ 2.0)",
                 "params": {"a": 3.0}, "domain": [-math.inf, math.inf]}
