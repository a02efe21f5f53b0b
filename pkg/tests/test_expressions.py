import numpy as np
import pytest

from glharmonic.expressions import Expression, ExpressionError, component_env


def test_arithmetic_and_functions():
    e = Expression("exp(2*x1) + sin(x2) - 3/(1 + abs(x1))", scalars=["x1", "x2"])
    env = {"x1": np.array([0.0, 1.0]), "x2": np.array([np.pi / 2, 0.0])}
    out = e(env)
    assert out[0] == pytest.approx(1.0 + 1.0 - 3.0)
    assert out[1] == pytest.approx(np.exp(2) + 0.0 - 1.5)


def test_ln_alias_and_constants():
    e = Expression("ln(e) + cos(pi)", scalars=[])
    assert e({}) == pytest.approx(0.0)


def test_unary_minus():
    e = Expression("-x1 + -(2)", scalars=["x1"])
    assert e({"x1": 3.0}) == pytest.approx(-5.0)


def test_dot_of_declared_vectors():
    e = Expression("ln(abs(dot(x, y)))", scalars=[], vectors=["x", "y"])
    env = {"x": np.array([[1.0, 2.0]]), "y": np.array([[3.0, 0.5]])}
    assert e(env)[0] == pytest.approx(np.log(4.0))


def test_vectorized_over_grids():
    e = Expression("x1*x2", scalars=["x1", "x2"])
    pts = np.random.default_rng(0).normal(size=(4, 5, 2))
    out = e(component_env("x", pts))
    assert out.shape == (4, 5)
    assert np.allclose(out, pts[..., 0] * pts[..., 1])


@pytest.mark.parametrize("bad", [
    "__import__('os')",
    "x1 ** 2",
    "lambda: 1",
    "x1.real",
    "[1, 2]",
    "unknown_fn(x1)",
    "zzz + 1",
    "dot(x1, x1)",
    "x",               # bare vector outside dot
    "'str'",
    "1 if x1 else 2",
])
def test_rejects_outside_grammar(bad):
    with pytest.raises(ExpressionError):
        Expression(bad, scalars=["x1"], vectors=["x"])


def test_component_env_names():
    env = component_env("a", np.zeros((3, 2)))
    assert set(env) == {"a1", "a2"}
