import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from poisson_hj.groupoid import (
    GroupoidPoint,
    momentum_jacobian,
    pushforward_check,
    source,
    target,
    unit,
)
from poisson_hj.lie_poisson import ChartError, dexp

vec = arrays(np.float64, 3, elements=st.floats(-5, 5))


def chart_points(rng, n, x_radius=0.5, p_radius=3.0):
    def ball(radius):
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * radius * rng.uniform(0, 1, size=(n, 1)) ** (1 / 3)

    return [GroupoidPoint(x, p) for x, p in zip(ball(x_radius), ball(p_radius))]


def test_source_examples():
    assert np.array_equal(source(GroupoidPoint([0, 0, 0], [1, 1, 2])), [1, 1, 2])
    assert np.allclose(source(GroupoidPoint([0.3, 0, 0], [1, 0, 0])), [1, 0, 0], atol=1e-16)


def test_target_examples():
    assert np.array_equal(target(GroupoidPoint([0, 0, 0], [3, 2, 0])), [3, 2, 0])
    assert np.allclose(target(GroupoidPoint([0.3, 0, 0], [1, 0, 0])), [1, 0, 0], atol=1e-16)


def test_maps_match_transpose_inverse_of_dexp(rng):
    for g in chart_points(rng, 50, x_radius=3.0):
        assert np.allclose(source(g), np.linalg.solve(dexp(-g.x).T, g.p), atol=1e-12)
        assert np.allclose(target(g), np.linalg.solve(dexp(g.x).T, g.p), atol=1e-12)


def test_small_rotation_branch_is_continuous(rng):
    p = np.array([0.4, -1.1, 2.0])
    axis = np.array([0.6, 0.0, 0.8])
    for theta in np.geomspace(1e-3, 0.3, 30):
        g = GroupoidPoint(theta * axis, p)
        assert np.allclose(source(g), np.linalg.solve(dexp(-g.x).T, p), atol=1e-14)


@given(vec)
def test_unit_roundtrip_exact(mu):
    g = unit(mu)
    assert np.array_equal(g.x, np.zeros(3))
    assert np.array_equal(source(g), mu)
    assert np.array_equal(target(g), mu)


def test_unit_examples():
    assert unit([0, 0, 0]) == GroupoidPoint(np.zeros(3), np.zeros(3))
    assert np.array_equal(unit([1, 1, 2]).p, [1, 1, 2])


@given(arrays(np.float64, 3, elements=st.floats(-1.5, 1.5)), st.floats(-3, 3))
def test_momentum_along_axis_is_fixed(x, scale):
    g = GroupoidPoint(x, scale * x)
    assert np.allclose(source(g), g.p, atol=1e-13)
    assert np.allclose(target(g), g.p, atol=1e-13)


@given(arrays(np.float64, 3, elements=st.floats(-1.7, 1.7)), vec)
def test_source_and_target_share_norm(x, p):
    g = GroupoidPoint(x, p)
    assert np.linalg.norm(source(g)) == pytest.approx(np.linalg.norm(target(g)), rel=1e-13, abs=1e-13)


def test_source_is_poisson(rng):
    worst = max(pushforward_check("source", g, 1e-6) for g in chart_points(rng, 100))
    assert worst <= 1e-5


def test_target_is_anti_poisson(rng):
    worst = max(pushforward_check("target", g, 1e-6) for g in chart_points(rng, 100))
    assert worst <= 1e-5


def test_wrong_sign_fails_pushforward(rng):
    # the check must discriminate: source is not anti-Poisson
    from poisson_hj.groupoid import CANONICAL_BIVECTOR
    from poisson_hj.lie_poisson import lie_poisson_bivector

    g = GroupoidPoint([0.2, -0.1, 0.3], [1.0, 2.0, -0.5])
    J = momentum_jacobian("source", g)
    wrong = np.abs(J @ CANONICAL_BIVECTOR @ J.T + lie_poisson_bivector(source(g))).max()
    assert wrong > 0.1


@pytest.mark.parametrize("selector", ["source", "target"])
def test_pushforward_at_zero_unit(selector):
    assert pushforward_check(selector, unit([0, 0, 0])) <= 1e-12


@pytest.mark.parametrize("selector", ["source", "target"])
def test_jacobian_converges_at_second_order(selector):
    g = GroupoidPoint([0.4, -0.3, 0.2], [1.0, -2.0, 0.5])
    ref = momentum_jacobian(selector, g, 1e-5)
    e1 = np.abs(momentum_jacobian(selector, g, 0.02) - ref).max()
    e2 = np.abs(momentum_jacobian(selector, g, 0.01) - ref).max()
    assert 3.5 < e1 / e2 < 4.5


def test_pushforward_argument_errors():
    g = unit([1, 2, 3])
    with pytest.raises(ValueError):
        pushforward_check("sideways", g)
    with pytest.raises(ValueError):
        pushforward_check("source", g, fd_step=0.0)
    with pytest.raises(ChartError):
        pushforward_check("source", GroupoidPoint([4.0, 0, 0], [1, 1, 1]))


def test_chart_violation_and_non_finite():
    with pytest.raises(ChartError):
        source(GroupoidPoint([0, 0, np.pi], [1, 0, 0]))
    with pytest.raises(ChartError):
        target(GroupoidPoint([2.0, 2.0, 2.0], [1, 0, 0]))
    with pytest.raises(ValueError):
        GroupoidPoint([np.nan, 0, 0], [1, 0, 0])
