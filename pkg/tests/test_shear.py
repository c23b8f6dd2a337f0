from fractions import Fraction

import numpy as np
import pytest

from chains.crooked_maps import identity_theta, poly_theta
from construction.errors import ConstructionError
from construction.rotation import RotationVector, flow, rotate
from construction.shear import (
    ConjugacyStack,
    Direction,
    ShearMap,
    StageParams,
    _frac_times,
    birkhoff_rotation,
    f_eval,
    f_iterate,
    p_eval,
    roundtrip_error,
    shear_apply,
    stack_eval,
    theta_big,
    torus_distance,
    torus_grid,
)

ALPHA = RotationVector(2, 1, 5)


@pytest.fixture
def stage():
    theta = poly_theta(2, [0.0, 0.05, -0.01], [0.02, 0.004])
    return StageParams(n=0, N=4, eps=0.5, alpha=ALPHA, b=1, m=2, theta=theta)


@pytest.fixture
def points():
    rng = np.random.default_rng(11)
    return rng.random(400), rng.random(400)


def test_stage_completion():
    bare = StageParams(n=0, N=4, eps=0.5, alpha=ALPHA)
    assert not bare.complete
    done = bare.with_shear(3, identity_theta(2))
    assert done.complete and done.m == 2 and done.b == 3


def test_stage_rejects_mismatched_period():
    with pytest.raises(ValueError):
        StageParams(n=0, N=4, eps=0.5, alpha=ALPHA, b=1, m=3, theta=identity_theta(2))


def test_shear_requires_complete_stage():
    with pytest.raises(ConstructionError):
        ShearMap(StageParams(n=0, N=4, eps=0.5, alpha=ALPHA))


def test_frac_times_with_huge_multiplier():
    xs = np.array([0.375, 0.1, 0.9990234375])
    k = 10**15 + 7
    got = _frac_times(xs, k)
    for x, value in zip(xs, got):
        exact = (Fraction(float(x)) * k) % 1
        assert abs(value - float(exact)) < 1e-6


def test_closed_form_matches_flow(stage, points):
    shear = ShearMap(stage)
    fx, fy = shear(*points)
    cx, cy = shear.closed_form(*points)
    assert np.max(torus_distance(fx, fy, cx, cy)) <= 1e-12


def test_theta_big_is_constant_along_the_flow(stage, points):
    shear = ShearMap(stage)
    xs, ys = points
    before = shear.theta_big(xs, ys)
    moved = flow(ALPHA, stage.b, 0.37, xs, ys)
    assert np.allclose(shear.theta_big(*moved), before, atol=1e-9)


def test_roundtrip(stage):
    stack = ConjugacyStack.from_stages([stage, stage])
    assert stack.depth == 2
    assert roundtrip_error(stack) <= 1e-9


def test_shear_commutes_with_rotation(stage, points):
    shear = ShearMap(stage)
    a = shear(*rotate(ALPHA, *points))
    b = rotate(ALPHA, *shear(*points))
    assert np.max(torus_distance(*a, *b)) <= 1e-9


def test_shear_preserves_area(stage):
    shear = ShearMap(stage)
    rng = np.random.default_rng(3)
    xs, ys = 0.1 + 0.8 * rng.random(50), rng.random(50)
    h = 1e-6
    x0, y0 = shear(xs, ys, lift=True)
    xdx, ydx = shear(xs + h, ys, lift=True)
    xdy, ydy = shear(xs, ys + h, lift=True)
    det = ((xdx - x0) * (ydy - y0) - (xdy - x0) * (ydx - y0)) / h**2
    assert np.allclose(det, 1.0, atol=1e-4)


def test_inverse_direction_undoes_forward(stage, points):
    shear = ShearMap(stage, Direction.FORWARD)
    back = shear.inverse(*shear(*points))
    assert np.max(torus_distance(*points, *back)) <= 1e-9
    assert shear.inverse.inverse is shear


def test_empty_stack_is_identity(points):
    stack = ConjugacyStack()
    xs, ys = points
    assert np.array_equal(p_eval(stack, xs, ys), xs)
    fx, fy = f_iterate(stack, ALPHA, xs, ys)
    rx, ry = rotate(ALPHA, xs, ys)
    assert np.array_equal(fx, rx) and np.array_equal(fy, ry)


def test_birkhoff_rotation_recovers_alpha(stage):
    stack = ConjugacyStack.from_stages([stage])
    seeds = np.column_stack(torus_grid(4))
    averages = birkhoff_rotation(stack, ALPHA, seeds, 50)
    assert np.allclose(averages, [0.4, 0.2], atol=1e-9)


def test_torus_distance_wraps():
    assert torus_distance(0.95, 0.5, 0.05, 0.5) == pytest.approx(0.1)
    assert torus_distance(0.2, 0.01, 0.2, 0.99) == pytest.approx(0.02)


def test_module_level_wrappers_agree_with_shear_map(stage, points):
    shear = ShearMap(stage)
    assert np.array_equal(theta_big(stage, *points), shear.theta_big(*points))
    fx, fy = shear_apply(stage, Direction.INVERSE, *points)
    ix, iy = shear.inverse(*points)
    assert np.array_equal(fx, ix) and np.array_equal(fy, iy)

    stack = ConjugacyStack.from_stages([stage])
    back = stack_eval(stack, Direction.INVERSE, *stack_eval(stack, Direction.FORWARD, *points))
    assert np.max(torus_distance(*points, *back)) <= 1e-9
    one = f_eval(stack, ALPHA, *points)
    assert np.array_equal(one[0], f_iterate(stack, ALPHA, *points, 1)[0])
