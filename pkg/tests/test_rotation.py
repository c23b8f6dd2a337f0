import math
from fractions import Fraction

import numpy as np
import pytest

from construction.errors import ReturnPeriodError
from construction.rotation import (
    RotationVector,
    closeness_bound,
    flow,
    lattice_covering_radius,
    lattice_covering_radius_sq,
    next_alpha,
    orbit_offsets,
    return_period,
    rotate,
    rotation_distance,
    vertical_slope,
)

RATIONALS = [(p, r, q) for q in (3, 5, 7, 12) for p in range(1, q) for r in range(q) if (p + 2 * r) % 3 == 0]


def brute_force_radius(alpha, grid=160):
    xs, ys = orbit_offsets(alpha, alpha.q)
    g = (np.arange(grid) + 0.5) / grid
    gx, gy = np.meshgrid(g, g, indexing="ij")
    dx = np.abs(gx[..., None] - xs)
    dy = np.abs(gy[..., None] - ys)
    dx = np.minimum(dx, 1 - dx)
    dy = np.minimum(dy, 1 - dy)
    return np.sqrt(dx**2 + dy**2).min(axis=-1).max()


def simulated_return_period(alpha, b):
    """Count first returns of the flow to x = 0 until the starting height recurs."""
    vx, vy = Fraction(alpha.p, alpha.q), Fraction(alpha.r, alpha.q) + alpha.p * b
    hit = 1 / vx
    y = Fraction(0)
    for count in range(1, 10 * alpha.q + 1):
        y = (y + hit * vy) % 1
        if y == 0:
            return count
    raise AssertionError("no return")


def test_rotation_vector_normalizes():
    alpha = RotationVector(4, 2, -10)
    assert (alpha.p, alpha.r, alpha.q) == (-2, -1, 5)
    assert RotationVector.from_fractions(Fraction(1, 4), Fraction(1, 6)) == RotationVector(3, 2, 12)
    assert RotationVector.from_json(alpha.to_json()) == alpha


def test_zero_denominator_rejected():
    with pytest.raises(ValueError):
        RotationVector(1, 1, 0)


def test_covering_radius_two_fifths_one_fifth():
    alpha = RotationVector(2, 1, 5)
    assert lattice_covering_radius_sq(alpha) == Fraction(1, 10)
    assert lattice_covering_radius(alpha) == pytest.approx(math.sqrt(0.1))


@pytest.mark.parametrize("p,r,q", [(1, 0, 2), (2, 1, 5), (1, 3, 7), (5, 2, 12), (3, 8, 13), (1, 1, 17)])
def test_covering_radius_matches_brute_force(p, r, q):
    alpha = RotationVector(p, r, q)
    exact = lattice_covering_radius(alpha)
    sampled = brute_force_radius(alpha)
    assert sampled <= exact + 1e-12
    assert sampled >= exact - 1 / 160


@pytest.mark.parametrize("b", [1, 13])
def test_return_period_matches_flow_simulation(b):
    for p, r, q in RATIONALS[:50]:
        alpha = RotationVector(p, r, q)
        assert return_period(alpha) == simulated_return_period(alpha, b)


def test_return_period_requires_horizontal_motion():
    with pytest.raises(ReturnPeriodError):
        return_period(RotationVector(0, 1, 3))


def test_vertical_slope():
    alpha = RotationVector(2, 1, 5)
    assert vertical_slope(alpha, 3) == Fraction(1, 2) + 15


def test_flow_at_unit_time_is_rotation():
    alpha = RotationVector(2, 1, 5)
    xs, ys = np.array([0.1, 0.7]), np.array([0.3, 0.95])
    fx, fy = flow(alpha, 4, 1.0, xs, ys)
    rx, ry = rotate(alpha, xs, ys)
    assert np.allclose(fx, rx, atol=1e-12)
    assert np.allclose(np.minimum(abs(fy - ry), 1 - abs(fy - ry)), 0.0, atol=1e-12)


def test_rotate_lift_adds_exact_multiple():
    alpha = RotationVector(2, 1, 5)
    x, y = rotate(alpha, 0.0, 0.0, k=7, lift=True)
    assert (float(x), float(y)) == pytest.approx((2.8, 1.4))


def test_orbit_offsets_are_exact():
    alpha = RotationVector(3, 8, 13)
    xs, ys = orbit_offsets(alpha, 26)
    for k in range(26):
        assert xs[k] == float(Fraction(3 * k % 13, 13))
        assert ys[k] == float(Fraction(8 * k % 13, 13))


@pytest.mark.parametrize("n", [0, 1, 5])
@pytest.mark.parametrize("k", [2, 3, 10])
def test_next_alpha_respects_closeness(n, k):
    alpha = RotationVector(2, 1, 5)
    nxt = next_alpha(alpha, n, k)
    assert nxt != alpha
    assert rotation_distance(nxt, alpha) < closeness_bound(alpha, n)


def test_next_alpha_rejects_small_k():
    with pytest.raises(ValueError):
        next_alpha(RotationVector(2, 1, 5), 0, 1)
