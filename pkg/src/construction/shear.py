"""Shear maps h_{n+1}, the conjugacy stack H_n and the derived maps f_n and p_n.

Stage n stores alpha_n together with the data (b_{n+1}, m_n, theta_n) that defines
h_{n+1}; the stack through stage n therefore holds the shears of stages 0..n-1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from fractions import Fraction
from typing import Optional, Sequence, Tuple

import numpy as np

from chains.crooked_maps import CircleMapPoly, periodic_evaluator
from construction.errors import ConstructionError
from construction.rotation import RotationVector, flow, return_period, rotate, to_longdouble

logger = logging.getLogger(__name__)

SPLIT_BITS = 26
ROUNDTRIP_TOL = 1e-9


class Direction(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class StageParams:
    n: int
    N: int
    eps: float
    alpha: RotationVector
    b: Optional[int] = None
    m: Optional[int] = None
    theta: Optional[CircleMapPoly] = None

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError(f"stage {self.n}: eps must be positive")
        if self.N < 4:
            raise ValueError(f"stage {self.n}: chain size {self.N} is below 4")
        if self.b is not None and self.b < 1:
            raise ValueError(f"stage {self.n}: shear speed b must be >= 1")
        if self.theta is not None and self.m is not None and self.theta.m != self.m:
            raise ValueError(f"stage {self.n}: theta has period 1/{self.theta.m}, expected 1/{self.m}")

    @property
    def complete(self) -> bool:
        """True once the shear data for h_{n+1} is chosen."""
        return self.b is not None and self.m is not None and self.theta is not None

    def with_shear(self, b: int, theta: CircleMapPoly) -> "StageParams":
        return replace(self, b=b, m=return_period(self.alpha), theta=theta)


def _frac_times(xs: np.ndarray, k: int) -> np.ndarray:
    """frac(x * k) for float x and a possibly huge integer k.

    x is split as hi + lo with hi on a 2^-26 grid so hi * k mod 1 is computed in exact
    integer arithmetic; only lo * k carries rounding.
    """
    unit = 1 << SPLIT_BITS
    j = np.floor(xs * unit)
    lo = xs - j / unit
    j_int = np.mod(j.astype(np.int64), unit)
    hi_frac = np.mod(j_int * (k % unit), unit).astype(np.float64) / unit
    lo_frac = np.mod(np.longdouble(lo) * np.longdouble(k), 1).astype(np.float64)
    return np.mod(hi_frac + lo_frac, 1.0)


class ShearMap:
    """h_{n+1}(z) = phi(-Theta(z) / (p b), z) for the flow phi of stage n."""

    def __init__(self, stage: StageParams, direction: Direction = Direction.FORWARD, evaluate=None):
        if not stage.complete:
            raise ConstructionError(f"stage {stage.n} has no shear data")
        if stage.alpha.p == 0:
            raise ConstructionError(f"stage {stage.n}: alpha has p = 0")
        self.stage = stage
        self.direction = Direction(direction)
        self.evaluate = evaluate or periodic_evaluator(stage.theta)
        self._inverse: Optional[ShearMap] = None
        alpha = stage.alpha
        slope = Fraction(alpha.r, alpha.p)
        # omega_x * m = x * (r' + q b m) with r'/m = r/p in lowest terms
        self._k = slope.numerator + alpha.q * stage.b * stage.m
        self._pb = alpha.p * stage.b
        self._qb = alpha.q * stage.b
        self._ratio = to_longdouble(slope)

    @property
    def inverse(self) -> "ShearMap":
        if self._inverse is None:
            other = Direction.INVERSE if self.direction is Direction.FORWARD else Direction.FORWARD
            self._inverse = ShearMap(self.stage, other, self.evaluate)
            self._inverse._inverse = self
        return self._inverse

    def omega(self, xs) -> np.ndarray:
        """omega_x = x (r/p + q b) mod 1/m for x reduced to [0, 1)."""
        xs = np.asarray(xs, dtype=np.float64)
        return _frac_times(np.mod(xs, 1.0), self._k) / self.stage.m

    def theta_big(self, xs, ys) -> np.ndarray:
        """Theta_{n+1}(x, y) = (theta - Id)(y - omega_x), constant along the flow."""
        ys = np.asarray(ys, dtype=np.float64)
        base = np.mod(ys, 1.0) - self.omega(xs)
        return self.evaluate(base)

    def __call__(self, xs, ys, lift: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        big = self.theta_big(xs, ys)
        sign = -1.0 if self.direction is Direction.FORWARD else 1.0
        t = sign * big / float(self._pb)
        return flow(self.stage.alpha, self.stage.b, t, xs, ys, lift=lift)

    def closed_form(self, xs, ys, lift: bool = False) -> Tuple[np.ndarray, np.ndarray]:
        """(x, y) -/+ Theta * (1/(q b), 1 + r/(p q b)), written without the flow."""
        big = np.asarray(self.theta_big(xs, ys), dtype=np.longdouble)
        sign = -1 if self.direction is Direction.FORWARD else 1
        dx = big / np.longdouble(self._qb)
        dy = big + big * self._ratio / np.longdouble(self._qb)
        x = np.asarray(xs, dtype=np.longdouble) + sign * dx
        y = np.asarray(ys, dtype=np.longdouble) + sign * dy
        if not lift:
            x, y = np.mod(x, 1), np.mod(y, 1)
        return x.astype(np.float64), y.astype(np.float64)


def theta_big(stage: StageParams, xs, ys) -> np.ndarray:
    return ShearMap(stage).theta_big(xs, ys)


def shear_apply(stage: StageParams, direction: Direction, xs, ys, lift: bool = False):
    return ShearMap(stage, direction)(xs, ys, lift=lift)


def torus_grid(size: int) -> Tuple[np.ndarray, np.ndarray]:
    """Cell-centred size x size grid on the torus, flattened."""
    axis = (np.arange(size) + 0.5) / size
    xs, ys = np.meshgrid(axis, axis, indexing="ij")
    return xs.ravel(), ys.ravel()


def torus_distance(x0, y0, x1, y1) -> np.ndarray:
    """Sup-norm distance on T^2."""
    dx = np.abs(np.mod(np.asarray(x1) - np.asarray(x0) + 0.5, 1.0) - 0.5)
    dy = np.abs(np.mod(np.asarray(y1) - np.asarray(y0) + 0.5, 1.0) - 0.5)
    return np.maximum(dx, dy)


@dataclass(frozen=True)
class ConjugacyStack:
    """H_n = h_n o ... o h_1; the empty stack is H_0 = Id."""

    shears: Tuple[ShearMap, ...] = ()

    @classmethod
    def from_stages(cls, stages: Sequence[StageParams]) -> "ConjugacyStack":
        """Stack of the shears defined by the given complete stages, in order."""
        return cls(tuple(ShearMap(stage) for stage in stages))

    @property
    def depth(self) -> int:
        return len(self.shears)

    def forward(self, xs, ys, lift: bool = False):
        x, y = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
        for shear in self.shears:
            x, y = shear(x, y, lift=lift)
        return x, y

    def inverse(self, xs, ys, lift: bool = False):
        x, y = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
        for shear in reversed(self.shears):
            x, y = shear.inverse(x, y, lift=lift)
        return x, y


def stack_eval(stack: ConjugacyStack, direction: Direction, xs, ys, lift: bool = False):
    if Direction(direction) is Direction.FORWARD:
        return stack.forward(xs, ys, lift=lift)
    return stack.inverse(xs, ys, lift=lift)


def f_iterate(stack: ConjugacyStack, alpha: RotationVector, xs, ys, k: int = 1, lift: bool = False):
    """f_n^k = H_n^{-1} o R_alpha^k o H_n."""
    x, y = stack.forward(xs, ys, lift=lift)
    x, y = rotate(alpha, x, y, k, lift=lift)
    return stack.inverse(x, y, lift=lift)


def f_eval(stack: ConjugacyStack, alpha: RotationVector, xs, ys, lift: bool = False):
    return f_iterate(stack, alpha, xs, ys, 1, lift=lift)


def p_eval(stack: ConjugacyStack, xs, ys) -> np.ndarray:
    """p_n = pi_1 o H_n, as a point of the circle."""
    x, _ = stack.forward(xs, ys)
    return x


def roundtrip_error(stack: ConjugacyStack, grid: int = 128) -> float:
    """sup distance of H^{-1}(H(z)) from z on a grid."""
    xs, ys = torus_grid(grid)
    bx, by = stack.inverse(*stack.forward(xs, ys))
    return float(np.max(torus_distance(xs, ys, bx, by))) if len(xs) else 0.0


def birkhoff_rotation(
    stack: ConjugacyStack, alpha: RotationVector, seeds: np.ndarray, iterates: int
) -> np.ndarray:
    """Lift displacement of f_n averaged over `iterates` steps, one row per seed point."""
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 2)
    x1, y1 = f_iterate(stack, alpha, seeds[:, 0], seeds[:, 1], iterates, lift=True)
    return np.column_stack([(x1 - seeds[:, 0]) / iterates, (y1 - seeds[:, 1]) / iterates])
