"""Exact rational rotation vectors, the auxiliary linear flow and orbit-lattice geometry."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Tuple

import numpy as np

from construction.errors import ReturnPeriodError


def to_longdouble(value: Fraction) -> np.longdouble:
    """Extended-precision value of an exact rational, integer part split off first."""
    value = Fraction(value)
    whole, rest = divmod(value.numerator, value.denominator)
    return np.longdouble(whole) + np.longdouble(rest) / np.longdouble(value.denominator)


@dataclass(frozen=True)
class RotationVector:
    """alpha = (p/q, r/q) with gcd(p, r, q) = 1 and q >= 1."""

    p: int
    r: int
    q: int

    def __post_init__(self):
        if self.q == 0:
            raise ValueError("rotation vector denominator must be nonzero")
        p, r, q = int(self.p), int(self.r), int(self.q)
        if q < 0:
            p, r, q = -p, -r, -q
        g = math.gcd(math.gcd(p, r), q)
        object.__setattr__(self, "p", p // g)
        object.__setattr__(self, "r", r // g)
        object.__setattr__(self, "q", q // g)

    @classmethod
    def from_fractions(cls, x: Fraction, y: Fraction) -> "RotationVector":
        q = x.denominator * y.denominator // math.gcd(x.denominator, y.denominator)
        return cls(int(x * q), int(y * q), q)

    @property
    def x(self) -> Fraction:
        return Fraction(self.p, self.q)

    @property
    def y(self) -> Fraction:
        return Fraction(self.r, self.q)

    def as_floats(self) -> Tuple[float, float]:
        return float(self.x), float(self.y)

    def reduced_floats(self, k: int = 1) -> Tuple[np.longdouble, np.longdouble]:
        """k * alpha mod 1, reduced exactly before rounding."""
        return (
            to_longdouble(Fraction((k * self.p) % self.q, self.q)),
            to_longdouble(Fraction((k * self.r) % self.q, self.q)),
        )

    def to_json(self) -> Dict[str, str]:
        return {"p": str(self.p), "q": str(self.q), "r": str(self.r)}

    @classmethod
    def from_json(cls, doc: Dict[str, str]) -> "RotationVector":
        return cls(int(doc["p"]), int(doc["r"]), int(doc["q"]))

    def __str__(self) -> str:
        return f"({self.x}, {self.y})"


def return_period(alpha: RotationVector) -> int:
    """Period of the first-return rotation r/p mod 1 of the flow on a vertical circle."""
    if alpha.p == 0:
        raise ReturnPeriodError(f"alpha {alpha} has zero horizontal speed; the flow never returns")
    return Fraction(alpha.r, alpha.p).denominator


def flow_speed(alpha: RotationVector, b: int) -> Tuple[Fraction, Fraction]:
    """Velocity alpha + (0, p b) of the linear flow."""
    return alpha.x, alpha.y + alpha.p * b


def vertical_slope(alpha: RotationVector, b: int) -> Fraction:
    """Vertical displacement per unit horizontal displacement, r/p + q b."""
    return Fraction(alpha.r, alpha.p) + alpha.q * b


def flow(alpha: RotationVector, b: int, t, xs, ys, lift: bool = False):
    """phi(t, (x, y)) = (x, y) + t alpha + t (0, p b), reduced mod 1 unless `lift`."""
    vx, vy = flow_speed(alpha, b)
    t = np.asarray(t, dtype=np.longdouble)
    x = np.asarray(xs, dtype=np.longdouble) + t * to_longdouble(vx)
    y = np.asarray(ys, dtype=np.longdouble) + t * to_longdouble(vy)
    if not lift:
        x, y = np.mod(x, 1), np.mod(y, 1)
    return x.astype(np.float64), y.astype(np.float64)


def rotate(alpha: RotationVector, xs, ys, k: int = 1, lift: bool = False):
    """R_alpha^k; on the lift the exact k alpha is added, on the torus k alpha mod 1."""
    if lift:
        dx, dy = to_longdouble(alpha.x * k), to_longdouble(alpha.y * k)
    else:
        dx, dy = alpha.reduced_floats(k)
    x = np.asarray(xs, dtype=np.longdouble) + dx
    y = np.asarray(ys, dtype=np.longdouble) + dy
    if not lift:
        x, y = np.mod(x, 1), np.mod(y, 1)
    return x.astype(np.float64), y.astype(np.float64)


def orbit_offsets(alpha: RotationVector, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """k alpha mod 1 for k = 0..count-1, reduced in integer arithmetic."""
    k = np.arange(count, dtype=np.int64)
    if alpha.q < 2**31 and count < 2**31:
        px = (k * (alpha.p % alpha.q)) % alpha.q
        ry = (k * (alpha.r % alpha.q)) % alpha.q
    else:
        px = np.array([(int(i) * alpha.p) % alpha.q for i in k], dtype=object)
        ry = np.array([(int(i) * alpha.r) % alpha.q for i in k], dtype=object)
    return (px / alpha.q).astype(np.float64), (ry / alpha.q).astype(np.float64)


def _lagrange_reduce(u: Tuple[int, int], v: Tuple[int, int]) -> Tuple[Tuple[int, int], Tuple[int, int]]:
    def norm(w):
        return w[0] * w[0] + w[1] * w[1]

    def dot(a, b):
        return a[0] * b[0] + a[1] * b[1]

    if norm(u) > norm(v):
        u, v = v, u
    while True:
        mu = Fraction(dot(u, v), norm(u))
        k = math.floor(mu + Fraction(1, 2))
        v = (v[0] - k * u[0], v[1] - k * u[1])
        if norm(v) >= norm(u):
            return u, v
        u, v = v, u


def lattice_covering_radius_sq(alpha: RotationVector) -> Fraction:
    """Exact squared covering radius of {k alpha mod 1} in the flat torus.

    The orbit closure is the lattice (Z(p, r) + qZ^2) / q. Its covering radius is the
    circumradius of a non-obtuse Delaunay triangle spanned by a reduced basis.
    """
    q = alpha.q
    # Hermite basis; the lattice has index q in Z^2 because gcd(p, r, q) = 1
    g, s, _ = _ext_gcd(alpha.p % q, q)
    u = (g, (s * alpha.r) % q)
    v = (0, q // g)
    u, v = _lagrange_reduce(u, v)
    if u[0] * v[0] + u[1] * v[1] < 0:
        v = (-v[0], -v[1])
    w = (v[0] - u[0], v[1] - u[1])
    det = abs(u[0] * v[1] - u[1] * v[0])
    nu, nv, nw = (a[0] ** 2 + a[1] ** 2 for a in (u, v, w))
    radius_sq = Fraction(nu * nv * nw, 4 * det * det)
    return radius_sq / (q * q)


def lattice_covering_radius(alpha: RotationVector) -> float:
    return math.sqrt(lattice_covering_radius_sq(alpha))


def next_alpha(alpha: RotationVector, n: int, k: int) -> RotationVector:
    """alpha + (1, 1) / (k q 2^(n+1)); k >= 2 keeps the step strictly inside the closeness bound."""
    if k < 2:
        raise ValueError("k must be at least 2")
    scale = k * alpha.q * 2 ** (n + 1)
    step = Fraction(1, scale)
    return RotationVector.from_fractions(alpha.x + step, alpha.y + step)


def closeness_bound(alpha: RotationVector, n: int) -> Fraction:
    """Allowed sup-norm jump |alpha_{n+1} - alpha_n| < 1 / (2^(n+1) q_n)."""
    return Fraction(1, 2 ** (n + 1) * alpha.q)


def rotation_distance(a: RotationVector, b: RotationVector) -> Fraction:
    return max(abs(a.x - b.x), abs(a.y - b.y))


def _ext_gcd(a: int, b: int) -> Tuple[int, int, int]:
    """(g, s, t) with s a + t b = g = gcd(a, b)."""
    s0, s1, t0, t1 = 1, 0, 0, 1
    while b:
        k, a, b = a // b, b, a % b
        s0, s1 = s1, s0 - k * s1
        t0, t1 = t1, t0 - k * t1
    return a, s0, t0
