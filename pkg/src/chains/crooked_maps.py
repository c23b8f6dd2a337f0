"""Crooked degree-one circle maps.

A theta map is built in three steps: a piecewise-linear zigzag prototype on one
period [0, 1/m], a projection of theta - Id onto harmonics of frequency m (FFT on a
dense grid, truncated at the smallest degree meeting the smoothing tolerance), and a
re-certification of the resulting trigonometric polynomial through its extrema
skeleton.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from construction.errors import BreakpointBudgetError, CrookednessError, FrequencyBudgetError

logger = logging.getLogger(__name__)

MAX_BREAKPOINTS = 10_000_000
MAX_FREQUENCIES = 200_000
GRID_POINTS = 2**16
SMOOTHING_RATIO = 0.1
RETURN_RATIO = 0.5
HORNER_DEGREE = 512
TABLE_OVERSAMPLING = 64
TABLE_MAX = 2**22
GRID_MAX = 2**22
VALUE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PiecewiseMonotone:
    """Continuous piecewise-linear interpolation of (breakpoints, values)."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.breakpoints, dtype=float)
        y = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != y.shape or len(x) < 2:
            raise ValueError("breakpoints and values must be 1-d arrays of equal length >= 2")
        if np.any(np.diff(x) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        object.__setattr__(self, "breakpoints", x)
        object.__setattr__(self, "values", y)

    def __call__(self, x):
        return np.interp(x, self.breakpoints, self.values)

    @property
    def domain(self) -> Tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def restricted(self, a: float, b: float) -> "PiecewiseMonotone":
        """Restriction to [a, b], with a and b inserted as breakpoints."""
        inside = (self.breakpoints > a) & (self.breakpoints < b)
        x = np.concatenate([[a], self.breakpoints[inside], [b]])
        return PiecewiseMonotone(x, self(x))


@dataclass(frozen=True)
class CrookedCertificate:
    eps: float
    interval: Tuple[float, float]
    verified: bool
    margin: float
    failure_pair: Optional[Tuple[float, float]] = None
    scale: Optional[float] = None
    windows: int = 0


@dataclass(frozen=True)
class CircleMapPoly:
    """theta(y) = y + a0 + sum_k a_k cos(2 pi m k y) + b_k sin(2 pi m k y)."""

    m: int
    cos: np.ndarray
    sin: np.ndarray
    eps: float
    delta_f: float
    skeleton: PiecewiseMonotone
    certificates: Tuple[CrookedCertificate, ...] = field(default_factory=tuple)
    scale: Optional[float] = None
    grid: int = GRID_POINTS

    @property
    def degree(self) -> int:
        return len(self.sin)


def crook_count(span_units: int) -> int:
    """Number of straight pieces of a crook whose span needs `span_units` return steps."""

    @lru_cache(maxsize=None)
    def count(k: int) -> int:
        if k <= 0:
            return 1
        return 2 * count(k - 1) + count(k - 2)

    return count(span_units)


def _crook_values(y0: float, y1: float, step: float, floor: float) -> List[float]:
    """Turning values of the recursive crook from y0 to y1 (y0 excluded)."""
    out: List[float] = []
    stack = [(y0, y1)]
    while stack:
        s, t = stack.pop()
        if abs(t - s) < floor:
            out.append(t)
            continue
        direction = 1.0 if t > s else -1.0
        near_end = t - direction * step
        near_start = s + direction * step
        # reversed push order keeps the output in path order
        stack.append((near_start, t))
        stack.append((near_end, near_start))
        stack.append((s, near_end))
    return out


def build_zigzag(
    eps: float,
    a: float,
    b: float,
    y0: float,
    y1: float,
    *,
    scale: Optional[float] = None,
    return_ratio: float = RETURN_RATIO,
    max_breakpoints: int = MAX_BREAKPOINTS,
) -> PiecewiseMonotone:
    """Piecewise-linear eps-crooked map on [a, b] from y0 to y1 with range between them.

    Each segment spanning at least max(eps, scale) is replaced by: go to within
    return_ratio*eps of its end, come back to within return_ratio*eps of its start,
    then go to its end. The three pieces are crooked the same way. Breakpoints are
    spaced so that every piece has the same absolute slope.

    Raises:
        BreakpointBudgetError: If the pattern would exceed `max_breakpoints`.
    """
    if eps <= 0 or not a < b or y0 == y1 or not 0 < return_ratio <= 0.5:
        raise ValueError("build_zigzag needs eps > 0, a < b, y0 != y1 and 0 < return_ratio <= 1/2")
    floor = max(eps, scale or eps)
    step = return_ratio * eps
    span = abs(y1 - y0)
    units = 0 if span < floor else int(np.floor((span - floor) / step)) + 1
    pieces = crook_count(units) if units < 64 else max_breakpoints + 1
    if pieces + 1 > max_breakpoints:
        raise BreakpointBudgetError(
            f"crook from {y0} to {y1} needs about {pieces} breakpoints at eps={eps:.6g}; "
            f"eps of at least {span / max(units - 1, 1) / return_ratio:.3g} would be required "
            f"to stay within {max_breakpoints}"
        )
    values = np.array([y0] + _crook_values(y0, y1, step, floor))
    # float noise in the recursion leaves near-repeated turning values
    values = values[np.concatenate([[True], np.abs(np.diff(values)) > VALUE_TOLERANCE * max(1.0, span)])]
    values[-1] = y1
    variation = np.concatenate([[0.0], np.cumsum(np.abs(np.diff(values)))])
    x = a + (b - a) * variation / variation[-1]
    x[-1] = b
    return PiecewiseMonotone(x, values)


def is_eps_crooked(
    f: PiecewiseMonotone,
    eps: float,
    interval: Optional[Tuple[float, float]] = None,
    *,
    scale: Optional[float] = None,
) -> CrookedCertificate:
    """Decide eps-crookedness of a piecewise-monotone map on breakpoint windows.

    For a window (a, b), let D be the last time before b at which f is within eps of
    f(a). The window is satisfied iff f takes a value within eps of f(b) on (a, D);
    the range of f on (a, D) is read off running minima and maxima. The full window
    (a0, b0) is checked first. Windows whose endpoint values differ by less than
    `scale` are exempt.
    """
    a0, b0 = interval if interval is not None else f.domain
    g = f.restricted(a0, b0)
    x, y = g.breakpoints, g.values
    n = len(y)
    exempt = max(eps, scale or eps)
    worst = np.inf
    windows = 0

    def scan(i: int, stop: int) -> Tuple[float, int]:
        ys = y[i : stop + 1]
        near = np.abs(ys - y[i]) < eps
        idx = np.arange(len(ys))
        last_near = np.maximum.accumulate(np.where(near, idx, 0))
        # last near point strictly before each b
        before = np.concatenate([[0], last_near[:-1]])
        run_min = np.minimum.accumulate(ys)
        run_max = np.maximum.accumulate(ys)
        lo = run_min[before]
        hi = run_max[before]
        exit_idx = np.minimum(before + 1, len(ys) - 1)
        exit_val = y[i] + eps * np.sign(ys[exit_idx] - y[i])
        lo = np.minimum(lo, exit_val)
        hi = np.maximum(hi, exit_val)
        gap = np.maximum(np.maximum(lo - ys, ys - hi), 0.0)
        slack = eps - gap
        required = np.abs(ys - y[i]) >= exempt
        required[0] = False
        slack = np.where(required, slack, np.inf)
        bad = np.nonzero(slack <= 0)[0]
        first_bad = int(bad[0]) if len(bad) else -1
        return float(slack.min()) if len(slack) else np.inf, first_bad

    for i in range(n - 1):
        slack, bad = scan(i, n - 1)
        if i == 0 and bad == n - 1:
            return CrookedCertificate(eps, (a0, b0), False, slack, (float(a0), float(b0)), scale, 1)
        windows += n - 1 - i
        if bad >= 0:
            pair = (float(x[i]), float(x[i + bad]))
            return CrookedCertificate(eps, (a0, b0), False, slack, pair, scale, windows)
        worst = min(worst, slack)
    margin = float(worst) if np.isfinite(worst) else float(eps)
    return CrookedCertificate(eps, (a0, b0), True, margin, None, scale, windows)


def _horner(coeffs: np.ndarray, phase: np.ndarray) -> np.ndarray:
    """Real part of sum_k coeffs[k] * exp(i k phase), evaluated by Horner's rule."""
    z = np.exp(1j * phase)
    acc = np.zeros_like(z)
    for c in coeffs[::-1]:
        acc = acc * z + c
    return acc.real


def eval_periodic_part(theta: CircleMapPoly, xs) -> np.ndarray:
    """theta - Id on an array of points."""
    xs = np.asarray(xs, dtype=np.float64)
    coeffs = np.concatenate([[theta.cos[0]], theta.cos[1:] - 1j * theta.sin])
    phase = 2 * np.pi * theta.m * np.mod(xs, 1.0 / theta.m)
    return _horner(coeffs, phase.ravel()).reshape(xs.shape)


def eval_theta_band(theta: CircleMapPoly, xs) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    return xs + eval_periodic_part(theta, xs)


def eval_theta(theta: CircleMapPoly, x: float) -> float:
    return float(eval_theta_band(theta, np.array([x]))[0])


class PeriodicTable:
    """theta - Id tabulated exactly on a uniform grid of one period, read by linear interpolation."""

    def __init__(self, theta: CircleMapPoly, size: int):
        self.m = theta.m
        self.size = size
        samples = periodic_samples(theta, size)
        self.values = np.append(samples, samples[:1])
        k = np.arange(1, theta.degree + 1)
        curvature = float(np.sum((2 * np.pi * theta.m * k) ** 2 * (np.abs(theta.cos[1:]) + np.abs(theta.sin))))
        h = 1.0 / (size * theta.m)
        self.error_bound = curvature * h * h / 8

    def __call__(self, xs) -> np.ndarray:
        xs = np.asarray(xs, dtype=np.float64)
        t = np.mod(xs * self.m, 1.0) * self.size
        i = np.minimum(np.floor(t).astype(np.int64), self.size - 1)
        frac = t - i
        return self.values[i] * (1 - frac) + self.values[i + 1] * frac


def periodic_evaluator(theta: CircleMapPoly):
    """Evaluator of theta - Id: Horner for small degree, a PeriodicTable otherwise."""
    if theta.degree <= HORNER_DEGREE:
        return lambda xs: eval_periodic_part(theta, xs)
    size = 1 << int(np.ceil(np.log2(TABLE_OVERSAMPLING * theta.degree)))
    table = PeriodicTable(theta, min(max(size, theta.grid), TABLE_MAX))
    logger.debug("theta degree %d tabulated on %d points, error bound %.3g", theta.degree, table.size,
                 table.error_bound)
    return table


def sampled_modulus(theta: CircleMapPoly) -> float:
    """Largest change of theta between neighbouring points of its skeleton grid."""
    part = periodic_samples(theta, theta.grid)
    steps = np.diff(np.concatenate([part, part[:1]]))
    return float(np.max(np.abs(steps + 1.0 / (theta.grid * theta.m))))


def interval_images(
    theta: CircleMapPoly, lo, hi, slack: float = 0.0, evaluate=None
) -> Tuple[np.ndarray, np.ndarray]:
    """Bounds of theta([lo, hi]) for arrays of lift intervals.

    Interior extrema come from the skeleton translated by multiples of 1/m, endpoint
    values from `evaluate` (theta - Id, default periodic_evaluator); `slack` widens both
    bounds.
    """
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    m = theta.m
    shift = np.floor(lo * m)
    a = lo - shift / m
    b = hi - shift / m
    copies = int(np.ceil(float(np.max(b)) * m)) + 2 if len(b) else 2
    bp = theta.skeleton.breakpoints
    vals = theta.skeleton.values
    ext_bp = np.concatenate([bp[:-1] + k / m for k in range(copies)] + [bp[-1:] + (copies - 1) / m])
    ext_vals = np.concatenate([vals[:-1] + k / m for k in range(copies)] + [vals[-1:] + (copies - 1) / m])

    part = evaluate or periodic_evaluator(theta)
    end_a = a + part(a)
    end_b = b + part(b)
    low = np.minimum(end_a, end_b)
    high = np.maximum(end_a, end_b)

    start = np.searchsorted(ext_bp, a, side="right")
    stop = np.searchsorted(ext_bp, b, side="left")
    nonempty = stop > start
    if nonempty.any():
        padded = np.append(ext_vals, ext_vals[-1])
        idx = np.column_stack([start, np.maximum(stop, start + 1)]).ravel()
        idx = np.minimum(idx, len(padded) - 1)
        inner_min = np.minimum.reduceat(padded, idx)[::2]
        inner_max = np.maximum.reduceat(padded, idx)[::2]
        low = np.where(nonempty, np.minimum(low, inner_min), low)
        high = np.where(nonempty, np.maximum(high, inner_max), high)
    offset = shift / m
    return low + offset - slack, high + offset + slack


def theta_prototype(
    eps: float, m: int, *, scale: Optional[float] = None, return_ratio: float = RETURN_RATIO,
    max_breakpoints: int = MAX_BREAKPOINTS,
) -> PiecewiseMonotone:
    """Piecewise-linear theta on [0, 1/m]: 0 -> 2 on the first half, 2 -> 1/m on the second."""
    half = 1.0 / (2 * m)
    up = build_zigzag(eps, 0.0, half, 0.0, 2.0, scale=scale, return_ratio=return_ratio,
                      max_breakpoints=max_breakpoints)
    down = build_zigzag(eps, half, 2 * half, 2.0, 1.0 / m, scale=scale, return_ratio=return_ratio,
                        max_breakpoints=max_breakpoints)
    return PiecewiseMonotone(
        np.concatenate([up.breakpoints, down.breakpoints[1:]]),
        np.concatenate([up.values, down.values[1:]]),
    )


def periodic_samples(theta: CircleMapPoly, grid: int) -> np.ndarray:
    """theta - Id at j / (grid m), j = 0..grid-1."""
    if theta.degree >= grid // 2:
        return eval_periodic_part(theta, np.arange(grid) / (grid * theta.m))
    spectrum = np.zeros(grid // 2 + 1, dtype=complex)
    spectrum[0] = theta.cos[0]
    spectrum[1 : theta.degree + 1] = (theta.cos[1:] - 1j * theta.sin) / 2
    return np.fft.irfft(spectrum * grid, n=grid)


def _skeleton(theta: CircleMapPoly, grid: int) -> PiecewiseMonotone:
    """Extrema of theta on [0, 1/m] from a dense grid, with 0, 1/(2m), 1/m kept."""
    m = theta.m
    xs = np.linspace(0.0, 1.0 / m, grid + 1)
    part = periodic_samples(theta, grid)
    ys = xs + np.concatenate([part, part[:1]])
    d = np.sign(np.diff(ys))
    turns = np.nonzero(d[1:] * d[:-1] < 0)[0] + 1
    keep = np.unique(np.concatenate([[0, grid // 2, grid], turns]))
    return PiecewiseMonotone(xs[keep], ys[keep])


def refined_grid(lipschitz: float, m: int, delta_f: float, grid: int = GRID_POINTS,
                 max_grid: int = GRID_MAX) -> int:
    """Smallest power of two >= grid whose spacing keeps lipschitz * h within delta_F / 4.

    Raises:
        FrequencyBudgetError: If that grid is finer than `max_grid`.
    """
    needed = 4 * lipschitz / (m * delta_f)
    refined = max(grid, 1 << int(np.ceil(np.log2(max(needed, 1.0)))))
    if refined > max_grid:
        raise FrequencyBudgetError(
            f"prototype slope {lipschitz:.4g} needs a {refined}-point grid for delta_F={delta_f:.3g}, "
            f"above {max_grid}"
        )
    if refined > grid:
        logger.debug("theta grid refined from %d to %d points", grid, refined)
    return refined


def build_theta(
    eps: float,
    m: int,
    *,
    scale: Optional[float] = None,
    return_ratio: float = RETURN_RATIO,
    grid: int = GRID_POINTS,
    max_breakpoints: int = MAX_BREAKPOINTS,
    max_frequencies: int = MAX_FREQUENCIES,
) -> CircleMapPoly:
    """Crooked degree-one map with theta - Id a trig polynomial of frequencies in mZ.

    Raises:
        FrequencyBudgetError: If no admissible truncation degree meets delta_F = eps/10.
        CrookednessError: If the polynomial fails re-certification.
    """
    if m < 1 or eps <= 0:
        raise ValueError("build_theta needs m >= 1 and eps > 0")
    delta_f = SMOOTHING_RATIO * eps
    proto = theta_prototype(eps, m, scale=scale, return_ratio=return_ratio, max_breakpoints=max_breakpoints)
    logger.info("theta prototype: m=%d eps=%.4g, %d breakpoints", m, eps, len(proto.breakpoints))

    proto_lip = float(np.max(np.abs(np.diff(proto.values) / np.diff(proto.breakpoints))))
    grid = refined_grid(proto_lip, m, delta_f, grid)
    xs = np.arange(grid) / (grid * m)
    samples = proto(xs) - xs
    spectrum = np.fft.rfft(samples) / grid
    # between samples both the prototype and its truncation move at most proto_lip * h / 2
    between = proto_lip / (grid * m)

    def error(k: int) -> float:
        trunc = np.zeros_like(spectrum)
        trunc[: k + 1] = spectrum[: k + 1]
        approx = np.fft.irfft(trunc * grid, n=grid)
        return float(np.max(np.abs(approx - samples))) + between

    limit = min(max_frequencies, grid // 2 - 1)
    k = 1
    while error(k) > delta_f:
        if k >= limit:
            raise FrequencyBudgetError(
                f"no truncation below {limit} harmonics meets delta_F={delta_f:.3g} (eps={eps:.3g}, m={m})"
            )
        k = min(2 * k, limit)
    lo_k, hi_k = k // 2, k
    while hi_k - lo_k > 1:
        mid = (lo_k + hi_k) // 2
        if error(mid) <= delta_f:
            hi_k = mid
        else:
            lo_k = mid
    degree = hi_k if error(hi_k) <= delta_f else k
    coeffs = spectrum[: degree + 1]
    cos = np.concatenate([[coeffs[0].real], 2 * coeffs[1:].real])
    sin = -2 * coeffs[1:].imag

    draft = CircleMapPoly(m, cos, sin, eps, delta_f, PiecewiseMonotone(np.array([0.0, 1.0 / m]), np.zeros(2)),
                          scale=scale)
    skeleton = _skeleton(draft, grid)
    theta = CircleMapPoly(m, cos, sin, eps, delta_f, skeleton, scale=scale, grid=grid)
    certificates = certify_theta(theta)
    failed = [c for c in certificates if not c.verified]
    if failed:
        raise CrookednessError(
            f"smoothed theta is not crooked on {failed[0].interval}: window {failed[0].failure_pair}"
        )
    logger.info("theta certified: degree %d, delta_F=%.3g", degree, delta_f)
    return CircleMapPoly(m, cos, sin, eps, delta_f, skeleton, tuple(certificates), scale, grid)


def certify_theta(theta: CircleMapPoly) -> List[CrookedCertificate]:
    """Check the skeleton on both half periods at eps' = eps - 2 delta_F."""
    tight = theta.eps - 2 * theta.delta_f
    scale = (theta.scale or theta.eps) + 2 * theta.delta_f
    half = 1.0 / (2 * theta.m)
    certificates = []
    for interval in ((0.0, half), (half, 2 * half)):
        cert = is_eps_crooked(theta.skeleton, tight, interval, scale=scale)
        certificates.append(CrookedCertificate(theta.eps, interval, cert.verified, cert.margin,
                                               cert.failure_pair, scale, cert.windows))
    return certificates


def recompute_skeleton(theta: CircleMapPoly, grid: int = GRID_POINTS) -> PiecewiseMonotone:
    return _skeleton(theta, grid)


def identity_theta(m: int = 1) -> CircleMapPoly:
    """theta = Id, a degenerate map with zero shear."""
    skeleton = PiecewiseMonotone(np.array([0.0, 1.0 / m]), np.array([0.0, 1.0 / m]))
    return CircleMapPoly(m, np.zeros(1), np.zeros(0), 1.0, 0.0, skeleton, grid=4096)


def poly_theta(m: int, cos: Sequence[float], sin: Sequence[float], eps: float = 1.0) -> CircleMapPoly:
    """theta from explicit coefficients, skeleton computed on a default grid."""
    draft = CircleMapPoly(m, np.asarray(cos, dtype=float), np.asarray(sin, dtype=float), eps, 0.0,
                          PiecewiseMonotone(np.array([0.0, 1.0 / m]), np.zeros(2)))
    return CircleMapPoly(m, draft.cos, draft.sin, eps, 0.0, recompute_skeleton(draft, 4096), grid=4096)


def theta_to_json(theta: CircleMapPoly) -> Dict[str, Any]:
    return {
        "m": theta.m,
        "cos": [float(c) for c in theta.cos],
        "sin": [float(s) for s in theta.sin],
        "eps": theta.eps,
        "deltaF": theta.delta_f,
        "scale": theta.scale,
        "grid": theta.grid,
        "skeleton": {
            "breakpoints": [float(v) for v in theta.skeleton.breakpoints],
            "values": [float(v) for v in theta.skeleton.values],
        },
        "certificates": [
            {"interval": list(c.interval), "verified": c.verified, "margin": c.margin} for c in theta.certificates
        ],
    }


def theta_from_json(doc: Dict[str, Any]) -> CircleMapPoly:
    skeleton = PiecewiseMonotone(np.array(doc["skeleton"]["breakpoints"]), np.array(doc["skeleton"]["values"]))
    certificates = tuple(
        CrookedCertificate(doc["eps"], tuple(c["interval"]), c["verified"], c["margin"], scale=doc.get("scale"))
        for c in doc.get("certificates", [])
    )
    return CircleMapPoly(
        int(doc["m"]), np.array(doc["cos"], dtype=float), np.array(doc["sin"], dtype=float),
        float(doc["eps"]), float(doc["deltaF"]), skeleton, certificates, doc.get("scale"),
        int(doc.get("grid", GRID_POINTS)),
    )
