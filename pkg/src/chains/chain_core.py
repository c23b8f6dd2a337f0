"""Circular chains of intervals and rectangles, their lifts and the crookedness decision.

Elements are stored by lift endpoints. Overlap and containment are decided on lifts
with the slack `CHAIN_TOL`: two open sets only count as intersecting when their
overlap exceeds it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from construction.errors import ChainError

logger = logging.getLogger(__name__)

CHAIN_TOL = 1e-12
MAX_WITNESSES = 32
CROOK_SPAN = 4
MAX_DIAMETER = 0.25


@dataclass(frozen=True)
class CircleInterval:
    """Open interval (lo, hi) of the line, projected to the circle R/Z."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ChainError(f"interval ({self.lo}, {self.hi}) is empty")
        if self.hi - self.lo >= 1:
            raise ChainError(f"interval ({self.lo}, {self.hi}) wraps the whole circle")

    @property
    def dim(self) -> int:
        return 1

    @property
    def diameter(self) -> float:
        return self.hi - self.lo

    def bounds(self) -> List[List[float]]:
        return [[self.lo, self.hi]]

    def shifted(self, shift: Sequence[int]) -> "CircleInterval":
        return CircleInterval(self.lo + shift[0], self.hi + shift[0])


@dataclass(frozen=True)
class TorusRect:
    """Open product rectangle horizontal x vertical, projected to the torus."""

    horizontal: CircleInterval
    vertical: CircleInterval

    @property
    def dim(self) -> int:
        return 2

    @property
    def diameter(self) -> float:
        return float(np.hypot(self.horizontal.diameter, self.vertical.diameter))

    def bounds(self) -> List[List[float]]:
        return [[self.horizontal.lo, self.horizontal.hi], [self.vertical.lo, self.vertical.hi]]

    def shifted(self, shift: Sequence[int]) -> "TorusRect":
        return TorusRect(self.horizontal.shifted(shift[:1]), self.vertical.shifted(shift[1:]))


Element = Union[CircleInterval, TorusRect]


def element_from_bounds(bounds: Sequence[Sequence[float]]) -> Element:
    if len(bounds) == 1:
        return CircleInterval(float(bounds[0][0]), float(bounds[0][1]))
    if len(bounds) == 2:
        return TorusRect(
            CircleInterval(float(bounds[0][0]), float(bounds[0][1])),
            CircleInterval(float(bounds[1][0]), float(bounds[1][1])),
        )
    raise ChainError(f"unsupported element dimension {len(bounds)}")


@dataclass(frozen=True)
class CircularChain:
    """Family of elements indexed by Z/NZ."""

    elements: Tuple[Element, ...]

    def __post_init__(self):
        if not self.elements:
            raise ChainError("empty chain")
        dims = {e.dim for e in self.elements}
        if len(dims) != 1:
            raise ChainError("chain mixes intervals and rectangles")

    @classmethod
    def from_bounds(cls, bounds: np.ndarray) -> "CircularChain":
        """Build a chain from an array of shape (n, dim, 2)."""
        return cls(tuple(element_from_bounds(b) for b in np.asarray(bounds, dtype=float)))

    @property
    def n(self) -> int:
        return len(self.elements)

    @property
    def dim(self) -> int:
        return self.elements[0].dim

    def bounds(self) -> np.ndarray:
        return np.array([e.bounds() for e in self.elements], dtype=float)

    def max_diameter(self) -> float:
        return max(e.diameter for e in self.elements)

    def reindexed(self, offset: int) -> "CircularChain":
        """Chain whose element i is element i + offset of this one."""
        n = self.n
        return CircularChain(tuple(self.elements[(i + offset) % n] for i in range(n)))


@dataclass(frozen=True)
class ChainLift:
    """Lift of a chain: element k + q*N is element k translated by offsets[k] + q*v."""

    base: CircularChain
    offsets: Tuple[Tuple[int, ...], ...]
    v: Tuple[int, ...]

    def lifted(self, k: int) -> Element:
        q, r = divmod(k, self.base.n)
        shift = [o + q * c for o, c in zip(self.offsets[r], self.v)]
        return self.base.elements[r].shifted(shift)

    def lifted_bounds(self, indices: np.ndarray) -> np.ndarray:
        """Bounds of lifted elements for an integer index array, shape (len, dim, 2)."""
        indices = np.asarray(indices, dtype=np.int64)
        q, r = np.divmod(indices, self.base.n)
        shift = np.asarray(self.offsets, dtype=float)[r] + q[:, None] * np.asarray(self.v, dtype=float)[None, :]
        return self.base.bounds()[r] + shift[:, :, None]

    def project(self) -> CircularChain:
        """Lifted elements 0..N-1 reduced so that every lower endpoint lies in [0, 1)."""
        bounds = self.lifted_bounds(np.arange(self.base.n))
        return CircularChain.from_bounds(_normalize_bounds(bounds))


@dataclass(frozen=True)
class ChainMap:
    """Index map l: Z/N'Z -> Z/NZ given by its lift on 0..N'-1."""

    n_inner: int
    n_outer: int
    lifted: Tuple[int, ...]

    def __post_init__(self):
        if len(self.lifted) != self.n_inner:
            raise ChainError(f"chain map has {len(self.lifted)} values for {self.n_inner} inner elements")

    def lift(self, i: int) -> int:
        q, r = divmod(i, self.n_inner)
        return self.lifted[r] + q * self.n_outer

    def ell(self, i: int) -> int:
        return self.lift(i) % self.n_outer

    def sequence(self, count: int) -> List[int]:
        """Values of the lift on 0..count-1."""
        return [self.lift(i) for i in range(count)]


@dataclass(frozen=True)
class CrookedVerdict:
    crooked: bool
    counterexample: Optional[Tuple[int, int]] = None
    witnesses: Tuple[Tuple[int, int, int, int], ...] = field(default_factory=tuple)
    windows_checked: int = 0


def _normalize_bounds(bounds: np.ndarray) -> np.ndarray:
    shift = np.floor(bounds[:, :, 0])
    return bounds - shift[:, :, None]


def standard_chain(n: int) -> CircularChain:
    """The covering B(N) = {((i - 5/4)/N, (i + 1/4)/N)}."""
    if n < 4:
        raise ChainError(f"standard chain needs N >= 4, got {n}")
    return CircularChain(tuple(CircleInterval((i - 1.25) / n, (i + 0.25) / n) for i in range(n)))


def strip_chain(x: float, half_width: float, n: int) -> CircularChain:
    """Rectangles (x - w, x + w) x B_i for B_i in B(N)."""
    strip = CircleInterval(x - half_width, x + half_width)
    return CircularChain(tuple(TorusRect(strip, b) for b in standard_chain(n).elements))


def _pairwise_circle_overlap(bounds: np.ndarray) -> np.ndarray:
    """Overlap matrix for circle arcs of one coordinate, bounds shape (n, 2)."""
    centers = bounds.mean(axis=1)
    halves = (bounds[:, 1] - bounds[:, 0]) / 2
    delta = np.abs(centers[:, None] - centers[None, :]) % 1.0
    distance = np.minimum(delta, 1.0 - delta)
    return distance < halves[:, None] + halves[None, :] - CHAIN_TOL


def overlap_matrix(chain: CircularChain) -> np.ndarray:
    bounds = chain.bounds()
    result = np.ones((chain.n, chain.n), dtype=bool)
    for c in range(chain.dim):
        result &= _pairwise_circle_overlap(bounds[:, c, :])
    return result


def is_circular_chain(chain: CircularChain) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """Check the adjacency invariant; report the lexicographically first violating pair."""
    n = chain.n
    actual = overlap_matrix(chain)
    idx = np.arange(n)
    gap = (idx[:, None] - idx[None, :]) % n
    expected = (gap == 0) | (gap == 1) | (gap == n - 1)
    violations = np.argwhere(np.triu(actual != expected, k=1))
    if len(violations):
        k, l = violations[0]
        return False, (int(k), int(l))
    return True, None


def lift_chain(chain: CircularChain, anchor: Optional[Element] = None, strict: bool = True) -> ChainLift:
    """Lift a chain to the universal cover and compute its homotopy type.

    Args:
        chain: The chain to lift.
        anchor: Lift of element 0; defaults to element 0 as stored.
        strict: Also enforce the diameter bound and that lifted elements k, l
            intersect only when |k - l| <= 1.

    Raises:
        ChainError: If consecutive elements cannot be lifted to intersecting sets.
    """
    n = chain.n
    bounds = chain.bounds()
    if strict and chain.max_diameter() >= MAX_DIAMETER:
        raise ChainError(f"chain element diameter {chain.max_diameter():.6g} is not below 1/4")

    base_offset = np.zeros(chain.dim)
    if anchor is not None:
        raw = np.asarray(anchor.bounds(), dtype=float) - bounds[0]
        if not np.allclose(raw, np.round(raw[:, :1]), atol=1e-9):
            raise ChainError("anchor is not a lift of element 0")
        base_offset = np.round(raw[:, 0])

    centers = bounds.mean(axis=2)
    ring = np.concatenate([centers, centers[:1]])
    steps = np.round(ring[:-1] - ring[1:])
    offsets = np.vstack([base_offset, base_offset + np.cumsum(steps, axis=0)])

    lifted = np.concatenate([bounds, bounds[:1]]) + offsets[:, :, None]
    lo = np.maximum(lifted[:-1, :, 0], lifted[1:, :, 0])
    hi = np.minimum(lifted[:-1, :, 1], lifted[1:, :, 1])
    broken = np.nonzero(~np.all(hi - lo > CHAIN_TOL, axis=1))[0]
    if len(broken):
        k = int(broken[0])
        raise ChainError(f"no consistent lift: element {(k + 1) % n} does not meet element {k}")

    v = tuple(int(c) for c in offsets[n] - offsets[0])
    result = ChainLift(chain, tuple(tuple(int(c) for c in row) for row in offsets[:n]), v)

    if strict:
        window = result.lifted_bounds(np.arange(n + 1))
        lo = np.maximum(window[:, None, :, 0], window[None, :, :, 0])
        hi = np.minimum(window[:, None, :, 1], window[None, :, :, 1])
        meets = np.all(hi - lo > CHAIN_TOL, axis=2)
        idx = np.arange(n + 1)
        far = np.abs(idx[:, None] - idx[None, :]) > 1
        bad = np.argwhere(np.triu(meets & far, k=1))
        if len(bad):
            k, l = bad[0]
            raise ChainError(f"lifted elements {k} and {l} intersect; chain is not essential")
    return result


def chain_map(inner: CircularChain, outer: CircularChain, chunk: int = 4096) -> ChainMap:
    """Find l with inner element i inside outer element l(i), as a lift l^ on Z.

    Ties between two overlapping outer elements go to the smaller lift index.

    Raises:
        ChainError: If an inner element lies in no outer element or the homotopy types differ.
    """
    if inner.dim != outer.dim:
        raise ChainError("inner and outer chains live in different spaces")
    inner_lift = lift_chain(inner, strict=False)
    outer_lift = lift_chain(outer, strict=False)
    if inner_lift.v != outer_lift.v:
        raise ChainError(f"homotopy types differ: inner {inner_lift.v}, outer {outer_lift.v}")

    n_out = outer.n
    wraps = max(1, max(abs(c) for c in outer_lift.v))
    candidates = np.arange(-(wraps + 2) * n_out, (wraps + 3) * n_out)
    outer_bounds = outer_lift.lifted_bounds(candidates)
    inner_bounds = inner_lift.lifted_bounds(np.arange(inner.n))

    lifted: List[int] = []
    for start in range(0, inner.n, chunk):
        block = inner_bounds[start : start + chunk]
        inside = np.all(
            (outer_bounds[None, :, :, 0] <= block[:, None, :, 0] + CHAIN_TOL)
            & (block[:, None, :, 1] <= outer_bounds[None, :, :, 1] + CHAIN_TOL),
            axis=2,
        )
        found = inside.any(axis=1)
        if not found.all():
            missing = start + int(np.argmin(found))
            raise ChainError(f"inner element {missing} is contained in no outer element")
        lifted.extend(int(candidates[j]) for j in inside.argmax(axis=1))
    return ChainMap(inner.n, n_out, tuple(lifted))


def is_crooked_inside(inner: CircularChain, outer: CircularChain, cmap: ChainMap) -> CrookedVerdict:
    """Decide the lifted crookedness condition for a chain map.

    For every window i < j < i + N' whose interior values lie between l^(i) and
    l^(j) and with |l^(j) - l^(i)| > 4, look for i < u < v < j with
    |l^(u) - l^(j)| <= 1 and |l^(v) - l^(i)| <= 1. Windows are scanned by
    increasing i, then j; the first failure is the counterexample.
    """
    if cmap.n_inner != inner.n or cmap.n_outer != outer.n:
        raise ChainError("chain map does not match the chains")
    n = cmap.n_inner
    values = cmap.sequence(2 * n)
    witnesses: List[Tuple[int, int, int, int]] = []
    checked = 0

    for i in range(n):
        li = values[i]
        lo = hi = None
        first_at: Dict[int, int] = {}
        last_near_i = -1
        for j in range(i + 1, i + n):
            lj = values[j]
            if lo is None:
                admissible = True
            else:
                if lo < li < hi:
                    break
                admissible = min(li, lj) <= lo and hi <= max(li, lj)
            if admissible and abs(lj - li) > CROOK_SPAN:
                checked += 1
                near_j = [first_at[w] for w in (lj - 1, lj, lj + 1) if w in first_at]
                u = min(near_j) if near_j else None
                if u is None or last_near_i <= u:
                    logger.debug("crookedness fails on window (%d, %d)", i, j)
                    return CrookedVerdict(False, (i, j), tuple(witnesses), checked)
                if len(witnesses) < MAX_WITNESSES:
                    witnesses.append((i, j, u, last_near_i))
            lo = lj if lo is None else min(lo, lj)
            hi = lj if hi is None else max(hi, lj)
            first_at.setdefault(lj, j)
            if abs(lj - li) <= 1:
                last_near_i = j
    return CrookedVerdict(True, None, tuple(witnesses), checked)


def chain_to_json(chain: CircularChain) -> Dict[str, Any]:
    try:
        homotopy: Any = list(lift_chain(chain).v)
    except ChainError:
        homotopy = None
    if homotopy is not None and chain.dim == 1:
        homotopy = homotopy[0]
    elements = [e.bounds() if e.dim == 2 else e.bounds()[0] for e in chain.elements]
    return {"n": chain.n, "elements": elements, "homotopy": homotopy}


def chain_from_json(doc: Dict[str, Any]) -> CircularChain:
    elements = doc["elements"]
    if len(elements) != doc["n"]:
        raise ChainError(f"chain document declares n={doc['n']} but lists {len(elements)} elements")
    return CircularChain(
        tuple(element_from_bounds([e] if not isinstance(e[0], list) else e) for e in elements)
    )
