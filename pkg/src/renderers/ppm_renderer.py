"""Raster images of leaves, chain coverings and orbits on the torus.

The canvas is a plain RGB byte buffer written as binary PPM (P6, maxval 255), so
identical inputs give byte-identical files. PNG export goes through matplotlib.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Tuple, Union

import matplotlib
from matplotlib import image as mpimg
import numpy as np

from chains.chain_core import strip_chain
from construction.rotation import RotationVector, orbit_offsets
from construction.shear import ConjugacyStack, StageParams, torus_distance

logger = logging.getLogger(__name__)

WHITE = (255, 255, 255)
BLACK = (0, 0, 0)
LEAF_COLOR = (20, 60, 160)
MAX_LEAF_POINTS = 1 << 22
EDGE_SAMPLES = 512
CHAIN_COLORMAP = "hsv"
ORBIT_COLORMAP = "viridis"

Color = Tuple[int, int, int]


@dataclass(frozen=True)
class Viewport:
    """Rectangle [x0, x1] x [y0, y1] of the plane; the default is one fundamental domain."""

    x0: float = 0.0
    x1: float = 1.0
    y0: float = 0.0
    y1: float = 1.0
    wrap: bool = True

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("viewport must have positive width and height")


@dataclass
class Canvas:
    width: int
    height: int
    buffer: bytearray
    viewport: Viewport = field(default_factory=Viewport)
    warning: Optional[str] = None

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("canvas needs at least one pixel")
        if len(self.buffer) != 3 * self.width * self.height:
            raise ValueError(f"buffer holds {len(self.buffer)} bytes, expected {3 * self.width * self.height}")

    @classmethod
    def blank(cls, width: int, height: Optional[int] = None, viewport: Optional[Viewport] = None,
              background: Color = WHITE) -> "Canvas":
        height = width if height is None else height
        buffer = bytearray(bytes(background) * (width * height))
        return cls(width, height, buffer, viewport or Viewport())

    @property
    def pixels(self) -> np.ndarray:
        """Writable (height, width, 3) view of the buffer, row 0 at the top."""
        return np.frombuffer(self.buffer, dtype=np.uint8).reshape(self.height, self.width, 3)

    def pixel_indices(self, xs, ys) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(rows, cols, inside) for points of the plane; y grows upwards."""
        vp = self.viewport
        xs, ys = np.asarray(xs, dtype=np.float64), np.asarray(ys, dtype=np.float64)
        if vp.wrap:
            xs = vp.x0 + np.mod(xs - vp.x0, vp.x1 - vp.x0)
            ys = vp.y0 + np.mod(ys - vp.y0, vp.y1 - vp.y0)
        cols = np.floor((xs - vp.x0) / (vp.x1 - vp.x0) * self.width).astype(np.int64)
        rows = self.height - 1 - np.floor((ys - vp.y0) / (vp.y1 - vp.y0) * self.height).astype(np.int64)
        inside = (cols >= 0) & (cols < self.width) & (rows >= 0) & (rows < self.height)
        return rows, cols, inside

    def plot(self, xs, ys, colors: Union[Color, np.ndarray] = BLACK) -> int:
        """Set one pixel per point; later points overwrite earlier ones. Returns the count drawn."""
        rows, cols, inside = self.pixel_indices(xs, ys)
        colors = np.asarray(colors, dtype=np.uint8)
        if colors.ndim == 2:
            colors = colors[inside]
        self.pixels[rows[inside], cols[inside]] = colors
        return int(np.count_nonzero(inside))

    def to_ppm(self) -> bytes:
        return f"P6\n{self.width} {self.height}\n255\n".encode("ascii") + bytes(self.buffer)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix.lower() == ".png":
            mpimg.imsave(path, self.pixels.copy(), format="png")
        else:
            path.write_bytes(self.to_ppm())
        logger.info("wrote %s (%dx%d)", path, self.width, self.height)
        return path


def read_ppm(data: bytes) -> Canvas:
    """Parse a P6 file written by Canvas.to_ppm."""
    parts = data.split(b"\n", 3)
    if len(parts) != 4 or parts[0] != b"P6" or parts[2] != b"255":
        raise ValueError("not a P6 image with maxval 255")
    width, height = (int(v) for v in parts[1].split())
    return Canvas(width, height, bytearray(parts[3]))


def palette(count: int, name: str) -> np.ndarray:
    """`count` RGB colours sampled evenly from a matplotlib colormap."""
    rgba = matplotlib.colormaps[name](np.arange(count) / max(count, 1))
    return np.round(rgba[:, :3] * 255).astype(np.uint8)


def leaf_points(stack: ConjugacyStack, x: float, resolution: int,
                max_points: int = MAX_LEAF_POINTS) -> Tuple[np.ndarray, np.ndarray, Optional[str]]:
    """Sample t -> H^{-1}(x, t) until consecutive points are under one pixel apart.

    Segments whose endpoints are too far apart are split at the midpoint; the
    loop stops with a warning once `max_points` samples would be exceeded.
    """
    pixel = 1.0 / resolution
    ts = np.arange(4 * resolution + 1, dtype=np.float64) / (4 * resolution)
    while True:
        px, py = stack.inverse(np.full_like(ts, x), ts)
        gaps = torus_distance(px[:-1], py[:-1], px[1:], py[1:])
        coarse = np.flatnonzero(gaps >= pixel)
        if coarse.size == 0:
            return px, py, None
        if ts.size + coarse.size > max_points:
            warning = (f"leaf at x={x} stopped at {ts.size} samples; "
                       f"{coarse.size} gaps still exceed one pixel (max {float(gaps.max()):.3g})")
            logger.warning(warning)
            return px, py, warning
        mids = (ts[coarse] + ts[coarse + 1]) / 2
        ts = np.insert(ts, coarse + 1, mids)


def render_leaf(stack: ConjugacyStack, x: float, resolution: int,
                max_points: int = MAX_LEAF_POINTS) -> Canvas:
    """The leaf H_n^{-1}({x} x T^1) on the torus."""
    canvas = Canvas.blank(resolution)
    px, py, warning = leaf_points(stack, x, resolution, max_points)
    canvas.plot(px, py, LEAF_COLOR)
    canvas.warning = warning
    return canvas


def _rect_outline(bounds: np.ndarray, per_side: int) -> Tuple[np.ndarray, np.ndarray]:
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    s = np.linspace(0.0, 1.0, per_side, endpoint=False)
    xs = np.concatenate([x_lo + s * (x_hi - x_lo), np.full_like(s, x_hi),
                         x_hi - s * (x_hi - x_lo), np.full_like(s, x_lo)])
    ys = np.concatenate([np.full_like(s, y_lo), y_lo + s * (y_hi - y_lo),
                         np.full_like(s, y_hi), y_hi - s * (y_hi - y_lo)])
    return xs, ys


def render_chains(stage: StageParams, x: float, resolution: int,
                  stack: Optional[ConjugacyStack] = None, per_side: int = EDGE_SAMPLES) -> Canvas:
    """Outlines of the strip chain at x, pulled back through `stack` when given.

    Without a stack these are the N axis-aligned rectangles (x +- eps) x B_i;
    with H_n they are the elements of D_{n,x}. Colours cycle with the chain index.
    """
    canvas = Canvas.blank(resolution)
    chain = strip_chain(x, stage.eps, stage.N)
    colors = palette(chain.n, CHAIN_COLORMAP)
    for i, bounds in enumerate(chain.bounds()):
        xs, ys = _rect_outline(bounds, per_side)
        if stack is not None and stack.depth:
            xs, ys = stack.inverse(xs, ys)
        canvas.plot(xs, ys, tuple(int(c) for c in colors[i]))
    return canvas


def orbit_points(stack: ConjugacyStack, alpha: RotationVector, seed: Sequence[float],
                 k: int) -> Tuple[np.ndarray, np.ndarray]:
    """f^j(seed) for j = 0..k-1, computed as H^{-1}(H(seed) + j alpha)."""
    hx, hy = stack.forward(np.array([seed[0]]), np.array([seed[1]]))
    ox, oy = orbit_offsets(alpha, k)
    return stack.inverse(np.mod(hx[0] + ox, 1.0), np.mod(hy[0] + oy, 1.0))


def render_orbit(stack: ConjugacyStack, alpha: RotationVector, seed: Sequence[float], k: int,
                 resolution: int) -> Canvas:
    """First k points of the f-orbit of `seed`, coloured by iterate index."""
    canvas = Canvas.blank(resolution)
    px, py = orbit_points(stack, alpha, seed, k)
    canvas.plot(px, py, palette(k, ORBIT_COLORMAP))
    return canvas


def image_path(run_dir: Union[str, Path], stage: int, kind: str, x: float, suffix: str = ".ppm") -> Path:
    """{run}/{stage}/{kind}_{x}.ppm"""
    return Path(run_dir) / str(stage) / f"{kind}_{x:g}{suffix}"
