from pathlib import Path

import numpy as np

from chains.crooked_maps import poly_theta
from construction.rotation import RotationVector
from construction.shear import ConjugacyStack, StageParams
from renderers.ppm_renderer import (
    WHITE,
    Canvas,
    image_path,
    read_ppm,
    render_chains,
    render_leaf,
    render_orbit,
)

ALPHA = RotationVector(2, 1, 5)


def drawn(canvas):
    return np.any(canvas.pixels != np.array(WHITE, dtype=np.uint8), axis=-1)


def test_empty_stack_leaf_is_a_vertical_line():
    canvas = render_leaf(ConjugacyStack(), 0.25, 64)
    mask = drawn(canvas)
    assert mask[:, 16].all()
    assert mask.sum() == 64
    assert canvas.warning is None


def test_stage_zero_chains_are_rectangles():
    stage = StageParams(n=0, N=4, eps=0.1, alpha=ALPHA)
    canvas = render_chains(stage, 0.5, 128)
    mask = drawn(canvas)
    assert mask[:, 51].all() and mask[:, 76].all()
    assert not mask[:, :51].any() and not mask[:, 77:].any()
    colors = {tuple(p) for p in canvas.pixels[mask]}
    assert len(colors) == 4


def test_orbit_of_rational_rotation():
    canvas = render_orbit(ConjugacyStack(), ALPHA, (0.0, 0.0), 5, 64)
    assert drawn(canvas).sum() == 5


def test_rendering_is_byte_deterministic():
    first = render_orbit(ConjugacyStack(), ALPHA, (0.1, 0.3), 50, 32).to_ppm()
    second = render_orbit(ConjugacyStack(), ALPHA, (0.1, 0.3), 50, 32).to_ppm()
    assert first == second
    assert first.startswith(b"P6\n32 32\n255\n")
    assert len(first) == len(b"P6\n32 32\n255\n") + 3 * 32 * 32
    assert read_ppm(first).buffer == bytearray(first[len(b"P6\n32 32\n255\n"):])


def test_leaf_sampling_budget_sets_warning():
    theta = poly_theta(2, [0.0, 0.5], [0.0])
    stack = ConjugacyStack.from_stages([StageParams(n=0, N=4, eps=0.5, alpha=ALPHA, b=1, m=2, theta=theta)])
    canvas = render_leaf(stack, 0.25, 64, max_points=10)
    assert canvas.warning is not None
    assert "x=0.25" in canvas.warning
    assert drawn(canvas).any()


def test_write_ppm_and_png(tmp_path):
    canvas = Canvas.blank(8)
    canvas.plot([0.5], [0.5])
    ppm = canvas.write(tmp_path / "a" / "leaf.ppm")
    png = canvas.write(tmp_path / "leaf.png")
    assert ppm.read_bytes() == canvas.to_ppm()
    assert png.read_bytes()[:4] == b"\x89PNG"


def test_image_path_layout():
    assert image_path("run", 2, "leaf", 0.25) == Path("run") / "2" / "leaf_0.25.ppm"
