"""Sampled checks of the inductive properties at a built stage.

Stage n is checked against stage n+1: stage n must carry its shear data and stage
n+1 its chain size, strip half-width and rotation vector. Chains of stage n+1 are
compared with those of stage n in H_n coordinates, where the stage-n chain is the
rectangle chain strip x B(N_n).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree

from chains.chain_core import CircularChain, chain_map, is_crooked_inside, lift_chain, strip_chain
from chains.crooked_maps import certify_theta, eval_theta, recompute_skeleton
from construction.errors import ChainError, ConstructionError
from construction.rotation import (
    RotationVector,
    closeness_bound,
    lattice_covering_radius_sq,
    orbit_offsets,
    rotation_distance,
)
from construction.shear import (
    ConjugacyStack,
    ShearMap,
    StageParams,
    birkhoff_rotation,
    f_iterate,
    p_eval,
    torus_distance,
    torus_grid,
)
from verification.reports import PropertyReport, Verdict, combine

logger = logging.getLogger(__name__)

BOUNDARY_SAMPLES = 4096
CHUNK_POINTS = 1 << 20
ETA_CONSTANT = 100
SEMICONJUGACY_TOL = 1e-9
PERIOD_TOL = 1e-7

LiftMap = Callable[[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class ImageBoxes:
    """Bounding boxes of images of rectangles, shape (n, 2, 2), plus the sampling gap."""

    bounds: np.ndarray
    gap: float

    def inflated(self) -> np.ndarray:
        out = self.bounds.copy()
        out[:, :, 0] -= self.gap
        out[:, :, 1] += self.gap
        return out

    def diameters(self, inflate: bool = True) -> np.ndarray:
        b = self.inflated() if inflate else self.bounds
        return np.hypot(b[:, 0, 1] - b[:, 0, 0], b[:, 1, 1] - b[:, 1, 0])


def default_xs(count: int) -> List[float]:
    return [i / count for i in range(count)]


def _rect_boundary(x_lo: float, x_hi: float, y_lo: np.ndarray, y_hi: np.ndarray, per_side: int):
    """Closed boundary walk of each rectangle, shape (n, 4 * per_side)."""
    t = np.arange(per_side) / per_side
    n = len(y_lo)
    ones = np.ones((n, 1))
    span_y = (y_hi - y_lo)[:, None]
    xs = np.hstack([
        x_lo + (x_hi - x_lo) * t[None, :] * ones,
        x_hi * np.ones((n, per_side)),
        x_hi - (x_hi - x_lo) * t[None, :] * ones,
        x_lo * np.ones((n, per_side)),
    ])
    ys = np.hstack([
        y_lo[:, None] * np.ones((1, per_side)),
        y_lo[:, None] + span_y * t[None, :],
        y_hi[:, None] * np.ones((1, per_side)),
        y_hi[:, None] - span_y * t[None, :],
    ])
    return xs, ys


def image_boxes(mapper: LiftMap, x: float, half_width: float, n_chain: int,
                samples: int = BOUNDARY_SAMPLES) -> ImageBoxes:
    """Boxes of mapper((x - w, x + w) x B_i) for B_i in B(N), from lifted boundary samples.

    The gap is the largest distance between images of consecutive boundary samples,
    a measured modulus of continuity at the sampling step.
    """
    per_side = max(samples // 4, 1)
    i = np.arange(n_chain)
    y_lo = (i - 1.25) / n_chain
    y_hi = (i + 0.25) / n_chain
    rows = max(1, CHUNK_POINTS // (4 * per_side))
    bounds = np.empty((n_chain, 2, 2))
    gap = 0.0
    for start in range(0, n_chain, rows):
        sl = slice(start, start + rows)
        bx, by = _rect_boundary(x - half_width, x + half_width, y_lo[sl], y_hi[sl], per_side)
        ix, iy = mapper(bx.ravel(), by.ravel())
        ix = ix.reshape(bx.shape)
        iy = iy.reshape(by.shape)
        bounds[sl, 0, 0] = ix.min(axis=1)
        bounds[sl, 0, 1] = ix.max(axis=1)
        bounds[sl, 1, 0] = iy.min(axis=1)
        bounds[sl, 1, 1] = iy.max(axis=1)
        step = np.hypot(np.diff(ix, axis=1, append=ix[:, :1]), np.diff(iy, axis=1, append=iy[:, :1]))
        gap = max(gap, float(step.max()))
    return ImageBoxes(bounds, gap)


def _lift_mapper(stack: ConjugacyStack, shear: Optional[ShearMap]) -> LiftMap:
    def apply(xs, ys):
        if shear is not None:
            xs, ys = shear.inverse(xs, ys, lift=True)
        return stack.inverse(xs, ys, lift=True)

    return apply


def _p1_at(stages: Sequence[StageParams], n: int, x: float, samples: int, shear: ShearMap,
           stack: ConjugacyStack) -> Dict:
    """One x of the P1 check; returns a dict with verdict, measures and counterexample."""
    outer_stage, inner_stage = stages[n], stages[n + 1]
    outer = strip_chain(x, outer_stage.eps, outer_stage.N)
    local = image_boxes(_lift_mapper(ConjugacyStack(), shear), x, inner_stage.eps, inner_stage.N, samples)
    result = {"x": x, "verdict": Verdict.PASS, "windows": 0, "counterexample": None}

    margin = outer_stage.eps - float(np.max(np.abs(local.inflated()[:, 0, :] - x)))
    result["containment_margin"] = margin
    try:
        inner = CircularChain.from_bounds(local.inflated())
        cmap = chain_map(inner, outer)
    except ChainError as exc:
        try:
            inner = CircularChain.from_bounds(local.bounds)
            cmap = chain_map(inner, outer)
        except ChainError:
            result["verdict"] = Verdict.FAIL
            result["counterexample"] = {"x": x, "clause": "containment", "error": str(exc)}
            return result
        result["verdict"] = Verdict.INCONCLUSIVE
        result["counterexample"] = {"x": x, "clause": "containment-margin", "error": str(exc)}

    verdict = is_crooked_inside(inner, outer, cmap)
    result["windows"] = verdict.windows_checked
    if not verdict.crooked:
        i, j = verdict.counterexample
        result["verdict"] = Verdict.FAIL
        result["counterexample"] = {
            "x": x, "clause": "crooked", "window": [i, j], "ell": [cmap.lift(i), cmap.lift(j)],
        }
        return result

    if n == 0:
        full = local
    else:
        full = image_boxes(_lift_mapper(stack, shear), x, inner_stage.eps, inner_stage.N, samples)
    diameters = full.diameters()
    raw = full.diameters(inflate=False)
    result["max_diameter"] = float(diameters.max())
    threshold = 1.0 / (n + 2)
    if raw.max() >= threshold:
        k = int(np.argmax(raw))
        result["verdict"] = Verdict.FAIL
        result["counterexample"] = {"x": x, "clause": "diameter", "element": k, "diameter": float(raw[k])}
    elif diameters.max() >= threshold and result["verdict"] is Verdict.PASS:
        result["verdict"] = Verdict.INCONCLUSIVE
        result["counterexample"] = {"x": x, "clause": "diameter-margin", "diameter": float(diameters.max())}
    return result


def verify_P1(stages: Sequence[StageParams], n: int, xs: Optional[Sequence[float]] = None,
              samples: int = BOUNDARY_SAMPLES) -> PropertyReport:
    """Chains D_{n+1,x} crooked inside D_{n,x}, annuli nested, diameters below 1/(n+2)."""
    xs = list(xs) if xs is not None else default_xs(16)
    shear = ShearMap(stages[n])
    stack = ConjugacyStack.from_stages(stages[:n])
    rows = [_p1_at(stages, n, x, samples, shear, stack) for x in xs]
    verdict = combine(r["verdict"] for r in rows)
    counterexample = next((r["counterexample"] for r in rows if r["verdict"] is not Verdict.PASS), None)
    diameters = [r["max_diameter"] for r in rows if "max_diameter" in r]
    measured = {
        "max_diameter": max(diameters) if diameters else None,
        "containment_margin": min(r["containment_margin"] for r in rows),
        "windows": sum(r["windows"] for r in rows),
    }
    logger.info("P1 at stage %d: %s over %d strips", n, verdict.value, len(xs))
    return PropertyReport(
        "P1", verdict, n, measured,
        {"max_diameter": 1.0 / (n + 2), "containment_margin": 0.0},
        counterexample, {"xs": xs, "boundary_samples": samples},
    )


def covering_radius(points_x: np.ndarray, points_y: np.ndarray, grid: int) -> Tuple[float, float]:
    """(largest grid-to-orbit distance, grid spacing slack) on the flat torus."""
    pts = np.column_stack([np.mod(points_x, 1.0), np.mod(points_y, 1.0)])
    pts[pts >= 1.0] = 0.0
    tree = cKDTree(pts, boxsize=1.0)
    px, py = torus_grid(grid)
    dist, _ = tree.query(np.column_stack([px, py]))
    return float(dist.max()), float(np.sqrt(2) / (2 * grid))


def verify_P2_P3(stages: Sequence[StageParams], n: int, seeds: int = 64, grid: int = 128) -> PropertyReport:
    """Closeness of alpha_{n+1} to alpha_n and density of R- and f-orbits."""
    alpha, nxt = stages[n].alpha, stages[n + 1].alpha
    bound = closeness_bound(alpha, n)
    jump = rotation_distance(alpha, nxt)
    clauses = {"closeness": Verdict.PASS if 0 < jump < bound else Verdict.FAIL}

    lattice_sq = lattice_covering_radius_sq(nxt)
    lattice_bound = Fraction(1, 2 ** (n + 1))
    clauses["rotation_density"] = Verdict.PASS if lattice_sq <= lattice_bound**2 else Verdict.FAIL

    stack = ConjugacyStack.from_stages(stages[: n + 1])
    side = max(int(round(np.sqrt(seeds))), 1)
    sx, sy = torus_grid(side)
    hx, hy = stack.forward(sx, sy)
    ox, oy = orbit_offsets(nxt, nxt.q)
    worst, slack = 0.0, 0.0
    for x0, y0 in zip(hx, hy):
        fx, fy = stack.inverse(np.mod(x0 + ox, 1.0), np.mod(y0 + oy, 1.0))
        radius, slack = covering_radius(fx, fy, grid)
        worst = max(worst, radius)
    f_bound = 1.0 / (n + 1)
    if worst + slack <= f_bound:
        clauses["orbit_density"] = Verdict.PASS
    elif worst <= f_bound:
        clauses["orbit_density"] = Verdict.INCONCLUSIVE
    else:
        clauses["orbit_density"] = Verdict.FAIL

    verdict = combine(clauses.values())
    counterexample = None
    if verdict is not Verdict.PASS:
        counterexample = {k: v.value for k, v in clauses.items() if v is not Verdict.PASS}
    return PropertyReport(
        "P2-P3", verdict, n,
        {
            "alpha_jump": float(jump),
            "f_one_distance": one_step,
            "orbit_radius": float(np.sqrt(float(lattice_sq))),
            "f_orbit_radius": worst + slack,
        },
        {"alpha_jump": float(bound), "orbit_radius": float(lattice_bound), "f_orbit_radius": f_bound},
        counterexample,
        {"seeds": side * side, "cover_grid": grid, "alpha_next": nxt.to_json()},
    )


def f_distances(stages: Sequence[StageParams], n: int, grid: int) -> List[float]:
    """sup over the grid of d(f_{n+1}^i, f_n^i) for i = 1..q_n."""
    old = ConjugacyStack.from_stages(stages[:n])
    new = ConjugacyStack.from_stages(stages[: n + 1])
    alpha, nxt = stages[n].alpha, stages[n + 1].alpha
    xs, ys = torus_grid(grid)
    out = []
    for i in range(1, alpha.q + 1):
        ax, ay = f_iterate(old, alpha, xs, ys, i)
        bx, by = f_iterate(new, nxt, xs, ys, i)
        out.append(float(np.max(torus_distance(ax, ay, bx, by))))
    return out


def verify_P4_P5(stages: Sequence[StageParams], n: int, grid: int = 512,
                 previous_f_distance: Optional[float] = None, birkhoff_seeds: int = 20,
                 birkhoff_iterates: int = 10_000, eta_constant: int = ETA_CONSTANT) -> PropertyReport:
    """f_{n+1} iterates close to f_n iterates, rotation set near alpha_n, p_{n+1} close to p_n."""
    alpha, nxt = stages[n].alpha, stages[n + 1].alpha
    clauses: Dict[str, Verdict] = {}

    distances = f_distances(stages, n, grid)
    f_distance = max(distances) if distances else 0.0
    limits = [np.inf if n == 0 else 1.0 / n]
    if previous_f_distance is not None:
        limits.append(previous_f_distance / 2)
    f_bound = min(limits)
    clauses["f_closeness"] = Verdict.PASS if f_distance < f_bound or f_distance == 0.0 else Verdict.FAIL

    eta = Fraction(1, eta_constant * alpha.q**2)
    jump = rotation_distance(alpha, nxt)
    one_step = distances[0] if distances else 0.0
    new = ConjugacyStack.from_stages(stages[: n + 1])
    rng = np.random.default_rng(n)
    seeds = rng.random((birkhoff_seeds, 2))
    estimates = birkhoff_rotation(new, nxt, seeds, birkhoff_iterates)
    deviation = float(np.max(np.abs(estimates - np.array(alpha.as_floats()))))
    estimate_slack = 10.0 / birkhoff_iterates
    if one_step >= float(eta) / 2:
        clauses["rotation_set"] = Verdict.FAIL
    elif deviation < float(eta) + estimate_slack:
        clauses["rotation_set"] = Verdict.PASS
    else:
        clauses["rotation_set"] = Verdict.INCONCLUSIVE

    old = ConjugacyStack.from_stages(stages[:n])
    xs, ys = torus_grid(grid)
    p_old = p_eval(old, xs, ys)
    p_new = p_eval(new, xs, ys)
    p_distance = float(np.max(np.abs(np.mod(p_new - p_old + 0.5, 1.0) - 0.5)))
    p_bound = 1.0 / 2**n
    clauses["p_closeness"] = Verdict.PASS if p_distance < p_bound else Verdict.FAIL

    verdict = combine(clauses.values())
    counterexample = None
    if verdict is not Verdict.PASS:
        counterexample = {k: v.value for k, v in clauses.items() if v is not Verdict.PASS}
        if clauses["f_closeness"] is Verdict.FAIL:
            over = [i for i, d in enumerate(distances, 1) if d >= f_bound and d != 0.0]
            counterexample["iterate"] = over[0]
    return PropertyReport(
        "P4-P5", verdict, n,
        {
            "f_distance": f_distance,
            "f_distances": distances,
            "alpha_jump": float(jump),
            "f_one_distance": one_step,
            "birkhoff_deviation": deviation,
            "p_distance": p_distance,
        },
        {"f_distance": float(f_bound), "f_one_distance": float(eta) / 2, "eta": float(eta), "p_distance": p_bound,
         "eta_constant": eta_constant},
        counterexample,
        {"grid": grid, "birkhoff_seeds": birkhoff_seeds, "birkhoff_iterates": birkhoff_iterates, "seed": n},
    )


def verify_BF_hypotheses(stages: Sequence[StageParams], x: float = 0.0,
                         p1_reports: Optional[Sequence[PropertyReport]] = None,
                         samples: int = BOUNDARY_SAMPLES) -> PropertyReport:
    """Nesting, closure containment, shrinking diameters and homotopy type (0, 1) along x."""
    if len(stages) < 2:
        raise ConstructionError("the chain hypotheses need at least two stages")
    transitions = len(stages) - 1
    if p1_reports is None:
        p1_reports = [verify_P1(stages, n, [x], samples) for n in range(transitions)]
    clauses: Dict[str, Verdict] = {}

    clauses["crooked_nesting"] = combine(r.verdict for r in p1_reports)
    margins = [r.measured.get("containment_margin") for r in p1_reports]
    clauses["closure"] = Verdict.PASS if all(m is not None and m > 0 for m in margins) else Verdict.FAIL

    diameters = [r.measured.get("max_diameter") for r in p1_reports]
    schedule_ok = all(d is not None and d < 1.0 / (k + 2) for k, d in enumerate(diameters))
    decreasing = all(a is not None and b is not None and b < a for a, b in zip(diameters, diameters[1:]))
    clauses["diameters"] = Verdict.PASS if schedule_ok and decreasing else Verdict.FAIL

    types = []
    for stage in stages:
        try:
            types.append(list(lift_chain(strip_chain(x, stage.eps, stage.N)).v))
        except ChainError:
            types.append(None)
    clauses["homotopy"] = Verdict.PASS if all(t == [0, 1] for t in types) else Verdict.FAIL

    verdict = combine(clauses.values())
    counterexample = None
    if verdict is not Verdict.PASS:
        counterexample = {k: v.value for k, v in clauses.items() if v is not Verdict.PASS}
    return PropertyReport(
        "BF-hypotheses", verdict, transitions - 1,
        {"diameters": diameters, "containment_margins": margins, "homotopy_types": types},
        {"diameters": [1.0 / (k + 2) for k in range(transitions)], "homotopy": [0, 1]},
        counterexample, {"x": x, "boundary_samples": samples},
    )


def estimate_deviations(stack: ConjugacyStack, alpha: RotationVector, v: Sequence[int], n_max: int,
                        seeds: np.ndarray) -> List[Dict[str, float]]:
    """sup over seeds of |<F^k(z) - z - k alpha, v>| for k = 0..n_max, on the lift."""
    seeds = np.asarray(seeds, dtype=np.float64).reshape(-1, 2)
    vx, vy = float(v[0]), float(v[1])
    ax, ay = alpha.x, alpha.y
    table = []
    for k in range(n_max + 1):
        fx, fy = f_iterate(stack, alpha, seeds[:, 0], seeds[:, 1], k, lift=True)
        dx = fx - seeds[:, 0] - float(ax * k)
        dy = fy - seeds[:, 1] - float(ay * k)
        table.append({"k": k, "deviation": float(np.max(np.abs(vx * dx + vy * dy)))})
    return table


def semiconjugacy_defect(stack: ConjugacyStack, alpha: RotationVector, grid: int = 512) -> float:
    """sup |p(f(z)) - p(z) - p/q| mod 1 on a grid."""
    xs, ys = torus_grid(grid)
    fx, fy = f_iterate(stack, alpha, xs, ys, 1)
    diff = p_eval(stack, fx, fy) - p_eval(stack, xs, ys) - float(alpha.x)
    return float(np.max(np.abs(np.mod(diff + 0.5, 1.0) - 0.5)))


def period_defect(stack: ConjugacyStack, alpha: RotationVector, points: int = 1000, seed: int = 0) -> float:
    """sup distance of f^q(z) from z on random points."""
    rng = np.random.default_rng(seed)
    z = rng.random((points, 2))
    fx, fy = f_iterate(stack, alpha, z[:, 0], z[:, 1], alpha.q)
    return float(np.max(torus_distance(z[:, 0], z[:, 1], fx, fy)))


def p_oscillation(stack: ConjugacyStack, grid: int = 512) -> float:
    """sup |p(z) - x| mod 1 on a grid."""
    xs, ys = torus_grid(grid)
    return float(np.max(np.abs(np.mod(p_eval(stack, xs, ys) - xs + 0.5, 1.0) - 0.5)))


def verify_defects(stages: Sequence[StageParams], n: int, grid: int = 512, points: int = 1000,
                   seeds: int = 16, iterates: int = 4096, tol: float = SEMICONJUGACY_TOL) -> PropertyReport:
    """Semi-conjugacy and period defects of f_{n+1}, plus the deviation diagnostic.

    The horizontal deviation is bounded by 1 + the oscillation of p; the vertical
    one is only recorded, together with whether it exceeds that bound.
    """
    nxt = stages[n + 1].alpha
    stack = ConjugacyStack.from_stages(stages[: n + 1])
    clauses: Dict[str, Verdict] = {}

    semi = semiconjugacy_defect(stack, nxt, grid)
    clauses["semiconjugacy"] = Verdict.PASS if semi <= tol else Verdict.FAIL
    period = period_defect(stack, nxt, points, seed=n)
    period_bound = (n + 1) * PERIOD_TOL
    clauses["period"] = Verdict.PASS if period <= period_bound else Verdict.FAIL

    oscillation = p_oscillation(stack, grid)
    horizon = min(nxt.q, iterates)
    z = np.random.default_rng(n).random((seeds, 2))
    horizontal = max(row["deviation"] for row in estimate_deviations(stack, nxt, (1, 0), horizon, z))
    vertical = max(row["deviation"] for row in estimate_deviations(stack, nxt, (0, 1), horizon, z))
    deviation_bound = 1.0 + oscillation
    clauses["deviation"] = Verdict.PASS if horizontal <= deviation_bound else Verdict.FAIL

    verdict = combine(clauses.values())
    counterexample = None
    if verdict is not Verdict.PASS:
        counterexample = {k: v.value for k, v in clauses.items() if v is not Verdict.PASS}
    return PropertyReport(
        "defects", verdict, n,
        {
            "semiconjugacy_defect": semi,
            "period_defect": period,
            "deviation_horizontal": horizontal,
            "deviation_vertical": vertical,
            "vertical_exceeds": bool(vertical > deviation_bound),
            "p_oscillation": oscillation,
        },
        {"semiconjugacy_defect": tol, "period_defect": period_bound, "deviation_horizontal": deviation_bound},
        counterexample,
        {"grid": grid, "points": points, "seeds": seeds, "iterates": horizon, "seed": n},
    )


def verify_theta_certificate(stage: StageParams, tol: float = 1e-9) -> PropertyReport:
    """Replay the crookedness certificate of theta_n from its persisted coefficients.

    The skeleton is recomputed on the grid it was built on and must match the stored
    one; the certificate is then re-run on the recomputed skeleton and the endpoint
    values theta(0) = 0, theta(1/(2m)) = 2 are checked within delta_F.
    """
    theta = stage.theta
    if theta is None:
        raise ConstructionError(f"stage {stage.n} has no theta to replay")
    clauses: Dict[str, Verdict] = {}
    skeleton = recompute_skeleton(theta, theta.grid)
    stored = theta.skeleton
    same_shape = skeleton.breakpoints.shape == stored.breakpoints.shape
    drift = float(np.max(np.abs(skeleton.values - stored.values))) if same_shape else np.inf
    clauses["skeleton"] = Verdict.PASS if drift <= tol else Verdict.FAIL

    if not theta.certificates:
        clauses["certificate"] = Verdict.INCONCLUSIVE
        margins: List[float] = []
    else:
        replayed = certify_theta(replace(theta, skeleton=skeleton))
        margins = [c.margin for c in replayed]
        clauses["certificate"] = Verdict.PASS if all(c.verified for c in replayed) else Verdict.FAIL

    ends = [eval_theta(theta, 0.0), eval_theta(theta, 1.0 / (2 * theta.m)) - 2.0]
    end_error = float(max(abs(e) for e in ends))
    clauses["endpoints"] = Verdict.PASS if end_error <= theta.delta_f + tol else Verdict.FAIL

    verdict = combine(clauses.values())
    counterexample = None
    if verdict is not Verdict.PASS:
        counterexample = {k: v.value for k, v in clauses.items() if v is not Verdict.PASS}
    return PropertyReport(
        "theta-certificate", verdict, stage.n,
        {"skeleton_drift": drift, "endpoint_error": end_error, "margins": margins},
        {"skeleton_drift": tol, "endpoint_error": theta.delta_f},
        counterexample, {"grid": theta.grid},
    )
