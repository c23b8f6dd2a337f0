"""Parameter search for one inductive step.

Given stages 0..n, choose_next_stage builds theta_n, finds N_{n+1} for which the
image chains {theta(B - omega) + omega} are crooked inside B(N_n), doubles b_{n+1}
and halves the strip half-width until the sheared rectangles hug those chains,
checks P1 directly and finally walks alpha_{n+1} towards alpha_n until P2-P5 hold.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from chains.chain_core import CircleInterval, CircularChain, chain_map, is_crooked_inside, standard_chain
from chains.crooked_maps import CircleMapPoly, build_theta, interval_images, periodic_evaluator, sampled_modulus
from construction.errors import BudgetExhausted, ChainError, ConstructionError
from construction.rotation import next_alpha, return_period
from construction.shear import ShearMap, StageParams
from verification.reports import PropertyReport, Verdict, VerificationReport
from verification.verifier import image_boxes, verify_P1, verify_P2_P3, verify_P4_P5

logger = logging.getLogger(__name__)

ThetaBuilder = Callable[[float, int, float], CircleMapPoly]


@dataclass(frozen=True)
class Budgets:
    n_max: int = 2**14
    b_max: int = 2**20
    q_max: int = 10**6
    seconds: float = 1800.0


@dataclass(frozen=True)
class SearchSettings:
    """Sampling sizes and constants used while searching one stage."""

    eps_factor: float = 1.0
    scale_factor: float = 3.5
    return_ratio: float = 0.5
    theta_grid: int = 2**18
    claim_samples: int = 16
    geometry_samples: int = 4
    geometry_boundary: int = 256
    eps_halvings: int = 48
    p1_samples: int = 16
    boundary_samples: int = 4096
    orbit_seeds: int = 64
    cover_grid: int = 128
    grid: int = 512
    birkhoff_seeds: int = 20
    birkhoff_iterates: int = 10_000
    eta_constant: int = 100
    defect_points: int = 1000
    deviation_seeds: int = 16
    deviation_iterates: int = 4096


@dataclass
class SearchResult:
    stage: StageParams
    next_stage: StageParams
    report: VerificationReport


class _Clock:
    def __init__(self, seconds: float):
        self.deadline = time.monotonic() + seconds

    def check(self, what: str) -> None:
        if time.monotonic() > self.deadline:
            raise BudgetExhausted("wall-clock", f"time budget exhausted while {what}")


def claim_chain(theta: CircleMapPoly, n_inner: int, omega: float, slack: float = 0.0,
                evaluate=None) -> CircularChain:
    """Lifted image chain {theta(B_i - omega) + omega : B_i in B(n_inner)}.

    Raises:
        ChainError: If some image wraps the whole circle.
    """
    i = np.arange(n_inner)
    lo, hi = interval_images(theta, (i - 1.25) / n_inner - omega, (i + 0.25) / n_inner - omega, slack,
                              evaluate)
    lo, hi = lo + omega, hi + omega
    shift = np.floor(lo)
    return CircularChain(tuple(CircleInterval(float(a), float(b)) for a, b in zip(lo - shift, hi - shift)))


def check_claim(theta: CircleMapPoly, n_inner: int, n_outer: int, omegas: Sequence[float],
                stage: int = 0) -> PropertyReport:
    """Image chains crooked inside B(n_outer) for every sampled omega."""
    outer = standard_chain(n_outer)
    slack = sampled_modulus(theta)
    evaluate = periodic_evaluator(theta)
    windows = 0
    longest = 0.0
    for omega in omegas:
        try:
            inner = claim_chain(theta, n_inner, omega, slack, evaluate)
            longest = max(longest, inner.max_diameter())
            cmap = chain_map(inner, outer)
        except ChainError as exc:
            return PropertyReport(
                "claim-3a", Verdict.FAIL, stage, {"max_element": longest, "windows": windows},
                {}, {"omega": omega, "error": str(exc)}, {"omegas": list(omegas), "n_inner": n_inner},
            )
        verdict = is_crooked_inside(inner, outer, cmap)
        windows += verdict.windows_checked
        if not verdict.crooked:
            i, j = verdict.counterexample
            return PropertyReport(
                "claim-3a", Verdict.FAIL, stage, {"max_element": longest, "windows": windows}, {},
                {"omega": omega, "window": [i, j], "ell": [cmap.lift(i), cmap.lift(j)]},
                {"omegas": list(omegas), "n_inner": n_inner},
            )
    return PropertyReport(
        "claim-3a", Verdict.PASS, stage, {"max_element": longest, "windows": windows, "slack": slack}, {},
        None, {"omegas": list(omegas), "n_inner": n_inner, "n_outer": n_outer},
    )


def geometry_check(stage: StageParams, n_inner: int, eps_inner: float, xs: Sequence[float],
                   samples: int = 256) -> Tuple[bool, float, Optional[dict]]:
    """Compare h^{-1}((x - e, x + e) x B_i) with {x} x (theta(B_i - omega_x) + omega_x).

    Passes when every box is within 1/(8 N_n) of the target interval vertically and
    within eps_n / 2 horizontally.
    """
    shear = ShearMap(stage)
    vertical_tol = 1.0 / (8 * stage.N)
    horizontal_tol = stage.eps / 2
    i = np.arange(n_inner)
    worst = 0.0
    for x in xs:
        boxes = image_boxes(lambda a, b: shear.inverse(a, b, lift=True), x, eps_inner, n_inner, samples)
        omega = float(shear.omega([x])[0])
        lo, hi = interval_images(stage.theta, (i - 1.25) / n_inner - omega, (i + 0.25) / n_inner - omega,
                                 evaluate=shear.evaluate)
        lo, hi = lo + omega, hi + omega
        drift = np.max(np.abs(boxes.bounds[:, 0, :] - x), axis=1)
        spread = np.maximum(np.abs(boxes.bounds[:, 1, 0] - lo), np.abs(boxes.bounds[:, 1, 1] - hi))
        worst = max(worst, float(spread.max()))
        if drift.max() > horizontal_tol or spread.max() > vertical_tol:
            k = int(np.argmax(np.maximum(drift / horizontal_tol, spread / vertical_tol)))
            return False, float(max(drift[k], spread[k])), {
                "x": x, "element": k, "drift": float(drift[k]), "spread": float(spread[k]),
            }
    return True, worst, None


def default_theta_builder(settings: SearchSettings) -> ThetaBuilder:
    def build(eps: float, m: int, scale: float) -> CircleMapPoly:
        return build_theta(eps, m, scale=scale, return_ratio=settings.return_ratio, grid=settings.theta_grid)

    return build


def _find_chain_size(theta: CircleMapPoly, stage: StageParams, start: int, budgets: Budgets,
                     settings: SearchSettings, clock: _Clock) -> Tuple[int, PropertyReport]:
    omegas = [k / (settings.claim_samples * theta.m) for k in range(settings.claim_samples)]
    n_inner = start
    last = None
    while n_inner <= budgets.n_max:
        clock.check("searching N")
        last = check_claim(theta, n_inner, stage.N, omegas, stage.n)
        logger.info("stage %d: claim with N=%d -> %s", stage.n, n_inner, last.verdict.value)
        if last.passed:
            return n_inner, last
        n_inner *= 2
    raise BudgetExhausted("P1", f"no N <= {budgets.n_max} makes the image chains crooked inside B({stage.N})",
                          last.counterexample if last else None)


def _find_shear(stage: StageParams, theta: CircleMapPoly, n_inner: int, budgets: Budgets,
                settings: SearchSettings, clock: _Clock) -> Tuple[StageParams, float]:
    xs = [(k + 0.5) / settings.geometry_samples for k in range(settings.geometry_samples)]
    b = 1
    counterexample = None
    while b <= budgets.b_max:
        clock.check("searching b")
        candidate = stage.with_shear(b, theta)
        ok, deviation, counterexample = geometry_check(candidate, n_inner, 0.0, xs, settings.geometry_boundary)
        logger.info("stage %d: b=%d segment deviation %.3g", stage.n, b, deviation)
        if ok:
            break
        b *= 2
    else:
        raise BudgetExhausted("geometry", f"no b <= {budgets.b_max} keeps the sheared chains in place",
                              counterexample)

    eps_inner = stage.eps / 4
    for _ in range(settings.eps_halvings):
        clock.check("searching eps")
        ok, deviation, counterexample = geometry_check(candidate, n_inner, eps_inner, xs, settings.geometry_boundary)
        logger.debug("stage %d: eps=%.3g deviation %.3g", stage.n, eps_inner, deviation)
        if ok:
            logger.info("stage %d: b=%d, eps_%d=%.3g", stage.n, b, stage.n + 1, eps_inner)
            return candidate, eps_inner
        eps_inner /= 2
    raise BudgetExhausted("geometry", f"strip half-width fell below {eps_inner:.3g}", counterexample)


def _find_alpha(stages: List[StageParams], n_inner: int, eps_inner: float, budgets: Budgets,
                settings: SearchSettings, clock: _Clock, previous_f_distance: Optional[float]):
    stage = stages[-1]
    n = stage.n
    k = 2
    last: Optional[PropertyReport] = None
    while True:
        clock.check("searching alpha")
        alpha = next_alpha(stage.alpha, n, k)
        if alpha.q > budgets.q_max:
            failing = last.property_id if last else "P2-P3"
            raise BudgetExhausted(failing, f"denominator {alpha.q} exceeds q_max={budgets.q_max}",
                                  last.counterexample if last else None)
        candidate = StageParams(n + 1, n_inner, eps_inner, alpha)
        trial = stages + [candidate]
        density = verify_P2_P3(trial, n, settings.orbit_seeds, settings.cover_grid)
        logger.info("stage %d: k=%d alpha=%s P2-P3 %s", n, k, alpha, density.verdict.value)
        last = density
        if density.passed:
            closeness = verify_P4_P5(trial, n, settings.grid, previous_f_distance, settings.birkhoff_seeds,
                                     settings.birkhoff_iterates, settings.eta_constant)
            logger.info("stage %d: k=%d P4-P5 %s", n, k, closeness.verdict.value)
            last = closeness
            if closeness.passed:
                return candidate, [density, closeness]
        k *= 2


def choose_next_stage(
    stages: Sequence[StageParams],
    budgets: Budgets = Budgets(),
    rng_seed: int = 0,
    settings: SearchSettings = SearchSettings(),
    theta_builder: Optional[ThetaBuilder] = None,
    previous_f_distance: Optional[float] = None,
) -> SearchResult:
    """Complete the last stage with its shear and choose the following stage.

    Args:
        stages: Stages 0..n; all but the last complete and verified.
        budgets: Limits on N, b, the denominator q and wall-clock seconds.
        rng_seed: Seed recorded with the report; sampling grids are deterministic.
        settings: Sampling sizes and constants.
        theta_builder: Replaces build_theta, mainly for tests.
        previous_f_distance: Measured f-distance of the previous transition.

    Returns:
        The completed stage n, the new stage n+1 and the verification report.

    Raises:
        BudgetExhausted: If any search loop runs out of budget.
        ReturnPeriodError: If alpha_n has p = 0.
    """
    stages = list(stages)
    stage = stages[-1]
    if stage.complete:
        raise ConstructionError(f"stage {stage.n} already has its shear")
    clock = _Clock(budgets.seconds)
    m = return_period(stage.alpha)
    builder = theta_builder or default_theta_builder(settings)
    crook_eps = settings.eps_factor / stage.N
    theta = builder(crook_eps, m, settings.scale_factor / stage.N)
    logger.info("stage %d: theta built with m=%d, degree %d", stage.n, m, theta.degree)

    report = VerificationReport(stage.n)
    n_inner = 2 * stage.N
    p1 = None
    while n_inner <= budgets.n_max:
        n_inner, claim = _find_chain_size(theta, stage, n_inner, budgets, settings, clock)
        complete, eps_inner = _find_shear(stage, theta, n_inner, budgets, settings, clock)
        trial_next = StageParams(stage.n + 1, n_inner, eps_inner, complete.alpha)
        xs = [k / settings.p1_samples for k in range(settings.p1_samples)]
        p1 = verify_P1(stages[:-1] + [complete, trial_next], stage.n, xs, settings.boundary_samples)
        logger.info("stage %d: P1 with N=%d -> %s", stage.n, n_inner, p1.verdict.value)
        if p1.passed:
            report.add(claim)
            report.add(p1)
            break
        n_inner *= 2
    else:
        raise BudgetExhausted("P1", f"no N <= {budgets.n_max} passes P1", p1.counterexample if p1 else None)

    prefix = stages[:-1] + [complete]
    next_stage, closing = _find_alpha(prefix, n_inner, eps_inner, budgets, settings, clock, previous_f_distance)
    for r in closing:
        report.add(r)
    for r in report.reports:
        r.sampling.setdefault("rng_seed", rng_seed)
    return SearchResult(complete, next_stage, report)
