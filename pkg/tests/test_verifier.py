from dataclasses import replace

import numpy as np
import pytest

from chains.crooked_maps import build_theta, identity_theta, poly_theta
from construction.errors import ConstructionError
from construction.rotation import RotationVector, next_alpha
from construction.shear import ConjugacyStack, StageParams
from verification.reports import Verdict
from verification.verifier import (
    covering_radius,
    default_xs,
    estimate_deviations,
    period_defect,
    semiconjugacy_defect,
    verify_BF_hypotheses,
    verify_defects,
    verify_P1,
    verify_P2_P3,
    verify_P4_P5,
    verify_theta_certificate,
)

ALPHA = RotationVector(2, 1, 5)


def flat_stage(n=0, N=8, eps=0.1, alpha=ALPHA):
    """A complete stage whose shear is the identity."""
    return StageParams(n=n, N=N, eps=eps, alpha=alpha, b=1, m=2, theta=identity_theta(2))


@pytest.fixture(scope="module")
def certified_stage():
    return StageParams(n=0, N=4, eps=0.5, alpha=RotationVector(1, 0, 3), b=1, m=1, theta=build_theta(0.5, 1))


def test_default_xs():
    assert default_xs(4) == [0.0, 0.25, 0.5, 0.75]


def test_p1_fails_for_monotone_refinement():
    stages = [flat_stage(N=8, eps=0.1), StageParams(n=1, N=64, eps=0.05, alpha=next_alpha(ALPHA, 0, 2))]
    report = verify_P1(stages, 0, xs=[0.25], samples=256)
    assert report.verdict is Verdict.FAIL
    assert report.counterexample["clause"] == "crooked"
    assert report.measured["containment_margin"] > 0


def test_p2_p3_fails_when_alpha_does_not_move():
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=ALPHA)]
    report = verify_P2_P3(stages, 0, seeds=4, grid=32)
    assert report.verdict is Verdict.FAIL
    assert report.counterexample == {"closeness": "fail"}
    assert report.measured["alpha_jump"] == 0.0


def test_p2_p3_passes_for_small_jump():
    nxt = next_alpha(ALPHA, 0, 2)
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=nxt)]
    report = verify_P2_P3(stages, 0, seeds=4, grid=32)
    assert report.verdict is Verdict.PASS
    assert report.measured["alpha_jump"] == pytest.approx(1 / 20)
    assert report.sampling["alpha_next"] == nxt.to_json()


def test_p4_p5_passes_for_tiny_jump():
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=next_alpha(ALPHA, 0, 1024))]
    report = verify_P4_P5(stages, 0, grid=32, birkhoff_seeds=4, birkhoff_iterates=100)
    assert report.verdict is Verdict.PASS
    assert len(report.measured["f_distances"]) == ALPHA.q
    assert report.measured["p_distance"] == 0.0
    assert report.thresholds["eta"] == pytest.approx(1 / 2500)
    assert report.measured["f_one_distance"] < report.thresholds["f_one_distance"] == pytest.approx(1 / 5000)


def test_p4_p5_rejects_one_step_above_half_eta():
    # k = 300 moves alpha by 1/3000 per coordinate: below eta = 1/2500, but f moves by sqrt(2)/3000 > eta/2
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=next_alpha(ALPHA, 0, 300))]
    report = verify_P4_P5(stages, 0, grid=32, birkhoff_seeds=4, birkhoff_iterates=100)
    assert report.measured["alpha_jump"] < report.thresholds["eta"]
    assert report.measured["f_one_distance"] == pytest.approx(np.sqrt(2) / 3000)
    assert report.measured["f_one_distance"] == report.measured["f_distances"][0]
    assert report.verdict is Verdict.FAIL
    assert report.counterexample["rotation_set"] == "fail"


def test_p4_p5_uses_previous_distance():
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=next_alpha(ALPHA, 0, 1024))]
    report = verify_P4_P5(stages, 0, grid=32, previous_f_distance=1e-6, birkhoff_seeds=4,
                          birkhoff_iterates=100)
    assert report.verdict is Verdict.FAIL
    assert report.counterexample["f_closeness"] == "fail"
    assert report.counterexample["iterate"] == 1


def test_bf_hypotheses_need_two_stages():
    with pytest.raises(ConstructionError):
        verify_BF_hypotheses([flat_stage()])


def test_bf_hypotheses_report_p1_failure():
    stages = [flat_stage(N=8, eps=0.05), StageParams(n=1, N=64, eps=0.05, alpha=next_alpha(ALPHA, 0, 2))]
    report = verify_BF_hypotheses(stages, x=0.25, samples=256)
    assert report.verdict is Verdict.FAIL
    assert report.counterexample["crooked_nesting"] == "fail"
    assert report.measured["homotopy_types"] == [[0, 1], [0, 1]]


def test_covering_radius_of_orbit():
    xs = np.arange(5) * 0.4 % 1.0
    ys = np.arange(5) * 0.2 % 1.0
    radius, slack = covering_radius(xs, ys, 64)
    assert radius == pytest.approx(np.sqrt(0.1), abs=slack)


@pytest.fixture
def sheared_stack():
    theta = poly_theta(2, [0.0, 0.04], [0.02])
    return ConjugacyStack.from_stages([StageParams(n=0, N=4, eps=0.5, alpha=ALPHA, b=1, m=2, theta=theta)])


def test_semiconjugacy_and_period(sheared_stack):
    assert semiconjugacy_defect(ConjugacyStack(), ALPHA, grid=32) <= 1e-12
    assert semiconjugacy_defect(sheared_stack, ALPHA, grid=32) <= 1e-9
    assert period_defect(sheared_stack, ALPHA, points=100) <= 1e-9


def test_deviation_table_is_bounded(sheared_stack):
    seeds = np.array([[0.1, 0.2], [0.7, 0.4]])
    table = estimate_deviations(sheared_stack, ALPHA, (1, 0), 10, seeds)
    assert [row["k"] for row in table] == list(range(11))
    assert table[0]["deviation"] <= 1e-12
    assert max(row["deviation"] for row in table) < 1.0


def test_defects_report_for_sheared_stage():
    theta = poly_theta(2, [0.0, 0.04], [0.02])
    stages = [
        StageParams(n=0, N=4, eps=0.5, alpha=ALPHA, b=1, m=2, theta=theta),
        StageParams(n=1, N=8, eps=0.05, alpha=ALPHA),
    ]
    report = verify_defects(stages, 0, grid=32, points=100, seeds=4, iterates=50)
    assert report.property_id == "defects"
    assert report.verdict is Verdict.PASS
    assert report.measured["semiconjugacy_defect"] <= 1e-9
    assert report.measured["period_defect"] <= report.thresholds["period_defect"] == pytest.approx(1e-7)
    assert report.measured["deviation_horizontal"] <= report.thresholds["deviation_horizontal"]
    assert report.sampling["iterates"] == ALPHA.q


def test_defects_of_flat_stage_vanish():
    stages = [flat_stage(), StageParams(n=1, N=8, eps=0.05, alpha=next_alpha(ALPHA, 0, 2))]
    report = verify_defects(stages, 0, grid=16, points=50, seeds=2, iterates=8)
    assert report.verdict is Verdict.PASS
    assert report.measured["p_oscillation"] <= 1e-12
    assert report.measured["deviation_vertical"] <= 1e-9
    assert report.measured["vertical_exceeds"] is False


def test_theta_certificate_replays(certified_stage):
    report = verify_theta_certificate(certified_stage)
    assert report.verdict is Verdict.PASS
    assert report.measured["skeleton_drift"] == 0.0


def test_tampered_theta_is_rejected(certified_stage):
    theta = certified_stage.theta
    cos = theta.cos.copy()
    cos[1] += 0.01
    tampered = replace(certified_stage, theta=replace(theta, cos=cos))
    report = verify_theta_certificate(tampered)
    assert report.verdict is Verdict.FAIL
    assert report.counterexample["skeleton"] == "fail"


def test_theta_certificate_needs_theta():
    with pytest.raises(ConstructionError):
        verify_theta_certificate(StageParams(n=0, N=4, eps=0.5, alpha=ALPHA))
