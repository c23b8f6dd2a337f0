import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chains.chain_core import (
    ChainMap,
    CircleInterval,
    CircularChain,
    chain_from_json,
    chain_map,
    chain_to_json,
    is_circular_chain,
    is_crooked_inside,
    lift_chain,
    standard_chain,
    strip_chain,
)
from construction.errors import ChainError


def brute_force_crooked(values, n_inner):
    """Every lifted window, no pruning; returns the first failing (i, j) or None."""
    for i in range(n_inner):
        for j in range(i + 1, i + n_inner):
            li, lj = values[i], values[j]
            low, high = min(li, lj), max(li, lj)
            if any(not low <= values[k] <= high for k in range(i + 1, j)):
                continue
            if abs(lj - li) <= 4:
                continue
            ok = any(
                abs(values[u] - lj) <= 1 and abs(values[v] - li) <= 1
                for u in range(i + 1, j)
                for v in range(u + 1, j)
            )
            if not ok:
                return (i, j)
    return None


def make_map(steps, n_outer):
    """Chain map whose lift walks by `steps`; the total must be n_outer."""
    lifted = np.concatenate([[0], np.cumsum(steps)[:-1]])
    return ChainMap(len(steps), n_outer, tuple(int(v) for v in lifted))


def test_standard_chain_n4_endpoints_and_overlap():
    chain = standard_chain(4)
    b0, b1, b2 = chain.elements[:3]
    assert (b0.lo, b0.hi) == (-5 / 16, 1 / 16)
    assert (b1.lo, b1.hi) == (-1 / 16, 5 / 16)
    assert max(b0.lo, b1.lo) == -1 / 16 and min(b0.hi, b1.hi) == 1 / 16
    assert b0.hi < b2.lo


def test_standard_chain_rejects_small_n():
    with pytest.raises(ChainError):
        standard_chain(3)


@pytest.mark.parametrize("n", [4, 5, 8, 16, 37, 128, 1024])
def test_standard_chain_is_circular(n):
    ok, pair = is_circular_chain(standard_chain(n))
    assert ok and pair is None


def test_standard_chain_is_circular_exhaustive():
    assert all(is_circular_chain(standard_chain(n))[0] for n in range(4, 257))


def test_disjoint_intervals_are_not_a_chain():
    chain = CircularChain(tuple(CircleInterval(k / 5, k / 5 + 0.1) for k in range(5)))
    assert is_circular_chain(chain) == (False, (0, 1))


def test_widened_element_reports_first_violation():
    elements = list(standard_chain(8).elements)
    elements[3] = CircleInterval(elements[3].lo, elements[5].lo + 0.01)
    assert is_circular_chain(CircularChain(tuple(elements))) == (False, (3, 5))


def test_empty_chain_rejected():
    with pytest.raises(ChainError):
        CircularChain(())


def test_interval_invariants():
    with pytest.raises(ChainError):
        CircleInterval(0.3, 0.3)
    with pytest.raises(ChainError):
        CircleInterval(0.0, 1.0)


@pytest.mark.parametrize("n", [7, 8, 64, 500])
def test_standard_chain_homotopy_type_is_one(n):
    assert lift_chain(standard_chain(n)).v == (1,)


def test_small_standard_chain_breaks_diameter_bound():
    with pytest.raises(ChainError, match="diameter"):
        lift_chain(standard_chain(4))
    assert lift_chain(standard_chain(4), strict=False).v == (1,)


def test_reversed_chain_has_negative_type():
    elements = standard_chain(8).elements
    reversed_chain = CircularChain(tuple(elements[(-k) % 8] for k in range(8)))
    assert lift_chain(reversed_chain).v == (-1,)


def test_strip_chain_wraps_vertically():
    assert lift_chain(strip_chain(0.3, 0.05, 8)).v == (0, 1)


def test_lift_translates_by_type():
    lift = lift_chain(standard_chain(8))
    k = 3
    assert lift.lifted(k + 8).lo == pytest.approx(lift.lifted(k).lo + 1)
    assert lift.lifted(k - 8).hi == pytest.approx(lift.lifted(k).hi - 1)


def test_lift_projection_recovers_base_mod_one():
    chain = CircularChain(tuple(CircleInterval(lo + 3, hi + 3) for lo, hi in standard_chain(16).bounds()[:, 0]))
    projected = lift_chain(chain).project()
    diff = projected.bounds() - chain.bounds()
    assert np.allclose(diff, np.round(diff))


def test_lift_rejects_large_elements():
    chain = CircularChain((CircleInterval(0, 0.3), CircleInterval(0.2, 0.6), CircleInterval(0.5, 1.05)))
    with pytest.raises(ChainError):
        lift_chain(chain)


def test_chain_map_identity():
    chain = standard_chain(8)
    cmap = chain_map(chain, chain)
    assert [cmap.ell(i) for i in range(8)] == list(range(8))


def test_chain_map_refinement_is_periodic():
    cmap = chain_map(standard_chain(64), standard_chain(8))
    for i in range(64):
        assert cmap.lift(i + 64) == cmap.lift(i) + 8
        assert cmap.ell(i) == cmap.lift(i) % 8


def test_chain_map_rejects_uncontained_element():
    inner = CircularChain((CircleInterval(0.0, 0.5),) + standard_chain(8).elements[1:])
    with pytest.raises(ChainError):
        chain_map(inner, standard_chain(8))


def test_chain_map_rejects_type_mismatch():
    elements = standard_chain(8).elements
    reversed_chain = CircularChain(tuple(elements[(-k) % 8] for k in range(8)))
    with pytest.raises(ChainError, match="homotopy"):
        chain_map(reversed_chain, standard_chain(8))


def test_monotone_refinement_is_not_crooked():
    inner, outer = standard_chain(64), standard_chain(8)
    cmap = chain_map(inner, outer)
    verdict = is_crooked_inside(inner, outer, cmap)
    assert not verdict.crooked
    i, j = verdict.counterexample
    assert abs(cmap.lift(j) - cmap.lift(i)) > 4


def test_small_span_is_vacuously_crooked():
    inner = outer = standard_chain(4)
    verdict = is_crooked_inside(inner, outer, chain_map(inner, outer))
    assert verdict.crooked and verdict.windows_checked == 0


@st.composite
def chain_maps(draw):
    n_outer = draw(st.integers(min_value=4, max_value=12))
    n_inner = draw(st.integers(min_value=n_outer, max_value=64))
    steps = draw(st.lists(st.sampled_from([-1, 0, 1]), min_size=n_inner, max_size=n_inner))
    # force the total displacement to n_outer so the lift is periodic
    total = sum(steps)
    i = 0
    while total != n_outer:
        delta = 1 if total < n_outer else -1
        if steps[i % n_inner] != delta:
            steps[i % n_inner] += delta
            total += delta
        i += 1
    return make_map(steps, n_outer)


def _run(cmap):
    inner = standard_chain(cmap.n_inner)
    outer = standard_chain(cmap.n_outer)
    return is_crooked_inside(inner, outer, cmap)


@settings(max_examples=200, deadline=None)
@given(chain_maps())
def test_crooked_matches_brute_force(cmap):
    verdict = _run(cmap)
    expected = brute_force_crooked(cmap.sequence(2 * cmap.n_inner), cmap.n_inner)
    assert verdict.crooked == (expected is None)
    if expected is not None:
        assert verdict.counterexample == expected
    for i, j, u, v in verdict.witnesses:
        assert i < u < v < j
        assert abs(cmap.lift(u) - cmap.lift(j)) <= 1
        assert abs(cmap.lift(v) - cmap.lift(i)) <= 1


@settings(max_examples=50, deadline=None)
@given(chain_maps(), st.integers(min_value=0, max_value=63))
def test_crooked_invariant_under_inner_reindexing(cmap, c):
    n = cmap.n_inner
    c %= n
    shifted = tuple(cmap.lift(i + c) - cmap.lift(c) for i in range(n))
    assert _run(ChainMap(n, cmap.n_outer, shifted)).crooked == _run(cmap).crooked


def test_chain_json_round_trip():
    chain = strip_chain(0.25, 0.01, 8)
    doc = chain_to_json(chain)
    assert doc["n"] == 8 and doc["homotopy"] == [0, 1]
    assert np.array_equal(chain_from_json(doc).bounds(), chain.bounds())
    assert chain_to_json(standard_chain(8))["homotopy"] == 1


def test_reindexed_chain_keeps_circularity_and_type():
    chain = standard_chain(12).reindexed(5)
    assert chain.elements[0] == standard_chain(12).elements[5]
    assert is_circular_chain(chain)[0]
    assert lift_chain(chain).v == (1,)


@settings(max_examples=50, deadline=None)
@given(chain_maps(), st.integers(min_value=0, max_value=11))
def test_crooked_invariant_under_outer_reindexing(cmap, c):
    inner = standard_chain(cmap.n_inner)
    outer = standard_chain(cmap.n_outer)
    c %= cmap.n_outer
    shifted = ChainMap(cmap.n_inner, cmap.n_outer, tuple(v - c for v in cmap.lifted))
    before = is_crooked_inside(inner, outer, cmap).crooked
    assert is_crooked_inside(inner, outer.reindexed(c), shifted).crooked == before


def test_refinement_verdict_survives_outer_reindexing():
    inner, outer = standard_chain(64), standard_chain(8)
    for c in range(8):
        shifted = outer.reindexed(c)
        assert not is_crooked_inside(inner, shifted, chain_map(inner, shifted)).crooked
