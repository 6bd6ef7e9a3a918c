import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from confregion.forecast import (
    ForecastError,
    ForecastSet,
    ForecastVector,
    LabelSpace,
    build_region,
    build_regions_batch,
    normalize_probs,
    region_masks,
    sort_forecasts,
)

from conftest import ABDO_LABELS, REGIONS, TABLE1, table1_vectors
from oracles import suffix_region_oracle


def names(region):
    return {ABDO_LABELS[j] for j in region.members}


@st.composite
def prob_vectors(draw, min_labels=2, max_labels=12):
    m = draw(st.integers(min_labels, max_labels))
    weights = draw(st.lists(st.floats(0, 1, allow_nan=False), min_size=m, max_size=m))
    # sprinkle exact zeros and ties, which is where ordering rules matter
    total = sum(weights)
    if total == 0:
        return tuple([1.0 / m] * m)
    return tuple(w / total for w in weights)


# -- label space and validation ------------------------------------------------


def test_label_space_rejects_duplicates_and_empties():
    with pytest.raises(ValueError):
        LabelSpace(("a", "a"))
    with pytest.raises(ValueError):
        LabelSpace(("a", ""))
    with pytest.raises(ValueError):
        LabelSpace(("a",))
    assert LabelSpace(("a", "b")).index("b") == 1


@pytest.mark.parametrize("bad", [(0.5, 0.6, -0.1), (1.2, -0.2), (float("nan"), 1.0)])
def test_out_of_range_entries_rejected(bad):
    with pytest.raises(ForecastError):
        ForecastVector("x", bad)


def test_normalization_boundary():
    assert sum(normalize_probs((0.4995, 0.5))) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ForecastError):
        normalize_probs((0.45, 0.45))


def test_exact_vectors_are_not_rescaled():
    fv = ForecastVector("a", (0.25, 0.75))
    assert fv.probs == (0.25, 0.75)


def test_true_label_bounds():
    with pytest.raises(ForecastError):
        ForecastVector("a", (0.5, 0.5), true_label=2)


# -- sorting ---------------------------------------------------------------------


def test_sort_table1_row_ends_with_top_labels():
    fv = table1_vectors("DW13-NN")[0]
    tail = [(ABDO_LABELS[j], p) for j, p in sort_forecasts(fv)[-4:]]
    assert tail == [("Pancr", 0.01), ("Non-spec", 0.03), ("Dyspep", 0.11), ("Cholis", 0.85)]


def test_sort_uniform_breaks_ties_by_label():
    fv = ForecastVector("u", (1 / 3, 1 / 3, 1 / 3))
    assert [j for j, _ in sort_forecasts(fv)] == [0, 1, 2]


@settings(max_examples=200, deadline=None)
@given(prob_vectors(), st.randoms(use_true_random=False))
def test_sort_is_permutation_equivariant(probs, rnd):
    perm = list(range(len(probs)))
    rnd.shuffle(perm)
    permuted = tuple(probs[perm[i]] for i in range(len(probs)))  # new label i holds old label perm[i]
    original = sort_forecasts(ForecastVector("a", probs))
    moved = sort_forecasts(ForecastVector("b", permuted))
    assert [p for _, p in original] == [p for _, p in moved]
    # the multiset of (old label, prob) pairs matches once relabelled
    assert sorted((perm[j], p) for j, p in moved) == sorted(original)


# -- region construction ---------------------------------------------------------


@pytest.mark.parametrize("learner,eid,probs,true", TABLE1)
def test_published_regions(learner, eid, probs, true):
    fv = ForecastVector(eid, probs)
    r95, r99 = REGIONS[(learner, eid)]
    assert names(build_region(fv, 0.05)) == r95
    assert names(build_region(fv, 0.01)) == r99


def test_published_region_widths_total():
    dw = sum(len(build_region(fv, d)) for fv in table1_vectors("DW13-NN") for d in (0.05, 0.01))
    nb = sum(len(build_region(fv, d)) for fv in table1_vectors("NB") for d in (0.05, 0.01))
    assert (dw, nb) == (20, 14)


def test_strictness_at_boundary():
    # prefix mass before Non-spec is exactly 0.01: strict "<" keeps Pancr in the region
    fv = table1_vectors("DW13-NN")[0]
    region = build_region(fv, 0.01)
    assert ABDO_LABELS.index("Pancr") in region
    assert region.excluded_mass == 0.0


def test_members_ordered_most_probable_first():
    fv = table1_vectors("DW13-NN")[1]
    assert [ABDO_LABELS[j] for j in build_region(fv, 0.01).members] == [
        "Dyspep", "Intest", "Perf", "Renal", "Pancr"
    ]


def test_one_hot_and_endpoints():
    fv = ForecastVector("a", (0.0, 1.0, 0.0))
    r = build_region(fv, 0.05)
    assert r.members == (1,) and r.excluded_mass == 0.0
    assert set(build_region(fv, 0.0).members) == {0, 1, 2}
    full = build_region(ForecastVector("b", (0.2, 0.3, 0.5)), 0.0)
    assert set(full.members) == {0, 1, 2} and full.excluded_mass == 0.0


def test_delta_one_follows_formula():
    # uniform: every strict prefix is below 1, so only the last-sorted label remains
    assert build_region(ForecastVector("u", (1 / 3, 1 / 3, 1 / 3)), 1.0).members == (2,)


def test_delta_out_of_range():
    with pytest.raises(ValueError):
        build_region(ForecastVector("a", (0.5, 0.5)), 1.5)


def test_batch_matches_elementwise_and_order():
    vecs = table1_vectors("DW13-NN")
    batch = build_regions_batch(vecs, 0.05)
    assert [names(r) for r in batch] == [REGIONS[("DW13-NN", e)][0] for e in ("1653", "2490", "5831")]
    assert batch == [build_region(v, 0.05) for v in vecs]
    assert build_regions_batch([], 0.05) == []


def test_batch_rejects_mixed_label_spaces():
    with pytest.raises(ForecastError, match="b"):
        build_regions_batch([ForecastVector("a", (0.5, 0.5)), ForecastVector("b", (0.2, 0.3, 0.5))], 0.1)


@settings(max_examples=300, deadline=None)
@given(prob_vectors(), st.floats(0, 1))
def test_region_properties(probs, delta):
    fv = ForecastVector("x", probs)
    r = build_region(fv, delta)
    assert set(r.members) == suffix_region_oracle(fv.probs, delta)
    assert r.members
    # the last label in the total order (a top-probability label) is always kept
    assert sort_forecasts(fv)[-1][0] in r
    assert max(fv.probs) == fv.probs[r.members[0]]
    excluded = [p for j, p in sort_forecasts(fv) if j not in r]
    assert r.excluded_mass == sum(excluded)
    if delta > 0:
        assert r.excluded_mass < delta
        # minimality: dropping the least probable member would reach delta
        # (a lone member is the whole remaining mass, ~1, so only multi-member
        # regions are checked exactly)
        if len(r) > 1:
            assert r.excluded_mass + fv.probs[r.members[-1]] >= delta


@settings(max_examples=200, deadline=None)
@given(prob_vectors(), st.floats(0, 1), st.floats(0, 1))
def test_nesting(probs, d1, d2):
    lo, hi = sorted((d1, d2))
    fv = ForecastVector("x", probs)
    assert set(build_region(fv, hi).members) <= set(build_region(fv, lo).members)


@settings(max_examples=200, deadline=None)
@given(prob_vectors(), st.floats(0, 1), st.randoms(use_true_random=False))
def test_region_permutation_equivariance(probs, delta, rnd):
    # distinct values so that relabelling cannot change tie order
    if len(set(probs)) != len(probs):
        return
    perm = list(range(len(probs)))
    rnd.shuffle(perm)
    permuted = tuple(probs[perm[i]] for i in range(len(probs)))
    a = build_region(ForecastVector("a", probs), delta)
    b = build_region(ForecastVector("b", permuted), delta)
    assert {perm[j] for j in b.members} == set(a.members)


def test_region_masks_match_reference():
    rng = np.random.default_rng(7)
    for m in (2, 3, 5, 9):
        probs = rng.dirichlet(np.full(m, 0.5), size=200)
        probs[::7, 0] = 0.0
        probs = probs / probs.sum(axis=1, keepdims=True)
        vecs = [ForecastVector(str(i), tuple(row)) for i, row in enumerate(probs)]
        for delta in (0.0, 0.01, 0.05, 0.3, 1.0):
            mask = region_masks(np.array([v.probs for v in vecs]), delta)
            for row, v in zip(mask, vecs):
                assert set(np.flatnonzero(row)) == set(build_region(v, delta).members)


def test_forecast_set_roundtrip():
    vecs = table1_vectors()
    fs = ForecastSet.from_vectors(vecs)
    assert fs.has_labels and len(fs) == 6 and fs.num_labels == 9
    assert fs.vectors() == vecs
