import time
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import T_by_levels, cut_and_stack, heights_by_recurrence
from staircase_flow.rank_one import (InvalidSpecError, Kind, RankOneSpec, RefinementExhaustedError,
                                     TowerPoint, apply_T, build_stage, height, identity_stage,
                                     normalize_A, partial_total_length, refine, restricted_growth_profile,
                                     stage_from_json, stage_to_json)
from staircase_flow.staircase import classical_staircase, general_staircase


def classical_r(n):
    return n


def classical_s(n, i):
    return i - 1


def doubling():
    return RankOneSpec(lambda n: 2, lambda n, i: 0, name="doubling")


# -- height ---------------------------------------------------------------------------
def test_classical_heights_match_recurrence_oracle():
    expect = heights_by_recurrence(classical_r, classical_s, 12)
    assert expect[1:7] == [1, 3, 12, 54, 280, 1695]
    assert [height(classical_staircase(), n) for n in range(13)] == expect


def test_height_examples():
    assert height(classical_staircase(), 1) == 1
    assert height(classical_staircase(), 4) == 54
    assert height(doubling(), 5) == 32


def test_heights_are_exact_beyond_int64():
    spec = classical_staircase()
    h = height(spec, 25)
    assert h > 2 ** 63
    assert h == heights_by_recurrence(classical_r, classical_s, 25)[25]


spec_params = st.tuples(st.lists(st.integers(1, 4), min_size=6, max_size=6),
                        st.lists(st.integers(0, 3), min_size=6, max_size=6))


def spec_from(params):
    rs, base = params
    return RankOneSpec(lambda n: rs[n - 1], lambda n, i: (base[n - 1] + i) % 3, name="random")


@settings(max_examples=40, deadline=None)
@given(spec_params)
def test_height_recurrence_property(params):
    spec = spec_from(params)
    for n in range(1, 7):
        assert height(spec, n) == spec.r(n) * height(spec, n - 1) + sum(spec.spacer_row(n))


# -- stages ---------------------------------------------------------------------------
def test_stage_two_and_three_kinds():
    spec = classical_staircase()
    s2 = build_stage(spec, 2)
    assert s2.kind_word() == "NNS"
    assert all(lv.width == Fraction(1, 2) for lv in s2)
    assert build_stage(spec, 3).kind_word() == "NNSNNSSNNSSS"


def test_identity_tower():
    spec = RankOneSpec.identity()
    for n in (1, 4, 9):
        st_ = build_stage(spec, n)
        assert st_.h == 1 and st_.levels[0].x_left == 0 and st_.levels[0].width == 1
        assert st_.levels[0].kind is Kind.NON_SPACER
    assert refine(build_stage(spec, 3), spec) == build_stage(spec, 4)


@settings(max_examples=25, deadline=None)
@given(spec_params)
def test_build_stage_matches_cut_and_stack_oracle(params):
    spec = spec_from(params)
    for n in range(0, 5):
        levels, width = cut_and_stack(spec.r, spec.s, n)
        got = build_stage(spec, n)
        assert got.width == width
        assert [lv.x_left for lv in got] == [x for x, _ in levels]
        assert got.kind_word() == "".join(k for _, k in levels)


def test_classical_stages_match_oracle_to_stage_six():
    spec = classical_staircase()
    for n in range(7):
        levels, width = cut_and_stack(classical_r, classical_s, n)
        got = build_stage(spec, n)
        assert [lv.x_left for lv in got] == [x for x, _ in levels]


@settings(max_examples=25, deadline=None)
@given(spec_params)
def test_tiling_and_width_law(params):
    spec = spec_from(params)
    for n in range(1, 6):
        st_ = build_stage(spec, n)
        P = 1
        for k in range(1, n + 1):
            P *= spec.r(k)
        assert st_.width == Fraction(1, P)
        non = sorted(lv.x_left for lv in st_ if lv.kind is Kind.NON_SPACER)
        assert non == [Fraction(k, P) for k in range(P)]
        sp = sorted(lv.x_left for lv in st_ if lv.kind is Kind.SPACER)
        assert all(x >= 1 for x in sp)
        assert len(set(sp)) == len(sp)
        assert st_.total_length() == Fraction(st_.h, P)


def test_refine_chain_equals_build():
    spec = classical_staircase()
    s = identity_stage()
    for n in range(1, 7):
        new = refine(s, spec)
        assert new == build_stage(spec, n)
        assert s == build_stage(spec, n - 1)  # input untouched
        s = new


def test_stage_json_round_trip():
    st_ = build_stage(classical_staircase(), 4)
    assert stage_from_json(stage_to_json(st_)) == st_


def test_invalid_cutting_is_rejected():
    spec = general_staircase([1, 2, 0])
    with pytest.raises(InvalidSpecError):
        height(spec, 3)
    with pytest.raises(InvalidSpecError):
        RankOneSpec(lambda n: 1, lambda n, i: -1).spacer_row(1)


def test_build_stage_budget_guard():
    from staircase_flow.rank_one import BudgetExceededError
    with pytest.raises(BudgetExceededError):
        build_stage(classical_staircase(), 9, level_budget=1000)


def test_build_stage_eight_under_a_second():
    t = time.perf_counter()
    st_ = build_stage(classical_staircase(), 8)
    assert st_.h == heights_by_recurrence(classical_r, classical_s, 8)[8]
    assert time.perf_counter() - t < 1.0


# -- the map T ------------------------------------------------------------------------------
def test_apply_T_is_the_level_translation():
    spec = classical_staircase()
    levels, width = cut_and_stack(classical_r, classical_s, 4)
    for k in range(len(levels) - 1):
        x = levels[k][0] + width / 3
        assert apply_T(spec, x) == T_by_levels(levels, width, x)
    # a point of level 0 of stage 2 moves to level 1
    assert apply_T(spec, Fraction(1, 8)) == Fraction(1, 8) + Fraction(1, 2)


def test_apply_T_is_injective_on_samples():
    import random
    rng = random.Random(7)
    spec = classical_staircase()
    pts = {Fraction(rng.randrange(10 ** 9), 10 ** 9) * Fraction(23, 10) for _ in range(1000)}
    images = [apply_T(spec, x) for x in pts]
    assert len(set(images)) == len(pts)


def test_apply_T_top_level_needs_depth():
    spec = classical_staircase()
    # the top of every stage lies above the top of the previous one: x near the spacer frontier
    top = spec.tower().x_left(5, height(spec, 5) - 1)
    with pytest.raises(RefinementExhaustedError):
        apply_T(spec, top, max_stage=5)


def test_tower_point_round_trip():
    spec = classical_staircase()
    for x in [Fraction(0), Fraction(1, 7), Fraction(3, 2), Fraction(2)]:
        tp = TowerPoint.from_coord(spec, 5, x)
        assert tp.to_coord(spec) == x


# -- normalization ----------------------------------------------------------------------------
def test_partial_total_length_examples():
    assert partial_total_length(classical_staircase(), 6) == Fraction(1695, 720)
    assert partial_total_length(RankOneSpec.identity(), 9) == 1


def test_normalize_A():
    assert normalize_A(RankOneSpec.identity()).A == 1.0
    res = normalize_A(classical_staircase(), tol=1e-6)
    import math
    assert abs(float(res.b) - (1 + math.e / 2)) < 1e-5
    assert abs(res.A - 2 / (2 + math.e)) < 1e-5


def test_normalize_A_reports_non_convergence():
    with pytest.raises(RefinementExhaustedError):
        normalize_A(RankOneSpec(lambda n: 2, lambda n, i: 1), tol=1e-12, max_depth=20)


def test_restricted_growth_profile():
    prof = restricted_growth_profile(classical_staircase(), 10)
    assert prof[3] == Fraction(16, 54)
    assert all(a > b for a, b in zip(prof[1:], prof[2:]))
    assert restricted_growth_profile(RankOneSpec.identity(), 5) == [1] * 5
