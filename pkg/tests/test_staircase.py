from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import cut_and_stack, spacer_runs
from staircase_flow.rank_one import InvalidSpecError, build_stage
from staircase_flow.staircase import (block_formulas, block_positions, block_size_distribution, catalog_length,
                                      classical_staircase, enumerate_spacer_blocks, formula_diff, g_product,
                                      general_staircase, spec_from_description)


def test_classical_spec_values():
    spec = classical_staircase()
    assert spec.r(3) == 3
    assert spec.s(4, 1) == 0
    assert spec.s(5, 5) == 4


def test_general_staircase_forms():
    assert general_staircase("2*n").r(4) == 8
    assert general_staircase([1, 3, 2]).r(2) == 3
    assert general_staircase("n%3+1").spacer_row(3) == (0,)
    with pytest.raises(InvalidSpecError):
        general_staircase([1, 2]).r(3)
    with pytest.raises(InvalidSpecError):
        general_staircase("__import__('os')")


def test_spec_from_description():
    assert spec_from_description({"kind": "classical"}).r(5) == 5
    assert spec_from_description({"kind": "general", "cutting": "2*n"}).r(3) == 6
    assert spec_from_description({"kind": "identity"}).r(7) == 1
    for bad in [{}, {"kind": "other"}, {"kind": "general"}, {"kind": "general", "cutting": 3}]:
        with pytest.raises(InvalidSpecError):
            spec_from_description(bad)


def test_catalog_examples():
    spec = classical_staircase()
    assert enumerate_spacer_blocks(spec, 1).to_list() == []
    assert enumerate_spacer_blocks(spec, 3).to_list() == [1, 2, 3]
    assert enumerate_spacer_blocks(spec, 4).to_list() == [1, 2, 3, 1, 2, 4, 1, 2, 5, 1, 2, 6]
    assert enumerate_spacer_blocks(general_staircase("2*n"), 1).to_list() == [1]


@pytest.mark.parametrize("cutting", ["n", "2*n", "n%3+1", [2, 1, 3, 2, 2]])
def test_catalog_matches_kind_word_oracle(cutting):
    spec = general_staircase(cutting)
    for n in range(1, 6):
        levels, _ = cut_and_stack(spec.r, spec.s, n)
        word = "".join(k for _, k in levels)
        assert enumerate_spacer_blocks(spec, n).to_list() == spacer_runs(word)


@pytest.mark.parametrize("cutting", ["n", "2*n"])
def test_run_catalog_matches_compiled_walk(cutting):
    spec = general_staircase(cutting)
    for n in range(1, 7):
        runs = enumerate_spacer_blocks(spec, n, method="runs").to_list()
        assert enumerate_spacer_blocks(spec, n, method="walk").to_list() == runs


def test_catalog_sum_equals_spacer_levels():
    spec = classical_staircase()
    for n in range(1, 7):
        cat = enumerate_spacer_blocks(spec, n)
        assert cat.spacer_levels() == build_stage(spec, n).kind_word().count("S")
        assert len(cat) == catalog_length(spec, n)


def test_self_similarity():
    spec = classical_staircase()
    for n in range(2, 7):
        prev = enumerate_spacer_blocks(spec, n).to_list()
        cur = enumerate_spacer_blocks(spec, n + 1).to_list()
        expect = []
        for k in range(1, spec.r(n + 1) + 1):
            copy = list(prev)
            copy[-1] += k - 1
            expect.extend(copy)
        assert cur == expect


def test_new_sizes_per_stage():
    spec = classical_staircase()
    prev = 3
    for n in range(4, 9):
        sizes = set(enumerate_spacer_blocks(spec, n).to_list())
        assert sizes == set(range(1, max(sizes) + 1))
        assert max(sizes) - prev == spec.r(n) - 1
        prev = max(sizes)


def test_block_position_examples():
    spec = classical_staircase()
    f1, pos1 = block_positions(spec, 1, 5)
    assert list(pos1[:4]) == [1, 4, 7, 10]
    f2, pos2 = block_positions(spec, 2, 5)
    assert list(pos2[:3]) == [2, 5, 8]
    f3, pos3 = block_positions(spec, 3, 6)
    assert (f3.F_of_n, f3.stride, f3.is_last_new, f3.m_of_n) == (3, 12, True, 3)
    assert list(pos3[:3]) == [3, 15, 27]
    f4, pos4 = block_positions(spec, 4, 6)
    assert (f4.F_of_n, f4.stride) == (6, 12)
    assert list(pos4[:3]) == [6, 18, 30]
    with pytest.raises(ValueError):
        block_positions(spec, 40, 5)


def test_classical_stride_is_half_factorial():
    import math
    formulas, _ = block_formulas(classical_staircase(), 7)
    for f in formulas.values():
        m = f.m_of_n + 1 if f.is_last_new else f.m_of_n
        assert f.stride == math.factorial(m) // 2


@pytest.mark.parametrize("cutting", ["n", "2*n"])
def test_formula_matches_enumeration_through_stage_seven(cutting):
    diffs = formula_diff(general_staircase(cutting), 7)
    assert diffs and all(d.mismatches == 0 for d in diffs)


def test_g_product():
    assert g_product(classical_staircase(), 4) == 24
    assert g_product(general_staircase("2*n"), 3) == 24
    assert g_product(general_staircase([5, 7, 2]), 2) == 7


def test_block_size_distribution():
    spec = classical_staircase()
    d4 = block_size_distribution(spec, 4)
    assert d4 == {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 12), 4: Fraction(1, 12),
                  5: Fraction(1, 12), 6: Fraction(1, 12)}
    assert block_size_distribution(spec, 3) == {1: Fraction(1, 3), 2: Fraction(1, 3), 3: Fraction(1, 3)}
    with pytest.raises(ValueError):
        block_size_distribution(spec, 1)


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=6, max_size=6), st.integers(2, 6))
def test_distribution_sums_to_one(rs, n):
    spec = general_staircase(rs)
    if len(enumerate_spacer_blocks(spec, n)) == 0:
        return
    assert sum(block_size_distribution(spec, n).values()) == 1


def test_counts_are_numpy():
    cat = enumerate_spacer_blocks(classical_staircase(), 5)
    assert isinstance(cat.blocks, np.ndarray)
    assert cat.counts()[1] == 20
