import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import star_discrepancy_brute, under_inv_sqrt2
from staircase_flow.equidistribution import (NONSPACER, SPACER, H_ratio, Hbar_ratio, block_height_indices,
                                             discrepancy_report, fit_log_bound, height_set,
                                             phi_q_height_set, phi_q_ratio, rotation_points,
                                             star_discrepancy, subsequence_equidist, weyl_sum,
                                             window_target)
from staircase_flow.exact import DEFAULT_Q
from staircase_flow.staircase import classical_staircase
from staircase_flow.suspension import SuspensionFlow
from staircase_flow.trajectory import PhiQEnsemble


@pytest.fixture(scope="module")
def flow():
    return SuspensionFlow(classical_staircase())


# -- rotation statistics ----------------------------------------------------------------
def test_discrepancy_of_a_grid_and_a_point():
    N = 50
    assert star_discrepancy(np.arange(N) / N) == pytest.approx(1 / N)
    assert star_discrepancy([0.0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        star_discrepancy([])
    with pytest.raises(ValueError):
        star_discrepancy([1.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=40))
def test_discrepancy_matches_brute_force(points):
    assert star_discrepancy(points) == pytest.approx(star_discrepancy_brute(points), abs=1e-12)


def test_rotation_points_are_exact_residues():
    x = rotation_points(DEFAULT_Q, 500, start=10 ** 9)
    for k in (0, 17, 499):
        n = 10 ** 9 + k
        assert x[k] == pytest.approx(float(DEFAULT_Q.num(-DEFAULT_Q.floor_multiple(n), n)), abs=1e-12)


def test_weyl_sums():
    assert weyl_sum(Fraction(1, 2), 10, 2) == pytest.approx(1.0)
    for h in (1, 2, 3):
        assert weyl_sum(DEFAULT_Q, 10_000, h) < 0.02
    with pytest.raises(ValueError):
        weyl_sum(DEFAULT_Q, 0, 1)


def test_discrepancy_report_and_log_bound():
    rep = discrepancy_report(DEFAULT_Q, 10_000, windows=[(0.0, 0.5), (0.5, 1.0)])
    assert sum(rep.window_counts.values()) == 10_000
    assert rep.D_star < 1e-3
    fit = fit_log_bound(DEFAULT_Q)
    assert fit.ok and fit.C > 0
    assert all(d <= fit.slack * fit.C * math.log(n) / n for n, d in zip(fit.check_N, fit.check_values))


# -- height sets --------------------------------------------------------------------------
def test_height_set_at_time_zero(flow):
    ens = flow.level_ensemble(3, 0)
    hs = height_set(flow, ens)
    assert hs.heights == (flow.zero,)
    assert height_set(flow, ens, SPACER).count == 0


def test_window_additivity(flow):
    ens = flow.discretize_phi_q(flow.level_ensemble(3, 0), 60)
    cuts = [Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(1)]
    parts = [height_set(flow, ens, NONSPACER, (a, b)).count for a, b in zip(cuts, cuts[1:])]
    assert sum(parts) == height_set(flow, ens, NONSPACER).count
    assert H_ratio(flow, ens, NONSPACER, (0, 1)) == 1.0
    with pytest.raises(ValueError):
        height_set(flow, ens, NONSPACER, (Fraction(1, 2), Fraction(2)))
    with pytest.raises(ValueError):
        H_ratio(flow, ens, (2, 0), (0, 1))


def test_empty_height_set_ratio_raises(flow):
    ens = flow.level_ensemble(3, 0)
    with pytest.raises(ValueError, match="no heights yet"):
        H_ratio(flow, ens, SPACER, (0, Fraction(1, 2)))


def test_cylinder_heights_refine_region_heights(flow):
    ens = flow.discretize_phi_q(flow.level_ensemble(3, 0), 80)
    whole = set(height_set(flow, ens, NONSPACER).heights)
    for K in (0, 1):
        part = set(height_set(flow, ens, (2, K)).heights)
        assert part <= whole
    assert 0 <= Hbar_ratio(flow, ens, (2, 0), (0, Fraction(1, 2))) <= 1


def test_kernel_height_sets_match_exact(flow):
    pe = PhiQEnsemble(flow, [(3, 0)], cylinders=[(2, 0)]).run(70)
    ens = flow.discretize_phi_q(flow.level_ensemble(3, 0), 70)
    for base in (NONSPACER, SPACER, (2, 0)):
        assert phi_q_height_set(pe, base).heights == height_set(flow, ens, base).heights
    union = phi_q_height_set(pe, NONSPACER, union=True)
    assert set(height_set(flow, ens, NONSPACER).heights) <= set(union.heights)
    assert phi_q_ratio(pe, NONSPACER, (0, 1)) == 1.0


def test_window_target(flow):
    assert window_target(flow, False, (0, Fraction(1, 4))) == 0.25
    half_q = flow.time(0, Fraction(1, 2))
    assert window_target(flow, True, (flow.zero, half_q)) == pytest.approx(0.5)


# -- subsequences ----------------------------------------------------------------------------
def test_subsequence_of_all_integers_matches_window_length():
    frac = subsequence_equidist(DEFAULT_Q, range(1, 10 ** 4 + 1), 10 ** 4, (0, Fraction(1, 3)))
    assert abs(frac - 1 / 3) < 1e-3


def test_even_indexed_under_q_subsequence():
    a = under_inv_sqrt2(4000)
    frac = subsequence_equidist(DEFAULT_Q, a[1::2], 2000, (0, Fraction(1, 2)))
    # the a_n have residues in [0, q); half the window [0, 1/2) is 1/(2q) of it
    assert abs(frac - 1 / (2 * float(DEFAULT_Q))) < 0.02


def test_subsequence_argument_checks():
    with pytest.raises(ValueError):
        subsequence_equidist(DEFAULT_Q, [3, 2], 2, (0, 1))
    with pytest.raises(ValueError):
        subsequence_equidist(DEFAULT_Q, [1, 2], 3, (0, 1))


def test_block_height_indices():
    idx = block_height_indices(classical_staircase(), DEFAULT_Q, 3, 4)
    a = under_inv_sqrt2(200)
    # size-3 blocks start at positions 3, 15, 27, ... and r_1 = 1
    assert idx == [a[2], a[14], a[26], a[38]]
    with pytest.raises(ValueError):
        block_height_indices(classical_staircase(), DEFAULT_Q, 500, 2)
