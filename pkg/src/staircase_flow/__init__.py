"""Exact staircase suspension flows.

Cutting-and-stacking towers (:mod:`~staircase_flow.rank_one`), staircase
block combinatorics (:mod:`~staircase_flow.staircase`), the exact flow
under a two-valued roof (:mod:`~staircase_flow.suspension`,
:mod:`~staircase_flow.trajectory`), rotation and height equidistribution
(:mod:`~staircase_flow.rotation`, :mod:`~staircase_flow.equidistribution`),
mixing diagnostics (:mod:`~staircase_flow.mixing`) and the CLI
(:mod:`~staircase_flow.cli`).
"""

from .exact import DEFAULT_Q, QNum, QuadraticQ, RationalQ, RealQ, decimal_str, fraction_str
from .kernels import BACKEND
from .rank_one import (BudgetExceededError, InvalidSpecError, RankOneSpec, RefinementExhaustedError,
                       Tower, build_stage, height, normalize_A)
from .staircase import (classical_staircase, enumerate_spacer_blocks, formula_diff, general_staircase,
                        spec_from_description)
from .suspension import HeightLedger, Segment, SegmentEnsemble, SuspensionFlow
from .trajectory import PhiQEnsemble

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DEFAULT_Q",
    "QNum",
    "QuadraticQ",
    "RationalQ",
    "RealQ",
    "decimal_str",
    "fraction_str",
    "BudgetExceededError",
    "InvalidSpecError",
    "RankOneSpec",
    "RefinementExhaustedError",
    "Tower",
    "build_stage",
    "height",
    "normalize_A",
    "classical_staircase",
    "enumerate_spacer_blocks",
    "formula_diff",
    "general_staircase",
    "spec_from_description",
    "HeightLedger",
    "Segment",
    "SegmentEnsemble",
    "SuspensionFlow",
    "PhiQEnsemble",
]
