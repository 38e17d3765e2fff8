"""Staircase transformations and the combinatorics of their spacer blocks.

A staircase puts ``i - 1`` spacers above the ``i``-th subcolumn.  Walking
up the stage-``n`` column, spacer levels come in maximal runs ("blocks");
listing their sizes bottom to top gives the block catalog ``d(1), d(2), ...``
(1-based, so that ``d(1)`` is the lowest block).

For every block size ``n`` the module records the first stage ``m(n)`` at
which it appears, its first catalog index ``F(n)`` and the stride between
consecutive occurrences, and compares the predicted index progression
``F(n) + j * stride`` with the exact catalog.
"""

from __future__ import annotations

import ast
import operator
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np

from . import kernels
from .rank_one import BudgetExceededError, InvalidSpecError, RankOneSpec

__all__ = [
    "StaircaseSpec",
    "classical_staircase",
    "general_staircase",
    "spec_from_description",
    "BlockCatalog",
    "BlockFormula",
    "BlockDiff",
    "DEFAULT_CATALOG_BUDGET",
    "DEFAULT_WALK_BUDGET",
    "enumerate_spacer_blocks",
    "catalog_length",
    "g_product",
    "block_formulas",
    "block_positions",
    "formula_diff",
    "block_size_distribution",
]

DEFAULT_CATALOG_BUDGET = 400_000_000
DEFAULT_WALK_BUDGET = 2_000_000_000


def _staircase_spacers(n: int, i: int) -> int:
    return i - 1


class StaircaseSpec(RankOneSpec):
    """A rank-one spec with ``s_{n,i} = i - 1``."""

    def __init__(self, cutting: Callable[[int], int], name: str = "staircase",
                 description: Optional[dict] = None):
        super().__init__(cutting, _staircase_spacers, name, description)


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.FloorDiv: operator.floordiv,
    ast.Mod: operator.mod,
    ast.Pow: operator.pow,
}


def _compile_expression(text: str) -> Callable[[int], int]:
    """Compile an integer expression in ``n`` such as ``"2*n"`` or ``"n % 3 + 1"``."""
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise InvalidSpecError(f"cannot parse cutting expression {text!r}: {exc.msg}") from None

    def check(node):
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            check(node.operand)
        elif isinstance(node, ast.Constant) and type(node.value) is int:
            pass
        elif isinstance(node, ast.Name) and node.id == "n":
            pass
        else:
            raise InvalidSpecError(
                f"cutting expression {text!r} may only use n, integers and + - * // % **")

    check(tree)

    def evaluate(node, n):
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, n), evaluate(node.right, n))
        if isinstance(node, ast.UnaryOp):
            value = evaluate(node.operand, n)
            return -value if isinstance(node.op, ast.USub) else value
        if isinstance(node, ast.Constant):
            return node.value
        return n

    body = tree.body
    return lambda n: evaluate(body, n)


def classical_staircase() -> StaircaseSpec:
    """The staircase with ``r_n = n``."""
    return StaircaseSpec(lambda n: n, name="classical", description={"kind": "classical"})


def general_staircase(cutting: Union[str, Sequence[int], Callable[[int], int]],
                      name: Optional[str] = None) -> StaircaseSpec:
    """Staircase with an arbitrary cutting sequence.

    Parameters
    ----------
    cutting : str, sequence of int or callable
        An integer expression in ``n`` (``"2*n"``), the explicit values
        ``r_1, r_2, ...`` (stages past the end are rejected), or a callable.
    name : str, optional
        Label used in reports.
    """
    if isinstance(cutting, str):
        func = _compile_expression(cutting)
        desc = {"kind": "general", "cutting": cutting}
        label = name or f"r_n={cutting}"
    elif callable(cutting):
        func = cutting
        desc = None
        label = name or "staircase"
    else:
        values = [int(v) for v in cutting]

        def func(n, values=values):
            if n > len(values):
                raise InvalidSpecError(f"cutting sequence only lists {len(values)} stages, asked for r_{n}")
            return values[n - 1]

        desc = {"kind": "general", "cutting": values}
        label = name or "staircase"
    return StaircaseSpec(func, name=label, description=desc)


def spec_from_description(desc: dict) -> RankOneSpec:
    """Rebuild a spec from its JSON description.

    Accepted forms are ``{"kind": "classical"}``, ``{"kind": "identity"}``
    and ``{"kind": "general", "cutting": "2*n"}`` (or a list of integers).
    """
    if not isinstance(desc, dict) or "kind" not in desc:
        raise InvalidSpecError("staircase description must be an object with a 'kind' field")
    kind = desc["kind"]
    if kind == "classical":
        return classical_staircase()
    if kind == "identity":
        return RankOneSpec.identity()
    if kind == "general":
        if "cutting" not in desc:
            raise InvalidSpecError("a general staircase needs a 'cutting' field")
        cutting = desc["cutting"]
        if not isinstance(cutting, (str, list)):
            raise InvalidSpecError("'cutting' must be an expression string or a list of integers")
        return general_staircase(cutting, name=desc.get("name"))
    raise InvalidSpecError(f"unknown staircase kind {kind!r}")


# ---------------------------------------------------------------------------
# catalogs
# ---------------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class BlockCatalog:
    """Sizes of the maximal spacer runs of one stage, bottom to top.

    ``blocks[l - 1]`` is ``d(l)``.
    """

    stage_n: int
    blocks: np.ndarray

    def __len__(self) -> int:
        return int(self.blocks.shape[0])

    def to_list(self) -> List[int]:
        return [int(v) for v in self.blocks]

    def spacer_levels(self) -> int:
        """Number of spacer levels (the sum of all block sizes)."""
        return int(self.blocks.sum(dtype=np.int64))

    def counts(self) -> np.ndarray:
        """``counts[n]`` is the number of blocks of size ``n``."""
        if len(self) == 0:
            return np.zeros(1, dtype=np.int64)
        return np.bincount(self.blocks)

    def positions(self, size: int) -> np.ndarray:
        """1-based catalog indices of the blocks of the given size."""
        return np.flatnonzero(self.blocks == size) + 1


def _dtype_for(bound: int):
    for dt in (np.uint8, np.uint16, np.uint32, np.uint64):
        if bound <= np.iinfo(dt).max:
            return dt
    raise OverflowError(f"block sizes up to {bound} do not fit 64 bits")


def _run_catalogs(spec: RankOneSpec, stage_n: int, budget: Optional[int]):
    """Yield ``(k, catalog)`` for ``k = 0..stage_n`` by run-length stacking.

    The stage-``k`` catalog is ``r_k`` copies of the stage-``(k-1)`` catalog;
    the ``s_{k,p}`` spacers stacked on copy ``p`` either extend that copy's
    last block (when the column ends in a spacer) or form a new block.
    Each column starts with a non-spacer level, so nothing merges across
    the bottom of a copy.
    """
    bound = 0
    for k in range(1, stage_n + 1):
        bound += max(spec.spacer_row(k))
    dtype = _dtype_for(bound)
    cat = np.zeros(0, dtype=dtype)
    ends_spacer = False
    yield 0, cat
    for k in range(1, stage_n + 1):
        r = spec.r(k)
        row = spec.spacer_row(k)
        base = len(cat)
        new_blocks = sum(1 for v in row if v > 0) if not ends_spacer else 0
        total = r * base + new_blocks
        if budget is not None and total > budget:
            raise BudgetExceededError(
                f"stage-{k} catalog would have {total} blocks, budget is {budget}")
        out = np.empty(total, dtype=dtype)
        pos = 0
        for p in range(r):
            out[pos:pos + base] = cat
            pos += base
            if row[p] > 0:
                if ends_spacer:
                    out[pos - 1] += row[p]
                else:
                    out[pos] = row[p]
                    pos += 1
        assert pos == total
        ends_spacer = ends_spacer or row[-1] > 0
        cat = out
        yield k, cat


def enumerate_spacer_blocks(spec: RankOneSpec, stage_n: int, method: str = "runs",
                            budget: Optional[int] = None) -> BlockCatalog:
    """Block catalog of the stage-``stage_n`` column.

    Parameters
    ----------
    spec : RankOneSpec
        Any rank-one spec; staircases are the intended use.
    stage_n : int
        Stage (``>= 0``).
    method : {"runs", "walk"}
        ``"runs"`` stacks catalogs run by run (cost proportional to the
        number of blocks).  ``"walk"`` climbs the column one level at a time
        with the compiled kernel (cost proportional to ``h_n``) and is kept
        as an independent check.
    budget : int, optional
        Maximum catalog length (``"runs"``, default
        ``DEFAULT_CATALOG_BUDGET``) or column height (``"walk"``, default
        ``DEFAULT_WALK_BUDGET``).

    Raises
    ------
    BudgetExceededError
        If the budget is exceeded.
    """
    if stage_n < 0:
        raise ValueError("stage must be >= 0")
    if method == "runs":
        if budget is None:
            budget = DEFAULT_CATALOG_BUDGET
        cat = None
        for _, cat in _run_catalogs(spec, stage_n, budget):
            pass
        return BlockCatalog(stage_n, cat)
    if method == "walk":
        h = spec.tower().height(stage_n)
        if budget is None:
            budget = DEFAULT_WALK_BUDGET
        if budget is not None and h > budget:
            raise BudgetExceededError(f"stage-{stage_n} column has {h} levels, budget is {budget}")
        r = [1] + [spec.r(k) for k in range(1, stage_n + 1)]
        s = [[0]] + [[0] + list(spec.spacer_row(k)) for k in range(1, stage_n + 1)]
        runs = kernels.walk_spacer_runs(r, s, stage_n)
        dtype = _dtype_for(int(runs.max()) if len(runs) else 0)
        return BlockCatalog(stage_n, runs.astype(dtype))
    raise ValueError("method must be 'runs' or 'walk'")


def catalog_length(spec: RankOneSpec, m: int) -> int:
    """Number of spacer blocks at stage ``m`` for a staircase, in closed form.

    With ``k`` the first stage where ``r_k >= 2`` the stage-``k`` column has
    ``r_k - 1`` blocks, and every later stage multiplies the count by
    ``r``: ``(r_k - 1) * r_{k+1} * ... * r_m`` (``0`` if ``m < k``).
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    length = 0
    for k in range(1, m + 1):
        r = spec.r(k)
        length = length * r if length else r - 1
    return length


def g_product(spec: RankOneSpec, n: int) -> int:
    """``g(n) = r_2 * r_3 * ... * r_n`` as an exact integer.

    Python integers do not overflow; use
    :func:`staircase_flow.rank_one.check_int64` before handing the value
    to fixed-width code.
    """
    if n < 2:
        raise ValueError("g(n) is defined for n >= 2")
    out = 1
    for i in range(2, n + 1):
        out *= spec.r(i)
    return out


# ---------------------------------------------------------------------------
# positions of each block size
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class BlockFormula:
    """First appearance and stride of one block size.

    Attributes
    ----------
    n : int
        Block size.
    m_of_n : int
        First stage whose catalog contains a block of size ``n``.
    F_of_n : int
        1-based index of the first such block.
    stride : int
        Distance between consecutive occurrences: the stage-``m(n)`` catalog
        length, or the stage-``(m(n)+1)`` one when ``n`` is the largest size
        of the stage-``m(n)`` catalog (``is_last_new``).
    is_last_new : bool
        Whether ``n`` is the largest block size at stage ``m(n)``.
    g_stride : int
        ``g(m(n))`` or ``g(m(n)+1)`` by the same case split, for comparison.
    """

    n: int
    m_of_n: int
    F_of_n: int
    stride: int
    is_last_new: bool
    g_stride: int

    def predicted(self, length: int) -> np.ndarray:
        """Predicted 1-based indices ``F + j*stride`` not exceeding ``length``."""
        if self.F_of_n > length:
            return np.zeros(0, dtype=np.int64)
        return np.arange(self.F_of_n, length + 1, self.stride, dtype=np.int64)


def block_formulas(spec: RankOneSpec, depth: int,
                   budget: Optional[int] = DEFAULT_CATALOG_BUDGET):
    """Block formulas for every size present at stage ``depth``.

    Returns
    -------
    formulas : dict
        ``size -> BlockFormula``.
    catalog : BlockCatalog
        The stage-``depth`` catalog they were detected from.
    """
    first_stage: Dict[int, int] = {}
    stage_max: Dict[int, int] = {}
    cat = None
    for k, cat in _run_catalogs(spec, depth, budget):
        if len(cat) == 0:
            continue
        present = np.flatnonzero(np.bincount(cat))
        stage_max[k] = int(present[-1])
        for size in present.tolist():
            first_stage.setdefault(int(size), k)
    formulas: Dict[int, BlockFormula] = {}
    for size, m in sorted(first_stage.items()):
        F = int(np.argmax(cat == size)) + 1
        last_new = size == stage_max[m]
        m_stride = m + 1 if last_new else m
        g_stride = g_product(spec, m_stride) if m_stride >= 2 else 1
        formulas[size] = BlockFormula(size, m, F, catalog_length(spec, m_stride), last_new, g_stride)
    return formulas, BlockCatalog(depth, cat)


def block_positions(spec: RankOneSpec, n: int, depth: int):
    """Formula for block size ``n`` and its predicted indices up to stage ``depth``.

    Raises
    ------
    ValueError
        If no block of size ``n`` appears by stage ``depth``.
    """
    formulas, cat = block_formulas(spec, depth)
    if n not in formulas:
        raise ValueError(f"block size {n} never appears within {depth} stages")
    f = formulas[n]
    return f, f.predicted(len(cat))


@dataclass(frozen=True)
class BlockDiff:
    """Formula-versus-enumeration comparison for one block size."""

    n: int
    m_of_n: int
    F_of_n: int
    stride: int
    g_stride: int
    is_last_new: bool
    enumerated: int
    predicted: int
    mismatches: int


def formula_diff(spec: RankOneSpec, depth: int,
                 budget: Optional[int] = DEFAULT_CATALOG_BUDGET) -> List[BlockDiff]:
    """Compare predicted and enumerated index sets for every block size.

    ``mismatches`` counts predicted indices holding a different size plus
    enumerated indices that were not predicted, so ``0`` means the two
    index sets are equal.
    """
    formulas, cat = block_formulas(spec, depth, budget)
    blocks = cat.blocks
    counts = cat.counts()
    out = []
    for size, f in formulas.items():
        pred = f.predicted(len(cat))
        hits = int(np.count_nonzero(blocks[pred - 1] == size))
        wrong = len(pred) - hits
        missed = int(counts[size]) - hits
        out.append(BlockDiff(size, f.m_of_n, f.F_of_n, f.stride, f.g_stride, f.is_last_new,
                             int(counts[size]), len(pred), wrong + missed))
    return out


def block_size_distribution(spec: RankOneSpec, stage_n: int) -> Dict[int, Fraction]:
    """Empirical frequencies ``P_n`` of block sizes in the stage catalog.

    Raises
    ------
    ValueError
        If the catalog is empty (no spacers yet).
    """
    cat = enumerate_spacer_blocks(spec, stage_n)
    if len(cat) == 0:
        raise ValueError(f"the stage-{stage_n} catalog is empty")
    counts = cat.counts()
    total = len(cat)
    return {int(size): Fraction(int(counts[size]), total) for size in np.flatnonzero(counts)}
