"""Command-line entry point.

Every subcommand reads a JSON config (see :mod:`staircase_flow.config`),
writes deterministic CSV/SVG files into ``--out`` and prints their paths.

Exit codes: ``0`` success, ``2`` configuration error, ``3`` budget
exhausted, ``4`` tolerance failure under ``--check``.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence

from .config import ConfigError, ExperimentConfig, RectangleConfig, load_config
from .equidistribution import (NONSPACER, SPACER, discrepancy_report, fit_log_bound,
                               phi_q_height_set, window_target)
from .exact import fraction_str
from .mixing import (Rectangle, correlation_curve, monte_carlo_overlap, projection_overlap,
                     rect_correlation, ulcigrai_check)
from .rank_one import BudgetExceededError, InvalidSpecError, height, partial_total_length
from .reports import exact_cell, polygon_svg, write_csv, write_text
from .rotation import check_k_equals_a_even, compare_with_orbit, first_return_rotation, return_sequences
from .staircase import enumerate_spacer_blocks, formula_diff
from .suspension import SuspensionFlow
from .trajectory import PhiQEnsemble

__all__ = ["main", "build_parser", "EXIT_OK", "EXIT_CONFIG", "EXIT_BUDGET", "EXIT_CHECK"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_CHECK = 4

REFERENCE_A = 2.0 / (3.0 + math.e)
HEIGHT_TOLERANCE = 0.05
CATALOG_CELL_LIMIT = 1_000_000


class Run:
    """Per-invocation context: config, output directory and written files."""

    def __init__(self, cfg: ExperimentConfig, out: str, check: bool):
        self.cfg = cfg
        self.out = out
        self.check = check
        self.written: List[str] = []
        self.failures: List[str] = []
        self._flow: Optional[SuspensionFlow] = None

    @property
    def flow(self) -> SuspensionFlow:
        if self._flow is None:
            try:
                self._flow = SuspensionFlow(self.cfg.spec, self.cfg.q, self.cfg.flow_depth,
                                            self.cfg.segment_budget)
            except ValueError as exc:
                raise ConfigError(f"q: {exc}") from None
        return self._flow

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)

    def csv(self, name: str, columns: Sequence[str], rows) -> None:
        self.written.append(write_csv(self.path(name), columns, rows))

    def text(self, name: str, text: str) -> None:
        self.written.append(write_text(self.path(name), text))

    def expect(self, ok: bool, message: str) -> None:
        if not ok:
            self.failures.append(message)


def _level(run: Run, n: int, K: int, where: str):
    h = height(run.cfg.spec, n)
    if not 0 <= K < h:
        raise ConfigError(f"{where}: level {K} does not exist at stage {n} (height {h})")
    return n, K


def _rectangles(run: Run, items: Sequence[RectangleConfig], where: str) -> List[Rectangle]:
    out = []
    for idx, rc in enumerate(items):
        _level(run, rc.stage, rc.level, f"{where}[{idx}]")
        try:
            out.append(Rectangle.from_level(run.flow, rc.stage, rc.level, rc.lo, rc.hi,
                                            f"{where}{idx}:I({rc.stage})_{rc.level}"))
        except ValueError as exc:
            raise ConfigError(f"{where}[{idx}]: {exc}") from None
    return out


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------
def cmd_tower(run: Run) -> None:
    """Stage table ``n, h_n, width, r_n^2/h_n, partial b, A estimate``."""
    spec = run.cfg.spec
    tower = spec.tower()
    rows = []
    prev_h = None
    for n in range(run.cfg.depth + 1):
        h = tower.height(n)
        if prev_h is not None:
            recurrence = spec.r(n) * prev_h + sum(spec.spacer_row(n))
            run.expect(h == recurrence, f"h_{n} = {h} differs from the recurrence value {recurrence}")
        prev_h = h
        width = tower.width(n)
        b = partial_total_length(spec, n)
        growth = Fraction(spec.r(n) ** 2, h) if n >= 1 else None
        rows.append({
            "n": n, "h_n": h, "r_n": spec.r(n) if n >= 1 else None,
            "width": width, "width_exact": fraction_str(width),
            "r_n_sq_over_h_n": growth, "r_n_sq_over_h_n_exact": None if growth is None else fraction_str(growth),
            "partial_b": b, "partial_b_exact": fraction_str(b),
            "A_estimate": 1 / b,
        })
    run.csv("tower.csv", ["n", "h_n", "r_n", "width", "width_exact", "r_n_sq_over_h_n",
                          "r_n_sq_over_h_n_exact", "partial_b", "partial_b_exact", "A_estimate"], rows)
    b10 = partial_total_length(spec, 10)
    b12 = partial_total_length(spec, 12)
    A = 1 / b12
    summary = [
        {"quantity": "partial_b_10", "value": b10, "exact": fraction_str(b10)},
        {"quantity": "partial_b_12", "value": b12, "exact": fraction_str(b12)},
        {"quantity": "b_12_minus_b_10", "value": b12 - b10, "exact": fraction_str(b12 - b10)},
        {"quantity": "A_construction", "value": A, "exact": fraction_str(A)},
        {"quantity": "A_reference_2_over_3_plus_e", "value": REFERENCE_A, "exact": None},
        {"quantity": "A_difference", "value": float(A) - REFERENCE_A, "exact": None},
    ]
    run.csv("tower_summary.csv", ["quantity", "value", "exact"], summary)
    run.expect(abs(float(b12 - b10)) < 1e-4, f"b_12 - b_10 = {float(b12 - b10):.3g} exceeds 1e-4")


def cmd_blocks(run: Run) -> None:
    """Per-stage spacer block catalogs and the formula-versus-enumeration table."""
    spec = run.cfg.spec
    depth = run.cfg.depth
    rows = []
    for n in range(1, depth + 1):
        cat = enumerate_spacer_blocks(spec, n)
        blocks = ",".join(str(v) for v in cat.to_list()) if len(cat) <= CATALOG_CELL_LIMIT else None
        rows.append({"stage": n, "length": len(cat), "spacer_levels": cat.spacer_levels(),
                     "max_size": int(cat.blocks.max()) if len(cat) else 0, "blocks": blocks})
    run.csv("blocks_catalog.csv", ["stage", "length", "spacer_levels", "max_size", "blocks"], rows)
    diffs = formula_diff(spec, depth) if depth >= 1 else []
    run.csv("blocks_diff.csv", ["n", "m_of_n", "F_of_n", "stride", "g_stride", "is_last_new",
                                "enumerated", "predicted", "mismatches"],
            [vars(d) for d in diffs])
    bad = [d.n for d in diffs if d.mismatches]
    run.expect(not bad, f"block formula mismatches for sizes {bad}")


def cmd_flow(run: Run) -> None:
    """Flow the configured level to each time in ``times``."""
    flow = run.flow
    n, K = _level(run, *run.cfg.level, "level")
    src = flow.level_ensemble(n, K)
    ens = src
    rows = []
    summary = []
    for t in sorted(run.cfg.times):
        ens = flow.flow_segments(ens, t - ens.t)
        flow.check_ensemble(ens)
        for row in ens.rows():
            rows.append({"t": t, "t_exact": t.exact_str(), **row})
        total = ens.total_length()
        summary.append({"t": t, "t_exact": t.exact_str(), "segments": len(ens),
                        "total_length": total, "total_length_exact": fraction_str(total)})
        run.expect(total == src.total_length(), f"length not conserved at t={t.exact_str()}")
    cols = ["t", "t_exact", "origin", "stage", "level", "kind", "x_left", "width", "i", "j", "y",
            "x_left_exact", "width_exact", "y_exact"]
    run.csv("flow.csv", cols, rows)
    run.csv("flow_summary.csv", ["t", "t_exact", "segments", "total_length", "total_length_exact"], summary)


def _height_rows(run: Run, pe: PhiQEnsemble, base, spacer: bool, label: str):
    cfg = run.cfg
    flow = pe.flow
    full = phi_q_height_set(pe, base, None)
    rows = []
    for lo, hi in cfg.windows:
        if spacer:
            window = (flow.time(0, lo), flow.time(0, hi))
        else:
            window = (flow.time(lo, 0), flow.time(hi, 0))
        count = phi_q_height_set(pe, base, window).count
        target = window_target(flow, spacer, window)
        ratio = count / full.count if full.count else None
        if full.count < max(cfg.min_heights, 1):
            status = "insufficient"
        elif abs(ratio - target) <= HEIGHT_TOLERANCE:
            status = "ok"
        else:
            status = "fail"
        rows.append({
            "step": pe.step, "t_exact": pe.time.exact_str(), "base": label,
            "window_lo": window[0], "window_hi": window[1],
            "window_lo_exact": window[0].exact_str(), "window_hi_exact": window[1].exact_str(),
            "count": count, "total": full.count, "ratio": ratio, "target": target,
            "error": None if ratio is None else abs(ratio - target), "status": status,
        })
    return rows


def cmd_heights(run: Run) -> None:
    """Distinct heights of the time-``q`` orbit of a level, by base region and window."""
    cfg = run.cfg
    flow = run.flow
    level = _level(run, *cfg.level, "level")
    cyls = [_level(run, c, K, f"cylinders[{i}]") for i, (c, K) in enumerate(cfg.cylinders)]
    pe = PhiQEnsemble(flow, [level], cylinders=cyls).run(cfg.k)
    rows = _height_rows(run, pe, NONSPACER, False, "non-spacer")
    rows += _height_rows(run, pe, SPACER, True, "spacer")
    for c, K in cyls:
        rows += _height_rows(run, pe, (c, K), flow.tower.is_spacer(c, K), f"I({c})_{K}")
    cols = ["step", "t_exact", "base", "window_lo", "window_hi", "window_lo_exact", "window_hi_exact",
            "count", "total", "ratio", "target", "error", "status"]
    run.csv("heights.csv", cols, rows)
    for r in rows[: 2 * len(cfg.windows)]:
        run.expect(r["status"] == "ok",
                   f"{r['base']} window [{r['window_lo_exact']}, {r['window_hi_exact']}): {r['status']}"
                   f" (ratio {r['ratio']}, target {r['target']:.4f}, {r['total']} heights)")


def cmd_equidist(run: Run) -> None:
    """Rotation discrepancy, return-map checks and the return index sequences."""
    cfg = run.cfg
    q = cfg.q
    N = cfg.equidist_N
    windows = [(float(lo), float(hi)) for lo, hi in cfg.windows]
    rep = discrepancy_report(q, N, windows)
    fit = fit_log_bound(q)
    rows = [{"N": N, "D_star": rep.D_star, "log_bound": fit.C * math.log(N) / N, "C": fit.C,
             "weyl_1": rep.weyl[0], "weyl_2": rep.weyl[1], "weyl_3": rep.weyl[2]}]
    run.csv("equidist.csv", ["N", "D_star", "log_bound", "C", "weyl_1", "weyl_2", "weyl_3"], rows)
    wrows = [{"window_lo": lo, "window_hi": hi, "count": c, "frequency": c / N, "target": hi - lo}
             for (lo, hi), c in sorted(rep.window_counts.items())]
    run.csv("equidist_windows.csv", ["window_lo", "window_hi", "count", "frequency", "target"], wrows)

    g = first_return_rotation(q)
    cmp = compare_with_orbit(g, q.num(0, 0), N)
    seq = return_sequences(q, 3)
    verdict = check_k_equals_a_even(q, 3)
    srows = []
    for i, (m, k, mr, kr) in enumerate(zip(seq.m, seq.k, seq.m_residue, seq.k_residue), start=1):
        srows.append({"i": i, "m_i": m, "k_i": k, "m_residue": mr, "k_residue": kr,
                      "m_residue_exact": mr.exact_str(), "k_residue_exact": kr.exact_str(),
                      "k_residue_below_q": kr < q.q})
    run.csv("return_sequences.csv", ["i", "m_i", "k_i", "m_residue", "k_residue", "m_residue_exact",
                                     "k_residue_exact", "k_residue_below_q"], srows)
    summary = [
        {"quantity": "N0", "value": str(g.N0)},
        {"quantity": "exchange_point", "value": g.exchange_point.exact_str()},
        {"quantity": "alpha", "value": g.alpha.exact_str()},
        {"quantity": "orbit_steps", "value": str(cmp.steps)},
        {"quantity": "orbit_returns", "value": str(cmp.returns)},
        {"quantity": "orbit_mismatches", "value": str(cmp.mismatches)},
        {"quantity": "k_equals_a_even", "value": verdict.summary()},
    ]
    run.csv("return_map.csv", ["quantity", "value"], summary)
    run.expect(cmp.ok, f"first return map disagrees with the orbit {cmp.mismatches} times")
    run.expect(all(r["k_residue_below_q"] for r in srows), "a k_i residue is not below q")
    if N >= 10_000:
        run.expect(rep.D_star < 0.01, f"D*_{N} = {rep.D_star:.4g} is not below 0.01")


def cmd_mixing(run: Run) -> None:
    """Correlation curve, projection overlaps, criterion check and Monte Carlo cross-check."""
    cfg = run.cfg
    flow = run.flow
    A = _rectangles(run, cfg.A, "A")
    B = _rectangles(run, cfg.B, "B")
    R = _rectangles(run, cfg.R, "R")
    curve = correlation_curve(flow, A, B, cfg.t_grid)
    rows = [{"t": t, "t_exact": t.exact_str(), "overlap": ov, "overlap_exact": ov.exact_str(),
             "ratio_area": ra, "ratio_base": rb, "target": 1.0, "margin": abs(ra - 1.0)}
            for t, ov, ra, rb in zip(curve.t, curve.overlap, curve.ratio_area, curve.ratio_base)]
    run.csv("mixing_curve.csv", ["t", "t_exact", "overlap", "overlap_exact", "ratio_area", "ratio_base",
                                 "target", "margin"], rows)

    level = _level(run, *cfg.level, "level")
    base = (R[0].x_lo, R[0].x_hi if R[0].x_hi is not None else None)
    prow = []
    if base[1] is not None and not base[0] < 1 < base[1]:
        ens = flow.level_ensemble(*level)
        for t in cfg.t_grid:
            tq = flow.time(t, 0)
            ens = flow.flow_segments(ens, tq - ens.t)
            po = projection_overlap(flow, level, base, tq, ens)
            prow.append({"t": tq, "t_exact": tq.exact_str(), "overlap": po.overlap,
                         "overlap_exact": fraction_str(po.overlap), "ratio_area": po.ratio_area,
                         "ratio_base": po.ratio_base, "error_area": po.error_area})
    run.csv("mixing_projection.csv", ["t", "t_exact", "overlap", "overlap_exact", "ratio_area",
                                      "ratio_base", "error_area"], prow)

    verdict = ulcigrai_check(flow, R, cfg.eps, cfg.delta, cfg.t_grid, strict=False)
    urows = [{"t": t, "t_exact": t.exact_str(), "partition_stage": verdict.partition.m,
              "members": len(verdict.partition.members), "margin_area": float(ma),
              "margin_base": float(mb), "mean_area": float(mea), "mean_base": float(meb),
              "passes": ma >= 0}
             for t, ma, mb, mea, meb in zip(verdict.t_grid, verdict.margins_area, verdict.margins_base,
                                            verdict.mean_area, verdict.mean_base)]
    run.csv("mixing_criterion.csv", ["t", "t_exact", "partition_stage", "members", "margin_area",
                                     "margin_base", "mean_area", "mean_base", "passes"], urows)
    run.expect(verdict.passed, f"mixing criterion not met on the grid (worst ratio {verdict.worst[2]:.4f})")

    if cfg.mc_samples > 0:
        t = flow.time(cfg.t_grid[-1], 0)
        exact = rect_correlation(flow, level, R, t)
        est, err = monte_carlo_overlap(flow, level, R, t, cfg.mc_samples, cfg.seed)
        z = abs(est - float(exact)) / err if err > 0 else 0.0
        run.csv("mixing_monte_carlo.csv", ["t_exact", "samples", "seed", "exact", "exact_str",
                                           "estimate", "stderr", "z"],
                [{"t_exact": t.exact_str(), "samples": cfg.mc_samples, "seed": str(cfg.seed),
                  "exact": exact, "exact_str": exact_cell(exact), "estimate": est, "stderr": err, "z": z}])
        run.expect(z <= 3.0, f"Monte Carlo estimate is {z:.2f} standard errors from the exact value")


def cmd_render(run: Run) -> None:
    """SVG of the polygon with the configured level after ``render_k`` time-``q`` steps."""
    cfg = run.cfg
    flow = run.flow
    level = _level(run, *cfg.level, "level")
    pe = PhiQEnsemble(flow, [level]).run(cfg.render_k)
    ens = pe.to_segment_ensemble()
    title = f"I({level[0]})_{level[1]} after {cfg.render_k} steps of length q"
    run.text("render.svg", polygon_svg(flow, ens, cfg.svg_scale, title))
    cols = ["origin", "stage", "level", "kind", "x_left", "width", "i", "j", "y",
            "x_left_exact", "width_exact", "y_exact"]
    run.csv("render_segments.csv", cols, ens.rows())


COMMANDS: Dict[str, Callable[[Run], None]] = {
    "tower": cmd_tower,
    "blocks": cmd_blocks,
    "flow": cmd_flow,
    "heights": cmd_heights,
    "equidist": cmd_equidist,
    "mixing": cmd_mixing,
    "render": cmd_render,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="staircase-flow",
        description="Exact experiments on staircase suspension flows.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, func in COMMANDS.items():
        p = sub.add_parser(name, help=func.__doc__.splitlines()[0], description=func.__doc__)
        p.add_argument("--config", metavar="PATH", help="JSON experiment config (defaults if omitted)")
        p.add_argument("--out", metavar="DIR", default=".", help="output directory (default: .)")
        p.add_argument("--depth", type=int, metavar="N", help="override the config stage depth")
        p.add_argument("--seed", type=int, metavar="U64", help="override the Monte Carlo seed")
        p.add_argument("--check", action="store_true",
                       help="exit with status 4 if an acceptance tolerance is violated")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run the CLI and return the exit status."""
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.depth is not None:
            if args.depth < 0:
                raise ConfigError("--depth: must be >= 0")
            cfg.depth = args.depth
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed: must be an unsigned 64-bit integer")
            cfg.seed = args.seed
        run = Run(cfg, args.out, args.check)
        COMMANDS[args.command](run)
    except (ConfigError, InvalidSpecError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetExceededError as exc:
        print(f"budget exhausted: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    for path in run.written:
        print(path)
    if args.check and run.failures:
        for msg in run.failures:
            print(f"check failed: {msg}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
