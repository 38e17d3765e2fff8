"""JSON experiment configuration.

Exact values are written as strings: rationals as ``"3/7"`` (or integers),
elements ``a + b*q`` as ``{"a": "1/5", "b": "0"}`` or the shorthand
``"1/5q"`` for ``(1/5)*q``.  The roof value ``q`` is either quadratic,
``{"mode": "quadratic", "alpha": 0, "beta": 1, "gamma": 2, "d": 2}``, or a
high-precision real, ``{"mode": "real", "value": "0.7071...", "bits": 128}``.

Every field has a default, so ``{}`` is a valid configuration (classical
staircase, ``q = 1/sqrt(2)``).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Tuple

from .exact import DEFAULT_Q, QNum, QuadraticQ, QValue, RealQ, parse_fraction
from .rank_one import InvalidSpecError, RankOneSpec
from .staircase import spec_from_description
from .suspension import DEFAULT_FLOW_DEPTH, DEFAULT_SEGMENT_BUDGET

__all__ = [
    "ConfigError",
    "RectangleConfig",
    "ExperimentConfig",
    "load_config",
    "parse_q",
    "parse_qnum",
]


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending field."""


def _fraction(value, where: str) -> Fraction:
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a rational, got {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return parse_fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: rationals must be integers or strings like \"3/7\", got {value!r}")


def parse_q(data: Optional[dict], where: str = "q") -> QValue:
    """Build the roof value from its JSON description (default ``1/sqrt(2)``)."""
    if data is None:
        return DEFAULT_Q
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    mode = data.get("mode", "quadratic")
    try:
        if mode == "quadratic":
            for key in ("alpha", "beta", "gamma", "d"):
                if key not in data:
                    raise ConfigError(f"{where}.{key}: missing")
                if isinstance(data[key], bool) or not isinstance(data[key], int):
                    raise ConfigError(f"{where}.{key}: expected an integer")
            return QuadraticQ(data["alpha"], data["beta"], data["gamma"], data["d"])
        if mode == "real":
            if "value" not in data or not isinstance(data["value"], str):
                raise ConfigError(f"{where}.value: expected a decimal string")
            return RealQ(data["value"], int(data.get("bits", 128)))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.mode: expected 'quadratic' or 'real', got {mode!r}")


_QNUM_TEXT = re.compile(r"^\s*([-+]?[0-9./]+)\s*([-+])\s*([0-9./]+)\s*\*\s*q\s*$")


def parse_qnum(value, q: QValue, where: str) -> QNum:
    """Parse ``a + b*q``.

    Accepted forms are ``{"a": .., "b": ..}``, a rational ``"p/r"``, a
    multiple of ``q`` written ``"p/rq"`` and the text ``"a+b*q"`` /
    ``"a-b*q"`` produced by :meth:`QNum.exact_str`.
    """
    if isinstance(value, str):
        m = _QNUM_TEXT.match(value)
        if m:
            a = _fraction(m.group(1), where)
            b = _fraction(m.group(3), where)
            return q.num(a, -b if m.group(2) == "-" else b)
    if isinstance(value, dict):
        unknown = set(value) - {"a", "b"}
        if unknown:
            raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
        return q.num(_fraction(value.get("a", 0), where + ".a"), _fraction(value.get("b", 0), where + ".b"))
    if isinstance(value, str) and value.strip().endswith("q"):
        body = value.strip()[:-1].rstrip("*").strip() or "1"
        return q.num(0, _fraction(body, where))
    return q.num(_fraction(value, where), 0)


@dataclass(frozen=True)
class RectangleConfig:
    """Rectangle over a level ``(stage, level)`` with window ``[lo, hi)``."""

    stage: int
    level: int
    lo: QNum
    hi: QNum


@dataclass
class ExperimentConfig:
    """Validated experiment configuration.

    Attributes
    ----------
    spec : RankOneSpec
    q : QValue
    depth : int
        Stage depth for tables and catalogs.
    flow_depth, segment_budget : int
        Budgets of the flow engine.
    level : (int, int)
        Source level for flow, heights and render runs.
    times : list of QNum
        Flow times for the ``flow`` subcommand.
    k : int
        Number of time-``q`` steps for ``heights`` and ``render``.
    min_heights : int
        Distinct-height threshold for ``heights`` checks.
    windows : list of (Fraction, Fraction)
        Fractions of the roof defining the height windows.
    cylinders : list of (int, int)
    equidist_N : int
    delta, eps : float
    t_grid : list of Fraction
    A, B : list of RectangleConfig
        Sets for the correlation curve.
    R : list of RectangleConfig
        Target set of the mixing criterion check.
    seed : int
        Seed of the Monte Carlo cross-check (the only random component).
    mc_samples : int
        Monte Carlo sample count; ``0`` skips the cross-check.
    svg_scale : int
        Pixels per unit length in rendered SVG.
    render_k : int
        Number of time-``q`` steps applied before rendering.
    """

    spec: RankOneSpec
    q: QValue
    raw: Dict[str, Any]
    depth: int = 6
    flow_depth: int = DEFAULT_FLOW_DEPTH
    segment_budget: int = DEFAULT_SEGMENT_BUDGET
    level: Tuple[int, int] = (3, 0)
    times: List[QNum] = field(default_factory=list)
    k: int = 200
    min_heights: int = 0
    windows: List[Tuple[Fraction, Fraction]] = field(default_factory=list)
    cylinders: List[Tuple[int, int]] = field(default_factory=list)
    equidist_N: int = 10_000
    delta: float = 0.1
    eps: float = 0.15
    t_grid: List[Fraction] = field(default_factory=list)
    A: List[RectangleConfig] = field(default_factory=list)
    B: List[RectangleConfig] = field(default_factory=list)
    R: List[RectangleConfig] = field(default_factory=list)
    seed: int = 0
    mc_samples: int = 0
    svg_scale: int = 400
    render_k: int = 30

    def to_json(self) -> str:
        """Canonical JSON of the raw input (sorted keys)."""
        return json.dumps(self.raw, sort_keys=True, indent=2)


_KNOWN = {
    "staircase", "q", "depth", "flow_depth", "segment_budget", "level", "times", "k",
    "min_heights", "windows", "cylinders", "equidist_N", "delta", "eps", "t_grid",
    "A", "B", "R", "seed", "mc_samples", "svg_scale", "render_k",
}


def _int(data, key, default, where, minimum=None):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where}{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{where}{key}: must be >= {minimum}, got {v}")
    return v


def _prob(data, key, default):
    v = data.get(key, default)
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{key}: expected a number, got {v!r}")
    if not 0 < v < 1 and not (key == "eps" and v == 1):
        raise ConfigError(f"{key}: must lie in (0, 1), got {v}")
    return float(v)


def _pair(v, where) -> Tuple[int, int]:
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or any(isinstance(x, bool) or not isinstance(x, int) for x in v)):
        raise ConfigError(f"{where}: expected [stage, level]")
    if v[0] < 0 or v[1] < 0:
        raise ConfigError(f"{where}: stage and level must be >= 0")
    return int(v[0]), int(v[1])


def _rects(items, q, where) -> List[RectangleConfig]:
    if not isinstance(items, list):
        raise ConfigError(f"{where}: expected a list of rectangles")
    out = []
    for idx, item in enumerate(items):
        w = f"{where}[{idx}]"
        if not isinstance(item, dict):
            raise ConfigError(f"{w}: expected an object")
        stage, level = _pair(item.get("level"), w + ".level")
        window = item.get("window")
        if not isinstance(window, list) or len(window) != 2:
            raise ConfigError(f"{w}.window: expected [lo, hi]")
        lo = parse_qnum(window[0], q, w + ".window[0]")
        hi = parse_qnum(window[1], q, w + ".window[1]")
        out.append(RectangleConfig(stage, level, lo, hi))
    return out


def config_from_dict(data: dict) -> ExperimentConfig:
    """Validate a parsed JSON object.

    Raises
    ------
    ConfigError
        On unknown keys, wrong types or out-of-range values.
    """
    if not isinstance(data, dict):
        raise ConfigError("top level: expected a JSON object")
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigError(f"unknown keys: {sorted(unknown)}")
    try:
        spec = spec_from_description(data.get("staircase", {"kind": "classical"}))
        spec.r(1)
    except InvalidSpecError as exc:
        raise ConfigError(f"staircase: {exc}") from None
    q = parse_q(data.get("q"))
    cfg = ExperimentConfig(spec=spec, q=q, raw=data)
    cfg.depth = _int(data, "depth", 6, "", 0)
    cfg.flow_depth = _int(data, "flow_depth", DEFAULT_FLOW_DEPTH, "", 1)
    cfg.segment_budget = _int(data, "segment_budget", DEFAULT_SEGMENT_BUDGET, "", 1)
    cfg.level = _pair(data.get("level", [3, 0]), "level")
    cfg.times = [parse_qnum(v, q, f"times[{i}]") for i, v in enumerate(data.get("times", ["0", "10"]))]
    for i, t in enumerate(cfg.times):
        if t.sign() < 0:
            raise ConfigError(f"times[{i}]: must be >= 0")
    cfg.k = _int(data, "k", 200, "", 0)
    cfg.min_heights = _int(data, "min_heights", 0, "", 0)
    windows = data.get("windows", [["0", "1/4"], ["1/4", "1/2"], ["1/2", "1"]])
    if not isinstance(windows, list):
        raise ConfigError("windows: expected a list of [lo, hi] pairs")
    for i, w in enumerate(windows):
        if not isinstance(w, list) or len(w) != 2:
            raise ConfigError(f"windows[{i}]: expected [lo, hi]")
        lo, hi = _fraction(w[0], f"windows[{i}][0]"), _fraction(w[1], f"windows[{i}][1]")
        if not 0 <= lo <= hi <= 1:
            raise ConfigError(f"windows[{i}]: need 0 <= lo <= hi <= 1 (fractions of the roof)")
        cfg.windows.append((lo, hi))
    cfg.cylinders = [_pair(c, f"cylinders[{i}]") for i, c in enumerate(data.get("cylinders", [[2, 0], [2, 1]]))]
    cfg.equidist_N = _int(data, "equidist_N", 10_000, "", 1)
    cfg.delta = _prob(data, "delta", 0.1)
    cfg.eps = _prob(data, "eps", 0.15)
    grid_raw = data.get("t_grid", ["10", "20", "40", "80"])
    if not isinstance(grid_raw, list) or not grid_raw:
        raise ConfigError("t_grid: expected a non-empty list")
    cfg.t_grid = [_fraction(v, f"t_grid[{i}]") for i, v in enumerate(grid_raw)]
    if any(t < 0 for t in cfg.t_grid):
        raise ConfigError("t_grid: times must be >= 0")
    if cfg.t_grid != sorted(cfg.t_grid):
        raise ConfigError("t_grid: times must be increasing")
    cfg.A = _rects(data.get("A", [{"level": [2, 0], "window": ["0", "1/2"]}]), q, "A")
    cfg.B = _rects(data.get("B", [{"level": [2, 1], "window": ["1/4", "3/4"]}]), q, "B")
    cfg.R = _rects(data.get("R", [{"level": [2, 0], "window": ["1/5", "7/10"]}]), q, "R")
    cfg.seed = _int(data, "seed", 0, "", 0)
    if cfg.seed >= 2 ** 64:
        raise ConfigError("seed: must fit in 64 bits")
    cfg.mc_samples = _int(data, "mc_samples", 0, "", 0)
    cfg.svg_scale = _int(data, "svg_scale", 400, "", 10)
    cfg.render_k = _int(data, "render_k", 30, "", 0)
    return cfg


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read and validate a JSON file (``None`` gives the defaults)."""
    if path is None:
        return config_from_dict({})
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data)
