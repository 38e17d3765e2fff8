"""Deterministic CSV and SVG emitters.

CSV files use ``'\\n'`` line endings, a header row and ``'.'`` as decimal
separator.  Reals are written with 18 significant digits by
:func:`~staircase_flow.exact.decimal_str`; exact values get their own
``*_exact`` columns holding ``"p/q"`` or ``"a + b*q"`` strings.
"""

from __future__ import annotations

import csv
import io
import os
from fractions import Fraction
from typing import Iterable, List, Mapping, Optional, Sequence

import numpy as np

from .exact import QNum, decimal_str, fraction_str
from .suspension import SegmentEnsemble, SuspensionFlow

__all__ = [
    "format_cell",
    "exact_cell",
    "csv_text",
    "write_csv",
    "write_text",
    "IDENTIFICATION_COLORS",
    "polygon_svg",
]


def format_cell(value) -> str:
    """Render one CSV cell.

    Fractions, QNums and floats become 18-digit decimals; integers,
    strings and booleans are written as is; ``None`` is empty.
    """
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, str):
        return value
    if isinstance(value, (Fraction, QNum)):
        return decimal_str(value)
    if isinstance(value, (float, np.floating)):
        if value != value:
            return "nan"
        return decimal_str(float(value))
    raise TypeError(f"cannot format {type(value).__name__} for CSV")


def exact_cell(value) -> str:
    """Exact string of a Fraction, int or QNum."""
    if isinstance(value, QNum):
        return value.exact_str()
    return fraction_str(Fraction(value))


def csv_text(columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    """CSV document with the given header; missing keys are empty cells."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        unknown = set(row) - set(columns)
        if unknown:
            raise KeyError(f"row has columns outside the header: {sorted(unknown)}")
        writer.writerow([format_cell(row.get(c)) for c in columns])
    return buf.getvalue()


def write_text(path: str, text: str) -> str:
    """Write ``text`` as UTF-8 with ``'\\n'`` newlines; returns the path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_csv(path: str, columns: Sequence[str], rows: Iterable[Mapping]) -> str:
    """Write a CSV file (see :func:`csv_text`)."""
    return write_text(path, csv_text(columns, rows))


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------
IDENTIFICATION_COLORS = {
    "sides": "#d62728",   # {0} x [0, q]  ~  {b} x [0, q]
    "step": "#2ca02c",    # {1} x [q, 1]  ~  {0} x [q, 1]
    "roof": "#1f77b4",    # graph of the roof  ~  base, via (x, f(x)) ~ (T(x), 0)
}


def _f(v: float) -> str:
    return f"{v:.6f}"


def polygon_svg(flow: SuspensionFlow, ensemble: Optional[SegmentEnsemble] = None,
                scale: int = 400, title: str = "") -> str:
    """SVG 1.1 document of the L-shaped polygon with an optional segment overlay.

    The polygon is ``[0, 1] x [0, 1]`` joined to ``[1, b] x [0, q]``.  Each
    pair of identified edges is drawn in one colour (see
    :data:`IDENTIFICATION_COLORS`) and every ensemble segment is one
    ``<line class="segment">`` element at its exact height.

    Parameters
    ----------
    flow : SuspensionFlow
    ensemble : SegmentEnsemble, optional
    scale : int
        Pixels per unit length.
    title : str
    """
    b = flow.base_limit()
    q = float(flow.field)
    pad = 20
    width = b * scale + 2 * pad
    height = scale + 2 * pad

    def X(x: float) -> str:
        return _f(pad + x * scale)

    def Y(y: float) -> str:
        return _f(pad + (1.0 - y) * scale)

    def edge(x0, y0, x1, y1, color, cls):
        return (f'<line class="{cls}" x1="{X(x0)}" y1="{Y(y0)}" x2="{X(x1)}" y2="{Y(y1)}" '
                f'stroke="{color}" stroke-width="3"/>')

    out: List[str] = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{_f(width)}" height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">',
        f"<title>{_escape(title or 'staircase suspension flow')}</title>",
        f'<desc>b={decimal_str(b)} q={decimal_str(flow.field.q)} '
        f'segments={0 if ensemble is None else len(ensemble)}</desc>',
    ]
    outline = [(0, 0), (b, 0), (b, q), (1, q), (1, 1), (0, 1)]
    pts = " ".join(f"{X(x)},{Y(y)}" for x, y in outline)
    out.append(f'<polygon class="outline" points="{pts}" fill="#f7f7f7" stroke="#444444" stroke-width="1"/>')
    c = IDENTIFICATION_COLORS
    out.append('<g class="identifications">')
    out.append(edge(0, 0, 0, q, c["sides"], "ident-sides"))
    out.append(edge(b, 0, b, q, c["sides"], "ident-sides"))
    out.append(edge(1, q, 1, 1, c["step"], "ident-step"))
    out.append(edge(0, q, 0, 1, c["step"], "ident-step"))
    out.append(edge(0, 1, 1, 1, c["roof"], "ident-roof"))
    out.append(edge(1, q, b, q, c["roof"], "ident-roof"))
    out.append(edge(0, 0, b, 0, c["roof"], "ident-roof"))
    out.append("</g>")
    out.append('<g class="segments" stroke="#000000" stroke-width="1.5">')
    if ensemble is not None:
        for s in ensemble:
            y = float(s.y)
            out.append(f'<line class="segment" x1="{X(float(s.x_lo))}" y1="{Y(y)}" '
                       f'x2="{X(float(s.x_hi))}" y2="{Y(y)}"/>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _escape(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
