"""Selection of the compiled or pure-Python hot loops.

The compiled extension is used when it imports; setting the environment
variable ``STAIRCASE_FLOW_PURE_PYTHON=1`` forces the fallback.  Both
backends expose the same functions with identical results.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if not os.environ.get("STAIRCASE_FLOW_PURE_PYTHON"):
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "compiled"
else:
    _compiled = None

OK = _kernels_py.OK
NEED_CAPACITY = _kernels_py.NEED_CAPACITY
DEPTH_EXHAUSTED = _kernels_py.DEPTH_EXHAUSTED
BUDGET_EXCEEDED = _kernels_py.BUDGET_EXCEEDED
TABLE_EXHAUSTED = _kernels_py.TABLE_EXHAUSTED


def backends():
    """Mapping ``name -> module`` of the backends available in this build."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels as compiled  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover
        pass
    else:
        found["compiled"] = compiled
    return found


def walk_spacer_runs(r, s, n, backend=None):
    """Spacer block sizes found by walking the stage-``n`` column level by level."""
    impl = backends()[backend] if backend else _impl
    return impl.walk_spacer_runs(r, s, n)


def phi_q_run(*args, backend=None):
    """Address-ensemble stepping (see ``_kernels_py.phi_q_run``)."""
    impl = backends()[backend] if backend else _impl
    return impl.phi_q_run(*args)
