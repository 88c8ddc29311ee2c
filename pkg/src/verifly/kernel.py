"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module is used. ``VERIFLY_KERNEL=python`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pykernel
from ._pykernel import ANY, ATM, BIND, EQ, G, INT, IS, LST, STRUCT, TMASK, USE_GROUND, USE_TYPES  # noqa: F401


def _load_compiled() -> ModuleType | None:
    if os.environ.get("VERIFLY_KERNEL", "").lower() == "python":
        return None
    try:
        from . import _ckernel
    except ImportError:
        return None
    return _ckernel


_compiled = _load_compiled()
impl: ModuleType = _compiled if _compiled is not None else _pykernel
BACKEND = "cython" if _compiled is not None else "python"


def backends() -> dict[str, ModuleType]:
    """Every importable backend, for tests and benchmarks."""
    out = {"python": _pykernel}
    try:
        from . import _ckernel
    except ImportError:
        pass
    else:
        out["cython"] = _ckernel
    return out


run_eqs = impl.run_eqs
project = impl.project
meet_at = impl.meet_at
lub = impl.lub
glb = impl.glb
leq = impl.leq
fnv1a64 = impl.fnv1a64
