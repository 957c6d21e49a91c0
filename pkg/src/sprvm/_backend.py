"""Selects the Gibbs scan-loop backend at import time.

The compiled extension is preferred when it imported cleanly; set
SPRVM_PURE_PYTHON=1 to force the numpy fallback.  Both backends implement
the same contract and consume pre-generated variates identically, so the
choice never changes results.
"""

from __future__ import annotations

import os

from . import _chains_py

_FORCE_PYTHON = os.environ.get("SPRVM_PURE_PYTHON", "").strip().lower() in {
    "1",
    "true",
    "yes",
}

try:
    if _FORCE_PYTHON:
        raise ImportError("pure-python backend forced via SPRVM_PURE_PYTHON")
    from . import _chains_cy as _compiled
except ImportError:
    _compiled = None

_active = _compiled if _compiled is not None else _chains_py

BACKEND = "cython" if _compiled is not None else "python"


def available_backends() -> dict:
    """Importable backend modules keyed by name."""
    out = {"python": _chains_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out


def get_backend(name: str):
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} not available (have: {sorted(available_backends())})"
        ) from None


def set_backend(name: str) -> None:
    """Switches the active backend (mainly for tests and benchmarks)."""
    global _active, BACKEND
    _active = get_backend(name)
    BACKEND = name


def run_sprvm_chain(*args, **kwargs):
    return _active.run_sprvm_chain(*args, **kwargs)


def run_rvm_chain(*args, **kwargs):
    return _active.run_rvm_chain(*args, **kwargs)
