"""Kernel backend selection: compiled core if available, numpy otherwise.

Set KT_BACKEND=python to force the fallback (used by the benchmark and the
cross-backend tests).
"""

import os

from . import _fallback

_FORCED = os.environ.get("KT_BACKEND", "").strip().lower()

if _FORCED in ("python", "fallback"):
    backend = _fallback
    _name = "python"
else:
    try:
        from . import _core as backend  # type: ignore[no-redef]
        _name = "compiled"
    except ImportError:
        if _FORCED in ("compiled", "core"):
            raise
        backend = _fallback
        _name = "python"


def backend_name() -> str:
    return _name


def get_backend(name: str):
    """Explicit backend lookup (benchmarks compare both)."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
