"""Enumeration kernels: compiled when the extension is built, Python otherwise."""
from __future__ import annotations

from . import _enum_py

try:
    from . import _enum_c
except ImportError:  # extension not built
    _enum_c = None

BACKENDS = {"python": _enum_py.enumerate_sequences}
if _enum_c is not None:
    BACKENDS["compiled"] = _enum_c.enumerate_sequences

DEFAULT_BACKEND = "compiled" if _enum_c is not None else "python"


def get_kernel(name: str | None = None):
    name = name or DEFAULT_BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None
