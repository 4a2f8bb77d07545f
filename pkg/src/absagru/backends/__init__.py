"""Kernel backend selection.

The hot sequence kernels (GRU recurrence, CRF lattice, char convolution)
exist twice: a compiled Cython core and a pure-numpy reference. The compiled
core is picked at import when present; ``ABSAGRU_BACKEND=python`` or
``=compiled`` forces the choice. Both expose the same functions and are
cross-checked in the test suite.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import reference

try:
    from . import _kernels as _compiled
except ImportError:
    _compiled = None

_BACKENDS = {"python": reference}
if _compiled is not None:
    _BACKENDS["compiled"] = _compiled


def _initial():
    forced = os.environ.get("ABSAGRU_BACKEND")
    if forced:
        if forced not in _BACKENDS:
            raise ConfigError(
                f"ABSAGRU_BACKEND={forced!r} unavailable; "
                f"have {sorted(_BACKENDS)}")
        return _BACKENDS[forced]
    return _BACKENDS.get("compiled", reference)


_active = _initial()


def active():
    """The module providing the kernel functions."""
    return _active


def backend_name() -> str:
    return _active.NAME


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ConfigError(f"unknown backend {name!r}; have {sorted(_BACKENDS)}")
    _active = _BACKENDS[name]
