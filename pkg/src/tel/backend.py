"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is always available.  ``TEL_BACKEND=python`` (or ``compiled``)
in the environment forces a choice, and set_backend() switches at
runtime, which the benchmark uses to time both.
"""

import os

from . import _kernels_py
from .errors import ArgumentError

try:
    from . import _kernels
except ImportError:
    _kernels = None

HAVE_COMPILED = _kernels is not None

_BACKENDS = {"python": _kernels_py}
if HAVE_COMPILED:
    _BACKENDS["compiled"] = _kernels


def _initial():
    name = os.environ.get("TEL_BACKEND", "")
    if name:
        if name not in _BACKENDS:
            raise ArgumentError(f"TEL_BACKEND={name!r}: unknown or unavailable backend")
        return name
    return "compiled" if HAVE_COMPILED else "python"


_active_name = _initial()


def get_backend(name):
    """Return a kernel module by name ('compiled' or 'python')."""
    if name not in _BACKENDS:
        raise ArgumentError(f"unknown or unavailable backend {name!r}")
    return _BACKENDS[name]


def set_backend(name):
    """Select the kernels used by subsequent calls; returns the previous name."""
    global _active_name
    if name not in _BACKENDS:
        raise ArgumentError(f"unknown or unavailable backend {name!r}")
    previous = _active_name
    _active_name = name
    return previous


def active_name():
    return _active_name


def active():
    """The kernel module calls should dispatch through."""
    return _BACKENDS[_active_name]
