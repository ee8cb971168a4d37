"""Kernel selection.

The compiled ``_core`` is used when importable; set ``WAWLAB_PURE_PYTHON=1``
to force the reference implementation in ``_pycore``.
"""
import os

if os.environ.get("WAWLAB_PURE_PYTHON", "") not in ("", "0"):
    from . import _pycore as kernel
else:
    try:
        from . import _core as kernel
    except ImportError:
        from . import _pycore as kernel

BACKEND = kernel.BACKEND


def load(name):
    """Return a kernel module by name ('python' or 'cython')."""
    if name == "python":
        from . import _pycore
        return _pycore
    if name == "cython":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
