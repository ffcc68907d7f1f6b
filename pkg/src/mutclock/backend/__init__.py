"""Kernel selection.

Two interchangeable kernels exist: a compiled Cython one (``_ckernel``) and a
pure-Python/numpy one (``_pykernel``).  They produce bit-identical output for
the same seed; the compiled one is just much faster.  Selection happens once,
on first use, honouring the MUTCLOCK_BACKEND environment variable:

    auto      compiled if importable, else python (default)
    compiled  require the compiled kernel, fail loudly if missing
    python    force the pure-Python kernel

Tests and benchmarks that need both at once import the modules directly.
"""

from __future__ import annotations

import os

_active = None


def _load():
    choice = os.environ.get("MUTCLOCK_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "compiled", "python"):
        raise ValueError(
            f"MUTCLOCK_BACKEND must be 'auto', 'compiled' or 'python', got {choice!r}"
        )
    if choice in ("auto", "compiled"):
        try:
            from . import _ckernel

            return _ckernel
        except ImportError:
            if choice == "compiled":
                raise RuntimeError(
                    "MUTCLOCK_BACKEND=compiled but the compiled kernel is not "
                    "built; reinstall the package or use MUTCLOCK_BACKEND=python"
                )
    from . import _pykernel

    return _pykernel


def get_backend():
    """Return the active kernel module (resolved once per process)."""
    global _active
    if _active is None:
        _active = _load()
    return _active


def backend_name() -> str:
    return get_backend().NAME
